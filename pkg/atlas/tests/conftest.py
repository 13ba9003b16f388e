import pytest
from natlas.corpus import LanguageRegistry, planted_languages, synthesize_corpus
from natlas.lape import AccumulateConfig, accumulate, compute_lape, select
from natlas.model import TinyDecoder, default_plant, plant_model, planted_config
from natlas.model.plant import PLANT_PER_LANG

SEED = 7
N_LANGS = 4
ALPHABET = 6
PER_LANG = PLANT_PER_LANG


@pytest.fixture(scope="session")
def planted_registry():
    return LanguageRegistry(planted_languages(N_LANGS, ALPHABET, SEED))


@pytest.fixture(scope="session")
def planted(planted_registry):
    config = planted_config()
    layers = tuple(range(config.n_layers // 2, config.n_layers))
    plant = default_plant(list(planted_registry), config, PER_LANG, layers, SEED)
    return plant_model(list(planted_registry), plant, config, seed=SEED)


@pytest.fixture(scope="session")
def planted_ckpt(planted):
    return planted[0]


@pytest.fixture(scope="session")
def planted_ledger(planted):
    return planted[1]


@pytest.fixture(scope="session")
def planted_decoder(planted_ckpt):
    return TinyDecoder.from_checkpoint(planted_ckpt)


@pytest.fixture(scope="session")
def planted_corpus(planted_registry):
    return synthesize_corpus(planted_registry, n_docs=4, doc_len=64, seed=SEED)


@pytest.fixture(scope="session")
def planted_stats(planted_ckpt, planted_corpus, planted_registry):
    return accumulate(planted_ckpt, planted_corpus, AccumulateConfig(context_len=64, stride=32), registry=planted_registry)


@pytest.fixture(scope="session")
def planted_table(planted_stats):
    return compute_lape(planted_stats)


@pytest.fixture(scope="session")
def planted_sets(planted_table):
    return select(planted_table, 1.0).sets
