"""Language-specific neuron identification and steering for tiny decoder transformers."""

from .errors import NatlasError, NatlasRuntimeError, ValidationError
from .hashing import derive_seed, stable_int_hash
from .logging import jlog, runlog
from .metadata import build_report_metadata
from .versioning import TOOLKIT_VERSION, get_toolkit_version

__all__ = [
    "NatlasError",
    "NatlasRuntimeError",
    "TOOLKIT_VERSION",
    "ValidationError",
    "build_report_metadata",
    "derive_seed",
    "get_toolkit_version",
    "jlog",
    "runlog",
    "stable_int_hash",
]
