"""Byte-level tokenizer: ids 0..255 are raw bytes, then bos/eos/pad."""

from __future__ import annotations

from collections.abc import Iterable

N_BYTES = 256
BOS_ID = 256
EOS_ID = 257
PAD_ID = 258
VOCAB_SIZE = 259
SPECIAL_IDS = (BOS_ID, EOS_ID, PAD_ID)


def tokenize(text: str | bytes) -> list[int]:
    data = text.encode("utf-8") if isinstance(text, str) else text
    return list(data)


def detokenize(ids: Iterable[int]) -> str:
    """Decode byte ids, dropping special ids; invalid UTF-8 becomes U+FFFD."""
    return bytes(i for i in ids if 0 <= i < N_BYTES).decode("utf-8", errors="replace")


def token_repr(token_id: int) -> str:
    if token_id == BOS_ID:
        return "<bos>"
    if token_id == EOS_ID:
        return "<eos>"
    if token_id == PAD_ID:
        return "<pad>"
    if token_id < 0x80:
        return chr(token_id)
    return f"<0x{token_id:02X}>"


__all__ = ["BOS_ID", "EOS_ID", "N_BYTES", "PAD_ID", "SPECIAL_IDS", "VOCAB_SIZE", "detokenize", "token_repr", "tokenize"]
