"""Deterministic, splittable random streams.

Streams are identified by a path of names hashed into a Philox key, so any
component can derive its own independent stream from (seed, path) alone.
That makes per-step randomness (dropout masks, batch sampling) a pure
function of the root seed and the step index, which is what lets training
resume bit-exactly from a checkpoint.
"""

import hashlib

import numpy as np

__all__ = ["Rng"]

_ROOT_TAG = b"relsql-rng-v1"


class Rng:
    """A node in the stream tree; derive children by name, then draw."""

    __slots__ = ("_key",)

    def __init__(self, key: bytes):
        self._key = key

    @classmethod
    def from_seed(cls, seed: int) -> "Rng":
        payload = _ROOT_TAG + int(seed).to_bytes(16, "little", signed=True)
        return cls(hashlib.sha256(payload).digest())

    def child(self, *names) -> "Rng":
        h = hashlib.sha256(self._key)
        for name in names:
            h.update(b"/")
            h.update(str(name).encode("utf-8"))
        return Rng(h.digest())

    def generator(self) -> np.random.Generator:
        """A fresh Generator for this stream; counter-based, so cheap."""
        key = int.from_bytes(self._key[:16], "little")
        return np.random.Generator(np.random.Philox(key=key))

    def __repr__(self):
        return f"Rng({self._key.hex()[:12]}...)"
