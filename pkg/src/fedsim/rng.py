"""Keyed, hierarchical random streams.

Every source of randomness in a simulation is derived from a single root
seed plus a path of labels such as ``("batch", client_id, round_idx)``.
Streams with distinct paths are statistically independent, and a stream's
output depends only on ``(seed, path)`` -- never on the order in which
other streams were created or consumed.  This is what makes experiment
results reproducible and independent of client execution order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np


def _encode(part) -> int:
    """Map a path component to a stable integer (no salted ``hash()``)."""
    if isinstance(part, (int, np.integer)):
        return int(part)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")
    raise TypeError(f"rng path components must be int or str, got {type(part)!r}")


@dataclass(frozen=True)
class RngStream:
    """A root seed plus a hierarchical path identifying one substream."""

    seed: int
    path: tuple = ()

    def child(self, *parts) -> "RngStream":
        """Return the substream at ``path + parts``."""
        return RngStream(self.seed, self.path + tuple(parts))

    def generator(self) -> np.random.Generator:
        """Instantiate a fresh numpy generator for this stream.

        Each call returns an identical, independent generator; consuming
        one never advances another.
        """
        entropy = [int(self.seed) & 0xFFFFFFFFFFFFFFFF]
        entropy.extend(_encode(p) for p in self.path)
        return np.random.default_rng(np.random.SeedSequence(entropy))
