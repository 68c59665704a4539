"""Deterministic seed derivation for reproducible (and parallelizable) experiments.

Every random stream in this package is a Philox counter-based generator keyed
by a master seed plus an integer path, hashed through ``numpy.random.SeedSequence``.
The same ``(master_seed, *path)`` always yields the same stream, on any platform
and regardless of how work is distributed across processes.  Batch-level streams
are keyed by a stable text label (machine, phase policy, noise rate, cell) so
that two commands running the same physical experiment draw identical samples.
"""
from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["derive_rng", "derive_seed", "label_key", "batch_seed"]


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Philox generator keyed on ``(master_seed, *path)``."""
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(master_seed: int, *path: int) -> int:
    """A 64-bit child seed derived from ``(master_seed, *path)``.

    Children with different paths are statistically independent; handing the
    result to another ``derive_*`` call extends the path hierarchically.
    """
    ss = np.random.SeedSequence(entropy=int(master_seed), spawn_key=tuple(int(p) for p in path))
    return int(ss.generate_state(1, np.uint64)[0])


def label_key(label: str) -> tuple[int, int]:
    """Map a text label to a stable pair of 64-bit path components (SHA-256 based)."""
    digest = hashlib.sha256(label.encode("utf-8")).digest()
    return (
        int.from_bytes(digest[:8], "big"),
        int.from_bytes(digest[8:16], "big"),
    )


def batch_seed(master_seed: int, label: str) -> int:
    """Seed for the experiment batch identified by ``label`` under ``master_seed``."""
    return derive_seed(master_seed, *label_key(label))
