"""Derive independent sub-seeds from one global seed.

Each consumer gets ``SeedSequence([global_seed, tag])`` where ``tag`` is a
fixed integer per role, so changing how one component draws random numbers
never shifts another component's stream.
"""

import numpy as np

ROLE_TAGS = {
    "synthetic": 1,
    "split": 2,
    "shuffle": 3,
    "dropout": 4,
    "init": 5,
}

_MASK64 = (1 << 64) - 1


def derive_seed(seed: int, role: str, index: int = 0) -> int:
    """Return a 64-bit sub-seed for ``role`` (and an optional per-item index)."""
    if role not in ROLE_TAGS:
        raise KeyError(f"unknown seed role {role!r}")
    ss = np.random.SeedSequence([seed & _MASK64, ROLE_TAGS[role], index])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed & _MASK64)
