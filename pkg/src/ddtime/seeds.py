"""Deterministic seed derivation.

A master seed fans out to per-stage and per-item seeds through a
SplitMix64-style finalizer: each path component XORs into the state scaled
by the 64-bit golden ratio, then gets mixed. The derivation is documented
and stable, so any pipeline stage can be rerun independently yet
reproducibly.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15

# stage tags used by the CLI and the distillation loop
STAGE_TEACHERS = 1
STAGE_INIT = 2
STAGE_DISTILL = 3
STAGE_EVAL = 4


def splitmix64(x: int) -> int:
    """The SplitMix64 output mix of a 64-bit state."""
    x = (x + _GOLDEN) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def derive_seed(master: int, *path: int) -> int:
    """Mix a master seed with a path of integers into a fresh 64-bit seed."""
    state = master & _MASK
    for part in path:
        state = splitmix64(state ^ ((part * _GOLDEN) & _MASK))
    return state
