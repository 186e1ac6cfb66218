"""Deterministic per-trial seeds.

``derive_seed(master, name, index) = splitmix64(master ^ fnv1a64(name) ^ index)``
with

* FNV-1a 64: offset basis ``0xcbf29ce484222325``, prime ``0x100000001b3``,
  over the UTF-8 bytes of ``name``;
* splitmix64 finalizer: ``z += 0x9E3779B97F4A7C15``;
  ``z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9``;
  ``z = (z ^ (z >> 27)) * 0x94D049BB133111EB``; ``z ^ (z >> 31)``;

all arithmetic modulo 2^64.  Trial generators are ``PCG64(child_seed)``.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
MIX_1 = 0xBF58476D1CE4E5B9
MIX_2 = 0x94D049BB133111EB


def fnv1a64(text: str) -> int:
    value = FNV_OFFSET
    for byte in text.encode("utf-8"):
        value = ((value ^ byte) * FNV_PRIME) & MASK64
    return value


def splitmix64(value: int) -> int:
    z = (value + GOLDEN_GAMMA) & MASK64
    z = ((z ^ (z >> 30)) * MIX_1) & MASK64
    z = ((z ^ (z >> 27)) * MIX_2) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, experiment_name: str, trial_index: int) -> int:
    """64-bit child seed of trial ``trial_index`` of ``experiment_name``."""

    return splitmix64((master_seed & MASK64) ^ fnv1a64(experiment_name) ^ (trial_index & MASK64))


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed))


def trial_rng(master_seed: int, experiment_name: str, trial_index: int) -> np.random.Generator:
    return make_rng(derive_seed(master_seed, experiment_name, trial_index))
