"""Seeded random streams.

Every piece of randomness in the toolkit is drawn from a named sub-stream of
one root seed, so switching one component on or off never perturbs the draws
of another.
"""

import hashlib

import numpy as np


def _name_entropy(name: str) -> int:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(root_seed: int, *names) -> np.random.Generator:
    """Generator for the sub-stream identified by `names` under `root_seed`.

    Names may be strings or integers (e.g. run indices); the same
    (root_seed, names) always yields the same stream.
    """
    entropy = [int(root_seed) & 0xFFFFFFFFFFFFFFFF]
    for name in names:
        if isinstance(name, str):
            entropy.append(_name_entropy(name))
        else:
            entropy.append(int(name) & 0xFFFFFFFFFFFFFFFF)
    return np.random.default_rng(np.random.SeedSequence(entropy))


def subseed(root_seed: int, *names) -> int:
    """Integer seed for the named sub-stream (for configs that take seeds)."""
    return int(substream(root_seed, *names).integers(0, 2**63 - 1))
