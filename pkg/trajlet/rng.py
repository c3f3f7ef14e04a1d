"""
trajlet.rng

Named random substreams derived from one u64 seed. Each consumer asks for
its stream by name, so adding draws in one component never shifts the
numbers another component sees.

:author: trajlet contributors
:license: GNU General Public License v3
"""


from typing import Tuple

import numpy as np


__all__ = (
    'STREAMS',
    'generator',
    'seed_sequence',
    'philox',
)


STREAMS: Tuple[str, ...] = (
    'data',
    'init',
    'batch',
    'dropout',
    'mining',
    'kmeans',
)


def seed_sequence(seed: int, stream: str, *keys: int) -> np.random.SeedSequence:
    """
    The SeedSequence for ``stream`` under ``seed``, optionally narrowed by
    further integer ``keys`` (a step number, a layer index).

    :raises KeyError: for a stream name not in :data:`STREAMS`
    """

    if stream not in STREAMS:
        raise KeyError(f"Unknown random stream: {stream}")

    return np.random.SeedSequence(
        entropy=int(seed),
        spawn_key=(STREAMS.index(stream), *map(int, keys)))


def generator(seed: int, stream: str, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        seed_sequence(seed, stream, *keys)))


def philox(seed: int, stream: str, *keys: int) -> np.random.Generator:
    """
    A counter-based generator. Used for dropout masks, which must replay
    identically whenever the same (seed, step, site) key is asked for.
    """

    return np.random.Generator(np.random.Philox(
        seed_sequence(seed, stream, *keys)))


# The end.
