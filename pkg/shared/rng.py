"""Seeded random streams.

Every stream is a numpy ``Generator`` over the PCG64 bit generator; normal
variates come from numpy's ziggurat sampler. Independent streams for one run
are spawned from a single ``SeedSequence`` so runs never share state.
"""
from typing import List

import numpy as np

# stream indices spawned per run
INIT_STREAM = 0
BATCH_STREAM = 1
DATA_STREAM = 2
RUN_STREAMS = 3


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed)))


def spawn_streams(seed: int, count: int = RUN_STREAMS) -> List[np.random.Generator]:
    """Independent generators derived from one seed"""
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.Generator(np.random.PCG64(child)) for child in children]
