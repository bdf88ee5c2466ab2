"""
Seeded random streams
...

All randomness in qgrad is drawn from counter-based Philox generators so a
(seed, stream, substream) triple reproduces the same numbers on every
platform. The stream id sits in the most significant counter word, which
keeps distinct consumers 2**192 draws apart.
"""
import numpy as np
import qgrad.constants as constants
from qgrad.exceptions import ConfigError

MAX_SEED = 2 ** 64


def make_rng(seed=constants.DEFAULT_SEED, stream=0, substream=0):
    """
    Summary:
    Build a numpy Generator on a Philox bit generator

    Parameters:
    seed : int
        64-bit seed, used as the Philox key
    stream : int
        consumer id, one of the STREAM_* constants
    substream : int
        index inside a consumer, e.g. the sample number of a seeded suite

    Return:
    rng : numpy.random.Generator
        an independent, reproducible generator
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise ConfigError(f"Error: seed must be an integer, got {seed!r}")
    if not 0 <= int(seed) < MAX_SEED:
        raise ConfigError(f"Error: seed must lie in [0, 2**64), got {seed!r}")
    counter = np.array([0, 0, int(substream), int(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=int(seed), counter=counter))
