"""
Named random streams.

Every consumer of randomness draws from its own generator keyed by
(seed, purpose, indices...), so adding draws in one place never shifts
another and results do not depend on batching or thread scheduling.
"""
import numpy as np

INIT = 1
SPLIT = 2
SHUFFLE = 3
RECOGNITION_NOISE = 4
PRIOR = 5
ORACLE_FRAME = 6
EVAL_FRAME = 7
SAMPLE = 8


def stream(seed: int, purpose: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(purpose,) + tuple(int(k) for k in keys)))
