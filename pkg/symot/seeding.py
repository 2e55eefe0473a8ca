import numpy as np

# one integer seed fans out into independent streams, one per purpose
STREAMS = {
    "init": 1,
    "shuffle": 2,
    "data": 3,
    "bandwidth": 4,
    "roundtrip": 5,
}


def rng_for(seed: int, stream: str, *keys: int) -> np.random.Generator:
    """Counter-based generator for ``stream``; extra integer keys split it further."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    entropy = [int(seed), STREAMS[stream], *(int(k) for k in keys)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
