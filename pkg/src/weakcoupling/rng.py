"""Counter-based, splittable random streams.

Every Monte-Carlo estimator draws its samples in fixed-size blocks. Block
``b`` of a run with master seed ``s`` uses a Philox generator keyed by
``SeedSequence(s, spawn_key=(stream, b))``, so any block can be regenerated on its
own and results do not depend on how blocks are scheduled.
"""

import numpy as np

BLOCK_SIZE = 16384


def block_generator(seed: int, block: int, stream: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(block)))
    return np.random.Generator(np.random.Philox(ss))


def block_sizes(n: int, block_size: int = BLOCK_SIZE):
    """Yield ``(block_index, size)`` covering ``n`` samples."""
    if n <= 0:
        raise ValueError(f"sample count must be positive, got {n}")
    b = 0
    while n > 0:
        m = min(n, block_size)
        yield b, m
        n -= m
        b += 1


def uniform_ball(rng: np.random.Generator, n: int, radius: float = 1.0) -> np.ndarray:
    x = rng.standard_normal((n, 3))
    x /= np.linalg.norm(x, axis=1)[:, None]
    return x * (radius * rng.random(n) ** (1.0 / 3.0))[:, None]
