import numpy as np

from sparsinv.sparsity import SparsityPattern


def random_lyapunov_pattern(rng: np.random.Generator, n: int, density=None) -> SparsityPattern:
    """Symmetric pattern with unit diagonal."""
    p = rng.uniform(0.05, 0.5) if density is None else density
    B = rng.random((n, n)) < p
    B = B | B.T | np.eye(n, dtype=bool)
    return SparsityPattern(B)


def random_pattern(rng: np.random.Generator, m: int, n: int, density=None) -> SparsityPattern:
    p = rng.uniform(0.1, 0.9) if density is None else density
    return SparsityPattern(rng.random((m, n)) < p)
