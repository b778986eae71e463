"""Seed-stream derivation and simplex sampling.

All randomness in the package flows through generators built here. A
stream is addressed by a master seed plus a tuple of small integers
(for example seed, scenario, repetition, purpose), so any part of a
run can be reproduced in isolation without replaying the draws that
came before it.
"""

import numpy as np


def stream(seed, *path):
    """Return an independent generator for an integer path under a seed.

    The same (seed, path) pair always yields a generator in the same
    state, and distinct paths yield statistically independent streams.
    """
    key = tuple(int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))


def sample_simplex(rng, dim, size=None):
    """Draw uniformly from the probability simplex over `dim` outcomes.

    Normalized standard exponentials, i.e. a flat Dirichlet. Returns
    shape (dim,) when size is None, else (size, dim). For dim == 2 the
    first coordinate is Uniform[0, 1].
    """
    if dim < 1:
        raise ValueError("simplex dimension must be at least 1")
    if size is None:
        e = rng.standard_exponential(dim)
        return e / e.sum()
    e = rng.standard_exponential((size, dim))
    return e / e.sum(axis=1, keepdims=True)
