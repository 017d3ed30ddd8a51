"""Deterministic random streams keyed by integer tuples.

Every random draw in the package goes through :func:`make_rng`, which builds
a counter-based Philox generator from a seed plus any number of integer
keys (realization index, shift, ...). Equal keys give equal streams in any
process, so parallel runs reproduce serial ones.
"""

import numpy as np


def make_rng(seed, *keys) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        if keys:
            raise TypeError("keys are not accepted together with a Generator")
        return seed
    if isinstance(seed, (tuple, list)):
        entropy = [int(s) for s in seed] + [int(x) for x in keys]
    else:
        entropy = [int(seed)] + [int(x) for x in keys]
    if any(e < 0 for e in entropy):
        raise ValueError(f"seed and keys must be non-negative, got {entropy}")
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
