"""Counter-based random substreams.

Every random quantity in an experiment is drawn from a generator keyed by
``(master_seed, tag, index...)``.  Results therefore do not depend on how
work is split across workers.
"""

import numpy as np

# substream tags
CHANNEL = 0
INIT = 1
RESTART = 2
GAUSSIAN_BATCH = 3
PROPERTY = 4


def substream(seed, *key):
    """Return an independent Philox generator for ``(seed, *key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def complex_normal(rng, shape, variance=1.0):
    """Circularly-symmetric complex Gaussian samples with the given variance."""
    scale = np.sqrt(variance / 2.0)
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return scale * (re + 1j * im)
