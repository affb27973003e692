import numpy as np


def derive_seed(root, *keys):
    """Deterministic 64-bit child seed of ``root`` addressed by integer ``keys``.

    The child depends only on (root, keys), never on call order, so work
    items can be evaluated in any order or in parallel.
    """
    seq = np.random.SeedSequence(int(root), spawn_key=tuple(int(k) for k in keys))
    return int(seq.generate_state(1, dtype=np.uint64)[0])


def rng_for(root, *keys):
    return np.random.default_rng(derive_seed(root, *keys))
