"""Counter-based RNG streams for reproducible, order-independent sampling."""

from __future__ import annotations

import numpy as np


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Philox stream for one trajectory, derived from (master_seed, index).

    Streams are independent of how trajectories are batched or scheduled, so
    accumulated statistics are reproducible for a fixed trajectory count.
    """
    seq = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(seq))
