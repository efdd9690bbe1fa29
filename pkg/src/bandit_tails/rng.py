"""Random streams.

Every replication (episode or sample path) gets its own Philox stream keyed
by ``derive_seed(base_seed, rep_id)``. Philox is counter based, so a stream
depends only on its key and never on which worker consumed it.
"""

from __future__ import annotations

import numpy as np

__all__ = ["derive_seed", "make_rng", "uniforms"]


def derive_seed(base_seed: int, rep_id: int) -> int:
    """Mix ``base_seed`` and ``rep_id`` into a 64-bit key.

    Uses numpy's SeedSequence hash, which decorrelates neighbouring inputs;
    sequential integers are never used as keys directly.
    """
    if base_seed < 0 or rep_id < 0:
        raise ValueError("seeds and replication ids must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(base_seed), spawn_key=(int(rep_id),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed)))


def uniforms(seed: int, n: int) -> np.ndarray:
    """The first ``n`` draws of ``make_rng(seed).random()``, as one array."""
    return make_rng(seed).random(n)
