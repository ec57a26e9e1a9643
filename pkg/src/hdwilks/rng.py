"""Counter-based random streams keyed by (master seed, replication, role).

Every replication draws from its own Philox stream, so results do not depend
on how replications are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

DEFAULT_SEED = 20120914

ROLE_B = 0
ROLE_Z = 1
ROLE_NOISE = 2
ROLE_WISHART_1 = 3
ROLE_WISHART_2 = 4


def stream(seed: int, rep: int, role: int) -> np.random.Generator:
    """Independent generator for one (replication, role) pair under ``seed``."""
    if seed < 0 or rep < 0 or role < 0:
        raise ValueError("seed, replication index and role must be non-negative")
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(rep), int(role)))
    return np.random.Generator(np.random.Philox(ss))
