"""Counter-based random streams keyed by (master seed, stream id, trial index).

Every trial owns an independent Philox stream whose key is derived from the
lineage tuple, so results never depend on scheduling or worker count.
"""
from __future__ import annotations

import numpy as np

# Stream ids keep unrelated consumers of one master seed apart.
SCENARIOS = 0
GHOST = 1
CONTROL = 2
PILOT = 3
PROBES = 4
INSTANCE = 5


def stream(seed: int, *keys: int) -> np.random.Generator:
    """Return the generator for lineage ``(seed, *keys)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.Generator(np.random.Philox(ss))
