"""Counter-based random streams.

Every random quantity in the package is drawn from a Philox stream keyed by
``(seed, stream_id)``.  Philox is counter based: output ``i`` of a stream is a
pure function of the key and ``i``, so results never depend on how trials are
distributed over workers.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

# stream ids reserved per purpose; trial-indexed streams use the trial seed
SITES = 0
WALKS = 1
LEVELS = 2
PROBES = 3
NORMALS = 4
CAPACITY = 5


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    key = np.array([int(seed) & MASK64, int(stream) & MASK64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def trial_seed(master: int, trial: int) -> int:
    """Derive the 64-bit seed of trial ``trial`` from a master seed."""
    ss = np.random.SeedSequence(int(master) & MASK64, spawn_key=(int(trial),))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def trial_seeds(master: int, trials: int) -> list[int]:
    return [trial_seed(master, t) for t in range(trials)]


def site_uniforms(seed: int, n: int) -> np.ndarray:
    """Uniforms in [0, 1) indexed by site: entry i is counter position i of the
    site stream, independent of the window it is used on."""
    return generator(seed, SITES).random(n)
