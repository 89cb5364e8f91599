"""Counter-based random substreams.

Each ``(seed, *key)`` tuple gets its own Philox key. Sample ``i`` of a stream
is a pure function of the key and ``i``: it is built from raw words ``2i`` and
``2i + 1`` of the Philox counter sequence, so results never depend on how
many draws other streams made or in what order streams were consumed.
"""

from __future__ import annotations

import numpy as np

_TWO_PI = 2.0 * np.pi
_INV_2_53 = 1.0 / 9007199254740992.0


def philox(seed: int, *key: int) -> np.random.Generator:
    """Generator on a Philox substream identified by ``(seed, *key)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def standard_normal_stream(seed: int, key: tuple, n: int) -> np.ndarray:
    """``n`` standard normals; element ``i`` depends only on ``(seed, key, i)``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key))
    raw = np.random.Philox(ss).random_raw(2 * n).reshape(n, 2)
    u1 = ((raw[:, 0] >> np.uint64(11)).astype(np.float64) + 1.0) * _INV_2_53
    u2 = (raw[:, 1] >> np.uint64(11)).astype(np.float64) * _INV_2_53
    return np.sqrt(-2.0 * np.log(u1)) * np.cos(_TWO_PI * u2)
