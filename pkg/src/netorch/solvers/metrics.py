from __future__ import annotations

import numpy as np

from netorch.errors import AllZero


def jain_index(x) -> float:
    """(sum x)^2 / (n * sum x^2); 1 means perfectly equal."""
    v = np.asarray(x, dtype=float).ravel()
    if v.size == 0 or np.any(v < 0):
        raise ValueError("jain_index needs a non-empty non-negative vector")
    sq = float(np.dot(v, v))
    if sq == 0.0:
        raise AllZero("all entries are zero")
    return float(v.sum()) ** 2 / (v.size * sq)


def geometric_mean(x) -> float:
    v = np.asarray(x, dtype=float).ravel()
    if np.any(v <= 0):
        return 0.0
    return float(np.exp(np.mean(np.log(v))))
