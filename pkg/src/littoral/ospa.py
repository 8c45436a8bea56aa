"""Optimal sub-pattern assignment (OSPA) distance between point sets."""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


@dataclass(frozen=True)
class OspaParams:
    p_order: float = 1.0
    cutoff: float = 100.0

    def __post_init__(self):
        if self.p_order < 1:
            raise ValueError(f"OSPA order must be >= 1, got {self.p_order}")
        if not self.cutoff > 0:
            raise ValueError(f"OSPA cutoff must be positive, got {self.cutoff}")


def ospa(X, Y, params=OspaParams()):
    """OSPA distance between position sets ``X`` and ``Y`` (rows are points)."""
    X = np.asarray(X, dtype=np.float64).reshape(-1, 2) if np.size(X) else np.zeros((0, 2))
    Y = np.asarray(Y, dtype=np.float64).reshape(-1, 2) if np.size(Y) else np.zeros((0, 2))
    if X.shape[0] > Y.shape[0]:
        X, Y = Y, X
    m, n = X.shape[0], Y.shape[0]
    if n == 0:
        return 0.0
    c, p = params.cutoff, params.p_order
    if m == 0:
        return float(c)
    d = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)
    cost = np.minimum(d, c) ** p
    rows, cols = linear_sum_assignment(cost)
    total = cost[rows, cols].sum() + c**p * (n - m)
    return float((total / n) ** (1.0 / p))
