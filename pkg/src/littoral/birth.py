"""Multi-Bernoulli birth densities: fixed a-priori or measurement driven."""
from dataclasses import dataclass, field

import numpy as np

from littoral.lmb import Track

IDEAL_MEANS = (
    (20.0, 0.0, 110.0, 0.0),
    (40.0, 0.0, 400.0, 0.0),
    (70.0, 0.0, 240.0, 0.0),
)
IDEAL_R = 0.03
BIRTH_VARIANCE = 100.0


def _default_components():
    return tuple((IDEAL_R, m) for m in IDEAL_MEANS)


@dataclass(frozen=True)
class BirthConfig:
    """Birth model settings.

    ``ideal_components`` holds ``(r_B, mean)`` pairs; every component shares
    the covariance ``P_B``.
    """
    mode: str = "ideal"
    ideal_components: tuple = field(default_factory=_default_components)
    r_B_max: float = 0.04
    t_d: float = 10.0
    P_B: np.ndarray = field(default_factory=lambda: np.diag([BIRTH_VARIANCE] * 4))
    normalize_scores: bool = False

    def __post_init__(self):
        if self.mode not in ("ideal", "measurement_driven"):
            raise ValueError(f"birth mode must be 'ideal' or 'measurement_driven', got {self.mode!r}")
        if not 0.0 <= self.r_B_max <= 1.0:
            raise ValueError(f"r_B_max must lie in [0, 1], got {self.r_B_max}")
        if not self.t_d > 0:
            raise ValueError(f"t_d must be positive, got {self.t_d}")
        P = np.asarray(self.P_B, dtype=np.float64)
        if P.shape != (4, 4) or np.any(np.linalg.eigvalsh(0.5 * (P + P.T)) <= 0):
            raise ValueError("P_B must be a 4x4 positive definite matrix")


def ideal_birth(cfg, scan):
    """Fixed birth components with fresh labels ``(scan, i)``."""
    return [
        Track.gaussian((scan, i), r, mean, cfg.P_B)
        for i, (r, mean) in enumerate(cfg.ideal_components)
    ]


def birth_scores(scores, normalize=False):
    scores = np.clip(np.asarray(scores, dtype=np.float64), 0.0, 1.0)
    if normalize and scores.size and scores.max() > 0:
        scores = scores / scores.max()
    return scores


def measurement_driven_birth(Z_prev, confirmed, cfg, scan):
    """Birth components at previous-scan measurements far from confirmed tracks.

    ``Z_prev`` is ``(m, 3)`` rows ``(a, r, score)``; ``confirmed`` is a
    ``(n, 2)`` array of confirmed track positions ``(a, r)``. A measurement
    spawns a component only when its distance to every confirmed position
    exceeds ``t_d``; its existence probability is ``r_B_max`` times its
    clamped score.
    """
    Z_prev = np.asarray(Z_prev, dtype=np.float64).reshape(-1, 3)
    confirmed = np.asarray(confirmed, dtype=np.float64).reshape(-1, 2)
    if Z_prev.shape[0] == 0:
        return []
    if confirmed.shape[0]:
        d = np.linalg.norm(Z_prev[:, None, :2] - confirmed[None, :, :], axis=-1)
        eligible = (d > cfg.t_d).all(axis=1)
    else:
        eligible = np.ones(Z_prev.shape[0], dtype=bool)
    scores = birth_scores(Z_prev[:, 2], cfg.normalize_scores)
    out = []
    for i in np.flatnonzero(eligible):
        mean = (Z_prev[i, 0], 0.0, Z_prev[i, 1], 0.0)
        out.append(Track.gaussian((scan, len(out)), cfg.r_B_max * scores[i], mean, cfg.P_B))
    return out


def make_birth(cfg, scan, Z_prev=None, confirmed=None):
    """Dispatch on ``cfg.mode``; measurement-driven birth at scan 0 is empty."""
    if cfg.mode == "ideal":
        return ideal_birth(cfg, scan)
    if Z_prev is None:
        return []
    if confirmed is None:
        confirmed = np.zeros((0, 2))
    return measurement_driven_birth(Z_prev, confirmed, cfg, scan)
