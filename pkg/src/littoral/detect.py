"""Detectors: CA-CFAR on amplitude maps and thresholding of score maps.

Detections are ``(n, 3)`` float arrays with columns ``(a, r, score)``, rows in
row-major ``(a, r)`` order. CFAR detections carry score 1.0.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from littoral import kernels
from littoral.io import SCORE_MAGIC, read_grid, write_csv, write_grid

DETECTION_HEADER = ("scan", "a", "r", "score")


class DetectionFileError(ValueError):
    """Malformed detection file; ``record`` is the 1-based line number."""

    def __init__(self, path, record, message):
        super().__init__(f"{path}:{record}: {message}")
        self.path = path
        self.record = record


def empty_detections():
    return np.zeros((0, 3))


@dataclass(frozen=True)
class CfarConfig:
    n_train_rg: int = 7
    n_train_az: int = 7
    n_guard_rg: int = 3
    n_guard_az: int = 6
    p_fa: float = 1e-3

    def __post_init__(self):
        counts = (self.n_train_rg, self.n_train_az, self.n_guard_rg, self.n_guard_az)
        if min(counts) < 0:
            raise ValueError("CFAR cell counts must be non-negative")
        if not 0 < self.p_fa < 1:
            raise ValueError(f"p_fa must lie in (0, 1), got {self.p_fa}")

    @property
    def window(self):
        """Full window extent ``(az, rg)`` in cells."""
        return (
            2 * (self.n_guard_az + self.n_train_az) + 1,
            2 * (self.n_guard_rg + self.n_train_rg) + 1,
        )

    @property
    def n_train(self):
        """Training-cell count of an interior (untruncated) window."""
        wa, wr = self.window
        return wa * wr - (2 * self.n_guard_az + 1) * (2 * self.n_guard_rg + 1)


def ca_cfar(grid, cfg=CfarConfig(), backend=None):
    """Cell-averaging CFAR on squared amplitudes; returns detection rows."""
    grid = np.asarray(grid, dtype=np.float64)
    wa, wr = cfg.window
    if wa > grid.shape[0] or wr > grid.shape[1]:
        raise ValueError(f"CFAR window {wa}x{wr} larger than map {grid.shape[0]}x{grid.shape[1]}")
    mask = kernels.cfar_mask(
        grid * grid, cfg.n_train_az, cfg.n_train_rg, cfg.n_guard_az, cfg.n_guard_rg,
        cfg.p_fa, backend=backend,
    )
    a, r = np.nonzero(mask)
    return np.column_stack([a, r, np.ones(a.size)]).astype(np.float64)


def threshold_score_map(scores, t=0.1):
    """Cells whose score strictly exceeds ``t``, carrying their scores."""
    if not 0 <= t <= 1:
        raise ValueError(f"threshold must lie in [0, 1], got {t}")
    scores = np.asarray(scores, dtype=np.float64)
    a, r = np.nonzero(scores > t)
    return np.column_stack([a, r, scores[a, r]]).astype(np.float64)


def upsample_nearest(scores, dims):
    """Nearest-neighbour up-sampling of a score map to ``dims``."""
    scores = np.asarray(scores, dtype=np.float64)
    n_az, n_rg = (int(d) for d in dims)
    if n_az < scores.shape[0] or n_rg < scores.shape[1]:
        raise ValueError(f"cannot up-sample {scores.shape} to smaller {dims}")
    ia = ((np.arange(n_az) + 0.5) * scores.shape[0] / n_az).astype(np.int64)
    ir = ((np.arange(n_rg) + 0.5) * scores.shape[1] / n_rg).astype(np.int64)
    return scores[np.ix_(ia, ir)]


# ---------------------------------------------------------------------------
# Surrogate score maps
# ---------------------------------------------------------------------------

# SIR (dB) -> (detection probability, Beta(a, b) of peak score, position noise std)
DEFAULT_SIR_PROFILE = {
    3.0: (0.90, (3.0, 4.0), 1.6),
    5.0: (0.95, (5.0, 3.0), 1.3),
    8.0: (0.99, (8.0, 2.0), 1.0),
}


@dataclass(frozen=True)
class SurrogateConfig:
    """Statistical stand-in for a learned detector's attention output.

    ``p_d`` / ``pos_sigma`` / ``peak_beta`` override the per-SIR profile when
    set. ``stride`` renders on a coarser grid that is then up-sampled.
    """
    p_d: float = None
    pos_sigma: float = None
    peak_beta: tuple = None
    sir_profile: dict = field(default_factory=lambda: dict(DEFAULT_SIR_PROFILE))
    blob_sigma_az: float = 2.0
    blob_sigma_rg: float = 1.5
    false_rate: float = 35.0
    false_peak_beta: tuple = (3.0, 3.0)
    false_sigma: float = 2.0
    stride: int = 1

    def target_params(self, sir_db):
        """``(p_d, (beta_a, beta_b), pos_sigma)`` for a target at ``sir_db``."""
        sirs = np.array(sorted(self.sir_profile))
        rows = np.array([
            [self.sir_profile[s][0], *self.sir_profile[s][1], self.sir_profile[s][2]] for s in sirs
        ])
        p, ba, bb, sig = (np.interp(sir_db, sirs, rows[:, i]) for i in range(4))
        if self.p_d is not None:
            p = self.p_d
        if self.peak_beta is not None:
            ba, bb = self.peak_beta
        if self.pos_sigma is not None:
            sig = self.pos_sigma
        return float(p), (float(ba), float(bb)), float(sig)


def _stamp_blob(scores, ca, cr, peak, sig_a, sig_r):
    n_az, n_rg = scores.shape
    ha, hr = int(np.ceil(3 * sig_a)), int(np.ceil(3 * sig_r))
    ia, ir = int(np.rint(ca)), int(np.rint(cr))
    a0, a1 = max(0, ia - ha), min(n_az, ia + ha + 1)
    r0, r1 = max(0, ir - hr), min(n_rg, ir + hr + 1)
    if a0 >= a1 or r0 >= r1:
        return
    wa = np.exp(-0.5 * ((np.arange(a0, a1) - ca) / sig_a) ** 2)
    wr = np.exp(-0.5 * ((np.arange(r0, r1) - cr) / sig_r) ** 2)
    np.maximum(scores[a0:a1, r0:r1], peak * np.outer(wa, wr), out=scores[a0:a1, r0:r1])


def synthesize_score_map(truth_states, sir_db, dims, cfg=SurrogateConfig(), rng=None):
    """Draw a score map for one scan.

    ``truth_states`` is ``(n_targets, 4)``; ``sir_db`` is a scalar or one value
    per target. Each target appears with its detection probability as a
    Gaussian blob at a noisy position; ``Poisson(false_rate)`` low-score blobs
    land uniformly over the map.
    """
    if rng is None:
        rng = np.random.default_rng()
    n_az, n_rg = (int(d) for d in dims)
    s = max(1, int(cfg.stride))
    coarse = (-(-n_az // s), -(-n_rg // s))
    scores = np.zeros(coarse)
    truth_states = np.asarray(truth_states, dtype=np.float64).reshape(-1, 4)
    sirs = np.broadcast_to(np.asarray(sir_db, dtype=np.float64), (truth_states.shape[0],))
    for x, sir in zip(truth_states, sirs):
        p_d, (ba, bb), sig = cfg.target_params(sir)
        if rng.random() >= p_d:
            continue
        ca, cr = x[0], x[2]
        if sig > 0:
            ca += sig * rng.standard_normal()
            cr += sig * rng.standard_normal()
        peak = rng.beta(ba, bb)
        _stamp_blob(scores, (ca + 0.5) / s - 0.5, (cr + 0.5) / s - 0.5, peak,
                    cfg.blob_sigma_az / s, cfg.blob_sigma_rg / s)
    n_false = rng.poisson(cfg.false_rate)
    for _ in range(n_false):
        ca = rng.uniform(-0.5, n_az - 0.5)
        cr = rng.uniform(-0.5, n_rg - 0.5)
        peak = rng.beta(*cfg.false_peak_beta)
        _stamp_blob(scores, (ca + 0.5) / s - 0.5, (cr + 0.5) / s - 0.5, peak,
                    cfg.false_sigma / s, cfg.false_sigma / s)
    np.clip(scores, 0.0, 1.0, out=scores)
    # score maps are stored as float32; round here so replayed files match exactly
    scores = scores.astype(np.float32).astype(np.float64)
    if s > 1:
        scores = upsample_nearest(scores, (coarse[0] * s, coarse[1] * s))[:n_az, :n_rg]
    return scores


def write_score_map(path, scores, scan_index):
    scores = np.asarray(scores)
    if scores.size and (scores.min() < 0 or scores.max() > 1):
        raise ValueError("score map values must lie in [0, 1]")
    write_grid(path, scores, scan_index, magic=SCORE_MAGIC)


def read_score_map(path):
    grid, scan, _ = read_grid(path, magic=SCORE_MAGIC)
    if grid.size and (grid.min() < 0 or grid.max() > 1):
        raise ValueError(f"{path}: score map values outside [0, 1]")
    return grid, scan


# ---------------------------------------------------------------------------
# Detection files
# ---------------------------------------------------------------------------

def write_detections(path, per_scan):
    rows = []
    for k, dets in enumerate(per_scan):
        for a, r, score in dets:
            rows.append((k, a, r, score))
    write_csv(path, DETECTION_HEADER, rows)


def load_detections(path, n_scans=None):
    """Read ``scan,a,r,score`` rows into a list of per-scan detection arrays."""
    by_scan = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            return [empty_detections() for _ in range(n_scans or 0)]
        if [h.strip() for h in header] != list(DETECTION_HEADER):
            raise DetectionFileError(path, 1, f"expected header {','.join(DETECTION_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != 4:
                raise DetectionFileError(path, lineno, f"expected 4 fields, got {len(row)}")
            try:
                scan = int(row[0])
                a, r, score = float(row[1]), float(row[2]), float(row[3])
            except ValueError as exc:
                raise DetectionFileError(path, lineno, str(exc)) from None
            if scan < 0 or (n_scans is not None and scan >= n_scans):
                raise DetectionFileError(path, lineno, f"scan index {scan} out of range")
            if not 0.0 <= score <= 1.0:
                raise DetectionFileError(path, lineno, f"score {score} outside [0, 1]")
            if a < 0 or r < 0:
                raise DetectionFileError(path, lineno, "negative cell index")
            by_scan.setdefault(scan, []).append((a, r, score))
    n = n_scans if n_scans is not None else (max(by_scan) + 1 if by_scan else 0)
    out = []
    for k in range(n):
        rows = by_scan.get(k)
        out.append(np.asarray(rows, dtype=np.float64) if rows else empty_detections())
    return out
