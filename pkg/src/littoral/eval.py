"""Detection-to-track pipeline runs and Monte Carlo OSPA experiments."""
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from littoral.birth import make_birth
from littoral.cluster import detections_to_measurements
from littoral.detect import (
    ca_cfar,
    empty_detections,
    load_detections,
    read_score_map,
    synthesize_score_map,
    threshold_score_map,
)
from littoral.lmb import LmbFilter
from littoral.ospa import ospa
from littoral.scene import generate_scenario, make_motion_model

TIMING_HEADER = ("algorithm", "scan_s", "filtering_s", "total_s")
OSPA_HEADER = ("scan", "mean_ospa", "n_runs")
TRACK_HEADER = ("scan", "label_birth", "label_idx", "r", "a", "a_dot", "r_pos", "r_dot")


class MonteCarloError(RuntimeError):
    def __init__(self, run, seed, cause):
        super().__init__(f"Monte Carlo run {run} (seed {seed}) failed: {cause!r}")
        self.run = run
        self.seed = seed


def run_seed(base_seed, run):
    """Independent random stream for run ``run`` of an experiment."""
    return np.random.SeedSequence([int(base_seed), int(run)])


def score_map_name(scan):
    return f"score_{scan:04d}.smap"


def map_name(scan):
    return f"map_{scan:04d}.ramp"


@dataclass
class Timing:
    scan_s: float = 0.0
    filtering_s: float = 0.0
    total_s: float = 0.0


@dataclass
class RunResult:
    detections: list
    measurements: list
    estimates: list
    ospa: np.ndarray
    timing: Timing
    reports: list = field(default_factory=list)


def detector_label(kind):
    return {"cfar": "CA-CFAR + LMB", "surrogate": "Score-map + LMB",
            "scoremap-file": "Score-map + LMB", "detections-file": "Detections + LMB"}[kind]


class Detector:
    """Per-scan detection front end selected by a :class:`DetectorConfig`."""

    def __init__(self, det_cfg, scenario, rng):
        self.cfg = det_cfg
        self.scenario = scenario
        self.rng = rng
        self._file_dets = None
        if det_cfg.kind == "detections-file":
            self._file_dets = load_detections(det_cfg.detections_file, scenario.config.n_scans)

    def cells(self, scan):
        kind = self.cfg.kind
        sc = self.scenario
        if kind == "cfar":
            return ca_cfar(sc.maps[scan], self.cfg.cfar)
        if kind == "surrogate":
            cfg = sc.config
            sirs = [t.sir_db for t in cfg.targets]
            scores = synthesize_score_map(sc.truth[scan], sirs, (cfg.n_az, cfg.n_rg),
                                          self.cfg.surrogate, self.rng)
            return threshold_score_map(scores, self.cfg.threshold)
        if kind == "scoremap-file":
            path = Path(self.cfg.scoremap_dir) / score_map_name(scan)
            scores, _ = read_score_map(path)
            return threshold_score_map(scores, self.cfg.threshold)
        return None

    def measurements(self, scan):
        if self.cfg.kind == "detections-file":
            dets = self._file_dets[scan]
            return dets, dets
        cells = self.cells(scan)
        if cells.shape[0] == 0:
            return cells, empty_detections()
        return cells, detections_to_measurements(cells, self.cfg.clustering, self.cfg.scoring)


def run_pipeline(cfg, rng, scenario=None):
    """One full detect -> cluster -> LMB run with per-scan OSPA."""
    sc_cfg = cfg.scenario
    if scenario is None:
        scenario = generate_scenario(sc_cfg, rng, render=cfg.detector.kind == "cfar")
    detector = Detector(cfg.detector, scenario, rng)
    filt = LmbFilter(cfg.filter, make_motion_model(sc_cfg.T, sc_cfg.q))
    timing = Timing()
    result = RunResult([], [], [], np.zeros(sc_cfg.n_scans), timing)
    Z_prev, confirmed = None, None
    for k in range(sc_cfg.n_scans):
        t0 = time.perf_counter()
        cells, Z = detector.measurements(k)
        t1 = time.perf_counter()
        birth = make_birth(cfg.birth, k, Z_prev, confirmed)
        filt.predict(birth)
        report = filt.update(Z)
        estimates = filt.estimates()
        t2 = time.perf_counter()
        timing.scan_s += t1 - t0
        timing.filtering_s += t2 - t1
        positions = np.array([e.state[[0, 2]] for e in estimates]).reshape(-1, 2)
        result.detections.append(cells)
        result.measurements.append(Z)
        result.estimates.append(estimates)
        result.reports.append(report)
        result.ospa[k] = ospa(positions, scenario.truth_positions(k), cfg.eval.ospa)
        Z_prev, confirmed = Z, positions
    timing.total_s = timing.scan_s + timing.filtering_s
    timing.scan_s /= sc_cfg.n_scans
    return result


def run_single(cfg, run=0):
    """Run ``run`` of the experiment with its reproducible seed."""
    return run_pipeline(cfg, np.random.default_rng(run_seed(cfg.seed, run)))


def _mc_task(args):
    cfg, run = args
    try:
        res = run_single(cfg, run)
    except Exception as exc:  # noqa: BLE001 - re-raised with run context
        raise MonteCarloError(run, cfg.seed, exc) from exc
    return res.ospa, res.timing


def worker_count():
    env = os.environ.get("LITTORAL_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass
class OspaCurve:
    mean: np.ndarray
    n_runs: int
    runs: np.ndarray


@dataclass
class MonteCarloResult:
    curve: OspaCurve
    timing: Timing
    algorithm: str


def run_monte_carlo(cfg, n_runs=None, workers=None):
    """Average per-scan OSPA and stage timings over independent runs."""
    n_runs = cfg.eval.n_runs if n_runs is None else n_runs
    if n_runs < 1:
        raise ValueError("n_runs must be at least 1")
    workers = worker_count() if workers is None else workers
    tasks = [(cfg, i) for i in range(n_runs)]
    if workers <= 1 or n_runs == 1:
        results = [_mc_task(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, n_runs)) as pool:
            results = list(pool.map(_mc_task, tasks))
    runs = np.stack([r[0] for r in results])
    # fixed-order reduction keeps the mean bit-reproducible
    total = np.zeros(runs.shape[1])
    for row in runs:
        total += row
    timing = Timing()
    for _, t in results:
        timing.scan_s += t.scan_s / n_runs
        timing.filtering_s += t.filtering_s / n_runs
        timing.total_s += t.total_s / n_runs
    return MonteCarloResult(OspaCurve(total / n_runs, n_runs, runs), timing,
                            detector_label(cfg.detector.kind))


def steady_state(curve, start=30, stop=50):
    """Mean OSPA over scans ``[start, stop)``."""
    return float(np.mean(curve.mean[start:stop]))


def ospa_rows(curve):
    return [(k, float(v), curve.n_runs) for k, v in enumerate(curve.mean)]


def timing_rows(results):
    return [(r.algorithm, r.timing.scan_s, r.timing.filtering_s, r.timing.total_s) for r in results]


def track_rows(estimates_per_scan):
    rows = []
    for k, estimates in enumerate(estimates_per_scan):
        for e in sorted(estimates, key=lambda e: e.label):
            rows.append((k, e.label[0], e.label[1], e.r, *(float(v) for v in e.state)))
    return rows
