"""Experiment configuration: TOML files, defaults and CLI overrides."""
import dataclasses
import json
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from littoral.birth import BirthConfig
from littoral.cluster import CFAR_DBSCAN, SCOREMAP_DBSCAN, DbscanParams
from littoral.detect import CfarConfig, SurrogateConfig
from littoral.lmb import FilterParams, GmConfig
from littoral.ospa import OspaParams
from littoral.scene import ClutterModel, ScenarioConfig, TargetSpec

DETECTOR_KINDS = ("cfar", "surrogate", "scoremap-file", "detections-file")
BIRTH_ALIASES = {"ideal": "ideal", "ib": "ideal", "mdb": "measurement_driven",
                 "measurement_driven": "measurement_driven"}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field."""

    def __init__(self, path, message):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class DetectorConfig:
    kind: str = "surrogate"
    threshold: float = 0.1
    scoring: str = "max"
    cfar: CfarConfig = field(default_factory=CfarConfig)
    surrogate: SurrogateConfig = field(default_factory=SurrogateConfig)
    dbscan: DbscanParams = None
    scoremap_dir: str = None
    detections_file: str = None

    @property
    def clustering(self):
        if self.dbscan is not None:
            return self.dbscan
        return CFAR_DBSCAN if self.kind == "cfar" else SCOREMAP_DBSCAN


@dataclass
class EvalConfig:
    n_runs: int = 100
    ospa: OspaParams = field(default_factory=OspaParams)


@dataclass
class ExperimentConfig:
    seed: int
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    birth: BirthConfig = field(default_factory=BirthConfig)
    filter: FilterParams = field(default_factory=FilterParams)
    eval: EvalConfig = field(default_factory=EvalConfig)
    out: str = "results"

    def __post_init__(self):
        # clutter density always follows the map size
        self.filter = self.filter.with_area(self.scenario.n_az, self.scenario.n_rg)


class _Section:
    """Typed reader over one TOML table that rejects unknown keys."""

    def __init__(self, data, path):
        if not isinstance(data, dict):
            raise ConfigError(path or "<root>", "expected a table")
        self.data = data
        self.path = path
        self.seen = set()

    def _p(self, key):
        return f"{self.path}.{key}" if self.path else key

    def get(self, key, kind, default=None, required=False):
        self.seen.add(key)
        if key not in self.data:
            if required:
                raise ConfigError(self._p(key), "required field missing")
            return default
        value = self.data[key]
        try:
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is int:
                if isinstance(value, bool) or int(value) != value:
                    raise TypeError
                return int(value)
            if kind is float:
                if isinstance(value, bool):
                    raise TypeError
                return float(value)
            if kind is str:
                if not isinstance(value, str):
                    raise TypeError
                return value
            return kind(value)
        except (TypeError, ValueError):
            raise ConfigError(self._p(key), f"expected {getattr(kind, '__name__', kind)}, got {value!r}") from None

    def sub(self, key):
        self.seen.add(key)
        return _Section(self.data.get(key, {}), self._p(key))

    def finish(self):
        extra = sorted(set(self.data) - self.seen)
        if extra:
            raise ConfigError(self._p(extra[0]), "unknown field")


def _build(path, factory, **kwargs):
    kwargs = {k: v for k, v in kwargs.items() if v is not None}
    try:
        return factory(**kwargs)
    except ValueError as exc:
        msg = str(exc)
        # surface the first field the validator message names
        words = re.findall(r"[A-Za-z_][A-Za-z0-9_]*", msg)
        named = next((w for w in words if w in kwargs), None)
        if named is not None:
            path = f"{path}.{named}" if path else named
        raise ConfigError(path, msg) from None


def _float_tuple(sec, key, n):
    value = sec.get(key, list)
    if value is None:
        return None
    if len(value) != n:
        raise ConfigError(sec._p(key), f"expected {n} numbers")
    return tuple(float(v) for v in value)


def _parse_scenario(sec):
    clutter_sec = sec.sub("clutter")
    clutter = _build(clutter_sec.path, ClutterModel,
                     nu=clutter_sec.get("nu", float), mu=clutter_sec.get("mu", float),
                     corr_len=clutter_sec.get("corr_len", float))
    clutter_sec.finish()
    sir = sec.get("sir_db", float)
    targets = None
    sec.seen.add("targets")
    if "targets" in sec.data:
        targets = []
        raw = sec.data["targets"]
        if not isinstance(raw, list):
            raise ConfigError(sec._p("targets"), "expected an array of tables")
        for i, t in enumerate(raw):
            ts = _Section(t, f"{sec.path}.targets[{i}]")
            spec = TargetSpec(
                start_a=ts.get("start_a", float, required=True),
                start_r=ts.get("start_r", float, required=True),
                vel_a=ts.get("vel_a", float, 0.0),
                vel_r=ts.get("vel_r", float, 0.0),
                sir_db=ts.get("sir_db", float, 8.0 if sir is None else sir),
            )
            ts.finish()
            targets.append(spec)
    cfg = _build(sec.path, ScenarioConfig,
                 n_az=sec.get("n_az", int), n_rg=sec.get("n_rg", int),
                 n_scans=sec.get("n_scans", int), T=sec.get("T", float), q=sec.get("q", float),
                 clutter=clutter, targets=targets,
                 psf_sigma_az=sec.get("psf_sigma_az", float),
                 psf_sigma_rg=sec.get("psf_sigma_rg", float),
                 fluctuate=sec.get("fluctuate", bool), truth_noise=sec.get("truth_noise", bool))
    if sir is not None and targets is None:
        cfg = cfg.with_sir(sir)
    sec.finish()
    return cfg


def _parse_detector(sec):
    kind = sec.get("kind", str, "surrogate")
    if kind not in DETECTOR_KINDS:
        raise ConfigError(sec._p("kind"), f"must be one of {DETECTOR_KINDS}")
    cs = sec.sub("cfar")
    cfar = _build(cs.path, CfarConfig,
                  n_train_rg=cs.get("n_train_rg", int), n_train_az=cs.get("n_train_az", int),
                  n_guard_rg=cs.get("n_guard_rg", int), n_guard_az=cs.get("n_guard_az", int),
                  p_fa=cs.get("p_fa", float))
    cs.finish()
    ss = sec.sub("surrogate")
    surrogate = _build(ss.path, SurrogateConfig,
                       p_d=ss.get("p_d", float), pos_sigma=ss.get("pos_sigma", float),
                       peak_beta=_float_tuple(ss, "peak_beta", 2),
                       blob_sigma_az=ss.get("blob_sigma_az", float),
                       blob_sigma_rg=ss.get("blob_sigma_rg", float),
                       false_rate=ss.get("false_rate", float),
                       false_peak_beta=_float_tuple(ss, "false_peak_beta", 2),
                       false_sigma=ss.get("false_sigma", float), stride=ss.get("stride", int))
    ss.finish()
    dbscan = None
    if "dbscan" in sec.data:
        ds = sec.sub("dbscan")
        dbscan = _build(ds.path, DbscanParams, eps=ds.get("eps", float, required=True),
                        min_pts=ds.get("min_pts", int, required=True))
        ds.finish()
    else:
        sec.seen.add("dbscan")
    scoring = sec.get("scoring", str, "max")
    if scoring not in ("max", "mean"):
        raise ConfigError(sec._p("scoring"), "must be 'max' or 'mean'")
    threshold = sec.get("threshold", float, 0.1)
    if not 0.0 <= threshold <= 1.0:
        raise ConfigError(sec._p("threshold"), "must lie in [0, 1]")
    cfg = DetectorConfig(kind=kind, threshold=threshold, scoring=scoring, cfar=cfar,
                         surrogate=surrogate, dbscan=dbscan,
                         scoremap_dir=sec.get("scoremap_dir", str),
                         detections_file=sec.get("detections_file", str))
    sec.finish()
    return cfg


def _parse_birth(sec):
    mode = sec.get("mode", str, "ideal")
    if mode not in BIRTH_ALIASES:
        raise ConfigError(sec._p("mode"), f"must be one of {sorted(BIRTH_ALIASES)}")
    diag = _float_tuple(sec, "P_B_diag", 4)
    cfg = _build(sec.path, BirthConfig, mode=BIRTH_ALIASES[mode],
                 r_B_max=sec.get("r_B_max", float), t_d=sec.get("t_d", float),
                 P_B=None if diag is None else np.diag(diag),
                 normalize_scores=sec.get("normalize_scores", bool))
    sec.finish()
    return cfg


def _parse_filter(sec):
    gs = sec.sub("gm")
    gm = _build(gs.path, GmConfig, w_min=gs.get("w_min", float),
                merge_thresh=gs.get("merge_thresh", float), n_max=gs.get("n_max", int),
                r_min=gs.get("r_min", float))
    gs.finish()
    cfg = _build(sec.path, FilterParams,
                 p_S=sec.get("p_S", float), p_D=sec.get("p_D", float), p_G=sec.get("p_G", float),
                 lambda_c=sec.get("lambda_c", float), sigma_a=sec.get("sigma_a", float),
                 sigma_r=sec.get("sigma_r", float),
                 existence_threshold=sec.get("existence_threshold", float),
                 max_exhaustive_tracks=sec.get("max_exhaustive_tracks", int),
                 max_exhaustive_meas=sec.get("max_exhaustive_meas", int),
                 k_best=sec.get("k_best", int), gm=gm)
    sec.finish()
    return cfg


def _parse_eval(sec):
    n_runs = sec.get("n_runs", int, 100)
    if n_runs < 1:
        raise ConfigError(sec._p("n_runs"), "must be at least 1")
    ospa = _build(sec.path, OspaParams, p_order=sec.get("ospa_order", float),
                  cutoff=sec.get("ospa_cutoff", float))
    sec.finish()
    return EvalConfig(n_runs=n_runs, ospa=ospa)


def parse_config(data, overrides=None):
    """Build an :class:`ExperimentConfig` from a TOML-shaped mapping.

    ``overrides`` maps dotted keys (``"eval.n_runs"``, ``"seed"``) to values
    and takes precedence over ``data``.
    """
    data = json.loads(json.dumps(data))
    for dotted, value in (overrides or {}).items():
        if value is None:
            continue
        node = data
        *parents, leaf = dotted.split(".")
        for p in parents:
            node = node.setdefault(p, {})
        node[leaf] = value
    root = _Section(data, "")
    seed = root.get("seed", int, required=True)
    if seed < 0:
        raise ConfigError("seed", "must be non-negative")
    cfg = ExperimentConfig(
        seed=seed,
        scenario=_parse_scenario(root.sub("scenario")),
        detector=_parse_detector(root.sub("detector")),
        birth=_parse_birth(root.sub("birth")),
        filter=_parse_filter(root.sub("filter")),
        eval=_parse_eval(root.sub("eval")),
        out=root.get("out", str, "results"),
    )
    root.finish()
    return cfg


def load_config(path, overrides=None):
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("<file>", f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("<file>", f"{path}: {exc}") from None
    cfg = parse_config(data, overrides)
    base = path.parent
    det = cfg.detector
    for attr in ("scoremap_dir", "detections_file"):
        value = getattr(det, attr)
        if value is not None and not Path(value).is_absolute():
            setattr(det, attr, str(base / value))
    validate_paths(cfg)
    return cfg


def validate_paths(cfg):
    det = cfg.detector
    if det.kind == "scoremap-file":
        if det.scoremap_dir is None:
            raise ConfigError("detector.scoremap_dir", "required for the scoremap-file detector")
        if not Path(det.scoremap_dir).is_dir():
            raise ConfigError("detector.scoremap_dir", f"directory {det.scoremap_dir} does not exist")
    if det.kind == "detections-file":
        if det.detections_file is None:
            raise ConfigError("detector.detections_file", "required for the detections-file detector")
        if not Path(det.detections_file).is_file():
            raise ConfigError("detector.detections_file", f"file {det.detections_file} does not exist")


def to_dict(obj):
    """JSON-ready view of a configuration (defaults resolved)."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_dict(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, dict):
        return {str(k): to_dict(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_dict(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj
