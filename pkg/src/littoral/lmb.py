"""Gaussian-mixture labelled multi-Bernoulli filter.

The posterior is a list of :class:`Track` objects, each a labelled Bernoulli
component with existence probability ``r`` and a Gaussian mixture over the
state ``[a, a_dot, r, r_dot]``. The update converts each group of
interacting tracks to its delta-GLMB form, enumerates (or ranks) the
association hypotheses and marginalises back to LMB.
"""
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components
from scipy.stats import chi2

from littoral import kernels
from littoral.assignment import enumerate_assignments, murty

H = np.array([[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]])
_POS = [0, 2]
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass
class Track:
    label: tuple
    r: float
    w: np.ndarray
    m: np.ndarray
    P: np.ndarray

    @classmethod
    def gaussian(cls, label, r, mean, cov):
        return cls(label=tuple(label), r=float(r), w=np.ones(1),
                   m=np.asarray(mean, dtype=np.float64).reshape(1, 4),
                   P=np.asarray(cov, dtype=np.float64).reshape(1, 4, 4))

    @property
    def n_components(self):
        return self.w.size

    def best_state(self):
        return self.m[int(np.argmax(self.w))]

    def copy(self):
        return Track(self.label, self.r, self.w.copy(), self.m.copy(), self.P.copy())


def logsumexp(x, axis=None):
    x = np.asarray(x, dtype=np.float64)
    if x.size == 0:
        return np.full(np.sum(x, axis=axis).shape, -np.inf) if axis is not None else -np.inf
    peak = np.max(x, axis=axis, keepdims=True)
    peak = np.where(np.isfinite(peak), peak, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(x - peak), axis=axis, keepdims=True)) + peak
    return out.item() if axis is None else np.squeeze(out, axis=axis)


@lru_cache(maxsize=None)
def _chi2_gate(p_G):
    return np.inf if p_G >= 1.0 else float(chi2.ppf(p_G, df=2))


@dataclass(frozen=True)
class GmConfig:
    w_min: float = 1e-5
    merge_thresh: float = 4.0
    n_max: int = 100
    r_min: float = 1e-3


@dataclass(frozen=True)
class FilterParams:
    p_S: float = 0.99
    p_D: float = 0.98
    p_G: float = 0.999
    lambda_c: float = 30.0
    area: float = 128.0 * 512.0
    sigma_a: float = float(np.sqrt(2.5))
    sigma_r: float = float(np.sqrt(2.5))
    existence_threshold: float = 0.5
    max_exhaustive_tracks: int = 5
    max_exhaustive_meas: int = 8
    k_best: int = 100
    max_kbest_tracks: int = 20
    gm: GmConfig = field(default_factory=GmConfig)

    def __post_init__(self):
        for name in ("p_S", "p_D", "p_G", "existence_threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.lambda_c < 0 or self.area <= 0:
            raise ValueError("lambda_c must be non-negative and area positive")
        if self.sigma_a <= 0 or self.sigma_r <= 0:
            raise ValueError("measurement noise standard deviations must be positive")

    @property
    def R(self):
        return np.diag([self.sigma_a**2, self.sigma_r**2])

    @property
    def clutter_density(self):
        return 1.0 / self.area

    @property
    def kappa(self):
        """Clutter intensity ``lambda_c * c(z)`` (uniform over the map)."""
        return self.lambda_c * self.clutter_density

    @property
    def gate(self):
        """Squared-Mahalanobis gate for two measurement dimensions."""
        return _chi2_gate(self.p_G)

    @property
    def q_missed(self):
        return 1.0 - self.p_D * self.p_G

    def with_area(self, n_az, n_rg):
        return replace(self, area=float(n_az) * float(n_rg))


@dataclass
class GroupReport:
    n_tracks: int
    n_measurements: int
    n_hypotheses: int
    method: str
    weight_sum: float


@dataclass
class UpdateReport:
    groups: list = field(default_factory=list)
    residual_measurements: int = 0


# ---------------------------------------------------------------------------
# Prediction
# ---------------------------------------------------------------------------

def check_labels(tracks):
    labels = [t.label for t in tracks]
    if len(set(labels)) != len(labels):
        dup = sorted({l for l in labels if labels.count(l) > 1})
        raise ValueError(f"duplicate track labels: {dup}")


def predict(prior, birth, params, model):
    """Survival prediction of ``prior`` followed by appending ``birth`` tracks."""
    prior_labels = {t.label for t in prior}
    clash = prior_labels.intersection(t.label for t in birth)
    if clash:
        raise ValueError(f"birth labels collide with existing tracks: {sorted(clash)}")
    check_labels(birth)
    F, Q = model.F, model.Q
    out = []
    for t in prior:
        m = t.m @ F.T
        P = F @ t.P @ F.T + Q
        out.append(Track(t.label, params.p_S * t.r, t.w.copy(), m, _symmetrize(P)))
    out.extend(b.copy() for b in birth)
    return out


# ---------------------------------------------------------------------------
# Gating and grouping
# ---------------------------------------------------------------------------

def _innovation(track, params):
    S = track.P[:, _POS][:, :, _POS] + params.R
    det = S[:, 0, 0] * S[:, 1, 1] - S[:, 0, 1] * S[:, 1, 0]
    S_inv = np.empty_like(S)
    S_inv[:, 0, 0] = S[:, 1, 1] / det
    S_inv[:, 1, 1] = S[:, 0, 0] / det
    S_inv[:, 0, 1] = -S[:, 0, 1] / det
    S_inv[:, 1, 0] = -S[:, 1, 0] / det
    return S, S_inv, np.log(det)


def _mahalanobis2(track, S_inv, Z):
    nu = Z[None, :, :] - track.m[:, None, _POS]
    return nu, np.einsum("kmi,kij,kmj->km", nu, S_inv, nu)


def gate_matrix(tracks, Z, params):
    """Boolean ``(n_tracks, n_meas)``: measurement inside any component's gate."""
    Z = _as_points(Z)
    gated = np.zeros((len(tracks), Z.shape[0]), dtype=bool)
    if Z.shape[0] == 0 or not tracks:
        return gated
    gate = params.gate
    for i, t in enumerate(tracks):
        _, S_inv, _ = _innovation(t, params)
        _, d2 = _mahalanobis2(t, S_inv, Z)
        gated[i] = (d2 < gate).any(axis=0)
    return gated


def gate_and_group(tracks, Z, params):
    """Partition tracks into groups linked by shared gated measurements.

    Returns ``(groups, residual)`` where ``groups`` is a list of
    ``(track_indices, meas_indices)`` integer arrays and ``residual`` lists
    the measurements gated by no track.
    """
    Z = _as_points(Z)
    gated = gate_matrix(tracks, Z, params)
    return _group(gated)


def _group(gated):
    n_t, n_z = gated.shape
    if n_t == 0:
        return [], np.arange(n_z)
    ti, zi = np.nonzero(gated)
    rows = np.concatenate([ti, n_t + zi])
    cols = np.concatenate([n_t + zi, ti])
    graph = sparse.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(n_t + n_z, n_t + n_z))
    _, comp = connected_components(graph, directed=False)
    groups = {}
    for i in range(n_t):
        groups.setdefault(comp[i], ([], []))[0].append(i)
    for j in range(n_z):
        if comp[n_t + j] in groups:
            groups[comp[n_t + j]][1].append(j)
    ordered = sorted(groups.values(), key=lambda g: g[0][0])
    out = [(np.asarray(t, dtype=np.int64), np.asarray(z, dtype=np.int64)) for t, z in ordered]
    residual = np.flatnonzero(~gated.any(axis=0))
    return out, residual


def _as_points(Z):
    Z = np.asarray(Z, dtype=np.float64)
    if Z.size == 0:
        return np.zeros((0, 2))
    return Z.reshape(-1, Z.shape[-1])[:, :2]


# ---------------------------------------------------------------------------
# Group update
# ---------------------------------------------------------------------------

def _track_terms(track, Z, params):
    """Per-measurement log eta and the measurement-updated mixtures."""
    S, S_inv, logdet = _innovation(track, params)
    nu, d2 = _mahalanobis2(track, S_inv, Z)
    log_n = -_LOG_2PI - 0.5 * logdet[:, None] - 0.5 * d2
    log_wn = np.log(track.w)[:, None] + log_n
    log_g = logsumexp(log_wn, axis=0) if Z.shape[0] else np.zeros(0)
    gated = (d2 < params.gate).any(axis=0) if Z.shape[0] else np.zeros(0, dtype=bool)
    with np.errstate(divide="ignore"):
        log_eta = np.log(params.p_D) + log_g - np.log(params.kappa)
    log_eta = np.where(gated, log_eta, -np.inf)
    PHt = track.P[:, :, _POS]
    K = PHt @ S_inv
    P_upd = _symmetrize(track.P - K @ S @ np.swapaxes(K, 1, 2))
    m_upd = track.m[:, None, :] + np.einsum("kij,kmj->kmi", K, nu)
    post_w = np.exp(log_wn - log_g[None, :]) if Z.shape[0] else np.zeros((track.w.size, 0))
    return log_eta, post_w, m_upd, P_upd


def _log_weight_table(tracks, log_etas, params):
    n, m = len(tracks), log_etas.shape[1]
    L = np.full((n, m + 2), -np.inf)
    with np.errstate(divide="ignore"):
        log_q = np.log(params.q_missed)
        for i, t in enumerate(tracks):
            L[i, 0] = np.log1p(-t.r) if t.r < 1.0 else -np.inf
            log_r = np.log(t.r) if t.r > 0.0 else -np.inf
            L[i, 1] = log_r + log_q
            L[i, 2:] = log_r + log_etas[i]
    return L


def _hypotheses_exhaustive(L):
    n, width = L.shape
    options = []
    for i in range(n):
        opts = [(c, -1) for c in (0, 1) if np.isfinite(L[i, c])]
        opts += [(2 + j, j) for j in range(width - 2) if np.isfinite(L[i, 2 + j])]
        options.append(opts)
    return enumerate_assignments(options, width - 2)


def _hypotheses_kbest(L, k):
    n, width = L.shape
    m = width - 2
    cost = np.full((n, 2 * n + m), np.inf)
    idx = np.arange(n)
    cost[idx, idx] = -L[:, 0]
    cost[idx, n + idx] = -L[:, 1]
    cost[:, 2 * n:] = -L[:, 2:]
    solutions = murty(cost, k)
    cols = np.array([c for _, c in solutions], dtype=np.int64).reshape(len(solutions), n)
    mapped = np.where(cols < n, 0, np.where(cols < 2 * n, 1, cols - 2 * n + 2))
    return mapped


def _marginals_lbp(L, tol=1e-12, max_iter=1000):
    """Loopy belief propagation estimate of the association marginals."""
    n, width = L.shape
    shift = L.max(axis=1, keepdims=True)
    W = np.exp(L - shift)
    w0 = W[:, 0] + W[:, 1]
    Wz = W[:, 2:]
    nu = np.ones_like(Wz)
    for _ in range(max_iter):
        t = Wz * nu
        mu = Wz / (w0[:, None] + t.sum(axis=1, keepdims=True) - t)
        s = mu.sum(axis=0, keepdims=True)
        nu_new = 1.0 / (1.0 + s - mu)
        delta = np.max(np.abs(nu_new - nu)) if nu.size else 0.0
        nu = nu_new
        if delta < tol:
            break
    pz = Wz * nu
    norm = w0 + pz.sum(axis=1)
    beta = np.empty((n, width))
    beta[:, 0] = W[:, 0] / norm
    beta[:, 1] = W[:, 1] / norm
    beta[:, 2:] = pz / norm[:, None]
    return beta


def association_marginals(L, method="exhaustive", k_best=100):
    """Marginal probabilities ``beta[i, c]`` over the hypothesis set.

    Column 0 is non-existence, 1 is missed detection, ``2 + j`` is
    association with measurement ``j``. Returns ``(beta, weight_sum, n_hyp)``;
    for ``method="lbp"`` no hypotheses are formed and ``n_hyp`` is 0, with
    ``weight_sum`` the mean row sum of ``beta``.
    """
    n, width = L.shape
    if n == 0:
        return np.zeros((0, width)), 1.0, 1
    if method == "lbp":
        beta = _marginals_lbp(L)
        return beta, float(beta.sum(axis=1).mean()), 0
    if method == "exhaustive":
        hyps = _hypotheses_exhaustive(L)
    elif method == "kbest":
        hyps = _hypotheses_kbest(L, k_best)
    else:
        raise ValueError(f"unknown hypothesis method {method!r}")
    if hyps.shape[0] == 0:
        raise FloatingPointError("no feasible association hypothesis in group")
    logw = L[np.arange(n)[None, :], hyps].sum(axis=1)
    total = logsumexp(logw)
    if not np.isfinite(total):
        raise FloatingPointError("all hypothesis weights are zero in log domain")
    w = np.exp(logw - total)
    beta = np.zeros((n, width))
    for i in range(n):
        np.add.at(beta[i], hyps[:, i], w)
    return beta, float(w.sum()), int(hyps.shape[0])


def choose_method(n_tracks, n_meas, params):
    if n_tracks <= params.max_exhaustive_tracks and n_meas <= params.max_exhaustive_meas:
        return "exhaustive"
    if n_tracks <= params.max_kbest_tracks:
        return "kbest"
    return "lbp"


def update_group(tracks, Z, params, method=None):
    """Delta-GLMB update of one group, marginalised back to LMB tracks.

    Returns ``(updated_tracks, GroupReport)``.
    """
    Z = _as_points(Z)
    n, m = len(tracks), Z.shape[0]
    method = method or choose_method(n, m, params)
    terms = [_track_terms(t, Z, params) for t in tracks]
    log_etas = np.array([tt[0] for tt in terms]).reshape(n, m)
    L = _log_weight_table(tracks, log_etas, params)
    beta, wsum, n_hyp = association_marginals(L, method, params.k_best)
    out = []
    for i, t in enumerate(tracks):
        _, post_w, m_upd, P_upd = terms[i]
        r = float(min(1.0, beta[i, 1:].sum()))
        if r <= 0.0:
            out.append(Track(t.label, 0.0, t.w.copy(), t.m.copy(), t.P.copy()))
            continue
        ws = [beta[i, 1] * t.w]
        ms = [t.m]
        Ps = [t.P]
        for j in range(m):
            if beta[i, 2 + j] > 0.0:
                ws.append(beta[i, 2 + j] * post_w[:, j])
                ms.append(m_upd[:, j, :])
                Ps.append(P_upd)
        w = np.concatenate(ws)
        keep = w > 0.0
        w = w[keep]
        out.append(Track(t.label, r, w / w.sum(), np.concatenate(ms)[keep], np.concatenate(Ps)[keep]))
    return out, GroupReport(n, m, n_hyp, method, wsum)


def update(tracks, Z, params, method=None):
    """Full measurement update over all groups. Returns ``(tracks, UpdateReport)``."""
    Z = _as_points(Z)
    gated = gate_matrix(tracks, Z, params)
    groups, residual = _group(gated)
    posterior = [None] * len(tracks)
    report = UpdateReport(residual_measurements=int(residual.size))
    for t_idx, z_idx in groups:
        updated, rep = update_group([tracks[i] for i in t_idx], Z[z_idx], params, method)
        for i, t in zip(t_idx, updated):
            posterior[i] = t
        report.groups.append(rep)
    return posterior, report


# ---------------------------------------------------------------------------
# Mixture management and extraction
# ---------------------------------------------------------------------------

def _symmetrize(P):
    return 0.5 * (P + np.swapaxes(P, -1, -2))


def prune_and_merge(track, gm=GmConfig()):
    """Prune, merge and cap the mixture of one track (weights renormalised)."""
    w, m, P = track.w, track.m, track.P
    keep = w >= gm.w_min
    if not keep.any():
        keep = w == w.max()
    w, m, P = w[keep], m[keep], P[keep]
    w, m, P = kernels.merge_components(w, m, P, gm.merge_thresh)
    P = _symmetrize(P)
    if w.size > gm.n_max:
        top = np.argsort(-w, kind="stable")[: gm.n_max]
        w, m, P = w[top], m[top], P[top]
    return Track(track.label, track.r, w / w.sum(), m, P)


def prune_density(tracks, gm=GmConfig()):
    """Drop improbable tracks and tidy the mixtures of the rest."""
    return [prune_and_merge(t, gm) for t in tracks if t.r >= gm.r_min]


@dataclass(frozen=True)
class Estimate:
    label: tuple
    r: float
    state: np.ndarray


def extract_tracks(tracks, threshold=0.5):
    """Labelled estimates of every track whose existence exceeds ``threshold``."""
    return [Estimate(t.label, t.r, t.best_state().copy()) for t in tracks if t.r > threshold]


class LmbFilter:
    """Stateful predict/update loop around the functional filter operations."""

    def __init__(self, params, model, gm=None):
        self.params = params
        self.model = model
        self.gm = gm if gm is not None else params.gm
        self.tracks = []
        self.last_report = None

    def predict(self, birth):
        self.tracks = predict(self.tracks, birth, self.params, self.model)
        return self.tracks

    def update(self, Z, method=None):
        posterior, self.last_report = update(self.tracks, Z, self.params, method)
        self.tracks = prune_density(posterior, self.gm)
        return self.last_report

    def step(self, Z, birth):
        self.predict(birth)
        self.update(Z)
        return self.estimates()

    def estimates(self):
        return extract_tracks(self.tracks, self.params.existence_threshold)
