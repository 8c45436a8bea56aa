"""Synthetic sea-clutter scenes: motion model, K-distributed clutter, targets.

Range-azimuth maps are plain ``float64`` arrays of shape ``(n_az, n_rg)``
holding non-negative amplitudes. Target states are 4-vectors ordered
``[a, a_dot, r, r_dot]`` (azimuth cell, azimuth rate, range cell, range rate).
"""
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np
from scipy import special

STATE_DIM = 4
POS_IDX = (0, 2)


class ScenarioError(ValueError):
    """Raised when a scenario cannot be generated as configured."""


# ---------------------------------------------------------------------------
# Motion model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MotionModel:
    T: float
    q: float
    F: np.ndarray
    Q: np.ndarray


def make_motion_model(T=1.0, q=0.1):
    """Nearly-constant-velocity model in interleaved ``[a, a_dot, r, r_dot]`` order."""
    if not T > 0:
        raise ValueError(f"sampling period T must be positive, got {T}")
    if q < 0:
        raise ValueError(f"process noise intensity q must be non-negative, got {q}")
    phi = np.array([[1.0, T], [0.0, 1.0]])
    psi = q * np.array([[T**3 / 3.0, T**2 / 2.0], [T**2 / 2.0, T]])
    zero = np.zeros((2, 2))
    F = np.block([[phi, zero], [zero, phi]])
    Q = np.block([[psi, zero], [zero, psi]])
    return MotionModel(T=float(T), q=float(q), F=F, Q=Q)


def propagate_state(x, model, noise=False, rng=None):
    """One transition step ``F x`` (plus ``N(0, Q)`` noise when ``noise``)."""
    x = np.asarray(x, dtype=np.float64)
    out = model.F @ x
    if noise:
        if rng is None:
            raise ValueError("noise=True requires a random generator")
        out = out + rng.multivariate_normal(np.zeros(STATE_DIM), model.Q, method="cholesky")
    return out


# ---------------------------------------------------------------------------
# Clutter
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClutterModel:
    nu: float = 8.0
    mu: float = 1.0
    corr_len: float = 3.0

    def __post_init__(self):
        if not self.nu > 0:
            raise ValueError(f"K-distribution shape nu must be positive, got {self.nu}")
        if not self.mu > 0:
            raise ValueError(f"mean clutter amplitude mu must be positive, got {self.mu}")
        if self.corr_len < 0:
            raise ValueError(f"corr_len must be non-negative, got {self.corr_len}")


def k_mean_factor(nu):
    """``E[sqrt(tau) * R]`` for unit-mean Gamma texture and unit-power Rayleigh speckle."""
    e_sqrt_tau = np.exp(special.gammaln(nu + 0.5) - special.gammaln(nu)) / np.sqrt(nu)
    return e_sqrt_tau * np.sqrt(np.pi) / 2.0


def _circular_kernel(n, sigma):
    half = int(np.ceil(4.0 * sigma))
    offsets = np.arange(-half, half + 1)
    w = np.exp(-0.5 * (offsets / sigma) ** 2)
    w /= w.sum()
    folded = np.zeros(n)
    np.add.at(folded, offsets % n, w)
    return folded


def _smooth_unit_gaussian(g, sigma):
    """Circularly smooth white noise ``g`` and rescale to unit variance."""
    out = g
    for axis, n in enumerate(g.shape):
        k = _circular_kernel(n, sigma)
        spec = np.fft.rfft(k)
        moved = np.moveaxis(out, axis, -1)
        moved = np.fft.irfft(np.fft.rfft(moved, axis=-1) * spec, n=n, axis=-1)
        out = np.moveaxis(moved, -1, axis) / np.sqrt(np.sum(k**2))
    return out


def sample_texture(dims, model, rng):
    """Unit-mean Gamma(nu) texture field, spatially correlated when ``corr_len > 0``.

    Correlation is imposed on a Gaussian field which is then mapped through
    the Gamma quantile function, so the marginal stays exactly Gamma for any
    correlation length.
    """
    dims = tuple(int(d) for d in dims)
    if model.corr_len == 0:
        return rng.gamma(model.nu, 1.0 / model.nu, size=dims)
    g = _smooth_unit_gaussian(rng.standard_normal(dims), model.corr_len)
    nodes, values = _gaussian_to_gamma_table(float(model.nu))
    return np.interp(g, nodes, values)


@lru_cache(maxsize=32)
def _gaussian_to_gamma_table(nu, half_width=9.0, step=1e-3):
    """Tabulated map from a standard normal value to a unit-mean Gamma(nu) value."""
    g = np.arange(-half_width, half_width + step / 2, step)
    tau = np.empty_like(g)
    low = g < 0
    # each tail through its own complement to keep precision
    tau[low] = special.gammaincinv(nu, special.ndtr(g[low]))
    tau[~low] = special.gammainccinv(nu, special.ndtr(-g[~low]))
    return g, tau / nu


def sample_clutter(dims, model, rng):
    """K-distributed amplitude map with mean ``model.mu``.

    Compound construction: ``mu * sqrt(texture) * speckle / E[...]`` with
    Rayleigh speckle of unit mean power.
    """
    dims = tuple(int(d) for d in dims)
    if len(dims) != 2 or min(dims) <= 0:
        raise ValueError(f"map dimensions must be two positive integers, got {dims}")
    tau = sample_texture(dims, model, rng)
    speckle = rng.rayleigh(scale=np.sqrt(0.5), size=dims)
    return model.mu * np.sqrt(tau) * speckle / k_mean_factor(model.nu)


# ---------------------------------------------------------------------------
# Targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetInjection:
    sir_db: float
    psf_sigma_az: float = 2.0
    psf_sigma_rg: float = 1.0


def sir_to_amplitude(sir_db, mu):
    """Mean target amplitude for a given SIR over clutter of mean ``mu``."""
    return mu * 10.0 ** (sir_db / 10.0)


def inject_target(grid, pos, inj, mu, fluctuate=False, rng=None):
    """Add a Gaussian point-spread blob to a copy of ``grid``.

    The blob is centred on the cell nearest ``pos`` and truncated at three
    standard deviations per axis. Its peak is the mean amplitude implied by
    ``inj.sir_db``, or a Rayleigh draw with that mean when ``fluctuate``.
    """
    grid = np.array(grid, dtype=np.float64, copy=True)
    n_az, n_rg = grid.shape
    ca, cr = int(np.rint(pos[0])), int(np.rint(pos[1]))
    if not (0 <= ca < n_az and 0 <= cr < n_rg):
        raise ScenarioError(f"target position {tuple(pos)} outside map of shape {grid.shape}")
    chi = sir_to_amplitude(inj.sir_db, mu)
    if fluctuate:
        if rng is None:
            raise ValueError("fluctuate=True requires a random generator")
        peak = rng.rayleigh(scale=chi / np.sqrt(np.pi / 2.0))
    else:
        peak = chi
    ha = int(np.floor(3.0 * inj.psf_sigma_az))
    hr = int(np.floor(3.0 * inj.psf_sigma_rg))
    a0, a1 = max(0, ca - ha), min(n_az, ca + ha + 1)
    r0, r1 = max(0, cr - hr), min(n_rg, cr + hr + 1)
    da = np.arange(a0, a1) - ca
    dr = np.arange(r0, r1) - cr
    wa = np.exp(-0.5 * (da / inj.psf_sigma_az) ** 2) if inj.psf_sigma_az > 0 else (da == 0).astype(float)
    wr = np.exp(-0.5 * (dr / inj.psf_sigma_rg) ** 2) if inj.psf_sigma_rg > 0 else (dr == 0).astype(float)
    grid[a0:a1, r0:r1] += peak * np.outer(wa, wr)
    return grid


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TargetSpec:
    start_a: float
    start_r: float
    vel_a: float = 0.0
    vel_r: float = 0.0
    sir_db: float = 8.0

    @property
    def initial_state(self):
        return np.array([self.start_a, self.vel_a, self.start_r, self.vel_r], dtype=np.float64)


def default_targets(sir_db=8.0):
    return [
        TargetSpec(20.0, 110.0, 0.5, 2.0, sir_db),
        TargetSpec(40.0, 400.0, 0.6, -1.5, sir_db),
        TargetSpec(70.0, 240.0, -0.4, 1.2, sir_db),
    ]


@dataclass
class ScenarioConfig:
    n_az: int = 128
    n_rg: int = 512
    n_scans: int = 50
    T: float = 1.0
    q: float = 0.1
    clutter: ClutterModel = field(default_factory=ClutterModel)
    targets: list = field(default_factory=default_targets)
    psf_sigma_az: float = 2.0
    psf_sigma_rg: float = 1.0
    fluctuate: bool = True
    truth_noise: bool = False

    def __post_init__(self):
        if self.n_az <= 0 or self.n_rg <= 0:
            raise ValueError("map dimensions must be positive")
        if self.n_scans <= 0:
            raise ValueError("n_scans must be positive")

    def with_sir(self, sir_db):
        """Copy of this config with every target set to ``sir_db``."""
        targets = [TargetSpec(t.start_a, t.start_r, t.vel_a, t.vel_r, sir_db) for t in self.targets]
        return replace(self, targets=targets)

    def without_targets(self):
        return replace(self, targets=[])


@dataclass
class Scenario:
    """Ground truth plus (optionally) the rendered map sequence.

    ``truth`` has shape ``(n_scans, n_targets, 4)``; ``maps`` has shape
    ``(n_scans, n_az, n_rg)`` or is ``None`` when rendering was skipped.
    """
    config: ScenarioConfig
    truth: np.ndarray
    maps: np.ndarray = None

    def truth_positions(self, scan):
        return self.truth[scan][:, list(POS_IDX)]


def generate_truth(cfg, rng=None):
    """Propagate every configured target through ``cfg.n_scans`` scans."""
    model = make_motion_model(cfg.T, cfg.q)
    n_t = len(cfg.targets)
    truth = np.zeros((cfg.n_scans, n_t, STATE_DIM))
    for i, spec in enumerate(cfg.targets):
        x = spec.initial_state
        for k in range(cfg.n_scans):
            if k > 0:
                x = propagate_state(x, model, noise=cfg.truth_noise, rng=rng)
            a, r = x[0], x[2]
            if not (-0.5 <= a < cfg.n_az - 0.5 and -0.5 <= r < cfg.n_rg - 0.5):
                where = "starts" if k == 0 else f"leaves the map at scan {k}"
                raise ScenarioError(
                    f"target {i} {where}: position (a={a:.2f}, r={r:.2f}) "
                    f"outside {cfg.n_az}x{cfg.n_rg} map"
                )
            truth[k, i] = x
    return truth


def render_scan(cfg, states, rng):
    """Clutter map for one scan with every target in ``states`` injected."""
    grid = sample_clutter((cfg.n_az, cfg.n_rg), cfg.clutter, rng)
    for spec, x in zip(cfg.targets, states):
        inj = TargetInjection(spec.sir_db, cfg.psf_sigma_az, cfg.psf_sigma_rg)
        grid = inject_target(grid, (x[0], x[2]), inj, cfg.clutter.mu, cfg.fluctuate, rng)
    return grid


def generate_scenario(cfg, rng, render=True):
    """Truth trajectories and, when ``render``, the full map sequence."""
    truth = generate_truth(cfg, rng)
    maps = None
    if render:
        maps = np.stack([render_scan(cfg, truth[k], rng) for k in range(cfg.n_scans)])
    return Scenario(config=cfg, truth=truth, maps=maps)
