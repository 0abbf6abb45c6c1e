"""Synthetic heterogeneous error-correction panels.

Two designs share the same dynamics
``dy_it = c_i - alpha_i (y_{i,t-1} - beta x_{i,t-1}) + u_{y,it}``,
``dx_it = u_{x,it}``; they differ in whether ``u_y`` carries a common factor
structure with strong, semi-strong and weak factors.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from .panel import PanelDataset, UnitSeries


def replication_rng(seed: int, *key: int) -> np.random.Generator:
    """Generator for stream ``key`` of ``seed``; independent of call order."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))


@dataclass(frozen=True)
class DgpConfig:
    n: int = 20
    T: int = 20
    beta: float = 1.0
    alpha_range: tuple[float, float] = (0.2, 0.3)
    sigma2_y_range: tuple[float, float] = (0.8, 1.2)
    sigma2_x_range: tuple[float, float] = (0.8, 1.2)
    rho_range: tuple[float, float] = (0.3, 0.7)
    cross_sectional_dependence: bool = False
    m: int = 5
    factor_exponents: tuple[float, ...] = (1.0, 0.9, 0.8, 0.7, 0.6)
    burn_in: int = 100
    fix_loadings: bool = False
    seed: int = 0
    extra: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        lo, hi = self.alpha_range
        if not (0 < lo <= hi < 2):
            raise ValueError("alpha bounds must satisfy 0 < lo <= hi < 2")
        if not (-1 <= self.rho_range[0] <= self.rho_range[1] <= 1):
            raise ValueError("rho bounds must lie in [-1, 1]")
        for name in ("sigma2_y_range", "sigma2_x_range"):
            a, b = getattr(self, name)
            if not (0 < a <= b):
                raise ValueError(f"{name} must be positive and ordered")
        if self.n < 1 or self.T < 4:
            raise ValueError("need n >= 1 and T >= 4")
        if self.m < 0 or (self.cross_sectional_dependence and len(self.factor_exponents) < self.m):
            raise ValueError("need one exponent per factor")
        if self.burn_in < 0:
            raise ValueError("burn_in must be nonnegative")

    def as_dict(self) -> dict:
        d = asdict(self)
        d.pop("extra")
        return d


def _loadings(config: DgpConfig, rng: np.random.Generator) -> np.ndarray:
    a = np.asarray(config.factor_exponents[: config.m], dtype=float)
    gmax = 2.0 * config.n ** (a - 1.0)
    return rng.uniform(0.0, 1.0, size=(config.n, config.m)) * gmax


def draw_errors(config: DgpConfig, rng: np.random.Generator, periods: int, rho, gamma=None):
    """Standardized errors ``(e_y, e_x)`` of shape (n, periods) with corr(e_y, e_x) = rho."""
    n = config.n
    eps_y = rng.standard_normal((n, periods))
    eps_x = rng.standard_normal((n, periods))
    if config.cross_sectional_dependence and config.m > 0:
        if gamma is None:
            gamma = _loadings(config, rng)
        f = rng.standard_normal((config.m, periods))
        scale = 1.0 / np.sqrt(1.0 + (gamma**2).sum(axis=1))
        e_y = scale[:, None] * (eps_y + gamma @ f)
    else:
        e_y = eps_y
    e_x = rho[:, None] * e_y + np.sqrt(1.0 - rho**2)[:, None] * eps_x
    return e_y, e_x


def generate_panel(config: DgpConfig, rep_seed=0) -> PanelDataset:
    """One synthetic panel with ``T + 1`` level observations per unit.

    The first observation plays the role of the initial value, so every
    estimator works with ``T`` effective rows. ``rep_seed`` selects an
    independent stream of ``config.seed``; a ``numpy.random.Generator`` may be
    passed instead.
    """
    rng = rep_seed if isinstance(rep_seed, np.random.Generator) else replication_rng(config.seed, rep_seed)
    n, T, B, beta = config.n, config.T, config.burn_in, config.beta
    alpha = rng.uniform(*config.alpha_range, size=n)
    sy = np.sqrt(rng.uniform(*config.sigma2_y_range, size=n))
    sx = np.sqrt(rng.uniform(*config.sigma2_x_range, size=n))
    rho = rng.uniform(*config.rho_range, size=n)
    mu = rng.normal(1.0, 1.0, size=(n, 2))
    c = alpha * mu[:, 0] - alpha * beta * mu[:, 1]
    gamma = None
    if config.cross_sectional_dependence and config.fix_loadings:
        gamma = _loadings(config, replication_rng(config.seed, 2**31 - 1))
    e_y, e_x = draw_errors(config, rng, B + T, rho, gamma)
    u_y = sy[:, None] * e_y
    u_x = sx[:, None] * e_x

    # burn in the equilibrium error from its mean; x starts at mu_2
    xi = mu[:, 0] - beta * mu[:, 1]
    for s in range(B):
        xi = (1.0 - alpha) * xi + c + u_y[:, s] - beta * u_x[:, s]
    x = np.empty((n, T + 1))
    y = np.empty((n, T + 1))
    x[:, 0] = mu[:, 1]
    y[:, 0] = xi + beta * x[:, 0]
    for t in range(1, T + 1):
        x[:, t] = x[:, t - 1] + u_x[:, B + t - 1]
        y[:, t] = y[:, t - 1] + c - alpha * (y[:, t - 1] - beta * x[:, t - 1]) + u_y[:, B + t - 1]
    return PanelDataset.from_arrays(y, x)


def simulate_ardl_panel(beta, alpha, delta, c, T: int, rng: np.random.Generator,
                        sigma_v=0.0, sigma_x=1.0, y0=None, x0=None, t0=0,
                        lengths=None) -> PanelDataset:
    """Panel from ``dy = c - alpha (y_{-1} - beta'x_{-1}) + delta'dx + v`` with random-walk ``x``.

    ``alpha``, ``c`` are length-n arrays and ``delta`` is (n, k). With
    ``sigma_v=0`` the Bewley regression fits every unit exactly. ``lengths``
    gives per-unit level counts for unbalanced panels (default ``T`` each).
    """
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    alpha = np.asarray(alpha, dtype=float)
    delta = np.asarray(delta, dtype=float).reshape(alpha.shape[0], beta.shape[0])
    c = np.asarray(c, dtype=float)
    n, k = alpha.shape[0], beta.shape[0]
    lengths = [T] * n if lengths is None else list(lengths)
    sigma_v = np.broadcast_to(np.asarray(sigma_v, dtype=float), (n,))
    units = []
    for i in range(n):
        Ti = lengths[i]
        dx = sigma_x * rng.standard_normal((Ti, k))
        x = np.cumsum(dx, axis=0) + (0.0 if x0 is None else x0[i])
        y = np.empty(Ti)
        y[0] = (c[i] / alpha[i] + x[0] @ beta) if y0 is None else y0[i]
        v = sigma_v[i] * rng.standard_normal(Ti)
        for t in range(1, Ti):
            y[t] = (y[t - 1] + c[i] - alpha[i] * (y[t - 1] - x[t - 1] @ beta)
                    + (x[t] - x[t - 1]) @ delta[i] + v[t])
        units.append(UnitSeries(str(i + 1), y, x, t0))
    return PanelDataset.from_units(units)
