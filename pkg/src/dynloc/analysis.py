"""Chaotic-layer width, localisation strength and sweeps over the waveform."""

from dataclasses import dataclass, field
import math
from typing import NamedTuple

import numpy as np

from .classical import (DEFAULT_STEPS_PER_PERIOD as CLASSICAL_STEPS, ClassicalEnsemble,
                        momentum_std, run_batch)
from .elliptic import EllipticParameter, complete_K
from .forcing import ScaledParams, normalization, normalized_impulse
from .quantum import (DEFAULT_STEPS_PER_PERIOD as QUANTUM_STEPS, SpatialGrid,
                      averaged_width_series)

SERIES_RTOL = 1e-14
SERIES_MAX_TERMS = 200
_EPS = np.finfo(float).eps


class LayerWidthResult(NamedTuple):
    d: float
    n_terms: int
    truncation_error_bound: float


def _sech(y):
    return 0.0 if y > 700.0 else 1.0 / math.cosh(y)


def layer_width(lam, kappa, m, max_terms=SERIES_MAX_TERMS, rtol=SERIES_RTOL):
    """First-order energy width of the separatrix chaotic layer.

    d = 4 pi^3 lam N(m) / (kappa sqrt(m) K(m)^2) * sum_n a_n(kappa) b_n(m), with
    a_n = (n+1/2)^3 sech((n+1/2) pi / sqrt(kappa)) and
    b_n = sech((n+1/2) pi K(1-m) / K(m)).
    """
    m = EllipticParameter(m)
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    if lam < 0:
        raise ValueError("lambda must be >= 0")
    A = math.pi / math.sqrt(kappa)
    if m == 1.0:
        return LayerWidthResult(0.0, 1, 0.0)
    if m == 0.0:
        # as m -> 0 only n = 0 survives: b_0 / sqrt(m) -> 1/2 and K(0) = pi/2
        d = 8.0 * math.pi * lam * normalization(0.0) * 0.125 * _sech(0.5 * A) / kappa
        return LayerWidthResult(d, 1, 0.0)

    K = complete_K(m)
    B = math.pi * complete_K(1.0 - m) / K
    prefactor = 4.0 * math.pi ** 3 * lam * normalization(m) / (kappa * math.sqrt(m) * K ** 2)

    total = 0.0
    n = 0
    while n < max_terms:
        h = n + 0.5
        term = h ** 3 * _sech(h * A) * _sech(h * B)
        if n > 0 and term < rtol * total:
            break
        total += term
        n += 1

    # geometric tail bound from the term ratio beyond index n
    h = n + 0.5
    rho = ((h + 1.0) / h) ** 3 * math.exp(-A) * (1 + math.exp(-2 * A * h)) \
        * math.exp(-B) * (1 + math.exp(-2 * B * h))
    t_next = h ** 3 * _sech(h * A) * _sech(h * B)
    tail = t_next / (1.0 - rho) if rho < 1.0 else math.inf
    d = prefactor * total
    # plus rounding of the summation and prefactor
    return LayerWidthResult(d, n, prefactor * tail + 8.0 * n * _EPS * d)


class Maximum(NamedTuple):
    m_star: float
    f_star: float
    at_boundary: bool


_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def find_max_over_m(f, bracket=(1e-3, 0.999), resolution=1e-3, tol=1e-5):
    """Coarse grid scan then golden-section refinement of the best bracket.

    ``at_boundary`` is set when the best grid point sits on an end of the
    bracket or ``f`` is flat there (no interior maximum).
    """
    lo, hi = bracket
    grid = np.arange(lo, hi + 0.5 * resolution, resolution)
    grid = grid[grid <= hi]
    vals = np.array([f(m) for m in grid])
    i = int(np.argmax(vals))
    flat = np.ptp(vals) <= 1e-12 * max(1.0, np.max(np.abs(vals)))
    if flat or i == 0 or i == len(grid) - 1:
        return Maximum(float(grid[i]), float(vals[i]), True)

    a, b = grid[i - 1], grid[i + 1]
    c = b - _INV_PHI * (b - a)
    d = a + _INV_PHI * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _INV_PHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INV_PHI * (b - a)
            fd = f(d)
    m_star = 0.5 * (a + b)
    return Maximum(float(m_star), float(f(m_star)), False)


@dataclass
class SweepRecord:
    m: float
    lam: float
    dp_c: float
    dp_q: float
    impulse_norm: float
    layer_width: float
    dp_cmq: float = field(init=False)

    def __post_init__(self):
        self.dp_cmq = self.dp_c - self.dp_q


@dataclass
class DLConfig:
    """Numerical settings shared by the classical and quantum halves of a run."""

    ensemble_size: int = 100_000
    seed: int = 0
    n_periods: int = 50
    classical_steps: int = CLASSICAL_STEPS
    n_packets: int = 8
    grid: SpatialGrid = field(default_factory=SpatialGrid)
    quantum_steps: int = QUANTUM_STEPS
    window: int = 10
    workers: int = None


def classical_width_series(params_list, cfg):
    """Delta p_C after every period for each parameter set (shared initial ensemble)."""
    e = ClassicalEnsemble.initial(cfg.ensemble_size, seed=cfg.seed)
    n = len(e)
    n_cfg = len(params_list)
    x = np.tile(e.x, n_cfg)
    p = np.tile(e.p, n_cfg)
    idx = np.repeat(np.arange(n_cfg), n)
    _, ps = run_batch(x, p, idx, params_list, cfg.n_periods, cfg.classical_steps)
    ps = ps.reshape(n_cfg, n, cfg.n_periods)
    hbar = np.array([q.hbar_eff for q in params_list])[:, None]
    return momentum_std(ps, axis=1) / hbar


def sweep(params_list, cfg=None):
    """Run classical and quantum propagation for every parameter set; one record each."""
    cfg = cfg or DLConfig()
    if cfg.n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    params_list = list(params_list)
    wc = classical_width_series(params_list, cfg)
    wq = averaged_width_series(params_list, cfg.n_packets, cfg.n_periods, cfg.grid,
                               cfg.quantum_steps, cfg.workers)
    tail = slice(-cfg.window, None)
    out = []
    for q, c, w in zip(params_list, wc, wq):
        out.append(SweepRecord(
            m=q.m, lam=q.lam,
            dp_c=float(np.mean(c[tail])), dp_q=float(np.mean(w[tail])),
            impulse_norm=normalized_impulse(q.m),
            layer_width=layer_width(q.lam, q.kappa, q.m).d,
        ))
    return out


def dl_strength(params, cfg=None):
    """Delta p_{C-Q} and companions for one parameter set."""
    return sweep([params], cfg)[0]


def correlation_study(kappa, lam, hbar_eff, m_grid, cfg=None):
    """Records over ``m_grid`` at fixed kappa, lambda, hbar_eff, in grid order."""
    m_grid = [float(m) for m in m_grid]
    if any(not 0.0 <= m < 1.0 for m in m_grid):
        raise ValueError("m_grid must lie in [0, 1)")
    return sweep([ScaledParams(kappa, lam, m, hbar_eff) for m in m_grid], cfg)


def lambda_sweep(kappa, hbar_eff, m_values, lam_grid, cfg=None):
    """Records for every (m, lambda) pair, m-major order."""
    params = [ScaledParams(kappa, float(l), float(m), hbar_eff) for m in m_values for l in lam_grid]
    return sweep(params, cfg)


def onset_lambda(records, threshold=1.0):
    """Smallest lambda whose Delta p_{C-Q} exceeds ``threshold`` (None if never)."""
    for r in sorted(records, key=lambda r: r.lam):
        if r.dp_cmq > threshold:
            return r.lam
    return None


def pearson(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.corrcoef(a, b)[0, 1])


def waveform_distance(m1, m2, n_samples=4096):
    """r.m.s. distance over one period between the two waveforms, each scaled to unit peak."""
    from .forcing import Waveform
    tau = np.arange(n_samples) * (2.0 * math.pi / n_samples)
    f1 = Waveform(m1)(tau)
    f2 = Waveform(m2)(tau)
    f1 = f1 / np.max(np.abs(f1))
    f2 = f2 / np.max(np.abs(f2))
    return float(np.sqrt(np.mean((f1 - f2) ** 2)))
