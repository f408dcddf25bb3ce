"""Classical dynamics of H = p^2/2 - kappa cos(x - lambda F(tau; m)).

The Liouville density is carried by characteristics: an ensemble of
independent trajectories advanced with a fourth-order symplectic scheme
(Yoshida triple jump of drift-kick-drift leapfrog, time treated as an
extended coordinate so the force is sampled at each sub-stage time).
"""

from dataclasses import dataclass, replace
import math
from typing import NamedTuple

import numba
import numpy as np
from scipy import ndimage

from .forcing import SCALED_PERIOD, force

TWO_PI = 2.0 * math.pi
DP0 = 0.386
DEFAULT_STEPS_PER_PERIOD = 1000
DEFAULT_ENSEMBLE_SIZE = 100_000

_CBRT2 = 2.0 ** (1.0 / 3.0)
YOSHIDA_W = (1.0 / (2.0 - _CBRT2), -_CBRT2 / (2.0 - _CBRT2), 1.0 / (2.0 - _CBRT2))


class PhaseState(NamedTuple):
    x: float
    p: float


def hamilton_rhs(s, tau, params):
    """(dx/dtau, dp/dtau) = (p, -kappa sin(x - lambda F(tau)))."""
    shift = params.lam * force(tau, params.m)
    return s.p, -params.kappa * math.sin(s.x - shift)


def pendulum_energy(x, p, kappa):
    """Unperturbed H0 = p^2/2 - kappa cos x."""
    return 0.5 * np.square(p) - kappa * np.cos(x)


def kick_offsets(dtau):
    """Times, relative to the step start, at which the three kicks sample F."""
    offsets = []
    t = 0.0
    for w in YOSHIDA_W:
        offsets.append(t + 0.5 * w * dtau)
        t += w * dtau
    return np.array(offsets)


def step(s, tau, dtau, params):
    """One fourth-order symplectic step of length ``dtau`` starting at ``tau``.

    A negative ``dtau`` from ``tau`` exactly inverts the forward step that
    ended at ``tau`` (the composition is symmetric).
    """
    x, p = s
    t = tau
    for w in YOSHIDA_W:
        hw = w * dtau
        x += 0.5 * hw * p
        t += 0.5 * hw
        p -= hw * params.kappa * math.sin(x - params.lam * force(t, params.m))
        x += 0.5 * hw * p
        t += 0.5 * hw
    return PhaseState(x, p)


def shift_table(params_list, steps_per_period):
    """lambda F at every kick time of one period, shape (n_cfg, steps, 3).

    F is 2 pi periodic, so one period of table serves every period.
    """
    dtau = SCALED_PERIOD / steps_per_period
    times = np.arange(steps_per_period)[:, None] * dtau + kick_offsets(dtau)[None, :]
    return np.stack([p.lam * np.asarray(force(times, p.m)) for p in params_list])


_BLOCK = 64


@numba.njit(parallel=True, cache=True)
def _strobe_kernel(x, p, cfg, kappa, shifts, dtau, n_periods, backward, xs, ps):
    # advances x, p in place; column j of xs/ps receives the state after
    # period j (zero columns means no record).  Trajectories are processed in
    # blocks so independent sin evaluations overlap; every trajectory still
    # sees exactly the same arithmetic sequence, whatever the blocking.
    n_traj = x.shape[0]
    n_steps = shifts.shape[1]
    w = np.empty(3)
    w[0] = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
    w[1] = 1.0 - 2.0 * w[0]
    w[2] = w[0]
    h = -dtau if backward else dtau
    record = ps.shape[1] > 0
    n_blocks = (n_traj + _BLOCK - 1) // _BLOCK
    for b in numba.prange(n_blocks):
        lo = b * _BLOCK
        hi = min(lo + _BLOCK, n_traj)
        nb = hi - lo
        xb = x[lo:hi].copy()
        pb = p[lo:hi].copy()
        kb = np.empty(nb)
        cb = np.empty(nb, dtype=np.int64)
        for k in range(nb):
            cb[k] = cfg[lo + k]
            kb[k] = kappa[cb[k]]
        for per in range(n_periods):
            for s in range(n_steps):
                for j in range(3):
                    hw = w[j] * h
                    if backward:
                        si = n_steps - 1 - s
                        ji = 2 - j
                    else:
                        si = s
                        ji = j
                    for k in range(nb):
                        xb[k] += 0.5 * hw * pb[k]
                    for k in range(nb):
                        pb[k] -= hw * kb[k] * math.sin(xb[k] - shifts[cb[k], si, ji])
                    for k in range(nb):
                        xb[k] += 0.5 * hw * pb[k]
            if record:
                for k in range(nb):
                    xs[lo + k, per] = xb[k]
                    ps[lo + k, per] = pb[k]
        x[lo:hi] = xb
        p[lo:hi] = pb


def run_batch(x, p, cfg, params_list, n_periods, steps_per_period=DEFAULT_STEPS_PER_PERIOD,
              record=True, backward=False):
    """Advance trajectories in place; trajectory ``i`` uses ``params_list[cfg[i]]``.

    Returns ``(xs, ps)`` stroboscopic records of shape (n_traj, n_periods),
    unwrapped in x.  Each trajectory is independent, so results do not depend
    on the numba thread count.
    """
    shifts = shift_table(params_list, steps_per_period)
    kappa = np.array([q.kappa for q in params_list], dtype=float)
    n_rec = n_periods if record else 0
    xs = np.empty((x.shape[0], n_rec))
    ps = np.empty((x.shape[0], n_rec))
    _strobe_kernel(x, p, np.asarray(cfg, dtype=np.int64), kappa, shifts,
                   SCALED_PERIOD / steps_per_period, int(n_periods), bool(backward), xs, ps)
    return xs, ps


def gaussian_from_uniforms(u1, u2):
    """Box-Muller transform; exact count, no rejection loop."""
    return np.sqrt(-2.0 * np.log1p(-u1)) * np.cos(TWO_PI * u2)


@dataclass
class ClassicalEnsemble:
    """Phase-space samples (x, p) at scaled time ``t``; x is stored modulo ``L``."""

    x: np.ndarray
    p: np.ndarray
    seed: int = 0
    t: float = 0.0
    L: float = TWO_PI

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.p = np.asarray(self.p, dtype=float)
        if self.x.shape != self.p.shape or self.x.ndim != 1 or self.x.size < 1:
            raise ValueError("ensemble needs matching non-empty 1-D x and p arrays")

    @classmethod
    def initial(cls, size=DEFAULT_ENSEMBLE_SIZE, seed=0, dp0=DP0):
        """Uniform x over one wavelength, Gaussian p of standard deviation ``dp0``."""
        if size < 1:
            raise ValueError("ensemble size must be >= 1")
        rng = np.random.Generator(np.random.PCG64(seed))
        u = rng.random((3, size))
        x = TWO_PI * u[0]
        p = dp0 * gaussian_from_uniforms(u[1], u[2])
        return cls(x, p, seed=seed)

    def __len__(self):
        return self.x.size

    @property
    def states(self):
        return [PhaseState(float(a), float(b)) for a, b in zip(self.x, self.p)]


def evolve_ensemble(e, n_periods, params, steps_per_period=DEFAULT_STEPS_PER_PERIOD,
                    backward=False):
    """Return a new ensemble advanced by ``n_periods`` drive periods (or back)."""
    if n_periods < 0:
        raise ValueError("n_periods must be >= 0")
    x = e.x.copy()
    p = e.p.copy()
    run_batch(x, p, np.zeros(len(e), dtype=np.int64), [params], n_periods,
              steps_per_period, record=False, backward=backward)
    dt = n_periods * SCALED_PERIOD * (-1 if backward else 1)
    return replace(e, x=np.mod(x, e.L), p=p, t=e.t + dt)


def momentum_std(p, axis=None):
    # numpy reductions use pairwise summation: order fixed, independent of threads
    p = np.asarray(p, dtype=float)
    mean = np.mean(p, axis=axis, keepdims=True)
    return np.sqrt(np.mean(np.square(p - mean), axis=axis))


def momentum_width(e, params):
    """Normalised r.m.s. momentum width sqrt(var p) / hbar_eff."""
    return float(momentum_std(e.p)) / params.hbar_eff


def wrap_angle(x):
    """Reduce x into [-pi, pi)."""
    return np.mod(np.asarray(x) + math.pi, TWO_PI) - math.pi


@dataclass
class SurfaceOfSection:
    x: np.ndarray          # (n_orbits, n_periods), in [-pi, pi)
    p: np.ndarray
    n_periods: int
    strobe_period: float = SCALED_PERIOD

    @property
    def points(self):
        return [PhaseState(float(a), float(b)) for a, b in zip(self.x.ravel(), self.p.ravel())]


def psos(initial_conditions, n_periods, params, steps_per_period=DEFAULT_STEPS_PER_PERIOD):
    """Stroboscopic section at tau = 2 pi j, j = 1..n_periods, for each orbit."""
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    ic = np.asarray(initial_conditions, dtype=float).reshape(-1, 2)
    x = ic[:, 0].copy()
    p = ic[:, 1].copy()
    xs, ps = run_batch(x, p, np.zeros(len(x), dtype=np.int64), [params], n_periods,
                       steps_per_period)
    return SurfaceOfSection(wrap_angle(xs), ps, n_periods)


def psos_grid(nx=24, np_=24, p_range=(-3.0, 3.0)):
    """Uniform grid of initial conditions over [-pi, pi) x p_range."""
    xg = -math.pi + TWO_PI * np.arange(nx) / nx
    pg = np.linspace(p_range[0], p_range[1], np_)
    X, P = np.meshgrid(xg, pg, indexing="ij")
    return np.column_stack([X.ravel(), P.ravel()])


def separatrix(tau, tau0, kappa, branch=1):
    """Point on the H0 separatrix at time ``tau``; ``branch`` is +1 or -1."""
    if kappa <= 0:
        raise ValueError("kappa must be > 0")
    if branch not in (1, -1):
        raise ValueError("branch must be +1 or -1")
    rk = math.sqrt(kappa)
    s = rk * (np.asarray(tau, dtype=float) - tau0)
    x = branch * 2.0 * np.arctan(np.sinh(s))
    p = branch * 2.0 * rk / np.cosh(s)
    if np.ndim(x) == 0:
        return PhaseState(float(x), float(p))
    return x, p


@dataclass
class IslandMap:
    """Regular islands found as unvisited regions enclosed by the chaotic sea.

    ``labels[i, j]`` is 0 on visited or open cells and k >= 1 inside island k,
    islands numbered by decreasing area.  ``x`` and ``p`` are cell centres.
    """

    labels: np.ndarray
    x: np.ndarray
    p: np.ndarray

    @property
    def sizes(self):
        return np.bincount(self.labels.ravel())[1:]

    def mask(self, k=1):
        return self.labels == k


def sea_histogram(params, n_orbits=200, n_periods=2000, nx=64, n_p=128, p_range=(-6.0, 6.0),
                  centre=(math.pi, 1.0), spread=0.05, seed=0,
                  steps_per_period=DEFAULT_STEPS_PER_PERIOD):
    """Visit counts of a cloud of orbits started near ``centre``, on [-pi, pi) x p_range."""
    rng = np.random.default_rng(seed)
    ic = np.column_stack([centre[0] + spread * rng.standard_normal(n_orbits),
                          centre[1] + spread * rng.standard_normal(n_orbits)])
    sec = psos(ic, n_periods, params, steps_per_period)
    H, _, _ = np.histogram2d(sec.x.ravel(), sec.p.ravel(), bins=[nx, n_p],
                             range=[[-math.pi, math.pi], list(p_range)])
    return H


def find_islands(visits, p_range=(-6.0, 6.0)):
    """Label the unvisited components of a sea histogram that do not reach the p edges.

    Components are joined across x = +-pi (the angle is periodic).
    """
    visits = np.asarray(visits)
    nx, n_p = visits.shape
    lab, _ = ndimage.label(visits == 0)
    for j in range(n_p):
        a, b = lab[0, j], lab[-1, j]
        if a and b and a != b:
            lab[lab == b] = a
    open_ids = set(lab[:, 0]) | set(lab[:, -1])
    ids = [i for i in np.unique(lab) if i and i not in open_ids]
    ids.sort(key=lambda i: (-int(np.sum(lab == i)), i))
    labels = np.zeros_like(lab)
    for k, i in enumerate(ids, 1):
        labels[lab == i] = k
    x = -math.pi + (np.arange(nx) + 0.5) * TWO_PI / nx
    p = p_range[0] + (np.arange(n_p) + 0.5) * (p_range[1] - p_range[0]) / n_p
    return IslandMap(labels, x, p)
