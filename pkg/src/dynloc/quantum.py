"""Quantum dynamics on a periodic box of L = 2 pi n_cells.

Split-operator (Strang) propagation of

    i hbar d psi/dtau = [-(hbar^2/2) d^2/dx^2 - kappa cos(x - lambda F(tau))] psi,

Gaussian initial packets, momentum widths and the periodised Husimi
distribution used for quantum surfaces of section.
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import fft as sfft

from .classical import DP0, TWO_PI
from .forcing import SCALED_PERIOD, force

DEFAULT_N_CELLS = 16
DEFAULT_POINTS_PER_CELL = 64
DEFAULT_STEPS_PER_PERIOD = 2048
DEFAULT_N_PACKETS = 8
HUSIMI_ALPHA = 3.0
HUSIMI_N_MAX = 4
# memory cap for the per-period potential phase tables of one chunk
_TABLE_BYTES = 256 * 2 ** 20


class ConfigurationError(ValueError):
    pass


@dataclass(frozen=True)
class SpatialGrid:
    n_cells: int = DEFAULT_N_CELLS
    points_per_cell: int = DEFAULT_POINTS_PER_CELL

    def __post_init__(self):
        ppc = self.points_per_cell
        if self.n_cells < 1:
            raise ConfigurationError("n_cells must be >= 1")
        if ppc < 32 or ppc & (ppc - 1):
            raise ConfigurationError("points_per_cell must be a power of two >= 32")

    @property
    def size(self):
        return self.n_cells * self.points_per_cell

    @property
    def L(self):
        return TWO_PI * self.n_cells

    @property
    def dx(self):
        return self.L / self.size

    @property
    def x(self):
        return np.arange(self.size) * self.dx

    @property
    def k(self):
        """Angular wave numbers in FFT order."""
        return TWO_PI * np.fft.fftfreq(self.size, d=self.dx)


@dataclass
class WaveFunction:
    amplitudes: np.ndarray
    grid: SpatialGrid
    t: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if self.amplitudes.shape != (self.grid.size,):
            raise ValueError("amplitude count does not match the grid")

    def norm(self):
        return float(np.sqrt(np.sum(np.abs(self.amplitudes) ** 2) * self.grid.dx))

    def momentum_distribution(self, hbar_eff):
        """(p, P(p)) on the discrete momentum grid, P summing to one."""
        return hbar_eff * self.grid.k, _momentum_probs(self.amplitudes)


def _momentum_probs(psi):
    phi = sfft.fft(psi, axis=-1)
    P = np.abs(phi) ** 2
    return P / P.sum(axis=-1, keepdims=True)


def gaussian_packet(x0, p0, params, grid, dp0=DP0):
    """psi = (pi dx0)^(-1/4) exp(-(x-x0)^2/(2 dx0) + i x p0/hbar), dx0 = hbar/dp0.

    The packet is laid on the box with minimum-image distances and then
    renormalised on the grid.
    """
    if not 0.0 <= x0 < grid.L:
        raise ConfigurationError(f"x0={x0!r} outside the box [0, {grid.L!r})")
    dx0 = params.hbar_eff / dp0
    sigma = math.sqrt(dx0 / 2.0)  # standard deviation of |psi|^2
    if sigma > grid.L / 4.0:
        raise ConfigurationError("packet wider than L/4 would wrap around the box")
    d = np.mod(grid.x - x0 + 0.5 * grid.L, grid.L) - 0.5 * grid.L
    psi = (math.pi * dx0) ** -0.25 * np.exp(-d ** 2 / (2.0 * dx0) + 1j * (x0 + d) * p0 / params.hbar_eff)
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2) * grid.dx)
    return WaveFunction(psi, grid)


def _phase_tables(params_list, grid, steps_per_period):
    """exp(-i V(x, tau_mid) dtau / hbar) at every step midpoint of one period."""
    dtau = SCALED_PERIOD / steps_per_period
    tmid = (np.arange(steps_per_period) + 0.5) * dtau
    x = grid.x
    tab = np.empty((steps_per_period, len(params_list), grid.size), dtype=complex)
    for c, q in enumerate(params_list):
        shift = q.lam * np.asarray(force(tmid, q.m))
        theta = (q.kappa * dtau / q.hbar_eff) * np.cos(x[None, :] - shift[:, None])
        tab[:, c, :] = np.exp(1j * theta)
    return tab


def propagate_batch(psi0, cfg, params_list, grid, n_periods,
                    steps_per_period=DEFAULT_STEPS_PER_PERIOD, on_strobe=None, workers=None):
    """Propagate rows of ``psi0`` (shape (B, N)); row ``b`` uses ``params_list[cfg[b]]``.

    ``on_strobe(rows, period, psi, phi)`` is called after every full period
    with the global row indices, 1-based period, position and momentum
    amplitudes of those rows.  Returns the final amplitudes.
    """
    psi0 = np.atleast_2d(np.asarray(psi0, dtype=complex))
    cfg = np.asarray(cfg, dtype=np.int64)
    out = psi0.copy()
    if n_periods == 0:
        return out
    dtau = SCALED_PERIOD / steps_per_period
    k = grid.k
    per_cfg = steps_per_period * grid.size * 16
    chunk = max(1, _TABLE_BYTES // per_cfg)
    used = np.unique(cfg)
    for start in range(0, len(used), chunk):
        cfgs = used[start:start + chunk]
        rows = np.flatnonzero(np.isin(cfg, cfgs))
        local = np.searchsorted(cfgs, cfg[rows])
        chunk_params = [params_list[c] for c in cfgs]
        hbar = np.array([q.hbar_eff for q in chunk_params])[local][:, None]
        kin_full = np.exp(-0.5j * hbar * k[None, :] ** 2 * dtau)
        kin_half = np.exp(-0.25j * hbar * k[None, :] ** 2 * dtau)
        tab = _phase_tables(chunk_params, grid, steps_per_period)
        single = len(cfgs) == 1
        psi = out[rows]
        for per in range(1, n_periods + 1):
            phi = sfft.fft(psi, axis=-1, workers=workers)
            phi *= kin_half
            for i in range(steps_per_period):
                psi = sfft.ifft(phi, axis=-1, overwrite_x=True, workers=workers)
                psi *= tab[i, 0] if single else tab[i][local]
                phi = sfft.fft(psi, axis=-1, overwrite_x=True, workers=workers)
                phi *= kin_full if i < steps_per_period - 1 else kin_half
            psi = sfft.ifft(phi, axis=-1, workers=workers)
            if on_strobe is not None:
                on_strobe(rows, per, psi, phi)
        out[rows] = psi
    return out


def propagate(psi, n_periods, params, steps_per_period=DEFAULT_STEPS_PER_PERIOD,
              on_strobe=None, workers=None):
    """Advance one wave function by ``n_periods`` drive periods."""
    if n_periods < 0:
        raise ValueError("n_periods must be >= 0")
    cb = None
    if on_strobe is not None:
        def cb(rows, per, psi_x, phi):
            on_strobe(per, WaveFunction(psi_x[0], psi.grid, psi.t + per * SCALED_PERIOD))
    out = propagate_batch(psi.amplitudes[None, :], [0], [params], psi.grid, n_periods,
                          steps_per_period, cb, workers)
    return WaveFunction(out[0], psi.grid, psi.t + n_periods * SCALED_PERIOD)


def width_from_probs(P, p):
    mean = np.sum(P * p, axis=-1)
    var = np.sum(P * (p - mean[..., None]) ** 2, axis=-1)
    return np.sqrt(var)


def quantum_momentum_width(psi, params):
    """sqrt(<p^2> - <p>^2) / hbar_eff from the discrete momentum representation."""
    p, P = psi.momentum_distribution(params.hbar_eff)
    return float(width_from_probs(P, p)) / params.hbar_eff


def packet_centres(n_packets, grid):
    """Packet centres spread evenly over one lattice period near the box middle.

    Centres evenly spaced over the whole box would all coincide modulo 2 pi
    whenever ``n_packets`` divides ``n_cells``, sampling a single lattice phase.
    """
    if n_packets < 1:
        raise ValueError("n_packets must be >= 1")
    base = TWO_PI * (grid.n_cells // 2)
    return base + TWO_PI * (np.arange(n_packets) + 0.5) / n_packets


def averaged_width_series(params_list, n_packets, n_periods, grid=None,
                          steps_per_period=DEFAULT_STEPS_PER_PERIOD, workers=None, centres=None):
    """Width of the packet-averaged momentum distribution after every period.

    Returns an array of shape (len(params_list), n_periods) of sqrt(var p)/hbar.
    """
    grid = grid or SpatialGrid()
    centres = packet_centres(n_packets, grid) if centres is None else np.asarray(centres)
    n_cfg = len(params_list)
    psi0, cfg = [], []
    for c, q in enumerate(params_list):
        for x0 in centres:
            psi0.append(gaussian_packet(float(x0), 0.0, q, grid).amplitudes)
            cfg.append(c)
    psi0 = np.array(psi0)
    cfg = np.array(cfg)
    hbar = np.array([q.hbar_eff for q in params_list])
    widths = np.empty((n_cfg, n_periods))
    k = grid.k

    def record(rows, per, psi, phi):
        P = np.abs(phi) ** 2
        P /= P.sum(axis=-1, keepdims=True)
        for c in np.unique(cfg[rows]):
            sel = cfg[rows] == c
            # mixture of packets: average the distributions, then take the width
            Pm = P[sel].mean(axis=0)
            widths[c, per - 1] = width_from_probs(Pm, hbar[c] * k) / hbar[c]

    if n_periods > 0:
        propagate_batch(psi0, cfg, params_list, grid, n_periods, steps_per_period, record, workers)
    return widths


def averaged_dpq(params, n_packets=DEFAULT_N_PACKETS, n_periods=50, grid=None,
                 steps_per_period=DEFAULT_STEPS_PER_PERIOD, window=10, workers=None, centres=None):
    """Delta p_Q of the packet-averaged distribution, averaged over the last ``window`` strobes."""
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    w = averaged_width_series([params], n_packets, n_periods, grid, steps_per_period,
                              workers, centres)[0]
    return float(np.mean(w[-window:]))


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Raster nodes: x values and p values (the grid is their outer product)."""

    x: np.ndarray
    p: np.ndarray

    @classmethod
    def uniform(cls, nx=128, n_p=121, x_range=(-math.pi, math.pi), p_range=(-3.0, 3.0)):
        x = x_range[0] + (x_range[1] - x_range[0]) * np.arange(nx) / nx
        p = np.linspace(p_range[0], p_range[1], n_p)
        return cls(x, p)

    def shifted(self, dx):
        return PhaseSpaceGrid(self.x + dx, self.p)

    @property
    def cell_area(self):
        dx = self.x[1] - self.x[0] if len(self.x) > 1 else TWO_PI
        dp = self.p[1] - self.p[0] if len(self.p) > 1 else 1.0
        return dx * dp

    def index_of(self, x, p):
        """Nearest node indices of a point, x taken modulo 2 pi into the window."""
        x0 = self.x[0]
        xr = np.mod(x - x0, TWO_PI) + x0
        return int(np.argmin(np.abs(self.x - xr))), int(np.argmin(np.abs(self.p - p)))


@dataclass
class HusimiGrid:
    """Husimi density on ``window``; ``values[i, j]`` at (x[i], p[j]).

    ``normalization`` is the constant 2 pi hbar sqrt(pi alpha) divided out, so
    the density integrates to one over the whole phase space.
    """

    values: np.ndarray
    window: PhaseSpaceGrid
    alpha: float = HUSIMI_ALPHA
    normalization: float = 1.0
    meta: dict = field(default_factory=dict)

    def mass(self):
        return float(np.sum(self.values) * self.window.cell_area)

    def centroid(self):
        """(x, p) centre of mass; x uses the circular mean on [-pi, pi)."""
        w = self.values / self.values.sum()
        wx = w.sum(axis=1)
        ang = np.angle(np.sum(wx * np.exp(1j * self.window.x)))
        return float(ang), float(np.sum(w.sum(axis=0) * self.window.p))

    def renormalized(self):
        return HusimiGrid(self.values / self.mass(), self.window, self.alpha,
                          self.normalization, dict(self.meta))


def husimi(psi, window, alpha=HUSIMI_ALPHA, hbar_eff=None, n_max=HUSIMI_N_MAX, fold=False):
    """Husimi distribution summed over ``2 n_max + 1`` periodic images.

    For a node in lattice cell ``c`` the z-integral runs over cells
    ``c - n_max .. c + n_max``, with psi continued periodically in L.  With
    ``fold=True`` the density is summed over every lattice cell of the box,
    giving the distribution on the reduced phase space x mod 2 pi.
    """
    if alpha <= 0:
        raise ValueError("alpha must be > 0")
    if hbar_eff is None:
        raise ValueError("hbar_eff is required")
    grid = psi.grid
    amps = psi.amplitudes
    ppc = grid.points_per_cell
    nz = (2 * n_max + 1) * ppc
    zrel = np.arange(nz) * grid.dx
    E = np.exp(-1j * np.outer(window.p, zrel) / hbar_eff)  # (np, nz)
    shifts = range(grid.n_cells) if fold else (0,)
    values = np.zeros((len(window.x), len(window.p)))
    for s in shifts:
        xs = window.x + TWO_PI * s
        cells = np.floor(xs / TWO_PI).astype(np.int64)
        for c in np.unique(cells):
            sel = cells == c
            j0 = (c - n_max) * ppc
            idx = np.mod(j0 + np.arange(nz), grid.size)
            z = j0 * grid.dx + zrel
            G = np.exp(-(xs[sel, None] - z[None, :]) ** 2 / (2.0 * alpha))
            A = (G * amps[idx][None, :]) @ E.T * grid.dx
            values[sel] += np.abs(A) ** 2
    norm = TWO_PI * hbar_eff * math.sqrt(math.pi * alpha)
    return HusimiGrid(values / norm, window, alpha, norm)


def qsos_sequence(x0, p0, n_periods, params, window, grid=None,
                  steps_per_period=DEFAULT_STEPS_PER_PERIOD, alpha=HUSIMI_ALPHA, workers=None):
    """Folded Husimi grids at strobes 1..n_periods of a packet launched at (x0, p0).

    ``x0`` is read modulo 2 pi and placed in the middle cell of the box.
    """
    if n_periods < 1:
        raise ValueError("n_periods must be >= 1")
    grid = grid or SpatialGrid()
    xc = TWO_PI * (grid.n_cells // 2) + float(np.mod(x0, TWO_PI))
    psi = gaussian_packet(xc, p0, params, grid)
    frames = []

    def grab(per, wf):
        h = husimi(wf, window, alpha, params.hbar_eff, fold=True)
        h.meta["period"] = per
        frames.append(h)

    propagate(psi, n_periods, params, steps_per_period, grab, workers)
    return frames


def qsos_average(x0, p0, n_periods, params, window, grid=None,
                 steps_per_period=DEFAULT_STEPS_PER_PERIOD, alpha=HUSIMI_ALPHA, workers=None):
    """Stroboscopic average of the folded Husimi density, renormalised on ``window``."""
    frames = qsos_sequence(x0, p0, n_periods, params, window, grid, steps_per_period,
                           alpha, workers)
    avg = np.mean([f.values for f in frames], axis=0)
    out = HusimiGrid(avg, window, alpha, frames[0].normalization, {"n_periods": n_periods})
    return out.renormalized()
