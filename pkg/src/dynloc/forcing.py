"""Elliptic AC drive: waveform, amplitude normalisation, half-period impulse.

Scaled time convention: the drive period is 2*pi in tau for every m.  The
physical period only survives through kappa and hbar_eff (see
:func:`scale_physical`).
"""

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import integrate

from .elliptic import EllipticParameter, complete_K, sn_cn_dn

# fitted sigmoid constants of N(m); they give |F| ~ 1 only to about 1%
NORM_A = 0.43932
NORM_B = 0.69796
NORM_C = 0.3727
NORM_D = 0.26883

SCALED_PERIOD = 2.0 * math.pi


def normalization(m):
    """N(m) = 1 / (a + b / (1 + exp((m - c) / d)))."""
    m = EllipticParameter(m)
    return 1.0 / (NORM_A + NORM_B / (1.0 + math.exp((m - NORM_C) / NORM_D)))


def omega(m):
    """Scaled angular frequency 2K(m)/pi of the elliptic argument (inf at m=1)."""
    m = EllipticParameter(m)
    if m == 1.0:
        return math.inf
    return 2.0 * complete_K(m) / math.pi


def force(tau, m):
    """F(tau; m) = N(m) sn(Omega tau) dn(Omega tau); accepts scalar or array tau.

    At m = 1 the quarter period is infinite and the force is identically zero.
    """
    m = EllipticParameter(m)
    if m == 1.0:
        return 0.0 * np.asarray(tau, dtype=float) if np.ndim(tau) else 0.0
    sn, _, dn = sn_cn_dn(omega(m) * np.asarray(tau, dtype=float), m)
    out = normalization(m) * sn * dn
    return float(out) if np.ndim(tau) == 0 else out


@dataclass(frozen=True)
class Waveform:
    """Immutable drive of fixed shape ``m``; calling it evaluates F(tau)."""

    m: float
    N: float = field(init=False)
    Omega: float = field(init=False)
    period: float = field(init=False, default=SCALED_PERIOD)

    def __post_init__(self):
        object.__setattr__(self, "m", float(EllipticParameter(self.m)))
        object.__setattr__(self, "N", normalization(self.m))
        object.__setattr__(self, "Omega", omega(self.m))

    def __call__(self, tau):
        return force(tau, self.m)

    def amplitude(self, n_samples=20001):
        """Sampled max |F| over one period."""
        tau = np.linspace(0.0, self.period, n_samples)
        return float(np.max(np.abs(self(tau))))


def impulse_closed_form(m, T):
    """I(m, T) = T N(m) / (2 K(m)); zero at m = 1 by the limit K -> inf."""
    m = EllipticParameter(m)
    if T <= 0:
        raise ValueError(f"period T must be positive, got {T!r}")
    if m == 1.0:
        return 0.0
    return T * normalization(m) / (2.0 * complete_K(m))


def impulse_quadrature(m, T):
    """Integral of F over the first half period, by adaptive Gauss-Kronrod."""
    m = EllipticParameter(m)
    if T <= 0:
        raise ValueError(f"period T must be positive, got {T!r}")
    if m == 1.0:
        return 0.0
    # F(t; m, T) = F(2 pi t / T; m) in scaled time
    scale = SCALED_PERIOD / T
    val, _ = integrate.quad(
        lambda t: force(scale * t, m), 0.0, 0.5 * T,
        epsabs=1e-13, epsrel=1e-13, limit=200,
    )
    return val


def normalized_impulse(m):
    """I(m, T) / I(0, T), independent of T."""
    return impulse_closed_form(m, 1.0) / impulse_closed_form(0.0, 1.0)


@dataclass(frozen=True)
class ScaledParams:
    """Dimensionless parameters of one run; ``Omega`` is always derived from ``m``."""

    kappa: float
    lam: float
    m: float
    hbar_eff: float
    Omega: float = field(init=False)

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be > 0, got {self.kappa!r}")
        if not self.hbar_eff > 0:
            raise ValueError(f"hbar_eff must be > 0, got {self.hbar_eff!r}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        object.__setattr__(self, "m", float(EllipticParameter(self.m)))
        object.__setattr__(self, "Omega", omega(self.m))

    @property
    def waveform(self):
        return Waveform(self.m)

    def replace(self, **changes):
        kw = dict(kappa=self.kappa, lam=self.lam, m=self.m, hbar_eff=self.hbar_eff)
        kw.update(changes)
        return ScaledParams(**kw)


@dataclass(frozen=True)
class PhysicalParams:
    M: float
    k: float
    V0: float
    T: float
    hbar: float
    lam: float
    m: float

    def __post_init__(self):
        for name in ("M", "k", "V0", "T", "hbar"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be > 0, got {getattr(self, name)!r}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam!r}")
        object.__setattr__(self, "m", float(EllipticParameter(self.m)))


def scale_physical(p):
    """Map lab parameters onto (kappa, lambda, m, hbar_eff) with tau = 2 pi t / T."""
    kappa = p.V0 * p.k ** 2 * p.T ** 2 / (math.pi ** 2 * p.M)
    hbar_eff = 2.0 * p.hbar * p.k ** 2 * p.T / (math.pi * p.M)
    return ScaledParams(kappa=kappa, lam=p.lam, m=p.m, hbar_eff=hbar_eff)
