"""Jacobi elliptic functions sn, cn, dn and the complete integral K(m).

Everything here is parameterised by ``m`` (``m = k**2``), never by the
modulus ``k``.  K uses the arithmetic-geometric mean; the sn/cn/dn triple
uses the descending Landen (AGM) recursion with argument reduction modulo
the real period ``4K``.  The recursion stays accurate right up to
``m = 1 - 2**-52``; only ``m == 1`` itself uses the tanh/sech limit.
"""

import math

import numpy as np

_MAX_ITER = 64
_AGM_TOL = 1e-15


class EllipticDomainError(ValueError):
    pass


class EllipticDivergenceError(ArithmeticError):
    """Raised for K(1), which is logarithmically infinite."""


class EllipticParameter(float):
    """A float restricted to ``0 <= m <= 1``."""

    def __new__(cls, m):
        m = float(m)
        if not (0.0 <= m <= 1.0):
            raise EllipticDomainError(f"elliptic parameter m={m!r} outside [0, 1]")
        return super().__new__(cls, m)


def _check_m(m):
    m = float(m)
    if not (0.0 <= m <= 1.0) or math.isnan(m):
        raise EllipticDomainError(f"elliptic parameter m={m!r} outside [0, 1]")
    return m


def _agm_sequence(m):
    """Return the lists a_n, c_n of the AGM started at (1, sqrt(1-m))."""
    a = [1.0]
    c = [math.sqrt(m)]
    b = math.sqrt(1.0 - m)
    for _ in range(_MAX_ITER):
        if abs(c[-1]) <= _AGM_TOL * a[-1]:
            return a, c
        an = 0.5 * (a[-1] + b)
        c.append(0.5 * (a[-1] - b))
        b = math.sqrt(a[-1] * b)
        a.append(an)
    raise RuntimeError(f"AGM failed to converge for m={m!r}")


def complete_K(m):
    """Complete elliptic integral of the first kind, K(m) = pi / (2 AGM(1, sqrt(1-m)))."""
    m = _check_m(m)
    if m == 1.0:
        raise EllipticDivergenceError("K(m) diverges at m = 1")
    a, _ = _agm_sequence(m)
    return math.pi / (2.0 * a[-1])


def sn_cn_dn(u, m):
    """Return ``(sn, cn, dn)`` of argument ``u`` (scalar or array) and parameter ``m``.

    Scalars in give floats out; arrays give arrays of the same shape.
    """
    m = _check_m(m)
    scalar = np.ndim(u) == 0
    u = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(u)):
        raise EllipticDomainError("sn_cn_dn requires a finite argument")

    if m == 0.0:
        sn, cn, dn = np.sin(u), np.cos(u), np.ones_like(u)
    elif m == 1.0:
        sech = 1.0 / np.cosh(u)
        sn, cn, dn = np.tanh(u), sech, sech
    else:
        sn, cn, dn = _landen(u, m)

    if scalar:
        return float(sn), float(cn), float(dn)
    return sn, cn, dn


def _landen(u, m):
    a, c = _agm_sequence(m)
    K = math.pi / (2.0 * a[-1])
    # reduce to [-2K, 2K); sn, cn are 4K periodic and dn is 2K periodic
    four_k = 4.0 * K
    ur = u - four_k * np.floor((u + 2.0 * K) / four_k)

    n = len(a) - 1
    phi = (2.0 ** n) * a[n] * ur
    for j in range(n, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c[j] / a[j] * np.sin(phi)))
    sn = np.sin(phi)
    cn = np.cos(phi)
    # both terms non-negative: no cancellation even when dn is tiny
    dn = np.sqrt((1.0 - m) + m * cn * cn)
    return sn, cn, dn
