import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynloc.elliptic import EllipticDomainError, complete_K
from dynloc.forcing import (PhysicalParams, ScaledParams, Waveform, force, impulse_closed_form,
                            impulse_quadrature, normalization, normalized_impulse, omega,
                            scale_physical)

A, B, C, D = 0.43932, 0.69796, 0.3727, 0.26883


def test_normalization_values():
    # direct evaluation of the sigmoid fit
    assert normalization(0.0) == pytest.approx(1.0 / (A + B / (1 + math.exp(-C / D))), rel=1e-15)
    assert normalization(0.0) == pytest.approx(1.0023, abs=1e-5)
    assert normalization(1.0) == pytest.approx(1.9959, abs=1e-4)
    assert normalization(C) == pytest.approx(1.0 / (A + B / 2), rel=1e-15)


def test_normalization_domain():
    with pytest.raises(EllipticDomainError):
        normalization(1.2)


def test_force_zero_at_origin():
    for m in (0.0, 0.3, 0.9, 0.9999):
        assert force(0.0, m) == 0.0


def test_force_sinusoidal_limit():
    tau = np.linspace(-10, 10, 2001)
    assert np.max(np.abs(force(tau, 0.0) - normalization(0.0) * np.sin(tau))) <= 1e-10


def test_force_at_quarter_period():
    m = 0.7
    assert force(math.pi / 2, m) == pytest.approx(normalization(m) * math.sqrt(1 - m), abs=1e-13)


def test_force_vanishes_at_m_one():
    np.testing.assert_array_equal(force(np.linspace(0, 7, 9), 1.0), 0.0)
    assert impulse_closed_form(1.0, 2 * math.pi) == 0.0


@pytest.mark.parametrize("m", [0.0, 0.25, 0.5, 0.72, 0.9, 0.99, 0.9999])
def test_antiperiodicity_and_zero_mean(m):
    tau = np.linspace(0, 2 * math.pi, 513)
    np.testing.assert_allclose(force(tau + math.pi, m), -force(tau, m), atol=1e-10)
    np.testing.assert_allclose(force(tau + 2 * math.pi, m), force(tau, m), atol=1e-10)
    t = np.arange(4096) * 2 * math.pi / 4096
    assert abs(np.mean(force(t, m))) < 1e-12


def test_amplitude_band():
    amps = [Waveform(m).amplitude() for m in np.linspace(0, 0.999, 120)]
    assert 0.985 <= min(amps) and max(amps) <= 1.015


def test_waveform_is_frozen():
    w = Waveform(0.5)
    assert w.Omega == pytest.approx(2 * complete_K(0.5) / math.pi, abs=1e-12)
    with pytest.raises(AttributeError):
        w.m = 0.3


def test_impulse_sinusoid():
    T = 3.7
    assert impulse_closed_form(0.0, T) == pytest.approx(T * normalization(0) / math.pi, rel=1e-15)
    assert impulse_quadrature(0.0, 2 * math.pi) == pytest.approx(2 * normalization(0), rel=1e-12)
    assert impulse_quadrature(0.0, 2 * math.pi) == pytest.approx(2.0046, abs=5e-5)


@pytest.mark.parametrize("m", [round(0.1 * i, 1) for i in range(10)] + [0.99])
def test_closed_form_matches_quadrature(m):
    a = impulse_closed_form(m, 2 * math.pi)
    b = impulse_quadrature(m, 2 * math.pi)
    assert abs(a - b) / a <= 1e-10


def test_impulse_near_one_decays_only_logarithmically():
    # K(1 - eps) ~ ln(4 / sqrt(eps)): the impulse is small but far from zero
    m = 1 - 1e-12
    closed = impulse_closed_form(m, 2 * math.pi)
    assert closed == pytest.approx(math.pi * normalization(m) / complete_K(m), rel=1e-14)
    assert impulse_quadrature(m, 2 * math.pi) == pytest.approx(closed, rel=1e-8)
    assert closed < 0.21 * impulse_closed_form(0.0, 2 * math.pi)


@settings(max_examples=30, deadline=None)
@given(m=st.floats(0, 0.999), T=st.floats(0.1, 100))
def test_impulse_linear_in_T(m, T):
    assert impulse_closed_form(m, 2 * T) == pytest.approx(2 * impulse_closed_form(m, T), rel=1e-14)


def test_impulse_single_interior_maximum():
    m = np.arange(0, 1, 1e-3)
    r = np.array([normalized_impulse(v) for v in m])
    d = np.sign(np.diff(r))
    assert np.count_nonzero(d[1:] != d[:-1]) == 1
    assert m[np.argmax(r)] == pytest.approx(0.717, abs=0.01)


def test_scaled_params_validation():
    with pytest.raises(ValueError):
        ScaledParams(kappa=-1, lam=1, m=0, hbar_eff=0.16)
    with pytest.raises(ValueError):
        ScaledParams(kappa=1, lam=-1, m=0, hbar_eff=0.16)
    with pytest.raises(ValueError):
        ScaledParams(kappa=1, lam=1, m=0, hbar_eff=0)
    with pytest.raises(EllipticDomainError):
        ScaledParams(kappa=1, lam=1, m=2, hbar_eff=0.1)
    p = ScaledParams(0.36, 2.0, 0.5, 0.16)
    assert p.Omega == pytest.approx(2 * complete_K(0.5) / math.pi, abs=1e-12)
    assert omega(1.0) == math.inf


def _lab(T=1e-3, **kw):
    base = dict(M=1.443e-25, k=2 * math.pi / 780e-9, V0=1e-30, T=T, hbar=1.054571817e-34,
                lam=2.0, m=0.5)
    base.update(kw)
    return PhysicalParams(**base)


def test_scale_physical_targets_kappa():
    p = _lab()
    V0 = 0.36 * math.pi ** 2 * p.M / (p.k ** 2 * p.T ** 2)
    s = scale_physical(_lab(V0=V0))
    assert s.kappa == pytest.approx(0.36, rel=1e-14)
    assert s.hbar_eff == pytest.approx(2 * p.hbar * p.k ** 2 * p.T / (math.pi * p.M), rel=1e-14)


def test_scale_physical_power_counting():
    a = scale_physical(_lab(T=1e-3))
    b = scale_physical(_lab(T=2e-3))
    assert b.kappa == pytest.approx(4 * a.kappa, rel=1e-14)
    assert b.hbar_eff == pytest.approx(2 * a.hbar_eff, rel=1e-14)
    assert (b.lam, b.m) == (a.lam, a.m) == (2.0, 0.5)


def test_physical_params_validation():
    with pytest.raises(ValueError):
        _lab(V0=0)
