import math
import os
import subprocess
import sys

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dynloc.classical import (DP0, ClassicalEnsemble, PhaseState, evolve_ensemble, find_islands,
                              hamilton_rhs, momentum_width, pendulum_energy, psos, psos_grid,
                              run_batch, sea_histogram, separatrix, step)
from dynloc.forcing import ScaledParams, force, normalization

KAPPA = 0.36
H = 2 * math.pi / 1000


def P(lam=2.0, m=0.0, kappa=KAPPA):
    return ScaledParams(kappa=kappa, lam=lam, m=m, hbar_eff=0.16)


def reference_flow(x0, p0, t0, t1, params, rtol=1e-12):
    """Adaptive DOP853 integration of Hamilton's equations (vectorised over orbits)."""
    n = len(np.atleast_1d(x0))

    def rhs(t, y):
        s = params.lam * force(t, params.m)
        return np.concatenate([y[n:], -params.kappa * np.sin(y[:n] - s)])

    sol = solve_ivp(rhs, (t0, t1), np.concatenate([np.atleast_1d(x0), np.atleast_1d(p0)]),
                    method="DOP853", rtol=rtol, atol=rtol)
    return sol.y[:n, -1], sol.y[n:, -1]


def test_rhs_at_rest():
    assert hamilton_rhs(PhaseState(0.0, 0.0), 0.0, P(m=0.4)) == (0.0, 0.0)


def test_rhs_undriven_pendulum():
    s = PhaseState(1.1, -0.3)
    dx, dp = hamilton_rhs(s, 2.3, P(lam=0.0))
    assert dx == -0.3 and dp == pytest.approx(-KAPPA * math.sin(1.1), abs=1e-16)


def test_rhs_substitution():
    _, dp = hamilton_rhs(PhaseState(math.pi / 2, 0.0), math.pi / 2, P(lam=1.0, m=0.0))
    assert dp == pytest.approx(-0.36 * math.sin(math.pi / 2 - normalization(0.0)), abs=1e-14)


def test_free_motion_is_exact():
    params = ScaledParams(kappa=1e-300, lam=2.0, m=0.3, hbar_eff=0.16)
    s = step(PhaseState(0.25, 1.5), 0.0, 0.01, params)
    assert s.p == 1.5
    assert s.x == pytest.approx(0.25 + 1.5 * 0.01, abs=4e-16)


def test_step_energy_drift_per_period():
    params = P(lam=0.0)
    s = PhaseState(0.5, 0.4)
    e0 = pendulum_energy(*s, KAPPA)
    for i in range(1000):
        s = step(s, i * H, H, params)
    assert abs(pendulum_energy(*s, KAPPA) - e0) <= 1e-8


def _one_period_error(n_steps, params, s0):
    h = 2 * math.pi / n_steps
    s = s0
    for i in range(n_steps):
        s = step(s, i * h, h, params)
    xr, pr = reference_flow(s0.x, s0.p, 0.0, 2 * math.pi, params, rtol=1e-13)
    return math.hypot(s.x - xr[0], s.p - pr[0])


def test_fourth_order_convergence():
    params = P(lam=2.0, m=0.5)
    s0 = PhaseState(0.3, 0.7)
    e1 = _one_period_error(50, params, s0)
    e2 = _one_period_error(100, params, s0)
    assert 12 < e1 / e2 < 20


def test_kernel_matches_scalar_step():
    params = P(lam=2.0, m=0.7)
    s = PhaseState(0.3, -0.2)
    for i in range(1000):
        s = step(s, i * H, H, params)
    x = np.array([0.3])
    p = np.array([-0.2])
    run_batch(x, p, [0], [params], 1, record=False)
    assert x[0] == pytest.approx(s.x, abs=1e-12)
    assert p[0] == pytest.approx(s.p, abs=1e-12)


def test_backward_step_inverts_forward():
    params = P(m=0.6)
    s0 = PhaseState(0.4, 0.9)
    s1 = step(s0, 1.0, 0.05, params)
    back = step(s1, 1.05, -0.05, params)
    assert back.x == pytest.approx(s0.x, abs=1e-14) and back.p == pytest.approx(s0.p, abs=1e-14)


def test_evolve_zero_periods_is_identity():
    e = ClassicalEnsemble.initial(100, seed=3)
    out = evolve_ensemble(e, 0, P())
    np.testing.assert_array_equal(out.x, e.x)
    np.testing.assert_array_equal(out.p, e.p)


def test_undriven_energy_conserved_50_periods():
    e = ClassicalEnsemble.initial(2000, seed=1)
    x, p = e.x.copy(), e.p.copy()
    xs, ps = run_batch(x, p, np.zeros(len(e), dtype=np.int64), [P(lam=0.0)], 50)
    drift = np.abs(pendulum_energy(xs, ps, KAPPA) - pendulum_energy(e.x, e.p, KAPPA)[:, None])
    assert drift.max() <= 1e-7


def test_time_reversal():
    params = P(lam=2.0, m=0.5)
    e = ClassicalEnsemble.initial(500, seed=2)
    fwd = evolve_ensemble(e, 3, params)
    back = evolve_ensemble(fwd, 3, params, backward=True)
    dx = np.mod(back.x - e.x + math.pi, 2 * math.pi) - math.pi
    assert np.max(np.abs(dx)) <= 1e-6 and np.max(np.abs(back.p - e.p)) <= 1e-6
    assert back.t == 0.0


def test_ensemble_width_against_adaptive_reference():
    params = P(lam=2.0, m=0.0)
    e = ClassicalEnsemble.initial(1000, seed=11)
    _, ps = run_batch(e.x.copy(), e.p.copy(), np.zeros(1000, dtype=np.int64), [params], 50)
    x, p = e.x.copy(), e.p.copy()
    ref = []
    for j in range(5):
        x, p = reference_flow(x, p, 20 * math.pi * j, 20 * math.pi * (j + 1), params, rtol=1e-10)
        ref.append(np.std(p))
    ours = np.std(ps[:, 9::10], axis=0)
    np.testing.assert_allclose(ours, ref, rtol=0.06)
    # diffusion: the width grows well beyond the initial one
    assert ours[-1] > 3 * DP0


def test_initial_width():
    e = ClassicalEnsemble.initial(100_000, seed=0)
    assert momentum_width(e, P()) == pytest.approx(DP0 / 0.16, rel=0.01)
    assert np.all((e.x >= 0) & (e.x < 2 * math.pi))


def test_width_statistical_error_shrinks():
    errs = {}
    for n in (10_000, 100_000):
        w = [momentum_width(ClassicalEnsemble.initial(n, seed=s), P()) for s in range(8)]
        errs[n] = np.sqrt(np.mean((np.array(w) - DP0 / 0.16) ** 2))
    # 1/sqrt(N): a tenfold increase should cut the error by ~3.2
    assert errs[100_000] < errs[10_000] / 2


def test_width_trivial_cases():
    same = ClassicalEnsemble(np.zeros(10), np.full(10, 0.7))
    assert momentum_width(same, P()) == 0.0
    e = ClassicalEnsemble.initial(1000, seed=5)
    shifted = ClassicalEnsemble(e.x, e.p + 3.0)
    assert momentum_width(shifted, P()) == pytest.approx(momentum_width(e, P()), rel=1e-12)


def test_ensemble_requires_members():
    with pytest.raises(ValueError):
        ClassicalEnsemble(np.array([]), np.array([]))


def test_determinism_same_seed():
    params = P(m=0.5)
    a = evolve_ensemble(ClassicalEnsemble.initial(300, seed=9), 2, params)
    b = evolve_ensemble(ClassicalEnsemble.initial(300, seed=9), 2, params)
    assert a.x.tobytes() == b.x.tobytes() and a.p.tobytes() == b.p.tobytes()


_THREAD_SCRIPT = """
import numpy as np
from dynloc.classical import ClassicalEnsemble, evolve_ensemble
from dynloc.forcing import ScaledParams
e = evolve_ensemble(ClassicalEnsemble.initial(1000, seed=4), 2, ScaledParams(0.36, 2.0, 0.5, 0.16))
import sys; sys.stdout.write((e.x.tobytes() + e.p.tobytes()).hex())
"""


def test_thread_count_independent():
    outs = []
    for n in ("1", "3"):
        env = dict(os.environ, NUMBA_NUM_THREADS=n)
        outs.append(subprocess.run([sys.executable, "-c", _THREAD_SCRIPT], env=env,
                                   capture_output=True, text=True, check=True).stdout)
    assert outs[0] == outs[1] and outs[0]


def test_psos_in_fundamental_cell():
    s = psos(psos_grid(6, 6), 20, P(m=0.55))
    assert s.x.shape == (36, 20)
    assert np.all((s.x >= -math.pi) & (s.x < math.pi))
    assert len(s.points) == 36 * 20


def test_psos_undriven_orbit_on_invariant_curve():
    s = psos([[0.0, 0.6]], 200, P(lam=0.0))
    e = pendulum_energy(s.x[0], s.p[0], KAPPA)
    assert np.ptp(e) <= 1e-6


def test_separatrix():
    for b in (1, -1):
        s = separatrix(2.0, 2.0, KAPPA, b)
        assert s == (0.0, pytest.approx(b * 2 * math.sqrt(KAPPA), abs=1e-15))
    far = separatrix(200.0, 0.0, KAPPA)
    assert far.x == pytest.approx(math.pi, abs=1e-12) and far.p == pytest.approx(0.0, abs=1e-12)
    x, p = separatrix(np.linspace(-20, 20, 401), 0.3, KAPPA, -1)
    np.testing.assert_allclose(pendulum_energy(x, p, KAPPA), KAPPA, atol=1e-12)
    with pytest.raises(ValueError):
        separatrix(0.0, 0.0, -1.0)


def test_find_islands_synthetic():
    visits = np.ones((16, 20))
    visits[4:7, 8:11] = 0      # enclosed hole
    visits[10, 0:3] = 0        # touches the p edge: open, not an island
    visits[0, 14] = visits[-1, 14] = visits[-1, 15] = 0  # wraps across x = +-pi
    isl = find_islands(visits, p_range=(-1.0, 1.0))
    assert list(isl.sizes) == [9, 3]
    assert isl.mask(1)[5, 9] and not isl.labels[10, 1]
    assert isl.mask(2)[0, 14] and isl.mask(2)[-1, 15]
    assert isl.x[0] == pytest.approx(-math.pi + math.pi / 16)
    assert isl.p[-1] == pytest.approx(1.0 - 0.05)


def test_find_islands_none():
    assert find_islands(np.ones((8, 8))).sizes.size == 0


@pytest.mark.slow
def test_island_area_trend():
    area = {m: find_islands(sea_histogram(P(m=m))).sizes.sum() for m in (0.0, 0.55, 0.9999)}
    # the area of regular islands grows as m -> 1 ...
    assert area[0.9999] > area[0.0] > 0
    # ... and is reduced in the strong-localization range relative to that limit
    assert area[0.55] < area[0.9999]
