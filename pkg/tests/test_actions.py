import numpy as np
import pytest

from adiabatic_monodromy.actions import (
    ActionSet,
    action_integrals,
    g_pm,
    g_pm_finite_difference,
    gauge_identity_residual,
    integral_phi1,
    integral_phi1_symmetric,
    integral_phi2_energy,
    integral_t,
    integral_t1,
    integral_t1_by_parts,
    log_kw,
    omega_pm,
    phase_phi1,
    phi2_correction,
    prefactor_T,
    tunneling_t,
    tunneling_t1,
)
from adiabatic_monodromy.errors import ClosedGapError
from adiabatic_monodromy.hill import PeriodicPotential, dk_dE, quasi_momentum
from adiabatic_monodromy.momentum import make_context, window_interval
from adiabatic_monodromy.quadrature import adaptive_integral, fixed_integral

COS = PeriodicPotential.cosine(1.0)
ZERO = PeriodicPotential()


@pytest.fixture(scope="module")
def ctx():
    return make_context(COS, 0.3)


def test_g_free_case():
    ctx = make_context(ZERO, 0.5)
    gp, gm = g_pm(ctx, 1.0)
    assert abs(gp) < 1e-10 and abs(gm) < 1e-10
    wp, wm = omega_pm(ctx, 0.4 + 0.2j)
    assert abs(wp) < 1e-10 and abs(wm) < 1e-10


def test_g_against_finite_differences(ctx):
    E = 2.0  # mid band 1
    gp, gm = g_pm(ctx, E)
    a = g_pm_finite_difference(ctx, E, h=1e-4)
    b = g_pm_finite_difference(ctx, E, h=1e-5)
    np.testing.assert_allclose(a, b, rtol=1e-4)
    np.testing.assert_allclose([gp, gm], b, rtol=1e-6)


@pytest.mark.parametrize("E", [2.0, -0.6, 9.8, 3.0 + 0.7j, 20.0])
def test_gauge_identity(ctx, E):
    assert gauge_identity_residual(ctx, E) < 1e-5


def test_gauge_identity_uses_unit_coefficient(ctx):
    """g+ + g- equals -d ln(k' w)/dE; the half-weighted k' variant is visibly off."""
    E, h = 2.0, 1e-5
    gp, gm = g_pm(ctx, E)

    def kw(e):
        return log_kw(COS, e, quasi_momentum(ctx.bs, COS, e))[0]

    dlog_kw = ((kw(E + h) - kw(E - h)) / (2 * h) / kw(E)).real
    dlog_kp = (np.log(dk_dE(ctx.bs, COS, E + h)) - np.log(dk_dE(ctx.bs, COS, E - h))).real / (2 * h)
    assert abs(gp + gm + dlog_kw) < 1e-6
    assert abs(gp + gm + dlog_kw - 0.5 * dlog_kp) > 1e-3


def test_omega_vanishes_at_symmetric_points(ctx):
    for phi in (0.0, np.pi):
        assert omega_pm(ctx, phi) == (0j, 0j)


def test_omega_sum_matches_log_derivative(ctx):
    phi = np.pi / 2 * (1 + 0.1j)
    wp, wm = omega_pm(ctx, phi)
    h = 1e-5
    from adiabatic_monodromy.momentum import KAPPA0, kappa

    def f(z):
        return log_kw(COS, ctx.E - np.cos(z), kappa(ctx, KAPPA0, z))[0]

    deriv = (f(phi + h) - f(phi - h)) / (2 * h) / f(phi)
    np.testing.assert_allclose(wp + wm, -deriv, atol=1e-5)


def test_phi1_free_dual_quadrature():
    ctx = make_context(ZERO, 0.0)
    val = phase_phi1(ctx, 0.1)
    f = lambda p: np.sqrt(np.maximum(-np.cos(p), 0.0))
    exact_fixed = 20 * fixed_integral(f, np.pi / 2, np.pi, left=True)
    exact_adaptive = 20 * adaptive_integral(f, np.pi / 2, np.pi, left=True).real
    np.testing.assert_allclose(val, exact_adaptive, rtol=1e-9)
    np.testing.assert_allclose(exact_fixed, exact_adaptive, rtol=1e-9)


def test_phi1_forms_and_scaling(ctx):
    np.testing.assert_allclose(integral_phi1(ctx), integral_phi1(ctx, "adaptive"), rtol=1e-9)
    np.testing.assert_allclose(integral_phi1(ctx), integral_phi1_symmetric(ctx), rtol=1e-8)
    assert phase_phi1(ctx, 0.05) == 2 * phase_phi1(ctx, 0.1)


def test_phi1_monotone_and_derivative(ctx):
    lo, hi = window_interval(ctx.bs, 0.05)
    Es = np.linspace(lo, hi, 12)
    vals = [phase_phi1(make_context(COS, e, bs=ctx.bs), 0.1) for e in Es]
    assert np.all(np.diff(vals) > 0)
    ints = action_integrals(ctx)
    h = 1e-5
    fd = (integral_phi1(make_context(COS, ctx.E + h, bs=ctx.bs))
          - integral_phi1(make_context(COS, ctx.E - h, bs=ctx.bs))) / (2 * h)
    np.testing.assert_allclose(ints.action_dphi1, fd, rtol=1e-5)


def test_t_free_dual_quadrature():
    ctx = make_context(ZERO, 0.0)
    expo = np.log(tunneling_t(ctx, 0.1))
    f = lambda p: np.sqrt(np.maximum(np.cos(p), 0.0))
    np.testing.assert_allclose(expo, -20 * adaptive_integral(f, 0, np.pi / 2, right=True).real, rtol=1e-9)


def test_t_and_t1(ctx):
    np.testing.assert_allclose(integral_t(ctx), integral_t(ctx, "adaptive"), rtol=1e-9)
    np.testing.assert_allclose(integral_t1(ctx), integral_t1(ctx, "adaptive"), rtol=1e-9)
    np.testing.assert_allclose(integral_t1(ctx), integral_t1_by_parts(ctx), rtol=1e-6)
    for eps in (0.2, 0.1, 0.05):
        assert 0 < tunneling_t(ctx, eps) < 1
        assert 0 < tunneling_t1(ctx, eps) < 1


def test_t_symmetric_interval(ctx):
    from adiabatic_monodromy.momentum import branch_points, kappa_star

    phi1 = branch_points(ctx).phi1
    full = fixed_integral(lambda p: np.abs(kappa_star(ctx, p)), -phi1, phi1, left=True, right=True)
    np.testing.assert_allclose(full, 2 * integral_t(ctx), rtol=1e-10)


def test_t1_closed_gap():
    ctx = make_context(ZERO, 0.5)
    with pytest.raises(ClosedGapError):
        tunneling_t1(ctx, 0.1)


def test_exponent_scaling(ctx):
    ints = action_integrals(ctx)
    sets = [ActionSet.from_integrals(ints, eps) for eps in (0.2, 0.1, 0.05)]
    for s in sets[1:]:
        np.testing.assert_allclose(s.epsilon * s.log_t, sets[0].epsilon * sets[0].log_t, rtol=1e-6)
        np.testing.assert_allclose(s.epsilon * s.log_t1, sets[0].epsilon * sets[0].log_t1, rtol=1e-6)


def test_phi2_real_and_path_independent(ctx):
    re_up, im_up = phi2_correction(ctx, 0.1, return_imag=True)
    re_lo = phi2_correction(ctx, 0.1, path="lower")
    assert abs(im_up) < 1e-6
    np.testing.assert_allclose(re_lo, re_up, atol=1e-6)
    oracle = 0.1 / (2 * np.pi) * 1j * integral_phi2_energy(ctx)
    np.testing.assert_allclose(re_up, oracle.real, atol=1e-8)


def test_prefactor_T(ctx):
    T = prefactor_T(ctx)
    assert T[0, 1] == 0 and T[1, 0] == 0
    ints = action_integrals(ctx)
    np.testing.assert_allclose(np.linalg.det(T), np.exp(ints.omega_plus_T - ints.omega_minus_T), rtol=1e-8)
    assert np.isfinite(np.linalg.cond(T))


def test_action_set_record(ctx):
    a = ActionSet.from_integrals(action_integrals(ctx), 0.1)
    d = a.to_dict()
    for key in ("E", "epsilon", "phi1", "t", "t1", "phi2", "omega_int_plus", "omega_int_minus"):
        assert key in d
    assert 0 < a.t < 1 and 0 < a.t1 < 1


def test_prefactor_T_free_case():
    np.testing.assert_allclose(prefactor_T(make_context(ZERO, 0.0)), np.eye(2), atol=1e-12)
