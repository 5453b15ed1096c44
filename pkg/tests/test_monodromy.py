import numpy as np
import pytest
from scipy.integrate import solve_ivp

from adiabatic_monodromy.actions import compute_actions
from adiabatic_monodromy.hill import PeriodicPotential
from adiabatic_monodromy.momentum import make_context
from adiabatic_monodromy.monodromy import (
    ExactMonodromy,
    assemble_model,
    cocycle_observables_compare,
    eval_model,
    exact_monodromy,
    free_adiabatic_transfer,
    inner_det,
    model_from_parameters,
    period_length,
    shift_h,
)

COS = PeriodicPotential.cosine(1.0)
ZERO = PeriodicPotential()
EPS = 2 * np.pi / 30


def symbolic_det(t, t1, phi1, z):
    """det of the inner matrix expanded by hand into monomials in e^{iz}."""
    e, w = np.exp(1j * phi1), np.exp(1j * z)
    a_d = t * e * (2 / t * np.cos(phi1)) - t1 * e * (w + 1 / w)
    b_c = e * e - t1 * e / w - t1 * e * w + t1 * t1
    return a_d - b_c


def test_degenerate_limit():
    m = model_from_parameters(1.0, 0.0, 0.0)
    np.testing.assert_allclose(m.inner(0.3), [[1, 1j], [-1j, 2]], atol=1e-15)
    np.testing.assert_allclose(inner_det(m, 0.3), 1.0, atol=1e-15)


def test_det_identity_random():
    rng = np.random.default_rng(3)
    for _ in range(50):
        t, t1 = rng.uniform(0.01, 1.0, 2)
        phi1, C = rng.uniform(-10, 10, 2)
        m = model_from_parameters(t, t1, phi1, C=C)
        phis = rng.uniform(0, 1, 20)
        z = m.z(phis)
        np.testing.assert_allclose(symbolic_det(t, t1, phi1, z), 1 - t1**2, atol=1e-12)
        np.testing.assert_allclose(inner_det(m, phis), 1 - t1**2, atol=1e-12 / t)


def test_trace_vform():
    m = model_from_parameters(0.3, 0.05, 1.1, C=0.7, T=(2.0, 0.5))
    phis = np.linspace(0, 1, 17)
    np.testing.assert_allclose(np.trace(eval_model(m, phis), axis1=-2, axis2=-1), m.trace_vform(phis),
                               atol=1e-12)


def test_periodicity_and_cosine_zero():
    m = model_from_parameters(0.2, 0.01, np.pi / 2, C=0.4)
    np.testing.assert_allclose(eval_model(m, 0.25), eval_model(m, 1.25), atol=1e-12)
    phi = (np.pi / 2 - m.C) / (2 * np.pi)  # z = pi/2
    assert abs(m.inner(phi)[1, 1]) < 1e-14


def test_assembled_model_from_actions():
    a = compute_actions(make_context(COS, 0.3), EPS)
    m = assemble_model(a)
    assert m.d1 == m.dm1 == -a.t1 / a.t
    np.testing.assert_allclose(m.C, 2 * np.pi / EPS * (np.pi + a.phi2))
    np.testing.assert_allclose(np.linalg.det(m(0.1)), 1 - a.t1**2, atol=1e-12)
    d = m.to_dict()
    assert set(d) >= {"a0", "b0", "b1", "c0", "c1", "d0", "d1", "dm1", "C", "T"}


def test_period_length_snap():
    assert period_length(EPS) == 30.0
    assert shift_h(EPS) == 0.0
    np.testing.assert_allclose(shift_h(0.1), 2 * np.pi / 0.1 - 62)


def test_exact_free_case():
    a = exact_monodromy(ZERO, 0.3, EPS, 0.0)
    b = exact_monodromy(ZERO, 0.3, EPS, 0.61)
    np.testing.assert_allclose(a, b, atol=1e-12)
    ref = free_adiabatic_transfer(0.3, EPS)
    np.testing.assert_allclose(a, ref, rtol=1e-8, atol=1e-8 * np.max(np.abs(ref)))


def test_exact_contract():
    ex = ExactMonodromy(COS, 0.3, EPS, cache=False)
    phis = np.random.default_rng(5).uniform(0, 1, 8)
    M = ex(phis)
    np.testing.assert_allclose(np.linalg.det(M), 1.0, atol=1e-8)
    M1 = ex(phis + 1.0)
    np.testing.assert_allclose(M1, M, rtol=1e-8, atol=1e-8)


def test_exact_against_reference_integrator():
    eps, E, phi = 2 * np.pi / 7.3, 0.6, 0.27
    L = 2 * np.pi / eps

    def rhs(x, y):
        q = np.cos(2 * np.pi * (x - phi - L)) + np.cos(eps * x) - E
        return [y[1], q * y[0], y[3], q * y[2]]

    sol = solve_ivp(rhs, (0, L), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=1e-12, atol=1e-14)
    c, cp, s, sp = sol.y[:, -1]
    np.testing.assert_allclose(exact_monodromy(COS, E, eps, phi), [[sp, s], [cp, c]], rtol=1e-8)


def test_exact_cache():
    ex = ExactMonodromy(COS, 0.3, EPS)
    a = ex(0.2)
    b = ex(3.2)
    assert len(ex._cache) == 1
    np.testing.assert_array_equal(a, b)
    text = ex.to_csv([0.0, 0.5], header_lines=["config_hash: x"])
    assert text.splitlines()[1] == "phi,m11,m12,m21,m22"


def test_trace_matches_model_at_desk_scale():
    """The exact trace is the period-30 discriminant; the model reproduces it to O(1) relative."""
    a = compute_actions(make_context(COS, 0.3), EPS)
    m = assemble_model(a)
    tr_exact = np.trace(exact_monodromy(COS, 0.3, EPS, 0.0))
    tr_model = np.trace(m(0.0)).real
    assert np.sign(tr_exact) == np.sign(tr_model)
    assert abs(tr_exact / tr_model - 1) < 0.05


def test_compare_report():
    a = compute_actions(make_context(COS, 0.3), EPS)
    m = assemble_model(a)
    ex = ExactMonodromy(COS, 0.3, EPS)
    rep = cocycle_observables_compare(m, ex, 0.0, 2000, grid_size=256, exact_grid_size=16)
    assert rep["model"]["verdict"] == "gap"
    assert rep["exact"]["lyapunov"] > 0
    assert abs(rep["lyapunov_difference"]) < 0.05


def test_compare_free_case_model_refuses():
    from adiabatic_monodromy.errors import ClosedGapError

    with pytest.raises(ClosedGapError):
        compute_actions(make_context(ZERO, 0.0), EPS)
    ex = ExactMonodromy(ZERO, 0.3, EPS)
    rep = cocycle_observables_compare(None, ex, 0.0, 500, exact_grid_size=8)
    assert rep["model"] is None and np.isfinite(rep["exact"]["lyapunov"])
