import json

import numpy as np
import pytest

from adiabatic_monodromy.cocycle import (
    MatrixCocycle,
    almost_mathieu_cocycle,
    constant_cocycle,
    gap_certificate,
    iterate,
    lyapunov,
    rho_v,
    rotation_cocycle,
    winding,
)
from adiabatic_monodromy.errors import SingularStepError, VanishingOffDiagonalError
from adiabatic_monodromy.monodromy import model_from_parameters

GOLDEN = (np.sqrt(5) - 1) / 2
CAT = np.array([[2.0, 1.0], [1.0, 1.0]])
CAT_RATE = np.log((3 + np.sqrt(5)) / 2)


def test_identity_increments():
    traj = iterate(constant_cocycle(np.eye(2), GOLDEN), 0.0, 50)
    np.testing.assert_array_equal(traj.increments, 0.0)
    assert traj.to_csv().splitlines()[0] == "step,log_norm_increment"


def test_constant_cocycle_rate():
    est = lyapunov(constant_cocycle(CAT, GOLDEN), 0.0, 100_000)
    assert abs(est.value - CAT_RATE) <= 3 * est.stderr
    traj = iterate(constant_cocycle(CAT), 0.0, 200)
    np.testing.assert_allclose(traj.increments[50:] + traj.increments_second[50:], 0.0, atol=1e-12)


def test_rotation_has_zero_rate():
    est = lyapunov(rotation_cocycle(GOLDEN), 0.0, 20_000)
    assert abs(est.value) <= 3 * est.stderr + 1e-15


def test_almost_mathieu_long_run():
    c = almost_mathieu_cocycle(2.0, 0.0, GOLDEN)
    short = lyapunov(c, 0.1, 20_000)
    long = lyapunov(c, 0.1, 200_000)
    assert abs(short.value - long.value) <= 3 * short.stderr + 3 * long.stderr
    # supercritical coupling: the rate on the spectrum is ln(lambda)
    assert abs(long.value - np.log(2.0)) < 4 * long.stderr + 1e-3


def test_det_one_rate_nonnegative():
    rng = np.random.default_rng(1)
    for _ in range(3):
        a, b = rng.normal(size=2)

        def M(phi, a=a, b=b):
            x = 2 * np.pi * np.asarray(phi)
            out = np.empty(np.shape(x) + (2, 2))
            out[..., 0, 0] = a + np.cos(x)
            out[..., 0, 1] = -1
            out[..., 1, 0] = 1
            out[..., 1, 1] = 0
            out[..., 0, 1] *= 1 + 0.5 * np.sin(x) ** 2
            out[..., 1, 0] /= 1 + 0.5 * np.sin(x) ** 2
            return out

        est = lyapunov(MatrixCocycle(M, GOLDEN), 0.0, 20_000)
        assert est.value >= -3 * est.stderr


def test_singular_step():
    with pytest.raises(SingularStepError):
        iterate(constant_cocycle(np.zeros((2, 2))), 0.0, 5)


def test_rho_v_constant():
    rv = rho_v(constant_cocycle(CAT).M, 0.3, 64)
    np.testing.assert_allclose(rv.rho, 1.0)
    np.testing.assert_allclose(rv.v, 3.0)


def test_rho_v_vanishing():
    with pytest.raises(VanishingOffDiagonalError):
        rho_v(constant_cocycle([[1.0, 0.0], [0.0, 1.0]]).M, 0.3, 16)


def test_rho_v_model():
    t, t1, phi1 = 0.05, 0.004, 0.3
    m = model_from_parameters(t, t1, phi1, C=0.2, T=(1.5, 0.7))
    h = GOLDEN
    rv = rho_v(m, h, 512)
    assert np.max(np.abs(rv.rho - 1)) < 3 * t1
    # direct algebra on the coefficients
    e = np.exp(1j * phi1)
    z = m.z(rv.phi)
    w, wm = np.exp(1j * z), np.exp(1j * (z - 2 * np.pi * h))
    rho = (1j * e - 1j * t1 * w) / (1j * e - 1j * t1 * wm)
    v = t * e + rho * (2 / t * np.cos(phi1) - t1 / t * (wm + 1 / wm))
    np.testing.assert_allclose(rv.v, v, rtol=1e-10)


def test_winding_examples():
    assert winding(lambda p: np.full(np.shape(p), 3.0)) == 0
    assert winding(lambda p: np.exp(2j * np.pi * p)) == 1
    assert winding(lambda p: 2 + np.cos(2 * np.pi * p)) == 0
    assert winding(lambda p: np.exp(-6j * np.pi * p), grid_size=4) == -3


def test_winding_additive():
    rng = np.random.default_rng(9)
    for _ in range(10):
        m, n = rng.integers(-3, 4, 2)
        c1, c2 = rng.uniform(0.1, 0.4, 2)
        f = lambda p: np.exp(2j * np.pi * m * p) * (1 + c1 * np.cos(2 * np.pi * p))
        g = lambda p: np.exp(2j * np.pi * n * p) * (1 + c2 * np.exp(2j * np.pi * p))
        assert winding(lambda p: f(p) * g(p)) == winding(f) + winding(g) == m + n


def test_certificate_constant_collapse():
    cert = gap_certificate(constant_cocycle(CAT).M, GOLDEN, 256)
    assert cert.holds and cert.stationary
    np.testing.assert_allclose([cert.theta_lower, cert.theta_upper], CAT_RATE, rtol=1e-14)
    d = json.loads(cert.to_json())
    assert d["holds"] is True


def test_certificate_model_center_fails():
    t, t1 = 1e-3, 1e-5
    m = model_from_parameters(t, t1, np.pi / 2 + 3 * np.pi, C=0.3)
    cert = gap_certificate(m, GOLDEN, 1024)
    assert not cert.holds
    assert cert.v_minus < 2 * np.sqrt(cert.rho_plus)


def test_certificate_model_margin_holds():
    t, t1 = 1e-3, 1e-5
    phi1 = np.arccos(10 * (t + t1))
    m = model_from_parameters(t, t1, phi1, C=0.3)
    cert = gap_certificate(m, GOLDEN, 1024)
    assert cert.holds and not cert.stationary
    rho_margin, v_margin = cert.margins
    assert rho_margin > 0 and v_margin > 0


def test_certificate_bounds_contain_rate():
    t, t1 = 0.02, 0.001
    m = model_from_parameters(t, t1, 0.4, C=0.3)
    c = MatrixCocycle(m, GOLDEN)
    cert = gap_certificate(m, GOLDEN, 1024)
    est = lyapunov(c, 0.0, 20_000)
    assert cert.holds
    assert cert.theta_lower - 0.05 <= est.value <= cert.theta_upper + 0.05
