"""Action integrals and Bloch prefactors entering the asymptotic monodromy matrix.

For the adiabatic family -psi'' + (V(x - phi) + cos(eps x)) psi = E psi the
leading-order monodromy is built from

    phi1 = (2/eps) int_{phi_1}^{pi} kappa,             t  = exp(-(2/eps) int_0^{phi_1} |kappa|),
    t1   = exp(-(2/eps) int_0^{eta_2} (pi - kappa(pi + i eta)) d eta),
    phi2 = (i eps / 2 pi) int_{phi_1}^{phi_2} (omega_- - omega_+),

and T = diag(exp int_0^{phi_1} omega_+, exp(-int_0^{phi_1} omega_-)).

omega_+-(phi) = sin(phi) g_+-(E - cos phi) with
g_+- = -int p_-+ dp_+-/dcalE / int p_+ p_-, where p_+- are the periodic factors of the
Bloch solutions, normalized by p_+-(x0) = 1 at x0 = 0.37.  dp/dcalE is the exact
derivative of the discretized solution (dual propagation); central differences
are kept as an oracle.

All eps-independent integrals are computed once per energy (``action_integrals``)
and scaled by 1/eps afterwards, so eps * ln t is eps-independent by construction.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from ._continuation import _candidates_nearest
from .errors import ClosedGapError, GaugeError, NearPoleError
from .hill import (
    X_ANCHOR,
    bloch_arrays,
    discriminant,
    discriminant_with_derivative,
    periodic_integral,
    quasi_momentum,
    quasi_momentum_real,
)
from .momentum import KAPPA0, branch_points, check_window, kappa
from .quadrature import NODES, adaptive_integral, endpoint_rule, fixed_integral

ANCHOR = X_ANCHOR
POLE_TOL = 1e-10
GAUGE_TOL = 1e-4
REALNESS_TOL = 1e-6


# ---------------------------------------------------------------------------
# g and omega


def g_values(V, cal_E, k, anchor=ANCHOR):
    """Vectorized (g_plus, g_minus) at energies cal_E on the branches k."""
    arr = bloch_arrays(V, cal_E, k, anchor=anchor, derivative=True)
    near = np.minimum(arr.anchor_plus, arr.anchor_minus) < 1e-8
    if np.any(near):
        raise NearPoleError(f"Bloch solution vanishes at x0={anchor} for E={arr.E[np.argmax(near)]}")
    x = arr.x[:, None] - anchor
    pp, pm = arr.psi_plus[:, :, 0], arr.psi_minus[:, :, 0]
    dpp, dpm = arr.d_psi_plus[:, :, 0], arr.d_psi_minus[:, :, 0]
    kp = arr.dk[None, :]
    norm = periodic_integral(pp * pm)
    if np.any(np.abs(norm) < POLE_TOL):
        j = int(np.argmin(np.abs(norm)))
        raise NearPoleError(f"|int p+ p-| = {abs(norm[j]):.3g} below {POLE_TOL} at E={arr.E[j]}")
    # p-+ dp+-/dE through psi, with p+-(anchor) = 1 (exponential factors cancel)
    a_plus = periodic_integral(pm * (dpp - 1j * x * kp * pp))
    a_minus = periodic_integral(pp * (dpm + 1j * x * kp * pm))
    return -a_plus / norm, -a_minus / norm


def _default_k(ctx, cal_E):
    return quasi_momentum(ctx.bs, ctx.V, cal_E)


def g_pm(ctx, cal_E, k=None):
    """(g_plus, g_minus) at a single energy; k defaults to the k0 branch (+i0 on the axis)."""
    cal_E = complex(cal_E)
    k = _default_k(ctx, cal_E) if k is None else k
    gp, gm = g_values(ctx.V, cal_E, k)
    return complex(gp[0]), complex(gm[0])


def _shifted_k(V, cal_E, k, dk):
    c = discriminant(V, cal_E) / 2
    return _candidates_nearest(np.arccos(complex(c)), k + dk)[0]


def _periodic_factors(V, cal_E, k):
    arr = bloch_arrays(V, cal_E, k, anchor=ANCHOR)
    ph = np.exp(-1j * k * (arr.x - ANCHOR))
    return ph * arr.psi_plus[:, 0, 0], arr.psi_minus[:, 0, 0] / ph


def g_pm_finite_difference(ctx, cal_E, h=1e-5, k=None):
    """Oracle: g_+- from central differences of the anchor-normalized p_+-."""
    cal_E = complex(cal_E)
    k = _default_k(ctx, cal_E) if k is None else complex(k)
    _, dD = discriminant_with_derivative(ctx.V, cal_E)
    kp = -dD / (2 * np.sin(k))
    pp, pm = _periodic_factors(ctx.V, cal_E, k)
    up = _periodic_factors(ctx.V, cal_E + h, _shifted_k(ctx.V, cal_E + h, k, kp * h))
    dn = _periodic_factors(ctx.V, cal_E - h, _shifted_k(ctx.V, cal_E - h, k, -kp * h))
    dpp = (up[0] - dn[0]) / (2 * h)
    dpm = (up[1] - dn[1]) / (2 * h)
    norm = periodic_integral(pp * pm)
    return complex(-periodic_integral(pm * dpp) / norm), complex(-periodic_integral(pp * dpm) / norm)


def log_kw(V, cal_E, k):
    """k'(E) * w(E) for the anchor-normalized pair (the normalization integral of p+ p- divided by -i)."""
    arr = bloch_arrays(V, cal_E, k, anchor=ANCHOR, derivative=True)
    return arr.dk * arr.w


def gauge_identity_residual(ctx, cal_E, k=None, h=1e-5):
    """|g+ + g- + d/dE ln(k' w)| relative to max(1, |d/dE ln(k' w)|)."""
    cal_E = complex(cal_E)
    k = _default_k(ctx, cal_E) if k is None else complex(k)
    gp, gm = g_values(ctx.V, cal_E, k)
    _, dD = discriminant_with_derivative(ctx.V, cal_E)
    kp = -dD / (2 * np.sin(k))
    f0 = log_kw(ctx.V, cal_E, k)[0]
    fu = log_kw(ctx.V, cal_E + h, _shifted_k(ctx.V, cal_E + h, k, kp * h))[0]
    fd = log_kw(ctx.V, cal_E - h, _shifted_k(ctx.V, cal_E - h, k, -kp * h))[0]
    dlog = (fu - fd) / (2 * h) / f0
    return float(abs(gp[0] + gm[0] + dlog) / max(1.0, abs(dlog)))


def omega_pm(ctx, varphi, branch=KAPPA0, path=None):
    """(omega_plus, omega_minus) at varphi; the Bloch branch follows kappa on ``branch``."""
    z = complex(varphi)
    s = np.sin(z)
    if abs(s) < 1e-14:  # W'(phi) vanishes at multiples of pi
        return 0j, 0j
    k = kappa(ctx, branch, z, path=path)
    gp, gm = g_values(ctx.V, ctx.E - np.cos(z), k)
    return complex(s * gp[0]), complex(s * gm[0])


# ---------------------------------------------------------------------------
# eps-independent action integrals


def _require_open_gap(bs):
    if len(bs.edges) < 3 or bs.degenerate[1] or not bs.edges[1] < bs.edges[2]:
        raise ClosedGapError("the first spectral gap is closed; t1 and phi2 are undefined")


def _band1_k(ctx, cal_E):
    return quasi_momentum_real(ctx.bs, ctx.V, cal_E)


def integral_phi1(ctx, method="fixed"):
    """int_{phi_1}^{pi} kappa d phi (kappa real on band 1)."""
    phi1 = branch_points(ctx, 1).phi1

    def f(phi):
        return _band1_k(ctx, ctx.E - np.cos(np.atleast_1d(phi))).real

    if method == "fixed":
        return float(fixed_integral(f, phi1, np.pi, left=True))
    return adaptive_integral(lambda p: f(p)[0], phi1, np.pi, left=True).real


def integral_phi1_symmetric(ctx):
    """(1/2) int_{phi_1}^{2 pi - phi_1} kappa d phi, the symmetric form of the same action."""
    phi1 = branch_points(ctx, 1).phi1

    def f(phi):
        return _band1_k(ctx, ctx.E - np.cos(np.atleast_1d(phi))).real

    return 0.5 * float(fixed_integral(f, phi1, 2 * np.pi - phi1, left=True, right=True))


def integral_dphi1(ctx):
    """int_{phi_1}^{pi} k'(E - cos phi) d phi (eps * dphi1/dE / 2)."""
    phi1 = branch_points(ctx, 1).phi1

    def f(phi):
        cal = ctx.E - np.cos(phi)
        _, dD = discriminant_with_derivative(ctx.V, cal)
        k = _band1_k(ctx, cal)
        return (-dD / (2 * np.sin(k))).real

    return float(fixed_integral(f, phi1, np.pi, left=True))


def integral_t(ctx, method="fixed"):
    """int_0^{phi_1} |kappa| d phi over the segment where cal_E < E1."""
    phi1 = branch_points(ctx, 1).phi1

    def f(phi):
        return np.abs(_band1_k(ctx, ctx.E - np.cos(np.atleast_1d(phi))))

    if method == "fixed":
        return float(fixed_integral(f, 0.0, phi1, right=True))
    return adaptive_integral(lambda p: f(p)[0], 0.0, phi1, right=True).real


def integral_t1(ctx, method="fixed"):
    """int_0^{eta_2} (pi - kappa(pi + i eta)) d eta."""
    _require_open_gap(ctx.bs)
    eta2 = branch_points(ctx, 2).eta[2]

    def f(eta):
        return np.pi - _band1_k(ctx, ctx.E + np.cosh(np.atleast_1d(eta))).real

    if method == "fixed":
        return float(fixed_integral(f, 0.0, eta2, right=True))
    return adaptive_integral(lambda e: f(e)[0], 0.0, eta2, right=True).real


def integral_t1_by_parts(ctx, n=NODES):
    """Oracle: int_{kappa_1(pi)}^{pi} eta(kappa) d kappa with E(kappa) inverted on band 1."""
    _require_open_gap(ctx.bs)
    E1, E2 = ctx.bs.edges[0], ctx.bs.edges[1]
    k_pi = float(_band1_k(ctx, ctx.E + 1.0)[0].real)

    def energy(kap):
        return brentq(lambda e: discriminant(ctx.V, e).real - 2 * np.cos(kap), E1, E2,
                      xtol=1e-14, rtol=1e-15)

    def f(kaps):
        es = np.array([energy(k) for k in np.atleast_1d(kaps)])
        return np.arccosh(np.maximum(es - ctx.E, 1.0))

    return float(fixed_integral(f, k_pi, np.pi, left=True, n=n))


def _omega_segment(ctx, phi_nodes, phi_weights, k_nodes):
    gp, gm = g_values(ctx.V, ctx.E - np.cos(phi_nodes), k_nodes)
    s = np.sin(phi_nodes) * phi_weights
    return np.sum(s * gp), np.sum(s * gm)


def integral_omega_T(ctx):
    """(int_0^{phi_1} omega_+, int_0^{phi_1} omega_-) on the kappa0 branch."""
    phi1 = branch_points(ctx, 1).phi1
    x, w = endpoint_rule(0.0, phi1, right=True)
    k = _band1_k(ctx, ctx.E - np.cos(x))
    ip, im = _omega_segment(ctx, x, w, k)
    return complex(ip), complex(im)


def integral_omega_phi2(ctx, path="upper"):
    """(int omega_+, int omega_-) from phi_1 to phi_2 via pi (or its mirror for path='lower').

    On the vertical leg phi = pi +- i eta, omega d phi = sinh(eta) g(E + cosh eta) d eta.
    """
    _require_open_gap(ctx.bs)
    bp = branch_points(ctx, 2)
    phi1, eta2 = bp.phi1, bp.eta[2]
    x, w = endpoint_rule(phi1, np.pi, left=True)
    k = _band1_k(ctx, ctx.E - np.cos(x))
    p1, m1 = _omega_segment(ctx, x, w, k)
    y, v = endpoint_rule(0.0, eta2, right=True)
    sgn = 1.0 if path == "upper" else -1.0
    phi = np.pi + sgn * 1j * y
    dphi = sgn * 1j * v
    cal = ctx.E - np.cos(phi)
    cal = cal.real  # exactly real on the line Re phi = pi
    k2 = _band1_k(ctx, cal)
    gp, gm = g_values(ctx.V, cal, k2)
    s = np.sin(phi) * dphi
    return complex(p1 + np.sum(s * gp)), complex(m1 + np.sum(s * gm))


def integral_phi2_energy(ctx):
    """Oracle for int (omega_- - omega_+): int_{E1}^{E2} (g_- - g_+) dE adaptively in energy."""
    _require_open_gap(ctx.bs)
    E1, E2 = ctx.bs.edges[0], ctx.bs.edges[1]

    def f(e):
        k = _band1_k(ctx, e)
        gp, gm = g_values(ctx.V, e, k)
        return complex(gm[0] - gp[0])

    return adaptive_integral(f, E1, E2, left=True, right=True, epsabs=1e-10, epsrel=1e-10)


@dataclass(frozen=True)
class ActionIntegrals:
    """eps-independent ingredients at one energy."""

    E: float
    phi1_branch_point: float
    action_phi1: float
    action_dphi1: float
    action_t: float
    action_t1: float
    omega_plus_T: complex
    omega_minus_T: complex
    omega_plus_phi2: complex
    omega_minus_phi2: complex
    anchor: float = ANCHOR

    @property
    def phi2_integral(self):
        """i * int_{phi_1}^{phi_2} (omega_- - omega_+); phi2 = eps / (2 pi) times this."""
        return 1j * (self.omega_minus_phi2 - self.omega_plus_phi2)


def action_integrals(ctx, delta=0.0) -> ActionIntegrals:
    _require_open_gap(ctx.bs)
    check_window(ctx, delta)
    bp = branch_points(ctx, 2)
    ip, im = integral_omega_T(ctx)
    jp, jm = integral_omega_phi2(ctx)
    return ActionIntegrals(
        E=ctx.E,
        phi1_branch_point=bp.phi1,
        action_phi1=integral_phi1(ctx),
        action_dphi1=integral_dphi1(ctx),
        action_t=integral_t(ctx),
        action_t1=integral_t1(ctx),
        omega_plus_T=ip,
        omega_minus_T=im,
        omega_plus_phi2=jp,
        omega_minus_phi2=jm,
    )


@dataclass(frozen=True)
class ActionSet:
    E: float
    epsilon: float
    phase_phi1: float
    log_t: float
    log_t1: float
    phi2: float
    phi2_imag: float
    omega_int_plus: complex
    omega_int_minus: complex
    dphi1_dE: float
    anchor: float = ANCHOR

    @property
    def t(self):
        return float(np.exp(self.log_t))

    @property
    def t1(self):
        return float(np.exp(self.log_t1))

    @property
    def C(self):
        return 2 * np.pi / self.epsilon * (np.pi + self.phi2)

    @classmethod
    def from_integrals(cls, ints: ActionIntegrals, epsilon):
        eps = float(epsilon)
        if not eps > 0:
            raise ValueError("epsilon must be positive")
        phi2 = eps / (2 * np.pi) * ints.phi2_integral
        if abs(phi2.imag) > GAUGE_TOL:
            raise GaugeError(
                f"Im phi2 = {phi2.imag:.3g} exceeds {GAUGE_TOL}: omega_+- integrals are not "
                f"gauge consistent (int omega+ = {ints.omega_plus_phi2}, int omega- = {ints.omega_minus_phi2})")
        return cls(
            E=ints.E,
            epsilon=eps,
            phase_phi1=2 / eps * ints.action_phi1,
            log_t=-2 / eps * ints.action_t,
            log_t1=-2 / eps * ints.action_t1,
            phi2=float(phi2.real),
            phi2_imag=float(phi2.imag),
            omega_int_plus=ints.omega_plus_T,
            omega_int_minus=ints.omega_minus_T,
            dphi1_dE=2 / eps * ints.action_dphi1,
            anchor=ints.anchor,
        )

    def to_dict(self):
        d = asdict(self)
        out = {
            "E": d["E"], "epsilon": d["epsilon"], "phi1": d["phase_phi1"],
            "t": self.t, "t1": self.t1, "log_t": d["log_t"], "log_t1": d["log_t1"],
            "phi2": d["phi2"], "phi2_imag": d["phi2_imag"],
            "omega_int_plus": [self.omega_int_plus.real, self.omega_int_plus.imag],
            "omega_int_minus": [self.omega_int_minus.real, self.omega_int_minus.imag],
            "dphi1_dE": d["dphi1_dE"], "gauge_anchor": d["anchor"],
        }
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def compute_actions(ctx, epsilon, delta=0.0) -> ActionSet:
    return ActionSet.from_integrals(action_integrals(ctx, delta), epsilon)


# thin operation wrappers -----------------------------------------------------


def phase_phi1(ctx, epsilon):
    check_window(ctx, open_gap=False)
    return 2 / epsilon * integral_phi1(ctx)


def dphi1_dE(ctx, epsilon):
    check_window(ctx, open_gap=False)
    return 2 / epsilon * integral_dphi1(ctx)


def tunneling_t(ctx, epsilon):
    check_window(ctx, open_gap=False)
    return float(np.exp(-2 / epsilon * integral_t(ctx)))


def tunneling_t1(ctx, epsilon):
    _require_open_gap(ctx.bs)
    check_window(ctx)
    return float(np.exp(-2 / epsilon * integral_t1(ctx)))


def phi2_correction(ctx, epsilon, path="upper", return_imag=False):
    _require_open_gap(ctx.bs)
    check_window(ctx)
    jp, jm = integral_omega_phi2(ctx, path=path)
    phi2 = epsilon / (2 * np.pi) * 1j * (jm - jp)
    if abs(phi2.imag) > GAUGE_TOL:
        raise GaugeError(f"Im phi2 = {phi2.imag:.3g} (int omega+ = {jp}, int omega- = {jm})")
    return (phi2.real, phi2.imag) if return_imag else phi2.real


def prefactor_T(ctx, epsilon=None):
    """diag(exp int_0^{phi_1} omega_+, exp(-int_0^{phi_1} omega_-)); eps-independent."""
    check_window(ctx, open_gap=False)
    ip, im = integral_omega_T(ctx)
    return np.diag([np.exp(ip), np.exp(-im)])
