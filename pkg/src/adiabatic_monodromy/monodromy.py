"""Leading-order monodromy model and the exact monodromy of the adiabatic family.

The model is

    M(phi) = T [[a0, b0 + b1 e^{iz}], [c0 + c1 e^{-iz}, d0 + d1 e^{iz} + dm1 e^{-iz}]] T^{-1},
    z = 2 pi phi + C,

with a0 = t e^{i phi1}, b0 = i e^{i phi1}, b1 = -i t1, c0 = -i e^{i phi1}, c1 = i t1,
d0 = (2/t) cos phi1, d1 = dm1 = -t1/t.  Expanding the determinant,

    a0 d - (b0 + b1 e^{iz})(c0 + c1 e^{-iz})
      = 2 e^{i phi1} cos phi1 - t1 e^{i phi1}(e^{iz} + e^{-iz})
        - (e^{2 i phi1} - t1 e^{i phi1}(e^{iz} + e^{-iz}) + t1^2)
      = 1 - t1^2,

independently of z.

The exact monodromy uses the Cauchy basis psi_1 = s (s(0) = 0, s'(0) = 1) and
psi_2 = c (c(0) = 1, c'(0) = 0) of

    -psi'' + (V(x - phi) + cos(eps x)) psi = E psi.

Writing L = 2 pi / eps, the functions psi_j(x + L, phi + L) solve the same
equation at phi, so Psi(x + L, phi + L) = M(phi) Psi(x, phi).  Evaluating at
x = 0 gives M = [[s'(L), s(L)], [c'(L), c(L)]] where s, c solve the equation at
parameter phi + L on [0, L].
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import _magnus
from .actions import ActionSet
from .errors import IntegrationError
from .hill import PeriodicPotential, steps_for

DET_TOL = 1e-8
INTEGER_SNAP = 1e-9


def period_length(epsilon):
    """L = 2 pi / eps, snapped to the nearest integer when within 1e-9 of it."""
    L = 2 * np.pi / float(epsilon)
    n = round(L)
    return float(n) if abs(L - n) < INTEGER_SNAP * max(1.0, L) else L


def shift_h(epsilon):
    """h = 2 pi / eps mod 1, in [0, 1)."""
    L = period_length(epsilon)
    return float(L - np.floor(L))


@dataclass(frozen=True)
class MonodromyModel:
    a0: complex
    b0: complex
    b1: complex
    c0: complex
    c1: complex
    d0: complex
    d1: complex
    dm1: complex
    C: float
    T: tuple
    epsilon: float
    t: float = field(default=np.nan)
    t1: float = field(default=np.nan)
    phi1: float = field(default=np.nan)

    def z(self, phi):
        return 2 * np.pi * np.asarray(phi, dtype=float) + self.C

    def inner(self, phi):
        """The bracketed matrix of the model (without T), vectorized in phi."""
        e = np.exp(1j * self.z(phi))
        out = np.empty(np.shape(e) + (2, 2), dtype=complex)
        out[..., 0, 0] = self.a0
        out[..., 0, 1] = self.b0 + self.b1 * e
        out[..., 1, 0] = self.c0 + self.c1 / e
        out[..., 1, 1] = self.d0 + self.d1 * e + self.dm1 / e
        return out

    def __call__(self, phi):
        m = self.inner(phi)
        t_a, t_b = self.T
        m[..., 0, 1] *= t_a / t_b
        m[..., 1, 0] *= t_b / t_a
        return m

    def trace_vform(self, phi):
        """t e^{i phi1} + (2/t)(cos phi1 - t1 cos z), the closed form of the trace."""
        return self.t * np.exp(1j * self.phi1) + 2 / self.t * (np.cos(self.phi1) - self.t1 * np.cos(self.z(phi)))

    def to_dict(self):
        c = lambda v: [float(np.real(v)), float(np.imag(v))]
        return {
            "a0": c(self.a0), "b0": c(self.b0), "b1": c(self.b1), "c0": c(self.c0),
            "c1": c(self.c1), "d0": c(self.d0), "d1": c(self.d1), "dm1": c(self.dm1),
            "C": self.C, "T": [c(self.T[0]), c(self.T[1])], "epsilon": self.epsilon,
            "t": self.t, "t1": self.t1, "phi1": self.phi1,
        }


def model_from_parameters(t, t1, phi1, C=0.0, T=(1.0, 1.0), epsilon=np.nan) -> MonodromyModel:
    """Model with the leading-order coefficient table for given (t, t1, phi1)."""
    e = np.exp(1j * phi1)
    return MonodromyModel(
        a0=t * e, b0=1j * e, b1=-1j * t1, c0=-1j * e, c1=1j * t1,
        d0=2 / t * np.cos(phi1), d1=-t1 / t, dm1=-t1 / t,
        C=float(C), T=(complex(T[0]), complex(T[1])), epsilon=float(epsilon),
        t=float(t), t1=float(t1), phi1=float(phi1),
    )


def assemble_model(actions: ActionSet) -> MonodromyModel:
    T = (np.exp(actions.omega_int_plus), np.exp(-actions.omega_int_minus))
    return model_from_parameters(actions.t, actions.t1, actions.phase_phi1, C=actions.C, T=T,
                                 epsilon=actions.epsilon)


def eval_model(model: MonodromyModel, phi):
    return model(phi)


def inner_det(model: MonodromyModel, phi):
    return np.linalg.det(model.inner(phi))


# ---------------------------------------------------------------------------
# exact monodromy


class ExactMonodromy:
    """phi -> M(phi) by direct integration, cached on phi mod 1.

    Evaluation is vectorized over phi; uncached phases are integrated as one batch.
    """

    def __init__(self, V: PeriodicPotential, E, epsilon, steps_per_unit=None, cache=True):
        self.V = V
        self.E = float(E)
        self.epsilon = float(epsilon)
        self.L = period_length(epsilon)
        if steps_per_unit is None:
            steps_per_unit = steps_for(abs(self.E) + V.sup_norm_bound + 1.0)
        self.n_steps = int(np.ceil(self.L * steps_per_unit))
        self._cache = {} if cache else None

    @property
    def h(self):
        return float(self.L - np.floor(self.L))

    @staticmethod
    def _key(phi):
        return round(float(phi) % 1.0, 13) % 1.0

    def _integrate(self, phis):
        phis = np.asarray(phis, dtype=float)
        V, eps, L = self.V, self.epsilon, self.L
        shift = phis + L

        def q(x):
            return V(x - shift) + np.cos(eps * x)

        E = np.full(phis.shape, self.E, dtype=complex)
        Y, _ = _magnus.propagate(q, 0.0, L, self.n_steps, E)
        Y = Y.real
        M = np.empty_like(Y)
        M[..., 0, 0] = Y[..., 1, 1]
        M[..., 0, 1] = Y[..., 0, 1]
        M[..., 1, 0] = Y[..., 1, 0]
        M[..., 1, 1] = Y[..., 0, 0]
        det = np.linalg.det(M)
        bad = np.abs(det - 1) > DET_TOL * np.maximum(1.0, np.max(np.abs(M), axis=(-2, -1)) ** 2)
        if np.any(bad) or not np.all(np.isfinite(M)):
            j = int(np.argmax(bad | ~np.isfinite(det)))
            raise IntegrationError(
                f"exact monodromy over [0, {L:g}] lost unimodularity at phi={phis[j]:.6g}: "
                f"det={det[j]:.3g}, max|M|={np.max(np.abs(M[j])):.3g}, steps={self.n_steps}",
                energy=self.E)
        return M

    def __call__(self, phi):
        phi_arr = np.atleast_1d(np.asarray(phi, dtype=float))
        if self._cache is None:
            out = self._integrate(phi_arr)
        else:
            keys = [self._key(p) for p in phi_arr]
            missing = sorted({k for k in keys if k not in self._cache})
            if missing:
                for k, m in zip(missing, self._integrate(np.array(missing))):
                    self._cache[k] = m
            out = np.array([self._cache[k] for k in keys])
        return out[0] if np.ndim(phi) == 0 else out.reshape(np.shape(phi) + (2, 2))

    def to_csv(self, phis, header_lines=()):
        phis = np.asarray(phis, dtype=float)
        M = self(phis)
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write("phi,m11,m12,m21,m22\n")
        for p, m in zip(phis, M):
            buf.write(f"{p:.12g},{m[0, 0]:.16e},{m[0, 1]:.16e},{m[1, 0]:.16e},{m[1, 1]:.16e}\n")
        return buf.getvalue()


def exact_monodromy(V, E, epsilon, phi, steps_per_unit=None):
    return ExactMonodromy(V, E, epsilon, steps_per_unit=steps_per_unit, cache=False)(phi)


def free_adiabatic_transfer(E, epsilon, rtol=1e-12):
    """Oracle for V = 0: Cauchy data of -psi'' + cos(eps x) psi = E psi over [0, L] by DOP853."""
    from scipy.integrate import solve_ivp

    L = period_length(epsilon)

    def rhs(x, y):
        return [y[1], (np.cos(epsilon * x) - E) * y[0], y[3], (np.cos(epsilon * x) - E) * y[2]]

    sol = solve_ivp(rhs, (0.0, L), [1.0, 0.0, 0.0, 1.0], method="DOP853", rtol=rtol, atol=1e-14)
    c, cp, s, sp = sol.y[:, -1]
    return np.array([[sp, s], [cp, c]])


# ---------------------------------------------------------------------------
# basis-independent comparison


def cocycle_observables_compare(model, exact, h, n_steps, phi0=0.0, grid_size=4096,
                                exact_grid_size=256, seed=7):
    """Lyapunov exponents and gap verdicts of the model and exact cocycles side by side."""
    from .cocycle import MatrixCocycle, gap_certificate, lyapunov

    report = {"h": float(h), "n_steps": int(n_steps), "phi0": float(phi0)}
    for name, M, grid in (("model", model, grid_size), ("exact", exact, exact_grid_size)):
        if M is None:
            report[name] = None
            continue
        lyap = lyapunov(MatrixCocycle(M, h), phi0, n_steps, seed=seed)
        try:
            cert = gap_certificate(M, h, grid)
            verdict = "gap" if cert.holds else "no-gap"
            cert_d = cert.to_dict()
        except Exception as exc:  # certificate inapplicable, e.g. vanishing M12
            verdict, cert_d = f"undetermined ({type(exc).__name__})", None
        report[name] = {"lyapunov": lyap.value, "stderr": lyap.stderr, "verdict": verdict,
                        "certificate": cert_d}
    if report["model"] and report["exact"]:
        report["lyapunov_difference"] = report["model"]["lyapunov"] - report["exact"]["lyapunov"]
    return report
