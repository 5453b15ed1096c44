"""Matrix cocycles chi(phi + h) = M(phi) chi(phi): growth rates and gap certificates.

Products are composed in the order chi_n = M(phi0 + (n-1) h) ... M(phi0 + h) M(phi0) chi_0.

The certificate is the sufficient condition for a monotonous Bloch solution: with
rho(phi) = M12(phi) / M12(phi - h) and v(phi) = M11(phi) + rho(phi) M22(phi - h),

    inf|rho| > 0,  sup|rho| < (inf|v| / 2)^2,  ind rho = ind v = 0

imply a Bloch solution whose per-step growth lies between
ln(v-/2 + sqrt((v-/2)^2 - rho+)) and ln(v+ + v-/2 - sqrt((v-/2)^2 - rho+)).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Callable

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import SingularStepError, VanishingOffDiagonalError, WindingAmbiguousError

BLOCK = 100
BOOTSTRAP_SAMPLES = 400
OFFDIAG_TOL = 1e-12
GRID = 4096
CHUNK = 4096
STATIONARY_TOL = 1e-12


@dataclass
class MatrixCocycle:
    M: Callable
    h: float

    def matrices(self, phi0, n):
        """M(phi0 + j h) for j = 0..n-1, evaluated in vectorized chunks."""
        for start in range(0, n, CHUNK):
            j = np.arange(start, min(start + CHUNK, n))
            yield np.asarray(self.M(phi0 + j * self.h), dtype=complex).reshape(-1, 2, 2)


def constant_cocycle(matrix, h=0.0):
    m = np.asarray(matrix, dtype=complex)

    def M(phi):
        return np.broadcast_to(m, np.shape(phi) + (2, 2)).copy()

    return MatrixCocycle(M, h)


def almost_mathieu_cocycle(lam, E, h):
    """Transfer matrices [[E - 2 lam cos(2 pi phi), -1], [1, 0]] of the almost-Mathieu operator."""

    def M(phi):
        phi = np.asarray(phi, dtype=float)
        out = np.zeros(phi.shape + (2, 2))
        out[..., 0, 0] = E - 2 * lam * np.cos(2 * np.pi * phi)
        out[..., 0, 1] = -1.0
        out[..., 1, 0] = 1.0
        return out

    return MatrixCocycle(M, h)


def rotation_cocycle(h):
    def M(phi):
        a = 2 * np.pi * np.asarray(phi, dtype=float)
        c, s = np.cos(a), np.sin(a)
        return np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)

    return MatrixCocycle(M, h)


@dataclass
class Trajectory:
    increments: np.ndarray  # log growth of the leading frame vector per step
    increments_second: np.ndarray
    frame: np.ndarray
    phi0: float
    h: float

    def to_csv(self, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write("step,log_norm_increment\n")
        for j, v in enumerate(self.increments):
            buf.write(f"{j},{v:.16e}\n")
        return buf.getvalue()


def iterate(c: MatrixCocycle, phi0, n) -> Trajectory:
    """Iterate an orthonormal frame, renormalizing by Gram-Schmidt at every step."""
    if n < 1:
        raise ValueError("n must be at least 1")
    # frame columns (a0, a1) and (b0, b1), kept as Python complex scalars for speed
    a0, a1, b0, b1 = 1 + 0j, 0j, 0j, 1 + 0j
    inc1 = np.empty(n)
    inc2 = np.empty(n)
    j = 0
    for block in c.matrices(phi0, n):
        for m00, m01, m10, m11 in block.reshape(-1, 4).tolist():
            u0, u1 = m00 * a0 + m01 * a1, m10 * a0 + m11 * a1
            w0, w1 = m00 * b0 + m01 * b1, m10 * b0 + m11 * b1
            r0 = math.hypot(abs(u0), abs(u1))
            if not (r0 > 0 and math.isfinite(r0)):
                raise SingularStepError(f"cocycle matrix annihilates the frame at step {j}, "
                                        f"phi={phi0 + j * c.h:.12g}")
            a0, a1 = u0 / r0, u1 / r0
            proj = a0.conjugate() * w0 + a1.conjugate() * w1
            w0, w1 = w0 - proj * a0, w1 - proj * a1
            r1 = math.hypot(abs(w0), abs(w1))
            if not (r1 > 0 and math.isfinite(r1)):
                raise SingularStepError(f"singular cocycle matrix at step {j}, phi={phi0 + j * c.h:.12g}")
            b0, b1 = w0 / r1, w1 / r1
            inc1[j] = math.log(r0)
            inc2[j] = math.log(r1)
            j += 1
    frame = np.array([[a0, b0], [a1, b1]])
    return Trajectory(inc1, inc2, frame, float(phi0), float(c.h))


@dataclass(frozen=True)
class LyapunovEstimate:
    value: float
    n_steps: int
    stderr: float

    def to_dict(self):
        return asdict(self)


def block_bootstrap_stderr(x, block=BLOCK, samples=BOOTSTRAP_SAMPLES, seed=7):
    """Standard error of the mean of x by the moving-block bootstrap."""
    x = np.asarray(x, dtype=float)
    n = x.size
    if n < 2 * block:
        return float(np.std(x, ddof=1) / np.sqrt(n)) if n > 1 else np.inf
    rng = np.random.default_rng(seed)
    csum = np.concatenate([[0.0], np.cumsum(x)])
    block_means = (csum[block:] - csum[:-block]) / block
    k = n // block
    idx = rng.integers(0, block_means.size, size=(samples, k))
    means = block_means[idx].mean(axis=1)
    return float(np.std(means, ddof=1))


def lyapunov(c: MatrixCocycle, phi0, n, seed=7, burn_in=None) -> LyapunovEstimate:
    """Per-step growth rate of the cocycle with a block-bootstrap standard error."""
    traj = iterate(c, phi0, n)
    if burn_in is None:
        burn_in = min(1000, n // 10)
    x = traj.increments[burn_in:]
    mean = float(np.mean(x))
    err = block_bootstrap_stderr(x, seed=seed)
    floor = np.sqrt(x.size) * np.finfo(float).eps * max(1.0, abs(mean))
    return LyapunovEstimate(mean, int(n), float(max(err, floor)))


# ---------------------------------------------------------------------------
# rho, v, winding


@dataclass
class RhoV:
    phi: np.ndarray
    rho: np.ndarray
    v: np.ndarray
    det: np.ndarray


def _rho_v_at(M, h, phi):
    phi = np.asarray(phi, dtype=float)
    a = np.asarray(M(phi), dtype=complex)
    b = np.asarray(M(phi - h), dtype=complex)
    m12a, m12b = a[..., 0, 1], b[..., 0, 1]
    small = np.minimum(np.abs(m12a), np.abs(m12b)) < OFFDIAG_TOL
    if np.any(small):
        j = np.flatnonzero(np.atleast_1d(small))[0]
        raise VanishingOffDiagonalError(f"|M12| < {OFFDIAG_TOL} near phi={np.atleast_1d(phi)[j]:.12g}")
    rho = m12a / m12b
    v = a[..., 0, 0] + rho * b[..., 1, 1]
    return rho, v, np.linalg.det(a)


def rho_v(M, h, grid_size=GRID) -> RhoV:
    phi = np.arange(grid_size) / grid_size
    rho, v, det = _rho_v_at(M, h, phi)
    return RhoV(phi, rho, v, det)


def winding(f, grid_size=GRID, max_refinements=8):
    """Winding number of a nonvanishing 1-periodic function.

    ``f`` is either a callable on [0, 1) or samples on a uniform grid (the endpoint
    not repeated).  For callables the grid is doubled until every phase jump is
    below pi/2.
    """
    if callable(f):
        n = grid_size
        for _ in range(max_refinements + 1):
            vals = np.asarray(f(np.arange(n) / n), dtype=complex)
            try:
                return _winding_samples(vals, limit=np.pi / 2)
            except WindingAmbiguousError:
                n *= 2
        raise WindingAmbiguousError(f"phase jumps stay above pi/2 at grid size {n // 2}")
    return _winding_samples(np.asarray(f, dtype=complex), limit=np.pi)


def _winding_samples(vals, limit):
    if np.min(np.abs(vals)) < OFFDIAG_TOL:
        raise WindingAmbiguousError("function vanishes (|f| < 1e-12) on the grid")
    ratio = np.roll(vals, -1) / vals
    jumps = np.angle(ratio)
    if np.max(np.abs(jumps)) >= limit:
        raise WindingAmbiguousError(f"phase jump {np.max(np.abs(jumps)):.3g} exceeds {limit:.3g}")
    total = np.sum(jumps) / (2 * np.pi)
    ind = int(np.rint(total))
    if abs(total - ind) > 1e-6:
        raise WindingAmbiguousError(f"total phase increment {total} is not near an integer")
    return ind


# ---------------------------------------------------------------------------
# certificate


@dataclass(frozen=True)
class GapCertificate:
    rho_minus: float
    rho_plus: float
    v_minus: float
    v_plus: float
    ind_rho: int
    ind_v: int
    holds: bool
    theta_lower: float
    theta_upper: float
    h: float
    stationary: bool = False

    @property
    def margins(self):
        """(rho_minus, (v_minus/2)^2 - rho_plus): both positive when the certificate holds."""
        return self.rho_minus, (self.v_minus / 2) ** 2 - self.rho_plus

    def to_dict(self):
        d = asdict(self)
        d["holds"] = bool(d["holds"])
        d["margins"] = list(self.margins)
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _refine_extremum(fun, phi, j, n, sign):
    """Refined min (sign=1) or max (sign=-1) of fun near grid point j."""
    lo, hi = phi[j] - 1.0 / n, phi[j] + 1.0 / n
    res = minimize_scalar(lambda p: sign * fun(p), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 / n})
    return sign * min(res.fun, sign * fun(phi[j]))


def _is_stationary(M, h, grid, rv):
    if min(h % 1.0, 1.0 - h % 1.0) < 1e-12:
        return True
    mats = np.asarray(M(grid[:: max(1, grid.size // 64)]), dtype=complex)
    return bool(np.max(np.abs(mats - mats[0])) <= STATIONARY_TOL * max(1.0, np.max(np.abs(mats))))


def gap_certificate(M, h, grid_size=GRID) -> GapCertificate:
    """Check the monotonous-Bloch-solution conditions on a grid with one refinement pass.

    For a stationary cocycle (M constant, or h = 0 mod 1) each orbit is a fixed
    matrix, so the growth rate is ln|beta| with beta the larger root of
    beta^2 - v beta + det M = 0; the bounds become the range of ln|beta| over phi.
    """
    rv = rho_v(M, h, grid_size)
    phi, n = rv.phi, grid_size
    abs_rho, abs_v = np.abs(rv.rho), np.abs(rv.v)

    def rho_abs(p):
        return float(np.abs(_rho_v_at(M, h, np.array([p]))[0][0]))

    def v_abs(p):
        return float(np.abs(_rho_v_at(M, h, np.array([p]))[1][0]))

    rho_minus = _refine_extremum(rho_abs, phi, int(np.argmin(abs_rho)), n, 1.0)
    rho_plus = _refine_extremum(rho_abs, phi, int(np.argmax(abs_rho)), n, -1.0)
    v_minus = _refine_extremum(v_abs, phi, int(np.argmin(abs_v)), n, 1.0)
    v_plus = _refine_extremum(v_abs, phi, int(np.argmax(abs_v)), n, -1.0)

    try:
        ind_rho = winding(rv.rho)
        ind_v = winding(rv.v)
    except WindingAmbiguousError:
        ind_rho = winding(lambda p: _rho_v_at(M, h, p)[0], grid_size=2 * n)
        ind_v = winding(lambda p: _rho_v_at(M, h, p)[1], grid_size=2 * n)

    holds = bool(rho_minus > 0 and rho_plus < (v_minus / 2) ** 2 and ind_rho == 0 and ind_v == 0)
    stationary = _is_stationary(M, h, phi, rv)
    lower = upper = np.nan
    if holds:
        if stationary:
            disc = np.sqrt(rv.v**2 / 4 - rv.det + 0j)
            beta = np.maximum(np.abs(rv.v / 2 + disc), np.abs(rv.v / 2 - disc))
            lower, upper = float(np.min(np.log(beta))), float(np.max(np.log(beta)))
        else:
            root = np.sqrt((v_minus / 2) ** 2 - rho_plus)
            lower = float(np.log(v_minus / 2 + root))
            upper = float(np.log(v_plus + v_minus / 2 - root))
    return GapCertificate(float(rho_minus), float(rho_plus), float(v_minus), float(v_plus),
                          int(ind_rho), int(ind_v), holds, lower, upper, float(h), stationary)
