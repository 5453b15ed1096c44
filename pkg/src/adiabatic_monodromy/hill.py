"""The unperturbed periodic operator -d^2/dx^2 + V(x) with V(x + 1) = V(x).

Transfer matrices, the Hill discriminant, band edges, quasi-momentum branches
and Bloch solutions.  All integration goes through the sixth-order Magnus
propagator in ``_magnus``; ``reference_transfer`` is an independent adaptive
Runge-Kutta route kept for cross-checks.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from . import _magnus
from ._continuation import continue_arccos
from .errors import (
    BranchPointProximityError,
    ConfigError,
    DegenerateFloquetError,
    NearPoleError,
    ResolutionError,
)

STEPS_PER_PERIOD = 200
EDGE_TOL = 1e-8
X_ANCHOR = 0.37
MAX_DEGREE = 32
# |Delta| at an extremum within this distance of 2 counts as a closed gap
CLOSED_GAP_TOL = 1e-11


@dataclass(frozen=True)
class PeriodicPotential:
    """V(x) = a0 + sum_k a_k cos(2 pi k x) + b_k sin(2 pi k x)."""

    cosine_coeffs: tuple = (0.0,)
    sine_coeffs: tuple = ()

    def __post_init__(self):
        a = tuple(float(c) for c in self.cosine_coeffs) or (0.0,)
        b = tuple(float(c) for c in self.sine_coeffs)
        if not all(np.isfinite(a + b)):
            raise ConfigError("potential coefficients must be finite", "potential")
        if max(len(a) - 1, len(b)) > MAX_DEGREE:
            raise ConfigError(f"degree exceeds {MAX_DEGREE}", "potential")
        object.__setattr__(self, "cosine_coeffs", a)
        object.__setattr__(self, "sine_coeffs", b)

    @classmethod
    def cosine(cls, amplitude=1.0):
        return cls((0.0, amplitude))

    @property
    def degree(self):
        return max(len(self.cosine_coeffs) - 1, len(self.sine_coeffs))

    @property
    def is_zero(self):
        return not any(self.cosine_coeffs) and not any(self.sine_coeffs)

    @property
    def sup_norm_bound(self):
        return sum(abs(c) for c in self.cosine_coeffs) + sum(abs(c) for c in self.sine_coeffs)

    def __call__(self, x):
        x = np.asarray(x)
        out = np.full(x.shape, self.cosine_coeffs[0], dtype=np.result_type(x, float))
        for k, a in enumerate(self.cosine_coeffs[1:], start=1):
            if a:
                out = out + a * np.cos(2 * np.pi * k * x)
        for k, b in enumerate(self.sine_coeffs, start=1):
            if b:
                out = out + b * np.sin(2 * np.pi * k * x)
        return out

    def fourier(self, k):
        """Complex Fourier coefficient c_k with V = sum c_k exp(2 pi i k x)."""
        k = int(k)
        if k == 0:
            return complex(self.cosine_coeffs[0])
        m = abs(k)
        a = self.cosine_coeffs[m] if m < len(self.cosine_coeffs) else 0.0
        b = self.sine_coeffs[m - 1] if m - 1 < len(self.sine_coeffs) else 0.0
        return (a - 1j * b) / 2 if k > 0 else (a + 1j * b) / 2

    def to_dict(self):
        return {"cosine_coeffs": list(self.cosine_coeffs), "sine_coeffs": list(self.sine_coeffs)}

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("potential must be a mapping", "potential")
        unknown = set(data) - {"cosine_coeffs", "sine_coeffs"}
        if unknown:
            raise ConfigError(f"unknown key {sorted(unknown)[0]!r}", "potential")
        try:
            return cls(tuple(data.get("cosine_coeffs", (0.0,))), tuple(data.get("sine_coeffs", ())))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc), "potential") from exc


def eval_potential(V: PeriodicPotential, x):
    return V(x)


# ---------------------------------------------------------------------------
# period map


def _q(V):
    return lambda x: V(x).astype(complex) if np.ndim(x) else complex(V(x))


def steps_for(E):
    """Magnus steps per period: 200 up to |E| = 100, then growing like sqrt|E|."""
    scale = float(np.sqrt(np.max(np.abs(E)))) if np.size(E) else 0.0
    return 100 * int(np.ceil(max(2.0, scale / 5.0)))


def period_map(V, E, derivative=False, n_steps=None):
    """Vectorized period map Y(1; E) and optionally dY/dE, over any array of E."""
    if n_steps is None:
        n_steps = steps_for(E)
    return _magnus.propagate(_q(V), 0.0, 1.0, n_steps, E, derivative=derivative)


@dataclass(frozen=True)
class TransferMatrix:
    entries: np.ndarray
    energy: complex

    @property
    def trace(self):
        return complex(self.entries[0, 0] + self.entries[1, 1])

    @property
    def det(self):
        return complex(np.linalg.det(self.entries))


def transfer_over_period(V, E, n_steps=None) -> TransferMatrix:
    """Map of (psi, psi') at x = 0 to (psi, psi') at x = 1."""
    Y, _ = period_map(V, complex(E), n_steps=n_steps)
    return TransferMatrix(Y, complex(E))


def reference_transfer(V, E, rtol=1e-13, atol=1e-15):
    """Period map by adaptive DOP853 (independent of the Magnus route)."""
    E = complex(E)

    def rhs(x, y):
        q = V(x) - E
        return np.array([y[1], q * y[0], y[3], q * y[2]])

    sol = solve_ivp(rhs, (0.0, 1.0), np.array([1, 0, 0, 1], dtype=complex),
                    method="DOP853", rtol=rtol, atol=atol)
    y = sol.y[:, -1]
    return np.array([[y[0], y[2]], [y[1], y[3]]])


def discriminant(V, E, n_steps=None):
    """Delta(E) = trace of the period map; accepts scalars or arrays."""
    Y, _ = period_map(V, E, n_steps=n_steps)
    D = Y[..., 0, 0] + Y[..., 1, 1]
    return D if np.ndim(E) else complex(D)


def discriminant_with_derivative(V, E, n_steps=None):
    Y, dY = period_map(V, E, derivative=True, n_steps=n_steps)
    D = Y[..., 0, 0] + Y[..., 1, 1]
    dD = dY[..., 0, 0] + dY[..., 1, 1]
    if np.ndim(E):
        return D, dD
    return complex(D), complex(dD)


def _real_disc(V, E):
    return float(discriminant(V, E).real)


# ---------------------------------------------------------------------------
# band edges


@dataclass(frozen=True)
class BandStructure:
    """Ordered edges E1 < E2 <= E3 < E4 <= ... up to e_max.

    levels[i] is the value of Delta (+2 or -2) at edges[i]; degenerate[i] marks
    edges belonging to a closed gap (reported as coincident pairs).
    """

    edges: tuple
    levels: tuple
    degenerate: tuple
    e_max: float
    potential: PeriodicPotential = field(default=None, compare=False, repr=False)

    @property
    def E1(self):
        return self.edges[0]

    def edge(self, n):
        """E_n with the 1-based numbering of the band ordering."""
        if not 1 <= n <= len(self.edges):
            raise ResolutionError(f"edge E_{n} not computed (e_max={self.e_max})")
        return self.edges[n - 1]

    def band(self, n):
        """Band n = [E_{2n-1}, E_{2n}]; the last band may be open above e_max."""
        lo = self.edge(2 * n - 1)
        hi = self.edges[2 * n - 1] if 2 * n <= len(self.edges) else np.inf
        return lo, hi

    def gap(self, l):
        return self.edge(2 * l), self.edge(2 * l + 1)

    def gap_is_closed(self, l):
        return bool(self.degenerate[2 * l - 1]) if 2 * l <= len(self.edges) else False

    def locate(self, E):
        """('below', 0), ('band', n) or ('gap', l) for a real energy."""
        E = float(E)
        if E < self.edges[0]:
            return "below", 0
        i = int(np.searchsorted(self.edges, E, side="right"))  # edges[i-1] <= E
        if i % 2 == 1:
            n = (i + 1) // 2
            if i == len(self.edges) and E > self.e_max:
                raise ResolutionError(f"E={E} beyond computed range e_max={self.e_max}")
            return "band", n
        if i == len(self.edges):
            raise ResolutionError(f"E={E} beyond computed range e_max={self.e_max}")
        return "gap", i // 2

    def distance_to_edge(self, E):
        return float(np.min(np.abs(np.asarray(self.edges) - E)))

    def intervals(self):
        """Rows (index, E_lower, E_upper, degenerate_flag) of the spectral bands.

        The flag marks bands whose upper gap is closed.
        """
        rows = []
        nb = (len(self.edges) + 1) // 2
        for n in range(1, nb + 1):
            lo, hi = self.band(n)
            closed = 2 * n < len(self.edges) and self.degenerate[2 * n - 1]
            rows.append((n, lo, hi, bool(closed)))
        return rows

    def to_csv(self, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "E_lower", "E_upper", "degenerate_flag"])
        for n, lo, hi, flag in self.intervals():
            w.writerow([n, repr(float(lo)), repr(float(hi)), int(flag)])
        return buf.getvalue()


def _lower_bound(V):
    return min(V.cosine_coeffs[0] - V.sup_norm_bound + abs(V.cosine_coeffs[0]), 0.0) - 1.0


def band_edges(V, e_max, scan_points=2000) -> BandStructure:
    """Roots of Delta = +-2 below e_max, closed gaps reported as coincident pairs."""
    e_lo = _lower_bound(V)
    if e_max <= e_lo:
        raise ResolutionError(f"e_max={e_max} is below the spectrum bound {e_lo}")
    grid = np.linspace(e_lo, e_max, scan_points + 1)
    D, dD = discriminant_with_derivative(V, grid)
    D, dD = D.real, dD.real
    if D[0] <= 2:
        raise ResolutionError("scan start is not below the spectrum")

    def dprime(e):
        return complex(discriminant_with_derivative(V, e)[1]).real

    # split points: grid plus the extrema of Delta
    extrema = []
    for i in np.nonzero(np.sign(dD[:-1]) * np.sign(dD[1:]) < 0)[0]:
        extrema.append(brentq(dprime, grid[i], grid[i + 1], xtol=1e-14, rtol=1e-15))
    if np.any(dD == 0.0):
        extrema.extend(grid[dD == 0.0])
    pts = np.unique(np.concatenate([grid, extrema]))
    Dp = np.interp(pts, grid, D)
    ext_vals = {}
    for e in extrema:
        ext_vals[e] = _real_disc(V, e)
    for j, e in enumerate(pts):
        if e in ext_vals:
            Dp[j] = ext_vals[e]

    edges = []  # (E, level, degenerate)
    for e, v in ext_vals.items():
        if abs(abs(v) - 2.0) <= CLOSED_GAP_TOL:
            edges.append((e, 2.0 * np.sign(v), True))
            edges.append((e, 2.0 * np.sign(v), True))
    for level in (2.0, -2.0):
        f = Dp - level
        for j in range(len(pts) - 1):
            a, b = pts[j], pts[j + 1]
            fa, fb = f[j], f[j + 1]
            if a in ext_vals and abs(abs(ext_vals[a]) - 2) <= CLOSED_GAP_TOL:
                continue
            if b in ext_vals and abs(abs(ext_vals[b]) - 2) <= CLOSED_GAP_TOL:
                continue
            if fa == 0.0:
                if a not in ext_vals:
                    edges.append((a, level, False))
                continue
            if fa * fb < 0:
                root = brentq(lambda e: _real_disc(V, e) - level, a, b, xtol=1e-13, rtol=1e-15)
                d, dd = discriminant_with_derivative(V, root)
                if dd.real != 0:
                    step = (d.real - level) / dd.real
                    if abs(step) < 1e-9:
                        root -= step
                edges.append((root, level, False))
    edges.sort(key=lambda t: t[0])
    # drop a trailing lone upper edge pair partially beyond e_max
    edges = [t for t in edges if t[0] <= e_max]

    # sign-pattern audit: levels must read +2, -2, -2, +2, +2, -2, -2, ...
    for i, (e, level, _) in enumerate(edges):
        expected = 2.0 if ((i + 1) // 2) % 2 == 0 else -2.0
        if level != expected:
            raise ResolutionError(
                f"edge sequence broken at E={e:.6g} (Delta={level:+g}, expected {expected:+g}); "
                "increase scan_points")
    if not edges:
        raise ResolutionError("no band edge below e_max")
    return BandStructure(
        edges=tuple(float(t[0]) for t in edges),
        levels=tuple(t[1] for t in edges),
        degenerate=tuple(bool(t[2]) for t in edges),
        e_max=float(e_max),
        potential=V,
    )


# ---------------------------------------------------------------------------
# quasi-momentum


def _check_edge_distance(bs, E):
    d = np.min(np.abs(np.asarray(bs.edges) - E))
    if d < EDGE_TOL:
        raise BranchPointProximityError(f"E={E} within {EDGE_TOL} of a band edge")


def quasi_momentum_real(bs, V, E, D=None):
    """k0(E + i0) for real E (vectorized); Im k >= 0, Re k = pi l on gap l."""
    E = np.atleast_1d(np.asarray(E, dtype=float))
    if D is None:
        D = discriminant(V, E).real
    D = np.asarray(D).real
    out = np.empty(E.shape, dtype=complex)
    for j, e in enumerate(E):
        zone, n = bs.locate(e)
        d = D[j]
        if zone == "below":
            out[j] = 1j * np.arccosh(max(d / 2, 1.0))
        elif zone == "band":
            a = np.arccos(np.clip(d / 2, -1.0, 1.0))
            out[j] = np.pi * (n - 1) + a if n % 2 else np.pi * n - a
        else:
            out[j] = np.pi * n + 1j * np.arccosh(max(abs(d) / 2, 1.0))
    return out


def _start_on_axis(bs, x):
    """Real abscissa near x usable as a continuation start (away from edges)."""
    edges = np.asarray(bs.edges)
    d = np.abs(edges - x)
    if d.min() > 1e-4:
        return x
    e = edges[np.argmin(d)]
    for cand in (e - 1e-3, e + 1e-3):
        if np.min(np.abs(edges - cand)) > 5e-4:
            return cand
    return x + 1e-3


def quasi_momentum(bs, V, E, branch=0):
    """Branch k_l(E) of arccos(Delta(E)/2).

    Real E gives the +i0 boundary value.  For Im E > 0 the value is continued
    vertically from the real axis; below the axis the reflection identities
    k0(E) = -conj k0(conj E) and k_l(E) = 2 pi l - conj k0(conj E) are used.
    """
    E = complex(E)
    _check_edge_distance(bs, E)
    if E.imag < 0:
        up = quasi_momentum(bs, V, E.conjugate(), 0)
        return -up.conjugate() if branch == 0 else 2 * np.pi * branch - up.conjugate()
    if E.imag == 0:
        return complex(quasi_momentum_real(bs, V, E.real)[0])
    x = _start_on_axis(bs, E.real)
    k_start = complex(quasi_momentum_real(bs, V, x)[0])
    if x == E.real:
        verts = [complex(x, 0.0), E]
    else:
        lift = min(E.imag, 1e-3)
        verts = [complex(x, 0.0), complex(x, lift), complex(E.real, lift), E]
    vals = continue_arccos(lambda z: discriminant(V, z) / 2, verts, k_start,
                           spacing=0.05 * max(1.0, np.sqrt(abs(E))))
    return complex(vals[-1])


def dk_dE(bs, V, E, branch=0):
    E = complex(E)
    _check_edge_distance(bs, E)
    k = quasi_momentum(bs, V, E, branch)
    _, dD = discriminant_with_derivative(V, E)
    return -dD / (2 * np.sin(k))


# ---------------------------------------------------------------------------
# Bloch solutions


@dataclass(frozen=True)
class BlochPair:
    """Bloch solutions on the grid x = 0, 1/n, ..., 1 normalized by psi(anchor) = 1.

    psi_plus[:, 0] is the value and psi_plus[:, 1] the x-derivative.  When the
    pair was built with ``derivative=True`` the E-derivatives are in d_psi_*.
    """

    x: np.ndarray
    energy: complex
    k: complex
    multiplier: complex
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    p_plus: np.ndarray
    p_minus: np.ndarray
    w: complex
    anchor: float
    potential: PeriodicPotential = field(repr=False, default=None)
    coefficients: tuple = field(repr=False, default=None)
    d_psi_plus: np.ndarray = field(repr=False, default=None)
    d_psi_minus: np.ndarray = field(repr=False, default=None)
    dk: complex = None

    def evaluate(self, x, sign=+1):
        """(psi, psi') of psi_plus (sign=+1) or psi_minus at arbitrary real x."""
        x = float(x)
        n = int(np.floor(x))
        r = x - n
        steps = max(2, int(np.ceil(r * steps_for(self.energy))))
        Y, _ = _magnus.propagate(_q(self.potential), 0.0, r, steps, self.energy)
        c = self.coefficients[0 if sign > 0 else 1]
        mu = self.multiplier if sign > 0 else 1 / self.multiplier
        return (Y @ c) * mu**n


def _floquet_vectors(M, mu, dM=None, dmu=None):
    """Eigenvectors of M (batched) for multipliers mu, with their E-derivatives.

    Uses (M12, mu - M11) or (mu - M22, M21), whichever is larger.
    """
    va = np.stack([M[..., 0, 1], mu - M[..., 0, 0]], axis=-1)
    vb = np.stack([mu - M[..., 1, 1], M[..., 1, 0]], axis=-1)
    use_a = (np.linalg.norm(va, axis=-1) >= np.linalg.norm(vb, axis=-1))[..., None]
    v = np.where(use_a, va, vb)
    if dM is None:
        return v, None
    dva = np.stack([dM[..., 0, 1], dmu - dM[..., 0, 0]], axis=-1)
    dvb = np.stack([dmu - dM[..., 1, 1], dM[..., 1, 0]], axis=-1)
    return v, np.where(use_a, dva, dvb)


def principal_k(D):
    """arccos(D/2) with Im k > 0, or k in [0, pi] when real."""
    k = np.arccos(np.asarray(D, dtype=complex) / 2)
    flip = (k.imag < 0) | ((k.imag == 0) & (k.real < 0))
    k = np.where(flip, -k, k)
    return complex(k) if k.ndim == 0 else k


@dataclass(frozen=True)
class BlochArrays:
    """Batched Bloch data: axis 0 is the x grid, axis 1 the energies, axis 2 (value, x-derivative)."""

    x: np.ndarray
    E: np.ndarray
    k: np.ndarray
    psi_plus: np.ndarray
    psi_minus: np.ndarray
    anchor_plus: np.ndarray
    anchor_minus: np.ndarray
    coeff_plus: np.ndarray
    coeff_minus: np.ndarray
    dk: np.ndarray = None
    d_psi_plus: np.ndarray = None
    d_psi_minus: np.ndarray = None

    @property
    def w(self):
        pp, pm = self.psi_plus[0], self.psi_minus[0]
        return pp[:, 1] * pm[:, 0] - pm[:, 1] * pp[:, 0]


def bloch_arrays(V, E, k, anchor=0.0, derivative=False, n_steps=None) -> BlochArrays:
    """Bloch solutions for many energies at once, each normalized by psi(anchor) = 1.

    k must be a root of cos k = Delta(E)/2 for every E; it selects which solution
    carries the multiplier exp(ik).  anchor_plus / anchor_minus hold the raw
    values at the anchor relative to the solution's maximum (small = near a pole).
    """
    E = np.atleast_1d(np.asarray(E, dtype=complex))
    k = np.atleast_1d(np.asarray(k, dtype=complex))
    if n_steps is None:
        n_steps = steps_for(E)
    if n_steps % 100:
        raise ValueError("n_steps must be a multiple of 100 so the anchors lie on the grid")
    Ys, dYs = _magnus.propagate(_q(V), 0.0, 1.0, n_steps, E, derivative=derivative, store=True)
    M = Ys[-1]
    D = M[:, 0, 0] + M[:, 1, 1]
    bad = np.abs(np.cos(k) - D / 2) > 1e-7 * np.maximum(1, np.abs(D))
    if np.any(bad):
        j = int(np.argmax(bad))
        raise ValueError(f"k={k[j]} is not a root of cos k = Delta/2 = {D[j] / 2}")
    sin_k = np.sin(k)
    if np.any(np.abs(sin_k) < 1e-7):
        j = int(np.argmin(np.abs(sin_k)))
        raise DegenerateFloquetError(f"Floquet multipliers coincide at E={E[j]}")
    mu = np.exp(1j * k)
    dk = dmu_p = dmu_m = dM = None
    if derivative:
        dM = dYs[-1]
        dD = dM[:, 0, 0] + dM[:, 1, 1]
        dk = -dD / (2 * sin_k)
        dmu_p = 1j * dk * mu
        dmu_m = -1j * dk / mu
    idx = int(round(anchor * n_steps))
    out = []
    for mm, dmm in ((mu, dmu_p), (1 / mu, dmu_m)):
        v, dv = _floquet_vectors(M, mm, dM, dmm)
        vals = np.einsum("nmij,mj->nmi", Ys, v)
        s = vals[idx, :, 0]
        rel = np.abs(s) / np.max(np.abs(vals[:, :, 0]), axis=0)
        psi = vals / s[None, :, None]
        dpsi = None
        if derivative:
            dvals = np.einsum("nmij,mj->nmi", dYs, v) + np.einsum("nmij,mj->nmi", Ys, dv)
            ds = dvals[idx, :, 0]
            dpsi = dvals / s[None, :, None] - psi * (ds / s)[None, :, None]
        out.append((psi, dpsi, v / s[:, None], rel))
    (pp, dpp, cp, rp), (pm, dpm, cm, rm) = out
    return BlochArrays(
        x=np.linspace(0.0, 1.0, n_steps + 1), E=E, k=k,
        psi_plus=pp, psi_minus=pm, anchor_plus=rp, anchor_minus=rm,
        coeff_plus=cp, coeff_minus=cm, dk=dk, d_psi_plus=dpp, d_psi_minus=dpm,
    )


def bloch_solutions(V, E, k=None, anchor=0.0, derivative=False,
                    n_steps=None) -> BlochPair:
    """Floquet solutions psi_+- with multipliers exp(+-ik).

    k fixes the branch (and so which solution is called psi_plus); by default
    Im k > 0, i.e. psi_plus decays to the right.  The normalization is
    psi_+-(anchor) = 1, falling back to x0 = 0.37 when psi vanishes at anchor.
    """
    E = complex(E)
    if k is None:
        k = principal_k(discriminant(V, E))
    arr = bloch_arrays(V, E, k, anchor=anchor, derivative=derivative, n_steps=n_steps)
    if min(arr.anchor_plus[0], arr.anchor_minus[0]) < 1e-8:
        if anchor == X_ANCHOR:
            raise NearPoleError(f"Bloch solution vanishes at the anchor x0={anchor} (E={E})")
        return bloch_solutions(V, E, k=k, anchor=X_ANCHOR, derivative=derivative, n_steps=n_steps)
    k = complex(arr.k[0])
    x = arr.x
    pp, pm = arr.psi_plus[:, 0], arr.psi_minus[:, 0]
    phase = np.exp(-1j * k * x)
    return BlochPair(
        x=x, energy=E, k=k, multiplier=complex(np.exp(1j * k)),
        psi_plus=pp, psi_minus=pm,
        p_plus=phase * pp[:, 0], p_minus=pm[:, 0] / phase,
        w=complex(arr.w[0]), anchor=anchor, potential=V,
        coefficients=(arr.coeff_plus[0], arr.coeff_minus[0]),
        d_psi_plus=None if arr.d_psi_plus is None else arr.d_psi_plus[:, 0],
        d_psi_minus=None if arr.d_psi_minus is None else arr.d_psi_minus[:, 0],
        dk=None if arr.dk is None else complex(arr.dk[0]),
    )


def periodic_integral(values):
    """Integral over one period from samples on a closed uniform grid (spectral)."""
    values = np.asarray(values)
    return np.mean(values[:-1], axis=0)


def check_lemma21(V, E, x, k=None, n_steps=None):
    """|int_{x-1}^{x} psi_+ psi_- du + i k' w| / |k' w|."""
    pair = bloch_solutions(V, E, k=k, n_steps=n_steps)
    n_steps = pair.x.size - 1
    # solutions on [x-1, x]: propagate the data at x-1 across one period
    start = pair.evaluate(x - 1, +1), pair.evaluate(x - 1, -1)
    Ys, _ = _magnus.propagate(_q(V), x - 1, x, n_steps, complex(E), store=True)
    prod = (Ys @ start[0])[:, 0] * (Ys @ start[1])[:, 0]
    integral = periodic_integral(prod)
    _, dD = discriminant_with_derivative(V, E)
    kp = -dD / (2 * np.sin(pair.k))
    target = kp * pair.w
    return float(abs(integral + 1j * target) / abs(target))


def fourier_edges(V, theta, modes=81):
    """Eigenvalues of the truncated Fourier matrix of -d^2 + V on exp(i(2 pi n + theta)x).

    theta = 0 gives periodic, theta = pi antiperiodic eigenvalues.
    """
    half = modes // 2
    n = np.arange(-half, half + 1)
    H = np.diag((2 * np.pi * n + theta) ** 2).astype(complex)
    for d in range(-V.degree, V.degree + 1):
        c = V.fourier(d)
        if c:
            H += c * np.eye(modes, k=-d)
    return np.linalg.eigvalsh(H)
