"""Complex momentum kappa(phi) = k(E - cos phi).

Branch points, branch-tracked evaluation by analytic continuation in phi,
and Stokes-line tracing for diagnostics.

Cuts follow the standard picture for the window E - 1 <= E1 - d,
E1 + d < E + 1 < E2 - d: for kappa0 the real segments [phi1, 2 pi - phi1] + 2 pi m,
and vertical segments on Re phi = pi + 2 pi m joining the branch points of each
open gap (and their mirror images).  kappa1 uses the real segments
[-phi1, phi1] + 2 pi m instead.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from ._continuation import continue_arccos
from .errors import (
    BranchPointProximityError,
    ContinuationError,
    CutCrossingError,
    WindowError,
)
from .hill import (
    EDGE_TOL,
    BandStructure,
    PeriodicPotential,
    band_edges,
    discriminant,
    quasi_momentum_real,
)

KAPPA0 = "kappa0"
KAPPA1 = "kappa1"
KAPPA_STAR = "kappa_star"
BRANCHES = (KAPPA0, KAPPA1, KAPPA_STAR)


@dataclass(frozen=True)
class MomentumContext:
    E: float
    V: PeriodicPotential
    bs: BandStructure

    def cal_E(self, phi):
        return self.E - np.cos(phi)

    def cos_kappa(self, phi):
        return discriminant(self.V, self.E - np.cos(np.asarray(phi, dtype=complex))) / 2


def make_context(V, E, e_max=None, bs=None):
    if bs is None:
        bs = band_edges(V, e_max if e_max is not None else max(60.0, E + 40.0))
    return MomentumContext(float(E), V, bs)


def window_violation(bs, E, delta=0.0, open_gap=True):
    """The first failed inequality of the admissible window, or None.

    ``open_gap=False`` drops the requirement E2 < E3, which only the quantities
    tied to the first gap need.
    """
    E1 = bs.E1
    if not E - 1 <= E1 - delta:
        return f"E - 1 <= E1 - delta fails: {E - 1:.6g} > {E1 - delta:.6g}"
    if not E1 + delta < E + 1:
        return f"E1 + delta < E + 1 fails: {E1 + delta:.6g} >= {E + 1:.6g}"
    if len(bs.edges) < 3:
        return "E2 and E3 are not within the computed band structure"
    E2, E3 = bs.edges[1], bs.edges[2]
    if not E + 1 < E2 - delta:
        return f"E + 1 < E2 - delta fails: {E + 1:.6g} >= {E2 - delta:.6g}"
    if open_gap and (not E2 < E3 or bs.degenerate[1]):
        return "E2 < E3 fails: the first gap is closed"
    return None


def check_window(ctx, delta=0.0, open_gap=True):
    msg = window_violation(ctx.bs, ctx.E, delta, open_gap)
    if msg is not None:
        raise WindowError(msg)


def window_interval(bs, delta):
    """Open interval J_delta of energies satisfying the window inequalities."""
    lo = bs.E1 - 1 + delta
    hi = min(bs.E1 + 1 - delta, bs.edges[1] - 1 - delta)
    if hi <= lo:
        raise WindowError(f"empty window for delta={delta}")
    return lo, hi


@dataclass(frozen=True)
class BranchPoints:
    """phi1 on the real axis and phi_l = pi + i eta_l for the open-gap edges l >= 2."""

    E: float
    phi1: float
    eta: dict

    def phi(self, l):
        if l == 1:
            return complex(self.phi1)
        return complex(np.pi, self.eta[l])

    def lattice_near(self, z, reach=2):
        """All lattice images (+-phi1, pi +- i eta_l, shifted by 2 pi m) near Re z."""
        m0 = int(np.floor(z.real / (2 * np.pi)))
        out = []
        for m in range(m0 - reach, m0 + reach + 1):
            s = 2 * np.pi * m
            out += [s + self.phi1, s - self.phi1]
            for eta in self.eta.values():
                out += [complex(s + np.pi, eta), complex(s + np.pi, -eta)]
        return np.array(out, dtype=complex)


def branch_points(ctx, l_max=None) -> BranchPoints:
    bs = ctx.bs
    d = ctx.E - bs.E1
    if abs(d) > 1:
        ineq = "E - 1 <= E1" if d > 1 else "E1 < E + 1"
        raise WindowError(f"no real phi1: {ineq} fails (E - E1 = {d:.6g})")
    phi1 = float(np.arccos(d))
    l_max = len(bs.edges) if l_max is None else min(l_max, len(bs.edges))
    eta = {}
    for l in range(2, l_max + 1):
        if bs.degenerate[l - 1]:
            continue
        gap = bs.edges[l - 1] - ctx.E
        if gap < 1:
            raise WindowError(f"E + 1 < E{l} fails: branch point on the real axis")
        eta[l] = float(np.arccosh(gap))
    return BranchPoints(ctx.E, phi1, eta)


def _open_edges(bs):
    return [e for e, deg in zip(bs.edges, bs.degenerate) if not deg]


def distance_to_branch_points(ctx, z):
    z = complex(z)
    best = np.inf
    for e in _open_edges(ctx.bs):
        a = np.arccos(complex(ctx.E - e))
        for base in (a, -a):
            m = np.round((z - base).real / (2 * np.pi))
            best = min(best, abs(z - base - 2 * np.pi * m))
    return best


def _check_proximity(ctx, z):
    if distance_to_branch_points(ctx, z) < EDGE_TOL:
        raise BranchPointProximityError(f"phi={z} within {EDGE_TOL} of a branch point")


def _on_real_cut(ctx, branch, x):
    below = np.cos(x) > ctx.E - ctx.bs.E1  # cal_E below E1
    return ~below if branch == KAPPA0 else below


def _crosses_cut(ctx, branch, a, b):
    a, b = complex(a), complex(b)
    # real-axis cuts
    if a.imag == 0 and b.imag == 0:
        xs = np.linspace(a.real, b.real, 2001)[1:]
        if np.any(_on_real_cut(ctx, branch, xs)):
            return True
    elif a.imag * b.imag < 0 or (b.imag == 0 and a.imag != 0):
        s = a.imag / (a.imag - b.imag)
        x = a.real + s * (b.real - a.real)
        if _on_real_cut(ctx, branch, x):
            return True
    # vertical gap cuts on Re = pi + 2 pi m
    lo, hi = sorted((a.real, b.real))
    m_lo = int(np.ceil((lo - np.pi) / (2 * np.pi)))
    m_hi = int(np.floor((hi - np.pi) / (2 * np.pi)))
    heights = []
    for m in range(m_lo, m_hi + 1):
        line = np.pi + 2 * np.pi * m
        if a.real == b.real:
            heights.extend(np.linspace(a.imag, b.imag, 400))
        else:
            s = (line - a.real) / (b.real - a.real)
            heights.append(a.imag + s * (b.imag - a.imag))
    if heights:
        H = np.abs(np.array(heights))
        H = H[np.abs(H) > 0]
        if H.size:
            D = discriminant(ctx.V, ctx.E + np.cosh(H)).real
            if np.any(np.abs(D) > 2):
                return True
    return False


def anchor(ctx, branch):
    """(phi, kappa) anchoring a branch: kappa0 at 0 (Im > 0), kappa1 at pi (real)."""
    if branch == KAPPA0:
        return 0.0, complex(quasi_momentum_real(ctx.bs, ctx.V, ctx.E - 1)[0])
    if branch == KAPPA1:
        return np.pi, complex(quasi_momentum_real(ctx.bs, ctx.V, ctx.E + 1)[0])
    raise ValueError(f"branch {branch!r} has no continuation anchor")


@dataclass(frozen=True)
class Continuation:
    branch: str
    nodes: np.ndarray
    values: np.ndarray

    @property
    def end(self):
        return complex(self.values[-1])


def continue_kappa_along(ctx, branch, path, start_value=None, spacing=0.05) -> Continuation:
    """Continue a branch along the polyline ``path``.

    Without ``start_value`` the path must begin at the branch anchor; the
    continuation is then unconstrained by the cut picture (explicit request).
    """
    path = [complex(p) for p in path]
    for p in path:
        _check_proximity(ctx, p)
    if start_value is None:
        phi0, k0 = anchor(ctx, branch)
        if abs(path[0] - phi0) > 1e-14:
            raise ContinuationError(f"path must start at the {branch} anchor phi={phi0}")
        start_value = k0
    vals, nodes = continue_arccos(ctx.cos_kappa, path, start_value, spacing=spacing,
                                  return_nodes=True)
    return Continuation(branch, nodes, vals)


def kappa(ctx, branch, varphi, path=None):
    """kappa at varphi on the given branch.

    kappa_star is the physical branch on the real axis (i R+ where cal_E < E1,
    band-1 values on R+ elsewhere).  kappa0 and kappa1 are continued from their
    anchors along a straight segment unless an explicit path (ending at varphi)
    is supplied; a straight segment that crosses a cut raises CutCrossingError.
    """
    z = complex(varphi)
    _check_proximity(ctx, z)
    if branch == KAPPA_STAR:
        if z.imag != 0:
            raise ValueError("kappa_star is defined on the real axis only")
        return complex(quasi_momentum_real(ctx.bs, ctx.V, ctx.E - np.cos(z.real))[0])
    if branch not in (KAPPA0, KAPPA1):
        raise ValueError(f"unknown branch {branch!r}")
    phi0, k0 = anchor(ctx, branch)
    if path is None:
        if abs(z - phi0) < 1e-15:
            return k0
        if _crosses_cut(ctx, branch, phi0, z):
            raise CutCrossingError(
                f"straight path from {phi0} to {z} crosses a cut of {branch}; pass an explicit path")
        path = [phi0, z]
    else:
        path = [complex(p) for p in path]
        if abs(path[0] - phi0) > 1e-14:
            path = [complex(phi0)] + path
        if abs(path[-1] - z) > 1e-14:
            path = path + [z]
    return continue_kappa_along(ctx, branch, path).end


def kappa_star(ctx, phi):
    """Vectorized physical branch on real phi."""
    phi = np.asarray(phi, dtype=float)
    return quasi_momentum_real(ctx.bs, ctx.V, ctx.E - np.cos(phi))


def kappa_asymptotic_remainder(ctx, varphi):
    """|kappa0(phi) - (i / sqrt 2) exp(-+ i phi / 2)| for Im phi -> +-infinity."""
    z = complex(varphi)
    sign = -1 if z.imag > 0 else 1
    return abs(kappa(ctx, KAPPA0, z) - 1j / np.sqrt(2) * np.exp(sign * 1j * z / 2))


# ---------------------------------------------------------------------------
# Stokes lines


@dataclass(frozen=True)
class StokesLine:
    points: np.ndarray
    finite: bool
    end: complex


def _nearest_candidate(c, target):
    a = np.arccos(complex(c))
    best = None
    for base in (a, -a):
        m = np.round((target - base).real / (2 * np.pi))
        for dm in (-1, 0, 1):
            v = base + 2 * np.pi * (m + dm)
            if best is None or abs(v - target) < abs(best - target):
                best = v
    return complex(best)


def stokes_lines(ctx, from_point, max_arc=10.0, step=1e-2, r_start=1e-3):
    """Trace the three Stokes lines Im int (kappa - kappa(phi_b)) = 0 from a branch point."""
    pb = complex(from_point)
    if distance_to_branch_points(ctx, pb) > 1e-8:
        raise ValueError(f"{pb} is not a branch point")
    kb = np.pi * np.round(np.arccos(complex(ctx.cos_kappa(pb))).real / np.pi)
    # local model kappa - kb ~ c sqrt(phi - pb)
    probe = pb + 1e-6
    kp = _nearest_candidate(ctx.cos_kappa(probe), kb)
    if abs(kp - kb) < 1e-12:
        kp = np.arccos(complex(ctx.cos_kappa(probe)))
    c = (kp - kb) / np.sqrt(1e-6)
    others = []
    for z in _lattice(ctx, pb):
        if abs(z - pb) > 1e-6:
            others.append(z)
    others = np.array(others)

    lines = []
    for m in range(3):
        theta = (2.0 / 3.0) * (m * np.pi - np.angle(c))
        direction = np.exp(1j * theta)
        z = pb + r_start * direction
        k = _nearest_candidate(ctx.cos_kappa(z), kb + c * np.sqrt(r_start) * np.exp(1j * theta / 2))
        F = (2.0 / 3.0) * (k - kb) * (z - pb)
        pts = [pb, z]
        arc = r_start
        finite = False
        end = None
        k_prev = k
        while arc < max_arc:
            d = k - kb
            u = np.conj(d) / abs(d)
            if (u * np.conj(direction)).real < 0:
                u = -u
            s = step
            for _ in range(30):
                zn = z + s * u
                zm = z + 0.5 * s * u
                cm, cn = ctx.cos_kappa(np.array([zm, zn]))
                pred = k + (k - k_prev) * (s / max(abs(z - pts[-2]), 1e-300)) if len(pts) > 2 else k
                kn = _nearest_candidate(cn, pred)
                km = _nearest_candidate(cm, 0.5 * (k + kn))
                if abs(kn - k) < 0.2:
                    break
                s *= 0.5
            else:
                raise ContinuationError(f"Stokes tracer stalled near {z}")
            Fn = F + s * u * ((k + 4 * km + kn) / 6 - kb)
            dn = kn - kb
            t = -Fn.imag / abs(dn)
            delta = 1j * t * np.conj(dn) / abs(dn)
            zc = zn + delta
            kc = _nearest_candidate(ctx.cos_kappa(zc), kn)
            Fn = Fn + dn * delta
            k_prev, k = k, kc
            direction = (zc - z) / abs(zc - z)
            arc += abs(zc - z)
            z, F = zc, Fn
            pts.append(z)
            if others.size:
                dist = np.abs(others - z)
                j = int(np.argmin(dist))
                if dist[j] < 1.5 * step:
                    end = complex(others[j])
                    pts.append(end)
                    finite = True
                    break
        lines.append(StokesLine(np.array(pts), finite, end if end is not None else complex(z)))
    return lines


def _lattice(ctx, z):
    out = []
    for e in _open_edges(ctx.bs):
        a = np.arccos(complex(ctx.E - e))
        for base in (a, -a):
            m0 = np.round((z - base).real / (2 * np.pi))
            for dm in range(-2, 3):
                out.append(base + 2 * np.pi * (m0 + dm))
    return out


def stokes_csv(lines, header_lines=()):
    buf = io.StringIO()
    for line in header_lines:
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "line_id"])
    for i, line in enumerate(lines):
        for p in line.points:
            w.writerow([repr(float(p.real)), repr(float(p.imag)), i])
    return buf.getvalue()
