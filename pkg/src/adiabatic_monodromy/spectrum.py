"""Spectral localization near the quantization energies and a periodic-approximant oracle.

Quantization energies solve phi1(E) = pi/2 + pi l.  Near each one the leading-order
gap condition |cos phi1| >= t + t1 fails only on an interval of E-width
2 (t + t1) / |phi1'(E)|, which is the predicted interval.  The literal width t + t1
is reported alongside.

The oracle realizes 2 pi / eps = N + p/q exactly: the potential V(x - phi) + cos(eps x)
then has period L = N q + p and its spectrum is {E : |Delta_L(E)| <= 2}.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.optimize import brentq

from . import _magnus
from .actions import compute_actions, integral_phi1
from .cocycle import GRID, gap_certificate
from .errors import ConsistencyError, NumericalError
from .hill import PeriodicPotential, band_edges, steps_for
from .momentum import make_context, window_interval
from .monodromy import assemble_model, shift_h

PHASE_GRID = 96
ROOT_XTOL = 1e-12


def _contexts(V, energies, bs):
    return [make_context(V, float(e), bs=bs) for e in energies]


def default_band_structure(V, e_max=60.0):
    return band_edges(V, e_max)


def phase_curve(V, epsilon, energies, bs=None):
    """phi1(E) on an array of energies."""
    bs = default_band_structure(V) if bs is None else bs
    return np.array([2 / epsilon * integral_phi1(c) for c in _contexts(V, energies, bs)])


def find_quantization_energies(V, epsilon, J_delta, bs=None, grid=PHASE_GRID):
    """All (l, E_l) with phi1(E_l) = pi/2 + pi l inside J_delta, sorted by E."""
    bs = default_band_structure(V) if bs is None else bs
    lo, hi = J_delta
    span = hi - lo
    Es = np.linspace(lo + 1e-9 * span, hi - 1e-9 * span, grid)
    ph = phase_curve(V, epsilon, Es, bs)
    if not np.all(np.diff(ph) > 0):
        j = int(np.argmin(np.diff(ph)))
        raise ConsistencyError(f"phi1 is not increasing between E={Es[j]:.10g} and E={Es[j + 1]:.10g}")

    def f(E, target):
        return 2 / epsilon * integral_phi1(make_context(V, E, bs=bs)) - target

    roots = []
    l_min = math.ceil((ph[0] - np.pi / 2) / np.pi)
    l_max = math.floor((ph[-1] - np.pi / 2) / np.pi)
    for l in range(l_min, l_max + 1):
        target = np.pi / 2 + np.pi * l
        j = int(np.searchsorted(ph, target))
        if j == 0 or j == len(ph):
            continue
        E_l = brentq(f, Es[j - 1], Es[j], args=(target,), xtol=ROOT_XTOL, rtol=4 * np.finfo(float).eps)
        roots.append((l, E_l))
    return roots


@dataclass
class SpectralPrediction:
    entries: list
    window: tuple
    epsilon: float

    @property
    def centers(self):
        return np.array([e["E_l_center"] for e in self.entries])

    def intervals(self, margin=0.0):
        return [(e["interval"][0] - margin, e["interval"][1] + margin) for e in self.entries]

    def to_dict(self):
        return {"epsilon": self.epsilon, "window": list(self.window), "entries": self.entries,
                "width_formula": "2 (t + t1) / |dphi1/dE|"}

    def to_csv(self, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write("l,E_center,E_lower,E_upper,width,width_literal,t,t1,lambda,F,dphi1_dE\n")
        for e in self.entries:
            buf.write(",".join(f"{v:.16g}" if isinstance(v, float) else str(v) for v in (
                e["l"], e["E_l_center"], e["interval"][0], e["interval"][1], e["width"],
                e["width_literal"], e["t"], e["t1"], e["lambda_l"], e["F_l"], e["dphi1_dE"])) + "\n")
        return buf.getvalue()


def predicted_intervals(V, epsilon, roots, J_delta, bs=None) -> SpectralPrediction:
    bs = default_band_structure(V) if bs is None else bs
    entries = []
    for l, E_l in roots:
        a = compute_actions(make_context(V, E_l, bs=bs), epsilon)
        width = 2 * (a.t + a.t1) / abs(a.dphi1_dE)
        entries.append({
            "l": int(l), "E_l_center": float(E_l),
            "interval": [float(E_l - width / 2), float(E_l + width / 2)],
            "width": float(width), "width_literal": float(a.t + a.t1),
            "t": a.t, "t1": a.t1, "lambda_l": a.t1 / a.t,
            # cos(phi1) vanishes at the root, so F_l is 0 at leading order; the
            # residual from the finite root tolerance is kept separately
            "F_l": 0.0, "F_l_residual": float(np.cos(a.phase_phi1) / a.t),
            "dphi1_dE": float(a.dphi1_dE),
        })
    return SpectralPrediction(entries, tuple(float(x) for x in J_delta), float(epsilon))


def predict(V, epsilon, delta=0.05, bs=None):
    bs = default_band_structure(V) if bs is None else bs
    J = window_interval(bs, delta)
    roots = find_quantization_energies(V, epsilon, J, bs)
    return predicted_intervals(V, epsilon, roots, J, bs)


# ---------------------------------------------------------------------------
# oracle


def rational_approximant(epsilon, max_denominator=64):
    """(N, p, q) with 2 pi / eps ~ N + p/q."""
    frac = Fraction(2 * np.pi / epsilon).limit_denominator(max_denominator)
    N, rem = divmod(frac.numerator, frac.denominator)
    return int(N), int(rem), int(frac.denominator)


@dataclass
class OracleSpectrum:
    bands: list
    N: int
    p: int
    q: int
    phases: list
    per_phase: list = field(default_factory=list)

    @property
    def epsilon(self):
        return 2 * np.pi / (self.N + self.p / self.q)

    @property
    def period(self):
        return self.N * self.q + self.p

    def measure(self, lo=-np.inf, hi=np.inf):
        return float(sum(max(0.0, min(b, hi) - max(a, lo)) for a, b in self.bands))

    def to_csv(self, header_lines=()):
        buf = io.StringIO()
        for line in header_lines:
            buf.write(f"# {line}\n")
        buf.write("index,E_lower,E_upper\n")
        for j, (a, b) in enumerate(self.bands):
            buf.write(f"{j},{a:.16g},{b:.16g}\n")
        return buf.getvalue()


class ApproximantDiscriminant:
    """Delta_L(E) for -psi'' + (V(x - phi) + cos(eps x)) psi over its exact period L."""

    def __init__(self, V: PeriodicPotential, N, p, q, phase, steps_per_unit=None, e_scale=2.0):
        self.V, self.phase = V, float(phase)
        self.eps = 2 * np.pi * q / (N * q + p)
        self.L = N * q + p
        if steps_per_unit is None:
            steps_per_unit = steps_for(e_scale + V.sup_norm_bound + 1.0)
        self.n_steps = int(self.L * steps_per_unit)

    def __call__(self, E):
        E = np.asarray(E, dtype=float)
        V, eps, ph = self.V, self.eps, self.phase

        def q(x):
            return V(x - ph) + np.cos(eps * x)

        Y, _ = _magnus.propagate(q, 0.0, float(self.L), self.n_steps, E.astype(complex))
        D = (Y[..., 0, 0] + Y[..., 1, 1]).real
        if not np.all(np.isfinite(D)):
            raise NumericalError(f"non-finite discriminant over period {self.L}")
        return D


def _bands_from_scan(disc, E_grid, D):
    """Band intervals {|Delta| <= 2} from sign changes of Delta -+ 2 on the grid."""
    crossings = []
    for level in (2.0, -2.0):
        g = D - level
        idx = np.flatnonzero(np.sign(g[:-1]) * np.sign(g[1:]) <= 0)
        for j in idx:
            a, b = E_grid[j], E_grid[j + 1]
            if g[j] == 0:
                crossings.append(a)
                continue
            if g[j + 1] == 0:
                continue
            crossings.append(brentq(lambda e: float(disc(np.array([e]))[0]) - level, a, b,
                                    xtol=1e-15, rtol=4 * np.finfo(float).eps))
    pts = np.unique(np.concatenate([[E_grid[0]], np.sort(crossings), [E_grid[-1]]]))
    if pts.size < 2:
        return []
    mids = 0.5 * (pts[:-1] + pts[1:])
    inside = np.abs(disc(mids)) <= 2
    bands = []
    for j in np.flatnonzero(inside):
        a, b = pts[j], pts[j + 1]
        if bands and abs(bands[-1][1] - a) <= 1e-15 * max(1.0, abs(a)):
            bands[-1] = (bands[-1][0], b)
        else:
            bands.append((float(a), float(b)))
    return bands


def _union(intervals):
    out = []
    for a, b in sorted(intervals):
        if out and a <= out[-1][1]:
            out[-1] = (out[-1][0], max(out[-1][1], b))
        else:
            out.append((a, b))
    return out


def oracle_spectrum(V, N, p, q, E_grid, phases=None, n_phases=8) -> OracleSpectrum:
    """Union over phases of the bands of the period-(Nq + p) operator, restricted to E_grid's span."""
    if math.gcd(p, q) != 1 and p != 0:
        raise ValueError("p/q must be in lowest terms")
    if phases is None:
        phases = list(np.arange(n_phases) / (n_phases * q))
    E_grid = np.asarray(E_grid, dtype=float)
    e_scale = float(np.max(np.abs(E_grid))) + 1.0
    per_phase = []
    for ph in phases:
        disc = ApproximantDiscriminant(V, N, p, q, ph, e_scale=e_scale)
        per_phase.append(_bands_from_scan(disc, E_grid, disc(E_grid)))
    bands = _union([b for bs in per_phase for b in bs])
    return OracleSpectrum(bands, N, p, q, [float(x) for x in phases], per_phase)


# ---------------------------------------------------------------------------
# certificates and comparison


def gap_scan(V, epsilon, E_grid, bs=None, grid_size=GRID):
    """(E, GapCertificate) for the leading-order model at each energy."""
    bs = default_band_structure(V) if bs is None else bs
    h = shift_h(epsilon)
    out = []
    for E in E_grid:
        model = assemble_model(compute_actions(make_context(V, float(E), bs=bs), epsilon))
        out.append((float(E), gap_certificate(model, h, grid_size)))
    return out


def _overlap(bands, intervals):
    total = 0.0
    for a, b in bands:
        for c, d in intervals:
            total += max(0.0, min(b, d) - max(a, c))
    return total


def compare(prediction: SpectralPrediction, oracle: OracleSpectrum, margin, min_fraction=0.95,
            max_spacing_ratio=3.0):
    lo, hi = prediction.window
    eps = prediction.epsilon
    bands = [(max(a, lo), min(b, hi)) for a, b in oracle.bands if b > lo and a < hi]
    measure = sum(b - a for a, b in bands)
    widened = _union(prediction.intervals(margin))
    report = {"epsilon": eps, "margin": margin, "oracle_measure": measure,
              "n_oracle_bands": len(bands), "n_centers": len(prediction.entries)}
    if measure <= 0 or len(prediction.entries) < 2:
        report.update(containment=None, verdict="inconclusive")
        return report
    report["containment"] = _overlap(bands, widened) / measure
    spacings = np.diff(prediction.centers)
    c1, c2 = float(np.min(spacings) / eps), float(np.max(spacings) / eps)
    report.update(c1=c1, c2=c2, spacing_ratio=c2 / c1)
    offsets = []
    for e in prediction.entries:
        E_l = e["E_l_center"]
        d = min((0.0 if a <= E_l <= b else min(abs(a - E_l), abs(b - E_l))) for a, b in bands)
        offsets.append({"l": e["l"], "offset_over_eps": d / eps})
    report["offsets"] = offsets
    ok = report["containment"] >= min_fraction and report["spacing_ratio"] <= max_spacing_ratio
    report["verdict"] = "pass" if ok else "fail"
    return report
