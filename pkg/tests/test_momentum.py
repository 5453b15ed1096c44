import numpy as np
import pytest

from adiabatic_monodromy.errors import BranchPointProximityError, CutCrossingError, WindowError
from adiabatic_monodromy.hill import PeriodicPotential, fourier_edges
from adiabatic_monodromy.momentum import (
    KAPPA0,
    KAPPA1,
    KAPPA_STAR,
    branch_points,
    continue_kappa_along,
    kappa,
    kappa_star,
    kappa_asymptotic_remainder,
    make_context,
    stokes_csv,
    stokes_lines,
    window_interval,
)

COS = PeriodicPotential.cosine(1.0)
ZERO = PeriodicPotential()


@pytest.fixture(scope="module")
def ctx():
    return make_context(COS, 0.3)


@pytest.fixture(scope="module")
def ctx_free():
    return make_context(ZERO, 0.5)


def test_branch_points_free():
    np.testing.assert_allclose(branch_points(make_context(ZERO, 0.5)).phi1, np.pi / 3, rtol=1e-12)
    np.testing.assert_allclose(branch_points(make_context(ZERO, 0.0)).phi1, np.pi / 2, rtol=1e-12)


def test_branch_points_cos(ctx):
    bp = branch_points(ctx)
    E2 = np.sort(np.concatenate([fourier_edges(COS, 0.0)[:2], fourier_edges(COS, np.pi)[:2]]))[1]
    np.testing.assert_allclose(bp.phi(2), np.pi + 1j * np.arccosh(E2 - ctx.E), atol=1e-8)
    for l, E_l in enumerate(ctx.bs.edges[:4], start=1):
        assert abs(E_l + np.cos(bp.phi(l)) - ctx.E) <= 1e-10


def test_branch_points_window_error():
    with pytest.raises(WindowError, match="E - 1 <= E1"):
        branch_points(make_context(COS, 1.5))


def test_kappa_free_values(ctx_free):
    np.testing.assert_allclose(kappa(ctx_free, KAPPA0, 0.0), 1j * np.sqrt(0.5), atol=1e-12)
    # continue to pi through the upper half-plane and compare with direct sqrt tracking
    path = [0.0, 1.5 + 1.0j, np.pi]
    val = kappa(ctx_free, KAPPA0, np.pi + 0j, path=path)
    np.testing.assert_allclose(abs(val), np.sqrt(1.5), rtol=1e-10)
    nodes = np.concatenate([np.linspace(0, 1.5 + 1j, 400), np.linspace(1.5 + 1j, np.pi, 400)[1:]])
    s = np.sqrt(0.5 - np.cos(nodes) + 0j)
    for j in range(1, s.size):  # continuous square root
        if abs(s[j] - s[j - 1]) > abs(s[j] + s[j - 1]):
            s[j:] = -s[j:]
    s *= 1j * np.sqrt(0.5) / s[0]
    np.testing.assert_allclose(val, s[-1], atol=1e-10)


def test_kappa_anchors(ctx):
    k0 = kappa(ctx, KAPPA0, 0.0)
    assert abs(k0.real) < 1e-14 and k0.imag > 0
    k1 = kappa(ctx, KAPPA1, np.pi)
    assert 0 < k1.real < np.pi and abs(k1.imag) < 1e-14


def test_symmetries(ctx):
    rng = np.random.default_rng(11)
    pts = rng.uniform(-2.8, 2.8, 100) + 1j * rng.uniform(-1.5, 1.5, 100)
    # keep off the real cut segments, where kappa0 is two-valued
    pts = pts[(np.abs(pts.imag) > 0.05)][:20]
    for z in pts:
        a = kappa(ctx, KAPPA0, z)
        np.testing.assert_allclose(kappa(ctx, KAPPA0, -z), a, atol=1e-8)
        np.testing.assert_allclose(kappa(ctx, KAPPA0, np.conj(z)), -np.conj(a), atol=1e-8)
        shifted = kappa(ctx, KAPPA0, z + 2 * np.pi, path=[0, np.pi - 0.5j, 2 * np.pi, 2 * np.pi + z])
        np.testing.assert_allclose(shifted, -a, atol=1e-8)


def test_cut_crossing_default_path(ctx):
    with pytest.raises(CutCrossingError):
        kappa(ctx, KAPPA0, 2.0)
    with pytest.raises(CutCrossingError):
        kappa(ctx, KAPPA0, 6.0 + 5.6j)  # crosses Re = pi inside [eta2, eta3]
    with pytest.raises(CutCrossingError):
        kappa(ctx, KAPPA1, np.pi + 3.5j)


def test_branch_point_proximity(ctx):
    phi1 = branch_points(ctx).phi1
    with pytest.raises(BranchPointProximityError):
        kappa(ctx, KAPPA_STAR, phi1 + 1e-10)


def test_kappa_star(ctx):
    phi1 = branch_points(ctx).phi1
    inner = kappa_star(ctx, np.linspace(0.0, phi1 - 1e-3, 30))
    outer = kappa_star(ctx, np.linspace(phi1 + 1e-3, np.pi, 30))
    assert np.max(np.abs(inner.real)) < 1e-8 and np.all(inner.imag > 0)
    assert np.max(np.abs(outer.imag)) < 1e-8 and np.all(outer.real > 0)


def test_small_loop_is_trivial(ctx):
    z0 = 0.6 + 0.3j
    start = kappa(ctx, KAPPA0, z0)
    loop = z0 + 0.1 - 0.1 * np.exp(2j * np.pi * np.linspace(0, 1, 9))
    out = continue_kappa_along(ctx, KAPPA0, loop, start_value=start)
    np.testing.assert_allclose(out.end, start, atol=1e-9)


def test_loop_around_phi1_negates(ctx_free):
    phi1 = branch_points(ctx_free).phi1
    z0 = phi1 - 0.2
    start = kappa(ctx_free, KAPPA0, z0)
    loop = phi1 + 0.2 * np.exp(1j * (np.pi + 2 * np.pi * np.linspace(0, 1, 17)))
    out = continue_kappa_along(ctx_free, KAPPA0, loop, start_value=start)
    np.testing.assert_allclose(out.end, -start, atol=1e-9)
    np.testing.assert_allclose(start, 1j * np.sqrt(np.cos(z0) - 0.5), atol=1e-12)


def test_asymptotic_remainder_decay(ctx_free):
    ctx = make_context(COS, 0.5)
    heights = np.array([6.0, 8.0, 10.0])
    rem = [kappa_asymptotic_remainder(ctx, 0.5 + 1j * y) for y in heights]
    slope = np.polyfit(heights, np.log(rem), 1)[0]
    assert abs(slope + 0.5) < 0.05
    rem_lower = kappa_asymptotic_remainder(ctx, 0.5 - 8j)
    np.testing.assert_allclose(rem_lower, rem[1], rtol=1e-8)


def test_stokes_lines_from_phi1(ctx):
    phi1 = branch_points(ctx).phi1
    lines = stokes_lines(ctx, phi1, max_arc=6.0)
    finite = [l for l in lines if l.finite]
    assert len(finite) == 1
    np.testing.assert_allclose(finite[0].end, 2 * np.pi - phi1, atol=1e-12)
    assert np.max(np.abs(finite[0].points.imag)) < 1e-6
    ups = sorted(l.end.imag for l in lines if not l.finite)
    assert ups[0] < -4 and ups[1] > 4
    # three directions at mutual angles 2 pi / 3
    angles = np.sort([np.angle(l.points[3] - phi1) for l in lines])
    gaps = np.diff(np.concatenate([angles, [angles[0] + 2 * np.pi]]))
    np.testing.assert_allclose(gaps, 2 * np.pi / 3, atol=0.05)


def test_stokes_reflection_symmetry():
    ctx = make_context(ZERO, 0.0)
    lines = stokes_lines(ctx, np.pi / 2, max_arc=4.0)
    up = [l for l in lines if l.end.imag > 1][0].points
    down = [l for l in lines if l.end.imag < -1][0].points
    n = min(up.size, down.size)
    np.testing.assert_allclose(np.conj(up[:n]), down[:n], atol=1e-6)
    text = stokes_csv(lines)
    assert text.splitlines()[0] == "re,im,line_id"


def test_window_interval(ctx):
    lo, hi = window_interval(ctx.bs, 0.05)
    assert lo < ctx.E < hi
