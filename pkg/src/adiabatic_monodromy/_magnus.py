"""Sixth-order Magnus propagator for -y'' + q(x) y = E y.

The first-order system Y' = A(x) Y with A = [[0, 1], [q - E, 0]] is stepped with
the three-point Gauss-Legendre Magnus scheme of Blanes, Casas and Ros.  Each step
is the exponential of a traceless 2x2 matrix, so det Y = 1 holds to rounding for
any step size, and constant potentials are propagated exactly.

E enters the step exponent linearly, which lets the propagator carry the exact
E-derivative of the discrete map alongside (dual-number propagation).
"""

import numpy as np

_C = np.sqrt(15.0) / 10.0
_NODES = (0.5 - _C, 0.5, 0.5 + _C)

_CHUNK = 256


def _step_exponents(qvals, h, E, derivative):
    """Coefficients (p, n, d) of Omega = p*P + n*N + d*H and their E-derivatives.

    P = [[0,1],[0,0]], N = [[0,0],[1,0]], H = diag(1,-1).
    qvals: tuple of three arrays, the potential at the Gauss nodes of every step.
    """
    q1, q2, q3 = qvals
    a = h
    b = h * (q2 - E)
    d2 = (np.sqrt(15.0) * h / 3.0) * (q3 - q1)
    d3 = (10.0 * h / 3.0) * (q3 - 2.0 * q2 + q1)

    xp = -20.0 * a
    xn = -20.0 * b - d3
    xh = a * d2
    yp = a * a * d2 / 30.0
    yn = d2 * (1.0 - a * b / 30.0)
    yh = -a * d3 / 30.0

    op = a + (xh * yp - xp * yh) / 120.0
    on = b + d3 / 12.0 + (xn * yh - xh * yn) / 120.0
    oh = (xp * yn - xn * yp) / 240.0
    if not derivative:
        return op, on, oh, None

    dxn = 20.0 * h
    dyn = d2 * a * h / 30.0
    dop = np.zeros_like(op)
    don = -h + (dxn * yh - xh * dyn) / 120.0
    doh = (xp * dyn - dxn * yp) / 240.0
    return op, on, oh, (dop, don, doh)


def _cosh_sinhc(q):
    """cosh(sqrt q), sinh(sqrt q)/sqrt q and their q-derivatives (even in sqrt q)."""
    q = np.asarray(q, dtype=complex)
    small = np.abs(q) < 1e-3
    r = np.sqrt(np.where(small, 1.0, q))
    f = np.cosh(np.where(small, 0.0, r))
    g = np.where(small, 1.0, np.sinh(r) / r)
    qs = np.where(small, q, 0.0)
    g_series = 1 + qs / 6 + qs**2 / 120 + qs**3 / 5040 + qs**4 / 362880
    f_series = 1 + qs / 2 + qs**2 / 24 + qs**3 / 720 + qs**4 / 40320
    f = np.where(small, f_series, f)
    g = np.where(small, g_series, g)
    dg_series = 1 / 6 + qs / 60 + qs**2 / 1680 + qs**3 / 90720
    qsafe = np.where(small, 1.0, q)
    dg = np.where(small, dg_series, (f - g) / (2.0 * qsafe))
    return f, g, 0.5 * g, dg


def _step_matrices(op, on, oh, dom):
    q = oh * oh + op * on
    f, g, df, dg = _cosh_sinhc(q)
    U = np.empty(np.shape(q) + (2, 2), dtype=complex)
    U[..., 0, 0] = f + g * oh
    U[..., 0, 1] = g * op
    U[..., 1, 0] = g * on
    U[..., 1, 1] = f - g * oh
    if dom is None:
        return U, None
    dop, don, doh = dom
    dq = 2.0 * oh * doh + dop * on + op * don
    dU = np.empty_like(U)
    dU[..., 0, 0] = df * dq + dg * dq * oh + g * doh
    dU[..., 0, 1] = dg * dq * op + g * dop
    dU[..., 1, 0] = dg * dq * on + g * don
    dU[..., 1, 1] = df * dq - dg * dq * oh - g * doh
    return U, dU


def _tree_product(U, dU):
    """Ordered product U[n-1] ... U[0] along axis 0, with its dual part."""
    while U.shape[0] > 1:
        n = U.shape[0]
        m = n // 2
        lo, hi = U[0 : 2 * m : 2], U[1 : 2 * m : 2]
        P = hi @ lo
        if dU is not None:
            dlo, dhi = dU[0 : 2 * m : 2], dU[1 : 2 * m : 2]
            dP = dhi @ lo + hi @ dlo
        if n % 2:
            P = np.concatenate([P, U[-1:]], axis=0)
            if dU is not None:
                dP = np.concatenate([dP, dU[-1:]], axis=0)
        U = P
        dU = dP if dU is not None else None
    return U[0], (dU[0] if dU is not None else None)


def propagate(q, x0, x1, n_steps, E, derivative=False, store=False):
    """Fundamental matrix of -y'' + q(x) y = E y from x0 to x1.

    Columns of Y are the solutions with (y, y') = (1, 0) and (0, 1) at x0; rows
    are (value, derivative).  q(x) receives an array of shape (m, 1, ...) and
    must broadcast against E.

    Returns (Y, dY/dE or None) for store=False, else arrays over the n_steps + 1
    grid points (leading axis) in the same layout.
    """
    E = np.asarray(E, dtype=complex)
    h = (x1 - x0) / n_steps
    starts = x0 + h * np.arange(n_steps)
    expand = (slice(None),) + (None,) * E.ndim

    def chunk_mats(sl):
        xs = starts[sl][expand]
        qvals = tuple(np.asarray(q(xs + c * h), dtype=complex) + np.zeros(xs.shape) for c in _NODES)
        op, on, oh, dom = _step_exponents(qvals, h, E, derivative)
        return _step_matrices(op, on, oh, dom)

    probe = np.asarray(q(np.array([x0])[expand]))
    batch = np.broadcast_shapes(E.shape, probe.shape[1:] if probe.ndim else ())
    Y = np.broadcast_to(np.eye(2, dtype=complex), batch + (2, 2)).copy()
    dY = np.zeros_like(Y) if derivative else None

    if store:
        Ys = np.empty((n_steps + 1,) + Y.shape, dtype=complex)
        dYs = np.empty_like(Ys) if derivative else None
        Ys[0] = Y
        if derivative:
            dYs[0] = dY

    for start in range(0, n_steps, _CHUNK):
        sl = slice(start, min(start + _CHUNK, n_steps))
        U, dU = chunk_mats(sl)
        U = np.broadcast_to(U, (U.shape[0],) + batch + (2, 2))
        if dU is not None:
            dU = np.broadcast_to(dU, U.shape)
        if store:
            for j in range(U.shape[0]):
                if derivative:
                    dY = dU[j] @ Y + U[j] @ dY
                Y = U[j] @ Y
                Ys[start + j + 1] = Y
                if derivative:
                    dYs[start + j + 1] = dY
        else:
            P, dP = _tree_product(U, dU)
            if derivative:
                dY = dP @ Y + P @ dY
            Y = P @ Y

    if not np.all(np.isfinite(Y)):
        raise_overflow(E)
    if store:
        return Ys, dYs
    return Y, dY


def raise_overflow(E):
    from .errors import IntegrationError

    bad = np.asarray(E).ravel()
    raise IntegrationError("propagator overflow", energy=complex(bad[0]) if bad.size else None)
