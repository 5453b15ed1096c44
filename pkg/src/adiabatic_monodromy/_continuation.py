"""Analytic continuation of an arccos-type multivalued function along a polyline.

The tracked function f satisfies cos f(z) = c(z) for a single-valued c, so at
every node the candidates are +-arccos(c) + 2 pi m.  Nodes are refined until each
step moves by less than ``jump`` and the chosen candidate is unambiguous.
"""

import numpy as np

from .errors import ContinuationError

JUMP = 0.2


def _candidates_nearest(a, target):
    best = None
    second = None
    for s in (1.0, -1.0):
        base = s * a
        m = np.round((target - base).real / (2 * np.pi))
        for dm in (-1, 0, 1):
            val = base + 2 * np.pi * (m + dm)
            d = abs(val - target)
            if best is None or d < best[0]:
                second = best
                best = (d, val)
            elif second is None or d < second[0]:
                second = (d, val)
    return best[1], second[1]


def polyline_nodes(vertices, spacing):
    vertices = np.asarray(vertices, dtype=complex)
    out = [vertices[:1]]
    for a, b in zip(vertices[:-1], vertices[1:]):
        n = max(2, int(np.ceil(abs(b - a) / spacing)))
        out.append(a + (b - a) * np.arange(1, n + 1) / n)
    return np.concatenate(out)


def continue_arccos(cos_of, vertices, start_value, spacing=0.05, jump=JUMP,
                    min_step=1e-13, return_nodes=False):
    """Continue f with cos f = cos_of(z) along the polyline through ``vertices``.

    cos_of maps an array of complex points to the array of cosines.  Returns the
    values at the refined nodes (and the nodes when ``return_nodes``).
    """
    nodes = list(polyline_nodes(vertices, spacing))
    cvals = list(np.asarray(cos_of(np.asarray(nodes)), dtype=complex))
    values = [complex(start_value)]
    # the start value must be a root of cos f = c at the first node
    if abs(np.cos(values[0]) - cvals[0]) > 1e-6 * max(1.0, abs(cvals[0])):
        raise ContinuationError(
            f"start value {start_value} inconsistent with cos = {cvals[0]} at {nodes[0]}")
    j = 1
    while j < len(nodes):
        prev = values[-1]
        if len(values) >= 2:
            z0, z1, z2 = nodes[j - 2], nodes[j - 1], nodes[j]
            ratio = (z2 - z1) / (z1 - z0) if z1 != z0 else 0.0
            pred = prev + (prev - values[-2]) * ratio
        else:
            pred = prev
        a = np.arccos(cvals[j])
        val, other = _candidates_nearest(a, pred)
        sep = abs(other - val)
        ok = abs(val - prev) <= jump and abs(val - pred) <= 0.25 * sep
        if ok:
            values.append(val)
            j += 1
            continue
        za, zb = nodes[j - 1], nodes[j]
        if abs(zb - za) < min_step:
            raise ContinuationError(f"refinement limit reached near z={zb}")
        new = za + (zb - za) * np.arange(1, 8) / 8
        newc = np.asarray(cos_of(new), dtype=complex)
        nodes[j:j] = list(new)
        cvals[j:j] = list(newc)
    values = np.array(values)
    if return_nodes:
        return values, np.array(nodes)
    return values
