"""Complex differential forms on a periodic grid in C^m.

A form is a dict mapping ``(I, J)`` to a coefficient field, meaning
``sum c_{IJ} dz^I ^ dzbar^J`` with ``I`` and ``J`` strictly increasing tuples of
0-based complex coordinate indices. Coefficient fields all share the grid shape.
"""

import itertools
import math

import numpy as np


def _perm_sign(seq):
    """Sign of the permutation sorting ``seq``; 0 if an index repeats."""
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for a, b in itertools.combinations(range(len(seq)), 2):
        if seq[a] > seq[b]:
            sign = -sign
    return sign


def _accumulate(out, key, value):
    if key in out:
        out[key] = out[key] + value
    else:
        out[key] = value


def add(*forms):
    out = {}
    for form in forms:
        for key, c in form.items():
            _accumulate(out, key, c)
    return out


def scale(form, factor):
    return {key: factor * c for key, c in form.items()}


def wedge(a, b):
    out = {}
    for (i1, j1), c1 in a.items():
        for (i2, j2), c2 in b.items():
            si = _perm_sign(i1 + i2)
            sj = _perm_sign(j1 + j2)
            if si == 0 or sj == 0:
                continue
            sign = si * sj * (-1) ** (len(j1) * len(i2))
            _accumulate(out, (tuple(sorted(i1 + i2)), tuple(sorted(j1 + j2))), sign * (c1 * c2))
    return out


def power(form, k):
    """k-th wedge power; the 0-th power is the constant function 1."""
    out = {((), ()): np.ones(1)}
    for _ in range(k):
        out = wedge(out, form)
    return out


def del_(form, dz, m):
    """Holomorphic exterior derivative; ``dz(field, alpha)`` is d/dz^alpha."""
    out = {}
    for (i, j), c in form.items():
        if np.ndim(c) == 0 or np.size(c) == 1:
            continue
        for g in range(m):
            if g in i:
                continue
            sign = (-1) ** sum(1 for x in i if x < g)
            _accumulate(out, (tuple(sorted(i + (g,))), j), sign * dz(c, g))
    return out


def delbar(form, dzb, m):
    """Antiholomorphic exterior derivative; ``dzb(field, beta)`` is d/dzbar^beta."""
    out = {}
    for (i, j), c in form.items():
        if np.ndim(c) == 0 or np.size(c) == 1:
            continue
        for d in range(m):
            if d in j:
                continue
            sign = (-1) ** (len(i) + sum(1 for x in j if x < d))
            _accumulate(out, (i, tuple(sorted(j + (d,)))), sign * dzb(c, d))
    return out


def d(form, dz, dzb, m):
    return add(del_(form, dz, m), delbar(form, dzb, m))


def from_11(coeffs):
    """(1,1)-form from coefficients ``coeffs[..., a, b]`` of dz^a ^ dzbar^b."""
    m = coeffs.shape[-1]
    return {((a,), (b,)): coeffs[..., a, b] for a in range(m) for b in range(m)}


def top_density(form, m):
    """Density, against dx^1...dx^2m, of the top-degree part of ``form``.

    Uses z^a = x^{2a-1} + i x^{2a}, so dz^1..dz^m ^ dzbar^1..dzbar^m equals
    (-1)^{m(m-1)/2} (-2i)^m dx^1 ^ ... ^ dx^{2m}.
    """
    key = (tuple(range(m)), tuple(range(m)))
    if key not in form:
        return 0.0
    return form[key] * ((-1) ** (m * (m - 1) // 2) * (-2j) ** m)


def l2_norm(form, shape, cell_volume):
    """Discrete L2 norm using the flat coefficient norm in the dz/dzbar basis."""
    total = 0.0
    for c in form.values():
        total += float(np.sum(np.abs(np.broadcast_to(c, shape)) ** 2))
    return math.sqrt(total * cell_volume)
