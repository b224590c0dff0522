"""Scalar analytic 3x3 symmetric eigensolver kernels.

Compiled with numba when available; the decorators degrade to no-ops so the
module still imports (and stays testable) without it. The vectorized numpy
twin lives in _eigen3_numpy.py and implements the same algorithm:

1. scale the matrix to unit max-magnitude
2. eigenvalues from the trigonometric (Cardano) form of the characteristic
   polynomial
3. eigenvector of the best-separated eigenvalue from cross products of rows
   of (B - lambda I), the remaining pair from the analytic 2x2 problem in the
   orthogonal complement
4. one inverse-iteration refinement step per eigenvector, Rayleigh-quotient
   eigenvalue update, then re-orthonormalization anchored at the isolated
   eigenvector
"""

import math

import numpy as np

from ._backend import USE_NUMBA

if USE_NUMBA:
    from numba import njit
else:

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


_TWO_PI_3 = 2.0943951023931953
_SHIFT = 1e-12  # inverse-iteration offset from the eigenvalue estimate


@njit(cache=True)
def _norm3(x, y, z):
    return math.sqrt(x * x + y * y + z * z)


@njit(cache=True)
def _solve3(m, rhs, out):
    """Pivoted Gaussian elimination; False when a pivot underflows."""
    a = np.empty((3, 4))
    for i in range(3):
        a[i, 0] = m[i, 0]
        a[i, 1] = m[i, 1]
        a[i, 2] = m[i, 2]
        a[i, 3] = rhs[i]
    for col in range(3):
        piv = col
        big = abs(a[col, col])
        for r in range(col + 1, 3):
            mag = abs(a[r, col])
            if mag > big:
                big = mag
                piv = r
        if big < 1e-300:
            return False
        if piv != col:
            for j in range(4):
                tmp = a[col, j]
                a[col, j] = a[piv, j]
                a[piv, j] = tmp
        inv = 1.0 / a[col, col]
        for r in range(col + 1, 3):
            f = a[r, col] * inv
            if f != 0.0:
                for j in range(col, 4):
                    a[r, j] -= f * a[col, j]
    for i in range(2, -1, -1):
        s = a[i, 3]
        for j in range(i + 1, 3):
            s -= a[i, j] * out[j]
        out[i] = s / a[i, i]
    return True


@njit(cache=True)
def _matvec3(b, x, out):
    for i in range(3):
        out[i] = b[i, 0] * x[0] + b[i, 1] * x[1] + b[i, 2] * x[2]


@njit(cache=True)
def _rayleigh(b, x):
    bx0 = b[0, 0] * x[0] + b[0, 1] * x[1] + b[0, 2] * x[2]
    bx1 = b[1, 0] * x[0] + b[1, 1] * x[1] + b[1, 2] * x[2]
    bx2 = b[2, 0] * x[0] + b[2, 1] * x[1] + b[2, 2] * x[2]
    return x[0] * bx0 + x[1] * bx1 + x[2] * bx2


@njit(cache=True)
def _perp_unit(n, out):
    """A unit vector orthogonal to unit vector n."""
    k = 0
    small = abs(n[0])
    if abs(n[1]) < small:
        small = abs(n[1])
        k = 1
    if abs(n[2]) < small:
        k = 2
    t0 = 1.0 if k == 0 else 0.0
    t1 = 1.0 if k == 1 else 0.0
    t2 = 1.0 if k == 2 else 0.0
    d = t0 * n[0] + t1 * n[1] + t2 * n[2]
    out[0] = t0 - d * n[0]
    out[1] = t1 - d * n[1]
    out[2] = t2 - d * n[2]
    nn = _norm3(out[0], out[1], out[2])
    out[0] /= nn
    out[1] /= nn
    out[2] /= nn


@njit(cache=True)
def _extract_eigenvector(b, lam, out):
    """Null direction of (b - lam I) via the largest cross product of rows."""
    m = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            m[i, j] = b[i, j]
        m[i, i] -= lam
    best_n2 = -1.0
    cx = cy = cz = 0.0
    for pair in range(3):
        if pair == 0:
            i, j = 0, 1
        elif pair == 1:
            i, j = 0, 2
        else:
            i, j = 1, 2
        px = m[i, 1] * m[j, 2] - m[i, 2] * m[j, 1]
        py = m[i, 2] * m[j, 0] - m[i, 0] * m[j, 2]
        pz = m[i, 0] * m[j, 1] - m[i, 1] * m[j, 0]
        n2 = px * px + py * py + pz * pz
        if n2 > best_n2:
            best_n2 = n2
            cx, cy, cz = px, py, pz
    if best_n2 > 1e-40:
        n = math.sqrt(best_n2)
        out[0] = cx / n
        out[1] = cy / n
        out[2] = cz / n
        return
    # (b - lam I) is numerically rank <= 1: its largest row is normal to the
    # eigen-subspace, any perpendicular direction works
    best_r2 = -1.0
    ri = 0
    for i in range(3):
        r2 = m[i, 0] ** 2 + m[i, 1] ** 2 + m[i, 2] ** 2
        if r2 > best_r2:
            best_r2 = r2
            ri = i
    if best_r2 > 1e-40:
        nrm = math.sqrt(best_r2)
        n = np.empty(3)
        n[0] = m[ri, 0] / nrm
        n[1] = m[ri, 1] / nrm
        n[2] = m[ri, 2] / nrm
        _perp_unit(n, out)
        return
    out[0] = 1.0
    out[1] = 0.0
    out[2] = 0.0


@njit(cache=True)
def _eig3_normalized(b, w, vec):
    """Eigendecomposition of a unit-scaled symmetric matrix.

    w descending, vec rows are the matching unit eigenvectors.
    """
    q = (b[0, 0] + b[1, 1] + b[2, 2]) / 3.0
    p1 = b[0, 1] ** 2 + b[0, 2] ** 2 + b[1, 2] ** 2
    d0 = b[0, 0] - q
    d1 = b[1, 1] - q
    d2 = b[2, 2] - q
    p2 = d0 * d0 + d1 * d1 + d2 * d2 + 2.0 * p1
    if p2 <= 1e-28:
        for k in range(3):
            w[k] = q
            for j in range(3):
                vec[k, j] = 1.0 if j == k else 0.0
        return
    p = math.sqrt(p2 / 6.0)
    c00 = d0 / p
    c11 = d1 / p
    c22 = d2 / p
    c01 = b[0, 1] / p
    c02 = b[0, 2] / p
    c12 = b[1, 2] / p
    half_det = 0.5 * (
        c00 * (c11 * c22 - c12 * c12)
        - c01 * (c01 * c22 - c12 * c02)
        + c02 * (c01 * c12 - c11 * c02)
    )
    if half_det < -1.0:
        half_det = -1.0
    elif half_det > 1.0:
        half_det = 1.0
    phi = math.acos(half_det) / 3.0
    w_hi = q + 2.0 * p * math.cos(phi)
    w_lo = q + 2.0 * p * math.cos(phi + _TWO_PI_3)
    w_mid = 3.0 * q - w_hi - w_lo

    iso_first = (w_hi - w_mid) >= (w_mid - w_lo)
    lam_iso = w_hi if iso_first else w_lo
    u = np.empty(3)
    _extract_eigenvector(b, lam_iso, u)

    # analytic 2x2 eigenproblem in the complement of u
    t1 = np.empty(3)
    _perp_unit(u, t1)
    t2 = np.empty(3)
    t2[0] = u[1] * t1[2] - u[2] * t1[1]
    t2[1] = u[2] * t1[0] - u[0] * t1[2]
    t2[2] = u[0] * t1[1] - u[1] * t1[0]
    bt1 = np.empty(3)
    bt2 = np.empty(3)
    _matvec3(b, t1, bt1)
    _matvec3(b, t2, bt2)
    g00 = t1[0] * bt1[0] + t1[1] * bt1[1] + t1[2] * bt1[2]
    g01 = t1[0] * bt2[0] + t1[1] * bt2[1] + t1[2] * bt2[2]
    g11 = t2[0] * bt2[0] + t2[1] * bt2[1] + t2[2] * bt2[2]
    theta = 0.5 * math.atan2(2.0 * g01, g00 - g11)
    ct = math.cos(theta)
    st = math.sin(theta)
    mu_a = g00 * ct * ct + 2.0 * g01 * ct * st + g11 * st * st
    mu_b = g00 * st * st - 2.0 * g01 * ct * st + g11 * ct * ct
    va = np.empty(3)
    vb = np.empty(3)
    for j in range(3):
        va[j] = ct * t1[j] + st * t2[j]
        vb[j] = -st * t1[j] + ct * t2[j]
    if mu_a < mu_b:
        mu_a, mu_b = mu_b, mu_a
        va, vb = vb, va

    if iso_first:
        w[0] = lam_iso
        w[1] = mu_a
        w[2] = mu_b
        for j in range(3):
            vec[0, j] = u[j]
            vec[1, j] = va[j]
            vec[2, j] = vb[j]
        iso = 0
    else:
        w[0] = mu_a
        w[1] = mu_b
        w[2] = lam_iso
        for j in range(3):
            vec[0, j] = va[j]
            vec[1, j] = vb[j]
            vec[2, j] = u[j]
        iso = 2

    # one inverse-iteration step per eigenvector, then Rayleigh update
    m = np.empty((3, 3))
    x = np.empty(3)
    for k in range(3):
        shift = w[k] + _SHIFT
        for i in range(3):
            for j in range(3):
                m[i, j] = b[i, j]
            m[i, i] -= shift
        if _solve3(m, vec[k], x):
            nx = _norm3(x[0], x[1], x[2])
            if nx > 1e-300 and math.isfinite(nx):
                for j in range(3):
                    vec[k, j] = x[j] / nx
        w[k] = _rayleigh(b, vec[k])

    # re-orthonormalize anchored at the isolated eigenvector so that a
    # collapsed near-degenerate pair falls back inside its own subspace
    mid = 1
    other = 2 if iso == 0 else 0
    na = _norm3(vec[iso, 0], vec[iso, 1], vec[iso, 2])
    for j in range(3):
        vec[iso, j] /= na
    d = (
        vec[mid, 0] * vec[iso, 0]
        + vec[mid, 1] * vec[iso, 1]
        + vec[mid, 2] * vec[iso, 2]
    )
    for j in range(3):
        vec[mid, j] -= d * vec[iso, j]
    nm = _norm3(vec[mid, 0], vec[mid, 1], vec[mid, 2])
    if nm < 1e-12:
        tmp = np.empty(3)
        _perp_unit(vec[iso], tmp)
        for j in range(3):
            vec[mid, j] = tmp[j]
    else:
        for j in range(3):
            vec[mid, j] /= nm
    vec[other, 0] = vec[iso, 1] * vec[mid, 2] - vec[iso, 2] * vec[mid, 1]
    vec[other, 1] = vec[iso, 2] * vec[mid, 0] - vec[iso, 0] * vec[mid, 2]
    vec[other, 2] = vec[iso, 0] * vec[mid, 1] - vec[iso, 1] * vec[mid, 0]

    for k in range(3):
        w[k] = _rayleigh(b, vec[k])

    # descending order (stable 3-element sort)
    for a in range(2):
        for k in range(2 - a):
            if w[k] < w[k + 1]:
                w[k], w[k + 1] = w[k + 1], w[k]
                for j in range(3):
                    vec[k, j], vec[k + 1, j] = vec[k + 1, j], vec[k, j]


@njit(cache=True)
def eig3_batch(ms):
    """Decompose a (n, 3, 3) stack of symmetric matrices.

    Returns (eigenvalues (n, 3) descending, eigenvectors (n, 3, 3) with
    columns matching the eigenvalues, degenerate flags (n, 2)).
    """
    n = ms.shape[0]
    w_out = np.empty((n, 3))
    v_out = np.empty((n, 3, 3))
    deg_out = np.zeros((n, 2), dtype=np.bool_)
    b = np.empty((3, 3))
    w = np.empty(3)
    vec = np.empty((3, 3))
    for idx in range(n):
        amax = 0.0
        for i in range(3):
            for j in range(3):
                mag = abs(ms[idx, i, j])
                if mag > amax:
                    amax = mag
        if amax == 0.0:
            for k in range(3):
                w_out[idx, k] = 0.0
                for j in range(3):
                    v_out[idx, j, k] = 1.0 if j == k else 0.0
            deg_out[idx, 0] = True
            deg_out[idx, 1] = True
            continue
        for i in range(3):
            for j in range(3):
                b[i, j] = ms[idx, i, j] / amax
        _eig3_normalized(b, w, vec)
        for k in range(3):
            w[k] *= amax
        floor = 1e-12 * max(1.0, w[0])
        for k in range(3):
            if w[k] < 0.0 and w[k] >= -floor:
                w[k] = 0.0
        eps = 1e-12 * max(1.0, w[0])
        for k in range(2):
            deg_out[idx, k] = (w[k + 1] + eps) / (w[k] + eps) > 1.0 - 1e-6
        for k in range(3):
            w_out[idx, k] = w[k]
            for j in range(3):
                v_out[idx, j, k] = vec[k, j]
    return w_out, v_out, deg_out
