"""Vectorized pure-numpy twin of the analytic 3x3 eigensolver.

Same algorithm as _eigen3_numba.py, expressed over (n, 3, 3) stacks. Branches
become boolean masks; the inverse-iteration solves go through the stacked
np.linalg.solve with singular members patched out beforehand.
"""

import numpy as np

_TWO_PI_3 = 2.0943951023931953
_SHIFT = 1e-12


def _normalize_rows(x):
    n = np.linalg.norm(x, axis=-1, keepdims=True)
    return x / np.where(n > 0.0, n, 1.0), n[..., 0]


def _perp_unit(n):
    """Row-wise unit vectors orthogonal to the unit rows of n."""
    pick = np.argmin(np.abs(n), axis=-1)
    t = np.eye(3)[pick]
    t = t - np.sum(t * n, axis=-1, keepdims=True) * n
    t, _ = _normalize_rows(t)
    return t


def _extract_eigenvector(m):
    """Null directions of near-singular symmetric matrices m (n, 3, 3)."""
    r0, r1, r2 = m[:, 0, :], m[:, 1, :], m[:, 2, :]
    cands = np.stack(
        [np.cross(r0, r1), np.cross(r0, r2), np.cross(r1, r2)], axis=1
    )
    norms2 = np.sum(cands * cands, axis=-1)
    best = np.argmax(norms2, axis=1)
    take = np.arange(m.shape[0])
    u = cands[take, best]
    n2 = norms2[take, best]
    cross_ok = n2 > 1e-40
    u = u / np.sqrt(np.where(cross_ok, n2, 1.0))[:, None]

    rows2 = np.sum(m * m, axis=-1)
    best_row = np.argmax(rows2, axis=1)
    rn2 = rows2[take, best_row]
    row_ok = rn2 > 1e-40
    normal = m[take, best_row] / np.sqrt(np.where(row_ok, rn2, 1.0))[:, None]
    perp = _perp_unit(normal)

    fallback = np.where(row_ok[:, None], perp, np.array([1.0, 0.0, 0.0]))
    return np.where(cross_ok[:, None], u, fallback)


def eig3_batch(ms):
    """Decompose a (n, 3, 3) stack of symmetric matrices.

    Returns (eigenvalues (n, 3) descending, eigenvectors (n, 3, 3) with
    columns matching the eigenvalues, degenerate flags (n, 2)).
    """
    ms = np.asarray(ms, dtype=np.float64)
    n = ms.shape[0]
    take = np.arange(n)
    eye = np.eye(3)

    amax = np.max(np.abs(ms), axis=(1, 2))
    zero = amax == 0.0
    b = ms / np.where(zero, 1.0, amax)[:, None, None]

    q = np.trace(b, axis1=1, axis2=2) / 3.0
    p1 = b[:, 0, 1] ** 2 + b[:, 0, 2] ** 2 + b[:, 1, 2] ** 2
    d = np.stack([b[:, 0, 0] - q, b[:, 1, 1] - q, b[:, 2, 2] - q], axis=1)
    p2 = np.sum(d * d, axis=1) + 2.0 * p1
    scalarish = p2 <= 1e-28

    p = np.sqrt(np.where(scalarish, 1.0, p2) / 6.0)
    c = (b - q[:, None, None] * eye) / p[:, None, None]
    half_det = 0.5 * np.linalg.det(c)
    phi = np.arccos(np.clip(half_det, -1.0, 1.0)) / 3.0
    w_hi = q + 2.0 * p * np.cos(phi)
    w_lo = q + 2.0 * p * np.cos(phi + _TWO_PI_3)
    w_mid = 3.0 * q - w_hi - w_lo

    iso_first = (w_hi - w_mid) >= (w_mid - w_lo)
    lam_iso = np.where(iso_first, w_hi, w_lo)
    u = _extract_eigenvector(b - lam_iso[:, None, None] * eye)

    t1 = _perp_unit(u)
    t2 = np.cross(u, t1)
    bt1 = np.einsum("nij,nj->ni", b, t1)
    bt2 = np.einsum("nij,nj->ni", b, t2)
    g00 = np.sum(t1 * bt1, axis=1)
    g01 = np.sum(t1 * bt2, axis=1)
    g11 = np.sum(t2 * bt2, axis=1)
    theta = 0.5 * np.arctan2(2.0 * g01, g00 - g11)
    ct, st = np.cos(theta), np.sin(theta)
    mu_a = g00 * ct * ct + 2.0 * g01 * ct * st + g11 * st * st
    mu_b = g00 * st * st - 2.0 * g01 * ct * st + g11 * ct * ct
    va = ct[:, None] * t1 + st[:, None] * t2
    vb = -st[:, None] * t1 + ct[:, None] * t2
    swap = mu_a < mu_b
    mu_a, mu_b = np.where(swap, mu_b, mu_a), np.where(swap, mu_a, mu_b)
    va, vb = (
        np.where(swap[:, None], vb, va),
        np.where(swap[:, None], va, vb),
    )

    mask = iso_first[:, None]
    w = np.stack(
        [
            np.where(iso_first, lam_iso, mu_a),
            np.where(iso_first, mu_a, mu_b),
            np.where(iso_first, mu_b, lam_iso),
        ],
        axis=1,
    )
    vec = np.stack(
        [
            np.where(mask, u, va),
            np.where(mask, va, vb),
            np.where(mask, vb, u),
        ],
        axis=1,
    )

    # one inverse-iteration step per eigenvector, then Rayleigh update
    for k in range(3):
        shift = w[:, k] + _SHIFT
        m = b - shift[:, None, None] * eye
        ok = np.abs(np.linalg.det(m)) > 1e-300
        m[~ok] = eye
        x = np.linalg.solve(m, vec[:, k, :][..., None])[..., 0]
        nx = np.linalg.norm(x, axis=1)
        good = ok & np.all(np.isfinite(x), axis=1) & (nx > 1e-300)
        x = x / np.where(good, nx, 1.0)[:, None]
        vec[:, k, :] = np.where(good[:, None], x, vec[:, k, :])
        w[:, k] = np.einsum("ni,nij,nj->n", vec[:, k], b, vec[:, k])

    # re-orthonormalize anchored at the isolated eigenvector
    iso_idx = np.where(iso_first, 0, 2)
    other_idx = np.where(iso_first, 2, 0)
    anchor, _ = _normalize_rows(vec[take, iso_idx])
    mid = vec[:, 1, :]
    mid = mid - np.sum(mid * anchor, axis=1, keepdims=True) * anchor
    mid_n = np.linalg.norm(mid, axis=1)
    collapsed = mid_n < 1e-12
    mid = np.where(
        collapsed[:, None], _perp_unit(anchor), mid / np.where(collapsed, 1.0, mid_n)[:, None]
    )
    other = np.cross(anchor, mid)
    vec[take, iso_idx] = anchor
    vec[:, 1, :] = mid
    vec[take, other_idx] = other

    w = np.einsum("nki,nij,nkj->nk", vec, b, vec)

    order = np.argsort(-w, axis=1, kind="stable")
    w = np.take_along_axis(w, order, axis=1)
    vec = np.take_along_axis(vec, order[:, :, None], axis=1)

    # scalar and zero matrices short-circuit to the identity basis
    w = np.where(scalarish[:, None], q[:, None], w)
    vec = np.where(scalarish[:, None, None], eye, vec)
    w = w * np.where(zero, 1.0, amax)[:, None]
    w[zero] = 0.0

    floor = 1e-12 * np.maximum(1.0, w[:, 0])
    w = np.where((w < 0.0) & (w >= -floor[:, None]), 0.0, w)

    eps = 1e-12 * np.maximum(1.0, w[:, 0])[:, None]
    deg = (w[:, 1:] + eps) / (w[:, :2] + eps) > 1.0 - 1e-6

    return w, np.swapaxes(vec, 1, 2), deg
