"""Symmetric 3x3 eigendecomposition with descending eigenvalues.

Backed by an analytic (trigonometric) solver with one inverse-iteration
refinement step per eigenvector. Two interchangeable implementations exist:
numba-compiled scalar kernels and a vectorized numpy path; see _backend.
"""

from __future__ import annotations

import timeit
from dataclasses import dataclass

import numpy as np

from . import _backend, _eigen3_numpy

if _backend.USE_NUMBA:
    from . import _eigen3_numba

    _batch_kernel = _eigen3_numba.eig3_batch
else:
    _batch_kernel = _eigen3_numpy.eig3_batch

# ratio above which two adjacent eigenvalues count as tied
DEGENERACY_RATIO = 1.0 - 1e-6


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues (descending) and matching unit eigenvector columns."""

    eigenvalues: np.ndarray  # (3,)
    eigenvectors: np.ndarray  # (3, 3), column k pairs with eigenvalue k
    degenerate_pairs: tuple[bool, bool]  # adjacent-pair near-ties (0,1), (1,2)

    @property
    def degenerate(self) -> bool:
        return self.degenerate_pairs[0] or self.degenerate_pairs[1]


def as_sym_matrix3(m) -> np.ndarray:
    """Validate and symmetrize a 3x3 matrix (averages the off-diagonal)."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3):
        raise ValueError(f"expected a (3, 3) matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError("matrix contains non-finite entries")
    if np.max(np.abs(m - m.T)) > 1e-8 * max(1.0, np.max(np.abs(m))):
        raise ValueError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def eigen_symmetric3(m) -> EigenDecomposition:
    """Decompose one symmetric 3x3 matrix."""
    m = as_sym_matrix3(m)
    w, v, deg = _batch_kernel(m[None, :, :])
    return EigenDecomposition(w[0], v[0], (bool(deg[0, 0]), bool(deg[0, 1])))


def eigen_symmetric3_batch(ms) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Decompose a stack of symmetric matrices.

    Returns (eigenvalues (n, 3), eigenvector columns (n, 3, 3), degenerate
    flags (n, 2)).
    """
    ms = np.ascontiguousarray(ms, dtype=np.float64)
    if ms.ndim != 3 or ms.shape[1:] != (3, 3):
        raise ValueError(f"expected an (n, 3, 3) stack, got shape {ms.shape}")
    if not np.all(np.isfinite(ms)):
        raise ValueError("matrix stack contains non-finite entries")
    return _batch_kernel(ms)


def run_eigen_benchmark(n: int = 10000, repeats: int = 5, seed: int = 0) -> dict:
    """Time the numba and numpy eigensolver paths on the same matrix stack.

    Returns per-path best-of-`repeats` wall times in seconds. The numba entry
    is None when numba is unavailable or disabled.
    """
    rng = np.random.default_rng(seed)
    g = rng.standard_normal((n, 3, 3))
    ms = np.ascontiguousarray(g @ np.swapaxes(g, 1, 2) / 3.0)

    results = {
        "n": n,
        "repeats": repeats,
        "backend_active": _backend.backend_name(),
        "numpy_seconds": None,
        "numba_seconds": None,
    }
    results["numpy_seconds"] = min(
        timeit.repeat(lambda: _eigen3_numpy.eig3_batch(ms), number=1, repeat=repeats)
    )
    if _backend.USE_NUMBA:
        from . import _eigen3_numba

        _eigen3_numba.eig3_batch(ms[:2])  # trigger compilation outside timing
        results["numba_seconds"] = min(
            timeit.repeat(lambda: _eigen3_numba.eig3_batch(ms), number=1, repeat=repeats)
        )

    wn, vn, _ = _eigen3_numpy.eig3_batch(ms)
    recon = np.einsum("nij,nj,nkj->nik", vn, wn, vn)
    results["numpy_max_reconstruction_error"] = float(np.max(np.abs(recon - ms)))
    if _backend.USE_NUMBA:
        wb, vb, _ = _eigen3_numba.eig3_batch(ms)
        results["max_eigenvalue_disagreement"] = float(np.max(np.abs(wb - wn)))
    return results
