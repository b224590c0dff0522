"""Intrinsic-frame canonicalization of point clouds.

A cloud's intrinsic frame is the eigenvector basis of its covariance matrix
(columns ordered by descending eigenvalue), anchored at the cloud mean.
Eigenvector signs are arbitrary, so every cloud owns 8 sign-resolved frames;
expressing the centered cloud in any of them gives coordinates that do not
change when the input is rotated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .eigen3 import EigenDecomposition, eigen_symmetric3
from .geometry import as_cloud

# sign_code s flips basis column k iff bit k of s is set
SIGN_FLIPS = np.array(
    [[1 - 2 * ((s >> k) & 1) for k in range(3)] for s in range(8)], dtype=np.float64
)


@dataclass(frozen=True)
class IntrinsicFrame:
    basis: np.ndarray  # (3, 3), orthonormal columns, column k pairs with eigenvalue k
    origin: np.ndarray  # (3,), the cloud mean
    sign_code: int  # 0..7


@dataclass(frozen=True)
class FrameSet:
    """All 8 sign-resolved intrinsic frames of one cloud."""

    frames: tuple[IntrinsicFrame, ...]  # ascending sign_code
    eigenvalues: np.ndarray  # (3,), descending
    significance: tuple[float, float]  # (lam2/lam1, lam3/lam2)
    degenerate: bool
    degenerate_pairs: tuple[bool, bool]

    @property
    def base_frame(self) -> IntrinsicFrame:
        return self.frames[0]


def mean(cloud) -> np.ndarray:
    """Component-wise arithmetic mean of the points."""
    return as_cloud(cloud).mean(axis=0)


def covariance(cloud) -> np.ndarray:
    """Covariance of the points about their mean, divisor n."""
    cloud = as_cloud(cloud)
    centered = cloud - cloud.mean(axis=0)
    return centered.T @ centered / cloud.shape[0]


def eigenvalue_ratios(eigenvalues) -> tuple[float, float]:
    """Adjacent eigenvalue ratios (lam2/lam1, lam3/lam2); 1.0 for a 0/0 pair."""
    l1, l2, l3 = (float(v) for v in eigenvalues)
    r21 = l2 / l1 if l1 > 0.0 else 1.0
    r32 = l3 / l2 if l2 > 0.0 else 1.0
    return r21, r32


def _base_sign_basis(vectors: np.ndarray) -> np.ndarray:
    """Fix each column's sign so its largest-magnitude component is positive
    (first index wins ties); makes the frame enumeration reproducible."""
    basis = vectors.copy()
    for k in range(3):
        j = int(np.argmax(np.abs(basis[:, k])))
        if basis[j, k] < 0.0:
            basis[:, k] = -basis[:, k]
    return basis


def frame_set(cloud, decomposition: EigenDecomposition | None = None) -> FrameSet:
    """Enumerate the 8 sign-resolved intrinsic frames of a cloud.

    A degenerate covariance spectrum (near-tied eigenvalues) does not raise;
    the result carries degenerate=True and the caller chooses policy.
    """
    cloud = as_cloud(cloud)
    if cloud.shape[0] < 3:
        raise ValueError("intrinsic frames need at least 3 points")
    origin = cloud.mean(axis=0)
    if decomposition is None:
        decomposition = eigen_symmetric3(covariance(cloud))
    base = _base_sign_basis(decomposition.eigenvectors)
    frames = tuple(
        IntrinsicFrame(basis=base * SIGN_FLIPS[s], origin=origin, sign_code=s)
        for s in range(8)
    )
    return FrameSet(
        frames=frames,
        eigenvalues=decomposition.eigenvalues,
        significance=eigenvalue_ratios(decomposition.eigenvalues),
        degenerate=decomposition.degenerate,
        degenerate_pairs=decomposition.degenerate_pairs,
    )


def express_in_frame(cloud, frame: IntrinsicFrame) -> np.ndarray:
    """Coordinates of the cloud in the frame: p -> basis^T (p - origin)."""
    return (as_cloud(cloud) - frame.origin) @ frame.basis


def canonical_set(cloud, frames: FrameSet | None = None) -> np.ndarray:
    """The cloud expressed in all 8 frames, shape (8, n, 3).

    Index along the first axis is the sign code, so entry s differs from
    entry 0 only by negated coordinate columns (bit k of s flips column k).
    """
    cloud = as_cloud(cloud)
    if frames is None:
        frames = frame_set(cloud)
    base = express_in_frame(cloud, frames.base_frame)
    return base[None, :, :] * SIGN_FLIPS[:, None, :]


def skew_positive_sign_code(canonicals: np.ndarray) -> int:
    """Sign code whose canonical cloud has non-negative third moments.

    A deterministic, rotation-invariant way to pick one frame out of the 8:
    the per-column third moments flip sign with the column, so requiring each
    to be positive selects exactly one sign code (up to sampling-noise ties).
    """
    m3 = np.mean(canonicals[0] ** 3, axis=0)
    code = 0
    for k in range(3):
        if m3[k] < 0.0:
            code |= 1 << k
    return code
