"""3D rotation generation and angle metrics.

Point clouds are (n, 3) float64 arrays, one point per row. Rotations are
plain (3, 3) orthogonal matrices with determinant +1.
"""

from __future__ import annotations

import numpy as np

ORTHO_TOL = 1e-8  # input validation; generated matrices are good to ~1e-15


def as_cloud(points) -> np.ndarray:
    """Coerce to an (n, 3) float64 array and validate it."""
    cloud = np.ascontiguousarray(points, dtype=np.float64)
    if cloud.ndim == 1 and cloud.size == 3:
        cloud = cloud.reshape(1, 3)
    if cloud.ndim != 2 or cloud.shape[1] != 3:
        raise ValueError(f"expected an (n, 3) point array, got shape {cloud.shape}")
    if cloud.shape[0] < 1:
        raise ValueError("point cloud must contain at least one point")
    if not np.all(np.isfinite(cloud)):
        raise ValueError("point cloud contains non-finite coordinates")
    return cloud


def is_orthonormal(m: np.ndarray, tol: float = ORTHO_TOL) -> bool:
    m = np.asarray(m, dtype=np.float64)
    if m.shape != (3, 3) or not np.all(np.isfinite(m)):
        return False
    return bool(np.max(np.abs(m.T @ m - np.eye(3))) < tol)


def validate_rotation(r: np.ndarray, tol: float = ORTHO_TOL) -> np.ndarray:
    r = np.asarray(r, dtype=np.float64)
    if not is_orthonormal(r, tol):
        raise ValueError("matrix is not orthonormal")
    if abs(np.linalg.det(r) - 1.0) > tol:
        raise ValueError("matrix is orthonormal but not a proper rotation (det != +1)")
    return r


def random_rotation_so3(rng: np.random.Generator) -> np.ndarray:
    """Draw a rotation uniformly from SO(3).

    Samples a unit quaternion from the 3-sphere (normalized 4D Gaussian,
    exactly Haar-uniform) and converts it to a matrix.
    """
    q = rng.standard_normal(4)
    n = np.linalg.norm(q)
    while n < 1e-12:  # astronomically unlikely; keeps the draw well defined
        q = rng.standard_normal(4)
        n = np.linalg.norm(q)
    w, x, y, z = q / n
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def azimuthal_rotation(theta: float) -> np.ndarray:
    """Rotation about the z-axis by theta radians."""
    theta = float(theta)
    if not np.isfinite(theta):
        raise ValueError("theta must be finite")
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def apply_rotation(rotation: np.ndarray, cloud: np.ndarray) -> np.ndarray:
    """Rotate every point: p -> R p. Point order is preserved."""
    r = validate_rotation(rotation)
    return as_cloud(cloud) @ r.T


def rotation_angle_between(a: np.ndarray, b: np.ndarray, return_reflection: bool = False):
    """Geodesic angle between two orthonormal bases, in radians.

    For a proper relative transform M = a^T b this is arccos((tr M - 1) / 2).
    When M is improper (det -1, i.e. the bases differ by a reflection) the
    angle of the closest proper rotation, arccos((tr M + 1) / 2), is returned
    instead. With return_reflection=True the result is (angle, reflected).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    for m in (a, b):
        if not is_orthonormal(m):
            raise ValueError("rotation_angle_between requires orthonormal matrices")
    rel = a.T @ b
    reflected = np.linalg.det(rel) < 0.0
    trace = np.trace(rel)
    if reflected:
        cos_angle = (trace + 1.0) / 2.0
    else:
        cos_angle = (trace - 1.0) / 2.0
    angle = float(np.arccos(np.clip(cos_angle, -1.0, 1.0)))
    if return_reflection:
        return angle, bool(reflected)
    return angle
