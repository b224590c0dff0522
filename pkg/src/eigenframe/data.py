"""Dataset plumbing: normalization, synthetic labeled shapes, manifest IO."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import mesh as meshlib
from .geometry import as_cloud

SHAPE_KINDS = ("box", "ellipsoid", "cylinder", "l_bracket", "wedge")


def normalize_unit_cube(cloud) -> np.ndarray:
    """Center the cloud on the origin and scale it into [-1, 1]^3.

    Centering happens first; the uniform scale 1/max|coordinate| then leaves
    the centroid at the origin and puts at least one coordinate on the cube
    boundary.
    """
    cloud = as_cloud(cloud)
    centered = cloud - cloud.mean(axis=0)
    extent = np.max(np.abs(centered))
    if extent < 1e-300:
        raise ValueError("cannot normalize a cloud of identical points")
    return centered / extent


@dataclass(frozen=True)
class ShapeSpec:
    """One synthetic class: a primitive kind plus its instance randomness.

    dims are interpreted per kind (box extents; ellipsoid semi-axes;
    cylinder x/y radii and height; l_bracket leg/thickness/depth; wedge
    base legs and height). Each instance is scaled per-axis by a factor
    drawn uniformly from scale_range, then jittered with Gaussian noise.
    """

    kind: str
    dims: tuple[float, ...]
    scale_range: tuple[float, float] = (0.9, 1.1)
    jitter_sigma: float = 0.01

    def __post_init__(self):
        if self.kind not in SHAPE_KINDS:
            raise ValueError(f"unknown shape kind {self.kind!r}")
        if any(d <= 0 for d in self.dims):
            raise ValueError("shape dims must be positive")
        lo, hi = self.scale_range
        if not (0 < lo <= hi):
            raise ValueError("scale_range must be positive and ordered")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be >= 0")

    def build_mesh(self) -> meshlib.TriangleMesh:
        d = self.dims
        if self.kind == "box":
            return meshlib.box_mesh(d)
        if self.kind == "ellipsoid":
            return meshlib.ellipsoid_mesh(d)
        if self.kind == "cylinder":
            return meshlib.cylinder_mesh((d[0], d[1]), d[2])
        if self.kind == "l_bracket":
            return meshlib.l_bracket_mesh(d[0], d[1], d[2])
        return meshlib.wedge_mesh((d[0], d[1]), d[2])


def default_shape_specs() -> list[ShapeSpec]:
    """Five classes with well-separated principal-moment signatures."""
    return [
        ShapeSpec("box", (3.0, 2.0, 1.0)),
        ShapeSpec("ellipsoid", (1.5, 0.9, 0.5)),
        ShapeSpec("cylinder", (0.7, 0.45, 3.6)),
        ShapeSpec("l_bracket", (2.0, 0.6, 1.0)),
        ShapeSpec("wedge", (2.4, 1.2, 0.8)),
    ]


@dataclass(frozen=True)
class LabeledCloud:
    cloud: np.ndarray  # (n, 3)
    label: int
    id: str


def make_instance(spec: ShapeSpec, n_points: int, rng: np.random.Generator) -> np.ndarray:
    """Sample one normalized instance of a shape class."""
    scales = rng.uniform(spec.scale_range[0], spec.scale_range[1], size=3)
    scaled = spec.build_mesh().scaled(scales)
    cloud = meshlib.sample_surface(scaled, n_points, rng)
    if spec.jitter_sigma > 0:
        cloud = cloud + rng.normal(0.0, spec.jitter_sigma, size=cloud.shape)
    return normalize_unit_cube(cloud)


def synthetic_dataset(
    specs: list[ShapeSpec],
    per_class: int,
    points_per_cloud: int,
    seed: int,
) -> list[LabeledCloud]:
    """Generate per_class instances of every spec, deterministically.

    Each instance draws from its own child seed, so the output is identical
    no matter how generation is parallelized.
    """
    if len(specs) < 2:
        raise ValueError("need at least 2 classes")
    children = np.random.SeedSequence(seed).spawn(len(specs) * per_class)
    dataset = []
    for label, spec in enumerate(specs):
        for i in range(per_class):
            rng = np.random.default_rng(children[label * per_class + i])
            cloud = make_instance(spec, points_per_cloud, rng)
            dataset.append(
                LabeledCloud(cloud=cloud, label=label, id=f"{spec.kind}-{label}-{i:04d}")
            )
    return dataset


# ---------------------------------------------------------------------------
# interchange formats
# ---------------------------------------------------------------------------


def save_xyz(path, cloud) -> None:
    np.savetxt(path, as_cloud(cloud), fmt="%.17g")


def load_xyz(path) -> np.ndarray:
    return as_cloud(np.loadtxt(path, dtype=np.float64, ndmin=2))


def save_manifest(path, dataset: list[LabeledCloud]) -> None:
    """JSON-lines manifest, one record per cloud with inline points."""
    with open(path, "w", encoding="utf-8") as fh:
        for item in dataset:
            record = {
                "id": item.id,
                "label": int(item.label),
                "points": np.round(item.cloud, 12).tolist(),
            }
            fh.write(json.dumps(record) + "\n")


def load_manifest(path) -> list[LabeledCloud]:
    """Read a JSON-lines manifest; records carry inline points or a path to
    an xyz file (resolved relative to the manifest)."""
    base = os.path.dirname(os.path.abspath(path))
    dataset = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                record = json.loads(raw)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{ln}: invalid JSON ({exc.msg})") from None
            if "points" in record:
                cloud = as_cloud(np.asarray(record["points"], dtype=np.float64))
            elif "path" in record:
                cloud = load_xyz(os.path.join(base, record["path"]))
            else:
                raise ValueError(f"{path}:{ln}: record has neither points nor path")
            dataset.append(
                LabeledCloud(cloud=cloud, label=int(record["label"]), id=str(record["id"]))
            )
    if not dataset:
        raise ValueError(f"{path}: empty manifest")
    return dataset
