"""Triangle meshes: OFF parsing, area-uniform surface sampling, primitives.

Handles both standard OFF and the ModelNet40 variant where the vertex/face
counts are fused onto the header line ("OFF490 518 0").
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class MeshError(ValueError):
    """Malformed mesh data; carries the offending 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


@dataclass(frozen=True)
class TriangleMesh:
    vertices: np.ndarray  # (nv, 3) float64
    faces: np.ndarray  # (nf, 3) int64, indices into vertices

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64)
        f = np.asarray(self.faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or not np.all(np.isfinite(v)):
            raise MeshError("vertices must be a finite (nv, 3) array")
        if f.ndim != 2 or f.shape[1] != 3 or f.shape[0] < 1:
            raise MeshError("faces must be an (nf, 3) index array with nf >= 1")
        if f.size and (f.min() < 0 or f.max() >= v.shape[0]):
            raise MeshError("face index out of range")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    def face_areas(self) -> np.ndarray:
        a = self.vertices[self.faces[:, 0]]
        b = self.vertices[self.faces[:, 1]]
        c = self.vertices[self.faces[:, 2]]
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def scaled(self, factors) -> "TriangleMesh":
        factors = np.asarray(factors, dtype=np.float64).reshape(1, 3)
        return TriangleMesh(self.vertices * factors, self.faces)


def _content_lines(text: str):
    """Yield (line_number, tokens) for non-empty, non-comment lines."""
    for ln, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.split("#", 1)[0].strip()
        if stripped:
            yield ln, stripped.split()


def parse_off(text: str) -> TriangleMesh:
    """Parse OFF text into a triangle mesh.

    Polygons with more than 3 vertices are fan-triangulated; zero-area
    triangles are dropped afterwards.
    """
    lines = _content_lines(text)
    try:
        header_ln, header = next(lines)
    except StopIteration:
        raise MeshError("empty OFF file") from None
    if not header[0].upper().startswith("OFF"):
        raise MeshError("missing OFF header", header_ln)

    # counts either follow the OFF keyword (possibly fused: "OFF490 518 0")
    # or sit on the next line
    fused = header[0][3:]
    count_tokens = ([fused] if fused else []) + header[1:]
    counts_ln = header_ln
    if not count_tokens:
        try:
            counts_ln, count_tokens = next(lines)
        except StopIteration:
            raise MeshError("missing vertex/face counts") from None
    if len(count_tokens) < 2:
        raise MeshError("expected vertex, face and edge counts", counts_ln)
    try:
        n_vertices, n_faces = int(count_tokens[0]), int(count_tokens[1])
    except ValueError:
        raise MeshError("counts are not integers", counts_ln) from None
    if n_vertices < 1 or n_faces < 1:
        raise MeshError("vertex and face counts must be positive", counts_ln)

    vertices = np.empty((n_vertices, 3))
    for i in range(n_vertices):
        try:
            ln, tokens = next(lines)
        except StopIteration:
            raise MeshError(f"expected {n_vertices} vertices, found {i}") from None
        if len(tokens) < 3:
            raise MeshError("vertex needs 3 coordinates", ln)
        try:
            vertices[i] = [float(t) for t in tokens[:3]]
        except ValueError:
            raise MeshError("non-numeric vertex coordinate", ln) from None
    if not np.all(np.isfinite(vertices)):
        raise MeshError("non-finite vertex coordinate")

    triangles: list[tuple[int, int, int]] = []
    for i in range(n_faces):
        try:
            ln, tokens = next(lines)
        except StopIteration:
            raise MeshError(f"expected {n_faces} faces, found {i}") from None
        try:
            k = int(tokens[0])
        except ValueError:
            raise MeshError("non-numeric face size", ln) from None
        if k < 3:
            raise MeshError(f"face with {k} vertices", ln)
        if len(tokens) < 1 + k:
            raise MeshError(f"face lists {len(tokens) - 1} of {k} indices", ln)
        try:
            idx = [int(t) for t in tokens[1 : 1 + k]]
        except ValueError:
            raise MeshError("non-numeric face index", ln) from None
        for j in idx:
            if j < 0 or j >= n_vertices:
                raise MeshError(f"face index {j} out of range 0..{n_vertices - 1}", ln)
        for a in range(1, k - 1):  # fan triangulation
            triangles.append((idx[0], idx[a], idx[a + 1]))

    faces = np.array(triangles, dtype=np.int64)
    mesh = TriangleMesh(vertices, faces)
    keep = mesh.face_areas() > 0.0
    if not np.any(keep):
        raise MeshError("all faces are degenerate")
    return TriangleMesh(vertices, faces[keep])


def serialize_off(mesh: TriangleMesh) -> str:
    """Standard split-header OFF text; parse(serialize(m)) reproduces m."""
    out = ["OFF", f"{mesh.vertices.shape[0]} {mesh.faces.shape[0]} 0"]
    out.extend(f"{v[0]:.17g} {v[1]:.17g} {v[2]:.17g}" for v in mesh.vertices)
    out.extend(f"3 {f[0]} {f[1]} {f[2]}" for f in mesh.faces)
    return "\n".join(out) + "\n"


def load_off(path) -> TriangleMesh:
    with open(path, encoding="utf-8", errors="replace") as fh:
        return parse_off(fh.read())


def sample_surface(mesh: TriangleMesh, n: int, rng: np.random.Generator) -> np.ndarray:
    """Sample n points uniformly with respect to face area.

    Triangles are chosen with probability proportional to area; within the
    winning triangle the point is placed by square-root barycentric sampling.
    """
    if n < 1:
        raise ValueError("need at least one sample")
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0.0:
        raise MeshError("mesh has zero total surface area")
    chosen = rng.choice(areas.size, size=n, p=areas / total)
    a = mesh.vertices[mesh.faces[chosen, 0]]
    b = mesh.vertices[mesh.faces[chosen, 1]]
    c = mesh.vertices[mesh.faces[chosen, 2]]
    r1 = np.sqrt(rng.random(n))[:, None]
    r2 = rng.random(n)[:, None]
    return (1.0 - r1) * a + r1 * (1.0 - r2) * b + r1 * r2 * c


# ---------------------------------------------------------------------------
# primitive meshes for the synthetic dataset and the stability diagnostics
# ---------------------------------------------------------------------------


def box_mesh(extents=(2.0, 2.0, 2.0)) -> TriangleMesh:
    """Axis-aligned box centered at the origin; extents are full side lengths."""
    hx, hy, hz = (e / 2.0 for e in extents)
    corners = np.array(
        [[sx, sy, sz] for sx in (-hx, hx) for sy in (-hy, hy) for sz in (-hz, hz)]
    )
    quads = [
        (0, 1, 3, 2),  # x = -hx
        (4, 6, 7, 5),  # x = +hx
        (0, 4, 5, 1),  # y = -hy
        (2, 3, 7, 6),  # y = +hy
        (0, 2, 6, 4),  # z = -hz
        (1, 5, 7, 3),  # z = +hz
    ]
    faces = []
    for q in quads:
        faces.append((q[0], q[1], q[2]))
        faces.append((q[0], q[2], q[3]))
    return TriangleMesh(corners, np.array(faces))


def ellipsoid_mesh(semi_axes=(1.0, 1.0, 1.0), rings: int = 16, segments: int = 32) -> TriangleMesh:
    """Latitude/longitude triangulation of an origin-centered ellipsoid."""
    ax, ay, az = semi_axes
    verts = [(0.0, 0.0, az)]
    for i in range(1, rings):
        phi = np.pi * i / rings
        for j in range(segments):
            th = 2.0 * np.pi * j / segments
            verts.append(
                (
                    ax * np.sin(phi) * np.cos(th),
                    ay * np.sin(phi) * np.sin(th),
                    az * np.cos(phi),
                )
            )
    verts.append((0.0, 0.0, -az))
    south = len(verts) - 1

    def ring_at(i, j):
        return 1 + (i - 1) * segments + (j % segments)

    faces = []
    for j in range(segments):
        faces.append((0, ring_at(1, j), ring_at(1, j + 1)))
        faces.append((south, ring_at(rings - 1, j + 1), ring_at(rings - 1, j)))
    for i in range(1, rings - 1):
        for j in range(segments):
            a, b = ring_at(i, j), ring_at(i, j + 1)
            c, d = ring_at(i + 1, j), ring_at(i + 1, j + 1)
            faces.append((a, c, d))
            faces.append((a, d, b))
    return TriangleMesh(np.array(verts), np.array(faces))


def _prism(polygon: np.ndarray, cap_triangles: list[tuple[int, int, int]], depth: float) -> TriangleMesh:
    """Extrude a simple 2D polygon along z into a closed prism."""
    m = polygon.shape[0]
    hz = depth / 2.0
    bottom = np.column_stack([polygon, np.full(m, -hz)])
    top = np.column_stack([polygon, np.full(m, hz)])
    verts = np.vstack([bottom, top])
    faces = []
    for (a, b, c) in cap_triangles:
        faces.append((a, c, b))  # bottom, flipped
        faces.append((m + a, m + b, m + c))  # top
    for j in range(m):
        a, b = j, (j + 1) % m
        faces.append((a, b, m + b))
        faces.append((a, m + b, m + a))
    return TriangleMesh(verts, np.array(faces))


def cylinder_mesh(radii=(1.0, 1.0), height: float = 2.0, segments: int = 48) -> TriangleMesh:
    """Elliptic cylinder along z, with caps."""
    rx, ry = radii
    th = 2.0 * np.pi * np.arange(segments) / segments
    polygon = np.column_stack([rx * np.cos(th), ry * np.sin(th)])
    caps = [(0, j, j + 1) for j in range(1, segments - 1)]
    return _prism(polygon, caps, height)


def l_bracket_mesh(leg: float = 2.0, thickness: float = 0.6, depth: float = 1.0) -> TriangleMesh:
    """L-shaped cross-section extruded along z, centered at the origin."""
    w = h = leg
    t = thickness
    poly = np.array(
        [[0.0, 0.0], [w, 0.0], [w, t], [t, t], [t, h], [0.0, h]]
    )
    poly -= poly.mean(axis=0)
    caps = [(0, 1, 2), (0, 2, 3), (0, 3, 4), (0, 4, 5)]  # fan works: star-shaped from corner
    return _prism(poly, caps, depth)


def wedge_mesh(base=(2.0, 1.0), height: float = 1.0) -> TriangleMesh:
    """Right-triangular prism: legs along x and y, extruded along z."""
    a, b = base
    poly = np.array([[0.0, 0.0], [a, 0.0], [0.0, b]])
    poly -= poly.mean(axis=0)
    return _prism(poly, [(0, 1, 2)], height)
