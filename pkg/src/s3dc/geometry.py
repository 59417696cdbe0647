"""Mesh geometry: quadric edge-collapse decimation, surface sampling, normalization."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .mesh_io import TexturedMesh

MIN_TRIANGLES = 4


@dataclass(frozen=True)
class DecimationParams:
    """Decimation control: triangle budget and per-pass error threshold growth."""

    target_triangle_ratio: float
    aggressiveness: float = 7.0

    def __post_init__(self):
        if not 0 < self.target_triangle_ratio <= 1:
            raise DomainError(
                f"target_triangle_ratio must be in (0, 1], got {self.target_triangle_ratio}"
            )


@dataclass(frozen=True)
class PointSet:
    """Points sampled from a mesh surface."""

    points: np.ndarray  # (n, 3) float64
    source_seed: int
    count: int

    def __post_init__(self):
        pts = np.ascontiguousarray(np.asarray(self.points, dtype=np.float64))
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise DomainError(f"points must be (n, 3), got {pts.shape}")
        if len(pts) != self.count:
            raise DomainError("count does not match number of points")
        object.__setattr__(self, "points", pts)
        pts.setflags(write=False)


def normalize_unit_cube(mesh: TexturedMesh) -> TexturedMesh:
    """Uniformly scale and translate so the bounding box fits [0,1]^3 centered.

    The longest axis spans exactly [0, 1]; the others are centered. Aspect
    ratios are preserved.
    """
    if mesh.vertex_count == 0:
        raise DomainError("empty mesh")
    lo = mesh.vertices.min(axis=0)
    extent = mesh.vertices.max(axis=0) - lo
    longest = extent.max()
    if longest <= 0:
        raise DomainError("degenerate mesh: zero extent")
    scale = 1.0 / longest
    offset = (1.0 - extent * scale) / 2.0
    verts = (mesh.vertices - lo) * scale + offset
    return TexturedMesh(
        vertices=verts,
        triangles=mesh.triangles,
        uvs=mesh.uvs,
        uv_indices=mesh.uv_indices,
        normals=mesh.normals,
        texture=mesh.texture,
        texture_format=mesh.texture_format,
        texture_quality=mesh.texture_quality,
    )


def triangle_areas(mesh: TexturedMesh) -> np.ndarray:
    a = mesh.vertices[mesh.triangles[:, 0]]
    b = mesh.vertices[mesh.triangles[:, 1]]
    c = mesh.vertices[mesh.triangles[:, 2]]
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def sample_surface(mesh: TexturedMesh, n: int, seed: int) -> PointSet:
    """Draw ``n`` area-uniform surface points, deterministically for a given seed.

    Triangles are chosen proportionally to area, then a uniform barycentric
    point is drawn inside each.
    """
    if n < 1:
        raise DomainError("sample count must be >= 1")
    if mesh.triangle_count == 0:
        raise DomainError("mesh has no triangles")
    areas = triangle_areas(mesh)
    total = areas.sum()
    if total <= 0:
        raise DomainError("zero-area mesh")
    rng = np.random.default_rng(seed)
    cum = np.cumsum(areas)
    tri_idx = np.searchsorted(cum, rng.random(n) * total, side="right")
    tri_idx = np.minimum(tri_idx, len(areas) - 1)
    a = mesh.vertices[mesh.triangles[tri_idx, 0]]
    b = mesh.vertices[mesh.triangles[tri_idx, 1]]
    c = mesh.vertices[mesh.triangles[tri_idx, 2]]
    r1 = np.sqrt(rng.random((n, 1)))
    r2 = rng.random((n, 1))
    points = (1 - r1) * a + r1 * (1 - r2) * b + r1 * r2 * c
    return PointSet(points=points, source_seed=seed, count=n)


def _plane_quadric(a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    if norm < 1e-30:
        return np.zeros((4, 4))
    n = n / norm
    p = np.array([n[0], n[1], n[2], -float(n @ a)])
    return np.outer(p, p)


def _optimal_position(q: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    a = q[:3, :3]
    if abs(np.linalg.det(a)) < 1e-12:
        return (v1 + v2) / 2.0
    return np.linalg.solve(a, -q[:3, 3])


def _quadric_cost(q: np.ndarray, pos: np.ndarray) -> float:
    h = np.array([pos[0], pos[1], pos[2], 1.0])
    return float(h @ q @ h)


class _DecimationState:
    """Mutable mesh connectivity used during edge collapse."""

    def __init__(self, mesh: TexturedMesh):
        self.verts = mesh.vertices.copy()
        self.faces = mesh.triangles.copy()
        self.face_alive = np.ones(len(self.faces), dtype=bool)
        self.vertex_faces: list[set[int]] = [set() for _ in range(len(self.verts))]
        for fi, tri in enumerate(self.faces):
            for v in tri:
                self.vertex_faces[v].add(fi)
        self.quadrics = np.zeros((len(self.verts), 4, 4))
        for tri in self.faces:
            k = _plane_quadric(*self.verts[tri])
            for v in tri:
                self.quadrics[v] += k
        self.alive_count = len(self.faces)

        # per-corner uv bookkeeping: a vertex used with >1 distinct uv is a seam
        self.uv_of_vertex: np.ndarray | None = None
        self.seam = np.zeros(len(self.verts), dtype=bool)
        if mesh.uvs is not None and mesh.uv_indices is not None:
            self.uv_of_vertex = np.full(len(self.verts), -1, dtype=np.int64)
            for tri, uvi in zip(self.faces, mesh.uv_indices):
                for v, u in zip(tri, uvi):
                    prev = self.uv_of_vertex[v]
                    if prev == -1:
                        self.uv_of_vertex[v] = u
                    elif prev != u and not np.array_equal(mesh.uvs[prev], mesh.uvs[u]):
                        self.seam[v] = True
        self.uv_indices = (
            mesh.uv_indices.copy() if mesh.uv_indices is not None else None
        )

    def neighbors(self, v: int) -> set[int]:
        out: set[int] = set()
        for fi in self.vertex_faces[v]:
            out.update(int(x) for x in self.faces[fi])
        out.discard(v)
        return out

    def edges(self) -> list[tuple[int, int]]:
        seen: set[tuple[int, int]] = set()
        for fi in np.nonzero(self.face_alive)[0]:
            a, b, c = (int(x) for x in self.faces[fi])
            for u, v in ((a, b), (b, c), (a, c)):
                seen.add((u, v) if u < v else (v, u))
        return sorted(seen)

    def collapse_ok(self, v1: int, v2: int, pos: np.ndarray) -> bool:
        if self.seam[v1] or self.seam[v2]:
            return False
        shared = self.vertex_faces[v1] & self.vertex_faces[v2]
        if not shared:
            return False
        # link condition: common neighbors must be exactly the shared faces' apexes
        apexes = set()
        for fi in shared:
            apexes.update(int(x) for x in self.faces[fi])
        apexes -= {v1, v2}
        if self.neighbors(v1) & self.neighbors(v2) != apexes:
            return False
        # reject collapses that flip or squash any surviving face
        for fi in (self.vertex_faces[v1] | self.vertex_faces[v2]) - shared:
            tri = [int(x) for x in self.faces[fi]]
            moved = [v1 if t == v2 else t for t in tri]
            if len(set(moved)) < 3:
                return False
            before = np.cross(
                self.verts[tri[1]] - self.verts[tri[0]],
                self.verts[tri[2]] - self.verts[tri[0]],
            )
            pts = [pos if t == v1 else self.verts[t] for t in moved]
            after = np.cross(pts[1] - pts[0], pts[2] - pts[0])
            if float(before @ after) <= 1e-12 * float(before @ before):
                return False
        return True

    def collapse(self, v1: int, v2: int, pos: np.ndarray) -> None:
        shared = self.vertex_faces[v1] & self.vertex_faces[v2]
        self.verts[v1] = pos
        self.quadrics[v1] = self.quadrics[v1] + self.quadrics[v2]
        for fi in shared:
            self.face_alive[fi] = False
            self.alive_count -= 1
            for v in self.faces[fi]:
                self.vertex_faces[v].discard(fi)
        for fi in list(self.vertex_faces[v2]):
            tri = self.faces[fi]
            where = tri == v2
            tri[where] = v1
            if self.uv_indices is not None:
                self.uv_indices[fi][where] = self.uv_of_vertex[v1]
            self.vertex_faces[v1].add(fi)
        self.vertex_faces[v2] = set()


def decimate(mesh: TexturedMesh, params: DecimationParams) -> TexturedMesh:
    """Reduce triangle count via quadric edge collapse, remapping UVs.

    Runs threshold-growth passes: edges whose quadric cost is under the pass
    threshold collapse to the quadric-optimal position (edge midpoint when the
    quadric system is singular). The lower-index endpoint survives and keeps
    its texture coordinates; vertices with multiple distinct UVs (seams) never
    collapse. Stops when the triangle count reaches
    max(4, ceil(ratio * input count)).
    """
    t_in = mesh.triangle_count
    raw_target = math.ceil(params.target_triangle_ratio * t_in)
    target = max(MIN_TRIANGLES, raw_target)
    if raw_target < MIN_TRIANGLES:
        warnings.warn(
            f"decimation target {raw_target} clamped to {MIN_TRIANGLES} triangles"
        )
    if target >= t_in:
        return mesh

    state = _DecimationState(mesh)
    for iteration in range(120):
        if state.alive_count <= target:
            break
        threshold = 1e-9 * (iteration + 3) ** params.aggressiveness
        for v1, v2 in state.edges():
            if state.alive_count <= target:
                break
            shared = state.vertex_faces[v1] & state.vertex_faces[v2]
            if not shared or state.alive_count - len(shared) < target:
                continue
            q = state.quadrics[v1] + state.quadrics[v2]
            pos = _optimal_position(q, state.verts[v1], state.verts[v2])
            if _quadric_cost(q, pos) >= threshold:
                continue
            if state.collapse_ok(v1, v2, pos):
                state.collapse(v1, v2, pos)
        if state.alive_count <= target:
            break

    # compact surviving geometry
    alive = np.nonzero(state.face_alive)[0]
    faces = state.faces[alive]
    used = np.unique(faces)
    remap = np.full(len(state.verts), -1, dtype=np.int64)
    remap[used] = np.arange(len(used))
    new_uvs = None
    new_uv_indices = None
    if mesh.uvs is not None:
        if mesh.uv_indices is None:
            new_uvs = mesh.uvs[used]
        else:
            uv_used = np.unique(state.uv_indices[alive])
            uv_remap = np.full(len(mesh.uvs), -1, dtype=np.int64)
            uv_remap[uv_used] = np.arange(len(uv_used))
            new_uvs = mesh.uvs[uv_used]
            new_uv_indices = uv_remap[state.uv_indices[alive]]
    return TexturedMesh(
        vertices=state.verts[used],
        triangles=remap[faces],
        uvs=new_uvs,
        uv_indices=new_uv_indices,
        texture=mesh.texture,
        texture_format=mesh.texture_format,
        texture_quality=mesh.texture_quality,
    )
