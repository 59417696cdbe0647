"""Procedural meshes and textures used by the CLI demo path and the test suite."""

from __future__ import annotations

import numpy as np

from .mesh_io import TexturedMesh

# 8 corners / 12 triangles, CCW seen from outside
_CUBE_VERTS = np.array(
    [
        [0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0],
        [0, 0, 1], [1, 0, 1], [1, 1, 1], [0, 1, 1],
    ],
    dtype=np.float64,
)
_CUBE_FACES = np.array(
    [
        [0, 2, 1], [0, 3, 2],  # z = 0
        [4, 5, 6], [4, 6, 7],  # z = 1
        [0, 1, 5], [0, 5, 4],  # y = 0
        [3, 6, 2], [3, 7, 6],  # y = 1
        [0, 7, 3], [0, 4, 7],  # x = 0
        [1, 2, 6], [1, 6, 5],  # x = 1
    ],
    dtype=np.int64,
)


def cube(texture: np.ndarray | None = None) -> TexturedMesh:
    """Unit cube; when textured, every face maps to the full texture square."""
    if texture is None:
        return TexturedMesh(vertices=_CUBE_VERTS.copy(), triangles=_CUBE_FACES.copy())
    uvs = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=np.float64)
    uv_indices = np.array(
        [[0, 2, 1], [0, 3, 2]] * 6, dtype=np.int64
    )
    return TexturedMesh(
        vertices=_CUBE_VERTS.copy(),
        triangles=_CUBE_FACES.copy(),
        uvs=uvs,
        uv_indices=uv_indices,
        texture=texture,
    )


def icosphere(subdivisions: int = 3, radius: float = 0.5) -> TexturedMesh:
    """Icosahedron subdivided ``subdivisions`` times: 20 * 4**n triangles."""
    phi = (1 + np.sqrt(5)) / 2
    verts = [
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ]
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [np.array(v, dtype=np.float64) for v in verts]
    midpoint_cache: dict[tuple[int, int], int] = {}

    def midpoint(a: int, b: int) -> int:
        key = (a, b) if a < b else (b, a)
        if key not in midpoint_cache:
            verts.append((verts[a] + verts[b]) / 2)
            midpoint_cache[key] = len(verts) - 1
        return midpoint_cache[key]

    for _ in range(subdivisions):
        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces

    v = np.vstack(verts)
    v = v / np.linalg.norm(v, axis=1, keepdims=True) * radius + 0.5
    return TexturedMesh(vertices=v, triangles=np.asarray(faces, dtype=np.int64))


def solid_texture(color: tuple[int, int, int], size: int = 8) -> np.ndarray:
    tex = np.empty((size, size, 3), dtype=np.uint8)
    tex[:, :] = color
    return tex


def noise_texture(size: int, seed: int = 0, high: int = 200) -> np.ndarray:
    """Incompressible texture with values in [0, high]; keeps silhouettes high-contrast."""
    rng = np.random.default_rng(seed)
    return rng.integers(0, high + 1, size=(size, size, 3), dtype=np.uint8)
