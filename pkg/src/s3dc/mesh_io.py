"""Textured mesh I/O: OBJ/MTL parsing, deterministic serialization, size accounting.

The on-disk model is a Wavefront OBJ with an optional sibling MTL and one
optional texture image (PNG or baseline JPEG). Floats are written with
Python's shortest round-trip repr so identical meshes always serialize to
identical bytes.
"""

from __future__ import annotations

import io
import os
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DomainError, ParseError

_TEXTURE_SUFFIX = {"png": ".png", "jpeg": ".jpg"}


@dataclass(frozen=True)
class TexturedMesh:
    """A triangle mesh with optional per-vertex or per-corner UVs and one texture.

    ``uv_indices`` is None when UVs are per-vertex (one UV per vertex index);
    otherwise it maps each triangle corner into the ``uvs`` table.
    """

    vertices: np.ndarray                      # (N, 3) float64
    triangles: np.ndarray                     # (M, 3) int64
    uvs: np.ndarray | None = None             # (K, 2) float64
    uv_indices: np.ndarray | None = None      # (M, 3) int64 into uvs
    normals: np.ndarray | None = None         # (N, 3) float64
    texture: np.ndarray | None = None         # (H, W, 3) uint8
    texture_format: str = "png"
    texture_quality: int = 95

    def __post_init__(self):
        v = np.ascontiguousarray(np.asarray(self.vertices, dtype=np.float64))
        t = np.ascontiguousarray(np.asarray(self.triangles, dtype=np.int64))
        if v.ndim != 2 or v.shape[1] != 3:
            raise DomainError(f"vertices must be (N, 3), got {v.shape}")
        if t.ndim != 2 or t.shape[1] != 3:
            raise DomainError(f"triangles must be (M, 3), got {t.shape}")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise DomainError("triangle index out of range")
        if t.size and (
            (t[:, 0] == t[:, 1]) | (t[:, 1] == t[:, 2]) | (t[:, 0] == t[:, 2])
        ).any():
            raise DomainError("degenerate triangle (repeated vertex index)")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "triangles", t)

        if self.uvs is not None:
            uv = np.ascontiguousarray(np.asarray(self.uvs, dtype=np.float64))
            if uv.ndim != 2 or uv.shape[1] != 2:
                raise DomainError(f"uvs must be (K, 2), got {uv.shape}")
            object.__setattr__(self, "uvs", uv)
            if self.uv_indices is None:
                if len(uv) != len(v):
                    raise DomainError("per-vertex uvs must match vertex count")
            else:
                ti = np.ascontiguousarray(np.asarray(self.uv_indices, dtype=np.int64))
                if ti.shape != t.shape:
                    raise DomainError("uv_indices must match triangles shape")
                if ti.size and (ti.min() < 0 or ti.max() >= len(uv)):
                    raise DomainError("uv index out of range")
                object.__setattr__(self, "uv_indices", ti)
        elif self.uv_indices is not None:
            raise DomainError("uv_indices without uvs")

        if self.normals is not None:
            n = np.ascontiguousarray(np.asarray(self.normals, dtype=np.float64))
            if n.shape != v.shape:
                raise DomainError("normals must match vertices shape")
            object.__setattr__(self, "normals", n)

        if self.texture is not None:
            tex = np.ascontiguousarray(np.asarray(self.texture, dtype=np.uint8))
            if tex.ndim != 3 or tex.shape[2] != 3:
                raise DomainError(f"texture must be (H, W, 3) uint8, got {tex.shape}")
            object.__setattr__(self, "texture", tex)

        for arr in (self.vertices, self.triangles, self.uvs, self.uv_indices,
                    self.normals, self.texture):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    def corner_uvs(self, tri_index: int) -> np.ndarray | None:
        """UV coordinates of one triangle's corners, shape (3, 2)."""
        if self.uvs is None:
            return None
        if self.uv_indices is None:
            return self.uvs[self.triangles[tri_index]]
        return self.uvs[self.uv_indices[tri_index]]


@dataclass(frozen=True)
class SizeBreakdown:
    """On-disk byte counts for one serialized object."""

    mesh_bytes: int
    texture_bytes: int

    def __post_init__(self):
        if self.mesh_bytes < 0 or self.texture_bytes < 0:
            raise DomainError("byte counts must be non-negative")

    @property
    def total_bytes(self) -> int:
        return self.mesh_bytes + self.texture_bytes


def _fmt(x: float) -> str:
    return repr(float(x))


def _parse_face_token(token: str, n_v: int, n_vt: int, n_vn: int) -> tuple[int, int]:
    """Resolve one ``v``, ``v/vt``, ``v//vn`` or ``v/vt/vn`` token.

    Returns 0-based (vertex index, uv index) with -1 for an absent uv.
    Negative OBJ indices are relative to the current table end.
    """
    parts = token.split("/")
    if not parts[0]:
        raise ValueError("missing vertex index")
    vi = int(parts[0])
    vi = vi - 1 if vi > 0 else n_v + vi
    if vi < 0 or vi >= n_v:
        raise ValueError(f"vertex index {parts[0]} out of range (have {n_v})")
    ti = -1
    if len(parts) > 1 and parts[1]:
        ti = int(parts[1])
        ti = ti - 1 if ti > 0 else n_vt + ti
        if ti < 0 or ti >= n_vt:
            raise ValueError(f"uv index {parts[1]} out of range (have {n_vt})")
    if len(parts) > 2 and parts[2]:
        ni = int(parts[2])
        ni = ni - 1 if ni > 0 else n_vn + ni
        if ni < 0 or ni >= n_vn:
            raise ValueError(f"normal index {parts[2]} out of range (have {n_vn})")
    return vi, ti


def _load_mtl_texture(mtl_path: Path) -> Path | None:
    """Return the map_Kd path referenced by an MTL file, if any."""
    tex = None
    for raw in mtl_path.read_text().splitlines():
        line = raw.strip()
        if line.lower().startswith("map_kd") and len(line.split(None, 1)) == 2:
            tex = mtl_path.parent / line.split(None, 1)[1].strip()
    return tex


def load_object(path: str | os.PathLike) -> TexturedMesh:
    """Parse an OBJ file (plus sibling MTL/texture) into a TexturedMesh.

    Polygons are fan-triangulated; faces with repeated vertex indices are
    dropped. An unresolvable texture downgrades to a warning and a
    texture-free mesh; malformed records raise ParseError with the line number.
    """
    path = Path(path)
    vertices: list[list[float]] = []
    uvs: list[list[float]] = []
    normals_acc: list[list[float]] = []
    tris: list[tuple[int, int, int]] = []
    tri_uvs: list[tuple[int, int, int]] = []
    mtl_files: list[Path] = []

    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            kind = tokens[0]
            try:
                if kind == "v":
                    if len(tokens) < 4:
                        raise ValueError("vertex needs 3 coordinates")
                    vertices.append([float(x) for x in tokens[1:4]])
                elif kind == "vt":
                    if len(tokens) < 3:
                        raise ValueError("uv needs 2 coordinates")
                    uvs.append([float(x) for x in tokens[1:3]])
                elif kind == "vn":
                    if len(tokens) < 4:
                        raise ValueError("normal needs 3 coordinates")
                    normals_acc.append([float(x) for x in tokens[1:4]])
                elif kind == "f":
                    if len(tokens) < 4:
                        raise ValueError("face needs at least 3 vertices")
                    corners = [
                        _parse_face_token(tok, len(vertices), len(uvs), len(normals_acc))
                        for tok in tokens[1:]
                    ]
                    for i in range(1, len(corners) - 1):
                        fan = (corners[0], corners[i], corners[i + 1])
                        vidx = tuple(c[0] for c in fan)
                        if len(set(vidx)) < 3:
                            continue
                        tris.append(vidx)
                        tri_uvs.append(tuple(c[1] for c in fan))
                elif kind == "mtllib":
                    mtl_files.append(path.parent / line.split(None, 1)[1].strip())
                # usemtl / g / o / s records carry no geometry; ignored
            except ValueError as exc:
                raise ParseError(f"{path.name}:{lineno}: {exc}") from exc

    texture = None
    for mtl in mtl_files:
        if not mtl.exists():
            warnings.warn(f"material file not found: {mtl}")
            continue
        tex_path = _load_mtl_texture(mtl)
        if tex_path is None:
            continue
        if not tex_path.exists():
            warnings.warn(f"texture not found: {tex_path}")
            continue
        with Image.open(tex_path) as img:
            texture = np.asarray(img.convert("RGB"), dtype=np.uint8)

    has_uv = bool(uvs) and any(t != (-1, -1, -1) for t in tri_uvs)
    uv_arr = np.asarray(uvs, dtype=np.float64) if has_uv else None
    uv_idx = None
    if has_uv:
        if any(-1 in t for t in tri_uvs):
            raise ParseError(f"{path.name}: mixed textured and untextured faces")
        uv_idx = np.asarray(tri_uvs, dtype=np.int64)

    if not vertices:
        raise ParseError(f"{path.name}: no vertices")
    return TexturedMesh(
        vertices=np.asarray(vertices, dtype=np.float64),
        triangles=np.asarray(tris, dtype=np.int64).reshape(-1, 3),
        uvs=uv_arr,
        uv_indices=uv_idx,
        normals=np.asarray(normals_acc, dtype=np.float64)
        if len(normals_acc) == len(vertices) else None,
        texture=texture,
    )


def _encode_texture(mesh: TexturedMesh) -> bytes:
    buf = io.BytesIO()
    img = Image.fromarray(mesh.texture)
    if mesh.texture_format == "jpeg":
        img.save(buf, format="JPEG", quality=mesh.texture_quality)
    else:
        img.save(buf, format="PNG")
    return buf.getvalue()


def save_object(mesh: TexturedMesh, path: str | os.PathLike) -> SizeBreakdown:
    """Write mesh (+ MTL + texture when present) under ``path`` (.obj).

    Serialization is deterministic: the same mesh always produces the same
    bytes. Returns the on-disk byte counts.
    """
    path = Path(path)
    stem = path.stem
    lines = []
    if mesh.texture is not None:
        lines.append(f"mtllib {stem}.mtl")
    for v in mesh.vertices:
        lines.append(f"v {_fmt(v[0])} {_fmt(v[1])} {_fmt(v[2])}")
    per_vertex_uv = mesh.uvs is not None and mesh.uv_indices is None
    if mesh.uvs is not None:
        for uv in mesh.uvs:
            lines.append(f"vt {_fmt(uv[0])} {_fmt(uv[1])}")
    if mesh.texture is not None:
        lines.append("usemtl material0")
    for i, tri in enumerate(mesh.triangles):
        if mesh.uvs is None:
            lines.append(f"f {tri[0] + 1} {tri[1] + 1} {tri[2] + 1}")
        else:
            uvi = tri if per_vertex_uv else mesh.uv_indices[i]
            lines.append(
                "f "
                + " ".join(f"{tri[k] + 1}/{uvi[k] + 1}" for k in range(3))
            )
    obj_bytes = ("\n".join(lines) + "\n").encode()
    path.write_bytes(obj_bytes)

    mesh_bytes = len(obj_bytes)
    texture_bytes = 0
    if mesh.texture is not None:
        tex_name = stem + _TEXTURE_SUFFIX[mesh.texture_format]
        mtl = f"newmtl material0\nKd 1.0 1.0 1.0\nmap_Kd {tex_name}\n".encode()
        (path.parent / f"{stem}.mtl").write_bytes(mtl)
        tex = _encode_texture(mesh)
        (path.parent / tex_name).write_bytes(tex)
        mesh_bytes += len(mtl)
        texture_bytes = len(tex)
    return SizeBreakdown(mesh_bytes=mesh_bytes, texture_bytes=texture_bytes)


def size_breakdown(path: str | os.PathLike) -> SizeBreakdown:
    """Byte counts of the object files on disk (OBJ + MTL as mesh, images as texture)."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(path)
    mesh_bytes = path.stat().st_size
    texture_bytes = 0
    with open(path) as fh:
        for line in fh:
            if line.strip().startswith("mtllib"):
                mtl = path.parent / line.split(None, 1)[1].strip()
                if not mtl.exists():
                    raise FileNotFoundError(mtl)
                mesh_bytes += mtl.stat().st_size
                tex = _load_mtl_texture(mtl)
                if tex is not None:
                    if not tex.exists():
                        raise FileNotFoundError(tex)
                    texture_bytes += tex.stat().st_size
    return SizeBreakdown(mesh_bytes=mesh_bytes, texture_bytes=texture_bytes)


def recode_texture(mesh: TexturedMesh, quality: int) -> TexturedMesh:
    """Re-encode the texture as baseline JPEG at ``quality`` (1..100).

    Geometry, UVs and normals are untouched; the returned mesh carries the
    decoded lossy pixels and remembers the JPEG quality for serialization.
    """
    if mesh.texture is None:
        raise DomainError("mesh has no texture to recode")
    if not 1 <= quality <= 100:
        raise DomainError(f"quality must be in 1..100, got {quality}")
    buf = io.BytesIO()
    Image.fromarray(mesh.texture).save(buf, format="JPEG", quality=quality)
    buf.seek(0)
    with Image.open(buf) as img:
        decoded = np.asarray(img.convert("RGB"), dtype=np.uint8)
    return replace(mesh, texture=decoded, texture_format="jpeg",
                   texture_quality=quality)
