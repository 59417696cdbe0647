"""Deterministic software rasterizer: six axis-aligned orthographic views.

Cameras sit on the six axis directions looking at the unit cube; "front"
views along +Z (the camera is on the -Z side). Shading is Lambertian with a
single directional light plus ambient. A coverage mask marks object pixels.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DomainError, NoObjectFoundError
from .mesh_io import TexturedMesh

VIEW_TAGS = ("front", "right", "back", "left", "top", "bottom")
CAMERA_TAGS = VIEW_TAGS + ("composite", "external")

# view direction, screen-right, screen-up (world axes; right x up = direction)
_BASES = {
    "front": ((0, 0, 1), (1, 0, 0), (0, 1, 0)),
    "back": ((0, 0, -1), (-1, 0, 0), (0, 1, 0)),
    "left": ((1, 0, 0), (0, 0, -1), (0, 1, 0)),
    "right": ((-1, 0, 0), (0, 0, 1), (0, 1, 0)),
    "top": ((0, -1, 0), (1, 0, 0), (0, 0, 1)),
    "bottom": ((0, 1, 0), (1, 0, 0), (0, 0, -1)),
}

DEFAULT_ALBEDO = np.array([180, 180, 180], dtype=np.float64)
BACKGROUND_TOLERANCE = 12
BACKGROUND_LIMIT = 0.98


@dataclass(frozen=True)
class ViewImage:
    pixels: np.ndarray               # (H, W, 3) uint8
    alpha: np.ndarray | None = None  # (H, W) bool coverage
    camera_tag: str = "external"

    def __post_init__(self):
        px = np.ascontiguousarray(np.asarray(self.pixels, dtype=np.uint8))
        if px.ndim != 3 or px.shape[2] != 3 or px.shape[0] < 1 or px.shape[1] < 1:
            raise DomainError(f"pixels must be (H, W, 3), got {px.shape}")
        object.__setattr__(self, "pixels", px)
        if self.alpha is not None:
            a = np.ascontiguousarray(np.asarray(self.alpha, dtype=bool))
            if a.shape != px.shape[:2]:
                raise DomainError("alpha must match pixel dimensions")
            object.__setattr__(self, "alpha", a)
            a.setflags(write=False)
        if self.camera_tag not in CAMERA_TAGS:
            raise DomainError(f"unknown camera tag {self.camera_tag!r}")
        px.setflags(write=False)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.pixels.shape[:2]


@dataclass(frozen=True)
class RenderConfig:
    resolution: int = 256
    background_color: tuple[int, int, int] = (255, 255, 255)
    light_direction: tuple[float, float, float] = (1.0, 1.0, 1.0)
    margin: float = 0.1  # world units of empty border around the unit cube

    def __post_init__(self):
        if self.resolution < 16:
            raise DomainError("resolution must be >= 16")
        if self.margin < 0:
            raise DomainError("margin must be >= 0")


def luma601(pixels: np.ndarray) -> np.ndarray:
    """Rec. 601 grayscale of an RGB8 image, as float64 in [0, 255]."""
    px = np.asarray(pixels, dtype=np.float64)
    return 0.299 * px[..., 0] + 0.587 * px[..., 1] + 0.114 * px[..., 2]


def _edge_accepts_boundary(ax, ay, bx, by) -> bool:
    # fill-rule tie break: each shared edge belongs to exactly one triangle
    dx, dy = bx - ax, by - ay
    return dy > 0 or (dy == 0 and dx > 0)


def _sample_texture(texture: np.ndarray, uv: np.ndarray) -> np.ndarray:
    h, w = texture.shape[:2]
    tx = np.clip((uv[:, 0] * w).astype(np.int64), 0, w - 1)
    ty = np.clip(((1.0 - uv[:, 1]) * h).astype(np.int64), 0, h - 1)
    return texture[ty, tx].astype(np.float64)


def _render_one(mesh: TexturedMesh, config: RenderConfig, tag: str) -> ViewImage:
    res = config.resolution
    d, r, u = (np.array(v, dtype=np.float64) for v in _BASES[tag])
    light = np.array(config.light_direction, dtype=np.float64)
    light = light / np.linalg.norm(light)
    span = 1.0 + 2.0 * config.margin

    color = np.empty((res, res, 3), dtype=np.float64)
    color[:, :] = config.background_color
    depth = np.full((res, res), np.inf)
    mask = np.zeros((res, res), dtype=bool)

    # continuous pixel coords: x right, y down, pixel centers at half-integers
    vx = (mesh.vertices @ r - (np.minimum(r, 0).sum() - config.margin)) / span * res
    vy = res - (mesh.vertices @ u - (np.minimum(u, 0).sum() - config.margin)) / span * res
    vz = mesh.vertices @ d

    for ti, tri in enumerate(mesh.triangles):
        xs, ys, zs = vx[tri], vy[tri], vz[tri]
        area2 = (xs[1] - xs[0]) * (ys[2] - ys[0]) - (ys[1] - ys[0]) * (xs[2] - xs[0])
        if area2 == 0.0:
            continue
        order = (0, 1, 2) if area2 > 0 else (0, 2, 1)
        xs, ys, zs = xs[list(order)], ys[list(order)], zs[list(order)]
        area2 = abs(area2)

        x0 = max(int(np.floor(xs.min() - 0.5)), 0)
        x1 = min(int(np.ceil(xs.max() + 0.5)), res - 1)
        y0 = max(int(np.floor(ys.min() - 0.5)), 0)
        y1 = min(int(np.ceil(ys.max() + 0.5)), res - 1)
        if x1 < x0 or y1 < y0:
            continue
        px, py = np.meshgrid(
            np.arange(x0, x1 + 1) + 0.5, np.arange(y0, y1 + 1) + 0.5
        )
        w = np.empty((3,) + px.shape)
        inside = np.ones(px.shape, dtype=bool)
        for k in range(3):
            a, b = k, (k + 1) % 3
            e = (xs[b] - xs[a]) * (py - ys[a]) - (ys[b] - ys[a]) * (px - xs[a])
            if _edge_accepts_boundary(xs[a], ys[a], xs[b], ys[b]):
                inside &= e >= 0
            else:
                inside &= e > 0
            w[(k + 2) % 3] = e / area2
        if not inside.any():
            continue

        z = w[0] * zs[0] + w[1] * zs[1] + w[2] * zs[2]
        rows, cols = np.floor(py).astype(np.int64), np.floor(px).astype(np.int64)
        win = inside & (z < depth[rows, cols])
        if not win.any():
            continue

        n = np.cross(
            mesh.vertices[tri[1]] - mesh.vertices[tri[0]],
            mesh.vertices[tri[2]] - mesh.vertices[tri[0]],
        )
        norm = np.linalg.norm(n)
        if norm == 0:
            continue
        n = n / norm
        if n @ d > 0:
            n = -n
        intensity = min(1.0, 0.3 + max(0.0, float(n @ light)))

        if mesh.texture is not None and mesh.uvs is not None:
            cu = mesh.corner_uvs(ti)
            cu = cu[list(order)]
            uv = (
                w[0][win, None] * cu[0] + w[1][win, None] * cu[1] + w[2][win, None] * cu[2]
            )
            albedo = _sample_texture(mesh.texture, uv)
        else:
            albedo = DEFAULT_ALBEDO

        rw, cw = rows[win], cols[win]
        depth[rw, cw] = z[win]
        color[rw, cw] = albedo * intensity
        mask[rw, cw] = True

    return ViewImage(
        pixels=np.clip(np.rint(color), 0, 255).astype(np.uint8),
        alpha=mask,
        camera_tag=tag,
    )


def render_views(mesh: TexturedMesh, config: RenderConfig | None = None) -> dict[str, ViewImage]:
    """Render the six orthographic views of a unit-cube-normalized mesh."""
    config = config or RenderConfig()
    if mesh.vertex_count:
        lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
        if (lo < -0.01).any() or (hi > 1.01).any():
            raise DomainError("mesh must be normalized to the unit cube before rendering")
    return {tag: _render_one(mesh, config, tag) for tag in VIEW_TAGS}


def concat_grid(views: dict[str, ViewImage]) -> ViewImage:
    """3x2 composite: front/right/back over left/top/bottom."""
    missing = [t for t in VIEW_TAGS if t not in views]
    if missing:
        raise DomainError(f"missing views: {missing}")
    shapes = {views[t].pixels.shape for t in VIEW_TAGS}
    if len(shapes) != 1:
        raise DomainError("all views must share one resolution")
    top = np.hstack([views[t].pixels for t in ("front", "right", "back")])
    bottom = np.hstack([views[t].pixels for t in ("left", "top", "bottom")])
    return ViewImage(pixels=np.vstack([top, bottom]), camera_tag="composite")


def mask_background(view: ViewImage) -> ViewImage:
    """Isolate the object in an externally generated image via corner flood fill.

    Background is the union of the connected regions (4-connected) reachable
    from each corner through pixels within the per-channel tolerance of that
    corner's color. Object RGB values are preserved untouched.
    """
    if view.alpha is not None:
        raise DomainError("view already carries a coverage mask")
    px = view.pixels.astype(np.int16)
    h, w = px.shape[:2]
    background = np.zeros((h, w), dtype=bool)
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    for cr, cc in ((0, 0), (0, w - 1), (h - 1, 0), (h - 1, w - 1)):
        ref = px[cr, cc]
        eligible = (np.abs(px - ref) <= BACKGROUND_TOLERANCE).all(axis=2)
        labels, _ = ndimage.label(eligible, structure=structure)
        if labels[cr, cc]:
            background |= labels == labels[cr, cc]
    if background.mean() > BACKGROUND_LIMIT:
        raise NoObjectFoundError(
            f"background fill consumed {background.mean():.1%} of pixels"
        )
    return ViewImage(pixels=view.pixels, alpha=~background, camera_tag=view.camera_tag)


def save_view(view: ViewImage, path: str | os.PathLike) -> None:
    """Write the view as PNG (RGBA when a coverage mask is present)."""
    if view.alpha is not None:
        rgba = np.dstack([view.pixels, (view.alpha * 255).astype(np.uint8)])
        Image.fromarray(rgba, mode="RGBA").save(path, format="PNG")
    else:
        Image.fromarray(view.pixels, mode="RGB").save(path, format="PNG")


def load_view(path: str | os.PathLike, camera_tag: str = "external") -> ViewImage:
    """Read an image file as a ViewImage (alpha channel becomes the mask)."""
    with Image.open(path) as img:
        if img.mode == "RGBA":
            arr = np.asarray(img)
            return ViewImage(
                pixels=arr[..., :3], alpha=arr[..., 3] > 127, camera_tag=camera_tag
            )
        return ViewImage(
            pixels=np.asarray(img.convert("RGB")), camera_tag=camera_tag
        )
