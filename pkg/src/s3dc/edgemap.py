"""Canny edge maps and their storage: extraction, byte-grid downsampling,
dense/COO codec with breakeven selection, and corpus sparsity profiling.

Thresholding uses a single knob t with t_high = t and t_low = t / 2: pixels
with gradient magnitude >= t are strong edges; pixels in [t/2, t) survive only
when 8-connected to a strong pixel through other surviving pixels.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from PIL import Image
from scipy import ndimage

from .errors import DomainError, FormatError, TruncatedError

BYTE_GRID_RESOLUTION = 256


@dataclass(frozen=True)
class GradientField:
    """Smoothed-image derivatives with magnitude and quantized orientation."""

    gx: np.ndarray
    gy: np.ndarray
    magnitude: np.ndarray
    orientation: np.ndarray  # degrees, one of {0, 45, 90, 135}


@dataclass(frozen=True, eq=False)
class EdgeMap:
    grid: np.ndarray  # (D, D) bool
    threshold: float
    nnz: int = field(init=False)
    sparsity: float = field(init=False)

    def __post_init__(self):
        g = np.ascontiguousarray(np.asarray(self.grid, dtype=bool))
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] < 1:
            raise DomainError(f"edge map must be square, got {g.shape}")
        object.__setattr__(self, "grid", g)
        g.setflags(write=False)
        nnz = int(g.sum())
        object.__setattr__(self, "nnz", nnz)
        object.__setattr__(self, "sparsity", 1.0 - nnz / g.size)

    @property
    def resolution(self) -> int:
        return self.grid.shape[0]

    def __eq__(self, other):
        if not isinstance(other, EdgeMap):
            return NotImplemented
        return (
            self.resolution == other.resolution
            and self.threshold == other.threshold
            and bool(np.array_equal(self.grid, other.grid))
        )


@dataclass(frozen=True)
class EncodedEdges:
    encoding: str  # "dense_bitmap" | "coo"
    resolution: int
    payload: bytes
    nnz: int

    def __post_init__(self):
        if self.encoding not in ("dense_bitmap", "coo"):
            raise DomainError(f"unknown encoding {self.encoding!r}")
        if self.resolution < 2:
            raise DomainError("resolution must be >= 2")


def _reflect_pad(image: np.ndarray, radius: int) -> np.ndarray:
    return np.pad(image, radius, mode="reflect")


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-(x**2) / (2 * sigma**2))
    return k / k.sum()


def gaussian_smooth(image: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur, kernel radius ceil(3*sigma), reflected borders."""
    if sigma <= 0:
        raise DomainError("sigma must be > 0")
    img = np.asarray(image, dtype=np.float64)
    k = _gaussian_kernel(sigma)
    radius = len(k) // 2
    h, w = img.shape
    padded = _reflect_pad(img, radius)
    horiz = np.zeros((h + 2 * radius, w))
    for i, kv in enumerate(k):
        horiz += kv * padded[:, i : i + w]
    out = np.zeros((h, w))
    for i, kv in enumerate(k):
        out += kv * horiz[i : i + h, :]
    return out


def _sobel(smoothed: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """3x3 Sobel derivatives, positive/negative taps grouped symmetrically so
    constant regions cancel to exactly zero."""
    h, w = smoothed.shape
    p = _reflect_pad(smoothed, 1)
    tl, tc, tr = p[0:h, 0:w], p[0:h, 1 : w + 1], p[0:h, 2 : w + 2]
    ml, mr = p[1 : h + 1, 0:w], p[1 : h + 1, 2 : w + 2]
    bl, bc, br = p[2 : h + 2, 0:w], p[2 : h + 2, 1 : w + 1], p[2 : h + 2, 2 : w + 2]
    gx = (tr + 2 * mr + br) - (tl + 2 * ml + bl)
    gy = (bl + 2 * bc + br) - (tl + 2 * tc + tr)
    return gx, gy


def gradient_field(image: np.ndarray, sigma: float = 1.4) -> GradientField:
    """Gaussian smoothing followed by 3x3 Sobel derivatives.

    Orientation is the gradient angle folded to [0, 180) and quantized to the
    four bins used by non-maximum suppression.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.size == 0:
        raise DomainError("image must be a nonempty 2D grayscale raster")
    smoothed = gaussian_smooth(img, sigma)
    gx, gy = _sobel(smoothed)
    magnitude = np.hypot(gx, gy)
    angle = np.degrees(np.arctan2(gy, gx)) % 180.0
    orientation = np.zeros(angle.shape, dtype=np.uint8)
    orientation[(angle >= 22.5) & (angle < 67.5)] = 45
    orientation[(angle >= 67.5) & (angle < 112.5)] = 90
    orientation[(angle >= 112.5) & (angle < 157.5)] = 135
    return GradientField(gx=gx, gy=gy, magnitude=magnitude, orientation=orientation)


_NMS_OFFSETS = {0: (0, 1), 45: (1, 1), 90: (1, 0), 135: (1, -1)}


def _non_maximum_suppression(magnitude: np.ndarray, orientation: np.ndarray) -> np.ndarray:
    """Keep pixels that are >= both neighbors along the gradient direction."""
    padded = np.pad(magnitude, 1)
    keep = np.zeros(magnitude.shape, dtype=bool)
    h, w = magnitude.shape
    for angle, (dr, dc) in _NMS_OFFSETS.items():
        sel = orientation == angle
        fwd = padded[1 + dr : 1 + dr + h, 1 + dc : 1 + dc + w]
        bwd = padded[1 - dr : 1 - dr + h, 1 - dc : 1 - dc + w]
        keep |= sel & (magnitude >= fwd) & (magnitude >= bwd) & (magnitude > 0)
    return keep


def canny(image: np.ndarray, t: float, sigma: float = 1.4) -> EdgeMap:
    """Edge map at threshold t (t_high = t, t_low = t / 2)."""
    if t <= 0:
        raise DomainError("threshold must be > 0")
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise DomainError(f"canny expects a square grayscale image, got {img.shape}")
    grad = gradient_field(img, sigma)
    ridge = np.where(_non_maximum_suppression(grad.magnitude, grad.orientation),
                     grad.magnitude, 0.0)
    support = ridge >= t / 2.0
    strong = ridge >= t
    labels, count = ndimage.label(support, structure=np.ones((3, 3), dtype=int))
    if count == 0:
        return EdgeMap(grid=np.zeros(img.shape, dtype=bool), threshold=t)
    strong_labels = np.unique(labels[strong])
    keep = np.isin(labels, strong_labels[strong_labels > 0])
    return EdgeMap(grid=keep & support, threshold=t)


def downsample_to_byte_grid(edges: EdgeMap) -> EdgeMap:
    """Max-pool onto a 256x256 grid so coordinates fit an 8-bit integer.

    Maps below 256 pass through unchanged.
    """
    d = edges.resolution
    if d < BYTE_GRID_RESOLUTION:
        return edges
    if d == BYTE_GRID_RESOLUTION:
        return EdgeMap(grid=edges.grid, threshold=edges.threshold)
    out = np.zeros((BYTE_GRID_RESOLUTION, BYTE_GRID_RESOLUTION), dtype=bool)
    coords = np.argwhere(edges.grid)
    if len(coords):
        out[
            coords[:, 0] * BYTE_GRID_RESOLUTION // d,
            coords[:, 1] * BYTE_GRID_RESOLUTION // d,
        ] = True
    return EdgeMap(grid=out, threshold=edges.threshold)


def breakeven_sparsity(resolution: int) -> float:
    """Minimum sparsity at which COO beats the dense bitmap: 1 - 1/(2*log2 D)."""
    if resolution < 2 or resolution & (resolution - 1):
        raise DomainError(f"resolution must be a power of two >= 2, got {resolution}")
    return 1.0 - 1.0 / (2.0 * math.log2(resolution))


def _coord_bits(resolution: int) -> int:
    return max(1, math.ceil(math.log2(resolution)))


def _coord_bytes(resolution: int) -> int:
    if resolution > 65536:
        raise DomainError("COO coordinates wider than 2 bytes are not supported")
    return (_coord_bits(resolution) + 7) // 8


def encode_edges(edges: EdgeMap) -> EncodedEdges:
    """Serialize, choosing COO iff N*2*log2(D) < D*D (bit-level comparison).

    COO payload: (row, col) pairs, row-major sorted, each coordinate
    little-endian in ceil(log2(D)/8) bytes. Dense payload: row-major
    bit-packed, MSB first.
    """
    d = edges.resolution
    if d < 2:
        raise DomainError("cannot encode a 1-pixel edge map")
    bits_dense = d * d
    bits_coord = edges.nnz * 2 * _coord_bits(d)
    if bits_coord < bits_dense:
        width = _coord_bytes(d)
        coords = np.argwhere(edges.grid)  # row-major sorted
        payload = coords.astype("<u1" if width == 1 else "<u2").tobytes()
        return EncodedEdges(encoding="coo", resolution=d, payload=payload,
                            nnz=edges.nnz)
    payload = np.packbits(edges.grid.reshape(-1)).tobytes()
    return EncodedEdges(encoding="dense_bitmap", resolution=d, payload=payload,
                        nnz=edges.nnz)


def decode_edges(encoded: EncodedEdges, threshold: float = 0.0) -> EdgeMap:
    """Inverse of encode_edges; the threshold is metadata supplied by the caller."""
    d = encoded.resolution
    if encoded.encoding == "coo":
        width = _coord_bytes(d)
        expected = encoded.nnz * 2 * width
        if len(encoded.payload) != expected:
            raise TruncatedError(
                f"COO payload is {len(encoded.payload)} bytes, expected {expected}"
            )
        coords = np.frombuffer(
            encoded.payload, dtype="<u1" if width == 1 else "<u2"
        ).reshape(-1, 2).astype(np.int64)
        if len(coords) and coords.max() >= d:
            raise FormatError(f"COO coordinate {coords.max()} >= resolution {d}")
        grid = np.zeros((d, d), dtype=bool)
        grid[coords[:, 0], coords[:, 1]] = True
        if int(grid.sum()) != encoded.nnz:
            raise FormatError("duplicate COO coordinates")
        return EdgeMap(grid=grid, threshold=threshold)
    expected = (d * d + 7) // 8
    if len(encoded.payload) != expected:
        raise TruncatedError(
            f"dense payload is {len(encoded.payload)} bytes, expected {expected}"
        )
    bits = np.unpackbits(np.frombuffer(encoded.payload, dtype=np.uint8))
    if bits[d * d :].any():
        raise FormatError("nonzero padding bits in dense payload")
    grid = bits[: d * d].reshape(d, d).astype(bool)
    if int(grid.sum()) != encoded.nnz:
        raise FormatError("dense payload nnz does not match header")
    return EdgeMap(grid=grid, threshold=threshold)


@dataclass(frozen=True)
class SparsityTable:
    """Mean/std edge-map sparsity (percent) per (resolution, threshold) cell."""

    resolutions: tuple[int, ...]
    thresholds: tuple[float, ...]
    mean: np.ndarray      # (R, T) percent
    std: np.ndarray       # (R, T) percent
    breakeven: tuple[float | None, ...]  # percent, None for non-power-of-two

    def to_text(self) -> str:
        head = ["Resolution"] + [f"t={t:g}" for t in self.thresholds] + ["Breakeven"]
        rows = [head]
        for i, res in enumerate(self.resolutions):
            cells = [f"{self.mean[i, j]:.1f} ± {self.std[i, j]:.1f}"
                     for j in range(len(self.thresholds))]
            be = "—" if self.breakeven[i] is None else f"{self.breakeven[i]:.2f}"
            rows.append([str(res)] + cells + [be])
        widths = [max(len(r[c]) for r in rows) for c in range(len(head))]
        return "\n".join(
            "  ".join(cell.rjust(widths[c]) for c, cell in enumerate(row))
            for row in rows
        )


def _resize_gray(view: np.ndarray, resolution: int) -> np.ndarray:
    arr = np.asarray(view, dtype=np.float64)
    if arr.ndim != 2:
        raise DomainError("views must be 2D grayscale rasters")
    img = Image.fromarray(np.clip(arr, 0, 255).astype(np.uint8), mode="L")
    return np.asarray(
        img.resize((resolution, resolution), Image.BILINEAR), dtype=np.float64
    )


def profile_sparsity(
    views: list[np.ndarray],
    resolutions: list[int],
    thresholds: list[float],
    sigma: float = 1.4,
) -> SparsityTable:
    """Edge-map sparsity statistics over a view corpus, as percentages."""
    if not views:
        raise DomainError("need at least one view")
    if not resolutions or not thresholds:
        raise DomainError("need at least one resolution and one threshold")
    mean = np.zeros((len(resolutions), len(thresholds)))
    std = np.zeros_like(mean)
    breakeven = []
    for i, res in enumerate(resolutions):
        resized = [_resize_gray(v, res) for v in views]
        for j, t in enumerate(thresholds):
            s = np.array(
                [canny(v, t, sigma=sigma).sparsity * 100.0 for v in resized]
            )
            mean[i, j] = s.mean()
            std[i, j] = s.std()
        try:
            breakeven.append(breakeven_sparsity(res) * 100.0)
        except DomainError:
            breakeven.append(None)
    return SparsityTable(
        resolutions=tuple(resolutions),
        thresholds=tuple(thresholds),
        mean=mean,
        std=std,
        breakeven=tuple(breakeven),
    )
