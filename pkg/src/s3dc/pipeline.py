"""End-to-end compression and decompression flows.

Compression: load -> normalize -> render six views -> composite -> describe ->
simplify/clamp, plus (structured mode) front-view Canny -> byte-grid
downsample -> encoded edges, all packed into one container. Decompression
routes the descriptor to the unconditioned or edge-conditioned generator,
masks the background, and lifts the view to a mesh.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

from . import backends
from .backends import BackendConfig
from .container import (
    CompressedContainer,
    ContainerStats,
    compression_stats,
    pack,
    unpack,
)
from .edgemap import canny, decode_edges, downsample_to_byte_grid, encode_edges
from .errors import DomainError, PipelineStageError
from .geometry import normalize_unit_cube
from .mesh_io import TexturedMesh, load_object, size_breakdown
from .render import RenderConfig, concat_grid, luma601, mask_background, render_views

FRONT_VIEW = "front"


def mock_backends(seed: int = 0, resolution: int = 256) -> dict[str, BackendConfig]:
    """Offline backend set: every kind served by the deterministic mock."""
    return {
        kind: backends.mock_config(kind, seed=seed, resolution=resolution)
        for kind in backends.BACKEND_KINDS
    }


@dataclass(frozen=True)
class CompressionJob:
    input_path: str | os.PathLike
    mode: str = "semantic"
    char_budget: int = 250
    edge_threshold: int | None = None
    render_config: RenderConfig = field(default_factory=RenderConfig)
    backend_configs: dict[str, BackendConfig] = field(default_factory=mock_backends)

    def __post_init__(self):
        if self.mode not in ("semantic", "structured"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if self.char_budget < 1:
            raise DomainError("char_budget must be >= 1")
        if self.mode == "structured" and self.edge_threshold is None:
            raise DomainError("structured mode requires an edge threshold")


def _config(configs: dict[str, BackendConfig], kind: str) -> BackendConfig:
    try:
        return configs[kind]
    except KeyError:
        raise DomainError(f"no backend configured for kind {kind!r}") from None


def compress(job: CompressionJob) -> tuple[CompressedContainer, ContainerStats]:
    """Run the full compression flow; failures carry their stage name."""
    stage = "load"
    try:
        mesh = load_object(job.input_path)
        original_size = size_breakdown(job.input_path)

        stage = "normalize"
        mesh = normalize_unit_cube(mesh)

        stage = "render"
        views = render_views(mesh, job.render_config)
        composite = concat_grid(views)

        stage = "describe"
        description = backends.describe(
            composite, _config(job.backend_configs, "captioner")
        )

        stage = "simplify"
        descriptor = backends.simplify_and_clamp(
            description, job.char_budget, _config(job.backend_configs, "captioner")
        )

        if job.mode == "structured":
            stage = "edges"
            gray = luma601(views[FRONT_VIEW].pixels)
            edges = canny(gray, float(job.edge_threshold))
            edges = downsample_to_byte_grid(edges)
            container = CompressedContainer(
                mode="structured",
                descriptor=descriptor,
                edges=encode_edges(edges),
                edge_threshold=int(job.edge_threshold),
                source_front_view=FRONT_VIEW,
            )
        else:
            container = CompressedContainer(mode="semantic", descriptor=descriptor)

        stage = "pack"
        packed = pack(container)
        return container, compression_stats(original_size, packed)
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(stage, exc) from exc


def decompress(
    container: CompressedContainer, configs: dict[str, BackendConfig]
) -> TexturedMesh:
    """Regenerate a mesh from a container; never touches the original object."""
    if container.mode == "structured":
        edges = decode_edges(container.edges, threshold=float(container.edge_threshold))
        image = backends.generate_image_conditioned(
            container.descriptor, edges, _config(configs, "conditioned_generator")
        )
    else:
        image = backends.generate_image(
            container.descriptor, _config(configs, "generator")
        )
    masked = mask_background(image)
    return backends.image_to_3d(masked, _config(configs, "image_to_3d"))


def decompress_bytes(
    raw: bytes, configs: dict[str, BackendConfig]
) -> TexturedMesh:
    """Parse and decompress; malformed containers fail before any backend call."""
    return decompress(unpack(raw), configs)
