"""The .s3dc container: bit-exact serialization of compressed objects.

Layout (little-endian multi-byte integers):

    magic "S3DC" | version u8 | flags u8 | desc_len u16 | descriptor bytes
    [ if flags bit0: resolution u16 | threshold u16 | nnz u32 | front_view u8
      | edge payload ]

flags bit0 = edges present (structured mode), bit1 = COO payload encoding.
The descriptor is restricted to lowercase a-z and space. A pure semantic
container is therefore exactly 8 + len(descriptor) bytes.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass

from .backends import SemanticDescriptor
from .edgemap import EncodedEdges, _coord_bytes
from .errors import (
    BadMagicError,
    DomainError,
    FormatError,
    TruncatedError,
    UnknownVersionError,
)
from .mesh_io import SizeBreakdown
from .render import CAMERA_TAGS

MAGIC = b"S3DC"
FORMAT_VERSION = 1
HEADER_LEN = 8
EDGE_HEADER_LEN = 9

_DESCRIPTOR_RE = re.compile(r"[a-z ]*\Z")
_TAG_CODE = {tag: i for i, tag in enumerate(CAMERA_TAGS)}
_CODE_TAG = {i: tag for tag, i in _TAG_CODE.items()}


@dataclass(frozen=True, eq=False)
class CompressedContainer:
    """A compressed object: descriptor plus optional encoded edge map."""

    mode: str  # "semantic" | "structured"
    descriptor: SemanticDescriptor
    edges: EncodedEdges | None = None
    edge_threshold: int | None = None
    source_front_view: str = "front"
    format_version: int = FORMAT_VERSION

    def __post_init__(self):
        if self.mode not in ("semantic", "structured"):
            raise DomainError(f"unknown mode {self.mode!r}")
        if (self.mode == "structured") != (self.edges is not None):
            raise DomainError("structured mode iff edges present")
        if not self.descriptor.text:
            raise DomainError("descriptor must be nonempty")
        if self.source_front_view not in _TAG_CODE:
            raise DomainError(f"unknown camera tag {self.source_front_view!r}")
        if self.mode == "structured":
            if self.edge_threshold is None:
                raise DomainError("structured mode requires edge_threshold")
            if not 0 <= int(self.edge_threshold) <= 0xFFFF:
                raise DomainError("edge_threshold must fit u16")
        else:
            if self.edge_threshold is not None:
                raise DomainError("semantic mode carries no edge_threshold")
            if self.source_front_view != "front":
                raise DomainError("semantic mode fixes source_front_view to 'front'")

    def __eq__(self, other):
        """Equality over serialized content (the descriptor budget is
        compression-time metadata, not part of the artifact)."""
        if not isinstance(other, CompressedContainer):
            return NotImplemented
        return (
            self.mode == other.mode
            and self.descriptor.text == other.descriptor.text
            and self.edges == other.edges
            and self.edge_threshold == other.edge_threshold
            and self.source_front_view == other.source_front_view
            and self.format_version == other.format_version
        )


@dataclass(frozen=True)
class ContainerStats:
    original_bytes: int
    compressed_bytes: int

    def __post_init__(self):
        if self.compressed_bytes <= 0:
            raise DomainError("compressed_bytes must be positive")

    @property
    def ratio(self) -> float:
        return self.original_bytes / self.compressed_bytes


def pack(container: CompressedContainer) -> bytes:
    """Serialize deterministically to the S3DC layout."""
    text = container.descriptor.text
    if not _DESCRIPTOR_RE.match(text):
        raise FormatError("descriptor must contain only lowercase a-z and space")
    desc = text.encode("ascii")
    if len(desc) > 0xFFFF:
        raise FormatError("descriptor longer than 65535 bytes")
    flags = 0
    if container.edges is not None:
        flags |= 1
        if container.edges.encoding == "coo":
            flags |= 2
    out = struct.pack("<4sBBH", MAGIC, container.format_version, flags, len(desc))
    out += desc
    if container.edges is not None:
        e = container.edges
        out += struct.pack(
            "<HHIB",
            e.resolution,
            int(container.edge_threshold),
            e.nnz,
            _TAG_CODE[container.source_front_view],
        )
        out += e.payload
    return out


def unpack(data: bytes) -> CompressedContainer:
    """Parse an S3DC payload; the inverse of pack on valid containers."""
    if data[: len(MAGIC)] != MAGIC:
        if len(data) < len(MAGIC) and data == MAGIC[: len(data)]:
            raise TruncatedError(f"container cut inside the magic ({len(data)} bytes)")
        raise BadMagicError("not an S3DC container (bad magic)")
    if len(data) < HEADER_LEN:
        raise TruncatedError(f"header needs {HEADER_LEN} bytes, got {len(data)}")
    _, version, flags, desc_len = struct.unpack("<4sBBH", data[:HEADER_LEN])
    if version != FORMAT_VERSION:
        raise UnknownVersionError(f"unknown container version {version}")
    if flags & ~0b11:
        raise FormatError(f"unknown flag bits {flags:#x}")
    offset = HEADER_LEN
    if len(data) < offset + desc_len:
        raise TruncatedError("descriptor truncated")
    text = data[offset : offset + desc_len].decode("ascii", errors="replace")
    if not _DESCRIPTOR_RE.match(text):
        raise FormatError("descriptor contains characters outside lowercase a-z/space")
    offset += desc_len
    descriptor = SemanticDescriptor(text=text, char_budget=len(text))

    if not flags & 1:
        if offset != len(data):
            raise FormatError(f"{len(data) - offset} trailing bytes after descriptor")
        return CompressedContainer(mode="semantic", descriptor=descriptor)

    if len(data) < offset + EDGE_HEADER_LEN:
        raise TruncatedError("edge header truncated")
    resolution, threshold, nnz, tag_code = struct.unpack(
        "<HHIB", data[offset : offset + EDGE_HEADER_LEN]
    )
    offset += EDGE_HEADER_LEN
    if tag_code not in _CODE_TAG:
        raise FormatError(f"unknown camera tag code {tag_code}")
    if resolution < 2:
        raise FormatError(f"bad edge resolution {resolution}")
    encoding = "coo" if flags & 2 else "dense_bitmap"
    if encoding == "coo":
        expected = nnz * 2 * _coord_bytes(resolution)
    else:
        expected = (resolution * resolution + 7) // 8
    payload = data[offset:]
    if len(payload) < expected:
        raise TruncatedError(
            f"edge payload is {len(payload)} bytes, expected {expected}"
        )
    if len(payload) > expected:
        raise FormatError(f"{len(payload) - expected} trailing bytes after payload")
    edges = EncodedEdges(
        encoding=encoding, resolution=resolution, payload=payload, nnz=nnz
    )
    return CompressedContainer(
        mode="structured",
        descriptor=descriptor,
        edges=edges,
        edge_threshold=threshold,
        source_front_view=_CODE_TAG[tag_code],
    )


def compression_stats(original: SizeBreakdown, packed: bytes) -> ContainerStats:
    """Exact byte-count compression ratio for one packed container."""
    if not packed:
        raise DomainError("packed container is empty")
    return ContainerStats(
        original_bytes=original.total_bytes, compressed_bytes=len(packed)
    )
