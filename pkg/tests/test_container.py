import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from s3dc.backends import SemanticDescriptor
from s3dc.container import (
    CompressedContainer,
    ContainerStats,
    compression_stats,
    pack,
    unpack,
)
from s3dc.edgemap import EdgeMap, encode_edges
from s3dc.errors import (
    BadMagicError,
    DomainError,
    FormatError,
    TruncatedError,
    UnknownVersionError,
)
from s3dc.mesh_io import SizeBreakdown


def semantic(text="a small wooden cup"):
    return CompressedContainer(
        mode="semantic", descriptor=SemanticDescriptor(text, max(1, len(text)))
    )


def structured(text="a tall statue", nnz=50, resolution=256, threshold=300, seed=0):
    rng = np.random.default_rng(seed)
    grid = np.zeros((resolution, resolution), dtype=bool)
    flat = rng.choice(resolution * resolution, size=nnz, replace=False)
    grid[np.unravel_index(flat, grid.shape)] = True
    return CompressedContainer(
        mode="structured",
        descriptor=SemanticDescriptor(text, max(1, len(text))),
        edges=encode_edges(EdgeMap(grid=grid, threshold=threshold)),
        edge_threshold=threshold,
        source_front_view="front",
    )


def test_semantic_size_exactly_header_plus_descriptor():
    c = semantic("x" * 50)
    assert len(pack(c)) == 58


def test_structured_empty_payload_layout():
    c = structured(nnz=0)
    raw = pack(c)
    assert len(raw) == 8 + len(c.descriptor.text) + 9 + 0


def test_pack_rejects_bad_charset():
    c = CompressedContainer.__new__(CompressedContainer)
    object.__setattr__(c, "mode", "semantic")
    object.__setattr__(c, "descriptor", SemanticDescriptor.__new__(SemanticDescriptor))
    object.__setattr__(c.descriptor, "text", "Hello")
    object.__setattr__(c.descriptor, "char_budget", 10)
    object.__setattr__(c, "edges", None)
    object.__setattr__(c, "edge_threshold", None)
    object.__setattr__(c, "source_front_view", "front")
    object.__setattr__(c, "format_version", 1)
    with pytest.raises(FormatError, match="lowercase"):
        pack(c)


def test_round_trip_semantic():
    c = semantic()
    assert unpack(pack(c)) == c


def test_round_trip_structured():
    for nnz in (0, 13, 5000):
        c = structured(nnz=nnz, seed=nnz)
        assert unpack(pack(c)) == c


def test_round_trip_dense_encoding(rng):
    c = structured(nnz=40000, resolution=256, seed=2)
    assert c.edges.encoding == "dense_bitmap"
    assert unpack(pack(c)) == c


@settings(max_examples=50, deadline=None)
@given(
    text=st.text(alphabet="abcdefghijklmnopqrstuvwxyz ", min_size=1, max_size=300),
    mode=st.sampled_from(["semantic", "structured"]),
    nnz=st.integers(0, 300),
    threshold=st.integers(0, 65535),
    seed=st.integers(0, 2**31),
)
def test_round_trip_property(text, mode, nnz, threshold, seed):
    if mode == "semantic":
        c = semantic(text)
    else:
        c = structured(text, nnz=nnz, resolution=64, threshold=threshold, seed=seed)
    assert unpack(pack(c)) == c


def test_bad_magic():
    raw = pack(semantic())
    with pytest.raises(BadMagicError):
        unpack(b"NOPE" + raw[4:])


def test_truncation():
    raw = pack(structured(nnz=100))
    for cut in (2, 7, 20, len(raw) - 1):
        with pytest.raises(TruncatedError):
            unpack(raw[:cut])


def test_unknown_version():
    raw = pack(semantic())
    with pytest.raises(UnknownVersionError):
        unpack(raw[:4] + bytes([255]) + raw[5:])


def test_trailing_bytes_rejected():
    raw = pack(semantic())
    with pytest.raises(FormatError, match="trailing"):
        unpack(raw + b"z")


def test_container_invariants():
    with pytest.raises(DomainError):
        CompressedContainer(
            mode="structured", descriptor=SemanticDescriptor("a", 1)
        )
    with pytest.raises(DomainError):
        CompressedContainer(
            mode="semantic",
            descriptor=SemanticDescriptor("a", 1),
            edge_threshold=100,
        )
    with pytest.raises(DomainError, match="nonempty"):
        semantic("")


def test_stats_arithmetic():
    stats = compression_stats(
        SizeBreakdown(mesh_bytes=900_000, texture_bytes=100_000), b"x" * 58
    )
    assert stats.ratio == pytest.approx(1_000_000 / 58)
    assert stats.ratio == pytest.approx(1.72e4, rel=0.01)


def test_stats_ratio_one():
    stats = compression_stats(SizeBreakdown(100, 0), b"y" * 100)
    assert stats.ratio == 1.0


def test_stats_monotone_in_compressed_size():
    original = SizeBreakdown(10_000, 0)
    r = [compression_stats(original, b"z" * n).ratio for n in (10, 100, 1000)]
    assert r[0] > r[1] > r[2]


def test_stats_rejects_empty():
    with pytest.raises(DomainError):
        compression_stats(SizeBreakdown(10, 0), b"")
    with pytest.raises(DomainError):
        ContainerStats(original_bytes=5, compressed_bytes=0)
