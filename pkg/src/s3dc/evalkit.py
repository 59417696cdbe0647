"""Reconstruction evaluation: F-score, embedding cosine, mean rank, reports.

The report builder mirrors the quality table layout used throughout the
toolkit: one row per method with F / C / MR / compression ratio, plus an
average row, emitted as CSV, aligned text, and a rendered figure.
"""

from __future__ import annotations

import csv
import io
import os
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import backends
from .errors import DomainError
from .geometry import normalize_unit_cube, sample_surface
from .mesh_io import TexturedMesh, load_object, size_breakdown
from .render import RenderConfig, ViewImage, render_views


@dataclass(frozen=True)
class FScoreParams:
    distance_threshold: float = 0.05
    sample_count: int = 10_000
    seed: int = 0

    def __post_init__(self):
        if self.distance_threshold <= 0:
            raise DomainError("distance_threshold must be > 0")
        if self.sample_count < 1:
            raise DomainError("sample_count must be >= 1")


def _grid_cells(points: np.ndarray, cell: float) -> dict[tuple[int, int, int], np.ndarray]:
    ids = np.floor(points / cell).astype(np.int64)
    buckets: dict[tuple[int, int, int], list[int]] = defaultdict(list)
    for i, key in enumerate(map(tuple, ids)):
        buckets[key].append(i)
    return {k: np.asarray(v) for k, v in buckets.items()}


def _matched_fraction(queries: np.ndarray, targets: np.ndarray, d: float) -> float:
    """Fraction of query points within d of some target point.

    Uniform grid of cell size d; checking the 27 neighboring cells preserves
    exactness because a match can never lie further than one cell away.
    """
    if len(targets) == 0:
        return 0.0
    buckets = _grid_cells(targets, d)
    cells = np.floor(queries / d).astype(np.int64)
    d2 = d * d
    offsets = [
        (i, j, k) for i in (-1, 0, 1) for j in (-1, 0, 1) for k in (-1, 0, 1)
    ]
    matched = 0
    for q, c in zip(queries, cells):
        hit = False
        for off in offsets:
            bucket = buckets.get((c[0] + off[0], c[1] + off[1], c[2] + off[2]))
            if bucket is None:
                continue
            delta = targets[bucket] - q
            if (np.einsum("ij,ij->i", delta, delta) <= d2).any():
                hit = True
                break
        matched += hit
    return matched / len(queries)


def f_score_points(
    orig_points: np.ndarray, decomp_points: np.ndarray, d: float
) -> tuple[float, float, float]:
    """Precision/recall/F over fixed point sets (no sampling)."""
    precision = _matched_fraction(np.asarray(decomp_points, dtype=np.float64),
                                  np.asarray(orig_points, dtype=np.float64), d)
    recall = _matched_fraction(np.asarray(orig_points, dtype=np.float64),
                               np.asarray(decomp_points, dtype=np.float64), d)
    if precision + recall == 0:
        return 0.0, 0.0, 0.0
    return precision, recall, 2 * precision * recall / (precision + recall)


def f_score(
    orig: TexturedMesh, decomp: TexturedMesh, params: FScoreParams | None = None
) -> tuple[float, float, float]:
    """Surface-overlap F-score between two meshes.

    Each mesh is unit-cube normalized independently, then sampled
    area-uniformly with seeds derived from params.seed.
    """
    params = params or FScoreParams()
    s_orig = sample_surface(
        normalize_unit_cube(orig), params.sample_count, params.seed
    )
    s_decomp = sample_surface(
        normalize_unit_cube(decomp), params.sample_count, params.seed + 1
    )
    return f_score_points(
        s_orig.points, s_decomp.points, params.distance_threshold
    )


def cosine_score(view_a: ViewImage, view_b: ViewImage, embed) -> float:
    """Cosine similarity of two image embeddings; ``embed`` maps a view to a vector."""
    va = np.asarray(embed(view_a), dtype=np.float64)
    vb = np.asarray(embed(view_b), dtype=np.float64)
    na, nb = np.linalg.norm(va), np.linalg.norm(vb)
    if na == 0 or nb == 0:
        raise DomainError("zero-norm embedding")
    return float(va @ vb / (na * nb))


def mean_rank(rankings: list[list[int]]) -> list[float]:
    """Average zero-indexed position per method over best-to-worst rankings."""
    if not rankings:
        raise DomainError("need at least one ranking")
    m = len(rankings[0])
    totals = np.zeros(m)
    for ranking in rankings:
        if sorted(ranking) != list(range(m)):
            raise DomainError(f"not a permutation of 0..{m - 1}: {ranking}")
        for position, method in enumerate(ranking):
            totals[method] += position
    return (totals / len(rankings)).tolist()


@dataclass(frozen=True)
class ReportRow:
    label: str
    f: float | None = None
    c: float | None = None
    mr: float | None = None
    ratio: float | None = None
    error: str | None = None

    def __post_init__(self):
        if self.f is not None and not 0 <= self.f <= 1:
            raise DomainError(f"F out of range: {self.f}")
        if self.c is not None and not -1 <= self.c <= 1 + 1e-9:
            raise DomainError(f"cosine out of range: {self.c}")
        if self.mr is not None and self.mr < 0:
            raise DomainError(f"mean rank out of range: {self.mr}")
        if self.ratio is not None and self.ratio <= 0:
            raise DomainError(f"ratio out of range: {self.ratio}")


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ReportRow, ...]

    def to_csv_text(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["label", "f", "c", "mr", "ratio"])
        for row in self.rows:
            writer.writerow([
                row.label,
                "" if row.f is None else repr(row.f),
                "" if row.c is None else repr(row.c),
                "" if row.mr is None else repr(row.mr),
                "" if row.ratio is None else repr(row.ratio),
            ])
        return buf.getvalue()

    def to_text(self) -> str:
        head = ["Method", "F", "C", "MR", "x"]
        body = [head]
        for row in self.rows:
            if row.error is not None:
                body.append([row.label, "error: " + row.error, "", "", ""])
                continue
            body.append([
                row.label,
                "—" if row.f is None else f"{row.f:.2f}",
                "—" if row.c is None else f"{row.c:.2f}",
                "—" if row.mr is None else f"{row.mr:.2f}",
                "—" if row.ratio is None else f"{row.ratio:.1e}",
            ])
        widths = [max(len(r[c]) for r in body) for c in range(len(head))]
        return "\n".join(
            "  ".join(cell.ljust(widths[c]) for c, cell in enumerate(r)) for r in body
        )


def read_report_csv(path: str | os.PathLike) -> EvalReport:
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            rows.append(ReportRow(
                label=rec["label"],
                f=float(rec["f"]) if rec["f"] else None,
                c=float(rec["c"]) if rec["c"] else None,
                mr=float(rec["mr"]) if rec["mr"] else None,
                ratio=float(rec["ratio"]) if rec["ratio"] else None,
            ))
    return EvalReport(rows=tuple(rows))


def _front_view(mesh: TexturedMesh, config: RenderConfig) -> ViewImage:
    return render_views(normalize_unit_cube(mesh), config)["front"]


def _candidate_bytes(compressed, path: Path) -> int:
    if compressed is None:
        return size_breakdown(path).total_bytes
    if isinstance(compressed, (bytes, bytearray)):
        return len(compressed)
    return int(compressed)


def build_report(
    original: str | os.PathLike,
    candidates: list[tuple[str, str | os.PathLike, object]],
    params: FScoreParams | None = None,
    embed=None,
    rankings: list[list[int]] | None = None,
    render_config: RenderConfig | None = None,
) -> EvalReport:
    """Score each candidate against the original object.

    ``candidates`` holds (label, mesh path, compressed size) triples; the size
    may be an int, the packed container bytes, or None to use the candidate's
    own on-disk size (traditional baselines). Per-candidate failures become
    error rows rather than aborting the report.
    """
    params = params or FScoreParams()
    render_config = render_config or RenderConfig()
    if embed is None:
        embed_cfg = backends.mock_config("embedder")
        embed = lambda view: backends.embed_image(view, embed_cfg)  # noqa: E731

    orig_mesh = load_object(original)
    orig_bytes = size_breakdown(original).total_bytes
    orig_front = _front_view(orig_mesh, render_config)

    mrs = mean_rank(rankings) if rankings else [None] * len(candidates)
    if len(mrs) != len(candidates):
        raise DomainError("rankings must cover exactly the candidate methods")

    rows = []
    scored = []
    for (label, path, compressed), mr in zip(candidates, mrs):
        try:
            mesh = load_object(path)
            _, _, f = f_score(orig_mesh, mesh, params)
            c = cosine_score(orig_front, _front_view(mesh, render_config), embed)
            ratio = orig_bytes / _candidate_bytes(compressed, Path(path))
            row = ReportRow(label=label, f=f, c=c, mr=mr, ratio=ratio)
            scored.append(row)
        except Exception as exc:  # per-candidate failures stay in the report
            row = ReportRow(label=label, error=str(exc))
        rows.append(row)

    if scored:
        rows.append(ReportRow(
            label="average",
            f=float(np.mean([r.f for r in scored])),
            c=float(np.mean([r.c for r in scored])),
            mr=None if any(r.mr is None for r in scored)
            else float(np.mean([r.mr for r in scored])),
            ratio=float(np.mean([r.ratio for r in scored])),
        ))
    return EvalReport(rows=tuple(rows))


def save_report_figure(report: EvalReport, path: str | os.PathLike) -> None:
    """Render the report as bar panels (F, C, MR, log-scale ratio) to a file."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    rows = [r for r in report.rows if r.error is None and r.label != "average"]
    labels = [r.label for r in rows]
    fig, axes = plt.subplots(1, 4, figsize=(4 * max(3, len(rows)), 4))
    panels = [
        ("F-score", [r.f for r in rows], None),
        ("Embedding cosine", [r.c for r in rows], None),
        ("Mean rank", [r.mr for r in rows], None),
        ("Compression ratio", [r.ratio for r in rows], "log"),
    ]
    x = np.arange(len(rows))
    for ax, (title, values, scale) in zip(axes, panels):
        present = [(xi, v) for xi, v in zip(x, values) if v is not None]
        if present:
            ax.bar([p[0] for p in present], [p[1] for p in present], color="#4878a8")
        ax.set_title(title)
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=45, ha="right")
        if scale:
            ax.set_yscale(scale)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_sparsity_figure(table, path: str | os.PathLike) -> None:
    """Sparsity-vs-threshold curves per resolution with breakeven lines."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 4.5))
    cmap = plt.get_cmap("viridis")
    n = max(1, len(table.resolutions) - 1)
    for i, res in enumerate(table.resolutions):
        color = cmap(i / n)
        ax.errorbar(
            table.thresholds, table.mean[i], yerr=table.std[i],
            marker="o", capsize=3, label=f"D={res}", color=color,
        )
        if table.breakeven[i] is not None:
            ax.axhline(table.breakeven[i], linestyle="--", linewidth=0.8, color=color)
    ax.set_xlabel("edge threshold t")
    ax.set_ylabel("sparsity (%)")
    ax.set_title("Edge-map sparsity vs threshold (dashed: COO breakeven)")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
