"""Command-line surface: compress, decompress, baseline, eval, profile-sparsity, serve-rank.

Backend endpoints come from a key=value config file (``--config``); credentials
come from S3DC_<KIND>_KEY environment variables. Without a config file every
backend runs the offline deterministic mock, so all subcommands work with no
network. Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
from PIL import Image

from . import backends, container, evalkit, pipeline, rank_service
from .edgemap import profile_sparsity
from .errors import ToolkitError
from .geometry import DecimationParams, decimate
from .mesh_io import load_object, recode_texture, save_object, size_breakdown
from .render import RenderConfig

EDGE_THRESHOLD_PRESETS = (100, 250, 500, 750)
CHAR_BUDGET_PRESETS = (50, 100, 250)


def load_config(path: str | None) -> dict[str, str]:
    """Parse a key=value config file; '#' starts a comment."""
    values: dict[str, str] = {}
    if path is None:
        return values
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ToolkitError(f"{path}:{lineno}: expected key = value")
        key, value = line.split("=", 1)
        values[key.strip()] = value.strip()
    return values


def backend_configs(config: dict[str, str], mock_seed: int | None) -> dict:
    """One BackendConfig per kind; kinds without an endpoint fall back to mock."""
    seed = mock_seed if mock_seed is not None else int(config.get("mock_seed", 0))
    force_mock = config.get("backend", "").lower() == "mock"
    out = {}
    for kind in backends.BACKEND_KINDS:
        endpoint = config.get(f"{kind}.endpoint", "mock")
        if force_mock:
            endpoint = "mock"
        out[kind] = backends.BackendConfig(
            endpoint=endpoint,
            backend_kind=kind,
            credential=backends.credential_from_env(kind),
            timeout=float(config.get("timeout", 60.0)),
            retries=int(config.get("retries", 2)),
            mock_seed=seed,
            resolution=int(config.get("resolution", 256)),
            embed_dim=int(config.get("embed_dim", 512)),
        )
    return out


def _add_backend_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key=value backend config file")
    parser.add_argument("--mock-seed", type=int, default=None,
                        help="seed for the offline mock backends")


def cmd_compress(args) -> int:
    configs = backend_configs(load_config(args.config), args.mock_seed)
    job = pipeline.CompressionJob(
        input_path=args.input,
        mode=args.mode,
        char_budget=args.chars,
        edge_threshold=args.edge_threshold,
        render_config=RenderConfig(resolution=args.render_resolution),
        backend_configs=configs,
    )
    packed_container, stats = pipeline.compress(job)
    data = container.pack(packed_container)
    Path(args.output).write_bytes(data)
    print(f"wrote {args.output}: {len(data)} bytes "
          f"(original {stats.original_bytes}, ratio {stats.ratio:.3e})")
    return 0


def cmd_decompress(args) -> int:
    configs = backend_configs(load_config(args.config), args.mock_seed)
    raw = Path(args.input).read_bytes()
    mesh = pipeline.decompress_bytes(raw, configs)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "reconstruction.obj"
    breakdown = save_object(mesh, out_path)
    print(f"wrote {out_path}: {mesh.triangle_count} triangles, "
          f"{breakdown.total_bytes} bytes")
    return 0


def cmd_baseline(args) -> int:
    mesh = load_object(args.input)
    original = size_breakdown(args.input)
    mesh = decimate(mesh, DecimationParams(target_triangle_ratio=args.ratio))
    if mesh.texture is not None:
        mesh = recode_texture(mesh, args.quality)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / f"{Path(args.input).stem}_baseline.obj"
    breakdown = save_object(mesh, out_path)
    ratio = original.total_bytes / breakdown.total_bytes
    print(f"wrote {out_path}: {mesh.triangle_count} triangles, "
          f"{breakdown.total_bytes} bytes (ratio {ratio:.2f}x)")
    return 0


def _parse_candidate(spec: str) -> tuple[str, str, object]:
    if "=" not in spec:
        raise ToolkitError(f"candidate must be label=path[=container], got {spec!r}")
    parts = spec.split("=")
    label, path = parts[0], parts[1]
    compressed = None
    if len(parts) > 2:
        compressed = Path(parts[2]).stat().st_size
    return label, path, compressed


def cmd_eval(args) -> int:
    configs = backend_configs(load_config(args.config), args.mock_seed)
    embed_cfg = configs["embedder"]
    rankings = None
    if args.rankings:
        rankings = json.loads(Path(args.rankings).read_text())
    report = evalkit.build_report(
        original=args.original,
        candidates=[_parse_candidate(c) for c in args.candidate],
        params=evalkit.FScoreParams(seed=args.seed),
        embed=lambda view: backends.embed_image(view, embed_cfg),
        rankings=rankings,
    )
    out = Path(args.output)
    out.write_text(report.to_csv_text())
    figure = out.with_suffix(".png")
    evalkit.save_report_figure(report, figure)
    print(report.to_text())
    print(f"wrote {out} and {figure}")
    return 0


def cmd_profile_sparsity(args) -> int:
    views = []
    for path in sorted(Path(args.views_dir).iterdir()):
        if path.suffix.lower() in (".png", ".jpg", ".jpeg"):
            with Image.open(path) as img:
                views.append(np.asarray(img.convert("L"), dtype=np.float64))
    table = profile_sparsity(views, args.resolutions, args.thresholds)
    print(table.to_text())
    if args.output:
        out = Path(args.output)
        rows = ["resolution," + ",".join(
            f"mean_t{t:g},std_t{t:g}" for t in table.thresholds) + ",breakeven"]
        for i, res in enumerate(table.resolutions):
            cells = [f"{table.mean[i, j]!r},{table.std[i, j]!r}"
                     for j in range(len(table.thresholds))]
            be = "" if table.breakeven[i] is None else repr(table.breakeven[i])
            rows.append(f"{res}," + ",".join(cells) + f",{be}")
        out.write_text("\n".join(rows) + "\n")
        figure = out.with_suffix(".png")
        evalkit.save_sparsity_figure(table, figure)
        print(f"wrote {out} and {figure}")
    return 0


def cmd_serve_rank(args) -> int:
    rank_service.serve(args.data, args.port, host=args.host)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="s3dc",
        description="Semantic compression toolkit for textured 3D objects",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compress", help="compress an OBJ into a .s3dc container")
    p.add_argument("input")
    p.add_argument("--mode", choices=("semantic", "structured"), required=True)
    p.add_argument("--chars", type=int, required=True,
                   help=f"character budget (presets: {CHAR_BUDGET_PRESETS})")
    p.add_argument("--edge-threshold", type=int, default=None,
                   help=f"edge threshold for structured mode "
                        f"(presets: {EDGE_THRESHOLD_PRESETS})")
    p.add_argument("--render-resolution", type=int, default=256)
    p.add_argument("-o", "--output", required=True)
    _add_backend_flags(p)
    p.set_defaults(func=cmd_compress)

    p = sub.add_parser("decompress", help="reconstruct a mesh from a .s3dc container")
    p.add_argument("input")
    p.add_argument("-o", "--output", required=True, help="output directory")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_decompress)

    p = sub.add_parser("baseline",
                       help="traditional baseline: decimate + recode texture")
    p.add_argument("input")
    p.add_argument("--ratio", type=float, required=True,
                   help="target triangle ratio in (0, 1]")
    p.add_argument("--quality", type=int, default=75, help="JPEG quality 1..100")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("eval", help="score candidates against an original object")
    p.add_argument("--original", required=True)
    p.add_argument("--candidate", action="append", required=True,
                   metavar="LABEL=PATH[=CONTAINER]")
    p.add_argument("--rankings", help="JSON file of best-to-worst permutations")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="CSV path (figure: same stem .png)")
    _add_backend_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("profile-sparsity",
                       help="edge-map sparsity statistics over a view directory")
    p.add_argument("views_dir")
    p.add_argument("--resolutions", type=int, nargs="+", required=True)
    p.add_argument("--thresholds", type=float, nargs="+", required=True)
    p.add_argument("-o", "--output", default=None,
                   help="CSV path (figure: same stem .png)")
    p.set_defaults(func=cmd_profile_sparsity)

    p = sub.add_parser("serve-rank", help="run the human-ranking HTTP service")
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--data", required=True, help="session data directory")
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve_rank)
    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "command", None) == "compress":
        if args.mode == "structured" and args.edge_threshold is None:
            parser.error("structured mode requires --edge-threshold")
        if args.mode == "semantic" and args.edge_threshold is not None:
            parser.error("--edge-threshold only applies to structured mode")
    try:
        return args.func(args)
    except ToolkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> int:
    return run()


if __name__ == "__main__":
    sys.exit(run())
