"""Command-line orchestration: simulate, match, evaluate, sweep, speed.

Every result file is written together with a "<file>.manifest" (or, for
simulate, a manifest.txt in the output directory) recording the command, the
toolkit version, and all resolved parameters, so any figure can be reproduced
from its manifest alone. Outputs carry no timestamps: identical inputs and
flags give byte-identical files.

Exit codes: 0 success, 2 usage error, 3 validation error (malformed traverse
directories or parameter contracts), 4 I/O error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from dataclasses import fields
from pathlib import Path

from . import __version__
from .evaluation import (
    camera_speed_experiment,
    make_ground_truth,
    recall_curve,
    sweep_d_l,
    write_curve_csv,
    write_surface_csv,
)
from .pipeline import MatchParams, match_traverses
from .simworld import WorldConfig, generate_world, render_traverse
from .store import TraverseStoreError, load_traverse, save_traverse

EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4

DEFAULT_TOP_N = 5
DEFAULT_SEQUENCE_LENGTH = 12
DEFAULT_DEPTH_SAME_CONDITION = 50.0
DEFAULT_DEPTH_CROSS_CONDITION = 10.0
DEFAULT_VISUAL_OFFSET = 35.0

_CONFIG_INT_KEYS = {"landmark_count", "channel_count", "descriptor_dim", "seed"}
_CONFIG_DEFAULTS = {
    "path_length": 200.0,
    "landmark_count": 600,
    "lateral_spread": 8.0,
    "channel_count": 64,
    "descriptor_dim": None,  # defaults to channel_count
    "fov_half_angle": 0.9,
    "max_visible_range": 25.0,
    "frame_spacing": 2.0,
    "appearance_severity": 0.0,
    "aliasing_fraction": 0.0,
    "depth_noise_std": 0.0,
}


def _threads() -> int:
    raw = os.environ.get("VPR_THREADS", "")
    if not raw:
        return 1
    try:
        value = int(raw)
    except ValueError as e:
        raise ValueError(f"VPR_THREADS must be a positive integer, got {raw!r}") from e
    if value < 1:
        raise ValueError(f"VPR_THREADS must be a positive integer, got {value}")
    return value


def _write_manifest(path: Path, command: str, params: dict) -> None:
    lines = [f"command={command}", f"version={__version__}"]
    for key in sorted(params):
        lines.append(f"{key}={params[key]}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _parse_world_config(path: Path) -> WorldConfig:
    valid_keys = {f.name for f in fields(WorldConfig)}
    raw = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, value = (part.strip() for part in stripped.split("=", 1))
        raw[key] = value
    unknown = sorted(set(raw) - valid_keys)
    if unknown:
        raise UsageError(f"{path}: unknown config keys: {', '.join(unknown)}")
    if "seed" not in raw:
        raise UsageError(f"{path}: missing required config key: seed")

    values = dict(_CONFIG_DEFAULTS)
    values["seed"] = None
    for key, text in raw.items():
        try:
            values[key] = int(text) if key in _CONFIG_INT_KEYS else float(text)
        except ValueError as e:
            raise UsageError(f"{path}: config key {key}: {e}") from e
    if values["descriptor_dim"] is None:
        values["descriptor_dim"] = values["channel_count"]
    try:
        return WorldConfig(**values)
    except ValueError as e:
        raise UsageError(f"{path}: {e}") from e


class UsageError(Exception):
    pass


def _float_values(text: str, flag: str) -> list[float]:
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            values.append(float(part))
        except ValueError as e:
            raise UsageError(f"{flag}: {e}") from e
    if not values:
        raise UsageError(f"{flag}: no values given")
    return values


def _int_values(text: str, flag: str) -> list[int]:
    values = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            values.append(int(part))
        except ValueError as e:
            raise UsageError(f"{flag}: {e}") from e
    if not values:
        raise UsageError(f"{flag}: no values given")
    return values


def _check_even_length(length: int) -> None:
    if length < 0 or length % 2 != 0:
        raise UsageError(f"--l must be even and >= 0 (window spans l/2 frames each side), got {length}")


def _resolve_depth(d: float | None, query, reference) -> float:
    if d is not None:
        if not d > 0:
            raise UsageError(f"--d must be positive (use inf for unbounded), got {d}")
        return d
    if query.meta.condition == reference.meta.condition:
        return DEFAULT_DEPTH_SAME_CONDITION
    return DEFAULT_DEPTH_CROSS_CONDITION


def cmd_simulate(args) -> None:
    config = _parse_world_config(Path(args.config))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    world = generate_world(config)
    severity = config.appearance_severity
    label_ref = "base" if severity == 0 else "cond-a"
    label_qry = "base" if severity == 0 else "cond-b"
    reference = render_traverse(
        world, "forward", severity, condition_seed=(config.seed, 1), name="reference", condition=label_ref
    )
    query = render_traverse(
        world, "reverse", severity, condition_seed=(config.seed, 2), name="query", condition=label_qry
    )
    save_traverse(reference, out / "reference")
    save_traverse(query, out / "query")

    config_lines = [f"{f.name}={getattr(config, f.name)!r}" for f in fields(WorldConfig)]
    (out / "world_config.txt").write_text("\n".join(config_lines) + "\n", encoding="utf-8")

    params = {f.name: repr(getattr(config, f.name)) for f in fields(WorldConfig)}
    params.update(
        {
            "config": args.config,
            "out": str(out),
            "reference": str(out / "reference"),
            "query": str(out / "query"),
            "condition_seed_reference": f"({config.seed}, 1)",
            "condition_seed_query": f"({config.seed}, 2)",
        }
    )
    _write_manifest(out / "manifest.txt", "simulate", params)


def _write_matches_csv(path: Path, matches, query, reference) -> None:
    lines = ["query_id,matched_ref_id,score,candidates"]
    for m in matches:
        qid = query.frames[m.query_index].frame_id
        rid = reference.frames[m.reference_index].frame_id
        cands = " ".join(str(reference.frames[c].frame_id) for c in m.candidates)
        lines.append(f"{qid},{rid},{m.score:.6f},{cands}")
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def cmd_match(args) -> None:
    query = load_traverse(args.query)
    reference = load_traverse(args.reference)
    _check_even_length(args.l)
    d = _resolve_depth(args.d, query, reference)
    params = MatchParams(depth_limit=d, sequence_length=args.l, top_n=args.n, stride=args.stride)
    matches = match_traverses(query, reference, params)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_matches_csv(out, matches, query, reference)
    _write_manifest(
        Path(str(out) + ".manifest"),
        "match",
        {
            "query": args.query,
            "reference": args.reference,
            "out": str(out),
            "d": repr(d),
            "l": args.l,
            "n": args.n,
            "stride": args.stride,
        },
    )


def _read_matches_csv(path: Path, query, reference) -> list[tuple[int, int]]:
    lines = path.read_text(encoding="utf-8").splitlines()
    if not lines or lines[0] != "query_id,matched_ref_id,score,candidates":
        raise ValueError(f"{path}: not a matches CSV (bad header)")
    qindex = {f.frame_id: i for i, f in enumerate(query.frames)}
    rindex = {f.frame_id: i for i, f in enumerate(reference.frames)}
    pairs = []
    for lineno, line in enumerate(lines[1:], 2):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise ValueError(f"{path}:{lineno}: expected 4 fields, got {len(parts)}")
        qid, rid = int(parts[0]), int(parts[1])
        if qid not in qindex:
            raise ValueError(f"{path}:{lineno}: query frame id {qid} not in {args_name(path)}")
        if rid not in rindex:
            raise ValueError(f"{path}:{lineno}: reference frame id {rid} unknown")
        pairs.append((qindex[qid], rindex[rid]))
    return pairs


def args_name(path) -> str:
    return str(path)


def cmd_evaluate(args) -> None:
    query = load_traverse(args.query)
    reference = load_traverse(args.reference)
    radii = _float_values(args.radii, "--radii")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise UsageError(f"--radii must be strictly increasing, got {radii}")
    pairs = _read_matches_csv(Path(args.matches), query, reference)
    gt = make_ground_truth(query, reference, args.offset)
    curve = recall_curve(pairs, gt, radii)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_curve_csv(out, curve)
    _write_manifest(
        Path(str(out) + ".manifest"),
        "evaluate",
        {
            "matches": args.matches,
            "query": args.query,
            "reference": args.reference,
            "out": str(out),
            "offset": repr(float(args.offset)),
            "radii": ",".join(repr(r) for r in radii),
        },
    )


def _sweep_args(args, query, reference):
    d_grid = _float_values(args.d_grid, "--d-grid")
    l_grid = _int_values(args.l_grid, "--l-grid")
    if any(d <= 0 for d in d_grid):
        raise UsageError(f"--d-grid values must be positive, got {d_grid}")
    return d_grid, l_grid


def cmd_sweep(args) -> None:
    query = load_traverse(args.query)
    reference = load_traverse(args.reference)
    d_grid, l_grid = _sweep_args(args, query, reference)
    surface = sweep_d_l(
        query,
        reference,
        d_grid,
        l_grid,
        top_n=args.n,
        radius=args.radius,
        stride=args.stride,
        visual_offset=args.offset,
        threads=_threads(),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_surface_csv(out, surface)
    _write_manifest(
        Path(str(out) + ".manifest"),
        "sweep",
        {
            "query": args.query,
            "reference": args.reference,
            "out": str(out),
            "d_grid": ",".join(repr(d) for d in d_grid),
            "l_grid": ",".join(str(l) for l in l_grid),
            "stride": args.stride,
            "radius": repr(float(args.radius)),
            "n": args.n,
            "offset": repr(float(args.offset)),
        },
    )


def cmd_speed(args) -> None:
    query = load_traverse(args.query)
    reference = load_traverse(args.reference)
    d_grid, l_grid = _sweep_args(args, query, reference)
    strides = _int_values(args.strides, "--strides")
    if any(m < 1 for m in strides):
        raise UsageError(f"--strides must be positive, got {strides}")
    surfaces = camera_speed_experiment(
        query,
        reference,
        d_grid,
        l_grid,
        strides,
        top_n=args.n,
        radius=args.radius,
        visual_offset=args.offset,
        threads=_threads(),
    )
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    for stride, surface in zip(strides, surfaces):
        path = out.with_name(f"{out.stem}_stride{stride}{out.suffix}")
        write_surface_csv(path, surface)
        _write_manifest(
            Path(str(path) + ".manifest"),
            "speed",
            {
                "query": args.query,
                "reference": args.reference,
                "out": str(path),
                "d_grid": ",".join(repr(d) for d in d_grid),
                "l_grid": ",".join(str(l) for l in l_grid),
                "strides": ",".join(str(m) for m in strides),
                "stride": stride,
                "radius": repr(float(args.radius)),
                "n": args.n,
                "offset": repr(float(args.offset)),
            },
        )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seq2single",
        description="Depth- and temporal-aware sequence-to-single place matching toolkit.",
        epilog=(
            "Exit codes: 0 success, 2 usage error, 3 validation error "
            "(malformed traverses or parameter contracts), 4 I/O error. "
            "The environment variable VPR_THREADS (positive integer) caps internal parallelism."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic opposing-viewpoint traverse pair")
    p.add_argument("config", help="key=value world config file (seed is required)")
    p.add_argument("out", help="output directory (reference/ and query/ are written inside)")
    p.set_defaults(func=cmd_simulate)

    def add_match_flags(p, with_l=True):
        p.add_argument("--d", type=float, default=None,
                       help="depth range threshold in meters, inf for unbounded "
                            "(default: 50 if the condition labels match, else 10)")
        if with_l:
            p.add_argument("--l", type=int, default=DEFAULT_SEQUENCE_LENGTH,
                           help="reference sequence length, even (window spans l/2 frames each side)")
        p.add_argument("--n", type=int, default=DEFAULT_TOP_N, help="retrieval candidates per query")
        p.add_argument("--stride", type=int, default=1, help="frame skip rate inside the window")

    p = sub.add_parser("match", help="match every query frame against a reference traverse")
    p.add_argument("query")
    p.add_argument("reference")
    add_match_flags(p)
    p.add_argument("--out", required=True, help="matches CSV path")
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("evaluate", help="recall curve for a matches CSV")
    p.add_argument("matches", help="matches CSV from the match command")
    p.add_argument("query")
    p.add_argument("reference")
    p.add_argument("--offset", type=float, default=DEFAULT_VISUAL_OFFSET,
                   help="visual offset in meters applied along the query travel direction")
    p.add_argument("--radii", required=True, help="comma-separated localization radii, ascending")
    p.add_argument("--out", required=True, help="recall curve CSV path")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("sweep", help="recall over a (depth, sequence length) grid")
    p.add_argument("query")
    p.add_argument("reference")
    p.add_argument("--d-grid", required=True, help="comma-separated depth thresholds (inf allowed)")
    p.add_argument("--l-grid", required=True, help="comma-separated even sequence lengths")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--radius", type=float, default=10.0, help="localization radius in meters")
    p.add_argument("--n", type=int, default=DEFAULT_TOP_N)
    p.add_argument("--offset", type=float, default=DEFAULT_VISUAL_OFFSET)
    p.add_argument("--out", required=True, help="sweep surface CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("speed", help="one sweep surface per frame-skip stride")
    p.add_argument("query")
    p.add_argument("reference")
    p.add_argument("--d-grid", required=True)
    p.add_argument("--l-grid", required=True)
    p.add_argument("--strides", default="1,2,4", help="comma-separated frame skip rates")
    p.add_argument("--radius", type=float, default=10.0)
    p.add_argument("--n", type=int, default=DEFAULT_TOP_N)
    p.add_argument("--offset", type=float, default=DEFAULT_VISUAL_OFFSET)
    p.add_argument("--out", required=True,
                   help="base CSV path; each surface is written as <stem>_strideM<suffix>")
    p.set_defaults(func=cmd_speed)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except TraverseStoreError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
