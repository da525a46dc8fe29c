"""Command-line front end for range and reachability runs."""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import itertools
import json
import os
import sys
from typing import Sequence

import numpy as np

from . import BUNDLED_MODELS, model_path
from .expr import ExprError, ModelError, SystemModel, load_model
from .interval import DomainError, Interval
from .joint_range import SkewedBox
from .reach import (ORDERS, PRECONDITIONERS, REACH_METHODS, ReachOptions, ReachResult, compute_reach,
                    count_violations, iter_samples)

CSV_HEADER = ("step", "component", "under_lo", "under_hi", "over_lo", "over_hi")

EXIT_OK = 0
EXIT_PARSE = 1
EXIT_FLAGS = 2
EXIT_VIOLATION = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aereach",
                                     description="Inner and outer reachable sets of discrete-time systems.")
    sub = parser.add_subparsers(dest="command", required=True)
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", required=True,
                        help="model file, or the name of a bundled model such as sir.sys")
    common.add_argument("--steps", type=int, help="horizon (default: the model's)")
    common.add_argument("--method", choices=REACH_METHODS)
    common.add_argument("--order", choices=ORDERS, default="mv")
    common.add_argument("--quadrature", type=int, default=1, metavar="K",
                        help="ring count for the quadrature scheme (mv order only)")
    common.add_argument("--precondition", choices=PRECONDITIONERS, default="jacobian-center")
    common.add_argument("--robust", action="store_true", help="treat disturbances universally")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--samples", type=int, metavar="N")
    common.add_argument("--out", help="CSV output (default: stdout)")
    common.add_argument("--json", help="JSON sidecar with full set data")
    common.add_argument("--svg", help="SVG plot of the first two state components")
    sub.add_parser("reach", parents=[common], help="under and over sets at every step")
    sub.add_parser("range", parents=[common], help="under and over sets of the K-step image only")
    sub.add_parser("validate", parents=[common], help="check sampled trajectories against the over sets")
    return parser


def _options(args, parser: argparse.ArgumentParser) -> ReachOptions:
    if args.quadrature < 1:
        parser.error("--quadrature must be at least 1")
    if args.quadrature > 1 and args.order != "mv":
        parser.error("--quadrature applies to --order mv only")
    if args.steps is not None and args.steps < 0:
        parser.error("--steps must be nonnegative")
    if args.samples is not None and args.samples < 1:
        parser.error("--samples must be at least 1")
    method = args.method or ("unroll" if args.command == "range" else "iterate")
    return ReachOptions(method=method, order=args.order, quadrature_k=args.quadrature,
                        precondition=args.precondition, robust=args.robust, seed=args.seed,
                        steps=args.steps)


def resolve_model_path(arg: str) -> str:
    """``arg`` itself if it exists, else the bundled model of that name."""
    if os.path.exists(arg):
        return arg
    name = os.path.basename(arg)
    name = name[:-4] if name.endswith(".sys") else name
    if name in BUNDLED_MODELS:
        return model_path(name)
    return arg


def write_csv(result: ReachResult, stream, only_last: bool = False) -> int:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    steps = result.steps[-1:] if only_last else result.steps
    rows = 0
    for s in steps:
        for name, u, o in zip(result.states, s.under_proj, s.over_proj):
            writer.writerow([s.step, name, repr(u.lo), repr(u.hi), repr(o.lo), repr(o.hi)])
            rows += 1
    return rows


def read_csv(stream) -> list[tuple[int, str, Interval, Interval]]:
    reader = csv.reader(stream)
    header = tuple(next(reader))
    if header != CSV_HEADER:
        raise ValueError(f"unexpected CSV header {header}")
    out = []
    for step, name, ul, uh, ol, oh in reader:
        out.append((int(step), name, Interval(float(ul), float(uh)), Interval(float(ol), float(oh))))
    return out


def _hull(points: np.ndarray) -> np.ndarray:
    """Convex hull in counter-clockwise order (monotone chain); tolerates
    degenerate point sets, which plotting flat sets produces."""
    pts = sorted(set(map(tuple, points)))
    if len(pts) <= 2:
        return np.array(pts)

    def half(seq):
        chain: list[tuple[float, float]] = []
        for p in seq:
            while len(chain) >= 2:
                (ax, ay), (bx, by) = chain[-2], chain[-1]
                if (bx - ax) * (p[1] - ay) - (by - ay) * (p[0] - ax) > 0:
                    break
                chain.pop()
            chain.append(p)
        return chain

    lower, upper = half(pts), half(reversed(pts))
    return np.array(lower[:-1] + upper[:-1])


def _outline(s: SkewedBox, dims: tuple[int, int]) -> np.ndarray | None:
    r = np.array(s.gen_radius)
    if not np.all(np.isfinite(r)):
        return None
    G = np.array(s.gen_matrix) * r
    c = np.array(s.gen_center)
    signs = np.array(list(itertools.product((-1.0, 1.0), repeat=len(r))))
    corners = c + signs @ G.T
    return _hull(corners[:, list(dims)])


def render_svg(result: ReachResult, samples: list[np.ndarray] | None = None,
               dims: tuple[int, int] = (0, 1), size: int = 640) -> str:
    """2D projections of every step's under and over parallelotopes.

    Drawing only: coordinates come from float evaluation of the generator
    form, so the picture carries no guarantee.
    """
    shapes = []
    for s in result.steps:
        over = _outline(s.over, dims)
        if over is not None:
            shapes.append(("over", over))
        if s.under is not None:
            under = _outline(s.under, dims)
            if under is not None:
                shapes.append(("under", under))
    clouds = [pts[:, list(dims)] for pts in samples] if samples else []
    all_pts = [p for _, p in shapes] + clouds
    all_pts = np.vstack(all_pts) if all_pts else np.zeros((1, 2))
    lo, hi = all_pts.min(axis=0), all_pts.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    pad = 20

    def to_px(p: np.ndarray) -> np.ndarray:
        q = (p - lo) / span * (size - 2 * pad) + pad
        return np.column_stack([q[:, 0], size - q[:, 1]])

    style = {"over": 'fill="none" stroke="#1f5fbf" stroke-width="0.8"',
             "under": 'fill="#e06020" fill-opacity="0.35" stroke="#a04010" stroke-width="0.6"'}
    out = io.StringIO()
    out.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
              f'viewBox="0 0 {size} {size}">\n')
    out.write(f'<title>{result.model}: {result.states[dims[0]]} vs {result.states[dims[1]]}</title>\n')
    out.write(f'<rect width="{size}" height="{size}" fill="white"/>\n')
    for kind, poly in shapes:
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in to_px(poly))
        out.write(f'<polygon class="{kind}" points="{pts}" {style[kind]}/>\n')
    for cloud in clouds:
        for x, y in to_px(cloud):
            out.write(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="0.6" fill="#333"/>\n')
    out.write("</svg>\n")
    return out.getvalue()


def _emit(result: ReachResult, args, model: SystemModel, stdout, only_last: bool) -> None:
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_csv(result, fh, only_last)
    else:
        write_csv(result, stdout, only_last)
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result.to_json(), fh, indent=1)
    if args.svg:
        dims = (0, 1) if model.n >= 2 else (0, 0)
        clouds = None
        if args.samples:
            clouds = [p for _, p in iter_samples(model, args.samples, args.seed, len(result.steps) - 1)]
        with open(args.svg, "w") as fh:
            fh.write(render_svg(result, clouds, dims))


def run_cli(argv: Sequence[str] | None = None, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = build_parser()
    try:
        with contextlib.redirect_stderr(stderr), contextlib.redirect_stdout(stdout):
            args = parser.parse_args(argv)
            opts = _options(args, parser)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        model = load_model(resolve_model_path(args.model))
    except (OSError, ModelError, ExprError) as exc:
        print(f"{args.model}: {exc}", file=stderr)
        return EXIT_PARSE
    try:
        result = compute_reach(model, opts)
    except (ExprError, DomainError) as exc:
        # e.g. a logarithm whose argument range reaches zero
        print(f"{args.model}: evaluation failed: {exc}", file=stderr)
        return EXIT_PARSE
    for w in result.warnings:
        print(f"warning: {w}", file=stderr)
    if args.command == "validate":
        n_samples = args.samples or 10_000
        violations = count_violations(result, model, n_samples, args.seed)
        _emit(result, args, model, stdout, only_last=False)
        if violations:
            for step, count in violations:
                print(f"violation: step {step}: {count} of {n_samples} samples outside the over set",
                      file=stderr)
            return EXIT_VIOLATION
        print(f"ok: {n_samples} samples inside the over set at all {len(result.steps)} steps",
              file=stderr)
        return EXIT_OK
    _emit(result, args, model, stdout, only_last=args.command == "range")
    return EXIT_OK


def main() -> None:
    sys.exit(run_cli())
