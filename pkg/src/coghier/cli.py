"""Command-line entry point.

Subcommands: ``validate`` checks a hierarchy or causal-tree document,
``bp`` runs the tree-versus-hierarchy equivalence suite, ``servo`` runs the
tracking experiment. Exit codes: 0 success, 1 semantic failure (validation
violations, equivalence failures, missing context dominance), 2 input
errors. All randomness is seeded through explicit flags.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bp, documents, kernel, servo


@dataclass(frozen=True)
class RunManifest:
    """What a single CLI invocation depends on and produces."""

    command: str
    inputs: tuple[str, ...] = ()
    seed: int = 0
    output: str | None = None
    output_format: str = "json"
    tolerance: float = 1e-9

    def check(self) -> list[str]:
        problems = []
        for path in self.inputs:
            if not os.path.exists(path):
                problems.append(f"input path does not exist: {path}")
        if self.tolerance < 0:
            problems.append("tolerance must be non-negative")
        if self.output_format not in ("json", "csv"):
            problems.append(f"unknown output format {self.output_format!r}")
        return problems


def _load_json(path: str) -> dict:
    with open(path) as handle:
        return json.load(handle)


def _fmt_vector(vec) -> str:
    return "[" + ", ".join(f"{float(x):.6g}" for x in vec) + "]"


def cmd_validate(args: argparse.Namespace) -> int:
    manifest = RunManifest(command="validate", inputs=(args.path,))
    problems = manifest.check()
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 2
    try:
        doc = _load_json(args.path)
    except json.JSONDecodeError as exc:
        print(f"parse error in {args.path}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read {args.path}: {exc}", file=sys.stderr)
        return 2

    try:
        kind = documents.document_kind(doc)
        if kind == "tree":
            tree = bp.tree_from_document(doc)
            violations = bp.tree_violations(tree)
        else:
            hierarchy = documents.load_hierarchy_document(doc)
            violations = kernel.validate(hierarchy).format_lines()
    except (documents.DocumentError, ValueError) as exc:
        print(f"parse error in {args.path}: {exc}", file=sys.stderr)
        return 2

    for line in violations:
        print(line)
    if violations:
        print(f"{args.path}: {len(violations)} violation(s)")
        return 1
    print(f"{args.path}: OK ({kind})")
    return 0


def cmd_bp(args: argparse.Namespace) -> int:
    inputs = (args.path,) if args.path else ()
    manifest = RunManifest(command="bp", inputs=inputs, seed=args.seed, tolerance=args.tolerance)
    problems = manifest.check()
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 2

    trees: list[tuple[str, bp.CausalTree]] = []
    if args.path:
        try:
            doc = _load_json(args.path)
            tree = bp.tree_from_document(doc)
        except (json.JSONDecodeError, OSError, ValueError, KeyError) as exc:
            print(f"parse error in {args.path}: {exc}", file=sys.stderr)
            return 2
        bad = bp.tree_violations(tree)
        if bad:
            for line in bad:
                print(line, file=sys.stderr)
            return 2
        trees.append((os.path.basename(args.path), tree))
    else:
        rng = np.random.default_rng(args.seed)
        for i in range(args.random):
            trees.append(
                (
                    f"tree-{i:03d}",
                    bp.random_tree(
                        rng,
                        max_depth=args.max_depth,
                        max_branching=args.max_branch,
                        dims=(2, args.max_dim),
                    ),
                )
            )

    all_passed = True
    for name, tree in trees:
        report = bp.equivalence_check(tree, tolerance=args.tolerance)
        status = "PASS" if report.passed else "FAIL"
        extra = f" ({report.detail})" if report.detail else ""
        print(
            f"{name}: {status} nodes={len(tree.processors)} "
            f"max_deviation={report.max_deviation:.3e} ticks={report.ticks}{extra}"
        )
        if report.degenerate:
            print(f"{name}: degenerate evidence at {', '.join(report.degenerate)}")
        all_passed = all_passed and report.passed
    if args.path:
        table = bp.bp_propagate(trees[0][1])
        for pid in sorted(table.beliefs):
            print(f"BEL({pid}) = {_fmt_vector(table.beliefs[pid])}")
    return 0 if all_passed else 1


def cmd_servo(args: argparse.Namespace) -> int:
    output = args.csv or args.json_path
    manifest = RunManifest(
        command="servo",
        seed=args.seed,
        output=output,
        output_format="csv" if args.csv else "json",
    )
    problems = manifest.check()
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 2
    try:
        params = servo.ServoParams(
            accel=args.accel,
            dt=args.dt,
            duration=args.duration,
            noise_sigma=args.noise_sigma,
            kalman_gain=args.gain,
            seed=args.seed,
            trials=args.trials,
        )
    except ValueError as exc:
        print(f"bad parameters: {exc}", file=sys.stderr)
        return 2

    modes = servo.MODES if args.mode == "both" else (args.mode,)
    summary = servo.run_experiment(params, modes=modes)
    if args.csv:
        servo.write_csv(args.csv, summary)
    if args.json_path:
        servo.write_json(args.json_path, summary)

    for mode in modes:
        stats = summary.per_mode[mode]
        print(f"{mode}: mean={stats.mean:.6f} std={stats.std:.6f} n={stats.n}")
    if summary.reduction_percent is not None:
        print(f"reduction: {summary.reduction_percent:.2f}%")

    if len(modes) < 2:
        return 0
    by_trial: dict[int, dict[str, float]] = {}
    for row in summary.rows:
        by_trial.setdefault(row.trial, {})[row.mode] = row.mean_error
    dominated = all(
        errs["context"] < errs["no_context"] for errs in by_trial.values() if len(errs) == 2
    )
    if not dominated:
        print("context mode did not dominate on every trial", file=sys.stderr)
    return 0 if dominated else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coghier",
        description="Cognitive-hierarchy engine: validate documents, run the "
        "belief-propagation equivalence suite, run the tracking experiment.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_val = sub.add_parser("validate", help="validate a hierarchy or causal-tree document")
    p_val.add_argument("path", help="JSON document to check")
    p_val.set_defaults(func=cmd_validate)

    p_bp = sub.add_parser("bp", help="check tree propagation against the encoded hierarchy")
    p_bp.add_argument("path", nargs="?", help="causal-tree JSON document")
    p_bp.add_argument("--random", type=int, default=0, metavar="N", help="run N random trees")
    p_bp.add_argument("--seed", type=int, default=7)
    p_bp.add_argument("--tolerance", type=float, default=1e-9)
    p_bp.add_argument("--max-depth", type=int, default=4)
    p_bp.add_argument("--max-branch", type=int, default=3)
    p_bp.add_argument("--max-dim", type=int, default=5)
    p_bp.set_defaults(func=cmd_bp)

    p_servo = sub.add_parser("servo", help="run the camera-tracking experiment")
    p_servo.add_argument("--accel", type=float, default=8.49)
    p_servo.add_argument("--dt", type=float, default=0.05)
    p_servo.add_argument("--duration", type=float, default=3.0)
    p_servo.add_argument("--noise-sigma", type=float, default=0.1)
    p_servo.add_argument("--gain", type=float, default=0.25)
    p_servo.add_argument("--seed", type=int, default=42)
    p_servo.add_argument("--trials", type=int, default=100)
    p_servo.add_argument(
        "--mode", choices=("both",) + servo.MODES, default="both", help="which arm(s) to run"
    )
    p_servo.add_argument("--csv", metavar="PATH", help="write per-trial results as CSV")
    p_servo.add_argument("--json", dest="json_path", metavar="PATH", help="write summary as JSON")
    p_servo.set_defaults(func=cmd_servo)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("COGHIER_LOG_LEVEL", "WARNING"))
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bp" and not args.path and args.random <= 0:
        parser.error("bp needs a document path or --random N")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
