"""Command-line entry point: run a seeded benchmark suite and write CSV rows.

Exit status is 0 when the suite ran, 2 on a configuration error and 3 when
every trial was infeasible (no scenario, no candidate grasp or no grasp at
the requested rank), so no grasp was ever executed.
"""

from __future__ import annotations

import argparse
import sys

from .fixtures import FixtureError, load_fixtures
from .harness import config_from_fixtures, parse_rank, rows_to_csv, run_suite, write_csv
from .kinematics import DEFAULT_PHI_SAMPLES
from .planner import DEFAULT_BUDGET, MODES

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3

TASKS = {"pick-place": "pick_place", "pour": "pour"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _rank(text: str) -> str:
    try:
        parse_rank(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="graspmetric", description="Seeded desk-scale grasp-selection benchmark.")
    p.add_argument("--seed", type=_seed, default=0, help="suite seed (unsigned 64-bit)")
    p.add_argument("--trials", type=_positive, default=100, help="trials per fixture object or pair")
    p.add_argument("--task", choices=sorted(TASKS), default="pick-place")
    p.add_argument("--mode", choices=[*MODES, "all"], default="all", help="ranking mode(s) to evaluate")
    p.add_argument("--rank", type=_rank, default="best", help="best | worst | index:<k>")
    p.add_argument("--fixtures", default=None, help="fixture file (default: bundled desk fixture)")
    p.add_argument("--out", default=None, help="CSV output path (default: stdout)")
    p.add_argument("--phi-samples", type=_positive, default=DEFAULT_PHI_SAMPLES)
    p.add_argument("--budget", type=_positive, default=DEFAULT_BUDGET, help="planner node budget per query")
    p.add_argument("--workers", type=_positive, default=1, help="parallel worker processes")
    p.add_argument("--objects", default=None, help="comma-separated subset of object (or pourer) names")
    p.add_argument("--quiet", action="store_true", help="suppress the summary table")
    return p


def _select(objects, names):
    if names is None:
        return tuple(objects)
    wanted = [n.strip() for n in names.split(",") if n.strip()]
    label = (lambda o: o.name) if not objects or not isinstance(objects[0], tuple) else (lambda o: o[0].name)
    chosen = tuple(o for o in objects if label(o) in wanted)
    missing = set(wanted) - {label(o) for o in chosen}
    if missing:
        raise ValueError(f"unknown object name(s): {', '.join(sorted(missing))}")
    return chosen


def _print_summary(summary, stream) -> None:
    print(f"{'object':<28} {'mode':<8} {'success':>9} {'disp_m':>8} {'nodes':>9}", file=stream)
    for s in summary:
        disp = "-" if s["successes"] == 0 else f"{s['mean_disp_m']:.3f}"
        rate = f"{s['successes']}/{s['trials']}"
        print(f"{s['object']:<28} {s['mode']:<8} {rate:>9} {disp:>8} {s['mean_nodes']:>9.1f}", file=stream)


def _infeasible(row) -> bool:
    return row.stage == "no-grasp" or row.stage == "rank" or row.stage.startswith("error:")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        fixtures = load_fixtures(args.fixtures)
        kind = TASKS[args.task]
        objects = fixtures.objects_for("pick") if kind == "pick_place" else fixtures.pairs
        config = config_from_fixtures(
            fixtures,
            kind,
            objects=_select(objects, args.objects),
            seed=args.seed,
            trials=args.trials,
            modes=MODES if args.mode == "all" else (args.mode,),
            rank=args.rank,
            phi_samples=args.phi_samples,
            budget=args.budget,
            workers=args.workers,
        )
    except (FixtureError, ValueError) as exc:
        print(f"graspmetric: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    rows, summary = run_suite(config)
    if args.out is None:
        sys.stdout.write(rows_to_csv(rows))
    else:
        write_csv(rows, args.out)
    if not args.quiet:
        _print_summary(summary, sys.stderr if args.out is None else sys.stdout)
    if all(_infeasible(r) for r in rows):
        print("graspmetric: every trial was infeasible", file=sys.stderr)
        return EXIT_INFEASIBLE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
