"""Command-line entry point: ``tamatch <subcommand>``.

Exit codes: 0 success, 1 usage error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import bench
from .algorithms import TaMParams, hardness_demo
from .core import InvalidInput
from .instances import (
    CorruptionKind,
    CorruptionSpec,
    HardInstanceParams,
    arrival_sequence,
    corrupt_advice,
    gen_hard_instance,
    load_histogram,
    save_histogram,
)
from .matching import max_matching_size

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=2000, help="offline side size (even)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--alpha", type=float, default=0.0, help="fraction of corrupted online vertices")
    p.add_argument("--kind", choices=[k.value for k in CorruptionKind], default="replace")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tamatch", description="Online bipartite matching with tested histogram advice.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="write a hard instance and corrupted advice")
    _add_instance_args(p)
    p.add_argument("--out-dir", type=Path, default=Path("."))

    p = sub.add_parser("run", help="one run of a variant; prints the outcome")
    _add_instance_args(p)
    p.add_argument("--instance", type=Path, help="instance file (overrides --n/--seed generation)")
    p.add_argument("--advice", type=Path, help="advice file (defaults to corrupting the instance)")
    p.add_argument("--variant", choices=list(bench.VARIANTS), default="TaM-all")
    p.add_argument("--beta", type=float, default=TaMParams.beta)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--delta", type=float, default=TaMParams.delta)
    p.add_argument("--constant", type=float, default=TaMParams.constant)
    p.add_argument("--gamma", type=float, default=TaMParams.gamma)
    p.add_argument("--bucket-fraction", type=float, default=TaMParams.bucket_fraction)

    p = sub.add_parser("sweep", help="full grid to CSV")
    p.add_argument("--config", type=Path, help="TOML file; omitted keys take their defaults")
    p.add_argument("--out", type=Path, default=Path("results.csv"))
    p.add_argument("--workers", type=int, default=None, help=f"worker processes (default ${bench.WORKERS_ENV} or 1)")
    p.add_argument("--print-config", action="store_true", help="print the effective config and exit")

    p = sub.add_parser("plot", help="CSV to one SVG per corruption kind")
    p.add_argument("csv", type=Path)
    p.add_argument("--out-dir", type=Path, default=None, help="defaults to the CSV's directory")

    p = sub.add_parser("demo-hardness", help="ratios of advice-committed play on the two gadgets")
    p.add_argument("--n", type=int, default=1000)

    p = sub.add_parser("selftest", help="randomized invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=100)
    return parser


def _cmd_generate(args) -> int:
    c_star = gen_hard_instance(HardInstanceParams(args.n, seed=args.seed))
    advice = corrupt_advice(c_star, CorruptionSpec(args.alpha, CorruptionKind(args.kind), args.seed))
    args.out_dir.mkdir(parents=True, exist_ok=True)
    save_histogram(c_star, args.out_dir / "instance.txt")
    save_histogram(advice, args.out_dir / "advice.txt")
    print(f"wrote {args.out_dir / 'instance.txt'} and {args.out_dir / 'advice.txt'}")
    return EXIT_OK


def _cmd_run(args) -> int:
    if args.instance is not None:
        c_star = load_histogram(args.instance)
    else:
        c_star = gen_hard_instance(HardInstanceParams(args.n, seed=args.seed))
    if args.advice is not None:
        advice = load_histogram(args.advice)
    else:
        advice = corrupt_advice(c_star, CorruptionSpec(args.alpha, CorruptionKind(args.kind), args.seed))
    n = c_star.n
    params = TaMParams(args.beta, args.epsilon, args.delta, args.constant, args.gamma, args.bucket_fraction)
    arrivals = arrival_sequence(c_star, args.seed)
    n_star = max_matching_size(c_star)
    m, verdict, l1, k = bench.run_variant(bench.VARIANTS[args.variant], arrivals, n, advice, params, args.seed, n_star)
    l1s = "nan" if l1 != l1 else f"{l1:.6f}"
    print(
        f"variant={args.variant} n={n} seed={args.seed} m={m} n_star={n_star} "
        f"ratio={m / n_star:.6f} verdict={verdict} l1_hat={l1s} k={k}"
    )
    return EXIT_OK


def _cmd_sweep(args) -> int:
    spec = bench.SweepSpec.from_toml(args.config) if args.config else bench.SweepSpec()
    if args.print_config:
        sys.stdout.write(spec.to_toml())
        return EXIT_OK
    rows = bench.run_sweep(spec, workers=args.workers)
    bench.emit_csv(rows, args.out)
    errors = sum(r.test_verdict.startswith("error") for r in rows)
    print(f"wrote {len(rows)} rows to {args.out}" + (f" ({errors} failed cells)" if errors else ""))
    return EXIT_OK


def _cmd_plot(args) -> int:
    rows = bench.read_csv(args.csv)
    out_dir = args.out_dir or args.csv.parent
    out_dir.mkdir(parents=True, exist_ok=True)
    kinds = list(dict.fromkeys(r.kind for r in rows))
    if not kinds:
        raise InvalidInput(f"{args.csv} has no rows")
    for kind in kinds:
        path = out_dir / f"{args.csv.stem}_{kind}.svg"
        bench.plot(rows, kind, path)
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_demo(args) -> int:
    right = hardness_demo(args.n, 1, 1)
    wrong = hardness_demo(args.n, 1, 2)
    print(f"correct advice: ratio {float(right):.3f}")
    print(f"wrong advice:   ratio {float(wrong):.3f}")
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest

    results = run_selftest(args.seed, args.trials)
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}" + (f"  ({r.detail})" if r.detail else ""))
    return EXIT_OK if all(r.ok for r in results) else EXIT_RUNTIME


COMMANDS = {
    "generate": _cmd_generate,
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "plot": _cmd_plot,
    "demo-hardness": _cmd_demo,
    "selftest": _cmd_selftest,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except InvalidInput as exc:
        print(f"tamatch: invalid input: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"tamatch: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
