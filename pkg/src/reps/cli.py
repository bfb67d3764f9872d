"""Command line: ``reps solve|verify|bench --config PATH [--seed U64] [--out DIR] [--strict]``.

Exit codes: 0 success, 1 bad config or input, 2 numerical failure, 3 a check
failed (``verify`` always, ``solve`` only with ``--strict``).
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import experiment
from .errors import InvalidInput, NumericalFailure

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CHECK = 0, 1, 2, 3


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"{text} is not an unsigned 64-bit integer")
    return value


class _Parser(argparse.ArgumentParser):
    """Usage errors are configuration errors, so they exit 1 rather than argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="reps", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in [("solve", "run the configured solver and write logs, policy and summary"),
                            ("verify", "run the inequality checks on the configured instance family"),
                            ("bench", "print solver throughput as CSV")]:
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, type=Path, help="experiment JSON file")
        p.add_argument("--seed", type=_u64, default=None, help="override the master seed")
        p.add_argument("--out", type=Path, default=None, help="output directory")
        p.add_argument("--strict", action="store_true", help="exit 3 when any check fails")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _report_lines(reports):
    for r in reports:
        status = "PASS" if r.passed else "FAIL"
        yield f"{status} {r.check} gap={r.gap:.3e} bound={r.bound:.3e} {r.context}"


def cmd_solve(args) -> int:
    cfg = experiment.with_seed(experiment.load_config(args.config), args.seed)
    res = experiment.run_solve(cfg)
    out = args.out or Path("runs") / cfg.name
    experiment.write_solve_outputs(res, out)
    s = res.summary
    print(f"{cfg.name}: t={s['iterations']} jd={s['jd']:.12g} grad_l1={s['grad_l1']:.3e} "
          f"suboptimality={s['suboptimality']:.3e} -> {out}")
    failed = [r for r in res.reports if not r.passed]
    for line in _report_lines(failed):
        print(line)
    return EXIT_CHECK if (args.strict and failed) else EXIT_OK


def cmd_verify(args) -> int:
    cfg = experiment.with_seed(experiment.load_config(args.config), args.seed)
    reports = experiment.run_verify(cfg)
    out = args.out or Path("runs") / f"{cfg.name}-verify"
    experiment.write_verify_outputs(reports, cfg, out)
    failed = [r for r in reports if not r.passed]
    for line in _report_lines(failed):
        print(line)
    print(f"{cfg.name}: {len(reports) - len(failed)}/{len(reports)} checks passed -> {out}")
    return EXIT_CHECK if failed else EXIT_OK


def cmd_bench(args) -> int:
    cfg = experiment.with_seed(experiment.load_config(args.config), args.seed)
    text = experiment.bench_csv(experiment.run_bench(cfg))
    sys.stdout.write(text)
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "bench.csv").write_text(text, encoding="utf-8")
    return EXIT_OK


COMMANDS = {"solve": cmd_solve, "verify": cmd_verify, "bench": cmd_bench}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InvalidInput as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
