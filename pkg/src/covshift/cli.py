"""Command-line entry point: ``covshift <subcommand> ...``.

Exit status is 0 on success, 1 when an input fails validation (or a
``verify`` check fails) and 2 on file errors.
"""

from __future__ import annotations

import argparse
import sys
from fractions import Fraction

from . import experiments as ex
from .bounds import bound_report
from .instance import dump_instance, parse_key_values
from .oracle import expected_excess_risk
from .output import emit_csv, emit_svg, format_csv, read_csv
from .sgd import Schedule
from .verify import verify


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _sweep_fields(args):
    # flag values as config-file strings, so both routes share one parser
    fields = {}
    if args.config:
        with open(args.config) as fh:
            fields.update(parse_key_values(fh.read()))
    pairs = {
        "instance_spec": args.instance,
        "mode": args.mode,
        "sample_grid": args.samples,
        "gamma_grid": args.gammas,
        "pretrain_budget": args.pretrain_budget,
        "repeats": args.repeats,
        "base_seed": args.seed,
        "evaluator": args.evaluator,
    }
    fields.update({k: str(v) for k, v in pairs.items() if v is not None})
    return fields


def cmd_gen_instance(args):
    _write(dump_instance(ex.resolve_instance(args.instance)), args.out)


def cmd_sweep(args):
    cfg = ex.config_from_mapping(_sweep_fields(args))
    rows = ex.run_sweep(cfg, workers=args.workers)
    if args.out in (None, "-"):
        sys.stdout.write(format_csv(rows))
    else:
        emit_csv(rows, args.out)


def cmd_tune(args):
    fields = _sweep_fields(args)
    cfg = ex.config_from_mapping(fields)
    lines = []
    for size in cfg.sample_grid:
        g0, gm = ex.tune_stepsizes(cfg, size)
        lines.append(f"sample_size = {size}\ngamma0 = {g0:.15g}\ngammaM = {gm:.15g}\n")
    _write("\n".join(lines), args.out)


def cmd_bounds(args):
    inst = ex.resolve_instance(args.instance)
    sched = Schedule(args.m, args.n, args.gamma0, args.gammaM)
    rep = bound_report(inst, sched)
    risk = expected_excess_risk(inst, sched)
    text = rep.to_text() + f"oracle_bias = {risk.bias:.15g}\noracle_variance = {risk.variance:.15g}\n"
    _write(text, args.out)


def cmd_verify(args):
    report = verify(seed=args.seed if args.seed is not None else 0, repeats=args.repeats or 400)
    _write(report.to_text(), args.out)
    return 0 if report.ok else 1


def cmd_example1(args):
    eps = tuple(float(Fraction(tok)) for tok in args.eps.split(",") if tok.strip())
    res = ex.example1_study(eps, cap=args.cap)
    text = "\n".join(res.to_csv_lines()) + "\n"
    text += f"# supervised_exponent = {res.supervised_exponent:.15g}\n"
    text += f"# pretrain_exponent = {res.pretrain_exponent:.15g}\n"
    _write(text, args.out)


def cmd_plot(args):
    rows = []
    for path in args.csv:
        rows += read_csv(path)
    emit_svg(rows, args.out, title=args.title or "")


def _sweep_flags(p):
    p.add_argument("--config", help="key = value file with SweepConfig fields")
    p.add_argument("--instance", help="pk:K:D, example1:EPS or an instance file")
    p.add_argument("--mode", choices=ex.MODES)
    p.add_argument("--samples", help="comma-separated sample sizes")
    p.add_argument("--gammas", help="comma-separated stepsize grid (default: log grid)")
    p.add_argument("--pretrain-budget", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--evaluator", choices=ex.EVALUATORS)
    p.add_argument("--out", help="output path (default: stdout)")


class _Parser(argparse.ArgumentParser):
    # usage errors are validation failures: exit 1, not argparse's 2
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(prog="covshift", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-instance", help="write an instance file")
    p.add_argument("--instance", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_instance)

    p = sub.add_parser("sweep", help="tune and evaluate one mode over sample sizes; writes CSV")
    _sweep_flags(p)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("tune", help="print tuned stepsizes for each sample size")
    _sweep_flags(p)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("bounds", help="print the bound report and oracle risk for one schedule")
    p.add_argument("--instance", required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--gamma0", type=float, required=True)
    p.add_argument("--gammaM", type=float, required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("verify", help="run the self-checks; nonzero exit if any fails")
    p.add_argument("--seed", type=int)
    p.add_argument("--repeats", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("example1", help="sample sizes needed on the Example 1 instances")
    p.add_argument("--eps", default="1/4,1/16,1/64")
    p.add_argument("--cap", type=int, default=10**7)
    p.add_argument("--out")
    p.set_defaults(func=cmd_example1)

    p = sub.add_parser("plot", help="render sweep CSV files as a log-log SVG chart")
    p.add_argument("csv", nargs="+")
    p.add_argument("--out", required=True)
    p.add_argument("--title")
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args) or 0
    except OSError as exc:
        print(f"covshift: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"covshift: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
