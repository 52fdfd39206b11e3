"""Command-line interface.

Exit codes: 0 verified, 1 violated, 2 vacuous, 3 insufficient unwinding
bound, 4 error (including bad usage).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .bitblast import Encoder
from .cemit import STUB_HEADER, emit_driver_c, stub_header
from .dimacs import export_dimacs
from .envmodels.builtins import list_builtins
from .errors import BudgetExceeded, InsufficientBound, LeakboundError
from .frontend import load_file
from .lang.harness import resolve_harness
from .metrics import channel_capacity
from .oracle import DEFAULT_BUDGET, enumerate_relation, oracle_capacity
from .policy import (
    AnalysisConfig, PolicyCheckResult, Vacuous, VerifiedBounded, Violated, check_policy,
    measure_capacity, synthesize_driver,
)
from .sat import default_budget
from .ssa.build import to_ssa
from .unroll import unwind

EXIT_VERIFIED = 0
EXIT_VIOLATED = 1
EXIT_VACUOUS = 2
EXIT_INSUFFICIENT = 3
EXIT_ERROR = 4


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse with usage errors mapped to exit code 4."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def exit_code_for(result: PolicyCheckResult) -> int:
    v = result.verdict
    if isinstance(v, Violated):
        return EXIT_VIOLATED
    if isinstance(v, Vacuous):
        return EXIT_VACUOUS
    return EXIT_VERIFIED


# -- output --------------------------------------------------------------------------


class Output:
    """Collects report lines in either human text or ``key=value`` form."""

    def __init__(self, fmt: str, stream=None):
        self.fmt = fmt
        self.stream = stream or sys.stdout

    @property
    def kv(self) -> bool:
        return self.fmt == "kv"

    def text(self, line: str = ""):
        if not self.kv:
            print(line, file=self.stream)

    def pair(self, key: str, value):
        if self.kv:
            print(f"{key}={_kv_value(value)}", file=self.stream)


def _kv_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, bytes):
        return v.hex()
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return ",".join(_kv_value(x) for x in v)
    return str(v).replace("\n", " ")


def _fmt_value(v) -> str:
    return v.hex() if isinstance(v, bytes) else str(v)


def _assign_text(names, values) -> str:
    return ", ".join(f"{n}={_fmt_value(v)}" for n, v in zip(names, values)) or "(none)"


# -- subcommands ----------------------------------------------------------------------


def _config(args) -> AnalysisConfig:
    budget = args.budget if args.budget is not None else default_budget()
    return AnalysisConfig(k=args.unwind, unwinding_assertions=not args.no_unwinding_assertions,
                          conflict_budget=budget, restarts=args.restarts)


def _load(args):
    prog = load_file(args.file, args.arch, args.entry)
    return prog, resolve_harness(prog)


def _header(out: Output, command: str, args, prog):
    out.pair("command", command)
    out.pair("file", args.file)
    out.pair("entry", prog.entry)
    out.pair("arch", prog.arch)


def _dump_ssa(args, prog, harness, n, cfg):
    driver = synthesize_driver(prog, harness, n, cfg.size_budget)
    ssa = to_ssa(unwind(driver.prog, cfg.k), free_params=False)
    sys.stderr.write(ssa.dump())


def cmd_check(args, out: Output) -> int:
    prog, harness = _load(args)
    cfg = _config(args)
    _header(out, "check", args, prog)
    out.pair("policy", args.policy)
    out.pair("unwind", cfg.k)
    out.pair("unwinding_assertions", cfg.unwinding_assertions)
    out.text(f"leakbound check {args.file}: entry {prog.entry}, policy N={args.policy}, "
             f"arch {prog.arch}, unwind k={cfg.k}"
             + ("" if cfg.unwinding_assertions else " (no unwinding assertions)"))
    if args.dump_ssa:
        _dump_ssa(args, prog, harness, args.policy, cfg)
    try:
        result = check_policy(prog, harness, args.policy, cfg)
    except InsufficientBound as exc:
        out.pair("verdict", "InsufficientBound")
        out.pair("exit_code", EXIT_INSUFFICIENT)
        out.text(f"Verdict: InsufficientBound -- unwinding assertions fail at k={exc.k}; "
                 "increase --unwind")
        _stats(out, exc.stats, args.stats)
        return EXIT_INSUFFICIENT
    code = exit_code_for(result)
    v = result.verdict
    out.pair("verdict", v.name)
    out.pair("exit_code", code)
    if isinstance(v, Violated):
        _counterexample(out, harness, v.counterexample, args.no_trace)
    elif isinstance(v, Vacuous):
        out.pair("max_feasible", v.max_feasible)
        out.text(f"Verdict: Vacuous -- the driver's assumptions are unsatisfiable; at most "
                 f"{v.max_feasible} distinct observation(s) are possible")
    elif isinstance(v, VerifiedBounded):
        out.pair("bound", v.k)
        out.text(f"Verdict: VerifiedBounded -- at most {args.policy} distinction(s) for executions "
                 f"within k={v.k} iterations")
    else:
        out.text(f"Verdict: VerifiedComplete -- at most {args.policy} distinction(s) for every execution")
    _stats(out, result.stats, args.stats)
    return code


def _counterexample(out: Output, harness, cex, no_trace: bool):
    runs = len(cex.observations)
    out.text(f"Verdict: Violated -- {runs} distinct observations for one low input")
    out.pair("cex.runs", runs)
    out.pair("cex.low", cex.low_values)
    out.text(f"Low input: {_assign_text(harness.low_names, cex.low_values)}")
    for i, (h, o) in enumerate(zip(cex.high_values, cex.observations), 1):
        out.pair(f"cex.run.{i}.high", h)
        out.pair(f"cex.run.{i}.obs", o)
        out.text(f"Run {i}: {_assign_text(harness.high_names, h)} -> "
                 f"{_assign_text(harness.observable_names, o)}")
    out.pair("cex.trace_steps", len(cex.trace))
    if not no_trace and not out.kv:
        out.text()
        out.text("Counterexample trace:")
        out.text(cex.format_trace())


def _stats(out: Output, stats: dict, show: bool):
    flat = {}
    for key, value in stats.items():
        if isinstance(value, dict):
            for k2, v2 in value.items():
                flat[f"{key}.{k2}"] = v2
        else:
            flat[key] = value
    if not show:
        return
    for key in sorted(flat):
        out.pair(f"stats.{key}", flat[key])
    if not out.kv:
        out.text()
        out.text("Statistics:")
        for key in sorted(flat):
            out.text(f"  {key} = {flat[key]}")


def cmd_capacity(args, out: Output) -> int:
    prog, harness = _load(args)
    cfg = _config(args)
    _header(out, "capacity", args, prog)
    report = measure_capacity(prog, harness, cfg, n_max=args.n_max)
    out.pair("n_star", report.class_count_found)
    out.pair("bits", f"{report.lower_bound_bits:.6f}")
    out.pair("exact", report.exact)
    out.pair("probes", [f"{n}:{v}" for n, v in report.probes])
    if report.note:
        out.pair("note", report.note)
    out.text(f"leakbound capacity {args.file}: entry {prog.entry}, arch {prog.arch}, unwind k={cfg.k}")
    out.text(f"Capacity: {report.summary()}")
    out.text("Probes: " + ", ".join(f"N={n} {v}" for n, v in report.probes))
    if report.note:
        out.text(f"Note: {report.note}")
    if any(v == "InsufficientBound" for _, v in report.probes):
        return EXIT_INSUFFICIENT
    return EXIT_VERIFIED


def _parse_values(text: str) -> tuple:
    vals = []
    for part in text.split(","):
        part = part.strip()
        if part:
            vals.append(int(part, 0))
    return tuple(vals)


def cmd_oracle(args, out: Output) -> int:
    prog, harness = _load(args)
    _header(out, "oracle", args, prog)
    high_domain = None
    if args.high_range is not None:
        if len(harness.high_params) != 1:
            raise UsageError("--high-range needs exactly one high parameter")
        lo, _, hi = args.high_range.partition(":")
        high_domain = [(v,) for v in range(int(lo, 0), int(hi, 0) + 1)]
    out.text(f"leakbound oracle {args.file}: entry {prog.entry}, arch {prog.arch}")
    if args.low is not None:
        low = _parse_values(args.low)
        rel = enumerate_relation(prog, harness, low, high_domain, args.oracle_budget)
        count = rel.class_count
        out.pair("low", low)
        out.pair("classes", count)
        out.pair("bits", f"{channel_capacity(count):.6f}")
        out.text(f"Low input: {_assign_text(harness.low_names, low)}")
        out.text(f"Classes: {count} ({channel_capacity(count):.3f} bits)")
        if args.show_classes:
            order = sorted(range(count), key=lambda i: sorted(rel.classes[i])[0])
            for n, i in enumerate(order, 1):
                members = ", ".join(_point_text(p) for p in sorted(rel.classes[i]))
                obs = rel.observations[i] if rel.observations is not None else None
                out.pair(f"class.{n}", [_point_text(p) for p in sorted(rel.classes[i])])
                out.text(f"  class {n}: {{{members}}}" + (f" -> {obs}" if obs is not None else ""))
    else:
        low, count = oracle_capacity(prog, harness, None, high_domain, args.oracle_budget)
        out.pair("best_low", low)
        out.pair("classes", count)
        out.pair("bits", f"{channel_capacity(count):.6f}")
        out.text(f"Largest class count: {count} ({channel_capacity(count):.3f} bits) "
                 f"at {_assign_text(harness.low_names, low)}")
    return EXIT_VERIFIED


def _point_text(p) -> str:
    if isinstance(p, tuple) and len(p) == 1:
        p = p[0]
    if isinstance(p, tuple):
        return "(" + " ".join(_fmt_value(x) for x in p) + ")"
    return _fmt_value(p)


def cmd_export_dimacs(args, out_: Output) -> int:
    prog, harness = _load(args)
    cfg = _config(args)
    driver = synthesize_driver(prog, harness, args.policy, cfg.size_budget)
    enc = Encoder(to_ssa(unwind(driver.prog, cfg.k), free_params=False))
    if args.goal == "policy":
        cnf = enc.policy_instance()
    elif args.goal == "unwinding":
        cnf = enc.unwinding_instance()
    else:
        cnf = enc.assumptions_instance()
    if args.output and args.output != "-":
        with open(args.output, "w", encoding="utf-8") as fh:
            export_dimacs(cnf, fh, with_map=not args.no_map)
        print(f"wrote {args.output}: {cnf.variable_count} variables, {len(cnf.clauses)} clauses",
              file=sys.stderr)
    else:
        export_dimacs(cnf, sys.stdout, with_map=not args.no_map)
    return EXIT_VERIFIED


def cmd_emit_driver(args, out_: Output) -> int:
    prog, harness = _load(args)
    driver = synthesize_driver(prog, harness, args.policy)
    text = emit_driver_c(driver)
    if args.output and args.output != "-":
        path = Path(args.output)
        path.write_text(text, encoding="utf-8")
        header = path.parent / STUB_HEADER
        if not args.no_header:
            header.write_text(stub_header(), encoding="utf-8")
        print(f"wrote {path}" + ("" if args.no_header else f" and {header}"), file=sys.stderr)
    else:
        sys.stdout.write(text)
    return EXIT_VERIFIED


def cmd_list_builtins(args, out: Output) -> int:
    for spec in list_builtins():
        out.pair(f"builtin.{spec.name}", spec.signature())
        out.text(f"{spec.signature()}")
        out.text(f"    {spec.doc}")
        if spec.nondet:
            out.text(f"    nondeterministic: {spec.nondet}")
    return EXIT_VERIFIED


# -- argument parsing ---------------------------------------------------------------------


def _positive(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="leakbound", description="Quantitative information-flow checking by bounded model checking.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, analysis=True):
        sp.add_argument("file", help="program in the analysed C dialect (.mc)")
        sp.add_argument("--arch", type=int, choices=(32, 64), default=32, help="target word size (default 32)")
        sp.add_argument("--entry", help="entry function (default: pragma or last function)")
        sp.add_argument("--format", choices=("text", "kv"), default="text", help="report format")
        if analysis:
            sp.add_argument("--unwind", "-k", type=_positive, default=8, help="loop unwinding bound (default 8)")
            sp.add_argument("--no-unwinding-assertions", action="store_true",
                            help="cut off longer executions instead of proving the bound sufficient")
            sp.add_argument("--budget", type=_positive, default=None,
                            help="solver conflict budget (default: $LEAKBOUND_SOLVER_BUDGET or unlimited)")
            sp.add_argument("--restarts", action="store_true", help="enable Luby restarts in the SAT solver")
            sp.add_argument("--stats", action="store_true", help="print solver statistics")

    sp = sub.add_parser("check", help="check a policy of at most N distinctions")
    common(sp)
    sp.add_argument("--policy", "-N", type=_positive, required=True, help="allowed number of distinctions")
    sp.add_argument("--dump-ssa", action="store_true", help="write the driver's SSA form to stderr")
    sp.add_argument("--no-trace", action="store_true", help="omit the counterexample trace")
    sp.set_defaults(run=cmd_check)

    sp = sub.add_parser("capacity", help="search for the smallest verified policy")
    common(sp)
    sp.add_argument("--n-max", type=_positive, default=64, help="largest policy probed (default 64)")
    sp.set_defaults(run=cmd_capacity)

    sp = sub.add_parser("oracle", help="count classes by exhaustive concrete execution")
    common(sp, analysis=False)
    sp.add_argument("--low", help="fix the low inputs (comma-separated, in pragma order)")
    sp.add_argument("--high-range", help="restrict a single high input to LO:HI")
    sp.add_argument("--oracle-budget", type=_positive, default=DEFAULT_BUDGET,
                    help=f"maximum number of runs (default {DEFAULT_BUDGET})")
    sp.add_argument("--show-classes", action="store_true", help="list the classes (with --low)")
    sp.set_defaults(run=cmd_oracle)

    sp = sub.add_parser("export-dimacs", help="write the driver's CNF in DIMACS format")
    common(sp)
    sp.add_argument("--policy", "-N", type=_positive, required=True)
    sp.add_argument("--goal", choices=("policy", "unwinding", "assumptions"), default="policy")
    sp.add_argument("--output", "-o", help="output file (default stdout)")
    sp.add_argument("--no-map", action="store_true", help="omit the variable map comments")
    sp.set_defaults(run=cmd_export_dimacs)

    sp = sub.add_parser("emit-driver", help="write the driver as a C file for external checkers")
    common(sp, analysis=False)
    sp.add_argument("--policy", "-N", type=_positive, required=True)
    sp.add_argument("--output", "-o", help="output file (default stdout)")
    sp.add_argument("--no-header", action="store_true", help=f"do not write {STUB_HEADER} next to the output")
    sp.set_defaults(run=cmd_emit_driver)

    sp = sub.add_parser("list-builtins", help="list the environment model builtins")
    sp.add_argument("--format", choices=("text", "kv"), default="text")
    sp.set_defaults(run=cmd_list_builtins)
    return p


def main(argv: Optional[list] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "command", None):
        parser.print_usage(sys.stderr)
        return EXIT_ERROR
    out = Output(args.format)
    try:
        return args.run(args, out)
    except UsageError as exc:
        print(f"leakbound: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except BudgetExceeded as exc:
        out.pair("verdict", "Error")
        print(f"leakbound: budget exceeded: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (LeakboundError, OSError, ValueError) as exc:
        print(f"leakbound: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
