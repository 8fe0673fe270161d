"""``eodiffusion`` command line.

Exit status is 0 on success, 2 when an invariant check fails and 1 on any
other error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import List, Optional

from . import __version__, harness, io, presets
from .analysis import invariant_report
from .config import OUTPUT_ROOT_ENV, RunConfig

EXIT_OK, EXIT_ERROR, EXIT_INVARIANT = 0, 1, 2

DEFAULT_PRESET = {"run": "heat", "table1": "table1", "corollary": "corollary", "eta-gap": "eta-gap"}

FLAG_FIELDS = ("n_cells", "t_final", "eta", "cfl_safety", "workers", "reference_n")


def _value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_set(items: List[str]) -> dict:
    out = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ValueError(f"--set expects key=value, got {item!r}")
        out[key.strip().replace("-", "_")] = _value(val)
    return out


def build_config(args) -> RunConfig:
    if args.config:
        data = json.loads(Path(args.config).read_text())
        if args.preset:
            data["preset"] = args.preset
    else:
        data = {"preset": args.preset or DEFAULT_PRESET[args.command]}
    data.update(parse_set(args.set))
    for name in FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            data[name] = v
    if args.output:
        data["output_dir"] = args.output
    if args.no_figures:
        data["figures"] = False
    return RunConfig.from_dict(data)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--preset", help=f"named preset ({', '.join(presets.preset_names())})")
    p.add_argument("--config", help="JSON config file; flags override its fields")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field (value parsed as JSON when possible)")
    p.add_argument("-o", "--output", help=f"output directory (relative paths go under ${OUTPUT_ROOT_ENV})")
    p.add_argument("--no-figures", action="store_true", help="write data files only")
    p.add_argument("--n-cells", type=int, dest="n_cells")
    p.add_argument("--t-final", type=float, dest="t_final")
    p.add_argument("--eta", type=float)
    p.add_argument("--cfl-safety", type=float, dest="cfl_safety")
    p.add_argument("--workers", type=int, help="parallel processes for sweeps")
    p.add_argument("--reference-n", type=int, dest="reference_n")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eodiffusion",
        description="Engquist-Osher finite differences for degenerate convection-diffusion.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="solve one problem and write snapshots, ledger, invariants"))
    _common(sub.add_parser("table1", help="porous-medium convergence table against N=4000"))
    _common(sub.add_parser("corollary", help="cone-L1 rates for u_t + f(u)_x = eta u_xx"))
    _common(sub.add_parser("eta-gap", help="||u - u^eta|| as eta shrinks"))
    chk = sub.add_parser("check-invariants", help="re-audit a run directory written by `run`")
    chk.add_argument("rundir")
    return parser


def _print_report(report, out=sys.stdout) -> None:
    for c in report.checks:
        mark = "ok  " if c.passed else ("FAIL" if c.gated else "info")
        print(f"  {mark} {c.name:<10} margin={c.margin:+.3e} tol={c.tolerance:.1e}  {c.detail}",
              file=out)


def cmd_run(cfg: RunConfig) -> int:
    res = harness.run_single(cfg)
    print(f"wrote {res.outdir}")
    _print_report(res.invariants)
    return EXIT_OK if res.invariants.passed else EXIT_INVARIANT


def cmd_table1(cfg: RunConfig) -> int:
    res = harness.run_table1(cfg)
    print(f"wrote {res.outdir}")
    sys.stdout.write(res.report.to_csv())
    print(f"fitted rate {res.report.fitted_rate:.3f}")
    bad = [n for n, r in res.invariants.items() if not r.passed]
    for n in bad:
        print(f"invariant failure at N={n}: {res.invariants[n].failures}", file=sys.stderr)
    return EXIT_INVARIANT if bad else EXIT_OK


def cmd_corollary(cfg: RunConfig) -> int:
    sweep = harness.run_corollary(cfg)
    for eta in sweep.etas:
        print(f"eta={eta:g} fitted rate {sweep.fitted_rate(eta):.3f} constant {sweep.constant(eta):.4g}")
    print(f"constant ratio {sweep.constant_ratio:.3f}")
    bad = [k for k, r in sweep.invariants.items() if not r.passed]
    for k in bad:
        print(f"invariant failure at eta={k[0]:g} N={k[1]}", file=sys.stderr)
    return EXIT_INVARIANT if bad else EXIT_OK


def cmd_eta_gap(cfg: RunConfig) -> int:
    gap = harness.run_eta_gap(cfg)
    for e, g in zip(gap.etas, gap.gaps):
        print(f"eta={e:g} gap={g:.6e}")
    print(f"fitted exponent {gap.exponent:.3f}")
    bad = [e for e, r in gap.invariants.items() if not r.passed]
    for e in bad:
        print(f"invariant failure at eta={e:g}", file=sys.stderr)
    return EXIT_INVARIANT if bad else EXIT_OK


def cmd_check(rundir: str) -> int:
    traj = io.load_run(rundir)
    report = invariant_report(traj)
    print(f"{rundir}: {'pass' if report.passed else 'FAIL'}")
    _print_report(report)
    return EXIT_OK if report.passed else EXIT_INVARIANT


COMMANDS = {"run": cmd_run, "table1": cmd_table1, "corollary": cmd_corollary,
            "eta-gap": cmd_eta_gap}


def main(argv: Optional[List[str]] = None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "check-invariants":
            return cmd_check(args.rundir)
        return COMMANDS[args.command](build_config(args))
    except (ValueError, TypeError, OSError, ArithmeticError) as exc:
        print(f"eodiffusion: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
