"""End-to-end runs: solve, audit invariants, write CSV/JSON and figures."""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import io, presets
from .analysis import (
    InvariantReport,
    NormKind,
    convergence_table,
    ErrorReport,
    invariant_report,
    percent_relative_l1_error,
)
from .config import RunConfig
from .integrate import TimeStepper, Trajectory, integrate, stride_for_rows
from .regularization import EtaGap, EtaSweep, eta_gap_experiment, viscous_rate_experiment

FIGURE1_N = 400
FIGURE1_T = 4.0
FIGURE1_FRAMES = 81


@dataclass
class RunResult:
    config: RunConfig
    trajectory: Trajectory
    invariants: InvariantReport
    outdir: Optional[Path] = None


def _stepper(cfg: RunConfig) -> TimeStepper:
    return TimeStepper(cfl_safety=cfg.cfl_safety)


def _stride(cfg: RunConfig, problem) -> int:
    if cfg.ledger_stride is not None:
        return cfg.ledger_stride
    return stride_for_rows(problem, _stepper(cfg), cfg.max_ledger_rows)


def solve(cfg: RunConfig, n_cells: Optional[int] = None,
          snapshot_times: Optional[List[float]] = None) -> RunResult:
    """Solve ``cfg`` (optionally at another resolution) without writing anything."""
    problem = cfg.build_problem(n_cells)
    times = snapshot_times if snapshot_times is not None else cfg.snapshot_times
    traj = integrate(problem, _stepper(cfg), times, ledger_stride=_stride(cfg, problem))
    return RunResult(cfg, traj, invariant_report(traj))


def write_run(result: RunResult, outdir, figures: bool = True, title: str = "") -> Path:
    """Write config, snapshots, ledger and invariants of one run into ``outdir``."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / io.CONFIG_FILE).write_text(result.config.to_json())
    io.write_snapshots(result.trajectory, outdir)
    io.write_ledger(result.trajectory, outdir / io.LEDGER_FILE)
    io.write_json(result.invariants.to_dict(), outdir / io.INVARIANTS_FILE)
    if figures:
        from .plotting import plot_snapshots
        plot_snapshots(result.trajectory.snapshots, outdir / "snapshots.png", title)
    result.outdir = outdir
    return outdir


def run_single(cfg: RunConfig, outdir=None) -> RunResult:
    result = solve(cfg)
    out = outdir if outdir is not None else cfg.resolve_output(f"runs/{cfg.preset or 'custom'}")
    write_run(result, out, cfg.figures, cfg.preset or "")
    return result


# -- mass-diffusion convergence table ----------------------------------------


@dataclass
class Table1Result:
    report: ErrorReport
    runs: Dict[int, RunResult]
    reference: RunResult
    outdir: Optional[Path] = None

    @property
    def invariants(self) -> Dict[int, InvariantReport]:
        out = {n: r.invariants for n, r in self.runs.items()}
        out[self.reference.trajectory.problem.grid.n_cells] = self.reference.invariants
        return out


def table1_report(runs: Dict[int, RunResult], reference: RunResult) -> ErrorReport:
    ref = reference.trajectory.final
    sizes = sorted(runs)
    errors = [percent_relative_l1_error(runs[n].trajectory.final, ref) for n in sizes]
    report = convergence_table(zip(sizes, errors), NormKind.RELATIVE_PERCENT_L1)
    report.dx = [runs[n].trajectory.problem.grid.dx for n in sizes]
    return report


def run_table1(cfg: Optional[RunConfig] = None, outdir=None, write: bool = True) -> Table1Result:
    cfg = cfg or RunConfig.from_preset("table1")
    resolutions = cfg.resolutions or presets.TABLE1_RESOLUTIONS
    ref_n = cfg.reference_n or presets.TABLE1_REFERENCE
    runs = {n: solve(cfg, n) for n in resolutions}
    reference = solve(cfg, ref_n)
    res = Table1Result(table1_report(runs, reference), runs, reference)
    if not write:
        return res

    out = Path(outdir) if outdir is not None else cfg.resolve_output("runs/table1")
    out.mkdir(parents=True, exist_ok=True)
    (out / io.CONFIG_FILE).write_text(cfg.to_json())
    (out / "table1.csv").write_text(res.report.to_csv())
    for n, r in list(runs.items()) + [(ref_n, reference)]:
        sub = dataclasses.replace(cfg, n_cells=n)
        write_run(RunResult(sub, r.trajectory, r.invariants), out / f"n{n}", figures=False)
    io.write_json({str(n): rep.passed for n, rep in res.invariants.items()},
                  out / io.INVARIANTS_FILE)
    if cfg.figures:
        from .plotting import plot_convergence, plot_figure1
        published = (presets.TABLE1_ERRORS
                     if list(resolutions) == presets.TABLE1_RESOLUTIONS else None)
        plot_convergence(res.report, out / "convergence.png", published, "relative L1 error (%)")
        history = solve(cfg.with_overrides(t_final=FIGURE1_T), FIGURE1_N,
                        list(np.linspace(0.0, FIGURE1_T, FIGURE1_FRAMES))).trajectory
        plot_figure1(history, runs[min(resolutions)].trajectory.final,
                     reference.trajectory.final, reference.trajectory.initial,
                     out / "figure1.png")
    res.outdir = out
    return res


# -- eta experiments ---------------------------------------------------------


def sweep_rows(sweep: EtaSweep) -> List[tuple]:
    rows = []
    for eta in sweep.etas:
        errs = sweep.errors(eta)
        fitted, const = sweep.fitted_rate(eta), sweep.constant(eta)
        for k, (n, h, e) in enumerate(zip(sweep.resolutions, sweep.dx, errs)):
            rate = "" if k == 0 else float(math.log2(errs[k - 1] / e))
            rows.append((eta, n, h, e, rate, fitted, const))
    return rows


def run_corollary(cfg: Optional[RunConfig] = None, outdir=None) -> EtaSweep:
    cfg = cfg or RunConfig.from_preset("corollary")
    base = cfg.build_problem(cfg.resolutions[0] if cfg.resolutions else None, eta=0.0)
    sweep = viscous_rate_experiment(base, cfg.etas, cfg.resolutions, cfg.reference_n,
                                    cfg.cone(), cfg.cfl_safety, cfg.workers)
    out = Path(outdir) if outdir is not None else cfg.resolve_output("runs/corollary")
    (out / io.CONFIG_FILE).parent.mkdir(parents=True, exist_ok=True)
    (out / io.CONFIG_FILE).write_text(cfg.to_json())
    io.write_rows(out / "corollary.csv",
                  ["eta", "n_cells", "dx", "error", "rate", "fitted_rate", "constant"],
                  sweep_rows(sweep))
    io.write_json({
        "constant_ratio": sweep.constant_ratio,
        "constants_stable": sweep.constants_stable,
        "rate_ok": {f"{e:g}": sweep.rate_ok(e) for e in sweep.etas},
        "invariants": {f"{e:g}/{n}": r.passed for (e, n), r in sweep.invariants.items()},
    }, out / "summary.json")
    if cfg.figures:
        from .plotting import plot_eta_sweep
        plot_eta_sweep(sweep, out / "corollary.png")
    return sweep


def run_eta_gap(cfg: Optional[RunConfig] = None, outdir=None) -> EtaGap:
    cfg = cfg or RunConfig.from_preset("eta-gap")
    gap = eta_gap_experiment(cfg.build_problem(eta=0.0), cfg.etas, None,
                             cfg.cfl_safety, cfg.workers)
    out = Path(outdir) if outdir is not None else cfg.resolve_output("runs/eta-gap")
    out.mkdir(parents=True, exist_ok=True)
    (out / io.CONFIG_FILE).write_text(cfg.to_json())
    exponent = gap.exponent
    io.write_rows(out / "eta_gap.csv", ["eta", "gap", "fitted_exponent"],
                  [(e, g, exponent) for e, g in zip(gap.etas, gap.gaps)])
    if cfg.figures:
        from .plotting import plot_eta_gap
        plot_eta_gap(gap, out / "eta_gap.png")
    return gap
