"""Viscous regularization ``A(u) + eta u`` and the eta-dependence experiments."""

from __future__ import annotations

import dataclasses
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .analysis import (
    ConeSpec,
    InvariantReport,
    cone_l1_error,
    fit_constant,
    fit_rate,
    invariant_report,
    l1_norm,
)
from .integrate import TimeStepper, integrate, stride_for_rows
from .problem import DiffusionSpec, Grid1D, GridFunction, Problem, _Regularized, cell_average_init

CONE_SPEED_MARGIN = 0.1


def regularize_diffusion(a: DiffusionSpec, eta: float) -> DiffusionSpec:
    """``A^eta(u) = A(u) + eta u``; repeated calls accumulate into one ``eta``."""
    if not eta >= 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if eta == 0:
        return a
    base, base_prime = a.a, a.a_prime
    total = eta
    if isinstance(base, _Regularized):
        base, base_prime = base.base, base_prime.base
        total = a.eta + eta
    return DiffusionSpec(_Regularized(base, total), _Regularized(base_prime, total, derivative=True),
                         total, a.kernel)


LEDGER_ROWS = 200


def _final(problem: Problem, cfl_safety: float) -> Tuple[GridFunction, InvariantReport]:
    stepper = TimeStepper(cfl_safety=cfl_safety)
    traj = integrate(problem, stepper,
                     ledger_stride=stride_for_rows(problem, stepper, LEDGER_ROWS))
    return traj.final, invariant_report(traj)


def _solve_all(problems: Sequence[Problem], cfl_safety: float,
               workers: int) -> List[Tuple[GridFunction, InvariantReport]]:
    if workers > 1 and len(problems) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_final, problems, [cfl_safety] * len(problems)))
    return [_final(p, cfl_safety) for p in problems]


def on_grid(problem: Problem, n_cells: int) -> Problem:
    g = problem.grid
    return problem.replace(grid=Grid1D(g.x_left, g.x_right, n_cells))


def default_cone(problem: Problem, margin: float = CONE_SPEED_MARGIN) -> ConeSpec:
    """Cone centered on the domain with ``M = max|f'| + margin`` and the widest ``L`` that fits."""
    u = cell_average_init(problem.u0, problem.grid).values
    M = problem.flux.max_speed(float(u.min()), float(u.max())) + margin
    g = problem.grid
    L = 0.5 * g.length
    cone = ConeSpec(L, M, 0.5 * (g.x_left + g.x_right))
    if not cone.valid_until(problem.t_final):
        raise ValueError(f"domain too short: L={L:.6g} <= M T={M * problem.t_final:.6g}")
    return cone


@dataclass
class EtaSweep:
    """Cone-L1 errors of ``u_t + f(u)_x = eta u_xx`` against a fine self-reference."""

    etas: List[float]
    resolutions: List[int]
    reference_n: int
    cone: ConeSpec
    domain_length: float
    results: Dict[Tuple[float, int], float] = field(default_factory=dict)
    invariants: Dict[Tuple[float, int], InvariantReport] = field(default_factory=dict)
    rate_slack: float = 0.1

    def errors(self, eta: float) -> List[float]:
        return [self.results[(eta, n)] for n in self.resolutions]

    @property
    def dx(self) -> List[float]:
        return [self.domain_length / n for n in self.resolutions]

    def fitted_rate(self, eta: float) -> float:
        return fit_rate(self.dx, self.errors(eta))

    def constant(self, eta: float, rate: float = 0.5) -> float:
        """``C`` in ``error ~ C dx^rate`` for this ``eta``."""
        return fit_constant(self.dx, self.errors(eta), rate)

    @property
    def constant_ratio(self) -> float:
        cs = [self.constant(eta) for eta in self.etas]
        return max(cs) / min(cs)

    def rate_ok(self, eta: float) -> bool:
        return self.fitted_rate(eta) >= 0.5 - self.rate_slack

    @property
    def constants_stable(self) -> bool:
        return self.constant_ratio <= 3.0


def _check_sweep_args(etas: Sequence[float], resolutions: Sequence[int]) -> None:
    if any(e <= 0 for e in etas):
        raise ValueError("etas must be positive")
    if any(b >= a for a, b in zip(etas, etas[1:])):
        raise ValueError("etas must be strictly decreasing")
    if any(b != 2 * a for a, b in zip(resolutions, resolutions[1:])):
        raise ValueError("resolutions must double")


def viscous_rate_experiment(base: Problem, etas: Sequence[float], resolutions: Sequence[int],
                            reference_n: Optional[int] = None, cone: Optional[ConeSpec] = None,
                            cfl_safety: float = 0.5, workers: int = 1) -> EtaSweep:
    """For each ``eta`` run ``A(u) = eta u`` on every resolution and on ``reference_n``."""
    etas = [float(e) for e in etas]
    resolutions = [int(n) for n in resolutions]
    _check_sweep_args(etas, resolutions)
    if not base.diffusion.is_zero:
        raise ValueError("base problem must have A = 0")
    if reference_n is None:
        reference_n = 2 * resolutions[-1]
    for n in resolutions:
        if reference_n % n:
            raise ValueError(f"reference_n={reference_n} is not a multiple of {n}")
    if cone is None:
        cone = default_cone(base)
    cone.interval(base.t_final)

    sweep = EtaSweep(etas, resolutions, reference_n, cone, base.grid.length)
    jobs = []
    for eta in etas:
        p = base.replace(diffusion=regularize_diffusion(base.diffusion, eta))
        jobs += [on_grid(p, n) for n in resolutions + [reference_n]]
    solved = _solve_all(jobs, cfl_safety, workers)
    per_eta = len(resolutions) + 1
    for k, eta in enumerate(etas):
        chunk = solved[k * per_eta:(k + 1) * per_eta]
        ref = chunk[-1][0]
        for n, (u, report) in zip(resolutions + [reference_n], chunk):
            sweep.invariants[(eta, n)] = report
            if n != reference_n:
                sweep.results[(eta, n)] = cone_l1_error(u, ref, base.t_final, cone)
    return sweep


@dataclass
class EtaGap:
    """``||u - u^eta||_L1`` at ``t_final`` on one fixed grid."""

    etas: List[float]
    gaps: List[float]
    n_cells: int
    invariants: Dict[float, InvariantReport] = field(default_factory=dict)

    @property
    def exponent(self) -> float:
        pts = [(e, g) for e, g in zip(self.etas, self.gaps) if e > 0]
        return fit_rate([e for e, _ in pts], [g for _, g in pts])

    @property
    def monotone(self) -> bool:
        order = np.argsort(self.etas)
        g = np.asarray(self.gaps)[order]
        return bool(np.all(np.diff(g) >= 0))


def eta_gap_experiment(problem: Problem, etas: Sequence[float], n_ref: Optional[int] = None,
                       cfl_safety: float = 0.5, workers: int = 1) -> EtaGap:
    """Compare the degenerate problem with its regularizations at a fixed resolution."""
    if n_ref is not None:
        problem = on_grid(problem, n_ref)
    etas = [float(e) for e in etas]
    if any(e < 0 for e in etas):
        raise ValueError("etas must be >= 0")
    jobs = [problem] + [problem.replace(diffusion=regularize_diffusion(problem.diffusion, e))
                        for e in etas]
    solved = _solve_all(jobs, cfl_safety, workers)
    base = solved[0][0]
    gaps = [l1_norm(u.with_values(u.values - base.values)) for u, _ in solved[1:]]
    reports = {0.0: solved[0][1]}
    reports.update({e: r for e, (_, r) in zip(etas, solved[1:])})
    return EtaGap(etas, gaps, problem.grid.n_cells, reports)
