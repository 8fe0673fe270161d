"""Forward Euler time stepping under a CFL restriction, with snapshots and a ledger."""

from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from numba import njit

from .eo_flux import EOFlux
from .problem import (
    DIFF_LINEAR,
    DIFF_POROUS,
    DIFF_ZERO,
    FLUX_BURGERS,
    FLUX_LINEAR,
    FLUX_ZERO,
    BoundaryCondition,
    GridFunction,
    Problem,
    cell_average_init,
    pad,
)
from .scheme import SchemeState, SolverError, apply_bc, default_eo_flux, rhs_from_padded, spatial_rhs

logger = logging.getLogger(__name__)

LEDGER_FIELDS = ("t", "dt", "umin", "umax", "tv", "mass")
LEDGER_DTYPE = np.dtype([(name, "f8") for name in LEDGER_FIELDS])


def total_variation_of(values: np.ndarray, periodic: bool) -> float:
    tv = float(np.sum(np.abs(np.diff(values))))
    if periodic and values.size > 1:
        tv += abs(float(values[0] - values[-1]))
    return tv


@dataclass(frozen=True)
class TimeStepper:
    """Explicit Euler step-size policy.

    ``dt <= cfl_safety * min(dx / max_fprime, dx**2 / (2 max_aprime))``, a term
    dropping out when its bound is zero.  Bounds left as ``None`` are filled
    from the initial data range by :meth:`resolve`.  ``enforce_cfl=False``
    lets ``fixed_dt`` exceed the bound (negative controls only).
    """

    cfl_safety: float = 0.5
    max_fprime: Optional[float] = None
    max_aprime: Optional[float] = None
    fixed_dt: Optional[float] = None
    enforce_cfl: bool = True

    def __post_init__(self):
        if not 0.0 < self.cfl_safety <= 1.0:
            raise ValueError(f"cfl_safety must be in (0, 1], got {self.cfl_safety}")
        if self.fixed_dt is not None and not self.fixed_dt > 0:
            raise ValueError("fixed_dt must be positive")

    def resolve(self, problem: Problem, lo: float, hi: float) -> "TimeStepper":
        fp = self.max_fprime
        ap = self.max_aprime
        if fp is None:
            fp = 0.0 if problem.flux.is_zero else problem.flux.max_speed(lo, hi)
        if ap is None:
            ap = 0.0 if problem.diffusion.is_zero else problem.diffusion.max_slope(lo, hi)
        return dataclasses.replace(self, max_fprime=fp, max_aprime=ap)


def cfl_bound(dx: float, stepper: TimeStepper) -> float:
    """``cfl_safety * min(dx / max|f'|, dx^2 / (2 max A'))``; ``inf`` without dynamics."""
    terms = []
    if stepper.max_fprime:
        terms.append(dx / stepper.max_fprime)
    if stepper.max_aprime:
        terms.append(dx * dx / (2.0 * stepper.max_aprime))
    if not terms:
        return math.inf
    return stepper.cfl_safety * min(terms)


def cfl_dt(state: SchemeState, stepper: TimeStepper) -> float:
    """Time step for ``state`` under ``stepper``."""
    if stepper.max_fprime is None or stepper.max_aprime is None:
        v = state.u.values
        stepper = stepper.resolve(state.problem, float(v.min()), float(v.max()))
    bound = cfl_bound(state.u.grid.dx, stepper)
    if stepper.fixed_dt is not None:
        if stepper.enforce_cfl and stepper.fixed_dt > bound:
            raise ValueError(f"fixed_dt={stepper.fixed_dt:.6g} exceeds the CFL bound {bound:.6g}")
        return stepper.fixed_dt
    if math.isinf(bound):
        raise ValueError("no dynamics: max|f'| and max A' are both zero and no fixed_dt given")
    return bound


def planned_dt(problem: Problem, stepper: TimeStepper = TimeStepper(),
               initial: Optional[GridFunction] = None) -> float:
    """The step :func:`integrate` would take for ``problem``."""
    if initial is None:
        initial = cell_average_init(problem.u0, problem.grid)
    v = initial.values
    stepper = stepper.resolve(problem, float(v.min()), float(v.max()))
    bound = cfl_bound(problem.grid.dx, stepper)
    return stepper.fixed_dt if stepper.fixed_dt is not None else bound


def stride_for_rows(problem: Problem, stepper: TimeStepper, max_rows: int) -> int:
    """Ledger stride keeping roughly ``max_rows`` rows over the whole run."""
    dt = planned_dt(problem, stepper)
    if not math.isfinite(dt) or dt <= 0 or problem.t_final == 0:
        return 1
    steps = int(math.ceil(problem.t_final / dt))
    return max(1, -(-steps // max_rows))


def step_euler(state: SchemeState, dt: float) -> SchemeState:
    """One forward Euler step ``u + dt * rhs(u)``."""
    rhs = spatial_rhs(state if state.ghosts_filled else apply_bc(state))
    new = state.u.values + dt * rhs
    bad = np.flatnonzero(~np.isfinite(new))
    if bad.size:
        raise SolverError(f"Euler step to t={state.u.time + dt:.6g} (dt={dt:.3g}) produced "
                          f"{new[bad[0]]} in cell {int(bad[0])}")
    return apply_bc(SchemeState(state.u.with_values(new, state.u.time + dt),
                                state.problem, state.eo))


@dataclass(eq=False)
class Trajectory:
    """Snapshots at requested times plus a per-step ledger.

    ``every_step`` marks trajectories whose consecutive snapshots are single
    Euler steps (needed by the discrete entropy check).
    """

    problem: Problem
    eo: EOFlux
    snapshots: List[GridFunction]
    ledger: np.ndarray
    dt: float
    n_steps: int
    stepper: TimeStepper
    every_step: bool = False
    meta: dict = field(default_factory=dict)

    @property
    def times(self) -> np.ndarray:
        return np.array([s.time for s in self.snapshots])

    @property
    def initial(self) -> GridFunction:
        return self.snapshots[0]

    @property
    def final(self) -> GridFunction:
        return self.snapshots[-1]


# -- compiled stepper ------------------------------------------------------------


@njit(cache=True)
def _eo(fk, fp, ul, ur):
    if fk == FLUX_LINEAR:
        return max(fp, 0.0) * ul + min(fp, 0.0) * ur
    mp = max(ul, 0.0)
    mm = min(ur, 0.0)
    return 0.5 * mp * mp + 0.5 * mm * mm


@njit(cache=True)
def _diff(dk, dp, eta, u):
    if dk == DIFF_LINEAR:
        a = dp * u
    elif dk == DIFF_POROUS:
        m = max(u, 0.0)
        a = 0.5 * m * m
    else:
        a = 0.0
    if eta != 0.0:
        a = a + eta * u
    return a


@njit(cache=True)
def _advance(u, dt, nsteps, fk, fp, dk, dp, eta, periodic, dx, A, F, rhs):
    n = u.shape[0]
    dx2 = dx * dx
    has_flux = fk != FLUX_ZERO
    has_diff = dk != DIFF_ZERO or eta != 0.0
    for _ in range(nsteps):
        if periodic:
            gl = u[n - 1]
            gr = u[0]
        else:
            gl = u[0]
            gr = u[n - 1]
        if has_diff:
            A[0] = _diff(dk, dp, eta, gl)
            for j in range(n):
                A[j + 1] = _diff(dk, dp, eta, u[j])
            A[n + 1] = _diff(dk, dp, eta, gr)
        if has_flux:
            F[0] = _eo(fk, fp, gl, u[0])
            for j in range(n - 1):
                F[j + 1] = _eo(fk, fp, u[j], u[j + 1])
            F[n] = _eo(fk, fp, u[n - 1], gr)
        for j in range(n):
            r = 0.0
            if has_flux:
                r = r + (-(F[j + 1] - F[j]) / dx)
            if has_diff:
                r = r + (A[j + 2] - 2.0 * A[j + 1] + A[j]) / dx2
            rhs[j] = r
        for j in range(n):
            u[j] = u[j] + dt * rhs[j]


class _KernelStepper:
    def __init__(self, problem: Problem):
        fk, fp = problem.flux.kernel
        dk, dp = problem.diffusion.kernel
        self.args = (int(fk), float(fp), int(dk), float(dp), float(problem.diffusion.eta),
                     problem.bc is BoundaryCondition.PERIODIC, float(problem.grid.dx))
        n = problem.grid.n_cells
        self.A = np.zeros(n + 2)
        self.F = np.zeros(n + 1)
        self.rhs = np.zeros(n)

    def advance(self, u: np.ndarray, dt: float, nsteps: int) -> None:
        fk, fp, dk, dp, eta, periodic, dx = self.args
        _advance(u, dt, nsteps, fk, fp, dk, dp, eta, periodic, dx, self.A, self.F, self.rhs)


class _NumpyStepper:
    def __init__(self, problem: Problem, eo: EOFlux):
        self.problem = problem
        self.eo = eo
        self.buf = np.empty(problem.grid.n_cells + 2)

    def advance(self, u: np.ndarray, dt: float, nsteps: int) -> None:
        for _ in range(nsteps):
            padded = pad(u, self.problem.bc, out=self.buf)
            u += dt * rhs_from_padded(padded, self.problem, self.eo)


def kernel_supported(problem: Problem, eo: Optional[EOFlux] = None) -> bool:
    return (problem.flux.kernel is not None and problem.diffusion.kernel is not None
            and (eo is None or eo.spec is problem.flux))


def integrate(problem: Problem, stepper: TimeStepper = TimeStepper(),
              snapshot_times: Optional[Sequence[float]] = None, *,
              ledger_stride: int = 1, every_step: bool = False,
              eo: Optional[EOFlux] = None, initial: Optional[GridFunction] = None,
              use_kernel: Optional[bool] = None, quad_points: int = 4) -> Trajectory:
    """Run forward Euler from the cell-averaged initial data.

    Snapshots are taken exactly at ``snapshot_times`` (default: 0 and
    ``t_final``), truncating the step before each.  With ``every_step`` a
    snapshot is stored after every step up to ``t_final`` instead.  Ledger rows
    are written at t=0, every ``ledger_stride`` steps and at each snapshot.
    """
    grid = problem.grid
    if initial is None:
        initial = cell_average_init(problem.u0, grid, quad_points)
    lo, hi = float(initial.values.min()), float(initial.values.max())
    if problem.flux.kernel is None:
        problem.flux.check(lo, hi)
    if problem.diffusion.kernel is None:
        problem.diffusion.check(lo, hi)
    if eo is None:
        eo = default_eo_flux(problem, initial)

    stepper = stepper.resolve(problem, lo, hi)
    state = SchemeState(initial, problem, eo)
    tol_t = 1e-12 * max(1.0, problem.t_final)
    if every_step:
        targets = [problem.t_final]
    else:
        targets = sorted(float(t) for t in (snapshot_times if snapshot_times is not None
                                              else (0.0, problem.t_final)))
        if targets and (targets[0] < -tol_t or targets[-1] > problem.t_final + tol_t):
            raise ValueError(f"snapshot times must lie in [0, {problem.t_final}]")
    needs_steps = any(t > tol_t for t in targets)
    dt = cfl_dt(state, stepper) if needs_steps else 0.0
    if ledger_stride < 1:
        raise ValueError("ledger_stride must be >= 1")

    if use_kernel is None:
        use_kernel = kernel_supported(problem, eo)
    elif use_kernel and not kernel_supported(problem, eo):
        raise ValueError("compiled stepper needs kernel codes on both flux and diffusion")
    advancer = _KernelStepper(problem) if use_kernel else _NumpyStepper(problem, eo)

    periodic = problem.bc is BoundaryCondition.PERIODIC
    u = np.array(initial.values, dtype=float)
    rows: list = []
    snapshots: List[GridFunction] = []

    def record(t: float, h: float) -> None:
        rows.append((t, h, float(u.min()), float(u.max()),
                     total_variation_of(u, periodic), grid.dx * math.fsum(u)))

    def check_finite(t0: float, t1: float, h: float) -> None:
        if not np.all(np.isfinite(u)):
            j = int(np.flatnonzero(~np.isfinite(u))[0])
            raise SolverError(f"solution became non-finite in cell {j} between "
                              f"t={t0:.6g} and t={t1:.6g} (dt={h:.3g})")

    record(0.0, 0.0)
    t = 0.0
    step = 0
    last_h = 0.0
    for target in targets:
        target = min(max(target, 0.0), problem.t_final)
        base_t, base_step = t, step
        while target - t > tol_t:
            remaining = target - t
            if remaining <= dt * (1.0 + 1e-9):
                k, h = 1, remaining
            elif every_step:
                k, h = 1, dt
            else:
                k = int(remaining / dt)
                if remaining - k * dt <= 1e-9 * dt:
                    k -= 1
                k = max(1, min(k, ledger_stride - step % ledger_stride))
                h = dt
            advancer.advance(u, h, k)
            step += k
            t_new = target if h == remaining else base_t + (step - base_step) * dt
            check_finite(t, t_new, h)
            t, last_h = t_new, h
            if every_step:
                snapshots.append(GridFunction(grid, u, t))
                record(t, h)
            elif step % ledger_stride == 0 and t != target:
                record(t, h)
        if not every_step:
            if rows[-1][0] != target:
                record(target, last_h)
            snapshots.append(GridFunction(grid, u, target))
            t = target

    if every_step:
        snapshots.insert(0, initial)
    ledger = np.array(rows, dtype=LEDGER_DTYPE)
    logger.debug("integrated %d steps of dt=%.3g on %d cells", step, dt, grid.n_cells)
    return Trajectory(problem, eo, snapshots, ledger, dt, step, stepper, every_step,
                      meta={"kernel": bool(use_kernel)})
