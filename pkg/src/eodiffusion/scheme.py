"""Spatial operator ``du_j/dt = -D-F_{j+1/2} + D-D+A_j`` with ghost-cell boundaries."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .eo_flux import EOFlux
from .problem import GridFunction, Problem, cell_average_init, face_differences, fill_ghosts


class SolverError(ArithmeticError):
    """The discrete solution stopped being finite."""


@dataclass(frozen=True, eq=False)
class SchemeState:
    u: GridFunction
    problem: Problem
    eo: EOFlux
    padded: Optional[np.ndarray] = None

    @property
    def ghosts_filled(self) -> bool:
        return self.padded is not None


def make_state(problem: Problem, u: Optional[GridFunction] = None,
               eo: Optional[EOFlux] = None) -> SchemeState:
    """Build a state from ``problem``; defaults to the cell-averaged initial data."""
    if u is None:
        u = cell_average_init(problem.u0, problem.grid)
    if eo is None:
        eo = default_eo_flux(problem, u)
    return apply_bc(SchemeState(u, problem, eo))


def default_eo_flux(problem: Problem, u: GridFunction) -> EOFlux:
    if problem.flux.closed_form_split is not None:
        return EOFlux(problem.flux)
    lo, hi = float(u.values.min()), float(u.values.max())
    pad_ = 1e-9 * max(1.0, hi - lo)
    return EOFlux(problem.flux, data_range=(lo - pad_, hi + pad_))


def apply_bc(state: SchemeState) -> SchemeState:
    """Return ``state`` with ghost cells filled for its boundary condition."""
    n = state.u.grid.n_cells
    padded = np.empty(n + 2)
    padded[1:-1] = state.u.values
    fill_ghosts(padded, state.problem.bc)
    padded.flags.writeable = False
    return dataclasses.replace(state, padded=padded)


def convective_rhs(padded: np.ndarray, eo: EOFlux, dx: float) -> np.ndarray:
    """``-(F_{j+1/2} - F_{j-1/2}) / dx``."""
    F = eo.face_fluxes(padded)
    return -(F[1:] - F[:-1]) / dx


def diffusive_rhs(padded: np.ndarray, a, dx: float) -> np.ndarray:
    """``(A_{j+1} - 2 A_j + A_{j-1}) / dx**2``."""
    A = a(padded)
    return (A[2:] - 2.0 * A[1:-1] + A[:-2]) / (dx * dx)


def rhs_from_padded(padded: np.ndarray, problem: Problem, eo: EOFlux) -> np.ndarray:
    dx = problem.grid.dx
    out = np.zeros(padded.shape[0] - 2)
    if not problem.flux.is_zero:
        out += convective_rhs(padded, eo, dx)
    if not problem.diffusion.is_zero:
        out += diffusive_rhs(padded, problem.diffusion.a, dx)
    return out


def spatial_rhs(state: SchemeState) -> np.ndarray:
    """Semi-discrete right-hand side ``du_j/dt`` for every cell."""
    if not state.ghosts_filled:
        raise ValueError("ghost cells not filled; call apply_bc first")
    rhs = rhs_from_padded(state.padded, state.problem, state.eo)
    bad = np.flatnonzero(~np.isfinite(rhs))
    if bad.size:
        j = int(bad[0])
        raise SolverError(f"non-finite right-hand side {rhs[j]} in cell {j} "
                          f"at t={state.u.time:.6g}")
    return rhs


def flux_minus_gradient(padded: np.ndarray, problem: Problem, eo: EOFlux) -> np.ndarray:
    """Total discrete flux ``F_{j+1/2} - D+A_j`` at every face ``j = -1..n-1``."""
    return eo.face_fluxes(padded) - face_differences(problem.diffusion.a(padded), problem.grid.dx)
