"""Grids, grid functions, problem data and the discrete calculus.

Cells are indexed ``0..n_cells-1`` with centers ``x_j = x_left + (j + 1/2) dx``
and half-open cells ``I_j = (x_j - dx/2, x_j + dx/2]``.  Stencil operations
work on *padded* arrays carrying one ghost cell on each side, so that
``padded[j + 1]`` is cell ``j``.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

ScalarFn = Callable[[np.ndarray], np.ndarray]

DEFAULT_QUAD_POINTS = 4


@dataclass(frozen=True)
class Grid1D:
    """Uniform mesh of ``n_cells`` cells on ``[x_left, x_right]``."""

    x_left: float
    x_right: float
    n_cells: int

    def __post_init__(self):
        if not (math.isfinite(self.x_left) and math.isfinite(self.x_right)):
            raise ValueError("domain endpoints must be finite")
        if not self.x_left < self.x_right:
            raise ValueError(f"x_left={self.x_left} must be < x_right={self.x_right}")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError(f"n_cells must be a positive integer, got {self.n_cells}")

    @classmethod
    def from_nodes(cls, a: float, b: float, n_points: int) -> "Grid1D":
        """Grid whose cell centers are the ``n_points`` equispaced nodes from ``a`` to ``b``.

        The cells around the two end nodes stick out of ``[a, b]`` by half a cell.
        """
        if n_points < 2:
            raise ValueError("need at least two nodes")
        h = (b - a) / (n_points - 1)
        return cls(a - 0.5 * h, b + 0.5 * h, n_points)

    @property
    def dx(self) -> float:
        return (self.x_right - self.x_left) / self.n_cells

    @property
    def length(self) -> float:
        return self.x_right - self.x_left

    @functools.cached_property
    def centers(self) -> np.ndarray:
        x = self.x_left + (np.arange(self.n_cells) + 0.5) * self.dx
        x.flags.writeable = False
        return x

    @functools.cached_property
    def edges(self) -> np.ndarray:
        """Cell interfaces ``x_{j-1/2}``, length ``n_cells + 1``."""
        e = self.x_left + np.arange(self.n_cells + 1) * self.dx
        e[-1] = self.x_right
        e.flags.writeable = False
        return e

    def same_domain(self, other: "Grid1D", rtol: float = 1e-12) -> bool:
        scale = max(abs(self.x_left), abs(self.x_right), self.length)
        return (abs(self.x_left - other.x_left) <= rtol * scale
                and abs(self.x_right - other.x_right) <= rtol * scale)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """Cell values ``u_j`` on a grid at a given time.  Immutable."""

    grid: Grid1D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.shape != (self.grid.n_cells,):
            raise ValueError(
                f"expected {self.grid.n_cells} values, got shape {v.shape}")
        bad = np.flatnonzero(~np.isfinite(v))
        if bad.size:
            j = int(bad[0])
            raise ValueError(
                f"non-finite value {v[j]} in cell {j} (x={self.grid.centers[j]:.6g})")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dx(self) -> float:
        return self.grid.dx

    def with_values(self, values, time: Optional[float] = None) -> "GridFunction":
        return GridFunction(self.grid, values, self.time if time is None else time)


class BoundaryCondition(enum.Enum):
    """How the single ghost cell on each side is filled.

    ``ZERO_DIFFUSIVE_FLUX`` copies the adjacent interior value, so that
    ``A(ghost) = A(u_boundary)`` and ``D+A`` vanishes across the wall for any
    nondecreasing ``A``.  ``EXTRAPOLATE`` fills ghosts the same way but is
    meant as a free-space surrogate for compactly supported data.
    """

    ZERO_DIFFUSIVE_FLUX = "zero-diffusive-flux"
    PERIODIC = "periodic"
    EXTRAPOLATE = "extrapolate"


def pad(values: np.ndarray, bc: BoundaryCondition, out: Optional[np.ndarray] = None) -> np.ndarray:
    """Return ``values`` with one ghost cell on each side filled for ``bc``."""
    n = values.shape[0]
    if out is None:
        out = np.empty(n + 2)
    out[1:-1] = values
    return fill_ghosts(out, bc)


def fill_ghosts(padded: np.ndarray, bc: BoundaryCondition) -> np.ndarray:
    """Fill ghost cells of ``padded`` in place (idempotent) and return it."""
    if bc is BoundaryCondition.PERIODIC:
        padded[0] = padded[-2]
        padded[-1] = padded[1]
    else:
        padded[0] = padded[1]
        padded[-1] = padded[-2]
    return padded


def _check_stencil_index(padded: np.ndarray, idx: int) -> None:
    if not 0 <= idx < padded.shape[0]:
        raise IndexError(
            f"stencil index {idx - 1} outside ghost-padded range "
            f"[-1, {padded.shape[0] - 2}]")


def d_plus(padded: np.ndarray, j: int, dx: float) -> float:
    """Forward difference ``(v_{j+1} - v_j) / dx`` at interior index ``j``."""
    _check_stencil_index(padded, j + 1)
    _check_stencil_index(padded, j + 2)
    return (padded[j + 2] - padded[j + 1]) / dx


def d_minus(padded: np.ndarray, j: int, dx: float) -> float:
    """Backward difference ``(v_j - v_{j-1}) / dx`` at interior index ``j``."""
    _check_stencil_index(padded, j)
    _check_stencil_index(padded, j + 1)
    return (padded[j + 1] - padded[j]) / dx


def face_differences(padded: np.ndarray, dx: float) -> np.ndarray:
    """``D+ v_j`` for ``j = -1..n-1``, i.e. at every face ``x_{j+1/2}``."""
    return (padded[1:] - padded[:-1]) / dx


def second_difference(padded: np.ndarray, dx: float) -> np.ndarray:
    """``D-D+ v_j`` for the interior cells."""
    return (padded[2:] - 2.0 * padded[1:-1] + padded[:-2]) / (dx * dx)


def cell_average_init(u0: ScalarFn, grid: Grid1D,
                      quad_points: int = DEFAULT_QUAD_POINTS) -> GridFunction:
    """Cell averages of ``u0`` by ``quad_points``-point Gauss-Legendre per cell.

    ``u0`` must accept numpy arrays.  The rule is applied to deviations from
    the midpoint value, which keeps constants exact.
    """
    if int(quad_points) != quad_points or quad_points < 1:
        raise ValueError(f"quad_points must be a positive integer, got {quad_points}")
    nodes, weights = np.polynomial.legendre.leggauss(int(quad_points))
    weights = weights / weights.sum()
    xc = grid.centers
    mid = np.asarray(u0(xc), dtype=float) * np.ones_like(xc)
    _reject_nonfinite(mid, grid)
    acc = np.zeros_like(xc)
    for s, w in zip(nodes, weights):
        sample = np.asarray(u0(xc + 0.5 * grid.dx * s), dtype=float) * np.ones_like(xc)
        _reject_nonfinite(sample, grid)
        acc += w * (sample - mid)
    return GridFunction(grid, mid + acc, 0.0)


def _reject_nonfinite(sample: np.ndarray, grid: Grid1D) -> None:
    bad = np.flatnonzero(~np.isfinite(sample))
    if bad.size:
        j = int(bad[0])
        raise ValueError(
            f"initial datum is not finite in cell {j} "
            f"(x in [{grid.edges[j]:.6g}, {grid.edges[j + 1]:.6g}])")


def interp_linear(v: GridFunction, x: float) -> float:
    """Piecewise linear interpolant through the cell-center values.

    Outside ``[x_0, x_{n-1}]`` the nearest cell value is returned.
    """
    if not math.isfinite(x):
        raise ValueError(f"x must be finite, got {x}")
    return float(np.interp(x, v.grid.centers, v.values))


def cell_index(grid: Grid1D, x: float) -> int:
    """Index of the right-closed cell ``(x_{j-1/2}, x_{j+1/2}]`` holding ``x``.

    The left domain endpoint is assigned to cell 0.
    """
    if not (grid.x_left <= x <= grid.x_right):
        raise ValueError(f"x={x} outside domain [{grid.x_left}, {grid.x_right}]")
    edges = grid.edges
    j = int(np.searchsorted(edges, x, side="left")) - 1
    return min(max(j, 0), grid.n_cells - 1)


def eval_piecewise_constant(v: GridFunction, x: float) -> float:
    return float(v.values[cell_index(v.grid, x)])


# -- flux and diffusion functions --------------------------------------------

# Kernel codes understood by the compiled stepper in ``integrate``.
FLUX_ZERO, FLUX_LINEAR, FLUX_BURGERS = 0, 1, 2
DIFF_ZERO, DIFF_LINEAR, DIFF_POROUS = 0, 1, 2


def _zero(u):
    return np.zeros_like(np.asarray(u, dtype=float))


def _const(u, c):
    return np.full_like(np.asarray(u, dtype=float), c)


def _scaled(u, c):
    return c * np.asarray(u, dtype=float)


def _half_square(u):
    u = np.asarray(u, dtype=float)
    return 0.5 * u * u


def _identity(u):
    return np.asarray(u, dtype=float) * 1.0


def _burgers_plus(u):
    m = np.maximum(np.asarray(u, dtype=float), 0.0)
    return 0.5 * m * m


def _burgers_minus(u):
    m = np.minimum(np.asarray(u, dtype=float), 0.0)
    return 0.5 * m * m


def _linear_plus(u, c):
    return max(c, 0.0) * np.asarray(u, dtype=float)


def _linear_minus(u, c):
    return min(c, 0.0) * np.asarray(u, dtype=float)


def _sine_plus(u):
    return np.sin(np.clip(u, -0.5 * np.pi, 0.5 * np.pi))


def _sine_minus(u):
    u = np.asarray(u, dtype=float)
    return np.sin(u) - _sine_plus(u)


def _porous(u):
    m = np.maximum(np.asarray(u, dtype=float), 0.0)
    return 0.5 * m * m


def _porous_prime(u):
    return np.maximum(np.asarray(u, dtype=float), 0.0)


def _sample_lattice(lo: float, hi: float, n: int = 257) -> np.ndarray:
    # irrational offset keeps samples off kinks at round numbers
    if hi <= lo:
        return np.array([lo])
    s = (np.arange(n) + 0.5 * (math.sqrt(5.0) - 1.0)) / n
    return lo + (hi - lo) * s


@dataclass(frozen=True)
class FluxSpec:
    """Convective flux ``f`` with derivative ``f'``.

    ``closed_form_split`` optionally supplies ``(f_plus, f_minus)`` directly;
    ``kernel`` is a ``(code, parameter)`` pair for the compiled stepper.
    """

    f: ScalarFn
    f_prime: ScalarFn
    lipschitz_bound_hint: Optional[float] = None
    closed_form_split: Optional[Tuple[ScalarFn, ScalarFn]] = None
    kernel: Optional[Tuple[int, float]] = None

    @classmethod
    def zero(cls) -> "FluxSpec":
        return cls(_zero, _zero, 0.0, (_zero, _zero), (FLUX_ZERO, 0.0))

    @classmethod
    def linear(cls, speed: float) -> "FluxSpec":
        c = float(speed)
        return cls(functools.partial(_scaled, c=c), functools.partial(_const, c=c), abs(c),
                   (functools.partial(_linear_plus, c=c), functools.partial(_linear_minus, c=c)),
                   (FLUX_LINEAR, c))

    @classmethod
    def burgers(cls) -> "FluxSpec":
        return cls(_half_square, _identity, None, (_burgers_plus, _burgers_minus),
                   (FLUX_BURGERS, 0.0))

    @classmethod
    def sine(cls) -> "FluxSpec":
        return cls(np.sin, np.cos, 1.0, (_sine_plus, _sine_minus))

    @property
    def is_zero(self) -> bool:
        return self.kernel is not None and self.kernel[0] == FLUX_ZERO

    def max_speed(self, lo: float, hi: float) -> float:
        """Bound on ``|f'|`` over ``[lo, hi]``."""
        if self.lipschitz_bound_hint is not None:
            return float(self.lipschitz_bound_hint)
        s = np.concatenate([[lo, hi], _sample_lattice(lo, hi, 1025)])
        return float(np.max(np.abs(self.f_prime(s))))

    def check(self, lo: float, hi: float) -> None:
        """Raise ``ValueError`` if ``f_prime`` or the split disagree with ``f``."""
        u = _sample_lattice(lo, hi)
        h = 1e-5 * max(1.0, abs(lo), abs(hi))
        fd = (self.f(u + h) - self.f(u - h)) / (2 * h)
        fp = self.f_prime(u)
        tol = 1e-6 * (1.0 + np.max(np.abs(fp)))
        k = int(np.argmax(np.abs(fd - fp)))
        if abs(fd[k] - fp[k]) > tol:
            raise ValueError(f"f_prime inconsistent with f at u={u[k]:.6g}: "
                             f"{fp[k]:.6g} vs difference quotient {fd[k]:.6g}")
        if self.closed_form_split is not None:
            fplus, fminus = self.closed_form_split
            f = self.f(u)
            gap = np.abs(fplus(u) + fminus(u) - f)
            if np.any(gap > 1e-12 * np.maximum(1.0, np.abs(f))):
                k = int(np.argmax(gap))
                raise ValueError(f"closed-form split does not add up to f at u={u[k]:.6g}")


class _Regularized:
    """``base(u) + eta * u`` (or ``base'(u) + eta`` when ``derivative``)."""

    def __init__(self, base: ScalarFn, eta: float, derivative: bool = False):
        self.base = base
        self.eta = eta
        self.derivative = derivative

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        if self.derivative:
            return self.base(u) + self.eta
        return self.base(u) + self.eta * u

    def __repr__(self):
        return f"_Regularized({self.base!r}, eta={self.eta}, derivative={self.derivative})"


@dataclass(frozen=True)
class DiffusionSpec:
    """Nondecreasing diffusion function ``A`` with ``A' >= 0``.

    ``eta`` records the linear regularization already folded into ``a``.
    """

    a: ScalarFn
    a_prime: ScalarFn
    eta: float = 0.0
    kernel: Optional[Tuple[int, float]] = None

    @classmethod
    def zero(cls) -> "DiffusionSpec":
        return cls(_zero, _zero, 0.0, (DIFF_ZERO, 0.0))

    @classmethod
    def linear(cls, coefficient: float) -> "DiffusionSpec":
        c = float(coefficient)
        if c < 0:
            raise ValueError("linear diffusion coefficient must be >= 0")
        return cls(functools.partial(_scaled, c=c), functools.partial(_const, c=c), 0.0,
                   (DIFF_LINEAR, c))

    @classmethod
    def porous(cls) -> "DiffusionSpec":
        """``A(u) = max(u, 0)^2 / 2``, degenerate for ``u <= 0``."""
        return cls(_porous, _porous_prime, 0.0, (DIFF_POROUS, 0.0))

    @property
    def is_zero(self) -> bool:
        return self.eta == 0.0 and self.kernel is not None and self.kernel[0] == DIFF_ZERO

    def max_slope(self, lo: float, hi: float) -> float:
        """Bound on ``A'`` over ``[lo, hi]``."""
        s = np.concatenate([[lo, hi], _sample_lattice(lo, hi, 1025)])
        return float(np.max(self.a_prime(s)))

    def check(self, lo: float, hi: float) -> None:
        u = _sample_lattice(lo, hi)
        ap = self.a_prime(u)
        if np.any(ap < 0):
            k = int(np.argmin(ap))
            raise ValueError(f"A'(u) < 0 at u={u[k]:.6g}")
        a = self.a(u)
        if np.any(np.diff(a) < 0):
            k = int(np.argmin(np.diff(a)))
            raise ValueError(f"A decreases between u={u[k]:.6g} and u={u[k + 1]:.6g}")


@dataclass(frozen=True)
class Problem:
    """``u_t + f(u)_x = A(u)_xx`` on ``grid`` with initial datum ``u0``."""

    flux: FluxSpec
    diffusion: DiffusionSpec
    bc: BoundaryCondition
    u0: ScalarFn
    grid: Grid1D
    t_final: float

    def __post_init__(self):
        if not (math.isfinite(self.t_final) and self.t_final >= 0):
            raise ValueError(f"t_final must be finite and >= 0, got {self.t_final}")

    def replace(self, **changes) -> "Problem":
        import dataclasses
        return dataclasses.replace(self, **changes)
