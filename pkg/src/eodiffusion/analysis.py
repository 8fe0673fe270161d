"""Norms, grid comparisons, convergence tables, entropy residuals and invariant audits."""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .integrate import Trajectory, total_variation_of
from .problem import BoundaryCondition, Grid1D, GridFunction, pad
from .scheme import flux_minus_gradient

# -- norms -----------------------------------------------------------------


def l1_norm(v: GridFunction) -> float:
    return v.dx * math.fsum(np.abs(v.values))


def linf_norm(v: GridFunction) -> float:
    return float(np.max(np.abs(v.values)))


def total_variation(v: GridFunction, bc: BoundaryCondition = BoundaryCondition.EXTRAPOLATE) -> float:
    """``sum_j |v_{j+1} - v_j|``, including the wrap-around jump when periodic."""
    return total_variation_of(v.values, bc is BoundaryCondition.PERIODIC)


# -- grid transfer and distances -------------------------------------------


def _refinement_ratio(fine: Grid1D, coarse: Grid1D) -> int:
    if not fine.same_domain(coarse):
        raise ValueError("grids cover different domains")
    r, rem = divmod(fine.n_cells, coarse.n_cells)
    if rem or r < 1:
        raise ValueError(f"{fine.n_cells} cells are not nested in {coarse.n_cells}")
    return r


def restrict_to_coarse(fine: GridFunction, coarse_grid: Grid1D) -> GridFunction:
    """Conservative restriction: each coarse value is the mean of its fine cells.

    Factors of two are averaged pairwise, so restricting in stages equals
    restricting at once bit for bit.
    """
    r = _refinement_ratio(fine.grid, coarse_grid)
    v = np.array(fine.values)
    while r % 2 == 0:
        v = 0.5 * (v[0::2] + v[1::2])
        r //= 2
    if r > 1:
        v = v.reshape(-1, r).mean(axis=1)
    return GridFunction(coarse_grid, v, fine.time)


def _coarser_first(u: GridFunction, v: GridFunction) -> Tuple[GridFunction, GridFunction]:
    if u.grid.n_cells > v.grid.n_cells:
        return restrict_to_coarse(u, v.grid), v
    if v.grid.n_cells > u.grid.n_cells:
        return u, restrict_to_coarse(v, u.grid)
    if not u.grid.same_domain(v.grid):
        raise ValueError("grids cover different domains")
    return u, v


def _check_same_time(u: GridFunction, v: GridFunction) -> None:
    if abs(u.time - v.time) > 1e-12 * max(1.0, abs(u.time)):
        raise ValueError(f"functions at different times {u.time} and {v.time}")


def piecewise_constant_l1_distance(u: GridFunction, v: GridFunction) -> float:
    """Exact ``int |u - v| dx`` of the two piecewise-constant functions."""
    if not u.grid.same_domain(v.grid):
        raise ValueError("grids cover different domains")
    br = np.union1d(u.grid.edges, v.grid.edges)
    mid = 0.5 * (br[1:] + br[:-1])
    w = np.diff(br)
    iu = np.clip(np.searchsorted(u.grid.edges, mid) - 1, 0, u.grid.n_cells - 1)
    iv = np.clip(np.searchsorted(v.grid.edges, mid) - 1, 0, v.grid.n_cells - 1)
    return math.fsum(w * np.abs(u.values[iu] - v.values[iv]))


def _abs_linear_integral(h: np.ndarray, d0: np.ndarray, d1: np.ndarray) -> float:
    """Exact ``int |d|`` of linear pieces with end values ``d0, d1`` and widths ``h``."""
    a0, a1 = np.abs(d0), np.abs(d1)
    same = d0 * d1 >= 0
    s = a0 + a1
    cross = np.divide(d0 * d0 + d1 * d1, s, out=np.zeros_like(s), where=s > 0)
    return math.fsum(0.5 * h * np.where(same, s, cross))


def interpolant_l1_distance(u: GridFunction, v: GridFunction) -> float:
    """Exact ``int |u_lin - v_lin| dx`` of the piecewise linear interpolants.

    Integrated over the span of ``u``'s cell centers; ``v`` must cover it.
    """
    a, b = u.grid.centers[0], u.grid.centers[-1]
    xv = v.grid.centers
    if xv[0] > a + 1e-12 * u.grid.length or xv[-1] < b - 1e-12 * u.grid.length:
        raise ValueError("reference does not cover the approximation's nodes")
    br = np.union1d(u.grid.centers, xv[(xv > a) & (xv < b)])
    d = np.interp(br, u.grid.centers, u.values) - np.interp(br, xv, v.values)
    return _abs_linear_integral(np.diff(br), d[:-1], d[1:])


def interpolant_l1_norm(u: GridFunction) -> float:
    x = u.grid.centers
    return _abs_linear_integral(np.diff(x), u.values[:-1], u.values[1:])


@dataclass(frozen=True)
class ConeSpec:
    """Measurement window ``[center - L + M t, center + L - M t]``."""

    L: float
    M: float
    center: float = 0.0

    def __post_init__(self):
        if not (self.L > 0 and self.M >= 0):
            raise ValueError("cone needs L > 0 and M >= 0")

    def interval(self, t: float) -> Tuple[float, float]:
        half = self.L - self.M * t
        if not half > 0:
            raise ValueError(f"cone is empty at t={t}: L - M t = {half:.6g}")
        return self.center - half, self.center + half

    def valid_until(self, t_final: float) -> bool:
        return self.L - self.M * t_final > 0


def cone_l1_error(u: GridFunction, v: GridFunction, t: float, cone: ConeSpec) -> float:
    """L1 distance over the cone at time ``t``, on the coarser of the two grids.

    Cells cut by the cone edges count with their overlap fraction.
    """
    a, b = cone.interval(t)
    u, v = _coarser_first(u, v)
    g = u.grid
    if a < g.x_left - 1e-12 * g.length or b > g.x_right + 1e-12 * g.length:
        raise ValueError(f"cone [{a:.6g}, {b:.6g}] leaves domain [{g.x_left}, {g.x_right}]")
    left, right = g.edges[:-1], g.edges[1:]
    overlap = np.clip(np.minimum(right, b) - np.maximum(left, a), 0.0, None)
    return math.fsum(overlap * np.abs(u.values - v.values))


def percent_relative_l1_error(approx: GridFunction, reference: GridFunction,
                              method: str = "interpolant") -> float:
    """``100 ||u_dx - u_ref||_L1 / ||u_dx||_L1``.

    ``method`` picks how the grid functions become functions of ``x``:

    ``"interpolant"``
        piecewise linear through the cell centers, integrated exactly over
        the span of ``approx``'s centers (grids need not be nested);
    ``"piecewise-constant"``
        cell values on their cells, integrated exactly;
    ``"restrict"``
        the reference is first averaged onto the coarse grid.
    """
    _check_same_time(approx, reference)
    if method == "interpolant":
        denom = interpolant_l1_norm(approx)
    else:
        denom = l1_norm(approx)
    if denom == 0.0:
        raise ValueError("approximation has zero L1 norm")
    if method == "interpolant":
        num = interpolant_l1_distance(approx, reference)
    elif method == "piecewise-constant":
        num = piecewise_constant_l1_distance(approx, reference)
    elif method == "restrict":
        a, r = _coarser_first(approx, reference)
        num = a.dx * math.fsum(np.abs(a.values - r.values))
    else:
        raise ValueError(f"unknown method {method!r}")
    return 100.0 * num / denom


# -- convergence tables ----------------------------------------------------


class NormKind(enum.Enum):
    RELATIVE_PERCENT_L1 = "relative-percent-l1"
    CONE_L1 = "cone-l1"


def fit_rate(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of ``log(error)`` against ``log(h)``."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    if h.size < 2:
        raise ValueError("need at least two points to fit a rate")
    if np.any(e <= 0) or np.any(h <= 0):
        raise ValueError("errors and step sizes must be positive")
    x, y = np.log(h), np.log(e)
    x0 = x - x.mean()
    return float(np.dot(x0, y - y.mean()) / np.dot(x0, x0))


def fit_constant(h: Sequence[float], errors: Sequence[float], rate: float) -> float:
    """``C`` in ``error ~ C h^rate`` (geometric-mean fit at fixed ``rate``)."""
    h = np.asarray(h, dtype=float)
    e = np.asarray(errors, dtype=float)
    return float(np.exp(np.mean(np.log(e) - rate * np.log(h))))


@dataclass
class ErrorReport:
    grid_sizes: List[int]
    errors: List[float]
    rates: List[float]
    norm_kind: NormKind = NormKind.RELATIVE_PERCENT_L1
    dx: Optional[List[float]] = None

    @property
    def fitted_rate(self) -> float:
        h = self.dx if self.dx is not None else [1.0 / n for n in self.grid_sizes]
        return fit_rate(h, self.errors)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["n_cells", "dx", "error", "rate"])
        for k, n in enumerate(self.grid_sizes):
            dx = "" if self.dx is None else f"{self.dx[k]:.17g}"
            rate = "" if k == 0 else f"{self.rates[k - 1]:.17g}"
            w.writerow([n, dx, f"{self.errors[k]:.17g}", rate])
        return buf.getvalue()


def convergence_table(runs: Iterable[Tuple[int, float]],
                      norm_kind: NormKind = NormKind.RELATIVE_PERCENT_L1,
                      domain_length: Optional[float] = None) -> ErrorReport:
    """Pairwise rates ``log2(e_k / e_{k+1})`` for a sequence of doubling grids."""
    runs = list(runs)
    sizes = [int(n) for n, _ in runs]
    errors = [float(e) for _, e in runs]
    for a, b in zip(sizes, sizes[1:]):
        if b != 2 * a:
            raise ValueError(f"grid sizes must double: {a} -> {b}")
    rates = [math.log2(e0 / e1) for e0, e1 in zip(errors, errors[1:])]
    dx = None if domain_length is None else [domain_length / n for n in sizes]
    return ErrorReport(sizes, errors, rates, norm_kind, dx)


# -- discrete entropy inequality ---------------------------------------------


ENTROPY_CHUNK = 512


def entropy_lattice(traj: Trajectory, n: int = 17, margin: float = 0.1) -> np.ndarray:
    v = traj.initial.values
    return np.linspace(float(v.min()) - margin, float(v.max()) + margin, n)


def entropy_residual(traj: Trajectory, c: float) -> float:
    """Largest discrete Kruzkov entropy production for ``|u - c|`` over cells and steps.

    Uses the Crandall-Majda numerical entropy flux
    ``Q = F(u v c, w v c) - F(u ^ c, w ^ c)`` and ``R_j = |A(u_j) - A(c)|``.
    A monotone scheme run under its CFL bound gives a value ``<= 0`` up to
    rounding.  Consecutive snapshots must be single Euler steps.
    """
    if not traj.every_step:
        raise ValueError("entropy residual needs a trajectory recorded at every step")
    problem, eo = traj.problem, traj.eo
    bc, dx = problem.bc, problem.grid.dx
    a = problem.diffusion.a
    ac = float(a(np.array(c)))
    snaps = traj.snapshots
    if len(snaps) < 2:
        return 0.0
    worst = -math.inf
    for k0 in range(0, len(snaps) - 1, ENTROPY_CHUNK):
        chunk = snaps[k0:k0 + ENTROPY_CHUNK + 1]
        U = np.stack([s.values for s in chunk])
        t = np.array([s.time for s in chunk])
        h = np.diff(t)[:, None]
        P = np.stack([pad(v, bc) for v in U[:-1]])
        hi, lo = np.maximum(P, c), np.minimum(P, c)
        Q = (eo.eo_flux(hi[:, :-1].ravel(), hi[:, 1:].ravel())
             - eo.eo_flux(lo[:, :-1].ravel(), lo[:, 1:].ravel())).reshape(hi[:, 1:].shape)
        R = np.abs(a(P) - ac)
        res = ((np.abs(U[1:] - c) - np.abs(U[:-1] - c)) / h
               + (Q[:, 1:] - Q[:, :-1]) / dx
               - (R[:, 2:] - 2.0 * R[:, 1:-1] + R[:, :-2]) / (dx * dx))
        worst = max(worst, float(res.max()))
    return worst


def entropy_certificate(traj: Trajectory, cs: Optional[Sequence[float]] = None) -> Tuple[float, float]:
    """Worst ``(residual, c)`` over the Kruzkov constants ``cs`` (17-point lattice by default)."""
    if cs is None:
        cs = entropy_lattice(traj)
    best = (-math.inf, float("nan"))
    for c in cs:
        r = entropy_residual(traj, float(c))
        if r > best[0]:
            best = (r, float(c))
    return best


# -- invariant audit -------------------------------------------------------

LINF_TOL = 1e-12
TV_TOL = 1e-10
MASS_RTOL = 1e-10
FLUX_RTOL = 1e-8
FLUX_ATOL = 1e-12


@dataclass
class InvariantCheck:
    name: str
    passed: bool
    margin: float
    tolerance: float
    gated: bool = True
    detail: str = ""

    def __post_init__(self):
        self.passed = bool(self.passed)
        self.margin = float(self.margin)
        self.tolerance = float(self.tolerance)


@dataclass
class InvariantReport:
    checks: List[InvariantCheck] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks if c.gated)

    def __getitem__(self, name: str) -> InvariantCheck:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def failures(self) -> List[str]:
        return [c.name for c in self.checks if c.gated and not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed,
                "checks": [dict(name=c.name, passed=c.passed, margin=c.margin,
                                tolerance=c.tolerance, gated=c.gated, detail=c.detail)
                           for c in self.checks]}


def total_flux_profile(traj: Trajectory, u: GridFunction) -> np.ndarray:
    """``F_{j+1/2} - D+A_j`` at the faces of ``u`` (interior faces only when periodic)."""
    g = flux_minus_gradient(pad(u.values, traj.problem.bc), traj.problem, traj.eo)
    if traj.problem.bc is BoundaryCondition.PERIODIC:
        g = g[1:]
    return g


def flux_total_variation(traj: Trajectory, u: GridFunction) -> float:
    return total_variation_of(total_flux_profile(traj, u),
                              traj.problem.bc is BoundaryCondition.PERIODIC)


def _later(a: np.ndarray) -> np.ndarray:
    return a[1:] if a.size > 1 else a


def invariant_report(traj: Trajectory) -> InvariantReport:
    """Audit the ledger and snapshots against the discrete stability estimates.

    Margins are ``initial - worst later value`` (negative means growth); each
    check passes when its margin is at least ``-tolerance``.
    """
    led = traj.ledger
    checks = []

    linf = np.maximum(np.abs(led["umin"]), np.abs(led["umax"]))
    m = float(linf[0] - _later(linf).max())
    checks.append(InvariantCheck("linf", m >= -LINF_TOL, m, LINF_TOL))

    m = float(led["tv"][0] - _later(led["tv"]).max())
    checks.append(InvariantCheck("tv", m >= -TV_TOL, m, TV_TOL))

    mass0 = float(led["mass"][0])
    drift = float(np.max(np.abs(led["mass"] - mass0)))
    tol = MASS_RTOL * (1.0 + abs(mass0))
    conserving = traj.problem.bc is BoundaryCondition.PERIODIC or traj.problem.flux.is_zero
    checks.append(InvariantCheck("mass", drift <= tol, -drift, tol, gated=conserving,
                                 detail="" if conserving else "boundary flux allowed; not gated"))

    profiles = [total_flux_profile(traj, s) for s in traj.snapshots]
    periodic = traj.problem.bc is BoundaryCondition.PERIODIC
    tvs = np.array([total_variation_of(p, periodic) for p in profiles])
    tol = FLUX_RTOL * tvs[0] + FLUX_ATOL
    m = float(tvs[0] - _later(tvs).max())
    checks.append(InvariantCheck("flux_bv", m >= -tol, m, tol))

    sup = np.array([np.max(np.abs(p)) for p in profiles])
    tol = FLUX_RTOL * sup[0] + FLUX_ATOL
    m = float(sup[0] - _later(sup).max())
    checks.append(InvariantCheck("flux_linf", m >= -tol, m, tol))
    return InvariantReport(checks)
