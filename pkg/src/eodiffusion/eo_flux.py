"""Engquist-Osher flux splitting and the two-point flux ``F(u, v)``."""

from __future__ import annotations

import enum
import math
import warnings
from typing import Optional, Tuple

import numpy as np

from .problem import FluxSpec


class SplitMode(enum.Enum):
    CLOSED_FORM = "closed-form"
    QUADRATURE = "quadrature"


def adaptive_simpson(g, a: float, b: float, tol: float = 1e-10, max_depth: int = 50) -> float:
    """Integrate scalar ``g`` over ``[a, b]`` by adaptive Simpson with Richardson correction."""
    if a == b:
        return 0.0
    fa, fb = g(a), g(b)
    m = 0.5 * (a + b)
    fm = g(m)
    whole = (b - a) * (fa + 4.0 * fm + fb) / 6.0
    return _simpson_step(g, a, b, fa, fm, fb, whole, tol, max_depth)


def _simpson_step(g, a, b, fa, fm, fb, whole, tol, depth):
    m = 0.5 * (a + b)
    lm, rm = 0.5 * (a + m), 0.5 * (m + b)
    flm, frm = g(lm), g(rm)
    left = (m - a) * (fa + 4.0 * flm + fm) / 6.0
    right = (b - m) * (fm + 4.0 * frm + fb) / 6.0
    delta = left + right - whole
    if depth <= 0 or abs(delta) <= 15.0 * tol:
        return left + right + delta / 15.0
    return (_simpson_step(g, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + _simpson_step(g, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1))


class EOFlux:
    """Monotone flux ``F(u, v) = f_plus(u) + f_minus(v)`` for a :class:`FluxSpec`.

    With a closed-form split on the FluxSpec it is used directly.  Otherwise
    ``f_plus(u) = f(0) + int_0^u max(f', 0)`` is integrated numerically over the
    declared ``data_range`` and ``f_minus = f - f_plus``.  ``cache_spacing``
    turns on a tabulation of ``f_plus`` read back by linear interpolation; keep
    it at or below ``dx**2 / 10`` (see :func:`cache_spacing_for`).
    """

    def __init__(self, spec: FluxSpec, split_mode: Optional[SplitMode] = None,
                 quad_resolution: int = 64, data_range: Optional[Tuple[float, float]] = None,
                 cache_spacing: Optional[float] = None, tol: float = 1e-10):
        if split_mode is None:
            split_mode = SplitMode.CLOSED_FORM if spec.closed_form_split else SplitMode.QUADRATURE
        if split_mode is SplitMode.CLOSED_FORM and spec.closed_form_split is None:
            raise ValueError("closed-form mode needs FluxSpec.closed_form_split")
        if quad_resolution < 2:
            raise ValueError("quad_resolution must be >= 2")
        self.spec = spec
        self.split_mode = split_mode
        self.quad_resolution = int(quad_resolution)
        self.tol = tol
        self.data_range = None if data_range is None else (float(data_range[0]), float(data_range[1]))
        self.cache = None

        if split_mode is SplitMode.QUADRATURE:
            if self.data_range is None:
                raise ValueError("quadrature mode needs a declared data_range")
            lo, hi = self.data_range
            if not lo <= hi:
                raise ValueError(f"bad data_range {self.data_range}")
            self._f0 = float(spec.f(np.array(0.0)))
            self._breaks = self._sign_changes(min(lo, 0.0), max(hi, 0.0))
            if cache_spacing is not None:
                self.cache = self._tabulate(cache_spacing)

    # -- quadrature ----------------------------------------------------------

    def _positive_part(self, s: float) -> float:
        return max(float(self.spec.f_prime(np.array(s))), 0.0)

    def _sign_changes(self, lo: float, hi: float) -> np.ndarray:
        if hi <= lo:
            return np.array([lo])
        nodes = np.linspace(lo, hi, self.quad_resolution + 1)
        fine = np.linspace(lo, hi, 4 * self.quad_resolution + 1)
        coarse_sign = np.sign(self.spec.f_prime(nodes))
        fine_sign = np.sign(self.spec.f_prime(fine))
        n_coarse = int(np.count_nonzero(np.diff(coarse_sign)))
        n_fine = int(np.count_nonzero(np.diff(fine_sign)))
        if n_fine > n_coarse:
            warnings.warn(
                f"f' changes sign {n_fine} times on a 4x finer lattice but {n_coarse} times "
                f"at quad_resolution={self.quad_resolution}; increase quad_resolution",
                RuntimeWarning, stacklevel=3)
        return nodes

    def _integral_positive(self, a: float, b: float) -> float:
        """``int_a^b max(f', 0)`` split at lattice nodes between ``a`` and ``b``."""
        if a == b:
            return 0.0
        sgn = 1.0
        if b < a:
            a, b, sgn = b, a, -1.0
        inner = self._breaks[(self._breaks > a) & (self._breaks < b)]
        pts = np.concatenate([[a], inner, [b]])
        tol = self.tol / max(1, len(pts) - 1)
        total = math.fsum(adaptive_simpson(self._positive_part, float(p), float(q), tol)
                          for p, q in zip(pts[:-1], pts[1:]))
        return sgn * total

    def _tabulate(self, spacing: float):
        lo, hi = self.data_range
        if spacing <= 0:
            raise ValueError("cache_spacing must be positive")
        n = max(2, int(math.ceil((hi - lo) / spacing)) + 1)
        lattice = np.linspace(lo, hi, n)
        vals = np.empty(n)
        vals[0] = self._f0 + self._integral_positive(0.0, lattice[0])
        for k in range(1, n):
            vals[k] = vals[k - 1] + self._integral_positive(lattice[k - 1], lattice[k])
        lattice.flags.writeable = False
        vals.flags.writeable = False
        return lattice, vals

    def _check_range(self, u: np.ndarray) -> None:
        lo, hi = self.data_range
        slack = 1e-12 * max(1.0, abs(lo), abs(hi))
        if u.size and (u.min() < lo - slack or u.max() > hi + slack):
            raise ValueError(
                f"u in [{u.min():.6g}, {u.max():.6g}] leaves the declared data range "
                f"[{lo:.6g}, {hi:.6g}]")

    def _quadrature_plus(self, u: np.ndarray) -> np.ndarray:
        self._check_range(u)
        if self.cache is not None:
            lattice, vals = self.cache
            return np.interp(u, lattice, vals)
        out = np.empty(u.shape)
        flat = out.reshape(-1)
        for k, x in enumerate(u.reshape(-1)):
            flat[k] = self._f0 + self._integral_positive(0.0, float(x))
        return out

    # -- public --------------------------------------------------------------

    def f_plus(self, u):
        u = np.asarray(u, dtype=float)
        if self.split_mode is SplitMode.CLOSED_FORM:
            return self.spec.closed_form_split[0](u)
        return self._quadrature_plus(u)

    def f_minus(self, u):
        u = np.asarray(u, dtype=float)
        if self.split_mode is SplitMode.CLOSED_FORM:
            return self.spec.closed_form_split[1](u)
        return self.spec.f(u) - self._quadrature_plus(u)

    def eo_flux(self, u_left, u_right):
        return self.f_plus(u_left) + self.f_minus(u_right)

    __call__ = eo_flux

    def face_fluxes(self, padded: np.ndarray) -> np.ndarray:
        """``F_{j+1/2} = F(u_j, u_{j+1})`` for every face of a ghost-padded array."""
        if self.spec.is_zero:
            return np.zeros(padded.shape[0] - 1)
        return self.f_plus(padded[:-1]) + self.f_minus(padded[1:])


def cache_spacing_for(dx: float) -> float:
    """Largest cache lattice spacing that keeps table error below the scheme's."""
    return dx * dx / 10.0
