import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eodiffusion.analysis import (
    ConeSpec,
    ErrorReport,
    NormKind,
    cone_l1_error,
    convergence_table,
    entropy_certificate,
    entropy_lattice,
    entropy_residual,
    fit_constant,
    fit_rate,
    interpolant_l1_distance,
    invariant_report,
    l1_norm,
    linf_norm,
    percent_relative_l1_error,
    piecewise_constant_l1_distance,
    restrict_to_coarse,
    total_variation,
)
from eodiffusion.config import RunConfig
from eodiffusion.integrate import TimeStepper, Trajectory, integrate, planned_dt
from eodiffusion.problem import (
    BoundaryCondition,
    DiffusionSpec,
    FluxSpec,
    Grid1D,
    GridFunction,
)

from conftest import antidiffusive_trajectory, make_problem

BC = BoundaryCondition


def gf(values, a=0.0, b=1.0, t=0.0):
    values = np.asarray(values, dtype=float)
    return GridFunction(Grid1D(a, b, values.size), values, t)


# -- norms ----------------------------------------------------------------------------


@pytest.mark.trivial
@given(st.floats(-100, 100), st.floats(0.1, 10), st.integers(1, 64))
def test_norms_of_constant(c, width, n):
    v = gf(np.full(n, c), 0.0, width)
    assert l1_norm(v) == pytest.approx(width * abs(c), rel=1e-12, abs=1e-300)
    assert linf_norm(v) == abs(c)
    assert total_variation(v) == 0.0
    assert total_variation(v, BC.PERIODIC) == 0.0


@pytest.mark.trivial
def test_total_variation_of_step():
    v = gf([0, 0, 1, 1])
    assert total_variation(v, BC.EXTRAPOLATE) == 1.0
    assert total_variation(v, BC.PERIODIC) == 2.0


def test_total_variation_of_sine_tends_to_four():
    from eodiffusion.problem import cell_average_init
    tvs = [total_variation(cell_average_init(np.sin, Grid1D(0, 2 * math.pi, n)), BC.PERIODIC)
           for n in (64, 256, 1024)]
    errs = [abs(tv - 4.0) for tv in tvs]
    assert errs[-1] < 1e-4 and errs[0] > errs[1] > errs[2]


# -- grid transfer ----------------------------------------------------------------------


@pytest.mark.trivial
def test_restrict_constant_and_pairs():
    c = restrict_to_coarse(gf(np.full(8, 3.5)), Grid1D(0, 1, 2))
    assert np.all(c.values == 3.5)
    np.testing.assert_array_equal(restrict_to_coarse(gf([1, 3, 5, 7]), Grid1D(0, 1, 2)).values,
                                  [2.0, 6.0])


@given(st.integers(1, 16), st.integers(0, 2**32 - 1))
def test_restrict_preserves_mass_and_composes(n, seed):
    rng = np.random.default_rng(seed)
    fine = gf(rng.standard_normal(4 * n))
    coarse = restrict_to_coarse(fine, Grid1D(0, 1, n))
    two = restrict_to_coarse(restrict_to_coarse(fine, Grid1D(0, 1, 2 * n)), Grid1D(0, 1, n))
    np.testing.assert_array_equal(coarse.values, two.values)
    assert coarse.dx * math.fsum(coarse.values) == pytest.approx(
        fine.dx * math.fsum(fine.values), rel=1e-12, abs=1e-12)


def test_restrict_rejects_non_nested():
    with pytest.raises(ValueError):
        restrict_to_coarse(gf(np.zeros(6)), Grid1D(0, 1, 4))
    with pytest.raises(ValueError):
        restrict_to_coarse(gf(np.zeros(4)), Grid1D(0, 2, 2))


def test_restrict_odd_ratio():
    np.testing.assert_allclose(restrict_to_coarse(gf([1, 2, 3, 4, 5, 6]), Grid1D(0, 1, 2)).values,
                               [2.0, 5.0])


# -- distances --------------------------------------------------------------------


@pytest.mark.trivial
def test_cone_error_identity_and_indicator():
    u = gf(np.zeros(40), -2.0, 2.0)
    assert cone_l1_error(u, u, 0.3, ConeSpec(1.0, 1.0)) == 0.0
    cone = ConeSpec(1.0, 1.0)
    a, b = cone.interval(0.5)
    assert (a, b) == (-0.5, 0.5)
    x = u.grid.centers
    v = u.with_values(np.where((x > a) & (x < b), 1.0, 0.0))
    assert cone_l1_error(u, v, 0.5, cone) == pytest.approx(2 * (1.0 - 0.5), rel=0, abs=1e-12)


def test_cone_checks():
    with pytest.raises(ValueError):
        ConeSpec(1.0, 1.0).interval(1.0)
    with pytest.raises(ValueError):
        ConeSpec(-1.0, 1.0)
    u = gf(np.zeros(10), -0.5, 0.5)
    with pytest.raises(ValueError, match="leaves domain"):
        cone_l1_error(u, u, 0.0, ConeSpec(1.0, 0.1))


@given(st.integers(0, 2**32 - 1))
def test_cone_error_is_a_metric(seed):
    rng = np.random.default_rng(seed)
    u, v, w = (gf(rng.standard_normal(32), -1, 1) for _ in range(3))
    cone = ConeSpec(0.8, 1.0)
    uv, vu = cone_l1_error(u, v, 0.2, cone), cone_l1_error(v, u, 0.2, cone)
    assert uv == vu
    assert uv <= cone_l1_error(u, w, 0.2, cone) + cone_l1_error(w, v, 0.2, cone) + 1e-12


def test_cone_error_on_mixed_grids_restricts():
    coarse = gf(np.zeros(10), -1, 1)
    fine = gf(np.ones(40), -1, 1)
    assert cone_l1_error(coarse, fine, 0.0, ConeSpec(1.0, 0.0)) == pytest.approx(2.0, abs=1e-12)


@pytest.mark.trivial
@pytest.mark.parametrize("method", ["interpolant", "piecewise-constant", "restrict"])
def test_percent_error_small_cases(method):
    u = gf(np.full(10, 1.0))
    assert percent_relative_l1_error(u, u, method) == 0.0
    ref = gf(np.full(40, 1.01))
    assert percent_relative_l1_error(u, ref, method) == pytest.approx(1.0, rel=0, abs=1e-12)


def test_percent_error_guards():
    u = gf(np.ones(4), t=1.0)
    with pytest.raises(ValueError, match="different times"):
        percent_relative_l1_error(u, gf(np.ones(8), t=0.5))
    with pytest.raises(ValueError):
        percent_relative_l1_error(gf(np.zeros(4)), gf(np.ones(8)))
    with pytest.raises(ValueError):
        percent_relative_l1_error(u, gf(np.ones(8), t=1.0), "nope")


def test_piecewise_constant_distance_on_unnested_grids():
    u = gf([0.0, 1.0])  # jump at 0.5
    v = gf([0.0, 0.0, 1.0])  # jump at 2/3
    assert piecewise_constant_l1_distance(u, v) == pytest.approx(1 / 6, abs=1e-15)


def test_interpolant_distance_crossing_segment():
    u = gf([1.0, -1.0], 0, 2)  # centers 0.5, 1.5
    v = gf([0.0, 0.0], 0, 2)
    # |linear from 1 to -1| over a unit interval integrates to 1/2
    assert interpolant_l1_distance(u, v) == pytest.approx(0.5, abs=1e-15)


# -- convergence tables ---------------------------------------------------------------


@pytest.mark.trivial
def test_convergence_rates():
    assert round(convergence_table([(25, 3.62), (50, 1.55)]).rates[0], 2) == 1.22
    assert convergence_table([(10, 4.0), (20, 1.0)]).rates == [2.0]
    assert convergence_table([(10, 0.3), (20, 0.3)]).rates == [0.0]
    with pytest.raises(ValueError, match="double"):
        convergence_table([(10, 1.0), (30, 0.5)])


@given(st.floats(0.1, 3.0), st.floats(1e-3, 1e3))
def test_rate_of_power_law_is_recovered(p, c):
    ns = [25, 50, 100, 200, 400]
    rep = convergence_table([(n, c * n**-p) for n in ns], domain_length=1.0)
    for r in rep.rates:
        assert r == pytest.approx(p, abs=1e-12)
    assert rep.fitted_rate == pytest.approx(p, abs=1e-12)
    assert fit_constant(rep.dx, rep.errors, p) == pytest.approx(c, rel=1e-10)


def test_fit_rate_guards():
    with pytest.raises(ValueError):
        fit_rate([0.1], [1.0])
    with pytest.raises(ValueError):
        fit_rate([0.1, 0.05], [1.0, 0.0])


def test_error_report_csv():
    rep = ErrorReport([25, 50], [3.62, 1.55], [1.2237], NormKind.RELATIVE_PERCENT_L1, [0.2, 0.1])
    lines = rep.to_csv().splitlines()
    assert lines[0] == "n_cells,dx,error,rate"
    assert lines[1] == "25,0.20000000000000001,3.6200000000000001,"
    assert lines[2].startswith("50,0.10000000000000001,1.55")


# -- entropy ------------------------------------------------------------------------


def burgers_shock(n=100, t=0.3):
    p = make_problem(FluxSpec.burgers(), DiffusionSpec.zero(), BC.EXTRAPOLATE,
                     u0=lambda x: np.where(x < 0, 1.0, 0.0), grid=Grid1D(-1, 1, n), t_final=t)
    return integrate(p, every_step=True)


@pytest.mark.trivial
def test_entropy_of_constant_trajectory_is_zero():
    p = make_problem(FluxSpec.burgers(), DiffusionSpec.porous(), u0=lambda x: np.full_like(x, 0.4),
                     t_final=0.05)
    traj = integrate(p, every_step=True)
    for c in np.linspace(-1, 2, 13):
        assert entropy_residual(traj, c) == 0.0


def test_entropy_on_burgers_shock():
    traj = burgers_shock()
    for c in (-0.5, 0.0, 0.5):
        assert entropy_residual(traj, c) <= 1e-8
    lattice = entropy_lattice(traj)
    assert lattice.size == 17 and lattice[0] == -0.1 and lattice[-1] == 1.1
    worst, _ = entropy_certificate(traj)
    assert worst <= 1e-8


def test_entropy_outside_data_range_is_conservation_residual():
    traj = burgers_shock()
    for c in (-3.0, 5.0):
        assert abs(entropy_residual(traj, c)) <= 1e-10


def test_antidiffusive_update_violates_entropy():
    worst, c = entropy_certificate(antidiffusive_trajectory())
    assert worst > 1e-6


def test_entropy_needs_every_step():
    traj = integrate(make_problem(FluxSpec.burgers(), t_final=0.01))
    with pytest.raises(ValueError, match="every step"):
        entropy_residual(traj, 0.0)


# -- invariant report ---------------------------------------------------------------


def porous(n, t_final=1.0):
    return RunConfig.from_preset(f"table1-n{n}", t_final=t_final).build_problem()


def test_invariants_pass_on_porous_preset():
    rep = invariant_report(integrate(porous(100), ledger_stride=10))
    assert rep.passed, rep.failures()
    assert rep["mass"].gated  # f = 0 with zero diffusive flux conserves mass
    d = rep.to_dict()
    assert d["passed"] is True and {c["name"] for c in d["checks"]} == {
        "linf", "tv", "mass", "flux_bv", "flux_linf"}


def test_cfl_violation_is_flagged():
    p = porous(100, t_final=1.0)
    dt = 4 * planned_dt(p)
    p = p.replace(t_final=40 * dt)
    traj = integrate(p, TimeStepper(fixed_dt=dt, enforce_cfl=False))
    rep = invariant_report(traj)
    assert not rep.passed
    assert {"linf", "tv"} & set(rep.failures())


@pytest.mark.trivial
def test_zero_step_trajectory_has_zero_margins():
    traj = integrate(porous(50, t_final=0.0))
    rep = invariant_report(traj)
    assert rep.passed
    assert all(c.margin == 0.0 for c in rep.checks)


def test_burgers_self_convergence_is_monotone():
    """At t = 0.48 every grid takes a multiple of 4 steps (dt = dx/2, shock speed 1/2),
    so all runs see the discrete shock in the same phase."""
    t = 0.48

    def run(n):
        p = make_problem(FluxSpec.burgers(), DiffusionSpec.zero(), BC.EXTRAPOLATE,
                         u0=lambda x: np.where(x < 0, 1.0, 0.0), grid=Grid1D(-1, 1, n), t_final=t)
        return integrate(p).final

    ref = run(3200)
    cone = ConeSpec(1.0, 1.1)
    errs = [cone_l1_error(run(n), ref, t, cone) for n in (50, 100, 200, 400)]
    assert all(a > b for a, b in zip(errs, errs[1:])), errs
