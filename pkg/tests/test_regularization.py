import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eodiffusion import presets
from eodiffusion.analysis import ConeSpec
from eodiffusion.config import RunConfig
from eodiffusion.integrate import integrate
from eodiffusion.problem import BoundaryCondition, DiffusionSpec, FluxSpec, Grid1D
from eodiffusion.regularization import (
    default_cone,
    eta_gap_experiment,
    regularize_diffusion,
    viscous_rate_experiment,
)

from conftest import make_problem

u_values = st.floats(-10, 10, allow_nan=False)


@pytest.mark.trivial
def test_regularizing_zero_diffusion():
    d = regularize_diffusion(DiffusionSpec.zero(), 0.1)
    u = np.linspace(-2, 2, 9)
    np.testing.assert_array_equal(d.a(u), 0.1 * u)
    np.testing.assert_array_equal(d.a_prime(u), np.full_like(u, 0.1))
    assert not d.is_zero and d.eta == 0.1


@pytest.mark.trivial
def test_zero_eta_is_identity():
    base = DiffusionSpec.porous()
    assert regularize_diffusion(base, 0.0) is base
    with pytest.raises(ValueError):
        regularize_diffusion(base, -1.0)


@pytest.mark.trivial
def test_regularizing_degenerate_diffusion():
    d = regularize_diffusion(DiffusionSpec.porous(), 0.01)
    assert float(d.a_prime(np.array(-1.0))) == 0.01


@given(st.floats(1e-6, 1.0), st.floats(1e-6, 1.0), u_values)
def test_regularization_composes_additively(e1, e2, u):
    base = DiffusionSpec.porous()
    twice = regularize_diffusion(regularize_diffusion(base, e1), e2)
    u = np.array(u)
    assert float(twice.a(u)) == float(base.a(u) + (e1 + e2) * u)
    assert twice.eta == e1 + e2


@given(st.floats(1e-6, 1.0), u_values)
def test_regularized_slope_is_at_least_eta(eta, u):
    for base in (DiffusionSpec.porous(), DiffusionSpec.zero(), DiffusionSpec.linear(0.3)):
        assert float(regularize_diffusion(base, eta).a_prime(np.array(u))) >= eta


def burgers_base(u0, t=0.5, n=100):
    return make_problem(FluxSpec.burgers(), DiffusionSpec.zero(), BoundaryCondition.EXTRAPOLATE,
                        u0=u0, grid=Grid1D(-1.0, 1.0, n), t_final=t)


def smooth_bump(x):
    return 0.5 + 0.25 * np.exp(-10 * x * x)


def test_large_eta_smooth_data_converges_at_first_order():
    sweep = viscous_rate_experiment(burgers_base(smooth_bump, t=0.3), [1.0], [50, 100, 200, 400])
    assert sweep.fitted_rate(1.0) >= 1.0 - 0.05
    assert all(r.passed for r in sweep.invariants.values())


def test_inviscid_shock_moves_at_rankine_hugoniot_speed():
    n = 400
    traj = integrate(burgers_base(lambda x: np.where(x < 0, 1.0, 0.0), n=n))
    u = traj.final
    x = u.grid.centers
    j = int(np.flatnonzero(u.values < 0.5)[0])
    # linear interpolation of the u = 1/2 crossing
    xs = x[j - 1] + (u.values[j - 1] - 0.5) / (u.values[j - 1] - u.values[j]) * u.grid.dx
    assert abs(xs - 0.25) <= 2 * u.grid.dx


def test_sweep_argument_checks():
    base = burgers_base(smooth_bump)
    with pytest.raises(ValueError, match="decreasing"):
        viscous_rate_experiment(base, [1e-3, 1e-2], [50, 100])
    with pytest.raises(ValueError, match="double"):
        viscous_rate_experiment(base, [1e-2], [50, 120])
    with pytest.raises(ValueError, match="A = 0"):
        viscous_rate_experiment(base.replace(diffusion=DiffusionSpec.porous()), [1e-2], [50, 100])
    with pytest.raises(ValueError, match="multiple"):
        viscous_rate_experiment(base, [1e-2], [50, 100], reference_n=250)


def test_default_cone_fits_domain():
    base = burgers_base(smooth_bump)
    cone = default_cone(base)
    assert cone.M == pytest.approx(0.75 + 0.1, rel=1e-3)  # from cell averages
    assert cone.L == 1.0 and cone.center == 0.0
    with pytest.raises(ValueError, match="too short"):
        default_cone(base.replace(t_final=5.0))


def test_sweep_parallel_matches_serial():
    base = burgers_base(presets.make_initial("riemann", {}), t=0.25)
    kw = dict(etas=[1e-2], resolutions=[50, 100], reference_n=200, cone=ConeSpec(1.0, 1.1))
    a = viscous_rate_experiment(base, **kw)
    b = viscous_rate_experiment(base, workers=2, **kw)
    assert a.results == b.results
    assert len(a.results) == 2 and len(a.invariants) == 3


@pytest.mark.trivial
def test_eta_gap_zero_eta_gives_zero_gap():
    p = RunConfig.from_preset("table1-n100", t_final=0.2).build_problem()
    gap = eta_gap_experiment(p, [0.0, 1e-2, 5e-3])
    assert gap.gaps[0] == 0.0
    assert gap.gaps[1] > gap.gaps[2] > 0
    assert math.isfinite(gap.exponent)
    assert gap.monotone
    assert all(r.passed for r in gap.invariants.values())
