import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from eodiffusion.config import RunConfig
from eodiffusion.integrate import TimeStepper, Trajectory, planned_dt
from eodiffusion.problem import (
    BoundaryCondition,
    DiffusionSpec,
    FluxSpec,
    Grid1D,
    Problem,
    cell_average_init,
    pad,
)
from eodiffusion.scheme import convective_rhs, default_eo_flux, diffusive_rhs

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE = pytest.StashKey[list]()


def make_problem(flux=None, diffusion=None, bc=BoundaryCondition.EXTRAPOLATE,
                 u0=np.sin, grid=None, t_final=0.1):
    return Problem(flux or FluxSpec.zero(), diffusion or DiffusionSpec.zero(), bc, u0,
                   grid or Grid1D(0.0, 1.0, 10), t_final)


def antidiffusive_trajectory(n=100, steps=40):
    """Euler steps of the porous-medium preset with the diffusion sign flipped."""
    p = RunConfig.from_preset(f"table1-n{n}", grid_layout="cells").build_problem()
    u = cell_average_init(p.u0, p.grid)
    eo = default_eo_flux(p, u)
    dt = planned_dt(p)
    snaps = [u]
    for _ in range(steps):
        padded = pad(u.values, p.bc)
        rhs = convective_rhs(padded, eo, p.grid.dx) - diffusive_rhs(padded, p.diffusion.a, p.grid.dx)
        u = u.with_values(u.values + dt * rhs, u.time + dt)
        snaps.append(u)
    return Trajectory(p.replace(t_final=u.time), eo, snaps, np.empty(0), dt, steps,
                      TimeStepper(), every_step=True)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def verdict(request):
    """Record a one-line pass/fail verdict, printed again in the terminal summary."""
    lines = request.config.stash.setdefault(ACCEPTANCE, [])

    def record(label: str, passed: bool, detail: str) -> bool:
        line = f"{label}: {'PASS' if passed else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
