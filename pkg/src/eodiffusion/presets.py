"""Named fluxes, diffusions, initial data and run presets."""

from __future__ import annotations

import functools
import math
import re
from typing import Callable, Dict

import numpy as np

from .problem import DiffusionSpec, FluxSpec


def constant(x, value=1.0):
    return np.full_like(np.asarray(x, dtype=float), value)


def sine(x):
    return np.sin(x)


def riemann(x, left=1.0, right=0.0, x0=0.0):
    x = np.asarray(x, dtype=float)
    return np.where(x < x0, left, right).astype(float)


def gaussian(x, amplitude=1.0, center=0.0, width=0.25, offset=0.0):
    x = np.asarray(x, dtype=float)
    return offset + amplitude * np.exp(-((x - center) / width) ** 2)


FLUXES: Dict[str, Callable[..., FluxSpec]] = {
    "zero": FluxSpec.zero,
    "linear": FluxSpec.linear,
    "burgers": FluxSpec.burgers,
    "sine": FluxSpec.sine,
}

DIFFUSIONS: Dict[str, Callable[..., DiffusionSpec]] = {
    "zero": DiffusionSpec.zero,
    "linear": DiffusionSpec.linear,
    "porous": DiffusionSpec.porous,
}

INITIAL_DATA: Dict[str, Callable] = {
    "constant": constant,
    "sine": sine,
    "riemann": riemann,
    "gaussian": gaussian,
}


def make_flux(kind: str, params: dict) -> FluxSpec:
    try:
        return FLUXES[kind](**params)
    except KeyError:
        raise ValueError(f"unknown flux kind {kind!r}; known: {sorted(FLUXES)}") from None


def make_diffusion(kind: str, params: dict) -> DiffusionSpec:
    try:
        return DIFFUSIONS[kind](**params)
    except KeyError:
        raise ValueError(f"unknown diffusion kind {kind!r}; known: {sorted(DIFFUSIONS)}") from None


def make_initial(kind: str, params: dict):
    try:
        fn = INITIAL_DATA[kind]
    except KeyError:
        raise ValueError(f"unknown initial datum {kind!r}; known: {sorted(INITIAL_DATA)}") from None
    return functools.partial(fn, **params) if params else fn


# -- presets -----------------------------------------------------------------

TABLE1_RESOLUTIONS = [25, 50, 100, 200, 400, 800]
TABLE1_REFERENCE = 4000
TABLE1_ERRORS = [3.62, 1.55, 0.82, 0.40, 0.18, 0.07]
TABLE1_RATES = [1.22, 0.92, 1.02, 1.11, 1.42]

_POROUS_SINE = dict(
    flux="zero", diffusion="porous", bc="zero-diffusive-flux",
    x_left=-0.5 * math.pi, x_right=math.pi, grid_layout="nodes",
    u0="sine", t_final=1.0,
)

PRESETS: Dict[str, dict] = {
    "constant": dict(
        flux="burgers", diffusion="porous", bc="extrapolate", x_left=0.0, x_right=1.0,
        u0="constant", u0_params={"value": 1.0}, n_cells=50, t_final=0.1),
    "heat": dict(
        flux="zero", diffusion="linear", diffusion_params={"coefficient": 1.0}, bc="periodic",
        x_left=0.0, x_right=2 * math.pi, u0="sine", n_cells=100, t_final=0.5),
    "table1": dict(_POROUS_SINE, n_cells=400, resolutions=TABLE1_RESOLUTIONS,
                   reference_n=TABLE1_REFERENCE),
    "burgers-riemann": dict(
        flux="burgers", diffusion="zero", bc="extrapolate", x_left=-1.0, x_right=1.0,
        u0="riemann", u0_params={"left": 1.0, "right": 0.0, "x0": 0.0}, n_cells=400,
        t_final=0.5),
    "corollary": dict(
        flux="burgers", diffusion="zero", bc="extrapolate", x_left=-1.0, x_right=1.0,
        u0="riemann", u0_params={"left": 1.0, "right": 0.0, "x0": 0.0}, n_cells=1600,
        t_final=0.5, etas=[1e-2, 1e-3], resolutions=[100, 200, 400, 800, 1600],
        reference_n=3200, cone_L=1.0, cone_M=1.1),
    "eta-gap": dict(_POROUS_SINE, n_cells=2000, etas=[1e-2, 5e-3, 2.5e-3, 1.25e-3]),
}

_TABLE1_N = re.compile(r"^table1-n(\d+)$")


def preset_names():
    return sorted(PRESETS) + ["table1-nXXX"]


def preset_fields(name: str) -> dict:
    """Config fields for preset ``name`` (``table1-n400`` etc. included)."""
    m = _TABLE1_N.match(name)
    if m:
        return dict(_POROUS_SINE, n_cells=int(m.group(1)))
    try:
        return dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; known: {preset_names()}") from None
