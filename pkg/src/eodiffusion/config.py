"""Run configuration: a flat, JSON-serializable description of one problem or sweep."""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

from . import presets
from .analysis import ConeSpec
from .problem import BoundaryCondition, Grid1D, Problem
from .regularization import regularize_diffusion

OUTPUT_ROOT_ENV = "EODIFFUSION_OUTPUT_ROOT"
GRID_LAYOUTS = ("cells", "nodes")


@dataclass
class RunConfig:
    """Everything needed to rebuild a run.

    ``grid_layout="nodes"`` puts ``n_cells`` cell centers on equispaced nodes
    from ``x_left`` to ``x_right`` inclusive instead of dividing the interval
    into ``n_cells`` cells.
    """

    preset: Optional[str] = None
    flux: str = "zero"
    flux_params: Dict[str, Any] = field(default_factory=dict)
    diffusion: str = "zero"
    diffusion_params: Dict[str, Any] = field(default_factory=dict)
    eta: float = 0.0
    bc: str = "extrapolate"
    x_left: float = 0.0
    x_right: float = 1.0
    grid_layout: str = "cells"
    u0: str = "constant"
    u0_params: Dict[str, Any] = field(default_factory=dict)
    n_cells: int = 100
    t_final: float = 1.0
    snapshot_times: Optional[List[float]] = None
    cfl_safety: float = 0.5
    cone_L: Optional[float] = None
    cone_M: Optional[float] = None
    cone_center: float = 0.0
    output_dir: Optional[str] = None
    reference_n: Optional[int] = None
    resolutions: Optional[List[int]] = None
    etas: Optional[List[float]] = None
    ledger_stride: Optional[int] = None
    max_ledger_rows: int = 2000
    figures: bool = True
    workers: int = 1

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.grid_layout not in GRID_LAYOUTS:
            raise ValueError(f"grid_layout must be one of {GRID_LAYOUTS}")
        BoundaryCondition(self.bc)
        presets.make_flux(self.flux, self.flux_params)
        presets.make_diffusion(self.diffusion, self.diffusion_params)
        presets.make_initial(self.u0, self.u0_params)
        if self.eta < 0:
            raise ValueError("eta must be >= 0")
        if int(self.n_cells) != self.n_cells or self.n_cells < 1:
            raise ValueError("n_cells must be a positive integer")

    @classmethod
    def from_preset(cls, name: str, **overrides) -> "RunConfig":
        fields = presets.preset_fields(name)
        fields.update(overrides)
        return cls(preset=name, **fields)

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        name = data.get("preset")
        if name:
            base = presets.preset_fields(name)
            base.update({k: v for k, v in data.items() if k != "preset"})
            return cls(preset=name, **base)
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "RunConfig":
        return cls.from_dict(json.loads(text))

    @classmethod
    def load(cls, path) -> "RunConfig":
        return cls.from_json(Path(path).read_text())

    def with_overrides(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    # -- builders ------------------------------------------------------------

    def make_grid(self, n_cells: Optional[int] = None) -> Grid1D:
        n = self.n_cells if n_cells is None else n_cells
        if self.grid_layout == "nodes":
            return Grid1D.from_nodes(self.x_left, self.x_right, n)
        return Grid1D(self.x_left, self.x_right, n)

    def build_problem(self, n_cells: Optional[int] = None, eta: Optional[float] = None) -> Problem:
        diffusion = presets.make_diffusion(self.diffusion, self.diffusion_params)
        eta = self.eta if eta is None else eta
        if eta:
            diffusion = regularize_diffusion(diffusion, eta)
        return Problem(
            flux=presets.make_flux(self.flux, self.flux_params),
            diffusion=diffusion,
            bc=BoundaryCondition(self.bc),
            u0=presets.make_initial(self.u0, self.u0_params),
            grid=self.make_grid(n_cells),
            t_final=self.t_final,
        )

    def cone(self) -> Optional[ConeSpec]:
        if self.cone_L is None or self.cone_M is None:
            return None
        return ConeSpec(self.cone_L, self.cone_M, self.cone_center)

    def stride_for(self, n_steps_estimate: int) -> int:
        if self.ledger_stride is not None:
            return self.ledger_stride
        return max(1, -(-n_steps_estimate // self.max_ledger_rows))

    def resolve_output(self, default: str) -> Path:
        out = Path(self.output_dir or default)
        root = os.environ.get(OUTPUT_ROOT_ENV)
        if root and not out.is_absolute():
            out = Path(root) / out
        return out
