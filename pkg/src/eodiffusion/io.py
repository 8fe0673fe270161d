"""CSV/JSON persistence for snapshots, ledgers, reports and run directories.

Floats are written with 17 significant digits so files round-trip exactly.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import List, Sequence, Tuple

import numpy as np

from .integrate import LEDGER_DTYPE, LEDGER_FIELDS, TimeStepper, Trajectory
from .problem import GridFunction

SNAPSHOT_DIR = "snapshots"
SNAPSHOT_INDEX = "index.csv"
LEDGER_FILE = "ledger.csv"
CONFIG_FILE = "config.json"
INVARIANTS_FILE = "invariants.json"


def fmt(x: float) -> str:
    return f"{x:.17g}"


def write_rows(path: Path, header: Sequence[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) if isinstance(v, float) else v for v in row])
    return path


def write_snapshot(u: GridFunction, path) -> Path:
    return write_rows(path, ["x", "u"],
                      ((float(x), float(v)) for x, v in zip(u.grid.centers, u.values)))


def read_snapshot(path) -> Tuple[np.ndarray, np.ndarray]:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 0], data[:, 1]


def write_snapshots(traj: Trajectory, outdir) -> Path:
    d = Path(outdir) / SNAPSHOT_DIR
    rows = []
    for k, s in enumerate(traj.snapshots):
        name = f"snapshot_{k:04d}.csv"
        write_snapshot(s, d / name)
        rows.append((k, float(s.time), name))
    return write_rows(d / SNAPSHOT_INDEX, ["index", "t", "file"], rows)


def write_ledger(traj: Trajectory, path) -> Path:
    led = traj.ledger
    return write_rows(path, LEDGER_FIELDS,
                      (tuple(float(r[f]) for f in LEDGER_FIELDS) for r in led))


def read_ledger(path) -> np.ndarray:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    out = np.empty(data.shape[0], dtype=LEDGER_DTYPE)
    for k, f in enumerate(LEDGER_FIELDS):
        out[f] = data[:, k]
    return out


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def load_run(rundir) -> Trajectory:
    """Rebuild a :class:`Trajectory` (snapshots, ledger, problem) from a run directory."""
    from .config import RunConfig
    from .scheme import default_eo_flux

    rundir = Path(rundir)
    cfg = RunConfig.load(rundir / CONFIG_FILE)
    problem = cfg.build_problem()
    index = rundir / SNAPSHOT_DIR / SNAPSHOT_INDEX
    snaps: List[GridFunction] = []
    with open(index) as fh:
        for row in csv.DictReader(fh):
            x, u = read_snapshot(rundir / SNAPSHOT_DIR / row["file"])
            if not np.allclose(x, problem.grid.centers, rtol=0, atol=1e-12 * problem.grid.length):
                raise ValueError(f"{row['file']} does not match the configured grid")
            snaps.append(GridFunction(problem.grid, u, float(row["t"])))
    if not snaps:
        raise ValueError(f"no snapshots listed in {index}")
    ledger = read_ledger(rundir / LEDGER_FILE)
    eo = default_eo_flux(problem, snaps[0])
    dts = ledger["dt"][ledger["dt"] > 0]
    return Trajectory(problem, eo, snaps, ledger, float(dts.max()) if dts.size else 0.0,
                      -1, TimeStepper(cfl_safety=cfg.cfl_safety), meta={"loaded_from": str(rundir)})
