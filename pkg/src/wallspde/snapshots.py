"""On-disk formats: trajectory CSV, binary field snapshots, JSON records.

Binary snapshot layout, all little endian: int64 n, int64 m, float64 dt,
float64 dx, then (m+1)*(n+1) float64 field values in row-major order.  Text
outputs format floats with repr-exact precision so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from wallspde.dynamics import Trajectory
from wallspde.lattice import SpaceTimeField, build_grid

__all__ = [
    "write_trajectory_csv",
    "write_field_snapshot",
    "read_field_snapshot",
    "field_hash",
    "write_json_record",
]

_HEADER = struct.Struct("<qqdd")


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_trajectory_csv(traj: Trajectory, path: str | Path) -> None:
    """Long-format rows (t, x, u, eta_dot, xi_dot); densities for the step
    ending at t, zero on the initial row."""
    grid = traj.u.grid
    times = traj.u.times
    lines = ["t,x,u,eta_dot,xi_dot"]
    for k, t in enumerate(times):
        eta_row = traj.eta.density[k - 1] if k > 0 else np.zeros(grid.n + 1)
        xi_row = traj.xi.density[k - 1] if k > 0 else np.zeros(grid.n + 1)
        for i, x in enumerate(grid.nodes):
            lines.append(
                f"{_fmt(t)},{_fmt(x)},{_fmt(traj.u.values[k, i])},"
                f"{_fmt(eta_row[i])},{_fmt(xi_row[i])}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_field_snapshot(field: SpaceTimeField, path: str | Path) -> None:
    grid = field.grid
    header = _HEADER.pack(grid.n, field.steps, field.dt, grid.dx)
    payload = np.ascontiguousarray(field.values, dtype="<f8").tobytes()
    Path(path).write_bytes(header + payload)


def read_field_snapshot(path: str | Path) -> SpaceTimeField:
    raw = Path(path).read_bytes()
    n, m, dt, dx = _HEADER.unpack_from(raw)
    grid = build_grid(n)
    if abs(grid.dx - dx) > 1e-12:
        raise ValueError(f"snapshot dx={dx} inconsistent with n={n}")
    count = (m + 1) * (n + 1)
    values = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size, count=count)
    times = dt * np.arange(m + 1)
    return SpaceTimeField(grid, times, values.reshape(m + 1, n + 1).copy())


def field_hash(values: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype="<f8").tobytes()).hexdigest()


def write_json_record(record: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
