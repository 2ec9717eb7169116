"""Deterministic two-wall obstacle problem for a continuous forcing path.

Given a forcing path v with v(., 0) between the walls, produce the reflected
correction z with z(., 0) = 0 such that K1 <= z + v <= K2 at every node and
time, together with the nonnegative force densities that realise the
confinement and act only where a wall binds.

Each time step does a backward Euler solve for the linear part and then
clips the result onto the moving band [K1 - v_next, K2 - v_next].  The clip
corrections divided by dt are the force densities, so nonnegativity, wall
exactness at active nodes, and the complementarity identities hold by
construction rather than up to a solver tolerance.  The same recursion
applied to spatially constant data is exactly the classical discrete
two-sided Skorokhod map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from wallspde.lattice import Grid, SpaceTimeField, Walls, backward_euler_inverse, neumann_operator

__all__ = ["LocalTime", "ObstacleSolution", "solve_obstacle", "check_complementarity"]


@dataclass(eq=False)
class LocalTime:
    """Nonnegative force density per (node, step).

    Row k of ``density`` acts on the step ending at ``times[k + 1]``; the
    measure of a space-time cell is density * dx * dt.  Total mass is finite
    by construction on finite horizons.
    """

    grid: Grid
    times: np.ndarray
    density: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.density = np.asarray(self.density, dtype=float)
        expected = (len(self.times) - 1, self.grid.n + 1)
        if self.density.shape != expected:
            raise ValueError(f"density shaped {self.density.shape}, expected {expected}")
        if self.density.min() < 0.0:
            raise ValueError("local-time density must be nonnegative")

    @property
    def total_mass(self) -> float:
        dts = np.diff(self.times)
        return float(dts @ (self.density @ self.grid.weights))

    @classmethod
    def zero(cls, grid: Grid, times: np.ndarray) -> "LocalTime":
        return cls(grid, np.asarray(times, dtype=float), np.zeros((len(times) - 1, grid.n + 1)))


@dataclass(eq=False)
class ObstacleSolution:
    z: SpaceTimeField
    eta: LocalTime
    xi: LocalTime


def solve_obstacle(
    v: SpaceTimeField,
    walls: Walls,
    alpha: float,
    dt: float,
    solver: str = "direct",
    iterative_x0: str = "zero",
) -> ObstacleSolution:
    """Reflected correction z and force densities for the forcing path v.

    ``solver`` selects the inner linear solve: "direct" uses the precomputed
    implicit-step inverse, "iterative" runs GMRES to round-off (``iterative_x0``
    picks the start vector, "zero" or "previous").  Both paths land on the
    same z because the step has a unique solution.
    """
    grid = v.grid
    if abs(v.dt - dt) > 1e-12 * (1.0 + dt):
        raise ValueError(f"dt={dt} does not match the forcing time mesh (dt={v.dt})")
    if not walls.contains(v.initial, tol=1e-12):
        raise ValueError("inadmissible initial condition: v(.,0) must lie between the walls")
    if solver not in ("direct", "iterative"):
        raise ValueError(f"unknown solver '{solver}'")

    m = v.steps
    n1 = grid.n + 1
    propagator = backward_euler_inverse(grid, alpha, dt)
    system = np.eye(n1) - dt * neumann_operator(grid, alpha).dense()

    z = np.zeros((m + 1, n1))
    eta = np.zeros((m, n1))
    xi = np.zeros((m, n1))
    for k in range(m):
        if solver == "direct":
            z_star = propagator @ z[k]
        else:
            x0 = np.zeros(n1) if iterative_x0 == "zero" else z[k].copy()
            z_star, info = spla.gmres(system, z[k], x0=x0, rtol=1e-14, atol=1e-14)
            if info != 0:
                raise RuntimeError(f"iterative inner solve failed (info={info})")
        lo = walls.k1 - v.values[k + 1]
        hi = walls.k2 - v.values[k + 1]
        z[k + 1] = np.clip(z_star, lo, hi)
        correction = z[k + 1] - z_star
        eta[k] = np.maximum(correction, 0.0) / dt
        xi[k] = np.maximum(-correction, 0.0) / dt

    times = v.times.copy()
    return ObstacleSolution(
        z=SpaceTimeField(grid, times, z),
        eta=LocalTime(grid, times, eta),
        xi=LocalTime(grid, times, xi),
    )


def check_complementarity(
    sol: ObstacleSolution, v: SpaceTimeField, walls: Walls
) -> tuple[float, float]:
    """Discrete complementarity integrals (lower, upper).

    Lower: integral of (z + v - K1) against the lower density; upper:
    integral of (K2 - z - v) against the upper density, trapezoid in space
    and rectangle in time with gaps evaluated at step ends.  Both must stay
    below 1e-6 * (1 + total local-time mass) for a valid solution.
    """
    grid = sol.z.grid
    if v.values.shape != sol.z.values.shape or np.max(np.abs(v.times - sol.z.times)) > 1e-12:
        raise ValueError("mesh mismatch between solution and forcing")
    dts = np.diff(sol.z.times)
    u = sol.z.values + v.values
    gap_lower = u[1:] - walls.k1
    gap_upper = walls.k2 - u[1:]
    lower = float(dts @ ((gap_lower * sol.eta.density) @ grid.weights))
    upper = float(dts @ ((gap_upper * sol.xi.density) @ grid.weights))
    return abs(lower), abs(upper)
