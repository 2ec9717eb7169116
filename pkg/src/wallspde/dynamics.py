"""Time integrators for the reflected evolution problems.

Four flavours share one semi-implicit core: the controlled (skeleton)
equation, its penalized approximation, the zero-control flow, and the
stochastic equation driven by discretized space-time white noise.  Each step
applies (I - dt*A)^{-1} to the previous state plus the explicit reaction and
drive terms, then restores the wall constraint either by clipping onto
[K1, K2] (projected mode, the production default) or by solving the stiff
penalty balance implicitly node by node (penalized mode, closed form because
the penalty is piecewise linear).  Clip corrections over dt, respectively the
penalty terms at the new state, provide the force densities.

Noise normalisation: each cell increment is N(0, dt*dx) and enters the drift
as sigma * dW / dx, so pairing the forcing with a test function under
trapezoid weights reproduces the white-noise integral.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from wallspde.lattice import Grid, SpaceTimeField, Walls, backward_euler_inverse
from wallspde.obstacle import LocalTime

__all__ = [
    "CoefficientSpec",
    "Control",
    "NoiseRealization",
    "Trajectory",
    "sample_noise",
    "step_penalized",
    "solve_skeleton",
    "solve_deterministic",
    "solve_spde",
    "local_time_energy",
]


@dataclass(frozen=True, eq=False)
class CoefficientSpec:
    """Reaction f(x, u), noise amplitude sigma(x, u), and declared bounds.

    ``lipschitz_c`` bounds the u-Lipschitz constant of f, ``sigma_min`` is a
    positive lower bound on |sigma|, ``bound`` dominates |f| and |sigma| on
    the admissible band.  The dissipativity hypothesis (``f(x, 0) = 0`` and
    ``lipschitz_c < alpha``) makes 0 an exponentially attracting rest point
    with rate alpha - lipschitz_c.
    """

    f: callable
    sigma: callable
    alpha: float
    lipschitz_c: float
    sigma_min: float
    bound: float
    df_du: callable | None = None
    dsigma_du: callable | None = None
    f_name: str = "custom"
    sigma_name: str = "custom"

    @property
    def alpha1(self) -> float:
        return self.alpha - self.lipschitz_c

    def satisfies_h(self, grid: Grid) -> bool:
        if self.lipschitz_c >= self.alpha:
            return False
        at_zero = np.asarray(self.f(grid.nodes, np.zeros(grid.n + 1)))
        return bool(np.max(np.abs(at_zero)) <= 1e-12)

    def require_h(self, grid: Grid) -> None:
        if not self.satisfies_h(grid):
            raise ValueError(
                "hypothesis H required: need f(x, 0) = 0 and lipschitz_c < alpha "
                f"(c={self.lipschitz_c}, alpha={self.alpha})"
            )


@dataclass(eq=False)
class Control:
    """Square-integrable drive: row k holds hdot(., t) on [times[k], times[k+1])."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        expected = (len(self.times) - 1, self.grid.n + 1)
        if self.values.shape != expected:
            raise ValueError(f"control shaped {self.values.shape}, expected {expected}")

    @property
    def l2_norm_sq(self) -> float:
        """Full space-time square integral of hdot."""
        dts = np.diff(self.times)
        return float(dts @ (self.values**2 @ self.grid.weights))

    @property
    def action(self) -> float:
        return 0.5 * self.l2_norm_sq

    @classmethod
    def zero(cls, grid: Grid, times: np.ndarray) -> "Control":
        return cls(grid, np.asarray(times, dtype=float), np.zeros((len(times) - 1, grid.n + 1)))

    @classmethod
    def from_function(cls, grid: Grid, T: float, dt: float, fn) -> "Control":
        """Sample hdot(x, t) at step starts on the uniform mesh of [0, T]."""
        m = round(T / dt)
        times = np.linspace(0.0, T, m + 1)
        vals = np.array([fn(grid.nodes, times[k]) for k in range(m)], dtype=float)
        return cls(grid, times, vals)


@dataclass(eq=False)
class NoiseRealization:
    """White-noise cell increments, one N(0, dt*dx) draw per (step, node)."""

    grid: Grid
    dt: float
    seed: int
    stream: int
    increments: np.ndarray

    @property
    def steps(self) -> int:
        return self.increments.shape[0]

    def negated(self) -> "NoiseRealization":
        return replace(self, increments=-self.increments)


def sample_noise(grid: Grid, dt: float, steps: int, seed: int, stream: int = 0) -> NoiseRealization:
    """Reproducible i.i.d. increments; (seed, stream) fully determines them."""
    if steps < 1:
        raise ValueError(f"need at least one step, got {steps}")
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(stream,)))
    scale = np.sqrt(dt * grid.dx)
    draws = rng.normal(0.0, scale, size=(steps, grid.n + 1))
    return NoiseRealization(grid, float(dt), int(seed), int(stream), draws)


@dataclass(eq=False)
class Trajectory:
    """Reflected path together with its force densities and run metadata."""

    u: SpaceTimeField
    eta: LocalTime
    xi: LocalTime
    coeffs: CoefficientSpec
    mode: str
    eps_noise: float | None = None
    control: Control | None = None


class _SemiImplicitCore:
    """Shared stepping kernel; owns the implicit propagator for one dt."""

    def __init__(self, grid: Grid, walls: Walls, coeffs: CoefficientSpec, dt: float):
        self.grid = grid
        self.walls = walls
        self.coeffs = coeffs
        self.dt = dt
        self.propagator = backward_euler_inverse(grid, coeffs.alpha, dt)

    def free_value(self, state: np.ndarray, drive: np.ndarray | None) -> np.ndarray:
        """Implicit linear step applied to state + dt*f + exogenous increment."""
        rhs = state + self.dt * self.coeffs.f(self.grid.nodes, state)
        if drive is not None:
            rhs = rhs + drive
        return self.propagator @ rhs

    def projected(self, state, drive):
        y = self.free_value(state, drive)
        new = np.clip(y, self.walls.k1, self.walls.k2)
        corr = (new - y) / self.dt
        return new, np.maximum(corr, 0.0), np.maximum(-corr, 0.0)

    def penalized(self, state, drive, delta, eps_pen):
        y = self.free_value(state, drive)
        new = y.copy()
        below = y < self.walls.k1
        above = y > self.walls.k2
        r1 = self.dt / delta
        r2 = self.dt / eps_pen
        new[below] = (y[below] + r1 * self.walls.k1[below]) / (1.0 + r1)
        new[above] = (y[above] + r2 * self.walls.k2[above]) / (1.0 + r2)
        eta = np.maximum(self.walls.k1 - new, 0.0) / delta
        xi = np.maximum(new - self.walls.k2, 0.0) / eps_pen
        return new, eta, xi


def step_penalized(
    state: np.ndarray,
    walls: Walls,
    delta: float,
    eps_pen: float,
    coeffs: CoefficientSpec,
    dt: float,
    hdot: np.ndarray | None = None,
    noise_increment: np.ndarray | None = None,
    eps_noise: float = 0.0,
) -> np.ndarray:
    """One semi-implicit penalized step.

    The stiff restoring terms (u - K1)^- / delta and (u - K2)^+ / eps_pen are
    integrated implicitly per node, which stays stable for arbitrarily small
    penalty parameters; reaction, control, and noise enter explicitly at the
    old state.
    """
    state = np.asarray(state, dtype=float)
    if not np.all(np.isfinite(state)):
        raise ValueError("non-finite state")
    if delta <= 0.0 or eps_pen <= 0.0:
        raise ValueError("penalty parameters must be positive")
    core = _SemiImplicitCore(walls.grid, walls, coeffs, dt)
    drive = _assemble_drive(core, state, hdot, noise_increment, eps_noise)
    new, _, _ = core.penalized(state, drive, delta, eps_pen)
    return new


def _assemble_drive(core, state, hdot, noise_increment, eps_noise):
    drive = None
    if hdot is not None:
        drive = core.dt * core.coeffs.sigma(core.grid.nodes, state) * hdot
    if noise_increment is not None:
        kick = eps_noise * core.coeffs.sigma(core.grid.nodes, state) * noise_increment / core.grid.dx
        drive = kick if drive is None else drive + kick
    return drive


def _check_admissible(u0: np.ndarray, walls: Walls) -> np.ndarray:
    u0 = np.asarray(u0, dtype=float)
    if u0.shape != (walls.grid.n + 1,):
        raise ValueError(f"initial state shaped {u0.shape}, expected ({walls.grid.n + 1},)")
    if not walls.contains(u0, tol=1e-12):
        raise ValueError("inadmissible initial state: must lie between the walls")
    return u0


def _march(core, u0, m, drive_for_step, mode, delta, eps_pen):
    n1 = core.grid.n + 1
    u = np.empty((m + 1, n1))
    eta = np.zeros((m, n1))
    xi = np.zeros((m, n1))
    u[0] = u0
    for k in range(m):
        drive = drive_for_step(k, u[k])
        if mode == "projected":
            u[k + 1], eta[k], xi[k] = core.projected(u[k], drive)
        else:
            u[k + 1], eta[k], xi[k] = core.penalized(u[k], drive, delta, eps_pen)
    return u, eta, xi


def solve_skeleton(
    u0: np.ndarray,
    control: Control | None,
    coeffs: CoefficientSpec,
    walls: Walls,
    T: float,
    dt: float,
    mode: str = "projected",
    delta: float = 1e-4,
    eps_pen: float | None = None,
) -> Trajectory:
    """Integrate the controlled reflected equation on [0, T].

    Projected mode keeps the state inside the walls exactly and reads the
    force densities off the clip corrections.  Penalized mode lets the state
    overshoot by O(delta) and defines the densities through the penalty
    terms; the two agree in the limit delta = eps_pen -> 0.
    """
    grid = walls.grid
    u0 = _check_admissible(u0, walls)
    if mode not in ("projected", "penalized"):
        raise ValueError(f"unknown mode '{mode}'")
    if eps_pen is None:
        eps_pen = delta
    m = round(T / dt)
    if abs(m * dt - T) > 1e-9 * (1.0 + T) or m < 1:
        raise ValueError(f"horizon T={T} is not a positive multiple of dt={dt}")
    times = np.linspace(0.0, T, m + 1)
    if control is not None:
        if control.values.shape[0] < m or abs(control.times[1] - control.times[0] - dt) > 1e-12:
            raise ValueError("mesh mismatch between control and trajectory")
        rows = control.values
    else:
        rows = None

    core = _SemiImplicitCore(grid, walls, coeffs, dt)

    def drive_for_step(k, state):
        if rows is None:
            return None
        return core.dt * coeffs.sigma(grid.nodes, state) * rows[k]

    u, eta, xi = _march(core, u0, m, drive_for_step, mode, delta, eps_pen)
    return Trajectory(
        u=SpaceTimeField(grid, times, u),
        eta=LocalTime(grid, times, eta),
        xi=LocalTime(grid, times, xi),
        coeffs=coeffs,
        mode=mode,
        control=control,
    )


def solve_deterministic(
    z: np.ndarray, coeffs: CoefficientSpec, walls: Walls, T: float, dt: float
) -> Trajectory:
    """Zero-control flow from z; requires the dissipativity hypothesis so the
    path decays toward 0 at rate alpha - lipschitz_c."""
    coeffs.require_h(walls.grid)
    return solve_skeleton(z, None, coeffs, walls, T, dt, mode="projected")


def solve_spde(
    u0: np.ndarray,
    eps_noise: float,
    coeffs: CoefficientSpec,
    walls: Walls,
    T: float,
    dt: float,
    seed: int = 0,
    stream: int = 0,
    noise: NoiseRealization | None = None,
) -> Trajectory:
    """Integrate the stochastic equation at noise level eps_noise.

    dt is capped at dx: larger steps leave the explicit noise/reaction
    sub-step unresolved even though the implicit linear solve itself is
    unconditionally stable.
    """
    grid = walls.grid
    u0 = _check_admissible(u0, walls)
    if eps_noise < 0.0:
        raise ValueError("noise level must be nonnegative")
    if dt > grid.dx:
        raise ValueError(f"dt too large: dt={dt} exceeds the stability heuristic dx={grid.dx}")
    m = round(T / dt)
    if abs(m * dt - T) > 1e-9 * (1.0 + T) or m < 1:
        raise ValueError(f"horizon T={T} is not a positive multiple of dt={dt}")
    times = np.linspace(0.0, T, m + 1)
    if eps_noise > 0.0:
        if noise is None:
            noise = sample_noise(grid, dt, m, seed, stream)
        if noise.steps < m or abs(noise.dt - dt) > 1e-12:
            raise ValueError("mesh mismatch between noise realization and trajectory")
        increments = noise.increments
    else:
        increments = None

    core = _SemiImplicitCore(grid, walls, coeffs, dt)

    def drive_for_step(k, state):
        if increments is None:
            return None
        return eps_noise * coeffs.sigma(grid.nodes, state) * increments[k] / grid.dx

    u, eta, xi = _march(core, u0, m, drive_for_step, "projected", 0.0, 0.0)
    return Trajectory(
        u=SpaceTimeField(grid, times, u),
        eta=LocalTime(grid, times, eta),
        xi=LocalTime(grid, times, xi),
        coeffs=coeffs,
        mode="projected",
        eps_noise=float(eps_noise),
    )


def local_time_energy(lt: LocalTime, alpha: float, T: float) -> float:
    """Exponentially discounted square energy of a force density on [0, T].

    Integral of exp(-alpha*(T - t)) * density^2 dx dt, rectangle rule in time
    with the weight at step ends.  Diagnostic: stays of order
    1 + l2_norm_sq(control) uniformly in T for skeleton runs.
    """
    grid = lt.grid
    mask = lt.times[1:] <= T + 1e-12
    dts = np.diff(lt.times)[mask]
    weight = np.exp(-alpha * (T - lt.times[1:][mask]))
    sq = (lt.density[mask] ** 2) @ grid.weights
    return float((dts * weight) @ sq)
