"""Uniform lattice on [0, 1] with Neumann ends and the shifted heat operator.

All spatial integrals use trapezoid weights.  The second-difference operator
mirrors a ghost node across each boundary, which keeps it self-adjoint for
the trapezoid inner product and makes the discrete cosine modes exact
eigenvectors.  The semigroup kernel is assembled from that eigenbasis, so
kernel composition and row mass are identities up to round-off rather than
discretization errors.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = [
    "Grid",
    "Walls",
    "Operator",
    "SpaceTimeField",
    "build_grid",
    "neumann_operator",
    "heat_kernel",
    "backward_euler_inverse",
    "cosine_eigensystem",
    "holder_norm",
]


@dataclass(frozen=True)
class Grid:
    """Uniform partition of [0, 1] into ``n`` intervals (``n + 1`` nodes)."""

    n: int

    def __post_init__(self) -> None:
        if int(self.n) != self.n or self.n < 4:
            raise ValueError(f"grid too coarse: need n >= 4, got n={self.n}")

    @property
    def dx(self) -> float:
        return 1.0 / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n + 1)

    @cached_property
    def weights(self) -> np.ndarray:
        """Trapezoid quadrature weights; they sum to 1 exactly."""
        w = np.full(self.n + 1, self.dx)
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def integrate(self, values: np.ndarray) -> np.ndarray | float:
        """Trapezoid integral over x along the last axis."""
        return np.asarray(values) @ self.weights

    def inner(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(np.sum(self.weights * u * v))


def build_grid(n: int) -> Grid:
    return Grid(n)


@dataclass(frozen=True, eq=False)
class Walls:
    """Lower/upper wall profiles with K1 < 0 < K2 node-wise."""

    grid: Grid
    k1: np.ndarray
    k2: np.ndarray
    d2k1: np.ndarray
    d2k2: np.ndarray

    def __post_init__(self) -> None:
        npts = self.grid.n + 1
        for name, arr in (("k1", self.k1), ("k2", self.k2)):
            if arr.shape != (npts,):
                raise ValueError(f"walls profile {name} has shape {arr.shape}, expected ({npts},)")
        if not np.all(self.k1 < 0.0):
            raise ValueError("lower wall must be negative everywhere (K1 < 0)")
        if not np.all(self.k2 > 0.0):
            raise ValueError("upper wall must be positive everywhere (K2 > 0)")
        if np.min(self.k2 - self.k1) <= 0.0:
            raise ValueError("walls must be separated (min gap > 0)")

    @property
    def gap(self) -> float:
        return float(np.min(self.k2 - self.k1))

    def contains(self, values: np.ndarray, tol: float = 0.0) -> bool:
        return bool(np.all(values >= self.k1 - tol) and np.all(values <= self.k2 + tol))

    @classmethod
    def constant(cls, grid: Grid, k1: float, k2: float) -> "Walls":
        npts = grid.n + 1
        return cls(
            grid,
            np.full(npts, float(k1)),
            np.full(npts, float(k2)),
            np.zeros(npts),
            np.zeros(npts),
        )

    @classmethod
    def from_profiles(cls, grid: Grid, k1: np.ndarray, k2: np.ndarray) -> "Walls":
        k1 = np.asarray(k1, dtype=float)
        k2 = np.asarray(k2, dtype=float)
        return cls(grid, k1, k2, _mirrored_laplacian(grid, k1), _mirrored_laplacian(grid, k2))


def _mirrored_laplacian(grid: Grid, values: np.ndarray) -> np.ndarray:
    """Second difference with ghost nodes mirrored across both ends."""
    inv2 = 1.0 / grid.dx**2
    out = np.empty_like(values, dtype=float)
    out[..., 1:-1] = (values[..., :-2] - 2.0 * values[..., 1:-1] + values[..., 2:]) * inv2
    out[..., 0] = 2.0 * (values[..., 1] - values[..., 0]) * inv2
    out[..., -1] = 2.0 * (values[..., -2] - values[..., -1]) * inv2
    return out


@dataclass(frozen=True, eq=False)
class Operator:
    """Tridiagonal A = (d^2/dx^2) - alpha*I with mirrored-ghost Neumann rows.

    Self-adjoint for the trapezoid inner product; constants are eigenvectors
    with eigenvalue -alpha, and every row sums to -alpha.
    """

    grid: Grid
    alpha: float
    lower: np.ndarray
    main: np.ndarray
    upper: np.ndarray

    def apply(self, values: np.ndarray) -> np.ndarray:
        """A acting on fields shaped (..., n+1)."""
        values = np.asarray(values, dtype=float)
        return _mirrored_laplacian(self.grid, values) - self.alpha * values

    def dense(self) -> np.ndarray:
        n1 = self.grid.n + 1
        mat = np.zeros((n1, n1))
        idx = np.arange(n1)
        mat[idx, idx] = self.main
        mat[idx[1:], idx[:-1]] = self.lower
        mat[idx[:-1], idx[1:]] = self.upper
        return mat


def neumann_operator(grid: Grid, alpha: float) -> Operator:
    """Build the shifted Neumann Laplacian.  Rejects negative alpha."""
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    n1 = grid.n + 1
    inv2 = 1.0 / grid.dx**2
    main = np.full(n1, -2.0 * inv2 - alpha)
    lower = np.full(n1 - 1, inv2)
    upper = np.full(n1 - 1, inv2)
    upper[0] = 2.0 * inv2
    lower[-1] = 2.0 * inv2
    return Operator(grid, float(alpha), lower, main, upper)


def cosine_eigensystem(grid: Grid) -> tuple[np.ndarray, np.ndarray]:
    """Eigenpairs of the mirrored-ghost Laplacian (alpha = 0).

    Returns (lam, basis) where basis column k is cos(k*pi*x) normalised to
    unit trapezoid norm and lam[k] = -4 sin^2(k*pi*dx/2) / dx^2.  These are
    exact eigenvectors of the discrete operator, orthonormal for the
    trapezoid inner product.
    """
    n = grid.n
    x = grid.nodes
    k = np.arange(n + 1)
    basis = np.cos(np.pi * np.outer(x, k))
    norms = np.sqrt(grid.weights @ basis**2)
    basis /= norms
    lam = -4.0 * np.sin(0.5 * np.pi * k / n) ** 2 / grid.dx**2
    return lam, basis


def heat_kernel(grid: Grid, alpha: float, t: float) -> np.ndarray:
    """Dense kernel of exp(t*A), to be applied with trapezoid weights.

    (G_t u)(x_i) = sum_j w_j G[i, j] u_j.  Rows integrate to exp(-alpha*t)
    exactly and composition under trapezoid weights reproduces G_{t+s} up to
    round-off because the kernel is an exact eigen-expansion of the discrete
    operator.
    """
    if alpha < 0.0:
        raise ValueError(f"alpha must be nonnegative, got {alpha}")
    if t <= 0.0:
        raise ValueError(f"kernel time must be positive, got {t}")
    lam, basis = cosine_eigensystem(grid)
    decay = np.exp((lam - alpha) * t)
    return (basis * decay) @ basis.T


def backward_euler_inverse(grid: Grid, alpha: float, dt: float) -> np.ndarray:
    """Dense inverse of (I - dt*A), the implicit-step propagator.

    The matrix is a strictly diagonally dominant M-matrix, so the inverse is
    entrywise nonnegative with row sums 1 / (1 + alpha*dt); a dense inverse
    at these sizes is cheaper per step than repeated banded solves.
    """
    if dt <= 0.0:
        raise ValueError(f"dt must be positive, got {dt}")
    op = neumann_operator(grid, alpha)
    n1 = grid.n + 1
    return np.linalg.inv(np.eye(n1) - dt * op.dense())


def holder_norm(grid: Grid, values: np.ndarray, gamma: float) -> float:
    """Sup norm plus the gamma-Holder difference quotient over node pairs."""
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"holder exponent must lie in (0, 1), got {gamma}")
    v = np.asarray(values, dtype=float)
    x = grid.nodes
    diff = np.abs(v[:, None] - v[None, :])
    dist = np.abs(x[:, None] - x[None, :])
    iu = np.triu_indices(len(x), k=1)
    quot = diff[iu] / dist[iu] ** gamma
    return float(np.max(np.abs(v)) + np.max(quot))


@dataclass(eq=False)
class SpaceTimeField:
    """State path u(x, t) sampled on grid nodes at strictly increasing times."""

    grid: Grid
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self) -> None:
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ValueError("need at least two time levels")
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        expected = (len(self.times), self.grid.n + 1)
        if self.values.shape != expected:
            raise ValueError(f"field values shaped {self.values.shape}, expected {expected}")

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        """Uniform step size; raises when the mesh is not uniform."""
        diffs = np.diff(self.times)
        dt = float(diffs[0])
        if np.max(np.abs(diffs - dt)) > 1e-12 * (1.0 + dt):
            raise ValueError("time mesh is not uniform")
        return dt

    @property
    def initial(self) -> np.ndarray:
        return self.values[0]

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]

    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values)))

    def index_of(self, t: float) -> int:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[k] - t) > 1e-9 * (1.0 + abs(t)):
            raise ValueError(f"time {t} is not on the mesh")
        return k

    def restrict(self, t1: float, t2: float) -> "SpaceTimeField":
        i, j = self.index_of(t1), self.index_of(t2)
        if j <= i:
            raise ValueError("empty restriction window")
        return SpaceTimeField(self.grid, self.times[i : j + 1].copy(), self.values[i : j + 1].copy())
