"""Independent reference computations used as test oracles.

Everything here is deliberately written from scratch against the underlying
mathematics (scalar recursions, mode decompositions, least-squares control
problems) and never calls the solver paths it is used to check.
"""

import numpy as np


def scalar_two_sided_reflection(path, lo, hi):
    """Discrete two-sided Skorokhod map of a scalar path onto [lo, hi].

    Classic projection recursion: start from the clipped initial value and
    clip the previous reflected value plus the raw increment at every step.
    """
    out = np.empty(len(path))
    out[0] = min(max(path[0], lo), hi)
    for k in range(1, len(path)):
        out[k] = min(max(out[k - 1] + path[k] - path[k - 1], lo), hi)
    return out


def random_cosine_path(grid, times, rng, amp=0.5, modes=3, freq=2.0):
    """Smooth random space-time field built from a few cosine modes in x.

    Mode j carries a random amplitude decaying like 1/(1+j)^2 and oscillates
    smoothly in time; the sup norm stays below ``amp``.
    """
    x = grid.nodes
    field = np.zeros((len(times), len(x)))
    total = 0.0
    for j in range(modes + 1):
        a = rng.uniform(-1.0, 1.0) / (1.0 + j) ** 2
        w = rng.uniform(0.2, freq)
        phase = rng.uniform(0.0, 2.0 * np.pi)
        field += a * np.outer(np.cos(w * times + phase), np.cos(j * np.pi * x))
        total += abs(a)
    return amp * field / max(total, 1e-12)


def ou_mode_quasipotential(grid, alpha, target):
    """Spectral minimum-action value for the unreflected linear problem.

    Expand the target over the trapezoid-orthonormal cosine eigenbasis of the
    discrete operator; each mode is an independent controlled linear system
    with rate alpha - lam_k, and the infinite-horizon minimum action is
    sum_k (alpha - lam_k) * c_k^2.
    """
    x = grid.nodes
    n = grid.n
    w = grid.weights
    value = 0.0
    for k in range(n + 1):
        vec = np.cos(k * np.pi * x)
        vec = vec / np.sqrt(w @ vec**2)
        lam = -4.0 * np.sin(0.5 * np.pi * k / n) ** 2 / grid.dx**2
        ck = float(w @ (vec * np.asarray(target)))
        value += (alpha - lam) * ck**2
    return value


def discrete_lq_min_action(rate, dt, steps, target):
    """Brute-force minimum action for one backward-Euler controlled mode.

    Dynamics c_{k+1} = (c_k + dt*b_k) / (1 + rate*dt) from c_0 = 0 with cost
    0.5*dt*sum b_k^2 and hard terminal constraint c_m = target, solved as a
    least-norm problem via the reachability vector.
    """
    a = 1.0 / (1.0 + rate * dt)
    # c_m = sum_k a^(m-k) * dt * b_k
    phi = dt * a ** np.arange(steps, 0, -1)
    b = phi * target / (phi @ phi)
    return 0.5 * dt * float(b @ b), b


def stationary_mode_std(grid, alpha, dt, eps):
    """Exact stationary stds of the cosine modes of the discrete linear flow.

    The backward-Euler chain c <- (c + noise_k) / (1 + rate_k*dt) with mode
    noise variance eps^2 * dt * s_k^2 has stationary variance
    eps^2 * dt * s_k^2 / ((1 + rate_k*dt)^2 - 1); s_k^2 accounts for the
    trapezoid half-weights at the boundary nodes.
    """
    x = grid.nodes
    n = grid.n
    coeffs = grid.weights / grid.dx  # 0.5 at ends, 1.0 inside
    stds = np.empty(n + 1)
    basis = np.empty((n + 1, n + 1))
    for k in range(n + 1):
        vec = np.cos(k * np.pi * x)
        vec = vec / np.sqrt(grid.weights @ vec**2)
        basis[:, k] = vec
        lam = -4.0 * np.sin(0.5 * np.pi * k / n) ** 2 / grid.dx**2
        rate = alpha - lam
        s2 = float(np.sum(coeffs**2 * vec**2) * grid.dx)
        var = eps**2 * dt * s2 / ((1.0 + rate * dt) ** 2 - 1.0)
        stds[k] = np.sqrt(var)
    return stds, basis


def sample_stationary_gaussian(grid, alpha, dt, eps, count, rng):
    """Direct draws from the mode-wise stationary Gaussian field."""
    stds, basis = stationary_mode_std(grid, alpha, dt, eps)
    coeffs = rng.normal(size=(count, grid.n + 1)) * stds
    return coeffs @ basis.T


def wilson_reference(successes, total, z=1.959963984540054):
    """Wilson score interval written out independently."""
    p = successes / total
    denom = 1.0 + z**2 / total
    centre = (p + z**2 / (2.0 * total)) / denom
    half = z * np.sqrt(p * (1.0 - p) / total + z**2 / (4.0 * total**2)) / denom
    return max(centre - half, 0.0), min(centre + half, 1.0)
