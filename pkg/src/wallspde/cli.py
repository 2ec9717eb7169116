"""Batch front-end: config-driven runs writing deterministic file outputs.

Each run populates one output directory with a ``manifest.json`` (command,
resolved config echo, content hash, output list) plus per-artifact files.
In deterministic mode timestamps are omitted, so identical configs produce
byte-identical directories.  Exit codes: 0 success, 2 config validation
failure, 3 numerical non-convergence.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path
from time import time

import numpy as np

from wallspde import __version__
from wallspde.config import (
    ConfigError,
    _field_from_spec,
    build_coefficients,
    build_control,
    build_initial,
    build_optimizer_options,
    build_plan,
    build_target,
    build_walls,
    config_hash,
    load_config,
    validate_config,
)
from wallspde.dynamics import solve_skeleton, solve_spde
from wallspde.lattice import build_grid, heat_kernel
from wallspde.measure import ldp_scaling_curve, sample_invariant, tightness_probe
from wallspde.rate import quasipotential_J, rate_I, rate_S
from wallspde.snapshots import (
    field_hash,
    write_field_snapshot,
    write_json_record,
    write_trajectory_csv,
)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="wallspde", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for name in ("simulate", "skeleton", "rate", "quasipotential", "invariant", "diagnose"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        _common_flags(p)
    p = sub.add_parser("selftest")
    p.add_argument("--config", required=False)
    _common_flags(p)

    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--out", required=True)
    p.add_argument("--deterministic", action="store_true")
    p.add_argument("--threads", type=int, default=1)


def _dispatch(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.command == "selftest":
        return _run_selftest(out, args)
    cfg = validate_config(load_config(args.config), args.command)
    handler = {
        "simulate": _run_simulate,
        "skeleton": _run_skeleton,
        "rate": _run_rate,
        "quasipotential": _run_quasipotential,
        "invariant": _run_invariant,
        "diagnose": _run_diagnose,
    }[args.command]
    code, outputs = handler(cfg, out, args)
    _write_manifest(out, args, cfg, outputs)
    return code


def _write_manifest(out: Path, args, cfg, outputs) -> None:
    manifest = {
        "command": args.command,
        "config": cfg,
        "config_hash": config_hash(cfg) if cfg is not None else None,
        "outputs": sorted(outputs),
        "version": __version__,
    }
    if not args.deterministic:
        manifest["timestamp"] = time()
    write_json_record(manifest, out / "manifest.json")


def _setup(cfg):
    grid = build_grid(cfg["grid"]["n"])
    coeffs = build_coefficients(cfg["coefficients"])
    walls = build_walls(cfg["walls"], grid)
    return grid, coeffs, walls


def _run_simulate(cfg, out, args):
    grid, coeffs, walls = _setup(cfg)
    dt, T = cfg["time"]["dt"], cfg["time"]["horizon"]
    nsec = cfg["noise"]
    traj = solve_spde(
        build_initial(cfg, grid),
        nsec["eps"],
        coeffs,
        walls,
        T,
        dt,
        seed=nsec.get("seed", 0),
        stream=nsec.get("stream", 0),
    )
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_field_snapshot(traj.u, out / "trajectory.bin")
    summary = {
        "eta_mass": traj.eta.total_mass,
        "xi_mass": traj.xi.total_mass,
        "sup_norm": traj.u.sup_norm(),
        "u_hash": field_hash(traj.u.values),
    }
    write_json_record(summary, out / "summary.json")
    return 0, ["trajectory.csv", "trajectory.bin", "summary.json"]


def _skeleton_run(cfg, grid, coeffs, walls):
    dt, T = cfg["time"]["dt"], cfg["time"]["horizon"]
    control = build_control(cfg, grid, T, dt)
    pen = cfg.get("penalty", {})
    return (
        solve_skeleton(
            build_initial(cfg, grid),
            control,
            coeffs,
            walls,
            T,
            dt,
            mode=pen.get("mode", "projected"),
            delta=pen.get("delta", 1e-4),
            eps_pen=pen.get("eps_pen"),
        ),
        control,
    )


def _run_skeleton(cfg, out, args):
    grid, coeffs, walls = _setup(cfg)
    traj, control = _skeleton_run(cfg, grid, coeffs, walls)
    write_trajectory_csv(traj, out / "trajectory.csv")
    write_field_snapshot(traj.u, out / "trajectory.bin")
    summary = {
        "control_action": control.action if control is not None else 0.0,
        "eta_mass": traj.eta.total_mass,
        "xi_mass": traj.xi.total_mass,
        "u_hash": field_hash(traj.u.values),
    }
    write_json_record(summary, out / "summary.json")
    return 0, ["trajectory.csv", "trajectory.bin", "summary.json"]


def _run_rate(cfg, out, args):
    grid, coeffs, walls = _setup(cfg)
    traj, control = _skeleton_run(cfg, grid, coeffs, walls)
    T = cfg["time"]["horizon"]
    i_val = rate_I(traj.u, 0.0, T, coeffs, walls)
    s_val = rate_S(traj.u, 0.0, T, coeffs)
    record = {
        "rate_I": i_val if math.isfinite(i_val) else "inf",
        "rate_S": s_val,
        "control_action": control.action if control is not None else 0.0,
        "window": [0.0, T],
    }
    write_json_record(record, out / "rates.json")
    return 0, ["rates.json"]


def _run_quasipotential(cfg, out, args):
    grid, coeffs, walls = _setup(cfg)
    target = build_target(cfg, grid)
    result = quasipotential_J(target, coeffs, walls, build_optimizer_options(cfg))
    record = {
        "target_hash": field_hash(target),
        "value": result.value,
        "horizon": result.horizon,
        "action": result.control.action,
        "gradient_norm": result.gradient_norm,
        "terminal_gap": result.terminal_gap,
        "converged": result.converged,
    }
    write_json_record(record, out / "quasipotential.json")
    write_field_snapshot(result.path, out / "path.bin")
    return (0 if result.converged else 3), ["quasipotential.json", "path.bin"]


def _run_invariant(cfg, out, args):
    grid, coeffs, walls = _setup(cfg)
    plan, seeds, eps, dt = build_plan(cfg, coeffs)
    measure = sample_invariant(coeffs, walls, eps, plan, seeds, dt=dt)
    means = measure.samples @ grid.weights
    summary = {
        "count": measure.count,
        "eps": eps,
        "seeds": list(seeds),
        "spatial_mean_variance": float(np.var(means)),
        "sup_abs": float(np.max(np.abs(measure.samples))),
        "samples_hash": field_hash(measure.samples),
    }
    write_json_record(summary, out / "summary.json")
    np.save(out / "samples.npy", measure.samples)
    return 0, ["summary.json", "samples.npy"]


def _run_diagnose(cfg, out, args):
    from wallspde.measure import SamplingPlan

    grid, coeffs, walls = _setup(cfg)
    dsec = cfg["diagnose"]
    targets = [
        (_field_from_spec(entry, grid, "target"), entry["delta"]) for entry in dsec["targets"]
    ]
    schedule = dsec["eps_schedule"]
    counts = dsec.get("counts", [500] * len(schedule))
    relax = 1.0 / coeffs.alpha1
    plans = [SamplingPlan(burn_in=10.0 * relax, thin=relax, count=c) for c in counts]
    chains = dsec.get("chains", 16)
    base_seed = dsec.get("base_seed", 200)

    diag = ldp_scaling_curve(
        targets,
        schedule,
        plans,
        coeffs,
        walls,
        base_seed=base_seed,
        dt=dsec.get("dt", 1e-3),
        chains=chains,
        threads=max(1, args.threads),
    )

    lines = ["target_id,eps,p_hat,wilson_lo,wilson_hi,eps2_log_p,J_inner,J_outer"]
    for row in diag.rows:
        e2l = "" if row["eps2_log_p"] is None else format(row["eps2_log_p"], ".17g")
        lines.append(
            f"{row['target_id']},{format(row['eps'], '.17g')},{format(row['p_hat'], '.17g')},"
            f"{format(row['wilson_lo'], '.17g')},{format(row['wilson_hi'], '.17g')},{e2l},"
            f"{format(row['j_inner'], '.17g')},{format(row['j_outer'], '.17g')}"
        )
    (out / "diagnostics.csv").write_text("\n".join(lines) + "\n")

    gamma = dsec.get("gamma")
    tightness = None
    if gamma is not None:
        probe_plan = SamplingPlan(burn_in=10.0 * relax, thin=relax, count=counts[-1])
        seeds = tuple(base_seed + 9000 + j for j in range(chains))
        probe = sample_invariant(coeffs, walls, schedule[-1], probe_plan, seeds, dt=dsec.get("dt", 1e-3))
        radii = dsec.get("radii", [0.5, 1.0, 2.0, 4.0])
        tightness = tightness_probe(probe, gamma, radii)

    record = {
        "rows": diag.rows,
        "trend_rho": diag.trend_rho,
        "trend_ok": diag.trend_ok,
        "j_values": {str(k): list(v) for k, v in diag.j_values.items()},
        "tightness": tightness,
        "seeds": {"base_seed": base_seed, "chains": chains},
        "config": cfg,
    }
    write_json_record(record, out / "diagnostics.json")
    return 0, ["diagnostics.csv", "diagnostics.json"]


def _run_selftest(out, args) -> int:
    """Quick internal identity checks; exit 0 when everything holds."""
    import wallspde.lattice as lattice

    checks = {}
    grid = build_grid(32)
    op = lattice.neumann_operator(grid, 2.0)
    const = np.full(grid.n + 1, 1.7)
    checks["operator_kills_constants"] = bool(
        np.max(np.abs(op.apply(const) + 2.0 * const)) < 1e-10
    )
    ker = heat_kernel(grid, 1.0, 0.1)
    comp = ker @ (grid.weights[:, None] * ker)
    checks["kernel_semigroup"] = bool(
        np.max(np.abs(comp - heat_kernel(grid, 1.0, 0.2))) < 1e-8
    )
    checks["kernel_positive"] = bool(ker.min() >= -1e-12)

    from wallspde.dynamics import CoefficientSpec, solve_deterministic
    from wallspde.lattice import Walls

    coeffs = CoefficientSpec(
        f=lambda x, u: np.zeros_like(u),
        sigma=lambda x, u: np.ones_like(u),
        alpha=2.0,
        lipschitz_c=0.0,
        sigma_min=1.0,
        bound=1.0,
        df_du=lambda x, u: np.zeros_like(u),
        dsigma_du=lambda x, u: np.zeros_like(u),
    )
    walls = Walls.constant(grid, -1.0, 1.0)
    traj = solve_deterministic(np.full(grid.n + 1, 0.5), coeffs, walls, 0.5, 1e-3)
    exact = 0.5 * np.exp(-2.0 * traj.u.times)
    checks["deterministic_decay"] = bool(np.max(np.abs(traj.u.values - exact[:, None])) < 1e-3)

    spde = solve_spde(np.zeros(grid.n + 1), 0.0, coeffs, walls, 0.2, 1e-3, seed=1)
    checks["zero_noise_degenerate"] = bool(spde.u.sup_norm() == 0.0)

    passed = all(checks.values())
    record = {"checks": checks, "passed": passed}
    write_json_record(record, out / "selftest.json")
    _write_manifest(out, args, None, ["selftest.json"])
    for name, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'} {name}")
    return 0 if passed else 1


if __name__ == "__main__":
    sys.exit(main())
