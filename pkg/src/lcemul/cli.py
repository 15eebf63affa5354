"""The ``sim`` command line tool.

Subcommands: run, check, landscape, verify, render.  Exit codes: 0 on
success, 1 on usage/configuration problems, 2 on solver failure, 3 when a
verification check fails.  SIM_THREADS caps the worker pool used to run
independent verification oracles concurrently.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys

import numpy as np

USAGE_EXIT = 1
SOLVER_EXIT = 2
VERIFY_EXIT = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="sim", description="Two-phase liquid-crystalline emulsion simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="time-step a configuration to equilibrium")
    run.add_argument("--config", required=True, help="config file or builtin preset name")
    run.add_argument("--out", default=None, help="output directory (overrides config)")
    run.add_argument("--snapshot-every", type=int, default=None,
                     help="write a snapshot every N steps (overrides config)")

    check = sub.add_parser("check", help="evaluate the well-posedness condition")
    check.add_argument("--config", required=True)
    check.add_argument("--c-gn", type=float, default=None,
                       help="interpolation constant C (default: estimate on the grid)")
    check.add_argument("--c-lady", type=float, default=None,
                       help="Ladyzhenskaya constant (default: estimate on the grid)")

    land = sub.add_parser("landscape", help="sample the energy landscape g(s, w)")
    land.add_argument("--config", required=True)
    land.add_argument("--region", required=True,
                      help="smin,smax,wmin,wmax rectangle to scan")
    land.add_argument("--out", default=".", help="directory for the CSV output")
    land.add_argument("--samples", type=int, default=129,
                      help="samples per axis in the emitted CSV")

    ver = sub.add_parser("verify", help="run the independent oracle suite")
    group = ver.add_mutually_exclusive_group(required=True)
    group.add_argument("--all", action="store_true")
    for name in ("gradient", "stress", "oracle", "order"):
        group.add_argument(f"--{name}", action="store_true")
    ver.add_argument("--out", default=None, help="CSV file for the oracle results")

    render = sub.add_parser("render", help="render a snapshot field to a PPM image")
    render.add_argument("--snapshot", required=True)
    render.add_argument("--field", default="phi", choices=["phi", "mu", "d", "u"])
    render.add_argument("--out", required=True)
    render.add_argument("--palette", default="heat")
    return parser


def _resolve_config(arg: str):
    from lcemul.io import builtin_config_path, load_config

    if os.path.exists(arg):
        return load_config(arg)
    return load_config(builtin_config_path(arg))


def _cmd_run(args) -> int:
    from lcemul.diagnostics import DiagnosticsWriter
    from lcemul.dynamics import run_to_equilibrium
    from lcemul.io import build_initial_state, render_field_image, write_snapshot
    from lcemul.grid import ScalarField

    cfg = _resolve_config(args.config)
    outdir = args.out if args.out is not None else cfg.output.dir
    snap_every = args.snapshot_every
    if snap_every is None:
        snap_every = cfg.output.snapshot_every or cfg.numerics.snapshot_every
    os.makedirs(outdir, exist_ok=True)

    state = build_initial_state(cfg)

    def on_state(step, st):
        if snap_every and step % snap_every == 0:
            write_snapshot(st, os.path.join(outdir, f"snapshot_{step:08d}.bin"))

    with open(os.path.join(outdir, "diagnostics.csv"), "w", newline="") as fh:
        sink = DiagnosticsWriter(fh)
        summary = run_to_equilibrium(state, cfg.physics, cfg.numerics,
                                     on_row=sink, on_state=on_state)

    final = summary.final_state
    write_snapshot(final, os.path.join(outdir, "final.bin"))
    for name in cfg.output.image_fields:
        if name == "phi":
            field = final.phi
        elif name == "mu" and final.mu is not None:
            field = final.mu
        elif name == "d":
            field = ScalarField(final.grid, np.hypot(final.d.x, final.d.y))
        elif name == "u" and final.flow is not None:
            field = ScalarField(final.grid, np.hypot(final.flow.u.x, final.flow.u.y))
        else:
            continue
        render_field_image(field, os.path.join(outdir, f"final_{name}.ppm"),
                           palette=cfg.output.palette)

    print(f"stopped after {summary.steps} steps (reason: {summary.stop_reason})")
    print(f"t = {final.t:.6g}, energy {summary.e_initial:.6g} -> {summary.e_final:.6g}")
    if summary.last_row is not None:
        print(f"mass = {summary.last_row.mass:.9g}, max|d| = {summary.last_row.max_abs_d:.6g}")
    print(f"outputs in {outdir}")
    return 0


def _cmd_check(args) -> int:
    from lcemul.analysis import (check_wellposedness, estimate_gn_constant,
                                 estimate_lady_constant, d_infinity_bound)
    from lcemul.energy import energy_lower_bound_E0, free_energy
    from lcemul.io import build_initial_state
    from lcemul.grid import max_abs

    cfg = _resolve_config(args.config)
    p = cfg.physics
    grid = cfg.grid
    state = build_initial_state(cfg)

    c_gn = args.c_gn if args.c_gn is not None else estimate_gn_constant(grid)
    c_lady = args.c_lady if args.c_lady is not None else estimate_lady_constant(grid)
    d_inf = d_infinity_bound(max_abs(state.d), p.phi_cr)
    e_tot0 = free_energy(state, p).e_total
    smax = 1.0 if p.potential.value == "flory_huggins" else 2.0
    e0 = energy_lower_bound_E0(p, (-smax, smax, 0.0, 2.0))
    report = check_wellposedness(p, e_tot0, d_inf, c_gn, c_lady, e0, grid.measure)

    rows = [
        ("dimension n", report.n),
        ("min(eps, kappa)", report.min_eps_kappa),
        ("D_inf", report.d_inf),
        ("E0 (landscape lower bound)", report.e0),
        ("E_tot(0)", report.e_tot0),
        ("C interpolation (GN)", report.c_gn),
        ("C interpolation (Ladyzhenskaya)", report.c_lady),
        ("branch A threshold", report.branch_a_threshold),
        ("branch A holds", report.holds_a),
        ("branch B threshold", report.branch_b_threshold),
        ("branch B holds", report.holds_b),
        ("C_gn flip value", report.c_gn_flip),
    ]
    width = max(len(k) for k, _v in rows)
    for key, val in rows:
        print(f"{key:<{width}}  {val}")
    print("note: the lower-bound shift uses the grid measure "
          f"|Omega| = {grid.measure:g} in place of (2*pi)^n")
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow([k for k, _v in rows])
    writer.writerow([repr(v) if isinstance(v, float) else v for _k, v in rows])
    return 0


def _cmd_landscape(args) -> int:
    from lcemul.energy import Potential, find_landscape_minima, g_tilde_value, g_value

    cfg = _resolve_config(args.config)
    p = cfg.physics
    try:
        parts = [float(v) for v in args.region.split(",")]
        smin, smax, wmin, wmax = parts
    except ValueError:
        raise _UsageError("--region must be smin,smax,wmin,wmax")

    os.makedirs(args.out, exist_ok=True)
    n = max(args.samples, 2)
    gfun = g_value if p.potential is Potential.FLORY_HUGGINS else g_tilde_value
    s_ax = np.linspace(smin, smax, n)
    w_ax = np.linspace(wmin, wmax, n)
    if p.potential is Potential.FLORY_HUGGINS:
        s_ax = np.clip(s_ax, -1.0, 1.0)
    samples_path = os.path.join(args.out, "landscape.csv")
    with open(samples_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s", "w", "g"])
        for w in w_ax:
            for s in s_ax:
                writer.writerow([repr(float(s)), repr(float(w)),
                                 repr(float(gfun(s, w, p)))])

    points = find_landscape_minima(p, (smin, smax, wmin, wmax))
    points_path = os.path.join(args.out, "stationary_points.csv")
    with open(points_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["s", "w", "value", "kind", "on_boundary"])
        for pt in points:
            writer.writerow([repr(pt.s), repr(pt.w), repr(pt.value), pt.kind, pt.on_boundary])

    print(f"wrote {samples_path} ({n}x{n} samples) and {points_path} "
          f"({len(points)} stationary points)")
    for pt in points:
        print(f"  ({pt.s:+.6f}, {pt.w:.6f})  g = {pt.value:+.6f}  {pt.kind}"
              + ("  [boundary]" if pt.on_boundary else ""))
    return 0


def _cmd_verify(args) -> int:
    from concurrent.futures import ThreadPoolExecutor

    from lcemul.verify import default_suite

    which = "all"
    for name in ("gradient", "stress", "oracle", "order"):
        if getattr(args, name):
            which = name

    max_workers = 1
    env = os.environ.get("SIM_THREADS")
    if env:
        try:
            max_workers = max(1, int(env))
        except ValueError:
            raise _UsageError(f"SIM_THREADS must be an integer, got '{env}'")

    if which == "all" and max_workers > 1:
        groups = ["gradient", "stress", "oracle", "order"]
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            chunks = list(pool.map(default_suite, groups))
        results = [r for chunk in chunks for r in chunk]
    else:
        results = default_suite(which)

    width = max(len(r.name) for r in results)
    failed = 0
    for r in results:
        status = "PASS" if r.passed else "FAIL"
        failed += 0 if r.passed else 1
        print(f"{status}  {r.name:<{width}}  measured={r.measured:.9g} "
              f"expected={r.expected:.9g} tol={r.tolerance:.3g}")
    print(f"{len(results) - failed}/{len(results)} checks passed")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["name", "measured", "expected", "tolerance", "passed", "details"])
            for r in results:
                writer.writerow([r.name, repr(r.measured), repr(r.expected),
                                 repr(r.tolerance), r.passed, r.details])
    return VERIFY_EXIT if failed else 0


def _cmd_render(args) -> int:
    from lcemul.grid import ScalarField
    from lcemul.io import read_snapshot, render_field_image

    state = read_snapshot(args.snapshot)
    if args.field == "phi":
        field = state.phi
    elif args.field == "mu":
        if state.mu is None:
            raise _UsageError("snapshot has no mu field")
        field = state.mu
    elif args.field == "d":
        field = ScalarField(state.grid, np.hypot(state.d.x, state.d.y))
    else:
        if state.flow is None:
            raise _UsageError("snapshot has no velocity field")
        field = ScalarField(state.grid, np.hypot(state.flow.u.x, state.flow.u.y))
    render_field_image(field, args.out, palette=args.palette)
    print(f"wrote {args.out}")
    return 0


def main(argv=None) -> int:
    # honor the thread cap for numerical backends before heavy imports
    env = os.environ.get("SIM_THREADS")
    if env and env.isdigit():
        os.environ.setdefault("OMP_NUM_THREADS", env)
        os.environ.setdefault("OPENBLAS_NUM_THREADS", env)

    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return USAGE_EXIT

    from lcemul.dynamics import NonConvergenceError, SolverError
    from lcemul.flow import CFLError
    from lcemul.io import ConfigError, SnapshotFormatError

    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "landscape":
            return _cmd_landscape(args)
        if args.command == "verify":
            return _cmd_verify(args)
        if args.command == "render":
            return _cmd_render(args)
        raise _UsageError(f"unknown command {args.command}")
    except _UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return USAGE_EXIT
    except (ConfigError, SnapshotFormatError, FileNotFoundError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return USAGE_EXIT
    except (SolverError, NonConvergenceError, CFLError) as err:
        print(f"solver failure: {err}", file=sys.stderr)
        return SOLVER_EXIT


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
