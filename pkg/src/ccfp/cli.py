"""Command line front end.

    ccfp evolve config.json [--out DIR] [--stride K] [--quiet]

Subcommands: evolve, convergence, entropy, flocking, network.  Exit status
0 on success, 1 on a solver failure, 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import diagnostics as dg
from . import runs
from .config import ConfigError, RunConfig, load
from .grid import Grid1D
from .integrators import TimeStepper
from .models import CuckerSmaleModel, NetworkModel, initial_flocking
from .quadrature import QuadratureError, QuadratureRule

log = logging.getLogger("ccfp")

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 1, 2


def fmt(x) -> str:
    """Shortest round-trip decimal text for floats, plain text otherwise."""
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if isinstance(x, (np.integer,)):
        return str(int(x))
    return str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(v) for v in r])


def _time_label(t: float) -> str:
    return fmt(float(t))


# --------------------------------------------------------------------------
# Subcommands
# --------------------------------------------------------------------------


def _setup(cfg: RunConfig) -> runs.Setup1D:
    try:
        return runs.setup_from_config(cfg)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc


def cmd_evolve(cfg: RunConfig, out: Path) -> int:
    setup = _setup(cfg)
    grid, problem = setup.grid, setup.problem
    stride = cfg.output.stride
    t_end = cfg.time.t_end
    stepper = TimeStepper(cfg.time.integrator, cfg.time.dt, t_end)
    dt = stepper.resolve_dt(problem, setup.f0) if t_end > 0 else None
    n_steps = int(round(t_end / dt)) if dt else 0
    fields_rows, diag_rows = [], []

    def cb(n, t, f):
        if n % stride == 0 or n == n_steps:
            if cfg.output.emit_fields:
                fields_rows.append((t, *f))
            diag_rows.append(dg.diagnose(t, f, grid, problem.coefficients(f), setup.reference).row())

    stepper.run(problem, setup.f0, cb, dt=dt)
    if cfg.output.emit_fields:
        write_csv(out / "fields.csv", ["t"] + [f"f_{i}" for i in range(grid.n_nodes)], fields_rows)
    write_csv(out / "diagnostics.csv", dg.DiagnosticsRecord.header(), diag_rows)
    if stepper.negative_steps:
        log.warning("%d steps produced negative nodal values", stepper.negative_steps)
    log.info("evolve: %d steps, final mass %s", n_steps, fmt(diag_rows[-1][1]))
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, out: Path) -> int:
    if cfg.model_name != "opinion":
        raise ConfigError("convergence: a reference steady state is only available for the opinion model")
    conv = cfg.convergence
    result = runs.convergence_study(
        cfg.model_params().get("sigma2", 0.2),
        conv.grids,
        conv.times,
        list(conv.quadratures),
        integrator=cfg.time.integrator,
        gauss_points=cfg.quadrature.points,
        fine_n=conv.fine_n,
        fine_times=conv.fine_times,
        fine_quadrature=conv.fine_quadrature,
        progress=log.info,
    )
    write_csv(
        out / "orders.csv",
        ["T", "quadrature", "N_pair", "observed_order", "reference", "err_coarse", "err_fine"],
        [(r.t, r.quadrature, r.pair, r.order, r.reference, r.err_coarse, r.err_fine) for r in result.rows],
    )
    write_csv(
        out / "errors.csv",
        ["T", "quadrature", "reference", "N", "l1_relative_error"],
        [(t, q, ref, n, e) for (q, ref, t, n), e in sorted(result.errors.items(), key=lambda kv: (kv[0][2], kv[0][0], kv[0][1], kv[0][3]))],
    )
    return EXIT_OK


def cmd_entropy(cfg: RunConfig, out: Path) -> int:
    params = cfg.model_params()
    if cfg.model_name != "opinion" or params.get("frozen_u") is None:
        raise ConfigError("entropy: needs model.name = \"opinion\" with model.frozen_u set")
    setup = _setup(cfg)
    rows = runs.entropy_run(setup, cfg.time.integrator, cfg.time.dt, cfg.time.t_end, cfg.output.stride)
    write_csv(
        out / "diagnostics.csv",
        ["t", "entropy", "dissipation", "balance_residual", "flux_identity_deviation"],
        [(r.t, r.entropy, r.dissipation, r.balance_residual, r.flux_identity) for r in rows],
    )
    increases = sum(1 for a, b in zip(rows, rows[1:]) if b.entropy > a.entropy)
    if increases:
        log.warning("entropy increased on %d recorded intervals", increases)
    return EXIT_OK


def _write_snapshot(path: Path, x_name: str, xs, w_nodes, values) -> None:
    rows = ((x, w, v) for x, row in zip(xs, values) for w, v in zip(w_nodes, row))
    write_csv(path, [x_name, "w", "value"], rows)


def cmd_flocking(cfg: RunConfig, out: Path) -> int:
    if cfg.model_name != "cucker-smale":
        raise ConfigError("flocking: needs model.name = \"cucker-smale\"")
    p = cfg.model_params()
    fl = cfg.flocking
    try:
        model = CuckerSmaleModel(p.get("gamma", 0.1), p.get("diffusion", 0.1))
    except ValueError as exc:
        raise ConfigError(f"model: {exc}") from exc
    grid = runs.flocking_grid(fl.x_min, fl.x_max, fl.dx, cfg.grid.w_min, cfg.grid.w_max, cfg.grid.n)
    f0 = initial_flocking(grid, fl.velocity, fl.x_width, fl.w_width)
    rule = QuadratureRule.from_config(cfg.quadrature.kind, cfg.quadrature.points)
    res = runs.flocking_run(
        model, grid, f0, cfg.time.t_end, rule=rule, cfl=fl.cfl, snapshot_times=fl.snapshot_times, stride=cfg.output.stride
    )
    write_csv(
        out / "diagnostics.csv",
        ["t", "mass", "w_variance", "x_sup_deviation"],
        zip(res.times, res.mass, res.w_variance, res.x_deviation),
    )
    for t, f in sorted(res.snapshots.items()):
        _write_snapshot(out / f"t={_time_label(t)}.csv", "x", grid.axis_w.nodes, grid.axis_v.nodes, f)
    return EXIT_OK


def cmd_network(cfg: RunConfig, out: Path) -> int:
    if cfg.model_name != "network":
        raise ConfigError("network: needs model.name = \"network\"")
    try:
        model = NetworkModel(**cfg.model_params())
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"model: {exc}") from exc
    nc = cfg.network
    grid = Grid1D(cfg.grid.w_min, cfg.grid.w_max, cfg.grid.n)
    rule = QuadratureRule.from_config(cfg.quadrature.kind, cfg.quadrature.points)
    res = runs.network_run(
        model,
        grid,
        cfg.time.t_end,
        gamma0=nc.gamma0,
        rule=rule,
        snapshot_times=nc.snapshot_times,
        safety=nc.safety,
        stride=cfg.output.stride,
    )
    write_csv(out / "diagnostics.csv", ["t", "mass", "gamma"], zip(res.times, res.mass, res.gamma))
    for t, f in sorted(res.snapshots.items()):
        _write_snapshot(
            out / f"t={_time_label(t)}.csv", "connections", model.levels, grid.nodes, np.log(f + nc.log_offset)
        )
    return EXIT_OK


COMMANDS = {
    "evolve": cmd_evolve,
    "convergence": cmd_convergence,
    "entropy": cmd_entropy,
    "flocking": cmd_flocking,
    "network": cmd_network,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ccfp", description="Chang-Cooper type mean-field Fokker-Planck solvers")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="JSON run configuration")
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--stride", type=int, help="record every K steps (overrides output.stride)")
    parser.add_argument("--quiet", action="store_true", help="only report warnings and errors")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load(args.config).with_overrides(directory=args.out, stride=args.stride)
        out = Path(cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        (out / "resolved-config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (QuadratureError, ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
