"""Command line interface and run orchestration.

Subcommands::

    etransport simulate --config run.json [--out DIR] [--allow-extended-beta]
    etransport region-scan [--beta-min ... --b-step ...] --out scan.csv
    etransport sweep --betas=-0.25,0.25 --config run.json [--out DIR] [--allow-extended-beta]
    etransport verify --config run.json

Exit codes: 0 success, 1 failed verification, 2 configuration error,
3 solver abort.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import diagnostics as diag
from .admissible import RegionScanSpec, region_scan
from .config import (
    ConfigError,
    RunConfig,
    config_to_dict,
    initial_state,
    load_config,
    write_table,
)
from .discretization import Dirichlet, State, assemble_jacobian, assemble_residual, interior_mass_balance
from .model import ModelParams, to_uv
from .solver import SolverAbort, advance

__all__ = ["RunOutcome", "run", "sweep", "verify", "region_scan_cmd", "main"]

log = logging.getLogger(__name__)

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
LATE_WINDOW_START = 0.2


@dataclass
class RunOutcome:
    status: int
    output_dir: Path
    summary: dict
    message: str = ""


def _snapshot_rows(state: State, params: ModelParams, grid):
    theta = state.theta
    u, v = to_uv(state.n, theta, params.beta)
    return zip(grid.x, state.n, theta, u, v)


def _fmt_time(t: float) -> str:
    return f"{t:g}"


def _late_fit(times, values, t_end):
    start = LATE_WINDOW_START if t_end > LATE_WINDOW_START else 0.0
    try:
        fit = diag.fit_decay(times, values, window=(start, t_end))
    except ValueError as exc:
        return {"error": str(exc)}
    return fit.__dict__ | {"window": list(fit.window)}


def envelope_constants(times, values):
    """Constants ``C1, C2 > 0`` with ``values <= C1 / (1 + C2 t)`` at every sample.

    ``C2`` comes from the least-squares algebraic fit when that is positive.
    Otherwise (typical for exponential decay, where the fit of ``1/v`` has
    a negative intercept) ``C2`` is the largest value for which the envelope
    through the first sample still dominates every sample. ``C1`` is then the
    smallest admissible value.

    Raises
    ------
    ValueError
        If no positive ``C2`` exists, i.e. the series rises above its first value.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    fit = diag.fit_decay(times, values)
    c2 = fit.alg_C2
    if not (c2 > 0 and fit.alg_C1 > 0):
        later = times > times[0]
        c2 = float(np.min((values[0] / values[later] - 1.0) / times[later]))
        if not c2 > 0:
            raise ValueError("series exceeds its initial value; no algebraic envelope with C2 > 0")
    c1 = diag.algebraic_envelope(times, values, c2)
    return c1, c2, fit.alg_r2


def run(config: RunConfig, out_dir=None, base_dir: Optional[Path] = None) -> RunOutcome:
    """Integrate ``config`` and write ``trajectory.csv``, snapshots and ``summary.json``.

    ``trajectory.csv`` has one row for the initial state and one per accepted
    step. The ``S_pair`` column uses the first entropy pair; ``summary.json``
    reports the entropy check for every pair.
    """
    out = Path(out_dir if out_dir is not None else config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    params, grid = config.model, config.grid
    state0 = initial_state(config.initial_condition, grid, base_dir)
    (out / "config.json").write_text(json.dumps(config_to_dict(config), indent=2) + "\n")

    meta = {
        "beta": params.beta,
        "kappa": params.kappa,
        "defaults_flagged": {
            "newton_tol": config.solver.newton_tol,
            "relaxation": repr(params.relaxation),
            "note": "Newton tolerance and relaxation time are package defaults, not physical data",
        },
    }
    try:
        result = advance(state0, params, grid, config.solver, keep_states=True)
    except SolverAbort as exc:
        write_table(out / "last_state.csv", ["x", "n", "theta", "u", "v"], _snapshot_rows(exc.state, params, grid))
        summary = meta | {"status": "aborted", "message": str(exc), "t_reached": exc.state.t}
        (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        return RunOutcome(EXIT_ABORT, out, summary, str(exc))

    states = result.states
    accepted = result.accepted
    dts = [0.0] + [r.dt for r in accepted]
    iters = [0] + [r.newton_iters for r in accepted]
    pair = config.entropy_pairs[0]
    rows = [diag.trajectory_row(s, h, k, pair, params, grid) for s, h, k in zip(states, dts, iters)]
    write_table(out / "trajectory.csv", diag.TRAJECTORY_COLUMNS, rows)
    for t_req, snap in sorted(result.snapshots.items()):
        write_table(
            out / f"snapshot_t{_fmt_time(t_req)}.csv", ["x", "n", "theta", "u", "v"], _snapshot_rows(snap, params, grid)
        )

    table = np.array(rows, dtype=float)
    times = table[:, 0]
    t_end = float(times[-1])
    sq_dist = table[:, 5] ** 2 + table[:, 6] ** 2
    summary = meta | {
        "status": "completed",
        "t_end": t_end,
        "accepted_steps": len(accepted),
        "rejected_steps": len(result.records) - len(accepted),
        "min_n": float(table[:, 9].min()),
        "min_theta": float(table[:, 10].min()),
        "decay_fit_rel_dist_n": _late_fit(times, table[:, 7], t_end),
        "decay_fit_rel_dist_w": _late_fit(times, table[:, 8], t_end),
        "entropy": [],
    }
    if np.all(sq_dist > 0) and times.size >= 10:
        try:
            c1, c2, r2 = envelope_constants(times, sq_dist)
            summary["algebraic_envelope_sq_dist"] = {"C1": c1, "C2": c2, "alg_r2": r2}
        except ValueError as exc:
            summary["algebraic_envelope_sq_dist"] = {"error": str(exc)}
    for p in config.entropy_pairs:
        rep = diag.entropy_inequality_report(states, p, params, grid)
        summary["entropy"].append(
            {
                "pair": [p.b1, p.b2],
                "equilibrium_boundary_data": rep.equilibrium_data,
                "monotone": rep.monotone,
                "max_increase": float(rep.delta_S.max()) if rep.delta_S.size else 0.0,
                "empirical_C1": None if math.isnan(rep.empirical_C1) else rep.empirical_C1,
                "ratio_positive": rep.ratio_positive,
            }
        )
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return RunOutcome(EXIT_OK, out, summary)


def _run_one(args):
    beta, config, out = args
    cfg = replace(config, model=replace(config.model, beta=beta), entropy_pairs=())
    try:
        outcome = run(cfg, out)
    except ConfigError as exc:
        return beta, EXIT_CONFIG, str(exc), None
    rel = None
    if outcome.status == EXIT_OK:
        rel = np.genfromtxt(out / "trajectory.csv", delimiter=",", names=True)
    return beta, outcome.status, outcome.message, rel


def sweep(betas: Sequence[float], config: RunConfig, out_dir=None, workers: int = 1) -> dict:
    """One independent run per ``beta`` plus ``decay_combined.csv``.

    Returns the per-beta exit status. Failures of single runs do not stop
    the sweep.
    """
    if not betas:
        raise ConfigError("betas", "empty beta list")
    for k, beta in enumerate(betas):
        try:
            replace(config.model, beta=beta)
        except ValueError as exc:
            raise ConfigError(f"betas[{k}]", str(exc)) from None
    root = Path(out_dir if out_dir is not None else config.output_dir)
    jobs = [(float(b), config, root / f"beta_{b:g}") for b in betas]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(job) for job in jobs]
    combined = []
    status = {}
    for beta, code, message, table in results:
        status[beta] = {"status": code, "message": message}
        if table is not None:
            combined.extend((beta, t, rn, rw) for t, rn, rw in zip(table["t"], table["rel_dist_n"], table["rel_dist_w"]))
    write_table(root / "decay_combined.csv", ["beta", "t", "rel_dist_n", "rel_dist_w"], combined)
    (root / "sweep_status.json").write_text(json.dumps({repr(b): s for b, s in status.items()}, indent=2) + "\n")
    return status


def region_scan_cmd(spec: RegionScanSpec, out) -> Path:
    return region_scan(spec).to_csv(out)


# --- verify ---------------------------------------------------------------------


def verify(config: RunConfig, t_end: float = 0.02, base_dir: Optional[Path] = None) -> list:
    """Run a short trajectory and evaluate the invariant suite.

    Returns ``(name, passed, detail)`` tuples.
    """
    params, grid = config.model, config.grid
    solver = replace(config.solver, t_end=min(t_end, config.solver.t_end), snapshot_times=())
    state0 = initial_state(config.initial_condition, grid, base_dir)
    checks = []

    # Jacobian against a directional finite difference at the initial state
    rng = np.random.default_rng(0)
    h = solver.dt_init
    d = rng.standard_normal((grid.num_points, 2)) * np.column_stack([state0.n, state0.w]) * 1e-3
    eps = 1e-7
    shifted = State(state0.n + eps * d[:, 0], state0.w + eps * d[:, 1], state0.t)
    f0 = assemble_residual(state0, state0, h, params, grid)
    f1 = assemble_residual(shifted, state0, h, params, grid)
    jd = assemble_jacobian(state0, h, params, grid).matvec(d)
    err = np.abs((f1 - f0) / eps - jd).max()
    checks.append(("jacobian_fd", bool(err <= 1e-5 * np.abs(jd).max()), f"max err {err:.3e}"))

    try:
        result = advance(state0, params, grid, solver, keep_states=True)
    except SolverAbort as exc:
        checks.append(("run_completes", False, str(exc)))
        return checks
    states = result.states
    checks.append(("run_completes", True, f"{len(states) - 1} accepted steps"))
    pos = all(s.is_positive() for s in states)
    checks.append(("positivity", pos, f"min theta {min(float(s.theta.min()) for s in states):.3e}"))

    bc_ok = True
    for idx, bc in ((0, grid.bc_left), (-1, grid.bc_right)):
        if isinstance(bc, Dirichlet):
            bc_ok &= all(s.n[idx] == bc.n_D and abs(s.w[idx] - bc.w_D) <= 1e-14 * bc.w_D for s in states[1:])
    checks.append(("dirichlet_rows", bool(bc_ok), "boundary values enforced"))

    defect = 0.0
    for old, new in zip(states[:-1], states[1:]):
        dm, flux = interior_mass_balance(new, old, new.t - old.t, params, grid)
        defect = max(defect, abs(dm - flux))
    tol = 10 * solver.newton_tol * grid.length
    checks.append(("mass_balance", defect <= tol, f"max defect {defect:.3e}"))

    final = states[-1]
    u, v = to_uv(final.n, final.theta, params.beta)
    uv_ok = np.allclose(u, final.n * final.theta ** (0.5 - params.beta), rtol=1e-12, atol=0) and np.allclose(
        v, final.n * final.theta ** (1.5 - params.beta), rtol=1e-12, atol=0
    )
    checks.append(("uv_consistency", bool(uv_ok), "snapshot u, v columns"))

    if params.theta_D == 1.0 and all(
        isinstance(bc, Dirichlet) and bc.n_D == params.n_D and bc.theta_D == 1.0 for bc in (grid.bc_left, grid.bc_right)
    ):
        for pair in config.entropy_pairs:
            rep = diag.entropy_inequality_report(states, pair, params, grid)
            checks.append(
                (f"entropy_monotone[{pair.b1:g},{pair.b2:g}]", rep.monotone, f"max dS {rep.delta_S.max():.3e}")
            )
    return checks


# --- argument parsing ---------------------------------------------------------------


def _parse_betas(text: str) -> list:
    parts = [p for p in text.replace(" ", ",").split(",") if p]
    try:
        return [float(p) for p in parts]
    except ValueError:
        raise ConfigError("betas", f"cannot parse {text!r}") from None


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="etransport", description=__doc__.split("\n\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--allow-extended-beta", action="store_true")

    p = sub.add_parser("region-scan", help="raster of admissible exponents")
    defaults = RegionScanSpec()
    for name in ("beta_min", "beta_max", "beta_step", "b_min", "b_max", "b_step"):
        p.add_argument("--" + name.replace("_", "-"), type=float, default=getattr(defaults, name))
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="one run per beta plus a combined decay table")
    p.add_argument("--betas", required=True, help="comma separated list")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--allow-extended-beta", action="store_true")

    p = sub.add_parser("verify", help="invariant checks on a short trajectory")
    p.add_argument("--config", required=True)
    p.add_argument("--t-end", type=float, default=0.02)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        if args.command == "region-scan":
            try:
                spec = RegionScanSpec(args.beta_min, args.beta_max, args.beta_step, args.b_min, args.b_max, args.b_step)
            except ValueError as exc:
                raise ConfigError("region-scan", str(exc)) from None
            path = region_scan_cmd(spec, args.out)
            log.info("wrote %s", path)
            return EXIT_OK
        extended = True if getattr(args, "allow_extended_beta", False) else None
        base_dir = Path(args.config).resolve().parent
        config = load_config(args.config, allow_extended_beta=extended)
        if args.command == "simulate":
            outcome = run(config, args.out, base_dir=base_dir)
            if outcome.status == EXIT_ABORT:
                log.error("solver aborted: %s", outcome.message)
            else:
                log.info("wrote %s", outcome.output_dir)
            return outcome.status
        if args.command == "sweep":
            if extended:
                config = replace(config, model=replace(config.model, allow_extended_beta=True))
            status = sweep(_parse_betas(args.betas), config, args.out, workers=args.workers)
            for beta, info in status.items():
                log.info("beta=%g: exit %d %s", beta, info["status"], info["message"])
            codes = {info["status"] for info in status.values()}
            return EXIT_OK if codes == {EXIT_OK} else max(codes)
        if args.command == "verify":
            checks = verify(config, args.t_end, base_dir=base_dir)
            for name, ok, detail in checks:
                print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            return EXIT_OK if all(ok for _, ok, _ in checks) else EXIT_VERIFY
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    return EXIT_CONFIG  # unreachable: argparse enforces a command


if __name__ == "__main__":
    sys.exit(main())
