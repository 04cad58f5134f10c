"""Command-line driver: ``ltsdd run|study|sweep <config>``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .cases import Case, exact_test1, flux_test1, test1, test2, test2_accuracy, test3
from .config import RunConfig, load_config
from .errors import ConfigError, LtsddError, WindowFailure
from .geometry import build_mesh, decompose
from .interface import DDProblem, Method, run_time_windows, write_residual_csv
from .linsolve import KrylovReport
from .metrics import ErrorReport, conservation_defects, discrete_errors, error_norms, rate
from .mhfe import Coefficients, InterfaceBC, Patch, project_velocity
from .optim import InterfaceModel, optimize_parameters, parameter_sweep, symbol_scale
from .propagate import SubdomainProblem, SubdomainSolver, solve_monodomain
from .timegrid import TimeGrid

log = logging.getLogger("ltsdd")

TEST3_STEPS = [10, 10, 50, 10, 10, 10]


# --------------------------------------------------------------------- cases
def _custom_case(cfg: RunConfig) -> Case:
    raw = cfg.custom
    m = raw["mesh"]

    def nums(sec, key, default=None):
        if key not in raw[sec]:
            if default is None:
                raise ConfigError(f"[{sec}].{key}", "missing")
            return default
        try:
            return [float(v) for v in raw[sec][key].split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"[{sec}].{key}", f"bad number list {raw[sec][key]!r}") from exc

    x0, x1 = nums("mesh", "x")
    y0, y1 = nums("mesh", "y")
    nx, ny = (int(v) for v in nums("mesh", "cells"))
    bc = {s: raw["mesh"].get(s, "dirichlet") for s in ("left", "right", "bottom", "top")}
    mesh = build_mesh(np.linspace(x0, x1, nx + 1), np.linspace(y0, y1, ny + 1), bc)
    boxes = [tuple(float(v) for v in b.split(",")) for _, b in sorted(raw["boxes"].items())]
    dec = decompose(mesh, boxes)
    ne = mesh.n_elements
    omega, d, c0 = np.ones(ne), np.ones(ne), np.zeros(ne)
    u_edge = np.zeros((ne, 4))
    cx, cy = mesh.elem_center[:, 0], mesh.elem_center[:, 1]
    for sec in sorted(s for s in raw if s.startswith("zone.")):
        bx = nums(sec, "box")
        inside = (cx > bx[0]) & (cx < bx[1]) & (cy > bx[2]) & (cy < bx[3])
        omega[inside] = nums(sec, "omega", [1.0])[0]
        d[inside] = nums(sec, "d", [1.0])[0]
        u_edge[inside] = project_velocity(mesh, nums(sec, "u", [0.0, 0.0]))[inside]
        c0[inside] = nums(sec, "c0", [0.0])[0]
    if np.any(omega <= 0) or np.any(d <= 0):
        raise ConfigError("[zone.*]", "porosity and diffusion must be positive")
    grids = _grids(cfg, dec.n_sub)
    return Case("custom", mesh, dec, Coefficients(omega, d, u_edge), grids, None, c0)


def _grids(cfg: RunConfig, n_sub: int, default=None) -> list:
    steps = list(cfg.steps)
    if len(steps) == 1:
        steps = steps * n_sub
    if len(steps) != n_sub:
        if default is not None:
            steps = default
        else:
            raise ConfigError("[time].steps", f"expected {n_sub} step counts, got {len(steps)}")
    return [TimeGrid.uniform(cfg.T, s) for s in steps]


def build_case(cfg: RunConfig) -> Case:
    if cfg.case == "test1":
        M1, M2 = (cfg.steps * 2)[:2] if len(cfg.steps) == 1 else cfg.steps[:2]
        return test1(cfg.n, M1, M2, cfg.T)
    if cfg.case == "test2":
        case = test2(cfg.problem, n=cfg.n, T=cfg.T, with_data=cfg.with_data)
        case.grids = _grids(cfg, 2)
        return case
    if cfg.case == "test2-time":
        return test2_accuracy(cfg.grid, cfg.level, n=cfg.n, T=cfg.T)
    if cfg.case == "test3":
        case = test3(window=cfg.T)
        case.grids = _grids(cfg, case.decomp.n_sub, TEST3_STEPS)
        return case
    return _custom_case(cfg)


def robin_parameters(problem: DDProblem, cfg: RunConfig) -> dict:
    """Optimized or configured Robin parameters for every ordered neighbour pair."""
    table, models = {}, {}
    for (i, j) in problem.decomp.interface_edges:
        if cfg.robin == "optimized":
            model = InterfaceModel.from_problem(problem, i, j)
            a_ij, a_ji = optimize_parameters(model)
            models[f"{i}-{j}"] = {"d": model.d, "omega": model.omega, "a": model.a, "tangential": model.tangential,
                                  "band": model.band, "xi_band": model.xi_band}
        else:
            a_ij, a_ji = cfg.robin
        table[(i, j)], table[(j, i)] = a_ij, a_ji
    problem.set_alpha(table)
    return {"alpha": {f"{i}-{j}": v for (i, j), v in table.items()}, "models": models,
            "frequency_band": "[pi/T, pi/min dt]", "tangential_band": "[pi/interface length, pi/h]"}


def build_problem(case: Case, cfg: RunConfig) -> tuple:
    problem = DDProblem(case.decomp, case.coeffs, case.grids, case.source, case.c0, case.dirichlet,
                        master=cfg.master, normalize_weights=cfg.normalize_weights)
    meta = robin_parameters(problem, cfg) if problem.decomp.interface_edges else {}
    return problem, meta


# ----------------------------------------------------------------------- run
@dataclass
class RunOutput:
    config: RunConfig
    case: Case
    converged: bool
    c_final: np.ndarray
    phi_final: Optional[np.ndarray]
    reports: list  # KrylovReport per window
    errors: Optional[ErrorReport] = None
    conservation: tuple = (0.0, 0.0)
    snapshots: dict = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    elapsed: float = 0.0


def _initial_guess(problem: DDProblem, cfg: RunConfig):
    if not cfg.random_guess:
        return None
    rng = np.random.default_rng(cfg.seed)
    if cfg.method in ("gto-schwarz", "oswr-jacobi"):
        return [rng.standard_normal(z.shape) for z in problem.zero_robin()]
    return rng.standard_normal((problem.master_grid.M, len(problem.gamma)))


def _check_conservation(problem: DDProblem, sols) -> tuple:
    worst = (0.0, 0.0)
    for sub, sol in zip(problem.subs, sols):
        if sol is None or not sol.states:
            continue
        src = None if sub.problem.source is None else sub.sources()
        m, a = conservation_defects(sol, sub.problem.coeffs, src)
        worst = (max(worst[0], m), max(worst[1], a))
    return worst


def _snapshot(problem: Optional[DDProblem], sols, t_local: float) -> np.ndarray:
    c = np.zeros(problem.mesh.n_elements)
    for i, sol in enumerate(sols):
        m = int(np.argmin(np.abs(sol.grid.t_points - t_local)))
        c[problem.decomp.sub_elements[i]] = sol.c_at(m)
    return c


def _run_monodomain(cfg: RunConfig, case: Case) -> RunOutput:
    """Whole-domain march on the finest of the configured grids."""
    grid = min(case.grids, key=lambda g: g.dt.min())
    c = np.zeros(case.mesh.n_elements) if case.c0 is None else np.asarray(case.c0, dtype=float)
    pb = SubdomainProblem(0, Patch(case.mesh, np.arange(case.mesh.n_elements)), case.coeffs, grid, c,
                          case.source, case.dirichlet)
    solver = SubdomainSolver(pb)
    snaps, reports, cons, sol = {}, [], (0.0, 0.0), None
    for w in range(cfg.windows):
        pb.c0, pb.t_offset = c, w * cfg.T
        solver.reset_data()
        sol = solver.march(InterfaceBC.DIRICHLET, keep_fields=True).solution
        cw = conservation_defects(sol, case.coeffs, None if case.source is None else solver.sources())
        cons = (max(cons[0], cw[0]), max(cons[1], cw[1]))
        for t in cfg.snapshots:
            if w * cfg.T < t <= (w + 1) * cfg.T + 1e-12:
                m = int(np.argmin(np.abs(grid.t_points - (t - w * cfg.T))))
                snaps[t] = sol.c_at(m).copy()
        c = sol.c_final
        reports.append(KrylovReport(converged=True))
    return RunOutput(cfg, case, True, c, sol.phi_final, reports, conservation=cons, snapshots=snaps,
                     meta={"grid_steps": grid.M})


def run(cfg: RunConfig) -> RunOutput:
    t0 = time.perf_counter()
    case = build_case(cfg)
    if cfg.method == "monodomain":
        out = _run_monodomain(cfg, case)
    else:
        problem, meta = build_problem(case, cfg)
        guess = _initial_guess(problem, cfg)
        c = None
        reports, snaps, cons = [], {}, (0.0, 0.0)
        converged = True
        res = None
        for w in range(cfg.windows):
            if w > 0:
                problem.set_window(c, w * cfg.T)
            res = problem.solve(cfg.method, tol=cfg.tol, max_iter=cfg.max_iter, x0=guess)
            reports.append(res.report)
            cw = _check_conservation(problem, res.solutions)
            cons = (max(cons[0], cw[0]), max(cons[1], cw[1]))
            for t in cfg.snapshots:
                if w * cfg.T < t <= (w + 1) * cfg.T + 1e-12:
                    snaps[t] = _snapshot(problem, res.solutions, t - w * cfg.T)
            c = res.c_final
            guess = res.interface
            if not res.converged:
                converged = False
                log.warning("window %d: %s did not converge", w, cfg.method)
                break
        meta["solve_counts"] = [r.subdomain_solve_count for r in reports]
        meta["iterations"] = [r.iterations for r in reports]
        out = RunOutput(cfg, case, converged, c, res.phi_final, reports, conservation=cons,
                        snapshots=snaps, meta=meta)
    if case.c_exact is not None:
        t_end = cfg.windows * cfg.T
        out.errors = error_norms(case.mesh, out.c_final, out.phi_final,
                                 lambda x, y: case.c_exact(x, y, t_end),
                                 lambda x, y: case.phi_exact(x, y, t_end))
    out.elapsed = time.perf_counter() - t0
    return out


def write_outputs(out: RunOutput, out_dir) -> Path:
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    case = out.case
    meta = {
        "version": __version__,
        "config": out.config.resolved(),
        "case": case.name,
        "mesh": {"nx": case.mesh.nx, "ny": case.mesh.ny, "h": case.mesh.h},
        "time_steps": [g.M for g in case.grids],
        "converged": out.converged,
        "elapsed_seconds": out.elapsed,
        "max_mass_balance_defect": out.conservation[0],
        "max_flux_antisymmetry_defect": out.conservation[1],
        **{k: v for k, v in out.meta.items()},
    }
    (d / "metadata.json").write_text(json.dumps(meta, indent=2, default=_jsonable))
    sweeps = Method(out.config.method).sweeps_per_iteration if out.config.method in [m.value for m in Method] else 1
    for w, rep in enumerate(out.reports):
        name = "residuals.csv" if len(out.reports) == 1 else f"residuals_w{w:03d}.csv"
        write_residual_csv(d / name, rep, sweeps)
    if out.errors is not None:
        with open(d / "errors.csv", "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["c_error", "phi_error"])
            wr.writerow([f"{out.errors.c_error:.10e}", f"{out.errors.phi_error:.10e}"])
    for t, c in sorted(out.snapshots.items()):
        write_field_csv(d / f"snapshot_t{t:g}.csv", case.mesh, c)
    write_field_csv(d / "final.csv", case.mesh, out.c_final)
    return d


def write_field_csv(path, mesh, values):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["x_center", "y_center", "value"])
        for (x, y), v in zip(mesh.elem_center, values):
            wr.writerow([f"{x:.10g}", f"{y:.10g}", f"{v:.12e}"])


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


# --------------------------------------------------------------------- study
def convergence_study(cfg: RunConfig, axis: str, levels=None) -> list:
    """Errors and observed rates over refinement levels.

    ``axis="space"`` refines the mesh (levels are cells per side); ``axis="time"``
    refines the time grids by factors of 2 (levels are refinement indices).
    For ``test2-time`` the four coarse/fine grid combinations are run and the
    reference is a monodomain solve on a much finer time grid.
    """
    if axis not in ("space", "time"):
        raise ConfigError("--axis", f"expected space or time, got {axis!r}")
    levels = list(levels or cfg.levels)
    if not levels:
        raise ConfigError("[study].levels", "no refinement levels given")
    rows = []
    if cfg.case == "test2-time":
        if axis != "time":
            raise ConfigError("--axis", "test2-time studies refine in time")
        base = test2_accuracy(1, 0, n=cfg.n, T=cfg.T)
        ref_grid = TimeGrid.uniform(cfg.T, 16 * 2 ** (max(levels) + 3))
        ref = solve_monodomain(base.mesh, base.coeffs, base.source, base.c0, ref_grid)
        for g in (1, 2, 3, 4):
            prev = None
            for lev in levels:
                sub = RunConfig(**{**cfg.__dict__, "grid": g, "level": lev})
                out = run(sub)
                err = discrete_errors(base.mesh, out.c_final, out.phi_final, ref.c_final, ref.phi_final)
                dt = max(gr.dt.max() for gr in out.case.grids)
                rows.append({"grid": g, "level": lev, "dt": dt, "c_error": err.c_error,
                             "phi_error": err.phi_error,
                             "c_rate": rate(prev.c_error, err.c_error) if prev else float("nan"),
                             "phi_rate": rate(prev.phi_error, err.phi_error) if prev else float("nan"),
                             "solves": sum(r.subdomain_solve_count for r in out.reports)})
                prev = err
        return rows
    prev = None
    prev_level = None
    for lev in levels:
        if axis == "space":
            sub = RunConfig(**{**cfg.__dict__, "n": int(lev)})
        else:
            sub = RunConfig(**{**cfg.__dict__, "steps": [int(s * 2**lev) for s in cfg.steps]})
        out = run(sub)
        if out.errors is None:
            raise ConfigError("[run].case", "convergence studies need a case with an exact solution")
        if axis == "space":
            factor = lev / prev_level if prev_level else 2.0
        else:
            factor = 2.0 ** (lev - prev_level) if prev_level is not None else 2.0
        same = prev_level is not None and lev == prev_level
        rows.append({"level": lev, "c_error": out.errors.c_error, "phi_error": out.errors.phi_error,
                     "c_rate": float("nan") if prev is None or same else rate(prev.c_error, out.errors.c_error, factor),
                     "phi_rate": float("nan") if prev is None or same else rate(prev.phi_error, out.errors.phi_error, factor),
                     "solves": sum(r.subdomain_solve_count for r in out.reports)})
        prev, prev_level = out.errors, lev
    return rows


def run_sweep(cfg: RunConfig, seed: Optional[int] = None):
    case = build_case(cfg)
    problem, meta = build_problem(case, cfg)
    if (0, 1) not in problem.decomp.interface_edges:
        raise ConfigError("[run].case", "parameter sweeps need an interface between subdomains 0 and 1")
    a_opt = (meta["alpha"]["0-1"], meta["alpha"]["1-0"]) if cfg.robin == "optimized" else None
    # default grid: 10 log-spaced values spanning a factor 30 either side of the symbol scale
    s = symbol_scale(InterfaceModel.from_problem(problem, 0, 1))
    a12 = cfg.sweep_alpha12 or list(np.geomspace(s / 30, s * 30, 10))
    a21 = cfg.sweep_alpha21 or list(np.geomspace(s / 30, s * 30, 10))
    res = parameter_sweep(problem, a12, a21, cfg.sweep_iterations, seed=seed if seed is not None else cfg.seed)
    return res, a_opt


def _write_rows(path, rows):
    if not rows:
        return
    with open(path, "w", newline="") as fh:
        wr = csv.DictWriter(fh, fieldnames=list(rows[0]))
        wr.writeheader()
        wr.writerows(rows)


# ---------------------------------------------------------------------- main
def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="ltsdd", description="Space-time domain decomposition for advection-diffusion.")
    ap.add_argument("--out", default="ltsdd-out", help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="seed for random initial guesses")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("config")
    p_study = sub.add_parser("study", help="convergence study")
    p_study.add_argument("--axis", choices=("space", "time"), required=True)
    p_study.add_argument("config")
    p_sweep = sub.add_parser("sweep", help="Robin parameter sweep")
    p_sweep.add_argument("config")
    for p in (p_run, p_study, p_sweep):
        p.add_argument("--out", default=argparse.SUPPRESS)
        p.add_argument("--seed", type=int, default=argparse.SUPPRESS)
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")

    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        out_dir = Path(args.out)
        if args.command == "run":
            out = run(cfg)
            write_outputs(out, out_dir)
            print(f"{cfg.case} {cfg.method}: converged={out.converged} "
                  f"solves={out.meta.get('solve_counts', '-')} elapsed={out.elapsed:.2f}s")
            if out.errors is not None:
                print(f"  c_error={out.errors.c_error:.4e} phi_error={out.errors.phi_error:.4e}")
            return 0 if out.converged else 2
        if args.command == "study":
            rows = convergence_study(cfg, args.axis)
            out_dir.mkdir(parents=True, exist_ok=True)
            _write_rows(out_dir / f"study_{args.axis}.csv", rows)
            for r in rows:
                print(", ".join(f"{k}={v:.4g}" if isinstance(v, float) else f"{k}={v}" for k, v in r.items()))
            return 0
        res, a_opt = run_sweep(cfg, args.seed)
        out_dir.mkdir(parents=True, exist_ok=True)
        res.write_csv(out_dir / "sweep.csv")
        best = res.argmin()
        print(f"sweep minimum {best[2]:.3e} at ({best[0]:.4g}, {best[1]:.4g}); optimized pair {a_opt}")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except WindowFailure as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 2
    except LtsddError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
