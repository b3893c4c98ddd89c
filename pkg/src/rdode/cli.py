"""Command-line entry point: ``rdode <command> --config <file|preset>``."""
from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import plotting
from .errors import MechanismAbsent, NumericalFailure, RdodeError, ValidationError
from .ffe import FFEProblem, IntervalUnion, solve_ffe
from .io import read_field_csv, write_csv, write_json
from .models import blocks_from_matrix, jacobian
from .receptor import check_assumptions, derive_quantities, stability_verdicts, steady_states
from .region import default_param_axis, gamma_mask, param_masks, region_boundary
from .simulator import (Field, SimConfig, forced_jump, mode_amplitudes, perturbed_field, resample,
                        run as run_sim)
from .spectral import midpoint_grid
from .stability import (classify_ddi, large_Dw_requirements, qssa_reduce, rh_triple,
                        small_Dv_threshold, unstable_mu_intervals)

log = logging.getLogger("rdode")

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


# ------------------------------------------------------------------ helpers


def _base_point(cfg: dict, model) -> np.ndarray:
    if model.name == "receptor":
        ss = steady_states(cfgmod.receptor_params(cfg))
        which = cfg["model"].get("state", "Xplus")
        X = ss.Xplus if which == "Xplus" else ss.Xminus
        if X is None:
            raise ValidationError("receptor parameters admit no nontrivial steady state (theta <= 0)")
        return X
    return np.zeros(model.m)


def _is_three(blocks) -> bool:
    return (blocks.m_n, blocks.m_s, blocks.m_f) == (1, 1, 1)


def _axis(spec: dict | None, default: tuple[float, float, int]) -> np.ndarray:
    spec = spec or {}
    lo, hi, n = spec.get("min", default[0]), spec.get("max", default[1]), spec.get("n", default[2])
    if not hi > lo:
        raise ValidationError("axis max must exceed min")
    if spec.get("scale", "log") == "log":
        ax = np.geomspace(lo, hi, n)
    else:
        ax = np.linspace(lo, hi, n)
    extra = [v for v in spec.get("include", []) if not np.any(np.isclose(ax, v, rtol=1e-12, atol=0))]
    return np.unique(np.concatenate([ax, extra])) if extra else ax


# ------------------------------------------------------------------ analyze


def _thresholds(blocks, D_v, D_w, L, j_max, large_mode) -> dict:
    out = {}
    try:
        eps, j = small_Dv_threshold(blocks, D_w, L, j_max)
        out["small_Dv"] = {"epsilon": eps, "mode": j}
    except (MechanismAbsent, ValidationError) as exc:
        out["small_Dv"] = {"absent": str(exc)}
    try:
        J1, d12 = blocks.J[0, 0], float(np.linalg.det(blocks.J12))
        ratio = J1 * D_v / d12 if d12 != 0 else -math.inf
        entry = {"mode": large_mode}
        if ratio > 0:
            entry["L_min"] = math.pi * large_mode * math.sqrt(ratio)
            try:
                req = large_Dw_requirements(blocks, D_v, large_mode, L)
                entry["Dw_min"] = req.Dw_min
            except ValidationError as exc:
                entry["Dw_min"] = None
                entry["note"] = str(exc)
        else:
            entry["absent"] = f"ratio J1 D_v / det J12 = {ratio:.6g} is not positive"
        out["large_Dw"] = entry
    except ValidationError as exc:
        out["large_Dw"] = {"absent": str(exc)}
    return out


def cmd_analyze(cfg: dict, out: Path, jobs: int) -> dict:
    num = cfgmod.numerics(cfg)
    model = cfgmod.build_model(cfg)
    point = _base_point(cfg, model)
    blocks = jacobian(model, point)
    D_v, D_w = cfg["model"].get("D_v", 1.0), cfg["model"].get("D_w", 1.0)
    lengths = cfg.get("analyze", {}).get("lengths", [model.domain_length])
    large_mode = cfg.get("analyze", {}).get("large_Dw_mode", 1)
    reports, rows = [], []
    for L in lengths:
        rep = classify_ddi(blocks, D_v, D_w, L, num["j_max"], tail=num["tail_check"])
        d = rep.to_dict(modes="unstable")
        if _is_three(blocks):
            d["thresholds"] = _thresholds(blocks, D_v, D_w, L, num["j_max"], large_mode)
        reports.append(d)
        rows += [(L, ms.mode, ms.eigenvalue, ms.abscissa, int(ms.abscissa > 0)) for ms in rep.per_mode]
        print(f"L = {L:g}: verdict {rep.verdict.value}, unstable modes {rep.unstable_modes}")
    doc = {"model": cfg["model"], "state": point, "jacobian": blocks.J, "D_v": D_v, "D_w": D_w,
           "reports": reports}
    if _is_three(blocks):
        t0 = rh_triple(blocks, D_v, D_w, 0.0)
        doc["rh_mu0"] = {"p1": t0.p1, "p2": t0.p2, "p3": t0.p3, "p1p2_minus_p3": t0.hurwitz}
        doc["hurwitz_unstable_mu"] = unstable_mu_intervals(blocks, D_v, D_w)
        red = qssa_reduce(blocks)
        doc["qssa"] = {"jacobian": red, "trace": float(np.trace(red)), "det": float(np.linalg.det(red))}
    if model.name == "receptor":
        p = cfgmod.receptor_params(cfg)
        rep = check_assumptions(p)
        doc["receptor"] = {
            "derived": derive_quantities(p).__dict__,
            "assumptions": dict(zip(("zeta", "theta", "item3", "condition4"), rep.flags)),
            "margins": rep.margins,
            "verdicts": stability_verdicts(p, require_assumptions=False),
        }
    write_json(out / "report.json", doc)
    write_csv(out / "modes.csv", ["L", "j", "lambda_j", "abscissa", "unstable"], rows)
    return doc


# ------------------------------------------------------------------- region


def cmd_region(cfg: dict, out: Path, jobs: int) -> dict:
    model = cfgmod.build_model(cfg)
    blocks = jacobian(model, _base_point(cfg, model))
    rc = cfg.get("region", {})
    dv = _axis(rc.get("dv"), (1e-4, 1.0, 200))
    dw = _axis(rc.get("dw"), (1e-4, 1.0, 200))
    j_max = rc.get("j_max", 64)
    grid = gamma_mask(blocks, dv, dw, model.domain_length, j_max, jobs=jobs)
    bounds = {j: region_boundary(grid, j) for j in grid.nonempty_modes()}
    write_csv(out / "region.csv", ["D_v", "D_w", "n_modes", "modes"],
              ((a, b, len(ms), ";".join(map(str, ms))) for a, b, ms in grid.rows()))
    brows = [(j, k, p[0], p[1]) for j, lines in bounds.items() for k, ln in enumerate(lines) for p in ln]
    write_csv(out / "boundary.csv", ["mode", "segment", "D_v", "D_w"], brows)
    mark = rc.get("mark")
    summary = {"nonempty_modes": grid.nonempty_modes(), "cells_in_gamma": int(grid.in_gamma.sum()),
               "shape": [len(dv), len(dw)], "j_max": j_max, "L": model.domain_length}
    if mark:
        i, k = grid.cell_index(*mark)
        summary["mark"] = {"requested": mark, "cell": [float(dv[i]), float(dw[k])],
                           "modes": sorted(grid.modes(i, k))}
        print(f"cell ({dv[i]:.6g}, {dw[k]:.6g}): modes {sorted(grid.modes(i, k))}")
    print(f"Turing set: {summary['cells_in_gamma']} cells, modes {summary['nonempty_modes']}")
    plotting.region_figure(grid, bounds, out / "region.svg", mark=mark)
    write_json(out / "summary.json", summary)
    return summary


# -------------------------------------------------------------------- sweep


ALL_PANELS = [(f"m{i}", f"mu{j}") for i in (1, 2, 3) for j in (1, 2, 3)]


def cmd_sweep(cfg: dict, out: Path, jobs: int) -> dict:
    base = cfgmod.receptor_params(cfg)
    sc = cfg.get("sweep", {})
    panels = [tuple(p) for p in sc.get("panels", ALL_PANELS)]
    n = sc.get("n", 121)
    ranges = sc.get("ranges", {})
    base_d = base.as_dict()
    masks, summary = [], {"base": base_d, "panels": []}
    for a, b in panels:
        ax1 = np.linspace(*ranges[a], n) if a in ranges else default_param_axis(a, n)
        ax2 = np.linspace(*ranges[b], n) if b in ranges else default_param_axis(b, n)
        pm = param_masks(base, (a, ax1), (b, ax2))
        masks.append(pm)
        at_base = param_masks(base, (a, [base_d[a]]), (b, [base_d[b]]))
        inside = bool(at_base.intersection[0, 0])
        summary["panels"].append({"axes": [a, b], "base_inside": inside,
                                  "feasible_fraction": float(pm.intersection.mean())})
        write_csv(out / f"mask_{a}_{b}.csv", [a, b, "R1", "R2", "R3", "R4", "all"], pm.rows())
        print(f"panel ({a}, {b}): base point inside = {inside}, "
              f"feasible fraction {pm.intersection.mean():.3f}")
    rep = check_assumptions(base)
    summary["base_flags"] = dict(zip(("R1", "R2", "R3", "R4"), rep.flags))
    summary["base_margins"] = rep.margins
    plotting.sweep_figure(masks, out / "sweep.svg", mark=base_d)
    write_json(out / "summary.json", summary)
    return summary


# ----------------------------------------------------------------- simulate


def _initial_field(cfg: dict, run: dict, model, num: dict, seed: int) -> Field:
    ic = run["initial"]
    M, L = num["M"], model.domain_length
    kind = ic["type"]
    if kind == "perturbed":
        base = ic.get("base", "Xplus")
        if isinstance(base, str):
            ss = steady_states(cfgmod.receptor_params(cfg))
            base = ss.Xplus if base == "Xplus" else ss.Xminus
            if base is None:
                raise ValidationError("requested steady state does not exist")
        specs = ic.get("perturbations", [{"kind": "none"}] * model.m)
        fld = perturbed_field(base, M, L, specs, seed)
    elif kind == "csv":
        if "path" not in ic:
            raise ValidationError("initial/path: required for csv initial data")
        x, data = read_field_csv(ic["path"])
        fld = resample(x, data, M, L)
    else:  # ffe
        if "omega2" not in ic:
            raise ValidationError("initial/omega2: required for ffe initial data")
        p = cfgmod.receptor_params(cfg)
        om = IntervalUnion(tuple(map(tuple, ic["omega2"])), L)
        pat = solve_ffe(FFEProblem(p, (model.D_v[0], model.D_w[0]), om, L, num["N"], 4 * num["N"]),
                        num["tol"], num["max_iter"])
        fld = Field(midpoint_grid(M, L), pat.field_on(M), L)
    if "warmup" in ic:
        warm = SimConfig(model, M, num["dt"], ic["warmup"].get("T", num["T"]), num["window"],
                         num["theta_ss"], True, True, 10 ** 9, seed)
        fld = run_sim(warm, fld).final
    if "forced_jump" in ic:
        fld = forced_jump(fld, ic["forced_jump"])
    return fld


def _simulate_one(cfg: dict, run: dict, seed: int):
    num = cfgmod.numerics(cfg)
    model = cfgmod.build_model(cfg, run.get("D_v"), run.get("D_w"))
    init = _initial_field(cfg, run, model, num, seed)
    sc = SimConfig(model, num["M"], num["dt"], num["T"], num["window"], num["theta_ss"],
                   True, True, num["snapshot_every"], seed)
    traj = run_sim(sc, init)
    return init, traj, sc


def _write_run(out: Path, run: dict, init: Field, traj, sc: SimConfig, cfg: dict) -> dict:
    name = run["name"]
    fin = traj.final
    coeffs = mode_amplitudes(fin)
    dom = [int(np.argmax(np.abs(c[1:]))) + 1 for c in coeffs]
    meta = {"name": name, "D_v": sc.model.D_v[0], "D_w": sc.model.D_w[0], "steady": traj.steady,
            "drift": traj.drift, "t_end": traj.t_end,
            "dominant_modes": dict(zip("uvw", dom)), "cfl": sc.cfl, "M": sc.M, "dt": sc.dt}
    if sc.model.name == "receptor":
        u_plus = steady_states(cfgmod.receptor_params(cfg)).Xplus[0]
        meta["u_small_fraction"] = float(np.mean(fin.u < 0.05 * u_plus))
        meta["invariant_bound"] = traj.invariant_bound
    if "expected_mode" in run:
        meta["expected_mode"] = run["expected_mode"]
        meta["mode_match"] = dom[1] == run["expected_mode"]
    write_csv(out / f"{name}_final.csv", ["x", "u", "v", "w"], zip(fin.x, *fin.data))
    write_csv(out / f"{name}_initial.csv", ["x", "u", "v", "w"], zip(init.x, *init.data))
    write_json(out / f"{name}_snapshots.json",
               {"x": fin.x, "times": traj.times, "u": [s.u for s in traj.snapshots],
                "v": [s.v for s in traj.snapshots], "w": [s.w for s in traj.snapshots]})
    write_json(out / f"{name}_meta.json", {**meta, "drift_history": traj.drift_history})
    plotting.profile_figure(fin.x, fin.data, out / f"{name}.svg", initial=init.data,
                            title=f"{name}: D_v = {meta['D_v']:g}, D_w = {meta['D_w']:g}")
    print(f"run {name}: t = {traj.t_end:g}, steady = {traj.steady}, drift = {traj.drift:.3e}, "
          f"dominant mode (v) = {dom[1]}, wall time {traj.wall_time:.2f} s")
    return meta


def cmd_simulate(cfg: dict, out: Path, jobs: int) -> dict:
    runs = cfg["simulate"]["runs"] if "simulate" in cfg else None
    if not runs:
        raise ValidationError("simulate: at least one run is required")
    seed = cfg.get("seed", 0)
    seeds = [seed + i for i in range(len(runs))]
    if jobs > 1 and len(runs) > 1:
        with ProcessPoolExecutor(min(jobs, len(runs))) as pool:
            results = list(pool.map(_simulate_one, [cfg] * len(runs), runs, seeds))
    else:
        results = [_simulate_one(cfg, r, s) for r, s in zip(runs, seeds)]
    metas = [_write_run(out, r, *res, cfg) for r, res in zip(runs, results)]
    summary = {"runs": metas}
    write_json(out / "summary.json", summary)
    return summary


# ---------------------------------------------------------------- construct


def cmd_construct(cfg: dict, out: Path, jobs: int) -> dict:
    num = cfgmod.numerics(cfg)
    p = cfgmod.receptor_params(cfg)
    model = cfgmod.build_model(cfg)
    cc = cfg["construct"] if "construct" in cfg else None
    if cc is None:
        raise ValidationError("construct: section required")
    L = model.domain_length
    om = IntervalUnion(tuple(map(tuple, cc["omega2"])), L)
    bound = cc.get("max_measure", L)
    if om.measure > bound:
        raise ValidationError(f"|Omega_2| = {om.measure:g} exceeds the configured bound {bound:g}")
    N = num["N"]
    T = cc.get("simulate_T", 100.0)
    M_sim = cc.get("sim_M", num["M"])
    if T > 0 and cc.get("snap_to_grid", True):
        if (4 * N) % M_sim:
            raise ValidationError(f"snapping needs 4N = {4 * N} to be a multiple of sim_M = {M_sim}")
        om = om.snapped(M_sim)
    pat = solve_ffe(FFEProblem(p, (model.D_v[0], model.D_w[0]), om, L, N, 4 * N),
                    num["tol"], num["max_iter"])
    meta = pat.metadata()
    print(f"constructed pattern: {pat.iterations} iterations, residuals {pat.residuals}")
    write_csv(out / "pattern.csv", ["x", "u", "v", "w", "branch"],
              zip(pat.x, pat.u, pat.v, pat.w, np.where(pat.branch_map, 2, 1)))
    meta["requested_omega2"] = cc["omega2"]
    final = None
    if T > 0:
        M = M_sim
        init = Field(midpoint_grid(M, L), pat.field_on(M), L)
        W = min(num["window"], T)
        sc = SimConfig(model, M, num["dt"], T, W, num["theta_ss"], False, True, 10 ** 9, cfg.get("seed", 0))
        traj = run_sim(sc, init)
        final = traj.final
        total = float(np.max(np.abs(final.data - init.data))) / traj.t_end
        meta["simulation"] = {"T": traj.t_end, "M": M, "dt": num["dt"], "window_drift": traj.drift,
                              "mean_drift": total, "max_window_drift": max(d for _, d in traj.drift_history)}
        write_csv(out / "simulated.csv", ["x", "u", "v", "w"], zip(final.x, *final.data))
        print(f"simulated {traj.t_end:g} time units: window drift {traj.drift:.3e}, mean drift {total:.3e}")
    write_json(out / "pattern.json", meta)
    plotting.profile_figure(pat.x, np.stack([pat.u, pat.v, pat.w]), out / "pattern.svg",
                            title=f"constructed pattern, Omega_2 = {list(om.intervals)}",
                            marks=om.switch_points)
    if final is not None:
        plotting.profile_figure(final.x, final.data, out / "simulated.svg",
                                initial=pat.field_on(final.x.size), marks=om.switch_points,
                                title=f"after {T:g} time units")
    return meta


# ----------------------------------------------------------------- examples

J23_EXAMPLE = [[-1, 9, 1.5], [-9, -1, 5], [-2, 3.5, -1]]
SCALING_EXAMPLE = [[-1, 1, -3], [2, -1, -5], [2, 1, -1.5]]


def worked_examples(j_max: int = 256) -> dict:
    """Regression numbers for the two linear examples."""
    b2 = blocks_from_matrix(J23_EXAMPLE)
    t0 = rh_triple(b2, 0.0, 0.0, 0.0)
    rep2 = classify_ddi(b2, 0.001, 1.0, math.pi, j_max)
    red = qssa_reduce(b2)
    j23 = {"p": [t0.p1, t0.p2, t0.p3], "hurwitz_mu0": t0.hurwitz,
            "unstable_mu": unstable_mu_intervals(b2, 0.001, 1.0),
            "verdict": rep2.verdict.value, "unstable_modes": rep2.unstable_modes,
            "s_ode": rep2.s_ode, "submatrix_abscissae": rep2.submatrix_abscissae,
            "qssa": {"jacobian": red, "trace": float(np.trace(red)), "det": float(np.linalg.det(red))}}
    b3 = blocks_from_matrix(SCALING_EXAMPLE)
    unscaled = {}
    for d in (1.0, 10.0, 120.0, 1000.0):
        r = classify_ddi(b3, 1.0, d, 1.0, j_max)
        unscaled[f"{d:g}"] = {"verdict": r.verdict.value, "unstable_modes": r.unstable_modes}
    r4 = classify_ddi(b3, 1.0, 200.0, 4.0, j_max)
    scaling = {"unscaled": unscaled, "scaled_L4_d200": {"verdict": r4.verdict.value,
                                                     "unstable_modes": r4.unstable_modes},
            "s_J12": r4.submatrix_abscissae["J12"], "det_J12": float(np.linalg.det(b3.J12)),
            "large_Dw_mode1": _thresholds(b3, 1.0, 200.0, 4.0, j_max, 1)["large_Dw"]}
    return {"j23_example": j23, "scaling_example": scaling}


def cmd_examples(cfg: dict, out: Path, jobs: int) -> dict:
    doc = worked_examples(cfgmod.numerics(cfg)["j_max"])
    e2, e3 = doc["j23_example"], doc["scaling_example"]
    print(f"J23 example: p = {e2['p']}, p1p2 - p3 = {e2['hurwitz_mu0']:g}, unstable mu {e2['unstable_mu']}, "
          f"verdict {e2['verdict']}")
    print(f"scaling example: unscaled {e3['unscaled']}; L = 4, d = 200: {e3['scaled_L4_d200']}")
    write_json(out / "examples.json", doc)
    return doc


COMMANDS = {"analyze": cmd_analyze, "region": cmd_region, "sweep": cmd_sweep,
            "simulate": cmd_simulate, "construct": cmd_construct, "examples": cmd_examples}


# --------------------------------------------------------------------- main


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rdode", description=__doc__)
    ap.add_argument("command", choices=sorted(COMMANDS))
    ap.add_argument("--config", required=True, help="config file path or preset name")
    ap.add_argument("--out", help="output directory (default: config 'output' or out/<name>)")
    ap.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
    ap.add_argument("--jobs", type=int, help="worker count (default: $RDODE_JOBS or 1)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def _jobs(arg: int | None) -> int:
    if arg is not None:
        jobs = arg
    else:
        env = os.environ.get("RDODE_JOBS", "1")
        try:
            jobs = int(env)
        except ValueError:
            raise ValidationError(f"RDODE_JOBS must be an integer, got {env!r}") from None
    if jobs < 1:
        raise ValidationError("jobs must be at least 1")
    return jobs


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        jobs = _jobs(args.jobs)
        cfg = cfgmod.load(args.config)
        if cfg["command"] != args.command:
            raise ValidationError(f"config is for command {cfg['command']!r}, not {args.command!r}")
        if args.seed is not None:
            if args.seed < 0:
                raise ValidationError("seed must be nonnegative")
            cfg["seed"] = args.seed
        out = Path(args.out or cfg.get("output") or Path("out") / Path(args.config).stem)
        out.mkdir(parents=True, exist_ok=True)
        COMMANDS[args.command](cfg, out, jobs)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RdodeError as exc:  # pragma: no cover - every subclass is handled above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
