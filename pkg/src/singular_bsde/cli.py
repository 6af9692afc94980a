"""Command-line front end: density tables, PDE solves, path simulation and
the verification battery, exported as CSV plus static SVG.

Exit codes: 0 success, 2 usage error (argparse), 3 domain or hypothesis
violation, 4 verification failure.

A config file of `key = value` lines can seed any subcommand via
--config; explicit flags win over file values.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import bsde, control, densities, pde, svgplot
from . import feynman_kac as fk
from .model import DomainError, ProblemParams, Regime, blowup_solution, _y

EXIT_OK = 0
EXIT_DOMAIN = 3
EXIT_VERIFY = 4


def _params(args) -> ProblemParams:
    regime = Regime(args.regime)
    return ProblemParams(q=args.q, L=args.L, T=args.T, regime=regime)


def _grid(params, args) -> pde.Grid:
    nx = int(round(params.L / args.dx)) - 1
    nt = int(round(params.T / args.dt))
    return pde.Grid(params, nx=nx, nt=nt)


def _write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) for v in row) + "\n")


def _load_config(path):
    out = {}
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, _, val = line.partition("=")
            out[key.strip().replace("_", "-")] = val.strip()
    return out


def cmd_density(args) -> int:
    params = _params(args)
    if not (0.0 < args.x < params.L):
        raise DomainError(f"x={args.x} outside (0, {params.L})")
    horizon = args.horizon if args.horizon else 50.0 * params.L**2
    s = args.t + np.linspace(horizon / args.samples, horizon, args.samples)
    f_tau = densities.exit_density(args.x, args.t, s, params)
    cdf = densities.exit_cdf(args.x, args.t, s, params)
    stem = args.out
    _write_csv(f"{stem}_exit_density.csv", "s,f_tau,exit_cdf",
               zip(s, f_tau, cdf))
    if args.plot:
        svgplot.line_plot(f"{stem}_exit_density.svg",
                          [(s, f_tau, "f_tau", None)],
                          xlabel="s", ylabel="density",
                          title=f"first-exit density, x={args.x}, t={args.t}")
    if args.with_constrained:
        a = np.linspace(0.0, params.L, 201)
        s_mid = args.t + 0.5 * horizon
        f_w = densities.constrained_density(args.x, args.t, s_mid, a, params)
        _write_csv(f"{stem}_constrained_density.csv", "a,f_W",
                   zip(a, f_w))
    if args.check_mass:
        from scipy.integrate import tanhsinh
        lo = np.nextafter(args.t, np.inf)
        mass = tanhsinh(
            lambda u: densities.exit_density(args.x, args.t,
                                             np.maximum(u, lo), params),
            args.t, args.t + horizon).integral
        print(f"total exit mass over ({args.t}, {args.t + horizon}]: {mass:.10f}")
        if mass < 0.999:
            return EXIT_VERIFY
    print(f"wrote {stem}_exit_density.csv ({args.samples} samples)")
    return EXIT_OK


def cmd_solve(args) -> int:
    params = _params(args)
    grid = _grid(params, args)
    if args.v0:
        field = pde.solve_linear_v0(grid)
    elif args.ubar_n:
        field = pde.solve_ubar_n(args.ubar_n, grid)
    elif args.vbar_n:
        field = pde.solve_vbar_n(args.vbar_n, grid)
    elif args.vbar_limit:
        field = pde.solve_vbar(grid)
    elif args.m and args.n:
        field = pde.solve_umn(args.m, args.n, grid)
    elif args.n:
        field = pde.solve_un(args.n, grid)
    else:
        field = pde.solve_u(grid)
    field.to_csv(args.out)
    print(f"wrote {args.out} (tag {field.tag}, "
          f"newton sup {field.report.newton_iters_max if field.report else 'n/a'}, "
          f"monotone {field.grid.monotone})")
    if args.plot:
        stem = args.out.rsplit(".", 1)[0]
        svgplot.heatmap(f"{stem}.svg", field.grid.xs, field.grid.ts,
                        field.values, title=field.tag)
        print(f"wrote {stem}.svg")
    if args.slice is not None:
        x_cut = float(args.slice.split("=", 1)[1])
        ts = field.grid.ts
        vals = field.interp(np.full_like(ts, x_cut), np.minimum(ts, field.grid.t_max))
        stem = args.out.rsplit(".", 1)[0]
        _write_csv(f"{stem}_slice.csv", "t,value," "y_t",
                   zip(ts, vals, [_y(min(t, params.T - 1e-12), params) for t in ts]))
        if args.plot:
            y_ref = np.array([_y(min(t, params.T * (1 - 1e-9)), params) for t in ts])
            svgplot.line_plot(f"{stem}_slice.svg",
                              [(ts, vals, field.tag, 2.0),
                               (ts, y_ref, "y_t", 1.0)],
                              xlabel="t", ylabel="value",
                              title=f"slice x={x_cut}")
            print(f"wrote {stem}_slice.svg")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.from_field:
        field = pde.Field.from_csv(args.from_field)
        params = field.grid.params
    else:
        params = _params(args)
        grid = _grid(params, args)
        field = (pde.solve_u(grid) if params.regime is Regime.OUTSIDE_BALL
                 else pde.solve_vbar(grid))
    x0 = args.x0 if args.x0 is not None else params.L / 2.0
    cfg = fk.McConfig(n_paths=args.paths, dt_sim=args.dt_sim, seed=args.seed)

    if args.stats_only:
        est = fk.mc_exit_probability(x0, 0.0, params.T, params, cfg)
        cdf = densities.exit_cdf(x0, 0.0, params.T, params)
        dev = (est.mean - cdf) / est.std_error if est.std_error else 0.0
        print(f"exit fraction {est.mean:.6f} +- {est.std_error:.6f} "
              f"vs exit_cdf {cdf:.6f} ({dev:+.2f} SE, {est.n_paths} paths)")
        return EXIT_OK if abs(dev) <= 3.0 else EXIT_VERIFY

    paths = [bsde.simulate_path(x0, 0.0, field, params, cfg, path_index=i)
             for i in range(args.paths)]
    stem = args.out
    cap = blowup_solution(params.T - 0.5 * cfg.dt_sim, params)
    for i, p in enumerate(paths):
        exited = np.zeros(len(p.times))
        if p.tau_index is not None:
            exited[p.tau_index + 1:] = 1.0
        _write_csv(f"{stem}_path{i}.csv", "k,t,w,y,z,exited_flag",
                   zip(range(len(p.times)), p.times, p.w,
                       np.minimum(p.y, cap), p.z, exited))
        if args.plot:
            svgplot.line_plot(
                f"{stem}_path{i}.svg",
                [(p.times, p.w, "W", 1.0),
                 (p.times, np.minimum(p.y, cap), "Y", 2.5)],
                xlabel="t", title=f"path {i}"
                + (" (exit)" if p.tau_index is not None else " (no exit)"))
    stats = bsde.terminal_statistics(paths, params)
    print(f"paths {stats.n_paths}, exited {stats.n_exited} "
          f"(clamped {stats.n_clamped}), exit fraction {stats.exit_fraction:.4f}")
    print(f"terminal tracks continuation: {stats.terminal_tracks_continuation}")
    return EXIT_OK


def _fine_grid(params) -> pde.Grid:
    # verification wants converged fields, not the figure grid
    nx = int(round(params.L / 0.0125)) - 1
    nt = int(round(params.T / 0.000625))
    return pde.Grid(params, nx=nx, nt=nt)


def _suite_fk(args, report):
    params = _params(args)
    grid = _fine_grid(params)
    cfg = fk.McConfig(n_paths=args.paths, dt_sim=args.dt_sim, seed=args.seed)
    probes = [(x, t) for x in (0.25 * params.L, 0.5 * params.L, 0.75 * params.L)
              for t in (0.0, 0.25 * params.T, 0.5 * params.T)]
    ok = True
    rows = []
    if params.regime is Regime.OUTSIDE_BALL:
        field = pde.solve_un(4096, grid, grade_last=24)
        for x, t in probes:
            est = fk.mc_u_multiplicative(x, t, field, params, cfg)
            ref = field.interp(x, t)
            tol = 3.0 * est.std_error + 5e-3
            good = abs(est.mean - ref) <= tol
            ok = ok and good
            rows.append({"probe": [x, t], "field": ref, "mc": est.mean,
                         "se": est.std_error, "pass": good})
    else:
        field = pde.solve_ubar_n(5, grid)
        for x, t in probes:
            est = fk.mc_ubar(x, t, 5, field, params, cfg)
            ref = field.interp(x, t)
            tol = 3.0 * est.std_error + 5e-3
            good = abs(est.mean - ref) <= tol
            ok = ok and good
            rows.append({"probe": [x, t], "field": ref, "mc": est.mean,
                         "se": est.std_error, "pass": good})
    report["fk"] = {"pass": ok, "probes": rows}
    return ok


def _suite_monotone(args, report):
    params = _params(args)
    grid = _grid(params, args)
    slack = 1e-12
    checks = {}
    if params.regime is Regime.OUTSIDE_BALL:
        a, b = pde.solve_umn(8, 5, grid), pde.solve_umn(16, 5, grid)
        checks["umn_decreasing_in_m"] = bool(
            np.all(b.values <= a.values + slack))
        c = pde.solve_umn(8, 10, grid)
        checks["umn_increasing_in_n"] = bool(
            np.all(c.values[:, :-1] >= a.values[:, :-1] - slack))
        u5, u50 = pde.solve_un(5, grid), pde.solve_un(50, grid)
        checks["un_increasing_in_n"] = bool(
            np.all(u50.values[:, :-1] >= u5.values[:, :-1] - slack))
        ts = grid.ts[:-1]
        ycurve = _y(ts, params)
        checks["un_below_blowup_curve"] = bool(
            np.all(u50.values[1:-1, :-1] <= ycurve[None, :] + slack))
    else:
        v5, v50 = pde.solve_vbar_n(5, grid), pde.solve_vbar_n(50, grid)
        checks["vbar_increasing_in_n"] = bool(
            np.all(v50.values[:, :-1] >= v5.values[:, :-1] - slack))
        u5, u50 = pde.solve_ubar_n(5, grid), pde.solve_ubar_n(50, grid)
        checks["ubar_sandwich_above_vbar"] = bool(
            np.all(v5.values[:, :u5.grid.nt + 1] <= u5.values + 1e-10))
        ts5 = u5.grid.ts
        checks["ubar_below_blowup_curve"] = bool(
            np.all(u5.values[1:-1, :] <= _y(ts5, params)[None, :] + slack))
    ok = all(checks.values())
    report["monotone"] = {"pass": ok, "checks": checks}
    return ok


def _suite_control(args, report):
    params = _params(args)
    grid = _fine_grid(params)
    cfg = fk.McConfig(n_paths=args.paths, dt_sim=args.dt_sim, seed=args.seed)
    field = (pde.solve_un(4096, grid, grade_last=24)
             if params.regime is Regime.OUTSIDE_BALL else pde.solve_vbar(grid))
    rep = control.cost_identity_check(params.L / 2.0, field, params, cfg)
    gap = abs(rep.left - rep.right_mean)
    identity_ok = gap <= 3.0 * rep.right_se + 1e-2
    beats = (rep.right_mean - 3.0 * rep.right_se <= rep.constant_rate_cost
             and rep.right_mean - 3.0 * rep.right_se <= rep.bang_bang_cost)
    pb = control.conditional_probability_bound(params.L / 2.0, 0.0, field,
                                               params, cfg)
    bound_ok = pb.mc_prob <= pb.bound + 3.0 * pb.std_error
    ok = identity_ok and beats and bound_ok
    report["control"] = {
        "pass": ok,
        "identity": {"left": rep.left, "right": rep.right_mean,
                     "se": rep.right_se, "gap": gap, "pass": identity_ok,
                     "n_infinite": rep.n_infinite},
        "alternatives": {"constant_rate": rep.constant_rate_cost,
                         "bang_bang": rep.bang_bang_cost, "pass": beats},
        "probability_bound": {"mc_prob": pb.mc_prob, "bound": pb.bound,
                              "ratio": pb.ratio, "pass": bound_ok}}
    return ok


def _suite_density(args, report):
    params = _params(args)
    x, t = 0.5 * params.L, 0.0
    horizon = 50.0 * params.L**2
    from scipy.integrate import tanhsinh
    lo = np.nextafter(t, np.inf)
    mass = tanhsinh(
        lambda u: densities.exit_density(x, t, np.maximum(u, lo), params),
        t, t + horizon).integral
    mass = float(mass)
    mass_ok = mass >= 0.999
    worst = 0.0
    for s in np.linspace(0.1 * params.T, params.T, 5):
        a = np.linspace(0.0, params.L, 2001)
        f_w = densities.constrained_density(x, t, s, a, params)
        total = np.trapezoid(f_w, a) + densities.exit_cdf(x, t, s, params)
        worst = max(worst, float(abs(total - 1.0)))
    comp_ok = worst <= 1e-6
    ok = mass_ok and comp_ok
    report["density"] = {"pass": ok, "exit_mass": mass,
                         "mass_pass": mass_ok,
                         "complement_worst_gap": worst,
                         "complement_pass": comp_ok}
    return ok


def cmd_verify(args) -> int:
    suites = {"fk": _suite_fk, "monotone": _suite_monotone,
              "control": _suite_control, "density": _suite_density}
    names = list(suites) if args.suite == "all" else [args.suite]
    report = {}
    ok = True
    for name in names:
        ok = suites[name](args, report) and ok
    report["pass"] = ok
    text = json.dumps(report, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return EXIT_OK if ok else EXIT_VERIFY


def _add_common(sp, with_grid=True, with_mc=False):
    sp.add_argument("--config", help="key = value file; flags win")
    sp.add_argument("--q", type=float, default=3.0)
    sp.add_argument("--L", type=float, default=3.0)
    sp.add_argument("--T", type=float, default=1.0)
    sp.add_argument("--regime", choices=["outside", "inside"],
                    default="outside")
    if with_grid:
        sp.add_argument("--dx", type=float, default=0.1)
        sp.add_argument("--dt", type=float, default=0.01)
    if with_mc:
        sp.add_argument("--paths", type=int, default=100000)
        sp.add_argument("--dt-sim", type=float, default=0.002)
        sp.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="singular-bsde",
        description="Backward equations with singular non-Markovian terminal "
                    "data on a Brownian exit event: densities, PDE fields, "
                    "Monte Carlo oracles and sample paths.")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("density", help="closed-form exit-time density tables")
    _add_common(d, with_grid=False)
    d.add_argument("--x", type=float, required=True)
    d.add_argument("--t", type=float, default=0.0)
    d.add_argument("--horizon", type=float, default=None,
                   help="length of the s range (default 50 L^2)")
    d.add_argument("--samples", type=int, default=400)
    d.add_argument("--with-constrained", action="store_true")
    d.add_argument("--check-mass", action="store_true")
    d.add_argument("--out", default="density")
    d.add_argument("--plot", action="store_true")
    d.set_defaults(func=cmd_density)

    s = sub.add_parser("solve", help="finite-difference fields")
    _add_common(s)
    s.add_argument("--m", type=int, help="mollifier index (with --n)")
    s.add_argument("--n", type=int, help="shift index")
    s.add_argument("--ubar-n", type=int, help="truncated-horizon barrier index")
    s.add_argument("--vbar-n", type=int, help="truncated-data barrier index")
    s.add_argument("--vbar-limit", action="store_true")
    s.add_argument("--v0", action="store_true", help="linear baseline")
    s.add_argument("--slice", help="x=VALUE: export a time slice")
    s.add_argument("--out", default="field.csv")
    s.add_argument("--plot", action="store_true")
    s.set_defaults(func=cmd_solve)

    m = sub.add_parser("simulate", help="(W, Y, Z) sample paths")
    _add_common(m, with_mc=True)
    m.add_argument("--from-field", help="field CSV written by solve")
    m.add_argument("--x0", type=float, default=None)
    m.add_argument("--stats-only", action="store_true")
    m.add_argument("--out", default="sim")
    m.add_argument("--plot", action="store_true")
    m.set_defaults(func=cmd_simulate)

    v = sub.add_parser("verify", help="verification battery, JSON report")
    _add_common(v, with_mc=True)
    v.add_argument("--suite", choices=["fk", "monotone", "control",
                                       "density", "all"], default="all")
    v.add_argument("--out", help="write the JSON report here too")
    v.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args, remaining = ap.parse_known_args(argv)
    if remaining:
        ap.error(f"unrecognized arguments: {' '.join(remaining)}")
    if getattr(args, "config", None):
        cfg = _load_config(args.config)
        flags = []
        for key, val in cfg.items():
            if val.lower() in ("true", "yes", "1") and key in (
                    "plot", "check-mass", "with-constrained", "stats-only",
                    "vbar-limit", "v0"):
                flags.append(f"--{key}")
            else:
                flags += [f"--{key}", val]
        base = argv if argv is not None else sys.argv[1:]
        rebuilt = [base[0]] + flags + base[1:]
        args = ap.parse_args(rebuilt)
    try:
        return args.func(args)
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
