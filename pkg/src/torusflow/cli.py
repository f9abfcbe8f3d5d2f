"""Command line driver: property suites, the gluing and perturbation stages,
the parameter schedule, the iteration loop, and deterministic report bundles.
"""

from __future__ import annotations

import argparse
import configparser
import json
import os
import sys

import numpy as np

from .fields import SpectralField, TimeField, lq_norm, mixed_norm, sobolev_norm
from .testing import random_field, random_divfree
from .geometry import build_direction_family
from .blocks import build_mikado, TemporalProfile
from .params import build_params, check_inequalities, exponent_identities
from .state import well_prepared_test_state, static_initial_state, stress_l1_norm
from .gluing import glue
from .convex import perturb
from .verify import residual, scaling_probe, hausdorff_estimate
from .intervals import IntervalSet
from . import operators as op

__all__ = ["main"]


# ---------------------------------------------------------------------------
# deterministic serialization


def _fmt(x) -> str:
    if isinstance(x, float):
        return "%.17g" % x
    return str(x)


def _write_csv(path: str, header: list[str], rows: list[list]) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(path: str, obj) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


# ---------------------------------------------------------------------------
# verify-ops


def _ops_suite(d: int, N: int, n_trials: int, rng) -> list[list]:
    rows = []

    def rel(err, scale):
        return err / max(scale, 1e-300)

    worst = {k: 0.0 for k in ("antidiv_sym", "antidiv_grad", "bilinear",
                              "bilinear_scalar", "leray")}
    for _ in range(n_trials):
        v = random_field(rng, d, N, rank=1)
        got = op.div(op.antidiv_sym(v))
        worst["antidiv_sym"] = max(worst["antidiv_sym"],
                                   rel(lq_norm(got - v, 2), lq_norm(v, 2)))
        f = random_field(rng, d, N, rank=0)
        got = op.div(op.antidiv_grad(f))
        worst["antidiv_grad"] = max(worst["antidiv_grad"],
                                    rel(lq_norm(got - f, 2), lq_norm(f, 2)))
        A = random_field(rng, d, N, rank=2)
        w = random_field(rng, d, N, rank=1, band=N // 8)
        want = op.nonzero_modes(op.matvec(A, w))
        got = op.div(op.bilinear_antidiv(w, A))
        worst["bilinear"] = max(worst["bilinear"],
                                rel(lq_norm(got - want, 2), lq_norm(want, 2)))
        g = random_field(rng, d, N, rank=0, band=N // 8)
        want = op.nonzero_modes(op.pmul(f, g))
        got = op.div(op.bilinear_antidiv_scalar(f, g))
        worst["bilinear_scalar"] = max(worst["bilinear_scalar"],
                                       rel(lq_norm(got - want, 2), lq_norm(want, 2)))
        u = random_field(rng, d, N, rank=1)
        pu = op.leray_project(u)
        err = max(lq_norm(op.leray_project(pu) - pu, 2), lq_norm(op.div(pu), 2))
        worst["leray"] = max(worst["leray"], rel(err, lq_norm(u, 2)))
    for name, e in sorted(worst.items()):
        rows.append([d, N, name, e, e <= 1e-10])
    return rows


def cmd_verify_ops(args) -> int:
    rng = np.random.default_rng(args.seed)
    rows = []
    for d, N in ((2, 64), (3, 32)):
        rows += _ops_suite(d, N, args.trials, rng)
    _write_csv(os.path.join(args.out, "verify_ops.csv"),
               ["d", "N", "identity", "max_rel_error", "pass"], rows)
    ok = all(r[-1] for r in rows)
    for r in rows:
        print("d=%d N=%-3d %-16s %.3e %s" % (r[0], r[1], r[2], r[3],
                                             "PASS" if r[4] else "FAIL"))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# mikado-scaling


def cmd_mikado_scaling(args) -> int:
    d, N = args.d, args.N
    fam = build_direction_family(d)
    mus = [float(m) for m in args.mu.split(",")]
    ps = [1.0, 4.0, np.inf]
    rows = []
    norms = {p: [] for p in ps}
    for mu in mus:
        flow = build_mikado(d, N, fam.directions[0], fam.transverse[0], mu)
        for p in ps:
            nrm = lq_norm(flow.psi, p, oversample=4)
            norms[p].append(nrm)
            rows.append([mu, ("inf" if np.isinf(p) else p), nrm])
    _write_csv(os.path.join(args.out, "mikado_scaling.csv"),
               ["mu", "p", "lp_norm"], rows)
    fits = {}
    ok = True
    for p in ps:
        slope, err = scaling_probe(np.array(mus), np.array(norms[p]))
        pinf = np.inf if isinstance(p, float) and np.isinf(p) else p
        want = (d - 1) / 2.0 - (0.0 if np.isinf(pinf) else (d - 1) / pinf)
        key = "p=inf" if np.isinf(pinf) else f"p={p:g}"
        fits[key] = {"slope": slope, "stderr": err, "expected": want}
        ok = ok and abs(slope - want) <= 0.1 * max(abs(want), 0.5)
        print(f"{key}: slope {slope:+.4f} expected {want:+.4f}")
    _write_json(os.path.join(args.out, "mikado_fits.json"), fits)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# glue / perturb


def cmd_glue(args) -> int:
    state = well_prepared_test_state(args.d, args.N, args.alpha)
    glued, rep = glue(state, args.tau_bar, args.epsilon, args.dt)
    manifest = {
        "tau_bar": rep["tau_bar"],
        "count": len(rep["support"]),
        "endpoints": [[a, b] for a, b in rep["support"]],
        "n_intervals": rep["n_intervals"],
        "spacing": rep["spacing"],
    }
    _write_json(os.path.join(args.out, "glue_intervals.json"), manifest)
    r_in = stress_l1_norm(state)
    r_out = stress_l1_norm(glued)
    res = residual(glued)
    rows = [
        ["stress_l1_in", r_in],
        ["stress_l1_out", r_out],
        ["norm_control_C", r_out / max(r_in, 1e-300)],
        ["u_drift_linf_hd", max(sobolev_norm(glued.u.at(float(t)) - state.u.at(float(t)), args.d)
                                for t in glued.u.nodes[:: max(1, len(glued.u.nodes) // 24)])],
        ["residual_max_rel", res["max_rel"]],
    ]
    _write_csv(os.path.join(args.out, "glue_norms.csv"), ["quantity", "value"], rows)
    for name, val in rows:
        print(f"{name}: {val:.6e}")
    return 0 if res["max_rel"] <= 1e-8 else 1


def _desk_caps(N: int, sigma_cap: int | None = None) -> dict:
    sigma = sigma_cap or max(1, N // 32)
    mu = max(2.0, (N // (2 * sigma) - 2) / 2.5)
    return {"nu": 4, "l": 8, "sigma": sigma, "mu": mu}


def cmd_perturb(args) -> int:
    state = well_prepared_test_state(args.d, args.N, args.alpha)
    params = build_params(args.d, args.alpha, args.p, args.q, args.lam,
                          caps=_desk_caps(args.N))
    nodes = np.linspace(0.0, 1.0, 33)
    new, rep = perturb(state, params, nodes=nodes)
    res = residual(new, times=nodes[::4])
    rows = [[k, v] for k, v in sorted(rep["term_norms"].items())]
    rows += [
        ["perturbation_u_l2", rep["perturbation_u"]],
        ["perturbation_theta_l2", rep["perturbation_theta"]],
        ["div_defect", rep["div_defect"]],
        ["kappa_mean", rep["kappa_mean"]],
        ["residual_max_rel", res["max_rel"]],
        ["stress_l1_l%g" % params.r, mixed_norm(new.R, 1.0, params.r)
         + mixed_norm(new.S, 1.0, params.r)],
    ]
    _write_csv(os.path.join(args.out, "perturb_norms.csv"),
               ["quantity", "value"], rows)
    for name, val in rows:
        print(f"{name}: {val:.6e}" if isinstance(val, float) else f"{name}: {val}")
    ok = (res["max_rel"] <= 1e-8 and rep["div_defect"] <= 1e-10
          and rep["kappa_mean"] <= 1e-12)
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# params-check


def cmd_params_check(args) -> int:
    params = build_params(args.d, args.alpha, args.p, args.q, args.lam)
    checks = check_inequalities(params)
    ident = exponent_identities(args.d, args.alpha, params.beta)
    payload = {
        "d": args.d, "alpha": args.alpha, "p": args.p, "q": args.q,
        "lambda": args.lam, "beta": params.beta, "r": params.r,
        "exponents": {
            "nu": params.schedule.nu_exp,
            "l": params.schedule.l_exp,
            "sigma": params.schedule.sigma_exp,
            "mu": params.schedule.mu_exp,
        },
        "values": {"nu": params.nu, "l": params.l, "sigma": params.sigma,
                   "mu": params.mu},
        "inequalities": {name: {"lhs": lhs, "rhs": rhs, "pass": bool(okk)}
                         for name, (lhs, rhs, okk) in sorted(checks.items())},
        "identities": {name: list(pair) for name, pair in sorted(ident.items())},
    }
    _write_json(os.path.join(args.out, "params_check.json"), payload)
    ok = all(v[2] for v in checks.values())
    for name, (lhs, rhs, okk) in sorted(checks.items()):
        print(f"{name}: {lhs:.4e} <= {rhs:.4e} {'PASS' if okk else 'FAIL'}")
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# iterate


_ITERATE_DEFAULTS = {
    "problem": {"d": "2", "n": "64", "alpha": "1.4", "t": "1.0"},
    "targets": {"p": "1.0", "q": "10.0"},
    "scheme": {"epsilon": "0.5", "lambda": "64.0", "tau_bar": "2e-4",
               "rounds": "1"},
    "solver": {"dt": "1e-3", "rho_floor": "1e-8"},
}


def _load_config(path: str | None) -> dict:
    cfg = {k: dict(v) for k, v in _ITERATE_DEFAULTS.items()}
    if path:
        parser = configparser.ConfigParser()
        with open(path) as fh:
            parser.read_file(fh)
        for section in parser.sections():
            cfg.setdefault(section.lower(), {}).update(
                {k.lower(): v for k, v in parser[section].items()})
    return cfg


def cmd_iterate(args) -> int:
    cfg = _load_config(args.config)
    if args.n is not None:
        cfg["problem"]["n"] = str(args.n)
    if args.rounds is not None:
        cfg["scheme"]["rounds"] = str(args.rounds)
    d = int(cfg["problem"]["d"])
    N = int(cfg["problem"]["n"])
    alpha = float(cfg["problem"]["alpha"])
    p = float(cfg["targets"]["p"])
    q = float(cfg["targets"]["q"])
    eps = float(cfg["scheme"]["epsilon"])
    lam = float(cfg["scheme"]["lambda"])
    tau_bar = float(cfg["scheme"]["tau_bar"])
    rounds = int(cfg["scheme"]["rounds"])
    dt = float(cfg["solver"]["dt"])
    rho_floor = float(cfg["solver"]["rho_floor"])

    _write_json(os.path.join(args.out, "config.json"), cfg)

    state = static_initial_state(d, N, alpha)
    u0 = state.u.at(0.0)
    th0 = state.theta.at(0.0)
    params = build_params(d, alpha, p, q, lam, caps=_desk_caps(N))
    delta0 = stress_l1_norm(state)

    norm_rows = []
    intervals_out = {}
    covers = []
    ok = True
    l1 = stress_l1_norm(state)
    if l1 < rho_floor:
        print("initial stresses vanish; loop is a no-op")
        rounds = 0
    for n in range(1, rounds + 1):
        delta_n = 2.0 ** (-n) * min(delta0, 1.0)
        glued, grep = glue(state, tau_bar, eps, dt)
        new, prep = perturb(glued, params, rho_floor=rho_floor)
        # perturbations are analytic in t; the glued background solves its
        # equation exactly at its stored nodes, so probe the residual there
        gn = glued.u.nodes
        res = residual(new, times=gn[:: max(1, len(gn) // 17)])
        l1r = (mixed_norm(new.R, 1.0, params.r)
               + mixed_norm(new.S, 1.0, params.r))
        drift0 = lq_norm(new.u.at(0.0) - u0, 2) + lq_norm(new.theta.at(0.0) - th0, 2)
        norm_rows.append([n, delta_n, stress_l1_norm(new), l1r,
                          prep["perturbation_u"], prep["perturbation_theta"],
                          res["max_rel"], drift0])
        intervals_out[f"round_{n}"] = {
            "tau_bar": grep["tau_bar"],
            "count": len(grep["support"]),
            "endpoints": [[a, b] for a, b in grep["support"]],
        }
        covers.append((grep["tau_bar"] * 5.0, max(1, len(grep["support"]))))
        ok = ok and res["max_rel"] <= 1e-8 and drift0 <= 1e-10
        ok = ok and new.support.covers(IntervalSet(grep["support"]))
        state = new
    _write_csv(os.path.join(args.out, "iterate_norms.csv"),
               ["round", "delta_n", "stress_l1", "stress_l1lr",
                "pert_u_l2", "pert_theta_l2", "residual_max_rel",
                "initial_data_drift"], norm_rows)
    _write_json(os.path.join(args.out, "iterate_intervals.json"), intervals_out)
    if len(covers) >= 2:
        slope, errf = hausdorff_estimate([c[0] for c in covers],
                                         [c[1] for c in covers])
        _write_json(os.path.join(args.out, "iterate_hausdorff.json"),
                    {"slope": slope, "stderr": errf, "epsilon": eps})
    for row in norm_rows:
        print("round %d: residual %.3e, stress L1 %.3e, drift %.3e"
              % (row[0], row[6], row[2], row[7]))
    return 0 if ok else 1


# ---------------------------------------------------------------------------
# report


def cmd_report(args) -> int:
    run = args.run
    entries = []
    if os.path.isdir(run):
        for name in sorted(os.listdir(run)):
            path = os.path.join(run, name)
            if name.endswith(".csv"):
                with open(path) as fh:
                    header = fh.readline().strip().split(",")
                    n_rows = sum(1 for _ in fh)
                entries.append({"file": name, "kind": "csv",
                                "columns": header, "rows": n_rows})
            elif name.endswith(".json"):
                with open(path) as fh:
                    payload = json.load(fh)
                entries.append({"file": name, "kind": "json",
                                "keys": sorted(payload) if isinstance(payload, dict) else len(payload)})
    _write_json(os.path.join(args.out, "bundle.json"),
                {"run": os.path.basename(os.path.normpath(run)), "artifacts": entries})
    # plot data: flatten every csv into (x, y, series) rows
    plot_rows = []
    if os.path.isdir(run):
        for name in sorted(os.listdir(run)):
            if not name.endswith(".csv"):
                continue
            with open(os.path.join(run, name)) as fh:
                header = fh.readline().strip().split(",")
                for line in fh:
                    cells = line.strip().split(",")
                    try:
                        x = float(cells[0])
                        y = float(cells[-1])
                    except ValueError:
                        continue
                    plot_rows.append([x, y, name[:-4] + ":" + header[-1]])
    _write_csv(os.path.join(args.out, "plot_data.csv"),
               ["x", "y", "series"], plot_rows)
    print("report bundle written to", args.out)
    return 0


# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="torusflow",
        description="spectral verification of convex-integration building blocks")
    ap.add_argument("--seed", type=int, default=0, help="seed for property suites")
    ap.add_argument("--out", default="runs/latest", help="output directory")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify-ops", help="operator identity suite")
    sp.add_argument("--trials", type=int, default=100)
    sp.set_defaults(func=cmd_verify_ops)

    sp = sub.add_parser("mikado-scaling", help="pipe-flow norm scaling fits")
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--N", type=int, default=256)
    sp.add_argument("--mu", default="4,8,16,32")
    sp.set_defaults(func=cmd_mikado_scaling)

    sp = sub.add_parser("glue", help="gluing stage on the built-in test state")
    sp.add_argument("--tau-bar", type=float, required=True, dest="tau_bar")
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.add_argument("--dt", type=float, required=True)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--N", type=int, default=64)
    sp.add_argument("--alpha", type=float, default=1.4)
    sp.set_defaults(func=cmd_glue)

    sp = sub.add_parser("perturb", help="perturbation stage on the test state")
    sp.add_argument("--lambda", type=float, required=True, dest="lam")
    sp.add_argument("--p", type=float, default=1.0)
    sp.add_argument("--q", type=float, default=10.0)
    sp.add_argument("--d", type=int, default=2)
    sp.add_argument("--N", type=int, default=64)
    sp.add_argument("--alpha", type=float, default=1.4)
    sp.set_defaults(func=cmd_perturb)

    sp = sub.add_parser("params-check", help="parameter schedule feasibility")
    sp.add_argument("--d", type=int, required=True)
    sp.add_argument("--alpha", type=float, required=True)
    sp.add_argument("--p", type=float, required=True)
    sp.add_argument("--q", type=float, required=True)
    sp.add_argument("--lambda", type=float, required=True, dest="lam")
    sp.set_defaults(func=cmd_params_check)

    sp = sub.add_parser("iterate", help="gluing/perturbation iteration loop")
    sp.add_argument("--config", default=None)
    sp.add_argument("--n", type=int, default=None, help="override resolution")
    sp.add_argument("--rounds", type=int, default=None)
    sp.set_defaults(func=cmd_iterate)

    sp = sub.add_parser("report", help="bundle run artifacts")
    sp.add_argument("--run", required=True)
    sp.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    threads = os.environ.get("TORUSFLOW_THREADS")
    if threads:
        os.environ.setdefault("OMP_NUM_THREADS", threads)
    args = _build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
