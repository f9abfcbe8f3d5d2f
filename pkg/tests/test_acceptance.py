"""Acceptance gate: ten pinned criteria, one pass/fail line each.

Each test prints a single summary line (visible with pytest -v via the test
name, or with -s via stdout) and asserts the pinned tolerance.  Resolutions,
sample counts and tolerances are fixed here on purpose; loosening them is a
red flag, not a fix.
"""

import filecmp
import json
import os
import time

import numpy as np
import pytest

import torusflow.operators as op
from torusflow.blocks import build_mikado, TemporalProfile
from torusflow.convex import perturb
from torusflow.fields import SpectralField, TimeField, lq_norm, sobolev_norm
from torusflow.geometry import build_direction_family
from torusflow.gluing import glue
from torusflow.intervals import IntervalSet
from torusflow.params import build_params, check_inequalities, feasible_beta
from torusflow.state import well_prepared_test_state, stress_l1_norm
from torusflow.testing import random_field, random_divfree
from torusflow.verify import (residual, energy_monitor, support_check,
                              scaling_probe, hausdorff_estimate)


def _report(num, name, ok, detail):
    line = f"[criterion {num:2d}] {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    print(line)
    assert ok, line


# -- 1 ----------------------------------------------------------------------

def test_criterion_01_operator_identities():
    start = time.time()
    rng = np.random.default_rng(0)
    worst = 0.0
    for d, N in ((2, 64), (3, 32)):
        for _ in range(100):
            v = random_field(rng, d, N, rank=1)
            worst = max(worst, lq_norm(op.div(op.antidiv_sym(v)) - v, 2)
                        / lq_norm(v, 2))
            f = random_field(rng, d, N, rank=0)
            worst = max(worst, lq_norm(op.div(op.antidiv_grad(f)) - f, 2)
                        / lq_norm(f, 2))
            A = random_field(rng, d, N, rank=2)
            w = random_field(rng, d, N, rank=1, band=N // 8)
            want = op.nonzero_modes(op.matvec(A, w))
            worst = max(worst, lq_norm(op.div(op.bilinear_antidiv(w, A)) - want, 2)
                        / lq_norm(want, 2))
            g = random_field(rng, d, N, rank=0, band=N // 8)
            want = op.nonzero_modes(op.pmul(f, g))
            worst = max(worst,
                        lq_norm(op.div(op.bilinear_antidiv_scalar(f, g)) - want, 2)
                        / lq_norm(want, 2))
            u = random_field(rng, d, N, rank=1)
            pu = op.leray_project(u)
            worst = max(worst, max(lq_norm(op.leray_project(pu) - pu, 2),
                                   lq_norm(op.div(pu), 2)) / lq_norm(u, 2))
    elapsed = time.time() - start
    _report(1, "operator identities", worst <= 1e-10 and elapsed < 120,
            f"max rel err {worst:.2e}, {elapsed:.0f}s")


# -- 2 ----------------------------------------------------------------------

def test_criterion_02_frame_decomposition():
    start = time.time()
    rng = np.random.default_rng(1)
    worst_m, worst_v, min_coef = 0.0, 0.0, np.inf
    for d in (2, 3):
        fam = build_direction_family(d)
        eye = np.eye(d)
        for _ in range(1000):
            A = rng.standard_normal((d, d))
            S = 0.5 * (A + A.T)
            S *= rng.uniform(0, 0.999) * fam.r0 / max(np.linalg.norm(S), 1e-300)
            R = eye + S
            coeffs = np.asarray(fam.gamma_sq(R))
            back = np.einsum("k,ki,kj->ij", coeffs, fam.units, fam.units)
            worst_m = max(worst_m, np.max(np.abs(back - R)))
            min_coef = min(min_coef, np.min(coeffs) / fam.c0_sq)
            v = rng.standard_normal(d)
            cv = np.asarray(fam.vector_coeffs(v))
            worst_v = max(worst_v, np.max(np.abs(cv @ fam.units - v)))
    elapsed = time.time() - start
    ok = (worst_m <= 1e-10 and worst_v <= 1e-12
          and min_coef >= 1.0 - 1e-12 and elapsed < 10)
    _report(2, "direction-frame decomposition", ok,
            f"matrix {worst_m:.2e}, vector {worst_v:.2e}, "
            f"min coeff/c0^2 {min_coef:.3f}, {elapsed:.1f}s")


# -- 3 ----------------------------------------------------------------------

def test_criterion_03_mikado_laws():
    start = time.time()
    d, N = 2, 256
    fam = build_direction_family(d)
    mus = [4.0, 8.0, 16.0, 32.0]
    ps = [1.0, 4.0, np.inf]
    stat_err = sq_err = pot_err = 0.0
    norms = {p: [] for p in ps}
    cross = {p: [] for p in ps}
    for mu in mus:
        a = build_mikado(d, N, fam.directions[0], fam.transverse[0], mu)
        b = build_mikado(d, N, fam.directions[1], fam.transverse[1], mu)
        W = a.velocity()
        stat_err = max(stat_err, lq_norm(op.div(op.outer(W, W)), 2))
        sq_err = max(sq_err, abs(lq_norm(a.psi, 2) - 1.0))
        pot_err = max(pot_err, lq_norm(a.psi - op.div(op.grad(a.phi)), 2))
        prod = op.pmul(a.psi, b.psi)
        for p in ps:
            norms[p].append(lq_norm(a.psi, p, oversample=4))
            cross[p].append(lq_norm(prod, p, oversample=4))
    slopes_ok = True
    details = []
    for p in ps:
        want = (d - 1) / 2.0 - (0.0 if np.isinf(p) else (d - 1) / p)
        slope, _ = scaling_probe(np.array(mus), np.array(norms[p]))
        slopes_ok &= abs(slope - want) <= 0.10 * max(abs(want), 0.5)
        details.append(f"p={p:g}:{slope:+.3f}/{want:+.3f}")
        want_x = d - 1.0 - (0.0 if np.isinf(p) else d / p)
        slope_x, _ = scaling_probe(np.array(mus), np.array(cross[p]))
        slopes_ok &= abs(slope_x - want_x) <= 0.15 * max(abs(want_x), 0.5)
        details.append(f"x{p:g}:{slope_x:+.3f}/{want_x:+.3f}")
    elapsed = time.time() - start
    ok = (stat_err <= 1e-10 and sq_err <= 1e-10 and pot_err <= 1e-12
          and slopes_ok and elapsed < 300)
    _report(3, "concentrated pipe-flow laws", ok,
            f"stat {stat_err:.1e}, norm {sq_err:.1e}, pot {pot_err:.1e}, "
            + " ".join(details) + f", {elapsed:.0f}s")


# -- 4 ----------------------------------------------------------------------

def test_criterion_04_temporal_profiles():
    start = time.time()
    ls = [4, 16, 64]
    norm_err = hmax = 0.0
    for l in ls:
        prof = TemporalProfile(l)
        norm_err = max(norm_err, abs(prof.g_norm(2.0) - 1.0))
        ts = np.linspace(0.0, 1.0, 8001)
        hmax = max(hmax, float(np.max(np.abs(prof.h(ts)))))
    fit_ok = True
    details = []
    for m in (0, 1):
        for p in (1.0, 2.0, np.inf):
            vals = [TemporalProfile(l).g_norm(p, m) for l in ls]
            slope, _ = scaling_probe(np.array(ls, float), np.array(vals))
            want = m + 0.5 - (0.0 if np.isinf(p) else 1.0 / p)
            fit_ok &= abs(slope - want) <= 0.10 * max(abs(want), 0.5)
            details.append(f"m={m},p={p:g}:{slope:+.3f}/{want:+.3f}")
    elapsed = time.time() - start
    ok = norm_err <= 1e-10 and hmax <= 1.0 + 1e-12 and fit_ok and elapsed < 60
    _report(4, "temporal profiles", ok,
            f"norm err {norm_err:.1e}, |h| {hmax:.3f}, "
            + " ".join(details) + f", {elapsed:.0f}s")


# -- 5 ----------------------------------------------------------------------

GLUE_DELTA = 5.0       # configured H^d drift bound at desk scale


def test_criterion_05_gluing():
    start = time.time()
    state = well_prepared_test_state(2, 128, 1.4)
    glued, report = glue(state, 8e-5, 0.5, 1e-3)
    # stresses vanish within 3 tau/2 of the new support's complement
    sup_r = support_check(glued.R, glued.support, margin=1.5 * glued.tau)
    sup_s = support_check(glued.S, glued.support, margin=1.5 * glued.tau)
    nested = state.support.covers(glued.support)
    c_norm = stress_l1_norm(glued) / stress_l1_norm(state)
    drift = max(sobolev_norm(glued.u.at(float(t)) - state.u.at(float(t)), 2.0)
                for t in glued.u.nodes)
    res = residual(glued)
    elapsed = time.time() - start
    ok = (sup_r["max_outside"] == 0.0 and sup_s["max_outside"] == 0.0
          and nested and np.isfinite(c_norm) and drift <= GLUE_DELTA
          and res["max_rel"] <= 1e-10 and elapsed < 600)
    _report(5, "gluing", ok,
            f"support leak {sup_r['max_outside']:.1e}/{sup_s['max_outside']:.1e}, "
            f"nested {nested}, C {c_norm:.3f}, drift {drift:.3f}<= {GLUE_DELTA}, "
            f"residual {res['max_rel']:.1e}, {elapsed:.0f}s")


# -- 6 ----------------------------------------------------------------------

def test_criterion_06_convex_step_exactness():
    start = time.time()
    state = well_prepared_test_state(2, 128, 1.4)
    params = build_params(2, 1.4, 1.0, 10.0, 64.0,
                          caps={"nu": 2, "l": 4, "sigma": 4, "mu": 6})
    nodes = np.linspace(0.0, 1.0, 33)
    new, report = perturb(state, params, nodes=nodes)
    res = residual(new, times=nodes[::4])
    # perturbation supported inside the prepared window
    outside = max(lq_norm(new.u.at(t) - state.u.at(t), 2)
                  + lq_norm(new.theta.at(t) - state.theta.at(t), 2)
                  for t in (0.0, 0.1, 0.9, 1.0))
    elapsed = time.time() - start
    ok = (res["max_rel"] <= 1e-8 and report["div_defect"] <= 1e-10
          and outside <= 1e-13 and report["kappa_mean"] <= 1e-13
          and elapsed < 600)
    _report(6, "convex-step exactness", ok,
            f"residual {res['max_rel']:.1e}, div {report['div_defect']:.1e}, "
            f"outside {outside:.1e}, kappa mean {report['kappa_mean']:.1e}, "
            f"{elapsed:.0f}s")


# -- 7 ----------------------------------------------------------------------

def test_criterion_07_parameter_schedule():
    start = time.time()
    beta = feasible_beta(3, 1.2, 1.0, 10.0)
    params = build_params(3, 1.2, 1.0, 10.0, 1e6)
    checks = check_inequalities(params)
    slacks_ok = all(ok for _, _, ok in checks.values())
    # independent hand evaluation of the exponents
    l_ok = abs(params.schedule.l_exp - (12.0 - 31.0 * beta)) < 1e-12
    s_ok = abs(params.schedule.sigma_exp - (4.0 - 12.5 * beta)) < 1e-12
    elapsed = time.time() - start
    ok = beta > 0 and slacks_ok and l_ok and s_ok and elapsed < 1.0
    _report(7, "parameter schedule", ok,
            f"beta {beta:.4f}, {len(checks)} inequalities pass {slacks_ok}, "
            f"l-exp {params.schedule.l_exp:.4f}, "
            f"sigma-exp {params.schedule.sigma_exp:.4f}, {elapsed:.2f}s")


# -- 8 ----------------------------------------------------------------------

def test_criterion_08_energy_monitor():
    start = time.time()
    from torusflow.imex import imex_evolve

    rng = np.random.default_rng(2)
    u0 = random_divfree(rng, 2, 32, band=2)
    th0 = random_field(rng, 2, 32, rank=0, band=2)
    zero_rhs = lambda t, fs: [np.zeros_like(f.coef) for f in fs]

    def heat_gap(n):
        _, stored = imex_evolve([u0, th0], 1.4, 0.0, 2e-3, n,
                                rhs=zero_rhs, store_index=range(0, n + 1))
        steps = sorted(stored)
        times = np.array([2e-3 * s / n for s in steps])
        u = TimeField(times, [stored[s][0] for s in steps])
        th = TimeField(times, [stored[s][1] for s in steps])
        out = energy_monitor(u, th, 1.4, tol=np.inf)
        return (max(np.max(np.abs(out["gap_u"])), np.max(np.abs(out["gap_theta"]))),
                u, th, times, stored, steps)

    gap1 = heat_gap(64)[0]
    gap2, u, th, times, stored, steps = heat_gap(128)
    halving_ok = gap2 < gap1 / 2.5
    # inflate the temperature: energy appears from nowhere and is flagged
    bad = TimeField(times, [stored[s][1] * (1.0 if t < 1e-3 else 3.0)
                            for t, s in zip(times, steps)])
    flagged = not energy_monitor(u, bad, 1.4, tol=1e-10)["ok"]
    elapsed = time.time() - start
    ok = halving_ok and flagged and elapsed < 60
    _report(8, "energy monitor", ok,
            f"gap {gap1:.2e}->{gap2:.2e} (ratio {gap1 / gap2:.2f}), "
            f"inflation flagged {flagged}, {elapsed:.0f}s")


# -- 9 ----------------------------------------------------------------------

def test_criterion_09_hausdorff_bookkeeping():
    start = time.time()
    eps = 0.3
    lengths = np.array([4.0 ** -j for j in range(1, 8)])
    counts = lengths ** -eps
    slope, stderr = hausdorff_estimate(lengths, counts)
    elapsed = time.time() - start
    ok = abs(slope - eps) <= 0.05 and elapsed < 1.0
    _report(9, "interval-cover dimension", ok,
            f"slope {slope:.4f} vs {eps}, stderr {stderr:.1e}, {elapsed:.2f}s")


# -- 10 ---------------------------------------------------------------------

def test_criterion_10_end_to_end_determinism(tmp_path):
    start = time.time()
    from torusflow.cli import main

    dirs = []
    for tag in ("a", "b"):
        run = tmp_path / f"run_{tag}"
        rc = main(["--out", str(run), "iterate", "--n", "16", "--rounds", "1"])
        assert rc == 0
        rep = tmp_path / f"rep_{tag}"
        assert main(["--out", str(rep), "report", "--run", str(run)]) == 0
        dirs.append((run, rep))
    identical = True
    for kind in (0, 1):
        left, right = dirs[0][kind], dirs[1][kind]
        names = sorted(os.listdir(left))
        identical &= names == sorted(os.listdir(right))
        for name in names:
            if name == "bundle.json":
                # the bundle embeds its run directory name; compare content
                a = json.loads((left / name).read_text())
                b = json.loads((right / name).read_text())
                identical &= a["artifacts"] == b["artifacts"]
            else:
                identical &= (left / name).read_bytes() == (right / name).read_bytes()
    elapsed = time.time() - start
    _report(10, "end-to-end determinism", identical,
            f"{sum(len(os.listdir(d)) for d, _ in dirs)} artifacts byte-compared, "
            f"{elapsed:.0f}s")
