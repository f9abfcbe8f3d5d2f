"""Verification instruments: residuals, energy monitor, support checks,
scaling fits and the box-counting dimension estimate."""

from __future__ import annotations

import numpy as np

from .fields import SpectralField, TimeField, lq_norm
from .intervals import IntervalSet
from .state import ReynoldsState
from . import operators as op

__all__ = [
    "residual",
    "energy_monitor",
    "support_check",
    "scaling_probe",
    "hausdorff_estimate",
    "holder_probe",
]


def _momentum_residual(state: ReynoldsState, t: float) -> tuple[float, float]:
    d = state.d
    e_d = np.zeros(d)
    e_d[-1] = 1.0
    u = state.u.at(t)
    terms = [
        state.u.dt_at(t),
        op.div(op.outer(u, u)),
        op.grad(state.p.at(t)),
        op.frac_laplacian(u, state.alpha),
        -1.0 * op.tensor_scale(state.theta.at(t), e_d),
        -1.0 * op.div(state.R.at(t)),
    ]
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    scale = max(lq_norm(term, 2) for term in terms)
    return lq_norm(total, 2), scale


def _temperature_residual(state: ReynoldsState, t: float) -> tuple[float, float]:
    u = state.u.at(t)
    th = state.theta.at(t)
    terms = [
        state.theta.dt_at(t),
        op.div(op.pmul(th, u)),
        op.frac_laplacian(th, state.alpha),
        -1.0 * op.div(state.S.at(t)),
    ]
    total = terms[0]
    for term in terms[1:]:
        total = total + term
    scale = max(lq_norm(term, 2) for term in terms)
    return lq_norm(total, 2), scale


def residual(state: ReynoldsState, times=None) -> dict:
    """Relative residuals of the relaxed system at probe times.

    The time derivative comes from the field's derivative closure when
    available and 4th-order differences otherwise; everything else is exact
    spectral calculus, so the result measures how well the stresses account
    for the equation error.
    """
    if times is None:
        nodes = state.u.nodes
        times = nodes[np.linspace(0, len(nodes) - 1, min(17, len(nodes))).astype(int)]
    mom, tem = [], []
    mom_scale, tem_scale = 0.0, 0.0
    for t in times:
        rm, sm = _momentum_residual(state, float(t))
        rt, st = _temperature_residual(state, float(t))
        mom.append(rm)
        tem.append(rt)
        mom_scale = max(mom_scale, sm)
        tem_scale = max(tem_scale, st)
    mom_rel = float(np.max(mom) / max(mom_scale, 1e-300))
    tem_rel = float(np.max(tem) / max(tem_scale, 1e-300))
    return {
        "times": np.asarray(times),
        "momentum_abs": np.asarray(mom),
        "temperature_abs": np.asarray(tem),
        "momentum_rel": mom_rel,
        "temperature_rel": tem_rel,
        "max_rel": max(mom_rel, tem_rel),
    }


# ---------------------------------------------------------------------------
# energy monitor


def _dissipation_sq(f: SpectralField, alpha: float) -> float:
    from .fields import wavevectors

    k2 = np.sum(wavevectors(f.d, f.N) ** 2, axis=0)
    return float(np.sum(np.where(k2 > 0, k2**alpha, 0.0) * np.abs(f.coef) ** 2))


def energy_monitor(u: TimeField, theta: TimeField, alpha: float,
                   tol: float = 1e-10) -> dict:
    """Check the generalized energy inequalities along the samples.

    Velocity: ||u(t)||^2 + 2 int_0^t ||(-Lap)^{a/2}u||^2 <= ||u(0)||^2
              + 2 int_0^t int theta e_d . u dx ds;
    temperature: ||theta(t)||^2 + 2 int_0^t ||(-Lap)^{a/2}theta||^2
              <= ||theta(0)||^2.
    Cumulative integrals use the trapezoid rule on the sample nodes; the
    returned gaps are (left side - right side), so admissible monitors are
    nonpositive up to `tol` times the energy scale.
    """
    nodes = np.asarray(u.nodes)
    eu = np.array([float(np.sum(np.abs(f.coef) ** 2)) for f in u.fields])
    eth = np.array([float(np.sum(np.abs(f.coef) ** 2)) for f in theta.fields])
    du = np.array([_dissipation_sq(f, alpha) for f in u.fields])
    dth = np.array([_dissipation_sq(f, alpha) for f in theta.fields])
    buoy = np.array([
        float(np.real(np.sum(np.conj(th.coef) * uf.coef[-1])))
        for th, uf in zip(theta.fields, u.fields)])

    def cumtrap(y):
        out = np.zeros_like(y)
        out[1:] = np.cumsum(0.5 * (y[1:] + y[:-1]) * np.diff(nodes))
        return out

    gap_u = eu + 2.0 * cumtrap(du) - eu[0] - 2.0 * cumtrap(buoy)
    gap_th = eth + 2.0 * cumtrap(dth) - eth[0]
    scale = max(eu[0], eth[0], 1e-300)
    bad = np.flatnonzero((gap_u > tol * scale) | (gap_th > tol * scale))
    return {
        "first_violation": float(nodes[bad[0]]) if bad.size else None,
        "nodes": nodes,
        "gap_u": gap_u,
        "gap_theta": gap_th,
        "u_ok": bool(np.max(gap_u) <= tol * scale),
        "theta_ok": bool(np.max(gap_th) <= tol * scale),
        "ok": bool(np.max(gap_u) <= tol * scale and np.max(gap_th) <= tol * scale),
    }


# ---------------------------------------------------------------------------
# support and scaling


def support_check(tf: TimeField, support: IntervalSet, margin: float = 0.0) -> dict:
    """Largest field magnitude where dist(t, complement of support) <= margin."""
    worst = 0.0
    worst_t = None
    inside_max = 0.0
    for t, f in zip(tf.nodes, tf.fields):
        mag = float(np.max(np.abs(f.coef)))
        if support.dist_to_complement(float(t)) <= margin + 1e-14:
            if mag > worst:
                worst, worst_t = mag, float(t)
        else:
            inside_max = max(inside_max, mag)
    return {"max_outside": worst, "argmax": worst_t, "max_inside": inside_max}


def scaling_probe(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares log-log exponent fit, returning (slope, stderr)."""
    lx, ly = np.log(np.asarray(x, float)), np.log(np.asarray(y, float))
    A = np.stack([lx, np.ones_like(lx)], axis=1)
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    n = len(lx)
    if n > 2 and res.size:
        var = res[0] / (n - 2) / np.sum((lx - lx.mean()) ** 2)
        err = float(np.sqrt(var))
    else:
        err = 0.0
    return float(coef[0]), err


def hausdorff_estimate(lengths, counts) -> tuple[float, float]:
    """Box-counting slope: fit of log(count) against log(1/length)."""
    lengths = np.asarray(lengths, float)
    counts = np.asarray(counts, float)
    return scaling_probe(1.0 / lengths, counts)


def holder_probe(g: SpectralField, f: SpectralField, sigmas, p: float) -> dict:
    """Measured constants of the improved Hoelder inequality

        ||g f(sigma .)||_p <= C (||g||_p ||f||_p + sigma^{-1/p} ||g||_{C^1} ||f||_p).
    """
    gp = lq_norm(g, p, oversample=4)
    fp = lq_norm(f, p, oversample=4)
    gc1 = lq_norm(g, np.inf) + lq_norm(op.grad(g), np.inf)
    out = {}
    for s in sigmas:
        prod = op.pmul(g, f.dilate(int(s)))
        lhs = lq_norm(prod, p, oversample=4)
        # C multiplies only the correction term; clip at 0 when the
        # zeroth-order term already dominates
        out[int(s)] = max(lhs - gp * fp, 0.0) * s ** (1.0 / p) / (gc1 * fp)
    return out
