"""Relaxed Boussinesq states: fields plus stress bookkeeping.

A state bundles (u, theta, p, R, S) as time-sampled fields together with
the dissipation exponent, the time horizon, and the well-preparedness data:
an interval union `support` containing the temporal support of the stresses
and a margin `tau` such that both stresses vanish wherever
dist(t, complement of support) <= tau.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .blocks import bump, bump_derivative
from .fields import SpectralField, TimeField, lq_norm
from .intervals import IntervalSet
from . import operators as op

__all__ = ["ReynoldsState", "combined_stress_magnitude", "stress_l1_norm",
           "well_prepared_test_state", "static_initial_state"]


@dataclass
class ReynoldsState:
    u: TimeField
    theta: TimeField
    p: TimeField
    R: TimeField
    S: TimeField
    alpha: float
    T: float
    support: IntervalSet
    tau: float

    @property
    def d(self) -> int:
        return self.u.d

    @property
    def N(self) -> int:
        return self.u.N

    def with_fields(self, **kw) -> "ReynoldsState":
        return replace(self, **kw)


def combined_stress_magnitude(R: SpectralField, S: SpectralField,
                              oversample: int = 2) -> np.ndarray:
    """Pointwise |(R,S)| = sqrt(|R|_F^2 + |S|^2) on the oversampled grid."""
    rv = R.values(oversample * R.N)
    sv = S.values(oversample * S.N)
    return np.sqrt(np.sum(rv * rv, axis=(0, 1)) + np.sum(sv * sv, axis=0))


def stress_l1_norm(state: ReynoldsState, oversample: int = 2) -> float:
    """Space-time L^1 norm of the combined stress magnitude."""
    total = 0.0
    for w, R, S in zip(state.R.weights, state.R.fields, state.S.fields):
        total += w * float(np.mean(combined_stress_magnitude(R, S, oversample)))
    return total


# ---------------------------------------------------------------------------
# analytic well-prepared test states


def well_prepared_test_state(d: int, N: int, alpha: float,
                             amplitude: float = 0.1,
                             support=(0.2, 0.7), active=(0.35, 0.55),
                             n_nodes: int = 81) -> ReynoldsState:
    """Exact solution of the relaxed system with closed-form time dependence.

    u = eta(t) V(x), theta = eta(t) W(x), p = 0 with the stresses defined by
    the antidivergence of the residual, so the system holds to machine
    precision and both stresses vanish outside the active window.  V is a
    fixed low-mode divergence-free field, W a low-mode mean-free scalar.
    """
    a, b = active
    width = b - a

    def eta(t):
        return amplitude * bump((np.asarray(t) - a) / width)

    def deta(t):
        return amplitude * bump_derivative((np.asarray(t) - a) / width) / width

    if d == 2:
        stream = SpectralField.from_function(2, N, lambda x, y: (
            np.sin(2 * np.pi * x) * np.sin(2 * np.pi * y)
            + 0.5 * np.cos(4 * np.pi * x + 2 * np.pi * y)))
        V = op.curl2(stream)
        W = SpectralField.from_function(2, N, lambda x, y: (
            np.cos(2 * np.pi * y) + 0.7 * np.sin(2 * np.pi * (x + y))))
    else:
        Vraw = SpectralField(3, N, np.stack([
            SpectralField.from_function(3, N, fn).coef for fn in (
                lambda x, y, z: np.sin(2 * np.pi * y) * np.cos(2 * np.pi * z),
                lambda x, y, z: np.sin(2 * np.pi * z) * np.cos(2 * np.pi * x),
                lambda x, y, z: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y))]))
        V = op.leray_project(Vraw)
        W = SpectralField.from_function(3, N, lambda x, y, z: (
            np.cos(2 * np.pi * z) + 0.5 * np.sin(2 * np.pi * (x + y))))
    e_d = np.zeros(d)
    e_d[-1] = 1.0
    lapV = op.frac_laplacian(V, alpha)
    lapW = op.frac_laplacian(W, alpha)
    VV = op.div(op.outer(V, V))      # mean-free vector
    VW = op.div(op.pmul(W, V))       # mean-free scalar
    buoy = op.tensor_scale(W, e_d)   # theta e_d contribution, as a vector

    zero_v = SpectralField.zeros(d, N, 1)
    zero_s = SpectralField.zeros(d, N, 0)

    def u_at(t):
        return eta(t) * V

    def du_at(t):
        return deta(t) * V

    def th_at(t):
        return eta(t) * W

    def dth_at(t):
        return deta(t) * W

    def p_at(t):
        return zero_s

    def dp_at(t):
        return zero_s

    def R_at(t):
        et, det = float(eta(t)), float(deta(t))
        resid = det * V + et * lapV - et * buoy
        return op.antidiv_sym(resid) + et * et * op.antidiv_sym(VV)

    def dR_at(t):
        # eta is C^infty; second derivative via exact bump chain rule
        h = 1e-6
        det2 = (deta(t + h) - deta(t - h)) / (2 * h)  # eta'' (low rate, FD fine)
        et, det = float(eta(t)), float(deta(t))
        resid = float(det2) * V + det * lapV - det * buoy
        return op.antidiv_sym(resid) + 2 * et * det * op.antidiv_sym(VV)

    def S_at(t):
        et, det = float(eta(t)), float(deta(t))
        return op.antidiv_grad(det * W + et * lapW) + et * et * op.antidiv_grad(VW)

    def dS_at(t):
        h = 1e-6
        det2 = (deta(t + h) - deta(t - h)) / (2 * h)
        et, det = float(eta(t)), float(deta(t))
        return op.antidiv_grad(float(det2) * W + det * lapW) + 2 * et * det * op.antidiv_grad(VW)

    nodes = np.unique(np.concatenate([
        np.linspace(0.0, 1.0, n_nodes), np.linspace(a, b, n_nodes)]))
    mk = TimeField.from_evaluator
    state = ReynoldsState(
        u=mk(nodes, u_at, du_at), theta=mk(nodes, th_at, dth_at),
        p=mk(nodes, p_at, dp_at), R=mk(nodes, R_at, dR_at),
        S=mk(nodes, S_at, dS_at), alpha=alpha, T=1.0,
        support=IntervalSet([support]),
        tau=(support[1] - support[0]) / 5.0)
    return state


def static_initial_state(d: int, N: int, alpha: float, amplitude: float = 0.25,
                         n_nodes: int = 21, tau: float = 0.2) -> ReynoldsState:
    """Time-independent start data with the stresses that make it a solution.

    u is a Taylor-Green-type cellular flow, theta a mean-free low-mode
    scalar; R = antidiv of the momentum residual and S = antidiv of the
    temperature residual, so the relaxed system holds exactly with p = 0.
    """
    if d == 2:
        u0 = SpectralField(2, N, amplitude * np.stack([
            SpectralField.from_function(2, N, lambda x, y:
                                        np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y)).coef,
            SpectralField.from_function(2, N, lambda x, y:
                                        -np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y)).coef]))
        th0 = amplitude * SpectralField.from_function(
            2, N, lambda x, y: np.sin(2 * np.pi * y) + 0.5 * np.cos(2 * np.pi * (x - y)))
    else:
        raw = SpectralField(3, N, amplitude * np.stack([
            SpectralField.from_function(3, N, fn).coef for fn in (
                lambda x, y, z: np.sin(2 * np.pi * x) * np.cos(2 * np.pi * y),
                lambda x, y, z: -np.cos(2 * np.pi * x) * np.sin(2 * np.pi * y),
                lambda x, y, z: np.sin(2 * np.pi * z))]))
        u0 = op.leray_project(raw)
        th0 = amplitude * SpectralField.from_function(
            3, N, lambda x, y, z: np.sin(2 * np.pi * z) + 0.5 * np.cos(2 * np.pi * (x + y)))
    e_d = np.zeros(d)
    e_d[-1] = 1.0
    R0 = op.antidiv_sym(op.frac_laplacian(u0, alpha) + op.div(op.outer(u0, u0))
                        - op.tensor_scale(th0, e_d))
    S0 = op.antidiv_grad(op.frac_laplacian(th0, alpha) + op.div(op.pmul(th0, u0)))
    zero_v = SpectralField.zeros(d, N, 1)
    zero_s = SpectralField.zeros(d, N, 0)

    nodes = np.linspace(0.0, 1.0, n_nodes)
    mk = TimeField.from_evaluator
    return ReynoldsState(
        u=mk(nodes, lambda t: u0, lambda t: zero_v),
        theta=mk(nodes, lambda t: th0, lambda t: zero_s),
        p=mk(nodes, lambda t: zero_s, lambda t: zero_s),
        R=mk(nodes, lambda t: R0, lambda t: R0 * 0.0),
        S=mk(nodes, lambda t: S0, lambda t: zero_v * 0.0),
        alpha=alpha, T=1.0, support=IntervalSet([(0.0, 1.0)]), tau=tau)
