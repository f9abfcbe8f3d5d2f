"""Parameter schedule for the intermittent perturbation step.

Given a base frequency lambda the schedule fixes the temporal oscillation
nu, the temporal concentration l, the spatial oscillation sigma and the
spatial concentration mu as powers of lambda.  Two regimes are covered:

* supercritical dissipation 1 < alpha < (d+1)/2  ("case A"), and
* the classical Laplacian alpha = 1               ("case B").

`feasible_beta` searches a dyadic grid for the largest exponent beta
compatible with the regime's constraints; `check_inequalities` certifies
the five smallness inequalities the error estimates rest on, plus the
extra one used for the dissipative term when alpha > 1.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["Schedule", "IterationParams", "feasible_beta", "build_params",
           "check_inequalities", "exponent_identities"]

_EPS_P2 = 1e-9  # case B provably needs p < 2


@dataclass(frozen=True)
class Schedule:
    """Exponents of lambda for (nu, l, sigma, mu)."""

    d: int
    alpha: float
    p: float
    q: float
    beta: float
    r: float
    nu_exp: float
    l_exp: float
    sigma_exp: float
    mu_exp: float = 1.0

    def realize(self, lam: float) -> dict:
        return {
            "nu": lam**self.nu_exp,
            "l": lam**self.l_exp,
            "sigma": lam**self.sigma_exp,
            "mu": lam**self.mu_exp,
        }


def _case_a_exponents(d: int, alpha: float, beta: float) -> tuple[float, float]:
    slope = 6.0 + 5.0 / (alpha - 1.0)
    l_exp = (2.0 * alpha / (2.0 * alpha - 2.0)) * (d - 1) - slope * beta
    sigma_exp = (d - 1) / (2.0 * alpha - 2.0) - 1.0 - 5.0 * beta / (2.0 * alpha - 2.0)
    return l_exp, sigma_exp


def _case_a_feasible(d: int, alpha: float, p: float, q: float, beta: float) -> bool:
    l_exp, sigma_exp = _case_a_exponents(d, alpha, beta)
    slope = 6.0 + 5.0 / (alpha - 1.0)
    hp = 0.5 - 1.0 / p
    c1 = hp * (2.0 * alpha / (2.0 * alpha - 2.0)) * (d - 1) + (d - 1) / 2.0 \
        - hp * slope * beta
    c2 = -(0.5 - (2.0 * alpha - 1.0) / (2.0 * alpha)) * slope * beta - (d - 1) / q
    return (c1 < -beta and c2 < -beta and l_exp > 2.0 * beta
            and sigma_exp > 2.0 * beta)


def _case_b_l_exp(d: int, p: float, beta: float) -> float:
    return max(2.0, (d - 1 + 2.0 * beta) / (2.0 * (1.0 / p - 0.5)))


def feasible_beta(d: int, alpha: float, p: float, q: float,
                  resolution: int = 1 << 12) -> float:
    """Largest beta on the dyadic grid {m / resolution} meeting the regime
    constraints; raises if none exists."""
    if alpha == 1.0:
        if p >= 2.0 - _EPS_P2:
            raise ValueError("the alpha=1 schedule requires p < 2")
        beta_max = (d - 1) / 10.0
        grid = np.arange(1, int(np.floor(beta_max * resolution)) + 1)
        feas = grid[10.0 * grid / resolution < d - 1]
        if len(feas) == 0:
            raise ValueError("no feasible beta for the alpha=1 regime")
        return float(feas[-1] / resolution)
    if not 1.0 < alpha < (d + 1) / 2.0:
        raise ValueError(f"alpha={alpha} outside (1, (d+1)/2) for d={d}")
    for m in range(resolution, 0, -1):
        beta = m / resolution
        if _case_a_feasible(d, alpha, p, q, beta):
            return beta
    raise ValueError("no feasible beta on the dyadic grid")


@dataclass
class IterationParams:
    """Realized parameters at a given lambda, with integer rounding.

    Rounding is half-up to integers for (nu, l, sigma, mu); `caps`, when
    given, clamp the realized values to resolvable desk-scale magnitudes
    (the analytic identities hold for any positive values; the schedule
    governs asymptotic smallness only).
    """

    d: int
    alpha: float
    p: float
    q: float
    lam: float
    beta: float
    r: float
    nu: int
    l: int
    sigma: int
    mu: float
    schedule: Schedule
    capped: dict = field(default_factory=dict)


def build_params(d: int, alpha: float, p: float, q: float, lam: float,
                 beta: float | None = None, caps: dict | None = None) -> IterationParams:
    if beta is None:
        beta = feasible_beta(d, alpha, p, q)
    r = d / (d - beta / 2.0)
    if alpha == 1.0:
        l_exp = _case_b_l_exp(d, p, beta)
        sched = Schedule(d, alpha, p, q, beta, r, nu_exp=beta, l_exp=l_exp,
                         sigma_exp=0.0, mu_exp=1.0)
        vals = sched.realize(lam)
        # sigma couples to l and mu rather than plain powers of lambda
        vals["sigma"] = np.sqrt(vals["l"]) * lam ** (-1.0 + 2.0 * beta)
    else:
        l_exp, sigma_exp = _case_a_exponents(d, alpha, beta)
        sched = Schedule(d, alpha, p, q, beta, r, nu_exp=beta, l_exp=l_exp,
                         sigma_exp=sigma_exp, mu_exp=1.0)
        vals = sched.realize(lam)
    capped = {}
    if caps:
        for key in ("nu", "l", "sigma", "mu"):
            cap = caps.get(key)
            if cap is not None and vals[key] > cap:
                capped[key] = vals[key]
                vals[key] = float(cap)
    def round_half_up(x: float) -> int:
        return int(np.floor(x + 0.5))

    nu = max(1, round_half_up(vals["nu"]))
    l = max(2, round_half_up(vals["l"]))
    sigma = max(1, round_half_up(vals["sigma"]))
    return IterationParams(d=d, alpha=alpha, p=p, q=q, lam=lam, beta=beta, r=r,
                           nu=nu, l=l, sigma=sigma, mu=vals["mu"],
                           schedule=sched, capped=capped)


def check_inequalities(params: IterationParams,
                       use_rounded: bool = False) -> dict[str, tuple[float, float, bool]]:
    """The smallness inequalities: each entry is (lhs, rhs, lhs <= rhs).

    By default the scheduled real values are used (rounding is a separate
    desk-scale concession that `use_rounded=True` re-verifies).
    """
    d, alpha, p, q = params.d, params.alpha, params.p, params.q
    lam, beta, r = params.lam, params.beta, params.r
    if use_rounded:
        nu, l, sigma, mu = params.nu, params.l, params.sigma, params.mu
    else:
        vals = params.schedule.realize(lam)
        nu, l, sigma, mu = vals["nu"], vals["l"], vals["sigma"], vals["mu"]
        if alpha == 1.0:
            sigma = np.sqrt(l) * lam ** (-1.0 + 2.0 * beta)
    rhs = lam**-beta
    out = {}
    out["perturbation_size"] = (l ** (0.5 - 1.0 / p) * mu ** ((d - 1) / 2.0), rhs)
    out["time_derivative"] = (
        (nu * l) / sigma * l**-0.5 * mu ** (-1.0 + (d - 1) / 2.0 - (d - 1) / r), rhs)
    out["dissipative"] = (
        l**-0.5 * (sigma * mu) ** (2.0 * alpha - 1.0) * mu ** ((d - 1) / 2.0 - (d - 1) / r),
        rhs)
    out["spatial_oscillation"] = (sigma**-1.0 * mu ** (d - 1 - (d - 1) / r), rhs)
    out["temporal_oscillation"] = (l**-0.5, rhs)
    if alpha > 1.0:
        out["dissipative_lq"] = (
            l ** (0.5 - (2.0 * alpha - 1.0) / (2.0 * alpha))
            * mu ** ((d - 1) / 2.0 - (d - 1) / q), rhs)
    return {k: (float(a), float(b), bool(a <= b * (1 + 1e-12))) for k, (a, b) in out.items()}


def exponent_identities(d: int, alpha: float, beta: float) -> dict[str, tuple[float, float]]:
    """Two exact exponent identities behind the case-A budget: both sides
    must equal -2*beta identically in (d, alpha, beta)."""
    l_exp, sigma_exp = _case_a_exponents(d, alpha, beta)
    lhs_time = -sigma_exp + beta + 0.5 * l_exp - 1.0 - (d - 1) / 2.0
    lhs_diss = -0.5 * l_exp + (sigma_exp + 1.0) * (2.0 * alpha - 1.0) - (d - 1) / 2.0
    return {"time_derivative": (lhs_time, -2.0 * beta),
            "dissipative": (lhs_diss, -2.0 * beta)}
