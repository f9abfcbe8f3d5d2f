"""The perturbation step: add concentrated pipe flows with geometric
amplitudes so that the new pair of stresses accounts for the equation error
of the perturbed fields exactly (to rounding), term by term."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .fields import SpectralField, TimeField, lq_norm
from .state import ReynoldsState, stress_l1_norm
from .geometry import build_direction_family, DirectionFamily
from .blocks import build_mikado, TemporalProfile, StressCutoff, TemporalCutoff
from .params import IterationParams
from . import operators as op

__all__ = ["perturb"]


def _directional_derivative(f: SpectralField, e: np.ndarray) -> SpectralField:
    from .fields import wavevectors

    k = wavevectors(f.d, f.N)
    ik_e = 1j * np.einsum("i,i...->...", np.asarray(e, float), k)
    return SpectralField(f.d, f.N, ik_e * f.coef)


def _build_flows(d: int, N: int, sigma: int, mu: float,
                 fam: DirectionFamily) -> list[dict]:
    """Pipe flows built at a reduced band so the sigma-dilation fits at N."""
    band = (N // 2 - 1) // sigma
    Nb = 2 * band + 2
    flows = []
    for k in range(fam.size):
        flow = build_mikado(d, Nb, fam.directions[k], fam.transverse[k], mu)
        psi = flow.psi.resample(N).dilate(sigma)
        omega = flow.omega.resample(N).dilate(sigma)
        psi_sq = flow.psi_sq.resample(N).dilate(sigma)
        flows.append({
            "unit": fam.units[k],
            "psi": psi,
            "omega": omega,
            "psi_sq": psi_sq,
            "osc": op.nonzero_modes(psi_sq),
        })
    return flows


def perturb(state: ReynoldsState, params: IterationParams,
            rho_floor: float = 1e-8,
            nodes: np.ndarray | None = None) -> tuple[ReynoldsState, dict]:
    """One convex-integration round.

    Returns the perturbed state together with a report of the stress terms.
    The perturbation vanishes outside the temporal support of the input
    state, the velocity correction is exactly divergence free and mean free,
    and the residual of the new state against its own stresses matches the
    residual of the input state to rounding.
    """
    d, N, alpha, T = state.d, state.N, state.alpha, state.T
    if params.d != d:
        raise ValueError("parameter dimension does not match the state")
    nu, l, sigma, mu = params.nu, params.l, params.sigma, params.mu

    l1 = stress_l1_norm(state)
    if l1 < rho_floor:
        return state, {"skipped": True, "stress_l1": l1}

    fam = build_direction_family(d)
    flows = _build_flows(d, N, sigma, mu, fam)
    K = fam.size
    units = fam.units
    g_id = np.einsum("kij,ij->k", fam.weights, np.eye(d))

    xi = StressCutoff(l1, fam.r0, floor=rho_floor)
    cut = TemporalCutoff(state.support, state.tau)
    prof = TemporalProfile(l, T=1.0)

    e_d = np.zeros(d)
    e_d[-1] = 1.0

    # -- per-time building blocks -----------------------------------------

    @lru_cache(maxsize=4)
    def bundle(t: float) -> dict:
        R = state.R.at(t)
        S = state.S.at(t)
        dR = state.R.dt_at(t)
        dS = state.S.dt_at(t)
        Rv, Sv = R.values(), S.values()
        dRv, dSv = dR.values(), dS.values()

        s = np.sqrt(np.sum(Rv * Rv, axis=(0, 1)) + np.sum(Sv * Sv, axis=0))
        sdot = (np.sum(Rv * dRv, axis=(0, 1)) + np.sum(Sv * dSv, axis=0)) \
            / np.maximum(s, 1e-300)
        rho = xi(s)
        drho = xi.derivative(s) * sdot

        gam_r = np.einsum("kij,ij...->k...", fam.weights, Rv)
        gam_dr = np.einsum("kij,ij...->k...", fam.weights, dRv)
        pk = np.einsum("ki,i...->k...", fam.dual, Sv)
        dpk = np.einsum("ki,i...->k...", fam.dual, dSv)

        ck = g_id.reshape((K,) + (1,) * d) - gam_r / rho
        if np.min(ck) < fam.c0_sq * (1.0 - 1e-9):
            raise RuntimeError("direction coefficients left the positivity ball")
        dck = (-gam_dr + gam_r * drho / rho) / rho

        f = float(cut(t))
        df = float(cut.derivative(t))
        g = float(prof.g(nu * t))
        dg = nu * float(prof.dg(nu * t))
        h = float(prof.h(nu * t))
        G = g * f
        dG = dg * f + g * df

        prod = rho * ck
        sq = np.sqrt(prod)
        dprod = drho * ck + rho * dck
        a_vals = G * sq
        da_vals = dG * sq + G * dprod / (2.0 * sq)
        b_vals = -G * pk / sq
        db_vals = -dG * pk / sq - G * dpk / sq \
            + G * pk * dprod / (2.0 * prod * sq)

        out = {
            "R": R, "S": S, "dR": dR, "dS": dS,
            "f": f, "g": g, "h": h,
            "rho": SpectralField.from_values(d, N, rho),
            "a": [], "da": [], "w": [], "v": [], "dw": [], "dv": [],
            "A2": [], "AB": [], "ga": [], "dga": [],
        }
        for k in range(K):
            a = SpectralField.from_values(d, N, a_vals[k])
            da = SpectralField.from_values(d, N, da_vals[k])
            b = SpectralField.from_values(d, N, b_vals[k])
            db = SpectralField.from_values(d, N, db_vals[k])
            psi = flows[k]["psi"]
            out["a"].append(a)
            out["da"].append(da)
            out["w"].append(op.pmul(a, psi))
            out["v"].append(op.pmul(b, psi))
            out["dw"].append(op.pmul(da, psi))
            out["dv"].append(op.pmul(db, psi))
            out["A2"].append(op.pmul(a, a))
            out["AB"].append(op.pmul(a, b))
            out["ga"].append(op.grad(a))
            out["dga"].append(op.grad(da))
        return out

    def _vec(parts) -> SpectralField:
        coef = np.zeros((d,) + (N,) * d, dtype=np.complex128)
        for scal, e in parts:
            coef += e.reshape((d,) + (1,) * d) * scal.coef[None]
        return SpectralField(d, N, coef)

    def _mat(parts) -> SpectralField:
        coef = np.zeros((d, d) + (N,) * d, dtype=np.complex128)
        for scal, e1, e2 in parts:
            coef += np.outer(e1, e2).reshape((d, d) + (1,) * d) * scal.coef[None, None]
        return SpectralField(d, N, coef)

    @lru_cache(maxsize=4)
    def velocity_parts(t: float):
        B = bundle(t)
        wp = _vec([(B["w"][k], units[k]) for k in range(K)])
        wc = sum((op.matvec(flows[k]["omega"], B["ga"][k]) for k in range(K)),
                 start=SpectralField.zeros(d, N, 1)) / float(sigma)
        dwp = _vec([(B["dw"][k], units[k]) for k in range(K)])
        dwc = sum((op.matvec(flows[k]["omega"], B["dga"][k]) for k in range(K)),
                  start=SpectralField.zeros(d, N, 1)) / float(sigma)
        ldr = op.leray_project(op.div(B["R"]))
        wt = ldr * (B["h"] / nu)
        dwt = ldr * (B["g"] ** 2 - 1.0) \
            + op.leray_project(op.div(B["dR"])) * (B["h"] / nu)
        return wp, wc, wt, dwp, dwc, dwt

    def _scalar_sum(fields) -> SpectralField:
        coef = np.zeros((N,) * d, dtype=np.complex128)
        for f in fields:
            coef += f.coef
        return SpectralField(d, N, coef)

    @lru_cache(maxsize=4)
    def temperature_parts(t: float):
        B = bundle(t)
        kp = op.nonzero_modes(_scalar_sum(B["v"]))
        dkp = op.nonzero_modes(_scalar_sum(B["dv"]))
        dvS = op.div(B["S"])
        kt = dvS * (B["h"] / nu)
        dkt = dvS * (B["g"] ** 2 - 1.0) + op.div(B["dS"]) * (B["h"] / nu)
        return kp, kt, dkp, dkt

    def u_new(t: float) -> SpectralField:
        wp, wc, wt, *_ = velocity_parts(t)
        return state.u.at(t) + wp + wc + wt

    def du_new(t: float) -> SpectralField:
        _, _, _, dwp, dwc, dwt = velocity_parts(t)
        return state.u.dt_at(t) + dwp + dwc + dwt

    def th_new(t: float) -> SpectralField:
        kp, kt, *_ = temperature_parts(t)
        return state.theta.at(t) + kp + kt

    def dth_new(t: float) -> SpectralField:
        _, _, dkp, dkt = temperature_parts(t)
        return state.theta.dt_at(t) + dkp + dkt

    def p_new(t: float) -> SpectralField:
        B = bundle(t)
        f2g2 = (B["f"] * B["g"]) ** 2
        ddR = op.inv_laplacian(op.div(op.div(B["R"])))
        ddRt = op.inv_laplacian(op.div(op.div(B["dR"])))
        return state.p.at(t) - B["rho"] * f2g2 \
            - ddR * (1.0 - B["g"] ** 2) + ddRt * (B["h"] / nu)

    def stress_terms(t: float) -> dict[str, SpectralField]:
        B = bundle(t)
        wp, wc, wt, dwp, dwc, _ = velocity_parts(t)
        kp, kt, _, _ = temperature_parts(t)
        omega = wp + wc + wt
        kappa = kp + kt
        f2g2 = (B["f"] * B["g"]) ** 2
        prep = B["g"] ** 2 * (1.0 - B["f"] ** 2)

        D = {}
        for k in range(K):
            for kk in range(k, K):
                D[(k, kk)] = op.pmul(B["w"][k], B["w"][kk])

        far_in = _mat([(D[(k, kk)], units[k], units[kk])
                       for k in range(K) for kk in range(k + 1, K)])
        far_in = far_in + _mat([(D[(k, kk)], units[kk], units[k])
                                for k in range(K) for kk in range(k + 1, K)])
        R_far = op.antidiv_sym(op.div(far_in))

        eps_in = _mat([(D[(k, k)] - op.pmul(B["A2"][k], flows[k]["psi_sq"]),
                        units[k], units[k]) for k in range(K)])
        R_eps = op.antidiv_sym(op.div(eps_in))

        R_oscx = SpectralField.zeros(d, N, 2)
        for k in range(K):
            osc_mat = SpectralField(
                d, N,
                np.outer(units[k], units[k]).reshape((d, d) + (1,) * d)
                * flows[k]["osc"].coef[None, None])
            R_oscx = R_oscx + op.bilinear_antidiv(op.grad(B["A2"][k]), osc_mat)

        delta = _mat([(B["A2"][k], units[k], units[k]) for k in range(K)])
        iden = SpectralField(
            d, N, np.eye(d).reshape((d, d) + (1,) * d)
            * B["rho"].coef[None, None])
        delta = delta - (iden - B["R"]) * f2g2
        R_delta = op.antidiv_sym(op.div(delta))

        R_prep = op.antidiv_sym(op.div(B["R"])) * prep
        R_osct = B["dR"] * (B["h"] / nu)
        R_cor = op.antidiv_sym(op.div(
            op.outer(wc + wt, omega) + op.outer(wp, wc + wt)))
        R_lin = op.antidiv_sym(
            dwp + dwc + op.frac_laplacian(omega, alpha)
            + op.div(op.outer(state.u.at(t), omega)
                     + op.outer(omega, state.u.at(t)))
            - op.tensor_scale(kappa, e_d))

        # temperature stress
        C = {(k, kk): op.pmul(B["v"][k], B["w"][kk])
             for k in range(K) for kk in range(K)}
        S_far = _vec([(C[(k, kk)], units[kk])
                      for k in range(K) for kk in range(K) if k != kk])
        S_eps = _vec([(C[(k, k)] - op.pmul(B["AB"][k], flows[k]["psi_sq"]),
                       units[k]) for k in range(K)])
        S_oscx = SpectralField.zeros(d, N, 1)
        for k in range(K):
            f_dir = _directional_derivative(B["AB"][k], units[k])
            S_oscx = S_oscx + op.bilinear_antidiv_scalar(f_dir, flows[k]["osc"])
        S_delta = _vec([(B["AB"][k], units[k]) for k in range(K)]) \
            + B["S"] * f2g2
        S_prep = op.antidiv_grad(op.div(B["S"])) * prep
        S_osct = B["dS"] * (B["h"] / nu)
        kp_raw = _scalar_sum(B["v"])
        S_cor = op.antidiv_grad(op.div(
            op.pmul(kt, omega) + op.pmul(kp_raw, wc + wt)))
        dkp = op.nonzero_modes(_scalar_sum(B["dv"]))
        S_lin = op.antidiv_grad(
            dkp + op.frac_laplacian(kappa, alpha)
            + op.div(op.pmul(kappa, state.u.at(t))
                     + op.pmul(state.theta.at(t), omega)))

        return {
            "R_far": R_far, "R_eps": R_eps, "R_oscx": R_oscx,
            "R_delta": R_delta, "R_prep": R_prep, "R_osct": R_osct,
            "R_cor": R_cor, "R_lin": R_lin,
            "S_far": S_far, "S_eps": S_eps, "S_oscx": S_oscx,
            "S_delta": S_delta, "S_prep": S_prep, "S_osct": S_osct,
            "S_cor": S_cor, "S_lin": S_lin,
        }

    @lru_cache(maxsize=4)
    def stresses(t: float) -> tuple[SpectralField, SpectralField]:
        terms = stress_terms(t)
        Rn = SpectralField.zeros(d, N, 2)
        Sn = SpectralField.zeros(d, N, 1)
        for name, fld in terms.items():
            if name.startswith("R_"):
                Rn = Rn + fld
            else:
                Sn = Sn + fld
        return Rn, Sn

    def R_new(t: float) -> SpectralField:
        return stresses(t)[0]

    def S_new(t: float) -> SpectralField:
        return stresses(t)[1]

    # -- assemble the new state --------------------------------------------

    if nodes is None:
        nodes = np.union1d(np.asarray(state.u.nodes),
                           prof.recommended_nodes(nu))
    nodes = np.asarray(nodes, dtype=np.float64)

    new = ReynoldsState(
        u=TimeField.from_evaluator(nodes, u_new, du_new),
        theta=TimeField.from_evaluator(nodes, th_new, dth_new),
        p=TimeField.from_evaluator(nodes, p_new),
        R=TimeField.from_evaluator(nodes, R_new),
        S=TimeField.from_evaluator(nodes, S_new),
        alpha=alpha, T=T, support=state.support, tau=state.tau)

    # report at the time of largest input stress
    def _mag(t):
        t = float(t)
        return float(np.max(np.abs(state.R.at(t).coef))
                     + np.max(np.abs(state.S.at(t).coef)))

    def _probe_weight(t):
        return abs(float(prof.g(nu * float(t))) * float(cut(float(t)))) * _mag(t)

    probe = float(max(nodes, key=_probe_weight))
    if _probe_weight(probe) == 0.0:
        probe = float(max(nodes, key=_mag))
    terms = stress_terms(probe)
    wp, wc, wt, *_ = velocity_parts(probe)
    kp, kt, _, _ = temperature_parts(probe)
    report = {
        "skipped": False,
        "stress_l1": l1,
        "probe_time": probe,
        "term_norms": {k: lq_norm(v, 2) for k, v in terms.items()},
        "perturbation_u": lq_norm(wp + wc + wt, 2),
        "perturbation_theta": lq_norm(kp + kt, 2),
        "div_defect": lq_norm(op.div(wp + wc), 2),
        "kappa_mean": float(np.max(np.abs((kp + kt).mean()))),
        "params": {"nu": nu, "l": l, "sigma": sigma, "mu": mu},
    }
    return new, report
