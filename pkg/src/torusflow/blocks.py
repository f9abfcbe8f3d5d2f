"""Building blocks: concentrated stationary pipe flows, intermittent
temporal profiles, and the smooth cutoffs used by the gluing and
perturbation stages.

The common ingredient is the compactly supported bump

    phi(y) = exp(-1/(y(1-y)))    on (0, 1), zero outside,

which is C^infty with all derivatives vanishing at the endpoints.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .fields import SpectralField
from .intervals import IntervalSet
from .operators import inv_laplacian, grad

__all__ = [
    "bump",
    "bump_derivative",
    "smoothstep",
    "smoothstep_derivative",
    "MikadoFlow",
    "build_mikado",
    "TemporalProfile",
    "StressCutoff",
    "TemporalCutoff",
    "GluingCutoffs",
]


# ---------------------------------------------------------------------------
# bump and smoothstep


def bump(y) -> np.ndarray:
    """exp(-1/(y(1-y))) on (0,1), zero elsewhere; not normalized."""
    y = np.asarray(y, dtype=np.float64)
    inside = (y > 0.0) & (y < 1.0)
    ys = np.where(inside, y, 0.5)
    return np.where(inside, np.exp(-1.0 / (ys * (1.0 - ys))), 0.0)


def bump_derivative(y) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    inside = (y > 0.0) & (y < 1.0)
    ys = np.where(inside, y, 0.5)
    # d/dy [-1/(y - y^2)] = (1 - 2y)/(y(1-y))^2
    return np.where(inside, bump(ys) * (1.0 - 2.0 * ys) / (ys * (1.0 - ys)) ** 2, 0.0)


def _zeta(x: np.ndarray) -> np.ndarray:
    pos = x > 0.0
    xs = np.where(pos, x, 1.0)
    return np.where(pos, np.exp(-1.0 / xs), 0.0)


def smoothstep(x) -> np.ndarray:
    """C^infty monotone step: 0 for x<=0, 1 for x>=1."""
    x = np.asarray(x, dtype=np.float64)
    za, zb = _zeta(x), _zeta(1.0 - x)
    return za / (za + zb + 1e-300)


def smoothstep_derivative(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    inside = (x > 0.0) & (x < 1.0)
    xs = np.where(inside, x, 0.5)
    za, zb = _zeta(xs), _zeta(1.0 - xs)
    dza = za / xs**2
    dzb = -zb / (1.0 - xs) ** 2
    s = za + zb
    return np.where(inside, (dza * s - za * (dza + dzb)) / s**2, 0.0)


@lru_cache(maxsize=1)
def _bump_l2() -> float:
    val, _ = quad(lambda y: bump(y) ** 2, 0.0, 1.0, epsabs=1e-15, epsrel=1e-13)
    return float(np.sqrt(val))


# ---------------------------------------------------------------------------
# concentrated pipe flows


@dataclass(frozen=True)
class MikadoFlow:
    """Stationary pipe flow W = Psi e_k concentrated on tubes along k.

    Psi is mean-free with unit L^2 norm and Fourier support orthogonal to k,
    so W is constant along its own direction and div(W (x) W) = 0 exactly.
    Phi solves Laplace(Phi) = Psi; Omega = e (x) grad Phi - grad Phi (x) e
    is the skew potential with div(Omega) = Psi e.
    """

    direction: np.ndarray        # integer k
    unit: np.ndarray             # e_k
    mu: float
    psi: SpectralField           # scalar profile
    phi: SpectralField           # Laplace^{-1} psi
    omega: SpectralField         # skew matrix potential
    psi_sq: SpectralField        # dealiased Psi^2 (zero mode exactly 1)

    def velocity(self) -> SpectralField:
        coef = self.unit.reshape(self.unit.shape + (1,) * self.psi.d) * self.psi.coef[None]
        return SpectralField(self.psi.d, self.psi.N, coef)


def _profile_coeffs(mu: float, n_modes: int, samples: int = 16384) -> np.ndarray:
    """Fourier coefficients c_j, |j| <= n_modes, of the 1-periodic profile
    sqrt(mu) phi(mu s) / ||phi||_2 (unit L^2 over the period)."""
    s = np.arange(samples) / samples
    vals = np.sqrt(mu) * bump(mu * s) / _bump_l2()
    c = np.fft.fft(vals) / samples
    j = np.arange(-n_modes, n_modes + 1)
    return c[j % samples], j


def build_mikado(d: int, N: int, direction: np.ndarray, transverse: np.ndarray,
                 mu: float, filter_order: int | None = 16) -> MikadoFlow:
    """Build a concentrated pipe flow resolvable at resolution N.

    Modes are placed on the integer sublattice orthogonal to the direction,
    spanned by the rows of `transverse`.  A smooth spectral filter (order
    `filter_order`) tapers the profile near the band edge so that products
    computed at resolution N remain alias-clean; pass None to disable.
    """
    direction = np.asarray(direction, dtype=np.int64)
    transverse = np.asarray(transverse, dtype=np.int64)
    unit = direction / np.linalg.norm(direction)
    max_step = int(np.max(np.abs(transverse)))
    j_max = (N // 2 - 1) // max_step
    if mu * 2 > j_max:
        raise ValueError(
            f"concentration mu={mu} not resolvable at N={N} for this direction "
            f"(largest transverse mode multiple is {j_max})")
    c, j = _profile_coeffs(mu, j_max)
    if filter_order is not None:
        c = c * np.exp(-((np.abs(j) / (j_max + 0.5)) ** (2 * filter_order)))
    coef = np.zeros((N,) * d, dtype=np.complex128)
    if d == 2:
        idx = tuple((j[:, None] * transverse[0][None, :]).T % N)
        coef[idx] = c
    else:
        jj1, jj2 = np.meshgrid(j, j, indexing="ij")
        modes = (jj1[..., None] * transverse[0] + jj2[..., None] * transverse[1])
        keep = np.max(np.abs(modes), axis=-1) <= N // 2 - 1
        vals = (c[:, None] * c[None, :])[keep]
        idx = tuple(modes[keep].T % N)
        coef[idx] = vals
    coef[(0,) * d] = 0.0
    psi = SpectralField(d, N, coef)
    nrm = np.sqrt(np.sum(np.abs(psi.coef) ** 2))
    psi = psi / nrm
    phi = inv_laplacian(psi)
    gp = grad(phi)
    om = (unit.reshape((d, 1) + (1,) * d) * gp.coef[None, :]
          - gp.coef[:, None] * unit.reshape((1, d) + (1,) * d))
    omega = SpectralField(d, N, om)
    # exact squared profile: autocorrelation of coefficients, zero mode = 1
    psi_sq = _autocorrelate(psi)
    return MikadoFlow(direction=direction, unit=unit, mu=float(mu), psi=psi,
                      phi=phi, omega=omega, psi_sq=psi_sq)


def _autocorrelate(f: SpectralField) -> SpectralField:
    """f^2 computed alias-free; with unit L^2 norm the zero mode is exactly 1."""
    from .operators import pmul

    out = pmul(f, f)
    # pin the zero mode to the Parseval value to keep P_neq0(f^2) = f^2 - 1 exact
    out.coef[(0,) * f.d] = np.sum(np.abs(f.coef) ** 2)
    return out


def cross_product_field(a: MikadoFlow, b: MikadoFlow) -> SpectralField:
    from .operators import pmul

    return pmul(a.psi, b.psi)


# ---------------------------------------------------------------------------
# temporal intermittency


class TemporalProfile:
    """Periodized concentrated profile g_l(t) = l^{1/2} g(l t) on [0, T).

    g is the normalized bump with integral of g^2 over a period equal to T,
    so ||g_l(nu .)||_{L^2(0,T)} = T^{1/2} for any integer nu, and

        h_l(t) = int_0^t (g_l^2 - 1) ds,   |h_l| <= T,  h_l(T) = 0.
    """

    def __init__(self, l: int, T: float = 1.0):
        if int(l) != l or l < 1:
            raise ValueError("temporal concentration l must be a positive integer")
        self.l = int(l)
        self.T = float(T)
        self._cum = _bump_sq_cumulative()

    # scalar profile and derivatives -------------------------------------
    def g(self, t) -> np.ndarray:
        s = np.mod(np.asarray(t, dtype=np.float64) / self.T, 1.0)
        return np.sqrt(self.l) * bump(self.l * s) / _bump_l2()

    def dg(self, t) -> np.ndarray:
        s = np.mod(np.asarray(t, dtype=np.float64) / self.T, 1.0)
        return self.l ** 1.5 / self.T * bump_derivative(self.l * s) / _bump_l2()

    def h(self, t) -> np.ndarray:
        s = np.mod(np.asarray(t, dtype=np.float64) / self.T, 1.0)
        return self.T * (self._cum(np.minimum(self.l * s, 1.0)) - s)

    def dh(self, t) -> np.ndarray:
        return self.g(t) ** 2 - 1.0

    # norms ---------------------------------------------------------------
    def g_norm(self, p: float, m: int = 0) -> float:
        """||d_t^m g_l||_{L^p(0,T)} from high-accuracy quadrature on the bump."""
        fn = {0: bump, 1: bump_derivative}[m]
        scale = self.l ** (0.5 + m) / (_bump_l2() * self.T**m)
        if np.isinf(p):
            ys = np.linspace(0, 1, 20001)
            return float(scale * np.max(np.abs(fn(ys))))
        val, _ = quad(lambda y: np.abs(fn(y)) ** p, 0.0, 1.0,
                      epsabs=1e-15, epsrel=1e-13, limit=200)
        return float((self.T * self.l ** (-1) * scale**p * val) ** (1.0 / p))

    def recommended_nodes(self, nu: int, per_bump: int = 33,
                          base: int = 65) -> np.ndarray:
        """Quadrature grid resolving the nu bumps of t -> g_l(nu t)."""
        nodes = [np.linspace(0.0, self.T, base)]
        width = self.T / (nu * self.l)
        for m in range(int(nu)):
            start = m * self.T / nu
            nodes.append(np.linspace(start, start + width, per_bump))
            # a few points flanking the bump for the h_l ramp
            nodes.append(start + width * np.array([1.5, 2.0, 3.0]))
        out = np.unique(np.concatenate(nodes))
        return out[(out >= 0.0) & (out <= self.T)]


@lru_cache(maxsize=1)
def _bump_sq_cumulative():
    ys = np.linspace(0.0, 1.0, 40001)
    vals = (bump(ys) / _bump_l2()) ** 2
    cum = np.concatenate([[0.0], np.cumsum((vals[1:] + vals[:-1]) * 0.5 * np.diff(ys))])
    cum /= cum[-1]  # exact unit mass after discretization
    return CubicSpline(ys, cum)


# ---------------------------------------------------------------------------
# cutoffs


class StressCutoff:
    """Monotone C^infty regularizer xi for the amplitude density.

    xi(s) = 2 L1/r0 on [0, L1], 2 s/r0 beyond 2 L1, smoothly interpolated in
    between; consequently s/xi(s) <= r0 pointwise and rho = xi(|(R,S)|) keeps
    the matrix argument of the direction coefficients inside their
    positivity ball.  L1 is the space-time L^1 norm of the combined stress;
    a configurable floor handles the degenerate zero-stress case.
    """

    def __init__(self, l1_norm: float, r0: float, floor: float = 1e-8):
        self.l1 = max(float(l1_norm), float(floor))
        self.r0 = float(r0)

    def __call__(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        w = smoothstep((s - self.l1) / self.l1)
        return (2.0 / self.r0) * (self.l1 * (1.0 - w) + s * w)

    def derivative(self, s) -> np.ndarray:
        s = np.asarray(s, dtype=np.float64)
        w = smoothstep((s - self.l1) / self.l1)
        dw = smoothstep_derivative((s - self.l1) / self.l1) / self.l1
        return (2.0 / self.r0) * (w + dw * (s - self.l1))


class TemporalCutoff:
    """f(t): 1 where dist(t, complement of I) >= 3 tau/2, 0 where <= tau."""

    def __init__(self, support: IntervalSet, tau: float):
        self.support = support
        self.tau = float(tau)

    def __call__(self, t) -> np.ndarray:
        dist = self.support.dist_to_complement(t)
        return smoothstep((dist - self.tau) / (0.5 * self.tau))

    def derivative(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        dist = self.support.dist_to_complement(t)
        ds = smoothstep_derivative((dist - self.tau) / (0.5 * self.tau)) / (0.5 * self.tau)
        # sign of d(dist)/dt: +1 on the left half of an interval, -1 right
        sgn = np.zeros_like(t)
        for a, b in self.support.intervals:
            inside = (t >= a) & (t <= b)
            sgn = np.where(inside, np.where(t - a < b - t, 1.0, -1.0), sgn)
        return ds * sgn


class GluingCutoffs:
    """Partition cutoffs chi_i on [0,T] with nodes t_i = i * spacing.

    chi_i rises on [t_i + tau/2, t_i + tau], is 1 on the interior plateau and
    falls on [t_{i+1} - tau, t_{i+1} - tau/2]; the first cutoff starts at 1
    and the last ends at 1, so sum_i chi_i = 1 away from the nodes.  Supports
    of distinct cutoffs are disjoint.
    """

    def __init__(self, n_intervals: int, spacing: float, tau: float, T: float):
        if tau >= spacing / 4:
            raise ValueError("cutoff width tau must be < spacing/4")
        self.n = int(n_intervals)
        self.spacing = float(spacing)
        self.tau = float(tau)
        self.T = float(T)

    def t_node(self, i: int) -> float:
        return i * self.spacing

    def chi(self, i: int, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        lo, hi = self.t_node(i), self.t_node(i + 1)
        rise = (smoothstep((t - lo - 0.5 * self.tau) / (0.5 * self.tau))
                if i > 0 else np.where(t >= lo - 1e-15, 1.0, 0.0))
        fall = (smoothstep((hi - 0.5 * self.tau - t) / (0.5 * self.tau))
                if i < self.n - 1 else np.where(t <= hi + 1e-15, 1.0, 0.0))
        return rise * fall

    def dchi(self, i: int, t) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        lo, hi = self.t_node(i), self.t_node(i + 1)
        out = np.zeros_like(t)
        if i > 0:
            out = out + smoothstep_derivative((t - lo - 0.5 * self.tau) / (0.5 * self.tau)) / (0.5 * self.tau)
        if i < self.n - 1:
            # product rule is trivial: rise and fall transitions never overlap
            out = out - smoothstep_derivative((hi - 0.5 * self.tau - t) / (0.5 * self.tau)) / (0.5 * self.tau)
        return out

    def active_index(self, t: float) -> int | None:
        """Index i with chi_i(t) > 0, or None (supports are disjoint)."""
        i = int(np.floor(t / self.spacing))
        for j in (i - 1, i, i + 1):
            if 0 <= j < self.n and self.chi(j, float(t)) > 0.0:
                return j
        return None
