"""Fourier-multiplier calculus and dealiased pointwise products.

All operators act on `SpectralField`s and are exact on band-limited fields:
derivatives, fractional Laplacian, Leray projection, antidivergence
operators and the bilinear commutator forms all reduce to algebra on the
coefficient arrays.  Pointwise products are evaluated on a zero-padded grid
(2x by default) and truncated back, so products of fields whose combined
bandwidth fits in the working band are exact.
"""

from __future__ import annotations

import numpy as np

from .fields import SpectralField, mode_grid, wavevectors

__all__ = [
    "grad",
    "div",
    "curl2",
    "frac_laplacian",
    "inv_laplacian",
    "leray_project",
    "nonzero_modes",
    "antidiv_sym",
    "antidiv_grad",
    "bilinear_antidiv",
    "bilinear_antidiv_scalar",
    "pmul",
    "outer",
    "dot",
    "matvec",
    "tensor_scale",
]


def _ik(f: SpectralField) -> np.ndarray:
    return 1j * wavevectors(f.d, f.N)


# ---------------------------------------------------------------------------
# derivatives


def grad(f: SpectralField) -> SpectralField:
    """Gradient: scalar -> vector; vector v -> matrix with [i,j] = d_j v_i."""
    ik = _ik(f)
    if f.rank == 0:
        return SpectralField(f.d, f.N, ik * f.coef[None])
    if f.rank == 1:
        return SpectralField(f.d, f.N, f.coef[:, None] * ik[None, :])
    raise ValueError("grad supports rank 0 and 1")


def div(f: SpectralField) -> SpectralField:
    """Divergence: vector -> scalar; matrix M -> vector with d_j M_ij."""
    ik = _ik(f)
    if f.rank == 1:
        return SpectralField(f.d, f.N, np.sum(ik * f.coef, axis=0))
    if f.rank == 2:
        return SpectralField(f.d, f.N, np.sum(ik[None, :] * f.coef, axis=1))
    raise ValueError("div supports rank 1 and 2")


def curl2(f: SpectralField) -> SpectralField:
    """Perpendicular gradient of a 2-d scalar stream function."""
    if f.d != 2 or f.rank != 0:
        raise ValueError("curl2 takes a 2-d scalar")
    ik = _ik(f)
    return SpectralField(2, f.N, np.stack([-ik[1] * f.coef, ik[0] * f.coef]))


def frac_laplacian(f: SpectralField, alpha: float) -> SpectralField:
    """(-Laplace)^alpha as the multiplier |2 pi n|^(2 alpha); kills the mean."""
    k2 = np.sum(wavevectors(f.d, f.N) ** 2, axis=0)
    mult = np.zeros_like(k2)
    nz = k2 > 0
    mult[nz] = k2[nz] ** alpha
    return SpectralField(f.d, f.N, f.coef * mult)


def inv_laplacian(f: SpectralField) -> SpectralField:
    """Zero-mean inverse Laplacian (the zero mode is discarded)."""
    k2 = np.sum(wavevectors(f.d, f.N) ** 2, axis=0)
    mult = np.zeros_like(k2)
    nz = k2 > 0
    mult[nz] = -1.0 / k2[nz]
    return SpectralField(f.d, f.N, f.coef * mult)


def leray_project(v: SpectralField) -> SpectralField:
    """Divergence-free projection Id - n n^T/|n|^2 per mode (mean kept)."""
    if v.rank != 1:
        raise ValueError("Leray projection takes a vector field")
    k = wavevectors(v.d, v.N)
    k2 = np.sum(k * k, axis=0)
    k2s = np.where(k2 > 0, k2, 1.0)
    kdotv = np.sum(k * v.coef, axis=0)
    out = v.coef - np.where(k2 > 0, kdotv / k2s, 0.0)[None] * k
    return SpectralField(v.d, v.N, out)


def nonzero_modes(f: SpectralField) -> SpectralField:
    """Remove the spatial mean of every component."""
    out = f.coef.copy()
    out[(Ellipsis,) + (0,) * f.d] = 0.0
    return SpectralField(f.d, f.N, out)


# ---------------------------------------------------------------------------
# antidivergence operators


def antidiv_sym(v: SpectralField) -> SpectralField:
    """Symmetric matrix potential R with div(R) = v - mean(v).

    Per mode solves M a = b for symmetric M of minimal Frobenius norm,
    where a = i 2 pi n and b is the coefficient of v:

        M = (a b^T + b a^T)/(a.a) - (a.b) a a^T/(a.a)^2.
    """
    if v.rank != 1:
        raise ValueError("antidiv_sym takes a vector field")
    d, N = v.d, v.N
    a = 1j * wavevectors(d, N)  # (d, grid)
    b = v.coef
    aa = np.sum(a * a, axis=0)  # -(2 pi |n|)^2, real negative
    aas = np.where(np.abs(aa) > 0, aa, 1.0)
    ab = np.sum(a * b, axis=0)
    M = (a[:, None] * b[None, :] + b[:, None] * a[None, :]) / aas \
        - (ab / aas**2)[None, None] * (a[:, None] * a[None, :])
    M[(Ellipsis,) + (0,) * d] = 0.0
    return SpectralField(d, N, M)


def antidiv_grad(f: SpectralField) -> SpectralField:
    """Gradient potential G f = grad(invLaplace(f)); div(Gf) = f - mean(f)."""
    if f.rank != 0:
        raise ValueError("antidiv_grad takes a scalar field")
    return grad(inv_laplacian(f))


# ---------------------------------------------------------------------------
# pointwise products (dealiased by zero padding)


def _occupied_band(f: SpectralField) -> int:
    """Largest |n|_inf over modes carrying any coefficient mass."""
    mag = np.abs(f.coef).reshape((-1,) + (f.N,) * f.d).max(axis=0)
    support = np.flatnonzero(mag.ravel() > 1e-300)
    if support.size == 0:
        return 0
    modes = mode_grid(f.d, f.N).reshape(f.d, -1)[:, support]
    return int(np.max(np.abs(modes)))


def _product(d: int, N: int, spec: str, a: SpectralField, b: SpectralField,
             pad: int = 2) -> SpectralField:
    # evaluation grid sized from the occupied bands: any alias source n has
    # |n| <= ba + bb and lands at n - M, which misses the retained band
    # whenever M > ba + bb + bk, so the kept coefficients are exact
    ba, bb = _occupied_band(a), _occupied_band(b)
    bk = min(N // 2 - 1, ba + bb)
    M = min(pad * N, 2 * ((ba + bb + bk) // 2 + 1))
    va = a.values(M)
    vb = b.values(M)
    out = np.einsum(spec, va, vb)
    return SpectralField.from_values(d, M, out).resample(N)


def pmul(a: SpectralField, b: SpectralField, pad: int = 2) -> SpectralField:
    """Pointwise product where at least one factor is scalar."""
    if a.rank > 0 and b.rank > 0:
        raise ValueError("pmul needs a scalar factor; use outer/dot/matvec")
    if a.rank > 0:
        a, b = b, a
    sub = "abcd"[: b.rank]
    return _product(a.d, a.N, f"...,{sub}...->{sub}...", a, b)


def outer(u: SpectralField, v: SpectralField) -> SpectralField:
    """Tensor product of two vectors: (u outer v)_ij = u_i v_j."""
    return _product(u.d, u.N, "i...,j...->ij...", u, v)


def dot(u: SpectralField, v: SpectralField) -> SpectralField:
    """Pointwise contraction over all shared component axes."""
    if u.rank != v.rank or u.rank not in (1, 2):
        raise ValueError("dot contracts two vectors or two matrices")
    spec = "i...,i...->..." if u.rank == 1 else "ij...,ij...->..."
    return _product(u.d, u.N, spec, u, v)


def matvec(m: SpectralField, v: SpectralField) -> SpectralField:
    """Pointwise matrix-vector product (M v)_i = M_ij v_j."""
    return _product(m.d, m.N, "ij...,j...->i...", m, v)


def tensor_scale(f: SpectralField, direction: np.ndarray) -> SpectralField:
    """Multiply a scalar field by a constant vector or matrix."""
    direction = np.asarray(direction, dtype=np.float64)
    shape = direction.shape + (1,) * f.d
    return SpectralField(f.d, f.N, direction.reshape(shape) * f.coef[None if direction.ndim == 1 else (None, None)])


# ---------------------------------------------------------------------------
# bilinear antidivergence forms


def bilinear_antidiv(v: SpectralField, A: SpectralField) -> SpectralField:
    """Symmetric matrix B with div(B) = A v - mean(A v), A mean-free.

    Composition form: columns of A get a symmetric potential via antidiv_sym,
    contracted against v, with the gradient correction re-absorbed:

        B = sum_j v_j R(A_:,j) - R(sum_jm d_m v_j R(A_:,j)_im).

    The gain over antidiv_sym(A v) is that an oscillatory A only enters
    through its (small) potential.
    """
    if v.rank != 1 or A.rank != 2:
        raise ValueError("bilinear_antidiv takes (vector, matrix)")
    d, N = v.d, v.N
    # T[i, m, j] = R(A[:, j])_{im}
    T = np.stack([antidiv_sym(SpectralField(d, N, A.coef[:, j])).coef
                  for j in range(d)], axis=2)
    Tf = SpectralField(d, N, T)
    term1 = _product(d, N, "j...,imj...->im...", v, Tf)
    gv = grad(v)  # gv[j, m] = d_m v_j
    w = _product(d, N, "jm...,imj...->i...", gv, Tf)
    return term1 - antidiv_sym(w)


def bilinear_antidiv_scalar(f: SpectralField, g: SpectralField) -> SpectralField:
    """Vector b with div(b) = f g - mean(f g), for mean-free g.

        b = f G(g) - G(grad(f) . G(g)).
    """
    if f.rank != 0 or g.rank != 0:
        raise ValueError("bilinear_antidiv_scalar takes two scalars")
    Gg = antidiv_grad(g)
    term1 = pmul(f, Gg)
    w = dot(grad(f), Gg)
    return term1 - antidiv_grad(w)
