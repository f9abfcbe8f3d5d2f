import numpy as np
import pytest

import torusflow.operators as op
from torusflow.fields import SpectralField, lq_norm
from torusflow.testing import random_field, random_divfree

CASES = [(2, 32), (3, 16)]


def _rel(err, scale):
    return err / max(scale, 1e-300)


@pytest.fixture(scope="module")
def rng():
    return np.random.default_rng(11)


@pytest.mark.parametrize("d,N", CASES)
def test_grad_div_adjointish(d, N, rng):
    # div(grad f) = Laplacian f; Laplacian of a single mode is -|2 pi n|^2
    f = random_field(rng, d, N, rank=0)
    lap = op.div(op.grad(f))
    back = op.inv_laplacian(lap)
    want = op.nonzero_modes(f)
    assert _rel(lq_norm(back - want, 2), lq_norm(f, 2)) < 1e-12


@pytest.mark.parametrize("d,N", CASES)
def test_frac_laplacian_single_mode(d, N):
    c = np.zeros((N,) * d, dtype=np.complex128)
    idx = (2,) + (0,) * (d - 1)
    c[idx] = 1.0
    c[tuple(-i for i in idx)] = 1.0
    f = SpectralField(d, N, c)
    g = op.frac_laplacian(f, 0.7)
    want = (2 * np.pi * 2) ** 1.4
    assert _rel(lq_norm(g - want * f, 2), lq_norm(g, 2)) < 1e-13


@pytest.mark.parametrize("d,N", CASES)
def test_antidiv_sym_properties(d, N, rng):
    v = random_field(rng, d, N, rank=1)
    M = op.antidiv_sym(v)
    # symmetric output
    assert np.max(np.abs(M.coef - np.swapaxes(M.coef, 0, 1))) < 1e-14
    got = op.div(M)
    assert _rel(lq_norm(got - v, 2), lq_norm(v, 2)) < 1e-12


@pytest.mark.parametrize("d,N", CASES)
def test_antidiv_grad_property(d, N, rng):
    f = random_field(rng, d, N, rank=0)
    got = op.div(op.antidiv_grad(f))
    assert _rel(lq_norm(got - f, 2), lq_norm(f, 2)) < 1e-12


@pytest.mark.parametrize("d,N", CASES)
def test_bilinear_antidiv(d, N, rng):
    A = random_field(rng, d, N, rank=2)
    v = random_field(rng, d, N, rank=1, band=N // 8)
    want = op.nonzero_modes(op.matvec(A, v))
    got = op.div(op.bilinear_antidiv(v, A))
    assert _rel(lq_norm(got - want, 2), lq_norm(want, 2)) < 1e-12


@pytest.mark.parametrize("d,N", CASES)
def test_bilinear_antidiv_scalar(d, N, rng):
    f = random_field(rng, d, N, rank=0)
    g = random_field(rng, d, N, rank=0, band=N // 8)
    want = op.nonzero_modes(op.pmul(f, g))
    got = op.div(op.bilinear_antidiv_scalar(f, g))
    assert _rel(lq_norm(got - want, 2), lq_norm(want, 2)) < 1e-12


@pytest.mark.parametrize("d,N", CASES)
def test_leray_projection(d, N, rng):
    u = random_field(rng, d, N, rank=1)
    pu = op.leray_project(u)
    assert lq_norm(op.div(pu), 2) < 1e-12 * lq_norm(u, 2)
    assert lq_norm(op.leray_project(pu) - pu, 2) < 1e-12 * lq_norm(u, 2)
    w = random_divfree(rng, d, N)
    assert lq_norm(op.leray_project(w) - w, 2) < 1e-12 * lq_norm(w, 2)


@pytest.mark.parametrize("d,N", CASES)
def test_products_dealiased_and_bilinear(d, N, rng):
    f = random_field(rng, d, N, rank=0)
    g = random_field(rng, d, N, rank=0)
    h = random_field(rng, d, N, rank=0)
    lhs = op.pmul(f + h, g)
    rhs = op.pmul(f, g) + op.pmul(h, g)
    assert lq_norm(lhs - rhs, 2) < 1e-12
    # the band projection commutes with d/dx, so the product rule survives it
    dfg = op.grad(op.pmul(f, g)).component(0)
    fd = op.pmul(f, op.grad(g).component(0))
    gd = op.pmul(g, op.grad(f).component(0))
    assert lq_norm(dfg - (fd + gd), 2) < 1e-10 * max(lq_norm(dfg, 2), 1.0)


@pytest.mark.parametrize("d,N", CASES)
def test_outer_and_dot(d, N, rng):
    u = random_field(rng, d, N, rank=1)
    v = random_field(rng, d, N, rank=1)
    T = op.outer(u, v)
    tr = sum((T.component(i, i) for i in range(1, d)), T.component(0, 0))
    assert lq_norm(tr - op.dot(u, v), 2) < 1e-12


def test_holder_probe_constant_stable():
    from torusflow.verify import holder_probe

    # g with a 1/k tail so the first-order correction actually shows up;
    # smooth random fields decorrelate spectrally and measure C = 0
    N = 512
    c = np.zeros((N, N), dtype=np.complex128)
    for k in range(1, 64):
        c[k, 0] = 0.5 / k
        c[-k, 0] = 0.5 / k
    c[0, 0] = 2.0
    g = SpectralField(2, N, c)
    cf = np.zeros((N, N), dtype=np.complex128)
    cf[1, 0] = 0.5
    cf[-1, 0] = 0.5
    f = SpectralField(2, N, cf)
    out = holder_probe(g, f, sigmas=(4, 8, 16), p=1.0)
    consts = np.array([out[s] for s in (4, 8, 16)])
    mid = np.median(consts)
    assert np.all(np.abs(consts - mid) <= 0.2 * abs(mid) + 1e-12)
