import numpy as np
import pytest

from torusflow.fields import lq_norm, sobolev_norm
from torusflow.gluing import glue, local_solve
from torusflow.intervals import IntervalSet
from torusflow.state import well_prepared_test_state, stress_l1_norm
from torusflow.verify import residual, support_check

TAU_BAR = 8e-5
DT = 1e-3


@pytest.fixture(scope="module")
def glued_pair():
    state = well_prepared_test_state(2, 32, 1.4)
    glued, report = glue(state, TAU_BAR, 0.5, DT)
    return state, glued, report


def test_glued_residual_exact_at_nodes(glued_pair):
    _, glued, _ = glued_pair
    res = residual(glued)
    assert res["max_rel"] < 1e-10


def test_glued_support_shrinks(glued_pair):
    state, glued, report = glued_pair
    assert state.support.covers(glued.support)
    assert glued.support.measure() < state.support.measure()
    # stress vanishes within 3 tau/2 of the new support's complement
    chk = support_check(glued.R, glued.support, margin=1.5 * glued.tau)
    assert chk["max_outside"] < 1e-13
    chk = support_check(glued.S, glued.support, margin=1.5 * glued.tau)
    assert chk["max_outside"] < 1e-13


def test_glued_stress_norm_finite(glued_pair):
    state, glued, _ = glued_pair
    c = stress_l1_norm(glued) / stress_l1_norm(state)
    assert np.isfinite(c) and c > 0.0


def test_glued_velocity_close(glued_pair):
    state, glued, _ = glued_pair
    drift = max(sobolev_norm(glued.u.at(float(t)) - state.u.at(float(t)), 2.0)
                for t in glued.u.nodes[::16])
    assert drift < 0.2


def test_glue_preconditions():
    state = well_prepared_test_state(2, 32, 1.4)
    with pytest.raises(ValueError):
        glue(state, 5e-3, 0.5, DT)      # spacing too coarse for tau


def test_local_solve_zero_short_circuit():
    state = well_prepared_test_state(2, 32, 1.4)
    # stresses vanish near t=0, so the correction is identically zero there
    loc = local_solve(state, 0.0, 0.05, 5e-4, tau=TAU_BAR)
    assert loc.is_zero
    assert all(lq_norm(f, 2) == 0.0 for f in loc.v.fields)


def test_local_solve_starts_from_zero():
    state = well_prepared_test_state(2, 32, 1.4)
    loc = local_solve(state, 0.40, 0.42, 5e-4, tau=TAU_BAR)
    assert not loc.is_zero
    assert lq_norm(loc.v.at(0.40), 2) == 0.0
    assert lq_norm(loc.v.at(0.42), 2) > 0.0
    # stored Hermite derivatives make the node interpolation ODE-consistent
    assert loc.v.dfields is not None
