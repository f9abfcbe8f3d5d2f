import numpy as np
import pytest

import torusflow.operators as op
from torusflow.fields import SpectralField, TimeField, lq_norm
from torusflow.imex import imex_evolve
from torusflow.state import (well_prepared_test_state, static_initial_state,
                             stress_l1_norm)
from torusflow.verify import (residual, energy_monitor, support_check,
                              scaling_probe, hausdorff_estimate)
from torusflow.intervals import IntervalSet


def test_well_prepared_state_residual_small():
    state = well_prepared_test_state(2, 32, 1.4)
    res = residual(state)
    assert res["max_rel"] < 1e-10


def test_static_state_residual_small():
    for d, N in ((2, 32), (3, 16)):
        state = static_initial_state(d, N, 1.4)
        res = residual(state)
        assert res["max_rel"] < 1e-12


def test_well_prepared_support_structure():
    state = well_prepared_test_state(2, 32, 1.4)
    chk = support_check(state.R, state.support, margin=state.tau)
    assert chk["max_outside"] < 1e-14
    assert chk["max_inside"] > 0.0
    assert stress_l1_norm(state) > 0.0


def test_residual_detects_broken_state():
    state = well_prepared_test_state(2, 32, 1.4)
    bad = state.with_fields(R=TimeField(
        state.R.nodes, [f * 0.0 for f in state.R.fields]))
    res = residual(bad)
    assert res["max_rel"] > 1e-6


def test_energy_monitor_heat_flow():
    # pure fractional heat flow saturates the energy identity
    rng = np.random.default_rng(2)
    from torusflow.testing import random_divfree, random_field

    # low band so the decay timescale of every mode is resolved; otherwise
    # the dissipation integral has a boundary layer and trapezoid is O(dt)
    u0 = random_divfree(rng, 2, 32, band=2)
    th0 = random_field(rng, 2, 32, rank=0, band=2)
    horizon = 2e-3

    def solve(n_steps):
        zero_rhs = lambda t, fs: [np.zeros_like(f.coef) for f in fs]
        # store every step: the monitor's quadrature spacing is the dt that
        # halves (the integrating-factor step is exact for pure heat flow)
        _, stored = imex_evolve([u0, th0], 1.4, 0.0, horizon, n_steps,
                                rhs=zero_rhs,
                                store_index=range(0, n_steps + 1))
        steps = sorted(stored)
        times = np.array([horizon * s / n_steps for s in steps])
        u = TimeField(times, [stored[s][0] for s in steps])
        th = TimeField(times, [stored[s][1] for s in steps])
        return energy_monitor(u, th, 1.4, tol=np.inf)

    g1 = solve(64)
    g2 = solve(128)
    gap1 = max(np.max(np.abs(g1["gap_u"])), np.max(np.abs(g1["gap_theta"])))
    gap2 = max(np.max(np.abs(g2["gap_u"])), np.max(np.abs(g2["gap_theta"])))
    # quadrature error is O(dt^2): halving the step cuts the gap ~4x
    assert gap2 < gap1 / 2.5


def test_energy_monitor_flags_inflation():
    rng = np.random.default_rng(2)
    from torusflow.testing import random_divfree, random_field

    u0 = random_divfree(rng, 2, 32)
    th0 = random_field(rng, 2, 32, rank=0)
    zero_rhs = lambda t, fs: [np.zeros_like(f.coef) for f in fs]
    _, stored = imex_evolve([u0, th0], 1.4, 0.0, 0.1, 128,
                            rhs=zero_rhs, store_index=range(0, 129, 8))
    steps = sorted(stored)
    times = np.array([0.1 * s / 128 for s in steps])
    u = TimeField(times, [stored[s][0] for s in steps])
    # inflate the temperature mid-run: energy created from nothing
    th = TimeField(times, [stored[s][1] * (1.0 if t < 0.05 else 3.0)
                           for t, s in zip(times, steps)])
    out = energy_monitor(u, th, 1.4, tol=1e-10)
    assert not out["ok"]
    assert out["first_violation"] is not None


def test_scaling_probe_recovers_slope():
    x = np.array([1.0, 2.0, 4.0, 8.0])
    y = 3.0 * x ** 1.7
    slope, err = scaling_probe(x, y)
    assert abs(slope - 1.7) < 1e-12
    assert err < 1e-12


def test_hausdorff_synthetic():
    eps = 0.3
    lengths = np.array([4.0 ** -j for j in range(1, 7)])
    counts = np.maximum(1.0, lengths ** -eps)
    slope, err = hausdorff_estimate(lengths, counts)
    assert abs(slope - eps) < 0.05


def test_interval_set_algebra():
    s = IntervalSet([(0.1, 0.3), (0.25, 0.5), (0.7, 0.8)])
    assert len(s) == 2
    assert abs(s.measure() - 0.5) < 1e-15
    assert s.contains(0.4) and not s.contains(0.6)
    assert s.covers(IntervalSet([(0.15, 0.45)]))
    assert not s.covers(IntervalSet([(0.45, 0.75)]))
    assert abs(s.dist_to_complement(0.75) - 0.05) < 1e-15
    back = IntervalSet.from_json(s.to_json())
    assert back.intervals == s.intervals
