"""Exact flow propagation, event detection, and hybrid-arc simulation."""

from __future__ import annotations

import math

import numpy as np
import pytest
import scipy.linalg

from buchirec import hybrid_sim, scenario as scenario_mod
from buchirec.hybrid_sim import (
    DepthExceeded,
    FirstPolicy,
    InitialStateOutsideDomain,
    PolicyViolation,
    RandomPolicy,
    detect_jump_entry,
    enumerate_runs,
    flow_propagate,
    leaf_arcs,
    matrix_exponential,
    observation_word,
    parse_policy,
    simulate,
    state_word,
)

LN5 = math.log(5.0)
LN9 = math.log(9.0)


def test_matrix_exponential_nilpotent():
    m = np.array([[0.0, 1.0], [0.0, 0.0]])
    for h in (0.1, 1.0, 7.5):
        assert matrix_exponential(m, h) == pytest.approx(
            np.array([[1.0, h], [0.0, 1.0]])
        )


def test_matrix_exponential_matches_reference(rng):
    for _ in range(10):
        m = rng.standard_normal((5, 5))
        h = float(rng.uniform(0.0, 2.0))
        assert matrix_exponential(m, h) == pytest.approx(scipy.linalg.expm(m * h))


def test_matrix_exponential_rejects_nonfinite():
    with pytest.raises(ValueError):
        matrix_exponential(np.array([[np.nan]]), 1.0)


def test_flow_propagate_scalar_affine():
    # z' = -z + 2 has the explicit solution 2 + (z0 - 2) exp(-h)
    f = np.array([[-1.0]])
    g = np.array([2.0])
    for z0 in (0.0, 5.0, -3.0):
        for h in (0.0, 0.25, 2.0):
            want = 2.0 + (z0 - 2.0) * math.exp(-h)
            got = flow_propagate(f, g, np.array([z0]), h)
            assert got == pytest.approx([want], rel=1e-12, abs=1e-12)


def test_flow_propagate_matches_dense_exponential(rng):
    f = rng.standard_normal((4, 4)) - 2.0 * np.eye(4)
    g = rng.standard_normal(4)
    z0 = rng.standard_normal(4)
    h = 0.7
    aug = np.zeros((5, 5))
    aug[:4, :4] = f
    aug[:4, 4] = g
    ref = (scipy.linalg.expm(aug * h) @ np.append(z0, 1.0))[:4]
    assert flow_propagate(f, g, z0, h) == pytest.approx(ref, rel=1e-12, abs=1e-12)


def test_flow_propagate_rejects_negative_time():
    with pytest.raises(ValueError):
        flow_propagate(np.array([[-1.0]]), np.zeros(1), np.zeros(1), -0.1)


def test_detect_jump_entry_log_crossing():
    # output flows as 1 - exp(-t) toward 1; the ball |y - 1| < 1/2 is entered
    # at exactly t = ln 2
    f = np.array([[-1.0]])
    g = np.array([1.0])
    c = np.array([[1.0]])
    hit = detect_jump_entry(
        c, f, g, np.zeros(1), center=np.array([1.0]), radius=0.5, h_step=0.01,
        eps_event=1e-9,
    )
    assert hit is not None
    t_star, z_star = hit
    assert t_star == pytest.approx(math.log(2.0), abs=1e-8)
    assert abs(float(z_star[0]) - 0.5) <= 1e-8


def test_detect_jump_entry_immediate_and_absent():
    f = np.array([[-1.0]])
    c = np.array([[1.0]])
    inside = detect_jump_entry(
        c, f, np.array([1.0]), np.array([0.9]), center=np.array([1.0]), radius=0.5,
        h_step=0.01, eps_event=1e-9,
    )
    assert inside is not None and inside[0] == 0.0
    # flowing to 0, the ball around 5 is never entered
    away = detect_jump_entry(
        c, f, np.zeros(1), np.array([1.0]), center=np.array([5.0]), radius=0.5,
        h_step=0.01, eps_event=1e-9, horizon=50.0,
    )
    assert away is None


# --- toy closed loop: every event time is a hand-computed logarithm ---------


def test_toy_jump_times(toy_system, toy_x0):
    arc = simulate(toy_system, toy_x0, t_max=40.0, j_max=9)
    assert arc.termination == "jump-limit"
    assert state_word(arc) == (0, 1, 2, 0, 1, 2, 0, 1, 2, 0)
    assert observation_word(arc) == (1, 2, 1, 1, 2, 1, 1, 2, 1, 1)
    # tracking from 0 to +2 crosses |y-2| = 0.4 at ln 5; each later leg
    # starts 3.6 from its target and crosses at ln 9; in-ball landings jump
    # again instantly
    expected = [
        LN5,
        LN5 + LN9,
        LN5 + 2 * LN9,
        LN5 + 2 * LN9,
        LN5 + 3 * LN9,
        LN5 + 4 * LN9,
        LN5 + 4 * LN9,
        LN5 + 5 * LN9,
        LN5 + 6 * LN9,
    ]
    got = [rec.t for rec in arc.jumps]
    assert got == pytest.approx(expected, abs=1e-7)


def test_toy_flow_samples_respect_guard(toy_system, toy_x0):
    arc = simulate(toy_system, toy_x0, t_max=40.0, j_max=9)
    for seg in arc.segments:
        guards = toy_system.guard_values(seg.o, seg.zetas)
        assert np.all(guards >= -1e-9)


def test_jump_keeps_continuous_state_bitwise(toy_system, toy_x0, robots4_system, robots4_x0):
    for system, x0 in ((toy_system, toy_x0), (robots4_system, robots4_x0)):
        arc = simulate(system, x0, t_max=30.0, j_max=4)
        assert arc.n_jumps >= 2
        for a, b in zip(arc.segments, arc.segments[1:]):
            assert np.array_equal(a.zetas[-1], b.zetas[0])
            assert a.times[-1] == b.times[0]


def test_halving_step_leaves_terminal_state(toy_system, toy_x0):
    final = {}
    for h in (0.01, 0.005):
        arc = simulate(
            toy_system, toy_x0, t_max=5.0, j_max=9, h_step=h, eps_event=1e-12
        )
        assert arc.termination == "flow-exhausted"
        final[h] = arc.segments[-1].zetas[-1]
    num = np.linalg.norm(final[0.01] - final[0.005])
    den = np.linalg.norm(final[0.01])
    assert num / den <= 1e-9


def test_zero_jump_budget_flows_only(toy_system, toy_x0):
    arc = simulate(toy_system, toy_x0, t_max=40.0, j_max=0)
    assert arc.n_jumps == 0
    assert arc.jumps == ()
    assert arc.termination == "jump-limit"  # stopped at the first event
    assert arc.total_time == pytest.approx(LN5, abs=1e-7)

    short = simulate(toy_system, toy_x0, t_max=1.0, j_max=0)
    assert short.termination == "flow-exhausted"
    assert short.total_time == pytest.approx(1.0)


def test_domain_structure(toy_system, toy_x0):
    arc = simulate(toy_system, toy_x0, t_max=40.0, j_max=6)
    dom = arc.domain
    assert dom.n_jumps == arc.n_jumps == 6
    assert len(list(dom.intervals())) == 7
    bounds = np.array(dom.boundaries)
    assert np.all(np.diff(bounds) >= 0.0)
    assert arc.final_state(toy_system.plant.nu).chi == (arc.segments[-1].s, arc.segments[-1].o)


def test_initial_state_validation(robots4_system, robots4_x0):
    bad_lattice = hybrid_sim.HybridState(
        s=0, o=1, xi=robots4_x0.xi, xi_hat=robots4_x0.xi_hat
    )
    with pytest.raises(InitialStateOutsideDomain):
        simulate(robots4_system, bad_lattice, t_max=1.0)
    bad_shape = hybrid_sim.HybridState(s=0, o=2, xi=np.zeros(3), xi_hat=np.zeros(3))
    with pytest.raises(InitialStateOutsideDomain):
        simulate(robots4_system, bad_shape, t_max=1.0)


def test_policy_parsing_round_trip():
    assert repr(parse_policy("first")) == "first"
    assert repr(parse_policy("random:7")) == "random:7"
    assert repr(parse_policy("scripted:s6.o2,s3")) == "scripted:s6.o2,s3"
    assert repr(parse_policy("scripted:6")) == "scripted:s6"
    with pytest.raises(ValueError):
        parse_policy("alphabetical")
    with pytest.raises(ValueError):
        parse_policy("random:x")
    with pytest.raises(ValueError):
        parse_policy("scripted:")


def test_scripted_policy_branches(robots4_system, robots4_x0):
    arc = simulate(
        robots4_system, robots4_x0, parse_policy("scripted:s3"), t_max=100.0, j_max=7
    )
    assert state_word(arc) == (0, 4, 5, 3, 2, 4, 5, 3)
    assert observation_word(arc) == (2, 3, 1, 3, 2, 3, 1, 3)
    # the singleton jumps never consumed the script: entry 0 was reused at
    # both visits to the branching point
    branch = [rec for rec in arc.jumps if len(rec.alternatives) > 0]
    assert [rec.pre for rec in branch] == [(5, 1), (5, 1)]
    assert all(rec.alternatives == ((6, 2),) for rec in branch)


def test_scripted_policy_rejects_unoffered_choice(robots4_system, robots4_x0):
    with pytest.raises(PolicyViolation):
        simulate(
            robots4_system,
            robots4_x0,
            parse_policy("scripted:s4"),
            t_max=100.0,
            j_max=7,
        )


def test_random_policy_replays(robots4_system, robots4_x0):
    words = []
    for _ in range(2):
        arc = simulate(
            robots4_system, robots4_x0, RandomPolicy(7), t_max=100.0, j_max=12
        )
        words.append((state_word(arc), tuple(rec.t for rec in arc.jumps)))
    assert words[0] == words[1]


def test_enumerate_runs_branching(robots4_system, robots4_x0):
    cache: dict = {}
    tree4 = enumerate_runs(robots4_system, robots4_x0, depth=4, t_max=100.0, flow_cache=cache)
    assert tree4.leaf_count() == 2
    tree7 = enumerate_runs(robots4_system, robots4_x0, depth=7, t_max=100.0, flow_cache=cache)
    assert tree7.leaf_count() == 4
    words = {state_word(arc) for arc in leaf_arcs(tree7)}
    assert (0, 4, 5, 3, 2, 4, 5, 3) in words
    assert (0, 4, 5, 6, 4, 5, 6, 4) in words
    assert (0, 4, 5, 3, 2, 4, 5, 6) in words
    assert (0, 4, 5, 6, 4, 5, 3, 2) in words
    for arc in leaf_arcs(tree7):
        assert arc.termination == "depth-limit"


def test_enumerate_runs_depth_guard(robots4_system, robots4_x0):
    with pytest.raises(DepthExceeded):
        enumerate_runs(robots4_system, robots4_x0, depth=13, t_max=1.0)


def test_restriction_stops_at_recurrent_set(robots4_system, robots4_x0):
    base = robots4_system
    restricted = base.restricted(lambda x: not base.in_recurrent_set(x))
    arc = simulate(restricted, robots4_x0, FirstPolicy(), t_max=100.0, j_max=20)
    assert arc.termination == "left-restriction"
    assert arc.n_jumps == 3  # initial distance of the bundled start state
    # every recorded sample is still allowed: the arc stops at the last
    # point before the recurrent set
    for seg in arc.segments:
        for z in seg.zetas:
            assert not base.in_recurrent_set(base.state((seg.s, seg.o), z))
    # ... and that point touches the region boundary of the landing
    # observation: the worst block sits within an event tolerance of entry
    last = arc.final_state(base.plant.nu)
    assert last.chi == (3, 3)  # accepting state, region not yet entered
    region = base.region(last.o)
    out = base.plant.c @ last.xi
    gaps = [b.distance(out) - b.radius for b in region.blocks]
    assert max(gaps) >= 0.0
    assert max(gaps) <= 1e-6


def test_restriction_rejects_excluded_start(robots4_system, robots4_x0):
    restricted = robots4_system.restricted(lambda x: x.s != 0)
    with pytest.raises(InitialStateOutsideDomain):
        simulate(restricted, robots4_x0, t_max=1.0)
