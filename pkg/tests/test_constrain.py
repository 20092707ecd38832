"""Distance labeling, constrained transitions, and the jump map."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from buchirec.automaton import parse_automaton
from buchirec.constrain import (
    InfiniteDistance,
    NotInJumpSet,
    constrain,
    delta_c,
    distances,
    format_constraint_table,
    format_distance_table,
    in_recurrent_set_ba,
    v_ba,
)
from helpers import distance_oracle, random_pruned_automaton

# hand-checked on the bundled automaton; independently confirmed by the
# graph-library oracle below
SURVEIL_DISTANCES = {0: 3, 1: 4, 2: 3, 3: 0, 4: 2, 5: 1, 6: 0}

SURVEIL_CONSTRAINED = {
    (0, 2): frozenset({4}),
    (1, 3): frozenset({2}),
    (2, 2): frozenset({4}),
    (3, 3): frozenset({2}),
    (4, 3): frozenset({5}),
    (5, 1): frozenset({3, 6}),
    (6, 2): frozenset({4}),
}


def test_distance_table_values(surveil_automaton):
    table = distances(surveil_automaton)
    assert table.d == SURVEIL_DISTANCES
    assert table.d_max == 4
    assert distance_oracle(surveil_automaton) == SURVEIL_DISTANCES


def test_distance_table_random_matches_oracle(rng):
    for _ in range(40):
        a = random_pruned_automaton(rng)
        assert distances(a).d == distance_oracle(a)


def test_infinite_distance_raises():
    # state 2 has transitions but never reaches the accepting cycle
    text = (
        "states 3\ninitial 0\naccepting 1\nobs 2\n"
        "trans 0 1 1\ntrans 1 1 0\ntrans 2 1 2\n"
    )
    with pytest.raises(InfiniteDistance):
        distances(parse_automaton(text))


def test_constrained_transitions(surveil_ca):
    got = {
        (s, o): surveil_ca.constrained_successors(s, o)
        for s in surveil_ca.base.states
        for o in surveil_ca.base.observations
        if surveil_ca.constrained_successors(s, o)
    }
    assert got == SURVEIL_CONSTRAINED
    assert delta_c(surveil_ca, 5, 1) == frozenset({3, 6})
    assert delta_c(surveil_ca, 5, 2) == frozenset()


def test_enabled_constrained_observations(surveil_ca):
    assert surveil_ca.oc == {
        0: frozenset({2}),
        1: frozenset({3}),
        2: frozenset({2}),
        3: frozenset({3}),
        4: frozenset({3}),
        5: frozenset({1}),
        6: frozenset({2}),
    }
    assert surveil_ca.jump_set == frozenset(
        {(0, 2), (1, 3), (2, 2), (3, 3), (4, 3), (5, 1), (6, 2)}
    )


def test_jump_map(surveil_ca):
    assert surveil_ca.jump_map((0, 2)) == ((4, 3),)
    assert surveil_ca.jump_map((4, 3)) == ((5, 1),)
    assert surveil_ca.jump_map((5, 1)) == ((3, 3), (6, 2))
    with pytest.raises(NotInJumpSet):
        surveil_ca.jump_map((0, 1))


def test_potential_and_recurrent_markers(surveil_ca):
    assert v_ba(surveil_ca, (0, 2)) == 3
    assert v_ba(surveil_ca, (6, 2)) == 0
    assert surveil_ca.potential((4, 3)) == 2
    assert in_recurrent_set_ba(surveil_ca, (6, 2))
    assert in_recurrent_set_ba(surveil_ca, (3, 3))
    assert not in_recurrent_set_ba(surveil_ca, (5, 1))


def test_distance_table_text(surveil_ca):
    expected = "s0 3\ns1 4\ns2 3\ns3 0\ns4 2\ns5 1\ns6 0\nd_max 4\n"
    assert format_distance_table(surveil_ca) == expected


def test_constraint_table_text(surveil_ca):
    expected = (
        "(s0,o2),(s2,o2),(s6,o2)→{s4}\n"
        "(s1,o3),(s3,o3)→{s2}\n"
        "(s4,o3)→{(s5,o1)}\n"
        "(s5,o1)→{(s3,o3),(s6,o2)}\n"
    )
    assert format_constraint_table(surveil_ca) == expected


# --- structural invariants on random instances -----------------------------


def _check_invariants(ca) -> None:
    d = ca.dist
    sf = ca.base.accepting
    for s in ca.base.states:
        # every surviving state keeps at least one enabled observation
        assert ca.oc[s], f"state {s} has no constrained observation"
    for chi in ca.jump_set:
        targets = ca.jump_map(chi)
        assert targets, f"jump map empty at {chi}"
        for nxt in targets:
            # closure: jumps land inside the jump set
            assert nxt in ca.jump_set, f"{chi} -> {nxt} leaves the jump set"
            drop = ca.potential(nxt) - ca.potential(chi)
            if chi[0] not in sf:
                # strict progress toward the accepting set
                assert drop <= -1, f"{chi} -> {nxt} drops only {drop}"
            else:
                # accepting resets pay at most the distance diameter
                assert drop <= -1 + (1 + d.d_max), f"{chi} -> {nxt} rose {drop}"


def test_invariants_on_bundled_automaton(surveil_ca):
    _check_invariants(surveil_ca)


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_invariants_on_random_automata(seed):
    a = random_pruned_automaton(np.random.default_rng(seed))
    _check_invariants(constrain(a))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1))
def test_accepting_observations_achieve_the_minimum(seed):
    # on accepting states the kept observations are those whose worst-case
    # successor distance equals the best achievable one
    a = random_pruned_automaton(np.random.default_rng(seed))
    ca = constrain(a)
    d = ca.dist
    for s in a.accepting & a.states:
        per_obs = {}
        for o in a.observations:
            succ = a.successors(s, o)
            if succ:
                per_obs[o] = min(d[t] for t in succ)
        if not per_obs:
            continue
        best = min(per_obs.values())
        for o in ca.oc[s]:
            assert min(d[t] for t in ca.constrained_successors(s, o)) == best
