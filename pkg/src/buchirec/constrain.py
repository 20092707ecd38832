"""Distance-constrained transition structure for pruned Buchi automata.

Every state of a pruned automaton has a finite number of steps to the
accepting set.  Constraining the transition relation to moves that make
progress toward acceptance (or, from an accepting state, to moves that reach
the nearest next target) turns the step count into a discrete Lyapunov-like
progress measure: it falls by at least one on every jump taken outside the
accepting set.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

from .automaton import AutomatonError, BuchiAutomaton, enabled_observations

__all__ = [
    "InfiniteDistance",
    "NotInJumpSet",
    "DistanceTable",
    "distances",
    "ConstrainedAutomaton",
    "constrain",
    "delta_c",
    "v_ba",
    "in_recurrent_set_ba",
    "format_distance_table",
    "format_constraint_table",
]


class InfiniteDistance(ValueError):
    """Some state cannot reach the accepting set (automaton was not pruned)."""


class NotInJumpSet(ValueError):
    """Queried a (state, observation) pair outside the constrained jump set."""


@dataclass(frozen=True)
class DistanceTable:
    """Per-state shortest jump counts to the accepting set."""

    d: dict[int, int]
    d_max: int

    def __getitem__(self, s: int) -> int:
        return self.d[s]


def distances(automaton: BuchiAutomaton) -> DistanceTable:
    """Shortest number of transitions from each state to the accepting set.

    Accepting states get distance 0.  Computed by one multi-source BFS on the
    reversed transition graph; raises InfiniteDistance if any state of the
    automaton cannot reach acceptance.
    """
    reverse: dict[int, set[int]] = {s: set() for s in automaton.states}
    for (s, _o), targets in automaton.delta.items():
        for t in targets:
            reverse[t].add(s)

    d: dict[int, int] = {sf: 0 for sf in automaton.accepting}
    queue = deque(automaton.accepting)
    while queue:
        s = queue.popleft()
        for pred in reverse[s]:
            if pred not in d:
                d[pred] = d[s] + 1
                queue.append(pred)

    missing = automaton.states - d.keys()
    if missing:
        raise InfiniteDistance(
            f"states {sorted(missing)} cannot reach the accepting set; prune first"
        )
    return DistanceTable(d=d, d_max=max(d.values()))


def _source_distances(automaton: BuchiAutomaton, s: int) -> dict[int, int]:
    """Forward BFS distances from s to every reachable state."""
    dist = {s: 0}
    queue = deque([s])
    while queue:
        u = queue.popleft()
        for t in automaton.all_successors(u):
            if t not in dist:
                dist[t] = dist[u] + 1
                queue.append(t)
    return dist


@dataclass(frozen=True)
class ConstrainedAutomaton:
    """Pruned automaton with its progress-constrained transition structure.

    ``delta_c[(s, o)]`` keeps only successors that strictly decrease the
    distance to acceptance; from an accepting state it keeps the successors
    achieving the minimum distance over all enabled observations.  ``oc[s]``
    lists the observations with a nonempty constrained successor set and
    ``jump_set`` collects the surviving (s, o) pairs.
    """

    base: BuchiAutomaton
    dist: DistanceTable
    delta_c: dict[tuple[int, int], frozenset[int]]
    oc: dict[int, frozenset[int]]
    jump_set: frozenset[tuple[int, int]]
    _pairwise: dict[int, dict[int, int]] = field(
        default_factory=dict, compare=False, repr=False
    )

    def constrained_successors(self, s: int, o: int) -> frozenset[int]:
        return self.delta_c.get((s, o), frozenset())

    def jump_map(self, chi: tuple[int, int]) -> tuple[tuple[int, int], ...]:
        """Successor lattice points of chi = (s, o), sorted for determinism."""
        if chi not in self.jump_set:
            raise NotInJumpSet(f"{chi} is not in the constrained jump set")
        s, o = chi
        out = []
        for s2 in self.delta_c[(s, o)]:
            for o2 in self.oc[s2]:
                out.append((s2, o2))
        return tuple(sorted(out))

    def potential(self, chi: tuple[int, int]) -> int:
        """Discrete progress value of chi: the distance of its state."""
        s, o = chi
        if s not in self.base.states:
            raise AutomatonError(f"state {s} not in automaton")
        return self.dist[s]

    def in_accepting_core(self, chi: tuple[int, int]) -> bool:
        """True iff the state is accepting and the observation is constrained-enabled."""
        s, o = chi
        return s in self.base.accepting and o in self.oc.get(s, frozenset())

    def pairwise_distance(self, s: int, t: int) -> int | None:
        """Shortest jump count from s to t over the unconstrained relation.

        Cached per source state; None when t is unreachable from s.
        """
        if s not in self._pairwise:
            self._pairwise[s] = _source_distances(self.base, s)
        return self._pairwise[s].get(t)


def _constrained_targets(
    automaton: BuchiAutomaton, table: DistanceTable, s: int, o: int
) -> frozenset[int]:
    targets = automaton.successors(s, o)
    if not targets:
        return frozenset()
    if s in automaton.accepting:
        reachable = [
            table[t]
            for o2 in enabled_observations(automaton, s)
            for t in automaton.successors(s, o2)
        ]
        best = min(reachable)
        return frozenset(t for t in targets if table[t] == best)
    return frozenset(t for t in targets if table[t] < table[s])


def constrain(automaton: BuchiAutomaton) -> ConstrainedAutomaton:
    """Build the full constrained structure of a pruned automaton."""
    table = distances(automaton)
    delta_c: dict[tuple[int, int], frozenset[int]] = {}
    oc: dict[int, frozenset[int]] = {}
    for s in automaton.states:
        enabled = []
        for o in enabled_observations(automaton, s):
            kept = _constrained_targets(automaton, table, s, o)
            if kept:
                delta_c[(s, o)] = kept
                enabled.append(o)
        oc[s] = frozenset(enabled)
    jump_set = frozenset((s, o) for s in automaton.states for o in oc[s])
    return ConstrainedAutomaton(
        base=automaton, dist=table, delta_c=delta_c, oc=oc, jump_set=jump_set
    )


def delta_c(ca: ConstrainedAutomaton, s: int, o: int) -> frozenset[int]:
    """Constrained successor states of s under observation o (may be empty)."""
    return ca.constrained_successors(s, o)


def v_ba(ca: ConstrainedAutomaton, chi: tuple[int, int]) -> int:
    """Discrete progress measure: the distance of the state to acceptance."""
    return ca.potential(chi)


def in_recurrent_set_ba(ca: ConstrainedAutomaton, chi: tuple[int, int]) -> bool:
    """Accepting-core membership: accepting state with a constrained observation."""
    return ca.in_accepting_core(chi)


def format_distance_table(ca: ConstrainedAutomaton) -> str:
    """Two-column state/distance listing plus the maximum."""
    lines = [f"s{s} {ca.dist[s]}" for s in sorted(ca.base.states)]
    lines.append(f"d_max {ca.dist.d_max}")
    return "\n".join(lines) + "\n"


def _fmt_chi(chi: tuple[int, int]) -> str:
    return f"(s{chi[0]},o{chi[1]})"


def format_constraint_table(ca: ConstrainedAutomaton) -> str:
    """Rows grouping (s, o) pairs that share the same constrained jump map.

    Each row reads ``sources→targets``.  Rows that merge several source pairs
    abbreviate the targets to the constrained successor states; a row with a
    single source spells out the successor lattice points, so the jump map is
    recoverable from the table as a whole.  Rows are ordered by their smallest
    source pair.
    """
    groups: dict[tuple, list[tuple[int, int]]] = {}
    for chi in sorted(ca.jump_set):
        groups.setdefault(ca.jump_map(chi), []).append(chi)

    rows = sorted(groups.items(), key=lambda item: min(item[1]))
    lines = []
    for pairs, chis in rows:
        sources = ",".join(_fmt_chi(c) for c in sorted(chis))
        if len(chis) > 1:
            targets = "{" + ",".join(f"s{t}" for t in sorted({p[0] for p in pairs})) + "}"
        else:
            targets = "{" + ",".join(_fmt_chi(p) for p in pairs) + "}"
        lines.append(f"{sources}→{targets}")
    return "\n".join(lines) + "\n"
