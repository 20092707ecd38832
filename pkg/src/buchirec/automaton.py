"""Nondeterministic Buchi automata over integer observation alphabets.

States are integers ``0 .. n_states - 1`` and observations are integers
``1 .. n_obs``.  The transition relation is set valued and may be empty for a
(state, observation) pair.  Automata are immutable once built; pruning returns
a new automaton with the same state ids (no renumbering).

File format (line oriented, ``#`` starts a comment):

    states <n>
    initial <id> [<id> ...]
    accepting <id> [<id> ...]
    obs <n>
    trans <from> <obs> <to> [<to> ...]

Each ``trans`` line gives the full successor set of one (state, observation)
pair; repeating a pair is a parse error.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

__all__ = [
    "AutomatonError",
    "InfeasibleAutomaton",
    "BuchiAutomaton",
    "parse_automaton",
    "serialize_automaton",
    "load_automaton",
    "enabled_observations",
    "prune_infeasible",
]


class AutomatonError(ValueError):
    """Malformed automaton text or inconsistent automaton data."""


class InfeasibleAutomaton(AutomatonError):
    """No initial state can reach an accepting state that lies on a cycle."""


@dataclass(frozen=True)
class BuchiAutomaton:
    """Finite automaton with set-valued transitions and Buchi acceptance.

    ``states`` may be a strict subset of ``range(n_states)`` after pruning;
    ``n_states`` keeps the declared id bound so ids stay stable.
    """

    n_states: int
    states: frozenset[int]
    initial: frozenset[int]
    accepting: frozenset[int]
    n_obs: int
    delta: dict[tuple[int, int], frozenset[int]]

    @property
    def observations(self) -> frozenset[int]:
        return frozenset(range(1, self.n_obs + 1))

    def successors(self, s: int, o: int) -> frozenset[int]:
        """Successor set of (s, o); empty when the pair has no transition."""
        return self.delta.get((s, o), frozenset())

    def all_successors(self, s: int) -> frozenset[int]:
        """Union of successors of s over every observation."""
        out: set[int] = set()
        for o in range(1, self.n_obs + 1):
            out |= self.delta.get((s, o), frozenset())
        return frozenset(out)

    def validate(self) -> None:
        """Raise AutomatonError on any structural inconsistency."""
        problems = []
        if self.n_states <= 0:
            problems.append("n_states must be positive")
        if self.n_obs <= 0:
            problems.append("n_obs must be positive")
        if not self.states <= frozenset(range(self.n_states)):
            problems.append("state set exceeds declared range")
        if not self.initial:
            problems.append("empty initial set")
        if not self.accepting:
            problems.append("empty accepting set")
        if not self.initial <= self.states:
            problems.append("initial states outside state set")
        if not self.accepting <= self.states:
            problems.append("accepting states outside state set")
        for (s, o), targets in self.delta.items():
            if s not in self.states:
                problems.append(f"transition from unknown state {s}")
            if not 1 <= o <= self.n_obs:
                problems.append(f"transition labeled with unknown observation {o}")
            if not targets:
                problems.append(f"empty successor set stored for ({s},{o})")
            if not targets <= self.states:
                problems.append(f"transition ({s},{o}) targets unknown states")
        if problems:
            raise AutomatonError("; ".join(problems))


def _parse_int(token: str, lineno: int, what: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise AutomatonError(f"line {lineno}: {what} is not an integer: {token!r}") from None


def parse_automaton(text: str) -> BuchiAutomaton:
    """Parse automaton text; errors carry the offending line number."""
    n_states = None
    n_obs = None
    initial: list[int] | None = None
    accepting: list[int] | None = None
    trans: dict[tuple[int, int], frozenset[int]] = {}
    trans_lines: dict[tuple[int, int], int] = {}

    raw_trans: list[tuple[int, list[str]]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        directive, args = tokens[0], tokens[1:]
        if directive == "states":
            if n_states is not None:
                raise AutomatonError(f"line {lineno}: duplicate 'states' directive")
            if len(args) != 1:
                raise AutomatonError(f"line {lineno}: 'states' takes exactly one count")
            n_states = _parse_int(args[0], lineno, "state count")
        elif directive == "obs":
            if n_obs is not None:
                raise AutomatonError(f"line {lineno}: duplicate 'obs' directive")
            if len(args) != 1:
                raise AutomatonError(f"line {lineno}: 'obs' takes exactly one count")
            n_obs = _parse_int(args[0], lineno, "observation count")
        elif directive == "initial":
            if initial is not None:
                raise AutomatonError(f"line {lineno}: duplicate 'initial' directive")
            if not args:
                raise AutomatonError(f"line {lineno}: 'initial' needs at least one state id")
            initial = [_parse_int(a, lineno, "initial state id") for a in args]
        elif directive == "accepting":
            if accepting is not None:
                raise AutomatonError(f"line {lineno}: duplicate 'accepting' directive")
            if not args:
                raise AutomatonError(f"line {lineno}: 'accepting' needs at least one state id")
            accepting = [_parse_int(a, lineno, "accepting state id") for a in args]
        elif directive == "trans":
            if len(args) < 3:
                raise AutomatonError(
                    f"line {lineno}: 'trans' needs a source, an observation and at least one target"
                )
            raw_trans.append((lineno, args))
        else:
            raise AutomatonError(f"line {lineno}: unknown directive {directive!r}")

    if n_states is None:
        raise AutomatonError("missing 'states' directive")
    if n_obs is None:
        raise AutomatonError("missing 'obs' directive")
    if n_states <= 0:
        raise AutomatonError("'states' count must be positive")
    if n_obs <= 0:
        raise AutomatonError("'obs' count must be positive")
    if initial is None:
        raise AutomatonError("missing 'initial' directive")
    if accepting is None:
        raise AutomatonError("missing 'accepting' directive")

    def check_state(sid: int, lineno: int) -> int:
        if not 0 <= sid < n_states:
            raise AutomatonError(
                f"line {lineno}: state id {sid} out of range 0..{n_states - 1}"
            )
        return sid

    def check_obs(oid: int, lineno: int) -> int:
        if not 1 <= oid <= n_obs:
            raise AutomatonError(
                f"line {lineno}: observation id {oid} out of range 1..{n_obs}"
            )
        return oid

    for lineno, args in raw_trans:
        src = check_state(_parse_int(args[0], lineno, "source state id"), lineno)
        obs = check_obs(_parse_int(args[1], lineno, "observation id"), lineno)
        targets = frozenset(
            check_state(_parse_int(a, lineno, "target state id"), lineno) for a in args[2:]
        )
        key = (src, obs)
        if key in trans:
            raise AutomatonError(
                f"line {lineno}: duplicate transition line for state {src}, "
                f"observation {obs} (first given on line {trans_lines[key]})"
            )
        trans[key] = targets
        trans_lines[key] = lineno

    for sid in initial:
        if not 0 <= sid < n_states:
            raise AutomatonError(f"initial state id {sid} out of range 0..{n_states - 1}")
    for sid in accepting:
        if not 0 <= sid < n_states:
            raise AutomatonError(f"accepting state id {sid} out of range 0..{n_states - 1}")

    automaton = BuchiAutomaton(
        n_states=n_states,
        states=frozenset(range(n_states)),
        initial=frozenset(initial),
        accepting=frozenset(accepting),
        n_obs=n_obs,
        delta=dict(trans),
    )
    automaton.validate()
    return automaton


def serialize_automaton(automaton: BuchiAutomaton) -> str:
    """Canonical text for an automaton; parse(serialize(a)) == a for parsed a."""
    lines = [
        f"states {automaton.n_states}",
        "initial " + " ".join(str(s) for s in sorted(automaton.initial)),
        "accepting " + " ".join(str(s) for s in sorted(automaton.accepting)),
        f"obs {automaton.n_obs}",
    ]
    for (s, o) in sorted(automaton.delta):
        targets = " ".join(str(t) for t in sorted(automaton.delta[(s, o)]))
        lines.append(f"trans {s} {o} {targets}")
    return "\n".join(lines) + "\n"


def load_automaton(path: str | Path) -> BuchiAutomaton:
    return parse_automaton(Path(path).read_text())


def enabled_observations(automaton: BuchiAutomaton, s: int) -> frozenset[int]:
    """Observations with at least one successor from state s."""
    if s not in automaton.states:
        raise AutomatonError(f"state {s} not in automaton")
    return frozenset(
        o for o in range(1, automaton.n_obs + 1) if automaton.successors(s, o)
    )


def _cyclic_accepting(automaton: BuchiAutomaton) -> frozenset[int]:
    """Accepting states lying on a cycle through themselves (length >= 1)."""
    out = set()
    for sf in automaton.accepting & automaton.states:
        # BFS from the successors of sf back to sf
        frontier = set(automaton.all_successors(sf))
        seen = set(frontier)
        found = sf in frontier
        while frontier and not found:
            nxt = set()
            for s in frontier:
                for t in automaton.all_successors(s):
                    if t == sf:
                        found = True
                    if t not in seen:
                        seen.add(t)
                        nxt.add(t)
            frontier = nxt
        if found:
            out.add(sf)
    return frozenset(out)


def prune_infeasible(automaton: BuchiAutomaton) -> BuchiAutomaton:
    """Drop states from which no cyclic accepting state is reachable.

    The result is a fixed point: pruning twice gives the same automaton.
    Raises InfeasibleAutomaton when no initial state survives.
    """
    cyclic = _cyclic_accepting(automaton)
    if not cyclic:
        raise InfeasibleAutomaton("no accepting state lies on a cycle")

    # Reverse reachability from the cyclic accepting states.
    reverse: dict[int, set[int]] = {s: set() for s in automaton.states}
    for (s, _o), targets in automaton.delta.items():
        for t in targets:
            reverse[t].add(s)
    keep = set(cyclic)
    frontier = set(cyclic)
    while frontier:
        nxt = set()
        for s in frontier:
            for pred in reverse[s]:
                if pred not in keep:
                    keep.add(pred)
                    nxt.add(pred)
        frontier = nxt

    new_initial = automaton.initial & keep
    if not new_initial:
        raise InfeasibleAutomaton("no initial state survives pruning")

    new_delta = {}
    for (s, o), targets in automaton.delta.items():
        if s not in keep:
            continue
        kept_targets = targets & keep
        if kept_targets:
            new_delta[(s, o)] = frozenset(kept_targets)

    return BuchiAutomaton(
        n_states=automaton.n_states,
        states=frozenset(keep),
        initial=frozenset(new_initial),
        accepting=automaton.accepting & keep,
        n_obs=automaton.n_obs,
        delta=new_delta,
    )
