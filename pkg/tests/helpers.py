"""Shared test utilities: random problem generators and independent oracles.

The oracles here deliberately avoid the formulas used by the package (Schur
complements, reverse BFS) so agreement is evidence, not tautology.
"""

from __future__ import annotations

import numpy as np
import networkx as nx
import scipy.linalg

from buchirec.automaton import BuchiAutomaton, prune_infeasible, InfeasibleAutomaton


def random_hurwitz(rng: np.random.Generator, n: int) -> np.ndarray:
    """Random dense matrix shifted until every eigenvalue is well left of 0."""
    m = rng.standard_normal((n, n))
    shift = float(np.max(np.linalg.eigvals(m).real))
    return m - (shift + 0.5 + rng.uniform(0.0, 1.0)) * np.eye(n)


def random_spd(rng: np.random.Generator, n: int) -> np.ndarray:
    m = rng.standard_normal((n, n))
    return m @ m.T + (0.1 + rng.uniform(0.0, 1.0)) * np.eye(n)


def random_full_row_rank(rng: np.random.Generator, p: int, n: int) -> np.ndarray:
    while True:
        c = rng.standard_normal((p, n))
        if np.linalg.matrix_rank(c) == p:
            return c


def lyapunov_residual(f: np.ndarray, p: np.ndarray, q: np.ndarray) -> float:
    """Relative residual of the continuous Lyapunov identity."""
    res = f.T @ p + p @ f + q
    return float(np.linalg.norm(res) / np.linalg.norm(q))


def w_min_oracle(p: np.ndarray, c: np.ndarray, radius: float) -> float:
    """Minimum of the stacked-error quadratic form on one flow boundary.

    Minimizes [a; b]^T P [a; b] subject to ||C a|| = radius by eliminating
    the free directions analytically: write the constrained point as
    z0(u) = [pinv(C) radius u; 0] with ||u|| = 1 plus a free span (the null
    space of C in the first block and the whole second block), project P onto
    the complement of the free span, and take the smallest eigenvalue of the
    resulting form in u.  No Schur complement of P is formed.
    """
    nu = c.shape[1]
    pinv = np.linalg.pinv(c)
    null = scipy.linalg.null_space(c)
    free = np.zeros((2 * nu, null.shape[1] + nu))
    free[:nu, : null.shape[1]] = null
    free[nu:, null.shape[1] :] = np.eye(nu)
    lift = np.zeros((2 * nu, c.shape[0]))
    lift[:nu] = pinv
    core = free.T @ p @ free
    reduced = p - p @ free @ np.linalg.solve(core, free.T @ p)
    form = lift.T @ reduced @ lift
    form = 0.5 * (form + form.T)
    return radius**2 * float(np.linalg.eigvalsh(form)[0])


def distance_oracle(automaton: BuchiAutomaton) -> dict[int, int]:
    """Shortest jump counts to the accepting set via a graph library."""
    g = nx.DiGraph()
    g.add_nodes_from(automaton.states)
    for (s, _o), targets in automaton.delta.items():
        for t in targets:
            g.add_edge(s, t)
    out = {}
    for s in automaton.states:
        best = None
        for f in automaton.accepting:
            try:
                d = nx.shortest_path_length(g, s, f)
            except nx.NetworkXNoPath:
                continue
            best = d if best is None else min(best, d)
        if best is not None:
            out[s] = best
    return out


def random_pruned_automaton(
    rng: np.random.Generator, max_states: int = 12, n_obs: int = 3
) -> BuchiAutomaton:
    """Random automaton that survives pruning, with every state kept alive.

    A random ring through one accepting state guarantees a cyclic accepting
    state that every ring member reaches; extra random transitions and
    off-ring states make the instances irregular, and pruning then trims
    whatever cannot reach the ring.
    """
    while True:
        n = int(rng.integers(2, max_states + 1))
        states = list(range(n))
        ring_len = int(rng.integers(2, n + 1))
        ring = list(rng.permutation(n)[:ring_len])
        accepting = {int(ring[0])}
        if rng.random() < 0.3:
            accepting.add(int(rng.integers(0, n)))
        delta: dict[tuple[int, int], set[int]] = {}
        for i, s in enumerate(ring):
            o = int(rng.integers(1, n_obs + 1))
            delta.setdefault((int(s), o), set()).add(int(ring[(i + 1) % ring_len]))
        for s in states:
            for o in range(1, n_obs + 1):
                if rng.random() < 0.35:
                    k = int(rng.integers(1, 3))
                    for t in rng.integers(0, n, size=k):
                        delta.setdefault((s, o), set()).add(int(t))
        initial = {int(ring[int(rng.integers(0, ring_len))])}
        if rng.random() < 0.5:
            initial.add(int(rng.integers(0, n)))
        auto = BuchiAutomaton(
            n_states=n,
            states=frozenset(states),
            initial=frozenset(initial),
            accepting=frozenset(accepting),
            n_obs=n_obs,
            delta={k: frozenset(v) for k, v in delta.items()},
        )
        try:
            return prune_infeasible(auto)
        except InfeasibleAutomaton:  # pragma: no cover - ring makes this rare
            continue
