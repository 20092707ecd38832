"""Hybrid closed-loop execution: flow exactly, jump by policy.

A hybrid state pairs a lattice point (automaton state, observation) with the
stacked plant/estimator vector.  Between jumps the lattice point is frozen and
the stacked vector follows an affine flow, integrated exactly through the
augmented matrix exponential.  A jump fires when the plant output enters the
active observation's jump ball; the successor lattice point comes from the
constrained jump map, chosen by a branch policy when there are several.

Guard crossings are localized by scanning a fixed step grid and bisecting the
bracketing step with cached dyadic sub-step exponentials, so event times are
resolved to the requested tolerance without re-integrating.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .constrain import ConstrainedAutomaton
from .plant import ClosedLoop, LinearPlant, Region

__all__ = [
    "DEFAULT_H_STEP",
    "DEFAULT_EPS_EVENT",
    "SimulationError",
    "InitialStateOutsideDomain",
    "PolicyViolation",
    "DepthExceeded",
    "HybridState",
    "HybridSystem",
    "restrict",
    "in_recurrent_set",
    "matrix_exponential",
    "flow_propagate",
    "detect_jump_entry",
    "BranchPolicy",
    "FirstPolicy",
    "RandomPolicy",
    "ScriptedPolicy",
    "parse_policy",
    "FlowSegment",
    "JumpRecord",
    "HybridTimeDomain",
    "HybridArc",
    "simulate",
    "RunNode",
    "enumerate_runs",
    "leaf_arcs",
    "observation_word",
    "state_word",
]

DEFAULT_H_STEP = 0.01
DEFAULT_EPS_EVENT = 1e-9
_MAX_ENUM_DEPTH = 12


class SimulationError(RuntimeError):
    """Simulation cannot proceed (missing region, inconsistent data)."""


class InitialStateOutsideDomain(SimulationError):
    """Initial hybrid state lies outside the flow and jump sets."""


class PolicyViolation(SimulationError):
    """A branch policy selected a successor outside the jump map."""


class DepthExceeded(SimulationError):
    """Run enumeration was asked for more jumps than the guard allows."""


def matrix_exponential(m: np.ndarray, h: float = 1.0) -> np.ndarray:
    """exp(m * h) via scaling-and-squaring; rejects non-finite input."""
    m = np.asarray(m, dtype=float)
    if not np.all(np.isfinite(m)) or not np.isfinite(h):
        raise ValueError("matrix exponential of non-finite input")
    return scipy.linalg.expm(m * h)


def _augmented(f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Homogeneous form of dz/dt = F z + g: one extra constant coordinate."""
    n = f.shape[0]
    m = np.zeros((n + 1, n + 1))
    m[:n, :n] = f
    m[:n, n] = g
    return m


def flow_propagate(f: np.ndarray, g: np.ndarray, zeta: np.ndarray, h: float) -> np.ndarray:
    """State of dz/dt = F z + g after time h, computed exactly."""
    if h < 0:
        raise ValueError("flow time must be nonnegative")
    aug = matrix_exponential(_augmented(f, g), h) @ np.append(zeta, 1.0)
    return aug[:-1]


class _AffinePropagator:
    """Fixed-step exact propagation with cached step powers and halvings."""

    def __init__(self, f: np.ndarray, g: np.ndarray, h: float, window: int = 512):
        self.n = f.shape[0]
        self.h = float(h)
        self.m_aug = _augmented(f, g)
        e_h = scipy.linalg.expm(self.m_aug * self.h)
        pows = np.empty((window + 1, self.n + 1, self.n + 1))
        pows[0] = np.eye(self.n + 1)
        for k in range(1, window + 1):
            pows[k] = pows[k - 1] @ e_h
        self.pows = pows
        self.window = window
        self._halvings = [e_h]  # _halvings[k] = exp(M h / 2^k)

    def grid(self, zeta: np.ndarray, n_steps: int) -> np.ndarray:
        """States at offsets 0, h, ..., n_steps*h (n_steps + 1 rows)."""
        aug = np.append(zeta, 1.0)
        rows = [zeta[None, :].copy()]
        done = 0
        while done < n_steps:
            take = min(self.window, n_steps - done)
            block = self.pows[1 : take + 1] @ aug
            rows.append(block[:, : self.n])
            aug = block[-1]
            done += take
        return np.vstack(rows)

    def _halving(self, k: int) -> np.ndarray:
        while len(self._halvings) <= k:
            kk = len(self._halvings)
            self._halvings.append(scipy.linalg.expm(self.m_aug * (self.h / 2.0**kk)))
        return self._halvings[k]

    def advance(self, zeta: np.ndarray, k: int) -> np.ndarray:
        """One step of size h / 2^k."""
        aug = self._halving(k) @ np.append(zeta, 1.0)
        return aug[: self.n]

    def at(self, zeta: np.ndarray, tau: float) -> np.ndarray:
        """State after an arbitrary offset tau >= 0 (one fresh exponential)."""
        aug = scipy.linalg.expm(self.m_aug * tau) @ np.append(zeta, 1.0)
        return aug[: self.n]


@dataclass(frozen=True)
class HybridState:
    s: int
    o: int
    xi: np.ndarray
    xi_hat: np.ndarray

    @property
    def chi(self) -> tuple[int, int]:
        return (self.s, self.o)

    @property
    def zeta(self) -> np.ndarray:
        return np.concatenate([self.xi, self.xi_hat])


@dataclass(frozen=True)
class HybridSystem:
    """Constrained automaton plus closed loop plus regions, optionally restricted.

    ``gamma`` is an optional state predicate; when set, flow and jumps are only
    allowed while it holds, and arcs stop on its boundary.
    """

    ca: ConstrainedAutomaton
    plant: LinearPlant
    loop: ClosedLoop
    regions: dict[int, Region]
    gamma: object | None = None  # callable HybridState -> bool

    def region(self, o: int) -> Region:
        try:
            return self.regions[o]
        except KeyError:
            raise SimulationError(f"no region bound to observation {o}") from None

    def state(self, chi: tuple[int, int], zeta: np.ndarray) -> HybridState:
        nu = self.plant.nu
        return HybridState(chi[0], chi[1], zeta[:nu], zeta[nu:])

    def guard_value(self, o: int, zeta: np.ndarray) -> float:
        """Distance of the output from the jump ball boundary (negative inside)."""
        region = self.region(o)
        out = self.plant.c @ zeta[: self.plant.nu]
        return float(np.linalg.norm(out - region.jump_center)) - region.jump_radius

    def guard_values(self, o: int, zetas: np.ndarray) -> np.ndarray:
        region = self.region(o)
        err = zetas[:, : self.plant.nu] @ self.plant.c.T - region.jump_center
        return np.linalg.norm(err, axis=1) - region.jump_radius

    def gamma_mask(self, chi: tuple[int, int], zetas: np.ndarray) -> np.ndarray:
        """Row-wise restriction predicate (True = allowed)."""
        if self.gamma is None:
            return np.ones(zetas.shape[0], dtype=bool)
        return np.fromiter(
            (bool(self.gamma(self.state(chi, z))) for z in zetas),
            dtype=bool,
            count=zetas.shape[0],
        )

    def in_flow_set(self, x: HybridState) -> bool:
        return (
            x.chi in self.ca.jump_set
            and self.guard_value(x.o, x.zeta) >= 0.0
            and (self.gamma is None or bool(self.gamma(x)))
        )

    def in_jump_set(self, x: HybridState) -> bool:
        return (
            x.chi in self.ca.jump_set
            and self.guard_value(x.o, x.zeta) <= 0.0
            and (self.gamma is None or bool(self.gamma(x)))
        )

    def in_recurrent_set(self, x: HybridState) -> bool:
        """Accepting lattice point with the output inside the active region."""
        if not self.ca.in_accepting_core(x.chi):
            return False
        return self.region(x.o).contains(self.plant.c @ x.xi)

    def restricted(self, predicate) -> "HybridSystem":
        if self.gamma is None:
            combined = predicate
        else:
            old = self.gamma
            combined = lambda x: old(x) and predicate(x)  # noqa: E731
        return dataclasses.replace(self, gamma=combined)


def restrict(system: HybridSystem, predicate) -> HybridSystem:
    """System restricted to the states where predicate holds."""
    return system.restricted(predicate)


def in_recurrent_set(system: HybridSystem, x: HybridState) -> bool:
    return system.in_recurrent_set(x)


def _bisect_guard(prop: _AffinePropagator, guard, z_left: np.ndarray, eps: float,
                  max_k: int = 60) -> tuple[float, np.ndarray]:
    """Crossing inside one grid step from z_left where guard(z_left) > 0.

    Returns (dt, z) with dt in (0, h] and guard(z) in [-eps, 0]; each
    refinement costs one cached sub-step application.
    """
    a, z_a, k = 0.0, z_left, 0
    b = prop.h
    z_b = prop.advance(z_left, 0)
    g_b = guard(z_b)
    while not -eps <= g_b <= 0.0 and k < max_k:
        k += 1
        mid = a + prop.h / 2.0**k
        z_mid = prop.advance(z_a, k)
        g_mid = guard(z_mid)
        if g_mid <= 0.0:
            b, z_b, g_b = mid, z_mid, g_mid
        else:
            a, z_a = mid, z_mid
    return b, z_b


def _bisect_gamma(prop: _AffinePropagator, allowed, z_left: np.ndarray,
                  max_k: int = 45) -> tuple[float, np.ndarray]:
    """Last allowed point inside one grid step (restriction boundary)."""
    a, z_a, k = 0.0, z_left, 0
    while k < max_k:
        k += 1
        mid = a + prop.h / 2.0**k
        z_mid = prop.advance(z_a, k)
        if allowed(z_mid):
            a, z_a = mid, z_mid
    return a, z_a


def detect_jump_entry(
    c_matrix: np.ndarray,
    f: np.ndarray,
    g: np.ndarray,
    zeta: np.ndarray,
    center: np.ndarray,
    radius: float,
    h_step: float = DEFAULT_H_STEP,
    eps_event: float = DEFAULT_EPS_EVENT,
    horizon: float = 1e4,
) -> tuple[float, np.ndarray] | None:
    """First time the output C@x enters the Euclidean ball around center.

    Scans the fixed step grid for a sign change of the ball distance and
    bisects the bracketing step to |value| <= eps_event on the inside.
    Returns (t_star, state) or None if no entry happens within the horizon.
    A start already on or inside the ball gives t_star = 0.
    """
    c_matrix = np.asarray(c_matrix, dtype=float)
    nu = c_matrix.shape[1]
    center = np.asarray(center, dtype=float)

    def guard(z: np.ndarray) -> float:
        return float(np.linalg.norm(c_matrix @ z[:nu] - center)) - radius

    if guard(zeta) <= 0.0:
        return 0.0, np.asarray(zeta, dtype=float)

    prop = _AffinePropagator(f, g, h_step)
    n_total = int(np.floor(horizon / h_step + 1e-12))
    z = np.asarray(zeta, dtype=float)
    done = 0
    while done < n_total:
        take = min(prop.window, n_total - done)
        states = prop.grid(z, take)
        seg = states[1:]
        err = seg[:, :nu] @ c_matrix.T - center
        vals = np.linalg.norm(err, axis=1) - radius
        hit = np.nonzero(vals <= 0.0)[0]
        if hit.size:
            cut = int(hit[0])
            dt, z_star = _bisect_guard(prop, guard, states[cut], eps_event)
            return (done + cut) * h_step + dt, z_star
        z = states[-1]
        done += take
    rem = horizon - n_total * h_step
    if rem > 1e-15 * max(1.0, horizon):
        z_end = prop.at(z, rem)
        if guard(z_end) <= 0.0:
            lo, hi, z_hi = 0.0, rem, z_end
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                z_mid = prop.at(z, mid)
                if guard(z_mid) <= 0.0:
                    hi, z_hi = mid, z_mid
                else:
                    lo = mid
                if -eps_event <= guard(z_hi) <= 0.0:
                    break
            return done * h_step + hi, z_hi
    return None


class BranchPolicy:
    """Chooses one successor lattice point at each jump."""

    def choose(self, chi, successors, jump_index):  # pragma: no cover - interface
        raise NotImplementedError


class FirstPolicy(BranchPolicy):
    """Always the smallest successor in (state, observation) order."""

    def choose(self, chi, successors, jump_index):
        return successors[0]

    def __repr__(self):
        return "first"


class RandomPolicy(BranchPolicy):
    """Seeded uniform choice; create a fresh instance per run for replays."""

    def __init__(self, seed: int):
        self.seed = int(seed)
        self._rng = np.random.default_rng(self.seed)

    def choose(self, chi, successors, jump_index):
        return successors[int(self._rng.integers(len(successors)))]

    def __repr__(self):
        return f"random:{self.seed}"


class ScriptedPolicy(BranchPolicy):
    """Consumes a successor script at branching jumps only.

    Entries are (state, observation-or-None); singleton jump maps advance
    without consuming the script, and the script recycles when exhausted so a
    single entry fixes a periodic branch choice.  An entry matching no offered
    successor raises PolicyViolation.
    """

    def __init__(self, entries, recycle: bool = True):
        self.entries = tuple(entries)
        if not self.entries:
            raise ValueError("scripted policy needs at least one entry")
        self.recycle = recycle
        self._pos = 0

    def choose(self, chi, successors, jump_index):
        if len(successors) == 1:
            return successors[0]
        if self._pos >= len(self.entries):
            if not self.recycle:
                raise PolicyViolation("scripted policy exhausted at a branching jump")
            self._pos = 0
        state, obs = self.entries[self._pos]
        self._pos += 1
        matches = [
            c for c in successors if c[0] == state and (obs is None or c[1] == obs)
        ]
        if not matches:
            raise PolicyViolation(
                f"scripted successor ({state},{obs}) not offered at {chi}; "
                f"choices were {list(successors)}"
            )
        return matches[0]

    def __repr__(self):
        parts = []
        for state, obs in self.entries:
            parts.append(f"s{state}" if obs is None else f"s{state}.o{obs}")
        return "scripted:" + ",".join(parts)


def parse_policy(text: str) -> BranchPolicy:
    """Parse 'first', 'random:<seed>' or 'scripted:<entry>[,<entry>...]'.

    Script entries name a state ('s6' or '6'), optionally with an observation
    ('s6.o2').
    """
    text = text.strip()
    if text == "first":
        return FirstPolicy()
    if text.startswith("random:"):
        try:
            return RandomPolicy(int(text.split(":", 1)[1]))
        except ValueError:
            raise ValueError(f"bad random policy seed in {text!r}") from None
    if text.startswith("scripted:"):
        entries = []
        for token in text.split(":", 1)[1].split(","):
            token = token.strip()
            if not token:
                raise ValueError("empty scripted policy entry")
            state_part, _, obs_part = token.partition(".")
            state = int(state_part.lstrip("s"))
            obs = int(obs_part.lstrip("o")) if obs_part else None
            entries.append((state, obs))
        return ScriptedPolicy(entries)
    raise ValueError(f"unknown policy {text!r}")


@dataclass(frozen=True)
class FlowSegment:
    """Samples of one flow interval: constant lattice point, moving zeta."""

    j: int
    s: int
    o: int
    times: np.ndarray  # (k,)
    zetas: np.ndarray  # (k, 2 nu)

    @property
    def t_start(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class JumpRecord:
    index: int  # jump from interval `index` to `index + 1`
    t: float
    pre: tuple[int, int]
    post: tuple[int, int]
    alternatives: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class HybridTimeDomain:
    """Interval boundaries t_0 <= t_1 <= ... <= t_{J+1} of an arc."""

    boundaries: tuple[float, ...]

    def __post_init__(self):
        if len(self.boundaries) < 2:
            raise ValueError("a time domain needs at least one interval")
        if any(b > a for a, b in zip(self.boundaries[1:], self.boundaries[:-1])):
            raise ValueError("interval boundaries must be nondecreasing")

    @property
    def n_jumps(self) -> int:
        return len(self.boundaries) - 2

    def intervals(self):
        for j in range(len(self.boundaries) - 1):
            yield self.boundaries[j], self.boundaries[j + 1], j


@dataclass(frozen=True)
class HybridArc:
    segments: tuple[FlowSegment, ...]
    jumps: tuple[JumpRecord, ...]
    termination: str

    @property
    def n_jumps(self) -> int:
        return len(self.segments) - 1

    @property
    def domain(self) -> HybridTimeDomain:
        bounds = [seg.t_start for seg in self.segments]
        bounds.append(self.segments[-1].t_end)
        return HybridTimeDomain(tuple(bounds))

    @property
    def total_time(self) -> float:
        return self.segments[-1].t_end

    def final_state(self, nu: int) -> HybridState:
        seg = self.segments[-1]
        zeta = seg.zetas[-1]
        return HybridState(seg.s, seg.o, zeta[:nu], zeta[nu:])


def observation_word(arc: HybridArc) -> tuple[int, ...]:
    """Active observation per interval, in jump order."""
    return tuple(seg.o for seg in arc.segments)


def state_word(arc: HybridArc) -> tuple[int, ...]:
    """Automaton state per interval, in jump order."""
    return tuple(seg.s for seg in arc.segments)


def _get_prop(cache: dict, system: HybridSystem, o: int, h: float) -> _AffinePropagator:
    key = (o, h)
    if key not in cache:
        cache[key] = _AffinePropagator(system.loop.f, system.loop.g[o], h)
    return cache[key]


def _flow_phase(system, prop, chi, zeta, t0, t_max, eps_event):
    """Flow one interval until a jump, the restriction boundary, or t_max.

    Returns (times, zetas, event, t_event) with event in
    {'jump', 'left-restriction', 'flow-exhausted'}.
    """
    s, o = chi
    h = prop.h
    horizon = t_max - t0
    n_total = max(0, int(np.floor(horizon / h + 1e-12)))
    rem = horizon - n_total * h

    def guard(z):
        return system.guard_value(o, z)

    def allowed(z):
        return bool(system.gamma_mask(chi, z[None, :])[0])

    if guard(zeta) <= 0.0:
        return np.array([t0]), zeta[None, :].copy(), "jump", t0

    steps_list = [np.array([0])]
    rows_list = [zeta[None, :].copy()]
    z = zeta
    done = 0
    event = None
    t_event = None
    z_event = None

    while done < n_total:
        take = min(prop.window, n_total - done)
        states = prop.grid(z, take)
        seg = states[1:]
        gv = system.guard_values(o, seg)
        jump_hits = np.nonzero(gv <= 0.0)[0]
        j_rel = int(jump_hits[0]) if jump_hits.size else None
        g_rel = None
        if system.gamma is not None:
            mask = system.gamma_mask(chi, seg)
            gamma_hits = np.nonzero(~mask)[0]
            g_rel = int(gamma_hits[0]) if gamma_hits.size else None

        if j_rel is None and g_rel is None:
            steps_list.append(np.arange(done + 1, done + take + 1))
            rows_list.append(seg)
            z = states[-1]
            done += take
            continue

        cut = min(x for x in (j_rel, g_rel) if x is not None)
        if cut > 0:
            steps_list.append(np.arange(done + 1, done + cut + 1))
            rows_list.append(seg[:cut])
        z_left = states[cut]
        left_t = (done + cut) * h

        t_jump = z_jump = None
        if j_rel == cut:
            dt, z_jump = _bisect_guard(prop, guard, z_left, eps_event)
            t_jump = left_t + dt
        t_gamma = z_gamma = None
        if g_rel == cut:
            dt, z_gamma = _bisect_gamma(prop, allowed, z_left)
            t_gamma = left_t + dt
        if t_gamma is not None and (t_jump is None or t_gamma < t_jump):
            event, t_off, z_event = "left-restriction", t_gamma, z_gamma
        else:
            event, t_off, z_event = "jump", t_jump, z_jump
        t_event = t0 + t_off
        break

    if event is None:
        t_event = t_max
        event = "flow-exhausted"
        if rem > 1e-12 * max(1.0, abs(t_max)):
            z_end = prop.at(z, rem)
            in_ball = guard(z_end) <= 0.0
            blocked = not allowed(z_end)
            if in_ball or blocked:
                lo, z_lo = 0.0, z
                hi, z_hi = rem, z_end
                for _ in range(80):
                    mid = 0.5 * (lo + hi)
                    z_mid = prop.at(z, mid)
                    if guard(z_mid) <= 0.0 or not allowed(z_mid):
                        hi, z_hi = mid, z_mid
                    else:
                        lo, z_lo = mid, z_mid
                    if guard(z_hi) <= 0.0 and guard(z_hi) >= -eps_event:
                        break
                if guard(z_hi) <= 0.0:
                    event, t_event, z_event = "jump", t0 + done * h + hi, z_hi
                else:
                    event, t_event, z_event = "left-restriction", t0 + done * h + lo, z_lo
            else:
                event, t_event, z_event = "flow-exhausted", t_max, z_end

    steps = np.concatenate(steps_list)
    times = t0 + steps * h
    rows = np.vstack(rows_list)
    if z_event is not None and t_event > times[-1]:
        times = np.append(times, t_event)
        rows = np.vstack([rows, z_event[None, :]])
    return times, rows, event, t_event


def _check_initial(system: HybridSystem, x0: HybridState) -> None:
    if x0.chi not in system.ca.jump_set:
        raise InitialStateOutsideDomain(
            f"lattice point {x0.chi} is not in the constrained jump set"
        )
    system.region(x0.o)
    if x0.xi.shape != (system.plant.nu,) or x0.xi_hat.shape != (system.plant.nu,):
        raise InitialStateOutsideDomain("state vectors have the wrong dimension")
    if system.gamma is not None and not system.gamma(x0):
        raise InitialStateOutsideDomain("initial state violates the restriction")


def simulate(
    system: HybridSystem,
    x0: HybridState,
    policy: BranchPolicy | None = None,
    *,
    t_max: float = 100.0,
    j_max: int = 20,
    h_step: float = DEFAULT_H_STEP,
    eps_event: float = DEFAULT_EPS_EVENT,
    flow_cache: dict | None = None,
) -> HybridArc:
    """Maximal arc from x0 under the branch policy, within the time budgets.

    Flow samples are recorded on the h_step grid plus the localized event
    point.  Jumps freeze zeta and move the lattice point; every jump record
    keeps the successors not taken.  The arc stops at t_max during flow
    ('flow-exhausted'), at the jump budget ('jump-limit', the entry point is
    still recorded), or on the restriction boundary ('left-restriction').
    """
    policy = policy or FirstPolicy()
    _check_initial(system, x0)
    cache = flow_cache if flow_cache is not None else {}

    chi = x0.chi
    zeta = x0.zeta
    t = 0.0
    j = 0
    segments: list[FlowSegment] = []
    jumps: list[JumpRecord] = []
    termination = None

    while True:
        prop = _get_prop(cache, system, chi[1], h_step)
        times, rows, event, t_event = _flow_phase(
            system, prop, chi, zeta, t, t_max, eps_event
        )
        segments.append(FlowSegment(j=j, s=chi[0], o=chi[1], times=times, zetas=rows))
        if event != "jump":
            termination = event
            break
        t = t_event
        zeta = rows[-1]
        if j >= j_max:
            termination = "jump-limit"
            break
        successors = system.ca.jump_map(chi)
        chosen = policy.choose(chi, successors, j)
        if chosen not in successors:
            raise PolicyViolation(f"policy chose {chosen}, not in {list(successors)}")
        jumps.append(
            JumpRecord(
                index=j,
                t=t,
                pre=chi,
                post=chosen,
                alternatives=tuple(c for c in successors if c != chosen),
            )
        )
        chi = chosen
        j += 1
        system.region(chi[1])
        if system.gamma is not None and not system.gamma(system.state(chi, zeta)):
            segments.append(
                FlowSegment(
                    j=j, s=chi[0], o=chi[1],
                    times=np.array([t]), zetas=zeta[None, :].copy(),
                )
            )
            termination = "left-restriction"
            break

    return HybridArc(tuple(segments), tuple(jumps), termination)


@dataclass(frozen=True)
class RunNode:
    """One flow interval in the run tree; children are the jump choices."""

    segment: FlowSegment
    t_end: float
    termination: str | None
    children: tuple[tuple[tuple[int, int], "RunNode"], ...]

    def leaf_count(self) -> int:
        if not self.children:
            return 1
        return sum(child.leaf_count() for _, child in self.children)


def enumerate_runs(
    system: HybridSystem,
    x0: HybridState,
    depth: int,
    *,
    t_max: float = 100.0,
    h_step: float = DEFAULT_H_STEP,
    eps_event: float = DEFAULT_EPS_EVENT,
    flow_cache: dict | None = None,
) -> RunNode:
    """Tree of all runs from x0 up to `depth` jumps, expanding every branch.

    The branch choices at each internal node are exactly the jump map of the
    pre-jump lattice point.  Guarded to a small depth because the tree may
    grow exponentially.
    """
    if depth > _MAX_ENUM_DEPTH:
        raise DepthExceeded(f"depth {depth} exceeds the enumeration guard "
                            f"({_MAX_ENUM_DEPTH})")
    _check_initial(system, x0)
    cache = flow_cache if flow_cache is not None else {}

    def rec(chi, zeta, t, jumps_used) -> RunNode:
        prop = _get_prop(cache, system, chi[1], h_step)
        times, rows, event, t_event = _flow_phase(
            system, prop, chi, zeta, t, t_max, eps_event
        )
        seg = FlowSegment(j=jumps_used, s=chi[0], o=chi[1], times=times, zetas=rows)
        if event != "jump":
            return RunNode(seg, t_event, event, ())
        if jumps_used >= depth:
            return RunNode(seg, t_event, "depth-limit", ())
        z_jump = rows[-1]
        children = []
        for succ in system.ca.jump_map(chi):
            if system.gamma is not None and not system.gamma(
                system.state(succ, z_jump)
            ):
                landing = FlowSegment(
                    j=jumps_used + 1, s=succ[0], o=succ[1],
                    times=np.array([t_event]), zetas=z_jump[None, :].copy(),
                )
                child = RunNode(landing, t_event, "left-restriction", ())
            else:
                child = rec(succ, z_jump, t_event, jumps_used + 1)
            children.append((succ, child))
        return RunNode(seg, t_event, None, tuple(children))

    return rec(x0.chi, x0.zeta, 0.0, 0)


def leaf_arcs(root: RunNode) -> list[HybridArc]:
    """One arc per root-to-leaf path of a run tree."""
    out: list[HybridArc] = []

    def walk(node: RunNode, segs: list, jmps: list):
        segs = segs + [node.segment]
        if not node.children:
            out.append(HybridArc(tuple(segs), tuple(jmps), node.termination or "depth-limit"))
            return
        for choice, child in node.children:
            rec = JumpRecord(
                index=node.segment.j,
                t=node.t_end,
                pre=(node.segment.s, node.segment.o),
                post=choice,
                alternatives=tuple(c for c, _ in node.children if c != choice),
            )
            walk(child, segs, jmps + [rec])

    walk(root, [], [])
    return out
