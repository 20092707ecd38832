"""Recurrence certificates for the closed hybrid loop.

The certificate combines the automaton's distance-to-acceptance with a
quadratic Lyapunov function of the tracking and estimation errors into a
single scalar that decays along flows, at worst doubles across jumps, and is
small only inside the recurrent set.  From the decay and growth rates it
produces an explicit bound on the hybrid time (continuous time plus jump
count) needed to reach the recurrent set from a bounded set of starts, which
an empirical sweep can then be measured against.

All scalar conditions are verified numerically: exhaustively over the lattice
and by large-sample evaluation over the continuous coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .hybrid_sim import (
    DEFAULT_EPS_EVENT,
    DEFAULT_H_STEP,
    HybridArc,
    HybridState,
    HybridSystem,
    enumerate_runs,
    leaf_arcs,
    parse_policy,
    simulate,
)

__all__ = [
    "CertificateError",
    "CheckResult",
    "CertificateReport",
    "RecurrenceBound",
    "SweepRun",
    "RecurrenceSweep",
    "error_coords",
    "quadratic_value",
    "compute_w_min",
    "compute_j1",
    "select_theta_lambda",
    "build_certificate",
    "hybrid_lyapunov",
    "v_h",
    "check_flow_condition",
    "check_jump_condition",
    "check_restricted_time_condition",
    "reachable_lattice",
    "run_all_checks",
    "predicted_ugr_bound",
    "empirical_ugr",
    "grid_initial_states",
]

JUMP_GROWTH_RATE = math.log(2.0)  # certified per-jump growth factor is 2
_VERTEX_GUARD = 12  # max box dimensions enumerated exactly (2^k vertices)


class CertificateError(RuntimeError):
    """Certificate construction or evaluation failed (degenerate data)."""


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str

    def line(self) -> str:
        status = "ok" if self.passed else "FAILED"
        return f"{self.name}: {status} (margin {self.margin:.3e}) {self.detail}"


@dataclass
class CertificateReport:
    """Constants, rates, and check verdicts of the recurrence certificate.

    The scalar certificate at lattice point (s, o) and stacked vector zeta is
    ``distance(s) + lam * W_o(zeta)`` where W_o is the quadratic form of the
    error coordinates for observation o.  ``lam`` lies strictly inside
    (lam_lo, lam_hi); jumps on the accepting core may overshoot by
    ``mu_h_offset + 2 * lam * W_o`` pointwise.
    """

    p: np.ndarray
    q: np.ndarray
    d_max: int
    w_min: float
    w_min_per_obs: dict[int, float]
    j1: float
    lambda_prime: float
    theta: float
    lam: float
    lam_lo: float
    lam_hi: float
    lambda_c: float  # flow decay rate (negative)
    lambda_d: float  # jump growth rate (log 2)
    mu_h_offset: float  # state-independent part of the core jump overshoot
    big_m: float  # hybrid-time conversion offset
    gamma: float  # hybrid-time decay rate (positive)
    checks: list[CheckResult] = field(default_factory=list)
    t_hat: float | None = None

    @property
    def ok(self) -> bool:
        return bool(self.checks) and all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "d_max": self.d_max,
            "w_min": self.w_min,
            "w_min_per_obs": {str(k): v for k, v in self.w_min_per_obs.items()},
            "j1": self.j1,
            "lambda_prime": self.lambda_prime,
            "theta": self.theta,
            "lam": self.lam,
            "lam_lo": self.lam_lo,
            "lam_hi": self.lam_hi,
            "lambda_c": self.lambda_c,
            "lambda_d": self.lambda_d,
            "mu_h_offset": self.mu_h_offset,
            "big_m": self.big_m,
            "gamma": self.gamma,
            "t_hat": self.t_hat,
            "checks": [
                {
                    "name": c.name,
                    "passed": c.passed,
                    "margin": c.margin,
                    "detail": c.detail,
                }
                for c in self.checks
            ],
            "ok": self.ok,
        }

    def summary_lines(self) -> list[str]:
        lines = [
            f"d_max        {self.d_max}",
            f"w_min        {self.w_min:.9e}",
            f"j1           {self.j1:.9e}",
            f"lambda_prime {self.lambda_prime:.9e}",
            f"theta        {self.theta:.9e}",
            f"lam          {self.lam:.9e}  in ({self.lam_lo:.3e}, {self.lam_hi:.3e})",
            f"lambda_c     {self.lambda_c:.9e}",
            f"lambda_d     {self.lambda_d:.9e}",
            f"big_m        {self.big_m:.9e}",
            f"gamma        {self.gamma:.9e}",
        ]
        if self.t_hat is not None:
            lines.append(f"t_hat        {self.t_hat:.9e}")
        lines.extend(c.line() for c in self.checks)
        lines.append("verdict      " + ("PASS" if self.ok else "FAIL"))
        return lines


def error_coords(system: HybridSystem, o: int, zeta: np.ndarray) -> np.ndarray:
    """Stacked (tracking error, estimation error) for observation o.

    Accepts a single vector or an array of row vectors.
    """
    nu = system.plant.nu
    xi_o, _ = system.loop.setpoints[o]
    zeta = np.asarray(zeta, dtype=float)
    single = zeta.ndim == 1
    rows = zeta[None, :] if single else zeta
    err = np.empty_like(rows)
    err[:, :nu] = rows[:, :nu] - xi_o
    err[:, nu:] = rows[:, :nu] - rows[:, nu:]
    return err[0] if single else err


def quadratic_value(p: np.ndarray, rows: np.ndarray) -> np.ndarray | float:
    """Row-wise value of the quadratic form rows P rows^T."""
    rows = np.asarray(rows, dtype=float)
    if rows.ndim == 1:
        return float(rows @ p @ rows)
    return np.einsum("ij,jk,ik->i", rows, p, rows)


def compute_w_min(
    p: np.ndarray, c_matrix: np.ndarray, jump_radii: dict[int, float]
) -> tuple[float, dict[int, float]]:
    """Smallest certificate energy on any flow set, in closed form.

    On the flow set of observation o the output stays at least the jump
    radius away from the target output.  Minimizing the quadratic form
    analytically over the free estimation-error block (Schur complement S)
    and then over the tracking errors at fixed output distance gives
    ``radius^2 / lambda_max(C S^{-1} C^T)`` per observation.
    """
    nu = c_matrix.shape[1]
    p_aa = p[:nu, :nu]
    p_ab = p[:nu, nu:]
    p_bb = p[nu:, nu:]
    schur = p_aa - p_ab @ np.linalg.solve(p_bb, p_ab.T)
    gram = c_matrix @ np.linalg.solve(schur, c_matrix.T)
    kappa = float(np.linalg.eigvalsh(gram)[-1])
    if kappa <= 0:
        raise CertificateError("output energy matrix is not positive definite")
    if not jump_radii:
        raise CertificateError("no jump radii supplied")
    per_obs = {o: radius**2 / kappa for o, radius in jump_radii.items()}
    return min(per_obs.values()), per_obs


def compute_j1(p: np.ndarray, setpoints: dict[int, np.ndarray]) -> float:
    """Largest setpoint-change energy over ordered observation pairs.

    A jump rewrites the tracking error by the difference of steady states;
    this is the worst quadratic energy (tracking block of P) of that shift,
    by exhaustive enumeration.  A zero result means two observations share a
    steady state, which contradicts region disjointness.
    """
    targets = list(setpoints.values())
    if len(targets) < 2:
        raise CertificateError("need at least two observations for the jump energy")
    nu = targets[0].shape[0]
    p_aa = p[:nu, :nu]
    worst = 0.0
    for i, a in enumerate(targets):
        for b in targets[i + 1 :]:
            diff = a - b
            worst = max(worst, float(diff @ p_aa @ diff))
    if worst <= 0:
        raise CertificateError("two observations share a steady state")
    return worst


def select_theta_lambda(
    d_max: int, w_min: float, j1: float
) -> tuple[float, float, float, float]:
    """Pick the certificate weights strictly inside the feasible set.

    Returns (theta, lam, lam_lo, lam_hi).  Feasibility needs lam above
    ``lam_lo = (1-theta)/theta * d_max/w_min`` (the continuous energy then
    dominates the discrete distance on flows) and below ``lam_hi = 1/j1``
    (jumps then at worst double the certificate).  theta is set halfway
    between its smallest feasible value and 1, and lam at the geometric mean
    of its bounds (half the upper bound when the lower one degenerates to 0).
    """
    if w_min <= 0:
        raise CertificateError("w_min must be positive")
    if j1 <= 0:
        raise CertificateError("j1 must be positive")
    theta_min = d_max * j1 / (d_max * j1 + w_min)
    theta = 0.5 * (1.0 + theta_min)
    lo = (1.0 - theta) / theta * d_max / w_min
    hi = 1.0 / j1
    if not lo < hi:
        raise CertificateError(f"no feasible lam: lo={lo}, hi={hi}")
    lam = 0.5 * hi if lo == 0.0 else math.sqrt(lo * hi)
    return theta, lam, lo, hi


def build_certificate(system: HybridSystem) -> CertificateReport:
    """Assemble the certificate constants from the closed loop and regions."""
    p = system.loop.p
    q = system.loop.q
    d_max = system.ca.dist.d_max
    radii = {o: region.jump_radius for o, region in system.regions.items()}
    w_min, per_obs = compute_w_min(p, system.plant.c, radii)
    setpoints = {o: xi for o, (xi, _) in system.loop.setpoints.items()}
    j1 = compute_j1(p, setpoints)
    lambda_prime = float(np.linalg.eigvalsh(q)[0] / np.linalg.eigvalsh(p)[-1])
    if lambda_prime <= 0:
        raise CertificateError("flow decay rate is not positive")
    theta, lam, lo, hi = select_theta_lambda(d_max, w_min, j1)
    lambda_c = -lambda_prime * (1.0 - theta)
    lambda_d = JUMP_GROWTH_RATE
    gamma = -lambda_c
    big_m = (lambda_d - lambda_c) * d_max
    return CertificateReport(
        p=p,
        q=q,
        d_max=d_max,
        w_min=w_min,
        w_min_per_obs=per_obs,
        j1=j1,
        lambda_prime=lambda_prime,
        theta=theta,
        lam=lam,
        lam_lo=lo,
        lam_hi=hi,
        lambda_c=lambda_c,
        lambda_d=lambda_d,
        mu_h_offset=d_max + 2.0 * lam * j1,
        big_m=big_m,
        gamma=gamma,
    )


def hybrid_lyapunov(
    system: HybridSystem,
    cert: CertificateReport,
    chi: tuple[int, int],
    zeta: np.ndarray,
) -> float | np.ndarray:
    """Certificate value distance(s) + lam * W_o(zeta); row-wise on arrays."""
    err = error_coords(system, chi[1], zeta)
    w = quadratic_value(cert.p, err)
    return system.ca.potential(chi) + cert.lam * w


def v_h(system: HybridSystem, cert: CertificateReport, x: HybridState) -> float:
    """Certificate value at a hybrid state."""
    return float(hybrid_lyapunov(system, cert, x.chi, x.zeta))


def _sample_box(rng: np.random.Generator, n: int, dim: int, radius: float) -> np.ndarray:
    return rng.uniform(-radius, radius, size=(n, dim))


def check_flow_condition(
    system: HybridSystem,
    cert: CertificateReport,
    *,
    n_samples: int = 50_000,
    box_radius: float = 6.0,
    seed: int = 0,
    fd_rtol: float = 1e-6,
) -> CheckResult:
    """Flow decay: the certificate's derivative is at most lambda_c times it.

    Along flows the derivative equals -lam * (error Q error); the check
    verifies that identity by central finite differences on a few exactly
    propagated points, then verifies the decay inequality and the positive
    certificate floor on large uniform samples of each flow set (points whose
    output is outside the open jump ball of the active observation).
    """
    rng = np.random.default_rng(seed)
    nu = system.plant.nu
    worst = math.inf
    detail_parts = []
    passed = True

    fd_h = 1e-5
    fd_worst = 0.0
    for chi in sorted(system.ca.jump_set)[:4]:
        o = chi[1]
        m_aug = np.zeros((2 * nu + 1, 2 * nu + 1))
        m_aug[: 2 * nu, : 2 * nu] = system.loop.f
        m_aug[: 2 * nu, 2 * nu] = system.loop.g[o]
        e_plus = scipy.linalg.expm(m_aug * fd_h)
        e_minus = scipy.linalg.expm(-m_aug * fd_h)
        for _ in range(8):
            zeta = rng.uniform(-box_radius, box_radius, size=2 * nu)
            aug = np.append(zeta, 1.0)
            z_plus = (e_plus @ aug)[:-1]
            z_minus = (e_minus @ aug)[:-1]
            v_plus = hybrid_lyapunov(system, cert, chi, z_plus)
            v_minus = hybrid_lyapunov(system, cert, chi, z_minus)
            fd = (v_plus - v_minus) / (2 * fd_h)
            err = error_coords(system, o, zeta)
            analytic = -cert.lam * float(err @ cert.q @ err)
            rel = abs(fd - analytic) / max(1.0, abs(analytic))
            fd_worst = max(fd_worst, rel)
    if fd_worst > fd_rtol:
        passed = False
        detail_parts.append(f"derivative identity off by {fd_worst:.2e}")

    floor_target = cert.theta * cert.lam * cert.w_min - (1 - cert.theta) * cert.d_max
    floor_worst = math.inf
    for chi in sorted(system.ca.jump_set):
        o = chi[1]
        region = system.regions[o]
        zetas = _sample_box(rng, n_samples, 2 * nu, box_radius)
        out_err = zetas[:, :nu] @ system.plant.c.T - region.jump_center
        on_flow = np.linalg.norm(out_err, axis=1) >= region.jump_radius
        if not np.any(on_flow):
            continue
        rows = zetas[on_flow]
        err = error_coords(system, o, rows)
        w = quadratic_value(cert.p, err)
        qform = quadratic_value(cert.q, err)
        v = system.ca.potential(chi) + cert.lam * w
        slack = cert.lambda_c * v + cert.lam * qform
        worst = min(worst, float(np.min(slack)))
        floor_slack = cert.theta * v - system.ca.potential(chi) - floor_target
        floor_worst = min(floor_worst, float(np.min(floor_slack)))

    if worst < 0:
        passed = False
        detail_parts.append("decay inequality violated on a flow sample")
    if floor_target <= 0:
        passed = False
        detail_parts.append(f"certificate floor {floor_target:.3e} not positive")
    if floor_worst < -1e-9:
        passed = False
        detail_parts.append("floor inequality violated on a flow sample")
    detail_parts.append(
        f"{n_samples} samples/lattice point, fd error {fd_worst:.1e}, "
        f"floor {floor_target:.3e}"
    )
    return CheckResult("flow-decay", passed, worst, "; ".join(detail_parts))


def _lift_to_output(
    plant, rng: np.random.Generator, y_target: np.ndarray, box_radius: float
) -> np.ndarray:
    """Random plant state whose output equals y_target exactly."""
    xi = rng.uniform(-box_radius, box_radius, size=plant.nu)
    c = plant.c
    correction = c.T @ np.linalg.solve(c @ c.T, y_target - c @ xi)
    return xi + correction


def check_jump_condition(
    system: HybridSystem,
    cert: CertificateReport,
    *,
    n_samples: int = 256,
    box_radius: float = 6.0,
    seed: int = 1,
) -> CheckResult:
    """Jump growth: at worst doubling off the accepting core, bounded on it.

    Enumerates every lattice jump exactly and samples the continuous jump set
    (output inside the jump ball) including the exact setpoint, where the
    energy vanishes.  Off the accepting core the post-jump certificate must be
    at most twice its pre-jump value; on the core the bound gains the
    pointwise overshoot term.
    """
    rng = np.random.default_rng(seed)
    nu = system.plant.nu
    worst = math.inf
    n_pairs = 0
    for chi in sorted(system.ca.jump_set):
        o = chi[1]
        region = system.regions[o]
        accepting = system.ca.in_accepting_core(chi)
        xi_o, _ = system.loop.setpoints[o]

        samples = [np.concatenate([xi_o, xi_o])]
        for _ in range(n_samples):
            direction = rng.normal(size=system.plant.p)
            norm = float(np.linalg.norm(direction))
            if norm == 0:
                continue
            radius = region.jump_radius * rng.uniform() ** (1.0 / system.plant.p)
            y_target = region.jump_center + radius * direction / norm
            xi = _lift_to_output(system.plant, rng, y_target, box_radius)
            xi_hat = rng.uniform(-box_radius, box_radius, size=nu)
            samples.append(np.concatenate([xi, xi_hat]))
        rows = np.vstack(samples)
        v_pre = hybrid_lyapunov(system, cert, chi, rows)
        if accepting:
            err = error_coords(system, o, rows)
            w_pre = quadratic_value(cert.p, err)
            overshoot = cert.d_max + cert.lam * (2 * w_pre + 2 * cert.j1)
        for succ in system.ca.jump_map(chi):
            n_pairs += 1
            v_post = hybrid_lyapunov(system, cert, succ, rows)
            if accepting:
                margin = 2 * v_pre + overshoot - v_post
            else:
                margin = 2 * v_pre - v_post
            worst = min(worst, float(np.min(margin)))
    detail = f"{n_pairs} lattice jumps, {n_samples + 1} jump-set samples each"
    return CheckResult("jump-growth", worst >= 0, worst, detail)


def reachable_lattice(system: HybridSystem, chi0: tuple[int, int]) -> set[tuple[int, int]]:
    """Lattice points reachable from chi0 by the constrained jump map."""
    seen = {chi0}
    frontier = [chi0]
    while frontier:
        chi = frontier.pop()
        if chi not in system.ca.jump_set:
            continue
        for nxt in system.ca.jump_map(chi):
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return seen


def check_restricted_time_condition(
    system: HybridSystem,
    cert: CertificateReport,
    zeta0: np.ndarray,
    *,
    chi0: tuple[int, int] | None = None,
    t_max: float = 200.0,
    h_step: float = DEFAULT_H_STEP,
    eps_event: float = DEFAULT_EPS_EVENT,
) -> CheckResult:
    """Outside the recurrent set, no run jumps more than d_max times.

    Enumerates every branch of the system restricted to the complement of the
    recurrent set and verifies the jump budget together with the nonnegative
    hybrid-time conversion slack on every interval (the slack is
    ``(lambda_d - lambda_c) * (d_max - j)``, independent of flow time).
    Roots are the lattice points reachable from chi0 (all jump-set points
    when chi0 is None), each paired with the supplied continuous start; the
    budget argument is purely discrete, so the roots' lattice reachability is
    what matters, not their continuous states.
    """
    base = system
    restricted = system.restricted(lambda x: not base.in_recurrent_set(x))
    worst = math.inf
    max_jumps = 0
    n_leaves = 0
    passed = True
    details = []
    cache: dict = {}
    if chi0 is None:
        roots = sorted(system.ca.jump_set)
    else:
        roots = sorted(reachable_lattice(system, chi0))
    for chi in roots:
        x0 = restricted.state(chi, zeta0)
        if not restricted.gamma(x0):
            continue  # starts inside the recurrent set: nothing to bound
        tree = enumerate_runs(
            restricted,
            x0,
            depth=cert.d_max + 1,
            t_max=t_max,
            h_step=h_step,
            eps_event=eps_event,
            flow_cache=cache,
        )
        for arc in leaf_arcs(tree):
            n_leaves += 1
            max_jumps = max(max_jumps, arc.n_jumps)
            if arc.n_jumps > cert.d_max or arc.termination == "depth-limit":
                passed = False
                details.append(
                    f"run from {chi} made {arc.n_jumps} jumps "
                    f"(budget {cert.d_max}, ended {arc.termination})"
                )
            for seg in arc.segments:
                slack = (cert.lambda_d - cert.lambda_c) * (cert.d_max - seg.j)
                worst = min(worst, slack)
    if worst < 0:
        passed = False
    details.append(f"{n_leaves} restricted runs, deepest used {max_jumps} jumps")
    return CheckResult("restricted-jump-budget", passed, worst, "; ".join(details))


def run_all_checks(
    system: HybridSystem,
    cert: CertificateReport,
    zeta0: np.ndarray,
    *,
    chi0: tuple[int, int] | None = None,
    n_flow_samples: int = 50_000,
    n_jump_samples: int = 256,
    box_radius: float = 6.0,
    seed: int = 0,
) -> CertificateReport:
    """Run the three certificate checks and record them on the report."""
    cert.checks.clear()
    cert.checks.append(
        check_flow_condition(
            system, cert, n_samples=n_flow_samples, box_radius=box_radius, seed=seed
        )
    )
    cert.checks.append(
        check_jump_condition(
            system, cert, n_samples=n_jump_samples, box_radius=box_radius,
            seed=seed + 1,
        )
    )
    cert.checks.append(check_restricted_time_condition(system, cert, zeta0, chi0=chi0))
    return cert


@dataclass(frozen=True)
class RecurrenceBound:
    """Predicted worst-case hybrid time to reach the recurrent set."""

    v_upper: float
    v_lower: float
    t_hat: float

    def to_dict(self) -> dict:
        return {"v_upper": self.v_upper, "v_lower": self.v_lower, "t_hat": self.t_hat}


def _offset_directions(
    nu: int, grid_groups: tuple[tuple[int, ...], ...]
) -> np.ndarray:
    """One row per offset group: indicator of its plant-state indices."""
    dirs = np.zeros((len(grid_groups), nu))
    for row, group in enumerate(grid_groups):
        for idx in group:
            if not 0 <= idx < nu:
                raise CertificateError(f"grid index {idx} outside the plant state")
            dirs[row, idx] = 1.0
    return dirs


def _offset_combos(
    grid_offsets: tuple[float, ...], n_groups: int
) -> np.ndarray:
    if n_groups == 0:
        return np.zeros((1, 0))
    return np.stack(
        np.meshgrid(*[np.asarray(grid_offsets, dtype=float)] * n_groups, indexing="ij"),
        axis=-1,
    ).reshape(-1, n_groups)


def grid_initial_states(
    x0: HybridState,
    grid_offsets: tuple[float, ...],
    grid_groups: tuple[tuple[int, ...], ...],
) -> list[tuple[tuple[float, ...], HybridState]]:
    """(offsets, state) pairs: every offset combination added to the plant state."""
    nu = x0.xi.shape[0]
    dirs = _offset_directions(nu, grid_groups)
    out = []
    for combo in _offset_combos(grid_offsets, len(grid_groups)):
        xi = x0.xi + combo @ dirs
        out.append(
            (tuple(float(v) for v in combo),
             HybridState(x0.s, x0.o, xi, x0.xi_hat.copy()))
        )
    return out


def predicted_ugr_bound(
    system: HybridSystem,
    cert: CertificateReport,
    x0: HybridState,
    grid_offsets: tuple[float, ...] = (0.0,),
    grid_groups: tuple[tuple[int, ...], ...] = (),
) -> RecurrenceBound:
    """Hybrid-time bound for reaching the recurrent set from the start grid.

    The certificate is at most v_upper on the grid: the quadratic part is
    convex, so its exact maximum over the offset box sits at an extreme
    offset combination, found by vertex enumeration when the number of groups
    is small and bounded soundly by interval arithmetic otherwise.  It is at
    least v_lower = min(1, lam * w_min) everywhere outside the recurrent set
    (either the distance term is >= 1, or the state is on an accepting core
    point with the output outside the region, hence outside the jump ball).
    Decay at rate gamma with offset big_m then forces an entry by
    ``(big_m + log(v_upper / v_lower)) / gamma``.
    """
    lo = min(grid_offsets) if grid_offsets else 0.0
    hi = max(grid_offsets) if grid_offsets else 0.0
    nu = system.plant.nu
    err0 = error_coords(system, x0.o, x0.zeta)
    dirs_xi = _offset_directions(nu, grid_groups)
    # an offset added to xi shifts the tracking AND estimation errors alike
    dirs_err = np.hstack([dirs_xi, dirs_xi])

    k = dirs_err.shape[0]
    if k == 0:
        w_max = float(quadratic_value(cert.p, err0))
    elif k <= _VERTEX_GUARD:
        w_max = -math.inf
        for bits in range(2**k):
            combo = np.array([hi if (bits >> i) & 1 else lo for i in range(k)])
            row = err0 + combo @ dirs_err
            w_max = max(w_max, float(quadratic_value(cert.p, row)))
    else:
        half = 0.5 * (hi - lo)
        mid = err0 + (0.5 * (hi + lo)) * dirs_err.sum(axis=0)
        spread = half * np.abs(dirs_err).sum(axis=0)
        base = float(quadratic_value(cert.p, mid))
        cross = 2.0 * float(np.abs(cert.p @ mid) @ spread)
        quad = float(spread @ np.abs(cert.p) @ spread)
        w_max = base + cross + quad

    v_upper = system.ca.potential(x0.chi) + cert.lam * w_max
    v_lower = min(1.0, cert.lam * cert.w_min)
    if v_upper <= 0 or v_lower <= 0:
        raise CertificateError("degenerate certificate levels for the bound")
    t_hat = (cert.big_m + math.log(v_upper / v_lower)) / cert.gamma
    return RecurrenceBound(v_upper=v_upper, v_lower=v_lower, t_hat=t_hat)


@dataclass(frozen=True)
class SweepRun:
    policy: str
    offsets: tuple[float, ...]
    visits: tuple[tuple[float, int], ...]  # (t, j) of each recurrent-set entry
    termination: str

    @property
    def first_hit(self) -> float | None:
        """Hybrid time t + j of the first recurrent-set entry."""
        if not self.visits:
            return None
        t, j = self.visits[0]
        return t + j

    @property
    def n_visits(self) -> int:
        return len(self.visits)

    @property
    def max_jump_gap(self) -> int | None:
        """Largest jump-count separation between consecutive entries."""
        if len(self.visits) < 2:
            return None
        return max(b[1] - a[1] for a, b in zip(self.visits, self.visits[1:]))


@dataclass(frozen=True)
class RecurrenceSweep:
    runs: tuple[SweepRun, ...]
    t_hat: float

    @property
    def all_reached(self) -> bool:
        return all(r.first_hit is not None for r in self.runs)

    @property
    def max_first_hit(self) -> float:
        hits = [r.first_hit for r in self.runs if r.first_hit is not None]
        if not hits:
            raise CertificateError("no run reached the recurrent set")
        return max(hits)

    @property
    def min_visits(self) -> int:
        return min(r.n_visits for r in self.runs)

    @property
    def max_jump_gap(self) -> int | None:
        gaps = [r.max_jump_gap for r in self.runs if r.max_jump_gap is not None]
        return max(gaps) if gaps else None

    @property
    def within_bound(self) -> bool:
        return self.all_reached and self.max_first_hit <= self.t_hat

    def to_dict(self) -> dict:
        return {
            "t_hat": self.t_hat,
            "n_runs": len(self.runs),
            "all_reached": self.all_reached,
            "max_first_hit": self.max_first_hit if self.all_reached else None,
            "min_visits": self.min_visits,
            "max_jump_gap": self.max_jump_gap,
            "within_bound": self.within_bound,
            "runs": [
                {
                    "policy": r.policy,
                    "offsets": list(r.offsets),
                    "first_hit": r.first_hit,
                    "n_visits": r.n_visits,
                    "max_jump_gap": r.max_jump_gap,
                    "termination": r.termination,
                }
                for r in self.runs
            ],
        }


def recurrent_entries(system: HybridSystem, arc: HybridArc) -> list[tuple[float, int]]:
    """(t, j) of each entry into the recurrent set along an arc.

    Detection samples the recorded flow grid, so entry times are resolved to
    one scan step.
    """
    entries = []
    inside = False
    for seg in arc.segments:
        chi = (seg.s, seg.o)
        if not system.ca.in_accepting_core(chi):
            inside = False
            continue
        region = system.regions[seg.o]
        outputs = seg.zetas[:, : system.plant.nu] @ system.plant.c.T
        mask = region.contains_rows(outputs)
        for t, hit in zip(seg.times, mask):
            if hit and not inside:
                entries.append((float(t), seg.j))
            inside = bool(hit)
    return entries


def empirical_ugr(
    system: HybridSystem,
    x0: HybridState,
    t_hat: float,
    policies: tuple[str, ...] = ("first",),
    grid_offsets: tuple[float, ...] = (0.0,),
    grid_groups: tuple[tuple[int, ...], ...] = (),
    *,
    t_max: float = 100.0,
    j_max: int = 20,
    h_step: float = DEFAULT_H_STEP,
    eps_event: float = DEFAULT_EPS_EVENT,
) -> RecurrenceSweep:
    """Measure recurrent-set hitting times over a start grid and policy set.

    Each run starts from x0 with one combination of group offsets added to
    the plant state, follows one branch policy (parsed fresh per run so
    seeded policies replay identically), and records every entry into the
    recurrent set as a (t, j) visit.
    """
    cache: dict = {}
    runs = []
    for offsets, start in grid_initial_states(x0, grid_offsets, grid_groups):
        for spec in policies:
            arc = simulate(
                system,
                start,
                parse_policy(spec),
                t_max=t_max,
                j_max=j_max,
                h_step=h_step,
                eps_event=eps_event,
                flow_cache=cache,
            )
            visits = recurrent_entries(system, arc)
            runs.append(
                SweepRun(
                    policy=spec,
                    offsets=offsets,
                    visits=tuple(visits),
                    termination=arc.termination,
                )
            )
    return RecurrenceSweep(runs=tuple(runs), t_hat=t_hat)
