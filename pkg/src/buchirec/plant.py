"""Linear output-feedback plants, target regions, and closed-loop assembly.

The plant is dx/dt = A x + B u with output y = C x and as many inputs as
outputs.  For each observation the output must settle into a designated
region; a steady state (x_o, u_o) holding the output at a target y_o exists
whenever the bordered matrix [[A, B], [C, 0]] is invertible.  The closed loop
combines a state observer with estimate feedback and is summarized by a flow
matrix acting on the stacked (state, estimate) vector plus a per-observation
constant drift.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HURWITZ_TOL",
    "RANK_RTOL",
    "LYAPUNOV_RTOL",
    "STEADY_STATE_RTOL",
    "REGION_MARGIN",
    "PlantError",
    "NotHurwitz",
    "SingularSteadyState",
    "RegionError",
    "LinearPlant",
    "RegionBlock",
    "Region",
    "make_region",
    "inscribed_jump_radius",
    "PlantValidation",
    "validate_plant",
    "steady_state",
    "hurwitz_margin",
    "is_hurwitz",
    "ClosedLoop",
    "assemble_closed_loop",
    "solve_lyapunov",
    "DisjointnessResult",
    "verify_disjoint",
]

HURWITZ_TOL = 1e-9
RANK_RTOL = 1e-10
LYAPUNOV_RTOL = 1e-8
STEADY_STATE_RTOL = 1e-10
REGION_MARGIN = 0.9


class PlantError(ValueError):
    """Plant data violates a structural requirement."""


class NotHurwitz(PlantError):
    """A closed-loop matrix has an eigenvalue too close to or beyond the axis."""


class SingularSteadyState(PlantError):
    """The bordered matrix is singular; no steady state for the target output."""


class RegionError(ValueError):
    """Region geometry is inconsistent (bad block, center outside, bad radius)."""


def _as_matrix(m, name: str) -> np.ndarray:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 2:
        raise PlantError(f"{name} must be a matrix, got ndim={arr.ndim}")
    if not np.all(np.isfinite(arr)):
        raise PlantError(f"{name} has non-finite entries")
    return arr


@dataclass(frozen=True)
class LinearPlant:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "a", _as_matrix(self.a, "A"))
        object.__setattr__(self, "b", _as_matrix(self.b, "B"))
        object.__setattr__(self, "c", _as_matrix(self.c, "C"))
        n = self.a.shape[0]
        if self.a.shape != (n, n):
            raise PlantError("A must be square")
        if self.b.shape[0] != n:
            raise PlantError("B row count must match A")
        if self.c.shape[1] != n:
            raise PlantError("C column count must match A")

    @property
    def nu(self) -> int:
        return self.a.shape[0]

    @property
    def m(self) -> int:
        return self.b.shape[1]

    @property
    def p(self) -> int:
        return self.c.shape[0]


@dataclass(frozen=True)
class RegionBlock:
    """One norm-ball factor of a region, on a subset of output coordinates."""

    indices: tuple[int, ...]
    center: np.ndarray
    norm: float  # 1, 2, or inf
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if len(self.indices) != self.center.shape[0]:
            raise RegionError("block center length must match its index count")
        if self.norm not in (1.0, 2.0, np.inf):
            raise RegionError(f"unsupported block norm {self.norm}")
        if not self.radius > 0:
            raise RegionError("block radius must be positive")

    def distance(self, v: np.ndarray) -> float:
        """Norm distance of the block coordinates of v from the center."""
        return float(np.linalg.norm(v[list(self.indices)] - self.center, ord=self.norm))

    def contains(self, v: np.ndarray) -> bool:
        return self.distance(v) < self.radius


@dataclass(frozen=True)
class Region:
    """Open product of norm balls in output space, with its jump target.

    ``jump_center`` is the output the closed loop regulates to while this
    region's observation is active; ``jump_radius`` is the Euclidean ball
    radius around it that triggers the jump.  The ball is always strictly
    inside the region.
    """

    obs: int
    blocks: tuple[RegionBlock, ...]
    jump_center: np.ndarray
    jump_radius: float

    def contains(self, y: np.ndarray) -> bool:
        return all(b.contains(y) for b in self.blocks)

    def contains_rows(self, ys: np.ndarray) -> np.ndarray:
        """Vectorized membership over rows of ys."""
        ok = np.ones(ys.shape[0], dtype=bool)
        for b in self.blocks:
            diff = ys[:, list(b.indices)] - b.center
            dist = np.linalg.norm(diff, ord=b.norm, axis=1)
            ok &= dist < b.radius
        return ok


def _block_ball_room(block: RegionBlock, y_center: np.ndarray) -> float:
    """Largest rho with the Euclidean rho-ball around y_center inside the block."""
    off = y_center[list(block.indices)] - block.center
    if block.norm == np.inf:
        return block.radius - float(np.linalg.norm(off, ord=np.inf))
    if block.norm == 2.0:
        return block.radius - float(np.linalg.norm(off, ord=2))
    k = len(block.indices)
    return (block.radius - float(np.linalg.norm(off, ord=1))) / np.sqrt(k)


def inscribed_jump_radius(
    blocks: tuple[RegionBlock, ...], y_center: np.ndarray, margin: float = REGION_MARGIN
) -> float:
    """margin times the largest Euclidean ball radius around y_center inside the region.

    A Euclidean ball fits iff it fits in every block: the room per block is the
    block radius (inf- and 2-norm) or radius/sqrt(k) (1-norm on k coordinates),
    each reduced by the center offset.  Raises RegionError when y_center is not
    strictly inside.
    """
    y_center = np.asarray(y_center, dtype=float)
    rooms = [_block_ball_room(b, y_center) for b in blocks]
    if min(rooms) <= 0:
        raise RegionError("jump center lies outside the region")
    if not 0 < margin < 1:
        raise RegionError("margin must be in (0, 1)")
    return margin * min(rooms)


def make_region(
    obs: int,
    blocks: tuple[RegionBlock, ...],
    jump_center: np.ndarray,
    jump_radius: float | None = None,
    margin: float = REGION_MARGIN,
) -> Region:
    """Build a region, computing or validating the jump ball radius.

    A supplied radius is accepted only if the closed Euclidean ball stays
    strictly inside every block; otherwise RegionError names the violation.
    """
    jump_center = np.asarray(jump_center, dtype=float)
    if not blocks:
        raise RegionError("region needs at least one block")
    rooms = [_block_ball_room(b, jump_center) for b in blocks]
    if min(rooms) <= 0:
        raise RegionError(f"region {obs}: jump center lies outside the region")
    if jump_radius is None:
        jump_radius = margin * min(rooms)
    else:
        if not jump_radius > 0:
            raise RegionError(f"region {obs}: jump radius must be positive")
        if jump_radius >= min(rooms):
            raise RegionError(
                f"region {obs}: jump radius {jump_radius} does not fit inside the "
                f"region (largest admissible is {min(rooms):.6g})"
            )
    return Region(obs=obs, blocks=tuple(blocks), jump_center=jump_center,
                  jump_radius=float(jump_radius))


@dataclass
class PlantValidation:
    io_square: bool
    bordered_invertible: bool
    controllable: bool
    observable: bool
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return (
            self.io_square
            and self.bordered_invertible
            and self.controllable
            and self.observable
        )


def _krylov_rank(seed: np.ndarray, step: np.ndarray, rtol: float) -> int:
    """Rank of [seed, step@seed, step^2@seed, ...] by singular values."""
    n = step.shape[0]
    blocks = [seed]
    for _ in range(n - 1):
        blocks.append(step @ blocks[-1])
    mat = np.hstack(blocks)
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


def validate_plant(plant: LinearPlant, rank_rtol: float = RANK_RTOL) -> PlantValidation:
    """Check the structural requirements for observer-based output regulation."""
    io_square = plant.m == plant.p
    notes = []
    if not io_square:
        notes.append(f"m={plant.m} and p={plant.p} differ")

    bordered = np.zeros((plant.nu + plant.p, plant.nu + plant.m))
    bordered[: plant.nu, : plant.nu] = plant.a
    bordered[: plant.nu, plant.nu :] = plant.b
    bordered[plant.nu :, : plant.nu] = plant.c
    sv = np.linalg.svd(bordered, compute_uv=False)
    bordered_invertible = (
        bordered.shape[0] == bordered.shape[1] and sv[-1] > rank_rtol * sv[0]
    )
    if not bordered_invertible:
        notes.append("bordered matrix [[A,B],[C,0]] is singular or not square")

    controllable = _krylov_rank(plant.b, plant.a, rank_rtol) == plant.nu
    if not controllable:
        notes.append("(A, B) is not controllable")
    observable = _krylov_rank(plant.c.T, plant.a.T, rank_rtol) == plant.nu
    if not observable:
        notes.append("(A, C) is not observable")

    return PlantValidation(
        io_square=io_square,
        bordered_invertible=bordered_invertible,
        controllable=controllable,
        observable=observable,
        notes=notes,
    )


def steady_state(
    plant: LinearPlant, y_target: np.ndarray, rtol: float = STEADY_STATE_RTOL
) -> tuple[np.ndarray, np.ndarray]:
    """State and input holding the output at y_target with zero drift.

    Solves [[A, B], [C, 0]] (x_o, u_o) = (0, y_target) and checks the residual
    against rtol * (1 + |y_target|).
    """
    y_target = np.asarray(y_target, dtype=float)
    if y_target.shape != (plant.p,):
        raise PlantError(f"target output must have length {plant.p}")
    n, m = plant.nu, plant.m
    mat = np.zeros((n + plant.p, n + m))
    mat[:n, :n] = plant.a
    mat[:n, n:] = plant.b
    mat[n:, :n] = plant.c
    rhs = np.concatenate([np.zeros(n), y_target])
    if mat.shape[0] != mat.shape[1]:
        raise SingularSteadyState("bordered matrix is not square (m != p)")
    try:
        sol = np.linalg.solve(mat, rhs)
    except np.linalg.LinAlgError as exc:
        raise SingularSteadyState(f"bordered matrix is singular: {exc}") from exc
    residual = float(np.linalg.norm(mat @ sol - rhs))
    bound = rtol * (1.0 + float(np.linalg.norm(y_target)))
    if residual > bound:
        raise SingularSteadyState(
            f"steady-state residual {residual:.3e} exceeds {bound:.3e}"
        )
    return sol[:n], sol[n:]


def hurwitz_margin(mat: np.ndarray) -> float:
    """Largest real part over the spectrum."""
    return float(np.max(np.linalg.eigvals(mat).real))


def is_hurwitz(mat: np.ndarray, tol: float = HURWITZ_TOL) -> bool:
    return hurwitz_margin(mat) <= -tol


def solve_lyapunov(
    f: np.ndarray, q: np.ndarray, rtol: float = LYAPUNOV_RTOL
) -> np.ndarray:
    """Solve P F + F' P = -Q for symmetric positive definite P.

    Uses the vectorized Kronecker-sum linear system, symmetrizes the result,
    and verifies the residual against rtol * |Q|_F and positive definiteness
    via Cholesky.  F must be Hurwitz for a solution to exist with Q > 0.
    """
    f = np.asarray(f, dtype=float)
    q = np.asarray(q, dtype=float)
    n = f.shape[0]
    if f.shape != (n, n) or q.shape != (n, n):
        raise PlantError("F and Q must be square matrices of equal size")
    if not np.allclose(q, q.T):
        raise PlantError("Q must be symmetric")
    eye = np.eye(n)
    system = np.kron(f.T, eye) + np.kron(eye, f.T)
    vec_p = np.linalg.solve(system, -q.reshape(-1))
    p = vec_p.reshape(n, n)
    p = 0.5 * (p + p.T)
    residual = float(np.linalg.norm(p @ f + f.T @ p + q, ord="fro"))
    bound = rtol * float(np.linalg.norm(q, ord="fro"))
    if residual > bound:
        raise PlantError(f"Lyapunov residual {residual:.3e} exceeds {bound:.3e}")
    try:
        np.linalg.cholesky(p)
    except np.linalg.LinAlgError:
        raise NotHurwitz(
            "Lyapunov solution is not positive definite; "
            f"F has eigenvalue with real part {hurwitz_margin(f):.3e}"
        ) from None
    return p


@dataclass(frozen=True)
class ClosedLoop:
    """Observer-based closed loop in stacked (state, estimate) coordinates.

    ``f`` drives the stacked vector, ``g[o]`` is the per-observation drift.
    ``f_err`` is the same dynamics in (tracking error, estimation error)
    coordinates, block upper triangular with A - BK and A - LC on the
    diagonal; ``p`` solves the Lyapunov equation for ``f_err`` with ``q``.
    """

    k: np.ndarray
    l: np.ndarray
    f: np.ndarray
    f_err: np.ndarray
    p: np.ndarray
    q: np.ndarray
    setpoints: dict[int, tuple[np.ndarray, np.ndarray]]
    g: dict[int, np.ndarray]


def assemble_closed_loop(
    plant: LinearPlant,
    k_gain: np.ndarray,
    l_gain: np.ndarray,
    targets: dict[int, np.ndarray],
    q: np.ndarray | None = None,
    hurwitz_tol: float = HURWITZ_TOL,
) -> ClosedLoop:
    """Build the closed loop for feedback gain K and observer gain L.

    ``targets`` maps each observation id to its regulated output.  Both
    A - B K and A - L C must be Hurwitz within the tolerance; otherwise
    NotHurwitz names the offending matrix and eigenvalue.
    """
    k_gain = _as_matrix(k_gain, "K")
    l_gain = _as_matrix(l_gain, "L")
    if k_gain.shape != (plant.m, plant.nu):
        raise PlantError(f"K must be {plant.m}x{plant.nu}")
    if l_gain.shape != (plant.nu, plant.p):
        raise PlantError(f"L must be {plant.nu}x{plant.p}")

    a, b, c = plant.a, plant.b, plant.c
    a_bk = a - b @ k_gain
    a_lc = a - l_gain @ c
    for name, mat in (("A - B K", a_bk), ("A - L C", a_lc)):
        margin = hurwitz_margin(mat)
        if margin > -hurwitz_tol:
            raise NotHurwitz(
                f"{name} is not Hurwitz: eigenvalue real part {margin:.6e}"
            )

    n = plant.nu
    f = np.zeros((2 * n, 2 * n))
    f[:n, :n] = a
    f[:n, n:] = -b @ k_gain
    f[n:, :n] = l_gain @ c
    f[n:, n:] = a_bk - l_gain @ c

    f_err = np.zeros((2 * n, 2 * n))
    f_err[:n, :n] = a_bk
    f_err[:n, n:] = b @ k_gain
    f_err[n:, n:] = a_lc

    setpoints = {}
    g = {}
    bk = b @ k_gain
    for o, y_target in targets.items():
        xi_o, u_o = steady_state(plant, y_target)
        drive = bk @ xi_o + b @ u_o
        setpoints[o] = (xi_o, u_o)
        g[o] = np.concatenate([drive, drive])

    q = np.eye(2 * n) if q is None else np.asarray(q, dtype=float)
    p = solve_lyapunov(f_err, q)
    return ClosedLoop(
        k=k_gain, l=l_gain, f=f, f_err=f_err, p=p, q=q, setpoints=setpoints, g=g
    )


@dataclass(frozen=True)
class DisjointnessResult:
    status: str  # "verified", "overlap", "unverifiable"
    detail: str
    witness: np.ndarray | None = None

    @property
    def ok(self) -> bool:
        return self.status == "verified"


def _circumscribed_euclidean(block: RegionBlock) -> float:
    """Euclidean radius of the smallest 2-ball containing the block ball."""
    if block.norm == np.inf:
        return block.radius * np.sqrt(len(block.indices))
    return block.radius  # 1- and 2-norm balls fit in the 2-ball of equal radius


def _sample_block(rng: np.random.Generator, block: RegionBlock, n: int) -> np.ndarray:
    """n points uniformly covering the block ball (rejection from its box)."""
    k = len(block.indices)
    out = np.empty((n, k))
    filled = 0
    while filled < n:
        cand = rng.uniform(-block.radius, block.radius, size=(2 * (n - filled) + 8, k))
        keep = np.linalg.norm(cand, ord=block.norm, axis=1) < block.radius
        cand = cand[keep]
        take = min(len(cand), n - filled)
        out[filled : filled + take] = cand[:take]
        filled += take
    return out + block.center


def verify_disjoint(
    regions: list[Region], n_samples: int = 100_000, seed: int = 0
) -> DisjointnessResult:
    """Pairwise disjointness of regions.

    First tries a separation certificate: a pair is disjoint when some block
    shared by both regions (same index subset) has center distance larger
    than the sum of the circumscribed Euclidean radii.  Pairs without a
    certificate are sampled: a common point is a definitive overlap witness,
    while absence of one leaves the pair unverifiable (still rejected).
    """
    rng = np.random.default_rng(seed)
    for ra, rb in itertools.combinations(regions, 2):
        separated = False
        for blk_a in ra.blocks:
            for blk_b in rb.blocks:
                if blk_a.indices != blk_b.indices:
                    continue
                gap = float(np.linalg.norm(blk_a.center - blk_b.center))
                if gap > _circumscribed_euclidean(blk_a) + _circumscribed_euclidean(blk_b):
                    separated = True
                    break
            if separated:
                break
        if separated:
            continue

        # No certificate: try to falsify by sampling points of ra inside rb.
        p = 1 + max(max(b.indices) for b in list(ra.blocks) + list(rb.blocks))
        pts = np.zeros((n_samples, p))
        covered = np.zeros(p, dtype=bool)
        for b in ra.blocks:
            pts[:, list(b.indices)] = _sample_block(rng, b, n_samples)
            covered[list(b.indices)] = True
        if not covered.all():
            pts[:, ~covered] = rng.uniform(-10.0, 10.0, size=(n_samples, int((~covered).sum())))
        hits = rb.contains_rows(pts)
        if hits.any():
            witness = pts[int(np.argmax(hits))]
            return DisjointnessResult(
                status="overlap",
                detail=f"regions {ra.obs} and {rb.obs} share a sampled point",
                witness=witness,
            )
        return DisjointnessResult(
            status="unverifiable",
            detail=(
                f"regions {ra.obs} and {rb.obs} have no separation certificate and "
                f"{n_samples} samples found no overlap; rejected as unverifiable"
            ),
        )
    return DisjointnessResult(status="verified", detail="all region pairs separated")
