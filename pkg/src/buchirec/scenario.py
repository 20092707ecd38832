"""Scenario files: plant, gains, regions, automaton, and run parameters.

A scenario is a single YAML document binding everything one experiment needs:
the plant matrices, the feedback and observer gains, one region per
observation with its jump ball, the automaton file (path relative to the
scenario), the initial hybrid state, and simulation/certification parameter
blocks.  Loading aggregates every structural problem instead of stopping at
the first; validation then checks the semantic requirements (plant structure,
Hurwitz gains, region disjointness, observation coverage, initial-state
domain membership) and reports them all.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .automaton import BuchiAutomaton, load_automaton, prune_infeasible
from .constrain import ConstrainedAutomaton, constrain
from .hybrid_sim import HybridState, HybridSystem
from .plant import (
    HURWITZ_TOL,
    ClosedLoop,
    LinearPlant,
    Region,
    RegionBlock,
    assemble_closed_loop,
    hurwitz_margin,
    make_region,
    steady_state,
    validate_plant,
    verify_disjoint,
)

__all__ = [
    "ScenarioError",
    "SimulationParams",
    "CertificationParams",
    "Scenario",
    "ValidationReport",
    "load_scenario",
    "validate_scenario",
    "build_system",
    "initial_state",
]


class ScenarioError(ValueError):
    """Scenario file is structurally invalid; carries every found issue."""

    def __init__(self, issues: list[str]):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))


@dataclass(frozen=True)
class SimulationParams:
    h_step: float = 0.01
    eps_event: float = 1e-9
    t_max: float = 100.0
    j_max: int = 20


@dataclass(frozen=True)
class CertificationParams:
    n_flow_samples: int = 100_000
    n_jump_samples: int = 256
    box_radius: float = 10.0
    seed: int = 0
    grid_offsets: tuple[float, ...] = (0.0,)
    grid_groups: tuple[tuple[int, ...], ...] = ()


@dataclass(frozen=True)
class Scenario:
    name: str
    path: Path | None
    plant: LinearPlant
    k_gain: np.ndarray
    l_gain: np.ndarray
    automaton: BuchiAutomaton
    regions: dict[int, Region]
    x0_s: int
    x0_o: int
    x0_xi: np.ndarray
    x0_xi_hat: np.ndarray
    sim: SimulationParams = field(default_factory=SimulationParams)
    cert: CertificationParams = field(default_factory=CertificationParams)
    out_dir: str = "out"
    policies: tuple[str, ...] = ("first",)


@dataclass
class ValidationReport:
    issues: list[str] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def lines(self) -> list[str]:
        out = [f"issue: {msg}" for msg in self.issues]
        out.extend(f"note: {msg}" for msg in self.notes)
        out.append("validation " + ("PASSED" if self.ok else "FAILED"))
        return out


def _matrix(doc: dict, key: str, issues: list[str]) -> np.ndarray | None:
    try:
        value = np.asarray(doc[key], dtype=float)
    except KeyError:
        issues.append(f"missing matrix {key!r}")
        return None
    except (TypeError, ValueError):
        issues.append(f"matrix {key!r} is not numeric")
        return None
    if value.ndim != 2:
        issues.append(f"matrix {key!r} must be two-dimensional")
        return None
    return value


def _vector(node, label: str, issues: list[str]) -> np.ndarray | None:
    try:
        value = np.asarray(node, dtype=float)
    except (TypeError, ValueError):
        issues.append(f"{label} is not numeric")
        return None
    if value.ndim != 1:
        issues.append(f"{label} must be a flat list")
        return None
    return value


_NORMS = {1: 1.0, 2: 2.0, "1": 1.0, "2": 2.0, "inf": np.inf}


def _parse_region(node: dict, n_outputs: int, issues: list[str]) -> Region | None:
    if "obs" not in node:
        issues.append("region without an 'obs' id")
        return None
    obs = node["obs"]
    blocks = []
    seen: set[int] = set()
    for i, raw in enumerate(node.get("blocks", [])):
        label = f"region {obs} block {i}"
        idx = raw.get("indices")
        center = _vector(raw.get("center"), f"{label} center", issues)
        norm = _NORMS.get(raw.get("norm"))
        if idx is None or center is None:
            continue
        if norm is None:
            issues.append(f"{label}: norm must be 1, 2, or inf")
            continue
        if any(not 0 <= int(j) < n_outputs for j in idx):
            issues.append(f"{label}: output index out of range 0..{n_outputs - 1}")
            continue
        if seen.intersection(int(j) for j in idx):
            issues.append(f"{label}: output index used by an earlier block")
            continue
        seen.update(int(j) for j in idx)
        try:
            blocks.append(
                RegionBlock(
                    indices=tuple(int(j) for j in idx),
                    center=center,
                    norm=norm,
                    radius=float(raw.get("radius", 0.0)),
                )
            )
        except ValueError as exc:
            issues.append(f"{label}: {exc}")
    if seen != set(range(n_outputs)):
        issues.append(f"region {obs}: blocks must cover every output index exactly once")
        return None
    jump_center = np.empty(n_outputs)
    for b in blocks:
        jump_center[list(b.indices)] = b.center
    try:
        return make_region(
            obs=int(obs),
            blocks=tuple(blocks),
            jump_center=jump_center,
            jump_radius=node.get("jump_radius"),
        )
    except ValueError as exc:
        issues.append(str(exc))
        return None


def load_scenario(path: str | Path) -> Scenario:
    """Parse and structurally validate a scenario file.

    Raises ScenarioError carrying every structural issue found, not only the
    first one.  Semantic validation is a separate step (validate_scenario).
    """
    path = Path(path)
    issues: list[str] = []
    try:
        doc = yaml.safe_load(path.read_text())
    except FileNotFoundError:
        raise ScenarioError([f"scenario file not found: {path}"]) from None
    except yaml.YAMLError as exc:
        raise ScenarioError([f"scenario file is not valid YAML: {exc}"]) from None
    if not isinstance(doc, dict):
        raise ScenarioError(["scenario file must be a mapping"])

    plant_doc = doc.get("plant")
    plant = None
    if not isinstance(plant_doc, dict):
        issues.append("missing 'plant' section")
    else:
        a = _matrix(plant_doc, "a", issues)
        b = _matrix(plant_doc, "b", issues)
        c = _matrix(plant_doc, "c", issues)
        if a is not None and b is not None and c is not None:
            try:
                plant = LinearPlant(a=a, b=b, c=c)
            except ValueError as exc:
                issues.append(str(exc))

    gains_doc = doc.get("gains")
    k_gain = l_gain = None
    if not isinstance(gains_doc, dict):
        issues.append("missing 'gains' section")
    else:
        k_gain = _matrix(gains_doc, "k", issues)
        l_gain = _matrix(gains_doc, "l", issues)

    automaton = None
    if "automaton" not in doc:
        issues.append("missing 'automaton' file reference")
    else:
        auto_path = Path(doc["automaton"])
        if not auto_path.is_absolute():
            auto_path = path.parent / auto_path
        try:
            automaton = load_automaton(auto_path)
        except FileNotFoundError:
            issues.append(f"automaton file not found: {auto_path}")
        except ValueError as exc:
            issues.append(f"automaton: {exc}")

    regions: dict[int, Region] = {}
    region_nodes = doc.get("regions")
    if not isinstance(region_nodes, list) or not region_nodes:
        issues.append("missing 'regions' list")
    elif plant is not None:
        for node in region_nodes:
            region = _parse_region(node, plant.p, issues)
            if region is None:
                continue
            if region.obs in regions:
                issues.append(f"duplicate region for observation {region.obs}")
                continue
            regions[region.obs] = region

    init = doc.get("initial")
    x0_s = x0_o = None
    x0_xi = x0_xi_hat = None
    if not isinstance(init, dict):
        issues.append("missing 'initial' section")
    else:
        try:
            x0_s = int(init["s"])
            x0_o = int(init["o"])
        except (KeyError, TypeError, ValueError):
            issues.append("initial state needs integer 's' and 'o'")
        x0_xi = _vector(init.get("xi"), "initial xi", issues)
        hat = init.get("xi_hat", init.get("xi"))
        x0_xi_hat = _vector(hat, "initial xi_hat", issues)
        if plant is not None and x0_xi is not None and x0_xi.shape != (plant.nu,):
            issues.append(f"initial xi must have {plant.nu} entries")
        if plant is not None and x0_xi_hat is not None and x0_xi_hat.shape != (plant.nu,):
            issues.append(f"initial xi_hat must have {plant.nu} entries")

    def _params(cls, key):
        node = doc.get(key, {})
        if not isinstance(node, dict):
            issues.append(f"'{key}' must be a mapping")
            return cls()
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(node) - known
        if unknown:
            issues.append(f"unknown keys in '{key}': {sorted(unknown)}")
        kwargs = {k: v for k, v in node.items() if k in known}
        if "grid_offsets" in kwargs:
            kwargs["grid_offsets"] = tuple(float(v) for v in kwargs["grid_offsets"])
        if "grid_groups" in kwargs:
            kwargs["grid_groups"] = tuple(
                tuple(int(i) for i in group) for group in kwargs["grid_groups"]
            )
        try:
            return cls(**kwargs)
        except (TypeError, ValueError) as exc:
            issues.append(f"bad '{key}' parameters: {exc}")
            return cls()

    sim = _params(SimulationParams, "simulation")
    cert = _params(CertificationParams, "certification")
    policies = tuple(str(p) for p in doc.get("policies", ["first"]))

    if issues:
        raise ScenarioError(issues)
    return Scenario(
        name=str(doc.get("name", path.stem)),
        path=path,
        plant=plant,
        k_gain=k_gain,
        l_gain=l_gain,
        automaton=automaton,
        regions=regions,
        x0_s=x0_s,
        x0_o=x0_o,
        x0_xi=x0_xi,
        x0_xi_hat=x0_xi_hat,
        sim=sim,
        cert=cert,
        out_dir=str(doc.get("out_dir", "out")),
        policies=policies,
    )


def validate_scenario(scenario: Scenario) -> ValidationReport:
    """Check every semantic requirement, aggregating all failures."""
    report = ValidationReport()
    plant = scenario.plant

    pv = validate_plant(plant)
    if not pv.ok:
        report.issues.extend("plant: " + note for note in pv.notes)
    else:
        report.notes.append(
            f"plant ok: {plant.nu} states, {plant.m} inputs, {plant.p} outputs"
        )

    if scenario.k_gain.shape != (plant.m, plant.nu):
        report.issues.append(f"gain K must be {plant.m}x{plant.nu}")
    if scenario.l_gain.shape != (plant.nu, plant.p):
        report.issues.append(f"gain L must be {plant.nu}x{plant.p}")
    if not report.issues:
        for name, mat in (
            ("A - B K", plant.a - plant.b @ scenario.k_gain),
            ("A - L C", plant.a - scenario.l_gain @ plant.c),
        ):
            margin = hurwitz_margin(mat)
            if margin > -HURWITZ_TOL:
                report.issues.append(
                    f"{name} is not Hurwitz (eigenvalue real part {margin:.3e})"
                )
            else:
                report.notes.append(f"{name} Hurwitz, margin {margin:.3e}")

    obs_in_automaton = scenario.automaton.observations
    for o in scenario.regions:
        if o not in obs_in_automaton:
            report.issues.append(f"region observation {o} does not exist in the automaton")
    for o in sorted(obs_in_automaton):
        if o not in scenario.regions:
            report.issues.append(f"automaton observation {o} has no region")

    disjoint = verify_disjoint(list(scenario.regions.values()))
    if disjoint.ok:
        report.notes.append("regions pairwise disjoint (separation certificates)")
    else:
        report.issues.append(f"regions: {disjoint.detail}")

    if pv.ok:
        for o, region in sorted(scenario.regions.items()):
            try:
                xi_o, u_o = steady_state(plant, region.jump_center)
            except ValueError as exc:
                report.issues.append(f"steady state for observation {o}: {exc}")
                continue
            report.notes.append(
                f"observation {o}: jump radius {region.jump_radius:.6g}, "
                f"steady input norm {np.linalg.norm(u_o):.3g}"
            )

    try:
        pruned = prune_infeasible(scenario.automaton)
        ca = constrain(pruned)
    except ValueError as exc:
        report.issues.append(f"automaton: {exc}")
        return report
    if (scenario.x0_s, scenario.x0_o) not in ca.jump_set:
        report.issues.append(
            f"initial lattice point (s{scenario.x0_s},o{scenario.x0_o}) is not in "
            "the constrained jump set"
        )
    return report


def build_system(scenario: Scenario, q: np.ndarray | None = None) -> HybridSystem:
    """Prune, constrain, assemble the closed loop, and bind the regions."""
    pruned = prune_infeasible(scenario.automaton)
    ca: ConstrainedAutomaton = constrain(pruned)
    targets = {o: r.jump_center for o, r in scenario.regions.items()}
    loop: ClosedLoop = assemble_closed_loop(
        scenario.plant, scenario.k_gain, scenario.l_gain, targets, q=q
    )
    return HybridSystem(
        ca=ca, plant=scenario.plant, loop=loop, regions=dict(scenario.regions)
    )


def initial_state(scenario: Scenario) -> HybridState:
    return HybridState(
        s=scenario.x0_s,
        o=scenario.x0_o,
        xi=np.array(scenario.x0_xi, dtype=float),
        xi_hat=np.array(scenario.x0_xi_hat, dtype=float),
    )
