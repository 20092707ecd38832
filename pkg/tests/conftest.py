"""Session fixtures: the bundled automaton and scenario plus a scalar toy.

The toy plant (one integrator with unit feedback and observer gains, two
point regions at +/-2) is small enough that every certificate quantity has a
hand-derived value; tests freeze those values as oracles.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from buchirec import certify, scenario as scenario_mod
from buchirec.automaton import load_automaton, prune_infeasible
from buchirec.constrain import constrain
from buchirec.data import ROBOTS4_YAML, SURVEIL_BA

TOY_BA = """\
states 3
initial 0
accepting 2
obs 2
trans 0 1 1
trans 1 2 2
trans 2 1 0
"""

TOY_YAML = """\
name: toy
automaton: toy.ba
plant:
  a: [[0.0]]
  b: [[1.0]]
  c: [[1.0]]
gains:
  k: [[1.0]]
  l: [[1.0]]
regions:
  - obs: 1
    blocks: [{indices: [0], center: [2.0], norm: 2, radius: 0.5}]
    jump_radius: 0.4
  - obs: 2
    blocks: [{indices: [0], center: [-2.0], norm: 2, radius: 0.5}]
    jump_radius: 0.4
initial:
  s: 0
  o: 1
  xi: [0.0]
  xi_hat: [0.0]
simulation: {t_max: 40.0, j_max: 9}
"""


@pytest.fixture(scope="session")
def surveil_automaton():
    return load_automaton(SURVEIL_BA)


@pytest.fixture(scope="session")
def surveil_ca(surveil_automaton):
    return constrain(prune_infeasible(surveil_automaton))


@pytest.fixture(scope="session")
def robots4_scenario():
    return scenario_mod.load_scenario(ROBOTS4_YAML)


@pytest.fixture(scope="session")
def robots4_system(robots4_scenario):
    return scenario_mod.build_system(robots4_scenario)


@pytest.fixture(scope="session")
def robots4_x0(robots4_scenario):
    return scenario_mod.initial_state(robots4_scenario)


@pytest.fixture(scope="session")
def robots4_cert(robots4_system):
    return certify.build_certificate(robots4_system)


@pytest.fixture(scope="session")
def toy_dir(tmp_path_factory) -> Path:
    d = tmp_path_factory.mktemp("toy")
    (d / "toy.ba").write_text(TOY_BA)
    (d / "toy.yaml").write_text(TOY_YAML)
    return d


@pytest.fixture(scope="session")
def toy_scenario(toy_dir):
    return scenario_mod.load_scenario(toy_dir / "toy.yaml")


@pytest.fixture(scope="session")
def toy_system(toy_scenario):
    return scenario_mod.build_system(toy_scenario)


@pytest.fixture(scope="session")
def toy_x0(toy_scenario):
    return scenario_mod.initial_state(toy_scenario)


@pytest.fixture(scope="session")
def toy_cert(toy_system):
    return certify.build_certificate(toy_system)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)
