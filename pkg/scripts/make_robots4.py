#!/usr/bin/env python3
"""Generate the bundled four-robot scenario file.

Four identical planar robots (double integrator with velocity drag per axis)
each patrol three regions of interest laid out around a per-robot base point.
The generated document spells out every default so the file doubles as a
template for new scenarios.
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import yaml

# Per-axis dynamics: state (position, velocity), input = drive force,
# output = position.
A_AXIS = np.array([[0.0, 1.0], [0.0, -1.0]])
B_AXIS = np.array([[0.0], [1.0]])
C_AXIS = np.array([[1.0, 0.0]])
K_AXIS = np.array([[1.25, 1.0]])  # closed-loop poles -1 +/- 0.5i per axis
L_AXIS = np.array([[9.0], [16.0]])  # observer poles -5, -5 per axis

N_ROBOTS = 4
AXES_PER_ROBOT = 2

BASES = [(-2.0, -2.0), (2.0, -2.0), (-2.0, 2.0), (2.0, 2.0)]

# Region layout relative to each robot's base: (offset, norm, radius).
REGION_SHAPES = {
    1: {"offset": (-1.2, 0.0), "norm": 1, "radius": 0.1},
    2: {"offset": (0.8, 1.0), "norm": 2, "radius": 0.3},
    3: {"offset": (0.9, -1.1), "norm": "inf", "radius": 0.2},
}

# Jump-ball radii.  Observation 1 has none: its square-norm block only admits
# a Euclidean ball of radius 0.1/sqrt(2) ~ 0.0707, so the loader's inscribed
# default (0.9 of that) is used instead of a hand-picked value.
JUMP_RADII = {1: None, 2: 0.29, 3: 0.19}

INITIAL_OFFSET = (0.0, 0.3)  # starting position relative to the base
INITIAL_LATTICE = {"s": 0, "o": 2}


def _block_diag(block: np.ndarray, copies: int) -> np.ndarray:
    rows, cols = block.shape
    out = np.zeros((rows * copies, cols * copies))
    for i in range(copies):
        out[i * rows : (i + 1) * rows, i * cols : (i + 1) * cols] = block
    return out


def _listify(mat: np.ndarray) -> list[list[float]]:
    return [[float(v) for v in row] for row in mat]


def build_document() -> dict:
    a = _block_diag(A_AXIS, N_ROBOTS * AXES_PER_ROBOT)
    b = _block_diag(B_AXIS, N_ROBOTS * AXES_PER_ROBOT)
    c = _block_diag(C_AXIS, N_ROBOTS * AXES_PER_ROBOT)
    k = _block_diag(K_AXIS, N_ROBOTS * AXES_PER_ROBOT)
    l = _block_diag(L_AXIS, N_ROBOTS * AXES_PER_ROBOT)

    regions = []
    for obs, shape in REGION_SHAPES.items():
        blocks = []
        for r, (bx, by) in enumerate(BASES):
            ox, oy = shape["offset"]
            blocks.append(
                {
                    "indices": [2 * r, 2 * r + 1],
                    "center": [bx + ox, by + oy],
                    "norm": shape["norm"],
                    "radius": shape["radius"],
                }
            )
        region = {"obs": obs, "blocks": blocks}
        if JUMP_RADII[obs] is not None:
            region["jump_radius"] = JUMP_RADII[obs]
        regions.append(region)

    xi = []
    for bx, by in BASES:
        xi.extend([bx + INITIAL_OFFSET[0], 0.0, by + INITIAL_OFFSET[1], 0.0])

    return {
        "name": "robots4",
        "automaton": "surveil.ba",
        "out_dir": "out",
        "plant": {"a": _listify(a), "b": _listify(b), "c": _listify(c)},
        "gains": {"k": _listify(k), "l": _listify(l)},
        "regions": regions,
        "initial": {
            "s": INITIAL_LATTICE["s"],
            "o": INITIAL_LATTICE["o"],
            "xi": [float(v) for v in xi],
            "xi_hat": [float(v) for v in xi],
        },
        "simulation": {
            "h_step": 0.01,
            "eps_event": 1.0e-9,
            "t_max": 200.0,
            "j_max": 20,
        },
        "certification": {
            "n_flow_samples": 100000,
            "n_jump_samples": 256,
            "box_radius": 10.0,
            "seed": 0,
            "grid_offsets": [-1.0, 0.0, 1.0],
            "grid_groups": [[4 * r, 4 * r + 2] for r in range(N_ROBOTS)],
        },
        "policies": [
            "scripted:s3",
            "scripted:s6",
            "scripted:s3,s6",
            "scripted:s6,s3",
            "random:11",
        ],
    }


HEADER = """\
# Four planar robots, one double integrator with drag per axis (16 states,
# 8 inputs, 8 outputs), patrolling three regions around per-robot bases.
# Generated by scripts/make_robots4.py; edit that script, not this file.
# Region 1 omits jump_radius on purpose: see the generator for the reason.
"""


def main() -> None:
    default_out = (
        Path(__file__).resolve().parent.parent
        / "src"
        / "buchirec"
        / "data"
        / "robots4.yaml"
    )
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=default_out)
    args = parser.parse_args()

    text = yaml.safe_dump(
        build_document(), sort_keys=False, default_flow_style=None, width=220
    )
    args.out.write_text(HEADER + text)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
