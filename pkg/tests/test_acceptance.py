"""End-to-end acceptance checks, one per shipped guarantee.

Each test prints a single visible PASS/FAIL line with its runtime, so a full
suite log doubles as an acceptance report.  Tolerances and runtime budgets
are pinned inside the assertions; nothing here is tunable from outside.
"""

from __future__ import annotations

import math
import time

import numpy as np
import pytest

from buchirec import certify
from buchirec.cli import main
from buchirec.constrain import constrain
from buchirec.data import SURVEIL_BA
from buchirec.hybrid_sim import observation_word, parse_policy, simulate, state_word
from buchirec.plant import solve_lyapunov
from helpers import (
    lyapunov_residual,
    random_full_row_rank,
    random_hurwitz,
    random_pruned_automaton,
    random_spd,
    w_min_oracle,
)


class _Budget:
    """Context manager: times a block and prints one visible verdict line."""

    def __init__(self, capsys, label: str, seconds: float):
        self.capsys = capsys
        self.label = label
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        ok = exc_type is None and elapsed < self.seconds
        with self.capsys.disabled():
            print(
                f"acceptance {self.label}: {'PASS' if ok else 'FAIL'} "
                f"({elapsed:.2f}s of {self.seconds:g}s budget)"
            )
        if exc_type is None:
            assert elapsed < self.seconds, (
                f"{self.label} took {elapsed:.2f}s, budget {self.seconds:g}s"
            )
        return False


def test_constraint_table_exact(capsys):
    with _Budget(capsys, "constraint-table", 1.0):
        rc = main(["constrain", "--automaton", str(SURVEIL_BA)])
        out = capsys.readouterr().out
        assert rc == 0
        assert out == (
            "(s0,o2),(s2,o2),(s6,o2)→{s4}\n"
            "(s1,o3),(s3,o3)→{s2}\n"
            "(s4,o3)→{(s5,o1)}\n"
            "(s5,o1)→{(s3,o3),(s6,o2)}\n"
        )


def test_scripted_run_word_prefixes(robots4_system, robots4_x0, capsys):
    with _Budget(capsys, "scripted-run-words", 10.0):
        arc = simulate(
            robots4_system,
            robots4_x0,
            parse_policy("scripted:s6"),
            t_max=60.0,
            j_max=7,
        )
        assert arc.n_jumps == 7
        assert state_word(arc) == (0, 4, 5, 6, 4, 5, 6, 4)
        assert observation_word(arc)[:7] == (2, 3, 1, 2, 3, 1, 2)


_SWEEP_CACHE: dict[str, certify.RecurrenceSweep] = {}


def _grid_sweep(scn, system, x0, cert) -> certify.RecurrenceSweep:
    if "robots4" not in _SWEEP_CACHE:
        bound = certify.predicted_ugr_bound(
            system, cert, x0, scn.cert.grid_offsets, scn.cert.grid_groups
        )
        _SWEEP_CACHE["robots4"] = certify.empirical_ugr(
            system,
            x0,
            bound.t_hat,
            policies=scn.policies,
            grid_offsets=scn.cert.grid_offsets,
            grid_groups=scn.cert.grid_groups,
            t_max=scn.sim.t_max,
            j_max=scn.sim.j_max,
            h_step=scn.sim.h_step,
            eps_event=scn.sim.eps_event,
        )
    return _SWEEP_CACHE["robots4"]


def test_grid_recurrence(
    robots4_scenario, robots4_system, robots4_x0, robots4_cert, capsys
):
    with _Budget(capsys, "grid-recurrence", 120.0):
        scn = robots4_scenario
        sweep = _grid_sweep(scn, robots4_system, robots4_x0, robots4_cert)
        # one run per start-offset combination and branch policy
        assert len(sweep.runs) == 3 ** len(scn.cert.grid_groups) * len(scn.policies)
        assert scn.sim.j_max == 20
        assert all(run.first_hit is not None for run in sweep.runs)
        assert sweep.min_visits >= 3
        assert sweep.max_jump_gap <= robots4_cert.d_max + 1


def test_certificate_suite(robots4_system, robots4_x0, capsys):
    with _Budget(capsys, "certificate-suite", 120.0):
        cert = certify.build_certificate(robots4_system)
        certify.run_all_checks(
            robots4_system,
            cert,
            robots4_x0.zeta,
            chi0=robots4_x0.chi,
            n_flow_samples=100_000,
            n_jump_samples=256,
            box_radius=10.0,
            seed=0,
        )
        by_name = {c.name: c for c in cert.checks}
        assert set(by_name) == {"flow-decay", "jump-growth", "restricted-jump-budget"}
        for check in by_name.values():
            assert check.passed and check.margin > 0.0, check.line()
        assert cert.lambda_c < 0.0
        assert cert.lambda_d == math.log(2.0)
        assert cert.lam_lo < cert.lam < cert.lam_hi


def test_automaton_invariant_suite(capsys):
    with _Budget(capsys, "automaton-invariants", 30.0):
        rng = np.random.default_rng(424242)
        violations: list[str] = []
        for case in range(200):
            auto = random_pruned_automaton(rng, max_states=12, n_obs=3)
            ca = constrain(auto)
            dist = ca.dist
            d_max = dist.d_max
            for s in auto.states:
                if not ca.oc[s]:
                    violations.append(f"case {case}: state {s} lost all observations")
            for chi in ca.jump_set:
                for nxt in ca.jump_map(chi):
                    if nxt not in ca.jump_set:
                        violations.append(f"case {case}: {chi} escapes to {nxt}")
                    bound = -1 + (1 + d_max if chi[0] in auto.accepting else 0)
                    if dist[nxt[0]] - dist[chi[0]] > bound:
                        violations.append(
                            f"case {case}: potential rises {chi} -> {nxt}"
                        )
        assert violations == []


def test_numeric_accuracy(capsys):
    with _Budget(capsys, "numeric-accuracy", 60.0):
        rng = np.random.default_rng(9090)

        worst_residual = 0.0
        for _ in range(100):
            n = int(rng.integers(2, 33))
            f = random_hurwitz(rng, n)
            q = random_spd(rng, n)
            p = solve_lyapunov(f, q)
            worst_residual = max(worst_residual, lyapunov_residual(f, p, q))
            np.linalg.cholesky(p)  # raises unless positive definite
        assert worst_residual <= 1e-8

        worst_w = 0.0
        for _ in range(50):
            nu = int(rng.integers(2, 7))
            p_out = int(rng.integers(1, nu + 1))
            p_mat = random_spd(rng, 2 * nu)
            c = random_full_row_rank(rng, p_out, nu)
            radius = float(rng.uniform(0.05, 2.0))
            closed, _ = certify.compute_w_min(p_mat, c, {1: radius})
            oracle = w_min_oracle(p_mat, c, radius)
            worst_w = max(worst_w, abs(closed - oracle) / oracle)
        assert worst_w <= 1e-6


def test_flow_derivative_accuracy(robots4_system, robots4_cert, capsys):
    with _Budget(capsys, "derivative-accuracy", 60.0):
        from buchirec.certify import error_coords, quadratic_value
        from buchirec.hybrid_sim import flow_propagate

        sys_ = robots4_system
        cert = robots4_cert
        rng = np.random.default_rng(5555)
        h = 1e-5
        worst = 0.0
        for _ in range(100):
            o = int(rng.choice(list(sys_.regions)))
            zeta = rng.uniform(-5.0, 5.0, size=2 * sys_.plant.nu)
            f, g = sys_.loop.f, sys_.loop.g[o]
            analytic = -float(quadratic_value(cert.q, error_coords(sys_, o, zeta)))
            w_plus = float(
                quadratic_value(
                    cert.p, error_coords(sys_, o, flow_propagate(f, g, zeta, h))
                )
            )
            w_minus = float(
                quadratic_value(
                    cert.p, error_coords(sys_, o, flow_propagate(-f, -g, zeta, h))
                )
            )
            fd = (w_plus - w_minus) / (2.0 * h)
            worst = max(worst, abs(fd - analytic) / max(abs(analytic), 1.0))
        assert worst <= 1e-6


def test_hitting_time_bound(
    robots4_scenario, robots4_system, robots4_x0, robots4_cert, capsys
):
    with _Budget(capsys, "hitting-time-bound", 120.0):
        sweep = _grid_sweep(
            robots4_scenario, robots4_system, robots4_x0, robots4_cert
        )
        assert sweep.all_reached
        assert sweep.max_first_hit <= sweep.t_hat
        assert sweep.within_bound


def test_closed_loop_spectrum(robots4_scenario, capsys):
    with _Budget(capsys, "closed-loop-spectrum", 1.0):
        from scipy.linalg import block_diag

        scn = robots4_scenario
        a, b, c = scn.plant.a, scn.plant.b, scn.plant.c
        a_ctrl = a - b @ scn.k_gain
        a_obs = a - scn.l_gain @ c
        n_axes = a.shape[0] // 2
        assert n_axes == 8
        for mat, expected in (
            (a_ctrl, np.array([-1.0 - 0.5j, -1.0 + 0.5j])),
            (a_obs, np.array([-5.0 + 0.0j, -5.0 + 0.0j])),
        ):
            blocks = [mat[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] for i in range(n_axes)]
            # the loop really is axis-decoupled: no coupling outside the blocks
            assert np.array_equal(mat, block_diag(*blocks))
            for blk in blocks:
                eigs = np.sort_complex(np.linalg.eigvals(blk))
                assert np.max(np.abs(eigs - expected)) <= 1e-9
