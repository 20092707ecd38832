"""Command-line entry point: validate, analyze, simulate, and certify scenarios.

Exit codes are stable per failure class: 0 success (and every requested check
passed), 2 parse/IO errors, 3 scenario validation failures, 4 synthesis
failures, 5 simulation errors, 6 certification or sweep failures.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import certify as certify_mod
from . import hybrid_sim, scenario as scenario_mod, trace
from .automaton import load_automaton, prune_infeasible
from .constrain import constrain, format_constraint_table, format_distance_table
from .plant import PlantError

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_SYNTHESIS = 4
EXIT_SIMULATION = 5
EXIT_CERTIFICATION = 6


def _load_scenario(args) -> scenario_mod.Scenario:
    if not args.scenario:
        raise scenario_mod.ScenarioError(["--scenario is required for this command"])
    return scenario_mod.load_scenario(args.scenario)


def _constrained_from_args(args):
    if args.automaton:
        auto = load_automaton(args.automaton)
    else:
        auto = _load_scenario(args).automaton
    return constrain(prune_infeasible(auto))


def _out_dir(args, scn: scenario_mod.Scenario | None) -> Path:
    base = args.out or (scn.out_dir if scn else "out")
    path = Path(base)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _cmd_validate(args) -> int:
    scn = _load_scenario(args)
    report = scenario_mod.validate_scenario(scn)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_VALIDATION


def _cmd_distances(args) -> int:
    ca = _constrained_from_args(args)
    sys.stdout.write(format_distance_table(ca))
    return EXIT_OK


def _cmd_constrain(args) -> int:
    ca = _constrained_from_args(args)
    sys.stdout.write(format_constraint_table(ca))
    return EXIT_OK


def _cmd_synthesize(args) -> int:
    scn = _load_scenario(args)
    report = scenario_mod.validate_scenario(scn)
    if not report.ok:
        for line in report.lines():
            print(line, file=sys.stderr)
        return EXIT_VALIDATION
    try:
        system = scenario_mod.build_system(scn)
    except PlantError as exc:
        print(f"synthesis failed: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    loop = system.loop
    residual = np.linalg.norm(loop.p @ loop.f_err + loop.f_err.T @ loop.p + loop.q)
    print(f"closed-loop state dimension: {loop.f.shape[0]}")
    eigs = np.sort_complex(np.linalg.eigvals(loop.f_err))
    print("error-dynamics eigenvalues:")
    for val in eigs:
        print(f"  {val.real:+.9f} {val.imag:+.9f}j")
    print(f"energy matrix residual: {residual:.3e}")
    for o, (xi_o, u_o) in sorted(loop.setpoints.items()):
        print(
            f"observation {o}: steady state norm {np.linalg.norm(xi_o):.6g}, "
            f"steady input norm {np.linalg.norm(u_o):.6g}"
        )
    return EXIT_OK


def _sim_limits(args, scn: scenario_mod.Scenario) -> tuple[float, int]:
    t_max = args.tmax if args.tmax is not None else scn.sim.t_max
    j_max = args.jmax if args.jmax is not None else scn.sim.j_max
    return t_max, j_max


def _cmd_simulate(args) -> int:
    scn = _load_scenario(args)
    system = scenario_mod.build_system(scn)
    x0 = scenario_mod.initial_state(scn)
    t_max, j_max = _sim_limits(args, scn)
    try:
        policy = hybrid_sim.parse_policy(args.policy)
        arc = hybrid_sim.simulate(
            system,
            x0,
            policy,
            t_max=t_max,
            j_max=j_max,
            h_step=scn.sim.h_step,
            eps_event=scn.sim.eps_event,
        )
    except (ValueError, hybrid_sim.SimulationError) as exc:
        print(f"simulation failed: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    cert = certify_mod.build_certificate(system)
    out = _out_dir(args, scn)
    csv_path = out / f"{scn.name}_trace.csv"
    svg_path = out / f"{scn.name}_outputs.svg"
    trace.write_trace_csv(csv_path, system, arc, cert=cert)
    trace.plot_output_svg(svg_path, system, arc, title=scn.name)
    print(f"termination: {arc.termination} after {arc.n_jumps} jumps, "
          f"t = {arc.total_time:.6g}")
    print("state word: " + " ".join(f"s{s}" for s in hybrid_sim.state_word(arc)))
    print("observation word: " + " ".join(f"o{o}" for o in hybrid_sim.observation_word(arc)))
    print(f"trace: {csv_path}")
    print(f"plot: {svg_path}")
    return EXIT_OK


def _cmd_enumerate_runs(args) -> int:
    scn = _load_scenario(args)
    system = scenario_mod.build_system(scn)
    x0 = scenario_mod.initial_state(scn)
    t_max, _ = _sim_limits(args, scn)
    try:
        tree = hybrid_sim.enumerate_runs(
            system,
            x0,
            depth=args.depth,
            t_max=t_max,
            h_step=scn.sim.h_step,
            eps_event=scn.sim.eps_event,
        )
    except hybrid_sim.SimulationError as exc:
        print(f"enumeration failed: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    arcs = hybrid_sim.leaf_arcs(tree)
    print(f"{len(arcs)} runs with up to {args.depth} jumps")
    for arc in arcs:
        word = " ".join(
            f"(s{s},o{o})"
            for s, o in zip(hybrid_sim.state_word(arc), hybrid_sim.observation_word(arc))
        )
        print(f"  {word}  [{arc.termination}]")
    return EXIT_OK


def _cmd_certify(args) -> int:
    scn = _load_scenario(args)
    report = scenario_mod.validate_scenario(scn)
    if not report.ok:
        for line in report.lines():
            print(line, file=sys.stderr)
        return EXIT_VALIDATION
    system = scenario_mod.build_system(scn)
    x0 = scenario_mod.initial_state(scn)
    cert = certify_mod.build_certificate(system)
    certify_mod.run_all_checks(
        system,
        cert,
        x0.zeta,
        chi0=x0.chi,
        n_flow_samples=scn.cert.n_flow_samples,
        n_jump_samples=scn.cert.n_jump_samples,
        box_radius=scn.cert.box_radius,
        seed=scn.cert.seed,
    )
    bound = certify_mod.predicted_ugr_bound(
        system, cert, x0, scn.cert.grid_offsets, scn.cert.grid_groups
    )
    cert.t_hat = bound.t_hat
    out = _out_dir(args, scn)
    report_path = out / f"{scn.name}_certificate.json"
    payload = cert.to_dict()
    payload["bound"] = bound.to_dict()
    report_path.write_text(json.dumps(payload, indent=2) + "\n")
    for line in cert.summary_lines():
        print(line)
    print(f"report: {report_path}")
    return EXIT_OK if cert.ok else EXIT_CERTIFICATION


def _cmd_ugr_sweep(args) -> int:
    scn = _load_scenario(args)
    system = scenario_mod.build_system(scn)
    x0 = scenario_mod.initial_state(scn)
    cert = certify_mod.build_certificate(system)
    bound = certify_mod.predicted_ugr_bound(
        system, cert, x0, scn.cert.grid_offsets, scn.cert.grid_groups
    )
    t_max, j_max = _sim_limits(args, scn)
    sweep = certify_mod.empirical_ugr(
        system,
        x0,
        bound.t_hat,
        policies=scn.policies,
        grid_offsets=scn.cert.grid_offsets,
        grid_groups=scn.cert.grid_groups,
        t_max=t_max,
        j_max=j_max,
        h_step=scn.sim.h_step,
        eps_event=scn.sim.eps_event,
    )
    out = _out_dir(args, scn)
    report_path = out / f"{scn.name}_ugr_sweep.json"
    report_path.write_text(json.dumps(sweep.to_dict(), indent=2) + "\n")
    print(f"runs: {len(sweep.runs)}")
    print(f"all reached the recurrent set: {sweep.all_reached}")
    if sweep.all_reached:
        print(f"max first hit (t+j): {sweep.max_first_hit:.6g}")
    print(f"min visits per run: {sweep.min_visits}")
    if sweep.max_jump_gap is not None:
        print(f"max jump gap between visits: {sweep.max_jump_gap}")
    print(f"predicted bound t_hat: {sweep.t_hat:.6g}")
    print(f"report: {report_path}")
    return EXIT_OK if sweep.within_bound else EXIT_CERTIFICATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buchirec",
        description=(
            "Automaton-guided hybrid closed loops: constrain the automaton, "
            "simulate hybrid arcs, and certify recurrence of the accepting set."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, automaton=False, policy=False, depth=False):
        p.add_argument("--scenario", help="scenario YAML file")
        p.add_argument("--out", help="output directory (default: scenario out_dir)")
        p.add_argument("--tmax", type=float, default=None, help="flow time budget")
        p.add_argument("--jmax", type=int, default=None, help="jump budget")
        if automaton:
            p.add_argument("--automaton", help="automaton file (overrides scenario)")
        if policy:
            p.add_argument(
                "--policy",
                default="first",
                help="first | random:<seed> | scripted:<s3[,s6.o2,...]>",
            )
        if depth:
            p.add_argument("--depth", type=int, default=3, help="jump depth to expand")

    common(sub.add_parser("validate", help="check every scenario requirement"))
    common(sub.add_parser("distances", help="print state distances to acceptance"),
           automaton=True)
    common(sub.add_parser("constrain", help="print the constrained jump table"),
           automaton=True)
    common(sub.add_parser("synthesize", help="assemble and report the closed loop"))
    common(sub.add_parser("simulate", help="simulate one arc and emit trace + plot"),
           policy=True)
    common(sub.add_parser("enumerate-runs", help="expand every branch choice"),
           depth=True)
    common(sub.add_parser("certify", help="compute and check the recurrence certificate"))
    common(sub.add_parser("ugr-sweep", help="measure hitting times over the start grid"))
    return parser


_COMMANDS = {
    "validate": _cmd_validate,
    "distances": _cmd_distances,
    "constrain": _cmd_constrain,
    "synthesize": _cmd_synthesize,
    "simulate": _cmd_simulate,
    "enumerate-runs": _cmd_enumerate_runs,
    "certify": _cmd_certify,
    "ugr-sweep": _cmd_ugr_sweep,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except scenario_mod.ScenarioError as exc:
        for issue in exc.issues:
            print(f"error: {issue}", file=sys.stderr)
        return EXIT_PARSE
    except PlantError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    except hybrid_sim.SimulationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIMULATION
    except certify_mod.CertificateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CERTIFICATION
    except (FileNotFoundError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
