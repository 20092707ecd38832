"""Automaton-guided hybrid closed loops with recurrence certificates.

The package turns a finite automaton over region observations plus a linear
output-feedback plant into a closed-loop hybrid system, simulates its hybrid
arcs exactly, and computes and checks Lyapunov-style certificates that bound
how long any run can stay away from the accepting, in-region states.
"""

from .automaton import (
    AutomatonError,
    BuchiAutomaton,
    InfeasibleAutomaton,
    enabled_observations,
    load_automaton,
    parse_automaton,
    prune_infeasible,
    serialize_automaton,
)
from .certify import (
    CertificateError,
    CertificateReport,
    build_certificate,
    check_flow_condition,
    check_jump_condition,
    check_restricted_time_condition,
    compute_j1,
    compute_w_min,
    empirical_ugr,
    hybrid_lyapunov,
    predicted_ugr_bound,
    run_all_checks,
    select_theta_lambda,
    v_h,
)
from .constrain import (
    ConstrainedAutomaton,
    DistanceTable,
    InfiniteDistance,
    NotInJumpSet,
    constrain,
    distances,
    format_constraint_table,
    format_distance_table,
)
from .hybrid_sim import (
    HybridArc,
    HybridState,
    HybridSystem,
    detect_jump_entry,
    enumerate_runs,
    flow_propagate,
    in_recurrent_set,
    leaf_arcs,
    matrix_exponential,
    observation_word,
    parse_policy,
    restrict,
    simulate,
    state_word,
)
from .plant import (
    ClosedLoop,
    LinearPlant,
    NotHurwitz,
    PlantError,
    Region,
    RegionBlock,
    assemble_closed_loop,
    inscribed_jump_radius,
    make_region,
    solve_lyapunov,
    steady_state,
    validate_plant,
    verify_disjoint,
)
from .scenario import (
    Scenario,
    ScenarioError,
    build_system,
    initial_state,
    load_scenario,
    validate_scenario,
)

__version__ = "0.1.0"
