"""Rate and fidelity models plus Monte Carlo simulation of memory-based
(trapped-ion) and all-photonic (repeater-graph-state) quantum repeater
chains, with built-in cross-validation between the two routes and an
exhaustive RGS-shape optimizer."""

__version__ = "0.1.0"

from .config import ConfigError, RunConfig, dump_config, load_config, parse_config
from .optimizer import (
    OptimizationResult,
    optimize_frontier,
    optimize_rgs,
    repeaterless_rate,
)
from .pairstate import (
    CorrelatedPairState,
    PauliErrorRates,
    chain_state,
    compose_dbsm,
    compose_pauli_errors,
    fidelity,
    fidelity_from_errors,
    heg_state,
)
from .params import (
    ApeParams,
    ChainTopology,
    LossBudget,
    RgsParams,
    TrappedIonParams,
    channel_loss,
    photon_count,
    total_loss_1g,
    total_loss_ape,
)
from .sim_ape import ApeChain, estimate_ape, run_ape_iteration
from .sim_ion import (
    IonChain,
    estimate,
    run_heg,
    run_hop_by_hop_iteration,
    run_two_step_iteration,
)
from .theory_ape import egr_ape, fidelity_ape, p_rgs, t_rgs
from .theory_ion import egr_1g, expected_cycle_time, expected_fidelity_1g
