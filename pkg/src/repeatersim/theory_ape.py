"""Closed-form model of the all-photonic (RGS) repeater chain.

Rates follow the loss chain: per-photon survival 1 - mu on each node-to-BSM
hop, a photonic Bell measurement succeeding with (1 - mu)^2 / 2 on leaf
pairs, tree-encoded logical measurements succeeding with

    P_X = R0 = 1 - [1 - (1-mu)^(b1+1)]^b0,
    P_Z = (1 - mu + mu R1)^b0,        R1 = 1 - mu^b1,

and a whole iteration succeeding with

    P_RGS = [1 - (1 - P_BSM)^m]^(n+1) [P_X^2 P_Z^(2m-2)]^n.

The rate is normalized by the end-node memory cost: EGR = P_RGS / (T_RGS MQ_e).

Fidelity tracks emitter dephasing during generation. Every logical-X vote is
flipped with probability e_vote = p_z(t_c), where t_c spans the emissions and
the emitter-ancilla CZ of one subtree arm; a majority vote over the obtained
votes (ties counted as errors) gives the correctable part, and the leaf-phase
interval t_l = 2 CZ + 1 emission adds an uncorrectable flip e_xl = p_z(t_l).
The resulting per-measurement error rate feeds the X/Z flip composition over
the 2n logical measurements of the fused chain.

The gate-by-gate generation schedule lives here (``branch_schedule``); the
total generation time, the t_c/t_l intervals, and the simulator's error
injection all derive from this one schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .pairstate import PauliErrorRates, compose_pauli_errors, fidelity_from_errors
from .params import ApeParams, ChainTopology, RgsParams, total_loss_ape

__all__ = [
    "GatePhase",
    "GateStep",
    "ApeRateBreakdown",
    "ApeFidelityBreakdown",
    "UndefinedFidelityError",
    "branch_schedule",
    "indirect_probs",
    "logical_meas_probs",
    "p_bsm_photonic",
    "p_rgs",
    "t_rgs",
    "decoherence_intervals",
    "mq_e",
    "link_loss_ape",
    "egr_ape",
    "majority_vote_error",
    "dephasing_flip_prob",
    "fidelity_ape",
]


class GatePhase(Enum):
    CORE = "core"  # building one subtree arm of the encoded core qubit
    LEAF = "leaf"  # attaching the branch's leaf photon and detaching the emitter


@dataclass(frozen=True)
class GateStep:
    """One gate of the per-branch generation schedule.

    ``arm`` indexes the subtree arm for core-phase gates (None in the leaf
    phase). ``decoheres`` marks intervals during which the emitter holds live
    entanglement, i.e. the intervals that feed dephasing errors.
    """

    kind: str  # "emit" | "cz" | "measure"
    duration_s: float
    phase: GatePhase
    arm: int | None
    decoheres: bool


def branch_schedule(rgs: RgsParams, params: ApeParams) -> list[GateStep]:
    """Gate sequence generating one of the 2m branches.

    Per subtree arm: b1+1 photon emissions (the level-1 photon and its b1
    children), one emitter-ancilla CZ, then an emitter readout that hands the
    arm to the ancilla and resets the emitter. The leaf phase closes the
    branch: two emitter-ancilla CZ gates, the leaf-photon emission, and the
    emitter readout. The schedule is the emitter's busy time; ancilla
    readouts at a branch boundary overlap the next branch's emitter work and
    therefore add no duration.
    """
    steps: list[GateStep] = []
    for arm in range(rgs.b0):
        for _ in range(rgs.b1 + 1):
            steps.append(GateStep("emit", params.t_emit_s, GatePhase.CORE, arm, True))
        steps.append(GateStep("cz", params.t_cz_s, GatePhase.CORE, arm, True))
        steps.append(GateStep("measure", params.t_meas_s, GatePhase.CORE, arm, False))
    for _ in range(2):
        steps.append(GateStep("cz", params.t_cz_s, GatePhase.LEAF, None, True))
    steps.append(GateStep("emit", params.t_emit_s, GatePhase.LEAF, None, True))
    steps.append(GateStep("measure", params.t_meas_s, GatePhase.LEAF, None, False))
    return steps


def t_rgs(rgs: RgsParams, params: ApeParams) -> float:
    """Total RGS generation time: 2m sequential branch schedules."""
    return 2 * rgs.m * sum(step.duration_s for step in branch_schedule(rgs, params))


def decoherence_intervals(rgs: RgsParams, params: ApeParams) -> tuple[float, float]:
    """(t_c, t_l): emitter dephasing spans of one subtree arm and of the leaf phase."""
    steps = branch_schedule(rgs, params)
    t_c = sum(s.duration_s for s in steps if s.decoheres and s.arm == 0)
    t_l = sum(s.duration_s for s in steps if s.decoheres and s.phase is GatePhase.LEAF)
    return t_c, t_l


def link_loss_ape(params: ApeParams, topology: ChainTopology) -> float:
    """Per-photon loss from a node to its midpoint BSM station."""
    return total_loss_ape(params, topology.hop_km, topology).total


def p_bsm_photonic(mu: float) -> float:
    """Linear-optics Bell measurement on a leaf pair: both arrive, coin 1/2."""
    return (1.0 - mu) ** 2 / 2.0


def indirect_probs(mu: float, b0: int, b1: int) -> tuple[float, float]:
    """(R0, R1): odds of recovering a Z outcome indirectly at tree levels 0 and 1."""
    if not 0.0 <= mu <= 1.0:
        raise ValueError("mu must lie in [0, 1]")
    r1 = 1.0 - mu**b1
    r0 = 1.0 - (1.0 - (1.0 - mu) ** (b1 + 1)) ** b0
    return r0, r1


def logical_meas_probs(mu: float, b0: int, b1: int) -> tuple[float, float]:
    """(P_X, P_Z): success odds of the two logical measurements on a core qubit."""
    r0, r1 = indirect_probs(mu, b0, b1)
    p_z = (1.0 - mu + mu * r1) ** b0
    return r0, p_z


def p_rgs(mu: float, rgs: RgsParams, n: int) -> float:
    """Probability that an iteration over n repeaters succeeds end to end."""
    if n < 0:
        raise ValueError("n must be >= 0")
    p_bsm = p_bsm_photonic(mu)
    p_x, p_z = logical_meas_probs(mu, rgs.b0, rgs.b1)
    node_factor = 1.0 - (1.0 - p_bsm) ** rgs.m
    return node_factor ** (n + 1) * (p_x**2 * p_z ** (2 * rgs.m - 2)) ** n


def mq_e(topology: ChainTopology, t_rgs_s: float, m: int) -> int:
    """Memory qubits each end node needs to keep generation cycles back to back.

    m qubits serve the current iteration, one batch of m per generation cycle
    elapsing before the adjacent BSM outcome returns, plus one qubit per cycle
    of the wait for the farthest outcomes. Ceilings of an exactly zero
    numerator are zero (a single-segment chain has no far outcomes to wait on).
    """
    if t_rgs_s <= 0:
        raise ValueError("t_rgs_s must be > 0")
    horizon = topology.signal_speed_km_per_s * t_rgs_s
    near = math.ceil(topology.segment_km / horizon)
    far_km = topology.chain_length_km - topology.segment_km
    far = math.ceil(far_km / horizon) if far_km > 0 else 0
    return m + near * m + far


@dataclass(frozen=True)
class ApeRateBreakdown:
    mu: float
    p_bsm: float
    p_x: float
    p_z: float
    r0: float
    r1: float
    p_rgs: float
    t_rgs_s: float
    mq_e: int
    egr: float


def egr_ape(params: ApeParams, topology: ChainTopology, rgs: RgsParams) -> ApeRateBreakdown:
    """Full rate breakdown: EGR = P_RGS / (T_RGS * MQ_e)."""
    mu = link_loss_ape(params, topology)
    r0, r1 = indirect_probs(mu, rgs.b0, rgs.b1)
    p_x, p_z = logical_meas_probs(mu, rgs.b0, rgs.b1)
    prob = p_rgs(mu, rgs, topology.n_repeaters)
    t_gen = t_rgs(rgs, params)
    memories = mq_e(topology, t_gen, rgs.m)
    return ApeRateBreakdown(
        mu=mu,
        p_bsm=p_bsm_photonic(mu),
        p_x=p_x,
        p_z=p_z,
        r0=r0,
        r1=r1,
        p_rgs=prob,
        t_rgs_s=t_gen,
        mq_e=memories,
        egr=prob / (t_gen * memories),
    )


# --- fidelity ----------------------------------------------------------------


class UndefinedFidelityError(ValueError):
    """No logical-X vote is obtainable, so the fidelity chain has no value."""


def dephasing_flip_prob(interval_s: float, t2_s: float) -> float:
    """Z-flip probability of a qubit dephasing for ``interval_s``: (1 - e^{-t/T2})/2."""
    if t2_s <= 0:
        raise ValueError("t2_s must be > 0")
    return -math.expm1(-interval_s / t2_s) / 2.0


def majority_vote_error(e_vote: float, votes: int) -> float:
    """Wrong-majority probability among ``votes`` obtained votes, ties included.

    sum_{j = ceil(votes/2)}^{votes} C(votes, j) e^j (1-e)^(votes-j); the lower
    limit counts the tie case of an even vote count as an error.
    """
    if votes < 1:
        raise ValueError("votes must be >= 1")
    if not 0.0 <= e_vote <= 1.0:
        raise ValueError("e_vote must lie in [0, 1]")
    lo = math.ceil(votes / 2)
    return sum(
        math.comb(votes, j) * e_vote**j * (1.0 - e_vote) ** (votes - j)
        for j in range(lo, votes + 1)
    )


@dataclass(frozen=True)
class ApeFidelityBreakdown:
    p_z_gate: float  # single-CZ dephasing flip probability, for reference
    e_vote: float
    s0: float
    e_x_c: float
    e_x_l: float
    e_x: float
    e_z: float
    rates: PauliErrorRates
    fbar: float


def fidelity_ape(
    params: ApeParams, topology: ChainTopology, rgs: RgsParams, n: int | None = None
) -> ApeFidelityBreakdown:
    """End-to-end fidelity from emitter dephasing during RGS generation.

    Only logical-X measurements inherit generation errors (ē_Z = 0); each of
    the chain's 2n logical-X outcomes is wrong with probability
    ē_X = ē_{X,c} + ē_{X,l}, and wrong outcomes act as X/Z byproduct flips on
    the final pair.
    """
    if n is None:
        n = topology.n_repeaters
    mu = link_loss_ape(params, topology)
    if mu >= 1.0:
        raise UndefinedFidelityError("total photon loss: no vote is obtainable")
    t_c, t_l = decoherence_intervals(rgs, params)
    t2 = params.t2_emitter_s
    e_vote = dephasing_flip_prob(t_c, t2)
    s0 = (1.0 - mu) ** (rgs.b1 + 1)
    if s0 == 0.0:
        raise UndefinedFidelityError("no vote is obtainable (S0 = 0)")

    # average the majority-vote error over the obtained-vote count m' >= 1
    r_norm = 0.0
    acc = 0.0
    for m_votes in range(1, rgs.b0 + 1):
        t0 = math.comb(rgs.b0, m_votes) * s0**m_votes * (1.0 - s0) ** (rgs.b0 - m_votes)
        r_norm += t0
        acc += t0 * majority_vote_error(e_vote, m_votes)
    if r_norm == 0.0:
        raise UndefinedFidelityError("no vote is obtainable (R = 0)")
    e_x_c = acc / r_norm
    e_x_l = dephasing_flip_prob(t_l, t2)
    e_x = e_x_c + e_x_l
    if e_x > 0.5:
        raise UndefinedFidelityError(
            f"per-measurement error rate {e_x:.3f} exceeds 1/2; outside model validity"
        )
    rates = compose_pauli_errors(e_x, n)
    return ApeFidelityBreakdown(
        p_z_gate=dephasing_flip_prob(params.t_cz_s, t2),
        e_vote=e_vote,
        s0=s0,
        e_x_c=e_x_c,
        e_x_l=e_x_l,
        e_x=e_x,
        e_z=0.0,
        rates=rates,
        fbar=fidelity_from_errors(rates),
    )
