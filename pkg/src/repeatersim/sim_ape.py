"""Protocol-level Monte Carlo of the all-photonic repeater chain.

Every iteration, each repeater generates one RGS whose photons follow the
deterministic gate schedule of ``theory_ape.branch_schedule``; during the
decohering intervals the emitter picks up Z flips which propagate to the
photonic state as vote flips (one subtree arm's vote, for a core-phase
error) or as uncorrectable X_L flips (leaf-phase error). Photons then fly
to the midpoint stations, each surviving its hop independently; every
station needs one of its m leaf-pair Bell measurements to fire, the core
qubits behind the winning pair are measured logically in X, all others in
Z, and lost photons are patched through the tree's indirect measurements.

Errors are carried as parities, not state vectors: a wrong logical-X
outcome at an even chain position flips one Pauli-frame class, at an odd
position the other, and end-node memory dephasing during the wait for the
classical outcomes feeds the same two classes. An iteration contributes
fidelity 1 when both classes are clean, else 0, estimating exactly the
analytic 1 - E_X - E_Y - E_Z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import rng_stream
from .params import ApeParams, ChainTopology, RgsParams
from .results import ApeSweepResult, TrialRecord, mean_and_sem
from .theory_ape import (
    GatePhase,
    branch_schedule,
    dephasing_flip_prob,
    link_loss_ape,
    mq_e,
    t_rgs,
)

__all__ = [
    "ApeChain",
    "RgsPhotonPlan",
    "RgsErrorDraws",
    "TreeSide",
    "NodeOutcome",
    "ApeTrialOutcome",
    "build_photon_plan",
    "generate_rgs_trial",
    "transmit_and_measure",
    "resolve_frame_and_fidelity",
    "run_ape_iteration",
    "estimate_ape",
]

LEAF, LEVEL1, LEVEL2 = 0, 1, 2


@dataclass(frozen=True)
class RgsPhotonPlan:
    """Emission and arrival schedule of one RGS, as parallel arrays.

    Core photons pass through a per-branch delay line sized so that the
    branch's leaf always reaches the station first; within a branch, core
    photons keep their emission order. ``branch`` indexes the 2m branches in
    generation order (0..m-1 head left, m..2m-1 head right).
    """

    rgs: RgsParams
    branch: np.ndarray  # (photons,) int
    kind: np.ndarray  # (photons,) int: LEAF | LEVEL1 | LEVEL2
    arm: np.ndarray  # (photons,) int, -1 for leaves
    emission_s: np.ndarray  # (photons,) float
    arrival_s: np.ndarray  # (photons,) float, at the BSM station
    branch_leaf_emission_s: np.ndarray  # (2m,) float

    @property
    def total_photons(self) -> int:
        return len(self.branch)

    def direction(self, branch: int) -> str:
        return "left" if branch < self.rgs.m else "right"


@dataclass(frozen=True)
class RgsErrorDraws:
    """Sampled generation errors of one RGS."""

    vote_flips: np.ndarray  # (2m, b0) bool: arm's vote parity flipped
    leaf_flips: np.ndarray  # (2m,) bool: uncorrectable X_L flip


def build_photon_plan(
    rgs: RgsParams, params: ApeParams, hop_delay_s: float = 0.0
) -> RgsPhotonPlan:
    """Walk the generation schedule and lay out every photon's timeline."""
    steps = branch_schedule(rgs, params)
    branch_duration = sum(s.duration_s for s in steps)
    branches, kinds, arms, emissions = [], [], [], []
    leaf_emission = np.zeros(2 * rgs.m)
    for b in range(2 * rgs.m):
        t = b * branch_duration
        arm_emitted: dict[int, int] = {}
        for step in steps:
            t += step.duration_s
            if step.kind != "emit":
                continue
            if step.phase is GatePhase.CORE:
                count = arm_emitted.get(step.arm, 0)
                arm_emitted[step.arm] = count + 1
                kinds.append(LEVEL1 if count == 0 else LEVEL2)
                arms.append(step.arm)
            else:
                kinds.append(LEAF)
                arms.append(-1)
                leaf_emission[b] = t
            branches.append(b)
            emissions.append(t)
    branch_arr = np.array(branches)
    kind_arr = np.array(kinds)
    emission_arr = np.array(emissions)

    arrival = emission_arr + hop_delay_s
    for b in range(2 * rgs.m):
        sel = (branch_arr == b) & (kind_arr != LEAF)
        first_core = emission_arr[sel].min()
        # delay line: land after the leaf, preserving emission order
        arrival[sel] += (leaf_emission[b] - first_core) + params.t_emit_s
    return RgsPhotonPlan(
        rgs=rgs,
        branch=branch_arr,
        kind=kind_arr,
        arm=np.array(arms),
        emission_s=emission_arr,
        arrival_s=arrival,
        branch_leaf_emission_s=leaf_emission,
    )


def generate_rgs_trial(
    rgs: RgsParams,
    params: ApeParams,
    rng: np.random.Generator,
    hop_delay_s: float = 0.0,
    plan: RgsPhotonPlan | None = None,
) -> tuple[RgsPhotonPlan, RgsErrorDraws]:
    """Sample one RGS generation: the photon plan plus injected errors.

    Every decohering gate interval draws an independent emitter Z flip with
    probability (1 - exp(-T_gate / T2)) / 2. Flips during a subtree arm's
    interval toggle that arm's vote parity; flips during the leaf phase
    toggle the branch's uncorrectable X_L parity.
    """
    if plan is None:
        plan = build_photon_plan(rgs, params, hop_delay_s)
    t2 = params.t2_emitter_s
    arm_gates = [params.t_emit_s] * (rgs.b1 + 1) + [params.t_cz_s]
    leaf_gates = [params.t_cz_s, params.t_cz_s, params.t_emit_s]
    p_arm = np.array([dephasing_flip_prob(t, t2) for t in arm_gates])
    p_leaf = np.array([dephasing_flip_prob(t, t2) for t in leaf_gates])

    arm_draws = rng.random((2 * rgs.m, rgs.b0, len(arm_gates))) < p_arm
    leaf_draws = rng.random((2 * rgs.m, len(leaf_gates))) < p_leaf
    errors = RgsErrorDraws(
        vote_flips=np.logical_xor.reduce(arm_draws, axis=2),
        leaf_flips=np.logical_xor.reduce(leaf_draws, axis=1),
    )
    return plan, errors


@dataclass(frozen=True)
class TreeSide:
    """One half-RGS facing a station: survival draws plus its error slices.

    All arrays are side-local (index 0..m-1); ``global_branches`` maps back
    to the generating RGS's 2m branch indices.
    """

    leaf: np.ndarray  # (m,) bool
    level1: np.ndarray  # (m, b0) bool
    level2: np.ndarray  # (m, b0, b1) bool
    vote_flips: np.ndarray  # (m, b0) bool
    leaf_flips: np.ndarray  # (m,) bool
    global_branches: np.ndarray  # (m,) int

    @classmethod
    def sample(
        cls,
        rgs: RgsParams,
        mu: float,
        errors: RgsErrorDraws,
        side: str,
        rng: np.random.Generator,
    ) -> "TreeSide":
        m = rgs.m
        base = 0 if side == "left" else m
        branches = np.arange(base, base + m)
        return cls(
            leaf=rng.random(m) < (1.0 - mu),
            level1=rng.random((m, rgs.b0)) < (1.0 - mu),
            level2=rng.random((m, rgs.b0, rgs.b1)) < (1.0 - mu),
            vote_flips=errors.vote_flips[base : base + m],
            leaf_flips=errors.leaf_flips[base : base + m],
            global_branches=branches,
        )


def _measure_tree(side: TreeSide, pos: int, x_basis: bool) -> tuple[bool, bool]:
    """(obtained, outcome_flipped) for one core qubit's logical measurement.

    Logical X: every fully received arm casts a vote; the outcome follows
    the vote majority, a tie counts as a wrong outcome, and a leaf-phase
    flip inverts whatever the votes said. Logical Z: every level-1 photon is
    measured directly or through any surviving child; generation errors
    never reach it.
    """
    l1 = side.level1[pos]
    l2 = side.level2[pos]
    if x_basis:
        complete = l1 & l2.all(axis=1)
        votes = int(np.count_nonzero(complete))
        if votes == 0:
            return False, False
        wrong = int(np.count_nonzero(side.vote_flips[pos] & complete))
        tie = 2 * wrong == votes
        majority_wrong = 2 * wrong > votes
        flipped = tie or (majority_wrong ^ bool(side.leaf_flips[pos]))
        return True, flipped
    obtained = bool(np.all(l1 | l2.any(axis=1)))
    return obtained, False


@dataclass(frozen=True)
class NodeOutcome:
    """One BSM station's verdict for an iteration."""

    bsm_success_any: bool
    selected_pair: int  # branch-pair index, -1 if none
    logical_ok: bool  # every required X_L / Z_L measurement obtained
    x_flip_left: bool  # wrong logical-X outcome on the left-side tree
    x_flip_right: bool


def transmit_and_measure(
    left: TreeSide | np.ndarray,
    right: TreeSide | np.ndarray,
    rng: np.random.Generator,
) -> NodeOutcome:
    """One station: m leaf-pair Bell measurements, then the tree readout.

    ``left``/``right`` are half-RGS trees or, at the chain's ends, the bare
    survival flags of the end node's photons. The lowest-indexed successful
    pair selects the X_L branches; everything else is measured in Z_L.
    """
    left_leaf = left.leaf if isinstance(left, TreeSide) else left
    right_leaf = right.leaf if isinstance(right, TreeSide) else right
    m = len(left_leaf)
    coins = rng.random(m) < 0.5
    pair_ok = left_leaf & right_leaf & coins
    if not pair_ok.any():
        return NodeOutcome(False, -1, False, False, False)
    selected = int(np.argmax(pair_ok))

    logical_ok = True
    flips = [False, False]
    for idx, side in enumerate((left, right)):
        if not isinstance(side, TreeSide):
            continue  # bare end-node photons carry no trees
        for pos in range(m):
            obtained, flipped = _measure_tree(side, pos, x_basis=(pos == selected))
            if not obtained:
                logical_ok = False
            elif pos == selected:
                flips[idx] = flipped
    return NodeOutcome(True, selected, logical_ok, flips[0], flips[1])


def resolve_frame_and_fidelity(
    x_flips_by_position: list[bool], memory_flips: tuple[bool, bool] = (False, False)
) -> int:
    """1 when the announced Pauli frame matches the true one, else 0.

    ``x_flips_by_position`` lists the 2n logical-X outcome errors along the
    chain (positions 2..2n+1, i.e. each repeater's left then right core).
    Flips at even positions and the left memory's dephasing feed one
    stabilizer class, odd positions and the right memory the other; any net
    parity leaves an orthogonal Bell state.
    """
    class_even, class_odd = memory_flips
    for offset, flipped in enumerate(x_flips_by_position):
        if (offset + 2) % 2 == 0:
            class_even ^= flipped
        else:
            class_odd ^= flipped
    return 0 if (class_even or class_odd) else 1


@dataclass(frozen=True)
class ApeChain:
    """APE chain configuration with derived per-trial constants."""

    params: ApeParams
    topology: ChainTopology
    rgs: RgsParams
    mu: float
    t_rgs_s: float
    mq_e: int
    plan: RgsPhotonPlan
    include_memory_dephasing: bool = True

    @classmethod
    def build(
        cls,
        params: ApeParams,
        topology: ChainTopology,
        rgs: RgsParams,
        include_memory_dephasing: bool = True,
    ) -> "ApeChain":
        t_gen = t_rgs(rgs, params)
        return cls(
            params=params,
            topology=topology,
            rgs=rgs,
            mu=link_loss_ape(params, topology),
            t_rgs_s=t_gen,
            mq_e=mq_e(topology, t_gen, rgs.m),
            plan=build_photon_plan(rgs, params, topology.delay_s(topology.hop_km)),
            include_memory_dephasing=include_memory_dephasing,
        )

    @property
    def n(self) -> int:
        return self.topology.n_repeaters


@dataclass(frozen=True)
class ApeTrialOutcome:
    success: bool
    fidelity_contribution: int | None
    failed_stage: str | None  # "bsm" | "logical" | None
    selected_pairs: tuple[int, ...] = ()


def _memory_wait_s(chain: ApeChain, end: int, partner_branch: int) -> float:
    """Wait of one end-node memory from entanglement to frame correction.

    The memory entangles when its photon is emitted (timed so it meets the
    partner leaf at the station); the frame correction happens once the
    slowest station's outcomes, announced when its last tree photon has been
    measured, have crossed the fiber to this end node.
    """
    topo = chain.topology
    plan = chain.plan
    n = chain.n
    seg = topo.segment_km
    end_pos = 0.0 if end == 0 else topo.chain_length_km
    left_done = plan.arrival_s[plan.branch < chain.rgs.m].max()
    right_done = plan.arrival_s[plan.branch >= chain.rgs.m].max()
    frame = 0.0
    for k in range(n + 1):  # station k sits at (k + 1/2) segments
        done = 0.0
        if k >= 1:
            done = right_done  # left side: QR_k's right trees
        if k <= n - 1:
            done = max(done, left_done)  # right side: QR_{k+1}'s left trees
        station_pos = (k + 0.5) * seg
        frame = max(
            frame, done + abs(station_pos - end_pos) / topo.signal_speed_km_per_s
        )
    partner_emit = float(chain.plan.branch_leaf_emission_s[partner_branch])
    return max(frame - partner_emit, 0.0)


def run_ape_iteration(chain: ApeChain, rng: np.random.Generator) -> ApeTrialOutcome:
    """One end-to-end attempt across the chain, station by station.

    Repeater error draws are generated lazily, the first time one of the
    repeater's two half-RGSs reaches a station, so iterations that die at an
    early Bell measurement stay cheap.
    """
    n = chain.n
    m = chain.rgs.m
    mu = chain.mu
    errors: dict[int, RgsErrorDraws] = {}

    def errors_for(qr: int) -> RgsErrorDraws:
        if qr not in errors:
            _, errors[qr] = generate_rgs_trial(
                chain.rgs, chain.params, rng, plan=chain.plan
            )
        return errors[qr]

    x_flips: list[bool] = []
    selected: list[int] = []
    for k in range(n + 1):
        if k == 0:
            left: TreeSide | np.ndarray = rng.random(m) < (1.0 - mu)
        else:
            left = TreeSide.sample(chain.rgs, mu, errors_for(k), "right", rng)
        if k == n:
            right: TreeSide | np.ndarray = rng.random(m) < (1.0 - mu)
        else:
            right = TreeSide.sample(chain.rgs, mu, errors_for(k + 1), "left", rng)
        outcome = transmit_and_measure(left, right, rng)
        if not outcome.bsm_success_any:
            return ApeTrialOutcome(False, None, "bsm", tuple(selected))
        if not outcome.logical_ok:
            return ApeTrialOutcome(False, None, "logical", tuple(selected))
        selected.append(outcome.selected_pair)
        # left side tree is QR_k's right core (odd position 2k+1), right side
        # tree is QR_{k+1}'s left core (even position 2k+2)
        if isinstance(left, TreeSide):
            x_flips.append(outcome.x_flip_left)
        if isinstance(right, TreeSide):
            x_flips.append(outcome.x_flip_right)

    if chain.include_memory_dephasing and n >= 1:
        t2 = chain.params.t2_memory_s
        p_left = dephasing_flip_prob(_memory_wait_s(chain, 0, selected[0]), t2)
        p_right = dephasing_flip_prob(
            _memory_wait_s(chain, 1, chain.rgs.m + selected[-1]), t2
        )
        memory_flips = (bool(rng.random() < p_left), bool(rng.random() < p_right))
    else:
        memory_flips = (False, False)

    # reorder flips into chain positions: per station k >= 1 the left-side
    # (odd-position) flip was appended after station k-1's right-side one,
    # which already matches positions 2,3,4,... order
    contribution = resolve_frame_and_fidelity(_chain_order(x_flips, n), memory_flips)
    return ApeTrialOutcome(True, contribution, None, tuple(selected))


def _chain_order(x_flips: list[bool], n: int) -> list[bool]:
    """Collected flips are QR1.left, QR1.right, QR2.left, ... already.

    Station 0 contributes QR1's left core, station k (1 <= k <= n-1)
    contributes QR_k's right core then QR_{k+1}'s left core, and station n
    contributes QR_n's right core, which is exactly chain order.
    """
    assert len(x_flips) == 2 * n
    return x_flips


def estimate_ape(
    chain: ApeChain,
    seed: int,
    success_target: int = 3000,
    max_iterations: int = 2_000_000,
    keep_trials: bool = False,
) -> tuple[ApeSweepResult, list[TrialRecord]]:
    """Run iterations until the success target or the iteration budget.

    EGR follows the analytic normalization: the measured success fraction
    divided by T_RGS * MQ_e. Budget-capped runs are flagged censored, never
    silently truncated.
    """
    if success_target < 1:
        raise ValueError("success_target must be >= 1")
    if max_iterations < 1:
        raise ValueError("max_iterations must be >= 1")
    rng = rng_stream(seed, "ape")
    iterations = 0
    successes = 0
    contributions: list[float] = []
    records: list[TrialRecord] = []
    t_iter_ps = round(chain.t_rgs_s * 1e12)
    while successes < success_target and iterations < max_iterations:
        outcome = run_ape_iteration(chain, rng)
        if outcome.success:
            successes += 1
            contributions.append(float(outcome.fidelity_contribution))
        if keep_trials:
            records.append(
                TrialRecord(
                    iteration=iterations,
                    outcome="success" if outcome.success else outcome.failed_stage,
                    duration_ps=t_iter_ps,
                    fidelity=(
                        float(outcome.fidelity_contribution)
                        if outcome.success
                        else None
                    ),
                )
            )
        iterations += 1
    success_prob = successes / iterations
    f_mean, f_sem = mean_and_sem(contributions)
    result = ApeSweepResult(
        distance_km=chain.topology.chain_length_km,
        n=chain.n,
        m=chain.rgs.m,
        b0=chain.rgs.b0,
        b1=chain.rgs.b1,
        egr_hz=success_prob / (chain.t_rgs_s * chain.mq_e),
        success_prob=success_prob,
        fidelity=f_mean,
        fidelity_sem=f_sem,
        iterations=iterations,
        successes=successes,
        censored=successes < success_target,
        seed=seed,
    )
    return result, records
