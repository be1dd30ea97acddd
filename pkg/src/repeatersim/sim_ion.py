"""Protocol-level Monte Carlo of the trapped-ion repeater chain.

Each iteration drives the chain's node roles through the event engine: the
midpoint stations clock heralded-entanglement attempts on their links, a
control node sequences the two parallel HEG steps (or the naive hop-by-hop
order), repeaters swap with a deterministic Bell measurement once both steps
have been Pauli-corrected, and the measurement outcomes travel to the end
nodes over classical channels whose delays set when the final frame
correction can happen.

The quantum state is carried analytically: every successful iteration yields
a chain state in the (w, lam, phi) family with per-ion phase noise sampled
from the measured wait between that ion's heralded success and its readout
(end-node ions: its frame correction), so simulated fidelity is directly
comparable to the closed-form model with no state-vector machinery.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .engine import Channel, Engine, rng_stream
from .pairstate import chain_state, fidelity
from .params import ChainTopology, TrappedIonParams
from .results import IonSweepResult, TrialRecord, mean_and_sem
from .theory_ion import IonTimings, TwoStepSchedule, link_loss

__all__ = [
    "IonChain",
    "HegSession",
    "EmissionWindow",
    "TrialOutcome",
    "run_heg",
    "run_two_step_iteration",
    "run_hop_by_hop_iteration",
    "estimate",
]

TWO_STEP = "two_step"
HOP_BY_HOP = "hop_by_hop"


@dataclass(frozen=True)
class IonChain:
    """Chain configuration with the derived quantities every trial needs."""

    params: TrappedIonParams
    topology: ChainTopology
    mu: float
    p_attempt: float  # per-attempt heralding success probability
    timing: IonTimings
    schedule: TwoStepSchedule

    @classmethod
    def build(cls, params: TrappedIonParams, topology: ChainTopology) -> "IonChain":
        mu = link_loss(params, topology)
        return cls(
            params=params,
            topology=topology,
            mu=mu,
            p_attempt=(1.0 - mu) ** 2 / 2.0,
            timing=IonTimings.for_chain(params, topology),
            schedule=TwoStepSchedule.for_chain(topology.n_repeaters),
        )

    @property
    def n(self) -> int:
        return self.topology.n_repeaters

    def link_nodes(self, link: int) -> tuple[int, int]:
        """Chain node indices (0 = left end node, n+1 = right) joined by a link."""
        return link - 1, link

    def is_end_node(self, node: int) -> bool:
        return node == 0 or node == self.n + 1


@dataclass(frozen=True)
class HegSession:
    """One link's heralded-entanglement process: up to h_max clocked attempts."""

    link: int
    success: bool
    attempts: int  # attempts actually spent (success index, or h_max)


@dataclass(frozen=True)
class EmissionWindow:
    ion: tuple[int, str]  # (node, "A"|"B") - repeaters hold two ions
    start_ps: int
    end_ps: int


@dataclass(frozen=True)
class TrialOutcome:
    success: bool
    outcome: str
    duration_s: float
    attempts: tuple[int, ...] = ()  # per link 1..n+1 (sessions are pre-drawn)
    waits_s: tuple[float, ...] = ()  # per ion, heralded success -> readout/correction
    thetas: tuple[float, ...] = ()
    fidelity: float | None = None
    emission_windows: tuple[EmissionWindow, ...] = ()


def run_heg(link: int, chain: IonChain, rng) -> HegSession:
    """Sample one heralded-entanglement session on a link.

    Per attempt two photons must survive their node-to-station hop (1 - mu
    each) and the linear-optics Bell measurement must fire (probability 1/2).
    A session always consumes h_max * 3 uniforms so the draw stream stays
    aligned regardless of when the session succeeds.
    """
    h_max = chain.params.h_max
    draws = rng.random((h_max, 3))
    ok = (
        (draws[:, 0] < (1.0 - chain.mu))
        & (draws[:, 1] < (1.0 - chain.mu))
        & (draws[:, 2] < 0.5)
    )
    hits = np.flatnonzero(ok)
    if hits.size:
        return HegSession(link=link, success=True, attempts=int(hits[0]) + 1)
    return HegSession(link=link, success=False, attempts=h_max)


def _ion_label(chain: IonChain, node: int, link: int) -> tuple[int, str]:
    """Repeater ion A faces the left (lower-indexed) link, B the right."""
    if chain.is_end_node(node):
        return (node, "A")
    return (node, "A" if link == node else "B")


def _emission_windows(chain, link, session, start_ps):
    t_att_ps = round(chain.timing.t_attempt_s * 1e12)
    windows = []
    for node in chain.link_nodes(link):
        ion = _ion_label(chain, node, link)
        for h in range(session.attempts):
            windows.append(
                EmissionWindow(ion=ion, start_ps=start_ps + h * t_att_ps,
                               end_ps=start_ps + (h + 1) * t_att_ps)
            )
    return windows


class _IterationRun:
    """Event-driven bookkeeping shared by the two control schemes."""

    def __init__(self, chain: IonChain, record_emissions: bool):
        self.chain = chain
        self.engine = Engine()
        self.record = record_emissions
        self.windows: list[EmissionWindow] = []
        self.herald_ps: dict[int, int] = {}  # link -> heralded-success time
        self.readout_ps: dict[int, int] = {}  # repeater node -> swap readout time
        self.frame_ps: dict[int, int] = {}  # end node -> frame-correction time
        self._deliveries_expected = 2 * chain.n  # every repeater notifies both ends
        self._deliveries_received = 0
        n = chain.n
        seg_delay = chain.topology.delay_s(chain.topology.segment_km)
        self.notify_channels = {
            (qr, end): Channel(
                src=("qr", qr),
                dst=("end", end),
                delay_s=abs(qr - (0 if end == 0 else n + 1)) * seg_delay,
            )
            for qr in range(1, n + 1)
            for end in (0, n + 1)
        }
        self.engine.register("controller", lambda eng, ev: ev.payload(eng))
        for end in (0, n + 1):
            self.engine.register(("end", end), self._on_outcome_delivery)

    def place_sessions(self, sessions, links, start_ps):
        """Lay one parallel batch of pre-drawn HEG sessions onto the timeline."""
        t_att_ps = round(self.chain.timing.t_attempt_s * 1e12)
        for link in links:
            session = sessions[link]
            if session.success:
                self.herald_ps[link] = start_ps + session.attempts * t_att_ps
            if self.record:
                self.windows.extend(
                    _emission_windows(self.chain, link, session, start_ps)
                )
        batch_ps = start_ps + max(sessions[link].attempts for link in links) * t_att_ps
        return batch_ps

    def swap_all(self, eng: Engine):
        """All repeaters run the MS gate + readout, then announce outcomes."""
        for qr in range(1, self.chain.n + 1):
            self.swap_one(eng, qr)

    def swap_one(self, eng: Engine, qr: int):
        chain = self.chain
        swap_s = chain.params.t_ms_s + chain.params.t_meas_s

        def announce(engine: Engine):
            self.readout_ps[qr] = engine.now_ps
            for end in (0, chain.n + 1):
                self.notify_channels[(qr, end)].transmit(engine, ("outcome", qr))

        eng.schedule_at_ps(eng.now_ps + round(swap_s * 1e12), "controller", announce)

    def _on_outcome_delivery(self, eng: Engine, event):
        end_node = event.target[1]
        self.frame_ps[end_node] = max(self.frame_ps.get(end_node, 0), eng.now_ps)
        self._deliveries_received += 1

    def finish(self) -> int:
        self.engine.run_until(
            predicate=lambda: self._deliveries_received == self._deliveries_expected
        )
        return self.engine.now_ps


def _measured_waits(chain: IonChain, run: _IterationRun) -> list[float]:
    """Per-ion wait from heralded success to readout (or frame correction)."""
    waits = []
    for link in range(1, chain.n + 2):
        herald = run.herald_ps[link]
        for node in chain.link_nodes(link):
            if chain.is_end_node(node):
                stop = run.frame_ps[node] if chain.n >= 1 else herald_stop_n0(chain, herald)
            else:
                stop = run.readout_ps[node]
            waits.append((stop - herald) / 1e12)
    return waits


def _sample_thetas(chain: IonChain, waits: list[float], noise_rng) -> list[float]:
    """One phase-noise draw per ion from its measured wait, in chain order."""
    tau = chain.params.tau_coherence_s
    return [noise_rng.normal(0.0, 2.0 * wait / tau) for wait in waits]


def herald_stop_n0(chain: IonChain, herald_ps: int) -> int:
    # single-link chain: both ions are done after the Pauli correction
    return herald_ps + round(chain.timing.t_corr_s * 1e12)


def _attempt_vector(chain: IonChain, attempts: dict[int, int]) -> tuple[int, ...]:
    return tuple(attempts.get(link, 0) for link in range(1, chain.n + 2))


def _success_outcome(chain: IonChain, run: _IterationRun, duration_ps, noise_rng, attempts):
    waits = _measured_waits(chain, run)
    thetas = _sample_thetas(chain, waits, noise_rng)
    state = chain_state(chain.n, chain.params.w_em, chain.params.w_ms, thetas)
    # the two end-node frame corrections are noisy single-qubit gates
    state = dataclasses.replace(state, w=state.w * chain.params.f_1q**2)
    return TrialOutcome(
        success=True,
        outcome="success",
        duration_s=duration_ps / 1e12,
        attempts=_attempt_vector(chain, attempts),
        waits_s=tuple(waits),
        thetas=tuple(thetas),
        fidelity=fidelity(state, chain.n),
        emission_windows=tuple(run.windows),
    )


def run_two_step_iteration(
    chain: IonChain, rngs: dict, noise_rng, record_emissions: bool = False
) -> TrialOutcome:
    """One centrally controlled iteration: odd links, even links, swap.

    Timing follows the control sequence exactly: a failed step burns the full
    retry budget; each completed step is followed by one Pauli-correction
    interval; the swap phase covers the MS gate, the readout, and the
    classical notifications to both end nodes.
    """
    run = _IterationRun(chain, record_emissions)
    eng = run.engine
    t_corr_ps = round(chain.timing.t_corr_s * 1e12)
    h_max_ps = chain.params.h_max * round(chain.timing.t_attempt_s * 1e12)

    odd = sorted(chain.schedule.odd_links)
    even = sorted(chain.schedule.even_links)

    # every link's session is drawn up front (one per iteration, in link
    # order) so both control schemes consume identical random draws
    sessions = {link: run_heg(link, chain, rngs[link]) for link in range(1, chain.n + 2)}
    attempts = {link: s.attempts for link, s in sessions.items()}

    step1_ps = run.place_sessions(sessions, odd, start_ps=0)
    if not all(sessions[link].success for link in odd):
        return TrialOutcome(
            success=False,
            outcome="fail_step1",
            duration_s=h_max_ps / 1e12,
            attempts=_attempt_vector(chain, attempts),
            emission_windows=tuple(run.windows),
        )
    if chain.n == 0:
        duration_ps = step1_ps + t_corr_ps
        waits = _measured_waits(chain, run)
        thetas = _sample_thetas(chain, waits, noise_rng)
        state = chain_state(0, chain.params.w_em, chain.params.w_ms, thetas)
        state = dataclasses.replace(state, w=state.w * chain.params.f_1q**2)
        return TrialOutcome(
            success=True,
            outcome="success",
            duration_s=duration_ps / 1e12,
            attempts=_attempt_vector(chain, attempts),
            waits_s=tuple(waits),
            thetas=tuple(thetas),
            fidelity=fidelity(state, 0),
            emission_windows=tuple(run.windows),
        )

    step2_start = step1_ps + t_corr_ps
    step2_ps = run.place_sessions(sessions, even, start_ps=step2_start)
    if not all(sessions[link].success for link in even):
        duration_ps = step2_start + h_max_ps
        return TrialOutcome(
            success=False,
            outcome="fail_step2",
            duration_s=duration_ps / 1e12,
            attempts=_attempt_vector(chain, attempts),
            emission_windows=tuple(run.windows),
        )

    swap_start = step2_ps + t_corr_ps
    eng.run_until(time_s=swap_start / 1e12)
    run.swap_all(eng)
    duration_ps = run.finish()
    return _success_outcome(chain, run, duration_ps, noise_rng, attempts)


def run_hop_by_hop_iteration(
    chain: IonChain, rngs: dict, noise_rng, record_emissions: bool = False
) -> TrialOutcome:
    """One naive distributed iteration: links strictly left to right.

    Every link is established (and Pauli-corrected) before the next one
    starts; the repeaters swap only once the whole chain is up. Ions on the
    early links therefore idle through the entire remaining establishment,
    which is what makes this scheme slower and noisier than the two-step one
    on longer chains. At n <= 1 the two schemes coincide exactly.
    """
    run = _IterationRun(chain, record_emissions)
    eng = run.engine
    t_corr_ps = round(chain.timing.t_corr_s * 1e12)
    h_max_ps = chain.params.h_max * round(chain.timing.t_attempt_s * 1e12)

    sessions = {link: run_heg(link, chain, rngs[link]) for link in range(1, chain.n + 2)}
    attempts = {link: s.attempts for link, s in sessions.items()}

    cursor = 0
    for link in range(1, chain.n + 2):
        end_ps = run.place_sessions(sessions, [link], start_ps=cursor)
        if not sessions[link].success:
            return TrialOutcome(
                success=False,
                outcome=f"fail_link_{link}",
                duration_s=(cursor + h_max_ps) / 1e12,
                attempts=_attempt_vector(chain, attempts),
                emission_windows=tuple(run.windows),
            )
        cursor = end_ps + t_corr_ps  # correction before the next link starts

    if chain.n == 0:
        waits = _measured_waits(chain, run)
        thetas = _sample_thetas(chain, waits, noise_rng)
        state = chain_state(0, chain.params.w_em, chain.params.w_ms, thetas)
        state = dataclasses.replace(state, w=state.w * chain.params.f_1q**2)
        return TrialOutcome(
            success=True,
            outcome="success",
            duration_s=cursor / 1e12,
            attempts=_attempt_vector(chain, attempts),
            waits_s=tuple(waits),
            thetas=tuple(thetas),
            fidelity=fidelity(state, 0),
            emission_windows=tuple(run.windows),
        )
    eng.run_until(time_s=cursor / 1e12)
    run.swap_all(eng)
    duration_ps = run.finish()
    return _success_outcome(chain, run, duration_ps, noise_rng, attempts)


def estimate(
    chain: IonChain,
    iterations: int,
    seed: int,
    protocol: str = TWO_STEP,
    keep_trials: bool = False,
) -> tuple[IonSweepResult, list[TrialRecord]]:
    """Monte Carlo rate and fidelity estimate over a fixed iteration budget.

    EGR is successful iterations over total simulated time; fidelity is the
    mean over successes with its standard error. With zero successes the
    rate is zero and fidelity is reported absent.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    if protocol not in (TWO_STEP, HOP_BY_HOP):
        raise ValueError(f"unknown protocol '{protocol}'")
    run_iteration = (
        run_two_step_iteration if protocol == TWO_STEP else run_hop_by_hop_iteration
    )
    rngs = {
        link: rng_stream(seed, "link", link) for link in range(1, chain.n + 2)
    }
    noise_rng = rng_stream(seed, "dephase")
    total_ps = 0
    sum_t = sum_t2 = sum_xt = 0.0
    fidelities = []
    records = []
    successes = 0
    for it in range(iterations):
        outcome = run_iteration(chain, rngs, noise_rng)
        duration_ps = round(outcome.duration_s * 1e12)
        total_ps += duration_ps
        t = duration_ps / 1e12
        sum_t += t
        sum_t2 += t * t
        if outcome.success:
            successes += 1
            sum_xt += t
            fidelities.append(outcome.fidelity)
        if keep_trials:
            records.append(
                TrialRecord(
                    iteration=it,
                    outcome=outcome.outcome,
                    duration_ps=duration_ps,
                    fidelity=outcome.fidelity,
                )
            )
    f_mean, f_sem = mean_and_sem(fidelities)
    result = IonSweepResult(
        distance_km=chain.topology.chain_length_km,
        n=chain.n,
        protocol=protocol,
        egr_hz=successes / (total_ps / 1e12),
        egr_sem=_egr_delta_sem(iterations, successes, sum_t, sum_t2, sum_xt),
        fidelity=f_mean,
        fidelity_sem=f_sem,
        iterations=iterations,
        successes=successes,
        seed=seed,
    )
    return result, records


def _egr_delta_sem(
    n_iter: int, successes: int, sum_t: float, sum_t2: float, sum_xt: float
) -> float:
    """Standard error of successes/total_time over iid iterations.

    Delta method on the ratio of means x_bar / t_bar with the empirical
    (co)variances of the per-iteration success flag and duration.
    """
    if n_iter < 2 or sum_t == 0.0:
        return 0.0
    x_bar = successes / n_iter
    t_bar = sum_t / n_iter
    var_x = x_bar * (1.0 - x_bar)
    var_t = max(sum_t2 / n_iter - t_bar**2, 0.0)
    cov_xt = sum_xt / n_iter - x_bar * t_bar
    var_ratio = (
        var_x / t_bar**2
        - 2.0 * x_bar * cov_xt / t_bar**3
        + x_bar**2 * var_t / t_bar**4
    )
    return math.sqrt(max(var_ratio, 0.0) / n_iter)
