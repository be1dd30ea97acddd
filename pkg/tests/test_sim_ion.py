"""Trapped-ion chain simulator: trivial forcings, timing exactness,
statistical agreement with the closed forms, and protocol comparisons."""

import math

import numpy as np
import pytest

from repeatersim.engine import rng_stream
from repeatersim.params import ChainTopology, TrappedIonParams
from repeatersim.sim_ion import (
    HOP_BY_HOP,
    TWO_STEP,
    IonChain,
    estimate,
    run_heg,
    run_hop_by_hop_iteration,
    run_two_step_iteration,
)
from repeatersim.theory_ion import (
    TwoStepSchedule,
    egr_1g,
    expected_fidelity_1g,
    ion_timings,
    step_success_prob,
)


class ZeroRng:
    """Fake generator whose uniforms are all 0: every attempt succeeds."""

    def random(self, size=None):
        return np.zeros(size) if size is not None else 0.0

    def normal(self, loc, scale, size=None):
        return 0.0 if size is None else np.zeros(size)


def build_chain(n, length=50.0, **kw):
    return IonChain.build(
        TrappedIonParams(**kw), ChainTopology(n_repeaters=n, chain_length_km=length)
    )


def perfect_chain(n):
    return IonChain.build(
        TrappedIonParams(
            f_1q=1.0,
            f_2q=1.0,
            f_em_trap=1.0,
            eta_qfc=1.0,
            eta_det=1.0,
            eta_coll=1.0,
            tau_coherence_s=1e9,
        ),
        ChainTopology(n_repeaters=n, chain_length_km=1e-6),
    )


def zero_rngs(chain):
    return {link: ZeroRng() for link in range(1, chain.n + 2)}


class TestRunHeg:
    def test_forced_first_attempt_success(self):
        chain = build_chain(1, eta_qfc=1.0, eta_det=1.0, eta_coll=1.0, h_max=5)
        session = run_heg(1, chain, ZeroRng())
        assert session.success and session.attempts == 1

    def test_total_loss_exhausts_budget(self):
        chain = build_chain(1, eta_det=0.0, h_max=37)
        session = run_heg(1, chain, np.random.default_rng(0))
        assert not session.success
        assert session.attempts == 37

    def test_session_success_rate_matches_theory(self):
        chain = build_chain(2, h_max=20)
        rng = np.random.default_rng(8)
        trials = 100_000
        wins = sum(run_heg(1, chain, rng).success for _ in range(trials))
        expect = step_success_prob(chain.mu, 20, 1)
        sem = math.sqrt(expect * (1.0 - expect) / trials)
        assert abs(wins / trials - expect) < 3.0 * sem


class TestTwoStepIteration:
    def test_perfect_hardware_gives_unit_fidelity(self):
        chain = perfect_chain(2)
        outcome = run_two_step_iteration(chain, zero_rngs(chain), ZeroRng())
        assert outcome.success
        assert outcome.fidelity == pytest.approx(1.0, abs=1e-12)
        assert outcome.attempts == (1, 1, 1)

    @pytest.mark.parametrize("n", [1, 2, 4])
    def test_duration_matches_formula_for_sampled_attempts(self, n):
        """Success duration == T_att(max_O + max_E) + 2 T_corr + T_DBSM exactly."""
        chain = build_chain(n)
        timing = ion_timings(chain.params, chain.topology)
        schedule = TwoStepSchedule.for_chain(n)
        rngs = {link: rng_stream(5, "link", link) for link in range(1, n + 2)}
        noise = rng_stream(5, "noise")
        checked = 0
        for _ in range(400):
            outcome = run_two_step_iteration(chain, rngs, noise)
            by_link = dict(zip(range(1, n + 2), outcome.attempts))
            if outcome.outcome == "success":
                m_odd = max(by_link[i] for i in schedule.odd_links)
                m_even = max(by_link[i] for i in schedule.even_links)
                expect = (
                    timing.t_attempt_s * (m_odd + m_even)
                    + 2 * timing.t_corr_s
                    + timing.t_dbsm_s
                )
                checked += 1
            elif outcome.outcome == "fail_step1":
                expect = timing.t_attempt_s * chain.params.h_max
            else:
                m_odd = max(by_link[i] for i in schedule.odd_links)
                expect = (
                    timing.t_attempt_s * (m_odd + chain.params.h_max)
                    + timing.t_corr_s
                )
            assert outcome.duration_s == pytest.approx(expect, abs=1e-9)
        assert checked > 0, "no successful iterations sampled"

    def test_emission_windows_never_overlap_within_a_trap(self):
        chain = build_chain(3)
        rngs = {link: rng_stream(9, "link", link) for link in range(1, 5)}
        noise = rng_stream(9, "noise")
        for _ in range(50):
            outcome = run_two_step_iteration(chain, rngs, noise, record_emissions=True)
            by_node = {}
            for w in outcome.emission_windows:
                by_node.setdefault(w.ion[0], []).append(w)
            for node, windows in by_node.items():
                windows.sort(key=lambda w: w.start_ps)
                for a, b in zip(windows, windows[1:]):
                    assert a.end_ps <= b.start_ps or a.ion == b.ion

    def test_all_heg_in_two_phases(self):
        """Attempt windows occupy exactly two contiguous phases regardless of n."""
        for n in (2, 5, 8):
            chain = build_chain(n, length=5.0)  # short chain: successes are common
            rngs = {link: rng_stream(31, "link", link) for link in range(1, n + 2)}
            noise = rng_stream(31, "noise")
            outcome = None
            for _ in range(200):
                outcome = run_two_step_iteration(chain, rngs, noise, record_emissions=True)
                if outcome.success:
                    break
            assert outcome is not None and outcome.success
            t_att_ps = round(chain.timing.t_attempt_s * 1e12)
            schedule = TwoStepSchedule.for_chain(n)
            step1_end = max(outcome.attempts[i - 1] for i in schedule.odd_links) * t_att_ps
            starts = {w.start_ps for w in outcome.emission_windows}
            # every window begins either in phase 1 (from 0) or phase 2 (after
            # the step-1 correction) - no third phase exists
            step2_start = step1_end + round(chain.timing.t_corr_s * 1e12)
            for s in starts:
                assert s < step1_end or s >= step2_start


class TestCrossValidation:
    @pytest.mark.parametrize("n", [1, 2])
    def test_egr_and_fidelity_within_three_sigma(self, n):
        chain = build_chain(n)
        result, _ = estimate(chain, iterations=1500, seed=123, protocol=TWO_STEP)
        p = result.successes / result.iterations
        egr_sem = result.egr_hz * math.sqrt((1.0 - p) / max(result.successes, 1))
        th_egr = egr_1g(chain.params, chain.topology)
        assert abs(result.egr_hz - th_egr) < 3.0 * egr_sem
        th_fid = expected_fidelity_1g(chain.params, chain.topology)
        assert abs(result.fidelity - th_fid) < 3.0 * result.fidelity_sem

    def test_sampled_fidelity_against_measured_per_trial_waits(self):
        """Closed form fed with each trial's measured waits agrees (n=1).

        Pairing sim fidelity with the per-trial expectation removes the
        attempt-count variance, leaving only the theta-sampling residual.
        """
        chain = build_chain(1)
        rngs = {link: rng_stream(77, "link", link) for link in range(1, 3)}
        noise = rng_stream(77, "noise")
        residuals = []
        for _ in range(6000):
            outcome = run_two_step_iteration(chain, rngs, noise)
            if outcome.success:
                expect = expected_fidelity_1g(
                    chain.params, chain.topology, wait_model=list(outcome.waits_s)
                )
                residuals.append(outcome.fidelity - expect)
        sem = np.std(residuals, ddof=1) / math.sqrt(len(residuals))
        assert abs(np.mean(residuals)) < 3.0 * sem

    def test_zero_successes_reports_absent_fidelity(self):
        chain = build_chain(1, eta_det=1e-9, h_max=3)
        result, _ = estimate(chain, iterations=50, seed=1)
        assert result.successes == 0
        assert result.egr_hz == 0.0
        assert result.fidelity is None and result.fidelity_sem is None


class TestHopByHop:
    def test_identical_to_two_step_for_single_repeater(self):
        """At n = 1 both schemes serialize the same two links identically."""
        chain = build_chain(1)
        for seed in (1, 2, 3):
            r_two, _ = estimate(chain, iterations=400, seed=seed, protocol=TWO_STEP)
            r_hop, _ = estimate(chain, iterations=400, seed=seed, protocol=HOP_BY_HOP)
            assert r_two.egr_hz == pytest.approx(r_hop.egr_hz, rel=1e-12)
            assert r_two.fidelity == pytest.approx(r_hop.fidelity, rel=1e-12)

    def test_five_repeaters_two_step_wins_rate(self):
        """Independent runs of the two schemes separate at 3 sigma on EGR."""
        chain = build_chain(5)
        r_two, _ = estimate(chain, iterations=8000, seed=101, protocol=TWO_STEP)
        r_hop, _ = estimate(chain, iterations=8000, seed=202, protocol=HOP_BY_HOP)
        p2 = r_two.successes / r_two.iterations
        ph = r_hop.successes / r_hop.iterations
        egr_sem = math.hypot(
            r_two.egr_hz * math.sqrt((1 - p2) / max(r_two.successes, 1)),
            r_hop.egr_hz * math.sqrt((1 - ph) / max(r_hop.successes, 1)),
        )
        assert r_two.egr_hz - r_hop.egr_hz > 3.0 * egr_sem

    def test_five_repeaters_two_step_wins_fidelity_paired(self):
        """Same seed = same sessions in both schemes, so compare per trial."""
        chain = build_chain(5)
        _, recs_two = estimate(
            chain, iterations=4000, seed=42, protocol=TWO_STEP, keep_trials=True
        )
        _, recs_hop = estimate(
            chain, iterations=4000, seed=42, protocol=HOP_BY_HOP, keep_trials=True
        )
        diffs = [
            a.fidelity - b.fidelity
            for a, b in zip(recs_two, recs_hop)
            if a.fidelity is not None and b.fidelity is not None
        ]
        assert len(diffs) > 30
        mean = np.mean(diffs)
        sem = np.std(diffs, ddof=1) / math.sqrt(len(diffs))
        assert mean > 3.0 * sem

    def test_earlier_links_wait_longer(self):
        chain = build_chain(4, length=10.0)
        rngs = {link: rng_stream(55, "link", link) for link in range(1, 6)}
        noise = rng_stream(55, "noise")
        outcome = None
        for _ in range(500):
            outcome = run_hop_by_hop_iteration(chain, rngs, noise)
            if outcome.success:
                break
        assert outcome is not None and outcome.success
        assert len(outcome.waits_s) == 2 * chain.n + 2
        # repeater-side ion of link 1 (index 1) vs of the last link (index -2)
        assert outcome.waits_s[1] > outcome.waits_s[-2]


class TestDeterminism:
    def test_same_seed_same_results(self):
        chain = build_chain(2)
        a, recs_a = estimate(chain, iterations=300, seed=9, keep_trials=True)
        b, recs_b = estimate(chain, iterations=300, seed=9, keep_trials=True)
        assert a == b
        assert [r.to_json() for r in recs_a] == [r.to_json() for r in recs_b]

    def test_different_seed_differs(self):
        chain = build_chain(2)
        a, _ = estimate(chain, iterations=300, seed=9)
        b, _ = estimate(chain, iterations=300, seed=10)
        assert a != b
