"""All-photonic chain simulator: plan invariants, error propagation rules,
statistical agreement with theory, and the small-chain stabilizer oracle."""

import itertools
import math

import numpy as np
import pytest

from repeatersim.engine import rng_stream
from repeatersim.params import ApeParams, ChainTopology, RgsParams, photon_count
from repeatersim.sim_ape import (
    LEAF,
    LEVEL1,
    LEVEL2,
    ApeChain,
    RgsErrorDraws,
    TreeSide,
    build_photon_plan,
    estimate_ape,
    generate_rgs_trial,
    resolve_frame_and_fidelity,
    run_ape_iteration,
    transmit_and_measure,
)
from repeatersim.theory_ape import (
    fidelity_ape,
    link_loss_ape,
    logical_meas_probs,
    p_bsm_photonic,
    p_rgs,
)


def topo(n, length=50.0):
    return ChainTopology(n_repeaters=n, chain_length_km=length)


def lossless_params(**kw):
    kw.setdefault("eta_qfc", 1.0)
    kw.setdefault("p_single_mode", 1.0)
    return ApeParams(**kw)


class CoinWinRng:
    """Stub generator whose uniforms are all 0: every BSM coin succeeds."""

    def random(self, size=None):
        return np.zeros(size) if size is not None else 0.0


def tree_side(rgs, leaf=None, level1=None, level2=None, vote_flips=None, leaf_flips=None):
    m, b0, b1 = rgs.m, rgs.b0, rgs.b1
    return TreeSide(
        leaf=np.ones(m, bool) if leaf is None else leaf,
        level1=np.ones((m, b0), bool) if level1 is None else level1,
        level2=np.ones((m, b0, b1), bool) if level2 is None else level2,
        vote_flips=np.zeros((m, b0), bool) if vote_flips is None else vote_flips,
        leaf_flips=np.zeros(m, bool) if leaf_flips is None else leaf_flips,
        global_branches=np.arange(m),
    )


class TestPhotonPlan:
    @pytest.mark.parametrize("shape", [(1, 1, 1), (3, 3, 2), (6, 6, 3), (8, 11, 4)])
    def test_photon_count_matches(self, shape):
        rgs = RgsParams(*shape)
        plan = build_photon_plan(rgs, ApeParams())
        assert plan.total_photons == photon_count(rgs)

    @pytest.mark.parametrize("shape", [(1, 1, 1), (3, 3, 2), (6, 6, 3)])
    def test_leaf_arrives_before_all_core_photons(self, shape):
        rgs = RgsParams(*shape)
        plan = build_photon_plan(rgs, ApeParams(), hop_delay_s=25e-6)
        for b in range(2 * rgs.m):
            mine = plan.branch == b
            leaf_arrival = plan.arrival_s[mine & (plan.kind == LEAF)]
            core_arrivals = plan.arrival_s[mine & (plan.kind != LEAF)]
            assert len(leaf_arrival) == 1
            assert (core_arrivals > leaf_arrival[0]).all()

    def test_kinds_per_branch(self):
        rgs = RgsParams(2, 3, 2)
        plan = build_photon_plan(rgs, ApeParams())
        for b in range(4):
            mine = plan.branch == b
            assert np.count_nonzero(mine & (plan.kind == LEVEL1)) == rgs.b0
            assert np.count_nonzero(mine & (plan.kind == LEVEL2)) == rgs.b0 * rgs.b1
            assert np.count_nonzero(mine & (plan.kind == LEAF)) == 1

    def test_core_photons_keep_emission_order(self):
        rgs = RgsParams(1, 4, 3)
        plan = build_photon_plan(rgs, ApeParams())
        for b in range(2):
            sel = (plan.branch == b) & (plan.kind != LEAF)
            emits = plan.emission_s[sel]
            arrivals = plan.arrival_s[sel]
            assert (np.argsort(emits) == np.argsort(arrivals)).all()

    def test_directions_split_half_half(self):
        rgs = RgsParams(3, 2, 2)
        plan = build_photon_plan(rgs, ApeParams())
        assert plan.direction(0) == "left"
        assert plan.direction(2) == "left"
        assert plan.direction(3) == "right"


class TestGenerateRgsTrial:
    def test_infinite_coherence_is_error_free(self):
        rgs = RgsParams(3, 3, 2)
        _, errors = generate_rgs_trial(rgs, ApeParams(t2_emitter_s=1e15),
                                       np.random.default_rng(0))
        assert not errors.vote_flips.any()
        assert not errors.leaf_flips.any()

    def test_vote_flip_frequency_matches_e_vote(self):
        """Gate-by-gate flips compose to the closed-form vote error rate."""
        params = ApeParams()
        rgs = RgsParams(1, 2, 3)
        t_c = (rgs.b1 + 1) * params.t_emit_s + params.t_cz_s
        expect = (1.0 - math.exp(-t_c / params.t2_emitter_s)) / 2.0
        rng = np.random.default_rng(3)
        draws = 100_000
        flips = 0
        total = 0
        for _ in range(draws // (2 * rgs.m * rgs.b0)):
            _, errors = generate_rgs_trial(rgs, params, rng)
            flips += int(errors.vote_flips.sum())
            total += errors.vote_flips.size
        freq = flips / total
        sem = math.sqrt(expect * (1.0 - expect) / total)
        assert abs(freq - expect) < 3.0 * sem

    def test_leaf_flip_frequency_matches_e_xl(self):
        params = ApeParams()
        rgs = RgsParams(4, 1, 1)
        t_l = 2 * params.t_cz_s + params.t_emit_s
        expect = (1.0 - math.exp(-t_l / params.t2_emitter_s)) / 2.0
        rng = np.random.default_rng(4)
        flips = 0
        total = 0
        for _ in range(20_000):
            _, errors = generate_rgs_trial(rgs, params, rng)
            flips += int(errors.leaf_flips.sum())
            total += errors.leaf_flips.size
        sem = math.sqrt(expect * (1.0 - expect) / total)
        assert abs(flips / total - expect) < 3.0 * sem

    def test_parity_composition_identity(self):
        """XOR of per-gate flips == one flip at the composed probability."""
        probs = [0.01, 0.2, 0.37]
        odd_mass = 0.0
        for flips in itertools.product([0, 1], repeat=len(probs)):
            if sum(flips) % 2 == 1:
                odd_mass += math.prod(p if f else 1 - p for f, p in zip(flips, probs))
        composed = (1.0 - math.prod(1.0 - 2.0 * p for p in probs)) / 2.0
        assert odd_mass == pytest.approx(composed, abs=1e-15)


class TestMeasurementRules:
    def test_single_flipped_vote_of_three_is_corrected(self):
        rgs = RgsParams(1, 3, 2)
        flips = np.zeros((1, 3), bool)
        flips[0, 0] = True
        side = tree_side(rgs, vote_flips=flips)
        out = transmit_and_measure(side, np.ones(1, bool), CoinWinRng())
        assert out.bsm_success_any and out.logical_ok
        assert not out.x_flip_left

    def test_majority_of_flipped_votes_flips_outcome(self):
        rgs = RgsParams(1, 3, 2)
        flips = np.zeros((1, 3), bool)
        flips[0, :2] = True
        side = tree_side(rgs, vote_flips=flips)
        out = transmit_and_measure(side, np.ones(1, bool), CoinWinRng())
        assert out.x_flip_left

    def test_tie_counts_as_flip(self):
        rgs = RgsParams(1, 2, 2)
        flips = np.zeros((1, 2), bool)
        flips[0, 0] = True
        side = tree_side(rgs, vote_flips=flips)
        out = transmit_and_measure(side, np.ones(1, bool), CoinWinRng())
        assert out.x_flip_left

    def test_leaf_phase_error_flips_regardless_of_votes(self):
        rgs = RgsParams(1, 5, 2)
        side = tree_side(rgs, leaf_flips=np.array([True]))
        out = transmit_and_measure(side, np.ones(1, bool), CoinWinRng())
        assert out.x_flip_left

    def test_leaf_and_majority_flips_cancel(self):
        rgs = RgsParams(1, 3, 2)
        flips = np.zeros((1, 3), bool)
        flips[0, :] = True  # all votes flipped: clean majority of wrong votes
        side = tree_side(rgs, vote_flips=flips, leaf_flips=np.array([True]))
        out = transmit_and_measure(side, np.ones(1, bool), CoinWinRng())
        assert not out.x_flip_left

    def test_lost_level1_recovered_through_any_child(self):
        rgs = RgsParams(2, 2, 3)
        level1 = np.ones((2, 2), bool)
        level1[1, 0] = False  # a Z_L tree loses one level-1 photon
        level2 = np.ones((2, 2, 3), bool)
        level2[1, 0, :2] = False  # but one child survives
        side = tree_side(rgs, level1=level1, level2=level2)
        out = transmit_and_measure(side, np.ones(2, bool), CoinWinRng())
        assert out.selected_pair == 0  # tree 1 is Z_L-measured
        assert out.logical_ok

    def test_unrecoverable_tree_fails_logical_stage(self):
        rgs = RgsParams(2, 2, 3)
        level1 = np.ones((2, 2), bool)
        level2 = np.ones((2, 2, 3), bool)
        level1[1, 0] = False
        level2[1, 0, :] = False  # level-1 lost and every child lost
        side = tree_side(rgs, level1=level1, level2=level2)
        out = transmit_and_measure(side, np.ones(2, bool), CoinWinRng())
        assert out.selected_pair == 0  # the broken tree is Z_L-measured
        assert out.bsm_success_any and not out.logical_ok

    def test_bsm_failure_when_all_leaves_lost(self):
        rgs = RgsParams(3, 2, 2)
        side = tree_side(rgs, leaf=np.zeros(3, bool))
        out = transmit_and_measure(side, np.ones(3, bool), np.random.default_rng(0))
        assert not out.bsm_success_any
        assert out.selected_pair == -1


class TestNodeStatistics:
    def test_bsm_success_rate(self):
        rgs = RgsParams(4, 1, 1)
        mu = 0.35
        expect = 1.0 - (1.0 - p_bsm_photonic(mu)) ** rgs.m
        rng = np.random.default_rng(11)
        trials = 60_000
        errors = RgsErrorDraws(
            vote_flips=np.zeros((2 * rgs.m, rgs.b0), bool),
            leaf_flips=np.zeros(2 * rgs.m, bool),
        )
        wins = 0
        for _ in range(trials):
            left = TreeSide.sample(rgs, mu, errors, "left", rng)
            right = rng.random(rgs.m) < (1.0 - mu)
            wins += transmit_and_measure(left, right, rng).bsm_success_any
        sem = math.sqrt(expect * (1.0 - expect) / trials)
        assert abs(wins / trials - expect) < 3.0 * sem

    def test_logical_measurement_rates(self):
        """X_L and Z_L obtained-rates against the closed forms."""
        rgs = RgsParams(1, 6, 3)
        mu = 0.15
        p_x, p_z = logical_meas_probs(mu, rgs.b0, rgs.b1)
        rng = np.random.default_rng(12)
        errors = RgsErrorDraws(
            vote_flips=np.zeros((2, 6), bool), leaf_flips=np.zeros(2, bool)
        )
        trials = 100_000
        x_ok = z_ok = x_total = z_total = 0
        from repeatersim.sim_ape import _measure_tree

        for _ in range(trials):
            side = TreeSide.sample(rgs, mu, errors, "left", rng)
            obtained, _ = _measure_tree(side, 0, x_basis=True)
            x_ok += obtained
            x_total += 1
            obtained, _ = _measure_tree(side, 0, x_basis=False)
            z_ok += obtained
            z_total += 1
        for got, expect, total in ((x_ok, p_x, x_total), (z_ok, p_z, z_total)):
            sem = math.sqrt(expect * (1.0 - expect) / total)
            assert abs(got / total - expect) < 3.0 * sem


class TestFrameResolution:
    def test_clean_frame_scores_one(self):
        assert resolve_frame_and_fidelity([False, False]) == 1

    def test_any_single_flip_scores_zero(self):
        assert resolve_frame_and_fidelity([True, False]) == 0
        assert resolve_frame_and_fidelity([False, True]) == 0
        assert resolve_frame_and_fidelity([False, False], (True, False)) == 0

    def test_same_class_flips_cancel(self):
        # positions 2 and 4 are both even: their flips cancel
        assert resolve_frame_and_fidelity([True, False, True, False]) == 1
        # even-position flip cancels against the left memory flip
        assert resolve_frame_and_fidelity([True, False], (True, False)) == 1

    def test_cross_class_flips_do_not_cancel(self):
        assert resolve_frame_and_fidelity([True, True]) == 0

    def test_four_qubit_cluster_statevector_oracle(self):
        """Measured-outcome signs on the fused chain, checked on 4 qubits.

        Builds the path cluster 1-2-3-4, X-measures qubits 2 and 3 for every
        outcome pattern, and confirms the resulting pair is stabilized by
        (-1)^{m3} X1 Z4 and (-1)^{m2} Z1 X4: the announced outcome at the
        even position fixes the Z1X4 sign, the odd position the X1Z4 sign,
        matching the parity classes of resolve_frame_and_fidelity.
        """
        I2 = np.eye(2, dtype=complex)
        X = np.array([[0, 1], [1, 0]], dtype=complex)
        Z = np.array([[1, 0], [0, -1]], dtype=complex)

        def kron(*ops):
            out = np.array([[1.0 + 0j]])
            for o in ops:
                out = np.kron(out, o)
            return out

        def op_on(op, pos):
            ops = [I2] * 4
            ops[pos] = op
            return kron(*ops)

        def cz(i, j):
            mat = np.eye(16, dtype=complex)
            for b in range(16):
                bits = [(b >> (3 - k)) & 1 for k in range(4)]
                if bits[i] and bits[j]:
                    mat[b, b] = -1
            return mat

        plus = np.ones(2, dtype=complex) / math.sqrt(2.0)
        psi = kron(*([plus.reshape(2, 1)] * 4)).ravel()
        psi = cz(0, 1) @ cz(1, 2) @ cz(2, 3) @ psi

        for m2, m3 in itertools.product([0, 1], repeat=2):
            proj = (np.eye(16) + (-1) ** m3 * op_on(X, 2)) / 2 @ (
                np.eye(16) + (-1) ** m2 * op_on(X, 1)
            ) / 2
            phi = proj @ psi
            phi = phi / np.linalg.norm(phi)
            x1z4 = float((phi.conj() @ op_on(X, 0) @ op_on(Z, 3) @ phi).real)
            z1x4 = float((phi.conj() @ op_on(Z, 0) @ op_on(X, 3) @ phi).real)
            assert x1z4 == pytest.approx((-1.0) ** m3, abs=1e-12)
            assert z1x4 == pytest.approx((-1.0) ** m2, abs=1e-12)
            # a flipped announcement at the even position therefore leaves a
            # residual in the Z1X4 class, at the odd position in X1Z4:
            expect_clean = (m2 == 0) and (m3 == 0)
            got = resolve_frame_and_fidelity([bool(m2), bool(m3)])
            assert got == (1 if expect_clean else 0)


class TestIteration:
    def test_lossless_errorfree_iterations_are_perfect(self):
        """mu = 0 and no generation errors: the intrinsic 1/2 Bell-measurement
        coin may still fail a station, but nothing else ever does, and every
        success carries a clean frame."""
        params = lossless_params(t2_emitter_s=1e15, t2_memory_s=1e15)
        chain = ApeChain.build(params, topo(2, length=1e-9), RgsParams(2, 2, 2))
        rng = rng_stream(1, "ape")
        successes = 0
        for _ in range(300):
            out = run_ape_iteration(chain, rng)
            assert out.failed_stage != "logical"
            if out.success:
                successes += 1
                assert out.fidelity_contribution == 1
        assert successes > 0

    def test_success_rate_matches_p_rgs(self):
        params = ApeParams()
        rgs = RgsParams(6, 6, 3)
        chain = ApeChain.build(params, topo(5), rgs)
        res, _ = estimate_ape(chain, seed=21, success_target=1500, max_iterations=100_000)
        expect = p_rgs(chain.mu, rgs, 5)
        sem = math.sqrt(expect * (1.0 - expect) / res.iterations)
        assert abs(res.success_prob - expect) < 3.0 * sem

    def test_fidelity_matches_theory_without_memory_noise(self):
        params = ApeParams()
        rgs = RgsParams(6, 6, 3)
        chain = ApeChain.build(params, topo(5), rgs, include_memory_dephasing=False)
        res, _ = estimate_ape(chain, seed=22, success_target=2000, max_iterations=100_000)
        expect = fidelity_ape(params, topo(5), rgs).fbar
        assert abs(res.fidelity - expect) < 3.0 * res.fidelity_sem

    def test_egr_uses_analytic_normalization(self):
        params = lossless_params(t2_emitter_s=1e15)
        chain = ApeChain.build(params, topo(1, length=1e-9), RgsParams(3, 1, 1))
        res, _ = estimate_ape(chain, seed=5, success_target=200, max_iterations=500)
        assert res.egr_hz == pytest.approx(
            res.success_prob / (chain.t_rgs_s * chain.mq_e), rel=1e-12
        )

    def test_censored_run_is_flagged(self):
        params = ApeParams()
        chain = ApeChain.build(params, topo(5), RgsParams(1, 25, 1))
        res, _ = estimate_ape(chain, seed=9, success_target=100, max_iterations=2000)
        assert res.censored
        assert res.iterations == 2000
        assert res.successes < 100

    def test_determinism(self):
        chain = ApeChain.build(ApeParams(), topo(3), RgsParams(5, 4, 2))
        a, _ = estimate_ape(chain, seed=33, success_target=50, max_iterations=5000)
        b, _ = estimate_ape(chain, seed=33, success_target=50, max_iterations=5000)
        assert a == b
