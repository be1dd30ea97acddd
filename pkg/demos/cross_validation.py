"""Simulation-vs-theory cross-validation at a glance.

Runs a trimmed version of the validation the CLI's `validate` subcommand
performs: Monte Carlo estimates against the closed forms, scored as
(sim - theory) / standard error. Healthy models keep |z| well below 3.
"""

import math

from repeatersim import (
    ApeChain,
    ApeParams,
    ChainTopology,
    IonChain,
    RgsParams,
    TrappedIonParams,
    egr_1g,
    estimate,
    estimate_ape,
    expected_fidelity_1g,
    fidelity_ape,
    p_rgs,
)

print("trapped-ion chain, 50 km (1500 iterations per point)")
ion = TrappedIonParams()
for n in (1, 2, 4):
    topo = ChainTopology(n_repeaters=n, chain_length_km=50.0)
    result, _ = estimate(IonChain.build(ion, topo), iterations=1500, seed=11)
    z_rate = (result.egr_hz - egr_1g(ion, topo)) / result.egr_sem
    z_fid = (result.fidelity - expected_fidelity_1g(ion, topo)) / result.fidelity_sem
    print(f"  n={n}: EGR {result.egr_hz:7.3f} Hz (z={z_rate:+.2f})   "
          f"fidelity {result.fidelity:.4f} (z={z_fid:+.2f})")

print("all-photonic chain, 50 km, RGS (6,6,3) (1000 successes per point)")
ape = ApeParams()
rgs = RgsParams(6, 6, 3)
for n in (2, 5, 8):
    topo = ChainTopology(n_repeaters=n, chain_length_km=50.0)
    chain = ApeChain.build(ape, topo, rgs)
    result, _ = estimate_ape(chain, seed=11, success_target=1000, max_iterations=300_000)
    p_sem = math.sqrt(result.success_prob * (1 - result.success_prob) / result.iterations)
    z_rate = (result.success_prob - p_rgs(chain.mu, rgs, n)) / p_sem
    z_fid = (result.fidelity - fidelity_ape(ape, topo, rgs).fbar) / result.fidelity_sem
    print(f"  n={n}: success {result.success_prob:.4f} (z={z_rate:+.2f})   "
          f"fidelity {result.fidelity:.4f} (z={z_fid:+.2f})")
