"""Three-parameter two-qubit state family closed under entanglement swapping.

A pair shared between two ions is described by

    rho(w, lam, phi) = I/4 + (w/4) [ lam cos(phi) (XX - YY)
                                     + lam sin(phi) (XY + YX)
                                     + lam^2 ZZ ].

Heralded entanglement generation produces rho(w_em^2, 1, theta_i + theta_j).
A deterministic Bell measurement (two-ion entangling gate, per-ion
depolarization of rate p_ms, Z readouts, perfect Pauli-frame adjustment of
the (0,0) outcome) composes two pairs into

    rho(w1, lam1, phi1) o rho(w2, lam2, phi2)
        = rho(w1 w2, (1 - p_ms) lam1 lam2, phi1 + phi2 - pi/2),

so a whole chain stays inside the family and end-to-end fidelity is a closed
form. Pauli error channels over repeated logical measurements (the
all-photonic analogue) are composed here as well.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

__all__ = [
    "CorrelatedPairState",
    "PauliErrorRates",
    "heg_state",
    "compose_dbsm",
    "chain_state",
    "fidelity",
    "compose_pauli_errors",
    "fidelity_from_errors",
]


@dataclass(frozen=True)
class CorrelatedPairState:
    """State rho(w, lam, phi); valid whenever w*lam^2 <= 1 keeps rho positive."""

    w: float
    lam: float
    phi: float

    def __post_init__(self):
        if not 0.0 <= self.w <= 1.0:
            raise ValueError(f"w={self.w} must lie in [0, 1]")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lam={self.lam} must lie in [0, 1]")
        if self.w * self.lam**2 > 1.0 + 1e-12:
            raise ValueError("w * lam^2 > 1 would make rho non-positive")


@dataclass(frozen=True)
class PauliErrorRates:
    """Probabilities of a net X, Y, or Z error on the final pair."""

    e_x: float
    e_y: float
    e_z: float

    def __post_init__(self):
        for name in ("e_x", "e_y", "e_z"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name}={v} must lie in [0, 1]")
        if self.e_x + self.e_y + self.e_z > 1.0 + 1e-12:
            raise ValueError("error rates must sum to at most 1")


def heg_state(w_em: float, theta_i: float, theta_j: float) -> CorrelatedPairState:
    """Ion-ion pair after a successful heralded entanglement generation.

    Each ion-photon pair is a Werner state of weight ``w_em``; the photonic
    Bell measurement yields weight ``w_em**2``, and the two ions' accumulated
    phase noise enters as a shared phase.
    """
    if not 0.0 <= w_em <= 1.0:
        raise ValueError("w_em must lie in [0, 1]")
    return CorrelatedPairState(w=w_em * w_em, lam=1.0, phi=theta_i + theta_j)


def compose_dbsm(
    left: CorrelatedPairState, right: CorrelatedPairState, w_ms: float
) -> CorrelatedPairState:
    """Swap two pairs through a deterministic Bell measurement.

    Models the (0,0) measurement branch with perfect Pauli-frame adjustment;
    ``w_ms = 1 - p_ms`` is the per-ion depolarization survival of the
    entangling gate.
    """
    if not 0.0 <= w_ms <= 1.0:
        raise ValueError("w_ms must lie in [0, 1]")
    return CorrelatedPairState(
        w=left.w * right.w,
        lam=w_ms * left.lam * right.lam,
        phi=left.phi + right.phi - math.pi / 2.0,
    )


def chain_state(
    n: int, w_em: float, w_ms: float, thetas: Sequence[float]
) -> CorrelatedPairState:
    """End-to-end pair across a chain of ``n`` repeaters.

    ``thetas`` holds one phase-noise sample per ion, ordered along the chain
    (2n + 2 ions). Equal to folding ``compose_dbsm`` over the n + 1 heralded
    links, i.e. rho(w_em^(2n+2), w_ms^n, sum(thetas) - n*pi/2).
    """
    if len(thetas) != 2 * n + 2:
        raise ValueError(f"expected {2 * n + 2} thetas for n={n}, got {len(thetas)}")
    if not 0.0 <= w_em <= 1.0:
        raise ValueError("w_em must lie in [0, 1]")
    if not 0.0 <= w_ms <= 1.0:
        raise ValueError("w_ms must lie in [0, 1]")
    theta_tot = math.fsum(thetas)
    return CorrelatedPairState(
        w=w_em ** (2 * n + 2),
        lam=w_ms**n,
        phi=theta_tot - n * math.pi / 2.0,
    )


def fidelity(state: CorrelatedPairState, n: int) -> float:
    """Fidelity of a chain state against the noiseless n-repeater target.

    The target carries the deterministic -n*pi/2 phase offset of n swaps, so
    only the residual phase theta_tot = phi + n*pi/2 degrades fidelity:

        F = 1/4 + w lam^2 / 4 + (w lam / 2) cos(theta_tot).

    Not clamped: values outside [0, 1] indicate an invalid input state and
    should fail loudly in tests rather than be masked.
    """
    theta_tot = state.phi + n * math.pi / 2.0
    return (
        0.25
        + state.w * state.lam**2 / 4.0
        + state.w * state.lam / 2.0 * math.cos(theta_tot)
    )


def compose_pauli_errors(e_flip_per_round: float, n: int) -> PauliErrorRates:
    """Net Pauli error after n rounds of independent X and Z flip channels.

    Each round applies an X flip and a Z flip, each with probability
    ``e_flip_per_round``; even numbers of the same Pauli cancel, so n rounds
    compose into a single channel with contrast q = (1 - 2e)^n:

        E_X = E_Z = (1 + q)/2 * (1 - q)/2,    E_Y = ((1 - q)/2)^2.
    """
    if not 0.0 <= e_flip_per_round <= 0.5:
        raise ValueError("e_flip_per_round must lie in [0, 1/2]")
    if n < 0:
        raise ValueError("n must be >= 0")
    q = (1.0 - 2.0 * e_flip_per_round) ** n
    flip = (1.0 - q) / 2.0
    keep = (1.0 + q) / 2.0
    return PauliErrorRates(e_x=keep * flip, e_y=flip * flip, e_z=keep * flip)


def fidelity_from_errors(rates: PauliErrorRates) -> float:
    """Bell-pair fidelity left after a net Pauli error channel."""
    return 1.0 - rates.e_x - rates.e_y - rates.e_z
