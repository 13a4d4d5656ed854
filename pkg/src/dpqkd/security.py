"""Key-rate assembly: entropy, basis dependence, phase-error bound, GLLP-style rate.

Only the residue components ``j = 0`` and ``j = 1`` carry a privacy term.  The
vacuum-like component is run through the same phase-error machinery as the
single-photon-like one, which is conservative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np


@dataclass(frozen=True)
class ComponentEstimate:
    """Estimated yield and bit error of one residue component.

    Args:
        j: Residue index.
        yield_: Conditional detection probability ``Y_j``.
        bit_error: Bit error rate ``e_j``; values above 1/2 are clamped when
            the phase error is bounded.
        probability: Emission probability ``P_j``.
        fidelity_deficit: ``1 - F_j`` for the X/Y basis states.
        decoy_yield: Optional ``Y_j`` at the decoy intensity.
        decoy_bit_error: Optional ``e_j`` at the decoy intensity.
    """

    j: int
    yield_: float
    bit_error: float
    probability: float
    fidelity_deficit: float = 0.0
    decoy_yield: float | None = None
    decoy_bit_error: float | None = None

    def __post_init__(self):
        if not 0 <= self.yield_ <= 1:
            raise ValueError(f"yield {self.yield_} outside [0, 1]")
        if not 0 <= self.bit_error <= 1:
            raise ValueError(f"bit error {self.bit_error} outside [0, 1]")
        if not 0 <= self.probability <= 1:
            raise ValueError(f"probability {self.probability} outside [0, 1]")
        if not 0 <= self.fidelity_deficit <= 1:
            raise ValueError(f"fidelity deficit {self.fidelity_deficit} outside [0, 1]")


@dataclass(frozen=True)
class RateBreakdown:
    """Key rate with its ingredients.

    ``raw_rate`` keeps the sign; ``key_rate`` is floored at zero.
    """

    key_rate: float
    raw_rate: float
    error_correction_cost: float
    privacy_terms: tuple[float, ...] = field(default_factory=tuple)
    phase_errors: tuple[float, ...] = field(default_factory=tuple)


class BasisDependence(NamedTuple):
    delta: float
    key_killing: bool


def binary_entropy(p):
    """Shannon entropy ``-p log2 p - (1-p) log2 (1-p)`` in bits, with ``0 log 0 = 0``.

    Accepts scalars or arrays.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~((arr >= 0) & (arr <= 1))):
        raise ValueError("binary_entropy argument outside [0, 1]")
    out = _h2(arr)
    return float(out) if out.ndim == 0 else out


def _h2(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p > 0, -p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
        b = np.where(q > 0, -q * np.log2(np.where(q > 0, q, 1.0)), 0.0)
    return a + b


def basis_dependence(fidelity: float, yield_: float, deficit: float | None = None) -> BasisDependence:
    """``Delta = (1 - F) / (2 Y)``, saturated at 1/2.

    Args:
        fidelity: Lower bound on the X/Y basis fidelity of the component.
        yield_: Component yield; zero yield means infinite basis dependence.
        deficit: Optional ``1 - F`` computed without cancellation; overrides
            ``1 - fidelity`` when given.
    """
    if not 0 <= fidelity <= 1:
        raise ValueError(f"fidelity {fidelity} outside [0, 1]")
    if yield_ < 0:
        raise ValueError(f"yield {yield_} is negative")
    d = 1.0 - fidelity if deficit is None else deficit
    if d <= 0:
        return BasisDependence(0.0, yield_ == 0)
    if yield_ == 0:
        return BasisDependence(0.5, True)
    delta = d / (2.0 * yield_)
    if delta >= 0.5:
        return BasisDependence(0.5, True)
    return BasisDependence(delta, False)


def phase_error_bound(delta, bit_error):
    """Upper bound on the phase error rate from the bit error rate.

    ``e_p = e_b + 4D(1-D)(1-2e_b) + 4(1-2D) sqrt(D(1-D) e_b(1-e_b))``, capped at
    1/2.  Both inputs must lie in ``[0, 1/2]``; scalars or broadcastable arrays.
    """
    d = np.asarray(delta, dtype=float)
    e = np.asarray(bit_error, dtype=float)
    if np.any(~((d >= 0) & (d <= 0.5))):
        raise ValueError("basis dependence outside [0, 1/2]")
    if np.any(~((e >= 0) & (e <= 0.5))):
        raise ValueError("bit error outside [0, 1/2]")
    out = _phase_error(d, e)
    return float(out) if out.ndim == 0 else out


def _phase_error(d: np.ndarray, e: np.ndarray) -> np.ndarray:
    dd = d * (1.0 - d)
    ee = e * (1.0 - e)
    ep = e + 4.0 * dd * (1.0 - 2.0 * e) + 4.0 * (1.0 - 2.0 * d) * np.sqrt(dd * ee)
    return np.minimum(ep, 0.5)


def privacy_term(probability, yield_, bit_error, fidelity_deficit):
    """``P Y (1 - H(e_p))`` for arrays of component estimates.

    Bit errors are clamped to 1/2 and the basis dependence saturates at 1/2;
    a zero yield contributes nothing.
    """
    p = np.asarray(probability, dtype=float)
    y = np.asarray(yield_, dtype=float)
    z = np.asarray(bit_error, dtype=float)
    d = np.asarray(fidelity_deficit, dtype=float)
    pos = y > 0
    ys = np.where(pos, y, 1.0)
    delta = np.where(pos, np.minimum(d / (2.0 * ys), 0.5), 0.5)
    ep = _phase_error(delta, np.clip(z, 0.0, 0.5))
    return np.where(pos, p * y * (1.0 - _h2(ep)), 0.0)


def error_correction_cost(gain: float, qber: float, f_ec: float) -> float:
    """``I_ec = f Q H(E)``."""
    if gain <= 0:
        return 0.0
    return f_ec * gain * float(_h2(min(max(qber, 0.0), 1.0)))


def key_rate(
    components: list[ComponentEstimate], gain: float, qber: float, f_ec: float
) -> RateBreakdown:
    """``R = -f Q H(E) + sum_{j in {0,1}} P_j Y_j (1 - H(e_j^p))``.

    Components with ``j >= 2`` are accepted but contribute zero.
    """
    i_ec = error_correction_cost(gain, qber, f_ec)
    terms, phases = [], []
    for c in components:
        if c.j >= 2:
            terms.append(0.0)
            phases.append(0.5)
            continue
        dep = basis_dependence(1.0 - c.fidelity_deficit, c.yield_, deficit=c.fidelity_deficit)
        ep = float(_phase_error(np.float64(dep.delta), np.float64(min(c.bit_error, 0.5))))
        phases.append(ep)
        terms.append(0.0 if c.yield_ == 0 else c.probability * c.yield_ * (1.0 - float(_h2(ep))))
    raw = sum(terms) - i_ec
    return RateBreakdown(max(raw, 0.0), raw, i_ec, tuple(terms), tuple(phases))


def continuous_baseline_rate(
    gain: float, qber: float, mu: float, y1: float, e1: float, f_ec: float = 1.16
) -> RateBreakdown:
    """GLLP rate ``-f Q H(E) + Y_1 mu e^{-mu} (1 - H(e_1))`` for continuous randomization."""
    if gain <= 0:
        return RateBreakdown(0.0, 0.0, 0.0, (0.0,), (0.5,))
    i_ec = error_correction_cost(gain, qber, f_ec)
    e1 = min(max(e1, 0.0), 0.5)
    term = y1 * mu * math.exp(-mu) * (1.0 - float(_h2(e1)))
    raw = term - i_ec
    return RateBreakdown(max(raw, 0.0), raw, i_ec, (term,), (e1,))
