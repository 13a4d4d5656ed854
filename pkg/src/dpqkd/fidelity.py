"""Closed-form fidelity bounds for discrete-phase randomized sources.

Two quantities drive the security analysis:

* ``F_j``, a lower bound on the fidelity between the X- and Y-basis states
  of component ``lambda_j``.  It is obtained from one particular pair of
  purifications, so it never exceeds the true mixed-state fidelity.  In the
  purification overlap a prefactor ``sqrt(2)/2`` combines with the ``(1+i)``
  of the Taylor expansion into a unit-modulus factor, which is why the
  final ratio below carries no prefactor.
* ``F_{mu,nu}``, the fidelity between ``lambda_j`` at signal and decoy
  intensities, which bounds how far component yields may drift between the
  two.

Deficits ``1 - F`` are computed without cancellation so that values as
small as ``1e-30`` survive; they are what the estimation layer consumes.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from dpqkd import _series
from dpqkd.fockcore import SourceSpec


class FidelityOrder(str, enum.Enum):
    EXACT_SERIES = "exact_series"
    ZEROTH = "zeroth"
    FIRST = "first"


@dataclass(frozen=True)
class FidelityBound:
    """Lower bound on the X/Y basis fidelity of component ``j``.

    ``signed`` is the ratio before the absolute value is taken; a negative
    value marks an oscillating regime where the bound is too weak to yield
    key anyway.
    """

    j: int
    value: float
    order: FidelityOrder
    deficit: float
    signed: float

    @property
    def sign_flipped(self) -> bool:
        return self.signed < 0


def cos_sin_factor(n) -> np.ndarray:
    """``2**(-n/2) * (cos(n*pi/4) + sin(n*pi/4))`` evaluated exactly.

    Equals ``2**(-(n-1)/2) * cos((n-1)*pi/4)``, whose cosine only takes the
    values 0, +-1 and +-sqrt(2)/2, so the result is a signed power of two.
    """
    n = np.asarray(n, dtype=np.int64)
    k = (n - 1) % 8
    half = np.exp2(-n / 2.0)
    full = np.exp2(-(n - 1) / 2.0)
    out = np.select(
        [k == 0, (k == 1) | (k == 7), (k == 2) | (k == 6), (k == 3) | (k == 5), k == 4],
        [full, half, 0.0 * half, -half, -full],
    )
    return out


def _check_residue(source: SourceSpec, j: int) -> None:
    if not 0 <= j < source.n_phases:
        raise ValueError(f"residue {j} outside [0, {source.n_phases})")


def fidelity_series(source: SourceSpec, j: int) -> FidelityBound:
    """Series bound on ``F_j(rho_x, rho_y)`` for the residue-``j`` component."""
    _check_residue(source, j)
    n, w = _series.relative_terms(source.mu, source.n_phases, j)
    c = cos_sin_factor(n)
    den = float(np.sum(w))
    signed = float(np.sum(w * c)) / den
    if signed >= 0:
        deficit = float(np.sum(w * (1.0 - c))) / den
    else:
        deficit = float(np.sum(w * (1.0 + c))) / den
    deficit = min(max(deficit, 0.0), 1.0)
    return FidelityBound(j, 1.0 - deficit, FidelityOrder.EXACT_SERIES, deficit, signed)


def fidelity_zeroth_order(source: SourceSpec, j: int) -> FidelityBound:
    """Leading term ``|2**(-j/2) (cos(j pi/4) + sin(j pi/4))|``, exact as ``mu -> 0``."""
    _check_residue(source, j)
    c = float(cos_sin_factor(j))
    return FidelityBound(j, abs(c), FidelityOrder.ZEROTH, 1.0 - abs(c), c)


def fidelity_first_order(source: SourceSpec, j: int) -> FidelityBound:
    """First correction ``1 - (1 - c_{N+j}) mu**N j!/(N+j)!`` for ``j`` in {0, 1}."""
    if j not in (0, 1):
        raise ValueError(f"first-order form only defined for j in {{0, 1}}, got {j}")
    _check_residue(source, j)
    N, mu = source.n_phases, source.mu
    coef = 1.0 - float(cos_sin_factor(N + j))
    if mu == 0:
        deficit = 0.0
    else:
        deficit = coef * math.exp(N * math.log(mu) - math.lgamma(N + j + 1))
    value = min(max(1.0 - deficit, 0.0), 1.0)
    return FidelityBound(j, value, FidelityOrder.FIRST, min(deficit, 1.0), 1.0 - deficit)


def _signal_decoy_log_fidelity(n_phases: int, mu: float, nu: float, j: int) -> float:
    if n_phases < 1:
        raise ValueError(f"n_phases must be >= 1, got {n_phases}")
    if not 0 <= j < n_phases:
        raise ValueError(f"residue {j} outside [0, {n_phases})")
    if mu < 0 or nu < 0:
        raise ValueError("intensities must be >= 0")
    if mu == nu:
        return 0.0
    # each sum is normalized by its l = 0 term, which cancels in the ratio
    _, a = _series.relative_terms(math.sqrt(mu * nu), n_phases, j)
    _, b = _series.relative_terms(mu, n_phases, j)
    _, c = _series.relative_terms(nu, n_phases, j)
    log_f = (
        math.log1p(float(np.sum(a[1:])))
        - 0.5 * math.log1p(float(np.sum(b[1:])))
        - 0.5 * math.log1p(float(np.sum(c[1:])))
    )
    return min(log_f, 0.0)


def fidelity_signal_decoy(n_phases: int, mu: float, nu: float, j: int = 0) -> float:
    """Fidelity between ``lambda_j`` prepared at intensities ``mu`` and ``nu``.

    Signal and decoy amplitudes are taken to share their phase.  The value is
    non-decreasing in ``j``, so ``j = 0`` gives the worst case ``F_{mu,nu}``.
    """
    return math.exp(_signal_decoy_log_fidelity(n_phases, mu, nu, j))


def signal_decoy_deficit(n_phases: int, mu: float, nu: float, j: int = 0) -> float:
    """``1 - F`` without cancellation."""
    return -math.expm1(_signal_decoy_log_fidelity(n_phases, mu, nu, j))


def deviation_bound(n_phases: int, mu: float, nu: float, j: int = 0) -> float:
    """``sqrt(1 - F**2)``: the largest allowed yield gap between the two intensities."""
    return math.sqrt(max(0.0, -math.expm1(2.0 * _signal_decoy_log_fidelity(n_phases, mu, nu, j))))
