"""Residue-class power series with a shared truncation policy.

Every series in the package has the form ``sum_l x**n / n!`` over photon
numbers ``n = l*N + j``.  Terms are built in log space (``gammaln``) so that
factorials past 170 do not overflow.
"""

import math

import numpy as np
from scipy.special import gammaln

REL_TOL = 1e-18
ABS_GUARD = 1e-300
MAX_TERMS = 100_000


def default_n_max(mu: float, n_phases: int) -> int:
    return max(60, math.ceil(mu + 10.0 * math.sqrt(mu) + n_phases))


def log_weights(log_x: float, n: np.ndarray) -> np.ndarray:
    """``log(x**n / n!)`` for an array of photon numbers."""
    n = np.asarray(n, dtype=float)
    if log_x == -math.inf:
        return np.where(n == 0, 0.0, -math.inf)
    return n * log_x - gammaln(n + 1.0)


def residue_orders(x: float, n_phases: int, j: int) -> np.ndarray:
    """Photon numbers ``j, j+N, j+2N, ...`` needed to sum ``x**n/n!`` over the class.

    Summation stops at the first term that is past the peak of ``x**n/n!`` and
    below ``REL_TOL`` times the running sum, or below ``ABS_GUARD`` relative to
    the leading term.
    """
    if n_phases < 1:
        raise ValueError(f"n_phases must be >= 1, got {n_phases}")
    if not 0 <= j < n_phases:
        raise ValueError(f"residue {j} outside [0, {n_phases})")
    if x < 0:
        raise ValueError(f"series argument must be >= 0, got {x}")
    if x == 0:
        return np.array([j])
    log_x = math.log(x)
    lead = j * log_x - math.lgamma(j + 1)
    total = 1.0  # running sum relative to the leading term
    n = j + n_phases
    orders = [j]
    while len(orders) < MAX_TERMS:
        rel = math.exp(n * log_x - math.lgamma(n + 1) - lead)
        if n > x and (rel < REL_TOL * total or rel < ABS_GUARD):
            break
        orders.append(n)
        total += rel
        n += n_phases
    return np.array(orders)


def residue_sum(x: float, n_phases: int, j: int, log_scale: float = 0.0) -> float:
    """``exp(log_scale) * sum_{n = j mod N} x**n / n!`` using the truncation policy."""
    n = residue_orders(x, n_phases, j)
    lw = log_weights(math.log(x) if x > 0 else -math.inf, n) + log_scale
    return float(np.sum(np.exp(lw)))


def relative_terms(x: float, n_phases: int, j: int) -> tuple[np.ndarray, np.ndarray]:
    """Photon numbers and terms ``(x**n/n!) / (x**j/j!)`` for the residue class.

    Dividing out the leading term keeps ratios finite even when ``x**j/j!``
    underflows.
    """
    n = residue_orders(x, n_phases, j)
    if x == 0:
        return n, np.ones(1)
    log_x = math.log(x)
    lw = log_weights(log_x, n) - (j * log_x - math.lgamma(j + 1))
    return n, np.exp(lw)
