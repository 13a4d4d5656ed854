"""Oracle checks run by the ``validate`` command.

Functions are looked up through their modules at call time, so a patched
implementation is what gets checked.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from dpqkd import channel, estimation, fidelity, fockcore


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    residual: float
    tolerance: float


def _result(name, residual, tol) -> CheckResult:
    residual = float(residual)
    return CheckResult(name, bool(residual <= tol), residual, tol)


def check_purification_bound(
    phases=(2, 3, 4, 6), mus=(0.1, 0.3, 0.5), n_max: int = 15, tol: float = 1e-7
) -> CheckResult:
    """Closed-form ``F_j`` never exceeds the dense mixed-state fidelity."""
    worst = -math.inf
    for n in phases:
        for mu in mus:
            src = fockcore.SourceSpec(n, mu)
            for j in range(n):
                rx, ry = fockcore.bb84_density_matrices(src, j, n_max)
                oracle = fockcore.mixed_state_fidelity_oracle(rx, ry)
                worst = max(worst, fidelity.fidelity_series(src, j).value - oracle)
    return _result("purification_bound", max(worst, 0.0), tol)


def check_probability_normalization(
    phases=(1, 2, 3, 5, 8, 16, 32), mus=(0.0, 0.1, 0.5, 1.0, 2.0, 5.0), tol: float = 1e-12
) -> CheckResult:
    worst = 0.0
    for n in phases:
        for mu in mus:
            p = fockcore.probabilities(fockcore.SourceSpec(n, mu))
            worst = max(worst, abs(float(np.sum(p)) - 1.0))
    return _result("probability_normalization", worst, tol)


def check_poisson_limit(n_phases: int = 50, mu: float = 0.5, tol: float = 1e-12) -> CheckResult:
    src = fockcore.SourceSpec(n_phases, mu)
    worst = max(
        abs(fockcore.prob_pj(src, j) - mu**j * math.exp(-mu) / math.factorial(j)) for j in range(6)
    )
    return _result("poisson_limit", worst, tol)


def check_zeroth_order(mu: float = 1e-6, tol: float = 1e-6) -> CheckResult:
    expected = (1.0, 1.0, 0.5, 0.0, 0.25)
    src = fockcore.SourceSpec(8, mu)
    worst = max(abs(fidelity.fidelity_series(src, j).value - e) for j, e in enumerate(expected))
    return _result("zeroth_order_fidelity", worst, tol)


def check_decoy_limit(
    n_phases: int = 10, mu: float = 0.3, distance_km: float = 50.0, tol: float = 1e-10
) -> CheckResult:
    """Equal signal and decoy intensities reduce the decoy region to one intensity."""
    params = channel.ChannelParams()
    sim = channel.simulate_observables(params, distance_km, mu, mu)
    obs = estimation.Observables.from_sim(sim)
    src = fockcore.SourceSpec(n_phases, mu)
    p = fockcore.probabilities(src)
    fids = (fidelity.fidelity_series(src, 0), fidelity.fidelity_series(src, 1))
    f_sd = fidelity.fidelity_signal_decoy(n_phases, mu, mu)
    decoy = estimation.build_decoy_region(obs, p, p, f_sd)
    single = estimation.build_nondecoy_region(obs, p, equalities=True)
    r1 = estimation.minimize_key_rate(decoy, fids, p, obs, params.f_ec).breakdown.raw_rate
    r2 = estimation.minimize_key_rate(single, fids, p, obs, params.f_ec).breakdown.raw_rate
    return _result("decoy_equal_intensity_limit", abs(r1 - r2) + decoy.deviation, tol)


ALL_CHECKS = (
    check_purification_bound,
    check_probability_normalization,
    check_poisson_limit,
    check_zeroth_order,
    check_decoy_limit,
)


def run_all() -> list[CheckResult]:
    return [check() for check in ALL_CHECKS]
