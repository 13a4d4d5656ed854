"""Intensity optimization and distance sweeps."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from dpqkd.channel import ChannelParams, simulate_observables
from dpqkd.estimation import Minimum, Observables, estimate_key_rate
from dpqkd.security import RateBreakdown

_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


class Protocol(str, enum.Enum):
    NONDECOY = "nondecoy"
    DECOY = "decoy"
    CONTINUOUS = "continuous_baseline"


@dataclass(frozen=True)
class SweepSpec:
    """What to sweep and how hard to search.

    Args:
        protocol: Estimation protocol.  ``continuous_baseline`` runs
            ``baseline_protocol`` with continuous phase randomization.
        n_phases: Number of discrete phases; ``None`` also means continuous.
        distances_km: Strictly increasing distance grid.
        channel: Fiber and detector parameters.
        mu_range: Signal search range; defaults depend on the protocol.
        nu_range: Decoy search range.
        mu_grid_points: Log-grid size for the non-decoy search.
        rel_tol: Relative tolerance on optimized intensities.
        decoy_rounds: Alternating golden-section rounds for the decoy search.
        cutoff_tol_km: Bisection resolution of the cutoff distance.
        baseline_protocol: Protocol used by ``continuous_baseline``.
    """

    protocol: Protocol = Protocol.DECOY
    n_phases: int | None = 10
    distances_km: tuple[float, ...] = ()
    channel: ChannelParams = field(default_factory=ChannelParams)
    mu_range: tuple[float, float] | None = None
    nu_range: tuple[float, float] = (1e-4, 0.05)
    mu_grid_points: int = 60
    rel_tol: float = 1e-3
    decoy_rounds: int = 3
    cutoff_tol_km: float = 0.5
    baseline_protocol: Protocol = Protocol.DECOY

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol(self.protocol))
        object.__setattr__(self, "baseline_protocol", Protocol(self.baseline_protocol))
        if self.baseline_protocol == Protocol.CONTINUOUS:
            raise ValueError("baseline_protocol must be nondecoy or decoy")
        d = tuple(float(x) for x in self.distances_km)
        object.__setattr__(self, "distances_km", d)
        if any(b <= a for a, b in zip(d, d[1:])):
            raise ValueError("distance grid must be strictly increasing")
        if any(x < 0 for x in d):
            raise ValueError("distances must be >= 0")
        if self.n_phases is not None and (int(self.n_phases) != self.n_phases or self.n_phases < 1):
            raise ValueError(f"n_phases must be a positive integer or None, got {self.n_phases}")
        lo, hi = self.intensity_range
        if not 0 < lo < hi:
            raise ValueError(f"invalid mu range {self.intensity_range}")
        if self.estimation_protocol == Protocol.DECOY and not 0 < self.nu_range[0] < self.nu_range[1]:
            raise ValueError(f"invalid nu range {self.nu_range}")
        if self.rel_tol <= 0 or self.cutoff_tol_km <= 0 or self.mu_grid_points < 3:
            raise ValueError("tolerances must be positive and the grid needs >= 3 points")

    @property
    def estimation_protocol(self) -> Protocol:
        return self.baseline_protocol if self.protocol == Protocol.CONTINUOUS else self.protocol

    @property
    def phases(self) -> int | None:
        return None if self.protocol == Protocol.CONTINUOUS else self.n_phases

    @property
    def intensity_range(self) -> tuple[float, float]:
        if self.mu_range is not None:
            return tuple(self.mu_range)
        return (0.05, 1.0) if self.estimation_protocol == Protocol.DECOY else (1e-4, 1.0)


@dataclass(frozen=True)
class KeyRatePoint:
    """Optimized key rate at one distance.

    ``reason`` is ``"ok"`` for a positive rate, otherwise why it is zero:
    ``"zero_rate"``, ``"degenerate"`` or ``"infeasible"``.
    """

    distance_km: float
    key_rate: float
    mu: float
    nu: float | None
    breakdown: RateBreakdown
    y0: float
    y1: float
    e0: float
    e1: float
    reason: str = "ok"

    @property
    def flagged(self) -> bool:
        return self.reason != "ok"


@dataclass(frozen=True)
class SweepResult:
    points: list[KeyRatePoint]
    cutoff_km: float | None
    cutoff_point: KeyRatePoint | None = None


def evaluate(spec: SweepSpec, distance_km: float, mu: float, nu: float | None = None) -> Minimum:
    """Worst-case rate at fixed intensities."""
    proto = spec.estimation_protocol
    sim = simulate_observables(spec.channel, distance_km, mu, nu if proto == Protocol.DECOY else None)
    obs = Observables.from_sim(sim)
    return estimate_key_rate(obs, spec.phases, proto.value, spec.channel.f_ec)


def _golden(f, lo, hi, tol):
    """Maximize ``f`` on ``[lo, hi]``; returns ``(x, fx)`` of the best point seen."""
    a, b = lo, hi
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    best = max((fc, c), (fd, d))
    while b - a > tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
        best = max(best, (fc, c), (fd, d))
    return best[1], best[0]


def _point(distance, mu, nu, m: Minimum, reason=None) -> KeyRatePoint:
    a = m.assignment
    if reason is None:
        reason = "ok" if m.breakdown.key_rate > 0 else ("zero_rate" if m.status == "ok" else m.status)
    return KeyRatePoint(distance, m.breakdown.key_rate, mu, nu, m.breakdown, a.y0, a.y1, a.e0, a.e1, reason)


def optimize_intensity(spec: SweepSpec, distance_km: float) -> KeyRatePoint:
    """Maximize the key rate over the signal (and decoy) intensity at one distance.

    The search runs on the signed rate so that it keeps a gradient where the
    floored rate is zero.
    """
    lo, hi = spec.intensity_range
    tol = math.log1p(spec.rel_tol)
    cache: dict[tuple, Minimum] = {}

    def run(mu, nu):
        key = (mu, nu)
        if key not in cache:
            cache[key] = evaluate(spec, distance_km, mu, nu)
        return cache[key]

    if spec.estimation_protocol == Protocol.NONDECOY:
        grid = np.geomspace(lo, hi, spec.mu_grid_points)
        vals = [run(float(m), None).breakdown.raw_rate for m in grid]
        k = int(np.argmax(vals))
        a, b = math.log(grid[max(k - 1, 0)]), math.log(grid[min(k + 1, len(grid) - 1)])
        x, fx = _golden(lambda t: run(math.exp(t), None).breakdown.raw_rate, a, b, tol)
        mu, nu = (math.exp(x), None) if fx > vals[k] else (float(grid[k]), None)
    else:
        nlo, nhi = spec.nu_range
        mus = np.geomspace(lo, hi, 8)
        nus = np.geomspace(nlo, nhi, 5)
        cands = [(float(m), float(n)) for m in mus for n in nus if n < m]
        mu, nu = max(cands, key=lambda c: run(*c).breakdown.raw_rate)
        span_mu, span_nu = math.log(mus[1] / mus[0]), math.log(nus[1] / nus[0])
        for _ in range(spec.decoy_rounds):
            a = max(math.log(lo), math.log(mu) - span_mu, math.log(nu) + 1e-12)
            b = min(math.log(hi), math.log(mu) + span_mu)
            x, _ = _golden(lambda t: run(math.exp(t), nu).breakdown.raw_rate, a, b, tol)
            if run(math.exp(x), nu).breakdown.raw_rate > run(mu, nu).breakdown.raw_rate:
                mu = math.exp(x)
            a = max(math.log(nlo), math.log(nu) - span_nu)
            b = min(math.log(nhi), math.log(nu) + span_nu, math.log(mu))
            if b > a:
                x, _ = _golden(lambda t: run(mu, math.exp(t)).breakdown.raw_rate, a, b, tol)
                if run(mu, math.exp(x)).breakdown.raw_rate > run(mu, nu).breakdown.raw_rate:
                    nu = math.exp(x)
            span_mu, span_nu = span_mu / 2, span_nu / 2
    best = run(mu, nu)
    if best.breakdown.key_rate <= 0:
        mid = 0.5 * (lo + hi)
        nmid = None if nu is None else min(0.5 * sum(spec.nu_range), mid)
        m = run(mid, nmid)
        reason = "zero_rate" if best.status == "ok" else best.status
        return replace(_point(float(distance_km), mid, nmid, m, reason), key_rate=0.0)
    return _point(float(distance_km), mu, nu, best)


def _optimize_star(args):
    return optimize_intensity(*args)


def sweep(spec: SweepSpec, jobs: int = 1) -> SweepResult:
    """Optimize every grid distance and bisect the cutoff.

    The cutoff is the largest distance known to give a positive rate, refined
    by bisection between the last positive and the first zero grid point.  It
    is ``None`` when no grid point is positive or the last one still is.
    """
    dists = list(spec.distances_km)
    if jobs > 1 and len(dists) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            points = list(pool.map(_optimize_star, [(spec, d) for d in dists]))
    else:
        points = [optimize_intensity(spec, d) for d in dists]
    cutoff, cpoint = None, None
    pos = [i for i, p in enumerate(points) if p.key_rate > 0]
    if pos and pos[-1] + 1 < len(points):
        i = pos[-1]
        lo, hi = dists[i], dists[i + 1]
        cpoint = points[i]
        while hi - lo > spec.cutoff_tol_km:
            mid = 0.5 * (lo + hi)
            p = optimize_intensity(spec, mid)
            if p.key_rate > 0:
                lo, cpoint = mid, p
            else:
                hi = mid
        cutoff = lo
    return SweepResult(points, cutoff, cpoint)
