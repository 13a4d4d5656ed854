"""Worst-case parameter estimation for the key-rate minimization.

Decision variables are yields ``Y_j`` and error-weighted yields ``z_j = e_j Y_j``,
which makes every constraint of both protocols linear.  A region therefore
splits into two independent linear systems, one over yields and one over
error-weighted yields; the only coupling, ``z_j <= Y_j``, is dropped.  Dropping
it can only enlarge the region, and for the non-decoy protocol it is exact
because a bit error above 1/2 never lowers the objective.

The objective ``sum_j P_j Y_j (1 - H(e_j^p))`` over ``j in {0, 1}`` is
non-decreasing in each ``Y_j`` at fixed ``z_j`` and non-increasing in each
``z_j`` at fixed ``Y_j``.  Its minimum is thus attained with ``(Y_0, Y_1)`` on
the lower-left Pareto chain of the projected yield polygon and ``(z_0, z_1)``
on the upper-right chain of the projected error polygon.  Both chains are
traced exactly (half-plane clipping when no auxiliary variables exist, LP
support queries otherwise) and the resulting two-parameter problem is solved
by a dense grid followed by compass search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import optimize, stats

from dpqkd import fidelity as fid
from dpqkd.fockcore import SourceSpec, probabilities
from dpqkd.security import (
    RateBreakdown,
    error_correction_cost,
    phase_error_bound,
    privacy_term,
)

# Poisson components kept explicitly in the continuous-randomization limit;
# the remaining mass goes into one unconstrained tail component.
CONTINUOUS_COMPONENTS = 24

_HIGHS = dict(primal_feasibility_tolerance=1e-10, dual_feasibility_tolerance=1e-10)


class InfeasibleRegionError(ValueError):
    """Observables are inconsistent with the constraint set."""


@dataclass(frozen=True)
class Observables:
    """Measured gains and QBERs.

    Args:
        mu: Signal intensity.
        gain_mu: Signal gain ``Q_mu``.
        qber_mu: Signal QBER ``E_mu``.
        nu: Weak decoy intensity, if any.
        gain_nu: Decoy gain.
        qber_nu: Decoy QBER.
        gain_vac: Vacuum-decoy gain (the background yield).
        qber_vac: Vacuum-decoy QBER, normally 1/2.
    """

    mu: float
    gain_mu: float
    qber_mu: float
    nu: float | None = None
    gain_nu: float | None = None
    qber_nu: float | None = None
    gain_vac: float | None = None
    qber_vac: float | None = None

    def __post_init__(self):
        for tag in ("mu", "nu", "vac"):
            q, e = getattr(self, f"gain_{tag}"), getattr(self, f"qber_{tag}")
            if (q is None) != (e is None):
                raise ValueError(f"gain_{tag} and qber_{tag} must be given together")
            if q is None:
                continue
            if not 0 <= q <= 1:
                raise ValueError(f"gain_{tag}={q} outside [0, 1]")
            if not 0 <= e <= 0.5:
                raise ValueError(f"qber_{tag}={e} outside [0, 1/2]")
        if self.mu < 0 or (self.nu is not None and self.nu < 0):
            raise ValueError("intensities must be >= 0")
        if (self.nu is None) != (self.gain_nu is None):
            raise ValueError("decoy intensity and decoy observables must be given together")

    @classmethod
    def from_sim(cls, sim) -> "Observables":
        return cls(
            sim.mu, sim.gain_mu, sim.qber_mu, sim.nu, sim.gain_nu, sim.qber_nu,
            sim.gain_vac, sim.qber_vac,
        )

    @property
    def has_decoy(self) -> bool:
        return self.gain_nu is not None

    @property
    def has_vacuum(self) -> bool:
        return self.gain_vac is not None


@dataclass(frozen=True)
class LinearSystem:
    """``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``0 <= x <= upper``.

    ``targets`` are the indices of the two variables the minimization sees
    (component 0 and 1 at the signal intensity); ``scale`` is a typical
    magnitude used to condition the LPs.
    """

    names: tuple[str, ...]
    a_ub: np.ndarray
    b_ub: np.ndarray
    a_eq: np.ndarray
    b_eq: np.ndarray
    upper: np.ndarray
    targets: tuple[int, int] = (0, 1)
    scale: float = 1.0

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def violation(self, x: np.ndarray) -> float:
        """Largest constraint violation at ``x`` (0 when feasible)."""
        x = np.asarray(x, dtype=float)
        v = [0.0, float(np.max(-x, initial=0.0)), float(np.max(x - self.upper, initial=0.0))]
        if len(self.b_ub):
            v.append(float(np.max(self.a_ub @ x - self.b_ub, initial=0.0)))
        if len(self.b_eq):
            v.append(float(np.max(np.abs(self.a_eq @ x - self.b_eq), initial=0.0)))
        return max(v)


@dataclass(frozen=True)
class FeasibleRegion:
    """Feasible set for ``(Y_j, z_j)`` split into a yield and an error system."""

    kind: str
    yields: LinearSystem
    errors: LinearSystem
    deviation: float = 0.0
    degenerate: bool = False
    notes: tuple[str, ...] = field(default_factory=tuple)


@dataclass(frozen=True)
class Assignment:
    """Worst-case estimates at the minimizer (signal intensity)."""

    y0: float
    y1: float
    e0: float
    e1: float


class Minimum(NamedTuple):
    breakdown: RateBreakdown
    assignment: Assignment
    status: str


# ---------------------------------------------------------------- regions


def _system(names, rows_ub, rows_eq, upper, targets, scale) -> LinearSystem:
    n = len(names)
    a_ub = np.array([r for r, _ in rows_ub], dtype=float).reshape(-1, n)
    b_ub = np.array([b for _, b in rows_ub], dtype=float)
    a_eq = np.array([r for r, _ in rows_eq], dtype=float).reshape(-1, n)
    b_eq = np.array([b for _, b in rows_eq], dtype=float)
    return LinearSystem(tuple(names), a_ub, b_ub, a_eq, b_eq, np.asarray(upper, float), targets, scale)


def _pad_probs(probs) -> np.ndarray:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or len(p) == 0 or np.any(p < 0):
        raise ValueError("probabilities must be a non-empty non-negative vector")
    return np.concatenate([p, np.zeros(max(0, 2 - len(p)))])


def build_nondecoy_region(obs: Observables, probs, equalities: bool = False) -> FeasibleRegion:
    """Region for the protocol without decoy states.

    All losses and errors are attributed to components 0 and 1:
    ``P_0 Y_0 + P_1 Y_1 >= Q - sum_{j>=2} P_j`` and
    ``P_0 z_0 + P_1 z_1 <= E Q``.

    Args:
        obs: Observables; only the signal row is used unless ``equalities``.
        probs: ``P_j`` for ``j = 0..N-1``.
        equalities: Instead keep every component explicit with the exact gain
            and error equations, plus the vacuum-decoy rows when ``obs`` has
            them.  This is the single-intensity counterpart of the decoy region.
    """
    p = _pad_probs(probs)
    if equalities:
        return _equality_region(obs, np.asarray(probs, dtype=float))
    q, eq = obs.gain_mu, obs.qber_mu * obs.gain_mu
    tail = float(np.sum(p[2:]))
    g = q - tail
    scale_y = max(q, 1e-300)
    scale_z = max(eq, 1e-300)
    ys = _system(("Y0", "Y1"), [([-p[0], -p[1]], -g)], [], [1.0, 1.0], (0, 1), scale_y)
    zs = _system(("z0", "z1"), [([p[0], p[1]], eq)], [], [1.0, 1.0], (0, 1), scale_z)
    degenerate = g <= 0
    notes = ("gain fully explained by components j >= 2",) if degenerate else ()
    return FeasibleRegion("nondecoy", ys, zs, 0.0, degenerate, notes)


def _equality_region(obs: Observables, p: np.ndarray) -> FeasibleRegion:
    n = len(p)
    q, eq = obs.gain_mu, obs.qber_mu * obs.gain_mu
    names_y = [f"Y{j}" for j in range(n)]
    names_z = [f"z{j}" for j in range(n)]
    rows_y, rows_z = [], []
    if obs.has_vacuum:
        dv = fid.deviation_bound(n, obs.mu, 0.0)
        qv, zv = obs.gain_vac, obs.gain_vac * obs.qber_vac
        e0 = np.eye(n)[0]
        rows_y += [(e0, qv + dv), (-e0, -(qv - dv))]
        rows_z += [(e0, zv + dv), (-e0, -(zv - dv))]
    pp = np.concatenate([p, np.zeros(max(0, 2 - n))])
    if n == 1:
        names_y.append("Y1")
        names_z.append("z1")
        rows_y = [(np.append(r, 0.0), b) for r, b in rows_y]
        rows_z = [(np.append(r, 0.0), b) for r, b in rows_z]
    ys = _system(names_y, rows_y, [(pp, q)], np.ones(len(pp)), (0, 1), max(q, 1e-300))
    zs = _system(names_z, rows_z, [(pp, eq)], np.ones(len(pp)), (0, 1), max(eq, 1e-300))
    return FeasibleRegion("nondecoy", ys, zs, 0.0, q <= 0, ())


def build_decoy_region(
    obs: Observables,
    probs_mu,
    probs_nu,
    f_sd: float,
    deviation: float | None = None,
    vacuum_deviation: tuple[float, float] | None = None,
    free_tail: bool = False,
) -> FeasibleRegion:
    """Region for the vacuum + weak decoy protocol.

    Every component is an explicit variable at both intensities.  Gains and
    error-weighted gains obey ``Q_k = sum_j P_j^k Y_j^k`` and
    ``E_k Q_k = sum_j P_j^k z_j^k`` for ``k in {mu, nu}``; signal and decoy
    values of one component differ by at most ``sqrt(1 - F_sd**2)``.  When
    vacuum observables are present, ``Y_0^k`` and ``z_0^k`` are tied to the
    vacuum gain the same way, with the fidelity between ``lambda_0`` at
    intensity ``k`` and the vacuum.

    Args:
        obs: Observables with decoy rows.
        probs_mu: ``P_j`` at the signal intensity.
        probs_nu: ``P_j`` at the decoy intensity (same length).
        f_sd: Signal/decoy fidelity ``F_{mu nu}``.
        deviation: ``sqrt(1 - F_sd**2)`` computed without cancellation; takes
            precedence over ``f_sd``.
        vacuum_deviation: Deviation bounds between ``lambda_0`` at ``mu`` (and
            ``nu``) and the vacuum; computed from the source when omitted.
        free_tail: Leave the last component without deviation rows.  Used
            for the aggregated tail in the continuous-randomization limit.
    """
    if not obs.has_decoy:
        raise ValueError("decoy region needs decoy observables")
    pm = np.asarray(probs_mu, dtype=float)
    pn = np.asarray(probs_nu, dtype=float)
    if pm.shape != pn.shape:
        raise ValueError("probability vectors must have equal length")
    if obs.nu > obs.mu:
        raise ValueError(f"decoy intensity {obs.nu} must not exceed signal {obs.mu}")
    if not 0 <= f_sd <= 1:
        raise ValueError(f"f_sd={f_sd} outside [0, 1]")
    if len(pm) == 1:
        pm, pn = np.append(pm, 0.0), np.append(pn, 0.0)
    n = len(pm)
    d = math.sqrt(max(0.0, 1.0 - f_sd * f_sd)) if deviation is None else float(deviation)
    if obs.has_vacuum and vacuum_deviation is None:
        vacuum_deviation = (
            fid.deviation_bound(len(probs_mu), obs.mu, 0.0),
            fid.deviation_bound(len(probs_mu), obs.nu, 0.0),
        )

    def rows_for(vac_value):
        rows = []
        coupled = n - 1 if free_tail else n
        for j in range(coupled):
            r = np.zeros(2 * n)
            r[j], r[n + j] = 1.0, -1.0
            rows += [(r, d), (-r, d)]
        if obs.has_vacuum:
            for k, dv in enumerate(vacuum_deviation):
                r = np.zeros(2 * n)
                r[k * n] = 1.0
                rows += [(r, vac_value + dv), (-r, -(vac_value - dv))]
        return rows

    qm, qn = obs.gain_mu, obs.gain_nu
    zm, zn = obs.qber_mu * qm, obs.qber_nu * qn
    eq_rows = lambda a, b: [(np.concatenate([pm, np.zeros(n)]), a), (np.concatenate([np.zeros(n), pn]), b)]
    names = [f"{tag}{j}" for tag in ("m", "n") for j in range(n)]
    qv = obs.gain_vac if obs.has_vacuum else 0.0
    zv = obs.gain_vac * obs.qber_vac if obs.has_vacuum else 0.0
    ys = _system(["Y" + s for s in names], rows_for(qv), eq_rows(qm, qn), np.ones(2 * n), (0, 1), max(qm, 1e-300))
    zs = _system(["z" + s for s in names], rows_for(zv), eq_rows(zm, zn), np.ones(2 * n), (0, 1), max(zm, 1e-300))
    return FeasibleRegion("decoy", ys, zs, d, qm <= 0, ())


# ---------------------------------------------------------------- chains


# HiGHS silently zeroes matrix entries below 1e-9
_SMALL_ENTRY = 1e-8


class _LP:
    """A linear system in scaled variables, ready for repeated support queries.

    Matrix entries the solver would discard are moved to the right-hand side
    as an interval over the variable bounds, so the LP region always contains
    the true one.
    """

    def __init__(self, system: LinearSystem):
        s = system.scale
        self.system = system
        upper = system.upper / s
        self.bounds = [(0.0, u) for u in upper]
        a_ub, b_ub = _normalize_rows(system.a_ub, system.b_ub / s)
        a_eq, b_eq = _normalize_rows(system.a_eq, system.b_eq / s)
        a_ub, lo_ub, _ = _split_small(a_ub, upper)
        a_eq, lo_eq, hi_eq = _split_small(a_eq, upper)
        b_ub = b_ub - lo_ub
        relaxed = (lo_eq < 0) | (hi_eq > 0)
        if np.any(relaxed):
            a_ub = np.vstack([a_ub, a_eq[relaxed], -a_eq[relaxed]])
            b_ub = np.concatenate([b_ub, b_eq[relaxed] - lo_eq[relaxed], -(b_eq[relaxed] - hi_eq[relaxed])])
            a_eq, b_eq = a_eq[~relaxed], b_eq[~relaxed]
        self.a_ub, self.b_ub = a_ub, b_ub
        self.a_eq, self.b_eq = (a_eq, b_eq) if len(b_eq) else (None, None)

    def argmin(self, c: np.ndarray, extra: tuple[np.ndarray, float] | None = None) -> np.ndarray | None:
        a_ub, b_ub = self.a_ub, self.b_ub
        if extra is not None:
            a_ub = np.vstack([a_ub, extra[0]]) if len(b_ub) else extra[0][None, :]
            b_ub = np.append(b_ub, extra[1])
        res = optimize.linprog(
            c,
            A_ub=a_ub if len(b_ub) else None,
            b_ub=b_ub if len(b_ub) else None,
            A_eq=self.a_eq,
            b_eq=self.b_eq,
            bounds=self.bounds,
            method="highs-ds",
            options=_HIGHS,
        )
        if res.status != 0:
            return None
        return res.x


def _normalize_rows(a: np.ndarray, b: np.ndarray):
    # so that tolerances mean the same thing in every row
    if not len(b):
        return a, b
    nr = np.max(np.abs(a), axis=1)
    nr[nr == 0] = 1.0
    return a / nr[:, None], b / nr


def _split_small(a: np.ndarray, upper: np.ndarray):
    """Zero tiny entries; return the range ``[lo, hi]`` of their row sums over the box."""
    small = (np.abs(a) < _SMALL_ENTRY) & (a != 0)
    dropped = np.where(small, a, 0.0) * upper
    lo = np.sum(np.minimum(dropped, 0.0), axis=1)
    hi = np.sum(np.maximum(dropped, 0.0), axis=1)
    return np.where(small, 0.0, a), lo, hi


def _clip_polygon(system: LinearSystem) -> np.ndarray | None:
    """Polygon of a two-variable inequality system by successive half-plane clipping."""
    s = system.scale
    ux, uy = system.upper / s
    poly = [(0.0, 0.0), (ux, 0.0), (ux, uy), (0.0, uy)]
    for a, b in zip(system.a_ub, system.b_ub / s):
        out = []
        k = len(poly)
        for i in range(k):
            p, q = poly[i], poly[(i + 1) % k]
            fp = a[0] * p[0] + a[1] * p[1] - b
            fq = a[0] * q[0] + a[1] * q[1] - b
            if fp <= 0:
                out.append(p)
            if (fp < 0 < fq) or (fq < 0 < fp):
                t = fp / (fp - fq)
                out.append((p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])))
        poly = out
        if not poly:
            return None
    return np.array(poly)


def _chain_from_polygon(poly: np.ndarray) -> np.ndarray:
    """Lower-left Pareto chain of a counter-clockwise convex polygon."""
    k = len(poly)
    ia = min(range(k), key=lambda i: (poly[i, 0], poly[i, 1]))
    ib = min(range(k), key=lambda i: (poly[i, 1], poly[i, 0]))
    out = [poly[ia]]
    i = ia
    while i != ib:
        i = (i + 1) % k
        if np.any(poly[i] != out[-1]):
            out.append(poly[i])
    # rounding can break the tie that selects the end vertices
    tol = 1e-12 * (1.0 + float(np.abs(poly).max()))
    while len(out) > 1 and out[-1][1] >= out[-2][1] - tol:
        out.pop()
    while len(out) > 1 and out[1][0] <= out[0][0] + tol:
        out.pop(0)
    return np.array(out)


def pareto_chain(system: LinearSystem, sense: int = 1, rtol: float = 1e-10) -> np.ndarray | None:
    """Pareto chain of the projection of ``system`` onto its two target variables.

    ``sense=+1`` gives the lower-left chain (points not dominated from below),
    ``sense=-1`` the upper-right chain.  Returns vertices in unscaled units,
    ordered by increasing first coordinate, or ``None`` when infeasible.
    """
    s = system.scale
    if system.n_vars == 2 and len(system.b_eq) == 0 and system.targets == (0, 1):
        poly = _clip_polygon(system)
        if poly is None:
            return None
        chain = _chain_from_polygon(sense * poly) * sense
        return chain * s
    lp = _LP(system)
    i0, i1 = system.targets
    n = system.n_vars

    def unit(i, w=1.0):
        c = np.zeros(n)
        c[i] = w
        return c

    def lexmin(first, second):
        x = lp.argmin(sense * unit(first))
        if x is None:
            return None
        cap = sense * x[first] + rtol * (1.0 + abs(x[first]))
        y = lp.argmin(sense * unit(second), extra=(sense * unit(first), cap))
        y = x if y is None else y
        return np.array([y[i0], y[i1]])

    a = lexmin(i0, i1)
    if a is None:
        return None
    b = lexmin(i1, i0)
    pts = [a]

    def refine(p, q, depth):
        # a Pareto normal is non-negative; a negative entry is rounding noise
        w = np.maximum(sense * np.array([p[1] - q[1], q[0] - p[0]]), 0.0)
        if depth > 30 or np.all(w <= 10 * rtol * (1 + np.abs(p).max())):
            return
        c = np.zeros(n)
        c[i0], c[i1] = sense * w[0], sense * w[1]
        x = lp.argmin(c)
        if x is None:
            return
        r = np.array([x[i0], x[i1]])
        gap = sense * (w @ p - w @ r)
        if gap > rtol * (1.0 + abs(w @ p)) * (1.0 + np.abs(w).sum()):
            refine(p, r, depth + 1)
            pts.append(r)
            refine(r, q, depth + 1)

    # the lexicographic caps let endpoints drift by rtol, so demand more
    if np.max(np.abs(a - b)) > 10 * rtol * (1.0 + np.abs(a).max()):
        refine(a, b, 0)
        pts.append(b)
    return np.array(pts) * s


def _chain_points(chain: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Points at normalized arc length ``t`` along a polyline."""
    t = np.asarray(t, dtype=float)
    if len(chain) == 1:
        return np.broadcast_to(chain[0], t.shape + (2,)).copy()
    seg = np.linalg.norm(np.diff(chain, axis=0) / np.maximum(np.abs(chain).max(axis=0), 1e-300), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    if cum[-1] == 0:
        return np.broadcast_to(chain[0], t.shape + (2,)).copy()
    cum /= cum[-1]
    x = np.interp(t, cum, chain[:, 0])
    y = np.interp(t, cum, chain[:, 1])
    return np.stack([x, y], axis=-1)


# ---------------------------------------------------------------- minimization


def _deficits(fidelities) -> np.ndarray:
    out = []
    for f in fidelities:
        out.append(float(f.deficit) if hasattr(f, "deficit") else 1.0 - float(f))
    if len(out) != 2:
        raise ValueError("need fidelities for components 0 and 1")
    return np.array(out)


def privacy_objective(y: np.ndarray, z: np.ndarray, probs, deficits) -> np.ndarray:
    """``sum_{j in {0,1}} P_j Y_j (1 - H(e_j^p))`` with ``e_j = z_j / Y_j``; last axis is ``j``."""
    y = np.asarray(y, dtype=float)
    z = np.asarray(z, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(y > 0, z / np.where(y > 0, y, 1.0), 0.5)
    p = np.asarray(probs[:2], dtype=float)
    return np.sum(privacy_term(p, y, np.clip(e, 0.0, 0.5), np.asarray(deficits)), axis=-1)


def _compass(f, start, step, min_step=1e-10):
    x = np.array(start, dtype=float)
    fx = float(f(x[None, :])[0])
    dirs = np.array([[1, 0], [-1, 0], [0, 1], [0, -1], [1, 1], [-1, -1], [1, -1], [-1, 1]], float)
    while step > min_step:
        cand = np.clip(x + step * dirs, 0.0, 1.0)
        vals = f(cand)
        k = int(np.argmin(vals))
        if vals[k] < fx:
            x, fx = cand[k], float(vals[k])
        else:
            step *= 0.5
    return x, fx


def minimize_key_rate(region: FeasibleRegion, fidelities, probs, obs: Observables, f_ec: float) -> Minimum:
    """Worst-case key rate over the region.

    Args:
        region: Output of one of the region builders.
        fidelities: ``F_0`` and ``F_1`` (floats or :class:`FidelityBound`).
        probs: ``P_j`` at the signal intensity.
        obs: Observables; the signal row sets the error-correction cost.
        f_ec: Error-correction inefficiency.

    Returns:
        ``(breakdown, assignment, status)``; ``status`` is ``"ok"``,
        ``"degenerate"`` or ``"infeasible"``.  The reported privacy sum is the
        objective at a feasible point.
    """
    p = _pad_probs(probs)
    d = _deficits(fidelities)
    i_ec = error_correction_cost(obs.gain_mu, obs.qber_mu, f_ec)
    zero = Assignment(0.0, 0.0, 0.5, 0.5)
    if region.degenerate:
        return Minimum(RateBreakdown(0.0, -i_ec, i_ec, (0.0, 0.0), (0.5, 0.5)), zero, "degenerate")
    ych = pareto_chain(region.yields, +1)
    zch = pareto_chain(region.errors, -1)
    if ych is None or zch is None:
        return Minimum(RateBreakdown(0.0, -i_ec, i_ec, (0.0, 0.0), (0.5, 0.5)), zero, "infeasible")
    ych = np.clip(ych, 0.0, 1.0)
    zch = np.clip(zch, 0.0, 1.0)

    def f(st):
        st = np.atleast_2d(st)
        return privacy_objective(_chain_points(ych, st[:, 0]), _chain_points(zch, st[:, 1]), p, d)

    g = np.linspace(0.0, 1.0, 65)
    ss, tt = np.meshgrid(g, g, indexing="ij")
    grid = np.stack([ss.ravel(), tt.ravel()], axis=1)
    vals = f(grid)
    best_x, best_f = None, math.inf
    for k in np.argsort(vals, kind="stable")[:4]:
        x, fx = _compass(f, grid[k], 1.0 / 64)
        if fx < best_f:
            best_x, best_f = x, fx
    y = _chain_points(ych, best_x[0])
    z = _chain_points(zch, best_x[1])
    with np.errstate(divide="ignore", invalid="ignore"):
        e = np.where(y > 0, np.minimum(z / np.where(y > 0, y, 1.0), 1.0), 0.5)
    terms = privacy_term(p[:2], y, np.clip(e, 0.0, 0.5), d)
    phases = []
    for j in range(2):
        delta = 0.5 if y[j] == 0 else min(d[j] / (2 * y[j]), 0.5)
        phases.append(phase_error_bound(delta, min(float(e[j]), 0.5)))
    raw = float(np.sum(terms)) - i_ec
    breakdown = RateBreakdown(max(raw, 0.0), raw, i_ec, tuple(float(t) for t in terms), tuple(phases))
    return Minimum(breakdown, Assignment(float(y[0]), float(y[1]), float(e[0]), float(e[1])), "ok")


# ---------------------------------------------------------------- pipeline


def continuous_probabilities(mu: float, n_components: int = CONTINUOUS_COMPONENTS) -> np.ndarray:
    """Poisson weights for ``j < n_components`` plus the tail mass as a last entry."""
    j = np.arange(n_components)
    p = stats.poisson.pmf(j, mu) if mu > 0 else (j == 0).astype(float)
    tail = float(stats.poisson.sf(n_components - 1, mu)) if mu > 0 else 0.0
    return np.append(p, tail)


def estimate_key_rate(obs: Observables, n_phases: int | None, protocol: str, f_ec: float = 1.16) -> Minimum:
    """Build the region for ``protocol`` and minimize.

    Args:
        obs: Observables (decoy and vacuum rows needed for ``"decoy"``).
        n_phases: Number of discrete phases, or ``None`` for continuous
            randomization (Poisson components, unit fidelities).
        protocol: ``"nondecoy"`` or ``"decoy"``.
        f_ec: Error-correction inefficiency.
    """
    if protocol not in ("nondecoy", "decoy"):
        raise ValueError(f"unknown protocol {protocol!r}")
    if n_phases is None:
        pm = continuous_probabilities(obs.mu)
        fids = (1.0, 1.0)
    else:
        src = SourceSpec(n_phases, obs.mu)
        pm = probabilities(src)
        fids = (fid.fidelity_series(src, 0), fid.fidelity_series(src, 1) if n_phases > 1 else 1.0)
    if protocol == "nondecoy":
        region = build_nondecoy_region(obs, pm)
        return minimize_key_rate(region, fids, pm, obs, f_ec)
    if n_phases is None:
        pn = continuous_probabilities(obs.nu)
        region = build_decoy_region(obs, pm, pn, 1.0, 0.0, (0.0, 0.0), free_tail=True)
    else:
        pn = probabilities(SourceSpec(n_phases, obs.nu))
        dev = fid.deviation_bound(n_phases, obs.mu, obs.nu)
        region = build_decoy_region(obs, pm, pn, fid.fidelity_signal_decoy(n_phases, obs.mu, obs.nu), dev)
    return minimize_key_rate(region, fids, pm, obs, f_ec)
