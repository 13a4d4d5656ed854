"""Truncated Fock-space numerics for N-phase randomized coherent states.

A coherent state whose global phase is drawn uniformly from the N values
``2*pi*k/N`` splits into N orthogonal components ``lambda_j``, each supported
on photon numbers congruent to ``j`` modulo N.  This module builds those
components, their emission probabilities, and a brute-force density-matrix
fidelity used to validate the closed-form bounds in :mod:`dpqkd.fidelity`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from dpqkd import _series


class TruncationError(ValueError):
    """Fock-space cut-off too small for the requested tail tolerance."""

    def __init__(self, message: str, tail: float):
        super().__init__(message)
        self.tail = tail


class NumericalDomainError(ValueError):
    """Input operator violates Hermiticity, positivity or trace beyond tolerance."""


@dataclass(frozen=True)
class SourceSpec:
    """Coherent source with ``n_phases`` evenly spaced random phases.

    ``mu`` is the total mean photon number, ``2*|alpha|**2`` for the pair of
    reference and signal pulses of amplitude ``alpha`` each.
    """

    n_phases: int
    mu: float

    def __post_init__(self):
        if int(self.n_phases) != self.n_phases or self.n_phases < 1:
            raise ValueError(f"n_phases must be a positive integer, got {self.n_phases}")
        if not self.mu >= 0 or not math.isfinite(self.mu):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu}")

    @property
    def alpha(self) -> float:
        """Per-pulse amplitude (real, non-negative)."""
        return math.sqrt(self.mu / 2.0)


@dataclass(frozen=True)
class FockVector:
    amplitudes: np.ndarray
    n_max: int
    tail: float = 0.0
    normalized: bool = True
    norm: float = 1.0  # norm of the vector before normalization

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex)
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        if amps.shape != (self.n_max + 1,):
            raise ValueError("amplitudes must have length n_max + 1")
        if self.normalized and not 0 < self.squared_norm <= 1 + 1e-9:
            raise ValueError(f"normalized vector has squared norm {self.squared_norm}")

    @property
    def squared_norm(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2))

    def overlap(self, n: int) -> complex:
        """Amplitude ``<n|psi>`` (zero beyond the cut-off)."""
        return complex(self.amplitudes[n]) if 0 <= n <= self.n_max else 0j


@dataclass(frozen=True)
class LambdaComponent:
    j: int
    vector: FockVector
    probability: float
    n_phases: int

    @property
    def support(self) -> np.ndarray:
        """Photon numbers where the (truncated) vector may be non-zero."""
        n = np.arange(self.vector.n_max + 1)
        return n[n % self.n_phases == self.j]


def coherent_amplitudes(alpha: complex, n_max: int, tail_tol: float | None = None) -> FockVector:
    """Fock amplitudes ``exp(-|a|^2/2) a^n / sqrt(n!)`` of ``|alpha>`` for n <= n_max.

    Args:
        alpha: Complex amplitude.
        n_max: Largest photon number kept.
        tail_tol: If given, raise :class:`TruncationError` when the Poisson
            mass above ``n_max`` exceeds it.
    """
    if n_max < 0:
        raise ValueError(f"n_max must be >= 0, got {n_max}")
    alpha = complex(alpha)
    r2 = abs(alpha) ** 2
    n = np.arange(n_max + 1)
    if alpha == 0:
        amps = np.zeros(n_max + 1, dtype=complex)
        amps[0] = 1.0
        tail = 0.0
    else:
        log_mag = n * math.log(abs(alpha)) - 0.5 * r2 - 0.5 * gammaln(n + 1.0)
        amps = np.exp(log_mag) * np.exp(1j * n * np.angle(alpha))
        tail = float(stats.poisson.sf(n_max, r2))
    if tail_tol is not None and tail > tail_tol:
        raise TruncationError(
            f"tail mass {tail:.3e} above n_max={n_max} exceeds tolerance {tail_tol:.1e}", tail
        )
    return FockVector(amps, n_max, tail=tail, normalized=True, norm=1.0)


def prob_pj(source: SourceSpec, j: int) -> float:
    """Probability of emitting component ``lambda_j``: Poisson mass on ``n = j mod N``."""
    if not 0 <= j < source.n_phases:
        raise ValueError(f"residue {j} outside [0, {source.n_phases})")
    return _series.residue_sum(source.mu, source.n_phases, j, log_scale=-source.mu)


def probabilities(source: SourceSpec) -> np.ndarray:
    """All ``P_j`` for ``j = 0..N-1``."""
    return np.array([prob_pj(source, j) for j in range(source.n_phases)])


def lambda_components(
    source: SourceSpec, n_max: int | None = None, tail_tol: float = 1e-12
) -> list[LambdaComponent]:
    """Decompose the N-phase mixture into its residue components.

    Component ``j`` carries coefficients ``sqrt(mu)**n / sqrt(n!)`` on photon
    numbers ``n = j mod N``.  Vectors are returned normalized; the norm of the
    untruncated unnormalized vector is kept in ``vector.norm``.
    """
    N, mu = source.n_phases, source.mu
    if n_max is None:
        n_max = _series.default_n_max(mu, N)
    if n_max < N - 1:
        raise ValueError(f"n_max={n_max} must be >= N-1={N - 1}")
    n = np.arange(n_max + 1)
    out = []
    for j in range(N):
        support = n[n % N == j]
        amps = np.zeros(n_max + 1, dtype=complex)
        if mu == 0:
            if j == 0:
                amps[0] = 1.0
            vec = FockVector(amps, n_max, tail=0.0, normalized=(j == 0), norm=float(j == 0))
        else:
            lw = _series.log_weights(math.log(mu), support)
            full = _series.residue_sum(mu, N, j)
            # normalize against the untruncated norm so the tail is visible
            amps[support] = np.exp(0.5 * lw) / math.sqrt(full)
            kept = float(np.sum(np.abs(amps) ** 2))
            tail = max(0.0, 1.0 - kept)
            if tail > tail_tol:
                raise TruncationError(
                    f"component {j}: tail {tail:.3e} above n_max={n_max}", tail
                )
            amps /= math.sqrt(kept)
            vec = FockVector(amps, n_max, tail=tail, normalized=True, norm=math.sqrt(full))
        out.append(LambdaComponent(j, vec, prob_pj(source, j), N))
    return out


def _sqrtm_psd(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    # eigenvalues at rounding level are zero; their square roots would not be
    w = np.where(w > 64 * np.finfo(float).eps * max(w[-1], 0.0), w, 0.0)
    return (v * np.sqrt(w)) @ v.conj().T


def _check_density(rho: np.ndarray, name: str, atol: float) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise NumericalDomainError(f"{name} must be a square matrix")
    if not np.allclose(rho, rho.conj().T, atol=atol):
        raise NumericalDomainError(f"{name} is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > atol:
        raise NumericalDomainError(f"{name} has trace {tr}, expected 1")
    wmin = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0]
    if wmin < -atol:
        raise NumericalDomainError(f"{name} has negative eigenvalue {wmin:.3e}")
    return 0.5 * (rho + rho.conj().T)


def mixed_state_fidelity_oracle(
    rho_a: np.ndarray, rho_b: np.ndarray, atol: float = 1e-9, support_cut: float = 1e-12
) -> float:
    """Root fidelity ``tr sqrt(sqrt(rho_b) rho_a sqrt(rho_b))`` by dense linear algebra.

    Both operators are first restricted to the eigenvectors of ``rho_a + rho_b``
    whose eigenvalues exceed ``support_cut`` times the largest one.  Without
    that step every null direction contributes ``sqrt(rounding noise)`` and
    low-rank inputs pick up an upward bias of order 1e-8.
    Intended for small truncated spaces only.
    """
    a = _check_density(rho_a, "rho_a", atol)
    b = _check_density(rho_b, "rho_b", atol)
    if a.shape != b.shape:
        raise NumericalDomainError(f"dimension mismatch {a.shape} vs {b.shape}")
    w, v = np.linalg.eigh(a + b)
    p = v[:, w > support_cut * w[-1]]
    a = p.conj().T @ a @ p
    b = p.conj().T @ b @ p
    # trace norm of sqrt(a) sqrt(b) equals tr sqrt(sqrt(b) a sqrt(b))
    f = float(np.sum(np.linalg.svd(_sqrtm_psd(a) @ _sqrtm_psd(b), compute_uv=False)))
    return min(max(f, 0.0), 1.0)


def bb84_density_matrices(source: SourceSpec, j: int, n_max: int = 15) -> tuple[np.ndarray, np.ndarray]:
    """X- and Y-basis states of component ``j`` on the (reference, signal) mode pair.

    Each logical state is the literal phase-weighted sum over the N
    randomization phases of product coherent states, truncated at ``n_max``
    photons per mode and normalized; the basis state is the equal mixture of
    its two logical states.
    """
    N = source.n_phases
    if not 0 <= j < N:
        raise ValueError(f"residue {j} outside [0, {N})")
    a = source.alpha
    dim = (n_max + 1) ** 2
    # signal-pulse phase factors for bit 0 / bit 1 in X and Y
    encodings = {"x": (1, -1), "y": (1j, -1j)}
    rhos = {}
    for basis, (s0, s1) in encodings.items():
        rho = np.zeros((dim, dim), dtype=complex)
        for s in (s0, s1):
            psi = np.zeros(dim, dtype=complex)
            for k in range(N):
                w = np.exp(2j * np.pi * k / N)
                ref = coherent_amplitudes(w * a, n_max).amplitudes
                sig = coherent_amplitudes(s * w * a, n_max).amplitudes
                psi += np.exp(-2j * np.pi * k * j / N) * np.kron(ref, sig)
            norm = np.linalg.norm(psi)
            if norm < 1e-150:
                raise ValueError(f"component {j} has zero weight at mu={source.mu}")
            psi /= norm
            rho += 0.5 * np.outer(psi, psi.conj())
        rho /= np.trace(rho).real
        rhos[basis] = rho
    return rhos["x"], rhos["y"]
