import math

import numpy as np
import pytest

from dpqkd.fockcore import (
    NumericalDomainError,
    SourceSpec,
    TruncationError,
    bb84_density_matrices,
    coherent_amplitudes,
    lambda_components,
    mixed_state_fidelity_oracle,
    prob_pj,
    probabilities,
)
from dpqkd import fidelity


def test_source_spec_validation():
    with pytest.raises(ValueError):
        SourceSpec(0, 0.5)
    with pytest.raises(ValueError):
        SourceSpec(2, -0.1)
    with pytest.raises(ValueError):
        SourceSpec(2.5, 0.1)
    assert SourceSpec(4, 0.5).alpha == pytest.approx(0.5)


def test_vacuum_amplitudes():
    v = coherent_amplitudes(0, 5)
    np.testing.assert_array_equal(v.amplitudes, [1, 0, 0, 0, 0, 0])
    assert v.tail == 0.0


def test_one_photon_weight_at_unit_amplitude():
    v = coherent_amplitudes(1.0, 30)
    assert abs(v.overlap(1)) ** 2 == pytest.approx(math.exp(-1.0), rel=1e-14)
    assert v.overlap(31) == 0


def test_coherent_norm_converges():
    norms = [coherent_amplitudes(1.5 + 0.5j, n).squared_norm for n in (5, 10, 20, 40)]
    gaps = [1 - x for x in norms]
    assert all(a > b for a, b in zip(gaps, gaps[1:]))
    assert gaps[-1] < 1e-14


def test_coherent_phase_and_large_n():
    a = 0.7 * np.exp(0.3j)
    v = coherent_amplitudes(a, 200)
    n = 3
    expect = math.exp(-abs(a) ** 2 / 2) * a**n / math.sqrt(math.factorial(n))
    assert v.overlap(n) == pytest.approx(expect, rel=1e-13)
    assert np.all(np.isfinite(v.amplitudes))


def test_truncation_error_reports_tail():
    with pytest.raises(TruncationError) as exc:
        coherent_amplitudes(3.0, 5, tail_tol=1e-6)
    assert exc.value.tail > 1e-6
    with pytest.raises(ValueError):
        coherent_amplitudes(1.0, -1)


def test_prob_vacuum_source():
    src = SourceSpec(3, 0.0)
    assert prob_pj(src, 0) == 1.0
    assert prob_pj(src, 1) == 0.0
    assert prob_pj(src, 2) == 0.0


def test_prob_two_phases_cosh_sinh():
    src = SourceSpec(2, 0.5)
    assert prob_pj(src, 0) == pytest.approx(math.exp(-0.5) * math.cosh(0.5), abs=1e-15)
    assert prob_pj(src, 1) == pytest.approx(math.exp(-0.5) * math.sinh(0.5), abs=1e-15)
    assert prob_pj(src, 0) == pytest.approx(0.68394, abs=5e-6)


def test_prob_roots_of_unity_filter():
    # P_j = (1/N) sum_k w^{-jk} exp(mu (w^k - 1)), w = exp(2 pi i / N)
    for n, mu in [(3, 0.7), (5, 2.0), (7, 0.2)]:
        w = np.exp(2j * np.pi * np.arange(n) / n)
        for j in range(n):
            ref = np.mean(w ** (-j) * np.exp(mu * (w - 1))).real
            assert prob_pj(SourceSpec(n, mu), j) == pytest.approx(ref, abs=1e-14)


def test_prob_invalid_residue():
    with pytest.raises(ValueError):
        prob_pj(SourceSpec(3, 0.1), 3)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 16, 32])
@pytest.mark.parametrize("mu", [0.0, 0.1, 0.5, 1.0, 2.0, 5.0])
def test_probabilities_normalized(n, mu):
    assert abs(probabilities(SourceSpec(n, mu)).sum() - 1.0) < 1e-12


@pytest.mark.parametrize("n", [40, 50, 64])
@pytest.mark.parametrize("mu", [0.1, 0.5, 1.0])
def test_poisson_limit(n, mu):
    src = SourceSpec(n, mu)
    for j in range(6):
        assert abs(prob_pj(src, j) - mu**j * math.exp(-mu) / math.factorial(j)) < 1e-12


def test_poisson_limit_value():
    assert prob_pj(SourceSpec(50, 0.5), 1) == pytest.approx(0.303265, abs=5e-7)


def test_single_phase_component_is_coherent_state():
    (comp,) = lambda_components(SourceSpec(1, 0.8), n_max=40)
    ref = coherent_amplitudes(math.sqrt(0.8), 40).amplitudes
    np.testing.assert_allclose(comp.vector.amplitudes, ref / np.linalg.norm(ref), atol=1e-14)
    assert comp.probability == pytest.approx(1.0)


def test_two_phase_parity_support():
    c0, c1 = lambda_components(SourceSpec(2, 0.9), n_max=30)
    assert np.all(c0.vector.amplitudes[1::2] == 0)
    assert np.all(c1.vector.amplitudes[0::2] == 0)


@pytest.mark.parametrize("n", [3, 4, 7])
def test_support_pattern_exact_zeros(n):
    for comp in lambda_components(SourceSpec(n, 0.6)):
        idx = np.arange(comp.vector.n_max + 1)
        assert np.all(comp.vector.amplitudes[idx % n != comp.j] == 0)
        np.testing.assert_array_equal(comp.support, idx[idx % n == comp.j])


def test_ten_phase_component_is_nearly_single_photon():
    comps = lambda_components(SourceSpec(10, 0.5), n_max=60)
    assert abs(comps[1].vector.overlap(1)) ** 2 >= 0.999


def test_component_norm_metadata():
    comps = lambda_components(SourceSpec(3, 0.4))
    for c in comps:
        assert c.vector.squared_norm == pytest.approx(1.0, abs=1e-12)
        # norm**2 times e^{-mu} is the emission probability
        assert c.vector.norm**2 * math.exp(-0.4) == pytest.approx(c.probability, rel=1e-12)


def test_components_truncation_and_bounds():
    with pytest.raises(TruncationError):
        lambda_components(SourceSpec(2, 4.0), n_max=5)
    with pytest.raises(ValueError):
        lambda_components(SourceSpec(5, 0.1), n_max=3)


def _pure(v):
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj()), v


def test_oracle_identical_and_orthogonal():
    rho, _ = _pure([1, 1j, 0.5])
    assert mixed_state_fidelity_oracle(rho, rho) == pytest.approx(1.0, abs=1e-12)
    a, _ = _pure([1, 0, 0])
    b, _ = _pure([0, 1, 0])
    assert mixed_state_fidelity_oracle(a, b) == pytest.approx(0.0, abs=1e-12)


def test_oracle_pure_overlap_and_symmetry():
    rng = np.random.default_rng(7)
    for _ in range(5):
        a, va = _pure(rng.normal(size=6) + 1j * rng.normal(size=6))
        b, vb = _pure(rng.normal(size=6) + 1j * rng.normal(size=6))
        f_ab = mixed_state_fidelity_oracle(a, b)
        assert f_ab == pytest.approx(abs(np.vdot(va, vb)), abs=1e-9)
        assert f_ab == pytest.approx(mixed_state_fidelity_oracle(b, a), abs=1e-9)


def test_oracle_mixed_symmetry():
    rng = np.random.default_rng(3)

    def rand_rho():
        g = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        r = g @ g.conj().T
        return r / np.trace(r).real

    a, b = rand_rho(), rand_rho()
    assert mixed_state_fidelity_oracle(a, b) == pytest.approx(mixed_state_fidelity_oracle(b, a), abs=1e-9)


def test_oracle_rejects_bad_input():
    good, _ = _pure([1, 0])
    with pytest.raises(NumericalDomainError):
        mixed_state_fidelity_oracle(np.diag([1.5, -0.5]), good)
    with pytest.raises(NumericalDomainError):
        mixed_state_fidelity_oracle(np.diag([0.5, 0.4]), good)
    with pytest.raises(NumericalDomainError):
        mixed_state_fidelity_oracle(np.array([[0.5, 0.3], [0.1, 0.5]]), good)
    with pytest.raises(NumericalDomainError):
        mixed_state_fidelity_oracle(good, np.eye(3) / 3)


def test_bb84_states_bound_closed_form():
    src = SourceSpec(4, 0.2)
    rx, ry = bb84_density_matrices(src, 1)
    assert np.trace(rx).real == pytest.approx(1.0)
    oracle = mixed_state_fidelity_oracle(rx, ry)
    assert fidelity.fidelity_series(src, 1).value <= oracle + 1e-7
