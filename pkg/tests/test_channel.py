import math

import numpy as np
import pytest

from dpqkd.channel import ChannelParams, gain, qber, simulate_observables, transmittance
from dpqkd.estimation import Observables, build_decoy_region
from dpqkd.fidelity import deviation_bound, fidelity_signal_decoy
from dpqkd.fockcore import SourceSpec, probabilities

GYS = ChannelParams()


def test_defaults():
    assert (GYS.alpha_db_per_km, GYS.eta_bob, GYS.y0_dark, GYS.e_detector, GYS.f_ec) == (
        0.2, 0.045, 1.7e-6, 0.033, 1.16,
    )


def test_param_validation():
    with pytest.raises(ValueError):
        ChannelParams(e_detector=0.6)
    with pytest.raises(ValueError):
        ChannelParams(eta_bob=1.5)
    with pytest.raises(ValueError):
        ChannelParams(alpha_db_per_km=-0.1)


def test_transmittance_examples():
    assert transmittance(GYS, 0.0) == pytest.approx(0.045)
    assert transmittance(GYS, 50.0) == pytest.approx(0.0045)
    assert transmittance(GYS, 5000.0) < 1e-90
    np.testing.assert_allclose(transmittance(GYS, [0, 50]), [0.045, 0.0045])
    with pytest.raises(ValueError):
        transmittance(GYS, -1.0)


def test_gain_examples():
    assert gain(GYS, 0.0045, 0.0) == pytest.approx(1.7e-6)
    assert gain(ChannelParams(y0_dark=0.0), 0.0, 0.5) == 0.0
    assert gain(GYS, 0.0045, 0.5) == pytest.approx(2.2492e-3, abs=1e-7)


def test_qber_examples():
    assert qber(GYS, 0.0045, 0.5) == pytest.approx(0.03335, abs=1e-5)
    assert qber(GYS, 0.1, 0.0) == pytest.approx(0.5)
    assert qber(GYS, 1.0, 50.0) == pytest.approx(0.033, abs=1e-5)
    assert qber(ChannelParams(y0_dark=0.0), 0.0, 0.5) == 0.5


def test_gain_qber_monotone():
    mus = np.linspace(0.01, 1.0, 50)
    assert np.all(np.diff(gain(GYS, 0.01, mus)) > 0)
    etas = np.geomspace(1e-6, 0.045, 50)
    assert np.all(np.diff(gain(GYS, etas, 0.5)) > 0)
    assert np.all(np.diff(qber(GYS, etas, 0.5)) < 0)


def test_simulate_rows():
    sim = simulate_observables(GYS, 30.0, 0.5, 0.0)
    assert sim.gain_nu == sim.gain_vac
    assert sim.qber_nu == sim.qber_vac
    for q, e in [(sim.gain_mu, sim.qber_mu), (sim.gain_vac, sim.qber_vac)]:
        assert 0 <= e * q <= q
    assert simulate_observables(GYS, 30.0, 0.5).gain_nu is None


@pytest.mark.parametrize("distance", [0.0, 50.0, 100.0, 140.0])
@pytest.mark.parametrize("n", [3, 10])
def test_true_yields_feasible_for_decoy_region(distance, n):
    # the channel's own component yields must satisfy every decoy constraint
    mu, nu = 0.5, 0.05
    sim = simulate_observables(GYS, distance, mu, nu)
    obs = Observables.from_sim(sim)
    pm, pn = probabilities(SourceSpec(n, mu)), probabilities(SourceSpec(n, nu))
    region = build_decoy_region(obs, pm, pn, fidelity_signal_decoy(n, mu, nu), deviation_bound(n, mu, nu))

    def component_values(intensity, p):
        # sum over photon numbers m = j mod N of Poisson-weighted Fock yields
        m = np.arange(200)
        w = np.exp(m * math.log(intensity) - intensity - np.array([math.lgamma(k + 1) for k in m]))
        y = GYS.y0_dark + 1 - (1 - sim.eta) ** m
        z = GYS.y0_dark / 2 + GYS.e_detector * (1 - (1 - sim.eta) ** m)
        ys = np.array([np.sum(w[m % n == j] * y[m % n == j]) for j in range(n)]) / p
        zs = np.array([np.sum(w[m % n == j] * z[m % n == j]) for j in range(n)]) / p
        return ys, zs

    ym, zm = component_values(mu, pm)
    yn, zn = component_values(nu, pn)
    # the fiber model uses exp(-eta mu) rather than the Fock-resolved sum, so
    # the gains agree only to O(eta^2)
    scale = sim.gain_mu
    assert region.yields.violation(np.concatenate([ym, yn])) < 1e-2 * scale
    assert region.errors.violation(np.concatenate([zm, zn])) < 1e-2 * scale
