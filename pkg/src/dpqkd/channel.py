"""Fiber and detector model producing gains and error rates.

Gain ``Q = Y0 + 1 - exp(-eta mu)`` and error-weighted gain
``E Q = Y0/2 + e_d (1 - exp(-eta mu))``, with ``eta = 10**(-alpha L / 10) eta_Bob``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ChannelParams:
    alpha_db_per_km: float = 0.2
    eta_bob: float = 0.045
    y0_dark: float = 1.7e-6
    e_detector: float = 0.033
    f_ec: float = 1.16

    def __post_init__(self):
        for name in ("alpha_db_per_km", "eta_bob", "y0_dark", "e_detector", "f_ec"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
        if self.e_detector > 0.5:
            raise ValueError(f"e_detector must be <= 1/2, got {self.e_detector}")
        if self.eta_bob > 1:
            raise ValueError(f"eta_bob must be <= 1, got {self.eta_bob}")
        if self.y0_dark > 1:
            raise ValueError(f"y0_dark must be <= 1, got {self.y0_dark}")


@dataclass(frozen=True)
class SimObservables:
    """Gains and QBERs at signal, decoy and vacuum intensities for one distance."""

    distance_km: float
    eta: float
    mu: float
    gain_mu: float
    qber_mu: float
    nu: float | None = None
    gain_nu: float | None = None
    qber_nu: float | None = None
    gain_vac: float | None = None
    qber_vac: float | None = None


def transmittance(params: ChannelParams, distance_km):
    """Overall transmittance including Bob's detector."""
    d = np.asarray(distance_km, dtype=float)
    if np.any(d < 0):
        raise ValueError("distance must be >= 0")
    out = 10.0 ** (-params.alpha_db_per_km * d / 10.0) * params.eta_bob
    return float(out) if out.ndim == 0 else out


def _clicks(eta, intensity):
    return -np.expm1(-np.asarray(eta, dtype=float) * np.asarray(intensity, dtype=float))


def gain(params: ChannelParams, eta, intensity):
    """``Q = Y0 + 1 - exp(-eta mu)``."""
    if np.any(np.asarray(intensity) < 0):
        raise ValueError("intensity must be >= 0")
    out = params.y0_dark + _clicks(eta, intensity)
    return float(out) if np.ndim(out) == 0 else out


def qber(params: ChannelParams, eta, intensity):
    """``E = (Y0/2 + e_d (1 - exp(-eta mu))) / Q``; 1/2 when ``Q = 0``."""
    q = np.asarray(gain(params, eta, intensity), dtype=float)
    eq = 0.5 * params.y0_dark + params.e_detector * _clicks(eta, intensity)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(q > 0, eq / np.where(q > 0, q, 1.0), 0.5)
    return float(out) if out.ndim == 0 else out


def simulate_observables(
    params: ChannelParams, distance_km: float, mu: float, nu: float | None = None
) -> SimObservables:
    """Signal, weak-decoy and vacuum observables at one distance.

    The vacuum row is always present; the decoy row only when ``nu`` is given.
    """
    eta = transmittance(params, distance_km)
    out = dict(
        distance_km=float(distance_km),
        eta=eta,
        mu=float(mu),
        gain_mu=gain(params, eta, mu),
        qber_mu=qber(params, eta, mu),
        gain_vac=gain(params, eta, 0.0),
        qber_vac=qber(params, eta, 0.0),
    )
    if nu is not None:
        out.update(nu=float(nu), gain_nu=gain(params, eta, nu), qber_nu=qber(params, eta, nu))
    return SimObservables(**out)
