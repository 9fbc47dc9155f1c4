"""Weak+vacuum decoy-state BB84: analytic channel model and photon-number
fraction bounds.

Channel model (standard asymptotic decoy analysis):

    eta      = eta_d * 10^(-alpha L / 10)
    Y_0      = d
    Q_x      = Y_0 + 1 - exp(-eta x)                for x in {mu, nu1, nu2}
    E_mu Q_mu = Y_0 / 2 + e_det (1 - exp(-eta mu))

Bounds on the yields:

    Y_1 <= (Q_nu1 e^nu1 - Q_nu2 e^nu2) / (nu1 - nu2)
    Y_0 <= Q_nu2 e^nu2 - Y_1^min nu2
    Y_0 >= max((nu1 Q_nu2 e^nu2 - nu2 Q_nu1 e^nu1) / (nu1 - nu2), 0)
    Y_1 >= mu / (mu nu1 - mu nu2 - nu1^2 + nu2^2)
           * [Q_nu1 e^nu1 - Q_nu2 e^nu2 - (nu1^2 - nu2^2)/mu^2 (Q_mu e^mu - Y_0^min)]

and the fractions of the signal gain from vacuum, single-photon and
multi-photon pulses follow as Delta_i = Y_i p_mu(i) / Q_mu with
Delta_M^min = 1 - Delta_0^max - Delta_1^max.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from .params import ChannelParams

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Bb84Observables:
    Q_mu: float
    Q_nu1: float
    Q_nu2: float
    E_mu: float
    eta: float

    @property
    def EQ_mu(self) -> float:
        return self.E_mu * self.Q_mu


@dataclass
class Bb84YieldBounds:
    Y1_max: float
    Y1_min: float
    Y0_max: float
    Y0_min: float
    delta1_max: float
    delta0_max: float
    deltaM_min: float
    clamps: list[str] = field(default_factory=list)


def _clamp(name: str, value: float, clamps: list[str], lo: float = 0.0, hi: float = 1.0) -> float:
    if value < lo or value > hi:
        clamps.append(f"{name}={value:.6g}")
        log.debug("clamped %s=%g into [%g, %g]", name, value, lo, hi)
        return min(max(value, lo), hi)
    return value


def channel_observables(params: ChannelParams) -> Bb84Observables:
    eta = params.eta
    y0 = params.dark_rate

    def gain(x: float) -> float:
        return y0 + 1.0 - math.exp(-eta * x)

    q_mu = gain(params.mu)
    eq = 0.5 * y0 + params.e_det * (1.0 - math.exp(-eta * params.mu))
    e_mu = eq / q_mu if q_mu > 0 else 0.0
    return Bb84Observables(q_mu, gain(params.nu1), gain(params.nu2), e_mu, eta)


def _check_decoys(params: ChannelParams) -> None:
    if params.nu1 == params.nu2:
        raise ValueError("decoy intensities nu1 and nu2 must differ")


def y1_upper(obs: Bb84Observables, params: ChannelParams, clamps: list[str] | None = None) -> float:
    _check_decoys(params)
    n1, n2 = params.nu1, params.nu2
    val = (obs.Q_nu1 * math.exp(n1) - obs.Q_nu2 * math.exp(n2)) / (n1 - n2)
    return _clamp("Y1_max", val, clamps if clamps is not None else [])


def y0_lower(obs: Bb84Observables, params: ChannelParams) -> float:
    _check_decoys(params)
    n1, n2 = params.nu1, params.nu2
    return max((n1 * obs.Q_nu2 * math.exp(n2) - n2 * obs.Q_nu1 * math.exp(n1)) / (n1 - n2), 0.0)


def y1_lower(obs: Bb84Observables, params: ChannelParams, clamps: list[str] | None = None) -> float:
    _check_decoys(params)
    mu, n1, n2 = params.intensities
    denom = mu * n1 - mu * n2 - n1 ** 2 + n2 ** 2
    if denom <= 0:
        raise ValueError("two-decoy Y1 lower bound needs mu > nu1 + nu2")
    bracket = (obs.Q_nu1 * math.exp(n1) - obs.Q_nu2 * math.exp(n2)
               - (n1 ** 2 - n2 ** 2) / mu ** 2 * (obs.Q_mu * math.exp(mu) - y0_lower(obs, params)))
    return _clamp("Y1_min", mu / denom * bracket, clamps if clamps is not None else [])


def y0_upper(obs: Bb84Observables, params: ChannelParams, y1_min: float,
             clamps: list[str] | None = None) -> float:
    val = obs.Q_nu2 * math.exp(params.nu2) - y1_min * params.nu2
    return _clamp("Y0_max", val, clamps if clamps is not None else [])


def yield_bounds(obs: Bb84Observables, params: ChannelParams) -> Bb84YieldBounds:
    if obs.Q_mu <= 0:
        raise ValueError("yield_bounds: Q_mu must be positive")
    clamps: list[str] = []
    mu = params.mu
    y1u = y1_upper(obs, params, clamps)
    y1l = y1_lower(obs, params, clamps)
    y0u = y0_upper(obs, params, y1l, clamps)
    d1 = _clamp("delta1_max", y1u * mu * math.exp(-mu) / obs.Q_mu, clamps)
    d0 = _clamp("delta0_max", y0u * math.exp(-mu) / obs.Q_mu, clamps)
    dm = _clamp("deltaM_min", 1.0 - d0 - d1, clamps)
    return Bb84YieldBounds(y1u, y1l, y0u, y0_lower(obs, params), d1, d0, dm, clamps)


@dataclass(frozen=True)
class Bb84TrueFractions:
    delta0: float
    delta1: float
    deltaM: float


def true_fractions(params: ChannelParams) -> Bb84TrueFractions:
    """Ground-truth fractions of the analytic model, ``Y_n = d + 1 - (1-eta)^n``."""
    obs = channel_observables(params)
    mu, eta, d = params.mu, params.eta, params.dark_rate
    d0 = d * math.exp(-mu) / obs.Q_mu
    d1 = (d + eta) * mu * math.exp(-mu) / obs.Q_mu
    return Bb84TrueFractions(d0, d1, 1.0 - d0 - d1)
