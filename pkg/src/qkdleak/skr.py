"""Secure key rates with Shannon-limit EC leakage and with the multi-photon
leakage discount, for decoy BB84 and MDI-QKD.

Per emitted pulse, with sifting factor ``q`` and signal gain ``Q``:

    R_original = q * max(PA - Q f h(E), 0)
    R_improved = q * max(PA - Q (f h(E) - sum_{l <= l_cap} frac_l Delta^l), 0)

``frac_l`` is the fraction ``|C^l| / N`` of disclosed parities over blocks of
length ``l`` (per sifted bit) and ``Delta`` the certified lower bound on the
multi-photon share of the sifted key.  The PA term is the standard decoy
single-photon bound ``Q_1^L (1 - h(e_1^U))`` (BB84) or ``Q_11 (1 - h(e_11))``
(MDI).
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from .cascade import CascadeSchedule, run_cascade
from .decoy_bb84 import Bb84Observables, Bb84YieldBounds, channel_observables, yield_bounds
from .leakage import ALL, histogram
from .mathcore import binary_entropy
from .mdi_bounds import (N_CUT_DEFAULT, MdiObservables, MdiYieldBounds, mdi_observables,
                         mdi_yield_bounds, single_pair_bounds, true_single_pair)
from .params import ChannelParams
from .pulse_sim import random_frame_pair

Q_SIFT = 0.5

GROWTH_TARGETS = {
    "BB84": {0: 48.36, 20: 55.04, 40: 59.48, 60: 63.14, 80: 71.03, 100: 100.40},
    "MDI": {0: 3.27, 20: 14.00, 40: 18.50, 60: 20.56, 80: 31.45, 100: 37.17},
}
GROWTH_DISTANCES = (0, 20, 40, 60, 80, 100)


class EcMode(str, enum.Enum):
    ANALYTIC = "analytic"
    EMPIRICAL = "empirical"


def shannon_frac1(qber: float, f: float = 1.0) -> dict[int, float]:
    """Default analytic block profile: the whole ``f h(E)`` disclosed as single-bit blocks."""
    return {1: f * binary_entropy(qber)}


@dataclass(frozen=True)
class EcSettings:
    """Error-correction leakage model.

    Attributes:
        mode: ANALYTIC takes ``frac_l`` from ``profile``; EMPIRICAL runs Cascade
            at the model QBER and measures it.
        f: reconciliation efficiency applied to the Shannon term.
        l_cap: largest block length receiving the discount (``None`` for all).
        profile: QBER -> {l: frac_l}; defaults to :func:`shannon_frac1`.
        frame_bits, seeds: Cascade campaign size in EMPIRICAL mode.
    """

    mode: EcMode = EcMode.ANALYTIC
    f: float = 1.0
    l_cap: int | None = 1
    profile: Callable[[float], dict[int, float]] | None = None
    frame_bits: int = 10_000
    seeds: int = 8

    def __post_init__(self) -> None:
        if self.f < 1.0:
            raise ValueError(f"EC efficiency f must be >= 1, got {self.f}")
        if self.l_cap is not None and self.l_cap < 1:
            raise ValueError("l_cap must be >= 1 or None")
        if self.frame_bits < 1 or self.seeds < 1:
            raise ValueError("frame_bits and seeds must be >= 1")

    def block_profile(self, qber: float) -> dict[int, float]:
        if self.mode is EcMode.EMPIRICAL:
            return empirical_profile(qber, self.frame_bits, self.seeds)
        if self.profile is not None:
            return self.profile(qber)
        return shannon_frac1(qber, self.f)


@functools.lru_cache(maxsize=512)
def _empirical_profile_cached(qber_key: float, n: int, seeds: int) -> tuple[tuple[int, float], ...]:
    schedule = CascadeSchedule.default(qber_key, n)
    totals: dict[int, float] = {}
    for s in range(seeds):
        alice, bob = random_frame_pair(n, qber_key, seed=1_000_003 * s + 17)
        res = run_cascade(alice, bob, schedule, seed=s)
        for length, count in histogram(res.ledger).counts.items():
            totals[length] = totals.get(length, 0.0) + count / n / seeds
    return tuple(sorted(totals.items()))


def empirical_profile(qber: float, n: int = 10_000, seeds: int = 8) -> dict[int, float]:
    """Seed-averaged ``|C^l| / N`` from Cascade at the given QBER (cached on a 1e-4 grid)."""
    key = round(float(qber), 4)
    if key <= 0.0:
        return {}
    return dict(_empirical_profile_cached(key, n, seeds))


def discount(profile: dict[int, float], delta: float, l_cap: int | None) -> float:
    """``sum_{l <= l_cap} frac_l delta^l`` per sifted bit."""
    return sum(frac * delta ** l for l, frac in profile.items() if l_cap is ALL or l <= l_cap)


# -- single-point rates ------------------------------------------------------

def pa_term_bb84(obs: Bb84Observables, bounds: Bb84YieldBounds, mu: float) -> float:
    """``Q_1^L (1 - h(e_1^U))`` per pulse."""
    q1 = bounds.Y1_min * mu * math.exp(-mu)
    if q1 <= 0:
        return 0.0
    e1 = (obs.EQ_mu - 0.5 * bounds.Y0_min * math.exp(-mu)) / q1
    e1 = min(max(e1, 0.0), 0.5)
    return q1 * (1.0 - binary_entropy(e1))


def key_rate(pa: float, gain: float, qber: float, f: float, reduction: float = 0.0,
             q: float = Q_SIFT) -> float:
    """``q * max(PA - gain * (f h(E) - reduction), 0)``."""
    return q * max(pa - gain * (f * binary_entropy(qber) - reduction), 0.0)


@dataclass
class SweepRecord:
    """One distance point.

    For MDI, ``delta0_max`` sums the three pair classes holding a vacuum,
    ``delta1_max`` is the (1, 1) class and ``deltaM_min`` is ``Delta_MM^min``.
    """

    protocol: str
    distance_km: float
    Q: float
    E: float
    delta0_max: float
    delta1_max: float
    deltaM_min: float
    pa_term: float
    frac1: float
    leak_all_rate: float
    leak_actual_rate: float
    R_original: float
    R_improved: float
    clamps: list[str] = field(default_factory=list)
    lp_gap: float = 0.0

    @property
    def growth_pct(self) -> float | None:
        if self.R_original <= 0:
            return None
        return 100.0 * (self.R_improved - self.R_original) / self.R_original

    def row(self) -> dict:
        d = asdict(self)
        d["clamps"] = ";".join(self.clamps)
        d["growth_pct"] = self.growth_pct
        return d

    @staticmethod
    def columns() -> list[str]:
        return [f.name for f in fields(SweepRecord)] + ["growth_pct"]


def bb84_point(params: ChannelParams, ec: EcSettings = EcSettings(), q: float = Q_SIFT) -> SweepRecord:
    obs = channel_observables(params)
    b = yield_bounds(obs, params)
    pa = pa_term_bb84(obs, b, params.mu)
    prof = ec.block_profile(obs.E_mu)
    red = discount(prof, b.deltaM_min, ec.l_cap)
    leak = ec.f * binary_entropy(obs.E_mu)
    return SweepRecord(
        "BB84", params.distance_km, obs.Q_mu, obs.E_mu, b.delta0_max, b.delta1_max, b.deltaM_min,
        pa, prof.get(1, 0.0), leak, leak - red,
        key_rate(pa, obs.Q_mu, obs.E_mu, ec.f, 0.0, q), key_rate(pa, obs.Q_mu, obs.E_mu, ec.f, red, q),
        list(b.clamps),
    )


def pa_term_mdi(obs: MdiObservables, params: ChannelParams, source: str = "model",
                n_cut: int = N_CUT_DEFAULT) -> float:
    """``Q_11 (1 - h(e_11))`` per signal pair.

    ``source="model"`` uses the channel model's own ``Y_11`` and ``e_11``;
    ``"lp"`` uses decoy-certified bounds from the yield LP.
    """
    if source == "model":
        y11, e11 = true_single_pair(params)
    elif source == "lp":
        sp = single_pair_bounds(obs, n_cut)
        y11, e11 = sp.Y11_min, sp.e11_max
    else:
        raise ValueError(f"unknown PA source {source!r}")
    q11 = params.mu ** 2 * math.exp(-2.0 * params.mu) * y11
    return q11 * (1.0 - binary_entropy(min(max(e11, 0.0), 0.5)))


def mdi_point(params: ChannelParams, ec: EcSettings = EcSettings(), q: float = Q_SIFT,
              pa_source: str = "model", n_cut: int = N_CUT_DEFAULT) -> SweepRecord:
    obs = mdi_observables(params)
    b: MdiYieldBounds = mdi_yield_bounds(obs, params, n_cut)
    pa = pa_term_mdi(obs, params, pa_source, n_cut)
    prof = ec.block_profile(obs.E_mumu)
    red = discount(prof, b.deltaMM_min, ec.l_cap)
    leak = ec.f * binary_entropy(obs.E_mumu)
    return SweepRecord(
        "MDI", params.distance_km, obs.Q_mumu, obs.E_mumu,
        b.delta00_max + b.delta01_max + b.delta10_max, b.delta11_max, b.deltaMM_min,
        pa, prof.get(1, 0.0), leak, leak - red,
        key_rate(pa, obs.Q_mumu, obs.E_mumu, ec.f, 0.0, q), key_rate(pa, obs.Q_mumu, obs.E_mumu, ec.f, red, q),
        list(b.clamps), b.max_duality_gap,
    )


def point(protocol: str, params: ChannelParams, ec: EcSettings = EcSettings(), **kw) -> SweepRecord:
    proto = protocol.upper()
    if proto == "BB84":
        return bb84_point(params, ec, **kw)
    if proto == "MDI":
        return mdi_point(params, ec, **kw)
    raise ValueError(f"unknown protocol {protocol!r}")


def sweep(protocol: str, params: ChannelParams, distances: Sequence[float],
          ec: EcSettings = EcSettings(), **kw) -> list[SweepRecord]:
    return [point(protocol, params.at(L), ec, **kw) for L in distances]


# -- tables and cutoffs ------------------------------------------------------

def growth_table(records: Sequence[SweepRecord], distances: Sequence[float] = GROWTH_DISTANCES) -> dict[float, str]:
    """Growth in percent at each requested distance, two decimals (``"NA"`` where R_original = 0)."""
    by_d = {float(r.distance_km): r for r in records}
    out = {}
    for L in distances:
        if float(L) not in by_d:
            raise ValueError(f"growth_table: no record at {L} km")
        g = by_d[float(L)].growth_pct
        out[L] = "NA" if g is None else f"{g:.2f}"
    return out


def find_cutoff(rate: Callable[[float], float], start: float = 0.0, stop: float = 500.0,
                step: float = 1.0, tol: float = 0.01) -> float:
    """Largest distance with a positive rate: grid scan, then bisection to ``tol`` km.

    Returns ``start`` when the rate is already zero there, ``stop`` when it
    stays positive over the whole range.
    """
    if rate(start) <= 0:
        return start
    last_pos = start
    L = start + step
    while L <= stop:
        if rate(L) <= 0:
            lo, hi = last_pos, L
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                if rate(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            return lo
        last_pos = L
        L += step
    return stop


@dataclass(frozen=True)
class Cutoffs:
    original_km: float
    improved_km: float

    @property
    def extension_km(self) -> float:
        return self.improved_km - self.original_km


def cutoffs(protocol: str, params: ChannelParams, ec: EcSettings = EcSettings(),
            stop: float = 500.0, step: float = 1.0, **kw) -> Cutoffs:
    cache: dict[float, SweepRecord] = {}

    def rec(L: float) -> SweepRecord:
        if L not in cache:
            cache[L] = point(protocol, params.at(L), ec, **kw)
        return cache[L]

    return Cutoffs(find_cutoff(lambda L: rec(L).R_original, stop=stop, step=step),
                   find_cutoff(lambda L: rec(L).R_improved, stop=stop, step=step))


@dataclass(frozen=True)
class Reconciliation:
    """What ``frac_1`` or PA would reproduce a target growth, other inputs fixed."""

    distance_km: float
    growth_pct: float | None
    target_pct: float
    frac1: float
    frac1_needed: float
    pa_term: float
    pa_needed: float


def reconcile(record: SweepRecord, target_pct: float) -> Reconciliation:
    """Invert ``growth = 100 Q frac_1 Delta / (PA - Q f h(E))`` for ``frac_1`` and for PA.

    Assumes the discount is single-length (``l_cap = 1``) and both rates positive.
    """
    base = record.pa_term - record.Q * record.leak_all_rate
    qd = record.Q * record.deltaM_min
    frac_needed = target_pct / 100.0 * base / qd if qd > 0 else math.inf
    pa_needed = (record.Q * record.leak_all_rate + 100.0 * qd * record.frac1 / target_pct
                 if target_pct > 0 else math.inf)
    return Reconciliation(record.distance_km, record.growth_pct, target_pct,
                          record.frac1, frac_needed, record.pa_term, pa_needed)


def log10_or_blank(x: float) -> str:
    return f"{math.log10(x):.6f}" if x > 0 else ""


def records_array(records: Sequence[SweepRecord]) -> np.ndarray:
    """``(distance, R_original, R_improved)`` rows."""
    return np.array([(r.distance_km, r.R_original, r.R_improved) for r in records])
