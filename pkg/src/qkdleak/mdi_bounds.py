"""MDI-QKD: analytic observables and LP bounds on low photon-number pair yields.

Channel model (symmetric arms, polarisation encoding, threshold detectors,
each party sending phase-randomised weak coherent pulses).  With per-arm
transmittances ``eta_a, eta_b`` (detector efficiency folded in), intensities
``mu_a, mu_b``, dark probability ``pd`` and misalignment
``e_d = sin^2(theta_a - theta_b)``:

    mu' = eta_a mu_a + eta_b mu_b,  x = sqrt(eta_a mu_a eta_b mu_b) / 2
    Q_C = 2 (1-pd)^2 e^{-mu'/2} [1 - (1-pd) e^{-eta_a mu_a/2}] [1 - (1-pd) e^{-eta_b mu_b/2}]
    Q_E = 2 pd (1-pd)^2 e^{-mu'/2} [I0(2x) - (1-pd) e^{-mu'/2}]
    Q_Z = Q_C + Q_E,      E_Z Q_Z = e_d Q_C + (1 - e_d) Q_E

    y   = (1-pd) e^{-mu'/4}
    Q_X = 2 y^2 [1 + 2 y^2 - 4 y I0(x) + I0(2x)]
    E_X Q_X = Q_X / 2 - 2 (1/2 - e_d) y^2 [I0(2x) - 1]

    Y_11 = (1-pd)^2 [eta_a eta_b / 2 + (2 eta_a + 2 eta_b - 3 eta_a eta_b) pd
                     + 4 (1-eta_a)(1-eta_b) pd^2]
    e_11 Y_11 = Y_11 / 2 - (1/2 - e_d)(1-pd)^2 eta_a eta_b / 2

``Q_C`` and ``Q_E`` are the Z-basis coincidences without and with a bit
flip before misalignment.  Resolving them by photon number (``c = 1 - eta/2``)
gives

    Y^C_nm = 2 (1-pd)^2 [c_a^n - (1-pd)(1-eta_a)^n] [c_b^m - (1-pd)(1-eta_b)^m]
    Y^E_nm = 2 pd (1-pd)^2 [n! m! sum_k (eta_a eta_b / 4)^k / k!^2
                              * c_a^(n-k)/(n-k)! * c_b^(m-k)/(m-k)!
                            - (1-pd)(1-eta_a)^n (1-eta_b)^m]

whose Poisson average reproduces ``Q_C`` and ``Q_E``.

The yield LP: for every intensity pair ``(a, b)`` drawn from
``{mu, nu1, nu2}`` on both sides,

    Q_ab - (1 - sum p_a(n) p_b(m)) <= sum_{n,m <= N_cut} p_a(n) p_b(m) Y_nm <= Q_ab

with ``0 <= Y_nm <= 1``.  The tail term keeps the bound valid for any
truncation.  Rows are normalised by ``Q_ab``; coefficients too small to
matter are removed and their mass moved into the lower-side slack, which
only relaxes the program.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import product

import numpy as np

from .mathcore import poisson_pmf_vector
from .params import ChannelParams
from .simplex import LpProblem, LpResult, solve_lp

N_CUT_DEFAULT = 7
LP_REL_TOL = 1e-9  # relative widening of each normalised row
LP_DROP_TOL = 1e-13  # normalised coefficients below this are folded into the row slack
TARGETS = ((0, 0), (0, 1), (1, 0), (1, 1))


# -- analytic model ----------------------------------------------------------

@dataclass(frozen=True)
class PairGain:
    """Gains of one intensity pair in both bases."""

    Q_C: float
    Q_E: float
    Q_X: float
    EQ_X: float
    e_d: float

    @property
    def Q_Z(self) -> float:
        return self.Q_C + self.Q_E

    @property
    def EQ_Z(self) -> float:
        return self.e_d * self.Q_C + (1.0 - self.e_d) * self.Q_E


def pair_gain(eta_a: float, eta_b: float, mu_a: float, mu_b: float, pd: float, e_d: float) -> PairGain:
    mp = eta_a * mu_a + eta_b * mu_b
    x = math.sqrt(eta_a * mu_a * eta_b * mu_b) / 2.0
    q = 1.0 - pd
    qc = (2.0 * q * q * math.exp(-mp / 2.0)
          * (1.0 - q * math.exp(-eta_a * mu_a / 2.0)) * (1.0 - q * math.exp(-eta_b * mu_b / 2.0)))
    qe = 2.0 * pd * q * q * math.exp(-mp / 2.0) * (float(np.i0(2.0 * x)) - q * math.exp(-mp / 2.0))
    y = q * math.exp(-mp / 4.0)
    i0x, i02x = float(np.i0(x)), float(np.i0(2.0 * x))
    qx = 2.0 * y * y * (1.0 + 2.0 * y * y - 4.0 * y * i0x + i02x)
    eqx = 0.5 * qx - 2.0 * (0.5 - e_d) * y * y * (i02x - 1.0)
    return PairGain(max(qc, 0.0), max(qe, 0.0), max(qx, 0.0), min(max(eqx, 0.0), qx), e_d)


@dataclass(frozen=True)
class MdiObservables:
    """Gains for every intensity pair; keys index into ``intensities``."""

    intensities: tuple[float, ...]
    gains: dict[tuple[int, int], float]
    x_gains: dict[tuple[int, int], float]
    x_error_gains: dict[tuple[int, int], float]
    Q_mumu: float
    E_mumu: float

    def __post_init__(self) -> None:
        for table in (self.gains, self.x_gains, self.x_error_gains):
            for key, v in table.items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"gain {key} = {v!r} outside [0, 1]")

    @property
    def mu(self) -> float:
        return self.intensities[0]


def mdi_observables(params: ChannelParams, distance_km: float | None = None) -> MdiObservables:
    if distance_km is not None:
        params = params.at(distance_km)
    eta = params.eta_arm
    ints = params.intensities
    z, xg, xe = {}, {}, {}
    for i, j in product(range(len(ints)), repeat=2):
        g = pair_gain(eta, eta, ints[i], ints[j], params.dark_rate, params.e_mis_mdi)
        z[i, j], xg[i, j], xe[i, j] = g.Q_Z, g.Q_X, g.EQ_X
    sig = pair_gain(eta, eta, params.mu, params.mu, params.dark_rate, params.e_mis_mdi)
    e = sig.EQ_Z / sig.Q_Z if sig.Q_Z > 0 else 0.0
    return MdiObservables(ints, z, xg, xe, sig.Q_Z, e)


def _arm_factors(eta: float, pd: float, n_cap: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(n_cap + 1)
    return (1.0 - eta / 2.0) ** n, (1.0 - pd) * (1.0 - eta) ** n


def mdi_photon_yields(params: ChannelParams, n_cap: int = 12) -> tuple[np.ndarray, np.ndarray]:
    """Photon-number-resolved Z-basis yields ``Y_nm`` and error yields ``e_nm Y_nm``.

    Both arrays have shape ``(n_cap + 1, n_cap + 1)`` indexed by (Alice, Bob)
    photon number.
    """
    eta, pd, e_d = params.eta_arm, params.dark_rate, params.e_mis_mdi
    q = 1.0 - pd
    c_pow, l_pow = _arm_factors(eta, pd, n_cap)
    yc = 2.0 * q * q * np.outer(c_pow - l_pow, c_pow - l_pow)
    # sum_k (eta^2/4)^k / k!^2 * n!/(n-k)! c^(n-k) * m!/(m-k)! c^(m-k)
    c = 1.0 - eta / 2.0
    s = np.zeros((n_cap + 1, n_cap + 1))
    for n in range(n_cap + 1):
        for m in range(n_cap + 1):
            acc = 0.0
            for k in range(min(n, m) + 1):
                acc += ((eta * eta / 4.0) ** k / math.factorial(k) ** 2
                        * math.perm(n, k) * c ** (n - k) * math.perm(m, k) * c ** (m - k))
            s[n, m] = acc
    lo = (1.0 - eta) ** np.arange(n_cap + 1)
    ye = 2.0 * pd * q * q * (s - q * np.outer(lo, lo))
    yc = np.clip(yc, 0.0, 1.0)
    ye = np.clip(ye, 0.0, 1.0)
    return yc + ye, e_d * yc + (1.0 - e_d) * ye


def true_single_pair(params: ChannelParams) -> tuple[float, float]:
    """Model ``(Y_11, e_11)`` in closed form."""
    ea = eb = params.eta_arm
    pd, e_d = params.dark_rate, params.e_mis_mdi
    q2 = (1.0 - pd) ** 2
    y11 = q2 * (ea * eb / 2.0 + (2 * ea + 2 * eb - 3 * ea * eb) * pd + 4 * (1 - ea) * (1 - eb) * pd * pd)
    if y11 <= 0:
        return 0.0, 0.5
    e11 = (0.5 * y11 - (0.5 - e_d) * q2 * ea * eb / 2.0) / y11
    return y11, min(max(e11, 0.0), 0.5)


def true_delta_mm(params: ChannelParams, n_cap: int = 12) -> float:
    """Model fraction of signal-pair successes with either pulse holding >= 2 photons."""
    y_total, _ = mdi_photon_yields(params, n_cap)
    p = poisson_pmf_vector(params.mu, n_cap)
    joint = np.outer(p, p) * y_total
    return 1.0 - float(joint[:2, :2].sum()) / mdi_observables(params).Q_mumu


# -- linear program ----------------------------------------------------------

def build_yield_lp(intensities: tuple[float, ...], gains: dict[tuple[int, int], float],
                   target: tuple[int, int], n_cut: int = N_CUT_DEFAULT, maximize: bool = True,
                   rel_tol: float = LP_REL_TOL) -> LpProblem:
    """LP over ``Y_nm`` (``n, m <= n_cut``, row-major) bounding one target yield."""
    if n_cut < 1:
        raise ValueError("n_cut must be >= 1")
    if not (0 <= target[0] <= n_cut and 0 <= target[1] <= n_cut):
        raise ValueError(f"target {target} outside the truncated yield table")
    pmf = [poisson_pmf_vector(v, n_cut) for v in intensities]
    keys = sorted(gains)
    A = np.empty((len(keys), (n_cut + 1) ** 2))
    lo = np.empty(len(keys))
    hi = np.empty(len(keys))
    for r, (i, j) in enumerate(keys):
        row = np.outer(pmf[i], pmf[j]).ravel()
        q = gains[i, j]
        tail = max(1.0 - row.sum(), 0.0)
        scale = 1.0 / q if q > 0 else 1.0
        row = row * scale
        # Dropping a term can only lower the row sum, so relax the lower side by its mass.
        tiny = row < LP_DROP_TOL
        dropped = float(row[tiny].sum())
        row[tiny] = 0.0
        A[r] = row
        lo[r] = max((q - tail) * scale - dropped - rel_tol, 0.0)
        hi[r] = q * scale + rel_tol
    c = np.zeros(A.shape[1])
    c[target[0] * (n_cut + 1) + target[1]] = 1.0
    names = [f"Y{n}_{m}" for n in range(n_cut + 1) for m in range(n_cut + 1)]
    nv = A.shape[1]
    return LpProblem(c, A, lo, hi, np.zeros(nv), np.ones(nv), maximize=maximize, names=names)


def solve_yield_lp(obs: MdiObservables, target: tuple[int, int], n_cut: int = N_CUT_DEFAULT,
                   maximize: bool = True, basis: str = "Z") -> LpResult:
    table = {"Z": obs.gains, "X": obs.x_gains, "XE": obs.x_error_gains}[basis]
    return solve_lp(build_yield_lp(obs.intensities, table, target, n_cut, maximize))


def solve_yield_max(obs: MdiObservables, target: tuple[int, int], n_cut: int = N_CUT_DEFAULT) -> float:
    """Largest ``Y_target`` consistent with the Z-basis gains (raises on infeasibility)."""
    return min(max(solve_yield_lp(obs, target, n_cut).objective, 0.0), 1.0)


@dataclass
class MdiYieldBounds:
    Y00_max: float
    Y01_max: float
    Y10_max: float
    Y11_max: float
    delta00_max: float
    delta01_max: float
    delta10_max: float
    delta11_max: float
    deltaMM_min: float
    lp_status: str = "optimal"
    max_duality_gap: float = 0.0
    iterations: int = 0
    clamps: list[str] = field(default_factory=list)


def mdi_yield_bounds(obs: MdiObservables, params: ChannelParams | None = None,
                     n_cut: int = N_CUT_DEFAULT) -> MdiYieldBounds:
    """Upper bounds on the four low-order pair fractions and the implied ``Delta_MM^min``."""
    if obs.Q_mumu <= 0:
        raise ValueError("mdi_yield_bounds: Q_mumu must be positive")
    mu = params.mu if params is not None else obs.mu
    ys, gap, iters = {}, 0.0, 0
    for t in TARGETS:
        res = solve_yield_lp(obs, t, n_cut)
        ys[t] = min(max(res.objective, 0.0), 1.0)
        gap = max(gap, res.duality_gap)
        iters += res.iterations
    return bounds_from_yields(ys, mu, obs.Q_mumu, gap, iters)


def bounds_from_yields(ys: dict[tuple[int, int], float], mu: float, q_mumu: float,
                       gap: float = 0.0, iterations: int = 0) -> MdiYieldBounds:
    if q_mumu <= 0:
        raise ValueError("Q_mumu must be positive")
    clamps: list[str] = []
    pref = math.exp(-2.0 * mu)
    deltas = {}
    for (i, j), y in ys.items():
        d = y * mu ** (i + j) * pref / q_mumu
        if d > 1.0:
            clamps.append(f"delta{i}{j}_max={d:.6g}")
        deltas[i, j] = min(d, 1.0)
    dmm = 1.0 - sum(deltas.values())
    if not 0.0 <= dmm <= 1.0:
        clamps.append(f"deltaMM_min={dmm:.6g}")
    dmm = min(max(dmm, 0.0), 1.0)
    return MdiYieldBounds(
        ys[0, 0], ys[0, 1], ys[1, 0], ys[1, 1],
        deltas[0, 0], deltas[0, 1], deltas[1, 0], deltas[1, 1], dmm,
        max_duality_gap=gap, iterations=iterations, clamps=clamps,
    )


@dataclass(frozen=True)
class SinglePairBounds:
    """Decoy-certified ``Y_11`` lower bound and ``e_11`` upper bound."""

    Y11_min: float
    e11_max: float


def single_pair_bounds(obs: MdiObservables, n_cut: int = N_CUT_DEFAULT) -> SinglePairBounds:
    y11z = max(solve_yield_lp(obs, (1, 1), n_cut, maximize=False).objective, 0.0)
    y11x = max(solve_yield_lp(obs, (1, 1), n_cut, maximize=False, basis="X").objective, 0.0)
    ey11 = max(solve_yield_lp(obs, (1, 1), n_cut, maximize=True, basis="XE").objective, 0.0)
    e11 = min(ey11 / y11x, 0.5) if y11x > 0 else 0.5
    return SinglePairBounds(y11z, e11)
