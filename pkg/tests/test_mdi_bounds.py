from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkdleak import MDI_PRESET, ChannelParams
from qkdleak.mathcore import poisson_pmf_vector
from qkdleak.mdi_bounds import (LP_REL_TOL, MdiObservables, bounds_from_yields, build_yield_lp,
                                mdi_observables, mdi_photon_yields, mdi_yield_bounds, pair_gain,
                                single_pair_bounds, solve_yield_max, true_delta_mm, true_single_pair)
from qkdleak.simplex import LpInfeasibleError

# 40-digit mpmath evaluation of the closed-form gains: (Q_Z, E_Z, Q_X, E_X Q_X).
GAINS_0KM = {
    (0, 0): (0.044052281903818197, 0.032770403073808789, 0.098253029029518847, 0.023818854814961324),
    (2, 2): (2.4754344850943479e-7, 0.038047806270436589, 4.9237128215794049e-7, 1.3179214019544558e-7),
}
Z_ONLY_0KM = {(0, 1): (0.013770804347221849, 0.03278431832846795), (1, 2): (3.2644068451888325e-5, None)}
GAINS_100KM_MUMU = (0.00075358594508420073, 0.032854266301159526, 0.0015222983353914275, 0.00040197847133384348)
Y11_100KM, E11_100KM = 0.0050003600025049939, 0.032794451844404317
E_D = 0.032759878331091608

# Same LP built from scipy.stats Poisson weights and solved by HiGHS dual simplex
# with 1e-10 feasibility tolerances (script kept with the oracle notes).
DELTA_MM_MIN_0KM = 0.17456534791781075


def test_misalignment_mapping():
    assert MDI_PRESET.e_mis_mdi == pytest.approx(E_D, rel=1e-14)


@pytest.mark.parametrize("key", sorted(GAINS_0KM))
def test_gains_frozen_zero_km(key):
    obs = mdi_observables(MDI_PRESET)
    qz, ez, qx, eqx = GAINS_0KM[key]
    assert obs.gains[key] == pytest.approx(qz, rel=1e-12)
    assert obs.x_gains[key] == pytest.approx(qx, rel=1e-12)
    assert obs.x_error_gains[key] == pytest.approx(eqx, rel=1e-11)
    g = pair_gain(1.0, 1.0, obs.intensities[key[0]], obs.intensities[key[1]], 1e-6, E_D)
    assert g.EQ_Z / g.Q_Z == pytest.approx(ez, rel=1e-11)


def test_gains_frozen_other_pairs_and_distance():
    obs = mdi_observables(MDI_PRESET)
    assert obs.gains[0, 1] == pytest.approx(Z_ONLY_0KM[0, 1][0], rel=1e-12)
    assert obs.gains[1, 2] == pytest.approx(Z_ONLY_0KM[1, 2][0], rel=1e-12)
    far = mdi_observables(MDI_PRESET, distance_km=100)
    qz, ez, qx, eqx = GAINS_100KM_MUMU
    assert far.Q_mumu == pytest.approx(qz, rel=1e-12)
    assert far.E_mumu == pytest.approx(ez, rel=1e-11)
    assert far.x_gains[0, 0] == pytest.approx(qx, rel=1e-12)
    assert far.x_error_gains[0, 0] == pytest.approx(eqx, rel=1e-11)
    y11, e11 = true_single_pair(MDI_PRESET.at(100))
    assert y11 == pytest.approx(Y11_100KM, rel=1e-13)
    assert e11 == pytest.approx(E11_100KM, rel=1e-12)


@pytest.mark.parametrize("L", [0.0, 50.0, 150.0, 300.0])
def test_photon_yields_reproduce_gains(L):
    p = MDI_PRESET.at(L)
    obs = mdi_observables(p)
    y_total, y_err = mdi_photon_yields(p, n_cap=14)
    for (i, j), q in obs.gains.items():
        pa = poisson_pmf_vector(obs.intensities[i], 14)
        pb = poisson_pmf_vector(obs.intensities[j], 14)
        assert float(pa @ y_total @ pb) == pytest.approx(q, rel=1e-10)
    pm = poisson_pmf_vector(p.mu, 14)
    assert float(pm @ y_err @ pm) / obs.Q_mumu == pytest.approx(obs.E_mumu, rel=1e-10)
    y11, _ = true_single_pair(p)
    assert y_total[1, 1] == pytest.approx(y11, rel=1e-10)
    assert np.all((y_total >= 0) & (y_total <= 1)) and np.all(y_err <= y_total + 1e-18)


def test_delta_mm_matches_independent_lp_route():
    b = mdi_yield_bounds(mdi_observables(MDI_PRESET), MDI_PRESET)
    assert b.deltaMM_min == pytest.approx(DELTA_MM_MIN_0KM, abs=1e-9)
    assert b.lp_status == "optimal" and b.max_duality_gap < 1e-8 and not b.clamps


@pytest.mark.parametrize("L", [0, 20, 60, 100, 200, 300])
def test_bounds_sound_against_model(L):
    p = MDI_PRESET.at(L)
    obs = mdi_observables(p)
    b = mdi_yield_bounds(obs, p)
    y_total, _ = mdi_photon_yields(p)
    for (n, m), ymax in {(0, 0): b.Y00_max, (0, 1): b.Y01_max, (1, 0): b.Y10_max, (1, 1): b.Y11_max}.items():
        assert ymax >= y_total[n, m] * (1 - 1e-7)
    assert b.deltaMM_min <= true_delta_mm(p) + 1e-9
    sp = single_pair_bounds(obs)
    y11, e11 = true_single_pair(p)
    assert sp.Y11_min <= y11 * (1 + 1e-7)
    assert sp.e11_max >= e11 * (1 - 1e-7)


def test_truncation_monotone():
    obs = mdi_observables(MDI_PRESET.at(30))
    vals = [mdi_yield_bounds(obs, n_cut=k).deltaMM_min for k in (2, 3, 5, 7)]
    assert all(a <= b + 1e-9 for a, b in zip(vals, vals[1:]))


def test_unit_gains_force_unit_yields():
    ints = (0.4, 0.1, 0.0007)
    gains = {(i, j): 1.0 for i in range(3) for j in range(3)}
    obs = MdiObservables(ints, gains, gains, gains, 1.0, 0.0)
    for t in ((0, 0), (1, 1)):
        assert solve_yield_max(obs, t) == pytest.approx(1.0)


def test_known_yield_table_is_feasible_and_bounded():
    """Gains from an explicit table: the table itself satisfies every row and sits inside the bounds."""
    ints = (0.5, 0.1, 0.001)
    n = np.arange(25)
    Y = 0.3 + 0.6 * (1 - np.exp(-0.2 * (n[:, None] + n[None, :])))
    Y[0, 0] = 1e-4
    pmf = [poisson_pmf_vector(x, 24) for x in ints]
    gains = {(i, j): float(pmf[i] @ Y @ pmf[j]) for i in range(3) for j in range(3)}
    obs = MdiObservables(ints, gains, gains, gains, gains[0, 0], 0.0)
    for t in ((0, 0), (0, 1), (1, 1)):
        lp = build_yield_lp(ints, gains, t, n_cut=5)
        x = Y[:6, :6].ravel()
        assert np.all(lp.A @ x >= lp.row_lo - 1e-12) and np.all(lp.A @ x <= lp.row_hi + 1e-12)
        assert solve_yield_max(obs, t, n_cut=5) >= Y[t] - 1e-9


def test_inconsistent_gains_are_infeasible():
    gains = {(0, 0): 0.5, (0, 1): 0.5, (1, 0): 0.5, (1, 1): 0.9}
    obs = MdiObservables((0.4, 0.1), gains, gains, gains, 0.5, 0.0)
    obs.gains[1, 1] = 1.0
    obs.gains[0, 0] = 1e-6
    with pytest.raises(LpInfeasibleError):
        solve_yield_max(obs, (1, 1), n_cut=4)


def test_bounds_from_yields_clamps():
    b = bounds_from_yields({(0, 0): 1.0, (0, 1): 1.0, (1, 0): 1.0, (1, 1): 1.0}, 0.4, 1e-4)
    assert b.clamps and b.deltaMM_min == 0.0
    with pytest.raises(ValueError):
        bounds_from_yields({}, 0.4, 0.0)


def test_lp_validation():
    with pytest.raises(ValueError):
        build_yield_lp((0.4,), {(0, 0): 0.1}, (0, 0), n_cut=0)
    with pytest.raises(ValueError):
        build_yield_lp((0.4,), {(0, 0): 0.1}, (3, 0), n_cut=2)
    with pytest.raises(ValueError):
        MdiObservables((0.4,), {(0, 0): 1.5}, {}, {}, 0.1, 0.0)
    assert LP_REL_TOL == 1e-9


@given(L=st.floats(0, 250), theta=st.floats(0.0, 0.2), pd=st.floats(1e-8, 1e-5))
def test_soundness_random_channels(L, theta, pd):
    p = ChannelParams(distance_km=L, dark_rate=pd, det_eff=1.0, e_det=0.0, theta_a=theta, theta_b=-theta)
    obs = mdi_observables(p)
    b = mdi_yield_bounds(obs, p, n_cut=4)
    assert b.deltaMM_min <= true_delta_mm(p) + 1e-9
    assert 0.0 <= b.deltaMM_min <= 1.0
    assert math.isfinite(b.max_duality_gap)


def test_zero_transmittance_reaches_dark_count_floor():
    p = replace(MDI_PRESET, det_eff=1e-12)
    floor = 4 * p.dark_rate ** 2 * (1 - p.dark_rate) ** 2  # both detectors dark, either Bell state
    for v in mdi_observables(p).gains.values():
        assert v == pytest.approx(floor, rel=1e-5)


def test_aligned_noiseless_channel_has_no_errors():
    p = replace(MDI_PRESET, theta_a=0.0, theta_b=0.0, dark_rate=0.0)
    assert mdi_observables(p).E_mumu == 0.0


def test_vanishing_signal_drives_delta_mm_to_zero():
    vals = []
    for mu in (1e-2, 1e-3):
        p = ChannelParams(mu=mu, nu1=mu / 2, nu2=mu / 10)
        vals.append(mdi_yield_bounds(mdi_observables(p), p).deltaMM_min)
    assert vals[1] < vals[0] < 0.02 and vals[1] < 2e-3


def test_zero_yields_give_unit_multi_fraction():
    b = bounds_from_yields({(0, 0): 0.0, (0, 1): 0.0, (1, 0): 0.0, (1, 1): 0.0}, 0.4, 1e-3)
    assert b.deltaMM_min == 1.0
