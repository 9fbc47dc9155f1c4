from __future__ import annotations

import csv
import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkdleak.cascade import CascadeSchedule, DisclosureLedger, run_cascade, run_walkthrough
from qkdleak.leakage import (ALL, BlockHistogram, LeakageReport, MultiBlockCounts, histogram,
                             leak_actual_bound, leak_all, leak_m_exact, multi_only_mask, report,
                             reports_to_csv)
from qkdleak.mathcore import gf2_rank
from qkdleak.pulse_sim import ProvenanceTag, random_frame_pair


def _ledger(n: int, index_sets: list[list[int]]) -> DisclosureLedger:
    led = DisclosureLedger(n)
    for v, idx in enumerate(index_sets):
        led.disclose(1, v, np.asarray(idx, dtype=np.int64), 0)
    return led


def test_walkthrough_leakage_figures():
    tr = run_walkthrough()
    assert leak_all(tr.ledger) == pytest.approx(5 / 16)
    assert leak_m_exact(tr.ledger, tr.tags) == pytest.approx(1 / 16)
    rep = report(tr.ledger, tr.tags, delta_m_min=0.0)
    assert rep.leak_actual_exact == pytest.approx(4 / 16)
    assert rep.rank_leak == pytest.approx(5 / 16)


def test_multi_only_mask_requires_every_bit():
    led = _ledger(6, [[0, 1], [1, 2], [3], [4, 5]])
    tags = np.array([2, 2, 1, 2, 0, 2], dtype=np.uint8)
    assert multi_only_mask(led, tags).tolist() == [True, False, True, False]
    with pytest.raises(ValueError):
        multi_only_mask(led, tags[:5])


def test_bound_hand_values():
    hist = BlockHistogram({1: 10, 2: 5, 8: 1}, n=100)
    d = 0.3
    assert leak_actual_bound(hist, d) == pytest.approx(0.1 * 0.7 + 0.05 * (1 - 0.09) + 0.01 * (1 - d ** 8))
    assert leak_actual_bound(hist, d, l_cap=1) == pytest.approx(0.1 * 0.7 + 0.05 + 0.01)
    assert leak_actual_bound(hist, 0.0) == pytest.approx(0.16)
    assert hist.total == 16 and hist.fraction(2) == 0.05 and hist.fraction(3) == 0.0
    with pytest.raises(ValueError):
        leak_actual_bound(hist, 1.2)
    with pytest.raises(ValueError):
        BlockHistogram({0: 1}, n=10)
    with pytest.raises(ValueError):
        BlockHistogram({1: 1}, n=0)


@given(counts=st.dictionaries(st.integers(1, 64), st.integers(1, 500), min_size=1, max_size=8),
       d1=st.floats(0, 1), d2=st.floats(0, 1), cap=st.one_of(st.none(), st.integers(1, 64)))
def test_bound_properties(counts, d1, d2, cap):
    hist = BlockHistogram(counts, n=1000)
    full = hist.total / hist.n
    lo_d, hi_d = sorted((d1, d2))
    b_lo, b_hi = leak_actual_bound(hist, lo_d, cap), leak_actual_bound(hist, hi_d, cap)
    assert 0.0 <= b_hi <= b_lo + 1e-12
    assert b_lo <= full + 1e-12
    assert leak_actual_bound(hist, hi_d, ALL) <= leak_actual_bound(hist, hi_d, cap) + 1e-12


@given(n=st.integers(200, 1500), qber=st.floats(0.01, 0.08), dm=st.floats(0, 0.9),
       seed=st.integers(0, 10_000))
def test_report_consistency(n, qber, dm, seed):
    alice, bob = random_frame_pair(n, qber, seed, multi_fraction=dm)
    res = run_cascade(alice, bob, CascadeSchedule.default(qber, n), seed)
    rep = report(res.ledger, alice.tags, 0.0)
    manual = sum(all(alice.tags[i] == ProvenanceTag.MULTI for i in b.indices) for b in res.ledger)
    assert rep.leak_m_exact == pytest.approx(manual / n)
    assert 0.0 <= rep.leak_m_exact <= rep.leak_all
    assert rep.leak_actual_exact == pytest.approx(rep.leak_all - rep.leak_m_exact)
    assert rep.rank_leak <= rep.leak_all + 1e-15
    assert rep.rank_leak == pytest.approx(gf2_rank(res.ledger.index_sets(), n) / n)
    assert rep.disclosures == len(res.ledger) and rep.n == n
    assert rep.leak_actual_bound == pytest.approx(rep.leak_all)  # zero delta: no discount


def test_report_without_rank_and_violation_flag():
    led = _ledger(4, [[0], [1]])
    tags = np.array([1, 1, 2, 2], dtype=np.uint8)
    rep = report(led, tags, 0.9, with_rank=False)
    assert rep.rank_leak is None
    assert rep.bound_violated  # no multi bits disclosed, estimate assumed 90% were


def test_histogram_counts_lengths():
    led = _ledger(10, [[0, 1], [2], [3, 4], [5, 6, 7]])
    assert histogram(led).counts == {1: 1, 2: 2, 3: 1}
    led = _ledger(16, [list(range(8)), [0, 1, 2, 3], [4, 5], [6], list(range(8, 16))])
    assert histogram(led).counts == {8: 2, 4: 1, 2: 1, 1: 1}
    assert histogram(DisclosureLedger(5)).counts == {}


def test_bound_worked_example():
    hist = BlockHistogram({1: 30, 2: 10}, n=1000)
    assert leak_actual_bound(hist, 0.1, ALL) == pytest.approx(0.0369, abs=1e-15)
    assert leak_actual_bound(BlockHistogram({1: 7}, n=50), 1.0) == 0.0


def test_leak_all_and_multi_edge_cases():
    led = _ledger(100, [[i] for i in range(5)])
    assert leak_all(led) == pytest.approx(0.05)
    assert leak_all(DisclosureLedger(100)) == 0.0
    assert leak_m_exact(led, np.ones(100, dtype=np.uint8)) == 0.0
    assert leak_m_exact(led, np.full(100, 2, dtype=np.uint8)) == leak_all(led)


def test_multi_block_ratio_matches_iid_power():
    """With i.i.d. tags the share of all-multi blocks of length l tends to delta^l."""
    rng = np.random.Generator(np.random.PCG64(1))
    n, delta = 200_000, 0.3
    tags = np.where(rng.random(n) < delta, 2, 1).astype(np.uint8)
    perm = rng.permutation(n)
    led = DisclosureLedger(n)
    for l in (1, 2, 3):
        for v, s in enumerate(range(0, 60_000, l)):
            led.disclose(l, v, perm[s:s + l], 0)
    counts = MultiBlockCounts()
    counts.add(led, tags)
    rows = counts.check(delta)
    assert [r[0] for r in rows] == [1, 2, 3]
    assert all(r[-1] for r in rows)
    assert counts.ratio(1) == pytest.approx(delta, abs=0.01)


def test_reports_csv():
    tr = run_walkthrough()
    text = reports_to_csv([report(tr.ledger, tr.tags, 0.25)])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert list(rows[0]) == LeakageReport.csv_header()
    assert float(rows[0]["leak_all"]) == pytest.approx(5 / 16)
