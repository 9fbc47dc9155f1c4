from __future__ import annotations

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qkdleak.mathcore import (binary_entropy, gf2_rank, make_rng, pack_rows, poisson_pmf,
                              poisson_pmf_vector, poisson_tail, seeded_permutation)

# mpmath at 40 digits
H_0033 = 0.20922047786915264672


def _h_mp(e: float) -> float:
    mpmath.mp.dps = 40
    e = mpmath.mpf(e)
    return float(-e * mpmath.log(e, 2) - (1 - e) * mpmath.log(1 - e, 2))


def _rank_bruteforce(vectors: list[list[int]], n: int) -> int:
    """Gaussian elimination on Python ints, one bit per position."""
    rows = []
    for v in vectors:
        x = 0
        for i in v:
            x ^= 1 << i
        rows.append(x)
    rank = 0
    for bit in range(n):
        pivot = next((r for r in rows if r >> bit & 1), None)
        if pivot is None:
            continue
        rows.remove(pivot)
        rows = [r ^ pivot if r >> bit & 1 else r for r in rows]
        rank += 1
    return rank


def test_entropy_frozen_value():
    assert binary_entropy(0.033) == pytest.approx(H_0033, rel=1e-14)


def test_entropy_endpoints_and_peak():
    assert binary_entropy(0.0) == 0.0
    assert binary_entropy(1.0) == 0.0
    assert binary_entropy(0.5) == 1.0


@pytest.mark.parametrize("bad", [-1e-9, 1.0 + 1e-9])
def test_entropy_rejects_out_of_range(bad):
    with pytest.raises(ValueError):
        binary_entropy(bad)


@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_entropy_matches_mpmath(e):
    assert binary_entropy(e) == pytest.approx(_h_mp(e), rel=1e-12, abs=1e-15)


@given(st.floats(min_value=0.0, max_value=1.0))
def test_entropy_symmetric_and_bounded(e):
    h = binary_entropy(e)
    assert 0.0 <= h <= 1.0
    assert h == pytest.approx(binary_entropy(1.0 - e), abs=1e-12)


def test_poisson_against_mpmath():
    mpmath.mp.dps = 40
    for mean in (0.0007, 0.1, 0.4, 3.0):
        for n in range(8):
            exact = mpmath.exp(-mean) * mpmath.mpf(mean) ** n / mpmath.factorial(n)
            assert poisson_pmf(mean, n) == pytest.approx(float(exact), rel=1e-13)
        exact_tail = 1 - sum(mpmath.exp(-mean) * mpmath.mpf(mean) ** k / mpmath.factorial(k) for k in range(3))
        assert poisson_tail(mean, 3) == pytest.approx(float(exact_tail), rel=1e-12)


def test_poisson_vector_and_edge_cases():
    v = poisson_pmf_vector(0.4, 30)
    assert v.sum() == pytest.approx(1.0, abs=1e-15)
    assert poisson_pmf(0.0, 0) == 1.0 and poisson_pmf(0.0, 2) == 0.0
    assert poisson_pmf(1.0, -1) == 0.0
    assert poisson_tail(0.4, 0) == 1.0
    with pytest.raises(ValueError):
        poisson_pmf(-0.1, 0)


@given(st.lists(st.lists(st.integers(0, 69), max_size=12), max_size=25))
def test_gf2_rank_matches_bruteforce(vectors):
    assert gf2_rank(vectors, 70) == _rank_bruteforce(vectors, 70)


def test_gf2_rank_cases():
    assert gf2_rank([], 5) == 0
    assert gf2_rank([[0, 1], [1, 2], [0, 2]], 3) == 2
    assert gf2_rank([[i] for i in range(130)], 130) == 130
    assert gf2_rank([[3, 3]], 4) == 0  # repeated index cancels
    with pytest.raises(IndexError):
        pack_rows([[5]], 5)


def test_gf2_rank_does_not_mutate_input():
    rows = pack_rows([[0, 1], [1]], 2)
    before = rows.copy()
    gf2_rank([[0, 1], [1]], 2)
    assert np.array_equal(rows, before)


def test_rng_is_deterministic():
    assert np.array_equal(seeded_permutation(7, 100), seeded_permutation(7, 100))
    assert not np.array_equal(seeded_permutation(7, 100), seeded_permutation(8, 100))
    assert make_rng(3).integers(0, 1 << 30) == make_rng(3).integers(0, 1 << 30)
    assert sorted(seeded_permutation(1, 50)) == list(range(50))
    with pytest.raises(ValueError):
        seeded_permutation(0, 0)


def test_multi_photon_tail_at_signal_intensity():
    tail = 1 - poisson_pmf(0.4, 0) - poisson_pmf(0.4, 1)
    assert tail == pytest.approx(0.06155, abs=5e-6)
    assert poisson_tail(0.4, 2) == pytest.approx(tail, rel=1e-12)
