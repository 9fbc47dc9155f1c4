"""Numeric and bit-algebra primitives shared across the package."""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

PRNG_ID = "numpy.random.PCG64"


def binary_entropy(e: float) -> float:
    """Binary Shannon entropy in bits, with ``0 log 0 = 0``."""
    if not 0.0 <= e <= 1.0:
        raise ValueError(f"binary_entropy: probability {e!r} outside [0, 1]")
    if e == 0.0 or e == 1.0:
        return 0.0
    return -e * math.log2(e) - (1.0 - e) * math.log2(1.0 - e)


def make_rng(seed: int) -> np.random.Generator:
    """The single PRNG construction used everywhere (see ``PRNG_ID``)."""
    return np.random.Generator(np.random.PCG64(seed))


def seeded_permutation(seed: int, n: int) -> np.ndarray:
    """Deterministic Fisher-Yates shuffle of ``range(n)`` driven by PCG64."""
    if n < 1:
        raise ValueError("seeded_permutation: n must be >= 1")
    return make_rng(seed).permutation(n)


def poisson_pmf(mean: float, n: int) -> float:
    if mean < 0:
        raise ValueError(f"poisson_pmf: negative mean {mean!r}")
    if n < 0:
        return 0.0
    if mean == 0.0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(mean) - mean - math.lgamma(n + 1))


def poisson_pmf_vector(mean: float, n_max: int) -> np.ndarray:
    """``[pmf(mean, 0), ..., pmf(mean, n_max)]``."""
    return np.array([poisson_pmf(mean, n) for n in range(n_max + 1)])


def poisson_tail(mean: float, n_min: int) -> float:
    """P(n >= n_min), summed from the lower side to stay accurate for small means."""
    if n_min <= 0:
        return 1.0
    # Direct upper series avoids cancellation when the tail is tiny.
    total = 0.0
    n = n_min
    term = poisson_pmf(mean, n)
    while term > 0.0:
        total += term
        n += 1
        term *= mean / n
        if term < total * 1e-18:
            break
    return total


# -- GF(2) ------------------------------------------------------------------

def pack_rows(vectors: Iterable[Sequence[int]], n: int) -> np.ndarray:
    """Pack index sets into a ``(rows, ceil(n/64))`` uint64 bit matrix.

    Indices appearing twice cancel (GF(2) addition).
    """
    vecs = [np.asarray(v, dtype=np.int64) for v in vectors]
    words = max(1, (n + 63) // 64)
    out = np.zeros((len(vecs), words), dtype=np.uint64)
    for r, idx in enumerate(vecs):
        if idx.size == 0:
            continue
        if idx.min() < 0 or idx.max() >= n:
            raise IndexError(f"gf2: index out of range [0, {n}) in row {r}")
        counts = np.bincount(idx, minlength=n) & 1
        bits = np.flatnonzero(counts)
        np.bitwise_xor.at(out[r], bits >> 6, np.left_shift(np.uint64(1), (bits & 63).astype(np.uint64)))
    return out


def gf2_rank_packed(matrix: np.ndarray) -> int:
    """Rank of a packed bit matrix; the input is not modified."""
    m = np.array(matrix, dtype=np.uint64, copy=True)
    rank = 0
    for i in range(m.shape[0]):
        row = m[i]
        nz = np.flatnonzero(row)
        if nz.size == 0:
            continue
        w = int(nz[0])
        word = int(row[w])
        bit = (word & -word).bit_length() - 1
        rank += 1
        below = m[i + 1:]
        if below.shape[0] == 0:
            break
        hit = np.flatnonzero((below[:, w] >> np.uint64(bit)) & np.uint64(1))
        if hit.size:
            below[hit] ^= row
    return rank


def gf2_rank(vectors: Iterable[Sequence[int]], n: int) -> int:
    """Rank over GF(2) of the indicator vectors of ``vectors`` in ``F_2^n``."""
    rows = pack_rows(vectors, n)
    if rows.shape[0] == 0:
        return 0
    return gf2_rank_packed(rows)
