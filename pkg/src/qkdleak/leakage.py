"""Reconciliation leakage: exact counts from provenance tags and the
distribution-based upper estimate driven by a lower bound on the
multi-photon fraction.

All figures are per sifted bit (divide by the frame length N).
"""

from __future__ import annotations

import csv
import io
import math
from collections import Counter
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from .cascade import DisclosureLedger
from .mathcore import gf2_rank
from .pulse_sim import ProvenanceTag

ALL = None  # l_cap value meaning "apply the reduction to every block length"


@dataclass
class BlockHistogram:
    counts: dict[int, int]
    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("BlockHistogram: N must be >= 1")
        if any(l < 1 for l in self.counts):
            raise ValueError("BlockHistogram: block lengths must be >= 1")

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def fraction(self, length: int) -> float:
        """``|C^l| / N``."""
        return self.counts.get(length, 0) / self.n


def histogram(ledger: DisclosureLedger) -> BlockHistogram:
    return BlockHistogram(dict(sorted(Counter(ledger.lengths().tolist()).items())), ledger.n)


def leak_all(ledger: DisclosureLedger) -> float:
    return len(ledger) / ledger.n


def multi_only_mask(ledger: DisclosureLedger, tags: np.ndarray) -> np.ndarray:
    """Per disclosed block: True when every bit is multi-photon tagged."""
    tags = np.asarray(tags)
    if tags.size != ledger.n:
        raise ValueError(f"tags length {tags.size} != frame length {ledger.n}")
    multi = tags == ProvenanceTag.MULTI
    return np.fromiter((bool(multi[b.indices].all()) for b in ledger.blocks), dtype=bool, count=len(ledger))


def leak_m_exact(ledger: DisclosureLedger, tags: np.ndarray) -> float:
    return int(multi_only_mask(ledger, tags).sum()) / ledger.n


def leak_actual_bound(hist: BlockHistogram, delta_m_min: float, l_cap: int | None = ALL) -> float:
    """Upper estimate ``sum_l |C^l|/N * min(1 - delta^l, 1)``.

    With ``l_cap`` set, only lengths ``<= l_cap`` receive the reduction; longer
    blocks count in full.
    """
    if not 0.0 <= delta_m_min <= 1.0:
        raise ValueError(f"delta_m_min {delta_m_min!r} outside [0, 1]")
    total = 0.0
    for length, count in hist.counts.items():
        factor = 1.0
        if l_cap is ALL or length <= l_cap:
            factor = min(1.0 - delta_m_min ** length, 1.0)
        total += count / hist.n * factor
    return total


@dataclass
class LeakageReport:
    leak_all: float
    leak_m_exact: float
    leak_actual_exact: float
    leak_actual_bound: float
    rank_leak: float | None
    n: int
    disclosures: int
    bound_violated: bool = field(default=False)

    def csv_row(self) -> dict:
        return asdict(self)

    @staticmethod
    def csv_header() -> list[str]:
        return [f.name for f in fields(LeakageReport)]


def report(ledger: DisclosureLedger, tags: np.ndarray, delta_m_min: float,
           l_cap: int | None = ALL, with_rank: bool = True) -> LeakageReport:
    """Assemble every leakage figure for one reconciled frame.

    ``bound_violated`` flags runs where the exact actual leakage exceeds the
    estimate; the estimate only holds in expectation, so this is a statistic
    to aggregate, not an error.
    """
    la = leak_all(ledger)
    lm = leak_m_exact(ledger, tags)
    bound = leak_actual_bound(histogram(ledger), delta_m_min, l_cap)
    rank = gf2_rank(ledger.index_sets(), ledger.n) / ledger.n if with_rank else None
    actual = la - lm
    return LeakageReport(la, lm, actual, bound, rank, ledger.n, len(ledger), actual > bound)


def reports_to_csv(reports: list[LeakageReport]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=LeakageReport.csv_header(), lineterminator="\n")
    w.writeheader()
    for r in reports:
        w.writerow(r.csv_row())
    return buf.getvalue()


@dataclass
class MultiBlockCounts:
    """Per block length: disclosed blocks and those lying fully in the multi-photon set."""

    total: Counter = field(default_factory=Counter)
    multi: Counter = field(default_factory=Counter)

    def add(self, ledger: DisclosureLedger, tags: np.ndarray) -> None:
        mask = multi_only_mask(ledger, tags)
        lengths = ledger.lengths()
        self.total.update(lengths.tolist())
        self.multi.update(lengths[mask].tolist())

    def ratio(self, length: int) -> float:
        return self.multi[length] / self.total[length]

    def check(self, delta_m: float, min_samples: int = 200, n_sigma: float = 3.0) -> list[tuple[int, int, float, float, float, bool]]:
        """Compare ``|C_M^l|/|C^l|`` against ``delta_m**l`` with binomial sigma.

        Returns ``(l, samples, observed, expected, sigma, ok)`` for every length
        with at least ``min_samples`` blocks.
        """
        rows = []
        for length in sorted(self.total):
            n = self.total[length]
            if n < min_samples:
                continue
            p = delta_m ** length
            sigma = math.sqrt(max(p * (1 - p), 0.0) / n)
            obs = self.ratio(length)
            rows.append((length, n, obs, p, sigma, abs(obs - p) <= n_sigma * sigma + 1e-12))
        return rows
