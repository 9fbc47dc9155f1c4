"""Cascade reconciliation with a complete record of every disclosed parity.

Index sets are kept in original (pre-shuffle) frame coordinates so that the
provenance tags of the underlying pulses can be intersected with any
disclosed block afterwards.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .mathcore import make_rng
from .pulse_sim import BitFrame, ProvenanceTag


def _parity(bits: np.ndarray, idx: np.ndarray) -> int:
    return int(bits[idx].sum()) & 1


@dataclass
class ParityBlock:
    """One disclosed parity: Alice's XOR over ``indices``."""

    pass_index: int
    block_id: int
    indices: np.ndarray
    parity_alice: int

    @property
    def length(self) -> int:
        return int(self.indices.size)


@dataclass
class DisclosureLedger:
    """Ordered record of all parities Alice disclosed during one run."""

    n: int
    blocks: list[ParityBlock] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("DisclosureLedger: frame length must be >= 1")

    def __len__(self) -> int:
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def disclose(self, pass_index: int, block_id: int, indices: np.ndarray, parity: int) -> ParityBlock:
        block = ParityBlock(pass_index, block_id, indices, parity)
        self.blocks.append(block)
        return block

    def lengths(self) -> np.ndarray:
        return np.fromiter((b.indices.size for b in self.blocks), dtype=np.int64, count=len(self.blocks))

    def index_sets(self) -> list[np.ndarray]:
        return [b.indices for b in self.blocks]

    def replay(self, alice_bits: np.ndarray) -> bool:
        """True when every recorded parity matches ``alice_bits``."""
        return all(_parity(alice_bits, b.indices) == b.parity_alice for b in self.blocks)

    def to_csv(self, path: str | Path | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pass", "block_id", "length", "parity", "index_set"])
        for b in self.blocks:
            w.writerow([b.pass_index, b.block_id, b.length, b.parity_alice, encode_index_set(b.indices)])
        text = buf.getvalue()
        if path is not None:
            Path(path).write_text(text)
        return text

    @classmethod
    def from_csv(cls, text: str, n: int) -> "DisclosureLedger":
        ledger = cls(n)
        for row in csv.DictReader(io.StringIO(text)):
            idx = decode_index_set(row["index_set"])
            if idx.size != int(row["length"]):
                raise ValueError(f"ledger row length mismatch: {row}")
            ledger.disclose(int(row["pass"]), int(row["block_id"]), idx, int(row["parity"]))
        return ledger


def encode_index_set(indices: Iterable[int]) -> str:
    """Hex run-length form of a set: ``start+len`` runs joined by ``;``.

    ``[3, 4, 5, 16]`` encodes as ``3+3;10+1`` (both numbers hexadecimal).
    """
    idx = np.unique(np.asarray(indices, dtype=np.int64))
    if idx.size == 0:
        return ""
    breaks = np.flatnonzero(np.diff(idx) != 1) + 1
    starts = np.concatenate(([0], breaks))
    ends = np.concatenate((breaks, [idx.size]))
    return ";".join(f"{idx[s]:x}+{e - s:x}" for s, e in zip(starts, ends))


def decode_index_set(text: str) -> np.ndarray:
    if not text:
        return np.zeros(0, dtype=np.int64)
    parts = []
    for run in text.split(";"):
        start, length = run.split("+")
        s = int(start, 16)
        parts.append(np.arange(s, s + int(length, 16), dtype=np.int64))
    return np.concatenate(parts)


@dataclass(frozen=True)
class CascadeSchedule:
    """Block sizes ``k_t = k1 * growth**(t-1)`` (clamped to N) for ``passes`` passes."""

    k1: int
    passes: int = 4
    growth: int = 2

    def __post_init__(self) -> None:
        if self.k1 < 1 or self.passes < 1 or self.growth < 1:
            raise ValueError("CascadeSchedule: k1, passes and growth must be >= 1")

    def block_size(self, t: int, n: int) -> int:
        return min(self.k1 * self.growth ** (t - 1), n)

    @classmethod
    def default(cls, qber: float, n: int, passes: int = 4) -> "CascadeSchedule":
        k1 = math.ceil(0.73 / qber) if qber > 0 else n
        return cls(k1=min(max(k1, 1), n), passes=passes)


@dataclass(frozen=True)
class BisectEvent:
    """Trace entry for one BISECT: which block was searched and what it found."""

    pass_index: int
    block_id: int
    length: int
    position: int
    disclosures: int
    backtrack: bool


def top_level_pass(alice: BitFrame, bob: BitFrame, perm: np.ndarray, k: int,
                   ledger: DisclosureLedger, pass_index: int = 1) -> list[int]:
    """Disclose Alice's parity of every block of the partition; return mismatched ids."""
    if len(alice) != len(bob):
        raise ValueError("top_level_pass: frame lengths differ")
    if k < 1:
        raise ValueError("top_level_pass: k must be >= 1")
    perm = np.asarray(perm, dtype=np.int64)
    mismatched = []
    for v, start in enumerate(range(0, perm.size, k)):
        idx = perm[start:start + k]
        pa = _parity(alice.bits, idx)
        ledger.disclose(pass_index, v, idx, pa)
        if pa != _parity(bob.bits, idx):
            mismatched.append(v)
    return mismatched


def bisect(alice: BitFrame | np.ndarray, bob: BitFrame | np.ndarray, block: ParityBlock | np.ndarray,
           ledger: DisclosureLedger, pass_index: int | None = None, block_id: int | None = None) -> int:
    """Binary search for one error inside a block with mismatched parity.

    Alice discloses the parity of the first (shorter) half at every step; the
    second half's parity follows from the parent's.  Bob's frame is modified
    in place and the corrected position is returned.
    """
    a = alice.bits if isinstance(alice, BitFrame) else alice
    b = bob.bits if isinstance(bob, BitFrame) else bob
    if isinstance(block, ParityBlock):
        idx = block.indices
        pass_index = block.pass_index if pass_index is None else pass_index
        block_id = block.block_id if block_id is None else block_id
    else:
        idx = np.asarray(block, dtype=np.int64)
    pass_index = 0 if pass_index is None else pass_index
    block_id = -1 if block_id is None else block_id
    while idx.size > 1:
        half = idx.size // 2
        first = idx[:half]
        pa = _parity(a, first)
        ledger.disclose(pass_index, block_id, first, pa)
        idx = first if pa != _parity(b, first) else idx[half:]
    pos = int(idx[0])
    b[pos] ^= 1
    return pos


class _Pass:
    __slots__ = ("t", "perm", "k", "block_of", "alice_par", "bob_par", "checked", "n_blocks")

    def __init__(self, t: int, perm: np.ndarray, k: int, alice_bits: np.ndarray, bob_bits: np.ndarray):
        n = perm.size
        self.t = t
        self.perm = perm
        self.k = k
        self.n_blocks = -(-n // k)
        inv = np.empty(n, dtype=np.int64)
        inv[perm] = np.arange(n)
        self.block_of = inv // k
        starts = np.arange(0, n, k)
        self.alice_par = np.add.reduceat(alice_bits[perm].astype(np.int64), starts) & 1
        self.bob_par = np.add.reduceat(bob_bits[perm].astype(np.int64), starts) & 1
        self.checked = 0

    def block(self, v: int) -> np.ndarray:
        return self.perm[v * self.k:(v + 1) * self.k]

    def length(self, v: int) -> int:
        return min(self.k, self.perm.size - v * self.k)


class CascadeEngine:
    """Stateful interactive Cascade between Alice's frame and a copy of Bob's."""

    def __init__(self, alice: BitFrame, bob: BitFrame):
        if len(alice) != len(bob):
            raise ValueError("Cascade: frame lengths differ")
        self.alice = alice.bits
        self.bob = bob.bits.copy()
        self.tags = bob.tags.copy()
        self.n = len(alice)
        self.ledger = DisclosureLedger(self.n)
        self.passes: list[_Pass] = []
        self.odd: set[tuple[int, int]] = set()
        self.trace: list[BisectEvent] = []

    # Flip bookkeeping: every block containing ``pos`` changes Bob's parity.
    # Disclosed blocks whose parity now disagrees with Alice's form the
    # odd-error set that backtracking drains.
    def _register_flip(self, pos: int) -> None:
        for p in self.passes:
            v = int(p.block_of[pos])
            p.bob_par[v] ^= 1
            if v < p.checked:
                key = (p.t, v)
                if p.bob_par[v] != p.alice_par[v]:
                    self.odd.add(key)
                else:
                    self.odd.discard(key)

    def _pick_shortest(self) -> tuple[int, int]:
        return min(self.odd, key=lambda tv: (self.passes[tv[0] - 1].length(tv[1]), tv[0], tv[1]))

    def _bisect_block(self, t: int, v: int, backtrack: bool) -> int:
        p = self.passes[t - 1]
        before = len(self.ledger)
        pos = bisect(self.alice, self.bob, p.block(v), self.ledger, t, v)
        self.trace.append(BisectEvent(t, v, p.length(v), pos, len(self.ledger) - before, backtrack))
        self._register_flip(pos)
        return pos

    def _drain(self, first: tuple[int, int]) -> None:
        self._bisect_block(*first, backtrack=False)
        while self.odd:
            t, v = self._pick_shortest()
            self._bisect_block(t, v, backtrack=True)

    def run_pass(self, perm: np.ndarray, k: int) -> None:
        t = len(self.passes) + 1
        p = _Pass(t, np.asarray(perm, dtype=np.int64), k, self.alice, self.bob)
        self.passes.append(p)
        for v in range(p.n_blocks):
            self.ledger.disclose(t, v, p.block(v), int(p.alice_par[v]))
            p.checked = v + 1
            if p.bob_par[v] != p.alice_par[v]:
                self.odd.add((t, v))
                self._drain((t, v))

    def corrected_bob(self) -> BitFrame:
        return BitFrame(self.bob.copy(), self.tags.copy())

    def residual_errors(self) -> int:
        return int(np.count_nonzero(self.alice != self.bob))


def backtrack(engine: CascadeEngine, error_pos: int) -> int:
    """Resolve every earlier block made odd by correcting ``error_pos``.

    ``error_pos`` must already be flipped in ``engine.bob``.  Returns the
    number of extra corrections.
    """
    engine._register_flip(error_pos)
    count = 0
    while engine.odd:
        t, v = engine._pick_shortest()
        engine._bisect_block(t, v, backtrack=True)
        count += 1
    return count


@dataclass
class CascadeResult:
    corrected_bob: BitFrame
    ledger: DisclosureLedger
    residual_errors: int
    initial_errors: int
    trace: list[BisectEvent]
    schedule: CascadeSchedule


def sampled_qber(alice: BitFrame, bob: BitFrame, fraction: float, seed: int) -> float:
    """QBER estimated from a random sample of ``fraction`` of the positions.

    The sample only feeds the block-size schedule; the frame is not shortened.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError("sampled_qber: fraction must lie in (0, 1]")
    n = len(alice)
    m = max(1, int(round(fraction * n)))
    idx = make_rng(seed).choice(n, size=m, replace=False)
    return float(np.count_nonzero(alice.bits[idx] != bob.bits[idx])) / m


def run_cascade(alice: BitFrame, bob: BitFrame, schedule: CascadeSchedule, seed: int) -> CascadeResult:
    """Full multi-pass Cascade; deterministic in ``(frames, schedule, seed)``."""
    n = len(alice)
    if len(bob) != n:
        raise ValueError("run_cascade: frame lengths differ")
    if schedule.k1 > n:
        raise ValueError(f"run_cascade: k1={schedule.k1} exceeds frame length {n}")
    engine = CascadeEngine(alice, bob)
    initial = engine.residual_errors()
    rng = make_rng(seed)
    for t in range(1, schedule.passes + 1):
        engine.run_pass(rng.permutation(n), schedule.block_size(t, n))
    return CascadeResult(
        corrected_bob=engine.corrected_bob(),
        ledger=engine.ledger,
        residual_errors=engine.residual_errors(),
        initial_errors=initial,
        trace=engine.trace,
        schedule=schedule,
    )


# -- the two-block walkthrough -----------------------------------------------

@dataclass
class WalkthroughTrace:
    ledger: DisclosureLedger
    tags: np.ndarray
    mismatched: list[int]
    corrected: int
    block1_disclosures: list[ParityBlock]

    @property
    def block1_exchanged(self) -> int:
        return len(self.block1_disclosures)

    @property
    def block1_multi_only(self) -> int:
        return sum(bool(np.all(self.tags[b.indices] == ProvenanceTag.MULTI)) for b in self.block1_disclosures)

    @property
    def block1_actual(self) -> int:
        return self.block1_exchanged - self.block1_multi_only


def walkthrough_scenario() -> tuple[BitFrame, BitFrame]:
    """Two length-8 blocks; one single-photon error in Block 1, Block 2 clean.

    Bits 4 and 5 (the first half of Block 1's second half) come from
    multi-photon pulses, so the length-2 sub-block disclosed on the way to the
    error at bit 7 lies entirely inside the multi-photon set.
    """
    alice = np.array([1, 0, 1, 1, 0, 1, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1], dtype=np.uint8)
    tags = np.full(16, ProvenanceTag.SINGLE, dtype=np.uint8)
    tags[[4, 5, 10, 13]] = ProvenanceTag.MULTI
    tags[[15]] = ProvenanceTag.VACUUM
    bob = alice.copy()
    bob[7] ^= 1
    return BitFrame(alice, tags), BitFrame(bob, tags.copy())


def run_walkthrough() -> WalkthroughTrace:
    """Top-level pass with identity shuffle and k=8, then BISECT of Block 1."""
    alice, bob = walkthrough_scenario()
    bob = bob.copy()
    ledger = DisclosureLedger(len(alice))
    perm = np.arange(len(alice))
    mismatched = top_level_pass(alice, bob, perm, 8, ledger)
    corrected = -1
    for v in mismatched:
        top = next(b for b in ledger.blocks if b.pass_index == 1 and b.block_id == v)
        corrected = bisect(alice, bob, top, ledger)
    block1 = [b for b in ledger.blocks if b.block_id == 0]
    return WalkthroughTrace(ledger, alice.tags, mismatched, corrected, block1)


def bisect_disclosure_bounds(length: int) -> tuple[int, int]:
    """``(min, max)`` disclosures BISECT can spend on a block of ``length``."""
    if length < 1:
        raise ValueError("length must be >= 1")
    return (length.bit_length() - 1, math.ceil(math.log2(length)) if length > 1 else 0)


def block_parities(bits: np.ndarray, index_sets: Sequence[np.ndarray]) -> np.ndarray:
    return np.array([_parity(bits, idx) for idx in index_sets], dtype=np.uint8)
