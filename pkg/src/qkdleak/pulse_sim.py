"""Monte-Carlo source/channel/detector chain producing tagged sifted frames.

Every sifted bit carries the photon-number class of the pulse it came from.
Pulses that produce no click are integrated out: the photon number of a
detected pulse is drawn from its posterior given a click, and the number of
pulses spent to collect the frame is drawn from the matching negative
binomial law.  This is distributionally identical to simulating every pulse
and discarding the silent ones, and keeps long distances cheap.
"""

from __future__ import annotations

import enum
import hashlib
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .mathcore import make_rng, poisson_pmf_vector
from .params import ChannelParams

N_PHOTON_CAP = 30


class ProvenanceTag(enum.IntEnum):
    VACUUM = 0
    SINGLE = 1
    MULTI = 2

    @classmethod
    def from_photons(cls, n: np.ndarray) -> np.ndarray:
        return np.minimum(np.asarray(n), 2).astype(np.uint8)


@dataclass
class BitFrame:
    bits: np.ndarray
    tags: np.ndarray

    def __post_init__(self) -> None:
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        self.tags = np.asarray(self.tags, dtype=np.uint8)
        if self.bits.shape != self.tags.shape or self.bits.ndim != 1:
            raise ValueError("BitFrame: bits and tags must be 1-D with equal length")

    def __len__(self) -> int:
        return int(self.bits.size)

    def copy(self) -> "BitFrame":
        return BitFrame(self.bits.copy(), self.tags.copy())


@dataclass
class SimulatedRun:
    alice: BitFrame
    bob: BitFrame
    sifted_count: int
    pulses_sent: int
    seed: int
    params: ChannelParams
    pair_photons: np.ndarray | None = field(default=None, repr=False)

    @property
    def measured_qber(self) -> float:
        return float(np.count_nonzero(self.alice.bits != self.bob.bits)) / self.sifted_count

    @property
    def measured_delta_m(self) -> float:
        return float(np.count_nonzero(self.alice.tags == ProvenanceTag.MULTI)) / self.sifted_count


def detection_probabilities(eta: float, dark: float, n_cap: int = N_PHOTON_CAP) -> np.ndarray:
    """P(click | n photons) = 1 - (1-eta)^n (1-d) for n = 0..n_cap."""
    n = np.arange(n_cap + 1)
    return 1.0 - (1.0 - eta) ** n * (1.0 - dark)


def error_probabilities(e_det: float, n_cap: int = N_PHOTON_CAP) -> np.ndarray:
    """Bit-flip probability per photon number: 1/2 for dark-count (vacuum) clicks, ``e_det`` otherwise."""
    e = np.full(n_cap + 1, e_det)
    e[0] = 0.5
    return e


def _draw_pulses(rng: np.random.Generator, target_n: int, p_click: float) -> int:
    failures = rng.negative_binomial(target_n, p_click) if p_click < 1.0 else 0
    return int(target_n + failures)


def simulate_frames(params: ChannelParams, target_n: int, seed: int) -> SimulatedRun:
    """Sifted BB84 frame of exactly ``target_n`` bits at the signal intensity."""
    if target_n < 1:
        raise ValueError("simulate_frames: target_n must be >= 1")
    p_n = poisson_pmf_vector(params.mu, N_PHOTON_CAP)
    weights = p_n * detection_probabilities(params.eta, params.dark_rate)
    p_click = float(weights.sum())
    if p_click <= 1e-300:
        raise RuntimeError("simulate_frames: detection probability is zero; target unreachable")
    rng = make_rng(seed)
    photons = rng.choice(N_PHOTON_CAP + 1, size=target_n, p=weights / p_click)
    tags = ProvenanceTag.from_photons(photons)
    alice_bits = rng.integers(0, 2, size=target_n, dtype=np.uint8)
    p_err = error_probabilities(params.e_det)[photons]
    flips = (rng.random(target_n) < p_err).astype(np.uint8)
    pulses = _draw_pulses(rng, target_n, p_click)
    return SimulatedRun(
        alice=BitFrame(alice_bits, tags),
        bob=BitFrame(alice_bits ^ flips, tags.copy()),
        sifted_count=target_n,
        pulses_sent=pulses,
        seed=seed,
        params=params,
    )


def measured_observables(run: SimulatedRun) -> tuple[float, float, float]:
    """Empirical ``(Q_mu, E_mu, delta_M)`` of a run."""
    if run.sifted_count < 1:
        raise ValueError("measured_observables: empty run")
    return run.sifted_count / run.pulses_sent, run.measured_qber, run.measured_delta_m


def simulate_mdi_frames(params: ChannelParams, target_n: int, seed: int, n_cap: int = 12) -> SimulatedRun:
    """Z-basis MDI frame with both parties at the signal intensity.

    Pair photon numbers are drawn from their posterior given a successful
    Bell-state announcement, using the photon-number-resolved yields of the
    analytic MDI model.  A bit is tagged MULTI when either pulse held two or
    more photons, SINGLE for the (1, 1) class and VACUUM otherwise.
    """
    from .mdi_bounds import mdi_photon_yields

    if target_n < 1:
        raise ValueError("simulate_mdi_frames: target_n must be >= 1")
    y_total, y_error = mdi_photon_yields(params, n_cap)
    p = poisson_pmf_vector(params.mu, n_cap)
    joint = np.outer(p, p) * y_total
    p_click = float(joint.sum())
    if p_click <= 1e-300:
        raise RuntimeError("simulate_mdi_frames: success probability is zero")
    rng = make_rng(seed)
    flat = rng.choice(joint.size, size=target_n, p=(joint / p_click).ravel())
    n_a, n_b = np.divmod(flat, n_cap + 1)
    with np.errstate(invalid="ignore", divide="ignore"):
        e_pair = np.where(y_total > 0, y_error / y_total, 0.5)
    tags = np.where(np.maximum(n_a, n_b) >= 2, ProvenanceTag.MULTI,
                    np.where((n_a == 1) & (n_b == 1), ProvenanceTag.SINGLE, ProvenanceTag.VACUUM)).astype(np.uint8)
    alice_bits = rng.integers(0, 2, size=target_n, dtype=np.uint8)
    flips = (rng.random(target_n) < e_pair[n_a, n_b]).astype(np.uint8)
    pulses = _draw_pulses(rng, target_n, p_click)
    return SimulatedRun(
        alice=BitFrame(alice_bits, tags),
        bob=BitFrame(alice_bits ^ flips, tags.copy()),
        sifted_count=target_n,
        pulses_sent=pulses,
        seed=seed,
        params=params,
        pair_photons=np.stack([n_a, n_b], axis=1),
    )


def random_frame_pair(n: int, qber: float, seed: int, multi_fraction: float = 0.0) -> tuple[BitFrame, BitFrame]:
    """Alice/Bob frames with exactly ``round(qber * n)`` errors at random positions."""
    rng = make_rng(seed)
    tags = np.where(rng.random(n) < multi_fraction, ProvenanceTag.MULTI, ProvenanceTag.SINGLE).astype(np.uint8)
    alice = rng.integers(0, 2, size=n, dtype=np.uint8)
    bob = alice.copy()
    errors = rng.choice(n, size=int(round(qber * n)), replace=False)
    bob[errors] ^= 1
    return BitFrame(alice, tags), BitFrame(bob, tags.copy())


# -- binary frame dump -------------------------------------------------------
#
# Layout, all little-endian:
#   magic   4s   b"QKDF"
#   version u32  1
#   n       u64  frame length
#   seed    u64
#   phash   16s  ASCII parameter digest (ChannelParams.digest)
#   alice   ceil(n/64) u64 words, bit i of the frame is bit (i % 64) of word i // 64
#   bob     same layout
#   tags    ceil(n/32) u64 words, tag i occupies bits 2*(i % 32)..+1 of word i // 32

_MAGIC = b"QKDF"
_HEADER = struct.Struct("<4sIQQ16s")


def _pack_bits(bits: np.ndarray) -> np.ndarray:
    words = (bits.size + 63) // 64
    padded = np.zeros(words * 64, dtype=np.uint64)
    padded[: bits.size] = bits
    shifts = np.arange(64, dtype=np.uint64)
    return np.bitwise_or.reduce(padded.reshape(words, 64) << shifts, axis=1).astype("<u8")


def _unpack_bits(words: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(64, dtype=np.uint64)
    bits = (words.astype(np.uint64)[:, None] >> shifts) & np.uint64(1)
    return bits.ravel()[:n].astype(np.uint8)


def _pack_tags(tags: np.ndarray) -> np.ndarray:
    words = (tags.size + 31) // 32
    padded = np.zeros(words * 32, dtype=np.uint64)
    padded[: tags.size] = tags
    shifts = np.arange(0, 64, 2, dtype=np.uint64)
    return np.bitwise_or.reduce(padded.reshape(words, 32) << shifts, axis=1).astype("<u8")


def _unpack_tags(words: np.ndarray, n: int) -> np.ndarray:
    shifts = np.arange(0, 64, 2, dtype=np.uint64)
    tags = (words.astype(np.uint64)[:, None] >> shifts) & np.uint64(3)
    return tags.ravel()[:n].astype(np.uint8)


def dump_frames(run: SimulatedRun, path: str | Path) -> None:
    n = run.sifted_count
    header = _HEADER.pack(_MAGIC, 1, n, run.seed, run.params.digest().encode())
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(_pack_bits(run.alice.bits).tobytes())
        fh.write(_pack_bits(run.bob.bits).tobytes())
        fh.write(_pack_tags(run.alice.tags).tobytes())


def load_frames(path: str | Path) -> tuple[BitFrame, BitFrame, int, str]:
    """Read a frame dump; returns ``(alice, bob, seed, params_digest)``."""
    data = Path(path).read_bytes()
    magic, version, n, seed, phash = _HEADER.unpack_from(data)
    if magic != _MAGIC or version != 1:
        raise ValueError(f"{path}: not a version-1 frame dump")
    off = _HEADER.size
    bw, tw = (n + 63) // 64, (n + 31) // 32
    alice = np.frombuffer(data, dtype="<u8", count=bw, offset=off)
    bob = np.frombuffer(data, dtype="<u8", count=bw, offset=off + 8 * bw)
    tags = np.frombuffer(data, dtype="<u8", count=tw, offset=off + 16 * bw)
    t = _unpack_tags(tags, n)
    return BitFrame(_unpack_bits(alice, n), t), BitFrame(_unpack_bits(bob, n), t.copy()), seed, phash.decode()


def frames_digest(run: SimulatedRun) -> str:
    h = hashlib.sha256()
    h.update(run.alice.bits.tobytes())
    h.update(run.bob.bits.tobytes())
    h.update(run.alice.tags.tobytes())
    return h.hexdigest()
