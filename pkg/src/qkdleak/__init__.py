"""Reconciliation-leakage accounting and secure key rates for decoy BB84 and MDI-QKD."""

from __future__ import annotations

__version__ = "0.1.0"

from .cascade import CascadeSchedule, DisclosureLedger, run_cascade, run_walkthrough
from .decoy_bb84 import channel_observables, true_fractions, yield_bounds
from .leakage import leak_actual_bound, leak_all, leak_m_exact, report
from .mathcore import PRNG_ID, binary_entropy, gf2_rank
from .mdi_bounds import mdi_observables, mdi_yield_bounds, solve_yield_max
from .params import BB84_PRESET, MDI_PRESET, ChannelParams
from .pulse_sim import BitFrame, ProvenanceTag, simulate_frames, simulate_mdi_frames
from .simplex import LpInfeasibleError, LpProblem, solve_lp
from .skr import EcMode, EcSettings, SweepRecord, cutoffs, growth_table, sweep

__all__ = [
    "BB84_PRESET", "MDI_PRESET", "PRNG_ID", "BitFrame", "CascadeSchedule", "ChannelParams",
    "DisclosureLedger", "EcMode", "EcSettings", "LpInfeasibleError", "LpProblem", "ProvenanceTag",
    "SweepRecord", "binary_entropy", "channel_observables", "cutoffs", "gf2_rank", "growth_table",
    "leak_actual_bound", "leak_all", "leak_m_exact", "mdi_observables", "mdi_yield_bounds",
    "report", "run_cascade", "run_walkthrough", "simulate_frames", "simulate_mdi_frames", "solve_lp",
    "solve_yield_max", "sweep", "true_fractions", "yield_bounds", "__version__",
]
