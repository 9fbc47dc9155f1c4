"""Command-line orchestration: distance sweeps, Cascade campaigns, bound
inspection and the two-block walkthrough.

Configuration is a plain ``key = value`` file (``#`` starts a comment);
command-line flags override file values.  Recognised keys:

    protocol        bb84 | mdi
    mu nu1 nu2      signal and decoy intensities
    alpha           fibre loss, dB/km
    pd              dark-count probability per gate
    eta_d           detector efficiency
    e_det           BB84 misalignment error
    theta_a theta_b MDI polarisation misalignment angles, radians
    distance_km     A:B:STEP sweep range, or a single distance
    seeds           Monte-Carlo seeds per distance
    seed            base seed
    frame_bits      sifted bits per Cascade frame
    passes          Cascade passes
    qber_sample     fraction of positions sampled to estimate the QBER that sets
                    the Cascade block size; 0 uses the true simulated QBER
    ec_mode         analytic | empirical
    f               reconciliation efficiency
    l_cap           1 | all | any positive integer
    pa_source       model | lp (MDI privacy-amplification term)
    n_cut           yield LP truncation
    workers         worker processes
    out             output path (stdout when absent)

Every CSV starts with ``#`` metadata lines (command, config hash, package
version, PRNG) followed by a header row.  Zero rates carry a blank log10
column.  Exit codes: 0 success, 2 configuration or I/O error, 3 numerical
failure (infeasible or unsolved LP).
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .cascade import CascadeSchedule, run_cascade, run_walkthrough, sampled_qber
from .decoy_bb84 import channel_observables, true_fractions, yield_bounds
from .leakage import MultiBlockCounts, report
from .mathcore import PRNG_ID
from .mdi_bounds import mdi_observables, mdi_yield_bounds, true_delta_mm
from .params import BB84_PRESET, MDI_PRESET, ChannelParams
from .pulse_sim import simulate_frames, simulate_mdi_frames
from .simplex import LpInfeasibleError, LpIterationError, LpNumericalError
from .skr import EcMode, EcSettings, SweepRecord, log10_or_blank, point

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    """Bad configuration value; the message names the field."""


# -- configuration -----------------------------------------------------------

_PARAM_KEYS = {
    "mu": "mu", "nu1": "nu1", "nu2": "nu2", "alpha": "alpha_db_per_km", "pd": "dark_rate",
    "eta_d": "det_eff", "e_det": "e_det", "theta_a": "theta_a", "theta_b": "theta_b",
}


@dataclass(frozen=True)
class RunConfig:
    protocol: str = "bb84"
    params: ChannelParams = BB84_PRESET
    start_km: float = 0.0
    end_km: float = 0.0
    step_km: float = 1.0
    seeds: int = 1
    seed: int = 0
    frame_bits: int = 10_000
    passes: int = 4
    qber_sample: float = 0.0
    ec_mode: str = "analytic"
    f: float = 1.0
    l_cap: int | None = 1
    pa_source: str = "model"
    n_cut: int = 7
    workers: int = 1
    out: str | None = None

    def __post_init__(self) -> None:
        checks = [
            ("protocol", self.protocol in ("bb84", "mdi"), "must be bb84 or mdi"),
            ("distance_km", self.step_km > 0, "step must be > 0"),
            ("distance_km", self.end_km >= self.start_km >= 0, "needs 0 <= start <= end"),
            ("seeds", self.seeds >= 1, "must be >= 1"),
            ("frame_bits", self.frame_bits >= 1, "must be >= 1"),
            ("passes", self.passes >= 1, "must be >= 1"),
            ("qber_sample", 0.0 <= self.qber_sample <= 1.0, "must lie in [0, 1]"),
            ("ec_mode", self.ec_mode in ("analytic", "empirical"), "must be analytic or empirical"),
            ("f", self.f >= 1.0, "must be >= 1"),
            ("l_cap", self.l_cap is None or self.l_cap >= 1, "must be all or >= 1"),
            ("pa_source", self.pa_source in ("model", "lp"), "must be model or lp"),
            ("n_cut", self.n_cut >= 1, "must be >= 1"),
            ("workers", self.workers >= 1, "must be >= 1"),
        ]
        for name, ok, why in checks:
            if not ok:
                raise ConfigError(f"{name}: {why}")

    def distances(self) -> list[float]:
        n = int(math.floor((self.end_km - self.start_km) / self.step_km + 1e-9))
        return [round(self.start_km + i * self.step_km, 9) for i in range(n + 1)]

    def ec(self) -> EcSettings:
        return EcSettings(mode=EcMode(self.ec_mode), f=self.f, l_cap=self.l_cap,
                          frame_bits=self.frame_bits, seeds=self.seeds)

    def digest(self) -> str:
        items = asdict(self)
        items.pop("out")
        items.pop("workers")  # output does not depend on parallelism
        text = repr(sorted((k, repr(v)) for k, v in items.items()))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def parse_range(text: str) -> tuple[float, float, float]:
    parts = text.split(":")
    try:
        vals = [float(p) for p in parts]
    except ValueError as exc:
        raise ConfigError(f"distance_km: cannot parse {text!r}") from exc
    if len(vals) == 1:
        return vals[0], vals[0], 1.0
    if len(vals) == 3:
        return vals[0], vals[1], vals[2]
    raise ConfigError(f"distance_km: expected A or A:B:STEP, got {text!r}")


def parse_l_cap(text: str) -> int | None:
    if str(text).lower() == "all":
        return None
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"l_cap: expected 'all' or an integer, got {text!r}") from exc


def read_config_file(path: str | Path) -> dict[str, str]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from exc
    out: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"config line {lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.lower()] = value
    return out


def build_config(values: dict[str, str]) -> RunConfig:
    """Turn string key/values (file merged with flags) into a validated config."""
    values = dict(values)
    protocol = values.pop("protocol", "bb84").lower()
    base = MDI_PRESET if protocol == "mdi" else BB84_PRESET
    kw: dict = {"protocol": protocol}
    overrides = {}

    def num(key: str, cast: Callable = float):
        raw = values.pop(key)
        try:
            return cast(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: cannot parse {raw!r}") from exc

    for key, attr in _PARAM_KEYS.items():
        if key in values:
            overrides[attr] = num(key)
    try:
        params = replace(base, **overrides)
    except ValueError as exc:
        raise ConfigError(f"params: {exc}") from exc
    kw["params"] = params
    if "distance_km" in values:
        kw["start_km"], kw["end_km"], kw["step_km"] = parse_range(values.pop("distance_km"))
    for key in ("seeds", "seed", "frame_bits", "passes", "n_cut", "workers"):
        if key in values:
            kw[key] = num(key, int)
    for key in ("f", "qber_sample"):
        if key in values:
            kw[key] = num(key)
    if "l_cap" in values:
        kw["l_cap"] = parse_l_cap(values.pop("l_cap"))
    for key in ("ec_mode", "pa_source"):
        if key in values:
            kw[key] = values.pop(key).lower()
    if "out" in values:
        kw["out"] = values.pop("out")
    if values:
        raise ConfigError(f"{sorted(values)[0]}: unknown configuration key")
    return RunConfig(**kw)


# -- output ------------------------------------------------------------------

def metadata_lines(command: str, cfg: RunConfig) -> list[str]:
    return [
        f"# qkdleak {__version__}",
        f"# command: {command}",
        f"# config_hash: {cfg.digest()}",
        f"# params_hash: {cfg.params.digest()}",
        f"# prng: {PRNG_ID}",
    ]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def render_csv(meta: Sequence[str], header: Sequence[str], rows: Sequence[dict]) -> str:
    buf = io.StringIO()
    for line in meta:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(r.get(h)) for h in header])
    return buf.getvalue()


def emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    try:
        Path(out).write_text(text)
    except OSError as exc:
        raise ConfigError(f"out: cannot write {out}: {exc}") from exc


def _pmap(fn: Callable, items: Sequence, workers: int) -> list:
    """Ordered map; results come back in input order regardless of completion order."""
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


# -- commands ----------------------------------------------------------------

SWEEP_COLUMNS = SweepRecord.columns() + ["log10_R_original", "log10_R_improved"]


def _sweep_point(args: tuple[RunConfig, float]) -> SweepRecord:
    cfg, L = args
    kw = {"pa_source": cfg.pa_source, "n_cut": cfg.n_cut} if cfg.protocol == "mdi" else {}
    return point(cfg.protocol, cfg.params.at(L), cfg.ec(), **kw)


def cmd_sweep(cfg: RunConfig) -> str:
    records = _pmap(_sweep_point, [(cfg, L) for L in cfg.distances()], cfg.workers)
    rows = []
    for r in records:
        row = r.row()
        row["log10_R_original"] = log10_or_blank(r.R_original)
        row["log10_R_improved"] = log10_or_blank(r.R_improved)
        rows.append(row)
    text = render_csv(metadata_lines("sweep", cfg), SWEEP_COLUMNS, rows)
    emit(text, cfg.out)
    return text


CASCADE_COLUMNS = ["distance_km", "seed", "qber", "measured_delta_m", "delta_m_min", "residual_errors",
                   "leak_all", "leak_m_exact", "leak_actual_exact", "leak_actual_bound", "rank_leak",
                   "n", "disclosures", "bound_violated"]
HIST_COLUMNS = ["distance_km", "length", "blocks", "multi_blocks", "ratio", "expected", "sigma", "within_3sigma"]


def _delta_bound(cfg: RunConfig, params: ChannelParams) -> float:
    if cfg.protocol == "mdi":
        return mdi_yield_bounds(mdi_observables(params), params, cfg.n_cut).deltaMM_min
    return yield_bounds(channel_observables(params), params).deltaM_min


def _cascade_job(args: tuple[RunConfig, float, int, float]) -> tuple[dict, MultiBlockCounts, int, int]:
    cfg, L, seed, delta_min = args
    params = cfg.params.at(L)
    sim = simulate_mdi_frames if cfg.protocol == "mdi" else simulate_frames
    run = sim(params, cfg.frame_bits, seed)
    qber = run.measured_qber
    est = sampled_qber(run.alice, run.bob, cfg.qber_sample, seed) if cfg.qber_sample > 0 else qber
    schedule = CascadeSchedule.default(est, cfg.frame_bits, cfg.passes)
    res = run_cascade(run.alice, run.bob, schedule, seed)
    rep = report(res.ledger, run.alice.tags, delta_min, cfg.l_cap, with_rank=cfg.frame_bits <= 20_000)
    counts = MultiBlockCounts()
    counts.add(res.ledger, run.alice.tags)
    multi = int(np.count_nonzero(run.alice.tags == 2))
    row = {"distance_km": L, "seed": seed, "qber": qber, "measured_delta_m": run.measured_delta_m,
           "delta_m_min": delta_min, "residual_errors": res.residual_errors, **asdict(rep)}
    return row, counts, multi, run.sifted_count


def cmd_cascade(cfg: RunConfig) -> tuple[str, str]:
    """Per-seed leakage rows plus a per-length histogram file (``<out>.hist.csv``)."""
    jobs = []
    for L in cfg.distances():
        dmin = _delta_bound(cfg, cfg.params.at(L))
        jobs += [(cfg, L, cfg.seed + s, dmin) for s in range(cfg.seeds)]
    results = _pmap(_cascade_job, jobs, cfg.workers)
    rows = [r[0] for r in results]
    hist_rows = []
    for L in cfg.distances():
        agg = MultiBlockCounts()
        multi = total = 0
        for (row, counts, m, n) in results:
            if row["distance_km"] == L:
                agg.total.update(counts.total)
                agg.multi.update(counts.multi)
                multi += m
                total += n
        delta_m = multi / total if total else 0.0
        checked = {c[0]: c for c in agg.check(delta_m, min_samples=1)}
        for length in sorted(agg.total):
            _, n_b, obs, exp, sig, ok = checked[length]
            hist_rows.append({"distance_km": L, "length": length, "blocks": n_b, "multi_blocks": agg.multi[length],
                              "ratio": obs, "expected": exp, "sigma": sig,
                              "within_3sigma": ok if n_b >= 200 else ""})
    meta = metadata_lines("cascade", cfg)
    text = render_csv(meta, CASCADE_COLUMNS, rows)
    hist = render_csv(meta, HIST_COLUMNS, hist_rows)
    emit(text, cfg.out)
    if cfg.out is not None:
        emit(hist, str(cfg.out) + ".hist.csv")
    return text, hist


def bounds_rows(cfg: RunConfig) -> tuple[list[str], list[dict]]:
    rows = []
    if cfg.protocol == "mdi":
        header = ["distance_km", "Q_mumu", "E_mumu", "Y00_max", "Y01_max", "Y10_max", "Y11_max",
                  "delta00_max", "delta01_max", "delta10_max", "delta11_max", "deltaMM_min",
                  "deltaMM_model", "lp_status", "duality_gap", "lp_iterations", "clamps"]
        for L in cfg.distances():
            p = cfg.params.at(L)
            obs = mdi_observables(p)
            b = mdi_yield_bounds(obs, p, cfg.n_cut)
            row = {k: v for k, v in asdict(b).items() if k in header}
            row.update(distance_km=L, Q_mumu=obs.Q_mumu, E_mumu=obs.E_mumu, deltaMM_model=true_delta_mm(p),
                       duality_gap=b.max_duality_gap, lp_iterations=b.iterations, clamps=";".join(b.clamps))
            rows.append(row)
    else:
        header = ["distance_km", "Q_mu", "Q_nu1", "Q_nu2", "E_mu", "Y1_max", "Y1_min", "Y0_max", "Y0_min",
                  "delta0_max", "delta1_max", "deltaM_min", "delta0_true", "delta1_true", "deltaM_true", "clamps"]
        for L in cfg.distances():
            p = cfg.params.at(L)
            obs = channel_observables(p)
            b = yield_bounds(obs, p)
            t = true_fractions(p)
            row = {**asdict(obs), **asdict(b)}
            row.update(distance_km=L, delta0_true=t.delta0, delta1_true=t.delta1, deltaM_true=t.deltaM,
                       clamps=";".join(b.clamps))
            rows.append(row)
    return header, rows


def cmd_bounds(cfg: RunConfig) -> str:
    header, rows = bounds_rows(cfg)
    text = render_csv(metadata_lines("bounds", cfg), header, rows)
    emit(text, cfg.out)
    return text


def cmd_golden_fig1(cfg: RunConfig | None = None) -> str:
    trace = run_walkthrough()
    lines = [
        f"mismatched_blocks: {trace.mismatched}",
        f"corrected_bit: {trace.corrected}",
        f"block1_exchanged: {trace.block1_exchanged}",
        f"block1_multi_only: {trace.block1_multi_only}",
        f"block1_actual: {trace.block1_actual}",
        "ledger:",
        trace.ledger.to_csv().rstrip("\n"),
    ]
    text = "\n".join(lines) + "\n"
    emit(text, cfg.out if cfg is not None else None)
    return text


# -- entry point -------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qkdleak", description="QKD reconciliation-leakage and key-rate toolkit")
    sub = ap.add_subparsers(dest="command", required=True)
    commands = {
        "sweep": "key rates against distance, one CSV row per distance",
        "cascade": "Monte-Carlo Cascade runs with per-seed leakage rows and a block-length histogram",
        "bounds": "decoy or MDI yield bounds with clamp flags and LP status",
        "golden-fig1": "the two-block walkthrough trace",
    }
    for name, text in commands.items():
        p = sub.add_parser(name, help=text, description=text)
        p.add_argument("--config", metavar="PATH", help="key = value configuration file")
        p.add_argument("--protocol", choices=["bb84", "mdi"])
        p.add_argument("--distance-km", metavar="A:B:STEP", help="distance grid, or one distance")
        p.add_argument("--seeds", metavar="N", help="Monte-Carlo seeds per distance")
        p.add_argument("--out", metavar="PATH", help="output CSV (stdout when absent)")
        p.add_argument("--ec-mode", choices=["analytic", "empirical"], help="source of the length-1 block share")
        p.add_argument("--l-cap", metavar="{1,all}", help="largest block length given the discount")
        p.add_argument("--workers", metavar="N", help="worker processes")
        if name == "cascade":
            p.add_argument("--golden-fig1", action="store_true", help="print the two-block walkthrough instead")
    return ap


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    values = read_config_file(ns.config) if ns.config else {}
    for flag in ("protocol", "distance_km", "seeds", "out", "ec_mode", "l_cap", "workers"):
        v = getattr(ns, flag, None)
        if v is not None:
            values[flag] = str(v)
    return build_config(values)


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
        if ns.command == "sweep":
            cmd_sweep(cfg)
        elif ns.command == "cascade" and not ns.golden_fig1:
            cmd_cascade(cfg)
        elif ns.command == "bounds":
            cmd_bounds(cfg)
        else:
            cmd_golden_fig1(cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LpInfeasibleError, LpNumericalError, LpIterationError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK
