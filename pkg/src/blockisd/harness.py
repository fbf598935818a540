"""Monte-Carlo NMSE-vs-SNR sweeps.

A trial draws a channel, a pilot plan and a noisy measurement, runs every
requested estimator on it and scores each with NMSE in the block domain.
Every trial is seeded from ``(master_seed, snr_db, trial_index)`` alone, so
the table does not depend on worker count or completion order.
"""

from __future__ import annotations

import csv
import logging
import math
import struct
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np
import yaml

from .baselines import OracleInfo, bp_recover, oracle_ls
from .channel import ChannelProfile, Cir, generate_cir, vehicular_a
from .exceptions import ConfigurationError, RankDeficiencyError
from .isd import IsdParams, RecoveryOutput, block_isd_recover, isd_recover
from .pilots import (
    Measurement,
    PilotPlan,
    SensingMatrix,
    build_sensing_matrix,
    h_to_g,
    make_pilot_plan,
    measure,
    p_to_theta,
)
from .solver import SolverParams

__all__ = [
    "ALGORITHMS",
    "RunConfig",
    "NmseRecord",
    "TrialResult",
    "SweepResult",
    "OverheadReport",
    "nmse",
    "trial_seed",
    "simulate_trial",
    "run_trial",
    "run_sweep",
    "summarize",
    "write_records",
    "write_summary",
    "write_sweep",
    "overhead_report",
    "load_config",
]

log = logging.getLogger(__name__)

ALGORITHMS = ("bp", "isd", "block_isd", "oracle_ls")

RECORD_HEADER = ["snr_db", "algorithm", "trial", "nmse", "iterations", "termination_reason"]
SUMMARY_HEADER = ["snr_db", "algorithm", "mean_nmse", "mean_nmse_db", "n_trials"]


@dataclass(frozen=True)
class RunConfig:
    N: int = 4096
    N_T: int = 32
    L: int = 128
    p: int = 640
    snr_grid_db: tuple = (0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0)
    n_trials: int = 50
    algorithms: tuple = ALGORITHMS
    channel_profile: ChannelProfile = None
    isd: IsdParams = field(default_factory=IsdParams)
    fix_pilots: bool = False
    fix_channel: bool = False
    master_seed: int = 0
    workers: int = 1
    output_dir: str = "results"

    def __post_init__(self):
        set_ = lambda k, v: object.__setattr__(self, k, v)  # noqa: E731
        set_("snr_grid_db", tuple(float(s) for s in self.snr_grid_db))
        set_("algorithms", tuple(self.algorithms))
        if self.channel_profile is None:
            set_("channel_profile", vehicular_a(50e6, self.L))
        elif self.channel_profile.max_length != self.L:
            set_("channel_profile", replace(self.channel_profile, max_length=self.L))
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ConfigurationError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")
        if not self.algorithms:
            raise ConfigurationError("no algorithms selected")
        if min(self.N, self.N_T, self.L, self.p) < 1:
            raise ConfigurationError("N, N_T, L and p must be positive")
        if self.p > self.N:
            raise ConfigurationError(f"p={self.p} exceeds N={self.N}")
        if self.n_trials < 0 or self.workers < 1:
            raise ConfigurationError("n_trials must be >= 0 and workers >= 1")
        if not 0 <= self.master_seed < 2**64:
            raise ConfigurationError("master_seed must fit in an unsigned 64-bit integer")
        if self.p > self.N_T * self.L:
            log.warning(
                "p=%d exceeds N_T*L=%d: the problem is not underdetermined",
                self.p, self.N_T * self.L,
            )

    @property
    def n_unknowns(self):
        return self.N_T * self.L

    def to_dict(self):
        d = {f.name: getattr(self, f.name) for f in fields(self)}
        d["snr_grid_db"] = list(self.snr_grid_db)
        d["algorithms"] = list(self.algorithms)
        d["channel_profile"] = self.channel_profile.to_dict()
        isd = asdict(self.isd)
        d["solver"] = isd.pop("solver")
        d["isd"] = isd
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        known = {f.name for f in fields(cls)} | {"solver"}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
        L = int(d.get("L", cls.L))
        if "channel_profile" in d and d["channel_profile"] is not None:
            d["channel_profile"] = ChannelProfile.from_dict(d["channel_profile"], L)
        solver = SolverParams(**(d.pop("solver", None) or {}))
        isd = dict(d.pop("isd", None) or {})
        d["isd"] = IsdParams(solver=solver, **isd)
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from exc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        with path.open() as fh:
            raw = yaml.safe_load(fh) or {}
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path}: expected a key-value document")
    return RunConfig.from_dict(raw)


@dataclass(frozen=True)
class NmseRecord:
    snr_db: float
    algorithm: str
    trial: int
    nmse: float
    iterations: int
    termination_reason: str


@dataclass
class TrialResult:
    snr_db: float
    trial: int
    cir: Cir
    plan: PilotPlan
    theta: SensingMatrix
    g_true: np.ndarray
    measurement: Measurement
    outputs: dict
    records: list
    skipped: dict


@dataclass
class SweepResult:
    records: list
    summary: list


@dataclass(frozen=True)
class OverheadReport:
    conventional_pilots: int
    pilots: int
    reduction: float

    def lines(self):
        return [
            f"conventional pilots (L*N_T): {self.conventional_pilots}",
            f"configured pilots (p):       {self.pilots}",
            f"overhead reduction:          {100 * self.reduction:.3f}%",
        ]


def nmse(g_hat, g_true) -> float:
    """``||g_hat - g_true||^2 / ||g_true||^2``."""
    g_hat = np.asarray(g_hat).ravel()
    g_true = np.asarray(g_true).ravel()
    if g_hat.shape != g_true.shape:
        raise ValueError("estimate and truth differ in length")
    energy = float(np.vdot(g_true, g_true).real)
    if energy == 0.0:
        raise ValueError("NMSE is undefined for an all-zero channel")
    err = g_hat - g_true
    return float(np.vdot(err, err).real) / energy


def _snr_key(snr_db):
    return struct.unpack("<Q", struct.pack("<d", float(snr_db)))[0]


def trial_seed(master_seed, snr_db, trial_index) -> np.random.SeedSequence:
    """Seed for one trial: a SeedSequence over (seed, IEEE-754 bits of the SNR, index)."""
    return np.random.SeedSequence([int(master_seed), _snr_key(snr_db), int(trial_index)])


_FIXED_CHANNEL = 0xC0FFEE
_FIXED_PILOTS = 0x9170


def _streams(config, snr_db, trial_index):
    chan_ss, pilot_ss, noise_ss = trial_seed(config.master_seed, snr_db, trial_index).spawn(3)
    if config.fix_channel:
        chan_ss = np.random.SeedSequence([config.master_seed, _FIXED_CHANNEL])
    if config.fix_pilots:
        pilot_ss = np.random.SeedSequence([config.master_seed, _FIXED_PILOTS])
    return tuple(np.random.default_rng(ss) for ss in (chan_ss, pilot_ss, noise_ss))


def _run_algorithm(name, theta, meas, cir, params) -> RecoveryOutput:
    if name == "bp":
        return bp_recover(theta, meas, params=params)
    if name == "isd":
        return isd_recover(theta, meas, params)
    if name == "block_isd":
        return block_isd_recover(theta, meas, params)
    return oracle_ls(theta, meas, OracleInfo(tuple(cir.tap_support)))


def simulate_trial(config: RunConfig, snr_db: float, trial_index: int) -> TrialResult:
    """One end-to-end trial with every intermediate kept for inspection."""
    chan_rng, pilot_rng, noise_rng = _streams(config, snr_db, trial_index)
    cir = generate_cir(config.channel_profile, config.N_T, chan_rng)
    plan = make_pilot_plan(config.N, config.p, config.N_T, pilot_rng)
    theta = p_to_theta(build_sensing_matrix(plan, config.L))
    g = h_to_g(cir.coeffs, config.N_T, config.L)
    meas = measure(theta, g, snr_db, noise_rng)

    outputs, records, skipped = {}, [], {}
    for name in config.algorithms:
        try:
            out = _run_algorithm(name, theta, meas, cir, config.isd)
        except RankDeficiencyError as exc:
            log.warning("snr=%g trial=%d: %s skipped (%s)", snr_db, trial_index, name, exc)
            skipped[name] = str(exc)
            continue
        outputs[name] = out
        records.append(
            NmseRecord(
                snr_db=float(snr_db),
                algorithm=name,
                trial=int(trial_index),
                nmse=nmse(out.g_hat, g),
                iterations=int(out.iterations_used),
                termination_reason=out.termination_reason.value,
            )
        )
    return TrialResult(snr_db, trial_index, cir, plan, theta, g, meas, outputs, records, skipped)


def run_trial(config: RunConfig, snr_db: float, trial_index: int) -> list:
    return simulate_trial(config, snr_db, trial_index).records


def _trial_task(args):
    config, snr_db, trial_index = args
    return run_trial(config, snr_db, trial_index)


def _sort_key(config):
    snr_pos = {s: i for i, s in enumerate(config.snr_grid_db)}
    alg_pos = {a: i for i, a in enumerate(config.algorithms)}
    return lambda r: (snr_pos[r.snr_db], alg_pos[r.algorithm], r.trial)


def summarize(records, config: RunConfig | None = None) -> list:
    """Per-(snr, algorithm) arithmetic mean NMSE, dB conversion last."""
    groups = {}
    for r in records:
        groups.setdefault((r.snr_db, r.algorithm), []).append(r.nmse)
    if config is not None:
        keys = [(s, a) for s in config.snr_grid_db for a in config.algorithms if (s, a) in groups]
    else:
        keys = sorted(groups)
    out = []
    for snr, alg in keys:
        vals = groups[(snr, alg)]
        mean = math.fsum(vals) / len(vals)
        out.append(
            {
                "snr_db": snr,
                "algorithm": alg,
                "mean_nmse": mean,
                "mean_nmse_db": 10.0 * math.log10(mean) if mean > 0 else -math.inf,
                "n_trials": len(vals),
            }
        )
    return out


def run_sweep(config: RunConfig, workers: int | None = None, progress=None) -> SweepResult:
    """All trials of the SNR grid; ``workers > 1`` fans out over processes."""
    workers = workers or config.workers
    tasks = [(config, s, t) for s in config.snr_grid_db for t in range(config.n_trials)]
    records = []
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for recs in pool.map(_trial_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))):
                records.extend(recs)
                if progress:
                    progress()
    else:
        for task in tasks:
            records.extend(_trial_task(task))
            if progress:
                progress()
    records.sort(key=_sort_key(config))
    return SweepResult(records, summarize(records, config))


def _open_for_write(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return path.open("w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def write_records(records, path):
    with _open_for_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_HEADER)
        for r in records:
            w.writerow([repr(r.snr_db), r.algorithm, r.trial, repr(r.nmse), r.iterations, r.termination_reason])


def write_summary(summary, path):
    with _open_for_write(path) as fh:
        w = csv.writer(fh)
        w.writerow(SUMMARY_HEADER)
        for row in summary:
            w.writerow([repr(row["snr_db"]), row["algorithm"], repr(row["mean_nmse"]),
                        repr(row["mean_nmse_db"]), row["n_trials"]])


def write_sweep(result: SweepResult, config: RunConfig, out_dir) -> dict:
    """Write ``records.csv``, ``summary.csv`` and the resolved ``config.yaml``."""
    out = Path(out_dir)
    paths = {
        "records": out / "records.csv",
        "summary": out / "summary.csv",
        "config": out / "config.yaml",
    }
    write_records(result.records, paths["records"])
    write_summary(result.summary, paths["summary"])
    with _open_for_write(paths["config"]) as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)
    return paths


def overhead_report(config=None, *, L=None, N_T=None, p=None) -> OverheadReport:
    """Pilot saving of ``p`` against the ``L * N_T`` pilots of full-rank LS/MMSE."""
    if config is not None:
        L, N_T, p = config.L, config.N_T, config.p
    conventional = int(L) * int(N_T)
    return OverheadReport(conventional, int(p), (conventional - int(p)) / conventional)
