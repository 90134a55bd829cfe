"""Monte Carlo detection experiments and the Delay / PFA summaries.

With t_tilde = min(T, t_hat) per replicate (t_hat = infinity without alarm):

    Delay = mean of (t_tilde - delta) over replicates with t_tilde >= delta
    PFA   = fraction of replicates with t_tilde < delta
"""

from __future__ import annotations

import csv
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .detector import DetectionOutcome, DetectorConfig, run
from .generators import ScenarioSpec, iter_stream

CSV_COLUMNS = ("seed", "fired", "t_raw", "t_tilde", "s_hit", "gate_value", "score")


@dataclass(frozen=True)
class ReplicateRecord:
    seed: int
    fired: bool
    t_raw: Optional[int]
    t_tilde: int
    s_hit: Optional[int] = None
    gate_value: Optional[float] = None
    score: Optional[float] = None

    @classmethod
    def from_outcome(cls, seed: int, outcome: DetectionOutcome, horizon: int) -> "ReplicateRecord":
        t_tilde = horizon if outcome.t_raw is None else min(horizon, outcome.t_raw)
        return cls(seed, outcome.fired, outcome.t_raw, t_tilde, outcome.s_hit, outcome.gate_value, outcome.score)


def metrics(records: Sequence[ReplicateRecord], delta: int, horizon: int) -> tuple[Optional[float], float]:
    """(Delay, PFA); Delay is None when no replicate has t_tilde >= delta."""
    if not records:
        raise ValueError("no replicate records")
    if delta > horizon:
        raise ValueError(f"delta {delta} exceeds horizon {horizon}")
    late = [min(r.t_tilde, horizon) - delta for r in records if min(r.t_tilde, horizon) >= delta]
    early = sum(1 for r in records if min(r.t_tilde, horizon) < delta)
    delay = sum(late) / len(late) if late else None
    return delay, early / len(records)


@dataclass
class ExperimentResult:
    records: list[ReplicateRecord]
    delta: int
    horizon: int
    config: dict = field(default_factory=dict)

    def __post_init__(self):
        self.delay, self.pfa = metrics(self.records, self.delta, self.horizon)

    @property
    def n_reps(self) -> int:
        return len(self.records)

    def aggregate(self) -> dict:
        return {
            "n_reps": self.n_reps,
            "delta": self.delta,
            "horizon": self.horizon,
            "delay": self.delay,
            "pfa": self.pfa,
        }


def _replicate(args) -> ReplicateRecord:
    spec, cfg, seed = args
    outcome = run(iter_stream(spec, seed), cfg)
    return ReplicateRecord.from_outcome(seed, outcome, spec.horizon)


def run_experiment(
    spec: ScenarioSpec,
    cfg: DetectorConfig,
    n_reps: int,
    base_seed: int = 0,
    n_jobs: int = 1,
) -> ExperimentResult:
    """Replicate r uses stream seed ``base_seed + r``; results are ordered by r.

    For a null scenario the metrics are taken with delta = horizon.
    """
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    delta = spec.horizon if spec.delta is None else spec.delta
    cfg = cfg.replace(max_time=spec.horizon if cfg.max_time is None else min(cfg.max_time, spec.horizon))
    tasks = [(spec, cfg, base_seed + r) for r in range(n_reps)]
    if n_jobs == 1:
        records = [_replicate(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            records = list(pool.map(_replicate, tasks))
    config = {"scenario": spec.to_dict(), "detector": cfg.to_dict(), "n_reps": n_reps, "base_seed": base_seed}
    return ExperimentResult(records, delta, spec.horizon, config)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_results(result: ExperimentResult, out_dir: str) -> None:
    """results.csv (one row per replicate), aggregate.json and config.json."""
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "results.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for r in result.records:
            writer.writerow([_cell(getattr(r, c)) for c in CSV_COLUMNS])
    with open(os.path.join(out_dir, "aggregate.json"), "w") as fh:
        json.dump(result.aggregate(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(os.path.join(out_dir, "config.json"), "w") as fh:
        json.dump(result.config, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse(text: str, kind):
    if text == "":
        return None
    if kind is bool:
        return text == "1"
    return kind(text)


def read_results(out_dir: str) -> ExperimentResult:
    types = {"seed": int, "fired": bool, "t_raw": int, "t_tilde": int, "s_hit": int, "gate_value": float, "score": float}
    with open(os.path.join(out_dir, "results.csv"), newline="") as fh:
        rows = list(csv.DictReader(fh))
    records = [ReplicateRecord(**{c: _parse(row[c], types[c]) for c in CSV_COLUMNS}) for row in rows]
    with open(os.path.join(out_dir, "aggregate.json")) as fh:
        agg = json.load(fh)
    config = {}
    path = os.path.join(out_dir, "config.json")
    if os.path.exists(path):
        with open(path) as fh:
            config = json.load(fh)
    return ExperimentResult(records, agg["delta"], agg["horizon"], config)
