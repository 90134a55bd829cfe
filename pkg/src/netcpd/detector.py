"""Online network change-point detection with data splitting.

Odd raw snapshots feed the scoring stream A, even raw snapshots feed the
direction stream B.  Whenever B advances to split time t >= 2, every split
point s on the geometric grid is scanned (s = t - 1, t - 2, t - 4, ...) and
the detector fires at the first s where both

    ||B_tilde[s, t]||_F > gate(t)   and   <A_hat[s, t], B_tilde[s, t] / ||B_tilde[s, t]||_F> > b_t

hold.  B_tilde is a denoised copy of the B-stream CUSUM, obtained by USVT or
by the least-squares block-model fit (``estimator="np"``).
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, NamedTuple, Optional

import numpy as np

from .graph_core import AdjacencySnapshot, CusumState, cusum, geometric_grid
from .usvt import METHODS, UsvtParams, usvt

MODES = ("alpha", "arl")
TAU_RULES = ("theoretical", "practical")
ESTIMATORS = ("usvt", "np")

# constants of the practical tuning rule
PRACTICAL_TAU1_SCALE = 0.2
PRACTICAL_TAU1_NOISE = 1.0 / 15.0


class ThresholdError(ValueError):
    """A threshold formula is undefined at this (s, u)."""


@dataclass(frozen=True)
class DetectorConfig:
    mode: str = "alpha"
    alpha: float = 0.05
    gamma: int = 150
    c_gate: float = 1.0
    c1: float = 1.0
    rho_hat: float = 0.02
    tau_rule: str = "practical"
    use_absolute_inner_product: bool = False
    max_time: Optional[int] = None
    estimator: str = "usvt"
    eig_method: str = "lapack"
    r0: int = 2
    np_strategy: str = "exhaustive"
    ring_buffer: bool = False

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "alpha" and not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.mode == "arl" and (int(self.gamma) != self.gamma or self.gamma < 2):
            raise ValueError(f"gamma must be an integer >= 2, got {self.gamma}")
        if not self.c_gate > 0:
            raise ValueError(f"c_gate must be positive, got {self.c_gate}")
        if not self.c1 > 0:
            raise ValueError(f"c1 must be positive, got {self.c1}")
        if not 0.0 <= self.rho_hat <= 1.0:
            raise ValueError(f"rho_hat must lie in [0, 1], got {self.rho_hat}")
        if self.tau_rule not in TAU_RULES:
            raise ValueError(f"tau_rule must be one of {TAU_RULES}, got {self.tau_rule!r}")
        if self.estimator not in ESTIMATORS:
            raise ValueError(f"estimator must be one of {ESTIMATORS}, got {self.estimator!r}")
        if self.eig_method not in METHODS:
            raise ValueError(f"eig_method must be one of {METHODS}, got {self.eig_method!r}")
        if self.max_time is not None and self.max_time < 1:
            raise ValueError(f"max_time must be positive, got {self.max_time}")
        if self.r0 < 1:
            raise ValueError(f"r0 must be >= 1, got {self.r0}")

    def replace(self, **changes) -> "DetectorConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "DetectorConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


class Thresholds(NamedTuple):
    b: float
    tau1: float
    tau2: float
    gate: float
    # b == c1 * b_scale
    b_scale: float


def _sqrt_log(x: float) -> float:
    if not x > 1.0:
        raise ThresholdError(f"log argument {x} <= 1")
    return math.sqrt(math.log(x))


def thresholds(cfg: DetectorConfig, s: int, u: int, n: int) -> Thresholds:
    """Score threshold b_u, USVT levels tau1/tau2 and the Frobenius gate at (s, u)."""
    if u < 2 or not 1 <= s < u:
        raise ValueError(f"need u >= 2 and 1 <= s < u, got s={s}, u={u}")
    rho = cfg.rho_hat
    tau2 = math.sqrt((u - s) * s / u) * rho
    if cfg.mode == "alpha":
        a = cfg.alpha
        log_term = _sqrt_log(u / a)
        gate = cfg.c_gate * log_term
        b_scale = math.sqrt(rho) * log_term
        if cfg.tau_rule == "theoretical":
            tau1 = cfg.c_gate * math.sqrt(n * rho) + math.sqrt(2.0) * _sqrt_log(
                u * (u + 1) * math.log(u) / (a * math.log(2.0))
            )
        else:
            h = u - s
            tau1 = PRACTICAL_TAU1_SCALE * math.sqrt(n * rho) + PRACTICAL_TAU1_NOISE * math.sqrt(2.0) * _sqrt_log(
                2.0 * h * (h + 1) / a
            )
    else:
        g = cfg.gamma
        log_term = _sqrt_log(g)
        gate = cfg.c_gate * log_term
        b_scale = math.sqrt(rho) * log_term
        if cfg.tau_rule == "theoretical":
            tau1 = cfg.c_gate * math.sqrt(n * rho) + math.sqrt(2.0) * _sqrt_log(
                2.0 * (g + 1) * g * math.log(g + 1) / math.log(2.0)
            )
        else:
            tau1 = PRACTICAL_TAU1_SCALE * math.sqrt(n * rho) + PRACTICAL_TAU1_NOISE * math.sqrt(2.0) * _sqrt_log(
                2.0 * g + 2.0
            )
    b = math.inf if math.isinf(cfg.c1) else cfg.c1 * b_scale
    return Thresholds(b, tau1, tau2, gate, b_scale)


class SplitStreams:
    """Prefix-sum stores for the odd (A) and even (B) raw sub-streams."""

    def __init__(self, n: int, ring: bool = False):
        self.n = n
        self.a_state = CusumState(n, ring=ring)
        self.b_state = CusumState(n, ring=ring)
        self.raw_t = 0

    def push(self, entries: np.ndarray) -> None:
        state = self.a_state if self.raw_t % 2 == 0 else self.b_state
        state.append(AdjacencySnapshot(entries, state.t + 1))
        self.raw_t += 1

    def reset(self) -> None:
        self.a_state.reset()
        self.b_state.reset()
        self.raw_t = 0


@dataclass(frozen=True)
class GridPoint:
    s: int
    t: int
    gate_value: float
    score: float
    b: float
    gate: float
    b_scale: float

    @property
    def gate_passed(self) -> bool:
        return self.gate_value > self.gate

    @property
    def fires(self) -> bool:
        return self.gate_passed and self.score > self.b


@dataclass(frozen=True)
class DetectionOutcome:
    fired: bool
    t_split: Optional[int] = None
    t_raw: Optional[int] = None
    s_hit: Optional[int] = None
    gate_value: Optional[float] = None
    score: Optional[float] = None
    threshold_used: Optional[float] = None
    # raw index after which this segment started (nonzero only after a restart)
    offset: int = 0

    def __post_init__(self):
        if self.fired != (self.t_split is not None):
            raise ValueError("fired must coincide with a present t_split")
        if self.t_split is not None and self.t_raw != self.offset + 2 * self.t_split:
            raise ValueError("t_raw must equal offset + 2 * t_split")

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def estimate_direction(bhat: np.ndarray, cfg: DetectorConfig, th: Thresholds) -> np.ndarray:
    if cfg.estimator == "usvt":
        return usvt(bhat, UsvtParams(th.tau1, th.tau2), method=cfg.eig_method)
    from .np_detector import np_fit

    return np_fit(bhat, cfg.r0, cfg.np_strategy, eig_method=cfg.eig_method).fitted


def evaluate(streams: SplitStreams, cfg: DetectorConfig, s: int, t: int) -> GridPoint:
    th = thresholds(cfg, s, t, streams.n)
    b_tilde = estimate_direction(cusum(streams.b_state, s, t).entries, cfg, th)
    norm = float(np.linalg.norm(b_tilde))
    if norm == 0.0:
        score = 0.0
    else:
        score = float(np.vdot(cusum(streams.a_state, s, t).entries, b_tilde)) / norm
        if cfg.use_absolute_inner_product:
            score = abs(score)
    return GridPoint(s, t, norm, score, th.b, th.gate, th.b_scale)


def scan(streams: SplitStreams, cfg: DetectorConfig, stop_on_fire: bool = True) -> list[GridPoint]:
    """Evaluate the grid at the current split time, j = 0 upward."""
    t = streams.b_state.t
    if t < 2 or streams.a_state.t < t:
        return []
    points = []
    for s in geometric_grid(t):
        try:
            gp = evaluate(streams, cfg, s, t)
        except ThresholdError:
            continue
        points.append(gp)
        if stop_on_fire and gp.fires:
            break
    return points


def _outcome(points: list[GridPoint], offset: int) -> DetectionOutcome:
    if not points:
        return DetectionOutcome(fired=False, offset=offset)
    last = points[-1]
    if last.fires:
        return DetectionOutcome(True, last.t, offset + 2 * last.t, last.s, last.gate_value, last.score, last.b, offset)
    return DetectionOutcome(False, None, None, last.s, last.gate_value, last.score, last.b, offset)


def step(
    streams: SplitStreams,
    cfg: DetectorConfig,
    a_new: AdjacencySnapshot,
    b_new: Optional[AdjacencySnapshot] = None,
    offset: int = 0,
) -> DetectionOutcome:
    """Append one A snapshot (and optionally one B snapshot), then scan if B advanced."""
    if streams.raw_t % 2 != 0:
        raise ValueError("step expects the split streams to be balanced")
    for snap in (a_new, b_new):
        if snap is not None and snap.n != streams.n:
            raise ValueError(f"snapshot has {snap.n} nodes, detector expects {streams.n}")
    streams.push(a_new.entries)
    if b_new is None:
        return DetectionOutcome(fired=False, offset=offset)
    streams.push(b_new.entries)
    return _outcome(scan(streams, cfg), offset)


def _checked(source: Iterable[AdjacencySnapshot]) -> Iterator[AdjacencySnapshot]:
    prev = None
    for snap in source:
        if prev is not None and snap.time_index != prev + 1:
            raise ValueError(f"snapshots out of order: {snap.time_index} after {prev}")
        prev = snap.time_index
        yield snap
    if prev is None:
        raise ValueError("empty snapshot source")


def _detect(source: Iterable[AdjacencySnapshot], cfg: DetectorConfig, restart: bool) -> list[DetectionOutcome]:
    outcomes = []
    streams = None
    offset = 0
    last = None
    for raw, snap in enumerate(_checked(source), start=1):
        if cfg.max_time is not None and raw > cfg.max_time:
            break
        if streams is None:
            streams = SplitStreams(snap.n, ring=cfg.ring_buffer)
        elif snap.n != streams.n:
            raise ValueError(f"snapshot {snap.time_index} has {snap.n} nodes, expected {streams.n}")
        streams.push(snap.entries)
        if streams.raw_t % 2 == 1:
            continue
        points = scan(streams, cfg)
        last = _outcome(points, offset) if points else last
        if last is not None and last.fired:
            outcomes.append(last)
            if not restart:
                return outcomes
            streams.reset()
            offset = raw
            last = None
    if last is None:
        last = DetectionOutcome(fired=False, offset=offset)
    if not restart:
        outcomes.append(last)
    return outcomes


def run(source: Iterable[AdjacencySnapshot], cfg: DetectorConfig) -> DetectionOutcome:
    """Run until the first alarm, the end of the source or ``cfg.max_time``."""
    return _detect(source, cfg, restart=False)[0]


def run_multi(source: Iterable[AdjacencySnapshot], cfg: DetectorConfig) -> list[DetectionOutcome]:
    """Restart both split streams after every alarm; return the alarms in order."""
    return _detect(source, cfg, restart=True)
