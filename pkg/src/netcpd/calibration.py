"""Sparsity estimation and Monte Carlo calibration of the score constant c1.

Only the score threshold b_u = c1 * scale(u) depends on c1; the denoised
direction, the gate and the score do not.  A null replicate is therefore
summarised once by its profile: for every split time t, the largest score
among gate-passing grid points and scale(t).  The detector with constant c1
alarms at the first t where that score exceeds c1 * scale(t), which makes
false-alarm frequency and run length monotone in c1 over a fixed seed list
and lets the bisection reuse the same replicates at every iterate.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Optional, Union

import numpy as np

from .detector import DetectorConfig, SplitStreams, scan
from .graph_core import AdjacencySnapshot
from .generators import ScenarioSpec, iter_stream

log = logging.getLogger(__name__)

REGIMES = ("pfa", "arl")
ARL_CAP_FACTOR = 10
ARL_TOLERANCE = 0.10
RHO_QUANTILE = 0.95
# first raw length examined by mean_run_length before doubling
ARL_START_LEVEL = 128


class CalibrationError(ValueError):
    pass


def estimate_rho(training: Union[Iterable[AdjacencySnapshot], np.ndarray]) -> float:
    """0.95 empirical quantile (inverted CDF) of per-pair edge frequencies, clamped to [1/T, 1]."""
    if isinstance(training, np.ndarray):
        mats = training
        if mats.ndim != 3:
            raise ValueError("expected a (T, n, n) array")
        total, count = mats.sum(axis=0, dtype=float), mats.shape[0]
    else:
        total, count = None, 0
        for snap in training:
            total = snap.entries.astype(float) if total is None else total + snap.entries
            count += 1
    if count == 0:
        raise ValueError("empty training sequence")
    iu = np.triu_indices(total.shape[0], k=1)
    freq = total[iu] / count
    q = float(np.quantile(freq, RHO_QUANTILE, method="inverted_cdf")) if freq.size else 0.0
    return min(1.0, max(1.0 / count, q))


def rho_from_spec(spec: ScenarioSpec, length: int, seed: int) -> float:
    """Estimate rho from a fresh pre-change training stream."""
    return estimate_rho(iter_stream(spec.null().replace(horizon=length), seed))


@dataclass(frozen=True)
class CalibrationTarget:
    regime: str = "pfa"
    alpha: float = 0.05
    t_train: int = 200
    gamma: int = 150
    reps: int = 200
    c1_low: float = 0.0
    c1_high: float = 50.0
    max_steps: int = 40

    def __post_init__(self):
        if self.regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {self.regime!r}")
        if self.reps < 1:
            raise ValueError("reps must be >= 1")
        if not self.c1_low < self.c1_high:
            raise ValueError("need c1_low < c1_high")
        if self.regime == "pfa" and not 0 < self.alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.regime == "pfa" and self.t_train < 2:
            raise ValueError("t_train must be >= 2")
        if self.regime == "arl" and self.gamma < 2:
            raise ValueError("gamma must be >= 2")

    @property
    def arl_cap(self) -> int:
        return ARL_CAP_FACTOR * self.gamma


class NullProfile:
    """Lazily computed alarm profile of one seeded null stream.

    ``max_score[k]`` and ``scale[k]`` refer to split time t = k + 2 (raw time
    2t).  Extending the profile regenerates the stream from its seed and
    fast-forwards through the part already scanned, so no prefix store is
    kept between extensions.
    """

    def __init__(self, spec: ScenarioSpec, cfg: DetectorConfig, seed: int):
        self.spec = spec.null()
        self.cfg = cfg.replace(ring_buffer=True, max_time=None)
        self.seed = seed
        self.max_score = np.empty(0)
        self.scale = np.empty(0)

    @property
    def raw_length(self) -> int:
        return 2 * (len(self.max_score) + 1) if len(self.max_score) else 0

    def extend(self, raw_length: int) -> None:
        t_end = raw_length // 2
        t_done = len(self.max_score) + 1
        if t_end <= t_done:
            return
        streams = SplitStreams(self.spec.n, ring=True)
        scores, scales = list(self.max_score), list(self.scale)
        for snap in iter_stream(self.spec.replace(horizon=2 * t_end), self.seed):
            streams.push(snap.entries)
            if streams.raw_t % 2 or streams.b_state.t <= t_done:
                continue
            points = scan(streams, self.cfg, stop_on_fire=False)
            gated = [p.score for p in points if p.gate_passed]
            scores.append(max(gated) if gated else -math.inf)
            scales.append(points[0].b_scale if points else math.inf)
        self.max_score, self.scale = np.array(scores), np.array(scales)

    def first_alarm(self, c1: float, raw_limit: int) -> Optional[int]:
        """Raw time of the first alarm at or before ``raw_limit``, or None."""
        self.extend(raw_limit)
        k_max = raw_limit // 2 - 1
        hits = np.flatnonzero(self.max_score[:k_max] > c1 * self.scale[:k_max])
        return None if hits.size == 0 else 2 * (int(hits[0]) + 2)

    def known_alarm(self, c1: float) -> Optional[int]:
        """First alarm within the part already computed, without extending."""
        hits = np.flatnonzero(self.max_score > c1 * self.scale)
        return None if hits.size == 0 else 2 * (int(hits[0]) + 2)


def null_profiles(spec: ScenarioSpec, cfg: DetectorConfig, seeds: Iterable[int]) -> list[NullProfile]:
    return [NullProfile(spec, cfg, s) for s in seeds]


def false_alarm_rate(profiles: list[NullProfile], c1: float, t_train: int) -> float:
    return sum(p.first_alarm(c1, t_train) is not None for p in profiles) / len(profiles)


def mean_run_length(
    profiles: list[NullProfile], c1: float, cap: int, stop_above: Optional[float] = None
) -> tuple[float, bool]:
    """Mean raw run length capped at ``cap``.

    Returns (value, exact).  With ``stop_above`` the computation may stop
    early, returning a lower bound that already exceeds ``stop_above``.
    """
    start = ARL_START_LEVEL if stop_above is None else 2 * (int(stop_above) // 2 + 1)
    level = min(cap, start)
    while True:
        lengths = []
        resolved = True
        for p in profiles:
            alarm = p.known_alarm(c1)
            if alarm is None and p.raw_length < level:
                p.extend(level)
                alarm = p.known_alarm(c1)
            if alarm is None:
                lengths.append(min(level, cap))
                resolved = resolved and level >= cap
            else:
                lengths.append(min(alarm, cap))
        value = float(np.mean(lengths))
        if resolved:
            return value, True
        if stop_above is not None and value > stop_above:
            return value, False
        level = min(cap, 2 * level)


@dataclass(frozen=True)
class CalibrationResult:
    c1: float
    achieved: float
    regime: str
    steps: int
    converged: bool


def calibrate_c1(
    spec: ScenarioSpec,
    cfg: DetectorConfig,
    target: CalibrationTarget,
    seed: int = 0,
    profiles: Optional[list[NullProfile]] = None,
) -> CalibrationResult:
    """Bisection on c1 over ``target.reps`` null replicates with seeds seed, seed + 1, ...

    pfa: false-alarm frequency within ``t_train`` in [alpha / 2, alpha].
    arl: mean run length (capped at 10 gamma) in [gamma, 1.1 gamma].
    Without convergence the conservative endpoint is returned.
    """
    if profiles is None:
        profiles = null_profiles(spec, cfg, range(seed, seed + target.reps))
    lo, hi = target.c1_low, target.c1_high

    if target.regime == "pfa":
        alpha = target.alpha

        def measure(c1):
            return false_alarm_rate(profiles, c1, target.t_train)

        m_lo, m_hi = measure(lo), measure(hi)
        if not (m_lo > alpha and m_hi <= alpha):
            raise CalibrationError(
                f"bracket [{lo}, {hi}] does not straddle alpha={alpha}: false-alarm rates {m_lo:.4f}, {m_hi:.4f}"
            )
        for k in range(target.max_steps):
            mid = 0.5 * (lo + hi)
            m = measure(mid)
            log.debug("pfa bisection step %d: c1=%.6g rate=%.4f", k, mid, m)
            if m > alpha:
                lo = mid
            elif m >= alpha / 2:
                return CalibrationResult(mid, m, "pfa", k + 1, True)
            else:
                hi = mid
        return CalibrationResult(hi, measure(hi), "pfa", target.max_steps, False)

    gamma, cap = target.gamma, target.arl_cap
    upper = (1.0 + ARL_TOLERANCE) * gamma
    m_lo, _ = mean_run_length(profiles, lo, cap, stop_above=gamma)
    m_hi, _ = mean_run_length(profiles, hi, cap, stop_above=gamma)
    if not (m_lo < gamma <= m_hi):
        raise CalibrationError(
            f"bracket [{lo}, {hi}] does not straddle gamma={gamma}: mean run lengths {m_lo:.2f}, >= {m_hi:.2f}"
        )
    for k in range(target.max_steps):
        mid = 0.5 * (lo + hi)
        m, exact = mean_run_length(profiles, mid, cap, stop_above=upper)
        log.debug("arl bisection step %d: c1=%.6g mean run length=%.2f", k, mid, m)
        if m < gamma:
            lo = mid
        elif exact and m <= upper:
            return CalibrationResult(mid, m, "arl", k + 1, True)
        else:
            hi = mid
    m, _ = mean_run_length(profiles, hi, cap)
    return CalibrationResult(hi, m, "arl", target.max_steps, False)


def calibrated_config(
    spec: ScenarioSpec,
    cfg: DetectorConfig,
    target: CalibrationTarget,
    seed: int = 0,
    rho_train_length: Optional[int] = None,
) -> tuple[DetectorConfig, CalibrationResult]:
    """Estimate rho_hat from a pre-change training stream, then calibrate c1.

    The training stream uses seed ``seed + target.reps``, right after the
    calibration replicates.
    """
    length = rho_train_length or (target.t_train if target.regime == "pfa" else target.gamma)
    rho_hat = rho_from_spec(spec, length, seed + target.reps)
    cfg = cfg.replace(rho_hat=rho_hat)
    if target.regime == "pfa":
        cfg = cfg.replace(mode="alpha", alpha=target.alpha)
    else:
        cfg = cfg.replace(mode="arl", gamma=target.gamma)
    result = calibrate_c1(spec, cfg, target, seed)
    return cfg.replace(c1=result.c1), result
