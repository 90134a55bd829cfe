"""Core matrix types, the streaming prefix-sum store and the network CUSUM.

A stream of adjacency matrices A(1), A(2), ... is summarised by its prefix
sums S(u) = A(1) + ... + A(u).  Any CUSUM matrix

    A_hat[s, t] = sqrt((t-s)/(s t)) * S(s) - sqrt(s/((t-s) t)) * (S(t) - S(s))

is then available in O(n^2) time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class AdjacencySnapshot:
    """One undirected, unweighted network observed at ``time_index``."""

    entries: np.ndarray
    time_index: int

    def __post_init__(self):
        a = np.asarray(self.entries)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"adjacency matrix must be square, got shape {a.shape}")
        if self.time_index < 1:
            raise ValueError(f"time_index must be positive, got {self.time_index}")
        if not np.isin(a, (0, 1)).all():
            raise ValueError("adjacency entries must be 0 or 1")
        if not np.array_equal(a, a.T):
            raise ValueError("adjacency matrix must be symmetric")
        if np.any(np.diagonal(a) != 0):
            raise ValueError("adjacency matrix must have a zero diagonal")
        a = a.astype(np.uint8, copy=True)
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class GraphonMatrix:
    """Symmetric matrix of edge probabilities."""

    entries: np.ndarray

    def __post_init__(self):
        p = np.array(self.entries, dtype=float)
        if p.ndim != 2 or p.shape[0] != p.shape[1]:
            raise ValueError(f"graphon must be square, got shape {p.shape}")
        if not np.allclose(p, p.T, rtol=0.0, atol=1e-12):
            raise ValueError("graphon must be symmetric")
        if p.min(initial=0.0) < 0.0 or p.max(initial=0.0) > 1.0:
            raise ValueError("graphon entries must lie in [0, 1]")
        p.setflags(write=False)
        object.__setattr__(self, "entries", p)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class CusumMatrix:
    s: int
    t: int
    entries: np.ndarray

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def numerical_rank(m: np.ndarray, rtol: float = RANK_RTOL) -> int:
    sv = np.linalg.svd(np.asarray(m, dtype=float), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > rtol * sv[0]))


@dataclass(frozen=True)
class ChangeScenario:
    """Ground truth for a single change: theta_before up to ``delta``, theta_after afterwards.

    ``delta`` is None when the stream never changes.
    """

    theta_before: GraphonMatrix
    theta_after: GraphonMatrix
    delta: Optional[int]
    rho: float
    kappa: float
    kappa0: float
    r: int

    @classmethod
    def from_graphons(
        cls,
        theta_before: GraphonMatrix,
        theta_after: GraphonMatrix,
        delta: Optional[int],
        rho: Optional[float] = None,
    ) -> "ChangeScenario":
        if rho is None:
            rho = float(max(theta_before.entries.max(initial=0.0), theta_after.entries.max(initial=0.0)))
        kappa, kappa0, r = jump_size(theta_before, theta_after, rho)
        return cls(theta_before, theta_after, delta, float(rho), kappa, kappa0, r)

    @property
    def n(self) -> int:
        return self.theta_before.n

    @property
    def difference(self) -> np.ndarray:
        return self.theta_before.entries - self.theta_after.entries

    def to_dict(self, include_graphons: bool = True) -> dict:
        out = {
            "n": self.n,
            "delta": self.delta,
            "rho": self.rho,
            "kappa": self.kappa,
            "kappa0": self.kappa0,
            "r": self.r,
        }
        if include_graphons:
            out["theta_before"] = self.theta_before.entries.tolist()
            out["theta_after"] = self.theta_after.entries.tolist()
        return out


class CusumState:
    """Prefix sums S(0), ..., S(t) of a snapshot stream.

    With ``ring=True`` only the prefixes that the geometric grid can still
    request are retained (indices >= t // 2); ``cusum`` at an evicted split
    point raises ``IndexError``.
    """

    def __init__(self, n: int, ring: bool = False):
        if n < 1:
            raise ValueError(f"node count must be positive, got {n}")
        self.n = n
        self.ring = ring
        self.t = 0
        self._prefix: dict[int, np.ndarray] = {0: np.zeros((n, n))}

    def prefix(self, u: int) -> np.ndarray:
        if u < 0 or u > self.t:
            raise IndexError(f"prefix index {u} outside [0, {self.t}]")
        try:
            return self._prefix[u]
        except KeyError:
            raise IndexError(f"prefix {u} was evicted (ring buffer mode)") from None

    @property
    def retained(self) -> list[int]:
        return sorted(self._prefix)

    def append(self, a: AdjacencySnapshot) -> "CusumState":
        if a.n != self.n:
            raise ValueError(f"snapshot has {a.n} nodes, state expects {self.n}")
        if a.time_index != self.t + 1:
            raise ValueError(f"expected time_index {self.t + 1}, got {a.time_index}")
        self._prefix[self.t + 1] = self._prefix[self.t] + a.entries
        self.t += 1
        if self.ring:
            keep_from = self.t // 2
            for u in [u for u in self._prefix if u < keep_from]:
                del self._prefix[u]
        return self

    def reset(self) -> None:
        self.t = 0
        self._prefix = {0: np.zeros((self.n, self.n))}


def append(state: CusumState, a: AdjacencySnapshot) -> CusumState:
    return state.append(a)


def cusum_coefficients(s: int, t: int) -> tuple[float, float]:
    """Weights multiplying the pre-split sum and the post-split sum."""
    return math.sqrt((t - s) / (s * t)), math.sqrt(s / ((t - s) * t))


def cusum(state: CusumState, s: int, t: int) -> CusumMatrix:
    if not (1 <= s < t <= state.t):
        raise ValueError(f"need 1 <= s < t <= {state.t}, got s={s}, t={t}")
    before, after = cusum_coefficients(s, t)
    ps = state.prefix(s)
    entries = before * ps - after * (state.prefix(t) - ps)
    return CusumMatrix(s, t, entries)


def geometric_grid(t: int) -> list[int]:
    """Split points t - 2^j, j = 0, ..., floor(log2 t) - 1."""
    if t < 2:
        raise ValueError(f"grid needs t >= 2, got {t}")
    return [t - (1 << j) for j in range(t.bit_length() - 1)]


def expected_cusum(scenario: ChangeScenario, s: int, t: int) -> np.ndarray:
    """Mean of the CUSUM matrix at (s, t) under a single-change scenario."""
    if not (1 <= s < t):
        raise ValueError(f"need 1 <= s < t, got s={s}, t={t}")
    delta = scenario.delta
    if delta is None or t <= delta:
        return np.zeros((scenario.n, scenario.n))
    if s <= delta:
        scale = (t - delta) * math.sqrt(s / (t * (t - s)))
    else:
        scale = delta * math.sqrt((t - s) / (s * t))
    return scale * scenario.difference


def jump_size(
    theta1: GraphonMatrix, theta2: GraphonMatrix, rho: Optional[float] = None
) -> tuple[float, float, int]:
    """Return (kappa, kappa0, r) for the change theta1 -> theta2."""
    if theta1.n != theta2.n:
        raise ValueError(f"dimension mismatch: {theta1.n} vs {theta2.n}")
    diff = theta1.entries - theta2.entries
    kappa = float(np.linalg.norm(diff))
    if rho is None:
        rho = float(max(theta1.entries.max(initial=0.0), theta2.entries.max(initial=0.0)))
    if kappa == 0.0:
        return 0.0, 0.0, 0
    if rho <= 0.0:
        raise ValueError("rho must be positive when the graphons differ")
    return kappa, kappa / (theta1.n * rho), numerical_rank(diff)
