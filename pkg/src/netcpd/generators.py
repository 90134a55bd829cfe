"""Seeded samplers for inhomogeneous Bernoulli network streams with one change.

Built-in scenarios (change after raw time ``delta``):

* ``sbm3``  three-community SBM, rho * B with the two 3x3 connectivity tables
* ``sbm5``  five-community SBM, within/between 0.9/0.2 -> 0.5/0.1, times rho
* ``dcbm``  degree-corrected three-community model, weights sqrt(i / n)
* ``rdpg``  random dot product graph on fixed latent positions in [0, 1]^5
* ``custom`` user supplied before/after graphons
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator, Optional

import numpy as np

from .graph_core import AdjacencySnapshot, ChangeScenario, GraphonMatrix

KINDS = ("sbm3", "sbm5", "dcbm", "rdpg", "custom")
SCENARIO_KINDS = {1: "sbm3", 2: "sbm5", 3: "dcbm", 4: "rdpg"}

SBM3_BEFORE = np.array([[0.6, 1.0, 0.6], [1.0, 0.6, 0.5], [0.6, 0.5, 0.6]])
SBM3_AFTER = np.array([[0.6, 0.5, 0.6], [0.5, 0.6, 1.0], [0.6, 1.0, 0.6]])
SBM5_BEFORE = np.full((5, 5), 0.2) + np.diag(np.full(5, 0.7))
SBM5_AFTER = np.full((5, 5), 0.1) + np.diag(np.full(5, 0.4))
DCBM_BEFORE = np.full((3, 3), 0.1) + np.diag(np.full(3, 0.8))
DCBM_AFTER = np.full((3, 3), 0.15) + np.diag(np.full(3, 0.8))
RDPG_DIM = 5


@dataclass(frozen=True, eq=False)
class ScenarioSpec:
    """One generative setting.

    ``delta`` is the last raw index drawn from the pre-change law (None: no
    change).  ``seed`` drives edge sampling; ``latent_seed`` fixes the RDPG
    latent positions so that every replicate shares them.
    """

    kind: str
    n: int
    delta: Optional[int] = None
    horizon: int = 300
    seed: int = 0
    rho: float = 0.02
    latent_seed: int = 0
    theta_before: Optional[np.ndarray] = None
    theta_after: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.n < 2:
            raise ValueError(f"need at least 2 nodes, got {self.n}")
        if self.horizon < 1:
            raise ValueError(f"horizon must be positive, got {self.horizon}")
        if self.delta is not None and not 1 <= self.delta < self.horizon:
            raise ValueError(f"delta must satisfy 1 <= delta < horizon, got {self.delta}")
        if self.kind in ("sbm3", "sbm5") and not 0.0 <= self.rho <= 1.0:
            raise ValueError(f"rho must lie in [0, 1], got {self.rho}")
        if self.kind == "sbm5" and self.n < 5:
            raise ValueError("sbm5 needs at least 5 nodes")
        if self.kind in ("sbm3", "dcbm") and self.n < 3:
            raise ValueError(f"{self.kind} needs at least 3 nodes")
        if self.kind == "custom":
            if self.theta_before is None or self.theta_after is None:
                raise ValueError("custom scenarios need theta_before and theta_after")
            for name in ("theta_before", "theta_after"):
                g = GraphonMatrix(_zero_diag(getattr(self, name)))
                if g.n != self.n:
                    raise ValueError(f"{name} is {g.n} x {g.n}, expected n = {self.n}")
                object.__setattr__(self, name, g.entries)

    def replace(self, **changes) -> "ScenarioSpec":
        return dataclasses.replace(self, **changes)

    def null(self) -> "ScenarioSpec":
        """The same setting with the pre-change law throughout."""
        return self.replace(delta=None)

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "n": self.n,
            "delta": self.delta,
            "horizon": self.horizon,
            "seed": self.seed,
            "rho": self.rho,
            "latent_seed": self.latent_seed,
        }
        if self.kind == "custom":
            out["theta_before"] = self.theta_before.tolist()
            out["theta_after"] = self.theta_after.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        d = dict(d)
        for name in ("theta_before", "theta_after"):
            if d.get(name) is not None:
                d[name] = np.asarray(d[name], dtype=float)
        return cls(**d)


def scenario(number: int, n: int, delta: Optional[int] = 150, horizon: int = 300, seed: int = 0, **kw) -> ScenarioSpec:
    """Built-in scenario 1-4 (sbm3, sbm5, dcbm, rdpg) with the usual defaults."""
    try:
        kind = SCENARIO_KINDS[number]
    except KeyError:
        raise ValueError(f"scenario must be one of {sorted(SCENARIO_KINDS)}, got {number}") from None
    return ScenarioSpec(kind, n, delta, horizon, seed, **kw)


def _zero_diag(p) -> np.ndarray:
    p = np.array(p, dtype=float)
    np.fill_diagonal(p, 0.0)
    return p


def community_labels(n: int, k: int) -> np.ndarray:
    """Contiguous communities of size floor(n / k); the last one takes the remainder."""
    size = n // k
    labels = np.minimum(np.arange(n) // size, k - 1)
    return labels


@lru_cache(maxsize=32)
def latent_positions(n: int, latent_seed: int) -> tuple[np.ndarray, np.ndarray]:
    """(X, X_tilde), both n x 5 with iid Unif[0, 1] entries, fixed per latent seed."""
    rng = np.random.default_rng(latent_seed)
    x = rng.random((n, RDPG_DIM))
    x_tilde = rng.random((n, RDPG_DIM))
    x.setflags(write=False)
    x_tilde.setflags(write=False)
    return x, x_tilde


def cosine_graphon(y: np.ndarray) -> np.ndarray:
    unit = y / np.linalg.norm(y, axis=1, keepdims=True)
    return _zero_diag(np.clip(unit @ unit.T, 0.0, 1.0))


@lru_cache(maxsize=64)
def _builtin_graphons(kind: str, n: int, rho: float, latent_seed: int) -> tuple[np.ndarray, np.ndarray]:
    if kind == "sbm3":
        z = community_labels(n, 3)
        before, after = rho * SBM3_BEFORE[np.ix_(z, z)], rho * SBM3_AFTER[np.ix_(z, z)]
    elif kind == "sbm5":
        z = community_labels(n, 5)
        before, after = rho * SBM5_BEFORE[np.ix_(z, z)], rho * SBM5_AFTER[np.ix_(z, z)]
    elif kind == "dcbm":
        z = community_labels(n, 3)
        v = np.sqrt(np.arange(1, n + 1) / n)
        w = np.outer(v, v)
        before, after = w * DCBM_BEFORE[np.ix_(z, z)], w * DCBM_AFTER[np.ix_(z, z)]
    else:
        x, x_tilde = latent_positions(n, latent_seed)
        y = np.array(x)
        y[: n // 4] = x_tilde[: n // 4]
        before, after = cosine_graphon(x), cosine_graphon(y)
    before, after = _zero_diag(before), _zero_diag(after)
    before.setflags(write=False)
    after.setflags(write=False)
    return before, after


def _graphons(spec: ScenarioSpec) -> tuple[np.ndarray, np.ndarray]:
    if spec.kind == "custom":
        return spec.theta_before, spec.theta_after
    rho = spec.rho if spec.kind in ("sbm3", "sbm5") else 1.0
    return _builtin_graphons(spec.kind, spec.n, rho, spec.latent_seed if spec.kind == "rdpg" else 0)


def graphon_of(spec: ScenarioSpec, t: int) -> GraphonMatrix:
    """Mean adjacency matrix at raw time t."""
    if not 1 <= t <= spec.horizon:
        raise ValueError(f"t must lie in [1, {spec.horizon}], got {t}")
    before, after = _graphons(spec)
    if spec.delta is None or t <= spec.delta:
        return GraphonMatrix(before)
    return GraphonMatrix(after)


def change_scenario(spec: ScenarioSpec) -> ChangeScenario:
    before, after = _graphons(spec)
    if spec.delta is None:
        after = before
    return ChangeScenario.from_graphons(GraphonMatrix(before), GraphonMatrix(after), spec.delta)


def sample_adjacency(p: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent Bernoulli(p_ij) edges for i < j, mirrored, zero diagonal."""
    n = p.shape[0]
    upper = np.triu(rng.random((n, n)) < p, k=1)
    return (upper | upper.T).astype(np.uint8)


def iter_stream(spec: ScenarioSpec, seed: Optional[int] = None) -> Iterator[AdjacencySnapshot]:
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    before, after = _graphons(spec)
    for t in range(1, spec.horizon + 1):
        p = before if spec.delta is None or t <= spec.delta else after
        yield AdjacencySnapshot(sample_adjacency(p, rng), t)


def sample_stream(spec: ScenarioSpec, seed: Optional[int] = None) -> tuple[Iterator[AdjacencySnapshot], ChangeScenario]:
    """Lazy stream of ``spec.horizon`` snapshots plus its ground truth."""
    return iter_stream(spec, seed), change_scenario(spec)
