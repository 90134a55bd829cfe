"""Least-squares block-model fit of a symmetric matrix and the detector built on it.

For a label map z: {0..n-1} -> {0..r0-1} and an r0 x r0 matrix q the objective is

    L(q, z) = sum over ordered pairs i != j of (m[i, j] - q[z[i], z[j]])^2.

For fixed z the minimiser q is the blockwise mean of the off-diagonal cells,
so only the labels need to be searched.  Exhaustive search enumerates all
r0^n label maps; the alternating search is a local method with restarts.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .graph_core import AdjacencySnapshot
from .usvt import eigh

EXHAUSTIVE_CAP = 2_000_000
_CHUNK = 8192


@dataclass(frozen=True)
class BlockAssignment:
    z: tuple[int, ...]
    r0: int

    def __post_init__(self):
        if self.r0 < 1:
            raise ValueError(f"r0 must be >= 1, got {self.r0}")
        bad = [a for a in self.z if not 0 <= a < self.r0]
        if bad:
            raise ValueError(f"labels {bad} outside [0, {self.r0})")

    @property
    def n(self) -> int:
        return len(self.z)

    def one_hot(self) -> np.ndarray:
        out = np.zeros((self.n, self.r0))
        out[np.arange(self.n), list(self.z)] = 1.0
        return out


@dataclass(frozen=True)
class BlockFit:
    q: np.ndarray
    assignment: BlockAssignment
    loss: float
    fitted: np.ndarray


def _offdiag(m: np.ndarray) -> np.ndarray:
    m = np.array(m, dtype=float)
    np.fill_diagonal(m, 0.0)
    return m


def block_loss(m: np.ndarray, q: np.ndarray, z: BlockAssignment) -> float:
    m = np.asarray(m, dtype=float)
    q = np.asarray(q, dtype=float)
    if m.shape != (z.n, z.n):
        raise ValueError(f"matrix shape {m.shape} does not match {z.n} labels")
    if q.shape != (z.r0, z.r0):
        raise ValueError(f"q must be {z.r0} x {z.r0}, got {q.shape}")
    labels = np.asarray(z.z)
    resid = m - q[np.ix_(labels, labels)]
    np.fill_diagonal(resid, 0.0)
    return float(np.sum(resid * resid))


def block_means(m: np.ndarray, z: BlockAssignment) -> np.ndarray:
    """Optimal q for fixed labels; an empty block gets 0."""
    onehot = z.one_hot()
    sums = onehot.T @ _offdiag(m) @ onehot
    sizes = onehot.sum(axis=0)
    counts = np.outer(sizes, sizes) - np.diag(sizes)
    q = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return 0.5 * (q + q.T)


def fitted_matrix(q: np.ndarray, z: BlockAssignment) -> np.ndarray:
    labels = np.asarray(z.z)
    out = np.array(q[np.ix_(labels, labels)], dtype=float)
    np.fill_diagonal(out, 0.0)
    return out


def _fit_for(m: np.ndarray, z: BlockAssignment) -> BlockFit:
    q = block_means(m, z)
    return BlockFit(q, z, block_loss(m, q, z), fitted_matrix(q, z))


def _exhaustive(m: np.ndarray, r0: int) -> BlockAssignment:
    n = m.shape[0]
    m0 = _offdiag(m)
    best_gain, best_z = -np.inf, None
    labels = itertools.product(range(r0), repeat=n)
    eye = np.eye(r0)
    # minimising the loss is maximising sum_ab S_ab^2 / N_ab
    while True:
        chunk = np.array(list(itertools.islice(labels, _CHUNK)), dtype=np.intp)
        if chunk.size == 0:
            break
        onehot = eye[chunk]
        sums = np.einsum("kia,ij,kjb->kab", onehot, m0, onehot)
        sizes = onehot.sum(axis=1)
        counts = sizes[:, :, None] * sizes[:, None, :] - sizes[:, :, None] * eye
        gain = np.divide(sums * sums, counts, out=np.zeros_like(sums), where=counts > 0).sum(axis=(1, 2))
        k = int(np.argmax(gain))
        if gain[k] > best_gain:
            best_gain, best_z = gain[k], tuple(int(a) for a in chunk[k])
    return BlockAssignment(best_z, r0)


def _spectral_labels(m: np.ndarray, r0: int, eig_method: str) -> np.ndarray:
    n = m.shape[0]
    if r0 == 1:
        return np.zeros(n, dtype=np.intp)
    k = max(1, int(np.ceil(np.log2(r0))))
    dec = eigh(m, eig_method)
    bits = (dec.eigenvectors[:, :k] >= 0).astype(np.intp)
    code = bits @ (1 << np.arange(k))
    return code % r0


def _local_search(m0: np.ndarray, labels: np.ndarray, r0: int, max_iters: int) -> np.ndarray:
    n = m0.shape[0]
    offmask = ~np.eye(n, dtype=bool)
    for _ in range(max_iters):
        q = block_means(m0, BlockAssignment(tuple(labels.tolist()), r0))
        changed = False
        for i in range(n):
            others = offmask[i]
            # cost of label a for node i: row and column terms, 2 * sum_j (m_ij - q[a, z_j])^2
            resid = m0[i, others][None, :] - q[:, labels[others]]
            cost = np.sum(resid * resid, axis=1)
            a = int(np.argmin(cost))
            if cost[a] < cost[labels[i]] and a != labels[i]:
                labels[i] = a
                changed = True
        if not changed:
            break
    return labels


def parse_strategy(strategy: str) -> tuple[str, int, int]:
    """``"exhaustive"`` or ``"alt:<restarts>,<iters>"`` (``"alt"`` alone means 10 restarts, 100 iterations)."""
    if strategy == "exhaustive":
        return "exhaustive", 0, 0
    if strategy in ("alt", "alternating"):
        return "alternating", 10, 100
    match = re.fullmatch(r"alt(?:ernating)?:(\d+),(\d+)", strategy)
    if not match:
        raise ValueError(f"unknown strategy {strategy!r}")
    restarts, iters = int(match.group(1)), int(match.group(2))
    if restarts < 1 or iters < 1:
        raise ValueError("restarts and iterations must be positive")
    return "alternating", restarts, iters


def np_fit(
    m: np.ndarray,
    r0: int,
    strategy: str = "exhaustive",
    eig_method: str = "jacobi",
    seed: int = 0,
) -> BlockFit:
    """Least-squares block-model fit with ``r0`` blocks; the fitted matrix has a zero diagonal."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    if r0 < 1:
        raise ValueError(f"r0 must be >= 1, got {r0}")
    n = m.shape[0]
    kind, restarts, iters = parse_strategy(strategy)
    if r0 >= n:
        return _fit_for(m, BlockAssignment(tuple(range(n)), r0))
    if kind == "exhaustive":
        if r0**n > EXHAUSTIVE_CAP:
            raise ValueError(f"exhaustive search over {r0}^{n} label maps exceeds the cap {EXHAUSTIVE_CAP}")
        return _fit_for(m, _exhaustive(m, r0))

    m0 = _offdiag(m)
    rng = np.random.default_rng(seed)
    best = None
    for k in range(restarts):
        if k == 0:
            start = _spectral_labels(0.5 * (m0 + m0.T), r0, eig_method)
        else:
            start = rng.integers(0, r0, size=n)
        labels = _local_search(m0, start.astype(np.intp), r0, iters)
        fit = _fit_for(m, BlockAssignment(tuple(int(a) for a in labels), r0))
        if best is None or fit.loss < best.loss:
            best = fit
    return best


def np_run(source: Iterable[AdjacencySnapshot], cfg, r0: Optional[int] = None, strategy: Optional[str] = None):
    """Detector with the block-model fit in place of USVT."""
    from .detector import run

    return run(source, _np_config(cfg, r0, strategy))


def np_run_multi(source: Iterable[AdjacencySnapshot], cfg, r0: Optional[int] = None, strategy: Optional[str] = None):
    from .detector import run_multi

    return run_multi(source, _np_config(cfg, r0, strategy))


def np_step(streams, cfg, a_new, b_new=None, r0: Optional[int] = None, strategy: Optional[str] = None):
    from .detector import step

    return step(streams, _np_config(cfg, r0, strategy), a_new, b_new)


def _np_config(cfg, r0, strategy):
    changes = {"estimator": "np"}
    if r0 is not None:
        changes["r0"] = r0
    if strategy is not None:
        parse_strategy(strategy)
        changes["np_strategy"] = strategy
    return cfg.replace(**changes)
