"""Universal singular value thresholding for symmetric matrices.

The eigendecomposition is a cyclic Jacobi solver.  A LAPACK backend
(``numpy.linalg.eigh``) is selectable for the network sizes used in the
Monte Carlo experiments, where the Jacobi sweep is too slow in Python.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-12
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100

METHODS = ("jacobi", "lapack")


class EigenError(RuntimeError):
    pass


@dataclass(frozen=True)
class UsvtParams:
    tau1: float
    tau2: float = math.inf

    def __post_init__(self):
        if not self.tau1 >= 0:
            raise ValueError(f"tau1 must be nonnegative, got {self.tau1}")
        if not self.tau2 >= 0:
            raise ValueError(f"tau2 must be nonnegative, got {self.tau2}")


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenpairs sorted by descending absolute eigenvalue; ``eigenvectors[:, i]`` pairs with ``eigenvalues[i]``."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self, keep: np.ndarray | None = None) -> np.ndarray:
        lam, v = self.eigenvalues, self.eigenvectors
        if keep is not None:
            lam, v = lam[keep], v[:, keep]
        return (v * lam) @ v.T


def _check_symmetric(m: np.ndarray) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > SYMMETRY_TOL * scale:
        raise ValueError("matrix is not symmetric")
    return 0.5 * (m + m.T)


def _jacobi(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = a.shape[0]
    a = a.copy()
    v = np.eye(n)
    target = JACOBI_TOL * np.linalg.norm(a)
    for _ in range(JACOBI_MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diagonal(a)))
        if off <= target:
            return np.diagonal(a).copy(), v
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    tt = 0.5 / theta
                else:
                    tt = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(tt * tt + 1.0)
                s = tt * c
                ap, aq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                a[p, q] = a[q, p] = 0.0
                vp, vq = v[:, p].copy(), v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    raise EigenError(f"Jacobi iteration did not converge in {JACOBI_MAX_SWEEPS} sweeps")


def eigh(m: np.ndarray, method: str = "jacobi") -> EigenDecomposition:
    """Full eigendecomposition of a symmetric matrix, ordered by |eigenvalue| descending."""
    a = _check_symmetric(m)
    if method == "jacobi":
        lam, v = _jacobi(a)
    elif method == "lapack":
        lam, v = np.linalg.eigh(a)
    else:
        raise ValueError(f"unknown eigensolver {method!r}; choose from {METHODS}")
    order = np.argsort(-np.abs(lam), kind="stable")
    return EigenDecomposition(lam[order], v[:, order])


def usvt_unclipped(m: np.ndarray, tau1: float, method: str = "jacobi") -> np.ndarray:
    """Sum of the eigen-components of ``m`` with |eigenvalue| >= tau1."""
    m = np.asarray(m, dtype=float)
    if not np.any(m):
        return np.zeros_like(m)
    dec = eigh(m, method)
    keep = np.abs(dec.eigenvalues) >= tau1
    if not keep.any():
        return np.zeros_like(m)
    out = dec.reconstruct(keep)
    return 0.5 * (out + out.T)


def usvt(m: np.ndarray, p: UsvtParams, method: str = "jacobi") -> np.ndarray:
    out = usvt_unclipped(m, p.tau1, method)
    if math.isfinite(p.tau2):
        np.clip(out, -p.tau2, p.tau2, out=out)
    return out
