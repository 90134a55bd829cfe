"""Snapshot stream files.

Dense format: a header line ``n T`` followed by T blocks of n lines, each
with n space-separated 0/1 tokens.

Edge-list format: lines ``t i j`` (1-based), symmetrised on load; absent
pairs are 0.  An optional ``n T`` header fixes the sizes, otherwise they are
the largest indices seen.  Lines starting with ``#`` are ignored in both.
"""

from __future__ import annotations

from typing import Iterable, Optional

import numpy as np

from .graph_core import AdjacencySnapshot


def _lines(path: str) -> list[list[str]]:
    with open(path) as fh:
        return [ln.split() for ln in fh if ln.strip() and not ln.lstrip().startswith("#")]


def _looks_dense(rows: list[list[str]]) -> bool:
    if not rows or len(rows[0]) != 2:
        return False
    n, t = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    return len(body) == n * t and all(len(r) == n for r in body)


def read_snapshots(path: str, fmt: Optional[str] = None) -> list[AdjacencySnapshot]:
    rows = _lines(path)
    if fmt is None:
        fmt = "dense" if _looks_dense(rows) else "edges"
    if fmt == "dense":
        return _parse_dense(rows)
    if fmt == "edges":
        return _parse_edges(rows)
    raise ValueError(f"unknown snapshot format {fmt!r}")


def _parse_dense(rows: list[list[str]]) -> list[AdjacencySnapshot]:
    if not rows or len(rows[0]) != 2:
        raise ValueError("dense snapshot file needs an 'n T' header")
    n, t_count = int(rows[0][0]), int(rows[0][1])
    body = rows[1:]
    if len(body) != n * t_count:
        raise ValueError(f"expected {n * t_count} matrix rows, found {len(body)}")
    if any(len(r) != n for r in body):
        raise ValueError(f"every matrix row must have {n} tokens")
    data = np.array(body, dtype=np.int64).reshape(t_count, n, n)
    return [AdjacencySnapshot(data[k], k + 1) for k in range(t_count)]


def _parse_edges(rows: list[list[str]]) -> list[AdjacencySnapshot]:
    n = t_count = None
    if rows and len(rows[0]) == 2:
        n, t_count = int(rows[0][0]), int(rows[0][1])
        rows = rows[1:]
    if any(len(r) != 3 for r in rows):
        raise ValueError("edge-list lines must have exactly three tokens 't i j'")
    triples = np.array(rows, dtype=np.int64).reshape(-1, 3)
    if triples.size and triples.min() < 1:
        raise ValueError("edge-list indices are 1-based")
    if n is None:
        if not triples.size:
            raise ValueError("empty edge list without a header")
        n = int(triples[:, 1:].max())
        t_count = int(triples[:, 0].max())
    if triples.size and (triples[:, 1:].max() > n or triples[:, 0].max() > t_count):
        raise ValueError("edge-list index exceeds the declared sizes")
    mats = np.zeros((t_count, n, n), dtype=np.uint8)
    t, i, j = triples[:, 0] - 1, triples[:, 1] - 1, triples[:, 2] - 1
    if np.any(i == j):
        raise ValueError("self-loops are not allowed")
    mats[t, i, j] = 1
    mats[t, j, i] = 1
    return [AdjacencySnapshot(mats[k], k + 1) for k in range(t_count)]


def write_snapshots(path: str, snapshots: Iterable[AdjacencySnapshot], fmt: str = "dense") -> int:
    snaps = list(snapshots)
    if not snaps:
        raise ValueError("no snapshots to write")
    n = snaps[0].n
    with open(path, "w") as fh:
        fh.write(f"{n} {len(snaps)}\n")
        if fmt == "dense":
            for s in snaps:
                for row in s.entries:
                    fh.write(" ".join("1" if x else "0" for x in row))
                    fh.write("\n")
        elif fmt == "edges":
            for k, s in enumerate(snaps, start=1):
                for i, j in zip(*np.nonzero(np.triu(s.entries, k=1))):
                    fh.write(f"{k} {i + 1} {j + 1}\n")
        else:
            raise ValueError(f"unknown snapshot format {fmt!r}")
    return len(snaps)
