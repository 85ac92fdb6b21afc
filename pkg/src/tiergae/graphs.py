"""Graph data model: COO sparse adjacency plus dense multi-channel adjacency.

A graph holds a node feature matrix ``x`` (N x d), 0-based edge indices in
COO layout (2 x U) and a per-edge feature matrix ``edge_attr`` (U x s).
Undirected edges are stored as both directed entries. The equivalent dense
form is an N x N x s tensor with one channel per edge feature.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import (
    DuplicateEdgeError,
    EmptyGroupError,
    IndexOutOfRangeError,
    ShapeMismatchError,
)


@dataclass
class Graph:
    x: np.ndarray
    edge_index: np.ndarray
    edge_attr: np.ndarray
    pos: Optional[np.ndarray] = None
    y: Optional[np.ndarray] = None
    id: Optional[str] = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.edge_index = np.asarray(self.edge_index, dtype=np.int64)
        self.edge_attr = np.asarray(self.edge_attr, dtype=np.float64)
        if self.edge_attr.ndim == 1:
            self.edge_attr = self.edge_attr.reshape(-1, 1)
        if self.pos is not None:
            self.pos = np.asarray(self.pos, dtype=np.float64)
        if self.y is not None:
            self.y = np.asarray(self.y, dtype=np.float64)

    @property
    def num_nodes(self) -> int:
        return self.x.shape[0]

    @property
    def num_edges(self) -> int:
        return self.edge_index.shape[1]

    @property
    def num_edge_channels(self) -> int:
        return self.edge_attr.shape[1]


@dataclass
class DenseAdj:
    """Dense adjacency tensor, N x N x s; s = 1 behaves like a plain matrix."""

    a: np.ndarray

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        if self.a.ndim == 2:
            self.a = self.a[:, :, np.newaxis]
        if self.a.ndim != 3 or self.a.shape[0] != self.a.shape[1]:
            raise ShapeMismatchError(
                f"dense adjacency must be N x N x s, got shape {self.a.shape}"
            )

    @property
    def num_nodes(self) -> int:
        return self.a.shape[0]

    @property
    def num_channels(self) -> int:
        return self.a.shape[2]


@dataclass
class MembershipMatrix:
    """Binary N x G node-to-group assignment; rows are a hard partition."""

    m: np.ndarray
    tier: int = 1

    def __post_init__(self):
        self.m = np.asarray(self.m, dtype=np.float64)
        if self.m.ndim != 2:
            raise ShapeMismatchError(f"membership must be 2-D, got {self.m.shape}")
        if not np.isin(self.m, (0.0, 1.0)).all():
            raise ValueError("membership entries must be 0 or 1")
        rows = self.m.sum(axis=1)
        if not (rows == 1.0).all():
            bad = int(np.flatnonzero(rows != 1.0)[0])
            raise ValueError(f"membership row {bad} must sum to exactly 1")
        cols = self.m.sum(axis=0)
        if (cols < 1.0).any():
            bad = int(np.flatnonzero(cols < 1.0)[0])
            raise EmptyGroupError(f"membership column {bad} assigns no nodes")
        if self.tier not in (1, 2):
            raise ValueError(f"membership tier must be 1 or 2, got {self.tier}")

    @property
    def num_nodes(self) -> int:
        return self.m.shape[0]

    @property
    def num_groups(self) -> int:
        return self.m.shape[1]


@dataclass(frozen=True)
class Violation:
    """One failed graph invariant; ``kind`` is machine-checkable."""

    kind: str
    detail: str

    def __str__(self) -> str:
        return f"{self.kind}: {self.detail}"


def adjacency_array(a) -> np.ndarray:
    """Coerce a DenseAdj or a raw 2-D/3-D array to the N x N x s layout."""
    if isinstance(a, DenseAdj):
        return a.a
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    if arr.ndim != 3 or arr.shape[0] != arr.shape[1]:
        raise ShapeMismatchError(f"adjacency must be N x N x s, got {arr.shape}")
    return arr


def coo_to_dense(g: Graph) -> DenseAdj:
    """Expand the COO tuple into the dense tensor; duplicates are an error."""
    n = g.num_nodes
    u = g.num_edges
    if g.edge_index.ndim != 2 or g.edge_index.shape[0] != 2:
        raise ShapeMismatchError(f"edge_index must be 2 x U, got {g.edge_index.shape}")
    if g.edge_attr.shape[0] != u:
        raise ShapeMismatchError(
            f"edge_attr has {g.edge_attr.shape[0]} rows, expected {u}"
        )
    a = np.zeros((n, n, g.num_edge_channels), dtype=np.float64)
    seen = set()
    for e in range(u):
        i = int(g.edge_index[0, e])
        j = int(g.edge_index[1, e])
        if not (0 <= i < n and 0 <= j < n):
            raise IndexOutOfRangeError(
                f"edge {e} references node ({i}, {j}) outside [0, {n})"
            )
        if (i, j) in seen:
            raise DuplicateEdgeError(f"duplicate COO entry ({i}, {j}) at edge {e}")
        seen.add((i, j))
        a[i, j, :] = g.edge_attr[e]
    return DenseAdj(a)


def dense_to_coo(a) -> tuple[np.ndarray, np.ndarray]:
    """COO tuple of all (i, j) with any nonzero channel, in row-major order."""
    arr = adjacency_array(a)
    if not np.isfinite(arr).all():
        raise ValueError("dense adjacency contains non-finite entries")
    n, _, s = arr.shape
    pairs = [(i, j) for i in range(n) for j in range(n) if np.any(arr[i, j, :] != 0.0)]
    if not pairs:
        return np.zeros((2, 0), dtype=np.int64), np.zeros((0, s), dtype=np.float64)
    edge_index = np.array(pairs, dtype=np.int64).T
    edge_attr = np.array([arr[i, j, :] for i, j in pairs], dtype=np.float64)
    return edge_index, edge_attr


def validate(g: Graph) -> list[Violation]:
    """Check every Graph invariant; violations are returned, never raised."""
    out: list[Violation] = []
    n = g.num_nodes
    if g.x.ndim != 2:
        out.append(Violation("ShapeMismatch", f"x must be 2-D, got shape {g.x.shape}"))
        return out
    if g.edge_index.ndim != 2 or g.edge_index.shape[0] != 2:
        out.append(
            Violation("ShapeMismatch", f"edge_index must be 2 x U, got {g.edge_index.shape}")
        )
        return out
    u = g.num_edges
    if g.edge_attr.ndim != 2 or g.edge_attr.shape[0] != u:
        out.append(
            Violation(
                "ShapeMismatch",
                f"edge_attr has shape {g.edge_attr.shape}, expected ({u}, s)",
            )
        )
        return out

    entries: dict[tuple[int, int], int] = {}
    for e in range(u):
        i = int(g.edge_index[0, e])
        j = int(g.edge_index[1, e])
        if not (0 <= i < n and 0 <= j < n):
            out.append(
                Violation("IndexOutOfRange", f"edge {e} references ({i}, {j}), N={n}")
            )
            continue
        if (i, j) in entries:
            out.append(Violation("DuplicateEdge", f"entry ({i}, {j}) repeated at edge {e}"))
            continue
        entries[(i, j)] = e
    for (i, j), e in entries.items():
        rev = entries.get((j, i))
        if rev is None:
            out.append(
                Violation("MissingReverseEdge", f"({i}, {j}) present but ({j}, {i}) absent")
            )
        elif i < j and not np.array_equal(g.edge_attr[e], g.edge_attr[rev]):
            out.append(
                Violation(
                    "AsymmetricEdgeAttr",
                    f"edge features of ({i}, {j}) and ({j}, {i}) differ",
                )
            )
    return out


def permute_graph(g: Graph, perm: np.ndarray) -> Graph:
    """Relabel nodes: node i becomes perm[i]. Edge order is preserved."""
    perm = np.asarray(perm, dtype=np.int64)
    if sorted(perm.tolist()) != list(range(g.num_nodes)):
        raise ValueError("perm must be a permutation of [0, N)")
    inv = np.empty_like(perm)
    inv[perm] = np.arange(g.num_nodes)
    new_x = g.x[inv]
    new_pos = g.pos[inv] if g.pos is not None else None
    new_edge_index = perm[g.edge_index]
    return Graph(
        x=new_x,
        edge_index=new_edge_index,
        edge_attr=g.edge_attr.copy(),
        pos=new_pos,
        y=None if g.y is None else g.y.copy(),
        id=g.id,
    )
