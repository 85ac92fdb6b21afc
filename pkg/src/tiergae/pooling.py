"""Membership-driven graph coarsening between tiers.

Pooling contracts a tier's graph through a fixed binary membership matrix M:
features become M^T Z (group sums), adjacency becomes M^T A M applied per
edge-feature channel. M comes from chemistry, not from learning; no gradient
ever flows into it. Within-group edge mass lands on the diagonal of the
coarse adjacency and is kept there.

Sums are accumulated in ascending node order (i-major, then j) so results
are reproducible bit for bit across runs and refactors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ShapeMismatchError
from .graphs import MembershipMatrix, adjacency_array, dense_to_coo


@dataclass
class PoolResult:
    x_next: np.ndarray          # G x d
    a_next: np.ndarray          # G x G x s
    edge_index_next: np.ndarray
    edge_attr_next: np.ndarray


def _group_of(m: np.ndarray) -> np.ndarray:
    # row i has exactly one 1; argmax finds it
    return m.argmax(axis=1)


def pool_features(z: np.ndarray, m: MembershipMatrix) -> np.ndarray:
    """M^T Z via ordered accumulation: x_next[g] = sum of z rows in group g."""
    z = np.asarray(z, dtype=np.float64)
    if z.shape[0] != m.num_nodes:
        raise ShapeMismatchError(
            f"z has {z.shape[0]} rows, membership has {m.num_nodes}"
        )
    group = _group_of(m.m)
    out = np.zeros((m.num_groups, z.shape[1]), dtype=np.float64)
    for i in range(z.shape[0]):
        out[group[i]] += z[i]
    return out


def pool_adjacency(a, m: MembershipMatrix) -> np.ndarray:
    """Per-channel M^T A M via ordered accumulation over entries (i, j)."""
    arr = adjacency_array(a)
    if arr.shape[0] != m.num_nodes:
        raise ShapeMismatchError(
            f"adjacency is {arr.shape[0]} nodes, membership has {m.num_nodes}"
        )
    if not np.isfinite(arr).all():
        raise ValueError("adjacency contains non-finite entries")
    group = _group_of(m.m)
    n, _, s = arr.shape
    out = np.zeros((m.num_groups, m.num_groups, s), dtype=np.float64)
    for i in range(n):
        gi = group[i]
        for j in range(n):
            out[gi, group[j]] += arr[i, j]
    return out


def diff_group_pool(z: np.ndarray, a, m: MembershipMatrix) -> PoolResult:
    x_next = pool_features(z, m)
    a_next = pool_adjacency(a, m)
    edge_index, edge_attr = dense_to_coo(a_next)
    return PoolResult(x_next, a_next, edge_index, edge_attr)


def graph_tier_membership(g_count: int) -> MembershipMatrix:
    """All groups into one graph-level node: the G x 1 ones matrix."""
    if g_count < 1:
        raise ValueError(f"need at least one group, got {g_count}")
    return MembershipMatrix(np.ones((g_count, 1)), tier=2)
