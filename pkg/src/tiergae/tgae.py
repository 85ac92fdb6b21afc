"""Deterministic tiered graph autoencoder.

Three tiers: atoms, functional groups, whole molecule. Each tier has its own
GCN encoder and a sigmoid inner-product decoder sig(Z Z^T); tiers are trained
bottom-up, one at a time. Once a tier is trained its embeddings are frozen
and pooled through the membership matrix to build the next tier's inputs,
so no gradient crosses a tier boundary during training.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .autodiff import Adam, Param, Tape, seeded_rng, stable_sigmoid
from .errors import ShapeMismatchError
from .gcn import GnnEncoder, binary_collapse, encode, encode_numpy, gcn_norm, make_encoder
from .graphs import Graph, MembershipMatrix, adjacency_array, coo_to_dense
from .pooling import diff_group_pool, graph_tier_membership, pool_adjacency

SIGMOID_CLAMP = 1e-12

# rng stream roles within one (seed, tier) pair; the deterministic model and
# the mu encoder of the variational one share role 0 so their initial weights
# coincide for ablation comparisons
ENCODER_ROLE = 0
LOGSIGMA_ROLE = 1
NOISE_ROLE = 2

DEFAULT_HIDDEN = 32
DEFAULT_DZ = 16
DEFAULT_K = 2


@dataclass
class TierModel:
    encoder: GnnEncoder
    tier: int

    def __post_init__(self):
        if self.tier not in (1, 2, 3):
            raise ValueError(f"tier must be 1, 2 or 3, got {self.tier}")

    def params(self) -> list[Param]:
        return self.encoder.params()


@dataclass
class TrainConfig:
    epochs: int = 200
    lr: float = 0.01


@dataclass
class TierSample:
    """One graph prepared for one tier: features, raw and normalized
    adjacency, and the binary reconstruction target."""

    x: np.ndarray
    a: np.ndarray        # N x N x s
    a_norm: np.ndarray   # N x N
    target: np.ndarray   # N x N binary


@dataclass
class TierBundle:
    x: np.ndarray
    edge_index: np.ndarray
    edge_attr: np.ndarray
    membership: Optional[np.ndarray]
    z: np.ndarray


@dataclass
class TieredRepresentation:
    tiers: list[TierBundle] = field(default_factory=list)


def make_tier_models(d_in: int, hidden: int = DEFAULT_HIDDEN, d_z: int = DEFAULT_DZ,
                     k: int = DEFAULT_K, seed: int = 0) -> list[TierModel]:
    """Three encoders chained by width: d_in -> d_z -> d_z."""
    models = []
    for tier, width in zip((1, 2, 3), (d_in, d_z, d_z)):
        rng = seeded_rng(seed, tier, ENCODER_ROLE)
        enc = make_encoder(width, hidden, d_z, k, rng, name_prefix=f"tier{tier}.")
        models.append(TierModel(encoder=enc, tier=tier))
    return models


def decode_adjacency(tape: Tape, z: int) -> int:
    """A_hat = sigmoid(Z Z^T), recorded on the tape."""
    return tape.sigmoid(tape.matmul(z, tape.transpose(z)))


def decode_adjacency_numpy(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return stable_sigmoid(z @ z.T)


def reconstruction_target(a) -> np.ndarray:
    """Binary existence target: off-diagonal entries for N > 1.

    A 1-node graph has no off-diagonal entries, so its target degenerates to
    the single self-loop-existence bit; without this the top-tier loss would
    be a constant.
    """
    exist = binary_collapse(a)
    n = exist.shape[0]
    if n == 1:
        return exist
    return exist * (1.0 - np.eye(n))


def _loss_constants(target: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    """Fold pos_weight and the diagonal mask into two coefficient matrices.

    loss = -(sum(c1 * log p) + sum(c2 * log(1 - p))) / count
    """
    target = np.asarray(target, dtype=np.float64)
    n = target.shape[0]
    if target.shape != (n, n):
        raise ShapeMismatchError(f"target must be square, got {target.shape}")
    if not np.isin(target, (0.0, 1.0)).all():
        raise ValueError("reconstruction target must be binary")
    if n > 1:
        if np.diag(target).any():
            raise ValueError("reconstruction target must have a zero diagonal")
        mask = 1.0 - np.eye(n)
    else:
        mask = np.ones((1, 1))
    n_pos = float((target * mask).sum())
    n_neg = float(mask.sum() - n_pos)
    # either class empty: pos_weight is undefined, fall back to unweighted BCE
    pos_weight = n_neg / n_pos if n_pos > 0 and n_neg > 0 else 1.0
    c1 = pos_weight * target * mask
    c2 = (1.0 - target) * mask
    return c1, c2, float(mask.sum())


def reconstruction_loss(tape: Tape, a_hat: int, target: np.ndarray) -> int:
    """Mean BCE over masked entries, positives scaled by pos_weight."""
    va = tape.value(a_hat)
    if va.shape != np.asarray(target).shape:
        raise ShapeMismatchError(
            f"a_hat shape {va.shape} != target shape {np.asarray(target).shape}"
        )
    c1, c2, count = _loss_constants(target)
    p = tape.clip(a_hat, SIGMOID_CLAMP, 1.0 - SIGMOID_CLAMP)
    log_p = tape.log(p)
    one_minus_p = tape.add(tape.const(np.ones_like(va)), tape.scalar_mul(-1.0, p))
    log_1mp = tape.log(one_minus_p)
    pos = tape.sum(tape.elementwise_mul(tape.const(c1), log_p))
    neg = tape.sum(tape.elementwise_mul(tape.const(c2), log_1mp))
    return tape.scalar_mul(-1.0 / count, tape.add(pos, neg))


def reconstruction_loss_value(a_hat: np.ndarray, target: np.ndarray) -> float:
    tape = Tape()
    return float(tape.value(reconstruction_loss(tape, tape.const(a_hat), target)))


def tier_sample(x: np.ndarray, a) -> TierSample:
    arr = adjacency_array(a)
    return TierSample(
        x=np.asarray(x, dtype=np.float64),
        a=arr,
        a_norm=gcn_norm(binary_collapse(arr)),
        target=reconstruction_target(arr),
    )


def train_tier(model: TierModel, samples: Sequence[TierSample],
               config: TrainConfig) -> list[float]:
    """Full-batch Adam on the mean per-graph reconstruction loss."""
    if not samples:
        raise ValueError("train_tier needs at least one sample")
    opt = Adam(model.params(), lr=config.lr)
    history: list[float] = []
    for _ in range(config.epochs):
        tape = Tape()
        opt.zero_grads()
        total = None
        for s in samples:
            z = encode(model.encoder, tape.const(s.x), tape.const(s.a_norm), tape)
            a_hat = decode_adjacency(tape, z)
            loss = reconstruction_loss(tape, a_hat, s.target)
            total = loss if total is None else tape.add(total, loss)
        total = tape.scalar_mul(1.0 / len(samples), total)
        tape.backward(total)
        opt.step()
        history.append(float(tape.value(total)))
    return history


def _check_models(models: Sequence[TierModel]) -> None:
    if len(models) != 3 or [m.tier for m in models] != [1, 2, 3]:
        raise ValueError("expected models for tiers 1, 2, 3 in order")


def next_tier_samples(model: TierModel, samples: Sequence[TierSample],
                      memberships: Sequence[MembershipMatrix]) -> list[TierSample]:
    """Frozen embeddings of the given tier, pooled into next-tier samples."""
    out = []
    for s, m in zip(samples, memberships):
        z = encode_numpy(model.encoder, s.x, s.a_norm)
        pr = diff_group_pool(z, s.a, m)
        out.append(tier_sample(pr.x_next, pr.a_next))
    return out


def train_tiered(models: Sequence[TierModel],
                 items: Sequence[tuple[Graph, MembershipMatrix]],
                 config: TrainConfig) -> dict[int, list[float]]:
    """Bottom-up schedule: train a tier, freeze it, pool, move up."""
    _check_models(models)
    if not items:
        raise ValueError("empty corpus")
    t1 = [tier_sample(g.x, coo_to_dense(g).a) for g, _ in items]
    hist = {1: train_tier(models[0], t1, config)}
    t2 = next_tier_samples(models[0], t1, [m for _, m in items])
    hist[2] = train_tier(models[1], t2, config)
    t3 = next_tier_samples(
        models[1], t2, [graph_tier_membership(s.x.shape[0]) for s in t2]
    )
    hist[3] = train_tier(models[2], t3, config)
    return hist


def encode_tiered(graph: Graph, m1: MembershipMatrix,
                  models: Sequence[TierModel]) -> TieredRepresentation:
    """Inference pass through all tiers; deterministic, tape-free."""
    _check_models(models)
    if m1.num_nodes != graph.num_nodes:
        raise ShapeMismatchError(
            f"membership rows {m1.num_nodes} != node count {graph.num_nodes}"
        )
    s1 = tier_sample(graph.x, coo_to_dense(graph).a)
    z1 = encode_numpy(models[0].encoder, s1.x, s1.a_norm)
    p1 = diff_group_pool(z1, s1.a, m1)

    s2 = tier_sample(p1.x_next, p1.a_next)
    z2 = encode_numpy(models[1].encoder, s2.x, s2.a_norm)
    m2 = graph_tier_membership(m1.num_groups)
    p2 = diff_group_pool(z2, s2.a, m2)

    s3 = tier_sample(p2.x_next, p2.a_next)
    z3 = encode_numpy(models[2].encoder, s3.x, s3.a_norm)

    return TieredRepresentation(tiers=[
        TierBundle(graph.x, graph.edge_index, graph.edge_attr, m1.m, z1),
        TierBundle(p1.x_next, p1.edge_index_next, p1.edge_attr_next, m2.m, z2),
        TierBundle(p2.x_next, p2.edge_index_next, p2.edge_attr_next, None, z3),
    ])


def full_pipeline_loss(models: Sequence[TierModel], x: np.ndarray, a,
                       m1: MembershipMatrix, tape: Tape) -> int:
    """Sum of all three tier losses with pooling on the tape.

    Training never needs cross-tier gradients (lower tiers are frozen), but
    the chain is differentiable end to end; this builds it in one tape so
    a finite-difference check can exercise every parameter at once.
    """
    _check_models(models)
    arr = adjacency_array(a)
    x_node = tape.const(np.asarray(x, dtype=np.float64))
    a_cur = arr
    total = None
    for idx, model in enumerate(models):
        a_norm = gcn_norm(binary_collapse(a_cur))
        z = encode(model.encoder, x_node, tape.const(a_norm), tape)
        loss = reconstruction_loss(
            tape, decode_adjacency(tape, z), reconstruction_target(a_cur)
        )
        total = loss if total is None else tape.add(total, loss)
        if idx < 2:
            m = m1 if idx == 0 else graph_tier_membership(m1.num_groups)
            x_node = tape.matmul(tape.const(m.m.T.copy()), z)
            a_cur = pool_adjacency(a_cur, m)
    return total
