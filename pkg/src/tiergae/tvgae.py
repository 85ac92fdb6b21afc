"""Variational tiered graph autoencoder.

Each tier's posterior q(z_i) = N(mu_i, diag(sigma_i^2)) is parameterized by
two independent GCNs (no weight sharing between the mu and log-sigma paths).
Training samples z = mu + exp(logsigma) * eps and minimizes the negative
ELBO: weighted BCE reconstruction plus KL against the standard normal prior.
Pooling and inference always consume mu, never samples, so tier handoff and
embedding export are deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .autodiff import Adam, Param, Tape, seeded_rng
from .errors import ShapeMismatchError
from .gcn import (
    GnnEncoder,
    binary_collapse,
    encode,
    encode_numpy,
    gcn_norm,
    make_encoder,
)
from .graphs import Graph, MembershipMatrix, adjacency_array, coo_to_dense
from .pooling import diff_group_pool, graph_tier_membership, pool_adjacency
from .tgae import (
    DEFAULT_DZ,
    DEFAULT_HIDDEN,
    DEFAULT_K,
    ENCODER_ROLE,
    LOGSIGMA_ROLE,
    NOISE_ROLE,
    TierBundle,
    TieredRepresentation,
    TierSample,
    decode_adjacency,
    reconstruction_loss,
    reconstruction_target,
    tier_sample,
)

LOGSIGMA_LIMIT = 20.0  # exp(2 * 20) is still finite in float64


@dataclass
class VariationalTierModel:
    encoder_mu: GnnEncoder
    encoder_logsigma: GnnEncoder
    tier: int

    def __post_init__(self):
        if self.tier not in (1, 2, 3):
            raise ValueError(f"tier must be 1, 2 or 3, got {self.tier}")
        same_in = self.encoder_mu.d_in == self.encoder_logsigma.d_in
        same_out = self.encoder_mu.d_out == self.encoder_logsigma.d_out
        if not (same_in and same_out):
            raise ShapeMismatchError("mu and logsigma encoders must agree on widths")

    def params(self) -> list[Param]:
        return self.encoder_mu.params() + self.encoder_logsigma.params()


@dataclass
class VariationalTrainConfig:
    epochs: int = 200
    lr: float = 0.01
    kl_weight: float = 1.0
    seed: int = 0
    # ablation hook: replace the logsigma path by this constant (tape const,
    # no gradient); kl_weight = 0 plus fixed_logsigma = -20 reduces training
    # to the deterministic model up to exp(-20)-scale sampling noise
    fixed_logsigma: Optional[float] = None


def make_variational_tier_models(d_in: int, hidden: int = DEFAULT_HIDDEN,
                                 d_z: int = DEFAULT_DZ, k: int = DEFAULT_K,
                                 seed: int = 0) -> list[VariationalTierModel]:
    """Per tier: mu encoder drawn from the same stream as the deterministic
    model's encoder (shared role), logsigma encoder from its own stream."""
    models = []
    for tier, width in zip((1, 2, 3), (d_in, d_z, d_z)):
        enc_mu = make_encoder(
            width, hidden, d_z, k,
            seeded_rng(seed, tier, ENCODER_ROLE), name_prefix=f"tier{tier}.mu.",
        )
        enc_ls = make_encoder(
            width, hidden, d_z, k,
            seeded_rng(seed, tier, LOGSIGMA_ROLE), name_prefix=f"tier{tier}.logsigma.",
        )
        models.append(VariationalTierModel(enc_mu, enc_ls, tier))
    return models


def encode_posterior(model: VariationalTierModel, x: int, a_norm: int,
                     tape: Tape) -> tuple[int, int]:
    """Two independent GCN passes; logsigma clamped to a safe range."""
    mu = encode(model.encoder_mu, x, a_norm, tape)
    logsigma = tape.clip(
        encode(model.encoder_logsigma, x, a_norm, tape),
        -LOGSIGMA_LIMIT, LOGSIGMA_LIMIT,
    )
    return mu, logsigma


def reparameterize(tape: Tape, mu: int, logsigma: int,
                   noise: Union[np.ndarray, np.random.Generator]) -> int:
    """z = mu + exp(logsigma) * eps; gradient reaches mu and logsigma only."""
    shape = tape.value(mu).shape
    if tape.value(logsigma).shape != shape:
        raise ShapeMismatchError("mu and logsigma shapes differ")
    if isinstance(noise, np.random.Generator):
        eps = noise.standard_normal(shape)
    else:
        eps = np.asarray(noise, dtype=np.float64)
        if eps.shape != shape:
            raise ShapeMismatchError(f"noise shape {eps.shape} != mu shape {shape}")
    return tape.add(mu, tape.elementwise_mul(tape.exp(logsigma), tape.const(eps)))


def kl_divergence(tape: Tape, mu: int, logsigma: int) -> int:
    """KL(q || N(0, I)) = -1/2 sum(1 + 2 ls - mu^2 - exp(2 ls)), over nodes
    and dims, divided by the node count."""
    vm = tape.value(mu)
    if tape.value(logsigma).shape != vm.shape:
        raise ShapeMismatchError("mu and logsigma shapes differ")
    n = vm.shape[0]
    ones = tape.const(np.ones_like(vm))
    two_ls = tape.scalar_mul(2.0, logsigma)
    mu_sq = tape.elementwise_mul(mu, mu)
    exp_two_ls = tape.exp(two_ls)
    inner = tape.add(tape.add(ones, two_ls),
                     tape.scalar_mul(-1.0, tape.add(mu_sq, exp_two_ls)))
    return tape.scalar_mul(-0.5 / n, tape.sum(inner))


def kl_divergence_value(mu: np.ndarray, logsigma: np.ndarray) -> float:
    tape = Tape()
    return float(tape.value(
        kl_divergence(tape, tape.const(mu), tape.const(logsigma))
    ))


def elbo_loss(tape: Tape, a_hat: int, target: np.ndarray, mu: int,
              logsigma: int, kl_weight: float = 1.0) -> int:
    """Negative ELBO. kl_weight = 0 collapses exactly to the reconstruction
    loss (the KL node is not even added) for clean ablations."""
    recon = reconstruction_loss(tape, a_hat, target)
    if kl_weight == 0.0:
        return recon
    return tape.add(recon, tape.scalar_mul(kl_weight, kl_divergence(tape, mu, logsigma)))


def train_tier_variational(model: VariationalTierModel,
                           samples: Sequence[TierSample],
                           config: VariationalTrainConfig,
                           rng: np.random.Generator) -> list[float]:
    """Full-batch Adam on the mean per-graph negative ELBO, one posterior
    sample per graph per epoch."""
    if not samples:
        raise ValueError("train_tier_variational needs at least one sample")
    opt = Adam(model.params(), lr=config.lr)
    history: list[float] = []
    for _ in range(config.epochs):
        tape = Tape()
        opt.zero_grads()
        total = None
        for s in samples:
            x = tape.const(s.x)
            an = tape.const(s.a_norm)
            mu = encode(model.encoder_mu, x, an, tape)
            if config.fixed_logsigma is None:
                logsigma = tape.clip(
                    encode(model.encoder_logsigma, x, an, tape),
                    -LOGSIGMA_LIMIT, LOGSIGMA_LIMIT,
                )
            else:
                logsigma = tape.const(
                    np.full(tape.value(mu).shape, float(config.fixed_logsigma))
                )
            z = reparameterize(tape, mu, logsigma, rng)
            a_hat = decode_adjacency(tape, z)
            loss = elbo_loss(tape, a_hat, s.target, mu, logsigma, config.kl_weight)
            total = loss if total is None else tape.add(total, loss)
        total = tape.scalar_mul(1.0 / len(samples), total)
        tape.backward(total)
        opt.step()
        history.append(float(tape.value(total)))
    return history


def _check_models(models: Sequence[VariationalTierModel]) -> None:
    if len(models) != 3 or [m.tier for m in models] != [1, 2, 3]:
        raise ValueError("expected variational models for tiers 1, 2, 3 in order")


def next_tier_samples_variational(model: VariationalTierModel,
                                  samples: Sequence[TierSample],
                                  memberships: Sequence[MembershipMatrix]) -> list[TierSample]:
    """Pool the posterior means of a trained tier into next-tier samples."""
    out = []
    for s, m in zip(samples, memberships):
        mu = encode_numpy(model.encoder_mu, s.x, s.a_norm)
        pr = diff_group_pool(mu, s.a, m)
        out.append(tier_sample(pr.x_next, pr.a_next))
    return out


def train_tiered_variational(models: Sequence[VariationalTierModel],
                             items: Sequence[tuple[Graph, MembershipMatrix]],
                             config: VariationalTrainConfig) -> dict[int, list[float]]:
    _check_models(models)
    if not items:
        raise ValueError("empty corpus")
    t1 = [tier_sample(g.x, coo_to_dense(g).a) for g, _ in items]
    hist = {1: train_tier_variational(
        models[0], t1, config, seeded_rng(config.seed, 1, NOISE_ROLE))}
    t2 = next_tier_samples_variational(models[0], t1, [m for _, m in items])
    hist[2] = train_tier_variational(
        models[1], t2, config, seeded_rng(config.seed, 2, NOISE_ROLE))
    t3 = next_tier_samples_variational(
        models[1], t2, [graph_tier_membership(s.x.shape[0]) for s in t2]
    )
    hist[3] = train_tier_variational(
        models[2], t3, config, seeded_rng(config.seed, 3, NOISE_ROLE))
    return hist


def encode_tiered_variational(graph: Graph, m1: MembershipMatrix,
                              models: Sequence[VariationalTierModel]) -> TieredRepresentation:
    """Mu-mode inference: z_t = mu_t everywhere, no sampling, no rng."""
    _check_models(models)
    if m1.num_nodes != graph.num_nodes:
        raise ShapeMismatchError(
            f"membership rows {m1.num_nodes} != node count {graph.num_nodes}"
        )
    s1 = tier_sample(graph.x, coo_to_dense(graph).a)
    mu1 = encode_numpy(models[0].encoder_mu, s1.x, s1.a_norm)
    p1 = diff_group_pool(mu1, s1.a, m1)

    s2 = tier_sample(p1.x_next, p1.a_next)
    mu2 = encode_numpy(models[1].encoder_mu, s2.x, s2.a_norm)
    m2 = graph_tier_membership(m1.num_groups)
    p2 = diff_group_pool(mu2, s2.a, m2)

    s3 = tier_sample(p2.x_next, p2.a_next)
    mu3 = encode_numpy(models[2].encoder_mu, s3.x, s3.a_norm)

    return TieredRepresentation(tiers=[
        TierBundle(graph.x, graph.edge_index, graph.edge_attr, m1.m, mu1),
        TierBundle(p1.x_next, p1.edge_index_next, p1.edge_attr_next, m2.m, mu2),
        TierBundle(p2.x_next, p2.edge_index_next, p2.edge_attr_next, None, mu3),
    ])


def full_pipeline_loss_variational(models: Sequence[VariationalTierModel],
                                   x: np.ndarray, a, m1: MembershipMatrix,
                                   tape: Tape, noises: Sequence[np.ndarray],
                                   kl_weight: float = 1.0) -> int:
    """Three-tier negative ELBO with fixed per-tier noise, pooling on tape.

    Exists for end-to-end gradient verification; training proper never
    differentiates across tier boundaries.
    """
    _check_models(models)
    if len(noises) != 3:
        raise ValueError("need one noise array per tier")
    arr = adjacency_array(a)
    x_node = tape.const(np.asarray(x, dtype=np.float64))
    a_cur = arr
    total = None
    for idx, model in enumerate(models):
        a_norm = tape.const(gcn_norm(binary_collapse(a_cur)))
        mu, logsigma = encode_posterior(model, x_node, a_norm, tape)
        z = reparameterize(tape, mu, logsigma, noises[idx])
        loss = elbo_loss(
            tape, decode_adjacency(tape, z), reconstruction_target(a_cur),
            mu, logsigma, kl_weight,
        )
        total = loss if total is None else tape.add(total, loss)
        if idx < 2:
            m = m1 if idx == 0 else graph_tier_membership(m1.num_groups)
            x_node = tape.matmul(tape.const(m.m.T.copy()), mu)
            a_cur = pool_adjacency(a_cur, m)
    return total
