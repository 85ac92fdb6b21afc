import copy
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tiergae.autodiff import Tape, params_state, set_params_state, zero_grads
from tiergae.errors import ShapeMismatchError
from tiergae.fgroups import membership_from_partition, partition_molecule
from tiergae.graphs import Graph, MembershipMatrix, dense_to_coo
from tiergae.sdf import featurize
from tiergae.tgae import (
    TierModel,
    TrainConfig,
    decode_adjacency,
    decode_adjacency_numpy,
    encode_tiered,
    full_pipeline_loss,
    make_tier_models,
    next_tier_samples,
    reconstruction_loss,
    reconstruction_loss_value,
    reconstruction_target,
    tier_sample,
    train_tier,
    train_tiered,
)

from conftest import path4_adjacency, path4_features
from gradcheck import assert_grads_match, finite_difference_grads


def path4_graph() -> Graph:
    ei, ea = dense_to_coo(path4_adjacency())
    return Graph(x=path4_features(), edge_index=ei, edge_attr=ea)


def path4_items():
    m = MembershipMatrix(np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0], [0.0, 1.0]]))
    return [(path4_graph(), m)]


# ---------------------------------------------------------------- decoding


def test_decode_zero_embedding_gives_half_everywhere():
    z = np.zeros((3, 4))
    assert np.array_equal(decode_adjacency_numpy(z), np.full((3, 3), 0.5))


def test_decode_hand_computed():
    z = np.array([[1.0, 0.0], [0.0, 2.0]])
    got = decode_adjacency_numpy(z)
    expect = 1.0 / (1.0 + np.exp(-np.array([[1.0, 0.0], [0.0, 4.0]])))
    assert np.allclose(got, expect, atol=1e-15)


def test_decode_tape_matches_numpy_bitwise():
    rng = np.random.default_rng(0)
    z = rng.standard_normal((5, 3))
    tape = Tape()
    node = decode_adjacency(tape, tape.const(z))
    assert np.array_equal(tape.value(node), decode_adjacency_numpy(z))


def test_decoded_matrix_symmetric():
    rng = np.random.default_rng(1)
    z = rng.standard_normal((6, 4))
    p = decode_adjacency_numpy(z)
    assert np.allclose(p, p.T, atol=1e-15)
    assert ((p > 0) & (p < 1)).all()


# ---------------------------------------------------------------- targets


def test_target_drops_diagonal_and_collapses_channels():
    a = np.zeros((3, 3, 2))
    a[0, 0, 0] = 5.0          # within-group mass parked on the diagonal
    a[0, 1, 1] = a[1, 0, 1] = 2.0
    t = reconstruction_target(a)
    assert np.array_equal(t, np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float))


def test_target_single_node_keeps_self_loop_bit():
    assert np.array_equal(reconstruction_target(np.array([[[3.0]]])), [[1.0]])
    assert np.array_equal(reconstruction_target(np.array([[[0.0]]])), [[0.0]])


# ---------------------------------------------------------------- loss


def test_loss_at_half_has_closed_form():
    # p = 0.5 everywhere: loss = (pw * n_pos + n_neg) * ln2 / count
    #                          = 2 * n_neg * ln2 / count  when both classes exist
    target = np.array([[0, 1, 0], [1, 0, 0], [0, 0, 0]], dtype=float)
    a_hat = np.full((3, 3), 0.5)
    n_neg, count = 4.0, 6.0
    expect = 2.0 * n_neg * math.log(2.0) / count
    assert math.isclose(reconstruction_loss_value(a_hat, target), expect, rel_tol=1e-12)


def test_loss_all_positive_targets_falls_back_to_unweighted():
    target = np.ones((3, 3)) - np.eye(3)
    a_hat = np.full((3, 3), 0.25)
    # no negatives: pos_weight collapses to 1, loss = -log(0.25)
    assert math.isclose(
        reconstruction_loss_value(a_hat, target), -math.log(0.25), rel_tol=1e-12
    )


def test_loss_all_negative_targets_falls_back_to_unweighted():
    target = np.zeros((3, 3))
    a_hat = np.full((3, 3), 0.25)
    assert math.isclose(
        reconstruction_loss_value(a_hat, target), -math.log(0.75), rel_tol=1e-12
    )


def test_loss_perfect_prediction_is_tiny():
    target = np.array([[0, 1], [1, 0]], dtype=float)
    assert reconstruction_loss_value(target, target) < 1e-10


def test_loss_clamps_instead_of_overflowing():
    target = np.array([[0, 1], [1, 0]], dtype=float)
    worst = 1.0 - target  # exactly wrong, probabilities of 0 and 1
    v = reconstruction_loss_value(worst, target)
    assert np.isfinite(v) and v > 10.0


def test_loss_single_node_uses_diagonal():
    v = reconstruction_loss_value(np.array([[0.5]]), np.array([[1.0]]))
    assert math.isclose(v, math.log(2.0), rel_tol=1e-12)


def test_loss_permutation_invariant():
    rng = np.random.default_rng(7)
    z = rng.standard_normal((6, 3))
    target = np.zeros((6, 6))
    for i, j in ((0, 1), (2, 3), (4, 5), (1, 4)):
        target[i, j] = target[j, i] = 1.0
    base = reconstruction_loss_value(decode_adjacency_numpy(z), target)
    perm = rng.permutation(6)
    p = np.eye(6)[perm]
    permuted = reconstruction_loss_value(
        decode_adjacency_numpy(p @ z), p @ target @ p.T
    )
    assert math.isclose(base, permuted, rel_tol=1e-12)


def test_loss_rejects_bad_targets():
    a_hat = np.full((2, 2), 0.5)
    with pytest.raises(ValueError):
        reconstruction_loss_value(a_hat, np.array([[0.0, 0.5], [0.5, 0.0]]))
    with pytest.raises(ValueError):
        reconstruction_loss_value(a_hat, np.array([[1.0, 1.0], [1.0, 0.0]]))
    with pytest.raises(ShapeMismatchError):
        reconstruction_loss_value(a_hat, np.zeros((3, 3)))


def test_loss_gradient_against_finite_differences():
    rng = np.random.default_rng(3)
    models = make_tier_models(d_in=4, hidden=5, d_z=3, k=2, seed=11)
    model = models[0]
    s = tier_sample(path4_features(), path4_adjacency())

    def run():
        tape = Tape()
        from tiergae.gcn import encode

        z = encode(model.encoder, tape.const(s.x), tape.const(s.a_norm), tape)
        loss = reconstruction_loss(tape, decode_adjacency(tape, z), s.target)
        return tape, loss

    tape, loss = run()
    zero_grads(model.params())
    tape.backward(loss)
    analytic = [p.grad.copy() for p in model.params()]

    def loss_fn():
        t, node = run()
        return float(t.value(node))

    numeric = finite_difference_grads(loss_fn, model.params())
    assert_grads_match(analytic, numeric)


# ---------------------------------------------------------------- models


def test_make_tier_models_widths_and_names():
    models = make_tier_models(d_in=13, hidden=8, d_z=4, k=3, seed=0)
    assert [m.tier for m in models] == [1, 2, 3]
    assert models[0].encoder.layers[0].weight.value.shape == (13, 8)
    for m in models[1:]:
        assert m.encoder.layers[0].weight.value.shape == (4, 8)
    for m in models:
        assert m.encoder.layers[-1].weight.value.shape == (8, 4)
        assert all(p.name.startswith(f"tier{m.tier}.") for p in m.params())


def test_make_tier_models_deterministic_and_tier_distinct():
    a = make_tier_models(d_in=6, hidden=4, d_z=2, seed=5)
    b = make_tier_models(d_in=6, hidden=4, d_z=2, seed=5)
    for ma, mb in zip(a, b):
        for pa, pb in zip(ma.params(), mb.params()):
            assert np.array_equal(pa.value, pb.value)
    w2, w3 = a[1].encoder.layers[0].weight.value, a[2].encoder.layers[0].weight.value
    assert not np.array_equal(w2, w3)


def test_tier_model_rejects_bad_tier():
    enc = make_tier_models(d_in=3, hidden=2, d_z=2)[0].encoder
    with pytest.raises(ValueError):
        TierModel(encoder=enc, tier=4)


# ---------------------------------------------------------------- training


def test_zero_epochs_changes_nothing():
    models = make_tier_models(d_in=4, hidden=4, d_z=2, seed=1)
    before = params_state(models[0].params())
    s = tier_sample(path4_features(), path4_adjacency())
    hist = train_tier(models[0], [s], TrainConfig(epochs=0))
    assert hist == []
    after = params_state(models[0].params())
    for k in before:
        assert np.array_equal(before[k], after[k])


def test_training_descends_on_path4():
    models = make_tier_models(d_in=4, hidden=8, d_z=4, seed=42)
    s = tier_sample(path4_features(), path4_adjacency())
    hist = train_tier(models[0], [s], TrainConfig(epochs=40, lr=0.01))
    assert len(hist) == 40
    assert hist[-1] < hist[0]
    assert all(np.isfinite(v) for v in hist)


def test_training_is_deterministic():
    def run():
        models = make_tier_models(d_in=4, hidden=6, d_z=3, seed=7)
        s = tier_sample(path4_features(), path4_adjacency())
        return train_tier(models[0], [s], TrainConfig(epochs=15, lr=0.01))

    assert run() == run()


def test_train_tier_requires_samples():
    models = make_tier_models(d_in=4, hidden=4, d_z=2)
    with pytest.raises(ValueError):
        train_tier(models[0], [], TrainConfig(epochs=1))


def test_tiered_training_keeps_lower_tiers_frozen():
    # tier-1 history of the tiered run must equal a standalone tier-1 run:
    # nothing that happens above tier 1 may touch it
    items = path4_items()
    models = make_tier_models(d_in=4, hidden=6, d_z=3, seed=9)
    solo = copy.deepcopy(models[0])
    cfg = TrainConfig(epochs=10, lr=0.01)
    hist = train_tiered(models, items, cfg)
    s = tier_sample(path4_features(), path4_adjacency())
    solo_hist = train_tier(solo, [s], cfg)
    assert hist[1] == solo_hist
    for p_solo, p_tiered in zip(solo.params(), models[0].params()):
        assert np.array_equal(p_solo.value, p_tiered.value)


def test_tiered_training_returns_three_histories():
    models = make_tier_models(d_in=4, hidden=6, d_z=3, seed=2)
    hist = train_tiered(models, path4_items(), TrainConfig(epochs=5, lr=0.01))
    assert sorted(hist) == [1, 2, 3]
    for h in hist.values():
        assert len(h) == 5 and all(np.isfinite(v) for v in h)


def test_tiered_training_rejects_empty_corpus():
    models = make_tier_models(d_in=4, hidden=4, d_z=2)
    with pytest.raises(ValueError):
        train_tiered(models, [], TrainConfig(epochs=1))


def test_next_tier_samples_shapes():
    models = make_tier_models(d_in=4, hidden=6, d_z=3, seed=4)
    s = tier_sample(path4_features(), path4_adjacency())
    m = path4_items()[0][1]
    nxt = next_tier_samples(models[0], [s], [m])
    assert len(nxt) == 1
    assert nxt[0].x.shape == (2, 3)
    assert nxt[0].a.shape == (2, 2, 1)
    assert nxt[0].target.shape == (2, 2)


# ---------------------------------------------------------------- inference


def test_encode_tiered_shapes_on_vanillin(vanillin_mol):
    g = featurize(vanillin_mol)
    part = partition_molecule(vanillin_mol)
    m1 = membership_from_partition(part, g.num_nodes)
    models = make_tier_models(d_in=g.x.shape[1], hidden=8, d_z=4, seed=0)
    rep = encode_tiered(g, m1, models)
    assert len(rep.tiers) == 3
    n_groups = m1.num_groups
    assert rep.tiers[0].z.shape == (19, 4)
    assert rep.tiers[1].z.shape == (n_groups, 4)
    assert rep.tiers[2].z.shape == (1, 4)
    assert rep.tiers[0].membership.shape == (19, n_groups)
    assert rep.tiers[1].membership.shape == (n_groups, 1)
    assert rep.tiers[2].membership is None
    for t in rep.tiers:
        assert np.isfinite(t.z).all()


def test_encode_tiered_membership_shape_checked():
    models = make_tier_models(d_in=4, hidden=4, d_z=2)
    g = path4_graph()
    with pytest.raises(ShapeMismatchError):
        encode_tiered(g, MembershipMatrix(np.eye(3)), models)


def test_encode_tiered_relabel_invariant():
    # renumbering atoms permutes tier-1 embeddings and leaves the upper
    # tiers unchanged up to float roundoff
    from tiergae.graphs import permute_graph

    g = path4_graph()
    m1 = path4_items()[0][1]
    models = make_tier_models(d_in=4, hidden=6, d_z=3, seed=13)
    rep = encode_tiered(g, m1, models)

    perm = np.array([2, 0, 3, 1])
    p = np.eye(4)[perm].T  # node i moves to row perm[i]
    rep_p = encode_tiered(
        permute_graph(g, perm), MembershipMatrix(p @ m1.m), models
    )
    assert np.allclose(rep_p.tiers[0].z, p @ rep.tiers[0].z, atol=1e-12)
    assert np.allclose(rep_p.tiers[1].z, rep.tiers[1].z, atol=1e-12)
    assert np.allclose(rep_p.tiers[2].z, rep.tiers[2].z, atol=1e-12)


def test_encode_tiered_deterministic(vanillin_mol):
    g = featurize(vanillin_mol)
    m1 = membership_from_partition(partition_molecule(vanillin_mol), g.num_nodes)
    models = make_tier_models(d_in=g.x.shape[1], hidden=8, d_z=4, seed=3)
    r1 = encode_tiered(g, m1, models)
    r2 = encode_tiered(g, m1, models)
    for t1, t2 in zip(r1.tiers, r2.tiers):
        assert np.array_equal(t1.z, t2.z)


# ---------------------------------------------------------------- pipeline


def test_full_pipeline_loss_reaches_every_parameter():
    models = make_tier_models(d_in=4, hidden=5, d_z=3, seed=21)
    m1 = path4_items()[0][1]
    tape = Tape()
    loss = full_pipeline_loss(models, path4_features(), path4_adjacency(), m1, tape)
    assert np.isfinite(tape.value(loss))
    all_params = [p for m in models for p in m.params()]
    zero_grads(all_params)
    tape.backward(loss)
    for p in all_params:
        assert p.grad.shape == p.value.shape
        if p.name.endswith(".weight"):
            assert np.abs(p.grad).max() > 0.0, p.name


@settings(deadline=None, max_examples=10)
@given(seed=st.integers(0, 10_000))
def test_loss_value_nonnegative(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 7))
    z = rng.standard_normal((n, 3))
    t = np.zeros((n, n))
    i, j = int(rng.integers(0, n)), int(rng.integers(0, n))
    if i != j:
        t[i, j] = t[j, i] = 1.0
    assert reconstruction_loss_value(decode_adjacency_numpy(z), t) >= 0.0
