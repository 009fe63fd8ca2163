import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from semidiar.labels import FrameLabelMatrix
from semidiar.model import (BCE_EPS, DiarizationModel, TrainConfig, backward, bce, forward,
                            load_model, mean_pit_loss, pit_loss, pit_loss_assignment, save_model,
                            train)
from semidiar.simulate import FeatureSequence, MixtureSample

from oracles import brute_force_pit, finite_difference_gradient


def feats(x, fp=0.2):
    return FeatureSequence(np.asarray(x, float), fp)


@st.composite
def pit_instances(draw, max_s=6, max_t=20):
    S = draw(st.integers(1, max_s))
    T = draw(st.integers(1, max_t))
    seed = draw(st.integers(0, 2**31))
    rng = np.random.default_rng(seed)
    return rng.uniform(0.001, 0.999, (T, S)), rng.integers(0, 2, (T, S))


# --- forward -------------------------------------------------------------------------

def test_zero_model_gives_half():
    post = forward(DiarizationModel.zeros([3, 4, 2]), feats(np.ones((5, 3))))
    assert np.all(post.frames == 0.5)


def test_empty_input():
    post = forward(DiarizationModel.initialize([3, 4, 2]), feats(np.zeros((0, 3))))
    assert post.frames.shape == (0, 2)


def test_forward_is_deterministic():
    x = feats(np.random.default_rng(0).standard_normal((10, 3)))
    a = forward(DiarizationModel.initialize([3, 8, 2], seed=5), x).frames
    b = forward(DiarizationModel.initialize([3, 8, 2], seed=5), x).frames
    assert np.array_equal(a, b)


def test_layer_shape_validation():
    with pytest.raises(ValueError):
        DiarizationModel([np.zeros((3, 4)), np.zeros((5, 2))], [np.zeros(4), np.zeros(2)])


# --- PIT loss ---------------------------------------------------------------------------

def test_single_frame_single_speaker():
    loss, perm = pit_loss(np.array([[0.5]]), np.array([[1]]))
    assert loss == pytest.approx(math.log(2))
    assert perm == (0,)


def test_two_speaker_enumeration():
    p = np.array([[0.9, 0.2], [0.8, 0.1]])
    y = np.array([[0, 1], [0, 1]])
    ident = -(math.log(0.1) + math.log(0.2) + math.log(0.2) + math.log(0.1))
    swap = -(math.log(0.9) + math.log(0.8) + math.log(0.8) + math.log(0.9))
    loss, perm = pit_loss(p, y)
    assert loss == pytest.approx(min(ident, swap) / 4)
    assert perm == (1, 0)


def test_column_permutation_of_labels():
    rng = np.random.default_rng(3)
    p = rng.uniform(0.05, 0.95, (12, 3))
    y = rng.integers(0, 2, (12, 3))
    loss, perm = pit_loss(p, y)
    sigma = [2, 0, 1]
    loss2, perm2 = pit_loss(p, y[:, sigma])
    assert loss2 == pytest.approx(loss, abs=1e-12)
    # slot i used column perm[i] of y; column c of y sits at position sigma.index(c)
    assert perm2 == tuple(sigma.index(c) for c in perm)


def test_diagonal_dominant_gives_identity():
    y = np.eye(4, dtype=int)[np.arange(20) % 4]
    p = np.clip(y, 0.05, 0.95)
    assert pit_loss_assignment(p, y)[1] == (0, 1, 2, 3)


def test_tied_permutations_same_loss():
    # slots 1 and 2 are identical, so two permutations tie
    p = np.array([[0.9, 0.3, 0.3], [0.2, 0.6, 0.6]])
    y = np.array([[1, 0, 1], [0, 1, 0]])
    assert pit_loss_assignment(p, y)[0] == pytest.approx(pit_loss(p, y)[0], abs=1e-12)


def test_labels_are_zero_padded():
    p = np.full((4, 3), 0.5)
    loss, _ = pit_loss(p, np.ones((4, 1)))
    assert loss == pytest.approx(math.log(2))
    with pytest.raises(ValueError):
        pit_loss(np.full((4, 1), 0.5), np.ones((4, 2)))


def test_bce_is_clamped():
    assert np.isfinite(bce(np.array([0.0, 1.0]), np.array([1.0, 0.0]))).all()
    assert bce(np.array([0.0]), np.array([1.0]))[0] == pytest.approx(-math.log(BCE_EPS))


@settings(max_examples=100, deadline=None)
@given(pit_instances())
def test_assignment_equals_brute_force(inst):
    p, y = inst
    exact = pit_loss(p, y)[0]
    assert pit_loss_assignment(p, y)[0] == pytest.approx(exact, abs=1e-10)
    assert exact == pytest.approx(brute_force_pit(p, y), abs=1e-10)


@settings(max_examples=60, deadline=None)
@given(pit_instances(max_s=5))
def test_pit_at_most_identity_loss(inst):
    p, y = inst
    assert pit_loss(p, y)[0] <= bce(p, y).mean() + 1e-12


@settings(max_examples=60, deadline=None)
@given(pit_instances(max_s=5), st.randoms(use_true_random=False))
def test_joint_permutation_invariance(inst, rnd):
    p, y = inst
    order = list(range(p.shape[1]))
    rnd.shuffle(order)
    assert pit_loss(p[:, order], y[:, order])[0] == pytest.approx(pit_loss(p, y)[0], abs=1e-12)


@given(pit_instances(max_s=4))
def test_loss_near_zero_at_clamped_truth(inst):
    _, y = inst
    p = np.clip(y.astype(float), 1e-4, 1 - 1e-4)
    assert 0 <= pit_loss(p, y)[0] < 0.01


# --- gradients -----------------------------------------------------------------------------

def test_output_bias_gradient_at_zero_parameters():
    model = DiarizationModel.zeros([3, 4, 2])
    y = np.array([[1, 0], [0, 1], [1, 0], [0, 1]])
    grads = backward(model, feats(np.ones((4, 3))), y)
    phi_y = y  # identity is optimal under ties
    expected = (0.5 - phi_y).mean(axis=0) / 2  # divided by S from the 1/(S*T) factor
    assert np.allclose(grads[-1], expected)


def test_zero_length_gradient():
    model = DiarizationModel.initialize([3, 4, 2])
    grads = backward(model, feats(np.zeros((0, 3))), np.zeros((0, 2)))
    assert all(np.all(g == 0) for g in grads)


def _relative_error(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)


@pytest.mark.parametrize("seed", range(5))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    dims = [3, 5, 4, 2]
    model = DiarizationModel.initialize(dims, seed=seed)
    for b in model.biases:
        b += rng.normal(0, 0.1, b.shape)
    x = feats(rng.standard_normal((7, 3)))
    y = rng.integers(0, 2, (7, 2))
    analytic = backward(model, x, y)
    numeric = finite_difference_gradient(lambda: pit_loss(forward(model, x), y)[0],
                                         model.parameters())
    for a, n in zip(analytic, numeric):
        assert np.all(_relative_error(a, n) < 1e-4)


# --- training --------------------------------------------------------------------------------

def _toy_dataset(n, seed=0):
    rng = np.random.default_rng(seed)
    emb = np.array([[2.0, 0.0], [0.0, 2.0]])
    out = []
    for i in range(n):
        y = rng.integers(0, 2, (20, 2)).astype(np.uint8)
        x = y @ emb + rng.normal(0, 0.1, (20, 2))
        out.append(MixtureSample(feats(x), FrameLabelMatrix(y, 0.2, ("a", "b")), f"t{i}", 2))
    return out


def test_zero_epochs_is_a_no_op():
    model = DiarizationModel.initialize([2, 4, 2])
    trained, curve = train(model, _toy_dataset(3), TrainConfig(epochs=0))
    assert curve == []
    assert all(np.array_equal(a, b) for a, b in zip(model.parameters(), trained.parameters()))


def test_training_reduces_loss_and_is_reproducible():
    data = _toy_dataset(16)
    model = DiarizationModel.initialize([2, 8, 2], seed=1)
    cfg = TrainConfig(epochs=15, learning_rate=1e-2, batch_size=4, seed=2)
    a, curve = train(model, data, cfg)
    b, curve2 = train(model, data, cfg)
    assert curve == curve2
    assert curve[-1] < 0.5 * curve[0]
    assert mean_pit_loss(a, data) == mean_pit_loss(b, data)


def test_train_rejects_empty_dataset():
    with pytest.raises(ValueError):
        train(DiarizationModel.initialize([2, 2]), [], TrainConfig())


def test_checkpoint_round_trip(tmp_path):
    model = DiarizationModel.initialize([3, 5, 2], seed=9)
    save_model(model, tmp_path / "m.model")
    back = load_model(tmp_path / "m.model")
    assert all(np.array_equal(a, b) for a, b in zip(model.parameters(), back.parameters()))
    save_model(back, tmp_path / "n.model")
    assert (tmp_path / "m.model").read_bytes() == (tmp_path / "n.model").read_bytes()


def test_bad_checkpoint_header(tmp_path):
    (tmp_path / "x").write_text("nope\n")
    with pytest.raises(ValueError):
        load_model(tmp_path / "x")
