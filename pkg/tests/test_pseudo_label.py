import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from semidiar.inference import generate_pseudo_labels
from semidiar.model import DiarizationModel, TrainConfig, train
from semidiar.pseudo_label import (AdaptConfig, iterative_pseudo_label, label_change,
                                   pseudo_labeled_samples, round_logs_csv, semi_supervised_adapt)
from semidiar.simulate import FeatureSequence, SimulationConfig, build_dataset, prepare_sample


@pytest.fixture(scope="module")
def data():
    raw = build_dataset(SimulationConfig(num_speakers=(1, 2), mixture_duration=10.0), 6, seed=1)
    return [prepare_sample(s, 1, 4) for s in raw]


@pytest.fixture(scope="module")
def model(data):
    m = DiarizationModel.initialize([data[0].features.dim, 8, 2], seed=0)
    return train(m, data, TrainConfig(epochs=3, batch_size=3))[0]


def same(a, b):
    return all(np.array_equal(x, y) for x, y in zip(a.parameters(), b.parameters()))


def test_zero_model_labels_everything_at_half():
    m = DiarizationModel.zeros([3, 2])
    labels = generate_pseudo_labels(m, FeatureSequence(np.ones((4, 3)), 0.2), 0.5)
    assert labels.frames.all()
    labels = generate_pseudo_labels(m, FeatureSequence(np.ones((4, 3)), 0.2), 0.999)
    assert not labels.frames.any()


def test_threshold_range_checked(model, data):
    with pytest.raises(ValueError):
        generate_pseudo_labels(model, data[0].features, 1.0)
    with pytest.raises(ValueError):
        AdaptConfig(threshold=0.0)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99))
def test_threshold_monotonicity(model, data, t1, t2):
    lo, hi = sorted((t1, t2))
    for s in data[:2]:
        a = generate_pseudo_labels(model, s.features, lo).frames
        b = generate_pseudo_labels(model, s.features, hi).frames
        assert np.all(b <= a)


def test_zero_epoch_round_leaves_model_unchanged(model, data):
    feats = [s.features for s in data]
    out, logs = iterative_pseudo_label(model, feats, AdaptConfig(rounds=1, epochs_per_round=0))
    assert same(out, model)
    assert len(logs) == 2
    assert logs[1].pseudo_label_change == 0.0 and logs[1].epochs_run == 0


def test_round_logs_have_rounds_plus_one_rows(model, data):
    feats = [s.features for s in data]
    truth = [s.annotation() for s in data]
    cfg = AdaptConfig(rounds=3, epochs_per_round=1, train=TrainConfig(batch_size=3))
    out, logs = iterative_pseudo_label(model, feats, cfg, eval_truth=truth)
    assert [l.round for l in logs] == [0, 1, 2, 3]
    assert all(0.0 <= l.pseudo_label_change <= 1.0 for l in logs)
    assert all(l.der_vs_truth is not None for l in logs)
    csv_text = round_logs_csv(logs)
    assert csv_text.splitlines()[0] == "round,epochs,mean_loss,label_change,der"
    assert len(csv_text.splitlines()) == 5
    again, _ = iterative_pseudo_label(model, feats, cfg, eval_truth=truth)
    assert same(out, again)


def test_without_truth_no_der(model, data):
    _, logs = iterative_pseudo_label(model, [s.features for s in data],
                                     AdaptConfig(rounds=1, epochs_per_round=1))
    assert all(l.der_vs_truth is None for l in logs)
    assert round_logs_csv(logs).splitlines()[1].endswith(",")


def test_label_change_fraction(model, data):
    a = [generate_pseudo_labels(model, s.features, 0.5) for s in data]
    assert label_change(a, a) == 0.0
    flipped = [replace(x, frames=1 - x.frames) for x in a]
    assert label_change(a, flipped) == 1.0


def test_semi_supervised_reductions(model, data):
    cfg = TrainConfig(epochs=2, batch_size=3, seed=4)
    labeled = data[:3]
    plain = train(model, labeled, cfg)[0]
    assert same(semi_supervised_adapt(model, labeled, [], cfg), plain)

    pl = [(s.features, generate_pseudo_labels(model, s.features, 0.5)) for s in data[3:]]
    one_pass = train(model, pseudo_labeled_samples(*zip(*pl)), cfg)[0]
    assert same(semi_supervised_adapt(model, [], pl, cfg), one_pass)
    with pytest.raises(ValueError):
        semi_supervised_adapt(model, [], [], cfg)
