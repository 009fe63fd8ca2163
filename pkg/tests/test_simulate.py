import numpy as np
import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from semidiar.harness.config import default_simulation
from semidiar.labels import FrameLabelMatrix
from semidiar.simulate import (FeatureSequence, SimulationConfig, build_dataset, dataset_stats,
                               overlap_ratio, prepare_sample, read_dataset, read_sample,
                               simulate_mixture, stack_and_subsample, write_sample)


def test_noiseless_single_speaker_features_are_its_embedding():
    cfg = SimulationConfig(num_speakers=(1, 1), noise_std=0.0)
    s = simulate_mixture(cfg, seed=4)
    active = s.labels.frames[:, 0] == 1
    assert active.any() and (~active).any()
    rows = s.features.frames[active]
    assert np.array_equal(rows, np.repeat(rows[:1], len(rows), axis=0))
    assert np.all(s.features.frames[~active] == 0)


def test_same_seed_is_bit_identical():
    cfg = SimulationConfig()
    a, b = simulate_mixture(cfg, 11), simulate_mixture(cfg, 11)
    assert np.array_equal(a.features.frames, b.features.frames)
    assert a.labels == b.labels


def test_domain_shift_is_an_offset():
    cfg = SimulationConfig(noise_std=0.0)
    shifted = replace(cfg, domain_shift=(0.5,))
    a, b = simulate_mixture(cfg, 3), simulate_mixture(shifted, 3)
    assert np.allclose(b.features.frames - a.features.frames, 0.5)


def test_every_speaker_speaks():
    cfg = SimulationConfig(num_speakers=(4, 4), speech_mean_duration=0.5,
                           silence_mean_duration=50.0)
    for seed in range(10):
        assert simulate_mixture(cfg, seed).labels.frames.sum(axis=0).min() > 0


def test_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(num_speakers=(3, 2))
    with pytest.raises(ValueError):
        SimulationConfig(num_speakers=(1, 5))
    with pytest.raises(ValueError):
        SimulationConfig(overlap_bias=1.0)
    with pytest.raises(ValueError):
        SimulationConfig(domain_shift=(1.0, 2.0))


def test_overlap_ratio_examples():
    assert overlap_ratio(FrameLabelMatrix(np.ones((10, 1)), 0.01)) == 0.0
    assert overlap_ratio(FrameLabelMatrix(np.ones((10, 2)), 0.01)) == 1.0
    x = np.zeros((150, 2))
    x[0:100, 0] = 1
    x[50:150, 1] = 1
    assert overlap_ratio(FrameLabelMatrix(x, 0.01)) == pytest.approx(50 / 150)
    with pytest.raises(ValueError):
        overlap_ratio(FrameLabelMatrix(np.zeros((5, 2)), 0.01))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 4))
def test_overlap_ratio_bounds(seed, hi):
    s = simulate_mixture(SimulationConfig(num_speakers=(1, hi)), seed)
    r = overlap_ratio(s.labels)
    assert 0.0 <= r <= 1.0
    if hi == 1:
        assert r == 0.0


def test_build_dataset_singleton_and_stability():
    cfg = SimulationConfig()
    (one,) = build_dataset(cfg, 1, seed=5)
    ref = simulate_mixture(cfg, 5, one.recording_id)
    assert np.array_equal(one.features.frames, ref.features.frames)
    h1 = dataset_stats(build_dataset(cfg, 100, seed=9))["speaker_histogram"]
    h2 = dataset_stats(build_dataset(cfg, 100, seed=9))["speaker_histogram"]
    assert h1 == h2


@pytest.mark.parametrize("split, target", [("train", 0.297), ("adapt", 0.170)])
def test_calibrated_overlap(split, target):
    cfg = default_simulation()[split]
    n = 1000 if split == "train" else 400
    stats = dataset_stats(build_dataset(cfg, n, seed=123))
    assert abs(stats["overlap_ratio"] - target) <= 0.05


def test_stacking_identity():
    x = FeatureSequence(np.arange(12.0).reshape(6, 2), 0.05)
    y = stack_and_subsample(x, 0, 1)
    assert np.array_equal(y.frames, x.frames) and y.frame_period == 0.05


def test_subsampling_length():
    x = FeatureSequence(np.zeros((100, 3)), 0.01)
    assert stack_and_subsample(x, 2, 20).num_frames == 5


def test_edge_replication():
    f = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
    out = stack_and_subsample(FeatureSequence(f, 0.05), 1, 1).frames
    assert out[0].tolist() == [1.0, 2.0, 1.0, 2.0, 3.0, 4.0]
    assert out[2].tolist() == [3.0, 4.0, 5.0, 6.0, 5.0, 6.0]


def test_prepare_sample_keeps_frames_aligned():
    s = simulate_mixture(SimulationConfig(), 2)
    p = prepare_sample(s, 4, 4)
    assert p.features.num_frames == p.labels.num_frames == (s.labels.num_frames + 3) // 4
    assert np.array_equal(p.labels.frames, s.labels.frames[::4])
    assert p.features.dim == 9 * s.features.dim


@pytest.mark.parametrize("split", ["train", "adapt"])
def test_linear_probe_learnability(split):
    # with noise at 0.3 x embedding scale each speaker is linearly detectable
    cfg = replace(default_simulation()[split], noise_std=0.3)
    train = build_dataset(cfg, 40, seed=0)
    held = build_dataset(cfg, 20, seed=1000)

    def design(samples):
        x = np.concatenate([s.features.frames for s in samples])
        return np.hstack([x, np.ones((len(x), 1))])

    def targets(samples):
        # column v = voice v of the inventory active
        out = []
        for s in samples:
            y = np.zeros((s.labels.num_frames, cfg.inventory_size))
            for j, spk in enumerate(s.labels.speaker_ids):
                y[:, int(spk[3:])] = s.labels.frames[:, j]
            out.append(y)
        return np.concatenate(out)

    w, *_ = np.linalg.lstsq(design(train), targets(train), rcond=None)
    pred = design(held) @ w > 0.5
    accuracy = (pred == targets(held).astype(bool)).mean()
    assert accuracy >= 0.90


def test_dsf_round_trip_and_byte_stability(tmp_path):
    s = simulate_mixture(SimulationConfig(num_speakers=(2, 3)), 8, "rec_a")
    path = write_sample(s, tmp_path / "a")
    back = read_sample(path)
    assert np.array_equal(back.features.frames, s.features.frames)
    assert back.labels == s.labels
    assert back.recording_id == "rec_a" and back.num_speakers == s.num_speakers
    write_sample(back, tmp_path / "b")
    for name in ("rec_a.dsf", "rec_a.rttm"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert len(read_dataset(tmp_path / "a")) == 1


def test_read_rejects_other_formats(tmp_path):
    (tmp_path / "x.dsf").write_text("HELLO 1 2 3 4\n")
    with pytest.raises(ValueError):
        read_sample(tmp_path / "x.dsf")
    with pytest.raises(FileNotFoundError):
        read_dataset(tmp_path / "empty")
