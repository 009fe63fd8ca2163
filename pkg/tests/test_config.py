import pytest
from dataclasses import replace
from hypothesis import given, settings
from hypothesis import strategies as st

from semidiar.harness.config import (SPLIT_SEED_OFFSETS, ConfigError, ExperimentConfig,
                                     apply_setting, dump_config, load_config, parse_config_text)


def test_split_seeds_use_fixed_offsets():
    cfg = replace(ExperimentConfig(), master_seed=7)
    assert [cfg.split_seed(s) for s in ("train", "adapt", "test")] == [7, 1_000_007, 2_000_007]
    assert SPLIT_SEED_OFFSETS == {"train": 0, "adapt": 10**6, "test": 2 * 10**6}


def test_dotted_keys():
    text = """
    # comment
    adapt.rounds = 3
    adapt.train.learning_rate = 0.002
    simulation.test.n = 12
    simulation.adapt.num_speakers = 2-3
    simulation.train.domain_shift = 0.1, -0.2, 0.3, 0, 0, 0, 0, 0.5
    model.hidden = 32,16
    vote.weighting = rank
    scoring.collar = 0.0
    master_seed = 4
    """
    cfg = parse_config_text(text)
    assert cfg.adapt.rounds == 3
    assert cfg.adapt.train.learning_rate == 0.002
    assert cfg.split_sizes["test"] == 12
    assert cfg.simulation["adapt"].num_speakers == (2, 3)
    assert cfg.simulation["train"].domain_shift[1] == -0.2
    assert cfg.hidden == (32, 16)
    assert cfg.layer_dims() == [8 * 9, 32, 16, 4]
    assert cfg.vote.weighting == "rank"
    assert cfg.collar == 0.0
    assert cfg.master_seed == 4


@pytest.mark.parametrize("line", [
    "adapt.nonsense = 1", "nope = 3", "simulation.valid.n = 3", "adapt.rounds = many",
    "adapt.rounds = 0", "vote.weighting = loud", "simulation.train.n = 0", "just text"])
def test_bad_lines(line):
    with pytest.raises(ConfigError):
        parse_config_text(line)


def test_missing_file():
    with pytest.raises(ConfigError, match="not found"):
        load_config("/nonexistent/cfg.txt")


def test_overrides_apply_after_file(tmp_path):
    path = tmp_path / "c.txt"
    path.write_text("adapt.rounds = 2\n")
    cfg = load_config(path, ["adapt.rounds=4", "committee.epochs_per_round=3"])
    assert cfg.adapt.rounds == 4 and cfg.committee.epochs_per_round == 3
    with pytest.raises(ConfigError):
        load_config(None, ["adapt.rounds"])


def test_dump_round_trips_defaults():
    cfg = ExperimentConfig()
    assert parse_config_text(dump_config(cfg)) == cfg


@settings(max_examples=40)
@given(st.integers(1, 9), st.floats(1e-5, 1e-1), st.integers(0, 10**6),
       st.sampled_from(["uniform", "rank", "member"]), st.integers(1, 4))
def test_dump_round_trips_random_settings(rounds, lr, seed, weighting, lo):
    cfg = ExperimentConfig()
    for key, value in [("adapt.rounds", rounds), ("adapt.train.learning_rate", repr(lr)),
                       ("master_seed", seed), ("vote.weighting", weighting),
                       ("simulation.test.num_speakers", f"{lo}-4")]:
        cfg = apply_setting(cfg, key, str(value))
    assert parse_config_text(dump_config(cfg)) == cfg
