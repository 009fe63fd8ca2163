"""Flat ``key = value`` experiment configuration with dotted namespaces."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from ..committee import VoteConfig
from ..inference import ScoringConfig
from ..model import TrainConfig
from ..pseudo_label import AdaptConfig
from ..simulate import SimulationConfig

SPLITS = ("train", "adapt", "test")
SPLIT_SEED_OFFSETS = {"train": 0, "adapt": 10**6, "test": 2 * 10**6}

# unit-norm offset directions; the second is orthogonal to the first and
# separates the test condition from the adaptation condition
SHIFT_DIRECTION = (-0.4568, -0.1699, 0.5948, 0.0896, 0.4250, 0.2665, -0.2939, 0.2503)
TEST_SHIFT_DIRECTION = (0.2118, -0.5472, 0.4393, -0.0058, -0.6477, -0.0388, -0.1798, -0.0966)
ADAPT_SHIFT = 0.4
TEST_EXTRA_SHIFT = 0.3


class ConfigError(ValueError):
    pass


def _shift(*terms: tuple[float, tuple[float, ...]]) -> tuple[float, ...]:
    return tuple(round(sum(w * d[i] for w, d in terms), 6) for i in range(len(SHIFT_DIRECTION)))


def default_simulation() -> dict[str, SimulationConfig]:
    """Calibrated desk-scale splits.

    Source: 1-4 speakers at about 30% overlap.  Target: 2-4 speakers at about
    17% overlap plus a feature offset; the test split is offset a little
    further than the adaptation split.
    """
    source = SimulationConfig(num_speakers=(1, 4), silence_mean_duration=13.5, overlap_bias=0.68,
                              noise_std=0.5, embedding_jitter=0.6)
    adapt = replace(source, num_speakers=(2, 4), overlap_bias=0.0,
                    domain_shift=_shift((ADAPT_SHIFT, SHIFT_DIRECTION)))
    test = replace(adapt, domain_shift=_shift((ADAPT_SHIFT, SHIFT_DIRECTION),
                                              (TEST_EXTRA_SHIFT, TEST_SHIFT_DIRECTION)))
    return {"train": source, "adapt": adapt, "test": test}


@dataclass(frozen=True)
class ExperimentConfig:
    simulation: dict[str, SimulationConfig] = field(default_factory=default_simulation)
    split_sizes: dict[str, int] = field(default_factory=lambda: {"train": 300, "adapt": 100, "test": 100})
    context: int = 4
    subsample: int = 4
    hidden: tuple[int, ...] = (64, 64)
    max_speakers: int = 4
    seed_train: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=20))
    supervised: TrainConfig = field(default_factory=lambda: TrainConfig(epochs=20))
    adapt: AdaptConfig = field(default_factory=lambda: AdaptConfig(label_median_window=5))
    committee: AdaptConfig = field(
        default_factory=lambda: AdaptConfig(rounds=1, epochs_per_round=10, label_median_window=3))
    vote: VoteConfig = field(default_factory=VoteConfig)
    scoring: ScoringConfig = field(default_factory=lambda: ScoringConfig(median_window=3))
    output_dir: Path = Path("runs/default")
    master_seed: int = 0

    @property
    def collar(self) -> float:
        return self.scoring.collar

    def split_seed(self, split: str) -> int:
        return self.master_seed + SPLIT_SEED_OFFSETS[split]

    def layer_dims(self) -> list[int]:
        feature_dim = self.simulation["train"].feature_dim
        return [feature_dim * (2 * self.context + 1), *self.hidden, self.max_speakers]


# --- parsing -------------------------------------------------------------------

def _parse_value(raw: str, current: Any):
    raw = raw.strip()
    try:
        if isinstance(current, bool):
            if raw.lower() not in ("true", "false", "1", "0"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1")
        if isinstance(current, int):
            return int(raw)
        if isinstance(current, float):
            return float(raw)
        if isinstance(current, Path):
            return Path(raw)
        if isinstance(current, tuple):
            if "-" in raw and "," not in raw and not raw.startswith("-"):
                lo, hi = raw.split("-")
                return (int(lo), int(hi))
            parts = [p for p in raw.replace(",", " ").split()]
            if not parts:
                return ()
            if current and isinstance(current[0], int) and not isinstance(current[0], bool):
                return tuple(int(p) for p in parts)
            if all(p.lstrip("-").isdigit() for p in parts) and not current:
                return tuple(int(p) for p in parts)
            return tuple(float(p) for p in parts)
        return raw
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r} for a value like {current!r}") from None


def _set_field(obj, name: str, raw: str):
    names = {f.name for f in dataclasses.fields(obj)}
    if name not in names:
        raise ConfigError(f"unknown key {name!r} for {type(obj).__name__}")
    value = _parse_value(raw, getattr(obj, name))
    try:
        return replace(obj, **{name: value})
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from None


def apply_setting(cfg: ExperimentConfig, key: str, raw: str) -> ExperimentConfig:
    parts = key.strip().split(".")
    head = parts[0]
    try:
        if head == "simulation" and len(parts) == 3:
            split, name = parts[1], parts[2]
            if split not in SPLITS:
                raise ConfigError(f"unknown split {split!r}")
            if name == "n":
                sizes = dict(cfg.split_sizes)
                sizes[split] = int(raw)
                if sizes[split] < 1:
                    raise ConfigError("split size must be >= 1")
                return replace(cfg, split_sizes=sizes)
            sims = dict(cfg.simulation)
            sims[split] = _set_field(sims[split], name, raw)
            return replace(cfg, simulation=sims)
        if head in ("seed_train", "supervised", "vote", "scoring") and len(parts) == 2:
            return replace(cfg, **{head: _set_field(getattr(cfg, head), parts[1], raw)})
        if head in ("adapt", "committee") and len(parts) in (2, 3):
            section = getattr(cfg, head)
            if len(parts) == 3:
                if parts[1] != "train":
                    raise ConfigError(f"unknown key {key!r}")
                section = replace(section, train=_set_field(section.train, parts[2], raw))
            else:
                section = _set_field(section, parts[1], raw)
            return replace(cfg, **{head: section})
        if head == "framing" and len(parts) == 2 and parts[1] in ("context", "subsample"):
            return _set_field(cfg, parts[1], raw)
        if head == "model" and len(parts) == 2 and parts[1] in ("hidden", "max_speakers"):
            return _set_field(cfg, parts[1], raw)
        if len(parts) == 1 and head in ("output_dir", "master_seed"):
            return _set_field(cfg, head, raw)
    except ConfigError as exc:
        raise ConfigError(f"{key}: {exc}") from None
    raise ConfigError(f"unknown key {key!r}")


def parse_config_text(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    cfg = base or ExperimentConfig()
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = line.split("=", 1)
        try:
            cfg = apply_setting(cfg, key, raw)
        except ConfigError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    return cfg


def load_config(path: str | Path | None = None, overrides: Iterable[str] = ()) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        cfg = parse_config_text(path.read_text(), cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        cfg = apply_setting(cfg, key, raw)
    return cfg


def _format_value(value) -> str:
    if isinstance(value, tuple):
        if len(value) == 2 and all(isinstance(v, int) for v in value):
            return f"{value[0]}-{value[1]}"
        return ",".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def dump_config(cfg: ExperimentConfig) -> str:
    """Render every key; parse_config_text(dump_config(c)) == c."""
    lines = [f"master_seed = {cfg.master_seed}", f"output_dir = {cfg.output_dir}"]
    for split in SPLITS:
        lines.append(f"simulation.{split}.n = {cfg.split_sizes[split]}")
        for f in dataclasses.fields(SimulationConfig):
            lines.append(f"simulation.{split}.{f.name} = {_format_value(getattr(cfg.simulation[split], f.name))}")
    lines.append(f"framing.context = {cfg.context}")
    lines.append(f"framing.subsample = {cfg.subsample}")
    lines.append(f"model.hidden = {_format_value(cfg.hidden)}")
    lines.append(f"model.max_speakers = {cfg.max_speakers}")
    for head in ("seed_train", "supervised", "vote", "scoring"):
        section = getattr(cfg, head)
        for f in dataclasses.fields(section):
            lines.append(f"{head}.{f.name} = {_format_value(getattr(section, f.name))}")
    for head in ("adapt", "committee"):
        section = getattr(cfg, head)
        for f in dataclasses.fields(section):
            if f.name == "train":
                for g in dataclasses.fields(section.train):
                    lines.append(f"{head}.train.{g.name} = {_format_value(getattr(section.train, g.name))}")
            else:
                lines.append(f"{head}.{f.name} = {_format_value(getattr(section, f.name))}")
    return "\n".join(lines) + "\n"
