"""Seeded synthetic multi-speaker feature sequences with frame labels.

Each recording draws K voices from a fixed voice inventory.  A voice's
embedding is its inventory vector plus a small per-recording jitter; a frame's
feature is the sum of the active voices' embeddings, Gaussian noise and a
constant domain offset.  Speech activity per voice is an alternating renewal
process with exponential speech and silence durations.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .labels import (Annotation, FrameLabelMatrix, SpeakerSegment, parse_rttm,
                     segments_to_frames, write_rttm)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SimulationConfig:
    num_speakers: tuple[int, int] = (1, 4)
    mixture_duration: float = 30.0
    feature_dim: int = 8
    speech_mean_duration: float = 2.5
    silence_mean_duration: float = 4.0
    overlap_bias: float = 0.0
    noise_std: float = 0.3
    embedding_scale: float = 1.0
    domain_shift: tuple[float, ...] = ()
    frame_period: float = 0.05
    inventory_size: int = 4
    inventory_seed: int = 0
    embedding_jitter: float = 0.1

    def __post_init__(self):
        lo, hi = self.num_speakers
        if lo < 1 or hi < lo:
            raise ValueError(f"bad speaker range {self.num_speakers}")
        if hi > self.inventory_size:
            raise ValueError("max speakers exceeds the voice inventory size")
        if min(self.mixture_duration, self.speech_mean_duration,
               self.silence_mean_duration, self.frame_period) <= 0:
            raise ValueError("durations must be positive")
        if not 0.0 <= self.overlap_bias < 1.0:
            raise ValueError("overlap_bias must lie in [0, 1)")
        if self.feature_dim < 1 or self.embedding_scale <= 0 or self.noise_std < 0:
            raise ValueError("feature_dim and embedding_scale must be positive")
        if self.domain_shift and len(self.domain_shift) not in (1, self.feature_dim):
            raise ValueError("domain_shift must be empty, a scalar, or feature_dim long")

    def shift_vector(self) -> np.ndarray:
        if not self.domain_shift:
            return np.zeros(self.feature_dim)
        return np.broadcast_to(np.asarray(self.domain_shift, dtype=float), (self.feature_dim,)).copy()


@dataclass(frozen=True, eq=False)
class FeatureSequence:
    frames: np.ndarray
    frame_period: float

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=float)
        if frames.ndim != 2:
            raise ValueError("features must be a T x F matrix")
        if not np.all(np.isfinite(frames)):
            raise ValueError("features contain non-finite values")
        object.__setattr__(self, "frames", frames)

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def dim(self) -> int:
        return self.frames.shape[1]


@dataclass(frozen=True, eq=False)
class MixtureSample:
    features: FeatureSequence
    labels: FrameLabelMatrix
    recording_id: str
    num_speakers: int

    def __post_init__(self):
        if self.features.num_frames != self.labels.num_frames:
            raise ValueError("features and labels have different frame counts")

    def annotation(self) -> Annotation:
        from .labels import frames_to_segments
        return frames_to_segments(self.labels, self.recording_id, median_window=1)


def voice_inventory(config: SimulationConfig) -> np.ndarray:
    rng = np.random.default_rng(config.inventory_seed)
    voices = rng.standard_normal((config.inventory_size, config.feature_dim))
    voices *= config.embedding_scale / np.linalg.norm(voices, axis=1, keepdims=True)
    return voices


def _activity_segments(rng: np.random.Generator, config: SimulationConfig,
                       total_frames: int) -> list[tuple[int, int]]:
    """Frame runs [start, end) of one voice's alternating renewal process."""
    fp = config.frame_period
    speech_mean = config.speech_mean_duration
    silence_mean = config.silence_mean_duration * (1.0 - config.overlap_bias)
    p_start_speaking = speech_mean / (speech_mean + silence_mean)
    speaking = rng.random() < p_start_speaking
    t = 0
    runs = []
    while t < total_frames:
        mean = speech_mean if speaking else silence_mean
        length = max(1, int(round(rng.exponential(mean) / fp)))
        if speaking:
            runs.append((t, min(t + length, total_frames)))
        t += length
        speaking = not speaking
    return runs


def simulate_mixture(config: SimulationConfig, seed: int,
                     recording_id: str | None = None) -> MixtureSample:
    rng = np.random.default_rng(seed)
    fp = config.frame_period
    T = max(1, int(round(config.mixture_duration / fp)))
    lo, hi = config.num_speakers
    K = int(rng.integers(lo, hi + 1))
    voice_ids = np.sort(rng.choice(config.inventory_size, size=K, replace=False))
    inventory = voice_inventory(config)
    jitter = rng.standard_normal((K, config.feature_dim))
    jitter *= config.embedding_jitter * config.embedding_scale / math.sqrt(config.feature_dim)
    embeddings = inventory[voice_ids] + jitter

    rec = recording_id or f"mix{seed:08d}"
    speakers = [f"spk{v}" for v in voice_ids]
    segments = []
    for spk in speakers:
        runs = []
        while not runs:
            runs = _activity_segments(rng, config, T)
        segments.extend(SpeakerSegment(rec, spk, a * fp, (b - a) * fp) for a, b in runs)
    ann = Annotation.from_segments(rec, segments, T * fp)
    labels = segments_to_frames(ann, fp, speakers, num_frames=T)

    feats = labels.frames.astype(float) @ embeddings
    if config.noise_std > 0:
        feats = feats + config.noise_std * rng.standard_normal(feats.shape)
    feats = feats + config.shift_vector()
    return MixtureSample(FeatureSequence(feats, fp), labels, rec, K)


def overlap_ratio(labels: FrameLabelMatrix) -> float:
    counts = labels.frames.sum(axis=1)
    speech = int(np.count_nonzero(counts >= 1))
    if speech == 0:
        raise ValueError("no speech frames")
    return int(np.count_nonzero(counts >= 2)) / speech


def build_dataset(config: SimulationConfig, n: int, seed: int,
                  prefix: str = "mix") -> list[MixtureSample]:
    if n < 1:
        raise ValueError("n must be at least 1")
    samples = [simulate_mixture(config, seed + i, f"{prefix}{i:05d}") for i in range(n)]
    stats = dataset_stats(samples)
    logger.info("built %d mixtures: speakers %s, mean dur %.1fs, overlap %.1f%%",
                n, stats["speaker_histogram"], stats["mean_duration"], 100 * stats["overlap_ratio"])
    return samples


def dataset_stats(samples: Sequence[MixtureSample]) -> dict:
    hist = Counter(s.num_speakers for s in samples)
    ratios = []
    for s in samples:
        try:
            ratios.append(overlap_ratio(s.labels))
        except ValueError:
            pass
    return {
        "num_mixtures": len(samples),
        "speaker_histogram": dict(sorted(hist.items())),
        "speaker_range": (min(hist), max(hist)),
        "mean_duration": float(np.mean([s.labels.num_frames * s.labels.frame_period for s in samples])),
        "overlap_ratio": float(np.mean(ratios)) if ratios else 0.0,
    }


# --- framing ------------------------------------------------------------------

def stack_and_subsample(features: FeatureSequence, context: int, factor: int) -> FeatureSequence:
    """Splice +-context neighbours (edge frames replicated), keep every factor-th frame."""
    if context < 0 or factor < 1:
        raise ValueError("context must be >= 0 and factor >= 1")
    x = features.frames
    T, F = x.shape
    kept = np.arange(0, T, factor)
    if T == 0:
        return FeatureSequence(np.zeros((0, F * (2 * context + 1))), features.frame_period * factor)
    offsets = np.arange(-context, context + 1)
    idx = np.clip(kept[:, None] + offsets[None, :], 0, T - 1)
    stacked = x[idx].reshape(len(kept), F * (2 * context + 1))
    return FeatureSequence(stacked, features.frame_period * factor)


def subsample_labels(labels: FrameLabelMatrix, factor: int) -> FrameLabelMatrix:
    if factor < 1:
        raise ValueError("factor must be >= 1")
    return FrameLabelMatrix(labels.frames[::factor], labels.frame_period * factor, labels.speaker_ids)


def prepare_sample(sample: MixtureSample, context: int, factor: int) -> MixtureSample:
    """Model-rate view of a sample: stacked features, labels at kept frames."""
    return replace(sample,
                   features=stack_and_subsample(sample.features, context, factor),
                   labels=subsample_labels(sample.labels, factor))


# --- persistence --------------------------------------------------------------

def write_sample(sample: MixtureSample, directory: str | Path) -> Path:
    """Write ``<rec>.dsf`` plus sidecar ``<rec>.rttm``; returns the .dsf path."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    feats = sample.features.frames
    labels = sample.labels.frames
    T, F = feats.shape
    lines = [f"DSF1 {T} {F} {labels.shape[1]} {sample.features.frame_period!r}"]
    lines.extend(" ".join(repr(float(v)) for v in row) for row in feats)
    lines.extend(" ".join(str(int(v)) for v in row) for row in labels)
    path = directory / f"{sample.recording_id}.dsf"
    path.write_text("\n".join(lines) + "\n")
    (directory / f"{sample.recording_id}.rttm").write_text(write_rttm([sample.annotation()]))
    return path


def read_sample(path: str | Path) -> MixtureSample:
    path = Path(path)
    lines = path.read_text().splitlines()
    head = lines[0].split()
    if len(head) != 5 or head[0] != "DSF1":
        raise ValueError(f"{path}: not a DSF1 file")
    T, F, S = int(head[1]), int(head[2]), int(head[3])
    fp = float(head[4])
    if len(lines) < 1 + 2 * T:
        raise ValueError(f"{path}: truncated file")
    feats = np.array([[float(v) for v in line.split()] for line in lines[1:1 + T]], dtype=float).reshape(T, F)
    labels = np.array([[int(v) for v in line.split()] for line in lines[1 + T:1 + 2 * T]],
                      dtype=np.uint8).reshape(T, S)
    rec = path.stem
    rttm = path.with_suffix(".rttm")
    speakers: Sequence[str] = ()
    if rttm.exists():
        anns = parse_rttm(rttm.read_text())
        speakers = anns[0].speakers if anns else ()
    if len(speakers) != S:
        speakers = tuple(f"spk{i}" for i in range(S))
    return MixtureSample(FeatureSequence(feats, fp), FrameLabelMatrix(labels, fp, tuple(speakers)), rec, S)


def read_dataset(directory: str | Path) -> list[MixtureSample]:
    paths = sorted(Path(directory).glob("*.dsf"))
    if not paths:
        raise FileNotFoundError(f"no .dsf files in {directory}")
    return [read_sample(p) for p in paths]
