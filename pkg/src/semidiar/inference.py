"""Posterior thresholding, segment export and DER evaluation of a model."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .labels import Annotation, FrameLabelMatrix, frames_to_segments
from .metrics import DEFAULT_COLLAR, DerReport, score_recordings
from .model import DiarizationModel, forward
from .simulate import FeatureSequence

DEFAULT_THRESHOLD = 0.5


@dataclass(frozen=True)
class ScoringConfig:
    collar: float = DEFAULT_COLLAR
    frame_period: float = 0.01
    # median window applied to model-rate frames before export
    median_window: int = 1


def slot_ids(num_slots: int) -> tuple[str, ...]:
    return tuple(f"slot{i}" for i in range(num_slots))


def generate_pseudo_labels(model: DiarizationModel, features: FeatureSequence,
                           threshold: float = DEFAULT_THRESHOLD) -> FrameLabelMatrix:
    """Binarize posteriors: active iff posterior >= threshold."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must lie in (0, 1)")
    post = forward(model, features)
    frames = (post.frames >= threshold).astype(np.uint8)
    return FrameLabelMatrix(frames, features.frame_period, slot_ids(model.max_speakers))


def diarize(model: DiarizationModel, features: FeatureSequence, recording_id: str,
            threshold: float = DEFAULT_THRESHOLD, median_window: int = 1) -> Annotation:
    labels = generate_pseudo_labels(model, features, threshold)
    return frames_to_segments(labels, recording_id, median_window)


def score_labels(labels: Sequence[FrameLabelMatrix], truth: Sequence[Annotation],
                 scoring: ScoringConfig = ScoringConfig()) -> DerReport:
    """Pooled DER of frame-label hypotheses against reference annotations."""
    hyps = [frames_to_segments(lab, ref.recording_id, scoring.median_window)
            for lab, ref in zip(labels, truth, strict=True)]
    return score_recordings(truth, hyps, scoring.collar, scoring.frame_period)


def evaluate_model(model: DiarizationModel, features: Sequence[FeatureSequence],
                   truth: Sequence[Annotation], threshold: float = DEFAULT_THRESHOLD,
                   scoring: ScoringConfig = ScoringConfig()) -> DerReport:
    labels = [generate_pseudo_labels(model, f, threshold) for f in features]
    return score_labels(labels, truth, scoring)


def per_recording_reports(model: DiarizationModel, features: Sequence[FeatureSequence],
                          truth: Sequence[Annotation], threshold: float = DEFAULT_THRESHOLD,
                          scoring: ScoringConfig = ScoringConfig()) -> list[DerReport]:
    from .metrics import compute_der
    reports = []
    for f, ref in zip(features, truth, strict=True):
        hyp = diarize(model, f, ref.recording_id, threshold, scoring.median_window)
        reports.append(compute_der(ref, hyp, scoring.collar, scoring.frame_period))
    return reports
