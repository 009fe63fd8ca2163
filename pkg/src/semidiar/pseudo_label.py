"""Iterative pseudo-labeling and labeled + pseudo-labeled fine-tuning."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .inference import DEFAULT_THRESHOLD, ScoringConfig, evaluate_model, generate_pseudo_labels
from .labels import Annotation, FrameLabelMatrix, median_filter_columns
from .model import DiarizationModel, TrainConfig, TrainingDivergedError, mean_pit_loss, train
from .simulate import FeatureSequence, MixtureSample

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AdaptConfig:
    rounds: int = 5
    epochs_per_round: int = 7
    threshold: float = DEFAULT_THRESHOLD
    train: TrainConfig = field(default_factory=TrainConfig)
    # odd median window over model-rate frames applied to pseudo-labels; 1 = off
    label_median_window: int = 1

    def __post_init__(self):
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")
        if self.epochs_per_round < 0:
            raise ValueError("epochs_per_round must be >= 0")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")

    def round_train_config(self, round_index: int) -> TrainConfig:
        return replace(self.train, epochs=self.epochs_per_round, seed=self.train.seed + round_index)


@dataclass(frozen=True)
class RoundLog:
    round: int
    epochs_run: int
    mean_train_loss: float
    der_vs_truth: float | None
    pseudo_label_change: float


class AdaptationDivergedError(RuntimeError):
    def __init__(self, message: str, model: DiarizationModel, logs: list[RoundLog]):
        super().__init__(message)
        self.model = model
        self.logs = logs


def smooth_labels(labels: FrameLabelMatrix, median_window: int) -> FrameLabelMatrix:
    if median_window == 1:
        return labels
    return FrameLabelMatrix(median_filter_columns(labels.frames, median_window),
                            labels.frame_period, labels.speaker_ids)


def label_change(old: Sequence[FrameLabelMatrix], new: Sequence[FrameLabelMatrix]) -> float:
    """Fraction of (frame, slot) entries that differ between two label sets."""
    flipped = sum(int(np.count_nonzero(a.frames != b.frames)) for a, b in zip(old, new, strict=True))
    total = sum(a.frames.size for a in old)
    return flipped / total if total else 0.0


def pseudo_labeled_samples(features: Sequence[FeatureSequence],
                           labels: Sequence[FrameLabelMatrix],
                           prefix: str = "pl") -> list[MixtureSample]:
    return [MixtureSample(f, lab, f"{prefix}{i:05d}", lab.num_speakers)
            for i, (f, lab) in enumerate(zip(features, labels, strict=True))]


def iterative_pseudo_label(seed_model: DiarizationModel, unlabeled: Sequence[FeatureSequence],
                           config: AdaptConfig, eval_truth: Sequence[Annotation] | None = None,
                           eval_features: Sequence[FeatureSequence] | None = None,
                           scoring: ScoringConfig = ScoringConfig(),
                           ) -> tuple[DiarizationModel, list[RoundLog]]:
    """Alternate pseudo-label generation and short fine-tuning for ``config.rounds``.

    Labels are regenerated from the current model every round.  Round 0 logs
    the seed model.  ``eval_truth`` is used only for the diagnostic DER; it
    pairs with ``eval_features`` when given, else with ``unlabeled``.
    """
    if not unlabeled:
        raise ValueError("empty unlabeled set")
    eval_feats = eval_features if eval_features is not None else unlabeled

    def diag_der(model):
        if eval_truth is None:
            return None
        return evaluate_model(model, eval_feats, eval_truth, config.threshold, scoring).der

    def make_labels(model):
        return [smooth_labels(generate_pseudo_labels(model, f, config.threshold),
                              config.label_median_window) for f in unlabeled]

    model = seed_model.copy()
    labels = make_labels(model)
    samples = pseudo_labeled_samples(unlabeled, labels)
    logs = [RoundLog(0, 0, mean_pit_loss(model, samples), diag_der(model), 0.0)]
    for r in range(1, config.rounds + 1):
        try:
            model, curve = train(model, samples, config.round_train_config(r))
        except TrainingDivergedError as exc:
            raise AdaptationDivergedError(f"round {r}: {exc}", model, logs) from exc
        new_labels = make_labels(model)
        loss = curve[-1] if curve else mean_pit_loss(model, samples)
        logs.append(RoundLog(r, len(curve), loss, diag_der(model), label_change(labels, new_labels)))
        logger.info("round %d: loss %.4f change %.4f der %s", r, loss, logs[-1].pseudo_label_change,
                    logs[-1].der_vs_truth)
        labels = new_labels
        samples = pseudo_labeled_samples(unlabeled, labels)
    return model, logs


def semi_supervised_adapt(seed_model: DiarizationModel, labeled: Sequence[MixtureSample],
                          pseudo_labeled: Sequence[tuple[FeatureSequence, FrameLabelMatrix]],
                          config: TrainConfig) -> DiarizationModel:
    """Fine-tune on the union of a labeled set and a pseudo-labeled set."""
    if not labeled and not pseudo_labeled:
        raise ValueError("both labeled and pseudo-labeled sets are empty")
    combined = list(labeled)
    if pseudo_labeled:
        feats, labs = zip(*pseudo_labeled)
        combined.extend(pseudo_labeled_samples(feats, labs))
    model, _ = train(seed_model, combined, config)
    return model


ROUND_LOG_FIELDS = ("round", "epochs", "mean_loss", "label_change", "der")


def round_logs_csv(logs: Sequence[RoundLog]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(ROUND_LOG_FIELDS)
    for log in logs:
        der = "" if log.der_vs_truth is None else f"{100 * log.der_vs_truth:.2f}"
        writer.writerow([log.round, log.epochs_run, f"{log.mean_train_loss:.6f}",
                         f"{log.pseudo_label_change:.6f}", der])
    return buf.getvalue()
