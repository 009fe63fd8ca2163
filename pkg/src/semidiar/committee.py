"""Committee label fusion: align members' speakers, then vote per frame.

The vote follows the DOVER-Lap idea on a shared frame grid: the number of
speakers at a frame is the rounded weighted mean of the members' counts, and
the speakers with the largest weighted votes fill those places.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .assignment import max_score_mapping
from .inference import generate_pseudo_labels, slot_ids
from .labels import FrameLabelMatrix
from .model import DiarizationModel, train
from .pseudo_label import AdaptConfig, pseudo_labeled_samples, smooth_labels
from .simulate import FeatureSequence

_VOTE_DECIMALS = 9


@dataclass(frozen=True)
class CommitteeHypothesis:
    member_id: str
    labels: FrameLabelMatrix
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight > 0:
            raise ValueError("member weight must be positive")


@dataclass(frozen=True)
class VoteConfig:
    weighting: str = "uniform"  # uniform | rank | member
    rank_exponent: float = 0.5
    count_rounding: str = "half-down"
    tie_break: str = "vote-then-lexicographic"

    def __post_init__(self):
        if self.weighting not in ("uniform", "rank", "member"):
            raise ValueError(f"unknown weighting {self.weighting!r}")
        if not self.rank_exponent > 0:
            raise ValueError("rank_exponent must be positive")
        if self.count_rounding != "half-down" or self.tie_break != "vote-then-lexicographic":
            raise ValueError("only half-down rounding with vote-then-lexicographic ties is supported")


def round_half_down(x):
    """Nearest integer, with exact halves rounded down."""
    return np.ceil(np.asarray(x) - 0.5 - 1e-9).astype(int)


def _check_grids(hypotheses: Sequence[CommitteeHypothesis]):
    if not hypotheses:
        raise ValueError("empty committee")
    ref = hypotheses[0].labels
    for h in hypotheses[1:]:
        if h.labels.num_frames != ref.num_frames or h.labels.frame_period != ref.frame_period:
            raise ValueError(f"member {h.member_id!r} is on a different frame grid")


def global_label(index: int) -> str:
    return f"G{index:03d}"


def align_speakers(hypotheses: Sequence[CommitteeHypothesis]) -> list[CommitteeHypothesis]:
    """Relabel every member onto one global speaker set.

    The highest-weight member (first on ties) is the anchor.  Each remaining
    member, in order, is matched one-to-one to the global labels by maximum
    co-activity with all members merged so far; speakers with no positive
    match get fresh global labels.
    """
    _check_grids(hypotheses)
    weights = [h.weight for h in hypotheses]
    anchor = int(np.argmax(weights))
    order = [anchor] + [i for i in range(len(hypotheses)) if i != anchor]

    anchor_labels = hypotheses[anchor].labels
    names: list[str] = [global_label(i) for i in range(anchor_labels.num_speakers)]
    accumulated = anchor_labels.frames.astype(np.int64)
    renamed: dict[int, tuple[str, ...]] = {anchor: tuple(names)}

    for i in order[1:]:
        labels = hypotheses[i].labels
        # column order, not names, drives tie-breaks, so renaming a member's
        # speakers cannot change the result
        cols = list(range(labels.num_speakers))
        frames = labels.frames.astype(np.int64)
        score = accumulated.T @ frames
        new_names = [None] * labels.num_speakers
        for g, h in max_score_mapping(score):
            if score[g, h] > 0:
                new_names[cols[h]] = names[g]
        for h in range(len(cols)):
            if new_names[cols[h]] is None:
                names.append(global_label(len(names)))
                accumulated = np.pad(accumulated, ((0, 0), (0, 1)))
                new_names[cols[h]] = names[-1]
        col_of = {n: k for k, n in enumerate(names)}
        for j, name in enumerate(new_names):
            accumulated[:, col_of[name]] += labels.frames[:, j]
        renamed[i] = tuple(new_names)

    return [replace(h, labels=FrameLabelMatrix(h.labels.frames, h.labels.frame_period, renamed[i]))
            for i, h in enumerate(hypotheses)]


def member_weights(hypotheses: Sequence[CommitteeHypothesis], config: VoteConfig) -> np.ndarray:
    n = len(hypotheses)
    if config.weighting == "uniform":
        w = np.ones(n)
    elif config.weighting == "rank":
        w = 1.0 / np.arange(1, n + 1) ** config.rank_exponent
    else:
        w = np.array([h.weight for h in hypotheses], dtype=float)
    return w / w.sum()


def combine_labels(hypotheses: Sequence[CommitteeHypothesis],
                   config: VoteConfig = VoteConfig()) -> FrameLabelMatrix:
    """Weighted per-frame vote over aligned hypotheses."""
    _check_grids(hypotheses)
    labels = sorted({s for h in hypotheses for s in h.labels.speaker_ids})
    col = {s: k for k, s in enumerate(labels)}
    T = hypotheses[0].labels.num_frames
    w = member_weights(hypotheses, config)

    votes = np.zeros((T, len(labels)))
    expected_count = np.zeros(T)
    for wi, h in zip(w, hypotheses):
        idx = [col[s] for s in h.labels.speaker_ids]
        votes[:, idx] += wi * h.labels.frames
        expected_count += wi * h.labels.frames.sum(axis=1)
    n_t = round_half_down(expected_count)

    # stable sort on the negated rounded vote keeps lexicographic order on ties
    ranking = np.argsort(-np.round(votes, _VOTE_DECIMALS), axis=1, kind="stable")
    out = np.zeros((T, len(labels)), dtype=np.uint8)
    place = np.arange(len(labels))[None, :] < n_t[:, None]
    rows = np.repeat(np.arange(T)[:, None], len(labels), axis=1)
    out[rows[place], ranking[place]] = 1
    return FrameLabelMatrix(out, hypotheses[0].labels.frame_period, tuple(labels))


def fit_to_slots(labels: FrameLabelMatrix, num_slots: int) -> FrameLabelMatrix:
    """Keep the ``num_slots`` most active columns (ties by order), pad with silence."""
    activity = labels.frames.sum(axis=0)
    keep = [j for j in np.argsort(-activity, kind="stable") if activity[j] > 0][:num_slots]
    keep.sort()
    frames = labels.frames[:, keep]
    if frames.shape[1] < num_slots:
        frames = np.pad(frames, ((0, 0), (0, num_slots - frames.shape[1])))
    return FrameLabelMatrix(frames, labels.frame_period, slot_ids(num_slots))


def composite_pseudo_labels(members: Sequence[DiarizationModel],
                            unlabeled: Sequence[FeatureSequence], threshold: float = 0.5,
                            vote: VoteConfig = VoteConfig(), label_median_window: int = 1,
                            weights: Sequence[float] | None = None) -> list[FrameLabelMatrix]:
    """Member pseudo-labels, aligned and voted per sequence (global labels)."""
    if not members:
        raise ValueError("empty committee")
    weights = [1.0] * len(members) if weights is None else list(weights)
    composite = []
    for feats in unlabeled:
        hyps = [CommitteeHypothesis(f"m{i}", smooth_labels(
                    generate_pseudo_labels(m, feats, threshold), label_median_window), w)
                for i, (m, w) in enumerate(zip(members, weights, strict=True))]
        composite.append(combine_labels(align_speakers(hyps), vote))
    return composite


def committee_adapt(base_model: DiarizationModel, unlabeled: Sequence[FeatureSequence],
                    members: Sequence[DiarizationModel], config: AdaptConfig,
                    vote: VoteConfig = VoteConfig(),
                    weights: Sequence[float] | None = None) -> DiarizationModel:
    """Fine-tune ``base_model`` on the committee's composite pseudo-labels.

    One pass of ``rounds * epochs_per_round`` epochs; iterating is the job of
    :func:`iterative_pseudo_label`.
    """
    composite = composite_pseudo_labels(members, unlabeled, config.threshold, vote,
                                        config.label_median_window, weights)
    S = base_model.max_speakers
    samples = pseudo_labeled_samples(unlabeled, [fit_to_slots(c, S) for c in composite])
    train_cfg = replace(config.train, epochs=config.rounds * config.epochs_per_round)
    model, _ = train(base_model, samples, train_cfg)
    return model


# --- manifest ------------------------------------------------------------------------

def read_manifest(path: str | Path) -> list[tuple[Path, float]]:
    """``<checkpoint path> <weight>`` per line; relative paths resolve next to the manifest."""
    path = Path(path)
    entries = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        if len(fields) != 2:
            raise ValueError(f"{path}:{lineno}: expected '<path> <weight>'")
        weight = float(fields[1])
        if not (weight > 0 and math.isfinite(weight)):
            raise ValueError(f"{path}:{lineno}: weight must be positive")
        member = Path(fields[0])
        entries.append((member if member.is_absolute() else path.parent / member, weight))
    return entries


def write_manifest(entries: Sequence[tuple[str | Path, float]], path: str | Path) -> None:
    Path(path).write_text("".join(f"{p} {w!r}\n" for p, w in entries))
