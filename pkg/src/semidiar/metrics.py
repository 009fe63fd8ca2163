"""Frame-based diarization error rate with a reference-boundary collar."""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .assignment import max_score_mapping
from .labels import Annotation, FrameLabelMatrix, frame_centers, num_frames_for, segments_to_frames

DEFAULT_COLLAR = 0.25
DEFAULT_FRAME_PERIOD = 0.01


@dataclass(frozen=True)
class DerReport:
    der: float
    miss: float
    false_alarm: float
    confusion: float
    scored_speech: float
    scored_frames: int

    def __post_init__(self):
        if min(self.miss, self.false_alarm, self.confusion, self.scored_speech) < 0:
            raise ValueError("DER components must be non-negative")
        if abs(self.der - (self.miss + self.false_alarm + self.confusion)) > 1e-9:
            raise ValueError("der must equal miss + false_alarm + confusion")

    def as_percent(self) -> dict[str, float]:
        return {"DER": 100 * self.der, "MI": 100 * self.miss,
                "FA": 100 * self.false_alarm, "CF": 100 * self.confusion}


@dataclass(frozen=True)
class SpeakerMapping:
    pairs: tuple[tuple[str, str], ...]
    unmapped_ref: tuple[str, ...] = ()
    unmapped_hyp: tuple[str, ...] = ()

    def as_dict(self) -> dict[str, str]:
        return dict(self.pairs)


def _check_grid(ref: FrameLabelMatrix, hyp: FrameLabelMatrix):
    if ref.num_frames != hyp.num_frames or ref.frame_period != hyp.frame_period:
        raise ValueError(
            f"frame grids differ: {ref.num_frames}@{ref.frame_period} vs "
            f"{hyp.num_frames}@{hyp.frame_period}"
        )


def coactivity(ref: np.ndarray, hyp: np.ndarray) -> np.ndarray:
    return ref.T.astype(np.int64) @ hyp.astype(np.int64)


def optimal_speaker_mapping(ref: FrameLabelMatrix, hyp: FrameLabelMatrix) -> SpeakerMapping:
    """One-to-one ref->hyp mapping maximizing co-active frames.

    Ties go to the lexicographically smallest (ref_id, hyp_id) pair list.
    """
    _check_grid(ref, hyp)
    r_order = sorted(range(ref.num_speakers), key=lambda i: ref.speaker_ids[i])
    h_order = sorted(range(hyp.num_speakers), key=lambda j: hyp.speaker_ids[j])
    score = coactivity(ref.frames, hyp.frames)[np.ix_(r_order, h_order)]
    pairs = tuple(
        (ref.speaker_ids[r_order[i]], hyp.speaker_ids[h_order[j]])
        for i, j in max_score_mapping(score)
    )
    mapped_r = {p[0] for p in pairs}
    mapped_h = {p[1] for p in pairs}
    return SpeakerMapping(
        pairs,
        tuple(sorted(s for s in ref.speaker_ids if s not in mapped_r)),
        tuple(sorted(s for s in hyp.speaker_ids if s not in mapped_h)),
    )


def collar_mask(ref: Annotation, num_frames: int, frame_period: float, collar: float) -> np.ndarray:
    """True for frames that are scored (center not within the collar of a ref boundary)."""
    scored = np.ones(num_frames, dtype=bool)
    if collar <= 0 or num_frames == 0:
        return scored
    centers = frame_centers(num_frames, frame_period)
    bounds = np.array([b for seg in ref.segments for b in (seg.onset, seg.onset + seg.duration)])
    if bounds.size == 0:
        return scored
    near = np.abs(centers[None, :] - bounds[:, None]) < collar
    return ~near.any(axis=0)


@dataclass
class DerCounts:
    """Raw speaker-frame error counts, summable across recordings."""

    miss: int = 0
    false_alarm: int = 0
    confusion: int = 0
    ref_speech: int = 0
    scored_frames: int = 0
    frame_period: float = DEFAULT_FRAME_PERIOD

    def report(self) -> DerReport:
        if self.ref_speech == 0:
            raise ValueError("empty reference: no scored reference speech")
        total = self.ref_speech
        return DerReport(
            der=(self.miss + self.false_alarm + self.confusion) / total,
            miss=self.miss / total,
            false_alarm=self.false_alarm / total,
            confusion=self.confusion / total,
            scored_speech=total * self.frame_period,
            scored_frames=self.scored_frames,
        )


def der_counts(ref: Annotation, hyp: Annotation, collar: float = DEFAULT_COLLAR,
               frame_period: float = DEFAULT_FRAME_PERIOD) -> DerCounts:
    if ref.recording_id != hyp.recording_id:
        raise ValueError(f"recording mismatch: {ref.recording_id!r} vs {hyp.recording_id!r}")
    if collar < 0:
        raise ValueError("collar must be non-negative")
    T = max(num_frames_for(ref.recording_duration, frame_period),
            num_frames_for(hyp.recording_duration, frame_period))
    ref_m = segments_to_frames(ref, frame_period, num_frames=T)
    hyp_m = segments_to_frames(hyp, frame_period, num_frames=T)
    scored = collar_mask(ref, T, frame_period, collar)
    r_frames = ref_m.frames[scored]
    h_frames = hyp_m.frames[scored]
    mapping = optimal_speaker_mapping(
        FrameLabelMatrix(r_frames, frame_period, ref_m.speaker_ids),
        FrameLabelMatrix(h_frames, frame_period, hyp_m.speaker_ids),
    )
    r_col = {s: i for i, s in enumerate(ref_m.speaker_ids)}
    h_col = {s: i for i, s in enumerate(hyp_m.speaker_ids)}
    correct = sum(int(np.sum(r_frames[:, r_col[a]] & h_frames[:, h_col[b]]))
                  for a, b in mapping.pairs)
    r = r_frames.sum(axis=1, dtype=np.int64)
    h = h_frames.sum(axis=1, dtype=np.int64)
    return DerCounts(
        miss=int(np.maximum(0, r - h).sum()),
        false_alarm=int(np.maximum(0, h - r).sum()),
        confusion=int(np.minimum(r, h).sum()) - correct,
        ref_speech=int(r.sum()),
        scored_frames=int(scored.sum()),
        frame_period=frame_period,
    )


def compute_der(ref: Annotation, hyp: Annotation, collar: float = DEFAULT_COLLAR,
                frame_period: float = DEFAULT_FRAME_PERIOD) -> DerReport:
    """DER of ``hyp`` against ``ref`` after optimal speaker mapping.

    Frames whose centers fall strictly within ``collar`` seconds of any
    reference segment boundary are not scored.  Overlapped speech and
    speech-activity errors are scored.
    """
    return der_counts(ref, hyp, collar, frame_period).report()


def aggregate_reports(reports: Sequence[DerReport]) -> DerReport:
    """Pool reports, weighting each by its scored reference speech."""
    if not reports:
        raise ValueError("no reports to aggregate")
    weights = np.array([r.scored_speech for r in reports])
    total = weights.sum()
    if total <= 0:
        raise ValueError("empty reference: no scored reference speech")
    parts = {name: float(np.dot(weights, [getattr(r, name) for r in reports]) / total)
             for name in ("miss", "false_alarm", "confusion")}
    return DerReport(der=sum(parts.values()), scored_speech=float(total),
                     scored_frames=sum(r.scored_frames for r in reports), **parts)


def score_recordings(refs: Sequence[Annotation], hyps: Sequence[Annotation],
                     collar: float = DEFAULT_COLLAR,
                     frame_period: float = DEFAULT_FRAME_PERIOD) -> DerReport:
    """Pooled DER over paired recordings (exact integer pooling)."""
    total = DerCounts(frame_period=frame_period)
    for ref, hyp in zip(refs, hyps, strict=True):
        c = der_counts(ref, hyp, collar, frame_period)
        total.miss += c.miss
        total.false_alarm += c.false_alarm
        total.confusion += c.confusion
        total.ref_speech += c.ref_speech
        total.scored_frames += c.scored_frames
    return total.report()


def relative_der_reduction(baseline: float, improved: float) -> float:
    """Relative reduction in percent, rounded to one decimal."""
    if not baseline > 0:
        raise ValueError("baseline DER must be positive")
    return round(100.0 * (baseline - improved) / baseline, 1)


def der_by_speaker_count(results: Iterable[tuple[int, DerReport]]) -> dict[int, float]:
    """Scored-time-weighted DER (percent) per number of reference speakers."""
    groups: dict[int, list[DerReport]] = defaultdict(list)
    for count, report in results:
        groups[count].append(report)
    table = {}
    for count in sorted(groups):
        reports = groups[count]
        w = np.array([r.scored_speech for r in reports], dtype=float)
        d = np.array([r.der for r in reports], dtype=float)
        table[count] = float(100.0 * np.dot(w, d) / w.sum()) if w.sum() > 0 else float(100.0 * d.mean())
    return table


# --- rendering --------------------------------------------------------------

BREAKDOWN_COLUMNS = ("DER", "MI", "FA", "CF")


def der_report_csv(report: DerReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["metric", "value"])
    for key, value in report.as_percent().items():
        writer.writerow([key, f"{value:.2f}"])
    writer.writerow(["scored_speech", f"{report.scored_speech:.2f}"])
    writer.writerow(["scored_frames", report.scored_frames])
    return buf.getvalue()


def format_breakdown_table(rows: Sequence[tuple[str, DerReport]]) -> str:
    """Aligned plain-text table with DER, MI, FA, CF columns in percent."""
    name_w = max([len("Model")] + [len(name) for name, _ in rows])
    lines = [f"{'Model':<{name_w}} | " + " ".join(f"{c:>6}" for c in BREAKDOWN_COLUMNS)]
    lines.append("-" * len(lines[0]))
    for name, report in rows:
        pct = report.as_percent()
        lines.append(f"{name:<{name_w}} | " + " ".join(f"{pct[c]:>6.2f}" for c in BREAKDOWN_COLUMNS))
    return "\n".join(lines) + "\n"
