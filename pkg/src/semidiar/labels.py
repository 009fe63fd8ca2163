"""Speaker label representations: RTTM segments and frame matrices."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

DEFAULT_MEDIAN_WINDOW = 11
_EPS = 1e-6


class RTTMParseError(ValueError):
    pass


@dataclass(frozen=True)
class SpeakerSegment:
    recording_id: str
    speaker_id: str
    onset: float
    duration: float

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"segment duration must be positive, got {self.duration}")
        if self.onset < 0:
            raise ValueError(f"segment onset must be non-negative, got {self.onset}")
        for name in (self.recording_id, self.speaker_id):
            if not name or any(ch.isspace() for ch in name):
                raise ValueError(f"identifier {name!r} is empty or contains whitespace")

    @property
    def offset(self) -> float:
        return self.onset + self.duration


def _sort_key(seg: SpeakerSegment):
    return (seg.onset, seg.speaker_id)


@dataclass(frozen=True)
class Annotation:
    """All speaker segments of one recording, sorted by (onset, speaker)."""

    recording_id: str
    segments: tuple[SpeakerSegment, ...] = ()
    recording_duration: float = 0.0

    def __post_init__(self):
        segs = tuple(sorted(self.segments, key=_sort_key))
        object.__setattr__(self, "segments", segs)
        last_end: dict[str, float] = {}
        for seg in segs:
            if seg.recording_id != self.recording_id:
                raise ValueError(
                    f"segment of {seg.recording_id!r} in annotation of {self.recording_id!r}"
                )
            if seg.offset > self.recording_duration + _EPS:
                raise ValueError(
                    f"segment ends at {seg.offset:.3f}s past recording duration "
                    f"{self.recording_duration:.3f}s"
                )
            prev = last_end.get(seg.speaker_id)
            if prev is not None and seg.onset < prev - 1e-9:
                raise ValueError(
                    f"overlapping segments for speaker {seg.speaker_id!r} at {seg.onset:.3f}s"
                )
            last_end[seg.speaker_id] = seg.offset

    @classmethod
    def from_segments(cls, recording_id: str, segments: Iterable[SpeakerSegment],
                      recording_duration: float | None = None) -> "Annotation":
        segments = tuple(segments)
        if recording_duration is None:
            recording_duration = max((s.offset for s in segments), default=0.0)
        return cls(recording_id, segments, recording_duration)

    @property
    def speakers(self) -> list[str]:
        return sorted({s.speaker_id for s in self.segments})


@dataclass(frozen=True, eq=False)
class FrameLabelMatrix:
    """T x S binary speaker activity on a fixed frame grid."""

    frames: np.ndarray
    frame_period: float
    speaker_ids: tuple[str, ...] = field(default=())

    def __post_init__(self):
        frames = np.asarray(self.frames)
        if frames.ndim != 2:
            raise ValueError("label frames must be a T x S matrix")
        if frames.size and not np.isin(frames, (0, 1)).all():
            raise ValueError("label entries must be 0 or 1")
        frames = frames.astype(np.uint8)
        frames.flags.writeable = False
        object.__setattr__(self, "frames", frames)
        ids = tuple(self.speaker_ids)
        if not ids and frames.shape[1]:
            ids = tuple(f"s{i}" for i in range(frames.shape[1]))
        if len(ids) != frames.shape[1]:
            raise ValueError(f"{len(ids)} speaker ids for {frames.shape[1]} columns")
        if len(set(ids)) != len(ids):
            raise ValueError("speaker ids must be unique")
        object.__setattr__(self, "speaker_ids", ids)
        if not self.frame_period > 0:
            raise ValueError("frame_period must be positive")

    @property
    def num_frames(self) -> int:
        return self.frames.shape[0]

    @property
    def num_speakers(self) -> int:
        return self.frames.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FrameLabelMatrix):
            return NotImplemented
        return (self.frame_period == other.frame_period
                and self.speaker_ids == other.speaker_ids
                and np.array_equal(self.frames, other.frames))

    __hash__ = None


# --- RTTM -----------------------------------------------------------------

def parse_rttm(text: str, durations: Mapping[str, float] | None = None) -> list[Annotation]:
    """Parse RTTM ``SPEAKER`` lines into one Annotation per recording.

    Recordings keep their first-appearance order.  ``durations`` overrides the
    default recording duration, which is the latest segment end.
    """
    by_rec: dict[str, list[SpeakerSegment]] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        fields = line.split()
        if not fields:
            continue
        if fields[0] != "SPEAKER":
            raise RTTMParseError(f"line {lineno}: unknown record type {fields[0]!r}")
        if len(fields) != 10:
            raise RTTMParseError(f"line {lineno}: expected 10 fields, got {len(fields)}")
        try:
            onset = float(fields[3])
            duration = float(fields[4])
        except ValueError:
            raise RTTMParseError(f"line {lineno}: non-numeric onset/duration") from None
        if not (math.isfinite(onset) and math.isfinite(duration)):
            raise RTTMParseError(f"line {lineno}: non-finite onset/duration")
        if duration <= 0:
            raise RTTMParseError(f"line {lineno}: duration must be positive")
        try:
            seg = SpeakerSegment(fields[1], fields[7], onset, duration)
        except ValueError as exc:
            raise RTTMParseError(f"line {lineno}: {exc}") from None
        by_rec.setdefault(seg.recording_id, []).append(seg)

    annotations = []
    for rec, segs in by_rec.items():
        dur = None if durations is None else durations.get(rec)
        try:
            annotations.append(Annotation.from_segments(rec, segs, dur))
        except ValueError as exc:
            raise RTTMParseError(f"recording {rec}: {exc}") from None
    return annotations


def format_rttm_line(seg: SpeakerSegment) -> str:
    return (f"SPEAKER {seg.recording_id} 1 {seg.onset:.2f} {seg.duration:.2f} "
            f"<NA> <NA> {seg.speaker_id} <NA> <NA>\n")


def write_rttm(annotations: Sequence[Annotation]) -> str:
    return "".join(format_rttm_line(seg) for ann in annotations for seg in ann.segments)


# --- frame view -------------------------------------------------------------

def num_frames_for(duration: float, frame_period: float) -> int:
    # guard against 1.0 / 0.01 = 100.00000000000001
    return max(0, math.ceil(duration / frame_period - 1e-9))


def frame_centers(num_frames: int, frame_period: float) -> np.ndarray:
    return (np.arange(num_frames) + 0.5) * frame_period


def segments_to_frames(ann: Annotation, frame_period: float,
                       speaker_ids: Sequence[str] | None = None,
                       num_frames: int | None = None) -> FrameLabelMatrix:
    """Sample segment activity at frame centers over half-open intervals.

    ``num_frames`` overrides the frame count derived from the recording
    duration (used when scoring against a longer hypothesis grid).
    """
    if not frame_period > 0:
        raise ValueError("frame_period must be positive")
    if speaker_ids is None:
        speaker_ids = ann.speakers
    else:
        missing = set(ann.speakers) - set(speaker_ids)
        if missing:
            raise ValueError(f"speakers {sorted(missing)} not in supplied speaker_ids")
    col = {spk: i for i, spk in enumerate(speaker_ids)}
    T = num_frames_for(ann.recording_duration, frame_period) if num_frames is None else num_frames
    centers = frame_centers(T, frame_period)
    frames = np.zeros((T, len(speaker_ids)), dtype=np.uint8)
    for seg in ann.segments:
        # centers are sorted, so this equals (centers >= onset) & (centers < offset)
        a = np.searchsorted(centers, seg.onset, side="left")
        b = np.searchsorted(centers, seg.onset + seg.duration, side="left")
        frames[a:b, col[seg.speaker_id]] = 1
    return FrameLabelMatrix(frames, frame_period, tuple(speaker_ids))


def median_filter_columns(frames: np.ndarray, window: int) -> np.ndarray:
    """Binary median (majority) filter along time, zero-padded at the edges."""
    if window < 1 or window % 2 == 0:
        raise ValueError("median window must be a positive odd integer")
    frames = np.asarray(frames, dtype=np.uint8)
    if window == 1 or frames.shape[0] == 0:
        return frames.copy()
    half = window // 2
    padded = np.pad(frames, ((half, half), (0, 0)))
    counts = sliding_window_view(padded, window, axis=0).sum(axis=-1)
    return (counts > half).astype(np.uint8)


def frames_to_segments(labels: FrameLabelMatrix, recording_id: str,
                       median_window: int = DEFAULT_MEDIAN_WINDOW) -> Annotation:
    """Turn maximal runs of active frames into segments.

    ``median_window=1`` disables the smoothing filter.
    """
    fp = labels.frame_period
    frames = median_filter_columns(labels.frames, median_window)
    segments = []
    for s, spk in enumerate(labels.speaker_ids):
        col = np.concatenate(([0], frames[:, s].astype(np.int8), [0]))
        edges = np.diff(col)
        starts = np.nonzero(edges == 1)[0]
        ends = np.nonzero(edges == -1)[0]
        for a, b in zip(starts, ends):
            segments.append(SpeakerSegment(recording_id, spk, a * fp, (b - a) * fp))
    return Annotation.from_segments(recording_id, segments, labels.num_frames * fp)
