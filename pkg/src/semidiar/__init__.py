"""Self-supervised adaptation of a neural speaker diarization model.

Frame-level permutation-free training, iterative pseudo-labeling on
unlabeled target-domain data, and committee voting over several models'
pseudo-labels, with a frame-based DER scorer and a synthetic mixture
simulator to exercise them.
"""

from .labels import Annotation, FrameLabelMatrix, SpeakerSegment, parse_rttm, write_rttm
from .metrics import DerReport, compute_der, relative_der_reduction, score_recordings
from .model import DiarizationModel, TrainConfig, forward, pit_loss, pit_loss_assignment, train

__all__ = ["Annotation", "FrameLabelMatrix", "SpeakerSegment", "parse_rttm", "write_rttm",
           "DerReport", "compute_der", "relative_der_reduction", "score_recordings",
           "DiarizationModel", "TrainConfig", "forward", "pit_loss", "pit_loss_assignment", "train"]
__version__ = "0.1.0"
