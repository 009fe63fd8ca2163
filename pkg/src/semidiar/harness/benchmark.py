"""Seeded multi-trial comparisons on the domain-shift benchmark.

A trial is one master seed: fresh splits, a fresh seed model, and the
adaptation systems built from them.  Trials cache their models so several
comparisons can share one seed model and one set of committee members.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Iterable

import numpy as np

from ..committee import committee_adapt
from ..model import DiarizationModel
from ..pseudo_label import RoundLog
from .config import ExperimentConfig
from .experiment import Protocol, Split, build_splits, train_seed

logger = logging.getLogger(__name__)


class Trial:
    def __init__(self, cfg: ExperimentConfig, seed: int):
        self.cfg = replace(cfg, master_seed=seed)
        self.seed = seed

    @cached_property
    def splits(self) -> dict[str, Split]:
        return build_splits(self.cfg)

    @cached_property
    def seed_model(self) -> DiarizationModel:
        logger.info("trial %d: training seed model", self.seed)
        return train_seed(self.cfg, self.splits["train"])[0]

    @cached_property
    def protocol(self) -> Protocol:
        return Protocol(self.cfg, self.splits, self.seed_model)

    def ipl_curve(self, which: str = "test") -> list[float]:
        """Per-round DER on the test split, round 0 first."""
        logs: list[RoundLog] = self.protocol.ipl(which)[1]
        return [log.der_vs_truth for log in logs]

    @cached_property
    def member_ders(self) -> list[float]:
        return [self.protocol.evaluate(m).der for m in self.protocol.ipl_members()]

    @cached_property
    def composite_der(self) -> float:
        p = self.protocol
        return p.score(p.composite(p.ipl_members())).der

    @cached_property
    def supervised_der(self) -> float:
        return self.protocol.evaluate(self.protocol.supervised()).der

    @cached_property
    def committee_supervised_der(self) -> float:
        p = self.protocol
        model = committee_adapt(p.supervised(), p.test.features, p.ipl_members(),
                                p.committee_train_config(), self.cfg.vote)
        return p.evaluate(model).der


class TrialPool:
    """Lazily created trials keyed by seed."""

    def __init__(self, cfg: ExperimentConfig | None = None):
        self.cfg = cfg or ExperimentConfig()
        self._trials: dict[int, Trial] = {}

    def __getitem__(self, seed: int) -> Trial:
        if seed not in self._trials:
            self._trials[seed] = Trial(self.cfg, seed)
        return self._trials[seed]

    def trials(self, seeds: Iterable[int]) -> list[Trial]:
        return [self[s] for s in seeds]


@dataclass
class IplEfficacy:
    curves: np.ndarray  # seeds x (rounds + 1), fractions

    @property
    def median_curve(self) -> np.ndarray:
        return np.median(self.curves, axis=0)

    @property
    def relative_reduction(self) -> float:
        """Percent reduction of the median final-round DER versus round 0."""
        med = self.median_curve
        return 100.0 * (med[0] - med[-1]) / med[0]


def ipl_efficacy(pool: TrialPool, seeds: Iterable[int], which: str = "test") -> IplEfficacy:
    return IplEfficacy(np.array([t.ipl_curve(which) for t in pool.trials(seeds)]))


@dataclass
class CommitteeOutcome:
    seed: int
    member_ders: list[float]
    composite_der: float

    @property
    def beats_members(self) -> bool:
        return self.composite_der <= min(self.member_ders)


def committee_trials(pool: TrialPool, seeds: Iterable[int]) -> list[CommitteeOutcome]:
    return [CommitteeOutcome(t.seed, t.member_ders, t.composite_der) for t in pool.trials(seeds)]


@dataclass
class AdaptationComparison:
    supervised: list[float]
    committee: list[float]

    @property
    def median_supervised(self) -> float:
        return float(np.median(self.supervised))

    @property
    def median_committee(self) -> float:
        return float(np.median(self.committee))


def supervised_vs_committee(pool: TrialPool, seeds: Iterable[int]) -> AdaptationComparison:
    trials = pool.trials(seeds)
    return AdaptationComparison([t.supervised_der for t in trials],
                                [t.committee_supervised_der for t in trials])
