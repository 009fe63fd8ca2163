"""Desk-scale adaptation protocol: datasets, seed model and recipes.

Recipes:

    supervised       seed fine-tuned on the labeled adaptation split
    ipl-adapt        iterative pseudo-labeling on the adaptation split
    ipl-test         iterative pseudo-labeling on the test split
    ipl-both         iterative pseudo-labeling on both splits
    committee        vote of the three pseudo-labeling members on the test
                     split, then the supervised model fine-tuned on that
                     composite label
    semi-supervised  vote of the supervised model and the three members, seed
                     fine-tuned on labeled adapt plus pseudo-labeled test,
                     then a second vote that includes the new model
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from ..committee import committee_adapt, composite_pseudo_labels, fit_to_slots
from ..inference import (evaluate_model, generate_pseudo_labels, per_recording_reports,
                         score_labels)
from ..labels import Annotation, FrameLabelMatrix
from ..metrics import DerReport, der_by_speaker_count, relative_der_reduction
from ..model import DiarizationModel, train
from ..pseudo_label import RoundLog, iterative_pseudo_label, semi_supervised_adapt
from ..simulate import FeatureSequence, MixtureSample, build_dataset, prepare_sample
from .config import SPLITS, ExperimentConfig

logger = logging.getLogger(__name__)

MEMBER_SEED_OFFSETS = {"adapt": 0, "test": 101, "both": 202}

RECIPES = ("supervised", "ipl-adapt", "ipl-test", "ipl-both", "committee", "semi-supervised")


@dataclass
class Split:
    name: str
    raw: list[MixtureSample]
    prepared: list[MixtureSample]

    @property
    def features(self) -> list[FeatureSequence]:
        return [s.features for s in self.prepared]

    @property
    def truth(self) -> list[Annotation]:
        return [s.annotation() for s in self.raw]

    @property
    def speaker_counts(self) -> list[int]:
        return [s.num_speakers for s in self.raw]


def build_splits(cfg: ExperimentConfig, raw: dict[str, list[MixtureSample]] | None = None
                 ) -> dict[str, Split]:
    """Simulate every split, or prepare the given ``raw`` splits only."""
    splits = {}
    for name in (SPLITS if raw is None else raw):
        samples = raw[name] if raw is not None else build_dataset(
            cfg.simulation[name], cfg.split_sizes[name], cfg.split_seed(name), prefix=f"{name}_")
        prepared = [prepare_sample(s, cfg.context, cfg.subsample) for s in samples]
        splits[name] = Split(name, list(samples), prepared)
    return splits


def train_seed(cfg: ExperimentConfig, train_split: Split) -> tuple[DiarizationModel, list[float]]:
    model = DiarizationModel.initialize(cfg.layer_dims(), seed=cfg.master_seed)
    return train(model, train_split.prepared, replace(cfg.seed_train, seed=cfg.master_seed))


@dataclass
class SystemResult:
    name: str
    report: DerReport
    model: DiarizationModel | None = None


@dataclass
class RecipeResult:
    recipe: str
    seed_report: DerReport
    final: SystemResult
    systems: list[SystemResult] = field(default_factory=list)
    round_logs: list[RoundLog] = field(default_factory=list)
    per_speaker: dict[int, float] = field(default_factory=dict)

    @property
    def relative_reduction(self) -> float:
        return relative_der_reduction(100 * self.seed_report.der, 100 * self.final.report.der)


class Protocol:
    """Runs systems of the adaptation comparison, caching shared models."""

    def __init__(self, cfg: ExperimentConfig, splits: dict[str, Split], seed_model: DiarizationModel):
        self.cfg = cfg
        self.splits = splits
        self.seed_model = seed_model
        self._cache: dict[str, tuple[DiarizationModel, list[RoundLog]]] = {}

    @property
    def test(self) -> Split:
        return self.splits["test"]

    def evaluate(self, model: DiarizationModel) -> DerReport:
        return evaluate_model(model, self.test.features, self.test.truth,
                              self.cfg.adapt.threshold, self.cfg.scoring)

    def score(self, labels: Sequence[FrameLabelMatrix]) -> DerReport:
        return score_labels(labels, self.test.truth, self.cfg.scoring)

    def ipl(self, which: str) -> tuple[DiarizationModel, list[RoundLog]]:
        if which not in self._cache:
            if which == "adapt":
                unlabeled = self.splits["adapt"].features
            elif which == "test":
                unlabeled = self.test.features
            else:
                unlabeled = self.splits["adapt"].features + self.test.features
            # distinct shuffle seeds per member keep the committee diverse
            seed = self.cfg.master_seed + MEMBER_SEED_OFFSETS[which]
            adapt = replace(self.cfg.adapt, train=replace(self.cfg.adapt.train, seed=seed))
            self._cache[which] = iterative_pseudo_label(
                self.seed_model, unlabeled, adapt, eval_truth=self.test.truth,
                eval_features=self.test.features, scoring=self.cfg.scoring)
        return self._cache[which]

    def supervised(self) -> DiarizationModel:
        if "supervised" not in self._cache:
            model, _ = train(self.seed_model, self.splits["adapt"].prepared,
                             replace(self.cfg.supervised, seed=self.cfg.master_seed))
            self._cache["supervised"] = (model, [])
        return self._cache["supervised"][0]

    def ipl_members(self) -> list[DiarizationModel]:
        return [self.ipl(w)[0] for w in ("adapt", "test", "both")]

    def composite(self, members: Sequence[DiarizationModel]) -> list[FrameLabelMatrix]:
        c = self.cfg.committee
        return composite_pseudo_labels(members, self.test.features, c.threshold, self.cfg.vote,
                                       c.label_median_window)

    def committee_train_config(self):
        c = self.cfg.committee
        return replace(c, train=replace(c.train, seed=self.cfg.master_seed))


def run_recipe(cfg: ExperimentConfig, recipe: str, splits: dict[str, Split],
               seed_model: DiarizationModel, protocol: Protocol | None = None) -> RecipeResult:
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; choose from {', '.join(RECIPES)}")
    p = protocol or Protocol(cfg, splits, seed_model)
    seed_report = p.evaluate(seed_model)
    systems = [SystemResult("Seed model", seed_report, seed_model)]
    logs: list[RoundLog] = []

    if recipe == "supervised":
        model = p.supervised()
        systems.append(SystemResult("Supervised adaptation", p.evaluate(model), model))
    elif recipe.startswith("ipl-"):
        which = recipe.split("-", 1)[1]
        model, logs = p.ipl(which)
        systems.append(SystemResult(f"Iterative PL ({which})", p.evaluate(model), model))
    elif recipe == "committee":
        members = p.ipl_members()
        for name, m in zip(("adapt", "test", "both"), members):
            systems.append(SystemResult(f"Iterative PL ({name})", p.evaluate(m), m))
        systems.append(SystemResult("Committee label", p.score(p.composite(members))))
        supervised = p.supervised()
        systems.append(SystemResult("Supervised adaptation", p.evaluate(supervised), supervised))
        model = committee_adapt(supervised, p.test.features, members,
                                p.committee_train_config(), cfg.vote)
        systems.append(SystemResult("Supervised + committee PL", p.evaluate(model), model))
        logs = p.ipl("both")[1]
    else:
        supervised = p.supervised()
        systems.append(SystemResult("Supervised", p.evaluate(supervised), supervised))
        members = [supervised] + p.ipl_members()
        first = p.composite(members)
        systems.append(SystemResult("First fusion", p.score(first)))
        S = seed_model.max_speakers
        pseudo = list(zip(p.test.features, [fit_to_slots(c, S) for c in first]))
        model = semi_supervised_adapt(seed_model, splits["adapt"].prepared, pseudo,
                                      replace(cfg.supervised, seed=cfg.master_seed))
        systems.append(SystemResult("Semi-supervised", p.evaluate(model), model))
        second = p.composite([model] + members[1:])
        systems.append(SystemResult("Second fusion", p.score(second)))

    final = systems[-1]
    last_model = next((s.model for s in reversed(systems) if s.model is not None), None)
    if last_model is not None:
        reports = per_recording_reports(last_model, p.test.features, p.test.truth,
                                        cfg.adapt.threshold, cfg.scoring)
        per_speaker = der_by_speaker_count(zip(p.test.speaker_counts, reports))
    else:
        per_speaker = {}
    return RecipeResult(recipe, seed_report, final, systems, logs, per_speaker)
