"""Command-line driver: simulate | train-seed | run | score | report.

Exit codes: 0 success, 1 recipe failure, 2 config or parse error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..labels import RTTMParseError, parse_rttm
from ..metrics import format_breakdown_table, score_recordings
from ..model import TrainingDivergedError, load_model, save_model
from ..pseudo_label import AdaptationDivergedError
from ..simulate import dataset_stats, read_dataset, write_sample
from .config import SPLITS, ConfigError, dump_config, load_config
from .experiment import RECIPES, build_splits, run_recipe, train_seed
from .plots import render_figures
from .reports import TABLE, write_reports

logger = logging.getLogger("semidiar")

EXIT_OK, EXIT_FAILURE, EXIT_CONFIG = 0, 1, 2
SEED_MODEL = "seed.model"
DATA_DIR = "data"


class MissingArtifactError(RuntimeError):
    pass


def _data_dir(cfg, split: str) -> Path:
    return Path(cfg.output_dir) / DATA_DIR / split


def _load_raw_splits(cfg, names=SPLITS):
    raw = {}
    for name in names:
        path = _data_dir(cfg, name)
        if not path.is_dir():
            raise MissingArtifactError(f"dataset not found: {path} (run 'simulate' first)")
        raw[name] = read_dataset(path)
    return raw


def _load_seed(cfg):
    path = Path(cfg.output_dir) / SEED_MODEL
    if not path.exists():
        raise MissingArtifactError(f"seed model not found: {path} (run 'train-seed' first)")
    return load_model(path)


def format_stats_block(stats: dict[str, dict]) -> str:
    lines = [f"{'split':<6} {'mixtures':>8} {'speakers':>8} {'mean dur (s)':>12} {'overlap (%)':>11}"]
    for name, st in stats.items():
        lo, hi = st["speaker_range"]
        lines.append(f"{name:<6} {st['num_mixtures']:>8d} {f'{lo}-{hi}':>8} "
                     f"{st['mean_duration']:>12.1f} {100 * st['overlap_ratio']:>11.1f}")
    return "\n".join(lines) + "\n"


def cmd_simulate(cfg, args) -> int:
    out = Path(cfg.output_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.txt").write_text(dump_config(cfg))
    except OSError as exc:
        raise MissingArtifactError(f"cannot write to {out}: {exc}") from None
    splits = build_splits(cfg)
    stats = {}
    for name, split in splits.items():
        # drop files left by an earlier, larger simulation
        for pattern in ("*.dsf", "*.rttm"):
            for stale in _data_dir(cfg, name).glob(pattern):
                stale.unlink()
        for sample in split.raw:
            write_sample(sample, _data_dir(cfg, name))
        stats[name] = dataset_stats(split.raw)
    print(format_stats_block(stats), end="")
    return EXIT_OK


def cmd_train_seed(cfg, args) -> int:
    raw = _load_raw_splits(cfg, ("train",))
    splits = build_splits(cfg, raw)
    model, curve = train_seed(cfg, splits["train"])
    path = Path(cfg.output_dir) / SEED_MODEL
    save_model(model, path)
    print(f"seed model: {path} (final training loss {curve[-1]:.4f})" if curve
          else f"seed model: {path}")
    return EXIT_OK


def cmd_run(cfg, args) -> int:
    seed_model = _load_seed(cfg)
    splits = build_splits(cfg, _load_raw_splits(cfg, ("adapt", "test")))
    result = run_recipe(cfg, args.recipe, splits, seed_model)
    run_dir = Path(cfg.output_dir) / args.recipe
    write_reports(result, run_dir)
    if result.final.model is not None:
        save_model(result.final.model, run_dir / "final.model")
    print((run_dir / TABLE).read_text(), end="")
    return EXIT_OK


def cmd_score(cfg, args) -> int:
    refs = parse_rttm(Path(args.ref).read_text())
    hyps = {a.recording_id: a for a in parse_rttm(Path(args.hyp).read_text())}
    ref_ids = {a.recording_id for a in refs}
    if ref_ids != set(hyps):
        only_ref = sorted(ref_ids - set(hyps))
        only_hyp = sorted(set(hyps) - ref_ids)
        raise ConfigError(f"recording ids differ: only in ref {only_ref}, only in hyp {only_hyp}")
    collar = cfg.scoring.collar if args.collar is None else args.collar
    paired = [hyps[r.recording_id] for r in refs]
    report = score_recordings(refs, paired, collar, cfg.scoring.frame_period)
    print(format_breakdown_table([(args.name, report)]), end="")
    return EXIT_OK


def cmd_report(cfg, args) -> int:
    out = Path(cfg.output_dir)
    run_dirs = [out / args.recipe] if args.recipe else sorted(
        p for p in out.iterdir() if p.is_dir() and (p / TABLE).exists()) if out.is_dir() else []
    if not run_dirs or not all((d / TABLE).exists() for d in run_dirs):
        raise MissingArtifactError(f"no recipe reports under {out} (run 'run' first)")
    for d in run_dirs:
        print(f"== {d.name}")
        print((d / TABLE).read_text(), end="")
        for fig in render_figures(d):
            print(f"figure: {fig}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="semidiar", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="flat key = value config file")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one config key (repeatable)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("simulate", parents=[common], help="write the three dataset splits")
    sub.add_parser("train-seed", parents=[common], help="train the seed model on the train split")
    run = sub.add_parser("run", parents=[common], help="run one adaptation recipe")
    run.add_argument("--recipe", required=True, choices=RECIPES)
    score = sub.add_parser("score", parents=[common], help="score a hypothesis RTTM")
    score.add_argument("ref", type=Path)
    score.add_argument("hyp", type=Path)
    score.add_argument("--collar", type=float, default=None, help="seconds (default from config)")
    score.add_argument("--name", default="System", help="row label in the printed table")
    report = sub.add_parser("report", parents=[common], help="print tables and draw figures")
    report.add_argument("--recipe", choices=RECIPES, default=None)
    return parser


COMMANDS = {"simulate": cmd_simulate, "train-seed": cmd_train_seed, "run": cmd_run,
            "score": cmd_score, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.overrides)
        return COMMANDS[args.command](cfg, args)
    except (ConfigError, RTTMParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: file not found: {exc.filename or exc}", file=sys.stderr)
        return EXIT_CONFIG if args.command == "score" else EXIT_FAILURE
    except (MissingArtifactError, TrainingDivergedError, AdaptationDivergedError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
