"""CSV and plain-text renderings of recipe results."""

from __future__ import annotations

import csv
import io
from pathlib import Path

from ..metrics import der_report_csv, format_breakdown_table
from ..pseudo_label import round_logs_csv
from .experiment import RecipeResult

ROUND_LOGS = "round_logs.csv"
FINAL_REPORT = "final_report.csv"
PER_SPEAKER = "per_speaker.csv"
SYSTEMS = "systems.csv"
TABLE = "report.txt"


def per_speaker_csv(table: dict[int, float]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["num_speakers", "der"])
    for count, der in sorted(table.items()):
        writer.writerow([count, f"{der:.2f}"])
    return buf.getvalue()


def systems_csv(result: RecipeResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["system", "DER", "MI", "FA", "CF"])
    for system in result.systems:
        pct = system.report.as_percent()
        writer.writerow([system.name] + [f"{pct[k]:.2f}" for k in ("DER", "MI", "FA", "CF")])
    return buf.getvalue()


def summary_line(result: RecipeResult) -> str:
    seed = 100 * result.seed_report.der
    final = 100 * result.final.report.der
    return (f"{result.recipe}: seed DER {seed:.2f}% -> {result.final.name} {final:.2f}%, "
            f"relative reduction {result.relative_reduction:.1f}%")


def render_text(result: RecipeResult) -> str:
    table = format_breakdown_table([(s.name, s.report) for s in result.systems])
    lines = [table, summary_line(result)]
    if result.per_speaker:
        lines.append("DER by number of speakers: " + ", ".join(
            f"{k}: {v:.2f}%" for k, v in sorted(result.per_speaker.items())))
    return "\n".join(lines) + "\n"


def write_reports(result: RecipeResult, out_dir: str | Path) -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {
        ROUND_LOGS: round_logs_csv(result.round_logs),
        FINAL_REPORT: der_report_csv(result.final.report),
        PER_SPEAKER: per_speaker_csv(result.per_speaker),
        SYSTEMS: systems_csv(result),
        TABLE: render_text(result),
    }
    paths = {}
    for name, text in files.items():
        path = out / name
        path.write_text(text)
        paths[name] = path
    return paths


def read_csv_rows(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))
