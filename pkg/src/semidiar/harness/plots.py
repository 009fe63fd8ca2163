"""PNG figures drawn from the CSVs a recipe run leaves behind."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .reports import PER_SPEAKER, ROUND_LOGS, SYSTEMS, read_csv_rows  # noqa: E402

FIGSIZE = (5.0, 3.2)
STYLE = {
    "font.size": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 120,
}


def _save(fig, path: Path) -> Path:
    fig.tight_layout()
    # no version stamp, so reruns give byte-identical files
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_rounds(rows: list[dict[str, str]], path: Path) -> Path | None:
    pts = [(int(r["round"]), float(r["der"])) for r in rows if r.get("der")]
    if not pts:
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", color="tab:blue")
        ax.set_xlabel("round")
        ax.set_ylabel("DER (%)")
        ax.set_xticks([p[0] for p in pts])
        ax.set_ylim(bottom=0)
        ax.grid(alpha=0.3)
        return _save(fig, path)


def plot_systems(rows: list[dict[str, str]], path: Path) -> Path | None:
    if not rows:
        return None
    parts = ("MI", "FA", "CF")
    colors = ("tab:orange", "tab:red", "tab:purple")
    names = [r["system"] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(FIGSIZE[0], 0.45 * len(rows) + 1.2))
        left = [0.0] * len(rows)
        for part, color in zip(parts, colors):
            vals = [float(r[part]) for r in rows]
            ax.barh(names, vals, left=left, color=color, label=part)
            left = [a + b for a, b in zip(left, vals)]
        ax.invert_yaxis()
        ax.set_xlabel("DER (%)")
        ax.legend(loc="lower right", frameon=False)
        return _save(fig, path)


def plot_per_speaker(rows: list[dict[str, str]], path: Path) -> Path | None:
    if not rows:
        return None
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=FIGSIZE)
        counts = [r["num_speakers"] for r in rows]
        ax.bar(counts, [float(r["der"]) for r in rows], color="tab:green")
        ax.set_xlabel("speakers per recording")
        ax.set_ylabel("DER (%)")
        return _save(fig, path)


def render_figures(run_dir: str | Path) -> list[Path]:
    """Draw every figure whose source CSV exists in ``run_dir``."""
    run_dir = Path(run_dir)
    jobs = ((ROUND_LOGS, plot_rounds, "rounds.png"),
            (SYSTEMS, plot_systems, "systems.png"),
            (PER_SPEAKER, plot_per_speaker, "per_speaker.png"))
    written = []
    for source, fn, target in jobs:
        src = run_dir / source
        if src.exists():
            out = fn(read_csv_rows(src), run_dir / target)
            if out is not None:
                written.append(out)
    return written
