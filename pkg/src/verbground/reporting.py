"""Report serialization: JSON, delimited CSV, and matplotlib figures.

Report JSON is written with sorted keys and no timestamps so identical
evaluations produce identical bytes. Figures are rendered to files next
to the delimited output (PNG bytes are not part of any determinism
contract).
"""

from __future__ import annotations

import csv
import json

from .evaluation import EvalReport, SweepRow

# Analytic random-ranker baseline for single-gold five-candidate tasks.
RANDOM_TOP1 = 20.0
RANDOM_TOP2 = 40.0

# Reported crowd-worker accuracy on the retrieval task; a documented
# constant for reference lines, never computed here.
HUMAN_TOP1_BASELINE = 78.0


def write_json(payload: dict, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        json.dump(payload, handle, indent=2, sort_keys=True)
        handle.write("\n")


def write_eval_report(
    report: EvalReport, json_path, csv_path=None, figure_path=None
) -> None:
    write_json(report.to_dict(), json_path)
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["label", "top1_mean", "top1_se", "top2_mean", "top2_se"])
            writer.writerow(["random", RANDOM_TOP1, 0.0, RANDOM_TOP2, 0.0])
            writer.writerow(
                [
                    f"model ({report.mode})",
                    report.top1_mean,
                    report.top1_se,
                    report.top2_mean,
                    report.top2_se,
                ]
            )
    if figure_path is not None:
        render_per_verb_figure(report, figure_path)


def render_per_verb_figure(report: EvalReport, path) -> None:
    """Bar chart of per-verb top-1/top-2 accuracy with overall means."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    verbs = list(report.per_verb)
    top1 = [report.per_verb[v]["top1"] for v in verbs]
    top2 = [report.per_verb[v]["top2"] for v in verbs]
    positions = range(len(verbs))

    fig, ax = plt.subplots(figsize=(max(6.0, 0.6 * len(verbs) + 2.0), 4.0))
    ax.bar([p - 0.2 for p in positions], top1, width=0.4, label="top-1")
    ax.bar([p + 0.2 for p in positions], top2, width=0.4, label="top-2")
    ax.axhline(report.top1_mean, color="C0", linestyle=":", linewidth=1)
    ax.axhline(RANDOM_TOP1, color="gray", linestyle="--", linewidth=1, label="random top-1")
    ax.set_xticks(list(positions))
    ax.set_xticklabels(verbs, rotation=45, ha="right")
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title(f"retrieval accuracy by verb ({report.mode}, {report.runs} runs)")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def sweep_to_dict(rows: list[SweepRow], config_fingerprint: str = "") -> dict:
    return {
        "rows": [row.to_dict() for row in rows],
        "random": {"top1": RANDOM_TOP1, "top2": RANDOM_TOP2},
        "human_top1": HUMAN_TOP1_BASELINE,
        "config_fingerprint": config_fingerprint,
    }


def write_sweep_report(
    rows: list[SweepRow],
    json_path=None,
    csv_path=None,
    figure_path=None,
    config_fingerprint: str = "",
) -> None:
    if json_path is not None:
        write_json(sweep_to_dict(rows, config_fingerprint), json_path)
    if csv_path is not None:
        with open(csv_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(["data_size", "top1_mean", "top1_se", "top2_mean", "top2_se"])
            writer.writerow(["random", RANDOM_TOP1, 0.0, RANDOM_TOP2, 0.0])
            for row in rows:
                writer.writerow(
                    [row.data_size, row.top1_mean, row.top1_se, row.top2_mean, row.top2_se]
                )
    if figure_path is not None:
        render_sweep_figure(rows, figure_path)


def render_sweep_figure(rows: list[SweepRow], path, show_human: bool = True) -> None:
    """Accuracy versus data size with standard-error bars, against the
    analytic random baseline and the constant human reference line."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    sizes = [row.data_size for row in rows]
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    ax.errorbar(
        sizes,
        [row.top1_mean for row in rows],
        yerr=[row.top1_se for row in rows],
        marker="o",
        capsize=3,
        label="top-1",
    )
    ax.errorbar(
        sizes,
        [row.top2_mean for row in rows],
        yerr=[row.top2_se for row in rows],
        marker="s",
        capsize=3,
        label="top-2",
    )
    ax.axhline(RANDOM_TOP1, color="gray", linestyle="--", linewidth=1, label="random top-1")
    ax.axhline(RANDOM_TOP2, color="silver", linestyle="--", linewidth=1, label="random top-2")
    if show_human:
        ax.axhline(
            HUMAN_TOP1_BASELINE,
            color="black",
            linestyle=":",
            linewidth=1,
            label="human top-1 (reported)",
        )
    ax.set_xlabel("positive training pairs")
    ax.set_ylabel("accuracy (%)")
    ax.set_ylim(0, 105)
    ax.set_title("retrieval accuracy vs. training data size")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_task_dump(tasks, path) -> None:
    """Audit dump: one task per line as JSON."""
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        for task in tasks:
            handle.write(json.dumps(task.to_dict(), sort_keys=True) + "\n")
