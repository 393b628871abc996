"""Report emission: json, delimited tables, and matplotlib figures.

Every writer is deterministic for identical payloads: json is dumped
with sorted keys, tables carry no timestamps, and PNG metadata that
would vary between runs is suppressed.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

PNG_METADATA = {"Software": None}   # drop the version string for stable bytes


def write_json(payload: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True, indent=2) + "\n",
                    encoding="utf-8")
    return path


def _format_cell(value) -> str:
    if value is None:
        return "-"
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def write_table(rows: list[list], header: list[str], path, delimiter: str = "\t") -> Path:
    """Delimited table plus an aligned plain-text twin next to it."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [delimiter.join(header)]
    lines += [delimiter.join(_format_cell(cell) for cell in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")

    cells = [header] + [[_format_cell(c) for c in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(header))]
    aligned = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip()
               for row in cells]
    path.with_suffix(".txt").write_text("\n".join(aligned) + "\n", encoding="utf-8")
    return path


def save_figure(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata=PNG_METADATA, dpi=120)
    plt.close(fig)
    return path


# ---------------------------------------------------------------------------
# Transfer matrix.

def transfer_table(matrix) -> tuple[list[str], list[list]]:
    header = ["substitute", "attack"] + [f"f:{t}" for t in matrix.targets] + \
             ["f_prime_acc", "success", "meteor", "change_rate"]
    rows = []
    for row in matrix.rows:
        rows.append([row.substitute or "-", row.attack] +
                    [row.target_accuracy[t] for t in matrix.targets] +
                    [row.substitute_accuracy, row.success_rate,
                     row.meteor_mean, row.change_rate_mean])
    return header, rows


def transfer_figure(matrix):
    """Post-attack accuracy per target model, grouped by attack row,
    with the chance level drawn across."""
    labels = [f"{row.substitute or ''}/{row.attack}".strip("/") for row in matrix.rows]
    x = range(len(matrix.rows))
    width = 0.8 / max(len(matrix.targets), 1)
    fig, ax = plt.subplots(figsize=(max(6.0, 1.2 * len(labels)), 4.0))
    for i, target in enumerate(matrix.targets):
        values = [row.target_accuracy[target] for row in matrix.rows]
        ax.bar([xi + i * width for xi in x], values, width=width, label=f"f = {target}")
    ax.axhline(matrix.chance_p, color="crimson", linestyle="--", linewidth=1,
               label=f"chance ({matrix.chance_p:.2f})")
    ax.set_xticks([xi + width * (len(matrix.targets) - 1) / 2 for xi in x])
    ax.set_xticklabels(labels, rotation=30, ha="right")
    ax.set_ylabel("post-attack accuracy")
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def write_transfer_report(matrix, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    header, rows = transfer_table(matrix)
    return {
        "json": write_json(matrix.to_dict(), out_dir / "transfer.json"),
        "table": write_table(rows, header, out_dir / "transfer.tsv"),
        "figure": save_figure(transfer_figure(matrix), out_dir / "figures" / "transfer.png"),
    }


# ---------------------------------------------------------------------------
# Robustness report.

def robustness_tables(report: dict) -> dict[str, tuple[list[str], list[list]]]:
    exp1 = report["experiment1_perturbed_positives"]
    header1 = ["augmenter", "n_samples", "tpr_perturbed", "tpr_originals", "meteor_mean"]
    rows1 = [[name, entry["n_samples"], entry["tpr"], entry["tpr_originals"],
              entry["meteor_mean"]] for name, entry in exp1.items()]

    exp2 = report["experiment2_augmented_training"]
    header2 = ["classifier", "f1", "accuracy"]
    rows2 = [[name, entry["f1"], entry["accuracy"]] for name, entry in exp2.items()]

    matrix = report["experiment3_tpr_matrix"]
    columns = list(next(iter(matrix.values())).keys())
    header3 = ["classifier \\ perturbation"] + columns
    rows3 = [[row_name] + [row[col] for col in columns]
             for row_name, row in matrix.items()]
    return {"experiment1": (header1, rows1), "experiment2": (header2, rows2),
            "experiment3": (header3, rows3)}


def robustness_figure(report: dict):
    """Delta TPR of each augmented classifier on its own augmenter's
    perturbations (the matrix diagonal), plus the transfer mean."""
    delta = report["experiment3_delta_tpr"]
    names = list(delta.keys())
    own = [delta[name].get(name) or 0.0 for name in names]
    others = []
    for name in names:
        cells = [v for col, v in delta[name].items()
                 if col not in (name, "plain") and v is not None]
        others.append(sum(cells) / len(cells) if cells else 0.0)
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(max(5.0, 1.4 * len(names)), 4.0))
    ax.bar([xi - 0.2 for xi in x], own, width=0.4, label="same augmenter")
    ax.bar([xi + 0.2 for xi in x], others, width=0.4, label="other augmenters (mean)")
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20, ha="right")
    ax.set_ylabel("delta TPR after augmentation")
    ax.legend(fontsize=8)
    fig.tight_layout()
    return fig


def write_robustness_report(report: dict, out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    written = {"json": write_json(report, out_dir / "robustness.json")}
    for name, (header, rows) in robustness_tables(report).items():
        written[name] = write_table(rows, header, out_dir / f"{name}.tsv")
    written["figure"] = save_figure(robustness_figure(report),
                                    out_dir / "figures" / "robustness.png")
    return written


# ---------------------------------------------------------------------------
# Attack run summary (single corpus, single substitute).

def attack_figure(change_rates: list[float], meteors: list[float]):
    fig, (left, right) = plt.subplots(1, 2, figsize=(8.0, 3.5))
    left.hist(change_rates, bins=20, range=(0.0, 1.0), color="steelblue")
    left.set_xlabel("change rate")
    left.set_ylabel("documents")
    right.hist(meteors, bins=20, range=(0.0, 1.0), color="seagreen")
    right.set_xlabel("METEOR-lite vs original")
    fig.tight_layout()
    return fig


def write_attack_report(summary: dict, change_rates: list[float],
                        meteors: list[float], out_dir) -> dict[str, Path]:
    out_dir = Path(out_dir)
    written = {"json": write_json(summary, out_dir / "summary.json")}
    header = ["metric", "value"]
    rows = [[key, value] for key, value in summary.items()
            if isinstance(value, (int, float, str)) and not isinstance(value, bool)]
    written["table"] = write_table(rows, header, out_dir / "summary.tsv")
    if change_rates:
        written["figure"] = save_figure(attack_figure(change_rates, meteors),
                                        out_dir / "figures" / "attack.png")
    return written
