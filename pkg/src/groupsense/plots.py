"""Deterministic SVG figures from the metrics and curve files."""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_RC = {"svg.hashsalt": "groupsense", "svg.fonttype": "path"}


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_pr_curves(curves, npc_ap, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        for name, label in (("model", "GBDT"), ("np", "NP")):
            c = curves[curves["curve"] == name]
            if len(c):
                ax.step(c["recall"], c["precision"], where="post", label=label)
        ax.axhline(npc_ap, color="grey", linestyle="--", label="NPC")
        ax.set_xlabel("Recall")
        ax.set_ylabel("Precision")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1.02)
        ax.legend(loc="upper right")
        return _save(fig, path)


def plot_resolution_sweep(groups, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 4))
        for name, label, style in (("model", "GBDT", "-"), ("np", "NP", ":")):
            rows = groups[name]["sweep"]
            g = [r["resolution"] for r in rows]
            ax.plot(g, [r["node_accuracy"] for r in rows], style, marker="o", label=f"{label} node")
            ax.plot(g, [r["group_accuracy"] for r in rows], style, marker="s", label=f"{label} group")
        ax.set_xlabel("Resolution")
        ax.set_ylabel("Accuracy")
        ax.set_ylim(0, 1.02)
        ax.legend(loc="lower right", fontsize="small")
        return _save(fig, path)


def plot_ablation(ablation, prevalence, path):
    with plt.rc_context(_RC):
        fig, ax = plt.subplots(figsize=(5, 3.5))
        names = list(ablation)
        labels = ["all features" if n == "none" else f"without {n.replace('_', ' ')}" for n in names]
        ax.barh(labels, [ablation[n] for n in names], color="tab:blue")
        ax.axvline(prevalence, color="grey", linestyle="--", label="prevalence")
        ax.set_xlabel("Average precision")
        ax.set_xlim(0, 1)
        ax.invert_yaxis()
        ax.legend(loc="lower right")
        return _save(fig, path)


def write_plots(metrics, curves, out_dir):
    out = Path(out_dir)
    files = [plot_pr_curves(curves, metrics["link"]["npc"]["ap"], out / "pr_curves.svg"),
             plot_resolution_sweep(metrics["groups"], out / "resolution_sweep.svg")]
    if metrics.get("ablation"):
        files.append(plot_ablation(metrics["ablation"], metrics["prevalence"], out / "ablation.svg"))
    return files
