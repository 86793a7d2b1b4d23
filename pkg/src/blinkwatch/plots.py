"""Figure rendering for the report paths; always writes to files."""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .evaluation import GdrReport

_LEVEL_COLORS = ("tab:green", "gold", "tab:red")


def save_gdr_figure(reports: Sequence[GdrReport], path) -> None:
    """Bar chart comparing the good-detection rates of the approaches."""
    fig, ax = plt.subplots(figsize=(7, 4))
    names = [r.approach for r in reports]
    values = [r.percentage for r in reports]
    bars = ax.bar(names, values, color=["tab:blue", "tab:orange", "tab:green"][:len(names)])
    for bar, r in zip(bars, reports):
        ax.annotate(f"{r.percentage:.2f}%\n({r.detected}/{r.total})",
                    (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                    ha="center", va="bottom", fontsize=9)
    ax.set_ylabel("good detection rate [%]")
    ax.set_ylim(0, 105)
    ax.set_title("Detection performance by approach")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_track_figure(records: Sequence[dict], alerts: Sequence[dict],
                      closure_threshold: float, path) -> None:
    """Timeline of closure run, PERCLOS and level for a tracked stream."""
    t = [r["t"] for r in records]
    fig, axes = plt.subplots(3, 1, figsize=(9, 6), sharex=True)

    axes[0].plot(t, [r["run_s"] for r in records], color="tab:blue")
    axes[0].axhline(closure_threshold, color="tab:red", linestyle="--", linewidth=1,
                    label=f"threshold {closure_threshold:g}s")
    axes[0].set_ylabel("closure run [s]")
    axes[0].legend(loc="upper left", fontsize=8)

    axes[1].plot(t, [r["perclos"] for r in records], color="tab:purple")
    axes[1].set_ylabel("PERCLOS")
    axes[1].set_ylim(-0.05, 1.05)

    levels = [r["level"] for r in records]
    axes[2].step(t, levels, where="post", color="black", linewidth=1)
    for rec in records:
        axes[2].plot(rec["t"], rec["level"], ".", color=_LEVEL_COLORS[rec["level"]],
                     markersize=4)
    for a in alerts:
        axes[2].axvline(a["t"], color="tab:red" if a["to"] == 2 else "gray",
                        linestyle=":", linewidth=1)
    axes[2].set_yticks([0, 1, 2], ["green", "yellow", "red"])
    axes[2].set_ylabel("level")
    axes[2].set_xlabel("time [s]")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_detection_figure(image, face, eyes, pitch, path) -> None:
    """Single-image overlay: face box, eye boxes and the pitch readout."""
    fig, ax = plt.subplots(figsize=(6, 6 * image.height / max(image.width, 1)))
    ax.imshow(image.pixels, cmap="gray", vmin=0, vmax=255)
    if face is not None:
        r = face.rect
        ax.add_patch(plt.Rectangle((r.x, r.y), r.w, r.h, fill=False,
                                   edgecolor="tab:blue", linewidth=2))
    for eye in eyes:
        if eye is None:
            continue
        r = eye.rect
        ax.add_patch(plt.Rectangle((r.x, r.y), r.w, r.h, fill=False,
                                   edgecolor="tab:orange", linewidth=1.5))
    title = "no face" if face is None else (
        f"pitch {pitch:.2f} deg" if pitch is not None else "eyes not found")
    ax.set_title(title)
    ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
