"""Matplotlib figure export for the CLI report paths (headless, file-only)."""

from __future__ import annotations

from pathlib import Path
from typing import Optional

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bench import BenchReport
from .codec import RgbFieldImage


def save_field_figure(image: RgbFieldImage, path: Path | str, title: Optional[str] = None) -> None:
    """Render the RGB channel mapping of one field (row 0 at the bottom)."""
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.imshow(image.pixels, origin="lower")
    ax.set_xlabel("x (pixels)")
    ax.set_ylabel("y (pixels)")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_comparison_figure(
    original: RgbFieldImage, reconstructed: RgbFieldImage, path: Path | str
) -> None:
    """Side-by-side RGB mapping of a field and its token-decoded reconstruction."""
    fig, axes = plt.subplots(1, 2, figsize=(9, 4.5))
    for ax, img, title in (
        (axes[0], original, "original"),
        (axes[1], reconstructed, "reconstructed"),
    ):
        ax.imshow(img.pixels, origin="lower")
        ax.set_title(title)
        ax.set_xticks([])
        ax.set_yticks([])
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_accuracy_figure(report: BenchReport, path: Path | str) -> None:
    """Bar chart of the four task accuracies, written next to the delimited report."""
    tasks = [
        ("Categorize", report.categorize.accuracy),
        ("Reynolds", report.reynolds.accuracy),
        ("Vortex", report.vortex.accuracy),
        ("Field analysis", report.field_analysis.accuracy),
    ]
    labels = [name for name, _ in tasks]
    values = [acc if acc is not None else 0.0 for _, acc in tasks]
    fig, ax = plt.subplots(figsize=(6, 4))
    bars = ax.bar(labels, values, color="#4878a8")
    for bar, (_, acc) in zip(bars, tasks):
        text = "NA" if acc is None else f"{acc:.1f}"
        ax.annotate(
            text,
            xy=(bar.get_x() + bar.get_width() / 2, bar.get_height()),
            xytext=(0, 2),
            textcoords="offset points",
            ha="center",
        )
    ax.set_ylim(0, 105)
    ax.set_ylabel("Accuracy (%)")
    ax.set_title("Benchmark accuracy by task")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
