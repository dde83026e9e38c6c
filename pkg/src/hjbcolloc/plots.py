"""Render benchmark CSVs as figures next to the delimited output.

The CSVs remain the machine-readable contract; these figures are the
human-readable companion (error curves against N, and FD/RBF ratio bars).
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_error_curves(csv_text: str, out_path, title: str = "") -> Path:
    """Log-log Max/RMS error curves over N from a benchmark CSV."""
    rows = [r for r in csv.DictReader(io.StringIO(csv_text))]
    ns = [int(r["N"]) for r in rows]
    max_err = [float(r["max_error"]) for r in rows]
    rms_err = [float(r["rms_error"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.loglog(ns, max_err, "o-", label="Max error")
    ax.loglog(ns, rms_err, "s--", label="RMS error")
    ax.set_xlabel("N (collocation points)")
    ax.set_ylabel("error")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path


def plot_ratio_table(csv_text: str, out_path, title: str = "") -> Path:
    """FD-to-RBF error ratios against N, with the parity line marked."""
    rows = [r for r in csv.DictReader(io.StringIO(csv_text))]
    ns = [int(r["N"]) for r in rows]
    max_ratio = [float(r["max_ratio"]) for r in rows]
    rms_ratio = [float(r["rms_ratio"]) for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogx(ns, max_ratio, "o-", label="Max error ratio (FD/RBF)")
    ax.semilogx(ns, rms_ratio, "s--", label="RMS error ratio (FD/RBF)")
    ax.axhline(1.0, color="k", lw=0.8, alpha=0.6)
    ax.set_xlabel("N (collocation points)")
    ax.set_ylabel("ratio")
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return out_path
