"""Figure rendering for sweep reports.

Charts are written next to the delimited output so a sweep leaves both a
machine-readable CSV and a quick visual summary. Rendering is headless
(Agg) and has no bearing on the deterministic artifacts.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def render_sweep_figure(rows: list[tuple[str, float, float, float]],
                        param_name: str, out_path) -> Path:
    """Plot accuracy and mIoU against the swept parameter values.

    rows are (value, accuracy, miou, duration_s) tuples as written to the
    CSV. Numeric parameter values get a numeric axis; enum-valued sweeps
    fall back to categorical positions.
    """
    values = [r[0] for r in rows]
    accuracy = [r[1] for r in rows]
    miou = [r[2] for r in rows]

    try:
        xs = [float(v) for v in values]
        labels = None
    except ValueError:
        xs = list(range(len(values)))
        labels = values

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(xs, accuracy, marker="o", label="accuracy")
    ax.plot(xs, miou, marker="s", label="mIoU")
    if labels is not None:
        ax.set_xticks(xs)
        ax.set_xticklabels(labels)
    ax.set_xlabel(param_name)
    ax.set_ylabel("metric")
    ax.set_ylim(-0.02, 1.02)
    ax.grid(True, alpha=0.4)
    ax.legend()
    ax.set_title(f"sweep over {param_name}")
    fig.tight_layout()
    out_path = Path(out_path)
    fig.savefig(out_path, dpi=150)
    plt.close(fig)
    return out_path
