"""Render training-history curves to SVG files.

Output is byte-deterministic: the SVG id hash salt is pinned and the
creation date metadata is stripped, so identical histories produce
identical files.
"""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .training import HistoryRow  # noqa: E402

__all__ = ["render_history_figures"]

_PHASE_COLORS = ("#dbeafe", "#dcfce7", "#fee2e2")

_RC = {
    "svg.hashsalt": "easl",
    "figure.figsize": (7.0, 4.2),
    "axes.grid": True,
    "grid.alpha": 0.3,
}


def _phase_spans(rows: list[HistoryRow]) -> list[tuple[int, float, float]]:
    """(phase, first_epoch, last_epoch) for each contiguous phase > 0 block."""
    spans = []
    for row in rows:
        if row.phase <= 0:
            continue
        if spans and spans[-1][0] == row.phase:
            spans[-1] = (row.phase, spans[-1][1], row.epoch)
        else:
            spans.append((row.phase, row.epoch, row.epoch))
    return spans


def _decorate_phases(ax, rows: list[HistoryRow]) -> None:
    spans = _phase_spans(rows)
    for i, (phase, start, end) in enumerate(spans):
        left = start - 0.5
        ax.axvspan(left, end + 0.5, color=_PHASE_COLORS[(phase - 1) % 3], zorder=0)
        if i > 0:
            ax.axvline(left, color="#555555", linewidth=0.8, linestyle="--")
        ax.text(
            (left + end + 0.5) / 2.0,
            0.98,
            f"phase {phase}",
            transform=ax.get_xaxis_transform(),
            ha="center",
            va="top",
            fontsize=8,
            color="#333333",
        )


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def render_history_figures(rows: list[HistoryRow], outdir) -> list[str]:
    """Write loss and similarity curve SVGs; returns the created paths."""
    os.makedirs(outdir, exist_ok=True)
    epochs = [r.epoch for r in rows]
    marker = "o" if len(rows) < 2 else None
    outputs = []
    with plt.rc_context(_RC):
        fig, ax = plt.subplots()
        ax.plot(epochs, [r.loss_pose for r in rows], marker=marker, label="pose loss")
        ax.plot(epochs, [r.loss_emo for r in rows], marker=marker, label="emotion loss")
        ax.plot(epochs, [r.loss_total for r in rows], marker=marker, label="total loss")
        _decorate_phases(ax, rows)
        ax.set_xlabel("epoch")
        ax.set_ylabel("mean absolute error")
        ax.set_title("training loss")
        ax.legend(loc="upper right")
        path = os.path.join(outdir, "losses.svg")
        _save(fig, path)
        outputs.append(path)

        fig, ax = plt.subplots()
        ax.plot(epochs, [r.rho_sem for r in rows], marker=marker, label="semantic vs reference")
        ax.plot(epochs, [r.rho_emo for r in rows], marker=marker, label="emotion vs reference")
        ax.plot(epochs, [r.rho_cross for r in rows], marker=marker, label="semantic vs emotion")
        _decorate_phases(ax, rows)
        ax.set_xlabel("epoch")
        ax.set_ylabel("normalized cosine similarity")
        ax.set_ylim(0.0, 1.05)
        ax.set_title("representation similarity")
        ax.legend(loc="lower right")
        path = os.path.join(outdir, "similarity.svg")
        _save(fig, path)
        outputs.append(path)
    return outputs
