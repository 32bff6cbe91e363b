"""Render sweep and probe results to figure files next to the CSV output."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .harness import ProbeRecord, SweepRecord

_SERIES_STYLE = {
    "estimated": dict(color="tab:blue", marker="o"),
    "perfect": dict(color="tab:green", marker="s"),
}


def _positive(values):
    arr = np.asarray(values, dtype=float)
    return np.where(arr > 0, arr, np.nan)


def render_mse_figure(records: Sequence[SweepRecord], path: str | Path,
                      title: str = "") -> Path:
    """Analytical curve as a line, simulated values as markers, SI floor dashed."""
    records = sorted(records, key=lambda r: r.ebno_db)
    ebno = [r.ebno_db for r in records]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.semilogy(ebno, _positive([r.mse_analytical for r in records]),
                "-", color="tab:blue", label="analytical")
    ax.semilogy(ebno, _positive([r.mse_simulated for r in records]),
                "o", color="tab:red", mfc="none", label="simulated")
    floor = records[0].si_floor
    if floor and floor > 0:
        ax.axhline(floor, color="gray", linestyle="--", linewidth=1,
                   label="SI floor")
    ax.set_xlabel("Eb/No (dB)")
    ax.set_ylabel("estimator MSE")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def render_ber_figure(records: Sequence[SweepRecord], path: str | Path,
                      title: str = "") -> Path:
    """BER vs Eb/No, one series per CSI mode."""
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for csi in dict.fromkeys(r.csi for r in records):
        series = sorted((r for r in records if r.csi == csi), key=lambda r: r.ebno_db)
        style = _SERIES_STYLE.get(csi, dict(marker="x"))
        ax.semilogy([r.ebno_db for r in series],
                    _positive([r.ber for r in series]),
                    linestyle="-", label=f"{csi} CSI", **style)
    ax.set_xlabel("Eb/No (dB)")
    ax.set_ylabel("BER")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)


def render_probe_figure(records: Sequence[ProbeRecord], path: str | Path,
                        title: str = "") -> Path:
    """|R| slices along the frequency and time lags, empirical vs closed form."""
    fig, axes = plt.subplots(1, 2, figsize=(9.0, 4.0), sharey=True)
    slices = (
        (axes[0], [r for r in records if r.delta_q == 0], "delta_n", "frequency lag"),
        (axes[1], [r for r in records if r.delta_n == 0], "delta_q", "time lag"),
    )
    for ax, rows, attr, label in slices:
        rows = sorted(rows, key=lambda r: getattr(r, attr))
        lags = [getattr(r, attr) for r in rows]
        ana = [abs(complex(r.r_analytical_re, r.r_analytical_im)) for r in rows]
        emp = [abs(complex(r.r_empirical_re, r.r_empirical_im)) for r in rows]
        ax.plot(lags, ana, "-", color="tab:blue", label="closed form")
        ax.plot(lags, emp, "o", color="tab:red", mfc="none", label="measured")
        ax.set_xlabel(label)
        ax.grid(True, alpha=0.3)
    axes[0].set_ylabel("|R|")
    axes[0].legend()
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return Path(path)
