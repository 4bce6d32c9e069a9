"""Report figures.  Each function writes one PNG and returns its path."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .randtest import CRITERION1_HIGH, CRITERION1_LOW  # noqa: E402

# pass rates (%) published for the full seed population
REFERENCE_PASS_RATES = {
    "frequency": 86.55,
    "serial": 100.0,
    "poker": 80.89,
    "runs_short": 97.74,
    "runs_long": 100.0,
    "autocorrelation": 100.0,
}

RC = {
    "figure.figsize": (6.4, 4.0),
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "savefig.dpi": 120,
    "savefig.bbox": "tight",
}


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    plt.close(fig)
    return path


def word_histogram(freq: np.ndarray, path) -> Path:
    """Sorted 16-bit word frequencies against the criterion-1 band."""
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.plot(np.sort(freq) * 2 ** 16, lw=1, color="C0", label="measured")
        ax.axhline(CRITERION1_LOW * 2 ** 16, color="C3", ls="--", lw=1, label="band")
        ax.axhline(CRITERION1_HIGH * 2 ** 16, color="C3", ls="--", lw=1)
        ax.set_xlabel("word value rank")
        ax.set_ylabel(r"frequency $\times 2^{16}$")
        ax.set_title("16-bit word frequencies")
        ax.legend()
        return _save(fig, path)


def walsh_histogram(spectrum: np.ndarray, path) -> Path:
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        mags, counts = np.unique(np.abs(spectrum), return_counts=True)
        ax.bar(mags, counts, width=max(1, mags.max() / 200), color="C0")
        ax.set_yscale("log")
        ax.set_xlabel("|W(a)|")
        ax.set_ylabel("masks")
        ax.set_title("Walsh spectrum of the filter")
        return _save(fig, path)


def battery_pass_rates(percentages: dict, path, reference: dict = REFERENCE_PASS_RATES) -> Path:
    names = list(percentages)
    x = np.arange(len(names))
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.bar(x - 0.2, [percentages[k] for k in names], 0.4, label="measured")
        ax.bar(x + 0.2, [reference.get(k, np.nan) for k in names], 0.4, label="published")
        ax.set_xticks(x, names, rotation=30, ha="right")
        ax.set_ylabel("seeds passing (%)")
        ax.set_ylim(0, 105)
        ax.legend(loc="lower left")
        return _save(fig, path)


def autocorrelation_shifts(z: dict, threshold: float, path) -> Path:
    shifts = [int(d) for d in z]
    with plt.rc_context(RC):
        fig, ax = plt.subplots()
        ax.stem(shifts, [z[d] for d in z])
        for s in (-threshold, threshold):
            ax.axhline(s, color="C3", ls="--", lw=1)
        ax.set_xlabel("shift d")
        ax.set_ylabel("X5(d)")
        ax.set_title("autocorrelation statistic per shift")
        return _save(fig, path)
