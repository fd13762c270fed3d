"""Render the report CSVs as PNG figures.

Figures are drawn only from the CSV files already written, so a plot always
shows exactly the numbers next to it on disk.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from glottokit._io import parse_float, read_csv_rows  # noqa: E402

STYLE = {
    "figure.figsize": (5.5, 4.5),
    "figure.dpi": 100,
    "font.size": 10,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
}

COLORS = {"data": "#2a7d4f", "random": "#d4a017", "identity": "#1f5fbf", "band": "#d4a017"}


def _columns(path, *names):
    rows = read_csv_rows(path)
    return [np.array([parse_float(r[n]) for r in rows]) for n in names]


def _save(fig, path: Path) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    # no Software/date metadata so reruns are byte-identical
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def scatter(csv_path, png_path, x: str, y: str, xlabel: str, ylabel: str, fit_slope: float | None = None) -> Path:
    xs, ys = _columns(csv_path, x, y)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.scatter(xs, ys, s=12, color=COLORS["data"])
        if fit_slope is not None:
            grid = np.linspace(0, np.nanmax(ys) if np.isfinite(ys).any() else 1.0, 50)
            ax.plot(fit_slope * grid, grid, color="grey", lw=1, label=f"{x} = {fit_slope:.3g} {y}")
            ax.legend(frameon=False)
        ax.set_xlabel(xlabel)
        ax.set_ylabel(ylabel)
        return _save(fig, Path(png_path))


def count_curve(csv_path, png_path, label: str) -> Path:
    m, c, rand, ident, bm, bs = _columns(
        csv_path, "m", "c", "baseline_random", "baseline_identity", "band_mean", "band_sd"
    )
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        if np.isfinite(bm).all():
            ax.fill_between(m, bm - 3 * bs, bm + 3 * bs, color=COLORS["band"], alpha=0.2, lw=0,
                            label="random, 3 sd")
        ax.plot(m, ident, color=COLORS["identity"], lw=1, label="c(m) = m")
        ax.plot(m, rand, color=COLORS["random"], lw=1, label="c(m) = m²/M")
        ax.plot(m, c, color=COLORS["data"], lw=1.5, label=label)
        ax.set_xlabel("m")
        ax.set_ylabel("c(m)")
        ax.legend(frameon=False)
        return _save(fig, Path(png_path))


def histogram(csv_path, png_path) -> Path:
    lo, hi, fr, fs = _columns(csv_path, "bin_lo", "bin_hi", "freq_r", "freq_s")
    panels = ([(fr, "actual rates r")] if np.isfinite(fr).all() else []) + [(fs, "estimated rates s")]
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(1, len(panels), sharey=True, squeeze=False,
                                 figsize=(4.0 * len(panels), 3.5))
        for ax, (freq, title) in zip(axes[0], panels):
            ax.bar(lo, freq, width=hi - lo, align="edge", color=COLORS["data"], edgecolor="white")
            ax.set_title(title)
            ax.set_xlabel("rate per millennium")
        axes[0][0].set_ylabel("frequency")
        return _save(fig, Path(png_path))


def render_all(report_dir, figure_dir) -> dict[str, Path]:
    """Draw every figure whose CSV exists in ``report_dir``."""
    src, dst = Path(report_dir), Path(figure_dir)
    made = {}
    slope = None
    if (src / "lambda.csv").exists():
        kv = {r["key"]: r["value"] for r in read_csv_rows(src / "lambda.csv")}
        if "regression_lambda" in kv:
            slope = float(kv["regression_lambda"])
    if (src / "stability_scatter.csv").exists():
        made["stability_scatter_png"] = scatter(src / "stability_scatter.csv", dst / "stability_scatter.png",
                                   "R", "S", "actual stability R", "estimated stability S")
    if (src / "rank_curve.csv").exists():
        made["rank_curve_png"] = count_curve(src / "rank_curve.csv", dst / "rank_curve.png", "R vs S rankings")
    if (src / "rate_scatter.csv").exists():
        made["rate_scatter_png"] = scatter(src / "rate_scatter.csv", dst / "rate_scatter.png",
                                   "r", "s", "actual rate r", "estimated rate s", fit_slope=slope)
    if (src / "rate_histogram.csv").exists():
        made["rate_histogram_png"] = histogram(src / "rate_histogram.csv", dst / "rate_histogram.png")
    if (src / "family_curve.csv").exists():
        made["family_curve_png"] = count_curve(src / "family_curve.csv", dst / "family_curve.png",
                                       "family rankings")
    return made
