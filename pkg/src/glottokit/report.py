"""Full pipeline: overlaps, stabilities, rates, lambda, times and rankings.

:func:`run_report` writes one CSV per figure type plus the intermediate
tables, and optionally renders PNG figures from the same data.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from glottokit import chrono
from glottokit._io import atomic_csv, format_float
from glottokit.errors import ConfigurationError, GlottoError
from glottokit.metric import NLD_SCORER, SimilarityScorer, overlap_matrix, write_overlap_csv
from glottokit.ranking import (
    common_count_curve,
    compare_families,
    random_baseline_band,
    rank_items,
    write_curve_csv,
)
from glottokit.simgen import Truth
from glottokit.stability import (
    METHOD_REGRESSION,
    METHOD_SINGLE_PAIR,
    LambdaFit,
    RateProfile,
    actual_stability,
    align,
    estimated_stability,
    fit_lambda,
    paired_defined,
    pearson,
    rates_from_stability,
    spearman,
    write_scatter_csv,
    write_table_csv,
)
from glottokit.wordlist import LexicalDatabase

log = logging.getLogger(__name__)

HISTOGRAM_WIDTH = 0.1


@dataclass(frozen=True)
class Histogram:
    edges: np.ndarray
    frequency: np.ndarray
    n: int


def rate_histogram(rates: Sequence[float], width: float = HISTOGRAM_WIDTH, n_bins: int | None = None) -> Histogram:
    """Share of defined rates in consecutive half-open bins ``[k*width, (k+1)*width)``.

    Frequencies are counts over the number of defined rates, so they sum to 1.
    Without ``n_bins`` the bins run up to the first edge above the largest rate.
    """
    arr = np.asarray(rates, dtype=float)
    arr = arr[~np.isnan(arr)]
    idx = np.floor(arr / width + 1e-9).astype(int) if arr.size else np.zeros(0, dtype=int)
    if n_bins is None:
        n_bins = int(idx.max()) + 1 if idx.size else 1
    counts = np.bincount(idx, minlength=n_bins)[:n_bins].astype(float)
    freq = counts / arr.size if arr.size else counts
    return Histogram(np.arange(n_bins + 1) * width, freq, int(arr.size))


def write_histogram_csv(path, actual: Sequence[float] | None, estimated: Sequence[float]) -> None:
    est = np.asarray(estimated, dtype=float)
    act = None if actual is None else np.asarray(actual, dtype=float)
    top = max(np.nanmax(est) if np.isfinite(est).any() else 0.0,
              np.nanmax(act) if act is not None and np.isfinite(act).any() else 0.0)
    n_bins = int(math.floor(top / HISTOGRAM_WIDTH + 1e-9)) + 1
    h_s = rate_histogram(est, n_bins=n_bins)
    h_r = rate_histogram(act, n_bins=n_bins) if act is not None else None
    with atomic_csv(path, f"rate histogram, bin width {HISTOGRAM_WIDTH}, frequency = count / defined rates; "
                          "columns: bin_lo,bin_hi,freq_r,freq_s") as w:
        w.writerow(["bin_lo", "bin_hi", "freq_r", "freq_s"])
        for k in range(n_bins):
            w.writerow([
                format_float(round(h_s.edges[k], 10)), format_float(round(h_s.edges[k + 1], 10)),
                format_float(h_r.frequency[k] if h_r else None), format_float(h_s.frequency[k]),
            ])


def _write_kv(path, rows: list[tuple[str, object]], what: str) -> None:
    with atomic_csv(path, f"{what}; columns: key,value") as w:
        w.writerow(["key", "value"])
        for key, value in rows:
            if isinstance(value, float):
                value = format_float(value)
            w.writerow([key, value])


def lambda_for(
    db: LexicalDatabase,
    rates: RateProfile,
    *,
    lambda_: float | None = None,
    anchor: tuple[str, str, float] | None = None,
    regression: LambdaFit | None = None,
    scorer: SimilarityScorer = NLD_SCORER,
    tolerance: float = chrono.DEFAULT_TOLERANCE,
) -> tuple[float, str]:
    """Pick lambda: explicit value, else anchor calibration, else regression, else 1."""
    if lambda_ is not None:
        return lambda_, "explicit"
    if anchor is not None:
        a, b, T = anchor
        return chrono.calibrate_lambda(db, rates, (a, b), T, scorer, tolerance), METHOD_SINGLE_PAIR
    if regression is not None:
        return regression.lambda_, METHOD_REGRESSION
    return 1.0, "arbitrary-scale"


def run_report(
    db: LexicalDatabase,
    out_dir,
    *,
    T: float = chrono.VULGAR_LATIN_T,
    Ts: float = chrono.VULGAR_LATIN_T,
    method: str = chrono.METHOD_GENERALIZED,
    lambda_: float | None = None,
    anchor: tuple[str, str, float] | None = None,
    proto: str | None = None,
    scorer: SimilarityScorer = NLD_SCORER,
    tolerance: float = chrono.DEFAULT_TOLERANCE,
    families: tuple[LexicalDatabase, LexicalDatabase, str] | None = None,
    truth: Truth | None = None,
    trials: int = 10000,
    seed: int = 0,
    threads: int = 1,
    figures: bool = False,
) -> dict[str, Path]:
    """Run the whole pipeline on ``db`` and write everything under ``out_dir``.

    ``families`` is ``(family_a, family_b, label)`` for the cross-family
    ranking curve; it may be two sub-families of ``db``. Returns the written
    paths keyed by role.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written: dict[str, Path] = {}
    summary: list[tuple[str, object]] = [("family", db.family_name), ("N", db.N), ("M", db.M)]

    overlaps = overlap_matrix(db, scorer, threads=threads)
    write_overlap_csv(overlaps, out / "overlap.csv")
    written["overlap"] = out / "overlap.csv"

    S = estimated_stability(db, scorer)
    s = rates_from_stability(S, Ts)
    write_table_csv(S, out / "stability_estimated.csv")
    write_table_csv(s, out / "rates_estimated.csv")

    has_proto = bool(db.proto_indices()) or proto is not None
    R = r = fit = None
    if has_proto:
        R = actual_stability(db, scorer, proto=proto)
        r = rates_from_stability(R, T)
        write_table_csv(R, out / "stability_actual.csv")
        write_table_csv(r, out / "rates_actual.csv")
        write_scatter_csv(R, S, out / "stability_scatter.csv", "R", "S")
        write_scatter_csv(r, s, out / "rate_scatter.csv", "r", "s")
        written["stability_scatter"] = out / "stability_scatter.csv"
        written["rate_scatter"] = out / "rate_scatter.csv"
        fit = fit_lambda(r, s)
        x, y, dropped = paired_defined(*align(R, S))
        summary += [("pearson_R_S", pearson(x, y)), ("spearman_R_S", spearman(x, y)),
                    ("pairs_dropped_R_S", dropped)]

        both = [i for i, a, b in zip(R.item_ids, R.values, S.values) if not (math.isnan(a) or math.isnan(b))]
        curve = common_count_curve(rank_items(R.restrict(both)), rank_items(S.restrict(both)))
        curve = curve.with_band(random_baseline_band(curve.M, trials, seed, threads))
        write_curve_csv(curve, out / "rank_curve.csv")
        written["rank_curve"] = out / "rank_curve.csv"
    else:
        log.info("no proto language: skipping actual stabilities, scatters and the rank curve")

    write_histogram_csv(out / "rate_histogram.csv", r.rates if r else None, s.rates)
    written["rate_histogram"] = out / "rate_histogram.csv"

    s_def = s.defined()
    if len(s_def) < len(s):
        log.warning("dropping %d items with undefined estimated rate from time estimates", len(s) - len(s_def))
    lam, lam_method = lambda_for(db, s_def, lambda_=lambda_, anchor=anchor, regression=fit,
                                 scorer=scorer, tolerance=tolerance)
    rows = [("lambda", lam), ("method", lam_method)]
    if fit is not None:
        rows += [("regression_lambda", fit.lambda_), ("regression_residual", fit.residual),
                 ("regression_items", fit.n_items), ("regression_dropped", fit.dropped)]
    _write_kv(out / "lambda.csv", rows, "lambda relating actual to estimated rates")

    times = chrono.time_matrix(db, s_def, lam, scorer, method, tolerance, overlaps=overlaps, threads=threads)
    chrono.write_time_csv(times, out / "times.csv")
    written["times"] = out / "times.csv"

    gamma_rows = []
    for name, prof in (("s", s), ("r", r)):
        if prof is None:
            continue
        try:
            g = chrono.fit_gamma_moments(prof)
        except GlottoError as exc:
            log.warning("gamma fit for %s failed: %s", name, exc)
            continue
        gamma_rows += [(f"{name}_mean", g.source_mean), (f"{name}_sd", g.source_sd),
                       (f"{name}_Z", g.Z), (f"{name}_P", g.P)]
    _write_kv(out / "gamma_fit.csv", gamma_rows, "moment-matched Gamma rate densities")

    if families is not None:
        fam_a, fam_b, fam_label = families
        cross = compare_families(fam_a, fam_b, scorer)
        cross = cross.with_band(random_baseline_band(cross.M, trials, seed, threads))
        write_curve_csv(cross, out / "family_curve.csv")
        written["family_curve"] = out / "family_curve.csv"
        summary += [("family_curve_families", fam_label), ("family_curve_M", cross.M)]
    else:
        log.info("no second family given: skipping the cross-family curve")

    if truth is not None:
        written.update(_truth_comparison(out, truth, r, s, lam, times))

    summary += [("lambda", lam), ("lambda_method", lam_method), ("time_method", method),
                ("undefined_time_pairs", len(times.flags))]
    _write_kv(out / "summary.csv", summary, "report summary")
    written["summary"] = out / "summary.csv"

    if figures:
        from glottokit import figures as fig

        written.update(fig.render_all(out, out / "figures"))
    return written


def _truth_comparison(out: Path, truth: Truth, r: RateProfile | None, s: RateProfile,
                      lam: float, times: chrono.TimeDistanceMatrix) -> dict[str, Path]:
    r_hat = r.as_dict() if r is not None else {}
    s_hat = s.as_dict()
    missing = [i for i in s.item_ids if i not in truth.rates]
    if missing:
        raise ConfigurationError(f"truth file lacks {len(missing)} items, e.g. {missing[0]}")
    path_rates = out / "truth_comparison.csv"
    with atomic_csv(path_rates, "true versus estimated rates; columns: item_id,true_rate,r_hat,s_hat,lambda_s_hat") as w:
        w.writerow(["item_id", "true_rate", "r_hat", "s_hat", "lambda_s_hat"])
        for i in s.item_ids:
            w.writerow([i, format_float(truth.rates[i]), format_float(r_hat.get(i)),
                        format_float(s_hat[i]), format_float(lam * s_hat[i])])
    path_times = out / "truth_times.csv"
    with atomic_csv(path_times, "true versus estimated time distances; columns: leafA,leafB,true_T,estimated_T") as w:
        w.writerow(["leafA", "leafB", "true_T", "estimated_T"])
        for (a, b), t in truth.times.items():
            if a in times.labels and b in times.labels:
                w.writerow([a, b, format_float(t), format_float(times[(a, b)])])
    return {"truth": path_rates, "truth_times": path_times}
