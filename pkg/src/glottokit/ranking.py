"""Stability rankings and the common-item count curve ``c(m)``.

``c(m)`` counts the items shared by the top-``m`` prefixes of two rankings of
the same ``M`` items. Identical rankings give ``c(m) = m``; independent random
rankings give ``m**2 / M`` on average.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from glottokit._io import atomic_csv, format_float
from glottokit.errors import ComparisonError, DomainMismatchError, EmptyRankingError, GlottoError
from glottokit.metric import NLD_SCORER, SimilarityScorer
from glottokit.stability import StabilityTable, estimated_stability
from glottokit.wordlist import LexicalDatabase, common_items, is_modern, subset

TIE_BREAK = "value-desc,item_id-asc"

# Trials per generator in the Monte Carlo band; fixed so results do not depend on threading.
BAND_BLOCK = 4096


@dataclass(frozen=True)
class RankedList:
    item_ids: tuple[str, ...]
    values: tuple[float, ...]
    tie_break: str = TIE_BREAK

    def __len__(self):
        return len(self.item_ids)


@dataclass(frozen=True)
class BaselineBand:
    """Monte Carlo mean and standard deviation of ``c(m)`` for random ranking pairs."""

    M: int
    trials: int
    seed: int
    mean: np.ndarray
    sd: np.ndarray

    @property
    def stderr(self) -> np.ndarray:
        return self.sd / math.sqrt(self.trials)

    @property
    def expected(self) -> np.ndarray:
        m = np.arange(1, self.M + 1)
        return m * m / self.M

    @property
    def consistent(self) -> bool:
        """Whether every mean lies within 3 standard errors of ``m**2/M``."""
        dev = np.abs(self.mean - self.expected)
        return bool(np.all(dev <= 3 * self.stderr + 1e-12))


@dataclass(frozen=True)
class CommonCountCurve:
    M: int
    c: tuple[int, ...]
    band: BaselineBand | None = None

    @property
    def m(self) -> np.ndarray:
        return np.arange(1, self.M + 1)

    @property
    def baseline_random(self) -> np.ndarray:
        return self.m ** 2 / self.M

    @property
    def baseline_identity(self) -> np.ndarray:
        return self.m.astype(float)

    def with_band(self, band: BaselineBand) -> "CommonCountCurve":
        if band.M != self.M:
            raise DomainMismatchError(f"band is for M={band.M}, curve has M={self.M}")
        return CommonCountCurve(self.M, self.c, band)

    def band_z(self) -> np.ndarray:
        """Standardized distance of ``c(m)`` from the band mean; 0 where the band has no spread."""
        if self.band is None:
            raise ValueError("curve has no baseline band attached")
        diff = np.asarray(self.c, dtype=float) - self.band.mean
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.band.sd > 0, diff / self.band.sd, np.where(diff == 0, 0.0, np.inf * np.sign(diff)))
        return z

    def fraction_within_band(self, k: float = 3.0) -> float:
        """Share of ``m`` with ``c(m)`` within ``k`` band sds of the random mean."""
        return float(np.mean(np.abs(self.band_z()) <= k))

    def fraction_above_band(self, k: float = 3.0) -> float:
        """Share of ``m`` with ``c(m)`` more than ``k`` band sds above the random mean."""
        return float(np.mean(self.band_z() > k))


def rank_items(table: StabilityTable) -> RankedList:
    """Sort by decreasing stability, ties broken by ascending item id."""
    if not table.item_ids:
        raise EmptyRankingError("cannot rank an empty table")
    if any(math.isnan(v) for v in table.values):
        raise EmptyRankingError(f"undefined stabilities for {table.undefined}; drop them first")
    order = sorted(zip(table.item_ids, table.values), key=lambda p: (-p[1], p[0]))
    return RankedList(tuple(i for i, _ in order), tuple(v for _, v in order))


def common_count_curve(a: RankedList, b: RankedList) -> CommonCountCurve:
    if len(set(a.item_ids)) != len(a) or set(a.item_ids) != set(b.item_ids):
        raise DomainMismatchError("rankings cover different item sets; restrict to common items")
    seen_a: set[str] = set()
    seen_b: set[str] = set()
    c = []
    count = 0
    for x, y in zip(a.item_ids, b.item_ids):
        seen_a.add(x)
        seen_b.add(y)
        if x == y:
            count += 1
        else:
            count += (x in seen_b) + (y in seen_a)
        c.append(count)
    return CommonCountCurve(len(a), tuple(c))


def _band_block(M: int, n: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
    # one ranking fixed to the identity; the other's positions are a random permutation.
    # item k is in both top-m lists once m > max(k, pos(k))
    pos = rng.permuted(np.tile(np.arange(M), (n, 1)), axis=1)
    last = np.maximum(pos, np.arange(M))
    flat = (np.arange(n)[:, None] * M + last).ravel()
    counts = np.bincount(flat, minlength=n * M).reshape(n, M)
    c = np.cumsum(counts, axis=1).astype(float)
    return c.sum(axis=0), (c * c).sum(axis=0)


def random_baseline_band(M: int, trials: int, seed: int = 0, threads: int = 1) -> BaselineBand:
    """Mean and sd of ``c(m)`` over ``trials`` independent random ranking pairs.

    Trials are generated in fixed blocks, each from its own stream spawned
    from ``seed``, so the result is identical for any ``threads`` value.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if M < 1:
        raise EmptyRankingError("M must be >= 1")
    sizes = [min(BAND_BLOCK, trials - start) for start in range(0, trials, BAND_BLOCK)]
    streams = np.random.SeedSequence(seed).spawn(len(sizes))

    def run(k):
        return _band_block(M, sizes[k], np.random.default_rng(streams[k]))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(sizes))))
    else:
        parts = [run(k) for k in range(len(sizes))]
    total = np.zeros(M)
    total_sq = np.zeros(M)
    for s, sq in parts:
        total += s
        total_sq += sq
    mean = total / trials
    var = np.maximum(total_sq / trials - mean * mean, 0.0)
    if trials > 1:
        var *= trials / (trials - 1)
    return BaselineBand(M, trials, seed, mean, np.sqrt(var))


def compare_families(
    db_a: LexicalDatabase,
    db_b: LexicalDatabase,
    scorer: SimilarityScorer = NLD_SCORER,
) -> CommonCountCurve:
    """``c(m)`` between the estimated-stability rankings of two families.

    Both are first restricted to their common items and to modern languages;
    items whose stability is undefined in either family are then dropped.
    """
    shared = common_items(db_a, db_b)
    if len(shared) < 2:
        raise ComparisonError(f"only {len(shared)} common items")
    tables = []
    for db in (db_a, db_b):
        try:
            moderns = subset(db, is_modern, shared)
            tables.append(estimated_stability(moderns, scorer))
        except GlottoError as exc:
            raise ComparisonError(f"{db.family_name or 'family'}: {exc}") from exc
    va, vb = (t.as_dict() for t in tables)
    defined = [i for i in shared if not (math.isnan(va[i]) or math.isnan(vb[i]))]
    if len(defined) < 2:
        raise ComparisonError("fewer than 2 items have a defined stability in both families")
    ranked = [rank_items(t.restrict(defined)) for t in tables]
    return common_count_curve(*ranked)


def write_curve_csv(curve: CommonCountCurve, path) -> None:
    cols = "m,c,baseline_random,baseline_identity,band_mean,band_sd"
    note = "" if curve.band is None else f", band from {curve.band.trials} trials seed {curve.band.seed}"
    with atomic_csv(path, f"common-item count curve{note}; columns: {cols}") as w:
        w.writerow(cols.split(","))
        for k in range(curve.M):
            band_mean = curve.band.mean[k] if curve.band is not None else None
            band_sd = curve.band.sd[k] if curve.band is not None else None
            w.writerow([
                k + 1, curve.c[k],
                format_float(curve.baseline_random[k]), format_float(curve.baseline_identity[k]),
                format_float(band_mean), format_float(band_sd),
            ])


def write_ranking_csv(ranked: RankedList, glosses: dict[str, str], path) -> None:
    with atomic_csv(path, f"ranking by decreasing stability, ties {ranked.tie_break}; columns: rank,item_id,gloss,value") as w:
        w.writerow(["rank", "item_id", "gloss", "value"])
        for k, (i, v) in enumerate(zip(ranked.item_ids, ranked.values), start=1):
            w.writerow([k, i, glosses.get(i, ""), format_float(v)])
