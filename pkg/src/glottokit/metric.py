"""Word similarity and language-pair overlaps.

Two scorers are available. ``nld`` rates a pair of words by one minus their
normalized Levenshtein distance; ``binary-cognacy`` gives 1 for a shared
cognate class and 0 otherwise. Slots with synonyms score the best cross pair.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Sequence

import numpy as np

from glottokit._io import atomic_csv, format_float, parse_float
from glottokit.errors import (
    MissingSlotError,
    NoComparableItemsError,
    ScorerError,
    UndefinedDistanceError,
)
from glottokit.wordlist import LexicalDatabase, WordForm

MODE_NLD = "nld"
MODE_BINARY = "binary-cognacy"


def levenshtein(a: Sequence, b: Sequence) -> int:
    """Edit distance counting single-element insertions, deletions and substitutions."""
    if isinstance(a, str) and isinstance(b, str):
        return _levenshtein_str(a, b) if a <= b else _levenshtein_str(b, a)
    return _levenshtein(tuple(a), tuple(b))


@lru_cache(maxsize=1 << 18)
def _levenshtein_str(a: str, b: str) -> int:
    return _levenshtein(a, b)


def _levenshtein(a: Sequence, b: Sequence) -> int:
    if a == b:
        return 0
    if len(a) < len(b):
        a, b = b, a
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        cur = [i]
        for j, cb in enumerate(b, start=1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def nld(a: Sequence, b: Sequence) -> float:
    """Levenshtein distance divided by the length of the longer word."""
    longest = max(len(a), len(b))
    if longest == 0:
        raise UndefinedDistanceError("normalized distance of two empty words")
    return levenshtein(a, b) / longest


@dataclass(frozen=True)
class SimilarityScorer:
    mode: str = MODE_NLD

    def __post_init__(self):
        if self.mode not in (MODE_NLD, MODE_BINARY):
            raise ScorerError(f"unknown scorer mode {self.mode!r}")


NLD_SCORER = SimilarityScorer(MODE_NLD)


def word_similarity(
    slot_a: Sequence[WordForm] | None,
    slot_b: Sequence[WordForm] | None,
    scorer: SimilarityScorer = NLD_SCORER,
) -> float:
    """Best similarity over all cross pairs of two synonym sets."""
    if not slot_a or not slot_b:
        raise MissingSlotError("word_similarity needs two non-empty slots")
    if scorer.mode == MODE_BINARY:
        if any(f.cognate_class is None for f in (*slot_a, *slot_b)):
            raise ScorerError("binary-cognacy scoring needs a cognate class on every form")
        classes = {f.cognate_class for f in slot_a}
        return 1.0 if any(f.cognate_class in classes for f in slot_b) else 0.0
    best = 0.0
    for fa in slot_a:
        for fb in slot_b:
            if fa.normalized == fb.normalized:
                return 1.0
            best = max(best, 1.0 - nld(fa.normalized, fb.normalized))
    return best


def language_overlap(
    db: LexicalDatabase, alpha: int, beta: int, scorer: SimilarityScorer = NLD_SCORER
) -> tuple[float, int]:
    """Mean word similarity over the items both languages attest.

    Returns ``(overlap, support)``; support is the number of items compared.
    """
    sims = []
    for i in range(db.M):
        sa = db.slots.get((alpha, i))
        sb = db.slots.get((beta, i))
        if sa and sb:
            sims.append(word_similarity(sa, sb, scorer))
    support = len(sims)
    if support == 0:
        raise NoComparableItemsError(
            f"{db.languages[alpha].label} and {db.languages[beta].label} share no attested items"
        )
    # fsum is exactly rounded, so item order cannot change the result
    return math.fsum(sims) / support, support


@dataclass(frozen=True)
class OverlapMatrix:
    """Symmetric pairwise overlaps; undefined pairs hold NaN with support 0."""

    labels: tuple[str, ...]
    values: np.ndarray
    support: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)
        self.support.setflags(write=False)

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        return float(self.values[self.labels.index(a), self.labels.index(b)])

    @property
    def undefined_pairs(self) -> list[tuple[str, str]]:
        n = len(self.labels)
        return [
            (self.labels[a], self.labels[b])
            for a in range(n) for b in range(a, n)
            if np.isnan(self.values[a, b])
        ]


def overlap_matrix(
    db: LexicalDatabase, scorer: SimilarityScorer = NLD_SCORER, threads: int = 1
) -> OverlapMatrix:
    """All pairwise overlaps, deterministic for any ``threads`` value."""
    n = db.N
    pairs = list(combinations_with_replacement(range(n), 2))

    def one(pair):
        try:
            return language_overlap(db, pair[0], pair[1], scorer)
        except NoComparableItemsError:
            return float("nan"), 0

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]

    values = np.full((n, n), np.nan)
    support = np.zeros((n, n), dtype=int)
    for (a, b), (c, s) in zip(pairs, results):
        values[a, b] = values[b, a] = c
        support[a, b] = support[b, a] = s
    return OverlapMatrix(tuple(db.labels), values, support)


def write_overlap_csv(matrix: OverlapMatrix, values_path, support_path=None) -> None:
    """Write the overlap matrix and its ``.support.csv`` companion."""
    if support_path is None:
        support_path = _support_path(values_path)
    schema = "language," + ",".join(matrix.labels)
    with atomic_csv(values_path, f"overlap matrix; columns: {schema}") as w:
        w.writerow(["language", *matrix.labels])
        for label, row in zip(matrix.labels, matrix.values):
            w.writerow([label, *(format_float(v) for v in row)])
    with atomic_csv(support_path, f"overlap support counts; columns: {schema}") as w:
        w.writerow(["language", *matrix.labels])
        for label, row in zip(matrix.labels, matrix.support):
            w.writerow([label, *(int(v) for v in row)])


def read_overlap_csv(values_path, support_path=None) -> OverlapMatrix:
    if support_path is None:
        support_path = _support_path(values_path)

    def load(path, conv):
        with open(path, encoding="utf-8", newline="") as fh:
            rows = [r for r in csv.reader(line for line in fh if not line.startswith("#"))]
        labels = tuple(rows[0][1:])
        return labels, np.array([[conv(v) for v in r[1:]] for r in rows[1:]])

    labels, values = load(values_path, parse_float)
    _, support = load(support_path, int)
    return OverlapMatrix(labels, values.astype(float), support.astype(int))


def _support_path(values_path):
    p = Path(values_path)
    stem = p.name[: -len(".csv")] if p.name.endswith(".csv") else p.name
    return p.with_name(stem + ".support.csv")
