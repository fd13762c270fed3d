"""Per-item stabilities, replacement rates and their agreement.

Actual stability compares each modern language with the ancestor; estimated
stability compares the modern languages among themselves. Either converts to
a replacement rate through ``rate = -ln(stability) / time_constant``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from glottokit._io import atomic_csv, format_float
from glottokit.errors import (
    ConfigurationError,
    DegenerateFitError,
    ParameterError,
    UndefinedCorrelationError,
)
from glottokit.metric import NLD_SCORER, SimilarityScorer, word_similarity
from glottokit.wordlist import LexicalDatabase

KIND_ACTUAL = "actual"
KIND_ESTIMATED = "estimated"

METHOD_REGRESSION = "regression-through-origin"
METHOD_SINGLE_PAIR = "single-pair-calibration"


@dataclass(frozen=True)
class StabilityTable:
    """One stability per item; ``nan`` marks an item without enough data."""

    item_ids: tuple[str, ...]
    glosses: tuple[str, ...]
    values: tuple[float, ...]
    kind: str
    languages_used: int

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.item_ids, self.values))

    @property
    def undefined(self) -> list[str]:
        return [i for i, v in zip(self.item_ids, self.values) if math.isnan(v)]

    def defined(self) -> "StabilityTable":
        return self.restrict([i for i, v in zip(self.item_ids, self.values) if not math.isnan(v)])

    def restrict(self, item_ids: Sequence[str]) -> "StabilityTable":
        pos = {i: k for k, i in enumerate(self.item_ids)}
        keep = [pos[i] for i in item_ids]
        return StabilityTable(
            tuple(self.item_ids[k] for k in keep),
            tuple(self.glosses[k] for k in keep),
            tuple(self.values[k] for k in keep),
            self.kind,
            self.languages_used,
        )


@dataclass(frozen=True)
class RateProfile:
    """Replacement rates per millennium.

    ``nan`` marks an undefined rate (zero or undefined stability). A rate of
    exactly 0 comes from stability 1 and is listed in :attr:`boundary`.
    """

    item_ids: tuple[str, ...]
    glosses: tuple[str, ...]
    rates: tuple[float, ...]
    time_constant: float
    kind: str

    def __len__(self):
        return len(self.rates)

    def as_dict(self) -> dict[str, float]:
        return dict(zip(self.item_ids, self.rates))

    @property
    def boundary(self) -> list[str]:
        return [i for i, r in zip(self.item_ids, self.rates) if r == 0.0]

    @property
    def undefined(self) -> list[str]:
        return [i for i, r in zip(self.item_ids, self.rates) if math.isnan(r)]

    def defined(self) -> "RateProfile":
        keep = [k for k, r in enumerate(self.rates) if not math.isnan(r)]
        return RateProfile(
            tuple(self.item_ids[k] for k in keep),
            tuple(self.glosses[k] for k in keep),
            tuple(self.rates[k] for k in keep),
            self.time_constant,
            self.kind,
        )

    def scaled(self, factor: float) -> "RateProfile":
        return RateProfile(
            self.item_ids, self.glosses, tuple(r * factor for r in self.rates),
            self.time_constant / factor, self.kind,
        )

    @classmethod
    def from_rates(cls, rates: Sequence[float], time_constant: float = 1.0, kind: str = KIND_ACTUAL):
        ids = tuple(f"i{k + 1:03d}" for k in range(len(rates)))
        return cls(ids, ids, tuple(float(r) for r in rates), time_constant, kind)


@dataclass(frozen=True)
class LambdaFit:
    lambda_: float
    method: str
    residual: float = math.nan
    n_items: int = 0
    dropped: int = 0


# --------------------------------------------------------------------------
# stabilities

def _select_proto(db: LexicalDatabase, proto: str | None) -> int:
    if proto is not None:
        return db.language_index(proto)
    protos = db.proto_indices()
    if not protos:
        raise ConfigurationError("actual stability needs a language with role=proto")
    if len(protos) > 1:
        names = ", ".join(db.languages[k].label for k in protos)
        raise ConfigurationError(f"several proto languages ({names}); choose one")
    return protos[0]


def actual_stability(
    db: LexicalDatabase, scorer: SimilarityScorer = NLD_SCORER, proto: str | None = None
) -> StabilityTable:
    """Mean similarity between the ancestor's word and each modern word, per item.

    ``proto`` picks the ancestor by label when the database holds several
    candidate ancestors; all proto-role languages are excluded from the moderns.
    """
    root = _select_proto(db, proto)
    moderns = [k for k in db.modern_indices() if k != root]
    if not moderns:
        raise ConfigurationError("actual stability needs at least one modern language")
    values = []
    for i in range(db.M):
        ancestor = db.slots.get((root, i))
        sims = [
            word_similarity(ancestor, db.slots[(b, i)], scorer)
            for b in moderns if (b, i) in db.slots
        ] if ancestor else []
        values.append(math.fsum(sims) / len(sims) if sims else math.nan)
    return StabilityTable(
        tuple(db.item_ids), tuple(it.gloss for it in db.items), tuple(values),
        KIND_ACTUAL, len(moderns),
    )


def estimated_stability(db: LexicalDatabase, scorer: SimilarityScorer = NLD_SCORER) -> StabilityTable:
    """Mean similarity over all unordered pairs of modern languages, per item."""
    moderns = db.modern_indices()
    if len(moderns) < 3:
        raise ConfigurationError(f"estimated stability needs >= 3 modern languages, got {len(moderns)}")
    values = []
    for i in range(db.M):
        present = [a for a in moderns if (a, i) in db.slots]
        sims = [word_similarity(db.slots[(a, i)], db.slots[(b, i)], scorer)
                for a, b in combinations(present, 2)]
        values.append(math.fsum(sims) / len(sims) if sims else math.nan)
    return StabilityTable(
        tuple(db.item_ids), tuple(it.gloss for it in db.items), tuple(values),
        KIND_ESTIMATED, len(moderns),
    )


def rates_from_stability(table: StabilityTable, time_constant: float) -> RateProfile:
    if not time_constant > 0:
        raise ParameterError(f"time constant must be positive, got {time_constant}")
    rates = []
    for v in table.values:
        if math.isnan(v) or v <= 0.0:
            rates.append(math.nan)
        elif v >= 1.0:
            rates.append(0.0)
        else:
            rates.append(-math.log(v) / time_constant)
    return RateProfile(table.item_ids, table.glosses, tuple(rates), float(time_constant), table.kind)


# --------------------------------------------------------------------------
# agreement

def paired_defined(x: Sequence[float], y: Sequence[float]) -> tuple[np.ndarray, np.ndarray, int]:
    """Drop positions where either side is ``nan``; return both arrays and the drop count."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ParameterError(f"length mismatch: {x.shape} vs {y.shape}")
    ok = ~(np.isnan(x) | np.isnan(y))
    return x[ok], y[ok], int((~ok).sum())


def align(a: RateProfile | StabilityTable, b: RateProfile | StabilityTable):
    """Values of ``a`` and ``b`` keyed on ``a``'s item order."""
    va, vb = a.as_dict(), b.as_dict()
    if set(va) != set(vb):
        raise ParameterError("profiles cover different items; restrict to common items first")
    return [va[i] for i in va], [vb[i] for i in va]


def fit_lambda(actual: RateProfile, estimated: RateProfile) -> LambdaFit:
    """Least-squares slope through the origin of actual against estimated rates."""
    r, s = align(actual, estimated)
    r, s, dropped = paired_defined(r, s)
    if len(r) < 2:
        raise DegenerateFitError(f"need >= 2 items defined in both profiles, got {len(r)}")
    ss = float(np.dot(s, s))
    if ss == 0.0:
        raise DegenerateFitError("all estimated rates are zero")
    lam = float(np.dot(r, s)) / ss
    residual = float(np.sqrt(np.mean((r - lam * s) ** 2)))
    return LambdaFit(lam, METHOD_REGRESSION, residual, len(r), dropped)


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ParameterError("pearson needs two equal-length lists of >= 2 values")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise UndefinedCorrelationError("correlation undefined for a constant list")
    rho = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, rho))


def spearman(x: Sequence[float], y: Sequence[float]) -> float:
    """Pearson correlation of average-tie ranks."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape or x.ndim != 1 or len(x) < 2:
        raise ParameterError("spearman needs two equal-length lists of >= 2 values")
    return pearson(rankdata(x), rankdata(y))


# --------------------------------------------------------------------------
# output

def write_table_csv(table: StabilityTable | RateProfile, path) -> None:
    values = table.values if isinstance(table, StabilityTable) else table.rates
    if isinstance(table, StabilityTable):
        what = f"{table.kind} stability"
    else:
        what = f"{table.kind} replacement rate per millennium, time constant {table.time_constant!r}"
    with atomic_csv(path, f"{what}; columns: item_id,gloss,value") as w:
        w.writerow(["item_id", "gloss", "value"])
        for item_id, gloss, v in zip(table.item_ids, table.glosses, values):
            w.writerow([item_id, gloss, format_float(v)])


def write_scatter_csv(x: StabilityTable | RateProfile, y: StabilityTable | RateProfile,
                      path, x_name: str, y_name: str) -> None:
    """Paired columns for a scatter plot, keyed on ``x``'s item order."""
    vx, vy = align(x, y)
    glosses = dict(zip(x.item_ids, x.glosses))
    with atomic_csv(path, f"columns: item_id,gloss,{x_name},{y_name}") as w:
        w.writerow(["item_id", "gloss", x_name, y_name])
        for item_id, a, b in zip(x.item_ids, vx, vy):
            w.writerow([item_id, glosses[item_id], format_float(a), format_float(b)])
