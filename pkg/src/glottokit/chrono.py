"""Time distances from lexical overlaps.

Three estimators are provided:

``classic``
    one universal rate, ``T = -ln(C) / r``.
``generalized``
    item-specific rates; ``C(T) = mean_i exp(-lambda * s_i * T)`` is inverted
    numerically by bracketing and bisection.
``gamma``
    rates summarized by a Gamma density of shape ``Z`` and scale ``P``, for
    which the mean above integrates to ``(1 + lambda P T) ** -Z`` and inverts
    in closed form.

All times are in millennia, all rates in replacements per millennium.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from types import MappingProxyType
from typing import Callable, Mapping, Sequence

import numpy as np

from glottokit._io import atomic_csv, format_float
from glottokit.errors import (
    CalibrationError,
    DegenerateFitError,
    DivergenceError,
    DomainError,
    GlottoError,
    InternalConsistencyError,
    ParameterError,
    ProfileIncompleteError,
)
from glottokit.metric import NLD_SCORER, OverlapMatrix, SimilarityScorer, language_overlap, overlap_matrix
from glottokit.stability import RateProfile
from glottokit.wordlist import LexicalDatabase

# Separation from the ancestor to the present day, millennia.
LATE_CLASSICAL_LATIN_T = 1.85
VULGAR_LATIN_T = 1.5

# Historical anchors: twice the time since the split, millennia.
NORWEGIAN_ICELANDIC_T = 2.2
SARDINIAN_SICILIAN_T = 3.0

DEFAULT_TOLERANCE = 1e-10

METHOD_CLASSIC = "classic"
METHOD_GENERALIZED = "generalized"
METHOD_GAMMA = "gamma"
METHODS = (METHOD_CLASSIC, METHOD_GENERALIZED, METHOD_GAMMA)

# Upper end of the geometric bracket search; beyond this the target is treated as unreachable.
_BRACKET_LIMIT = 1e12


def _rate_array(rates: RateProfile | Sequence[float]) -> np.ndarray:
    values = rates.rates if isinstance(rates, RateProfile) else rates
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ProfileIncompleteError("rate profile is empty")
    if np.isnan(arr).any():
        raise ProfileIncompleteError(f"{int(np.isnan(arr).sum())} undefined rates in profile")
    if (arr < 0).any() or np.isinf(arr).any():
        raise ProfileIncompleteError("rates must be finite and non-negative")
    return arr


def _check_overlap(overlap: float) -> None:
    if math.isnan(overlap) or overlap <= 0.0:
        raise DivergenceError(f"overlap {overlap} gives an infinite time distance")
    if overlap > 1.0:
        raise DomainError(f"overlap {overlap} exceeds 1")


def classic_time(overlap: float, rate: float) -> float:
    _check_overlap(overlap)
    if not rate > 0:
        raise ParameterError(f"rate must be positive, got {rate}")
    return -math.log(overlap) / rate


def forward_overlap(rates: RateProfile | Sequence[float], lambda_: float, T: float) -> float:
    """Expected overlap after time ``T`` with per-item rates ``lambda_ * rates``."""
    if T < 0:
        raise ParameterError(f"time must be non-negative, got {T}")
    arr = _rate_array(rates)
    # fsum is exactly rounded, hence independent of summation order
    return math.fsum(np.exp(-lambda_ * T * arr)) / arr.size


def _bisect_decreasing(f: Callable[[float], float], target: float, tolerance: float) -> float:
    """Solve ``f(x) = target`` for decreasing ``f`` on ``x >= 0`` with ``f(0) > target``.

    The bracket starts at ``[0, 1]`` and doubles its upper end until ``f``
    drops to the target, then bisects until narrower than
    ``tolerance * min(1, hi)``: absolute above 1, relative below it.
    """
    if not tolerance > 0:
        raise ParameterError(f"tolerance must be positive, got {tolerance}")
    lo, hi = 0.0, 1.0
    f_lo, f_hi = f(lo), f(hi)
    while f_hi > target:
        if hi > _BRACKET_LIMIT:
            raise DivergenceError(f"target {target} not reached below {_BRACKET_LIMIT:g}")
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = f(hi)
        if f_hi > f_lo:
            raise InternalConsistencyError("forward map increased while growing the bracket")
    while hi - lo >= tolerance * min(1.0, hi):
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        f_mid = f(mid)
        if not f_hi <= f_mid <= f_lo:
            raise InternalConsistencyError("forward map is not monotone inside the bracket")
        if f_mid > target:
            lo, f_lo = mid, f_mid
        elif f_mid < target:
            hi, f_hi = mid, f_mid
        else:
            return mid
    return 0.5 * (lo + hi)


def invert_time(
    overlap: float,
    rates: RateProfile | Sequence[float],
    lambda_: float = 1.0,
    tolerance: float = DEFAULT_TOLERANCE,
) -> float:
    """Time ``T >= 0`` at which :func:`forward_overlap` equals ``overlap``."""
    _check_overlap(overlap)
    if not lambda_ > 0:
        raise ParameterError(f"lambda must be positive, got {lambda_}")
    arr = _rate_array(rates)
    if overlap == 1.0:
        return 0.0
    floor = float(np.count_nonzero(arr == 0.0)) / arr.size
    if overlap <= floor:
        raise DivergenceError(
            f"overlap {overlap} is at or below {floor}, the share of items that never change"
        )
    return _bisect_decreasing(lambda t: forward_overlap(arr, lambda_, t), overlap, tolerance)


@dataclass(frozen=True)
class GammaFit:
    """Gamma rate density with shape ``Z`` and scale ``P`` (mean ``Z*P``, sd ``sqrt(Z)*P``)."""

    Z: float
    P: float
    source_mean: float
    source_sd: float

    @property
    def mean(self) -> float:
        return self.Z * self.P

    @property
    def sd(self) -> float:
        return math.sqrt(self.Z) * self.P

    def pdf(self, s):
        s = np.asarray(s, dtype=float)
        log_norm = math.lgamma(self.Z) + self.Z * math.log(self.P)
        pos = np.where(s > 0, s, 1.0)
        return np.where(s > 0, np.exp((self.Z - 1) * np.log(pos) - pos / self.P - log_norm), 0.0)


def gamma_from_moments(mean: float, sd: float) -> GammaFit:
    if not (mean > 0 and sd > 0 and math.isfinite(mean) and math.isfinite(sd)):
        raise DegenerateFitError(f"moment fit needs positive finite mean and sd, got {mean}, {sd}")
    return GammaFit(Z=(mean / sd) ** 2, P=sd * sd / mean, source_mean=mean, source_sd=sd)


def fit_gamma_moments(rates: RateProfile | Sequence[float]) -> GammaFit:
    """Match a Gamma density to the mean and population standard deviation of ``rates``."""
    values = rates.rates if isinstance(rates, RateProfile) else rates
    arr = np.asarray(values, dtype=float)
    arr = arr[~np.isnan(arr)]
    if arr.size < 2:
        raise DegenerateFitError(f"need >= 2 defined rates, got {arr.size}")
    sd = float(np.std(arr))
    if sd == 0.0:
        raise DegenerateFitError("rates have zero variance")
    return gamma_from_moments(float(np.mean(arr)), sd)


def gamma_overlap(T: float, lambda_: float, fit: GammaFit) -> float:
    return (1.0 + lambda_ * fit.P * T) ** (-fit.Z)


def gamma_time(overlap: float, lambda_: float, fit: GammaFit) -> float:
    _check_overlap(overlap)
    if not lambda_ > 0:
        raise ParameterError(f"lambda must be positive, got {lambda_}")
    return (overlap ** (-1.0 / fit.Z) - 1.0) / (lambda_ * fit.P)


def calibrate_lambda_from_overlap(
    overlap: float,
    rates: RateProfile | Sequence[float],
    known_T: float,
    tolerance: float = DEFAULT_TOLERANCE,
) -> float:
    """The ``lambda`` making ``forward_overlap(rates, lambda, known_T)`` equal ``overlap``."""
    if not known_T > 0:
        raise ParameterError(f"known time must be positive, got {known_T}")
    arr = _rate_array(rates)
    if overlap >= 1.0:
        raise CalibrationError(f"overlap {overlap} leaves no room for a {known_T} millennia separation")
    _check_overlap(overlap)
    floor = float(np.count_nonzero(arr == 0.0)) / arr.size
    if overlap <= floor:
        raise DivergenceError(f"overlap {overlap} unreachable with {floor:.3f} of items at rate 0")
    # lambda is bisected on the scale 1/known_T, where lambda*T is of order one
    scale = 1.0 / known_T
    x = _bisect_decreasing(
        lambda u: forward_overlap(arr, u * scale, known_T), overlap, tolerance * known_T
    )
    return x * scale


def calibrate_lambda(
    db: LexicalDatabase,
    rates: RateProfile | Sequence[float],
    pair: tuple[str, str],
    known_T: float,
    scorer: SimilarityScorer = NLD_SCORER,
    tolerance: float = DEFAULT_TOLERANCE,
) -> float:
    """Fix ``lambda`` from one language pair whose separation is known historically."""
    a, b = (db.language_index(label) for label in pair)
    overlap, _ = language_overlap(db, a, b, scorer)
    return calibrate_lambda_from_overlap(overlap, rates, known_T, tolerance)


@dataclass(frozen=True)
class TimeDistanceMatrix:
    """Pairwise times in millennia; failed pairs hold ``nan`` and a reason in ``flags``."""

    labels: tuple[str, ...]
    times: np.ndarray
    method: str
    lambda_used: float | None
    flags: Mapping[tuple[str, str], str] = field(default_factory=dict)

    def __post_init__(self):
        self.times.setflags(write=False)
        object.__setattr__(self, "flags", MappingProxyType(dict(self.flags)))

    def __getitem__(self, pair: tuple[str, str]) -> float:
        a, b = pair
        return float(self.times[self.labels.index(a), self.labels.index(b)])


def pair_time(
    overlap: float,
    rates: RateProfile | Sequence[float],
    lambda_: float,
    method: str,
    tolerance: float = DEFAULT_TOLERANCE,
    gamma: GammaFit | None = None,
) -> float:
    """Apply one estimator to one overlap."""
    if method == METHOD_GENERALIZED:
        return invert_time(overlap, rates, lambda_, tolerance)
    if method == METHOD_CLASSIC:
        return classic_time(overlap, lambda_ * float(np.mean(_rate_array(rates))))
    if method == METHOD_GAMMA:
        return gamma_time(overlap, lambda_, gamma or fit_gamma_moments(rates))
    raise ParameterError(f"unknown method {method!r}; choose from {METHODS}")


def time_matrix(
    db: LexicalDatabase | None,
    rates: RateProfile | Sequence[float],
    lambda_: float = 1.0,
    scorer: SimilarityScorer = NLD_SCORER,
    method: str = METHOD_GENERALIZED,
    tolerance: float = DEFAULT_TOLERANCE,
    overlaps: OverlapMatrix | None = None,
    threads: int = 1,
) -> TimeDistanceMatrix:
    """Time distances for every language pair.

    ``overlaps`` may be passed to reuse a computed matrix (``db`` is then
    unused). An overlap above 1 is clamped to time 0 and flagged.
    """
    if method not in METHODS:
        raise ParameterError(f"unknown method {method!r}; choose from {METHODS}")
    if overlaps is None:
        overlaps = overlap_matrix(db, scorer, threads=threads)
    _rate_array(rates)
    gamma = fit_gamma_moments(rates) if method == METHOD_GAMMA else None
    labels = overlaps.labels
    n = len(labels)
    pairs = list(combinations(range(n), 2))

    def one(pair):
        c = float(overlaps.values[pair])
        if math.isnan(c):
            return math.nan, "no-comparable-items"
        if c > 1.0:
            return 0.0, "clamped-overlap-above-1"
        try:
            return pair_time(c, rates, lambda_, method, tolerance, gamma), None
        except GlottoError as exc:
            return math.nan, type(exc).__name__

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(one, pairs))
    else:
        results = [one(p) for p in pairs]

    times = np.zeros((n, n))
    flags = {}
    for (a, b), (t, flag) in zip(pairs, results):
        times[a, b] = times[b, a] = t
        if flag:
            flags[(labels[a], labels[b])] = flag
    return TimeDistanceMatrix(labels, times, method, lambda_, flags)


def write_time_csv(matrix: TimeDistanceMatrix, path) -> None:
    schema = "language," + ",".join(matrix.labels)
    lam = "none" if matrix.lambda_used is None else repr(matrix.lambda_used)
    with atomic_csv(path, f"time distances in millennia, method {matrix.method}, lambda {lam}; columns: {schema}") as w:
        w.writerow(["language", *matrix.labels])
        for label, row in zip(matrix.labels, matrix.times):
            w.writerow([label, *(format_float(v) for v in row)])
