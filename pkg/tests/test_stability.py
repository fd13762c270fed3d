from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glottokit.chrono import LATE_CLASSICAL_LATIN_T, VULGAR_LATIN_T
from glottokit.errors import ConfigurationError, DegenerateFitError, ParameterError, UndefinedCorrelationError
from glottokit.stability import (
    RateProfile,
    StabilityTable,
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
from glottokit.wordlist import (
    ItemRecord,
    LanguageRecord,
    LexicalDatabase,
    WordForm,
    is_modern,
    parse_database,
    subset,
)


def build(rows: dict[str, list[str | None]], proto: str | None = None) -> LexicalDatabase:
    labels = list(rows)
    m = len(rows[labels[0]])
    return LexicalDatabase(
        "fixture",
        tuple(LanguageRecord(label, "proto" if label == proto else "modern") for label in labels),
        tuple(ItemRecord(f"i{k}", f"g{k}") for k in range(m)),
        {(a, i): (WordForm.from_raw(w),) for a, label in enumerate(labels)
         for i, w in enumerate(rows[label]) if w is not None},
    )


def table(values, kind="estimated"):
    ids = tuple(f"i{k}" for k in range(len(values)))
    return StabilityTable(ids, ids, tuple(values), kind, 3)


def profile(rates):
    return RateProfile.from_rates(rates)


class TestActualStability:
    def test_identical_everywhere(self):
        db = build({"p": ["mano"], "a": ["mano"], "b": ["mano"]}, proto="p")
        assert actual_stability(db).values == (1.0,)

    def test_nothing_shared(self):
        db = build({"p": ["aaaa"], "a": ["bbbb"], "b": ["cc"]}, proto="p")
        assert actual_stability(db).values == (0.0,)

    def test_aqua(self):
        db = build({"p": ["aqua"], "a": ["agua"], "b": ["eau"]}, proto="p")
        assert actual_stability(db).values[0] == pytest.approx(0.5, abs=1e-15)

    def test_fixture_values(self, romance):
        R = actual_stability(romance).as_dict()
        # water: agua 0.75, eau 0.25, acqua 0.8
        assert R["water"] == pytest.approx((0.75 + 0.25 + 0.8) / 3)

    def test_needs_a_proto(self):
        with pytest.raises(ConfigurationError):
            actual_stability(build({"a": ["x"], "b": ["y"]}))

    def test_several_protos_need_a_choice(self):
        db = parse_database(
            "language\titem_id\tgloss\tform\np\ti\tg\tab\nq\ti\tg\tac\nm\ti\tg\tab\n",
            metadata="language.p.role=proto\nlanguage.q.role=proto\n",
        )
        with pytest.raises(ConfigurationError):
            actual_stability(db)
        assert actual_stability(db, proto="q").values[0] == pytest.approx(0.5)
        assert actual_stability(db, proto="p").values[0] == 1.0

    def test_missing_proto_slot_is_undefined(self):
        db = build({"p": ["x", None], "a": ["x", "y"], "b": ["x", "y"]}, proto="p")
        R = actual_stability(db)
        assert R.undefined == ["i1"]
        assert R.defined().item_ids == ("i0",)


class TestEstimatedStability:
    def test_identical_forms(self):
        db = build({"a": ["sol"], "b": ["sol"], "c": ["sol"]})
        assert estimated_stability(db).values == (1.0,)

    def test_one_matching_pair_of_three(self):
        db = build({"a": ["xx"], "b": ["xx"], "c": ["yy"]})
        assert estimated_stability(db).values[0] == pytest.approx(1 / 3)

    def test_proto_excluded(self, romance):
        moderns = subset(romance, is_modern)
        assert estimated_stability(romance).values == estimated_stability(moderns).values

    def test_needs_three_moderns(self):
        with pytest.raises(ConfigurationError):
            estimated_stability(build({"a": ["x"], "b": ["x"]}))

    def test_item_with_one_attestation(self):
        db = build({"a": ["x", "y"], "b": ["x", None], "c": ["x", None]})
        assert math.isnan(estimated_stability(db).values[1])

    def test_reordering_languages_and_items(self, romance):
        S = estimated_stability(romance).as_dict()
        R = actual_stability(romance).as_dict()
        flipped = subset(romance, items=["sun", "water", "dog"])
        reordered = LexicalDatabase(
            romance.family_name,
            tuple(reversed(flipped.languages)),
            flipped.items,
            {(flipped.N - 1 - a, i): v for (a, i), v in flipped.slots.items()},
        )
        assert estimated_stability(reordered).as_dict() == S
        assert actual_stability(reordered).as_dict() == R


class TestRates:
    def test_unit_stability_gives_zero(self):
        prof = rates_from_stability(table([1.0]), 2.0)
        assert prof.rates == (0.0,)
        assert prof.boundary == ["i0"]

    def test_half_at_vulgar_latin(self):
        expected = float(-mpmath.log(mpmath.mpf("0.5")) / mpmath.mpf("1.5"))
        value = rates_from_stability(table([0.5]), VULGAR_LATIN_T).rates[0]
        assert value == pytest.approx(expected, rel=1e-15)
        assert value == pytest.approx(0.4621, abs=5e-5)

    def test_documented_time_constants(self):
        assert (LATE_CLASSICAL_LATIN_T, VULGAR_LATIN_T) == (1.85, 1.5)

    def test_zero_and_nan_are_undefined(self):
        prof = rates_from_stability(table([0.0, math.nan, 0.3]), 1.0)
        assert prof.undefined == ["i0", "i1"]
        assert len(prof.defined()) == 1

    def test_bad_time_constant(self):
        with pytest.raises(ParameterError):
            rates_from_stability(table([0.5]), 0.0)

    @given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=20), st.floats(0.1, 5.0))
    def test_round_trip(self, values, T):
        prof = rates_from_stability(table(values), T)
        back = [math.exp(-r * T) for r in prof.rates]
        assert back == pytest.approx(values, rel=1e-12)


class TestFitLambda:
    def test_exact_proportion(self):
        fit = fit_lambda(profile([0.2, 0.4, 0.6]), profile([0.1, 0.2, 0.3]))
        assert fit.lambda_ == pytest.approx(2.0)
        assert fit.residual == pytest.approx(0.0, abs=1e-15)

    def test_closed_form(self):
        assert fit_lambda(profile([1.0, 2.0]), profile([1.0, 1.0])).lambda_ == 1.5

    def test_identity(self):
        assert fit_lambda(profile([0.3, 0.5]), profile([0.3, 0.5])).lambda_ == pytest.approx(1.0)

    def test_drops_undefined(self):
        fit = fit_lambda(profile([1.0, math.nan, 2.0, 4.0]), profile([1.0, 1.0, math.nan, 2.0]))
        assert (fit.n_items, fit.dropped) == (2, 2)
        # remaining pairs (1, 1) and (4, 2): 9 / 5
        assert fit.lambda_ == pytest.approx(1.8)

    def test_degenerate(self):
        with pytest.raises(DegenerateFitError):
            fit_lambda(profile([1.0, 2.0]), profile([0.0, 0.0]))
        with pytest.raises(DegenerateFitError):
            fit_lambda(profile([1.0]), profile([1.0]))

    def test_different_items(self):
        other = RateProfile(("x", "y"), ("x", "y"), (1.0, 2.0), 1.0, "estimated")
        with pytest.raises(ParameterError):
            fit_lambda(profile([1.0, 2.0]), other)

    @given(st.lists(st.floats(0.01, 2.0), min_size=2, max_size=30), st.floats(0.1, 10.0))
    def test_scale_equivariant(self, s, k):
        rng = np.random.default_rng(len(s))
        r = [x * 1.3 + 0.1 * rng.random() for x in s]
        base = fit_lambda(profile(r), profile(s))
        scaled = fit_lambda(profile(r), profile([x * k for x in s]))
        assert scaled.lambda_ == pytest.approx(base.lambda_ / k, rel=1e-9)
        assert scaled.residual == pytest.approx(base.residual, rel=1e-9, abs=1e-12)


def exact_pearson(x, y):
    x = [Fraction(v) for v in x]
    y = [Fraction(v) for v in y]
    mx, my = sum(x) / len(x), sum(y) / len(y)
    sxy = sum((a - mx) * (b - my) for a, b in zip(x, y))
    sxx = sum((a - mx) ** 2 for a in x)
    syy = sum((b - my) ** 2 for b in y)
    return float(sxy) / math.sqrt(float(sxx * syy))


class TestCorrelation:
    def test_pearson_trivial(self):
        assert pearson([1, 2, 3], [1, 2, 3]) == pytest.approx(1.0)
        assert pearson([1, 2, 3], [-1, -2, -3]) == pytest.approx(-1.0)

    def test_pearson_example(self):
        value = pearson([1, 2, 3], [1, 2, 4])
        assert value == pytest.approx(exact_pearson([1, 2, 3], [1, 2, 4]), rel=1e-14)
        assert value == pytest.approx(0.9820, abs=5e-5)

    def test_pearson_constant(self):
        with pytest.raises(UndefinedCorrelationError):
            pearson([1, 1, 1], [1, 2, 3])

    def test_pearson_shape(self):
        with pytest.raises(ParameterError):
            pearson([1, 2], [1, 2, 3])

    def test_spearman(self):
        assert spearman([1, 2, 3, 4], [1, 3, 2, 4]) == pytest.approx(0.8)
        assert spearman([1, 2, 3], [1, 10, 100]) == pytest.approx(1.0)
        assert spearman([1, 2, 3], [9, 4, 1]) == pytest.approx(-1.0)

    def test_spearman_ties_average(self):
        # ranks (1.5, 1.5, 3) vs (1, 2, 3)
        assert spearman([5, 5, 9], [1, 2, 3]) == pytest.approx(exact_pearson([1.5, 1.5, 3], [1, 2, 3]))

    @settings(max_examples=50)
    @given(st.lists(st.integers(-50, 50), min_size=3, max_size=20, unique=True),
           st.floats(0.1, 10), st.floats(-5, 5))
    def test_affine_and_monotone_invariance(self, xs, a, b):
        ys = [v * v * np.sign(v) + v for v in xs]
        base = pearson(xs, ys)
        assert pearson([a * v + b for v in xs], ys) == pytest.approx(base, abs=1e-9)
        assert spearman([math.exp(v / 10) for v in xs], ys) == pytest.approx(spearman(xs, ys), abs=1e-12)

    def test_paired_defined(self):
        x, y, dropped = paired_defined([1, math.nan, 3], [4, 5, math.nan])
        assert (list(x), list(y), dropped) == ([1.0], [4.0], 2)

    def test_align_keys_on_first(self):
        a = RateProfile(("x", "y"), ("x", "y"), (1.0, 2.0), 1.0, "actual")
        b = RateProfile(("y", "x"), ("y", "x"), (20.0, 10.0), 1.0, "estimated")
        assert align(a, b) == ([1.0, 2.0], [10.0, 20.0])


def test_csv_outputs(romance, tmp_path):
    R = actual_stability(romance)
    S = estimated_stability(romance)
    write_table_csv(R, tmp_path / "r.csv")
    write_scatter_csv(R, S, tmp_path / "sc.csv", "R", "S")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0].startswith("# ") and lines[1] == "item_id,gloss,value"
    assert len(lines) == 2 + romance.M
    assert (tmp_path / "sc.csv").read_text().splitlines()[1] == "item_id,gloss,R,S"
