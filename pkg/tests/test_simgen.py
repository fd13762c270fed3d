from __future__ import annotations

import math

import numpy as np
import pytest

from glottokit.chrono import forward_overlap
from glottokit.errors import ConfigurationError
from glottokit.metric import language_overlap, nld, overlap_matrix
from glottokit.simgen import (
    ALPHABET,
    FamilyTree,
    SimConfig,
    TreeNode,
    clade_tree,
    draw_rates,
    expected_overlap,
    random_proto,
    random_word_similarity,
    read_truth,
    simulate_family,
    star_tree,
    write_truth,
)
from glottokit.wordlist import serialize_database


def family(config: SimConfig, tree: FamilyTree, rates=None):
    rates = draw_rates(config) if rates is None else rates
    return simulate_family(random_proto(config), tree, rates, config)


class TestTrees:
    def test_star(self):
        tree = star_tree(60, 1.5)
        assert tree.leaf_names[0] == "L01" and len(tree.leaves) == 60
        assert tree.distance("L01", "L60") == pytest.approx(3.0)

    def test_clades(self):
        tree = clade_tree(2, 3, 1.5, 0.5)
        assert tree.leaf_names == ["C1L01", "C1L02", "C1L03", "C2L01", "C2L02", "C2L03"]
        assert tree.distance("C1L01", "C1L02") == pytest.approx(2.0)
        assert tree.distance("C1L01", "C2L01") == pytest.approx(3.0)
        assert tree.nodes[tree.leaves[0]].tags == frozenset({"clade1"})

    def test_bad_clade_depth(self):
        with pytest.raises(ConfigurationError):
            clade_tree(2, 2, 1.0, 2.0)

    def test_parent_must_come_first(self):
        with pytest.raises(ConfigurationError):
            FamilyTree((TreeNode("root", None), TreeNode("x", 2, 1.0), TreeNode("y", 0, 1.0)))


class TestConfig:
    def test_alphabet(self):
        assert SimConfig(alphabet_size=26).alphabet == "abcdefghijklmnopqrstuvwxyz"
        assert len(set(ALPHABET)) == len(ALPHABET) > 26

    @pytest.mark.parametrize("kwargs", [
        {"alphabet_size": 1}, {"min_length": 0}, {"min_length": 6, "max_length": 5},
        {"M": -1}, {"M": 2, "rates": (0.1,)}, {"mutation_rate": -0.1},
    ])
    def test_invalid(self, kwargs):
        with pytest.raises(ConfigurationError):
            SimConfig(**kwargs)

    def test_explicit_rates(self):
        assert draw_rates(SimConfig(M=2, rates=(0.1, 0.2))).tolist() == [0.1, 0.2]

    def test_gamma_rates(self):
        rates = draw_rates(SimConfig(M=20000, seed=1))
        assert rates.mean() == pytest.approx(7.0 * 0.076, rel=0.01)
        assert rates.std() == pytest.approx(math.sqrt(7.0) * 0.076, rel=0.02)


class TestProto:
    def test_empty_lexicon(self):
        config = SimConfig(M=0)
        assert random_proto(config) == []
        db = family(config, star_tree(3, 1.0))
        assert db.M == 0 and not db.slots

    def test_deterministic(self):
        assert random_proto(SimConfig(seed=4)) == random_proto(SimConfig(seed=4))
        assert random_proto(SimConfig(seed=4)) != random_proto(SimConfig(seed=5))

    def test_word_shape(self):
        words = random_proto(SimConfig(M=500, seed=2))
        assert all(5 <= len(w) <= 8 and set(w) <= set(ALPHABET[:26]) for w in words)

    def test_items_use_own_streams(self):
        # the first words do not depend on how many items follow
        assert random_proto(SimConfig(M=110, seed=8))[:10] == random_proto(SimConfig(M=10, seed=8))

    def test_random_words_are_far_apart(self):
        config = SimConfig()
        words = random_proto(config)
        pairs = [nld(a, b) for k, a in enumerate(words) for b in words[k + 1:]]
        assert np.mean(pairs) > 0.7
        assert 1.0 - random_word_similarity(config, 5000) > 0.7


class TestEvolution:
    def test_zero_branch_lengths(self):
        config = SimConfig(M=40, seed=3)
        db = family(config, star_tree(5, 0.0))
        assert np.all(overlap_matrix(db).values == 1.0)

    def test_zero_rate_item(self):
        config = SimConfig(M=3, rates=(0.0, 5.0, 5.0), seed=6)
        db = family(config, star_tree(10, 2.0))
        assert len({db.slot(a, 0)[0].normalized for a in range(db.N)}) == 1

    def test_deterministic(self):
        config = SimConfig(M=30, seed=12, mutation_rate=0.2)
        a = family(config, clade_tree(2, 4, 1.5, 0.5))
        b = family(config, clade_tree(2, 4, 1.5, 0.5))
        assert serialize_database(a) == serialize_database(b)

    def test_proto_first_and_optional(self):
        config = SimConfig(M=5, seed=1)
        with_proto = family(config, star_tree(3, 1.0))
        assert with_proto.languages[0].role == "proto"
        without = simulate_family(random_proto(config), star_tree(3, 1.0), draw_rates(config), config,
                                  emit_proto=False)
        assert without.proto_indices() == [] and without.N == 3
        assert without.slots[(0, 0)] == with_proto.slots[(1, 0)]

    def test_mismatched_inputs(self):
        config = SimConfig(M=3, seed=1)
        with pytest.raises(ConfigurationError):
            simulate_family(["abc"], star_tree(2, 1.0), [0.1, 0.1, 0.1], config)
        with pytest.raises(ConfigurationError):
            simulate_family(random_proto(config), star_tree(2, 1.0), [0.1, -0.1, 0.1], config)

    def test_mutation_changes_surviving_words(self):
        config = SimConfig(M=50, rates=(0.0,) * 50, mutation_rate=0.5, seed=2)
        db = family(config, star_tree(4, 1.0))
        changed = sum(db.slot(1, i) != db.slot(0, i) for i in range(50))
        assert changed > 25

    def test_survival_is_binomial(self):
        # few items so that a 3-sigma rule per item is a meaningful joint check
        rates = (0.0, 0.1, 0.3, 0.6, 1.2)
        config = SimConfig(M=5, rates=rates, seed=2018)
        db = family(config, star_tree(60, 1.5))
        for i, r in enumerate(rates):
            p = math.exp(-r * 1.5)
            kept = sum(db.slot(a, i) == db.slot(0, i) for a in range(1, db.N)) / 60
            assert abs(kept - p) <= 3 * math.sqrt(p * (1 - p) / 60) + 1e-12, (i, kept, p)

    def test_overlap_converges_to_expectation(self):
        config = SimConfig(M=300, seed=7)
        rates = draw_rates(config)
        db = family(config, star_tree(60, 1.5), rates)
        residual = random_word_similarity(config, 20000, seed=1)
        target = expected_overlap(rates, 1.5, residual)
        observed = np.array([language_overlap(db, 0, a)[0] for a in range(1, db.N)])
        se = observed.std(ddof=1) / math.sqrt(observed.size)
        assert abs(observed.mean() - target) <= 3 * se


class TestExpectedOverlap:
    def test_zero_residual_is_forward_model(self):
        rates = [0.1, 0.5, 0.9]
        assert expected_overlap(rates, 2.0) == pytest.approx(forward_overlap(rates, 1.0, 2.0), rel=1e-15)

    def test_limits(self):
        assert expected_overlap([0.3, 0.6], 0.0, 0.2) == 1.0
        assert expected_overlap([0.3, 0.6], 1e6, 0.2) == pytest.approx(0.2)

    def test_bad_residual(self):
        with pytest.raises(ConfigurationError):
            expected_overlap([0.3], 1.0, 1.0)


def test_truth_round_trip(tmp_path):
    tree = clade_tree(2, 2, 1.5, 0.5)
    write_truth(tmp_path / "fam", ["i001", "i002"], [0.25, 0.5], tree)
    truth = read_truth(tmp_path / "fam")
    assert truth.rates == {"i001": 0.25, "i002": 0.5}
    assert truth.time("C2L01", "C1L01") == pytest.approx(3.0)
    assert len(truth.times) == 6
