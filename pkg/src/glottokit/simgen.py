"""Ground-truth generator: vocabulary replacement along a family tree.

Along a branch of length ``t`` the word for item ``i`` is replaced with
probability ``1 - exp(-rate_i * t)`` by a fresh random word; otherwise it is
inherited, optionally with small per-character substitutions.

Random streams are keyed, not sequential. With master seed ``s``:

* proto word for item ``i``: ``SeedSequence(s, spawn_key=(0, i))``
* item ``i`` on the branch above node ``k``: ``SeedSequence(s, spawn_key=(1, k, i))``
* Gamma rate draw: ``SeedSequence(s, spawn_key=(2,))``

so every draw is fixed by its key alone, whatever order branches are visited in.
"""

from __future__ import annotations

import math
import string
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from glottokit._io import atomic_csv, format_float, read_csv_rows
from glottokit.errors import ConfigurationError
from glottokit.metric import nld
from glottokit.wordlist import (
    ROLE_MODERN,
    ROLE_PROTO,
    ItemRecord,
    LanguageRecord,
    LexicalDatabase,
    WordForm,
)

# a..z then Greek lowercase, for alphabets larger than 26
ALPHABET = string.ascii_lowercase + "".join(chr(c) for c in range(0x3B1, 0x3CA) if c != 0x3C2)

_PROTO, _BRANCH, _RATES = 0, 1, 2


@dataclass(frozen=True)
class TreeNode:
    name: str
    parent: int | None
    branch_length: float = 0.0
    tags: frozenset[str] = frozenset()


@dataclass(frozen=True)
class FamilyTree:
    """Rooted tree stored parent-first: every node's parent precedes it."""

    nodes: tuple[TreeNode, ...]

    def __post_init__(self):
        if not self.nodes or self.nodes[0].parent is not None:
            raise ConfigurationError("node 0 must be the root")
        names = [n.name for n in self.nodes]
        if len(set(names)) != len(names):
            raise ConfigurationError("node names must be unique")
        for k, node in enumerate(self.nodes[1:], start=1):
            if node.parent is None:
                raise ConfigurationError(f"second root {node.name!r}")
            if not 0 <= node.parent < k:
                raise ConfigurationError(f"parent of {node.name!r} must precede it")
            if not node.branch_length >= 0:
                raise ConfigurationError(f"negative branch length above {node.name!r}")

    @property
    def leaves(self) -> list[int]:
        parents = {n.parent for n in self.nodes}
        return [k for k in range(len(self.nodes)) if k not in parents]

    @property
    def leaf_names(self) -> list[str]:
        return [self.nodes[k].name for k in self.leaves]

    def _path(self, k: int) -> list[int]:
        path = [k]
        while self.nodes[path[-1]].parent is not None:
            path.append(self.nodes[path[-1]].parent)
        return path

    def depth(self, k: int) -> float:
        return sum(self.nodes[j].branch_length for j in self._path(k)[:-1])

    def distance(self, a: str, b: str) -> float:
        """Path length between two nodes, i.e. the time separating them."""
        index = {n.name: k for k, n in enumerate(self.nodes)}
        pa, pb = self._path(index[a]), self._path(index[b])
        shared = set(pa) & set(pb)
        mrca = next(k for k in pa if k in shared)
        return self.depth(index[a]) + self.depth(index[b]) - 2 * self.depth(mrca)


def star_tree(n_leaves: int, depth: float, prefix: str = "L") -> FamilyTree:
    width = len(str(n_leaves))
    nodes = [TreeNode("root", None)]
    nodes += [TreeNode(f"{prefix}{k + 1:0{width}d}", 0, depth) for k in range(n_leaves)]
    return FamilyTree(tuple(nodes))


def clade_tree(n_clades: int, leaves_per_clade: int, depth: float, clade_depth: float) -> FamilyTree:
    """Root -> ``n_clades`` internal nodes -> leaves, all leaves at ``depth``.

    Leaves carry the tag ``clade<k>`` of their clade.
    """
    if not 0 <= clade_depth <= depth:
        raise ConfigurationError("clade_depth must lie in [0, depth]")
    nodes = [TreeNode("root", None)]
    for c in range(n_clades):
        nodes.append(TreeNode(f"clade{c + 1}", 0, clade_depth))
    for c in range(n_clades):
        for k in range(leaves_per_clade):
            nodes.append(TreeNode(
                f"C{c + 1}L{k + 1:02d}", 1 + c, depth - clade_depth, frozenset({f"clade{c + 1}"})
            ))
    return FamilyTree(tuple(nodes))


@dataclass(frozen=True)
class SimConfig:
    M: int = 110
    rates: tuple[float, ...] | None = None
    gamma_shape: float = 7.0
    gamma_scale: float = 0.076
    alphabet_size: int = 26
    min_length: int = 5
    max_length: int = 8
    mutation_rate: float = 0.0
    seed: int = 0
    proto_label: str = "proto"
    family_name: str = "simulated"

    def __post_init__(self):
        if not 2 <= self.alphabet_size <= len(ALPHABET):
            raise ConfigurationError(f"alphabet size must be in [2, {len(ALPHABET)}]")
        if not 0 < self.min_length <= self.max_length:
            raise ConfigurationError("need 0 < min_length <= max_length")
        if self.M < 0:
            raise ConfigurationError("M must be non-negative")
        if self.rates is not None and len(self.rates) != self.M:
            raise ConfigurationError(f"{len(self.rates)} explicit rates for M={self.M}")
        if self.mutation_rate < 0:
            raise ConfigurationError("mutation rate must be non-negative")

    @property
    def alphabet(self) -> str:
        return ALPHABET[: self.alphabet_size]

    @property
    def item_ids(self) -> list[str]:
        return [f"i{k + 1:03d}" for k in range(self.M)]

    def stream(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=key))


def _random_word(rng: np.random.Generator, config: SimConfig) -> str:
    n = int(rng.integers(config.min_length, config.max_length + 1))
    letters = config.alphabet
    return "".join(letters[j] for j in rng.integers(0, len(letters), size=n))


def draw_rates(config: SimConfig) -> np.ndarray:
    """Explicit rates if configured, else a Gamma(shape, scale) draw of size ``M``."""
    if config.rates is not None:
        return np.asarray(config.rates, dtype=float)
    return config.stream(_RATES).gamma(config.gamma_shape, config.gamma_scale, size=config.M)


def random_proto(config: SimConfig) -> list[str]:
    return [_random_word(config.stream(_PROTO, i), config) for i in range(config.M)]


def _evolve(word: str, rate: float, t: float, rng: np.random.Generator, config: SimConfig) -> str:
    if rng.random() < -math.expm1(-rate * t):
        return _random_word(rng, config)
    if config.mutation_rate > 0 and t > 0:
        p = -math.expm1(-config.mutation_rate * t)
        hits = rng.random(len(word)) < p
        if hits.any():
            letters = config.alphabet
            subs = rng.integers(0, len(letters), size=len(word))
            word = "".join(letters[s] if h else ch for ch, h, s in zip(word, hits, subs))
    return word


def simulate_family(
    proto: Sequence[str],
    tree: FamilyTree,
    rates: Sequence[float],
    config: SimConfig,
    emit_proto: bool = True,
) -> LexicalDatabase:
    """Evolve ``proto`` down ``tree``; leaves become modern languages."""
    if len(proto) != config.M or len(rates) != config.M:
        raise ConfigurationError(
            f"proto has {len(proto)} words and {len(rates)} rates, config says M={config.M}"
        )
    if any(not r >= 0 for r in rates):
        raise ConfigurationError("rates must be non-negative")
    words: list[list[str] | None] = [None] * len(tree.nodes)
    words[0] = list(proto)
    for k, node in enumerate(tree.nodes[1:], start=1):
        parent = words[node.parent]
        words[k] = [
            _evolve(parent[i], float(rates[i]), node.branch_length, config.stream(_BRANCH, k, i), config)
            for i in range(config.M)
        ]

    emitted = ([(config.proto_label, ROLE_PROTO, frozenset(), words[0])] if emit_proto else [])
    emitted += [(tree.nodes[k].name, ROLE_MODERN, tree.nodes[k].tags, words[k]) for k in tree.leaves]
    languages = tuple(LanguageRecord(label, role, tags) for label, role, tags, _ in emitted)
    items = tuple(ItemRecord(item_id, f"item {k + 1}") for k, item_id in enumerate(config.item_ids))
    slots = {
        (a, i): (WordForm(w[i], w[i]),)
        for a, (_, _, _, w) in enumerate(emitted)
        for i in range(config.M)
    }
    return LexicalDatabase(config.family_name, languages, items, slots)


def expected_overlap(rates: Sequence[float], T: float, residual: float = 0.0) -> float:
    """Mean over items of survival plus the chance similarity of unrelated words."""
    if not 0 <= residual < 1:
        raise ConfigurationError("residual must lie in [0, 1)")
    r = np.asarray(rates, dtype=float)
    survive = np.exp(-r * T)
    return math.fsum(survive + (1.0 - survive) * residual) / r.size


def random_word_similarity(config: SimConfig, samples: int = 20000, seed: int = 0) -> float:
    """Monte Carlo mean of ``1 - NLD`` between two independent random words."""
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(samples):
        total += 1.0 - nld(_random_word(rng, config), _random_word(rng, config))
    return total / samples


# --------------------------------------------------------------------------
# truth sidecars

def truth_paths(prefix) -> tuple[str, str]:
    prefix = str(prefix)
    return f"{prefix}.truth_rates.csv", f"{prefix}.truth_times.csv"


def write_truth(prefix, item_ids: Sequence[str], rates: Sequence[float], tree: FamilyTree) -> None:
    rates_path, times_path = truth_paths(prefix)
    with atomic_csv(rates_path, "true replacement rate per millennium; columns: item_id,true_rate") as w:
        w.writerow(["item_id", "true_rate"])
        for item_id, r in zip(item_ids, rates):
            w.writerow([item_id, format_float(r)])
    with atomic_csv(times_path, "true time distance in millennia; columns: leafA,leafB,true_T") as w:
        w.writerow(["leafA", "leafB", "true_T"])
        for a, b in combinations(tree.leaf_names, 2):
            w.writerow([a, b, format_float(tree.distance(a, b))])


@dataclass(frozen=True)
class Truth:
    rates: dict[str, float]
    times: dict[tuple[str, str], float] = field(default_factory=dict)

    def time(self, a: str, b: str) -> float:
        return self.times[(a, b)] if (a, b) in self.times else self.times[(b, a)]


def read_truth(prefix) -> Truth:
    rates_path, times_path = truth_paths(prefix)
    rates = {row["item_id"]: float(row["true_rate"]) for row in read_csv_rows(rates_path)}
    times = {(row["leafA"], row["leafB"]): float(row["true_T"]) for row in read_csv_rows(times_path)}
    return Truth(rates, times)
