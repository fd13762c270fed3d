"""Swadesh-style wordlists: parsing, normalization, validation and subsetting.

Databases are read from the ``tsv-long-v1`` layout, one word form per row::

    language<TAB>item_id<TAB>gloss<TAB>form<TAB>cognate_class

The ``cognate_class`` column may be left out of the header entirely, or left
empty per row. Lines starting with ``#`` are comments. Synonyms are written as
repeated ``(language, item_id)`` rows; a missing word is simply a missing row.

Family name, language roles and tags live in a ``key=value`` sidecar::

    family_name=Romance
    language.Latin.role=proto
    language.Sicilian.tags=eastern,italo
"""

from __future__ import annotations

import io
import unicodedata
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Callable, Iterable, Mapping, TextIO

from glottokit.errors import EmptySelectionError, InvalidFormError, ParseError

FORMAT_TSV_LONG_V1 = "tsv-long-v1"

HEADER = ("language", "item_id", "gloss", "form", "cognate_class")

ROLE_MODERN = "modern"
ROLE_PROTO = "proto"


class DuplicateFormWarning(UserWarning):
    """A (language, item, normalized form) triple occurred more than once."""


def normalize_form(raw: str) -> str:
    """NFC-compose, lowercase and trim ``raw``.

    The result is a ``str``, i.e. a sequence of Unicode scalar values, which is
    the unit all edit distances are counted in.
    """
    if raw is None or not raw.strip():
        raise InvalidFormError(f"empty word form: {raw!r}")
    return unicodedata.normalize("NFC", raw).lower().strip()


@dataclass(frozen=True)
class WordForm:
    raw: str
    normalized: str
    cognate_class: str | None = None

    @classmethod
    def from_raw(cls, raw: str, cognate_class: str | None = None) -> "WordForm":
        return cls(raw=raw, normalized=normalize_form(raw), cognate_class=cognate_class or None)


@dataclass(frozen=True)
class LanguageRecord:
    label: str
    role: str = ROLE_MODERN
    tags: frozenset[str] = frozenset()


@dataclass(frozen=True)
class ItemRecord:
    item_id: str
    gloss: str = ""


@dataclass(frozen=True)
class LexicalDatabase:
    """Languages x items table of word-form sets.

    ``slots`` maps ``(language_index, item_index)`` to a non-empty tuple of
    :class:`WordForm`; absent keys are missing data.
    """

    family_name: str
    languages: tuple[LanguageRecord, ...]
    items: tuple[ItemRecord, ...]
    slots: Mapping[tuple[int, int], tuple[WordForm, ...]] = field(default_factory=dict)

    def __post_init__(self):
        labels = [lang.label for lang in self.languages]
        if len(set(labels)) != len(labels):
            raise ParseError("duplicate language labels")
        ids = [item.item_id for item in self.items]
        if len(set(ids)) != len(ids):
            raise ParseError("duplicate item ids")
        if any(not i for i in ids):
            raise ParseError("empty item id")
        n, m = len(self.languages), len(self.items)
        for (a, i), forms in self.slots.items():
            if not (0 <= a < n and 0 <= i < m):
                raise ParseError(f"slot {(a, i)} outside the {n}x{m} table")
            if not forms:
                raise ParseError(f"empty slot {(a, i)}; missing data must be an absent slot")
            norms = [f.normalized for f in forms]
            if len(set(norms)) != len(norms):
                raise ParseError(f"duplicate normalized forms in slot {(a, i)}")
        if not isinstance(self.slots, MappingProxyType):
            object.__setattr__(self, "slots", MappingProxyType(dict(self.slots)))

    @property
    def N(self) -> int:
        return len(self.languages)

    @property
    def M(self) -> int:
        return len(self.items)

    @property
    def labels(self) -> list[str]:
        return [lang.label for lang in self.languages]

    @property
    def item_ids(self) -> list[str]:
        return [item.item_id for item in self.items]

    def slot(self, language: int, item: int) -> tuple[WordForm, ...] | None:
        return self.slots.get((language, item))

    def language_index(self, label: str) -> int:
        for k, lang in enumerate(self.languages):
            if lang.label == label:
                return k
        raise KeyError(f"unknown language {label!r}")

    def item_index(self, item_id: str) -> int:
        for k, item in enumerate(self.items):
            if item.item_id == item_id:
                return k
        raise KeyError(f"unknown item {item_id!r}")

    def proto_indices(self) -> list[int]:
        return [k for k, lang in enumerate(self.languages) if lang.role == ROLE_PROTO]

    def modern_indices(self) -> list[int]:
        return [k for k, lang in enumerate(self.languages) if lang.role != ROLE_PROTO]


# --------------------------------------------------------------------------
# parsing

def parse_metadata(text: str | None) -> dict:
    """Parse the ``key=value`` sidecar into ``{"family_name", "roles", "tags", "item_order"}``.

    ``item_order`` lists tab-separated item ids and overrides first-appearance order.
    """
    meta = {"family_name": None, "roles": {}, "tags": {}, "item_order": None}
    if not text:
        return meta
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"metadata line is not key=value: {line!r}", lineno)
        key, value = (s.strip() for s in line.split("=", 1))
        if key == "family_name":
            meta["family_name"] = value
        elif key == "item_order":
            meta["item_order"] = [t.strip() for t in value.split("\t") if t.strip()]
        elif key.startswith("language.") and key.count(".") >= 2:
            label, attr = key[len("language."):].rsplit(".", 1)
            if attr == "role":
                if value not in (ROLE_MODERN, ROLE_PROTO):
                    raise ParseError(f"unknown role {value!r}", lineno)
                meta["roles"][label] = value
            elif attr == "tags":
                meta["tags"][label] = frozenset(t.strip() for t in value.split(",") if t.strip())
            else:
                raise ParseError(f"unknown language attribute {attr!r}", lineno)
        else:
            raise ParseError(f"unknown metadata key {key!r}", lineno)
    return meta


def parse_database(
    source: TextIO | str,
    format: str = FORMAT_TSV_LONG_V1,
    metadata: str | None = None,
    family_name: str = "",
) -> LexicalDatabase:
    """Read a long-row TSV wordlist.

    Languages and items are ordered by first appearance. Rows repeating an
    already-seen normalized form for the same slot are dropped with a
    :class:`DuplicateFormWarning`.
    """
    if format != FORMAT_TSV_LONG_V1:
        raise ParseError(f"unsupported wordlist format {format!r}")
    if isinstance(source, str):
        source = io.StringIO(source)
    meta = parse_metadata(metadata)

    header: tuple[str, ...] | None = None
    lang_pos: dict[str, int] = {}
    item_pos: dict[str, int] = {}
    glosses: list[str] = []
    slots: dict[tuple[int, int], list[WordForm]] = {}

    for lineno, line in enumerate(source, start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        cols = line.split("\t")
        if header is None:
            header = tuple(c.strip() for c in cols)
            if header not in (HEADER, HEADER[:4]):
                raise ParseError(f"bad header {header!r}, expected {HEADER!r}", lineno)
            continue
        if len(cols) != len(header):
            raise ParseError(f"expected {len(header)} columns, got {len(cols)}", lineno)
        language, item_id, gloss, raw = (c.strip() for c in cols[:4])
        cognate = cols[4].strip() if len(cols) == 5 else ""
        if not language:
            raise ParseError("empty language label", lineno)
        if not item_id:
            raise ParseError("empty item_id", lineno)
        try:
            form = WordForm.from_raw(raw, cognate)
        except InvalidFormError:
            raise ParseError("empty form field", lineno) from None

        a = lang_pos.setdefault(language, len(lang_pos))
        if item_id not in item_pos:
            item_pos[item_id] = len(item_pos)
            glosses.append(gloss)
        i = item_pos[item_id]
        bucket = slots.setdefault((a, i), [])
        if any(f.normalized == form.normalized for f in bucket):
            warnings.warn(
                f"line {lineno}: duplicate form {form.normalized!r} for ({language}, {item_id})",
                DuplicateFormWarning,
                stacklevel=2,
            )
            continue
        bucket.append(form)

    if header is None:
        raise ParseError("missing header line")

    for label in list(meta["roles"]) + list(meta["tags"]):
        if label not in lang_pos:
            raise ParseError(f"metadata names unknown language {label!r}")
    languages = tuple(
        LanguageRecord(
            label=label,
            role=meta["roles"].get(label, ROLE_MODERN),
            tags=meta["tags"].get(label, frozenset()),
        )
        for label in lang_pos
    )
    items = [ItemRecord(item_id, g) for item_id, g in zip(item_pos, glosses)]
    final = {k: tuple(v) for k, v in slots.items()}
    order = meta["item_order"]
    if order is not None:
        if sorted(order) != sorted(item_pos):
            raise ParseError("metadata item_order does not list exactly the items in the wordlist")
        new_pos = {item_id: k for k, item_id in enumerate(order)}
        remap = [new_pos[item.item_id] for item in items]
        items = sorted(items, key=lambda it: new_pos[it.item_id])
        final = {(a, remap[i]): v for (a, i), v in final.items()}
    return LexicalDatabase(
        family_name=meta["family_name"] or family_name,
        languages=languages,
        items=tuple(items),
        slots=final,
    )


def load_database(path: str | Path, meta_path: str | Path | None = None) -> LexicalDatabase:
    """Load ``path`` plus its sidecar (defaults to ``path`` with suffix ``.meta``)."""
    path = Path(path)
    if meta_path is None:
        candidate = path.with_suffix(".meta")
        meta_path = candidate if candidate.exists() else None
    metadata = Path(meta_path).read_text(encoding="utf-8") if meta_path else None
    with open(path, encoding="utf-8", newline="") as fh:
        return parse_database(fh, metadata=metadata, family_name=path.stem)


def serialize_database(db: LexicalDatabase) -> tuple[str, str]:
    """Return ``(tsv_text, metadata_text)`` that parse back to ``db``."""
    out = ["\t".join(HEADER)]
    for (a, i) in sorted(db.slots):
        item = db.items[i]
        for form in db.slots[(a, i)]:
            out.append("\t".join((
                db.languages[a].label, item.item_id, item.gloss, form.raw, form.cognate_class or "",
            )))
    meta = [f"family_name={db.family_name}"]
    # rows alone fix items by first appearance; record the order when that differs
    seen: dict[int, None] = {}
    for _, i in sorted(db.slots):
        seen.setdefault(i)
    if list(seen) != list(range(db.M)):
        meta.append("item_order=" + "\t".join(db.item_ids))
    for lang in db.languages:
        meta.append(f"language.{lang.label}.role={lang.role}")
        if lang.tags:
            meta.append(f"language.{lang.label}.tags={','.join(sorted(lang.tags))}")
    return "\n".join(out) + "\n", "\n".join(meta) + "\n"


# --------------------------------------------------------------------------
# selections

def common_items(a: LexicalDatabase, b: LexicalDatabase) -> list[str]:
    """Item ids present in both databases, in ``a``'s order."""
    in_b = set(b.item_ids)
    return [item_id for item_id in a.item_ids if item_id in in_b]


def subset(
    db: LexicalDatabase,
    languages: Callable[[LanguageRecord], bool] | None = None,
    items: Iterable[str] | None = None,
) -> LexicalDatabase:
    """Restrict ``db`` to languages passing the predicate and to ``items``.

    ``None`` keeps everything along that axis. Order and slots are preserved.
    """
    keep_l = [k for k, lang in enumerate(db.languages) if languages is None or languages(lang)]
    if not keep_l:
        raise EmptySelectionError("language filter selected no languages")
    if items is None:
        keep_i = list(range(db.M))
    else:
        wanted = set(items)
        unknown = wanted - set(db.item_ids)
        if unknown:
            raise KeyError(f"unknown item ids: {sorted(unknown)}")
        keep_i = [k for k, item in enumerate(db.items) if item.item_id in wanted]
    new_l = {old: new for new, old in enumerate(keep_l)}
    new_i = {old: new for new, old in enumerate(keep_i)}
    slots = {
        (new_l[a], new_i[i]): forms
        for (a, i), forms in db.slots.items()
        if a in new_l and i in new_i
    }
    return LexicalDatabase(
        family_name=db.family_name,
        languages=tuple(db.languages[k] for k in keep_l),
        items=tuple(db.items[k] for k in keep_i),
        slots=slots,
    )


def has_tag(tag: str) -> Callable[[LanguageRecord], bool]:
    return lambda lang: tag in lang.tags


def is_modern(lang: LanguageRecord) -> bool:
    return lang.role != ROLE_PROTO
