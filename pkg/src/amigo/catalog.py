"""Attribute taxonomy and per-item ternary labels.

The catalog is the single source of truth for everything downstream: the
attribute types (some of them off-limits to questions), the attribute values
with their question templates, the items with Present/Absent/Unknown labels,
and the synonym table used to resolve free-text questions.  A catalog is
immutable after load and safe to share across concurrent episode runs.
"""

from __future__ import annotations

import io
import json
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import BinaryIO, Iterable, Mapping


class CatalogError(Exception):
    """Base class for catalog load/lookup failures."""


class MalformedInput(CatalogError):
    """The source does not parse as a valid catalog document."""


class DanglingReference(CatalogError):
    """A label, type, or synonym points at an id that does not exist."""


class DuplicateId(CatalogError):
    """An id or normalized question surface occurs more than once."""


class EmptyTemplates(CatalogError):
    """An attribute value has no usable question templates."""


class UnknownItem(CatalogError):
    """Item id not present in the catalog."""


class UnknownValue(CatalogError):
    """Attribute value id not present in the catalog."""


class Label(Enum):
    PRESENT = "present"
    ABSENT = "absent"
    UNKNOWN = "unknown"


_NON_WORD = re.compile(r"[^a-z0-9]+")


def normalize_text(text: str) -> str:
    """Lowercase, strip punctuation, collapse whitespace."""
    return _NON_WORD.sub(" ", text.lower()).strip()


@dataclass(frozen=True, slots=True)
class AttributeType:
    id: str
    display_name: str
    forbidden: bool


@dataclass(frozen=True, slots=True)
class AttributeValue:
    id: str
    type_id: str
    canonical_name: str
    question_templates: tuple[str, ...]


@dataclass(frozen=True, slots=True)
class Item:
    id: str
    labels: Mapping[str, Label]

    def label_for(self, value_id: str) -> Label:
        """Label for a value; pairs without an explicit label are Unknown."""
        return self.labels.get(value_id, Label.UNKNOWN)


@dataclass(frozen=True)
class Catalog:
    version: str
    types: Mapping[str, AttributeType]
    values: Mapping[str, AttributeValue]
    items: Mapping[str, Item]
    synonyms: Mapping[str, str]
    # Derived lookups, built once at load time.
    _surface_index: Mapping[str, str] = field(repr=False, default_factory=dict)
    _mention_phrases: tuple[tuple[str, str], ...] = field(repr=False, default=())
    _present_sets: Mapping[str, frozenset[str]] = field(repr=False, default_factory=dict)

    def type_of(self, value_id: str) -> AttributeType:
        try:
            value = self.values[value_id]
        except KeyError:
            raise UnknownValue(f"unknown attribute value {value_id!r}") from None
        return self.types[value.type_id]

    def item(self, item_id: str) -> Item:
        try:
            return self.items[item_id]
        except KeyError:
            raise UnknownItem(f"unknown item {item_id!r}") from None

    def mention_phrases(self) -> tuple[tuple[str, str], ...]:
        """(normalized phrase, value id) pairs, longest phrase first."""
        return self._mention_phrases


def attrs_of(catalog: Catalog, item_id: str) -> frozenset[str]:
    """Value ids labeled Present for the item; Absent and Unknown are excluded."""
    if item_id not in catalog.items:
        raise UnknownItem(f"unknown item {item_id!r}")
    return catalog._present_sets[item_id]


def resolve_question_text(catalog: Catalog, text: str) -> str | None:
    """Map free-form question text to a value id, or None when unresolvable.

    Resolution is exact match over normalized question templates and synonym
    table entries; there is no fuzzy matching.
    """
    return catalog._surface_index.get(normalize_text(text))


def load_catalog(source: BinaryIO | bytes | str) -> Catalog:
    """Parse and validate a catalog document.

    Accepts a binary stream, raw bytes, or an already-decoded string.  The
    document layout is described in the README (fields ``version``,
    ``attribute_types``, ``attribute_values``, ``items``, ``synonyms``).
    """
    if isinstance(source, bytes):
        raw: str | bytes = source
    elif isinstance(source, str):
        raw = source
    else:
        raw = source.read()
    try:
        doc = json.loads(raw)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise MalformedInput(f"catalog does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise MalformedInput("catalog document must be a mapping")
    return _build_catalog(doc)


def dump_catalog(catalog: Catalog) -> bytes:
    """Serialize a catalog back to its document form.

    Collections are emitted in catalog iteration order, so
    ``dump_catalog(load_catalog(b)) == b`` for any document produced by this
    function.
    """
    doc = {
        "version": catalog.version,
        "attribute_types": [
            {"id": t.id, "display_name": t.display_name, "forbidden": t.forbidden}
            for t in catalog.types.values()
        ],
        "attribute_values": [
            {
                "id": v.id,
                "type_id": v.type_id,
                "canonical_name": v.canonical_name,
                "question_templates": list(v.question_templates),
            }
            for v in catalog.values.values()
        ],
        "items": [
            {"id": item.id, "labels": {vid: lab.value for vid, lab in item.labels.items()}}
            for item in catalog.items.values()
        ],
        "synonyms": dict(catalog.synonyms),
    }
    return (json.dumps(doc, indent=2, ensure_ascii=False) + "\n").encode("utf-8")


def loads_catalog(text: str) -> Catalog:
    return load_catalog(io.BytesIO(text.encode("utf-8")))


def _require(doc: Mapping, key: str, kind: type) -> object:
    if key not in doc:
        raise MalformedInput(f"missing required field {key!r}")
    value = doc[key]
    if not isinstance(value, kind):
        raise MalformedInput(f"field {key!r} must be {kind.__name__}")
    return value


def _str_field(entry: Mapping, key: str, where: str) -> str:
    value = entry.get(key)
    if not isinstance(value, str) or not value:
        raise MalformedInput(f"{where}: field {key!r} must be a non-empty string")
    return value


def _build_catalog(doc: Mapping) -> Catalog:
    version = _require(doc, "version", str)
    raw_types = _require(doc, "attribute_types", list)
    raw_values = _require(doc, "attribute_values", list)
    raw_items = _require(doc, "items", list)
    raw_synonyms = _require(doc, "synonyms", dict)

    types: dict[str, AttributeType] = {}
    for entry in raw_types:
        if not isinstance(entry, dict):
            raise MalformedInput("attribute_types entries must be mappings")
        tid = _str_field(entry, "id", "attribute type")
        if tid in types:
            raise DuplicateId(f"duplicate attribute type id {tid!r}")
        forbidden = entry.get("forbidden")
        if not isinstance(forbidden, bool):
            raise MalformedInput(f"attribute type {tid!r}: 'forbidden' must be a boolean")
        types[tid] = AttributeType(
            id=tid,
            display_name=_str_field(entry, "display_name", f"attribute type {tid!r}"),
            forbidden=forbidden,
        )

    values: dict[str, AttributeValue] = {}
    surface_index: dict[str, str] = {}
    for entry in raw_values:
        if not isinstance(entry, dict):
            raise MalformedInput("attribute_values entries must be mappings")
        vid = _str_field(entry, "id", "attribute value")
        if vid in values:
            raise DuplicateId(f"duplicate attribute value id {vid!r}")
        type_id = _str_field(entry, "type_id", f"attribute value {vid!r}")
        if type_id not in types:
            raise DanglingReference(f"attribute value {vid!r} references unknown type {type_id!r}")
        templates = entry.get("question_templates")
        if not isinstance(templates, list) or not templates:
            raise EmptyTemplates(f"attribute value {vid!r} has no question templates")
        cleaned: list[str] = []
        for template in templates:
            if not isinstance(template, str) or not normalize_text(template):
                raise EmptyTemplates(f"attribute value {vid!r} has an empty template")
            key = normalize_text(template)
            if key in surface_index:
                raise DuplicateId(
                    f"template {template!r} of value {vid!r} collides with another "
                    f"template after normalization"
                )
            surface_index[key] = vid
            cleaned.append(template)
        values[vid] = AttributeValue(
            id=vid,
            type_id=type_id,
            canonical_name=_str_field(entry, "canonical_name", f"attribute value {vid!r}"),
            question_templates=tuple(cleaned),
        )

    for surface, target in raw_synonyms.items():
        if not isinstance(surface, str) or not isinstance(target, str):
            raise MalformedInput("synonym entries must map string to value id")
        if target not in values:
            raise DanglingReference(f"synonym {surface!r} references unknown value {target!r}")
        key = normalize_text(surface)
        if not key:
            raise MalformedInput(f"synonym {surface!r} normalizes to nothing")
        existing = surface_index.get(key)
        if existing is not None and existing != target:
            raise DuplicateId(
                f"synonym {surface!r} resolves to {target!r} but the surface already "
                f"maps to {existing!r}"
            )
        surface_index[key] = target

    items: dict[str, Item] = {}
    present_sets: dict[str, frozenset[str]] = {}
    for entry in raw_items:
        if not isinstance(entry, dict):
            raise MalformedInput("items entries must be mappings")
        iid = _str_field(entry, "id", "item")
        if iid in items:
            raise DuplicateId(f"duplicate item id {iid!r}")
        raw_labels = entry.get("labels")
        if not isinstance(raw_labels, dict):
            raise MalformedInput(f"item {iid!r}: 'labels' must be a mapping")
        labels: dict[str, Label] = {}
        for vid, lab in raw_labels.items():
            if vid not in values:
                raise DanglingReference(f"item {iid!r} labels unknown value {vid!r}")
            try:
                labels[vid] = Label(lab)
            except ValueError:
                raise MalformedInput(
                    f"item {iid!r}: label for {vid!r} must be one of "
                    f"'present', 'absent', 'unknown'"
                ) from None
        present = frozenset(vid for vid, lab in labels.items() if lab is Label.PRESENT)
        if not present:
            raise MalformedInput(f"item {iid!r} has no Present label and can never be retrieved")
        items[iid] = Item(id=iid, labels=labels)
        present_sets[iid] = present

    mention_phrases = _build_mention_phrases(values, raw_synonyms)
    return Catalog(
        version=version,
        types=types,
        values=values,
        items=items,
        synonyms=dict(raw_synonyms),
        _surface_index=surface_index,
        _mention_phrases=mention_phrases,
        _present_sets=present_sets,
    )


def _build_mention_phrases(
    values: Mapping[str, AttributeValue], synonyms: Mapping[str, str]
) -> tuple[tuple[str, str], ...]:
    """Phrases used to spot value mentions inside compound question text.

    Canonical names and synonym surfaces both count as mentions.  Phrases are
    ordered longest first so that a longer phrase masks any shorter phrase it
    contains (e.g. "side slit" wins over "slit").
    """
    phrases: dict[str, str] = {}
    for value in values.values():
        key = normalize_text(value.canonical_name)
        if key:
            phrases.setdefault(key, value.id)
    for surface, target in synonyms.items():
        key = normalize_text(surface)
        if key:
            phrases.setdefault(key, target)
    ordered = sorted(phrases.items(), key=lambda kv: (-len(kv[0]), kv[0]))
    return tuple(ordered)


def scan_mentions(catalog: Catalog, text: str) -> frozenset[str]:
    """All value ids whose canonical name or synonym occurs in the text.

    Matching is word-bounded over normalized text; a matched span is consumed
    so phrases nested inside a longer match do not fire again.
    """
    haystack = f" {normalize_text(text)} "
    mask = list(haystack)
    found: set[str] = set()
    for phrase, value_id in catalog.mention_phrases():
        needle = f" {phrase} "
        start = 0
        current = "".join(mask)
        while True:
            pos = current.find(needle, start)
            if pos < 0:
                break
            found.add(value_id)
            for i in range(pos + 1, pos + len(needle) - 1):
                mask[i] = "\x00"
            current = "".join(mask)
            start = pos + 1
    return frozenset(found)


def gallery_labels(
    catalog: Catalog, gallery: Iterable[str]
) -> dict[str, Mapping[str, Label]]:
    """Per-item label views restricted to the gallery (agent-visible)."""
    return {item_id: catalog.item(item_id).labels for item_id in gallery}
