"""Lexicon entries and vocabulary construction with rare-word POS replacement.

The lexicon file is line-oriented text, one entry per line:

    surface<TAB>category<TAB>number(S|P|-)<TAB>frequencyRank

A Vocabulary retains the ``cutoff`` most frequent surfaces as real tokens and
maps every remaining surface to a per-category placeholder token (one
placeholder id per category present in the lexicon).  Placeholders are
ordinary vocabulary entries whose number feature is NONE.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from pathlib import Path


class Number(Enum):
    """Grammatical number feature; NONE for word classes that do not inflect."""

    SINGULAR = "S"
    PLURAL = "P"
    NONE = "-"

    @classmethod
    def from_tag(cls, tag: str) -> "Number":
        try:
            return cls(tag)
        except ValueError:
            raise LexiconError(f"unknown number tag {tag!r} (expected S, P or -)") from None

    def opposite(self) -> "Number":
        if self is Number.SINGULAR:
            return Number.PLURAL
        if self is Number.PLURAL:
            return Number.SINGULAR
        return Number.NONE


class LexiconError(ValueError):
    """Malformed lexicon input."""


@dataclass(frozen=True)
class LexEntry:
    surface: str
    category: str
    number: Number
    frequency_rank: int


def placeholder_surface(category: str) -> str:
    return f"<{category}>"


def parse_lexicon(text: str) -> list[LexEntry]:
    """Parse lexicon file content into entries, rejecting duplicate surfaces."""
    entries: list[LexEntry] = []
    seen: dict[str, LexEntry] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise LexiconError(f"line {lineno}: expected 4 tab-separated fields, got {len(fields)}")
        surface, category, number_tag, rank_str = fields
        if not surface or not category:
            raise LexiconError(f"line {lineno}: empty surface or category")
        try:
            rank = int(rank_str)
        except ValueError:
            raise LexiconError(f"line {lineno}: frequency rank {rank_str!r} is not an integer") from None
        if rank < 1:
            raise LexiconError(f"line {lineno}: frequency rank must be positive, got {rank}")
        if surface in seen:
            prev = seen[surface]
            if prev.category != category:
                raise LexiconError(
                    f"line {lineno}: surface {surface!r} already defined with category "
                    f"{prev.category!r}, conflicting with {category!r}"
                )
            raise LexiconError(f"line {lineno}: duplicate surface {surface!r}")
        entry = LexEntry(surface, category, Number.from_tag(number_tag), rank)
        seen[surface] = entry
        entries.append(entry)
    return entries


def load_lexicon(path: str | Path) -> list[LexEntry]:
    return parse_lexicon(Path(path).read_text(encoding="utf-8"))


def format_lexicon(entries: list[LexEntry]) -> str:
    lines = [f"{e.surface}\t{e.category}\t{e.number.value}\t{e.frequency_rank}" for e in entries]
    return "\n".join(lines) + "\n"


@dataclass
class Vocabulary:
    """Token-id assignment over a lexicon.

    ``entries`` holds one LexEntry per token id: the retained surfaces in
    frequency order, followed by one placeholder per category.  ``id_of``
    maps every lexicon surface (retained or not) to its token id.
    """

    entries: list[LexEntry]
    id_of: dict[str, int]
    cutoff: int
    placeholder_ids: dict[str, int]
    lexicon: list[LexEntry]

    @property
    def size(self) -> int:
        return len(self.entries)

    def surface(self, token_id: int) -> str:
        return self.entries[token_id].surface

    def entry(self, token_id: int) -> LexEntry:
        return self.entries[token_id]

    def is_placeholder(self, token_id: int) -> bool:
        return token_id >= self.size - len(self.placeholder_ids)

    def encode_token(self, surface: str) -> int:
        if surface not in self.id_of:
            raise LexiconError(f"surface {surface!r} is not in the lexicon")
        return self.id_of[surface]

    def encode(self, surfaces: list[str]) -> list[int]:
        """Map surface forms to token ids, applying POS replacement."""
        return [self.encode_token(s) for s in surfaces]

    def decode(self, token_ids: list[int]) -> list[str]:
        return [self.surface(t) for t in token_ids]

    def entries_for(self, category: str, number: Number | None = None) -> list[LexEntry]:
        """All real lexicon entries of a category, optionally filtered by number."""
        return [
            e
            for e in self.lexicon
            if e.category == category and (number is None or e.number is number)
        ]


def build_vocabulary(lexicon: list[LexEntry] | str | Path, cutoff: int) -> Vocabulary:
    """Build a Vocabulary retaining the ``cutoff`` most frequent entries.

    Ties in frequency rank are broken by lexicon order, so id assignment is
    deterministic given the entry list.
    """
    if not isinstance(lexicon, list):
        lexicon = load_lexicon(lexicon)
    if cutoff < 1:
        raise LexiconError(f"cutoff must be >= 1, got {cutoff}")
    if not lexicon:
        raise LexiconError("empty lexicon")

    order = sorted(range(len(lexicon)), key=lambda i: (lexicon[i].frequency_rank, i))
    retained_idx = order[:cutoff]
    dropped_idx = order[cutoff:]

    entries: list[LexEntry] = [lexicon[i] for i in retained_idx]
    id_of: dict[str, int] = {e.surface: tid for tid, e in enumerate(entries)}

    categories = sorted({e.category for e in lexicon})
    placeholder_ids: dict[str, int] = {}
    max_rank = max(e.frequency_rank for e in lexicon)
    for cat in categories:
        tid = len(entries)
        entries.append(LexEntry(placeholder_surface(cat), cat, Number.NONE, max_rank + 1 + tid))
        placeholder_ids[cat] = tid

    for i in dropped_idx:
        e = lexicon[i]
        id_of[e.surface] = placeholder_ids[e.category]

    return Vocabulary(
        entries=entries,
        id_of=id_of,
        cutoff=cutoff,
        placeholder_ids=placeholder_ids,
        lexicon=list(lexicon),
    )
