"""Factorial stimulus designs probing number prediction in trained models.

Four designs are generated from item frames over the shipped lexicon:

* ``Exp1``: head noun modified by a prepositional phrase or a subject-gap
  relative clause, crossed with subject number and local-noun match.
* ``Exp2``: singular head with an object-gap relative clause whose object is
  an adverb, a singular noun, or a plural noun, followed by a PP whose object
  number is also varied.
* ``Exp2Reversed``: the same frames with the PP before the relative clause
  (verb re-inflected to agree with the subject), pairing one-to-one with
  ``Exp2``.
* ``RcLengthProbe``: object-gap relatives whose embedded subject carries
  zero, one, or two premodifiers, probed both before the embedded verb
  (gold = embedded subject number) and after it (gold = main subject number).

Every generated stimulus re-derives as a sentence prefix under the training
grammar, so condition contrasts measure the model, not ungrammaticality.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .corpus import Preamble
from .grammar import GrammarSpec
from .lexicon import Number, Vocabulary

DESIGN_EXP1 = "Exp1"
DESIGN_EXP2 = "Exp2"
DESIGN_EXP2_REVERSED = "Exp2Reversed"
DESIGN_RC_PROBE = "RcLengthProbe"

# factor frame per design: ordered factors, each with its closed level set
FACTOR_FRAMES: dict[str, tuple[tuple[str, tuple[str, ...]], ...]] = {
    DESIGN_EXP1: (
        ("modifier", ("PP", "RC")),
        ("subjectNumber", ("Sing", "Plur")),
        ("localMatch", ("Match", "Mismatch")),
    ),
    DESIGN_EXP2: (
        ("n1", ("Absent", "Sing", "Plur")),
        ("n2", ("Sing", "Plur")),
    ),
    DESIGN_EXP2_REVERSED: (
        ("n1", ("Absent", "Sing", "Plur")),
        ("n2", ("Sing", "Plur")),
    ),
    DESIGN_RC_PROBE: (
        ("rcLength", ("Short", "Medium", "Long")),
        ("probeSite", ("InsideRC", "OutsideRC")),
    ),
}


class StimulusError(ValueError):
    """Invalid frame, condition label, or stimulus file."""


@dataclass(frozen=True)
class ConditionLabel:
    """One cell of a design's factorial frame."""

    design: str
    factors: tuple[tuple[str, str], ...]

    def __post_init__(self) -> None:
        frame = FACTOR_FRAMES.get(self.design)
        if frame is None:
            raise StimulusError(f"unknown design {self.design!r}")
        if tuple(name for name, _ in self.factors) != tuple(name for name, _ in frame):
            raise StimulusError(
                f"{self.design}: factors must be exactly "
                f"{[name for name, _ in frame]}, got {[name for name, _ in self.factors]}"
            )
        for (name, level), (_, levels) in zip(self.factors, frame):
            if level not in levels:
                raise StimulusError(f"{self.design}: {name}={level!r} is not one of {levels}")

    def level(self, factor: str) -> str:
        for name, value in self.factors:
            if name == factor:
                return value
        raise KeyError(factor)

    @property
    def key(self) -> str:
        return ";".join(f"{name}={value}" for name, value in self.factors)

    @classmethod
    def parse(cls, design: str, text: str) -> "ConditionLabel":
        factors = []
        for part in text.split(";"):
            if "=" not in part:
                raise StimulusError(f"bad condition label field {part!r} in {text!r}")
            name, value = part.split("=", 1)
            factors.append((name, value))
        return cls(design, tuple(factors))


def condition_labels(design: str) -> list[ConditionLabel]:
    """The design's full factorial frame, in level order."""
    frame = FACTOR_FRAMES[design]
    cells: list[tuple[tuple[str, str], ...]] = [()]
    for name, levels in frame:
        cells = [cell + ((name, level),) for cell in cells for level in levels]
    return [ConditionLabel(design, cell) for cell in cells]


@dataclass(frozen=True)
class Stimulus:
    """A preamble with its design coordinates.

    ``probe_position`` counts consumed tokens; None means the prediction is
    read at the end of the token sequence.
    """

    item_id: int
    condition: ConditionLabel
    tokens: tuple[int, ...]
    gold: Number
    subject_index: int
    probe_position: int | None = None

    def to_preamble(self) -> Preamble:
        end = self.probe_position if self.probe_position is not None else len(self.tokens)
        return Preamble(self.tokens[:end], self.subject_index, self.gold)


@dataclass
class StimulusSet:
    design: str
    stimuli: list[Stimulus]

    def __len__(self) -> int:
        return len(self.stimuli)

    def by_condition(self) -> dict[str, list[Stimulus]]:
        out: dict[str, list[Stimulus]] = {}
        for s in self.stimuli:
            out.setdefault(s.condition.key, []).append(s)
        return out

    def item_ids(self) -> list[int]:
        return sorted({s.item_id for s in self.stimuli})


@dataclass(frozen=True)
class AttractorAnnotation:
    positions: tuple[int, ...]

    @property
    def count(self) -> int:
        return len(self.positions)


def annotate_attractors(preamble: Preamble, vocabulary: Vocabulary) -> AttractorAnnotation:
    """Positions of nouns after the subject whose number opposes the gold."""
    wrong = preamble.gold.opposite()
    positions = []
    for pos in range(preamble.subject_index + 1, len(preamble.tokens)):
        entry = vocabulary.entry(preamble.tokens[pos])
        if entry.category == "noun" and entry.number is wrong:
            positions.append(pos)
    return AttractorAnnotation(tuple(positions))


# -- item frames ---------------------------------------------------------------


@dataclass(frozen=True)
class Exp1Frame:
    item_id: int
    head: tuple[str, str]  # (singular, plural)
    local: tuple[str, str]
    preposition: str
    rc_verb: str  # past tense, heads the subject-gap relative
    head_premods: tuple[str, ...] = ()
    local_premods: tuple[str, ...] = ()


@dataclass(frozen=True)
class Exp2Frame:
    item_id: int
    subject: str  # singular head noun
    n1: tuple[str, str]
    n2: tuple[str, str]
    preposition: str
    verb_past: str
    verb_present: str  # singular form, used when the clause follows the PP
    adverb: str


@dataclass(frozen=True)
class RcProbeFrame:
    item_id: int
    head: str  # singular
    embedded: str  # plural
    verb_past: str
    adjective: str
    degree: str


def _require(frame_id: int, vocabulary: Vocabulary, surface: str, category: str,
             number: Number | None = None) -> None:
    try:
        tid = vocabulary.encode_token(surface)
    except Exception as exc:
        raise StimulusError(f"frame {frame_id}: {exc}") from None
    if vocabulary.is_placeholder(tid):
        raise StimulusError(
            f"frame {frame_id}: {surface!r} falls outside the retained vocabulary"
        )
    entry = vocabulary.entry(tid)
    if entry.category != category:
        raise StimulusError(
            f"frame {frame_id}: {surface!r} is a {entry.category}, expected {category}"
        )
    if number is not None and entry.number is not number:
        raise StimulusError(
            f"frame {frame_id}: {surface!r} is not {number.name.lower()}"
        )


def _check_noun_pair(frame_id: int, vocabulary: Vocabulary, pair: tuple[str, str]) -> None:
    _require(frame_id, vocabulary, pair[0], "noun", Number.SINGULAR)
    _require(frame_id, vocabulary, pair[1], "noun", Number.PLURAL)


_NUM = {"Sing": 0, "Plur": 1}
_GOLD = {"Sing": Number.SINGULAR, "Plur": Number.PLURAL}


def gen_exp1(frames: list[Exp1Frame], vocabulary: Vocabulary) -> StimulusSet:
    """Eight conditions per frame: modifier x subject number x local match."""
    stimuli = []
    for fr in frames:
        _check_noun_pair(fr.item_id, vocabulary, fr.head)
        _check_noun_pair(fr.item_id, vocabulary, fr.local)
        _require(fr.item_id, vocabulary, fr.preposition, "prep")
        if not fr.rc_verb:
            raise StimulusError(f"frame {fr.item_id}: no relative-clause verb")
        _require(fr.item_id, vocabulary, fr.rc_verb, "verb_past")
        for mod in fr.head_premods + fr.local_premods:
            _require(fr.item_id, vocabulary, mod, "adj")
        for label in condition_labels(DESIGN_EXP1):
            subj = _NUM[label.level("subjectNumber")]
            loc = subj if label.level("localMatch") == "Match" else 1 - subj
            middle = (
                [fr.preposition]
                if label.level("modifier") == "PP"
                else ["that", fr.rc_verb]
            )
            words = (
                ["the", *fr.head_premods, fr.head[subj], *middle]
                + ["the", *fr.local_premods, fr.local[loc]]
            )
            stimuli.append(
                Stimulus(
                    fr.item_id,
                    label,
                    tuple(vocabulary.encode(words)),
                    _GOLD[label.level("subjectNumber")],
                    subject_index=1 + len(fr.head_premods),
                )
            )
    return StimulusSet(DESIGN_EXP1, stimuli)


def _check_exp2_frame(fr: Exp2Frame, vocabulary: Vocabulary) -> None:
    _require(fr.item_id, vocabulary, fr.subject, "noun", Number.SINGULAR)
    _check_noun_pair(fr.item_id, vocabulary, fr.n1)
    _check_noun_pair(fr.item_id, vocabulary, fr.n2)
    _require(fr.item_id, vocabulary, fr.preposition, "prep")
    _require(fr.item_id, vocabulary, fr.verb_past, "verb_past")
    _require(fr.item_id, vocabulary, fr.verb_present, "verb", Number.SINGULAR)
    if not fr.adverb:
        raise StimulusError(f"frame {fr.item_id}: no adverb alternative for the object")
    _require(fr.item_id, vocabulary, fr.adverb, "adv")


def _exp2_object(fr: Exp2Frame, n1_level: str) -> list[str]:
    if n1_level == "Absent":
        return [fr.adverb]
    return ["the", fr.n1[_NUM[n1_level]]]


def gen_exp2(frames: list[Exp2Frame], vocabulary: Vocabulary) -> StimulusSet:
    """Six conditions per frame; the subject is always singular."""
    stimuli = []
    for fr in frames:
        _check_exp2_frame(fr, vocabulary)
        for label in condition_labels(DESIGN_EXP2):
            words = (
                ["the", fr.subject, "that", fr.verb_past]
                + _exp2_object(fr, label.level("n1"))
                + [fr.preposition, "the", fr.n2[_NUM[label.level("n2")]]]
            )
            stimuli.append(
                Stimulus(
                    fr.item_id,
                    label,
                    tuple(vocabulary.encode(words)),
                    Number.SINGULAR,
                    subject_index=1,
                )
            )
    return StimulusSet(DESIGN_EXP2, stimuli)


def gen_exp2_reversed(frames: list[Exp2Frame], vocabulary: Vocabulary) -> StimulusSet:
    """The PP precedes the relative clause; the clause verb agrees overtly."""
    stimuli = []
    for fr in frames:
        _check_exp2_frame(fr, vocabulary)
        for label in condition_labels(DESIGN_EXP2_REVERSED):
            words = (
                ["the", fr.subject, fr.preposition, "the", fr.n2[_NUM[label.level("n2")]]]
                + ["that", fr.verb_present]
                + _exp2_object(fr, label.level("n1"))
            )
            stimuli.append(
                Stimulus(
                    fr.item_id,
                    label,
                    tuple(vocabulary.encode(words)),
                    Number.SINGULAR,
                    subject_index=1,
                )
            )
    return StimulusSet(DESIGN_EXP2_REVERSED, stimuli)


def gen_rc_length_probe(frames: list[RcProbeFrame], vocabulary: Vocabulary) -> StimulusSet:
    """Three lengths x two probe sites per frame.

    The embedded subject is always immediately before the InsideRC probe
    point; the OutsideRC probe reads the prediction at the end, right after
    the embedded verb.
    """
    stimuli = []
    for fr in frames:
        _require(fr.item_id, vocabulary, fr.head, "noun", Number.SINGULAR)
        _require(fr.item_id, vocabulary, fr.embedded, "noun", Number.PLURAL)
        _require(fr.item_id, vocabulary, fr.verb_past, "verb_past")
        _require(fr.item_id, vocabulary, fr.adjective, "adj")
        _require(fr.item_id, vocabulary, fr.degree, "deg")
        premods = {
            "Short": [],
            "Medium": [fr.adjective],
            "Long": [fr.degree, fr.adjective],
        }
        for label in condition_labels(DESIGN_RC_PROBE):
            words = (
                ["the", fr.head, "that", "the"]
                + premods[label.level("rcLength")]
                + [fr.embedded, fr.verb_past]
            )
            tokens = tuple(vocabulary.encode(words))
            inside = label.level("probeSite") == "InsideRC"
            stimuli.append(
                Stimulus(
                    fr.item_id,
                    label,
                    tokens,
                    Number.PLURAL if inside else Number.SINGULAR,
                    subject_index=len(tokens) - 2 if inside else 1,
                    probe_position=len(tokens) - 1 if inside else None,
                )
            )
    return StimulusSet(DESIGN_RC_PROBE, stimuli)


def validate_derivable(stimulus_set: StimulusSet, spec: GrammarSpec) -> None:
    """Reject any stimulus that is not a sentence prefix under the grammar."""
    for s in stimulus_set.stimuli:
        pairs = [
            (spec.vocabulary.entry(t).category, spec.vocabulary.entry(t).number)
            for t in s.tokens
        ]
        if not spec.accepts_prefix(pairs):
            surfaces = " ".join(spec.vocabulary.decode(list(s.tokens)))
            raise StimulusError(
                f"item {s.item_id} ({s.condition.key}): {surfaces!r} does not "
                "re-derive under the grammar"
            )


# -- frames files --------------------------------------------------------------
#
# Tab-separated, one frame per line, `#` comments.  Premodifier columns hold
# comma-separated adjectives or `-` for none.

def _split_mods(field: str) -> tuple[str, ...]:
    return () if field == "-" else tuple(field.split(","))


def _frame_rows(text: str, n_columns: int, what: str) -> list[list[str]]:
    rows = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != n_columns:
            raise StimulusError(
                f"{what} line {lineno}: expected {n_columns} tab-separated fields, "
                f"got {len(fields)}"
            )
        rows.append(fields)
    return rows


def _frame_id(field: str, what: str) -> int:
    try:
        return int(field)
    except ValueError:
        raise StimulusError(f"{what}: bad frame id {field!r}") from None


def parse_exp1_frames(text: str) -> list[Exp1Frame]:
    frames = []
    for f in _frame_rows(text, 9, "exp1 frames"):
        frames.append(
            Exp1Frame(
                item_id=_frame_id(f[0], "exp1 frames"),
                head=(f[1], f[2]),
                local=(f[3], f[4]),
                preposition=f[5],
                rc_verb=f[6],
                head_premods=_split_mods(f[7]),
                local_premods=_split_mods(f[8]),
            )
        )
    return frames


def parse_exp2_frames(text: str) -> list[Exp2Frame]:
    frames = []
    for f in _frame_rows(text, 10, "exp2 frames"):
        frames.append(
            Exp2Frame(
                item_id=_frame_id(f[0], "exp2 frames"),
                subject=f[1],
                n1=(f[2], f[3]),
                n2=(f[4], f[5]),
                preposition=f[6],
                verb_past=f[7],
                verb_present=f[8],
                adverb=f[9],
            )
        )
    return frames


def parse_rc_probe_frames(text: str) -> list[RcProbeFrame]:
    frames = []
    for f in _frame_rows(text, 6, "probe frames"):
        frames.append(
            RcProbeFrame(
                item_id=_frame_id(f[0], "probe frames"),
                head=f[1],
                embedded=f[2],
                verb_past=f[3],
                adjective=f[4],
                degree=f[5],
            )
        )
    return frames


def load_exp1_frames(path: str | Path) -> list[Exp1Frame]:
    return parse_exp1_frames(Path(path).read_text(encoding="utf-8"))


def load_exp2_frames(path: str | Path) -> list[Exp2Frame]:
    return parse_exp2_frames(Path(path).read_text(encoding="utf-8"))


def load_rc_probe_frames(path: str | Path) -> list[RcProbeFrame]:
    return parse_rc_probe_frames(Path(path).read_text(encoding="utf-8"))


# -- stimulus files ------------------------------------------------------------
#
# Columns: designId, itemId, conditionLabel, goldNumber, probePosition (empty
# when the prediction is read at the end of the preamble), tokens.

def format_stimuli(stimulus_set: StimulusSet, vocabulary: Vocabulary) -> str:
    lines = []
    for s in stimulus_set.stimuli:
        probe = "" if s.probe_position is None else str(s.probe_position)
        surfaces = " ".join(vocabulary.decode(list(s.tokens)))
        lines.append(
            f"{stimulus_set.design}\t{s.item_id}\t{s.condition.key}\t"
            f"{s.gold.value}\t{probe}\t{surfaces}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def _reconstruct_subject(tokens: tuple[int, ...], gold: Number,
                         vocabulary: Vocabulary, lineno: int) -> int:
    # the designs guarantee the subject is the first noun carrying the gold number
    for pos, tid in enumerate(tokens):
        entry = vocabulary.entry(tid)
        if entry.category == "noun" and entry.number is gold:
            return pos
    raise StimulusError(f"line {lineno}: no noun carries the gold number")


def parse_stimuli(text: str, vocabulary: Vocabulary) -> StimulusSet:
    design: str | None = None
    stimuli = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise StimulusError(f"line {lineno}: expected 6 tab-separated fields")
        design_id, item_text, label_text, gold_tag, probe_text, token_text = fields
        if design is None:
            design = design_id
        elif design_id != design:
            raise StimulusError(
                f"line {lineno}: design {design_id!r} differs from {design!r}"
            )
        if gold_tag not in ("S", "P"):
            raise StimulusError(f"line {lineno}: gold number must be S or P")
        gold = Number.from_tag(gold_tag)
        label = ConditionLabel.parse(design_id, label_text)
        tokens = []
        for surface in token_text.split():
            try:
                tid = vocabulary.encode_token(surface)
            except Exception:
                raise StimulusError(
                    f"line {lineno}: token {surface!r} is not in the lexicon"
                ) from None
            if vocabulary.is_placeholder(tid):
                raise StimulusError(
                    f"line {lineno}: token {surface!r} falls outside the retained vocabulary"
                )
            tokens.append(tid)
        probe = None
        if probe_text:
            probe = int(probe_text)
            if not 1 <= probe <= len(tokens):
                raise StimulusError(f"line {lineno}: probe position {probe} out of range")
        stimuli.append(
            Stimulus(
                _frame_id(item_text, f"line {lineno}"),
                label,
                tuple(tokens),
                gold,
                _reconstruct_subject(tuple(tokens), gold, vocabulary, lineno),
                probe,
            )
        )
    if design is None:
        raise StimulusError("empty stimulus file has no design id")
    return StimulusSet(design, stimuli)


def save_stimuli(path: str | Path, stimulus_set: StimulusSet, vocabulary: Vocabulary) -> None:
    Path(path).write_text(format_stimuli(stimulus_set, vocabulary), encoding="utf-8")


def load_stimuli(path: str | Path, vocabulary: Vocabulary) -> StimulusSet:
    return parse_stimuli(Path(path).read_text(encoding="utf-8"), vocabulary)
