"""Sentence generation and preamble extraction.

A derivation walks the weighted grammar top-down.  Nonterminals listed under
``clauses:`` open an agreement frame; ``/subj`` terminals set the frame's
subject and ``/verb`` terminals record a verb slot linked to that subject.
A preamble is a sentence truncated immediately before one of its eligible
verbs: present-tense role verbs whose number matches their subject's.  The
classification target (gold number) is the subject number of the chosen verb.

Preamble exchange files are TSV lines ``gold<TAB>subjectIndex<TAB>tokens``
with gold ``S`` or ``P``, a 0-based subject token index, and space-separated
surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grammar import GrammarSpec
from .lexicon import Number, Vocabulary


class CorpusError(ValueError):
    """Invalid sentence structure or preamble file."""


@dataclass(frozen=True)
class VerbSlot:
    """A role-marked verb token and the subject it agrees with."""

    position: int
    verb_number: Number
    subject_position: int
    subject_number: Number

    @property
    def agrees(self) -> bool:
        return self.verb_number is self.subject_number


@dataclass(frozen=True)
class AnnotatedSentence:
    token_ids: tuple[int, ...]
    verb_slots: tuple[VerbSlot, ...]
    rules: tuple[tuple[str, int], ...]  # (lhs, production index) in expansion order

    def __len__(self) -> int:
        return len(self.token_ids)


@dataclass(frozen=True)
class Preamble:
    tokens: tuple[int, ...]
    subject_index: int
    gold: Number

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def label(self) -> int:
        """1 for an upcoming plural verb, 0 for singular."""
        return 1 if self.gold is Number.PLURAL else 0


class _DepthExceeded(Exception):
    pass


class _Frame:
    __slots__ = ("subject_position", "subject_number")

    def __init__(self) -> None:
        self.subject_position: int | None = None
        self.subject_number: Number | None = None


class SentenceSampler:
    """Seeded sampler over a validated grammar.

    Derivations deeper than ``max_depth`` or longer than ``max_tokens`` are
    rejected and resampled, so the sampled distribution is the grammar's
    conditioned on those bounds.  Terminal fillers are drawn uniformly from a
    selector's candidates, or proportionally to 1/frequency_rank when
    ``terminal_weighting`` is "zipf" (skewed corpora leave rare words
    undertrained, as in natural text).
    """

    def __init__(
        self,
        spec: GrammarSpec,
        rng: np.random.Generator,
        max_depth: int = 20,
        max_tokens: int = 40,
        terminal_weighting: str = "uniform",
    ) -> None:
        if terminal_weighting not in ("uniform", "zipf"):
            raise ValueError(f"unknown terminal weighting {terminal_weighting!r}")
        self.spec = spec
        self.rng = rng
        self.max_depth = max_depth
        self.max_tokens = max_tokens
        self.terminal_weighting = terminal_weighting
        self._cum = {
            lhs: np.cumsum([p.weight for p in prods]) for lhs, prods in spec.productions.items()
        }
        self._term_cum: dict[tuple[str, Number | None], np.ndarray] = {}

    def _pick_production(self, lhs: str) -> int:
        cum = self._cum[lhs]
        return int(np.searchsorted(cum, self.rng.random() * cum[-1], side="right"))

    def _pick_entry(self, sym, cands):
        if self.terminal_weighting == "uniform":
            return cands[int(self.rng.integers(len(cands)))]
        key = (sym.name, sym.number)
        cum = self._term_cum.get(key)
        if cum is None:
            cum = np.cumsum([1.0 / e.frequency_rank for e in cands])
            self._term_cum[key] = cum
        return cands[int(np.searchsorted(cum, self.rng.random() * cum[-1], side="right"))]

    def sample(self, max_attempts: int = 1000) -> AnnotatedSentence:
        for _ in range(max_attempts):
            try:
                sentence = self._derive()
            except _DepthExceeded:
                continue
            if len(sentence) <= self.max_tokens:
                return sentence
        raise CorpusError(
            f"no derivation within depth {self.max_depth} and length "
            f"{self.max_tokens} after {max_attempts} attempts"
        )

    def _derive(self) -> AnnotatedSentence:
        spec = self.spec
        tokens: list[int] = []
        slots: list[VerbSlot] = []
        rules: list[tuple[str, int]] = []

        def expand(name: str, depth: int, frames: list[_Frame]) -> None:
            if depth > self.max_depth:
                raise _DepthExceeded
            if name in spec.clauses:
                frames = frames + [_Frame()]
            pi = self._pick_production(name)
            rules.append((name, pi))
            for sym in spec.productions[name][pi].rhs:
                if spec.is_nonterminal(sym.name):
                    expand(sym.name, depth + 1, frames)
                    continue
                cands = spec.candidates(sym)
                entry = self._pick_entry(sym, cands)
                position = len(tokens)
                tokens.append(spec.vocabulary.encode_token(entry.surface))
                if sym.role == "subj":
                    if not frames:
                        raise CorpusError(f"/subj selector {sym} outside any clause")
                    frame = frames[-1]
                    if frame.subject_position is not None:
                        raise CorpusError(f"clause has two /subj tokens (second at {position})")
                    frame.subject_position = position
                    frame.subject_number = entry.number
                elif sym.role == "verb":
                    if not frames or frames[-1].subject_position is None:
                        raise CorpusError(f"/verb selector {sym} before any subject")
                    frame = frames[-1]
                    if spec.number_agreement and entry.number is not frame.subject_number:
                        raise CorpusError(
                            f"verb at {position} disagrees with its subject under "
                            "an agreement-on grammar"
                        )
                    slots.append(
                        VerbSlot(position, entry.number, frame.subject_position, frame.subject_number)
                    )

        expand(spec.start, 0, [])
        return AnnotatedSentence(tuple(tokens), tuple(slots), tuple(rules))


def extract_preamble(sentence: AnnotatedSentence, rng: np.random.Generator) -> Preamble | None:
    """Truncate before one eligible verb, chosen uniformly; None if none exist."""
    eligible = [s for s in sentence.verb_slots if s.agrees]
    if not eligible:
        return None
    slot = eligible[int(rng.integers(len(eligible)))]
    if not 0 <= slot.subject_position < slot.position:
        raise CorpusError("verb slot does not follow its subject")
    return Preamble(sentence.token_ids[: slot.position], slot.subject_position, slot.subject_number)


def generate_corpus(
    spec: GrammarSpec,
    n: int,
    seed: int | np.random.SeedSequence | list[int],
    max_depth: int = 20,
    max_tokens: int = 40,
    terminal_weighting: str = "uniform",
) -> list[Preamble]:
    """Sample sentences and extract one preamble from each until n are collected.

    Sentences with no eligible verb are skipped.  The same generator drives
    derivation and verb choice, so output is a pure function of the seed.
    """
    rng = np.random.default_rng(seed)
    sampler = SentenceSampler(
        spec, rng, max_depth=max_depth, max_tokens=max_tokens, terminal_weighting=terminal_weighting
    )
    out: list[Preamble] = []
    while len(out) < n:
        preamble = extract_preamble(sampler.sample(), rng)
        if preamble is not None:
            out.append(preamble)
    return out


def attractor_count(preamble: Preamble, vocabulary: Vocabulary) -> int:
    """Nouns after the subject whose number is opposite the gold number."""
    wrong = preamble.gold.opposite()
    count = 0
    for tid in preamble.tokens[preamble.subject_index + 1 :]:
        entry = vocabulary.entry(tid)
        if entry.category == "noun" and entry.number is wrong:
            count += 1
    return count


# -- exchange format ---------------------------------------------------------


def format_preambles(preambles: list[Preamble], vocabulary: Vocabulary) -> str:
    lines = []
    for p in preambles:
        surfaces = " ".join(vocabulary.surface(t) for t in p.tokens)
        lines.append(f"{p.gold.value}\t{p.subject_index}\t{surfaces}")
    return "\n".join(lines) + ("\n" if lines else "")


def parse_preambles(text: str, vocabulary: Vocabulary) -> list[Preamble]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise CorpusError(f"line {lineno}: expected 3 tab-separated fields")
        gold_tag, index_text, token_text = fields
        if gold_tag not in ("S", "P"):
            raise CorpusError(f"line {lineno}: gold number must be S or P, got {gold_tag!r}")
        gold = Number.from_tag(gold_tag)
        try:
            subject_index = int(index_text)
        except ValueError:
            raise CorpusError(f"line {lineno}: bad subject index {index_text!r}") from None
        surfaces = token_text.split()
        if not 0 <= subject_index < len(surfaces):
            raise CorpusError(f"line {lineno}: subject index {subject_index} out of range")
        tokens = tuple(vocabulary.encode(surfaces))
        head = vocabulary.entry(tokens[subject_index])
        if head.number is not Number.NONE and head.number is not gold:
            raise CorpusError(
                f"line {lineno}: subject {head.surface!r} is {head.number.name.lower()} "
                f"but gold is {gold.name.lower()}"
            )
        out.append(Preamble(tokens, subject_index, gold))
    return out


def save_preambles(path: str | Path, preambles: list[Preamble], vocabulary: Vocabulary) -> None:
    Path(path).write_text(format_preambles(preambles, vocabulary), encoding="utf-8")


def load_preambles(path: str | Path, vocabulary: Vocabulary) -> list[Preamble]:
    return parse_preambles(Path(path).read_text(encoding="utf-8"), vocabulary)
