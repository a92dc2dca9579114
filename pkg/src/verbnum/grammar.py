"""Weighted sentence grammar over lexicon categories.

Grammar files are key-value documents with production lines:

    start: S
    clauses: S EMB_S EMB_P
    agreement: on
    S -> NPSUBJ_S VP_S @ 0.68
    MOD_S -> @ 0.52

RHS symbols are either nonterminals (defined by some production) or terminal
selectors naming a lexicon category, optionally restricted to a number with
``:s`` / ``:p`` / ``:-``.  A selector may carry a role suffix: ``/subj`` marks
the token as the subject of the innermost enclosing clause (a nonterminal
listed under ``clauses:``), ``/verb`` marks a verb that agrees with that
subject.  An empty RHS denotes the empty string.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

from .lexicon import LexEntry, Number, Vocabulary


class GrammarError(ValueError):
    """Malformed or inconsistent grammar."""


@dataclass(frozen=True)
class Symbol:
    name: str
    number: Number | None = None
    role: str | None = None

    def __str__(self) -> str:
        text = self.name
        if self.number is not None:
            text += ":" + self.number.value.lower()
        if self.role is not None:
            text += "/" + self.role
        return text


@dataclass(frozen=True)
class Production:
    lhs: str
    rhs: tuple[Symbol, ...]
    weight: float

    def __str__(self) -> str:
        rhs = " ".join(str(s) for s in self.rhs)
        return f"{self.lhs} -> {rhs} @ {self.weight:g}".replace("->  @", "-> @")


_NUMBER_TAGS = {"s": Number.SINGULAR, "p": Number.PLURAL, "-": Number.NONE}
_HEADER_RE = re.compile(r"^(start|clauses|agreement)\s*:\s*(.*)$")
WEIGHT_TOLERANCE = 1e-9


def _parse_symbol(text: str, lineno: int) -> Symbol:
    name = text
    role = None
    number = None
    if "/" in name:
        name, role = name.split("/", 1)
        if role not in ("subj", "verb"):
            raise GrammarError(f"line {lineno}: unknown role {role!r} in {text!r}")
    if ":" in name:
        name, tag = name.split(":", 1)
        if tag not in _NUMBER_TAGS:
            raise GrammarError(f"line {lineno}: unknown number tag {tag!r} in {text!r}")
        number = _NUMBER_TAGS[tag]
    if not name:
        raise GrammarError(f"line {lineno}: empty symbol name in {text!r}")
    return Symbol(name, number, role)


@dataclass
class GrammarSpec:
    """Productions plus the vocabulary they draw terminals from."""

    productions: dict[str, list[Production]]
    start: str
    clauses: frozenset[str]
    vocabulary: Vocabulary
    number_agreement: bool = True
    _candidates: dict[tuple[str, Number | None], list[LexEntry]] = field(
        default_factory=dict, repr=False
    )

    @property
    def nonterminals(self) -> list[str]:
        return list(self.productions)

    def is_nonterminal(self, name: str) -> bool:
        return name in self.productions

    def candidates(self, symbol: Symbol) -> list[LexEntry]:
        """Lexicon entries a terminal selector can produce."""
        key = (symbol.name, symbol.number)
        if key not in self._candidates:
            self._candidates[key] = self.vocabulary.entries_for(symbol.name, symbol.number)
        return self._candidates[key]

    def validate(self) -> None:
        if self.start not in self.productions:
            raise GrammarError(f"start symbol {self.start!r} has no productions")
        for name in self.clauses:
            if name not in self.productions:
                raise GrammarError(f"clause symbol {name!r} has no productions")
        categories = {e.category for e in self.vocabulary.lexicon}
        for lhs, prods in self.productions.items():
            if lhs in categories:
                raise GrammarError(f"nonterminal {lhs!r} collides with a lexicon category")
            total = sum(p.weight for p in prods)
            if abs(total - 1.0) > WEIGHT_TOLERANCE:
                raise GrammarError(f"weights for {lhs!r} sum to {total!r}, expected 1")
            for p in prods:
                if p.weight < 0:
                    raise GrammarError(f"negative weight in production {p}")
                for sym in p.rhs:
                    if self.is_nonterminal(sym.name):
                        if sym.number is not None or sym.role is not None:
                            raise GrammarError(
                                f"nonterminal {sym.name!r} may not carry a number or role ({p})"
                            )
                    else:
                        if sym.name not in categories:
                            raise GrammarError(
                                f"symbol {sym.name!r} in production {p} is neither a "
                                "nonterminal nor a lexicon category"
                            )
                        if not self.candidates(sym):
                            raise GrammarError(f"no lexicon entry matches selector {sym} ({p})")
                        if sym.role is not None and sym.number not in (
                            Number.SINGULAR,
                            Number.PLURAL,
                        ):
                            raise GrammarError(
                                f"role-bearing selector {sym} must be number-marked s or p ({p})"
                            )
        self._check_productive()

    def _check_productive(self) -> None:
        """Every nonterminal must derive some terminal string."""
        productive: set[str] = set()
        changed = True
        while changed:
            changed = False
            for lhs, prods in self.productions.items():
                if lhs in productive:
                    continue
                for p in prods:
                    if all(
                        (not self.is_nonterminal(s.name)) or s.name in productive for s in p.rhs
                    ):
                        productive.add(lhs)
                        changed = True
                        break
        for lhs in self.productions:
            if lhs not in productive:
                raise GrammarError(
                    f"nonterminal {lhs!r} has no terminating derivation"
                )

    # -- prefix recognition -------------------------------------------------

    def accepts_prefix(self, tokens: list[tuple[str, Number]]) -> bool:
        """Earley recognition: is ``tokens`` a prefix of some derivable sentence?

        Tokens are (category, number) pairs.  Because validation guarantees
        every nonterminal is productive, any viable Earley state at the final
        column extends to a full sentence, so prefix acceptance reduces to the
        final column being non-empty.
        """
        n = len(tokens)
        columns: list[set[tuple[str, int, int, int]]] = [set() for _ in range(n + 1)]
        order: list[list[tuple[str, int, int, int]]] = [[] for _ in range(n + 1)]
        nullable_done: list[set[str]] = [set() for _ in range(n + 1)]

        def add(col: int, state: tuple[str, int, int, int]) -> None:
            if state not in columns[col]:
                columns[col].add(state)
                order[col].append(state)

        def matches(sym: Symbol, tok: tuple[str, Number]) -> bool:
            cat, num = tok
            return sym.name == cat and (sym.number is None or sym.number is num)

        for pi in range(len(self.productions[self.start])):
            add(0, (self.start, pi, 0, 0))

        for col in range(n + 1):
            i = 0
            while i < len(order[col]):
                lhs, pi, dot, origin = order[col][i]
                i += 1
                rhs = self.productions[lhs][pi].rhs
                if dot == len(rhs):
                    # completion: advance parents waiting on lhs at the origin column
                    if origin == col:
                        nullable_done[col].add(lhs)
                    for parent in list(order[origin]):
                        plhs, ppi, pdot, porigin = parent
                        prhs = self.productions[plhs][ppi].rhs
                        if pdot < len(prhs) and prhs[pdot].name == lhs:
                            add(col, (plhs, ppi, pdot + 1, porigin))
                    continue
                sym = rhs[dot]
                if self.is_nonterminal(sym.name):
                    for pj in range(len(self.productions[sym.name])):
                        add(col, (sym.name, pj, 0, col))
                    if sym.name in nullable_done[col]:
                        add(col, (lhs, pi, dot + 1, origin))
                elif col < n and matches(sym, tokens[col]):
                    add(col + 1, (lhs, pi, dot + 1, origin))
        return bool(columns[n])


def parse_grammar(text: str, vocabulary: Vocabulary) -> GrammarSpec:
    productions: dict[str, list[Production]] = {}
    start: str | None = None
    clauses: frozenset[str] = frozenset()
    agreement = True
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        header = _HEADER_RE.match(line)
        if header:
            key, value = header.group(1), header.group(2).strip()
            if key == "start":
                start = value
            elif key == "clauses":
                clauses = frozenset(value.split())
            else:
                if value not in ("on", "off"):
                    raise GrammarError(f"line {lineno}: agreement must be 'on' or 'off'")
                agreement = value == "on"
            continue
        if "->" not in line:
            raise GrammarError(f"line {lineno}: expected a production or header, got {line!r}")
        lhs_text, rhs_text = line.split("->", 1)
        lhs = lhs_text.strip()
        if not lhs or " " in lhs:
            raise GrammarError(f"line {lineno}: bad production LHS {lhs_text!r}")
        if "@" not in rhs_text:
            raise GrammarError(f"line {lineno}: production is missing '@ weight'")
        body, weight_text = rhs_text.rsplit("@", 1)
        try:
            weight = float(weight_text)
        except ValueError:
            raise GrammarError(f"line {lineno}: bad weight {weight_text.strip()!r}") from None
        rhs = tuple(_parse_symbol(tok, lineno) for tok in body.split())
        productions.setdefault(lhs, []).append(Production(lhs, rhs, weight))
    if start is None:
        raise GrammarError("grammar file does not declare a start symbol")
    spec = GrammarSpec(
        productions=productions,
        start=start,
        clauses=clauses,
        vocabulary=vocabulary,
        number_agreement=agreement,
    )
    spec.validate()
    return spec


def load_grammar(path: str | Path, vocabulary: Vocabulary) -> GrammarSpec:
    return parse_grammar(Path(path).read_text(encoding="utf-8"), vocabulary)


def format_grammar(spec: GrammarSpec) -> str:
    lines = [f"start: {spec.start}"]
    if spec.clauses:
        lines.append("clauses: " + " ".join(sorted(spec.clauses)))
    lines.append("agreement: " + ("on" if spec.number_agreement else "off"))
    for prods in spec.productions.values():
        for p in prods:
            lines.append(str(p))
    return "\n".join(lines) + "\n"
