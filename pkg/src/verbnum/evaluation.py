"""Ensemble scoring and the statistics layer over raw prediction records.

Records are one row per (replica, stimulus): the plural probability, the
thresholded prediction, and whether it was an error.  Everything downstream
(condition error rates, confidence intervals, attractor curves, exclusion,
contrasts) recomputes from records, so any aggregate can be audited against
an independent recount.

Uncertainty conventions:

* Confidence intervals and contrast p-values resample items (not records)
  with replacement; conditions are paired within items.
* When the item count m is small enough that all m**m resamples fit under
  ``EXHAUSTIVE_LIMIT``, the bootstrap enumerates them exactly instead of
  sampling, making tiny fixtures reproducible without Monte Carlo error.
* Per-replica spread is reported as a standard error across replica means.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import product
from pathlib import Path

import numpy as np
from scipy.special import expit

from .corpus import Preamble, attractor_count
from .lexicon import Number, Vocabulary
from .network import ModelParams, _forward_batch, forward_probe
from .stimuli import ConditionLabel, StimulusSet

B_DEFAULT = 10_000
SEED_DEFAULT = 2026
EXHAUSTIVE_LIMIT = 4_000  # m**m at or under this enumerates instead of sampling

# human reference points used as fixed comparison lines in plots: error rates
# for preambles with two plural attractors and for the hardest single-attractor
# cell (relative clause, singular subject, plural local noun)
HUMAN_REFERENCE = {
    "two_plural_attractors": 0.127,
    "rc_singular_subject_mismatch": 0.226,
}


class EvalError(ValueError):
    """Invalid records, incompatible conditions, or vocabulary mismatch."""


@dataclass(frozen=True)
class EvalRecord:
    replica_seed: int
    design: str
    item_id: int
    condition: "ConditionLabel | CorpusCondition"
    probe_site: str | None
    p_plural: float
    predicted: Number
    is_error: bool


@dataclass(frozen=True)
class ConditionStats:
    design: str
    condition_key: str
    n: int
    error_rate: float
    ci_low: float
    ci_high: float
    replica_se: float


@dataclass(frozen=True)
class AttractorCurve:
    points: dict[int, tuple[float, int]]  # attractor count -> (error rate, preambles)
    baseline_error_rate: float  # always-singular on the same corpus


def _batch_probs(params: ModelParams, sequences: list[tuple[int, ...]]) -> np.ndarray:
    """Plural probability per sequence, vectorized by length groups."""
    by_length: dict[int, list[int]] = {}
    for idx, seq in enumerate(sequences):
        by_length.setdefault(len(seq), []).append(idx)
    out = np.empty(len(sequences))
    for length in sorted(by_length):
        idxs = by_length[length]
        toks = np.array([sequences[i] for i in idxs], dtype=np.intp)
        if toks.size and (toks.min() < 0 or toks.max() >= params.embeddings.shape[0]):
            raise EvalError("token id outside the model's vocabulary")
        out[idxs] = expit(_forward_batch(params, toks).scores)
    return out


def _check_stimulus_vocab(params: ModelParams, stimulus_set: StimulusSet,
                          vocabulary: Vocabulary | None) -> None:
    limit = params.embeddings.shape[0]
    for s in stimulus_set.stimuli:
        for tid in s.tokens:
            if not 0 <= tid < limit:
                name = vocabulary.surface(tid) if vocabulary is not None else f"id {tid}"
                raise EvalError(
                    f"item {s.item_id}: token {name!r} is outside the model's "
                    f"vocabulary of {limit} entries"
                )


def evaluate(
    ensemble: list[ModelParams],
    stimulus_set: StimulusSet,
    seeds: list[int] | None = None,
    vocabulary: Vocabulary | None = None,
) -> list[EvalRecord]:
    """One record per (replica, stimulus); ties at 0.5 predict singular."""
    if seeds is None:
        seeds = list(range(len(ensemble)))
    if len(seeds) != len(ensemble):
        raise EvalError(f"{len(ensemble)} replicas but {len(seeds)} seeds")
    records = []
    plain = [s for s in stimulus_set.stimuli if s.probe_position is None]
    probed = [s for s in stimulus_set.stimuli if s.probe_position is not None]
    for params, seed in zip(ensemble, seeds):
        _check_stimulus_vocab(params, stimulus_set, vocabulary)
        by_stim: dict[int, float] = {}
        probs = _batch_probs(params, [s.tokens for s in plain])
        for s, p in zip(plain, probs):
            by_stim[id(s)] = float(p)
        for s in probed:
            by_stim[id(s)] = forward_probe(params, s.tokens, [s.probe_position])[0]
        for s in stimulus_set.stimuli:
            p = by_stim[id(s)]
            predicted = Number.PLURAL if p > 0.5 else Number.SINGULAR
            site = None
            if any(name == "probeSite" for name, _ in s.condition.factors):
                site = s.condition.level("probeSite")
            records.append(
                EvalRecord(
                    replica_seed=seed,
                    design=stimulus_set.design,
                    item_id=s.item_id,
                    condition=s.condition,
                    probe_site=site,
                    p_plural=p,
                    predicted=predicted,
                    is_error=predicted is not s.gold,
                )
            )
    return records


def evaluate_corpus(
    ensemble: list[ModelParams],
    corpus: list[Preamble],
    vocabulary: Vocabulary,
    seeds: list[int] | None = None,
) -> list[EvalRecord]:
    """Corpus scoring with items labeled by attractor count.

    Preambles become pseudo-items (id = corpus position) under the single
    factor ``attractors``; the curve and its recount oracle both reduce to
    ordinary record grouping.
    """
    if seeds is None:
        seeds = list(range(len(ensemble)))
    if len(seeds) != len(ensemble):
        raise EvalError(f"{len(ensemble)} replicas but {len(seeds)} seeds")
    conditions = [CorpusCondition(attractor_count(p, vocabulary)) for p in corpus]
    sequences = [p.tokens for p in corpus]
    records = []
    for params, seed in zip(ensemble, seeds):
        probs = _batch_probs(params, sequences)
        for idx, (preamble, p) in enumerate(zip(corpus, probs)):
            predicted = Number.PLURAL if p > 0.5 else Number.SINGULAR
            records.append(
                EvalRecord(
                    replica_seed=seed,
                    design="Corpus",
                    item_id=idx,
                    condition=conditions[idx],
                    probe_site=None,
                    p_plural=float(p),
                    predicted=predicted,
                    is_error=predicted is not preamble.gold,
                )
            )
    return records


@dataclass(frozen=True)
class CorpusCondition:
    """Stands in for ConditionLabel on corpus records: a single count factor."""

    attractors: int

    @property
    def design(self) -> str:
        return "Corpus"

    @property
    def factors(self) -> tuple[tuple[str, str], ...]:
        return (("attractors", str(self.attractors)),)

    @property
    def key(self) -> str:
        return f"attractors={self.attractors}"

    def level(self, factor: str) -> str:
        if factor != "attractors":
            raise KeyError(factor)
        return str(self.attractors)


def _item_means(records: list[EvalRecord]) -> dict[int, float]:
    sums: dict[int, list[int]] = {}
    for r in records:
        agg = sums.setdefault(r.item_id, [0, 0])
        agg[0] += int(r.is_error)
        agg[1] += 1
    return {item: errs / n for item, (errs, n) in sums.items()}


def _bootstrap_means(values: np.ndarray, b_samples: int, seed) -> np.ndarray:
    """Resampled means of ``values``: exhaustive when m**m is small enough."""
    m = len(values)
    if m == 0:
        raise EvalError("cannot bootstrap an empty item set")
    if m**m <= EXHAUSTIVE_LIMIT:
        idx = np.array(list(product(range(m), repeat=m)), dtype=np.intp)
        return values[idx].mean(axis=1)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, m, size=(b_samples, m))
    return values[idx].mean(axis=1)


def condition_stats(
    records: list[EvalRecord],
    expected: list[ConditionLabel] | None = None,
    b_samples: int = B_DEFAULT,
    seed: int = SEED_DEFAULT,
) -> list[ConditionStats]:
    """Per-condition error rate, item-bootstrap 95% CI, and replica spread.

    With ``expected`` given, conditions appear in that order and empty ones
    are dropped with a warning; otherwise conditions appear in first-record
    order.
    """
    groups: dict[tuple[str, str], list[EvalRecord]] = {}
    order: list[tuple[str, str]] = []
    for r in records:
        ident = (r.design, r.condition.key)
        if ident not in groups:
            groups[ident] = []
            order.append(ident)
        groups[ident].append(r)
    if expected is not None:
        order = []
        for label in expected:
            if (label.design, label.key) not in groups:
                warnings.warn(f"condition {label.key!r} has no records; omitted", stacklevel=2)
                continue
            order.append((label.design, label.key))
    out = []
    for gi, (design, key) in enumerate(order):
        grp = groups[(design, key)]
        n = len(grp)
        rate = sum(r.is_error for r in grp) / n
        items = _item_means(grp)
        values = np.array([items[k] for k in sorted(items)])
        means = _bootstrap_means(values, b_samples, [seed, gi])
        ci_low, ci_high = np.quantile(means, [0.025, 0.975])
        by_replica: dict[int, list[bool]] = {}
        for r in grp:
            by_replica.setdefault(r.replica_seed, []).append(r.is_error)
        rep_means = np.array([np.mean(v) for _, v in sorted(by_replica.items())])
        se = float(rep_means.std(ddof=1) / np.sqrt(len(rep_means))) if len(rep_means) > 1 else 0.0
        out.append(ConditionStats(design, key, n, rate, float(ci_low), float(ci_high), se))
    return out


def attractor_curve(
    ensemble: list[ModelParams],
    corpus: list[Preamble],
    vocabulary: Vocabulary,
    min_n: int = 10,
    max_count: int = 4,
    seeds: list[int] | None = None,
) -> AttractorCurve:
    """Ensemble error as a function of attractor count, 0 through max_count.

    Bins with fewer than ``min_n`` preambles are omitted; the baseline is the
    error rate of always predicting singular.
    """
    records = evaluate_corpus(ensemble, corpus, vocabulary, seeds)
    by_count: dict[int, list[int]] = {}
    for r in records:
        by_count.setdefault(int(r.condition.level("attractors")), []).append(int(r.is_error))
    replicas = max(1, len(ensemble))
    points = {}
    for count in range(max_count + 1):
        cell = by_count.get(count, [])
        n = len(cell) // replicas
        if n >= min_n:
            points[count] = (float(np.mean(cell)), n)
    baseline = float(np.mean([p.gold is Number.PLURAL for p in corpus]))
    return AttractorCurve(points, baseline)


def exclude_outlier_items(
    records: list[EvalRecord], threshold: float = 0.20
) -> tuple[list[EvalRecord], list[int]]:
    """Drop items whose mean error across all their records exceeds threshold."""
    means = _item_means(records)
    excluded = sorted(item for item, rate in means.items() if rate > threshold)
    bad = set(excluded)
    return [r for r in records if r.item_id not in bad], excluded


def select_records(
    records: list[EvalRecord], design: str, keys: list[str] | str | None = None
) -> list[EvalRecord]:
    """Records of one design, optionally restricted to some condition keys."""
    if isinstance(keys, str):
        keys = [keys]
    return [
        r
        for r in records
        if r.design == design and (keys is None or r.condition.key in keys)
    ]


def paired_item_diffs(
    records_a: list[EvalRecord], records_b: list[EvalRecord]
) -> np.ndarray:
    """Per-item error difference between two pooled record groups.

    Items must appear on both sides; conditions are paired within items, so
    a disjoint item set is an input error.
    """
    means_a = _item_means(records_a)
    means_b = _item_means(records_b)
    if not set(means_a) & set(means_b):
        raise EvalError("conditions share no items; a paired contrast needs a common item set")
    if set(means_a) != set(means_b):
        raise EvalError("conditions cover different item sets; pairing is undefined")
    return np.array([means_a[k] - means_b[k] for k in sorted(means_a)])


def direction_p(
    diffs: np.ndarray, b_samples: int = B_DEFAULT, seed: int = SEED_DEFAULT
) -> float:
    """One-sided bootstrap probability that the mean paired difference is <= 0."""
    means = _bootstrap_means(np.asarray(diffs, dtype=float), b_samples, seed)
    return float(np.mean(means <= 0))


def contrast(
    stats_a: ConditionStats,
    stats_b: ConditionStats,
    records: list[EvalRecord],
    b_samples: int = B_DEFAULT,
    seed: int = SEED_DEFAULT,
) -> tuple[float, float]:
    """Error-rate difference A-B and a two-sided paired-bootstrap p-value.

    The p-value is the (doubled, capped) smaller tail of the resampled mean
    difference around zero: small when the sign of the difference is stable
    under item resampling.
    """
    diffs = paired_item_diffs(
        select_records(records, stats_a.design, stats_a.condition_key),
        select_records(records, stats_b.design, stats_b.condition_key),
    )
    means = _bootstrap_means(diffs, b_samples, seed)
    p_low = float(np.mean(means <= 0))
    p_high = float(np.mean(means >= 0))
    return stats_a.error_rate - stats_b.error_rate, min(1.0, 2 * min(p_low, p_high))


# -- records files -------------------------------------------------------------
#
# One record per line: design, replicaSeed, itemId, conditionLabel, probeSite
# (`-` when absent), pPlural, predicted, isError.

def format_records(records: list[EvalRecord]) -> str:
    lines = []
    for r in records:
        site = r.probe_site if r.probe_site is not None else "-"
        lines.append(
            f"{r.design}\t{r.replica_seed}\t{r.item_id}\t{r.condition.key}\t"
            f"{site}\t{r.p_plural!r}\t{r.predicted.value}\t{int(r.is_error)}"
        )
    return "\n".join(lines) + ("\n" if lines else "")


def parse_records(text: str) -> list[EvalRecord]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 8:
            raise EvalError(f"line {lineno}: expected 8 tab-separated fields")
        design, seed_text, item_text, key, site, p_text, pred_tag, err_text = fields
        if design == "Corpus":
            if not key.startswith("attractors="):
                raise EvalError(f"line {lineno}: bad corpus condition {key!r}")
            condition = CorpusCondition(int(key.split("=", 1)[1]))
        else:
            condition = ConditionLabel.parse(design, key)
        p = float(p_text)
        predicted = Number.from_tag(pred_tag)
        expected = Number.PLURAL if p > 0.5 else Number.SINGULAR
        if predicted is not expected:
            raise EvalError(
                f"line {lineno}: predicted {pred_tag} contradicts pPlural {p!r}"
            )
        if err_text not in ("0", "1"):
            raise EvalError(f"line {lineno}: isError must be 0 or 1")
        out.append(
            EvalRecord(
                replica_seed=int(seed_text),
                design=design,
                item_id=int(item_text),
                condition=condition,
                probe_site=None if site == "-" else site,
                p_plural=p,
                predicted=predicted,
                is_error=err_text == "1",
            )
        )
    return out


def save_records(path: str | Path, records: list[EvalRecord]) -> None:
    Path(path).write_text(format_records(records), encoding="utf-8")


def load_records(path: str | Path) -> list[EvalRecord]:
    return parse_records(Path(path).read_text(encoding="utf-8"))


# -- stats files ---------------------------------------------------------------

def format_stats(stats: list[ConditionStats]) -> str:
    lines = ["# design\tconditionKey\tn\terrorRate\tciLow\tciHigh\treplicaSE"]
    for s in stats:
        lines.append(
            f"{s.design}\t{s.condition_key}\t{s.n}\t{s.error_rate!r}\t"
            f"{s.ci_low!r}\t{s.ci_high!r}\t{s.replica_se!r}"
        )
    return "\n".join(lines) + "\n"


def parse_stats(text: str) -> list[ConditionStats]:
    out = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 7:
            raise EvalError(f"line {lineno}: expected 7 tab-separated fields")
        out.append(
            ConditionStats(
                design=fields[0],
                condition_key=fields[1],
                n=int(fields[2]),
                error_rate=float(fields[3]),
                ci_low=float(fields[4]),
                ci_high=float(fields[5]),
                replica_se=float(fields[6]),
            )
        )
    return out


def save_stats(path: str | Path, stats: list[ConditionStats]) -> None:
    Path(path).write_text(format_stats(stats), encoding="utf-8")


def load_stats(path: str | Path) -> list[ConditionStats]:
    return parse_stats(Path(path).read_text(encoding="utf-8"))


# -- curve files ---------------------------------------------------------------

def format_curve(curve: AttractorCurve) -> str:
    lines = ["# attractorCount\terrorRate\tn"]
    for count in sorted(curve.points):
        rate, n = curve.points[count]
        lines.append(f"{count}\t{rate!r}\t{n}")
    lines.append(f"baseline\t{curve.baseline_error_rate!r}\t-")
    return "\n".join(lines) + "\n"


def parse_curve(text: str) -> AttractorCurve:
    points = {}
    baseline = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip("\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise EvalError(f"line {lineno}: expected 3 tab-separated fields")
        if fields[0] == "baseline":
            baseline = float(fields[1])
        else:
            points[int(fields[0])] = (float(fields[1]), int(fields[2]))
    if baseline is None:
        raise EvalError("curve file has no baseline line")
    return AttractorCurve(points, baseline)


def save_curve(path: str | Path, curve: AttractorCurve) -> None:
    Path(path).write_text(format_curve(curve), encoding="utf-8")


def load_curve(path: str | Path) -> AttractorCurve:
    return parse_curve(Path(path).read_text(encoding="utf-8"))
