"""Static figures and the directional pass/fail summary.

The report layer works entirely from files the evaluate command wrote
(records, condition stats, attractor curve), so plots and the summary can be
regenerated without models.  Six directional contrasts are summarized:

1. attraction: mismatch error exceeds match error;
2. asymmetry: singular subjects with plural attractors err more than the
   reverse configuration;
3. clause boundary: relative-clause mismatch exceeds PP mismatch;
4. cumulativity: two plural attractors are at least as bad as one;
5. reversal: clause-after-PP materials err more than clause-before-PP;
6. length probe: outside-clause interference fades Short to Long while
   inside-clause errors grow.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evaluation import (
    B_DEFAULT,
    HUMAN_REFERENCE,
    SEED_DEFAULT,
    AttractorCurve,
    ConditionStats,
    EvalRecord,
    _bootstrap_means,
    load_curve,
    load_records,
    load_stats,
    paired_item_diffs,
    select_records,
)
from .stimuli import (
    DESIGN_EXP1,
    DESIGN_EXP2,
    DESIGN_EXP2_REVERSED,
    DESIGN_RC_PROBE,
    condition_labels,
)


class ReportError(ValueError):
    """Missing or inconsistent report inputs."""


@dataclass(frozen=True)
class Finding:
    name: str
    description: str
    delta: float
    ci_low: float
    ci_high: float
    p: float
    passed: bool


def _exp1_key(modifier: str, number: str, match: str) -> str:
    return f"modifier={modifier};subjectNumber={number};localMatch={match}"


def _exp2_key(n1: str, n2: str) -> str:
    return f"n1={n1};n2={n2}"


def _probe_key(length: str, site: str) -> str:
    return f"rcLength={length};probeSite={site}"


def _tested(records_a: list[EvalRecord], records_b: list[EvalRecord],
            b_samples: int, seed: int) -> tuple[float, float, float, float]:
    diffs = paired_item_diffs(records_a, records_b)
    means = _bootstrap_means(diffs, b_samples, seed)
    lo, hi = np.quantile(means, [0.025, 0.975])
    return float(diffs.mean()), float(lo), float(hi), float(np.mean(means <= 0))


def directional_findings(
    records: list[EvalRecord],
    b_samples: int = B_DEFAULT,
    seed: int = SEED_DEFAULT,
) -> list[Finding]:
    """The six directional contrasts over a combined record list.

    All four designs must be present; pass means the observed direction holds
    with one-sided bootstrap p < 0.05 (cumulativity requires only a
    non-negative difference).
    """
    for design in (DESIGN_EXP1, DESIGN_EXP2, DESIGN_EXP2_REVERSED, DESIGN_RC_PROBE):
        if not any(r.design == design for r in records):
            raise ReportError(f"no records for design {design}")

    mism = [_exp1_key(m, n, "Mismatch") for m in ("PP", "RC") for n in ("Sing", "Plur")]
    match = [_exp1_key(m, n, "Match") for m in ("PP", "RC") for n in ("Sing", "Plur")]
    sing_x = [_exp1_key(m, "Sing", "Mismatch") for m in ("PP", "RC")]
    plur_x = [_exp1_key(m, "Plur", "Mismatch") for m in ("PP", "RC")]
    rc_x = [_exp1_key("RC", n, "Mismatch") for n in ("Sing", "Plur")]
    pp_x = [_exp1_key("PP", n, "Mismatch") for n in ("Sing", "Plur")]

    out = []

    def exp1(keys_a, keys_b):
        return _tested(
            select_records(records, DESIGN_EXP1, keys_a),
            select_records(records, DESIGN_EXP1, keys_b),
            b_samples, seed,
        )

    d, lo, hi, p = exp1(mism, match)
    out.append(Finding(
        "attraction", "mismatch error > match error", d, lo, hi, p,
        d > 0 and p < 0.05,
    ))
    d, lo, hi, p = exp1(sing_x, plur_x)
    out.append(Finding(
        "asymmetry",
        "singular-subject mismatch error > plural-subject mismatch error",
        d, lo, hi, p, d > 0 and p < 0.05,
    ))
    d, lo, hi, p = exp1(rc_x, pp_x)
    out.append(Finding(
        "clause boundary", "relative-clause mismatch error > PP mismatch error",
        d, lo, hi, p, d > 0 and p < 0.05,
    ))

    d, lo, hi, p = _tested(
        select_records(records, DESIGN_EXP2, _exp2_key("Plur", "Plur")),
        select_records(records, DESIGN_EXP2, _exp2_key("Plur", "Sing")),
        b_samples, seed,
    )
    out.append(Finding(
        "cumulativity", "two plural attractors err at least as often as one",
        d, lo, hi, p, d >= 0,
    ))

    d, lo, hi, p = _tested(
        select_records(records, DESIGN_EXP2_REVERSED),
        select_records(records, DESIGN_EXP2),
        b_samples, seed,
    )
    out.append(Finding(
        "reversal", "clause-after-PP error > clause-before-PP error",
        d, lo, hi, p, d > 0 and p < 0.05,
    ))

    d, lo, hi, p = _tested(
        select_records(records, DESIGN_RC_PROBE, _probe_key("Short", "OutsideRC")),
        select_records(records, DESIGN_RC_PROBE, _probe_key("Long", "OutsideRC")),
        b_samples, seed,
    )
    d_in, _, _, p_in = _tested(
        select_records(records, DESIGN_RC_PROBE, _probe_key("Long", "InsideRC")),
        select_records(records, DESIGN_RC_PROBE, _probe_key("Short", "InsideRC")),
        b_samples, seed,
    )
    out.append(Finding(
        "length probe",
        "outside-clause error falls Short to Long "
        f"and inside-clause error rises (inside delta {d_in:+.3f}, p {p_in:.4f})",
        d, lo, hi, p,
        d > 0 and p < 0.05 and d_in > 0 and p_in < 0.05,
    ))
    return out


def format_summary(findings: list[Finding]) -> str:
    lines = [
        "directional contrasts (item-paired bootstrap, one-sided direction tests)",
        "name\tdelta\tci95\tp\tresult",
    ]
    for f in findings:
        lines.append(
            f"{f.name}\t{f.delta:+.4f}\t[{f.ci_low:+.4f}, {f.ci_high:+.4f}]\t"
            f"{f.p:.4f}\t{'PASS' if f.passed else 'FAIL'}\t{f.description}"
        )
    return "\n".join(lines) + "\n"


# -- figures -------------------------------------------------------------------

def _condition_ticks(stats: list[ConditionStats]) -> list[str]:
    return ["/".join(part.split("=", 1)[1] for part in s.condition_key.split(";")) for s in stats]


def _error_bars(stats: list[ConditionStats]) -> np.ndarray:
    rates = np.array([s.error_rate for s in stats])
    lo = rates - np.array([s.ci_low for s in stats])
    hi = np.array([s.ci_high for s in stats]) - rates
    return np.vstack([np.clip(lo, 0, None), np.clip(hi, 0, None)])


def plot_attractor_curve(curve: AttractorCurve, path: str | Path) -> None:
    counts = sorted(curve.points)
    rates = [curve.points[c][0] for c in counts]
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.plot(counts, rates, marker="o", color="tab:blue", label="ensemble")
    ax.axhline(curve.baseline_error_rate, linestyle="--", color="gray",
               label="always-singular baseline")
    ax.set_xlabel("attractors in preamble")
    ax.set_ylabel("error rate")
    ax.set_xticks(counts)
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_condition_bars(stats: list[ConditionStats], path: str | Path, title: str) -> None:
    fig, ax = plt.subplots(figsize=(7, 3.5))
    x = np.arange(len(stats))
    ax.bar(x, [s.error_rate for s in stats], yerr=_error_bars(stats),
           color="tab:blue", capsize=3)
    ax.set_xticks(x)
    ax.set_xticklabels(_condition_ticks(stats), rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("error rate")
    ax.set_title(title)
    ax.set_ylim(bottom=0)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_exp2_panels(
    original: list[ConditionStats], reversed_stats: list[ConditionStats], path: str | Path
) -> None:
    """Original and reversed materials side by side, with the human two-attractor
    reference drawn as a dashed line."""
    if len(original) != len(reversed_stats):
        raise ReportError("original and reversed stats must cover the same conditions")
    fig, ax = plt.subplots(figsize=(7.5, 3.5))
    x = np.arange(len(original))
    width = 0.38
    ax.bar(x - width / 2, [s.error_rate for s in original], width,
           yerr=_error_bars(original), color="tab:blue", capsize=3, label="clause first")
    ax.bar(x + width / 2, [s.error_rate for s in reversed_stats], width,
           yerr=_error_bars(reversed_stats), color="tab:orange", capsize=3, label="PP first")
    ax.axhline(HUMAN_REFERENCE["two_plural_attractors"], linestyle="--", color="gray",
               label="human two-attractor reference")
    ax.set_xticks(x)
    ax.set_xticklabels(_condition_ticks(original), rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("error rate")
    ax.set_title("embedded-object designs")
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False, fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_rc_length(stats: list[ConditionStats], path: str | Path) -> None:
    lengths = ("Short", "Medium", "Long")
    by_key = {s.condition_key: s for s in stats}
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for site, color in (("InsideRC", "tab:orange"), ("OutsideRC", "tab:blue")):
        picked = [by_key[_probe_key(length, site)] for length in lengths
                  if _probe_key(length, site) in by_key]
        if len(picked) != len(lengths):
            raise ReportError(f"missing rc-length stats for probe site {site}")
        ax.errorbar(
            range(len(lengths)), [s.error_rate for s in picked],
            yerr=_error_bars(picked), marker="o", capsize=3, color=color, label=site,
        )
    ax.set_xticks(range(len(lengths)))
    ax.set_xticklabels(lengths)
    ax.set_xlabel("relative clause length")
    ax.set_ylabel("error rate")
    ax.set_ylim(bottom=0)
    ax.legend(frameon=False)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


# -- directory-level rendering ---------------------------------------------------

REPORT_INPUTS = {
    "curve": "curve.tsv",
    "exp1_stats": "exp1_stats.tsv",
    "exp1_records": "exp1_records.tsv",
    "exp2_stats": "exp2_stats.tsv",
    "exp2_records": "exp2_records.tsv",
    "exp2rev_stats": "exp2rev_stats.tsv",
    "exp2rev_records": "exp2rev_records.tsv",
    "rcprobe_stats": "rcprobe_stats.tsv",
    "rcprobe_records": "rcprobe_records.tsv",
}


def render_report(
    stats_dir: str | Path,
    out_dir: str | Path,
    b_samples: int = B_DEFAULT,
    seed: int = SEED_DEFAULT,
) -> list[Path]:
    """Render all figure analogs and the summary from an evaluate output dir."""
    stats_dir = Path(stats_dir)
    out_dir = Path(out_dir)
    missing = [name for name in REPORT_INPUTS.values() if not (stats_dir / name).exists()]
    if missing:
        raise ReportError(f"missing report inputs in {stats_dir}: {', '.join(sorted(missing))}")
    out_dir.mkdir(parents=True, exist_ok=True)

    def ordered(slug: str, design: str) -> list[ConditionStats]:
        stats = load_stats(stats_dir / f"{slug}_stats.tsv")
        by_key = {s.condition_key: s for s in stats}
        want = [lbl.key for lbl in condition_labels(design)]
        absent = [k for k in want if k not in by_key]
        if absent:
            raise ReportError(f"{slug} stats missing conditions: {', '.join(absent)}")
        return [by_key[k] for k in want]

    paths = []
    curve = load_curve(stats_dir / "curve.tsv")
    paths.append(out_dir / "fig_attractor_curve.png")
    plot_attractor_curve(curve, paths[-1])

    paths.append(out_dir / "fig_exp1_conditions.png")
    plot_condition_bars(ordered("exp1", DESIGN_EXP1), paths[-1],
                        "modifier x subject number x local match")

    paths.append(out_dir / "fig_exp2_conditions.png")
    plot_exp2_panels(ordered("exp2", DESIGN_EXP2),
                     ordered("exp2rev", DESIGN_EXP2_REVERSED), paths[-1])

    paths.append(out_dir / "fig_rc_length_probe.png")
    plot_rc_length(ordered("rcprobe", DESIGN_RC_PROBE), paths[-1])

    records = []
    for slug in ("exp1", "exp2", "exp2rev", "rcprobe"):
        records.extend(load_records(stats_dir / f"{slug}_records.tsv"))
    findings = directional_findings(records, b_samples, seed)
    paths.append(out_dir / "summary.txt")
    paths[-1].write_text(format_summary(findings), encoding="utf-8")
    return paths
