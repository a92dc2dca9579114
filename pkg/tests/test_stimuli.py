"""Factorial stimulus generation, condition labels, annotation, file formats."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as hst

from verbnum.corpus import Preamble, attractor_count
from verbnum.lexicon import Number
from verbnum.stimuli import (
    DESIGN_EXP1,
    DESIGN_EXP2,
    DESIGN_EXP2_REVERSED,
    DESIGN_RC_PROBE,
    ConditionLabel,
    Exp1Frame,
    Exp2Frame,
    RcProbeFrame,
    StimulusError,
    annotate_attractors,
    condition_labels,
    format_stimuli,
    gen_exp1,
    gen_exp2,
    gen_exp2_reversed,
    gen_rc_length_probe,
    parse_stimuli,
    validate_derivable,
)

ALL_DESIGNS = (DESIGN_EXP1, DESIGN_EXP2, DESIGN_EXP2_REVERSED, DESIGN_RC_PROBE)


# -- condition labels -------------------------------------------------------------

def test_condition_label_counts():
    assert len(condition_labels(DESIGN_EXP1)) == 8
    assert len(condition_labels(DESIGN_EXP2)) == 6
    assert len(condition_labels(DESIGN_EXP2_REVERSED)) == 6
    assert len(condition_labels(DESIGN_RC_PROBE)) == 6


def test_condition_label_key_format():
    first = condition_labels(DESIGN_EXP1)[0]
    assert first.key == "modifier=PP;subjectNumber=Sing;localMatch=Match"
    assert first.level("modifier") == "PP"


def test_condition_label_validation():
    with pytest.raises(StimulusError, match="unknown design"):
        ConditionLabel("Exp9", (("a", "b"),))
    with pytest.raises(StimulusError, match="factors must be exactly"):
        ConditionLabel(DESIGN_EXP2, (("n2", "Sing"), ("n1", "Sing")))
    with pytest.raises(StimulusError, match="not one of"):
        ConditionLabel(DESIGN_EXP2, (("n1", "Dual"), ("n2", "Sing")))


@settings(max_examples=60, deadline=None)
@given(hst.sampled_from(ALL_DESIGNS), hst.data())
def test_condition_label_parse_inverts_key(design, data):
    label = data.draw(hst.sampled_from(condition_labels(design)))
    assert ConditionLabel.parse(design, label.key) == label


# -- generation helpers -------------------------------------------------------------

def exp1_frame(i=0, **kw):
    base = dict(
        item_id=i, head=("tape", "tapes"), local=("singer", "singers"),
        preposition="from", rc_verb="promoted",
    )
    base.update(kw)
    return Exp1Frame(**base)


def exp2_frame(i=0, **kw):
    base = dict(
        item_id=i, subject="bird", n1=("worm", "worms"), n2=("tree", "trees"),
        preposition="near", verb_past="ate", verb_present="eats", adverb="quickly",
    )
    base.update(kw)
    return Exp2Frame(**base)


def probe_frame(i=0, **kw):
    base = dict(
        item_id=i, head="lion", embedded="tigers", verb_past="ate",
        adjective="hungry", degree="extremely",
    )
    base.update(kw)
    return RcProbeFrame(**base)


def surfaces(vocabulary, stimulus):
    return vocabulary.decode(list(stimulus.tokens))


def pick(sset, item_id, **levels):
    for s in sset.stimuli:
        if s.item_id == item_id and all(s.condition.level(k) == v for k, v in levels.items()):
            return s
    raise AssertionError(f"no stimulus with {levels}")


# -- exp1 -------------------------------------------------------------

def test_exp1_condition_strings(vocabulary):
    sset = gen_exp1([exp1_frame()], vocabulary)
    assert len(sset) == 8
    got = {
        (s.condition.level("modifier"), s.condition.level("subjectNumber"),
         s.condition.level("localMatch")): " ".join(surfaces(vocabulary, s))
        for s in sset.stimuli
    }
    assert got[("PP", "Sing", "Match")] == "the tape from the singer"
    assert got[("PP", "Sing", "Mismatch")] == "the tape from the singers"
    assert got[("PP", "Plur", "Mismatch")] == "the tapes from the singer"
    assert got[("RC", "Sing", "Mismatch")] == "the tape that promoted the singers"
    assert got[("RC", "Plur", "Match")] == "the tapes that promoted the singers"


def test_exp1_premodified_item(vocabulary):
    fr = exp1_frame(head_premods=("demo",), local_premods=("popular", "rock"))
    sset = gen_exp1([fr], vocabulary)
    s = pick(sset, 0, modifier="PP", subjectNumber="Sing", localMatch="Mismatch")
    assert " ".join(surfaces(vocabulary, s)) == "the demo tape from the popular rock singers"
    assert s.subject_index == 2
    assert vocabulary.surface(s.tokens[s.subject_index]) == "tape"


def test_exp1_gold_follows_subject_number(vocabulary):
    sset = gen_exp1([exp1_frame()], vocabulary)
    for s in sset.stimuli:
        want = Number.SINGULAR if s.condition.level("subjectNumber") == "Sing" else Number.PLURAL
        assert s.gold is want
        assert vocabulary.entry(s.tokens[s.subject_index]).number is want


def test_exp1_attractor_counts(vocabulary):
    sset = gen_exp1([exp1_frame()], vocabulary)
    for s in sset.stimuli:
        count = attractor_count(s.to_preamble(), vocabulary)
        assert count == (0 if s.condition.level("localMatch") == "Match" else 1)


def test_exp1_conditions_differ_only_at_noun_slots(vocabulary):
    fr = exp1_frame(head_premods=("old",))
    sset = gen_exp1([fr], vocabulary)
    for mod in ("PP", "RC"):
        group = [s for s in sset.stimuli if s.condition.level("modifier") == mod]
        lengths = {len(s.tokens) for s in group}
        assert len(lengths) == 1
        head_pos = group[0].subject_index
        local_pos = len(group[0].tokens) - 1
        for a in group:
            for b in group:
                diffs = [i for i, (x, y) in enumerate(zip(a.tokens, b.tokens)) if x != y]
                assert set(diffs) <= {head_pos, local_pos}


def test_exp1_factorial_completeness(stimulus_sets):
    sset = stimulus_sets["exp1"]
    assert len(sset) == 256
    by_cond = sset.by_condition()
    assert len(by_cond) == 8
    for key, stims in by_cond.items():
        assert len(stims) == 32, key
        assert sorted(s.item_id for s in stims) == list(range(32))


def test_exp1_frame_validation(vocabulary):
    with pytest.raises(StimulusError, match="frame 3.*not singular"):
        gen_exp1([exp1_frame(3, head=("tapes", "tapes"))], vocabulary)
    with pytest.raises(StimulusError, match="frame 0.*not in the lexicon"):
        gen_exp1([exp1_frame(local=("wug", "wugs"))], vocabulary)
    with pytest.raises(StimulusError, match="is a prep, expected verb_past"):
        gen_exp1([exp1_frame(rc_verb="from")], vocabulary)
    with pytest.raises(StimulusError, match="expected adj"):
        gen_exp1([exp1_frame(head_premods=("tape",))], vocabulary)


# -- exp2 and its reversal -------------------------------------------------------------

def test_exp2_condition_strings(vocabulary):
    sset = gen_exp2([exp2_frame()], vocabulary)
    assert len(sset) == 6
    got = {
        (s.condition.level("n1"), s.condition.level("n2")): " ".join(surfaces(vocabulary, s))
        for s in sset.stimuli
    }
    assert got[("Absent", "Sing")] == "the bird that ate quickly near the tree"
    assert got[("Absent", "Plur")] == "the bird that ate quickly near the trees"
    assert got[("Sing", "Sing")] == "the bird that ate the worm near the tree"
    assert got[("Plur", "Plur")] == "the bird that ate the worms near the trees"


def test_exp2_gold_always_singular(vocabulary):
    for s in gen_exp2([exp2_frame()], vocabulary).stimuli:
        assert s.gold is Number.SINGULAR
        assert s.subject_index == 1
        assert s.probe_position is None


def test_exp2_attractor_counts(vocabulary):
    sset = gen_exp2([exp2_frame()], vocabulary)
    for s in sset.stimuli:
        plurals = (s.condition.level("n1") == "Plur") + (s.condition.level("n2") == "Plur")
        assert attractor_count(s.to_preamble(), vocabulary) == plurals


def test_exp2_reversed_strings_and_pairing(vocabulary):
    rev = gen_exp2_reversed([exp2_frame()], vocabulary)
    got = {
        (s.condition.level("n1"), s.condition.level("n2")): " ".join(surfaces(vocabulary, s))
        for s in rev.stimuli
    }
    assert got[("Plur", "Plur")] == "the bird near the trees that eats the worms"
    assert got[("Absent", "Sing")] == "the bird near the tree that eats quickly"

    orig = gen_exp2([exp2_frame()], vocabulary)
    for label in condition_labels(DESIGN_EXP2):
        o = pick(orig, 0, **dict(label.factors))
        r = pick(rev, 0, **dict(label.factors))
        o_words = surfaces(vocabulary, o)
        r_words = surfaces(vocabulary, r)
        # same lexical material except the re-inflected clause verb
        assert sorted(w for w in o_words if w != "ate") == sorted(
            w for w in r_words if w != "eats"
        )


def test_exp2_reversed_verb_agrees_with_subject(vocabulary):
    for s in gen_exp2_reversed([exp2_frame()], vocabulary).stimuli:
        words = surfaces(vocabulary, s)
        verb = words[words.index("that") + 1]
        assert vocabulary.entry(vocabulary.encode_token(verb)).number is Number.SINGULAR


def test_exp2_sets_sizes(stimulus_sets):
    assert len(stimulus_sets["exp2"]) == 216
    assert len(stimulus_sets["exp2rev"]) == 216
    assert stimulus_sets["exp2"].item_ids() == stimulus_sets["exp2rev"].item_ids()


def test_exp2_frame_validation(vocabulary):
    with pytest.raises(StimulusError, match="is a verb_past, expected verb"):
        gen_exp2([exp2_frame(verb_present="ate")], vocabulary)
    with pytest.raises(StimulusError, match="expected adv"):
        gen_exp2([exp2_frame(adverb="hungry")], vocabulary)


# -- rc length probe -------------------------------------------------------------

def test_rc_probe_strings_and_probe_points(vocabulary):
    sset = gen_rc_length_probe([probe_frame()], vocabulary)
    assert len(sset) == 6
    s_short_in = pick(sset, 0, rcLength="Short", probeSite="InsideRC")
    assert " ".join(surfaces(vocabulary, s_short_in)) == "the lion that the tigers ate"
    assert s_short_in.probe_position == len(s_short_in.tokens) - 1
    assert s_short_in.gold is Number.PLURAL
    assert vocabulary.surface(s_short_in.tokens[s_short_in.subject_index]) == "tigers"
    # the probe prefix ends just after the embedded subject
    probe_words = surfaces(vocabulary, s_short_in)[: s_short_in.probe_position]
    assert probe_words == ["the", "lion", "that", "the", "tigers"]

    s_long_out = pick(sset, 0, rcLength="Long", probeSite="OutsideRC")
    assert " ".join(surfaces(vocabulary, s_long_out)) == "the lion that the extremely hungry tigers ate"
    assert s_long_out.probe_position is None
    assert s_long_out.gold is Number.SINGULAR
    assert s_long_out.subject_index == 1


def test_rc_probe_lengths_step_by_one(vocabulary):
    sset = gen_rc_length_probe([probe_frame()], vocabulary)
    for site in ("InsideRC", "OutsideRC"):
        short = pick(sset, 0, rcLength="Short", probeSite=site)
        medium = pick(sset, 0, rcLength="Medium", probeSite=site)
        long_ = pick(sset, 0, rcLength="Long", probeSite=site)
        assert len(medium.tokens) == len(short.tokens) + 1
        assert len(long_.tokens) == len(short.tokens) + 2


def test_rc_probe_inside_preamble_stops_before_embedded_verb(vocabulary):
    sset = gen_rc_length_probe([probe_frame()], vocabulary)
    for s in sset.stimuli:
        if s.condition.level("probeSite") == "InsideRC":
            p = s.to_preamble()
            assert len(p.tokens) == len(s.tokens) - 1
            assert vocabulary.entry(p.tokens[p.subject_index]).number is Number.PLURAL
        else:
            assert s.to_preamble().tokens == s.tokens
            # the plural embedded subject is the lone attractor
            assert attractor_count(s.to_preamble(), vocabulary) == 1


def test_rc_probe_set_size(stimulus_sets):
    assert len(stimulus_sets["rcprobe"]) == 144
    by_cond = stimulus_sets["rcprobe"].by_condition()
    assert all(len(v) == 24 for v in by_cond.values())


def test_rc_probe_frame_validation(vocabulary):
    with pytest.raises(StimulusError, match="not plural"):
        gen_rc_length_probe([probe_frame(embedded="tape")], vocabulary)
    with pytest.raises(StimulusError, match="expected deg"):
        gen_rc_length_probe([probe_frame(degree="hungry")], vocabulary)


# -- attractor annotation -------------------------------------------------------------

def test_annotate_attractors_positions(vocabulary):
    ids = vocabulary.encode(
        ["the", "tape", "near", "the", "singers", "and", "the", "worms"]
    )
    p = Preamble(tuple(ids), 1, Number.SINGULAR)
    ann = annotate_attractors(p, vocabulary)
    assert ann.positions == (4, 7)
    assert ann.count == 2


def test_annotate_three_attractors_with_conjunction(vocabulary):
    words = ["the", "tape", "near", "the", "singers", "and", "the", "worms",
             "near", "the", "trees"]
    p = Preamble(tuple(vocabulary.encode(words)), 1, Number.SINGULAR)
    assert annotate_attractors(p, vocabulary).count == 3


def test_annotate_matches_attractor_count_brute_force(vocabulary, desk_corpora):
    _, val = desk_corpora
    for p in val[:300]:
        assert annotate_attractors(p, vocabulary).count == attractor_count(p, vocabulary)


# -- derivability -------------------------------------------------------------

def test_all_packaged_designs_derive_under_the_grammar(stimulus_sets, grammar):
    for sset in stimulus_sets.values():
        validate_derivable(sset, grammar)


def test_underivable_stimulus_rejected(vocabulary, grammar):
    sset = gen_exp1([exp1_frame()], vocabulary)
    broken = sset.stimuli[0]
    bad = type(sset)(
        sset.design,
        [type(broken)(
            broken.item_id, broken.condition,
            tuple(vocabulary.encode(["the", "the", "tape"])),
            broken.gold, broken.subject_index,
        )],
    )
    with pytest.raises(StimulusError, match="does not\\s+re-derive"):
        validate_derivable(bad, grammar)


# -- stimulus files -------------------------------------------------------------

def test_stimulus_file_round_trip_all_designs(stimulus_sets, vocabulary):
    for sset in stimulus_sets.values():
        text = format_stimuli(sset, vocabulary)
        again = parse_stimuli(text, vocabulary)
        assert again.design == sset.design
        assert again.stimuli == sset.stimuli
        assert format_stimuli(again, vocabulary) == text


def test_stimulus_file_rejects_bad_input(vocabulary):
    with pytest.raises(StimulusError, match="empty stimulus file"):
        parse_stimuli("", vocabulary)
    line = "Exp1\t0\tmodifier=PP;subjectNumber=Sing;localMatch=Match\tS\t\tthe tape from the wug\n"
    with pytest.raises(StimulusError, match="wug"):
        parse_stimuli(line, vocabulary)
    mixed = (
        "Exp1\t0\tmodifier=PP;subjectNumber=Sing;localMatch=Match\tS\t\tthe tape from the singer\n"
        "Exp2\t0\tn1=Absent;n2=Sing\tS\t\tthe bird that ate quickly near the tree\n"
    )
    with pytest.raises(StimulusError, match="design"):
        parse_stimuli(mixed, vocabulary)
    bad_probe = "RcLengthProbe\t0\trcLength=Short;probeSite=InsideRC\tP\t99\tthe lion that the tigers ate\n"
    with pytest.raises(StimulusError, match="probe"):
        parse_stimuli(bad_probe, vocabulary)


def test_stimulus_file_reconstructs_subject_index(stimulus_sets, vocabulary):
    for sset in stimulus_sets.values():
        again = parse_stimuli(format_stimuli(sset, vocabulary), vocabulary)
        for a, b in zip(sset.stimuli, again.stimuli):
            assert a.subject_index == b.subject_index
