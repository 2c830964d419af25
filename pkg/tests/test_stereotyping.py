import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capharm.errors import ConfigError
from capharm.stats import SplitProtocol
from capharm.stereotyping import (FPWordLists, cross_stage_divergence, find_false_positives,
                                  salience_difference, tuple_distributions)

import synth


def two_image_corpus(wn, truth_lemmas, measured_lemmas, attributes=()):
    """Image 1 carries the scenario under test; image 2 (other group) is an exact match."""
    truth = [synth.box(synth.word(wn, w)) for w in truth_lemmas]
    measured = [synth.word(wn, w) for w in measured_lemmas]
    attrs = [(synth.word(wn, h), synth.word(wn, a, "a")) for h, a in attributes]
    b1 = synth.bundle(1, s1=truth, s4=[synth.caption("1#s4.0", objects=measured, attributes=attrs)],
                      gender="female")
    dog = synth.word(wn, "dog")
    b2 = synth.bundle(2, s1=[synth.box(dog)], s4=[synth.caption("2#s4.0", objects=[dog])], gender="male")
    return synth.corpus([b1, b2])


def test_fixture_bikini_hallucination(coco_corpus, lists, wn):
    res = find_false_positives(coco_corpus, "s1:s4", lists, taxonomy=wn)
    bikini = [c for c in res.cases if c.word.lemma == "bikini"]
    assert len(bikini) == 1 and bikini[0].scenario == "hallucination" and bikini[0].image_id == "1"
    assert res.summary["threshold"] == 0.005
    for c in res.cases:
        assert c.correlation > 0.005


def test_apple_too_specific(wn, lists):
    c = two_image_corpus(wn, ["fruit"], ["apple"])
    res = find_false_positives(c, "s1:s4", lists, threshold=0.0, taxonomy=wn)
    assert [(x.word.lemma, x.scenario) for x in res.cases] == [("apple", "too_specific")]


def test_general_word_is_not_flagged(wn, lists):
    c = two_image_corpus(wn, ["apple"], ["fruit"])
    assert find_false_positives(c, "s1:s4", lists, threshold=-1.0, taxonomy=wn).cases == []


def test_exact_match_zero_cases(wn, lists):
    c = two_image_corpus(wn, ["man", "horse"], ["man", "horse"])
    res = find_false_positives(c, "s1:s4", lists, threshold=-1.0, taxonomy=wn)
    assert res.cases == [] and res.summary["flagged_words"] == 0


def test_non_imageable_wins_over_too_specific(wn, lists):
    # a lawyer is a person (too specific) and on the non-imageable list
    c = two_image_corpus(wn, ["person"], ["lawyer"])
    res = find_false_positives(c, "s1:s4", lists, threshold=-1.0, taxonomy=wn)
    assert [(x.word.lemma, x.scenario) for x in res.cases] == [("lawyer", "non_imageable")]


def test_judgment_adjective_non_imageable_color_hallucinated(wn, lists):
    c = two_image_corpus(wn, ["person"], ["person"], attributes=[("person", "lazy"), ("person", "red")])
    res = find_false_positives(c, "s1:s4", lists, threshold=-1.0, taxonomy=wn)
    assert {(x.word.lemma, x.scenario) for x in res.cases} == {("lazy", "non_imageable"),
                                                               ("red", "hallucination")}


def test_non_visual_verb(wn, lists, parser):
    from capharm.corpus import Caption
    g = parser.parse("a man thinking about a horse")
    cap = Caption("1#s4.0", "a man thinking about a horse", g)
    truth = [synth.box(synth.word(wn, "man")), synth.box(synth.word(wn, "horse"))]
    dog = synth.word(wn, "dog")
    c = synth.corpus([synth.bundle(1, s1=truth, s4=[cap], gender="male"),
                      synth.bundle(2, s1=[synth.box(dog)], s4=[synth.caption("2", objects=[dog])],
                                   gender="female")])
    res = find_false_positives(c, "s1:s4", lists, threshold=-1.0, taxonomy=wn)
    assert [(x.word.lemma, x.scenario) for x in res.cases] == [("think_about", "non_imageable")]


def test_fp_rate_and_ranking(wn, lists):
    corpus, rates, _ = synth.planted_fp_corpus(wn)
    res = find_false_positives(corpus, "s1:s4", lists, taxonomy=wn)
    for case in res.cases:
        assert case.fp_rate == pytest.approx(rates[case.word.lemma])
    assert [c.rank for c in res.cases] == list(range(1, len(res.cases) + 1))
    assert [c.fp_rate for c in res.cases] == sorted((c.fp_rate for c in res.cases), reverse=True)


def test_fp_needs_lists_and_groups(wn, lists, cc_corpus):
    with pytest.raises(ConfigError):
        FPWordLists(None, lists.adjectives, lists.visual_verbs)
    res = find_false_positives(cc_corpus, "s1:s4", lists, taxonomy=wn)
    assert res.status == "empty" and res.cases == []
    c = two_image_corpus(wn, ["fruit"], ["apple"])
    with pytest.raises(ConfigError):
        find_false_positives(c, "s1:s4", lists, group_axis="skin_tone", taxonomy=wn)


_planted = {}


@settings(max_examples=50, deadline=None)
@given(st.floats(-0.01, 0.02), st.floats(-0.01, 0.02))
def test_threshold_monotonicity(wn, lists, t1, t2):
    if "c" not in _planted:
        _planted["c"] = synth.planted_fp_corpus(wn, seed=3)[0]
    lo, hi = sorted((t1, t2))
    key = lambda c: (c.image_id, c.caption_id, c.word.lemma)  # noqa: E731
    low = {key(c) for c in find_false_positives(_planted["c"], "s1:s4", lists, lo, taxonomy=wn).cases}
    high_cases = find_false_positives(_planted["c"], "s1:s4", lists, hi, taxonomy=wn).cases
    assert {key(c) for c in high_cases} <= low
    assert all(c.correlation > hi for c in high_cases)


# -- salience ---------------------------------------------------------------------------

def test_salience_planted_tie_and_dress(wn):
    corpus = synth.salience_corpus(wn, {"tie": (0.3245, 0.0750), "dress": (0.0, 0.0630)}, seed=1)
    report = salience_difference(corpus, "gender", SplitProtocol(seed=0))
    by = {r.lemma: r for r in report.results}
    assert by["tie"].significant and by["tie"].favored_group == "male"
    assert by["dress"].significant and by["dress"].favored_group == "female"
    assert report.skipped == []


def test_salience_permutation_null(wn):
    rates = {w: (0.1 + 0.04 * k, 0.3) for k, w in enumerate(("tie", "dress", "bench", "kite", "clock",
                                                             "lamp", "vase", "bottle", "chair", "cup"))}
    sig = total = 0
    for seed in range(6):
        corpus = synth.salience_corpus(wn, rates, n_per_group=200, seed=seed, permute=True)
        report = salience_difference(corpus, "gender", SplitProtocol(n_splits=300, min_valid_splits=250,
                                                                     seed=seed))
        sig += sum(r.significant for r in report.results)
        total += len(report.results)
    assert total == 60
    assert sig / total <= 0.10


def test_salience_needs_demographics(cc_corpus):
    with pytest.raises(ConfigError):
        salience_difference(cc_corpus)


# -- tuple distributions ------------------------------------------------------------------

def test_single_image_distribution(wn):
    words = [synth.word(wn, w) for w in ("man", "horse", "field")]
    c = synth.corpus([synth.bundle(1, s4=[synth.caption("c", objects=words)], gender="male")])
    (dist,) = [d for d in tuple_distributions(c, "s4") if d.kind == "object"]
    assert len(dist.freqs) == 3 and all(v == pytest.approx(1 / 3) for v in dist.freqs.values())
    assert sum(dist.freqs.values()) == pytest.approx(1.0, abs=1e-9)


def test_identical_groups_identical_distributions(wn):
    words = [synth.word(wn, w) for w in ("man", "horse")]
    bundles = [synth.bundle(i, s4=[synth.caption(str(i), objects=words[: 1 + i % 2])],
                            gender="male" if i < 4 else "female") for i in range(8)]
    dists = tuple_distributions(synth.corpus(bundles), "s4")
    by = {(d.group, d.kind): d for d in dists}
    assert by[("male", "object")].freqs == by[("female", "object")].freqs


def test_planted_wine_gap(wn):
    wine, man = synth.word(wn, "wine"), synth.word(wn, "man")
    bundles = []
    for i in range(400):
        g = "female" if i < 200 else "male"
        has = g == "female" or (i - 200) % 10 < 3
        objs = [man, wine] if has else [man]
        bundles.append(synth.bundle(i, s4=[synth.caption(str(i), objects=objs)], gender=g))
    by = {(d.group, d.kind): d for d in tuple_distributions(synth.corpus(bundles), "s4")}
    key = str(wine.synset)
    f, m = by[("female", "object")], by[("male", "object")]
    assert f.freqs[key] > m.freqs[key]
    assert f.rates[key] - m.rates[key] == pytest.approx(0.7, abs=0.02)
    for d in by.values():
        if d.freqs:
            assert sum(d.freqs.values()) == pytest.approx(1.0, abs=1e-9)


# -- divergence -------------------------------------------------------------------------------

def divergence_corpus(wn, amp=0.15, n=200):
    wine, man, hat, cup = (synth.word(wn, w) for w in ("wine", "man", "hat", "cup"))
    bundles = []
    for i in range(2 * n):
        g, j = ("female", i) if i < n else ("male", i - n)
        truth = [man] + ([wine] if j % 10 < 3 else []) + ([hat] if j % 2 else [])
        measured = [man] + ([wine] if j % 10 < 3 else []) + ([hat] if j % 2 else [])
        if g == "female" and (j % 20) >= 6 and (j % 20) < 6 + int(round(amp * 20)):
            measured.append(wine)
        if g == "female" and j % 50 == 0:
            measured.append(cup)
        bundles.append(synth.bundle(i, s1=[synth.box(w) for w in truth],
                                    s4=[synth.caption(str(i), objects=measured)], gender=g))
    return synth.corpus(bundles), str(wine.synset)


def test_divergence_identity_is_zero(wn):
    man = synth.word(wn, "man")
    bundles = [synth.bundle(i, s1=[synth.box(man)], s4=[synth.caption(str(i), objects=[man])],
                            gender="male" if i % 2 else "female") for i in range(6)]
    res = synth.corpus(bundles)
    out = cross_stage_divergence(res, "gender", "s1:s4", n_boot=50)
    assert out.rows and all(r.amplification == 0 for r in out.rows)


def test_divergence_planted_amplification(wn):
    corpus, wine = divergence_corpus(wn)
    res = cross_stage_divergence(corpus, "gender", "s1:s4", n_boot=200, seed=0)
    top = res.rows[0]
    assert top.key == wine and top.kind == "object"
    # groups[0] is male; the amplification was planted for the female group
    assert abs(top.amplification) == pytest.approx(0.15, abs=0.03)
    assert top.lower <= top.amplification <= top.upper
    assert res.method == "supplementary-reconstructed"


def test_divergence_empty_group(wn, cc_corpus):
    man = synth.word(wn, "man")
    only_male = synth.corpus([synth.bundle(1, s1=[synth.box(man)], s4=[synth.caption("1", objects=[man])],
                                           gender="male")])
    res = cross_stage_divergence(only_male, "gender", "s1:s4")
    assert res.status == "empty" and res.rows == []
    assert cross_stage_divergence(cc_corpus, "gender", "s1:s4").status == "empty"


def test_divergence_deterministic(wn):
    corpus, _ = divergence_corpus(wn)
    a = cross_stage_divergence(corpus, "gender", "s1:s4", n_boot=100, seed=4)
    b = cross_stage_divergence(corpus, "gender", "s1:s4", n_boot=100, seed=4)
    assert a.rows == b.rows
