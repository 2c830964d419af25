import itertools
import math
from collections import deque

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capharm.errors import DomainError, IntegrityError, NotFoundError, ParseError
from capharm.wordnet import SynsetId, WordListPurpose, load_database, load_word_list

from conftest import FIXTURE_WN

POS_FILES = {"n": "noun", "v": "verb", "a": "adj", "r": "adv"}


# -- independent oracle over the fixture files --------------------------------------------

def _oracle_graph():
    """(nodes by pos, hypernym edges) read with a deliberately naive tokenizer."""
    nodes, hyper = {}, {}
    for pos, name in POS_FILES.items():
        nodes[pos] = []
        for line in (FIXTURE_WN / f"data.{name}").read_text().splitlines():
            if not line.strip() or line.startswith("  "):
                continue
            toks = line.split("|")[0].split()
            sid = (pos, int(toks[0]))
            nodes[pos].append(sid)
            hyper[sid] = []
            n_words = int(toks[3], 16)
            k = 4 + 2 * n_words
            for i in range(int(toks[k])):
                sym, off, p = toks[k + 1 + 4 * i: k + 4 + 4 * i]
                if sym in ("@", "@i"):
                    hyper[sid].append((p.replace("s", "a"), int(off)))
    return nodes, hyper


def _oracle_depth(hyper, pos, nodes):
    def depth(s):
        return 0 if not hyper[s] else 1 + max(depth(h) for h in hyper[s])
    return max(depth(s) for s in nodes[pos])


def _oracle_path_nodes(hyper, a, b):
    adj = {}
    for s, hs in hyper.items():
        for h in hs:
            adj.setdefault(s, set()).add(h)
            adj.setdefault(h, set()).add(s)
    dist = {a: 0}
    q = deque([a])
    while q:
        x = q.popleft()
        for y in adj.get(x, ()):
            if y not in dist:
                dist[y] = dist[x] + 1
                q.append(y)
    return dist[b] + 1 if b in dist else None


# -- loading ---------------------------------------------------------------------------------

def test_fixture_counts_match_line_count(fixture_wn):
    nodes, _ = _oracle_graph()
    assert fixture_wn.counts() == {p: len(v) for p, v in nodes.items()}
    assert len(fixture_wn) == 40
    assert fixture_wn.parts_of_speech == ("n", "v", "a", "r")


def test_empty_directory_is_an_error(tmp_path):
    with pytest.raises(ParseError, match="missing index.noun"):
        load_database(tmp_path)


def test_malformed_data_line_names_file_and_line(tmp_path):
    for f in FIXTURE_WN.iterdir():
        (tmp_path / f.name).write_text(f.read_text())
    text = (tmp_path / "data.noun").read_text().splitlines()
    text[3] = text[3][:40]
    (tmp_path / "data.noun").write_text("\n".join(text) + "\n")
    with pytest.raises(ParseError) as err:
        load_database(tmp_path)
    assert "data.noun" in str(err.value) and "4" in str(err.value)


def test_dangling_pointer_is_integrity_error(tmp_path):
    for f in FIXTURE_WN.iterdir():
        (tmp_path / f.name).write_text(f.read_text())
    data = (tmp_path / "data.noun").read_text().replace("@ 00000062 n 0000", "@ 09999999 n 0000", 1)
    (tmp_path / "data.noun").write_text(data)
    with pytest.raises(IntegrityError):
        load_database(tmp_path)


def test_fixture_hierarchy_is_mutually_consistent(fixture_wn):
    for sid in fixture_wn:
        for h in fixture_wn.hypernyms(sid):
            assert sid in fixture_wn.hyponyms(h)
        for h in fixture_wn.hyponyms(sid):
            assert sid in fixture_wn.hypernyms(h)


def test_every_lemma_maps_back(fixture_wn):
    for sid in fixture_wn:
        for lemma in fixture_wn.lemmas(sid):
            assert sid in fixture_wn.synsets(lemma, sid.pos)


def test_full_wordnet_round_trip_and_consistency(wn):
    assert wn.counts() == {"n": 82115, "v": 13767, "a": 18156, "r": 3621}
    bad = 0
    for sid in wn:
        for lemma in wn.lemmas(sid):
            if sid not in wn.synsets(lemma, sid.pos):
                bad += 1
        for h in wn.hypernyms(sid):
            assert sid in wn.hyponyms(h)
    assert bad == 0


# -- lookup ---------------------------------------------------------------------------------

def test_big_and_large_share_first_sense(wn):
    first = wn.synsets("big", "a")[0]
    assert "large" in wn.lemmas(first)
    assert wn.most_common_synset("big", "a") == first


def test_controller_is_accountant(wn):
    sid = wn.most_common_synset("controller", "n")
    assert "accountant" in wn.record(sid).gloss or "comptroller" in wn.lemmas(sid)


def test_absent_lemma(wn):
    with pytest.raises(NotFoundError):
        wn.most_common_synset("zzxq", "n")
    assert wn.synsets("zzxq") == ()


def test_pos_relaxation_is_deterministic(wn):
    # "greet" has no noun sense: falls through to the verb
    sid = wn.most_common_synset("greet", "n")
    assert sid.pos == "v"


def test_morphy_exception_list_first(wn):
    assert wn.morphy("men", "n")[0] == "man"
    assert wn.base_form("geese", "n") == "goose"
    assert wn.base_form("riding", "v") == "ride"
    assert wn.base_form("cabinets", "n") == "cabinet"


def test_lemma_normalization(wn):
    assert wn.synsets("Tennis Racket", "n") == wn.synsets("tennis_racket", "n") != ()


def test_synset_names(wn, fixture_wn):
    assert wn.name(wn.synset_by_name("man.n.01")) == "man.n.01"
    assert str(SynsetId.parse("n04516672")) == "n04516672"
    with pytest.raises(DomainError):
        wn.synset_by_name("not a name")
    with pytest.raises(NotFoundError):
        wn.synset_by_name("man.n.99")


# -- hierarchy -------------------------------------------------------------------------------

def test_hyponym_examples_fixture(fixture_wn):
    fork, utensil = fixture_wn.synset_by_name("fork.n.01"), fixture_wn.synset_by_name("utensil.n.01")
    couple, group = fixture_wn.synset_by_name("couple.n.01"), fixture_wn.synset_by_name("group.n.01")
    assert fixture_wn.is_hyponym_of(fork, utensil)
    assert not fixture_wn.is_hyponym_of(utensil, fork)
    assert fixture_wn.is_hyponym_of(couple, group)
    assert not fixture_wn.is_hyponym_of(fork, fork)


def test_couple_group_full(wn):
    assert wn.is_hyponym_of(wn.synset_by_name("couple.n.01"), wn.synset_by_name("group.n.01"))


def test_utensil_is_not_below_fork_full(wn):
    assert not wn.is_hyponym_of(wn.synset_by_name("utensil.n.01"), wn.synset_by_name("fork.n.01"))


_nouns = sorted(s for s in load_database(FIXTURE_WN) if s.pos in ("n", "v"))


@settings(max_examples=300, deadline=None)
@given(st.sampled_from(_nouns), st.sampled_from(_nouns), st.sampled_from(_nouns))
def test_hyponymy_transitive_irreflexive(fixture_wn, a, b, c):
    assert not fixture_wn.is_hyponym_of(a, a)
    if fixture_wn.is_hyponym_of(a, b):
        assert not fixture_wn.is_hyponym_of(b, a)
        if fixture_wn.is_hyponym_of(b, c):
            assert fixture_wn.is_hyponym_of(a, c)


def test_lch_matches_bfs_oracle_on_all_pairs(fixture_wn):
    nodes, hyper = _oracle_graph()
    checked = 0
    for pos in ("n", "v", "a", "r"):
        D = _oracle_depth(hyper, pos, nodes)
        assert fixture_wn.max_depth[pos] == D
        for a, b in itertools.product(nodes[pos], repeat=2):
            sa, sb = SynsetId(*a), SynsetId(*b)
            n = _oracle_path_nodes(hyper, a, b) if D else None
            if n is None:
                with pytest.raises(DomainError):
                    fixture_wn.lch_similarity(sa, sb)
                continue
            assert abs(fixture_wn.lch_similarity(sa, sb) - (-math.log(n / (2 * D)))) <= 1e-9
            checked += 1
    assert checked > 100


def test_lch_examples(fixture_wn):
    woman, man = fixture_wn.synset_by_name("woman.n.01"), fixture_wn.synset_by_name("man.n.01")
    assert fixture_wn.max_depth["n"] == 3
    assert fixture_wn.lch_similarity(woman, woman) == pytest.approx(-math.log(1 / 6), abs=1e-12)
    assert fixture_wn.lch_similarity(woman, man) == pytest.approx(-math.log(3 / 6), abs=1e-12)
    with pytest.raises(DomainError):
        fixture_wn.lch_similarity(woman, fixture_wn.synsets("walk", "v")[0])


def test_lch_symmetric_and_maximal_at_identity(fixture_wn):
    for a, b in itertools.product(_nouns, repeat=2):
        if a.pos != b.pos:
            continue
        try:
            v = fixture_wn.lch_similarity(a, b)
        except DomainError:
            continue
        assert v == fixture_wn.lch_similarity(b, a)
        if a != b:
            assert v < fixture_wn.lch_similarity(a, a)


def test_subtree_is_fixed_point_of_hyponym_expansion(fixture_wn):
    for root in _nouns:
        closure = {root}
        while True:
            grown = closure | {h for s in closure for h in fixture_wn.hyponyms(s)}
            if grown == closure:
                break
            closure = grown
        assert fixture_wn.subtree(root) == closure
    entity = fixture_wn.synset_by_name("entity.n.01")
    assert fixture_wn.subtree(entity) == {s for s in fixture_wn if s.pos == "n"}
    assert len(fixture_wn.subtree(entity)) == 12
    apple = fixture_wn.synset_by_name("apple.n.01")
    assert fixture_wn.subtree(apple) == {apple}


def test_person_subtree_contains_offensive_list(wn):
    from conftest import CORPUS
    wl = load_word_list(CORPUS / "offensive.txt", WordListPurpose.OFFENSIVE_PEOPLE, wn)
    assert wl.entries <= wn.subtree(wn.synset_by_name("person.n.01"))


# -- word lists ------------------------------------------------------------------------------

def test_single_entry_word_list(tmp_path, wn):
    p = tmp_path / "u.txt"
    p.write_text("utensil.n 04516672\n")
    wl = load_word_list(p, "weapons", wn)
    assert wl.entries == {SynsetId("n", 4516672)} and not wl.warnings
    assert len(wl.source_hash) == 64


def test_dangling_offset_warns_with_line(tmp_path, wn):
    p = tmp_path / "u.txt"
    p.write_text("# header\nutensil.n 04516672\nghost.n 00000001\n")
    wl = load_word_list(p, "weapons", wn)
    assert len(wl) == 1
    assert len(wl.warnings) == 1 and ":3:" in wl.warnings[0]


def test_category_file(wn):
    from conftest import CORPUS
    wl = load_word_list(CORPUS / "adjectives.txt", WordListPurpose.ADJECTIVE_CATEGORY, wn)
    assert {"attractiveness", "ethnicity", "judgment", "mood"} <= set(wl.categories)
    sub = wl.restrict(["attractiveness", "ethnicity", "judgment", "mood"])
    assert wn.synsets("red", "a")[0] not in sub.entries
    assert wn.synsets("red", "a")[0] in wl.entries
    assert sub.entries == frozenset().union(*(wl.categories[c] for c in
                                              ("attractiveness", "ethnicity", "judgment", "mood")))
