import logging
import os
from pathlib import Path

import pytest

from capharm.scenegraph import SceneGraphParser
from capharm.wordnet import DEFAULT_WORDNET_ENV, load_database

TESTS = Path(__file__).resolve().parent
DATA = TESTS / "data"
CORPUS = DATA / "corpus"
FIXTURE_WN = TESTS.parent / "src" / "capharm" / "data" / "wordnet_fixture"


def full_wordnet_path():
    for cand in (os.environ.get(DEFAULT_WORDNET_ENV), "/root/wordnet/wordnet-3.0",
                 "/usr/share/wordnet"):
        if cand and (Path(cand) / "index.noun").is_file():
            return str(cand)
    return None


@pytest.fixture(scope="session")
def wn_path():
    path = full_wordnet_path()
    if path is None:
        pytest.skip(f"full WordNet 3.0 not found; set ${DEFAULT_WORDNET_ENV}")
    return path


@pytest.fixture(scope="session")
def wn(wn_path):
    logging.getLogger("capharm").setLevel(logging.ERROR)
    return load_database(wn_path)


@pytest.fixture(scope="session")
def parser(wn):
    return SceneGraphParser(wn).fit()


@pytest.fixture(scope="session")
def fixture_wn():
    return load_database(FIXTURE_WN)


@pytest.fixture(scope="session")
def lists(wn):
    """The three word lists the false-positive scan needs."""
    from capharm.stereotyping import FPWordLists
    from capharm.wordnet import WordListPurpose, load_word_list
    return FPWordLists(
        load_word_list(CORPUS / "non_imageable.txt", WordListPurpose.NON_IMAGEABLE_PEOPLE, wn),
        load_word_list(CORPUS / "adjectives.txt", WordListPurpose.ADJECTIVE_CATEGORY, wn),
        load_word_list(CORPUS / "visual_verbs.txt", WordListPurpose.VISUAL_VERBS, wn))


@pytest.fixture(scope="session")
def coco_corpus(parser):
    from capharm.corpus import attach_system_outputs, ingest_coco
    corpus = ingest_coco(CORPUS / "instances.json", CORPUS / "captions.json", parser,
                         CORPUS / "vg.json", CORPUS / "demographics.csv")
    attach_system_outputs(corpus, "s2", CORPUS / "s2.tsv")
    attach_system_outputs(corpus, "s4", CORPUS / "s4.tsv")
    return corpus.seal()


@pytest.fixture(scope="session")
def cc_corpus(parser):
    from capharm.corpus import attach_system_outputs, ingest_cc
    corpus = ingest_cc(CORPUS / "cc_pairs.tsv", parser)
    attach_system_outputs(corpus, "s4", CORPUS / "cc_s4.tsv")
    return corpus.seal()


MEASURES = (
    ("stereotyping-fp", ["--pair", "s1:s4", "--threshold", "0.005"]),
    ("stereotyping-tp", []),
    ("tuple-dist", ["--stage", "s4"]),
    ("divergence", ["--pair", "s1:s4"]),
    ("demeaning-words", ["--stage", "s4"]),
    ("person-mention", []),
    ("context-specific", []),
    ("identity-noun", ["--stage", "s3"]),
)
LIST_FLAGS = ["--non-imageable", str(CORPUS / "non_imageable.txt"), "--adjectives", str(CORPUS / "adjectives.txt"),
              "--visual-verbs", str(CORPUS / "visual_verbs.txt"), "--offensive", str(CORPUS / "offensive.txt")]


def run_cli(*argv):
    from capharm.cli import main
    return main([str(a) for a in argv])


def build_store(store, wordnet):
    assert run_cli("--wordnet", wordnet, "ingest", "--format", "coco", "--images", CORPUS / "instances.json",
                   "--captions", CORPUS / "captions.json", "--vg", CORPUS / "vg.json",
                   "--demographics", CORPUS / "demographics.csv", "--store", store) == 0
    for stage, f in (("s2", "s2.tsv"), ("s4", "s4.tsv")):
        assert run_cli("--wordnet", wordnet, "attach", "--store", store, "--stage", stage,
                       "--outputs", CORPUS / f) == 0


def run_pipeline(root, wordnet, seed=0):
    """Ingest the fixture, attach system outputs, run every measurement and combine the reports."""
    store, out = Path(root) / "store", Path(root) / "out"
    build_store(store, wordnet)
    for tech, extra in MEASURES:
        code = run_cli("--wordnet", wordnet, "measure", tech, "--store", store, "--out", out,
                       "--seed", seed, *LIST_FLAGS, *extra)
        assert code == 0, tech
    assert run_cli("report", "--out", out) == 0
    return out
