"""Tokenizer, lemmatizer and part-of-speech tagger for caption text.

Tagging runs in three layers: a closed-class lexicon, a vote over the parts
of speech WordNet knows for the word, and positional rules for the short
noun-phrase chains typical of captions.
"""
from __future__ import annotations

import re
from dataclasses import dataclass

from .wordnet import Taxonomy

NOUN, VERB, ADJ, ADV = "NOUN", "VERB", "ADJ", "ADV"
DET, NUM, PRON, ADP, CONJ, AUX, PART, PUNCT = "DET", "NUM", "PRON", "ADP", "CONJ", "AUX", "PART", "PUNCT"

WN_TAG = {"n": NOUN, "v": VERB, "a": ADJ, "r": ADV}
TAG_WN = {v: k for k, v in WN_TAG.items()}

_WORDS = {
    DET: "a an the this that these those some any each every another his her their its my your our "
         "no several many few both all either neither much",
    NUM: "one two three four five six seven eight nine ten eleven twelve twenty dozen hundred "
         "thousand couple_of",
    PRON: "i you he she it we they me him us them someone something somebody anyone everyone "
          "who whom which what there himself herself itself themselves each_other one_another",
    ADP: "in on at with of by for from into onto over under near behind beside besides between "
         "through across along around above below inside outside toward towards against among "
         "amongst during up down off out about like past beneath underneath atop upon within "
         "without via beyond after before alongside throughout",
    CONJ: "and or but nor while as",
    AUX: "is are was were be being been am has have had does do did can could will would "
         "should may might must 're 've 'm",
    PART: "to not n't 's '",
}
CLOSED = {w: tag for tag, words in _WORDS.items() for w in words.split()}
# multiword prepositions are fused before tagging
MULTIWORD_ADP = {
    ("in", "front", "of"): "in_front_of",
    ("on", "top", "of"): "on_top_of",
    ("next", "to"): "next_to",
    ("close", "to"): "close_to",
    ("in", "the", "middle", "of"): "in_the_middle_of",
    ("on", "the", "side", "of"): "on_the_side_of",
    ("out", "of"): "out_of",
    ("as", "well", "as"): "as_well_as",
}
_MULTIWORD_CONJ = {"as_well_as"}
IRREGULAR_AUX_LEMMA = {"is": "be", "are": "be", "was": "be", "were": "be", "am": "be", "been": "be",
                       "being": "be", "be": "be", "'re": "be", "'m": "be",
                       "has": "have", "have": "have", "had": "have", "'ve": "have",
                       "does": "do", "do": "do", "did": "do"}
DIGITS = re.compile(r"^\d+(?:[.,]\d+)*$")
_TOKEN = re.compile(r"n't|'s|'re|'ve|'m|[A-Za-z]+(?:-[A-Za-z]+)*|\d+(?:[.,]\d+)*|[^\sA-Za-z\d]")


@dataclass(frozen=True)
class TaggedToken:
    surface: str
    lemma: str
    pos: str
    index: int


def split_words(caption: str) -> list:
    return _TOKEN.findall(caption)


class Tagger:
    """Caption tagger bound to a taxonomy (for lemmas and POS candidates)."""

    def __init__(self, taxonomy: Taxonomy, max_compound: int = 3):
        self.taxonomy = taxonomy
        self.max_compound = max_compound
        self._cand_cache: dict = {}

    # -- lexical layer ------------------------------------------------------------

    def candidates(self, word: str) -> dict:
        """WordNet readings of ``word``: {wn_pos: (lemma, score)}."""
        word = word.lower()
        hit = self._cand_cache.get(word)
        if hit is not None:
            return hit
        out = {}
        for pos in ("n", "v", "a", "r"):
            forms = self.taxonomy.morphy(word, pos)
            if forms:
                lemma = forms[0]
                score = self.taxonomy.tagged_count(lemma, pos) + 0.1 * len(self.taxonomy.synsets(lemma, pos))
                out[pos] = (lemma, score)
        self._cand_cache[word] = out
        return out

    def _merge(self, words: list) -> list:
        """Fuse multiword prepositions and WordNet noun compounds (longest match)."""
        out = []
        low = [w.lower() for w in words]
        i = 0
        while i < len(words):
            fused = None
            for phrase, lemma in MULTIWORD_ADP.items():
                n = len(phrase)
                if tuple(low[i:i + n]) == phrase:
                    fused = (" ".join(words[i:i + n]), lemma, n, "ADP")
                    break
            if fused is None:
                for n in range(min(self.max_compound, len(words) - i), 1, -1):
                    span = low[i:i + n]
                    if not all(w.isalpha() and w not in CLOSED for w in span):
                        continue
                    if self._adjectival(span[0]):
                        continue
                    forms = self.taxonomy.morphy("_".join(span), "n")
                    if forms:
                        fused = (" ".join(words[i:i + n]), forms[0], n, "COMPOUND")
                        break
            if fused is None:
                out.append((words[i], None, None))
                i += 1
            else:
                surface, lemma, n, kind = fused
                out.append((surface, lemma, kind))
                i += n
        return out

    def _adjectival(self, word: str) -> bool:
        cand = self.candidates(word)
        if "a" not in cand:
            return False
        noun = cand.get("n", (None, -1.0))[1]
        return cand["a"][1] >= noun

    # -- contextual layer ---------------------------------------------------------------

    def tag(self, caption: str) -> list:
        words = split_words(caption)
        if not words:
            return []
        return _Sentence(self, self._merge(words)).tag()

    __call__ = tag

    @staticmethod
    def _unknown(surface: str, prev) -> tuple:
        if surface.endswith("ly") and len(surface) > 4:
            return ADV, surface
        if surface.endswith("ing") and prev in (NOUN, PRON, AUX):
            return VERB, surface[:-3]
        if surface.endswith("s") and not surface.endswith("ss") and len(surface) > 3:
            return NOUN, surface[:-1]
        return NOUN, surface


class _Sentence:
    """Left-to-right tagging state for one caption."""

    def __init__(self, tagger: Tagger, merged: list):
        self.tagger = tagger
        self.surfaces = [m[0] for m in merged]
        n = self.n = len(merged)
        self.fixed: list = [None] * n
        self.cands: list = [None] * n
        self.lemmas: list = [None] * n
        self.tags: list = [None] * n
        for i, (surface, lemma, kind) in enumerate(merged):
            low = surface.lower()
            if kind == "ADP":
                self.fixed[i] = CONJ if lemma in _MULTIWORD_CONJ else ADP
                self.lemmas[i] = lemma
            elif kind == "COMPOUND":
                self.fixed[i], self.lemmas[i] = NOUN, lemma
            elif DIGITS.match(low):
                self.fixed[i], self.lemmas[i] = NUM, low
            elif low in CLOSED:
                self.fixed[i] = CLOSED[low]
                self.lemmas[i] = IRREGULAR_AUX_LEMMA.get(low, low)
            elif not any(ch.isalnum() for ch in low):
                self.fixed[i], self.lemmas[i] = PUNCT, low
            else:
                self.cands[i] = tagger.candidates(low)

    def noun_capable(self, j: int) -> bool:
        if j >= self.n:
            return False
        if self.fixed[j] is not None:
            return self.fixed[j] == NOUN
        c = self.cands[j]
        if not c:
            return self.surfaces[j].isalpha()
        # "-ing"/"-ed" forms whose verb reading dominates do not continue a noun phrase
        if "n" in c and "v" in c and self.surfaces[j].lower().endswith(("ing", "ed")):
            return c["n"][1] >= c["v"][1]
        return "n" in c

    def attributive(self, j: int) -> bool:
        """Token j modifies a following noun, directly or through a coordinated adjective."""
        if self.noun_capable(j + 1):
            return True
        if j + 2 < self.n and self.fixed[j + 1] == CONJ and self.lemmas[j + 1] in ("and", "or"):
            c = self.cands[j + 2]
            if c and "a" in c:
                return self.attributive(j + 2)
        return False

    def tag(self) -> list:
        for i in range(self.n):
            prev = self.tags[i - 1] if i else None
            if self.fixed[i] is not None:
                self.tags[i] = self._closed(i)
                continue
            c = self.cands[i]
            surface = self.surfaces[i].lower()
            if not c:
                self.tags[i], self.lemmas[i] = Tagger._unknown(surface, prev)
                continue
            tag = self._open(i, surface, c, prev)
            self.tags[i] = tag
            wn = TAG_WN[tag]
            self.lemmas[i] = c[wn][0] if wn in c else surface
        return [TaggedToken(self.surfaces[i], self.lemmas[i], self.tags[i], i) for i in range(self.n)]

    def _closed(self, i: int) -> str:
        tag, lemma = self.fixed[i], self.lemmas[i]
        nxt = i + 1
        if tag == AUX and lemma == "have" and nxt < self.n and (
                self.fixed[nxt] in (DET, NUM) or self.noun_capable(nxt)):
            return VERB
        if tag == DET and lemma == "her" and not (
                self.noun_capable(nxt) or (nxt < self.n and self.cands[nxt] and "a" in self.cands[nxt])):
            return PRON
        return tag

    def _open(self, i: int, surface: str, c: dict, prev) -> str:
        readings = set(c)
        nxt = self.fixed[i + 1] if i + 1 < self.n else PUNCT
        object_follows = nxt in (DET, NUM, PRON, ADP, ADV, PART)
        if len(readings) == 1:
            only = WN_TAG[next(iter(readings))]
            if only == VERB and prev in (DET, ADJ) and self.attributive(i):
                return ADJ
            return only
        if "v" in readings and surface.endswith(("ing", "ed")) and c["v"][0] != surface:
            if prev in (DET, ADJ, NUM) and self.attributive(i):
                return ADJ
            if prev == DET and "n" in readings:
                return NOUN
            return VERB
        if "a" in readings:
            if prev == AUX or self.attributive(i):
                return ADJ
            if "n" not in readings:
                return WN_TAG[max(readings, key=lambda p: c[p][1])]
            if prev == CONJ and i >= 2 and self.tags[i - 2] in (ADJ, NOUN):
                return self.tags[i - 2]
            return NOUN
        if readings >= {"n", "v"}:
            if prev in (DET, ADJ, NUM, ADP):
                return NOUN
            if prev == AUX or (prev == PART and self.lemmas[i - 1] == "to"):
                return VERB
            if prev in (NOUN, PRON):
                inflected = surface.endswith("s") and not surface.endswith("ss") and c["v"][0] != surface
                if inflected and object_follows:
                    return VERB
                if c["v"][0] == surface and self._plural_subject(i - 1) and (
                        object_follows or self.noun_capable(i + 1)):
                    return VERB
            return NOUN if c["n"][1] >= c["v"][1] or prev in (NOUN, None, PUNCT) else VERB
        if "n" in readings:
            return NOUN
        return WN_TAG[max(readings, key=lambda p: c[p][1])]

    def _plural_subject(self, j: int) -> bool:
        if self.tags[j] == PRON:
            return True
        return self.lemmas[j] is not None and self.surfaces[j].lower() != self.lemmas[j]


def _verbal_surface(surface: str) -> bool:
    return surface.endswith(("ing", "ed")) or (surface.endswith("s") and not surface.endswith("ss"))


def tokenize(caption: str, taxonomy: Taxonomy) -> list:
    """Tagged, lemmatized tokens for one caption (empty list for empty input)."""
    return Tagger(taxonomy).tag(caption)
