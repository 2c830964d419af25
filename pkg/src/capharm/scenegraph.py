"""Caption -> scene graph of (object), (object, attribute) and
(subject, relation, object) tuples, with every word resolved to a synset."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from sklearn.base import BaseEstimator, TransformerMixin

from .errors import NotFoundError, ParseError
from .tagger import ADJ, ADP, CONJ, DET, NOUN, NUM, PART, PUNCT, VERB, ADV, Tagger, TaggedToken
from .wordnet import SynsetId, Taxonomy

OBJECT, ATTRIBUTE, RELATION = "object", "attribute", "relation"
_KIND_CODE = {OBJECT: "O", ATTRIBUTE: "A", RELATION: "R"}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}
_KIND_ORDER = {OBJECT: 0, ATTRIBUTE: 1, RELATION: 2}

# role -> part of speech used for synset resolution
ROLE_POS = {OBJECT: "n", ATTRIBUTE: "a", RELATION: "v"}
PREPOSITION = "p"

DROPPED_FRAMES = frozenset({"picture", "image", "photo", "photograph", "closeup", "close-up", "view"})


@dataclass(frozen=True, order=True)
class ResolvedWord:
    lemma: str
    synset: Optional[SynsetId] = None
    source_pos: str = field(default="n", compare=False)

    def key(self) -> str:
        """Stable identifier: the synset token, or ``~lemma`` when unresolved."""
        return str(self.synset) if self.synset is not None else "~" + self.lemma

    def token(self) -> str:
        return str(self.synset) if self.synset is not None else "-"


@dataclass(frozen=True)
class SceneTuple:
    kind: str
    subject: ResolvedWord
    attribute: Optional[ResolvedWord] = None
    object: Optional[ResolvedWord] = None

    def __post_init__(self):
        if self.kind == OBJECT and (self.attribute is not None or self.object is not None):
            raise ValueError("object tuple carries no attribute or object")
        if self.kind == ATTRIBUTE and (self.attribute is None or self.object is not None):
            raise ValueError("attribute tuple needs an attribute and no object")
        if self.kind == RELATION and (self.attribute is None or self.object is None):
            raise ValueError("relation tuple needs a relation word and an object")

    @property
    def relation(self) -> Optional[ResolvedWord]:
        return self.attribute if self.kind == RELATION else None

    def words(self) -> tuple:
        return tuple(w for w in (self.subject, self.attribute, self.object) if w is not None)

    def lemmas(self) -> tuple:
        return tuple(w.lemma for w in self.words())

    def sort_key(self):
        return (_KIND_ORDER[self.kind], self.lemmas(), tuple(w.token() for w in self.words()))

    def to_line(self) -> str:
        words = self.words()
        return " ".join([_KIND_CODE[self.kind]] + [w.lemma for w in words] + [w.token() for w in words])


def obj(word: ResolvedWord) -> SceneTuple:
    return SceneTuple(OBJECT, word)


def attr(head: ResolvedWord, attribute: ResolvedWord) -> SceneTuple:
    return SceneTuple(ATTRIBUTE, head, attribute)


def rel(subject: ResolvedWord, relation: ResolvedWord, target: ResolvedWord) -> SceneTuple:
    return SceneTuple(RELATION, subject, relation, target)


@dataclass(frozen=True)
class SceneGraph:
    tuples: frozenset = frozenset()
    caption_ids: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "tuples", frozenset(self.tuples))
        object.__setattr__(self, "caption_ids", tuple(sorted(set(map(str, self.caption_ids)))))

    def __len__(self) -> int:
        return len(self.tuples)

    def __iter__(self):
        return iter(sorted(self.tuples, key=SceneTuple.sort_key))

    def of_kind(self, kind: str) -> list:
        return [t for t in self if t.kind == kind]

    @property
    def objects(self) -> list:
        return [t.subject for t in self.of_kind(OBJECT)]

    def object_synsets(self) -> set:
        return {w.synset for w in self.objects if w.synset is not None}

    def words(self) -> set:
        return {w for t in self.tuples for w in t.words()}

    def check(self) -> None:
        """Raise ``ValueError`` if a structural invariant is violated."""
        heads = {t.subject for t in self.tuples if t.kind == OBJECT}
        for t in self.tuples:
            if t.kind == ATTRIBUTE and t.subject not in heads:
                raise ValueError(f"attribute head {t.subject.lemma!r} has no object tuple")
            if t.kind == RELATION and (t.subject not in heads or t.object not in heads):
                raise ValueError(f"relation {t.lemmas()} endpoints lack object tuples")

    def serialize(self) -> str:
        lines = [f"C {cid}" for cid in self.caption_ids]
        lines += [t.to_line() for t in self]
        return "\n".join(lines) + ("\n" if lines else "")

    @classmethod
    def parse(cls, text: str, source=None) -> "SceneGraph":
        tuples, ids = [], []
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split(" ")
            code, rest = parts[0], parts[1:]
            if code == "C":
                ids.append(" ".join(rest))
                continue
            if code not in _CODE_KIND or len(rest) not in (2, 4, 6):
                raise ParseError(f"bad scene-graph line {line!r}", source, lineno)
            k = len(rest) // 2
            kind = _CODE_KIND[code]
            if {OBJECT: 1, ATTRIBUTE: 2, RELATION: 3}[kind] != k:
                raise ParseError(f"wrong arity for {code}: {line!r}", source, lineno)
            words = []
            for j, (lemma, tok) in enumerate(zip(rest[:k], rest[k:])):
                syn = None if tok == "-" else SynsetId.parse(tok)
                if j == 0 or kind == RELATION and j == 2:
                    role_pos = "n"
                elif kind == ATTRIBUTE:
                    role_pos = "a"
                else:
                    role_pos = "v" if syn is not None else PREPOSITION
                words.append(ResolvedWord(lemma, syn, role_pos))
            tuples.append(SceneTuple(kind, *words) if kind != RELATION else rel(*words))
        return cls(frozenset(tuples), tuple(ids))


EMPTY_GRAPH = SceneGraph()


def union_graphs(graphs: Iterable[SceneGraph]) -> SceneGraph:
    """Set union of tuples and caption ids."""
    tuples: set = set()
    ids: set = set()
    for g in graphs:
        tuples |= g.tuples
        ids.update(g.caption_ids)
    return SceneGraph(frozenset(tuples), tuple(ids))


# -- extraction --------------------------------------------------------------------------

@dataclass
class _NP:
    head: TaggedToken
    modifiers: list
    via: Optional[str] = None  # preposition that introduced this phrase


class Extractor:
    """Rule-based tuple extraction over tagged caption tokens."""

    def __init__(self, taxonomy: Taxonomy):
        self.taxonomy = taxonomy
        self._cache: dict = {}

    def resolve(self, lemma: str, role: str) -> ResolvedWord:
        key = (lemma, role)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._resolve(lemma, role)
            self._cache[key] = hit
        return hit

    def _resolve(self, lemma: str, role: str) -> ResolvedWord:
        if role == PREPOSITION:
            return ResolvedWord(lemma, None, PREPOSITION)
        pos = ROLE_POS[role] if role in ROLE_POS else role
        try:
            if role == RELATION and not self.taxonomy.has_lemma(lemma, "v") and "_" in lemma:
                # verb + particle compounds resolve through the verb when absent as a unit
                return ResolvedWord(lemma, self.taxonomy.most_common_synset(lemma.split("_")[0], "v"), "v")
            return ResolvedWord(lemma, self.taxonomy.most_common_synset(lemma, pos), pos)
        except NotFoundError:
            return ResolvedWord(lemma, None, pos)

    def extract(self, tokens: list, caption_id: str | None = None) -> SceneGraph:
        return self.extract_with_confidence(tokens, caption_id)[0]

    def extract_with_confidence(self, tokens: list, caption_id: str | None = None):
        tokens = _drop_frames(tokens)
        tuples: set = set()
        used: set = set()
        clause = _Clause()
        i, n = 0, len(tokens)

        def add_np(np: _NP) -> ResolvedWord:
            head = self.resolve(np.head.lemma, OBJECT)
            tuples.add(obj(head))
            used.add(np.head.index)
            for m in np.modifiers:
                tuples.add(attr(head, self.resolve(m.lemma, ATTRIBUTE)))
                used.add(m.index)
            return head

        def add_rel(subjects, relation: ResolvedWord, targets):
            for s in subjects:
                for t in targets:
                    tuples.add(rel(s, relation, t))

        while i < n:
            tok = tokens[i]
            if tok.pos in (NOUN, ADJ, DET, NUM) and _starts_np(tokens, i):
                np, i = _read_np(tokens, i)
                if np is None:
                    continue
                head = add_np(np)
                clause.take_np(head, add_rel)
                continue
            if tok.pos == ADJ:
                # predicate adjective ("the cat is black")
                if clause.last:
                    for h in clause.last:
                        tuples.add(attr(h, self.resolve(tok.lemma, ATTRIBUTE)))
                    used.add(tok.index)
                i += 1
                continue
            if tok.pos == VERB:
                lemma = tok.lemma
                j = i + 1
                while j < n and tokens[j].pos == ADV:
                    j += 1
                if j < n and tokens[j].pos in (ADP, PART) and tokens[j].lemma not in ("to", "'s") \
                        and _object_ahead(tokens, j + 1):
                    lemma = f"{lemma}_{tokens[j].lemma}"
                    j += 1
                relation = self.resolve(lemma, RELATION)
                used.add(tok.index)
                if _object_ahead(tokens, j):
                    clause.start_verb(relation)
                else:
                    # intransitive: attribute of the subject
                    for s in clause.subjects or clause.last:
                        tuples.add(attr(s, self.resolve(tok.lemma, ATTRIBUTE)))
                    clause.after_verb()
                i = j
                continue
            if tok.pos == ADP:
                if _object_ahead(tokens, i + 1):
                    clause.start_prep(self.resolve(tok.lemma, PREPOSITION))
                i += 1
                continue
            if tok.pos == PART and tok.lemma == "'s":
                clause.start_possessive(self.resolve("have", RELATION))
                i += 1
                continue
            if tok.pos == CONJ:
                clause.conj()
                i += 1
                continue
            if tok.pos == PUNCT and tok.lemma in (".", ";", "!", "?"):
                clause = _Clause()
            elif tok.pos == PUNCT:
                clause.comma()
            i += 1
        content = [t for t in tokens if t.pos in (NOUN, ADJ, VERB)]
        confidence = 1.0 if not content else sum(t.index in used for t in content) / len(content)
        graph = SceneGraph(frozenset(tuples), (caption_id,) if caption_id is not None else ())
        return graph, confidence


class _Clause:
    """Attachment state while walking a caption left to right."""

    def __init__(self):
        self.subjects: list = []       # subject group of the clause
        self.last: list = []           # most recent coordinated noun group
        self.prev_group: list = []     # group before the most recent "of" phrase
        self.pending = None            # (relation word, attach-to heads) awaiting an object
        self.active = None             # relation that coordinated objects share
        self.last_via = None           # how the last group was introduced: "verb", "of", "prep"
        self.verb_subjects: list = []
        self.in_conj = False

    def take_np(self, head, add_rel):
        if self.in_conj and self.active is not None:
            relation, src = self.active
            add_rel(src, relation, [head])
            self.last.append(head)
        elif self.in_conj:
            self.last.append(head)
            if self.last_via is None and self.subjects is not None and self.last is not self.subjects:
                self.subjects = list(self.last)
        elif self.pending is not None:
            relation, src, via = self.pending
            add_rel(src, relation, [head])
            self.active = (relation, src)
            if via == "of":
                self.prev_group = list(src)
            self.last = [head]
            self.last_via = via
            self.pending = None
        else:
            self.last = [head]
            self.active = None
            self.last_via = None
            if not self.subjects:
                self.subjects = self.last
        self.in_conj = False

    def start_verb(self, relation):
        src = self.subjects or self.last
        self.verb_subjects = list(src)
        self.pending = (relation, list(src), "verb")
        self.in_conj = False

    def after_verb(self):
        self.verb_subjects = list(self.subjects or self.last)
        self.last_via = "verb-intransitive"
        self.active = None

    def start_prep(self, relation):
        if relation.lemma == "of" and self.last:
            src = self.last[-1:]
        elif self.last_via == "verb" and self.verb_subjects:
            src = self.verb_subjects
        elif self.last_via == "verb-intransitive" and self.verb_subjects:
            src = self.verb_subjects
        elif self.last_via == "of" and self.prev_group:
            src = self.prev_group
        else:
            src = self.last or self.subjects
        if not src:
            return
        self.pending = (relation, list(src), "of" if relation.lemma == "of" else "prep")
        self.in_conj = False

    def start_possessive(self, relation):
        if self.last:
            self.pending = (relation, list(self.last), "prep")

    def conj(self):
        self.in_conj = True

    def comma(self):
        self.in_conj = False
        self.pending = None
        self.active = None


def _starts_np(tokens, i) -> bool:
    """A noun phrase (ending in a noun) begins at i."""
    j = i
    while j < len(tokens) and tokens[j].pos in (DET, NUM, ADJ, ADV, NOUN, CONJ):
        if tokens[j].pos == NOUN:
            return True
        if tokens[j].pos == CONJ and not (j + 1 < len(tokens) and tokens[j + 1].pos == ADJ):
            return False
        j += 1
    return False


def _read_np(tokens, i):
    """Consume DET/NUM/ADJ/NOUN (with 'and' between adjectives); head = last noun."""
    mods: list = []
    j = i
    n = len(tokens)
    last_noun = None
    while j < n:
        t = tokens[j]
        if t.pos in (DET, NUM):
            if last_noun is not None:
                break
            j += 1
            continue
        if t.pos == ADV and j + 1 < n and tokens[j + 1].pos == ADJ and last_noun is None:
            j += 1
            continue
        if t.pos == ADJ and last_noun is None:
            mods.append(t)
            j += 1
            continue
        if t.pos == CONJ and last_noun is None and mods and j + 1 < n and tokens[j + 1].pos == ADJ:
            j += 1
            continue
        if t.pos == NOUN:
            if last_noun is not None:
                mods.append(last_noun)
            last_noun = t
            j += 1
            continue
        break
    if last_noun is None:
        return None, max(j, i + 1)
    return _NP(last_noun, mods), j


def _object_ahead(tokens, j) -> bool:
    while j < len(tokens) and tokens[j].pos in (DET, NUM, ADV):
        j += 1
    return j < len(tokens) and tokens[j].pos in (NOUN, ADJ) and _starts_np(tokens, j)


def _drop_frames(tokens: list) -> list:
    """Remove framing phrases such as "a picture of" that carry no scene content."""
    out = list(tokens)
    for i, t in enumerate(tokens):
        if t.pos == NOUN and t.lemma in DROPPED_FRAMES and i + 1 < len(tokens) \
                and tokens[i + 1].lemma == "of" and all(p.pos in (DET, ADJ, NUM) for p in tokens[:i]):
            return [p for p in tokens[i + 2:]]
    return out


def extract_tuples(tokens: list, taxonomy: Taxonomy, caption_id: str | None = None) -> SceneGraph:
    return Extractor(taxonomy).extract(tokens, caption_id)


class SceneGraphParser(BaseEstimator, TransformerMixin):
    """Caption strings -> :class:`SceneGraph` objects.

    ``fit`` is a no-op; the parser is fully determined by the taxonomy.
    """

    def __init__(self, taxonomy: Taxonomy = None, max_compound: int = 3):
        self.taxonomy = taxonomy
        self.max_compound = max_compound

    def fit(self, X=None, y=None):
        if self.taxonomy is None:
            raise ValueError("SceneGraphParser needs a taxonomy")
        self.tagger_ = Tagger(self.taxonomy, self.max_compound)
        self.extractor_ = Extractor(self.taxonomy)
        return self

    def _ensure(self):
        if not hasattr(self, "tagger_"):
            self.fit()

    def tokenize(self, caption: str) -> list:
        self._ensure()
        return self.tagger_.tag(caption)

    def parse(self, caption: str, caption_id: str | None = None) -> SceneGraph:
        return self.parse_with_confidence(caption, caption_id)[0]

    def parse_with_confidence(self, caption: str, caption_id: str | None = None):
        self._ensure()
        return self.extractor_.extract_with_confidence(self.tagger_.tag(caption), caption_id)

    def transform(self, X):
        return [self.parse(c) for c in X]
