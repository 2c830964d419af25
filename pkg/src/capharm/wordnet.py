"""In-memory WordNet taxonomy parsed from the plain-text database files.

The loader reads ``index.<pos>``, ``data.<pos>`` and ``<pos>.exc`` in the
published WordNet 3.0 layout and answers the lookups the measurement suites
need: sense-ranked synsets for a lemma, hyponym tests, subtrees and
Leacock-Chodorow similarity.
"""
from __future__ import annotations

import enum
import logging
import math
import os
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, NamedTuple

from .errors import DomainError, IntegrityError, NotFoundError, ParseError

logger = logging.getLogger(__name__)

POS_ORDER = ("n", "v", "a", "r")
POS_FILE = {"n": "noun", "v": "verb", "a": "adj", "r": "adv"}
# satellites live in data.adj and are addressed as adjectives
POS_ALIASES = {"n": "n", "v": "v", "a": "a", "s": "a", "r": "r",
               "noun": "n", "verb": "v", "adj": "a", "adv": "r"}

HYPERNYM_SYMBOLS = ("@", "@i")
HYPONYM_SYMBOLS = ("~", "~i")

_MORPH_RULES = {
    "n": [("s", ""), ("ses", "s"), ("ves", "f"), ("xes", "x"), ("zes", "z"),
          ("ches", "ch"), ("shes", "sh"), ("men", "man"), ("ies", "y")],
    "v": [("s", ""), ("ies", "y"), ("es", "e"), ("es", ""), ("ed", "e"),
          ("ed", ""), ("ing", "e"), ("ing", "")],
    "a": [("er", ""), ("est", ""), ("er", "e"), ("est", "e")],
    "r": [],
}

_SYNTACTIC_MARKER = re.compile(r"\((?:a|p|ip)\)$")
_SYNSET_NAME = re.compile(r"^(.+)\.([nvasr])\.(\d+)$")
_SYNSET_TOKEN = re.compile(r"^([nvar])(\d{8})$")


def normalize_pos(pos: str) -> str:
    try:
        return POS_ALIASES[pos.lower()]
    except (KeyError, AttributeError):
        raise DomainError(f"unknown part of speech {pos!r}") from None


def normalize_lemma(lemma: str) -> str:
    """Lowercase and join internal whitespace with underscores."""
    return "_".join(lemma.strip().lower().split())


class SynsetId(NamedTuple):
    """(pos, offset) pair; a tuple so hashing stays cheap over ~118k synsets."""

    pos: str
    offset: int

    def __str__(self) -> str:
        return f"{self.pos}{self.offset:08d}"

    @classmethod
    def parse(cls, token: str) -> "SynsetId":
        """Inverse of ``str()``: ``"n04516672"`` -> ``SynsetId("n", 4516672)``."""
        m = _SYNSET_TOKEN.match(token)
        if not m:
            raise DomainError(f"not a synset token: {token!r}")
        return cls(m.group(1), int(m.group(2)))


@dataclass(frozen=True)
class SynsetRecord:
    id: SynsetId
    lemmas: tuple[str, ...]
    hypernyms: tuple[SynsetId, ...]
    hyponyms: tuple[SynsetId, ...]
    gloss: str
    lexname: int = 0


class WordListPurpose(str, enum.Enum):
    NON_IMAGEABLE_PEOPLE = "non_imageable_people"
    OFFENSIVE_PEOPLE = "offensive_people"
    ADJECTIVE_CATEGORY = "adjective_category"
    VISUAL_VERBS = "visual_verbs"
    WEAPONS = "weapons"
    ANIMALS = "animals"
    PERSON_WORDS = "person_words"


@dataclass(frozen=True)
class WordList:
    name: str
    entries: frozenset
    purpose: WordListPurpose
    categories: dict = field(default_factory=dict, compare=False)
    warnings: tuple = field(default=(), compare=False)
    source_hash: str = field(default="", compare=False)

    def __post_init__(self):
        if not self.name:
            raise DomainError("word list name must be non-empty")

    def __contains__(self, synset) -> bool:
        return synset in self.entries

    def __len__(self) -> int:
        return len(self.entries)

    def restrict(self, categories: Iterable[str]) -> "WordList":
        """Keep only entries filed under the given category headers."""
        wanted = [c.strip().lower() for c in categories]
        missing = [c for c in wanted if c not in self.categories]
        if missing:
            logger.warning("word list %s has no categories %s", self.name, missing)
        entries = frozenset().union(*(self.categories.get(c, ()) for c in wanted))
        return WordList(self.name + ":" + ",".join(wanted), entries, self.purpose,
                        {c: self.categories[c] for c in wanted if c in self.categories},
                        self.warnings, self.source_hash)


class Taxonomy:
    """Immutable handle over a loaded WordNet database.

    Build it with :func:`load_database`; the constructor is for tests that
    assemble small taxonomies directly from records.
    """

    def __init__(self, records: dict, index: dict, exceptions: dict | None = None,
                 tagged_counts: dict | None = None, source: str = ""):
        self._records = records
        self._index = index
        self._exceptions = exceptions or {p: {} for p in POS_ORDER}
        self._tagged_counts = tagged_counts or {}
        self.source = source
        self.repairs: tuple = ()
        self._ancestor_cache: dict = {}
        self._check_links()
        self.max_depth = {pos: self._compute_max_depth(pos) for pos in self.parts_of_speech}

    # -- construction checks -------------------------------------------------

    def _check_links(self):
        for sid, rec in self._records.items():
            for link in rec.hypernyms + rec.hyponyms:
                if link not in self._records:
                    raise IntegrityError(
                        f"synset {sid} points to missing offset {link.offset:08d} ({link.pos})")
            for h in rec.hypernyms:
                if sid not in self._records[h].hyponyms:
                    raise IntegrityError(f"{h} lists no hyponym link back to {sid}")
            for h in rec.hyponyms:
                if sid not in self._records[h].hypernyms:
                    raise IntegrityError(f"{h} lists no hypernym link back to {sid}")
        for (lemma, pos), senses in self._index.items():
            for sid in senses:
                if sid not in self._records:
                    raise IntegrityError(
                        f"index entry {lemma!r} ({pos}) points to missing offset {sid.offset:08d}")

    def _compute_max_depth(self, pos: str) -> int:
        depth: dict = {}
        on_stack: set = set()
        best = 0
        for start in self._records:
            if start.pos != pos or start in depth:
                continue
            stack = [(start, False)]
            while stack:
                node, done = stack.pop()
                if done:
                    on_stack.discard(node)
                    hyps = self._records[node].hypernyms
                    depth[node] = 1 + max(depth[h] for h in hyps) if hyps else 0
                    continue
                if node in depth:
                    continue
                if node in on_stack:
                    raise IntegrityError(f"hypernym cycle through {node}")
                on_stack.add(node)
                stack.append((node, True))
                for h in self._records[node].hypernyms:
                    if h in on_stack:
                        raise IntegrityError(f"hypernym cycle through {h}")
                    if h not in depth:
                        stack.append((h, False))
            best = max(best, depth[start])
        return best

    # -- basic access ----------------------------------------------------------

    @property
    def parts_of_speech(self) -> tuple:
        present = {sid.pos for sid in self._records}
        return tuple(p for p in POS_ORDER if p in present)

    def counts(self) -> dict:
        out = {p: 0 for p in self.parts_of_speech}
        for sid in self._records:
            out[sid.pos] += 1
        return out

    def __len__(self) -> int:
        return len(self._records)

    def __contains__(self, sid) -> bool:
        return sid in self._records

    def __iter__(self) -> Iterator[SynsetId]:
        return iter(sorted(self._records))

    def record(self, sid: SynsetId) -> SynsetRecord:
        try:
            return self._records[sid]
        except KeyError:
            raise IntegrityError(f"unknown synset {sid}") from None

    def lemmas(self, sid: SynsetId) -> tuple:
        return self.record(sid).lemmas

    def hypernyms(self, sid: SynsetId) -> tuple:
        return self.record(sid).hypernyms

    def hyponyms(self, sid: SynsetId) -> tuple:
        return self.record(sid).hyponyms

    def has_lemma(self, lemma: str, pos: str | None = None) -> bool:
        lemma = normalize_lemma(lemma)
        if pos is None:
            return any((lemma, p) in self._index for p in POS_ORDER)
        return (lemma, normalize_pos(pos)) in self._index

    def synsets(self, lemma: str, pos: str | None = None) -> tuple:
        """All senses of ``lemma`` in frequency order (POS order n, v, a, r)."""
        lemma = normalize_lemma(lemma)
        if pos is not None:
            return self._index.get((lemma, normalize_pos(pos)), ())
        return tuple(s for p in POS_ORDER for s in self._index.get((lemma, p), ()))

    lookup = synsets

    def tagged_count(self, lemma: str, pos: str) -> int:
        """Number of semantically tagged senses listed in the index (0 if absent)."""
        return self._tagged_counts.get((normalize_lemma(lemma), normalize_pos(pos)), 0)

    def most_common_synset(self, lemma: str, preferred_pos: str | None = "n") -> SynsetId:
        """First sense with ``preferred_pos``; otherwise the first sense in any POS."""
        lemma = normalize_lemma(lemma)
        if preferred_pos is not None:
            senses = self._index.get((lemma, normalize_pos(preferred_pos)))
            if senses:
                return senses[0]
        for p in POS_ORDER:
            senses = self._index.get((lemma, p))
            if senses:
                return senses[0]
        raise NotFoundError(f"lemma {lemma!r} not in database")

    def synset_by_name(self, name: str) -> SynsetId:
        """Resolve an NLTK-style name such as ``"man.n.01"``."""
        m = _SYNSET_NAME.match(name.strip().lower())
        if not m:
            raise DomainError(f"not a synset name: {name!r}")
        lemma, pos, num = m.group(1), normalize_pos(m.group(2)), int(m.group(3))
        senses = self._index.get((lemma, pos), ())
        if not 1 <= num <= len(senses):
            raise NotFoundError(f"no sense {num} for {lemma!r} ({pos})")
        return senses[num - 1]

    def name(self, sid: SynsetId) -> str:
        """NLTK-style name: first lemma, POS letter and that lemma's sense number."""
        lemma = self.record(sid).lemmas[0]
        senses = self._index.get((lemma, sid.pos), ())
        num = senses.index(sid) + 1 if sid in senses else 0
        return f"{lemma}.{sid.pos}.{num:02d}"

    # -- morphology --------------------------------------------------------------

    def morphy(self, form: str, pos: str) -> list:
        """Candidate base forms of ``form`` for ``pos`` that exist in the index."""
        pos = normalize_pos(pos)
        form = normalize_lemma(form)
        exc = self._exceptions.get(pos, {})
        if form in exc:
            # irregular bases win over a homograph of the inflected form ("men")
            candidates = list(exc[form]) + [form]
        else:
            candidates = [form] + [form[: len(form) - len(old)] + new
                                   for old, new in _MORPH_RULES[pos]
                                   if form.endswith(old) and len(form) > len(old)]
        seen: list = []
        for c in candidates:
            if c and (c, pos) in self._index and c not in seen:
                seen.append(c)
        return seen

    def base_form(self, form: str, pos: str) -> str | None:
        found = self.morphy(form, pos)
        return found[0] if found else None

    # -- hierarchy -----------------------------------------------------------------

    def _ancestor_distances(self, sid: SynsetId) -> dict:
        cached = self._ancestor_cache.get(sid)
        if cached is not None:
            return cached
        self.record(sid)
        dist = {sid: 0}
        queue = deque([sid])
        while queue:
            node = queue.popleft()
            for h in self._records[node].hypernyms:
                if h not in dist:
                    dist[h] = dist[node] + 1
                    queue.append(h)
        self._ancestor_cache[sid] = dist
        return dist

    def ancestors(self, sid: SynsetId) -> frozenset:
        """Strict transitive hypernyms of ``sid``."""
        return frozenset(self._ancestor_distances(sid)) - {sid}

    def is_hyponym_of(self, a: SynsetId, b: SynsetId) -> bool:
        """True iff ``b`` is a strict ancestor of ``a``."""
        self.record(b)
        if a.pos != b.pos:
            return False
        return a != b and b in self._ancestor_distances(a)

    def shortest_path_nodes(self, a: SynsetId, b: SynsetId) -> int:
        """Nodes on the shortest path between ``a`` and ``b`` through a common ancestor."""
        if a.pos != b.pos:
            raise DomainError(f"cannot compare {a} and {b}: different parts of speech")
        da = self._ancestor_distances(a)
        db = self._ancestor_distances(b)
        common = da.keys() & db.keys()
        if not common:
            raise DomainError(f"{a} and {b} share no ancestor")
        return min(da[c] + db[c] for c in common) + 1

    def lch_similarity(self, a: SynsetId, b: SynsetId) -> float:
        depth = self.max_depth.get(a.pos, 0)
        if a.pos == b.pos and depth == 0:
            raise DomainError(f"part of speech {a.pos!r} has no hypernym hierarchy")
        return -math.log(self.shortest_path_nodes(a, b) / (2.0 * depth))

    def subtree(self, root: SynsetId) -> frozenset:
        """``root`` and all transitive hyponyms."""
        self.record(root)
        seen = {root}
        queue = deque([root])
        while queue:
            for h in self._records[queue.popleft()].hyponyms:
                if h not in seen:
                    seen.add(h)
                    queue.append(h)
        return frozenset(seen)

    def word_list_from_subtree(self, root: SynsetId, purpose, name: str | None = None) -> WordList:
        return WordList(name or self.name(root), self.subtree(root), WordListPurpose(purpose))


# -- file parsing ---------------------------------------------------------------------

def _parse_index_line(line: str, path, lineno: int, pos: str):
    parts = line.split()
    try:
        lemma = parts[0]
        if normalize_pos(parts[1]) != pos:
            raise ValueError(f"pos {parts[1]!r} in {POS_FILE[pos]} index")
        synset_cnt = int(parts[2])
        p_cnt = int(parts[3])
        rest = parts[4 + p_cnt:]
        tagsense_cnt = int(rest[1])
        offsets = [int(o) for o in rest[2:2 + synset_cnt]]
        if len(offsets) != synset_cnt:
            raise ValueError(f"expected {synset_cnt} offsets, found {len(offsets)}")
    except (IndexError, ValueError) as exc:
        raise ParseError(f"malformed index line: {exc}", path, lineno) from None
    return normalize_lemma(lemma), tagsense_cnt, offsets


def _parse_data_line(line: str, path, lineno: int, pos: str):
    head, sep, gloss = line.partition("|")
    parts = head.split()
    try:
        offset = int(parts[0])
        lexname = int(parts[1])
        if normalize_pos(parts[2]) != pos:
            raise ValueError(f"synset type {parts[2]!r} in {POS_FILE[pos]} data")
        w_cnt = int(parts[3], 16)
        lemmas = []
        for i in range(w_cnt):
            word = parts[4 + 2 * i]
            if word.endswith(")"):
                word = _SYNTACTIC_MARKER.sub("", word)
            lemmas.append(word.lower())
        k = 4 + 2 * w_cnt
        p_cnt = int(parts[k])
        if len(parts) < k + 1 + 4 * p_cnt:
            raise ValueError("pointer list truncated")
        hypers, hypos = [], []
        for i in range(k + 1, k + 1 + 4 * p_cnt, 4):
            symbol = parts[i]
            if symbol in HYPERNYM_SYMBOLS:
                hypers.append(SynsetId(normalize_pos(parts[i + 2]), int(parts[i + 1])))
            elif symbol in HYPONYM_SYMBOLS:
                hypos.append(SynsetId(normalize_pos(parts[i + 2]), int(parts[i + 1])))
    except (IndexError, ValueError, DomainError) as exc:
        raise ParseError(f"malformed data line: {exc}", path, lineno) from None
    lemmas = tuple(dict.fromkeys(lemmas))
    return SynsetRecord(SynsetId(pos, offset), lemmas, tuple(dict.fromkeys(hypers)),
                        tuple(dict.fromkeys(hypos)), gloss.strip(), lexname)


def _iter_content_lines(path: Path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            # the license header lines start with two spaces
            if line.startswith("  ") or not line.strip():
                continue
            yield lineno, line.rstrip("\n")


def load_database(path) -> Taxonomy:
    """Parse a WordNet dict directory; index.noun and data.noun are mandatory."""
    root = Path(path)
    if not (root / "index.noun").is_file():
        raise ParseError("missing index.noun", root)
    if not (root / "data.noun").is_file():
        raise ParseError("missing data.noun", root)
    records: dict = {}
    index: dict = {}
    tagged: dict = {}
    exceptions: dict = {}
    for pos in POS_ORDER:
        name = POS_FILE[pos]
        ipath, dpath = root / f"index.{name}", root / f"data.{name}"
        if not ipath.is_file() and not dpath.is_file():
            continue
        if not (ipath.is_file() and dpath.is_file()):
            raise ParseError(f"missing {'index' if not ipath.is_file() else 'data'}.{name}", root)
        for lineno, line in _iter_content_lines(dpath):
            rec = _parse_data_line(line, dpath, lineno, pos)
            records[rec.id] = rec
        for lineno, line in _iter_content_lines(ipath):
            lemma, tagsense, offsets = _parse_index_line(line, ipath, lineno, pos)
            index[(lemma, pos)] = tuple(SynsetId(pos, o) for o in offsets)
            tagged[(lemma, pos)] = tagsense
        exc_map: dict = {}
        epath = root / f"{name}.exc"
        if epath.is_file():
            for lineno, line in _iter_content_lines(epath):
                forms = line.split()
                if len(forms) < 2:
                    raise ParseError("exception line needs an inflected form and a base", epath, lineno)
                exc_map.setdefault(forms[0], []).extend(forms[1:])
        exceptions[pos] = exc_map
    records, repairs = _derive_hyponyms(records)
    tax = Taxonomy(records, index, exceptions, tagged, source=str(root))
    tax.repairs = tuple(repairs)
    if repairs:
        logger.info("%d hyponym pointers disagree with hypernym links; hypernyms kept", len(repairs))
    logger.info("loaded %s: %s", root, tax.counts())
    return tax


def _derive_hyponyms(records: dict):
    """Rebuild hyponym lists as the inverse of hypernym links.

    WordNet 3.0 ships a few one-sided pointers (e.g. a verb listing its own
    hypernym as a hyponym); hypernym pointers are taken as authoritative.
    """
    inverse: dict = {sid: [] for sid in records}
    for sid, rec in records.items():
        for h in rec.hypernyms:
            if h not in records:
                raise IntegrityError(f"synset {sid} points to missing offset {h.offset:08d} ({h.pos})")
            inverse[h].append(sid)
    repairs = []
    out = {}
    for sid, rec in records.items():
        derived = tuple(inverse[sid])
        listed = set(rec.hyponyms)
        for h in listed - set(derived):
            if h not in records:
                raise IntegrityError(f"synset {sid} points to missing offset {h.offset:08d} ({h.pos})")
            repairs.append(f"dropped hyponym pointer {sid} -> {h}")
        for h in set(derived) - listed:
            repairs.append(f"added hyponym pointer {sid} -> {h}")
        # keep file order for listed pointers, then any added ones
        ordered = tuple(h for h in rec.hyponyms if h in set(derived)) + tuple(
            h for h in derived if h not in listed)
        out[sid] = SynsetRecord(sid, rec.lemmas, rec.hypernyms, ordered, rec.gloss, rec.lexname)
    return out, repairs


DEFAULT_WORDNET_ENV = "CAPHARM_WORDNET"


def default_wordnet_path() -> str | None:
    """WordNet directory named by ``$CAPHARM_WORDNET``, if set."""
    return os.environ.get(DEFAULT_WORDNET_ENV) or None


# -- word lists -------------------------------------------------------------------------

def load_word_list(path, purpose, taxonomy: Taxonomy, name: str | None = None) -> WordList:
    """Read ``lemma.pos offset`` lines (or NLTK names) into a :class:`WordList`.

    ``category: <name>`` lines file the following entries under that category.
    Lines that do not resolve are kept as warnings on the result.
    """
    import hashlib

    path = Path(path)
    raw = path.read_bytes()
    purpose = WordListPurpose(purpose)
    entries: set = set()
    categories: dict = {}
    warnings: list = []
    current = None
    for lineno, line in enumerate(raw.decode("utf-8").splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if text.lower().startswith("category:"):
            current = text.split(":", 1)[1].strip().lower()
            categories.setdefault(current, set())
            continue
        try:
            sid = _resolve_entry(text, taxonomy)
        except (DomainError, NotFoundError, IntegrityError) as exc:
            warnings.append(f"{path}:{lineno}: {exc}")
            continue
        entries.add(sid)
        if current is not None:
            categories[current].add(sid)
    if not entries and not warnings:
        raise ParseError("word list is empty", path)
    for w in warnings:
        logger.warning("unresolved word-list entry %s", w)
    return WordList(name or path.stem, frozenset(entries), purpose,
                    {k: frozenset(v) for k, v in categories.items()}, tuple(warnings),
                    hashlib.sha256(raw).hexdigest())


def _resolve_entry(text: str, taxonomy: Taxonomy) -> SynsetId:
    fields = text.split()
    if len(fields) == 1:
        if _SYNSET_TOKEN.match(fields[0]):
            sid = SynsetId.parse(fields[0])
        else:
            return taxonomy.synset_by_name(fields[0])
    elif len(fields) == 2:
        lemma, _, pos = fields[0].rpartition(".")
        if not lemma or not fields[1].isdigit():
            raise DomainError(f"expected 'lemma.pos offset', got {text!r}")
        sid = SynsetId(normalize_pos(pos), int(fields[1]))
        if sid in taxonomy and normalize_lemma(lemma) not in taxonomy.lemmas(sid):
            logger.warning("word-list lemma %r is not a lemma of %s", lemma, sid)
    else:
        raise DomainError(f"expected 'lemma.pos offset', got {text!r}")
    if sid not in taxonomy:
        raise IntegrityError(f"dangling offset {sid.offset:08d} ({sid.pos})")
    return sid
