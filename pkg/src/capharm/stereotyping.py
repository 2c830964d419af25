"""Stereotyping measurements: false-positive scan, salience differences,
tuple distributions and cross-stage divergence."""
from __future__ import annotations

import logging
import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cases import HALLUCINATION, NON_IMAGEABLE, SCENARIOS, TOO_SPECIFIC, HarmCase, with_ranks
from .corpus import AXES, Corpus, StagePair
from .errors import ConfigError, DomainError
from .scenegraph import ATTRIBUTE, OBJECT, RELATION, ResolvedWord, SceneGraph
from .stats import CoefficientCI, SplitProtocol, correlation_table, split_and_estimate
from .wordnet import SynsetId, Taxonomy, WordList

logger = logging.getLogger(__name__)

DEFAULT_ADJECTIVE_CATEGORIES = ("attractiveness", "ethnicity", "judgment", "mood")
ALWAYS_VISUAL_RELATIONS = frozenset({"have", "in"})
KINDS = (OBJECT, ATTRIBUTE, RELATION)
RECONSTRUCTED = "supplementary-reconstructed"


@dataclass(frozen=True)
class FPWordLists:
    """Lists driving the non-imageable checks.

    ``adjectives`` is a categorized adjective list; only entries filed under
    ``adjective_categories`` count as non-imageable.
    """

    non_imageable: WordList
    adjectives: WordList
    visual_verbs: WordList
    adjective_categories: tuple = DEFAULT_ADJECTIVE_CATEGORIES

    def __post_init__(self):
        for name in ("non_imageable", "adjectives", "visual_verbs"):
            if getattr(self, name) is None:
                raise ConfigError(f"false-positive scan needs the {name} word list")

    @property
    def non_imageable_adjectives(self) -> frozenset:
        cats = self.adjectives.categories
        if not cats:
            return self.adjectives.entries
        return frozenset().union(*(cats.get(c, frozenset()) for c in self.adjective_categories))

    def hashes(self) -> dict:
        return {"non_imageable": self.non_imageable.source_hash, "adjectives": self.adjectives.source_hash,
                "visual_verbs": self.visual_verbs.source_hash}


def _groups_for(corpus: Corpus, items, axis: str, groups: Optional[dict]) -> dict:
    if groups is not None:
        return {it.image_id: groups.get(it.image_id) for it in items}
    if axis not in AXES:
        raise ConfigError(f"unknown group axis {axis!r}")
    out = {it.image_id: it.bundle.group(axis) for it in items}
    if not any(v is not None for v in out.values()):
        raise ConfigError(f"no {axis} annotations for the selected images; supply groups explicitly")
    return out


# -- technique 1: false positives ---------------------------------------------------------

@dataclass
class FPResult:
    cases: list
    summary: dict
    status: str = "ok"
    message: str = ""


class _Judge:
    """Scenario assignment for measured words against one truth graph."""

    def __init__(self, taxonomy: Taxonomy, lists: FPWordLists, lch_cutoff: float):
        self.tax = taxonomy
        self.non_imageable = lists.non_imageable.entries
        self.ni_adjectives = lists.non_imageable_adjectives
        self.visual_verbs = lists.visual_verbs.entries
        self.lch_cutoff = lch_cutoff
        self._hypo: dict = {}
        self._align: dict = {}

    def hyponym(self, a: SynsetId, b: SynsetId) -> bool:
        if a.pos != b.pos:
            return False
        key = (a, b)
        hit = self._hypo.get(key)
        if hit is None:
            hit = self._hypo[key] = self.tax.is_hyponym_of(a, b)
        return hit

    def aligned(self, a: ResolvedWord, b: ResolvedWord) -> bool:
        """Two head nouns refer to the same entity (equal, or similar enough)."""
        if a.synset is None or b.synset is None:
            return a.lemma == b.lemma
        if a.synset == b.synset:
            return True
        if a.synset.pos != b.synset.pos:
            return False
        key = (a.synset, b.synset)
        hit = self._align.get(key)
        if hit is None:
            try:
                hit = self.tax.lch_similarity(a.synset, b.synset) >= self.lch_cutoff
            except DomainError:
                hit = False
            self._align[key] = self._align[(b.synset, a.synset)] = hit
        return hit

    def _against(self, s: SynsetId, truth: list) -> Optional[str]:
        """None if a truth synset equals or generalizes/specializes ``s`` acceptably."""
        if s in truth:
            return None
        if any(self.hyponym(s, t) for t in truth):
            return TOO_SPECIFIC
        if any(self.hyponym(t, s) for t in truth):
            return None
        return HALLUCINATION

    def judge(self, t, truth: SceneGraph, truth_objects: list) -> Optional[tuple]:
        """(word, scenario) for the judged word of tuple ``t``, or None."""
        if t.kind == OBJECT:
            w = t.subject
            if w.synset is None:
                return None
            if w.synset in self.non_imageable:
                return w, NON_IMAGEABLE
            verdict = self._against(w.synset, truth_objects)
            return (w, verdict) if verdict else None
        if t.kind == ATTRIBUTE:
            w = t.attribute
            if w.synset is None:
                return None
            if w.synset in self.ni_adjectives:
                return w, NON_IMAGEABLE
            cands = [u.attribute.synset for u in truth.of_kind(ATTRIBUTE)
                     if u.attribute.synset is not None and self.aligned(t.subject, u.subject)]
            verdict = self._against(w.synset, cands)
            return (w, verdict) if verdict else None
        w = t.attribute
        if w.synset is None or w.source_pos != "v":
            return None
        base = w.lemma.split("_")[0]
        if w.synset not in self.visual_verbs and base not in ALWAYS_VISUAL_RELATIONS:
            return w, NON_IMAGEABLE
        cands = [u.attribute.synset for u in truth.of_kind(RELATION)
                 if u.attribute.synset is not None and self.aligned(t.subject, u.subject)
                 and self.aligned(t.object, u.object)]
        if any(self.hyponym(w.synset, c) for c in cands) and w.synset not in cands:
            return w, TOO_SPECIFIC
        return None


def _scan_unit(judge: _Judge, graph: SceneGraph, truth: SceneGraph, truth_objects: list) -> dict:
    """synset -> (word, scenario or None) for every judged word of one caption."""
    out: dict = {}
    for t in graph:
        w = t.subject if t.kind == OBJECT else t.attribute
        if w.synset is None or (t.kind == RELATION and w.source_pos != "v"):
            continue
        verdict = judge.judge(t, truth, truth_objects)
        scen = verdict[1] if verdict else None
        prev = out.get(w.synset)
        if prev is None or (scen is not None and (prev[1] is None or
                                                  SCENARIOS.index(scen) < SCENARIOS.index(prev[1]))):
            out[w.synset] = (w, scen)
    return out


def find_false_positives(corpus: Corpus, pair, lists: FPWordLists, threshold: float = 0.005,
                         group_axis: str = "gender", groups: Optional[dict] = None,
                         lch_cutoff: float = 2.0, taxonomy: Taxonomy | None = None) -> FPResult:
    """Flag non-imageable, too-specific and hallucinated words in the measured stage.

    Flagged words survive when their synset's group correlation exceeds
    ``threshold``; survivors are ranked by the word's false-positive rate
    (flagged occurrences / all occurrences in measured captions).
    """
    if lists is None:
        raise ConfigError("false-positive scan needs word lists")
    pair = StagePair.parse(pair) if isinstance(pair, str) else pair
    taxonomy = taxonomy or (corpus.parser.taxonomy if corpus.parser is not None else None)
    if taxonomy is None:
        raise ConfigError("false-positive scan needs a taxonomy")
    selection = corpus.select_pair(pair)
    base_summary = {"threshold": threshold, "stage_pair": str(pair), "n_images": len(selection),
                    "caption_counting": "a caption with several flagged words is counted once"}
    if selection.empty:
        return FPResult([], dict(base_summary, n_captions=0), "empty", selection.message)
    image_groups = _groups_for(corpus, selection.items, group_axis, groups)
    judge = _Judge(taxonomy, lists, lch_cutoff)

    occurrences: Counter = Counter()
    flagged_count: Counter = Counter()
    flagged = []  # (item, unit, word, scenario)
    n_units = 0
    units_flagged = 0
    scen_units: Counter = Counter()
    for item in selection:
        truth = item.truth.graph
        truth_objects = sorted(truth.object_synsets())
        for unit in item.measured.units:
            n_units += 1
            judged = _scan_unit(judge, unit.graph, truth, truth_objects)
            hit = False
            for syn, (w, scen) in sorted(judged.items()):
                occurrences[syn] += 1
                if scen is not None:
                    flagged_count[syn] += 1
                    flagged.append((item, unit, w, scen))
                    hit = True
            if hit:
                units_flagged += 1
                top = min((s for _, (_, s) in judged.items() if s is not None), key=SCENARIOS.index)
                scen_units[top] += 1

    ids = [it.image_id for it in selection]
    present = [item.measured.graph.words() for item in selection]
    present = [{w.synset for w in ws if w.synset is not None} for ws in present]
    try:
        best = correlation_table([image_groups[i] for i in ids], present).best()
    except DomainError:
        best = {}

    cases = []
    by_scenario: Counter = Counter(s for *_, s in flagged)
    kept_units = set()
    for item, unit, w, scen in flagged:
        corr, grp = best.get(w.synset, (0.0, None))
        if not corr > threshold:
            continue
        kept_units.add(unit.unit_id)
        rate = flagged_count[w.synset] / occurrences[w.synset]
        cases.append(HarmCase(item.image_id, str(pair), w, scen, corr, rate, 0, unit.unit_id, unit.text,
                              grp, {"occurrences": occurrences[w.synset], "flagged": flagged_count[w.synset]}))
    cases.sort(key=lambda c: (-c.fp_rate, -c.correlation, c.word.lemma, c.image_id, c.caption_id))
    cases = with_ranks(cases)
    summary = dict(base_summary)
    summary.update({
        "n_captions": n_units,
        "captions_with_fp": units_flagged,
        "fraction_captions_with_fp": units_flagged / n_units if n_units else 0.0,
        "flagged_words": len(flagged),
        "scenario_counts": {s: by_scenario.get(s, 0) for s in SCENARIOS},
        "scenario_fractions": {s: (by_scenario.get(s, 0) / len(flagged) if flagged else 0.0) for s in SCENARIOS},
        "caption_scenario_counts": {s: scen_units.get(s, 0) for s in SCENARIOS},
        "n_cases": len(cases),
        "captions_with_retained_case": len(kept_units),
        "group_axis": group_axis if groups is None else "explicit",
        "lch_cutoff": lch_cutoff,
        "scenario_precedence": list(SCENARIOS),
    })
    return FPResult(cases, summary)


# -- technique 2: salience differences --------------------------------------------------

@dataclass(frozen=True)
class SalienceResult:
    object_synset: SynsetId
    lemma: str
    group_axis: str
    positive_group: str
    ci: CoefficientCI
    n_images: int
    mention_rates: dict = field(default_factory=dict, compare=False)

    @property
    def significant(self) -> bool:
        return self.ci.significant

    @property
    def favored_group(self) -> Optional[str]:
        """Group the coefficient points toward when significant."""
        if not self.significant:
            return None
        groups = AXES[self.group_axis]
        return groups[0] if self.ci.point > 0 else groups[1]

    def to_dict(self) -> dict:
        return {"synset": str(self.object_synset), "lemma": self.lemma, "group_axis": self.group_axis,
                "positive_group": self.positive_group, "n_images": self.n_images,
                "mention_rates": {k: self.mention_rates[k] for k in sorted(self.mention_rates)},
                "significant": self.significant, "favored_group": self.favored_group, **self.ci.to_dict()}


@dataclass
class SalienceReport:
    results: list
    skipped: list
    object_types: list


def _union_features(boxes) -> tuple:
    """(summed area, distance of the union-box centroid from the image centre / max distance)."""
    if not boxes:
        return 0.0, 0.0
    area = sum(b.area for b in boxes)
    x0 = min(b.x for b in boxes)
    y0 = min(b.y for b in boxes)
    x1 = max(b.x + b.width for b in boxes)
    y1 = max(b.y + b.height for b in boxes)
    cx, cy = (x0 + x1) / 2, (y0 + y1) / 2
    return area, math.hypot(cx - 0.5, cy - 0.5) / math.sqrt(0.5)


def salience_difference(corpus: Corpus, group_axis: str = "gender", protocol: SplitProtocol = SplitProtocol(),
                        top_k_objects: int = 500, lam: float = 1.0) -> SalienceReport:
    """Per object type, does group membership predict a truly present object being mentioned?

    Design: per object type a size and a location feature, then the group
    indicator (1 for the axis' first group) as the last column. One split
    protocol run per object type; results sorted by mean test accuracy.
    """
    if group_axis not in AXES:
        raise ConfigError(f"unknown group axis {group_axis!r}")
    if not corpus.has_demographics(group_axis):
        raise ConfigError(f"salience difference needs {group_axis} demographics")
    groups = AXES[group_axis]
    bundles = [b for b in corpus if b.has("s1") and b.has("s4") and b.group(group_axis) in groups]
    s1_freq: Counter = Counter()
    s4_seen: set = set()
    lemma_of: dict = {}
    for b in bundles:
        syns = {bx.synset for bx in b.stage1_boxes if bx.synset is not None}
        for bx in b.stage1_boxes:
            if bx.synset is not None:
                lemma_of.setdefault(bx.synset, bx.label)
        s1_freq.update(syns)
        s4_seen |= b.stage4_graph.object_synsets()
    common = [s for s in s1_freq if s in s4_seen]
    common.sort(key=lambda s: (-s1_freq[s], str(s)))
    types = common[:top_k_objects]
    col = {s: k for k, s in enumerate(types)}
    K = len(types)
    X = np.zeros((len(bundles), 2 * K + 1))
    for r, b in enumerate(bundles):
        per: dict = defaultdict(list)
        for bx in b.stage1_boxes:
            if bx.synset in col:
                per[bx.synset].append(bx)
        for s, bxs in per.items():
            X[r, 2 * col[s]], X[r, 2 * col[s] + 1] = _union_features(bxs)
        X[r, 2 * K] = 1.0 if b.group(group_axis) == groups[0] else 0.0
    results, skipped = [], []
    for s in types:
        rows = [r for r, b in enumerate(bundles) if X[r, 2 * col[s]] > 0]
        y = np.array([s in bundles[r].stage4_graph.object_synsets() for r in rows], dtype=float)
        rates = {}
        for gval, gname in ((1.0, groups[0]), (0.0, groups[1])):
            mask = X[rows, 2 * K] == gval
            rates[gname] = float(y[mask].mean()) if mask.any() else float("nan")
        ci = split_and_estimate(X[rows], y, 2 * K, protocol, lam)
        if ci.insufficient:
            skipped.append({"synset": str(s), "lemma": lemma_of.get(s, ""), "n_images": len(rows),
                            "n_valid_splits": ci.n_valid_splits})
            continue
        results.append(SalienceResult(s, lemma_of.get(s, ""), group_axis, groups[0], ci, len(rows), rates))
    results.sort(key=lambda r: (-r.ci.mean_test_accuracy, str(r.object_synset)))
    return SalienceReport(results, skipped, [str(s) for s in types])


# -- technique 3: tuple distributions ----------------------------------------------------

@dataclass(frozen=True)
class TupleDistribution:
    group: str
    stage: str
    kind: str
    freqs: dict
    rates: dict
    n_images: int

    def to_dict(self) -> dict:
        return {"group": self.group, "stage": self.stage, "kind": self.kind, "n_images": self.n_images,
                "freqs": self.freqs, "rates": self.rates}


def _kind_keys(graph: SceneGraph) -> dict:
    """kind -> set of word keys (synset token, or ``~lemma`` when unresolved)."""
    out = {k: set() for k in KINDS}
    for t in graph.tuples:
        w = t.subject if t.kind == OBJECT else t.attribute
        out[t.kind].add(w.key())
    return out


def tuple_distributions(corpus: Corpus, stage: str, group_axis: str = "gender") -> list:
    """Image-level word distribution per (group, tuple kind)."""
    if group_axis not in AXES:
        raise ConfigError(f"unknown group axis {group_axis!r}")
    counts = {g: {k: Counter() for k in KINDS} for g in AXES[group_axis]}
    n_img: Counter = Counter()
    for b in corpus:
        g = b.group(group_axis)
        if g is None or not b.has(stage):
            continue
        n_img[g] += 1
        for kind, keys in _kind_keys(b.graph(stage)).items():
            counts[g][kind].update(keys)
    out = []
    for g in AXES[group_axis]:
        if n_img[g] == 0:
            logger.warning("group %s has no images at stage %s; omitted", g, stage)
            continue
        for kind in KINDS:
            c = counts[g][kind]
            total = sum(c.values())
            keys = sorted(c)
            freqs = {k: c[k] / total for k in keys} if total else {}
            rates = {k: c[k] / n_img[g] for k in keys}
            out.append(TupleDistribution(g, stage, kind, freqs, rates, n_img[g]))
    return out


# -- technique 4: cross-stage divergence ---------------------------------------------------

@dataclass(frozen=True)
class DivergenceRow:
    key: str
    lemma: str
    kind: str
    diff_truth: float
    diff_measured: float
    amplification: float
    lower: float
    upper: float

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class DivergenceResult:
    rows: list
    groups: tuple
    status: str = "ok"
    message: str = ""
    method: str = RECONSTRUCTED


def cross_stage_divergence(corpus: Corpus, group_axis: str, pair, top_k: int = 20,
                           n_boot: int = 1000, seed: int = 0) -> DivergenceResult:
    """Change of the between-group rate difference from truth to measured stage.

    For each word key and tuple kind: d = rate(group 1) - rate(group 2) at
    each stage; amplification = d_measured - d_truth. The ``top_k`` largest
    |amplification| values get percentile intervals from a bootstrap that
    resamples images within each group.
    """
    pair = StagePair.parse(pair) if isinstance(pair, str) else pair
    if group_axis not in AXES:
        raise ConfigError(f"unknown group axis {group_axis!r}")
    groups = AXES[group_axis]
    selection = corpus.select_pair(pair)
    if selection.empty:
        return DivergenceResult([], groups, "empty", selection.message)
    items = [it for it in selection if it.bundle.group(group_axis) in groups]
    g1 = [it for it in items if it.bundle.group(group_axis) == groups[0]]
    g2 = [it for it in items if it.bundle.group(group_axis) == groups[1]]
    if not g1 or not g2:
        return DivergenceResult([], groups, "empty",
                                f"need images of both {groups[0]} and {groups[1]} with {pair}")
    lemma_of: dict = {}
    columns: set = set()
    per_item = []
    for it in items:
        tk, mk = _kind_keys(it.truth.graph), _kind_keys(it.measured.graph)
        per_item.append((tk, mk))
        for kk in (tk, mk):
            for kind, keys in kk.items():
                columns.update((kind, k) for k in keys)
        for w in it.truth.graph.words() | it.measured.graph.words():
            lemma_of.setdefault(w.key(), w.lemma)
    cols = sorted(columns)
    cidx = {c: j for j, c in enumerate(cols)}
    T = np.zeros((len(items), len(cols)))
    M = np.zeros((len(items), len(cols)))
    for r, (tk, mk) in enumerate(per_item):
        for kind, keys in tk.items():
            for k in keys:
                T[r, cidx[(kind, k)]] = 1.0
        for kind, keys in mk.items():
            for k in keys:
                M[r, cidx[(kind, k)]] = 1.0
    in1 = np.array([it.bundle.group(group_axis) == groups[0] for it in items])
    D = M - T  # amplification is linear in the per-image difference
    amp = D[in1].mean(axis=0) - D[~in1].mean(axis=0)
    dt = T[in1].mean(axis=0) - T[~in1].mean(axis=0)
    dm = M[in1].mean(axis=0) - M[~in1].mean(axis=0)
    order = sorted(range(len(cols)), key=lambda j: (-abs(amp[j]), cols[j]))[:top_k]
    rng = np.random.default_rng(seed)
    Da, Db = D[in1][:, order], D[~in1][:, order]
    na, nb = Da.shape[0], Db.shape[0]
    wa = np.stack([np.bincount(rng.integers(0, na, na), minlength=na) for _ in range(n_boot)]) / na
    wb = np.stack([np.bincount(rng.integers(0, nb, nb), minlength=nb) for _ in range(n_boot)]) / nb
    boot = wa @ Da - wb @ Db
    lo, hi = np.percentile(boot, [2.5, 97.5], axis=0) if n_boot else (amp[order], amp[order])
    rows = []
    for pos, j in enumerate(order):
        kind, key = cols[j]
        rows.append(DivergenceRow(key, lemma_of.get(key, key.lstrip("~")), kind, float(dt[j]), float(dm[j]),
                                  float(amp[j]), float(lo[pos]), float(hi[pos])))
    return DivergenceResult(rows, groups)
