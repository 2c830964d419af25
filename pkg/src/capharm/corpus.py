"""Per-image stage bundles: ingestion, system-output attachment, stage pairing
and the on-disk bundle store.

Stages follow the four-stage framework: ``s1`` human labels (boxes plus
optional attribute/relation tuples), ``s2`` system labels, ``s3`` human
captions and ``s4`` system captions.
"""
from __future__ import annotations

import csv
import dataclasses
import hashlib
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Optional

from .errors import ConfigError, DomainError, IntegrityError, NotFoundError, ParseError
from .scenegraph import (RELATION, ResolvedWord, SceneGraph, SceneGraphParser,
                         SceneTuple, attr, obj, rel, union_graphs)
from .wordnet import SynsetId, Taxonomy, normalize_lemma

logger = logging.getLogger(__name__)

STAGES = ("s1", "s2", "s3", "s4")
GENDERS = ("male", "female", "unlabeled")
SKIN_TONES = ("darker", "lighter", "unlabeled")
AXES = {"gender": GENDERS[:2], "skin_tone": SKIN_TONES[:2]}
BUNDLE_FORMAT = "capharm-bundle 1"
MANIFEST = "manifest.json"


@dataclass(frozen=True)
class BoundingBox:
    x: float
    y: float
    width: float
    height: float
    label: str = ""
    synset: Optional[SynsetId] = None

    def __post_init__(self):
        tol = 1e-9
        if self.x < -tol or self.y < -tol or self.width <= 0 or self.height <= 0:
            raise DomainError(f"box {self} has negative origin or empty extent")
        if self.x + self.width > 1 + tol or self.y + self.height > 1 + tol:
            raise DomainError(f"box {self} leaves the unit square")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple:
        return self.x + self.width / 2, self.y + self.height / 2

    @classmethod
    def from_pixels(cls, bbox, size, label="", synset=None, clip=True) -> "BoundingBox":
        """COCO ``[x, y, w, h]`` in pixels -> normalized box (clipped to the image)."""
        w_img, h_img = size
        x, y, w, h = (float(v) for v in bbox)
        x0, y0 = x / w_img, y / h_img
        x1, y1 = (x + w) / w_img, (y + h) / h_img
        if clip:
            x0, y0 = max(0.0, x0), max(0.0, y0)
            x1, y1 = min(1.0, x1), min(1.0, y1)
        return cls(x0, y0, x1 - x0, y1 - y0, label, synset)


@dataclass(frozen=True)
class DemographicAnnotation:
    image_id: str
    gender: str = "unlabeled"
    skin_tone: str = "unlabeled"
    person_box: Optional[BoundingBox] = None

    def __post_init__(self):
        if self.gender not in GENDERS:
            raise DomainError(f"gender must be one of {GENDERS}, got {self.gender!r}")
        if self.skin_tone not in SKIN_TONES:
            raise DomainError(f"skin tone must be one of {SKIN_TONES}, got {self.skin_tone!r}")

    def group(self, axis: str) -> Optional[str]:
        """Group label on ``axis`` or None when unlabeled."""
        if axis not in AXES:
            raise ConfigError(f"unknown group axis {axis!r}; use one of {sorted(AXES)}")
        value = getattr(self, axis)
        return value if value != "unlabeled" else None


@dataclass(frozen=True)
class Caption:
    caption_id: str
    text: str
    graph: SceneGraph
    confidence: float = 1.0


@dataclass(frozen=True)
class StageBundle:
    image_id: str
    stage1_boxes: Optional[tuple] = None
    stage1_tuples: tuple = ()
    stage2_labels: Optional[tuple] = None
    stage3_captions: Optional[tuple] = None
    stage4_captions: Optional[tuple] = None
    demographics: Optional[DemographicAnnotation] = None
    image_size: Optional[tuple] = None

    def has(self, stage: str) -> bool:
        return {"s1": self.stage1_boxes, "s2": self.stage2_labels,
                "s3": self.stage3_captions, "s4": self.stage4_captions}[stage] is not None

    @property
    def stages(self) -> tuple:
        return tuple(s for s in STAGES if self.has(s))

    @property
    def stage1_graph(self) -> Optional[SceneGraph]:
        if self.stage1_boxes is None:
            return None
        tuples = {obj(ResolvedWord(b.label, b.synset, "n")) for b in self.stage1_boxes}
        for t in self.stage1_tuples:
            tuples.add(t)
            tuples.add(obj(t.subject))
            if t.kind == RELATION:
                tuples.add(obj(t.object))
        return SceneGraph(frozenset(tuples), (f"{self.image_id}:s1",))

    @property
    def stage2_graph(self) -> Optional[SceneGraph]:
        if self.stage2_labels is None:
            return None
        return SceneGraph(frozenset(obj(w) for w in self.stage2_labels), (f"{self.image_id}:s2",))

    @property
    def stage3_graph(self) -> Optional[SceneGraph]:
        if self.stage3_captions is None:
            return None
        return union_graphs(c.graph for c in self.stage3_captions)

    @property
    def stage4_graph(self) -> Optional[SceneGraph]:
        if self.stage4_captions is None:
            return None
        return union_graphs(c.graph for c in self.stage4_captions)

    def graph(self, stage: str) -> Optional[SceneGraph]:
        return getattr(self, f"stage{stage[1]}_graph")

    def captions(self, stage: str) -> Optional[tuple]:
        if stage == "s3":
            return self.stage3_captions
        if stage == "s4":
            return self.stage4_captions
        return None

    def group(self, axis: str) -> Optional[str]:
        return self.demographics.group(axis) if self.demographics is not None else None


@dataclass(frozen=True)
class StagePair:
    """One arrow of the stage diagram: ``truth`` is the reference for ``measured``."""

    truth: str
    measured: str

    ARROWS = frozenset({("s1", "s2"), ("s1", "s3"), ("s3", "s4"), ("s2", "s4"), ("s1", "s4")})

    def __post_init__(self):
        if (self.truth, self.measured) not in self.ARROWS:
            raise DomainError(f"stage pair {self.truth}->{self.measured} is not one of the five arrows")

    def __str__(self) -> str:
        return f"{self.truth}:{self.measured}"

    @classmethod
    def parse(cls, text: str) -> "StagePair":
        """``"s1:s4"`` (``->`` and ``,`` also accepted)."""
        for sep in (":", "->", ","):
            if sep in text:
                a, b = (p.strip().lower() for p in text.split(sep, 1))
                return cls(a, b)
        raise DomainError(f"cannot read stage pair {text!r}; expected e.g. s1:s4")


@dataclass(frozen=True)
class Unit:
    """One comparable unit of a stage: a caption, or the whole label set."""

    unit_id: str
    text: str
    graph: SceneGraph


@dataclass(frozen=True)
class StageView:
    stage: str
    graph: SceneGraph
    units: tuple

    @property
    def object_synsets(self) -> set:
        return self.graph.object_synsets()


@dataclass(frozen=True)
class PairItem:
    image_id: str
    truth: StageView
    measured: StageView
    bundle: StageBundle


@dataclass
class PairSelection:
    pair: StagePair
    items: list
    status: str = "ok"
    message: str = ""

    def __iter__(self):
        return iter(self.items)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def empty(self) -> bool:
        return not self.items


def view(bundle: StageBundle, stage: str) -> StageView:
    """Uniform graph view of one stage of a bundle."""
    graph = bundle.graph(stage)
    if graph is None:
        raise NotFoundError(f"image {bundle.image_id} has no stage {stage}")
    caps = bundle.captions(stage)
    if caps is not None:
        units = tuple(Unit(c.caption_id, c.text, c.graph) for c in caps)
    elif stage == "s1":
        text = ", ".join(sorted({b.label for b in bundle.stage1_boxes}))
        units = (Unit(f"{bundle.image_id}:s1", text, graph),)
    else:
        units = (Unit(f"{bundle.image_id}:s2", ", ".join(w.lemma for w in bundle.stage2_labels), graph),)
    return StageView(stage, graph, units)


class Corpus:
    """Mapping image id -> :class:`StageBundle`.

    ``kind`` is ``"coco"`` (human labels available) or ``"cc"`` (captions only).
    The corpus is mutable while ingesting and attaching; :meth:`seal` freezes it.
    """

    def __init__(self, bundles: Iterable[StageBundle] = (), kind: str = "coco",
                 parser: SceneGraphParser | None = None, name: str = "corpus"):
        self.kind = kind
        self.name = name
        self.parser = parser
        self._bundles: dict = {}
        self.failed_captions: list = []
        self.notices: list = []
        self.sealed = False
        for b in bundles:
            self.add(b)

    # -- mapping ----------------------------------------------------------------------

    def __len__(self) -> int:
        return len(self._bundles)

    def __iter__(self) -> Iterator[StageBundle]:
        for key in sorted(self._bundles):
            yield self._bundles[key]

    def __contains__(self, image_id) -> bool:
        return str(image_id) in self._bundles

    def __getitem__(self, image_id) -> StageBundle:
        try:
            return self._bundles[str(image_id)]
        except KeyError:
            raise NotFoundError(f"unknown image id {image_id!r}") from None

    @property
    def image_ids(self) -> list:
        return sorted(self._bundles)

    def _check_open(self):
        if self.sealed:
            raise IntegrityError("corpus is sealed")

    def add(self, bundle: StageBundle) -> None:
        self._check_open()
        if bundle.image_id in self._bundles:
            raise IntegrityError(f"duplicate image id {bundle.image_id!r}")
        self._bundles[bundle.image_id] = bundle

    def replace(self, bundle: StageBundle) -> None:
        self._check_open()
        if bundle.image_id not in self._bundles:
            raise NotFoundError(f"unknown image id {bundle.image_id!r}")
        self._bundles[bundle.image_id] = bundle

    def seal(self) -> "Corpus":
        for b in self._bundles.values():
            if not b.stages:
                raise IntegrityError(f"image {b.image_id} has no stage")
        self.sealed = True
        return self

    def stage_counts(self) -> dict:
        return {s: sum(b.has(s) for b in self._bundles.values()) for s in STAGES}

    def has_demographics(self, axis: str | None = None) -> bool:
        for b in self._bundles.values():
            if b.demographics is None:
                continue
            if axis is None or b.group(axis) is not None:
                return True
        return False

    # -- captions -----------------------------------------------------------------

    def parse_caption(self, caption_id: str, text: str) -> Caption:
        if self.parser is None:
            raise ConfigError("corpus has no caption parser")
        text = " ".join(str(text).split())
        graph, conf = self.parser.parse_with_confidence(text, caption_id)
        if not graph.tuples:
            self.failed_captions.append(caption_id)
        return Caption(caption_id, text, graph, round(float(conf), 6))

    # -- pairing ----------------------------------------------------------------------

    def select_pair(self, pair: StagePair | str) -> PairSelection:
        """Images holding both stages of ``pair``, as uniform graph views."""
        if isinstance(pair, str):
            pair = StagePair.parse(pair)
        items = [PairItem(b.image_id, view(b, pair.truth), view(b, pair.measured), b)
                 for b in self if b.has(pair.truth) and b.has(pair.measured)]
        if not items:
            counts = self.stage_counts()
            msg = (f"no image has both {pair.truth} ({counts[pair.truth]} images) "
                   f"and {pair.measured} ({counts[pair.measured]} images)")
            return PairSelection(pair, [], "empty", msg)
        return PairSelection(pair, items)


select_pair = Corpus.select_pair


# -- resolution helpers -------------------------------------------------------------------

def resolve_label(taxonomy: Taxonomy, label: str, pos: str = "n") -> ResolvedWord:
    """Category or label string -> noun ResolvedWord; multiword labels fall back to their head."""
    lemma = normalize_lemma(label)
    for candidate in (lemma, lemma.split("_")[-1]):
        forms = taxonomy.morphy(candidate, pos) or [candidate]
        for form in forms:
            try:
                return ResolvedWord(form, taxonomy.most_common_synset(form, pos), pos)
            except NotFoundError:
                continue
    return ResolvedWord(lemma, None, pos)


def _named_word(taxonomy: Taxonomy, name: str, synsets, pos: str) -> ResolvedWord:
    """Visual-Genome style object/attribute: prefer the listed synset name."""
    for s in synsets or ():
        try:
            sid = taxonomy.synset_by_name(s)
        except (NotFoundError, DomainError):
            continue
        return ResolvedWord(normalize_lemma(name) if name else taxonomy.lemmas(sid)[0], sid, sid.pos)
    return resolve_label(taxonomy, name, pos) if name else ResolvedWord("", None, pos)


def largest_person(rows: list) -> tuple:
    """Pick the row with the largest box area; ties go to the smallest (x, y)."""
    return min(rows, key=lambda r: (-r[1].area, r[1].x, r[1].y))


# -- ingestion ------------------------------------------------------------------------

def _load_json(path, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{what} is not valid JSON: {exc.msg}", path, exc.lineno) from None


def ingest_coco(images, captions, parser: SceneGraphParser, vg_augment=None, demographics=None,
                name: str = "coco") -> Corpus:
    """Build a corpus from COCO-style instance and caption files.

    ``images`` holds ``images[]``, ``annotations[]`` (pixel ``bbox``) and
    ``categories[]``; ``captions`` holds ``annotations[]`` with ``caption``
    (it may be the same file, or embed a ``captions`` list).
    """
    parser._ensure()
    taxonomy = parser.taxonomy
    inst = _load_json(images, "image annotation file")
    caps = inst if captions is None else _load_json(captions, "caption file")
    if "images" not in inst:
        raise ParseError("annotation file has no images[] list", images)
    sizes: dict = {}
    for im in inst["images"]:
        iid = str(im["id"])
        if iid in sizes:
            raise IntegrityError(f"duplicate image id {iid!r} in {images}")
        sizes[iid] = (float(im.get("width", 1) or 1), float(im.get("height", 1) or 1))
    categories = {c["id"]: c["name"] for c in inst.get("categories", [])}
    label_cache: dict = {}
    boxes: dict = {iid: [] for iid in sizes}
    unknown = set()
    for ann in inst.get("annotations", []):
        iid = str(ann["image_id"])
        if iid not in sizes:
            unknown.add(iid)
            continue
        if "bbox" not in ann:
            continue
        label = ann.get("category") or categories.get(ann.get("category_id"), "")
        if label not in label_cache:
            label_cache[label] = resolve_label(taxonomy, label)
        word = label_cache[label]
        try:
            box = BoundingBox.from_pixels(ann["bbox"], sizes[iid], word.lemma, word.synset)
        except DomainError as exc:
            logger.warning("dropping degenerate box on image %s: %s", iid, exc)
            continue
        boxes[iid].append(box)
    if unknown:
        raise IntegrityError(f"annotations reference unknown images: {sorted(unknown)[:20]}")

    if isinstance(caps, dict):
        cap_rows = caps.get("captions") or caps.get("annotations", [])
    else:
        cap_rows = caps
    per_image: dict = {iid: [] for iid in sizes}
    unknown = set()
    for row in cap_rows:
        if "caption" not in row:
            continue
        iid = str(row["image_id"])
        if iid not in sizes:
            unknown.add(iid)
            continue
        per_image[iid].append((str(row.get("id", len(per_image[iid]))), row["caption"]))
    if unknown:
        raise IntegrityError(f"captions reference unknown images: {sorted(unknown)[:20]}")

    tuples = _read_vg(vg_augment, taxonomy, sizes) if vg_augment is not None else {}
    demo = _read_demographics(demographics, sizes) if demographics is not None else {}

    corpus = Corpus(kind="coco", parser=parser, name=name)
    for iid in sorted(sizes):
        rows = per_image[iid]
        if not rows:
            logger.warning("image %s has no captions; stage s3 absent", iid)
            corpus.notices.append(f"image {iid} has no captions")
        cap_objs = tuple(corpus.parse_caption(f"{iid}#{cid}", text) for cid, text in sorted(rows)) or None
        box_list = tuple(sorted(boxes[iid], key=_box_key))
        corpus.add(StageBundle(iid, stage1_boxes=box_list, stage1_tuples=tuple(sorted(
            tuples.get(iid, ()), key=SceneTuple.sort_key)), stage3_captions=cap_objs,
            demographics=demo.get(iid), image_size=sizes[iid]))
    logger.info("ingested %d COCO images (%d failed captions)", len(corpus), len(corpus.failed_captions))
    return corpus


def _box_key(b: BoundingBox):
    return (b.label, b.x, b.y, b.width, b.height)


def _read_vg(path, taxonomy: Taxonomy, sizes: dict) -> dict:
    """Visual-Genome style attributes/relationships -> stage-1 tuples per image."""
    data = _load_json(path, "augmentation file")
    if isinstance(data, dict):
        data = data.get("images", [data])
    out: dict = {}
    unknown = set()
    for entry in data:
        iid = str(entry.get("image_id", entry.get("id")))
        if iid not in sizes:
            unknown.add(iid)
            continue
        acc = out.setdefault(iid, set())
        for a in entry.get("attributes", []):
            head = _named_word(taxonomy, _first_name(a), a.get("synsets"), "n")
            if not head.lemma:
                continue
            for value in a.get("attributes", []):
                acc.add(attr(head, resolve_label(taxonomy, value.strip(), "a")))
        for r in entry.get("relationships", []):
            subj = _named_word(taxonomy, _first_name(r["subject"]), r["subject"].get("synsets"), "n")
            tgt = _named_word(taxonomy, _first_name(r["object"]), r["object"].get("synsets"), "n")
            pred = normalize_lemma(r.get("predicate", ""))
            if not (subj.lemma and tgt.lemma and pred):
                continue
            rw = _named_word(taxonomy, pred, [s for s in r.get("synsets", []) if ".v." in s], "v")
            if rw.synset is None or rw.synset.pos != "v":
                rw = ResolvedWord(pred, None, "p")
            acc.add(rel(subj, rw, tgt))
    if unknown:
        raise IntegrityError(f"augmentation references unknown images: {sorted(unknown)[:20]}")
    return out


def _first_name(entry: dict) -> str:
    if entry.get("name"):
        return entry["name"]
    names = entry.get("names") or []
    return names[0] if names else ""


def _read_demographics(path, sizes: dict) -> dict:
    """CSV ``image_id,gender,skin_tone,x,y,w,h``; pixel boxes are normalized by image size.

    Boxes whose four values are all within [0, 1] are taken as already normalized.
    """
    rows: dict = {}
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["image_id", "gender", "skin_tone", "x", "y", "w", "h"]
        if header is None or [h.strip().lower() for h in header] != expected:
            raise ParseError(f"demographics header must be {','.join(expected)}", path, 1)
        for lineno, rec in enumerate(reader, 2):
            if not rec or not any(f.strip() for f in rec):
                continue
            if len(rec) != 7:
                raise ParseError(f"expected 7 fields, found {len(rec)}", path, lineno)
            iid = rec[0].strip()
            if iid not in sizes:
                raise IntegrityError(f"demographics row for unknown image {iid!r} ({path}:{lineno})")
            try:
                vals = [float(v) for v in rec[3:]]
                gender = rec[1].strip().lower() or "unlabeled"
                tone = rec[2].strip().lower() or "unlabeled"
                if all(0 <= v <= 1 for v in vals):
                    box = BoundingBox(*vals, label="person")
                else:
                    box = BoundingBox.from_pixels(vals, sizes[iid], "person")
                ann = DemographicAnnotation(iid, gender, tone, box)
            except (ValueError, DomainError) as exc:
                raise ParseError(str(exc), path, lineno) from None
            rows.setdefault(iid, []).append((ann, box))
    return {iid: largest_person(r)[0] for iid, r in rows.items()}


def ingest_cc(pairs, parser: SceneGraphParser, name: str = "cc") -> Corpus:
    """Tab-separated ``image_id<TAB>caption`` rows -> captions-only corpus."""
    parser._ensure()
    corpus = Corpus(kind="cc", parser=parser, name=name)
    seen: dict = {}
    with open(pairs, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            fields = line.split("\t")
            if len(fields) < 2 or not fields[1].strip():
                raise ParseError("row needs an image id and a caption", pairs, lineno)
            iid = fields[0].strip()
            if iid in seen:
                raise IntegrityError(f"duplicate image id {iid!r} at {pairs}:{lineno} "
                                     f"(first seen on line {seen[iid]})")
            seen[iid] = lineno
            cap = corpus.parse_caption(f"{iid}#0", fields[1])
            corpus.add(StageBundle(iid, stage3_captions=(cap,)))
    logger.info("ingested %d CC pairs (%d failed captions)", len(corpus), len(corpus.failed_captions))
    return corpus


def attach_system_outputs(corpus: Corpus, stage: str, outputs, parser: SceneGraphParser | None = None) -> Corpus:
    """Attach stage s2 labels or s4 captions from ``image_id<TAB>payload`` rows.

    A previously attached stage of the same kind is replaced; nothing is
    changed unless every row refers to a known image.
    """
    if stage not in ("s2", "s4"):
        raise DomainError(f"system outputs are stage s2 or s4, not {stage!r}")
    parser = parser or corpus.parser
    if parser is None:
        raise ConfigError("attaching system outputs needs a caption parser")
    parser._ensure()
    payloads: dict = {}
    unknown = []
    with open(outputs, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip() or line.startswith("#"):
                continue
            iid, sep, payload = line.partition("\t")
            iid = iid.strip()
            if not sep:
                raise ParseError("row needs image_id<TAB>payload", outputs, lineno)
            if iid not in corpus:
                unknown.append(iid)
                continue
            payloads.setdefault(iid, []).append(payload)
    if unknown:
        raise IntegrityError(f"{stage} outputs reference unknown images: {sorted(set(unknown))[:20]}")
    updated = []
    for iid, rows in sorted(payloads.items()):
        bundle = corpus[iid]
        if stage == "s2":
            labels = [l.strip() for p in rows for l in p.split(",") if l.strip()]
            words = tuple(dict.fromkeys(resolve_label(parser.taxonomy, l) for l in labels))
            updated.append(dataclasses.replace(bundle, stage2_labels=words))
        else:
            caps = []
            for k, text in enumerate(rows):
                graph, conf = parser.parse_with_confidence(" ".join(text.split()), f"{iid}#s4.{k}")
                if not graph.tuples:
                    corpus.failed_captions.append(f"{iid}#s4.{k}")
                caps.append(Caption(f"{iid}#s4.{k}", " ".join(text.split()), graph, round(float(conf), 6)))
            updated.append(dataclasses.replace(bundle, stage4_captions=tuple(caps)))
    for b in updated:
        corpus.replace(b)
    logger.info("attached %s outputs to %d images", stage, len(updated))
    return corpus


# -- bundle store ----------------------------------------------------------------------

def _word_tok(w: ResolvedWord) -> str:
    return f"{w.lemma} {w.token()} {w.source_pos}"


def serialize_bundle(b: StageBundle) -> str:
    lines = [BUNDLE_FORMAT, f"I {b.image_id}"]
    if b.image_size is not None:
        lines.append(f"Z {b.image_size[0]!r} {b.image_size[1]!r}")
    if b.demographics is not None:
        d = b.demographics
        pb = d.person_box
        box = f" {pb.x!r} {pb.y!r} {pb.width!r} {pb.height!r}" if pb is not None else ""
        lines.append(f"D {d.gender} {d.skin_tone}{box}")
    if b.stage1_boxes is not None:
        lines.append(f"S1 {len(b.stage1_boxes)}")
        for box in b.stage1_boxes:
            syn = str(box.synset) if box.synset is not None else "-"
            lines.append(f"B {box.x!r} {box.y!r} {box.width!r} {box.height!r} {syn} {box.label}")
        for t in b.stage1_tuples:
            lines.append("T " + t.to_line())
    if b.stage2_labels is not None:
        lines.append(f"S2 {len(b.stage2_labels)}")
        for w in b.stage2_labels:
            lines.append("L " + _word_tok(w))
    for stage, caps in (("S3", b.stage3_captions), ("S4", b.stage4_captions)):
        if caps is None:
            continue
        lines.append(f"{stage} {len(caps)}")
        for c in caps:
            lines.append(f"C {c.confidence!r} {c.caption_id}\t{c.text}")
            lines.extend("G " + t.to_line() for t in c.graph)
    return "\n".join(lines) + "\n"


def parse_bundle(text: str, source=None) -> StageBundle:
    lines = text.splitlines()
    if not lines or lines[0] != BUNDLE_FORMAT:
        raise ParseError(f"not a bundle file (expected {BUNDLE_FORMAT!r} header)", source, 1)
    fields: dict = {"stage1_tuples": []}
    current = None  # (stage key, list of captions)
    cap = None
    for lineno, line in enumerate(lines[1:], 2):
        code, _, rest = line.partition(" ")
        try:
            if code == "I":
                fields["image_id"] = rest
            elif code == "Z":
                w, h = rest.split()
                fields["image_size"] = (float(w), float(h))
            elif code == "D":
                parts = rest.split()
                box = BoundingBox(*map(float, parts[2:6]), label="person") if len(parts) == 6 else None
                fields["demographics"] = (parts[0], parts[1], box)
            elif code == "S1":
                fields["stage1_boxes"] = []
            elif code == "B":
                parts = rest.split(" ", 5)
                syn = None if parts[4] == "-" else SynsetId.parse(parts[4])
                fields["stage1_boxes"].append(BoundingBox(*map(float, parts[:4]), parts[5], syn))
            elif code == "T":
                fields["stage1_tuples"].extend(SceneGraph.parse(rest, source).tuples)
            elif code == "S2":
                fields["stage2_labels"] = []
            elif code == "L":
                lemma, tok, pos = rest.split(" ")
                fields["stage2_labels"].append(
                    ResolvedWord(lemma, None if tok == "-" else SynsetId.parse(tok), pos))
            elif code in ("S3", "S4"):
                current = fields.setdefault(f"stage{code[1]}_captions", [])
            elif code == "C":
                conf, _, tail = rest.partition(" ")
                cid, _, ctext = tail.partition("\t")
                cap = [cid, ctext, [], float(conf)]
                current.append(cap)
            elif code == "G":
                cap[2].append(rest)
            else:
                raise ValueError(f"unknown record code {code!r}")
        except (ValueError, IndexError, TypeError, AttributeError, DomainError) as exc:
            raise ParseError(f"bad bundle line: {exc}", source, lineno) from None
    if "image_id" not in fields:
        raise ParseError("bundle has no image id", source)
    iid = fields["image_id"]
    demo = None
    if "demographics" in fields:
        g, s, box = fields["demographics"]
        demo = DemographicAnnotation(iid, g, s, box)
    caps = {}
    for key in ("stage3_captions", "stage4_captions"):
        if key in fields:
            caps[key] = tuple(Caption(c[0], c[1], SceneGraph.parse("\n".join(c[2]) + "\nC " + c[0], source),
                                      c[3]) for c in fields[key])
    return StageBundle(
        iid,
        stage1_boxes=tuple(fields["stage1_boxes"]) if "stage1_boxes" in fields else None,
        stage1_tuples=tuple(fields["stage1_tuples"]),
        stage2_labels=tuple(fields["stage2_labels"]) if "stage2_labels" in fields else None,
        demographics=demo, image_size=fields.get("image_size"), **caps)


def _bundle_filename(image_id: str) -> str:
    return hashlib.sha1(image_id.encode("utf-8")).hexdigest()[:16] + ".bundle"


def save_corpus(corpus: Corpus, directory) -> Path:
    """Write one bundle file per image plus ``manifest.json`` (counts and hashes)."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    for b in corpus:
        text = serialize_bundle(b).encode("utf-8")
        fname = _bundle_filename(b.image_id)
        (out / fname).write_bytes(text)
        files[fname] = {"image_id": b.image_id, "sha256": hashlib.sha256(text).hexdigest()}
    manifest = {
        "format": BUNDLE_FORMAT,
        "name": corpus.name,
        "kind": corpus.kind,
        "n_bundles": len(corpus),
        "stage_counts": corpus.stage_counts(),
        "failed_captions": sorted(corpus.failed_captions),
        "notices": list(corpus.notices),
        "files": dict(sorted(files.items())),
    }
    (out / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def load_corpus(directory, parser: SceneGraphParser | None = None, verify: bool = True) -> Corpus:
    root = Path(directory)
    mpath = root / MANIFEST
    if not mpath.is_file():
        raise ParseError("bundle store has no manifest.json", root)
    manifest = _load_json(mpath, "manifest")
    if manifest.get("format") != BUNDLE_FORMAT:
        raise ParseError(f"unsupported store format {manifest.get('format')!r}", mpath)
    corpus = Corpus(kind=manifest.get("kind", "coco"), parser=parser, name=manifest.get("name", "corpus"))
    for fname, meta in manifest["files"].items():
        path = root / fname
        if not path.is_file():
            raise IntegrityError(f"manifest lists missing bundle {fname} (image {meta['image_id']})")
        raw = path.read_bytes()
        if verify and hashlib.sha256(raw).hexdigest() != meta["sha256"]:
            raise IntegrityError(f"hash mismatch for {fname} (image {meta['image_id']})")
        bundle = parse_bundle(raw.decode("utf-8"), path)
        if bundle.image_id != meta["image_id"]:
            raise IntegrityError(f"{fname} holds image {bundle.image_id!r}, manifest says {meta['image_id']!r}")
        corpus.add(bundle)
    if len(corpus) != manifest.get("n_bundles", len(corpus)):
        raise IntegrityError(f"manifest counts {manifest['n_bundles']} bundles, found {len(corpus)}")
    corpus.failed_captions = list(manifest.get("failed_captions", []))
    corpus.notices = list(manifest.get("notices", []))
    return corpus
