"""Evidence items handed to human reviewers."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from .scenegraph import ResolvedWord

# false-positive scenarios, in precedence order
NON_IMAGEABLE, TOO_SPECIFIC, HALLUCINATION = "non_imageable", "too_specific", "hallucination"
SCENARIOS = (NON_IMAGEABLE, TOO_SPECIFIC, HALLUCINATION)


def _num(v):
    if v is None:
        return None
    return round(float(v), 12)


@dataclass(frozen=True)
class HarmCase:
    image_id: str
    stage_pair: str
    word: ResolvedWord
    scenario: str
    correlation: Optional[float] = None
    fp_rate: Optional[float] = None
    rank: int = 0
    caption_id: str = ""
    caption: str = ""
    group: Optional[str] = None
    details: dict = field(default_factory=dict, compare=False)

    def to_dict(self) -> dict:
        return {
            "rank": self.rank,
            "image_id": self.image_id,
            "stage_pair": self.stage_pair,
            "caption_id": self.caption_id,
            "caption": self.caption,
            "lemma": self.word.lemma,
            "synset": str(self.word.synset) if self.word.synset is not None else None,
            "scenario": self.scenario,
            "correlation": _num(self.correlation),
            "fp_rate": _num(self.fp_rate),
            "group": self.group,
            "details": {k: self.details[k] for k in sorted(self.details)},
        }


def with_ranks(cases: list) -> list:
    """Number already-sorted cases from 1."""
    from dataclasses import replace
    return [replace(c, rank=i) for i, c in enumerate(cases, 1)]
