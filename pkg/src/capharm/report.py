"""Machine-readable reports (JSON) and human review sheets (markdown)."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable

from . import __version__

SCHEMA_VERSION = 1

UPPER_BOUND_BANNER = (
    "> **Review note.** Flagged words are an overinclusive, upper bound on the harms present: "
    "each case is evidence for human review, not a verdict. Deciding whether a case is a "
    "stereotype requires human interpretation and cannot be fully automated.")
GENERIC_BANNER = "> **Review note.** Cases are evidence for human adjudication, not verdicts."

ASSUMPTIONS = {
    "word_lists": "Word lists are exclusive, exhaustive and up to date for the concepts they stand for.",
    "taxonomy": "The taxonomy's word-to-synset assignments and hyponym links are correct.",
    "most_common_synset": "A word's most common synset is the sense the caption intends "
                          "(bounded where reported as lower/estimate/upper).",
    "tagger_parser": "The tagger and scene-graph extractor recover the intended words and tuples.",
    "human_ground_truth": "Human labels and captions are of high quality and serve as ground truth "
                          "for the stage they are compared with.",
    "demographic_annotations": "Perceived demographic annotations stand in for social groups; they may "
                               "erase or mislabel people.",
}

# which assumptions each measurement leans on
EXERCISED = {
    "stereotyping-fp": {"word_lists", "taxonomy", "most_common_synset", "tagger_parser", "human_ground_truth",
                        "demographic_annotations"},
    "stereotyping-tp": {"taxonomy", "most_common_synset", "tagger_parser", "human_ground_truth",
                        "demographic_annotations"},
    "tuple-dist": {"taxonomy", "most_common_synset", "tagger_parser", "demographic_annotations"},
    "divergence": {"taxonomy", "most_common_synset", "tagger_parser", "human_ground_truth",
                   "demographic_annotations"},
    "demeaning-words": {"word_lists", "taxonomy", "most_common_synset", "tagger_parser"},
    "person-mention": {"word_lists", "taxonomy", "tagger_parser", "human_ground_truth"},
    "context-specific": {"word_lists", "taxonomy", "tagger_parser", "human_ground_truth",
                         "demographic_annotations"},
    "identity-noun": {"tagger_parser"},
}


def assumption_ledger(technique: str, grouped: bool = True) -> list:
    used = set(EXERCISED.get(technique, ()))
    if not grouped:
        used.discard("demographic_annotations")
    return [{"id": k, "text": v, "exercised": k in used} for k, v in ASSUMPTIONS.items()]


def _clean(obj):
    """JSON-safe copy: NaN/Inf -> None, tuples -> lists, keys -> str, sorted sets."""
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (set, frozenset)):
        return [_clean(v) for v in sorted(obj, key=str)]
    if hasattr(obj, "item") and callable(obj.item):
        return _clean(obj.item())
    return obj


def build_report(technique: str, config: dict, results: dict, word_lists: dict | None = None,
                 grouped: bool = True, status: str = "ok", notices: Iterable[str] = ()) -> dict:
    return _clean({
        "schema_version": SCHEMA_VERSION,
        "tool": "capharm",
        "version": __version__,
        "technique": technique,
        "status": status,
        "seed": config.get("seed"),
        "config": dict(sorted(config.items())),
        "word_lists": dict(sorted((word_lists or {}).items())),
        "results": results,
        "notices": list(notices),
        "assumptions": assumption_ledger(technique, grouped),
    })


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=False) + "\n"


def write_report(report: dict, out_dir, stem: str, markdown: str | None = None) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / f"{stem}.json"
    path.write_text(dumps(report), encoding="utf-8")
    if markdown is not None:
        (out / f"{stem}.md").write_text(markdown, encoding="utf-8")
    return path


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v).replace("|", "\\|").replace("\n", " ")


def emit_review_sheet(cases: list, limit: int = 50, title: str = "Review sheet",
                      false_positive: bool = False, path=None) -> str:
    """Markdown table of the top ``limit`` cases (already ranked)."""
    lines = [f"# {title}", "", UPPER_BOUND_BANNER if false_positive else GENERIC_BANNER, ""]
    shown = sorted(cases, key=lambda c: c.rank)[:max(0, limit)]
    lines.append(f"Showing {len(shown)} of {len(cases)} cases.")
    lines.append("")
    lines.append("| rank | image | caption | word | scenario | correlation | FP rate |")
    lines.append("|---:|---|---|---|---|---:|---:|")
    for c in shown:
        lines.append("| " + " | ".join(_cell(v) for v in (
            c.rank, c.image_id, c.caption, c.word.lemma, c.scenario, c.correlation, c.fp_rate)) + " |")
    text = "\n".join(lines) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def cases_json(cases: list) -> list:
    return [c.to_dict() for c in cases]


def summary_markdown(report: dict) -> str:
    """Short human summary of a report's headline numbers."""
    lines = [f"# {report['technique']}", "", f"- status: {report['status']}", f"- seed: {report['seed']}"]
    for k, v in sorted(report["config"].items()):
        lines.append(f"- {k}: {v}")
    lines.append("")
    res = report["results"]
    for key in sorted(res):
        val = res[key]
        if isinstance(val, (int, float, str)) or val is None:
            lines.append(f"- **{key}**: {val}")
        elif isinstance(val, dict) and all(not isinstance(x, (dict, list)) for x in val.values()):
            lines.append(f"- **{key}**: " + ", ".join(f"{k}={v}" for k, v in sorted(val.items())))
    if report["notices"]:
        lines += ["", "## Notices", ""] + [f"- {n}" for n in report["notices"]]
    lines += ["", "## Assumptions exercised", ""]
    lines += [f"- {a['text']}" for a in report["assumptions"] if a["exercised"]]
    return "\n".join(lines) + "\n"
