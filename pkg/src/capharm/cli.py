"""``capharm`` command-line front end.

Exit status: 0 success, 2 configuration or usage error, 3 data-integrity or
parse error.
"""
from __future__ import annotations

import argparse
import functools
import hashlib
import json
import logging
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .corpus import attach_system_outputs, ingest_cc, ingest_coco, load_corpus, save_corpus
from .errors import (CapharmError, ConfigError, DegenerateDataError, DomainError, IntegrityError,
                     NotFoundError, ParseError)
from .scenegraph import SceneGraphParser
from .wordnet import load_database, load_word_list

logger = logging.getLogger("capharm")

EXIT_OK, EXIT_CONFIG, EXIT_DATA = 0, 2, 3
TECHNIQUES = ("stereotyping-fp", "stereotyping-tp", "tuple-dist", "divergence", "demeaning-words",
              "person-mention", "context-specific", "identity-noun")

# flags shared by subcommands; each maps onto a RunConfig key
_FLAG_HELP = {
    "store": "bundle store directory",
    "out": "output directory for reports",
    "seed": "random seed",
    "threshold": "correlation threshold for false-positive cases",
    "area_threshold": "minimum summed person-box area",
    "lch_cutoff": "head-noun matching similarity cutoff",
    "top_k": "number of object types for salience models",
    "n_splits": "train/test splits per model",
    "min_valid_splits": "valid splits required per model",
    "train_fraction": "training fraction per split",
    "lam": "L2 penalty",
    "ci_method": "subsample or percentile",
    "axis": "group axis (gender or skin_tone)",
    "pair": "stage pair, e.g. s1:s4",
    "stage": "stage to scan (s1..s4)",
    "rules": "comma-separated context rules",
    "targets": "comma-separated identity adjectives",
    "non_imageable": "non-imageable people word list",
    "adjectives": "categorized adjective word list",
    "adjective_categories": "adjective categories treated as non-imageable",
    "visual_verbs": "visual verb word list",
    "offensive": "offensive people word list",
    "judgment": "judgment adjective word list",
    "person_lexicon": "person word list (default: person subtree)",
    "review_limit": "rows per review sheet",
    "n_boot": "bootstrap resamples for divergence intervals",
    "divergence_top_k": "rows reported by the divergence measurement",
}


def _add_flags(p: argparse.ArgumentParser, keys) -> None:
    for key in keys:
        p.add_argument("--" + key.replace("_", "-"), dest=key, default=None, help=_FLAG_HELP.get(key))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="capharm", description="Measure representational harms in "
                                     "image-caption corpora.")
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--wordnet", default=None, help="WordNet dict directory (or $CAPHARM_WORDNET)")
    parser.add_argument("--log-level", default="WARNING")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("ingest", help="build a bundle store from COCO- or CC-style files")
    p.add_argument("--format", choices=("coco", "cc"), required=True)
    p.add_argument("--images", help="COCO instances JSON")
    p.add_argument("--captions", help="COCO captions JSON")
    p.add_argument("--vg", help="Visual-Genome style attributes/relationships JSON")
    p.add_argument("--demographics", help="demographics CSV")
    p.add_argument("--pairs", help="CC image_id<TAB>caption file")
    p.add_argument("--name", default=None)
    _add_flags(p, ["store"])

    p = sub.add_parser("attach", help="attach system labels (s2) or captions (s4)")
    p.add_argument("--outputs", required=True)
    _add_flags(p, ["store", "stage"])

    p = sub.add_parser("parse-captions", help="print scene graphs for captions")
    p.add_argument("input", help="captions, one per line or id<TAB>caption")
    p.add_argument("--output", help="write graphs here instead of stdout")

    p = sub.add_parser("measure", help="run one measurement technique")
    p.add_argument("technique", choices=TECHNIQUES)
    _add_flags(p, list(_FLAG_HELP))

    p = sub.add_parser("report", help="combine the JSON reports in an output directory")
    _add_flags(p, ["out"])
    return parser


def _overrides(args) -> dict:
    return {k: v for k, v in vars(args).items() if k in RunConfig.keys() and v is not None}


@functools.lru_cache(maxsize=2)
def _load_taxonomy(path: str):
    # repeated main() calls in one process reuse the parsed database
    return load_database(path)


def _parser(cfg: RunConfig) -> SceneGraphParser:
    if not cfg.wordnet:
        raise ConfigError("no WordNet directory: pass --wordnet or set $CAPHARM_WORDNET")
    return SceneGraphParser(_load_taxonomy(str(Path(cfg.wordnet).resolve()))).fit()


# -- subcommands -----------------------------------------------------------------------

def cmd_ingest(args, cfg: RunConfig) -> int:
    cfg.validate(require=("store",), created=("store",))
    parser = _parser(cfg)
    if args.format == "coco":
        if not args.images:
            raise ConfigError("COCO ingestion needs --images")
        for f in (args.images, args.captions, args.vg, args.demographics):
            if f is not None and not Path(f).is_file():
                raise ConfigError(f"input file not found: {f}")
        corpus = ingest_coco(args.images, args.captions, parser, args.vg, args.demographics,
                             name=args.name or "coco")
    else:
        if not args.pairs or not Path(args.pairs).is_file():
            raise ConfigError("CC ingestion needs an existing --pairs file")
        corpus = ingest_cc(args.pairs, parser, name=args.name or "cc")
    save_corpus(corpus, cfg.store)
    print(f"ingested {len(corpus)} images into {cfg.store} "
          f"({len(corpus.failed_captions)} captions yielded no tuples)")
    return EXIT_OK


def cmd_attach(args, cfg: RunConfig) -> int:
    cfg.validate(require=("store",))
    if not Path(args.outputs).is_file():
        raise ConfigError(f"outputs file not found: {args.outputs}")
    parser = _parser(cfg)
    corpus = load_corpus(cfg.store, parser)
    attach_system_outputs(corpus, cfg.stage, args.outputs, parser)
    save_corpus(corpus, cfg.store)
    print(f"attached {cfg.stage} outputs; store holds {len(corpus)} images")
    return EXIT_OK


def cmd_parse(args, cfg: RunConfig) -> int:
    cfg.validate()
    if not Path(args.input).is_file():
        raise ConfigError(f"input file not found: {args.input}")
    parser = _parser(cfg)
    blocks = []
    with open(args.input, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            cid, sep, text = line.partition("\t")
            if not sep:
                cid, text = str(lineno), line
            graph, conf = parser.parse_with_confidence(text, cid)
            blocks.append(f"# confidence {conf:.4f}\n" + graph.serialize())
    text = "\n".join(blocks)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _word_list(cfg: RunConfig, key: str, purpose: str, taxonomy, required: bool = True):
    path = getattr(cfg, key)
    if path is None:
        if required:
            raise ConfigError(f"measurement needs the {key} word list (--{key.replace('_', '-')})")
        return None
    return load_word_list(path, purpose, taxonomy, name=key)


def cmd_measure(args, cfg: RunConfig) -> int:
    from . import demeaning, report, stereotyping
    from .stats import SplitProtocol

    cfg.validate(require=("store",))
    parser = _parser(cfg)
    tax = parser.taxonomy
    corpus = load_corpus(cfg.store, parser)
    corpus.seal()
    tech = args.technique
    out = Path(cfg.out)
    lists: dict = {}
    notices: list = []
    status = "ok"
    grouped = True
    sheet = None

    if tech == "stereotyping-fp":
        pair = cfg.pair or ("s1:s4" if corpus.kind == "coco" else "s3:s4")
        wl = stereotyping.FPWordLists(
            _word_list(cfg, "non_imageable", "non_imageable_people", tax),
            _word_list(cfg, "adjectives", "adjective_category", tax),
            _word_list(cfg, "visual_verbs", "visual_verbs", tax),
            tuple(c.strip() for c in cfg.adjective_categories.split(",") if c.strip()))
        lists = wl.hashes()
        res = stereotyping.find_false_positives(corpus, pair, wl, cfg.threshold, cfg.axis,
                                                lch_cutoff=cfg.lch_cutoff, taxonomy=tax)
        echo = cfg.echo(["threshold", "axis", "lch_cutoff", "adjective_categories"])
        echo["pair"] = pair
        status, notices = res.status, [res.message] if res.message else []
        results = {"summary": res.summary, "cases": report.cases_json(res.cases)}
        sheet = report.emit_review_sheet(res.cases, cfg.review_limit, f"False positives ({pair})", True)
    elif tech == "stereotyping-tp":
        protocol = SplitProtocol(cfg.n_splits, cfg.train_fraction, cfg.min_valid_splits, cfg.seed, cfg.ci_method)
        res = stereotyping.salience_difference(corpus, cfg.axis, protocol, cfg.top_k, cfg.lam)
        echo = cfg.echo(["axis", "top_k", "n_splits", "train_fraction", "min_valid_splits", "lam", "ci_method"])
        results = {"results": [r.to_dict() for r in res.results], "skipped": res.skipped,
                   "object_types": res.object_types,
                   "n_significant": sum(r.significant for r in res.results)}
    elif tech == "tuple-dist":
        res = stereotyping.tuple_distributions(corpus, cfg.stage, cfg.axis)
        echo = cfg.echo(["stage", "axis"])
        results = {"distributions": [d.to_dict() for d in res], "method": stereotyping.RECONSTRUCTED}
    elif tech == "divergence":
        pair = cfg.pair or ("s1:s4" if corpus.kind == "coco" else "s3:s4")
        res = stereotyping.cross_stage_divergence(corpus, cfg.axis, pair, cfg.divergence_top_k, cfg.n_boot,
                                                  cfg.seed)
        echo = cfg.echo(["axis", "divergence_top_k", "n_boot"])
        echo["pair"] = pair
        status, notices = res.status, [res.message] if res.message else []
        results = {"rows": [r.to_dict() for r in res.rows], "groups": list(res.groups), "method": res.method}
    elif tech == "demeaning-words":
        off = _word_list(cfg, "offensive", "offensive_people", tax)
        jud = _word_list(cfg, "judgment", "adjective_category", tax, required=False)
        if jud is None and cfg.adjectives:
            jud = _word_list(cfg, "adjectives", "adjective_category", tax).restrict(["judgment"])
        lists = {"offensive": off.source_hash, "judgment": jud.source_hash if jud else None}
        res = demeaning.demeaning_words(corpus, cfg.stage, off, jud, tax)
        echo = cfg.echo(["stage"])
        results = {"tribound": res.bound.to_dict(), "n_captions": res.n_captions,
                   "cases": report.cases_json(res.cases)}
        grouped = False
        sheet = report.emit_review_sheet(res.cases, cfg.review_limit, f"Demeaning words ({cfg.stage})")
    elif tech == "person-mention":
        lex = _word_list(cfg, "person_lexicon", "person_words", tax, required=False)
        if lex is not None:
            lists = {"person_lexicon": lex.source_hash}
        res = demeaning.person_mention_disparity(corpus, cfg.axis, cfg.area_threshold, lex, tax)
        echo = cfg.echo(["axis", "area_threshold"])
        grouped = res.mode == "grouped"
        results = {"mode": res.mode, "groups": list(res.groups), "n_restricted": len(res.restricted),
                   "restricted": res.restricted, "stages": {k: v.to_dict() for k, v in res.stages.items()},
                   "cases": report.cases_json(res.cases)}
        sheet = report.emit_review_sheet(res.cases, cfg.review_limit, "People not mentioned")
    elif tech == "context-specific":
        pair = cfg.pair or ("s1:s4" if corpus.kind == "coco" else "s3:s4")
        rules = [r.strip() for r in cfg.rules.split(",") if r.strip()]
        res = demeaning.context_specific(corpus, rules, pair, tax)
        echo = cfg.echo(["rules"])
        echo["pair"] = pair
        notices = res.notices
        results = {"prevalence": res.prevalence, "notes": res.notes, "cases": report.cases_json(res.cases)}
        sheet = report.emit_review_sheet(res.cases, cfg.review_limit, f"Context-specific cases ({pair})")
    else:  # identity-noun
        targets = [t.strip() for t in cfg.targets.split(",") if t.strip()]
        res = demeaning.identity_adjective_as_noun(corpus, cfg.stage, targets, parser)
        echo = cfg.echo(["stage", "targets"])
        grouped = False
        results = {"n_cases": len(res), "cases": report.cases_json(res)}
        sheet = report.emit_review_sheet(res, cfg.review_limit, f"Identity adjectives as nouns ({cfg.stage})")

    echo["seed"] = cfg.seed
    echo["store_manifest_sha256"] = hashlib.sha256((Path(cfg.store) / "manifest.json").read_bytes()).hexdigest()
    rep = report.build_report(tech, echo, results, lists, grouped, status, notices)
    report.write_report(rep, out, tech, report.summary_markdown(rep))
    if sheet is not None:
        (out / f"{tech}-review.md").write_text(sheet, encoding="utf-8")
    print(f"{tech}: wrote {out / (tech + '.json')}")
    return EXIT_OK


def cmd_report(args, cfg: RunConfig) -> int:
    from . import report

    out = Path(cfg.out)
    if not out.is_dir():
        raise ConfigError(f"output directory not found: {out}")
    index = {}
    sections = ["# Measurement report", ""]
    for path in sorted(out.glob("*.json")):
        if path.name == "index.json":
            continue
        try:
            rep = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ParseError(f"report is not valid JSON: {exc.msg}", path, exc.lineno) from None
        if rep.get("tool") != "capharm":
            continue
        index[rep["technique"]] = {"file": path.name, "status": rep["status"],
                                   "sha256": hashlib.sha256(path.read_bytes()).hexdigest()}
        sections.append(report.summary_markdown(rep).replace("# ", "## ", 1))
    (out / "index.json").write_text(json.dumps({"schema_version": report.SCHEMA_VERSION, "reports": index},
                                               indent=2, sort_keys=True) + "\n", encoding="utf-8")
    (out / "report.md").write_text("\n".join(sections), encoding="utf-8")
    print(f"combined {len(index)} reports into {out / 'report.md'}")
    return EXIT_OK


COMMANDS = {"ingest": cmd_ingest, "attach": cmd_attach, "parse-captions": cmd_parse,
            "measure": cmd_measure, "report": cmd_report}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_CONFIG
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        overrides = _overrides(args)
        if args.wordnet:
            overrides["wordnet"] = args.wordnet
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](args, cfg)
    except (IntegrityError, ParseError, NotFoundError, DegenerateDataError) as exc:
        print(f"capharm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, DomainError) as exc:
        print(f"capharm: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapharmError as exc:
        print(f"capharm: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
