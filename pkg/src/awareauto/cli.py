"""Batch entry points: one-shot pipeline runs, simulation scripts, corpus
evaluation, fixture recording, and the HTTP service.

Exit codes: 0 success, 1 input error (bad file, flag, or schema), 2
pipeline failure (backend or inference problems).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .config import Config, ConfigError, load_config, make_backend
from .context import CatalogError, load_catalog
from .engine import Engine, EngineError, SimEvent, trace_to_jsonl
from .evalharness import CorpusError, load_corpus, run_corpus
from .grounding import validate_grounded
from .llm import LLMError
from .normalizer import ExpressionError, UserExpression
from .pipeline import Pipeline
from .reasoning import UnparseableOutputError
from .rules import GroundedRuleFormatError, grounded_from_dict, grounded_to_dict
from .ruletext import serialize_rule_text
from .context import ContextSnapshot

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_PIPELINE = 2

_BACKEND_ALIASES = {"remote": "remote_http", "scripted": "scripted", "recording": "recording"}


class InputError(Exception):
    pass


class PipelineFailure(Exception):
    pass


def _read_json(path: str, what: str):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise InputError(f"cannot read {what} {path!r}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} {path!r} is not valid JSON: {exc}") from None


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _build_config(args) -> Config:
    backend = getattr(args, "backend", None)
    if backend:
        backend = _BACKEND_ALIASES.get(backend, backend)
    try:
        return load_config(
            args.config,
            backend=backend,
            catalog_path=getattr(args, "catalog", None),
            fixtures_dir=getattr(args, "fixtures", None),
            endpoint=getattr(args, "endpoint", None),
            listen=getattr(args, "listen", None),
        )
    except ConfigError as exc:
        raise InputError(str(exc)) from None


def _corpus_path(args, config: Config) -> str:
    corpus = getattr(args, "corpus", None)
    if corpus in (None, "bundled"):
        return config.corpus_path
    return corpus


def cmd_pipeline(args) -> int:
    config = _build_config(args)
    doc = _read_json(args.expression, "expression file")
    try:
        expr = UserExpression.from_dict(doc.get("expression", doc))
        snapshot = ContextSnapshot.from_dict(doc.get("snapshot", {}))
    except (ExpressionError, ValueError, TypeError, AttributeError) as exc:
        raise InputError(f"bad expression input: {exc}") from None
    try:
        pipeline = Pipeline.from_config(config)
        result = pipeline.run(expr, snapshot)
    except (LLMError, UnparseableOutputError) as exc:
        raise PipelineFailure(str(exc)) from None
    payload = {
        "normalized": result.normalized,
        "nl_rule": serialize_rule_text(result.nl_rule),
        "grounded": grounded_to_dict(result.grounded),
    }
    _emit(json.dumps(payload, indent=2, ensure_ascii=False) + "\n", args.out)
    return EXIT_OK


def cmd_simulate(args) -> int:
    config = _build_config(args)
    try:
        catalog = load_catalog(config.catalog_path)
    except (OSError, CatalogError, json.JSONDecodeError) as exc:
        raise InputError(f"bad catalog: {exc}") from None
    rules_doc = _read_json(args.rules, "rules file")
    events_doc = _read_json(args.events, "event script")
    if not isinstance(rules_doc, list) or not isinstance(events_doc, list):
        raise InputError("rules and event script must be JSON arrays")
    engine = Engine(catalog)
    for i, entry in enumerate(rules_doc):
        try:
            rule = validate_grounded(catalog, grounded_from_dict(entry))
        except GroundedRuleFormatError as exc:
            raise InputError(f"rules[{i}]: {exc}") from None
        if not rule.feasible:
            reasons = "; ".join(e.message for e in rule.errors)
            raise PipelineFailure(f"rules[{i}] is not deployable: {reasons}")
        engine.deploy(rule)
    try:
        events = sorted((SimEvent.from_dict(e) for e in events_doc), key=lambda e: e.at)
    except (KeyError, ValueError, TypeError) as exc:
        raise InputError(f"bad event: {exc}") from None
    try:
        engine.inject_many(events)
        horizon = args.until if args.until is not None else engine.clock.now
        engine.advance(max(horizon, engine.clock.now))
    except EngineError as exc:
        raise PipelineFailure(str(exc)) from None
    trace = engine.trace()
    if args.format == "json":
        _emit(json.dumps([r.to_dict() for r in trace], indent=2) + "\n", args.out)
    else:
        _emit(trace_to_jsonl(trace), args.out)
    return EXIT_OK


def cmd_eval(args) -> int:
    config = _build_config(args)
    try:
        cases = load_corpus(_corpus_path(args, config))
        pipeline = Pipeline.from_config(config)
    except (CorpusError, CatalogError, OSError) as exc:
        raise InputError(str(exc)) from None
    report = run_corpus(cases, pipeline)
    if args.format == "json":
        _emit(json.dumps(report.to_dict(), indent=2) + "\n", args.out)
    else:
        _emit(report.render_table(), args.out)
    return EXIT_OK


def cmd_record(args) -> int:
    if args.backend and _BACKEND_ALIASES.get(args.backend, args.backend) != "recording":
        raise InputError("record always uses the recording backend")
    args.backend = "recording"
    config = _build_config(args)
    try:
        cases = load_corpus(_corpus_path(args, config))
        pipeline = Pipeline.from_config(config)
    except (CorpusError, CatalogError, OSError, ConfigError) as exc:
        raise InputError(str(exc)) from None
    failures = []
    for case in sorted(cases, key=lambda c: c.id):
        try:
            pipeline.run(case.expression, case.snapshot)
        except Exception as exc:  # noqa: BLE001 - keep recording the rest
            failures.append((case.id, f"{type(exc).__name__}: {exc}"))
    for case_id, message in failures:
        print(f"record: {case_id}: {message}", file=sys.stderr)
    print(f"recorded fixtures for {len(cases) - len(failures)}/{len(cases)} cases to {config.fixtures_dir}")
    return EXIT_PIPELINE if failures else EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    config = _build_config(args)
    app = create_app(config)
    uvicorn.run(app, host=config.listen_host, port=config.listen_port, log_level="warning")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="awareauto")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, backend=True):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--catalog", help="device catalog JSON (default: bundled)")
        if backend:
            p.add_argument("--backend", choices=["remote", "scripted", "recording"])
            p.add_argument("--fixtures", help="fixtures directory for scripted/recording")
            p.add_argument("--endpoint", help="remote chat-completion endpoint URL")
        p.add_argument("--out", help="write output to this file instead of stdout")

    p = sub.add_parser("pipeline", help="run one expression through both stages")
    common(p)
    p.add_argument("--expression", required=True, help="JSON file with expression and snapshot")
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("simulate", help="deploy grounded rules and run an event script")
    common(p, backend=False)
    p.add_argument("--rules", required=True, help="JSON array of grounded rules")
    p.add_argument("--events", required=True, help="JSON array of events")
    p.add_argument("--until", type=int, help="advance the clock to this time after the events")
    p.add_argument("--format", choices=["json", "jsonl"], default="jsonl")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("eval", help="replay a labeled corpus and print the metric table")
    common(p)
    p.add_argument("--corpus", default="bundled", help="corpus JSON file or 'bundled'")
    p.add_argument("--format", choices=["json", "table"], default="table")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("record", help="run the corpus against a live model, saving fixtures")
    common(p)
    p.add_argument("--corpus", default="bundled", help="corpus JSON file or 'bundled'")
    p.set_defaults(func=cmd_record)

    p = sub.add_parser("serve", help="start the refinement HTTP service")
    common(p)
    p.add_argument("--listen", help="host:port (default 127.0.0.1:8787)")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except PipelineFailure as exc:
        print(f"pipeline failure: {exc}", file=sys.stderr)
        return EXIT_PIPELINE


if __name__ == "__main__":
    sys.exit(main())
