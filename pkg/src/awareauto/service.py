"""HTTP API and session state machine for multi-round rule refinement.

A session holds the draft rule under construction. Each user input (an
expression or a direct edit) is one round. Stage-1 output is returned
immediately; grounding runs in a background thread and its result lands in
the session history, so clients poll GET /sessions/{id} for it. Requests
within one session are serialized; the engine is guarded by one lock.
"""

from __future__ import annotations

import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import Config
from .context import ContextSnapshot
from .engine import DeploymentError, Engine, EngineError, SimEvent
from .normalizer import ExpressionError, UserExpression
from .pipeline import Pipeline, apply_modification
from .reasoning import UnparseableOutputError
from .rules import GroundedRule, NLRule, RuleOperation, grounded_to_dict
from .ruletext import RuleTextError, parse_rule_text, serialize_rule_text


class ServiceError(Exception):
    def __init__(self, message: str, status: int = 400, detail: dict | None = None):
        super().__init__(message)
        self.status = status
        self.detail = detail or {}


@dataclass
class HistoryEntry:
    round: int
    kind: str  # expression | modification_expression | direct_edit
    input: dict
    normalized: str | None = None
    nl_rule: str | None = None
    warnings: list = field(default_factory=list)
    grounding_status: str = "pending"  # pending | done | failed
    grounded: dict | None = None
    errors: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "round": self.round,
            "kind": self.kind,
            "input": self.input,
            "normalized": self.normalized,
            "nl_rule": self.nl_rule,
            "warnings": list(self.warnings),
            "grounding_status": self.grounding_status,
            "grounded": self.grounded,
            "errors": list(self.errors),
        }


@dataclass
class Session:
    id: str
    round: int = 0
    draft_nl: NLRule | None = None
    draft_grounded: GroundedRule | None = None
    history: list = field(default_factory=list)
    closed: bool = False
    busy: bool = False
    lock: threading.Lock = field(default_factory=threading.Lock)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "round": self.round,
            "closed": self.closed,
            "busy": self.busy,
            "draft_nl": serialize_rule_text(self.draft_nl) if self.draft_nl else None,
            "draft_grounded": grounded_to_dict(self.draft_grounded) if self.draft_grounded else None,
            "history": [h.to_dict() for h in self.history],
        }


class RefinementService:
    """Session store plus deployed-rule registry over one pipeline+engine."""

    def __init__(self, pipeline: Pipeline, engine: Engine | None = None):
        self.pipeline = pipeline
        self.engine = engine or Engine(pipeline.catalog)
        self.sessions: dict[str, Session] = {}
        self.rule_documents: dict[str, str] = {}  # deployed name -> rule text
        self._engine_lock = threading.Lock()
        self._sessions_lock = threading.Lock()

    # -- sessions ------------------------------------------------------------

    def create_session(self) -> Session:
        session = Session(id=uuid.uuid4().hex[:12])
        with self._sessions_lock:
            self.sessions[session.id] = session
        return session

    def get_session(self, session_id: str) -> Session:
        session = self.sessions.get(session_id)
        if session is None:
            raise ServiceError(f"no session {session_id!r}", status=404)
        return session

    def submit_expression(self, session_id: str, expression: dict, snapshot: dict) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            self._require_idle(session)
            try:
                expr = UserExpression.from_dict(expression)
            except ExpressionError as exc:
                raise ServiceError(str(exc), status=400) from None
            snap = ContextSnapshot.from_dict(snapshot or {})
            session.round += 1
            entry = HistoryEntry(
                round=session.round,
                kind="expression",
                input={"expression": expression, "snapshot": snapshot},
            )
            session.history.append(entry)
            draft_text = serialize_rule_text(session.draft_nl) if session.draft_nl else None
            try:
                normalized, rule = self.pipeline.infer(expr, snap, draft_text)
            except UnparseableOutputError as exc:
                entry.errors.append({"stage": "reasoning", "message": str(exc), "raw": exc.raw_text})
                entry.grounding_status = "failed"
                return entry.to_dict()
            entry.normalized = normalized
            try:
                rule = self._integrate(session, entry, rule)
            except ServiceError as exc:
                entry.errors.append({"stage": "reasoning", "message": str(exc)})
                entry.grounding_status = "failed"
                return entry.to_dict()
            entry.nl_rule = serialize_rule_text(rule)
            entry.warnings = rule.warnings()
            session.draft_nl = rule
            session.draft_grounded = None
            self._start_grounding(session, entry, rule)
            return entry.to_dict()

    def _integrate(self, session: Session, entry: HistoryEntry, rule: NLRule) -> NLRule:
        if rule.operation is RuleOperation.MODIFY:
            entry.kind = "modification_expression"
            if session.draft_nl is not None:
                return apply_modification(session.draft_nl, rule)
            base_text = self.rule_documents.get(self._deployed_key(rule.name) or "")
            if base_text is None:
                raise ServiceError(
                    f"nothing to modify: no draft in this session and no deployed rule named "
                    f"{rule.name!r}"
                )
            return apply_modification(parse_rule_text(base_text), rule)
        return rule

    def edit_rule_text(self, session_id: str, document: str) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            self._require_idle(session)
            try:
                rule = parse_rule_text(document)
            except RuleTextError as exc:
                raise ServiceError(
                    str(exc), status=400, detail={"line": exc.line, "column": exc.column}
                ) from None
            session.round += 1
            entry = HistoryEntry(
                round=session.round, kind="direct_edit", input={"document": document}
            )
            session.history.append(entry)
            entry.nl_rule = serialize_rule_text(rule)
            entry.warnings = rule.warnings()
            session.draft_nl = rule
            session.draft_grounded = None
            self._start_grounding(session, entry, rule)
            return entry.to_dict()

    def _require_idle(self, session: Session) -> None:
        if session.closed:
            raise ServiceError("session is closed", status=409)
        if session.busy:
            raise ServiceError("an inference is already running for this session", status=409)

    def _start_grounding(self, session: Session, entry: HistoryEntry, rule: NLRule) -> None:
        if rule.operation is RuleOperation.DELETE:
            # no interfaces to resolve; deletion is checked at confirm time
            grounded = GroundedRule(RuleOperation.DELETE, rule.name, feasible=True)
            session.draft_grounded = grounded
            entry.grounded = grounded_to_dict(grounded)
            entry.grounding_status = "done"
            return
        session.busy = True

        def work():
            try:
                grounded = self.pipeline.ground(rule)
            except Exception as exc:  # noqa: BLE001 - surfaced to the user
                with session.lock:
                    entry.grounding_status = "failed"
                    entry.errors.append({"stage": "grounding", "message": f"{exc}"})
                    session.busy = False
                return
            with session.lock:
                session.draft_grounded = grounded
                entry.grounded = grounded_to_dict(grounded)
                entry.grounding_status = "done"
                if not grounded.feasible:
                    entry.errors.extend(
                        {
                            "stage": "grounding",
                            "code": e.code.value,
                            "target": e.target,
                            "interface": e.interface,
                            "message": e.message,
                        }
                        for e in grounded.errors
                    )
                session.busy = False

        threading.Thread(target=work, name=f"grounding-{session.id}", daemon=True).start()

    def confirm(self, session_id: str) -> dict:
        session = self.get_session(session_id)
        with session.lock:
            self._require_idle(session)
            grounded = session.draft_grounded
            if grounded is None:
                raise ServiceError("nothing to confirm: no grounded draft", status=409)
            if not grounded.feasible:
                raise ServiceError(
                    "draft is not feasible",
                    status=409,
                    detail={
                        "errors": [
                            {"code": e.code.value, "message": e.message} for e in grounded.errors
                        ]
                    },
                )
            with self._engine_lock:
                if grounded.operation is RuleOperation.DELETE:
                    key = self._deployed_key(grounded.name)
                    if key is None:
                        raise ServiceError(f"no deployed rule named {grounded.name!r}", status=404)
                    self.engine.withdraw(key)
                    del self.rule_documents[key]
                    deployed_key = key
                else:
                    existing = self._deployed_key(grounded.name) if grounded.name else None
                    if existing is not None:
                        self.engine.withdraw(existing)
                        del self.rule_documents[existing]
                    try:
                        deployed_key = self.engine.deploy(grounded)
                    except DeploymentError as exc:
                        raise ServiceError(str(exc), status=409) from None
                    self.rule_documents[deployed_key] = serialize_rule_text(session.draft_nl)
            session.closed = True
            return {"deployed": deployed_key, "rounds": session.round, "operation": grounded.operation.value}

    def _deployed_key(self, name: str | None) -> str | None:
        if not name:
            return None
        for key, _ in self.engine.deployed():
            if key.lower() == name.lower():
                return key
        return None

    # -- rules and simulator ---------------------------------------------------

    def list_rules(self) -> list[dict]:
        return [
            {
                "name": key,
                "document": self.rule_documents.get(key),
                "grounded": grounded_to_dict(rule),
            }
            for key, rule in self.engine.deployed()
        ]

    def delete_rule(self, name: str) -> dict:
        with self._engine_lock:
            key = self._deployed_key(name)
            if key is None:
                raise ServiceError(f"no deployed rule named {name!r}", status=404)
            self.engine.withdraw(key)
            self.rule_documents.pop(key, None)
        return {"deleted": key}

    def inject_events(self, events: list[dict]) -> dict:
        try:
            parsed = sorted((SimEvent.from_dict(e) for e in events), key=lambda e: e.at)
        except (KeyError, ValueError, TypeError) as exc:
            raise ServiceError(f"bad event: {exc}") from None
        with self._engine_lock:
            try:
                executed = self.engine.inject_many(parsed)
            except EngineError as exc:
                raise ServiceError(str(exc)) from None
            return {"executed": [r.to_dict() for r in executed], "now": self.engine.clock.now}

    def advance(self, to: int) -> dict:
        with self._engine_lock:
            try:
                executed = self.engine.advance(to)
            except EngineError as exc:
                raise ServiceError(str(exc)) from None
            return {"executed": [r.to_dict() for r in executed], "now": self.engine.clock.now}

    def sim_state(self) -> dict:
        with self._engine_lock:
            return {"now": self.engine.clock.now, "states": self.engine.states()}

    def sim_trace(self) -> dict:
        with self._engine_lock:
            return {"trace": [r.to_dict() for r in self.engine.trace()]}


# --- HTTP layer ---------------------------------------------------------------


class ExpressionBody(BaseModel):
    expression: dict
    snapshot: dict = {}


class EditBody(BaseModel):
    document: str


class EventsBody(BaseModel):
    events: list[dict]


class AdvanceBody(BaseModel):
    to: int


def create_app(config: Config | None = None, service: RefinementService | None = None) -> FastAPI:
    if service is None:
        config = config or Config()
        service = RefinementService(Pipeline.from_config(config))
    app = FastAPI(title="awareauto")
    app.state.service = service

    def run(fn, *args):
        try:
            return fn(*args)
        except ServiceError as exc:
            raise HTTPException(status_code=exc.status, detail={"message": str(exc), **exc.detail})

    @app.post("/sessions", status_code=201)
    def create_session():
        return {"id": service.create_session().id}

    @app.get("/sessions/{session_id}")
    def get_session(session_id: str):
        return run(lambda: service.get_session(session_id).to_dict())

    @app.post("/sessions/{session_id}/expression")
    def post_expression(session_id: str, body: ExpressionBody):
        return run(service.submit_expression, session_id, body.expression, body.snapshot)

    @app.post("/sessions/{session_id}/edit")
    def post_edit(session_id: str, body: EditBody):
        return run(service.edit_rule_text, session_id, body.document)

    @app.post("/sessions/{session_id}/confirm")
    def post_confirm(session_id: str):
        return run(service.confirm, session_id)

    @app.get("/rules")
    def get_rules():
        return {"rules": service.list_rules()}

    @app.delete("/rules/{name}")
    def delete_rule(name: str):
        return run(service.delete_rule, name)

    @app.post("/sim/events")
    def post_events(body: EventsBody):
        return run(service.inject_events, body.events)

    @app.post("/sim/advance")
    def post_advance(body: AdvanceBody):
        return run(service.advance, body.to)

    @app.get("/sim/state")
    def get_state():
        return service.sim_state()

    @app.get("/sim/trace")
    def get_trace():
        return service.sim_trace()

    @app.get("/catalog")
    def get_catalog():
        from .context import catalog_to_dict

        return catalog_to_dict(service.pipeline.catalog)

    ui_dir = getattr(config, "ui_dir", None) if config else None
    if ui_dir and Path(ui_dir).is_dir():
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=ui_dir, html=True), name="ui")

    return app
