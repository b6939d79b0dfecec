"""Line-oriented rule-text grammar: the reasoning stage's output format.

Document shape (serialization is bit-exact; parsing tolerates extra
whitespace and keyword case):

    OPERATION: CREATE|MODIFY|DELETE
    NAME: <text>|NONE
    TRIGGERS:
      T<i> | EVENT | <text>
      T<i> | STATE | <text>
      T<i> | STATE(<int><unit>) | <text>
    ACTIONS:
      G<k> WHEN T<i>[,T<j>...]:
        A<m> | <text>
        A<m> | WAIT <int><unit>
"""

from __future__ import annotations

import re

from .rules import (
    ActionGroup,
    ActionStep,
    Duration,
    DurationError,
    NLRule,
    RuleOperation,
    TriggerMode,
    TriggerSpec,
)


GRAMMAR = """\
OPERATION: CREATE|MODIFY|DELETE
NAME: <text>|NONE
TRIGGERS:
  T<i> | EVENT | <text>
  T<i> | STATE | <text>
  T<i> | STATE(<int><unit>) | <text>
ACTIONS:
  G<k> WHEN T<i>[,T<j>...]:
    A<m> | <text>
    A<m> | WAIT <int><unit>
"""


class RuleTextError(Exception):
    """Parse failure with a 1-based line and column position."""

    def __init__(self, message: str, line: int, column: int = 1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.reason = message
        self.line = line
        self.column = column


class RuleSyntaxError(RuleTextError):
    pass


class DuplicateIdError(RuleTextError):
    pass


class DanglingTriggerError(RuleTextError):
    pass


_TRIGGER_RE = re.compile(
    r"^(T\d+)\s*\|\s*(EVENT|STATE(?:\((.+?)\))?)\s*\|\s*(.*)$", re.IGNORECASE
)
_GROUP_RE = re.compile(r"^(G\d+)\s+WHEN\s+(T\d+(?:\s*,\s*T\d+)*)\s*:\s*$", re.IGNORECASE)
_STEP_RE = re.compile(r"^(A\d+)\s*\|\s*(.*)$", re.IGNORECASE)
_WAIT_RE = re.compile(r"^WAIT\s+(\S+)\s*$", re.IGNORECASE)


def _split_header(raw: str, keyword: str, lineno: int) -> str:
    prefix = keyword + ":"
    if not raw.lstrip().upper().startswith(prefix):
        raise RuleSyntaxError(f"expected '{prefix} ...'", lineno)
    return raw.lstrip()[len(prefix):].strip()


def parse_rule_text(text: str) -> NLRule:
    """Parse a rule-text document into an NLRule, validating all invariants."""
    lines = [(i + 1, raw) for i, raw in enumerate(text.splitlines()) if raw.strip()]
    if not lines:
        raise RuleSyntaxError("empty document", 1)
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise RuleSyntaxError("unexpected end of document", lines[-1][0] + 1)
        item = lines[pos]
        pos += 1
        return item

    lineno, raw = take()
    op_text = _split_header(raw, "OPERATION", lineno)
    try:
        operation = RuleOperation(op_text.lower())
    except ValueError:
        raise RuleSyntaxError(
            f"bad operation {op_text!r}, expected CREATE, MODIFY, or DELETE",
            lineno,
            raw.upper().find("OPERATION:") + len("OPERATION:") + 1,
        ) from None

    lineno, raw = take()
    name_text = _split_header(raw, "NAME", lineno)
    if not name_text:
        raise RuleSyntaxError("NAME needs a value or NONE", lineno)
    name = None if name_text.upper() == "NONE" else name_text

    lineno, raw = take()
    if raw.strip().upper() != "TRIGGERS:":
        raise RuleSyntaxError("expected 'TRIGGERS:'", lineno)

    triggers: list[TriggerSpec] = []
    seen_t: set[str] = set()
    while pos < len(lines) and lines[pos][1].strip().upper() != "ACTIONS:":
        lineno, raw = take()
        stripped = raw.strip()
        m = _TRIGGER_RE.match(stripped)
        if not m:
            raise RuleSyntaxError(
                f"bad trigger line {stripped!r}", lineno, len(raw) - len(raw.lstrip()) + 1
            )
        tid, mode_text, delay_text, desc = m.group(1), m.group(2), m.group(3), m.group(4)
        tid = tid.upper()
        if tid in seen_t:
            raise DuplicateIdError(f"duplicate trigger id {tid}", lineno)
        seen_t.add(tid)
        if mode_text.upper().startswith("EVENT"):
            mode, delay = TriggerMode.EVENT, Duration(0)
        else:
            mode = TriggerMode.STATE
            try:
                delay = Duration.parse(delay_text) if delay_text else Duration(0)
            except DurationError as exc:
                raise RuleSyntaxError(str(exc), lineno) from None
        if not desc.strip():
            raise RuleSyntaxError(f"trigger {tid} has no description", lineno)
        triggers.append(TriggerSpec(tid, mode, desc.strip(), delay))

    if pos >= len(lines):
        raise RuleSyntaxError("expected 'ACTIONS:'", lines[-1][0] + 1)
    take()  # ACTIONS:

    groups: list[ActionGroup] = []
    seen_g: set[str] = set()
    current: tuple[str, tuple[str, ...], list[ActionStep], int] | None = None

    def close_group():
        nonlocal current
        if current is None:
            return
        gid, tids, steps, at_line = current
        if not steps:
            raise RuleSyntaxError(f"group {gid} has no action steps", at_line)
        groups.append(ActionGroup(gid, tids, tuple(steps)))
        current = None

    while pos < len(lines):
        lineno, raw = take()
        stripped = raw.strip()
        gm = _GROUP_RE.match(stripped)
        if gm:
            close_group()
            gid = gm.group(1).upper()
            if gid in seen_g:
                raise DuplicateIdError(f"duplicate group id {gid}", lineno)
            seen_g.add(gid)
            tids = tuple(t.strip().upper() for t in gm.group(2).split(","))
            for tid in tids:
                if tid not in seen_t:
                    raise DanglingTriggerError(
                        f"group {gid} refers to unknown trigger {tid}", lineno
                    )
            if len(tids) != len(set(tids)):
                raise DuplicateIdError(f"group {gid} lists a trigger twice", lineno)
            current = (gid, tids, [], lineno)
            continue
        sm = _STEP_RE.match(stripped)
        if sm:
            if current is None:
                raise RuleSyntaxError("action step before any group header", lineno)
            sid, body = sm.group(1).upper(), sm.group(2).strip()
            if any(s.id == sid for s in current[2]):
                raise DuplicateIdError(f"duplicate step id {sid} in group {current[0]}", lineno)
            wm = _WAIT_RE.match(body)
            if wm:
                try:
                    step = ActionStep(sid, Duration.parse(wm.group(1)))
                except (DurationError, ValueError) as exc:
                    raise RuleSyntaxError(str(exc), lineno) from None
            else:
                if not body:
                    raise RuleSyntaxError(f"step {sid} has no text", lineno)
                step = ActionStep(sid, body)
            current[2].append(step)
            continue
        raise RuleSyntaxError(f"unrecognized line {stripped!r}", lineno)

    close_group()
    try:
        return NLRule(operation, name, tuple(triggers), tuple(groups))
    except ValueError as exc:
        raise RuleSyntaxError(str(exc), lines[-1][0]) from None


def _mode_token(trigger: TriggerSpec) -> str:
    if trigger.mode is TriggerMode.EVENT:
        return "EVENT"
    if trigger.delay:
        return f"STATE({trigger.delay})"
    return "STATE"


def serialize_rule_text(rule: NLRule) -> str:
    """Render an NLRule back to its canonical document form."""
    out = [
        f"OPERATION: {rule.operation.value.upper()}",
        f"NAME: {rule.name if rule.name is not None else 'NONE'}",
        "TRIGGERS:",
    ]
    for t in rule.triggers:
        out.append(f"  {t.id} | {_mode_token(t)} | {t.description}")
    out.append("ACTIONS:")
    for g in rule.groups:
        out.append(f"  {g.id} WHEN {','.join(g.trigger_ids)}:")
        for s in g.steps:
            if s.is_wait:
                out.append(f"    {s.id} | WAIT {s.description}")
            else:
                out.append(f"    {s.id} | {s.description}")
    return "\n".join(out) + "\n"
