"""Rule data model shared by both pipeline stages.

Two representations live here: the natural-language rule produced by the
reasoning stage (operation, triggers, grouped actions) and the grounded rule
produced by the grounding stage (TA-pairs of device tuples). Values are
immutable after construction; parsing and serialization are pure functions.
"""

from __future__ import annotations

import enum
import json
import re
from dataclasses import dataclass, field, replace

_DURATION_RE = re.compile(r"^(\d+)\s*(s|min|mins|h)$", re.IGNORECASE)
_UNIT_SECONDS = {"s": 1, "min": 60, "mins": 60, "h": 3600}


class DurationError(ValueError):
    """Raised for a duration string that does not match ``<int><unit>``."""


@dataclass(frozen=True, order=True)
class Duration:
    """Time span stored canonically in whole seconds.

    Surface forms use the units s, min, mins, and h. Serialization picks the
    largest unit that divides evenly, so 600 seconds renders as "10mins".
    """

    seconds: int = 0

    def __post_init__(self):
        if self.seconds < 0:
            raise ValueError(f"duration must be non-negative, got {self.seconds}")

    @classmethod
    def parse(cls, text: str) -> "Duration":
        m = _DURATION_RE.match(text.strip())
        if not m:
            raise DurationError(f"bad duration {text!r}: expected <int><unit> with unit s/min/mins/h")
        return cls(int(m.group(1)) * _UNIT_SECONDS[m.group(2).lower()])

    def __str__(self) -> str:
        s = self.seconds
        if s and s % 3600 == 0:
            return f"{s // 3600}h"
        if s and s % 60 == 0:
            n = s // 60
            return f"{n}min" if n == 1 else f"{n}mins"
        return f"{s}s"

    def __bool__(self) -> bool:
        return self.seconds > 0


class RuleOperation(enum.Enum):
    CREATE = "create"
    MODIFY = "modify"
    DELETE = "delete"


class TriggerMode(enum.Enum):
    EVENT = "event"
    STATE = "state"


@dataclass(frozen=True)
class TriggerSpec:
    """One atomized natural-language condition (T1, T2, ...)."""

    id: str
    mode: TriggerMode
    description: str
    delay: Duration = Duration(0)

    def __post_init__(self):
        if self.mode is TriggerMode.EVENT and self.delay.seconds != 0:
            raise ValueError(f"trigger {self.id}: event triggers cannot carry a delay")
        if not self.description.strip():
            raise ValueError(f"trigger {self.id}: empty description")


@dataclass(frozen=True)
class ActionStep:
    """One step in an action group: command text, or a wait Duration."""

    id: str
    description: str | Duration

    def __post_init__(self):
        if isinstance(self.description, Duration):
            if self.description.seconds <= 0:
                raise ValueError(f"step {self.id}: wait must be positive")
        elif not self.description.strip():
            raise ValueError(f"step {self.id}: empty command text")

    @property
    def is_wait(self) -> bool:
        return isinstance(self.description, Duration)

    @property
    def kind(self) -> str:
        return "wait" if self.is_wait else "command"


@dataclass(frozen=True)
class ActionGroup:
    """Ordered action steps bound to the set of triggers that release them."""

    id: str
    trigger_ids: tuple[str, ...]
    steps: tuple[ActionStep, ...]

    def __post_init__(self):
        if not self.trigger_ids:
            raise ValueError(f"group {self.id}: needs at least one trigger id")
        if not self.steps:
            raise ValueError(f"group {self.id}: needs at least one step")


@dataclass(frozen=True)
class NLRule:
    """Reasoning-stage output: operation, optional name, triggers, groups."""

    operation: RuleOperation
    name: str | None
    triggers: tuple[TriggerSpec, ...] = ()
    groups: tuple[ActionGroup, ...] = ()

    def __post_init__(self):
        ids = [t.id for t in self.triggers]
        if len(ids) != len(set(ids)):
            raise ValueError("duplicate trigger ids")
        known = set(ids)
        for g in self.groups:
            missing = [t for t in g.trigger_ids if t not in known]
            if missing:
                raise ValueError(f"group {g.id}: unknown trigger ids {missing}")
        if self.operation is RuleOperation.CREATE and not self.groups:
            raise ValueError("create rules need at least one action group")

    def warnings(self) -> list[str]:
        """Non-fatal issues, currently triggers no group refers to."""
        used = {t for g in self.groups for t in g.trigger_ids}
        return [
            f"trigger {t.id} is not referenced by any action group"
            for t in self.triggers
            if t.id not in used
        ]


class TupleFormatError(ValueError):
    """Raised for malformed hyphen-joined trigger/action display strings."""


_STATE_DELAY_RE = re.compile(r"^state\((.+)\)$", re.IGNORECASE)


@dataclass(frozen=True)
class GroundedTrigger:
    """Trigger quadruple: target, query interface, condition, mode (+delay).

    Display form joins the fields with "-", rendering a held state as
    ``state(<duration>)``. The JSON form is authoritative for parsing since
    targets such as "air conditioner" may contain spaces.
    """

    target: str
    interface: str
    condition: str
    mode: TriggerMode
    delay: Duration = Duration(0)

    def __post_init__(self):
        if self.mode is TriggerMode.EVENT and self.delay.seconds != 0:
            raise ValueError("event triggers cannot carry a delay")
        for name, value in (("target", self.target), ("interface", self.interface), ("condition", self.condition)):
            if not value.strip():
                raise ValueError(f"grounded trigger: empty {name}")
        if "-" in self.target:
            raise ValueError(f"target {self.target!r} may not contain '-'")

    def display(self) -> str:
        if self.mode is TriggerMode.STATE and self.delay:
            mode = f"state({self.delay})"
        else:
            mode = self.mode.value
        return f"{self.target}-{self.interface}-{self.condition}-{mode}"


@dataclass(frozen=True)
class GroundedAction:
    """Action triple: target, operation interface, single parameter."""

    target: str
    interface: str
    parameter: str

    def __post_init__(self):
        for name, value in (("target", self.target), ("interface", self.interface), ("parameter", self.parameter)):
            if not value.strip():
                raise ValueError(f"grounded action: empty {name}")
        if "-" in self.target:
            raise ValueError(f"target {self.target!r} may not contain '-'")

    def display(self) -> str:
        return f"{self.target}-{self.interface}-{self.parameter}"


def parse_trigger_tuple(display: str) -> GroundedTrigger:
    """Parse "TV-switch-on-event" style display strings.

    Exactly four hyphen-separated fields are required; anything else is a
    TupleFormatError.
    """
    parts = display.split("-")
    if len(parts) != 4:
        raise TupleFormatError(f"trigger tuple {display!r}: expected 4 '-'-separated fields, got {len(parts)}")
    target, interface, condition, mode_text = (p.strip() for p in parts)
    delay = Duration(0)
    m = _STATE_DELAY_RE.match(mode_text)
    if m:
        mode = TriggerMode.STATE
        delay = Duration.parse(m.group(1))
    elif mode_text.lower() == "state":
        mode = TriggerMode.STATE
    elif mode_text.lower() == "event":
        mode = TriggerMode.EVENT
    else:
        raise TupleFormatError(f"trigger tuple {display!r}: bad mode {mode_text!r}")
    try:
        return GroundedTrigger(target, interface, condition, mode, delay)
    except ValueError as exc:
        raise TupleFormatError(f"trigger tuple {display!r}: {exc}") from exc


def parse_action_tuple(display: str) -> GroundedAction:
    """Parse "air conditioner-switch-on" style display strings."""
    parts = display.split("-")
    if len(parts) != 3:
        raise TupleFormatError(f"action tuple {display!r}: expected 3 '-'-separated fields, got {len(parts)}")
    target, interface, parameter = (p.strip() for p in parts)
    try:
        return GroundedAction(target, interface, parameter)
    except ValueError as exc:
        raise TupleFormatError(f"action tuple {display!r}: {exc}") from exc


@dataclass(frozen=True)
class TAPair:
    """One trigger set plus the ordered actions it releases."""

    triggers: tuple[GroundedTrigger, ...]
    actions: tuple[GroundedAction, ...]

    def __post_init__(self):
        if not self.triggers:
            raise ValueError("TA-pair needs at least one trigger")
        if not self.actions:
            raise ValueError("TA-pair needs at least one action")


class GroundingCode(enum.Enum):
    UNKNOWN_TARGET = "UNKNOWN_TARGET"
    UNKNOWN_INTERFACE = "UNKNOWN_INTERFACE"
    BAD_CONDITION = "BAD_CONDITION"
    BAD_PARAMETER = "BAD_PARAMETER"
    UNSUPPORTED_CAPABILITY = "UNSUPPORTED_CAPABILITY"
    MALFORMED_OUTPUT = "MALFORMED_OUTPUT"


@dataclass(frozen=True)
class GroundingError:
    """One reason a rule cannot be deployed, reported to the user as data."""

    code: GroundingCode
    message: str
    target: str | None = None
    interface: str | None = None

    def __post_init__(self):
        if not self.message.strip():
            raise ValueError("grounding error needs a message")
        if self.code is GroundingCode.UNKNOWN_INTERFACE and (self.target is None or self.interface is None):
            raise ValueError("UNKNOWN_INTERFACE errors must name target and interface")


@dataclass(frozen=True)
class GroundedRule:
    """Grounding-stage output: TA-pairs plus a resolved feasibility verdict."""

    operation: RuleOperation
    name: str | None
    feasible: bool
    ta_pairs: tuple[TAPair, ...] = ()
    errors: tuple[GroundingError, ...] = ()

    def __post_init__(self):
        if not self.feasible and not self.errors:
            raise ValueError("infeasible rules must carry at least one error")
        if self.feasible and self.errors:
            raise ValueError("feasible rules must not carry errors")
        if self.feasible and self.operation is RuleOperation.CREATE and not self.ta_pairs:
            raise ValueError("feasible create rules need at least one TA-pair")


# --- JSON wire format -------------------------------------------------------
#
# Field names below are the external contract consumed by the grounding LLM
# and the automation engine; do not rename them.


def grounded_to_dict(rule: GroundedRule) -> dict:
    return {
        "operation": rule.operation.value,
        "name": rule.name,
        "feasible": rule.feasible,
        "ta_pairs": [
            {
                "triggers": [
                    {
                        "target": t.target,
                        "interface": t.interface,
                        "condition": t.condition,
                        "mode": t.mode.value,
                        "delay_s": t.delay.seconds,
                    }
                    for t in pair.triggers
                ],
                "actions": [
                    {"target": a.target, "interface": a.interface, "parameter": a.parameter}
                    for a in pair.actions
                ],
            }
            for pair in rule.ta_pairs
        ],
        "errors": [
            {
                "code": e.code.value,
                "target": e.target,
                "interface": e.interface,
                "message": e.message,
            }
            for e in rule.errors
        ],
    }


class GroundedRuleFormatError(ValueError):
    """Raised when a grounded-rule JSON document violates the schema."""


def _require(cond: bool, msg: str):
    if not cond:
        raise GroundedRuleFormatError(msg)


def grounded_from_dict(doc: dict) -> GroundedRule:
    _require(isinstance(doc, dict), "grounded rule must be a JSON object")
    for key in ("operation", "feasible", "ta_pairs", "errors"):
        _require(key in doc, f"missing field {key!r}")
    try:
        operation = RuleOperation(doc["operation"])
    except ValueError:
        raise GroundedRuleFormatError(f"bad operation {doc['operation']!r}") from None
    name = doc.get("name")
    _require(name is None or isinstance(name, str), "name must be a string or null")
    _require(isinstance(doc["feasible"], bool), "feasible must be a boolean")
    _require(isinstance(doc["ta_pairs"], list), "ta_pairs must be an array")
    _require(isinstance(doc["errors"], list), "errors must be an array")

    pairs = []
    for i, p in enumerate(doc["ta_pairs"]):
        _require(isinstance(p, dict), f"ta_pairs[{i}] must be an object")
        triggers = []
        for j, t in enumerate(p.get("triggers", [])):
            _require(isinstance(t, dict), f"ta_pairs[{i}].triggers[{j}] must be an object")
            try:
                triggers.append(
                    GroundedTrigger(
                        target=str(t["target"]),
                        interface=str(t["interface"]),
                        condition=str(t["condition"]),
                        mode=TriggerMode(t["mode"]),
                        delay=Duration(int(t.get("delay_s", 0))),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise GroundedRuleFormatError(f"ta_pairs[{i}].triggers[{j}]: {exc}") from None
        actions = []
        for j, a in enumerate(p.get("actions", [])):
            _require(isinstance(a, dict), f"ta_pairs[{i}].actions[{j}] must be an object")
            try:
                actions.append(
                    GroundedAction(
                        target=str(a["target"]),
                        interface=str(a["interface"]),
                        parameter=str(a["parameter"]),
                    )
                )
            except (KeyError, ValueError, TypeError) as exc:
                raise GroundedRuleFormatError(f"ta_pairs[{i}].actions[{j}]: {exc}") from None
        try:
            pairs.append(TAPair(tuple(triggers), tuple(actions)))
        except ValueError as exc:
            raise GroundedRuleFormatError(f"ta_pairs[{i}]: {exc}") from None

    errors = []
    for i, e in enumerate(doc["errors"]):
        _require(isinstance(e, dict), f"errors[{i}] must be an object")
        try:
            errors.append(
                GroundingError(
                    code=GroundingCode(e["code"]),
                    message=str(e["message"]),
                    target=e.get("target"),
                    interface=e.get("interface"),
                )
            )
        except (KeyError, ValueError, TypeError) as exc:
            raise GroundedRuleFormatError(f"errors[{i}]: {exc}") from None

    try:
        return GroundedRule(
            operation=operation,
            name=name,
            feasible=doc["feasible"],
            ta_pairs=tuple(pairs),
            errors=tuple(errors),
        )
    except ValueError as exc:
        raise GroundedRuleFormatError(str(exc)) from None


def grounded_to_json(rule: GroundedRule) -> str:
    return json.dumps(grounded_to_dict(rule), indent=2, ensure_ascii=False)


def grounded_from_json(text: str) -> GroundedRule:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GroundedRuleFormatError(f"not valid JSON: {exc}") from None
    return grounded_from_dict(doc)


# --- Canonical form and equivalence ----------------------------------------


def _canon_text(value: str) -> str:
    return value.strip().lower()


def trigger_sort_key(trigger: GroundedTrigger) -> tuple:
    return (
        _canon_text(trigger.target),
        _canon_text(trigger.interface),
        _canon_text(trigger.condition),
        trigger.mode.value,
        trigger.delay.seconds,
    )


def pair_sort_key(pair: TAPair) -> tuple:
    return tuple(sorted(trigger_sort_key(t) for t in pair.triggers))


def canonicalize(rule: GroundedRule) -> GroundedRule:
    """Normalize a grounded rule for comparison.

    Names and tuple fields are lowercased and trimmed, triggers within each
    pair are sorted, pairs are sorted by their sorted trigger lists, and
    errors are sorted. Action order is semantics and stays untouched.
    Idempotent by construction.
    """
    pairs = []
    for pair in rule.ta_pairs:
        triggers = tuple(
            sorted(
                (
                    replace(
                        t,
                        target=_canon_text(t.target),
                        interface=_canon_text(t.interface),
                        condition=_canon_text(t.condition),
                    )
                    for t in pair.triggers
                ),
                key=trigger_sort_key,
            )
        )
        actions = tuple(
            replace(
                a,
                target=_canon_text(a.target),
                interface=_canon_text(a.interface),
                parameter=_canon_text(a.parameter),
            )
            for a in pair.actions
        )
        pairs.append(TAPair(triggers, actions))
    pairs.sort(key=pair_sort_key)
    errors = tuple(
        sorted(
            rule.errors,
            key=lambda e: (e.code.value, e.target or "", e.interface or "", e.message),
        )
    )
    return GroundedRule(
        operation=rule.operation,
        name=_canon_text(rule.name) if rule.name is not None else None,
        feasible=rule.feasible,
        ta_pairs=tuple(pairs),
        errors=errors,
    )


def rules_equivalent(a: GroundedRule, b: GroundedRule) -> bool:
    """Structural equality of canonical forms.

    Names compare case-insensitively (via canonicalization). Infeasible
    rules compare by their error code sets instead of their partial pairs.
    """
    ca, cb = canonicalize(a), canonicalize(b)
    if (ca.operation, ca.name, ca.feasible) != (cb.operation, cb.name, cb.feasible):
        return False
    if not ca.feasible:
        return {e.code for e in ca.errors} == {e.code for e in cb.errors}
    return ca.ta_pairs == cb.ta_pairs


# --- Condition expressions ---------------------------------------------------

_COMPARATORS = ("<=", ">=", "!=", "<", ">", "=")


def split_condition(condition: str) -> tuple[str, str]:
    """Split a condition into (comparator, operand); bare literals mean "="."""
    text = condition.strip()
    for op in _COMPARATORS:
        if text.startswith(op):
            return op, text[len(op):].strip()
    return "=", text


def _as_number(value) -> float | None:
    if isinstance(value, bool):
        return None
    if isinstance(value, (int, float)):
        return float(value)
    try:
        return float(str(value).strip())
    except ValueError:
        return None


def _value_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value).strip()


def condition_matches(condition: str, value) -> bool:
    """Evaluate a condition expression against a live interface value.

    Bare literals and "=" compare case-insensitively (numerically when both
    sides parse as numbers); "!=" negates that; ordering comparators require
    both sides to be numeric.
    """
    op, operand = split_condition(condition)
    if op in ("=", "!="):
        lhs, rhs = _as_number(value), _as_number(operand)
        if lhs is not None and rhs is not None:
            equal = lhs == rhs
        else:
            equal = _value_text(value).lower() == operand.lower()
        return equal if op == "=" else not equal
    lhs, rhs = _as_number(value), _as_number(operand)
    if lhs is None or rhs is None:
        return False
    return {"<": lhs < rhs, "<=": lhs <= rhs, ">": lhs > rhs, ">=": lhs >= rhs}[op]
