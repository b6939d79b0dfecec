"""Stage 2: grounding. Map a natural-language rule to device tuples and
resolve feasibility against the catalog.

The model only ever sees the rule document, never the raw user expression,
so each stage's accuracy stays separately measurable. Validation is total:
hallucinated targets, interfaces, conditions, and parameters become typed
GroundingError records that reach the user, never exceptions.
"""

from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .context import DeviceCatalog, DomainKind, LookupResult, lookup_interface, render_scenario_text
from .engine import NEAREST_RE
from .llm import CompletionRequest, complete
from .rules import (
    Duration,
    GroundedRule,
    GroundedTrigger,
    GroundingCode,
    GroundingError,
    NLRule,
    RuleOperation,
    TAPair,
    TriggerMode,
    grounded_from_dict,
    GroundedRuleFormatError,
    split_condition,
)
from .ruletext import serialize_rule_text

DEFAULT_TRIGGER_TARGET = "VoiceAssistant"
DEFAULT_TRIGGER_INTERFACE = "ruleName"


def _template(name: str) -> str:
    return Path(str(resources.files("awareauto").joinpath(f"data/templates/{name}"))).read_text(
        encoding="utf-8"
    )


def build_grounding_prompt(catalog: DeviceCatalog, template: str | None = None) -> str:
    """Fill the grounding template: output contract, layout plus full
    interface listing, and the worked conversion example last."""
    template = template if template is not None else _template("grounding_prompt.txt")
    scenario = render_scenario_text(catalog, None, "layout_and_interfaces")
    prompt = template
    for placeholder, value in (
        ("{{scenario}}", scenario.strip()),
        ("{{example}}", _template("grounding_example.txt").strip()),
    ):
        if placeholder not in prompt:
            raise ValueError(f"grounding template is missing {placeholder}")
        prompt = prompt.replace(placeholder, value)
    return prompt


def _strip_fences(text: str) -> str:
    text = text.strip()
    if text.startswith("```"):
        lines = text.splitlines()
        if lines[-1].strip().startswith("```"):
            lines = lines[1:-1]
        else:
            lines = lines[1:]
        text = "\n".join(lines).strip()
    return text


def _normalize_model_doc(doc: dict) -> dict:
    """Repair harmless inconsistencies the model tends to produce."""
    if not isinstance(doc, dict):
        return doc
    doc = dict(doc)
    doc.setdefault("errors", [])
    doc.setdefault("ta_pairs", [])
    if doc.get("errors"):
        doc["feasible"] = False
    if (
        doc.get("feasible")
        and doc.get("operation") == "create"
        and not doc.get("ta_pairs")
    ):
        doc["feasible"] = False
        doc["errors"] = [
            {
                "code": "MALFORMED_OUTPUT",
                "target": None,
                "interface": None,
                "message": "grounding produced no TA-pairs for a create rule",
            }
        ]
    return doc


def _malformed(rule: NLRule, raw: str, reason: str) -> GroundedRule:
    return GroundedRule(
        operation=rule.operation,
        name=rule.name,
        feasible=False,
        ta_pairs=(),
        errors=(
            GroundingError(
                GroundingCode.MALFORMED_OUTPUT,
                f"grounding output was not a valid rule JSON ({reason}); raw output: {raw[:500]}",
            ),
        ),
    )


def ensure_default_trigger(rule: GroundedRule) -> GroundedRule:
    """Named rules own an implicit voice trigger; materialize it if absent.

    The synthetic pair repeats the rule's actions in pair order, so saying
    the rule's name runs the whole automation.
    """
    if not rule.name or not rule.ta_pairs:
        return rule
    for pair in rule.ta_pairs:
        for trigger in pair.triggers:
            if (
                trigger.target.lower() == DEFAULT_TRIGGER_TARGET.lower()
                and trigger.interface.lower() == DEFAULT_TRIGGER_INTERFACE.lower()
            ):
                return rule
    voice = GroundedTrigger(
        target=DEFAULT_TRIGGER_TARGET,
        interface=DEFAULT_TRIGGER_INTERFACE,
        condition=rule.name,
        mode=TriggerMode.EVENT,
    )
    actions = tuple(a for pair in rule.ta_pairs for a in pair.actions)
    synthetic = TAPair(triggers=(voice,), actions=actions)
    return GroundedRule(
        operation=rule.operation,
        name=rule.name,
        feasible=rule.feasible,
        ta_pairs=rule.ta_pairs + (synthetic,),
        errors=rule.errors,
    )


def ground_rule(
    backend,
    prompt: str,
    rule: NLRule,
    catalog: DeviceCatalog,
    temperature: float = 0.0,
    max_tokens: int = 2048,
) -> GroundedRule:
    """Ground one NLRule: model call, JSON decode (with one repair round),
    default-trigger insertion, then full validation."""
    document = serialize_rule_text(rule)
    raw = complete(backend, CompletionRequest(prompt, document, temperature, max_tokens))
    grounded = _decode(raw)
    if grounded is None:
        repair = (
            f"{document}\n"
            "Your previous answer was not valid rule JSON.\n"
            f"Previous answer:\n{raw}\n"
            "Reply again with exactly one JSON object in the required schema and nothing else."
        )
        raw = complete(backend, CompletionRequest(prompt, repair, temperature, max_tokens))
        grounded = _decode(raw)
    if grounded is None:
        return _malformed(rule, raw, "after one repair round")
    if grounded.name is None and rule.name is not None:
        grounded = GroundedRule(
            grounded.operation, rule.name, grounded.feasible, grounded.ta_pairs, grounded.errors
        )
    grounded = ensure_default_trigger(grounded)
    return validate_grounded(catalog, grounded)


def _decode(raw: str) -> GroundedRule | None:
    try:
        doc = json.loads(_strip_fences(raw))
    except json.JSONDecodeError:
        return None
    try:
        return grounded_from_dict(_normalize_model_doc(doc))
    except GroundedRuleFormatError:
        return None


# --- validation --------------------------------------------------------------


def _domain_error(kind: str, what: str, domain) -> str:
    return f"{what} does not fit the {kind} ({domain.describe()})"


def _check_condition(trigger: GroundedTrigger, domain) -> str | None:
    op, operand = split_condition(trigger.condition)
    if domain.kind is DomainKind.ENUM:
        if op not in ("=", "!="):
            return f"comparator {op!r} is not valid for a choice of {', '.join(domain.values)}"
        if not domain.contains(operand):
            return _domain_error("return values", f"condition value {operand!r}", domain)
    elif domain.kind is DomainKind.NUMERIC:
        if not domain.contains(operand):
            return _domain_error("return range", f"condition value {operand!r}", domain)
    else:
        if op not in ("=", "!="):
            return f"comparator {op!r} is not valid for a free-text value"
        if not operand:
            return "condition value is empty"
    return None


def _validate_trigger(catalog: DeviceCatalog, trigger: GroundedTrigger) -> GroundingError | None:
    if trigger.target.strip().startswith("@"):
        return GroundingError(
            GroundingCode.UNKNOWN_TARGET,
            f"dynamic targets such as {trigger.target!r} are not supported in triggers",
            target=trigger.target,
        )
    result, itf = lookup_interface(catalog, trigger.target, trigger.interface, "query")
    if result is LookupResult.UNKNOWN_TARGET:
        return GroundingError(
            GroundingCode.UNKNOWN_TARGET,
            f"no device or sensor named {trigger.target!r}",
            target=trigger.target,
        )
    if result is LookupResult.UNKNOWN_INTERFACE:
        return GroundingError(
            GroundingCode.UNKNOWN_INTERFACE,
            f"{trigger.target!r} has no query interface {trigger.interface!r}",
            target=trigger.target,
            interface=trigger.interface,
        )
    if result is LookupResult.WRONG_KIND:
        return GroundingError(
            GroundingCode.UNSUPPORTED_CAPABILITY,
            f"{trigger.interface!r} on {trigger.target!r} is an operation, not a query, "
            "so it cannot be watched by a trigger",
            target=trigger.target,
            interface=trigger.interface,
        )
    problem = _check_condition(trigger, itf.returns)
    if problem:
        return GroundingError(
            GroundingCode.BAD_CONDITION,
            f"trigger {trigger.display()!r}: {problem}",
            target=trigger.target,
            interface=trigger.interface,
        )
    return None


def _validate_action(catalog: DeviceCatalog, action) -> GroundingError | None:
    target = action.target.strip()
    if target.lower() == "timer":
        if action.interface.strip().lower() != "wait":
            return GroundingError(
                GroundingCode.UNKNOWN_INTERFACE,
                f"the timer only supports 'wait', not {action.interface!r}",
                target="timer",
                interface=action.interface,
            )
        try:
            delay = Duration.parse(action.parameter)
        except ValueError:
            return GroundingError(
                GroundingCode.BAD_PARAMETER,
                f"timer wait needs a duration like '10mins', got {action.parameter!r}",
                target="timer",
                interface="wait",
            )
        if not delay:
            return GroundingError(
                GroundingCode.BAD_PARAMETER,
                "timer waits must be positive",
                target="timer",
                interface="wait",
            )
        return None

    nearest = NEAREST_RE.match(target)
    if target.startswith("@") and not nearest:
        return GroundingError(
            GroundingCode.UNKNOWN_TARGET,
            f"bad dynamic target {target!r}; expected @nearest(<device-kind>, user)",
            target=target,
        )
    if nearest:
        kind = nearest.group(1).strip().lower()
        candidates = [
            dev
            for dev in catalog.devices
            if kind in dev.target.lower() and dev.interface(action.interface, "operation")
        ]
        if not candidates:
            return GroundingError(
                GroundingCode.UNKNOWN_TARGET,
                f"no {kind!r} device offers operation {action.interface!r}",
                target=target,
                interface=action.interface,
            )
        for dev in candidates:
            itf = dev.interface(action.interface, "operation")
            if itf.params and not itf.params[0].domain.contains(action.parameter):
                return GroundingError(
                    GroundingCode.BAD_PARAMETER,
                    f"parameter {action.parameter!r} is not valid for {dev.target!r} "
                    f"({itf.params[0].domain.describe()})",
                    target=dev.target,
                    interface=action.interface,
                )
        return None

    result, itf = lookup_interface(catalog, target, action.interface, "operation")
    if result is LookupResult.UNKNOWN_TARGET:
        return GroundingError(
            GroundingCode.UNKNOWN_TARGET,
            f"no device named {target!r}",
            target=target,
        )
    if result is LookupResult.UNKNOWN_INTERFACE:
        return GroundingError(
            GroundingCode.UNKNOWN_INTERFACE,
            f"{target!r} has no operation interface {action.interface!r}",
            target=target,
            interface=action.interface,
        )
    if result is LookupResult.WRONG_KIND:
        return GroundingError(
            GroundingCode.UNSUPPORTED_CAPABILITY,
            f"{action.interface!r} on {target!r} is a query, not an operation, "
            "so it cannot be commanded",
            target=target,
            interface=action.interface,
        )
    if itf.params and not itf.params[0].domain.contains(action.parameter):
        return GroundingError(
            GroundingCode.BAD_PARAMETER,
            f"parameter {action.parameter!r} is not valid for {target!r}.{action.interface} "
            f"({itf.params[0].domain.describe()})",
            target=target,
            interface=action.interface,
        )
    return None


def validate_grounded(catalog: DeviceCatalog, rule: GroundedRule) -> GroundedRule:
    """Resolve feasibility: every trigger and action is checked against the
    catalog and each failure becomes one error record. Total and idempotent;
    carried-over errors (for example the model's own infeasibility reasons)
    are preserved."""
    errors: list[GroundingError] = list(rule.errors)
    for pair in rule.ta_pairs:
        for trigger in pair.triggers:
            problem = _validate_trigger(catalog, trigger)
            if problem:
                errors.append(problem)
        for action in pair.actions:
            problem = _validate_action(catalog, action)
            if problem:
                errors.append(problem)
    if rule.operation is RuleOperation.CREATE and not rule.ta_pairs and not errors:
        errors.append(
            GroundingError(
                GroundingCode.MALFORMED_OUTPUT,
                "grounding produced no TA-pairs for a create rule",
            )
        )
    unique: list[GroundingError] = []
    for error in errors:
        if error not in unique:
            unique.append(error)
    feasible = not unique
    return GroundedRule(
        operation=rule.operation,
        name=rule.name,
        feasible=feasible,
        ta_pairs=rule.ta_pairs,
        errors=tuple(unique),
    )
