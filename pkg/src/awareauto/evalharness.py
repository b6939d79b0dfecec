"""Replay a labeled corpus through the pipeline and score it per class.

Correctness and completeness compare the stage-1 rule against the gold rule
structurally (the original grading was human judgment; the substitution is
a declared deviation, noted in the report). Executability and environmental
conformance come from grounding validation, with credit for declaring a
genuinely infeasible rule infeasible for the right reason.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path

from .context import ContextSnapshot, DeviceCatalog
from .grounding import validate_grounded
from .normalizer import UserExpression
from .pipeline import Pipeline
from .rules import GroundedRule, GroundingCode, NLRule, TriggerSpec, grounded_from_dict, grounded_to_dict
from .ruletext import parse_rule_text

COMPLEXITY_CLASSES = (
    "multi_parameter",
    "dynamic_parameters",
    "multimodal_parameters",
    "fuzzy_expression",
    "redundant_expressions",
    "complex_branch",
    "time_related_trigger",
    "time_dependent_action",
    "combination",
)

SCORE_FIELDS = ("correctness", "completeness", "executability", "env_conformance", "success")

_DEVIATION_NOTE = (
    "correctness/completeness are scored by structural comparison against "
    "gold labels (automated stand-in for human judgment)"
)


class CorpusError(ValueError):
    pass


@dataclass(frozen=True)
class EvalCase:
    id: str
    complexity: str
    expression: UserExpression
    snapshot: ContextSnapshot
    gold_nl: NLRule
    gold_grounded: GroundedRule | None = None
    gold_infeasible_reason: frozenset[GroundingCode] | None = None

    def __post_init__(self):
        if self.complexity not in COMPLEXITY_CLASSES:
            raise CorpusError(f"case {self.id}: unknown complexity {self.complexity!r}")
        if (self.gold_grounded is None) == (self.gold_infeasible_reason is None):
            raise CorpusError(
                f"case {self.id}: exactly one of gold_grounded / gold_infeasible_reason required"
            )


@dataclass(frozen=True)
class CaseScore:
    correctness: bool
    completeness: bool
    executability: bool
    env_conformance: bool

    @property
    def success(self) -> bool:
        return self.correctness and self.completeness and self.executability and self.env_conformance

    def value(self, field: str) -> bool:
        return self.success if field == "success" else getattr(self, field)


FAILED_SCORE = CaseScore(False, False, False, False)


# --- structural comparison of stage-1 rules ----------------------------------

_PUNCT = re.compile(r"[\s]+")


def _norm_text(text: str) -> str:
    return _PUNCT.sub(" ", text.strip().lower()).rstrip(".!?,;:")


def _trigger_key(trigger: TriggerSpec) -> tuple:
    return (trigger.mode.value, trigger.delay.seconds, _norm_text(trigger.description))


def _step_key(step) -> tuple:
    if step.is_wait:
        return ("wait", step.description.seconds)
    return ("command", _norm_text(step.description))


def _group_keys(rule: NLRule) -> list[tuple]:
    by_id = {t.id: _trigger_key(t) for t in rule.triggers}
    return sorted(
        (tuple(sorted(by_id[tid] for tid in g.trigger_ids)), tuple(_step_key(s) for s in g.steps))
        for g in rule.groups
    )


def nl_rules_match(a: NLRule, b: NLRule) -> bool:
    """Same operation, name, and group structure up to relabeling and order."""
    name_a = _norm_text(a.name) if a.name else None
    name_b = _norm_text(b.name) if b.name else None
    return (a.operation, name_a) == (b.operation, name_b) and _group_keys(a) == _group_keys(b)


def _multiset(items) -> dict:
    out: dict = {}
    for item in items:
        out[item] = out.get(item, 0) + 1
    return out


def nl_rule_covers(prediction: NLRule, gold: NLRule) -> bool:
    """Every gold trigger and action step has a counterpart in the prediction."""
    pred_triggers = _multiset(_trigger_key(t) for t in prediction.triggers)
    for key, count in _multiset(_trigger_key(t) for t in gold.triggers).items():
        if pred_triggers.get(key, 0) < count:
            return False
    pred_steps = _multiset(_step_key(s) for g in prediction.groups for s in g.steps)
    for key, count in _multiset(_step_key(s) for g in gold.groups for s in g.steps).items():
        if pred_steps.get(key, 0) < count:
            return False
    return True


# --- scoring ------------------------------------------------------------------


def score_case(
    case: EvalCase,
    predicted_nl: NLRule,
    predicted_grounded: GroundedRule,
    catalog: DeviceCatalog,
) -> CaseScore:
    validated = validate_grounded(catalog, predicted_grounded)
    gold_infeasible = case.gold_infeasible_reason is not None
    executability = validated.feasible or (gold_infeasible and not validated.feasible)
    if validated.feasible:
        env_conformance = True
    else:
        codes = frozenset(e.code for e in validated.errors)
        env_conformance = gold_infeasible and codes == case.gold_infeasible_reason
    return CaseScore(
        correctness=nl_rules_match(predicted_nl, case.gold_nl),
        completeness=nl_rule_covers(predicted_nl, case.gold_nl),
        executability=executability,
        env_conformance=env_conformance,
    )


# --- aggregation ----------------------------------------------------------------


def rate_percent(successes: int, total: int) -> float:
    if total == 0:
        raise ValueError("rate needs at least one case")
    return 100.0 * successes / total


def format_rate(value: float, decimals: int = 1) -> str:
    return f"{round(value, decimals):.{decimals}f}"


@dataclass(frozen=True)
class RowStats:
    count: int
    rates: dict  # field -> percentage

    @classmethod
    def from_scores(cls, scores: list[CaseScore]) -> "RowStats":
        return cls(
            count=len(scores),
            rates={
                field: rate_percent(sum(s.value(field) for s in scores), len(scores))
                for field in SCORE_FIELDS
            },
        )


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    complexity: str
    score: CaseScore
    error: str | None = None
    predicted_grounded: GroundedRule | None = None


@dataclass(frozen=True)
class EvalReport:
    classes: dict  # class name -> RowStats, in COMPLEXITY_CLASSES order
    overall: RowStats | None
    results: tuple[CaseResult, ...] = ()
    note: str = _DEVIATION_NOTE

    def to_dict(self) -> dict:
        def row(stats: RowStats) -> dict:
            return {"count": stats.count} | {
                field: round(stats.rates[field], 1) for field in SCORE_FIELDS
            }

        return {
            "note": self.note,
            "classes": {name: row(stats) for name, stats in self.classes.items()},
            "overall": row(self.overall) if self.overall else None,
            "cases": [
                {"id": r.case_id, "complexity": r.complexity, "error": r.error}
                | {field: r.score.value(field) for field in SCORE_FIELDS}
                for r in self.results
            ],
        }

    def render_table(self) -> str:
        if not self.classes:
            return "no cases\n"
        header1 = f"{'':34}{'Intent Consistency':28}{'Feasibility':32}"
        header2 = (
            f"{'Rule Type':34}{'Correctness':14}{'Completeness':14}"
            f"{'Executability':16}{'Env Conformance':16}{'Success Rate':12}"
        )
        lines = [f"# {self.note}", header1, header2, "-" * len(header2)]

        def row(label: str, stats: RowStats) -> str:
            cells = [format_rate(stats.rates[f]) for f in SCORE_FIELDS]
            return (
                f"{label + ' (' + str(stats.count) + ')':34}{cells[0]:14}{cells[1]:14}"
                f"{cells[2]:16}{cells[3]:16}{cells[4]:12}"
            )

        for name, stats in self.classes.items():
            lines.append(row(name, stats))
        lines.append("-" * len(header2))
        lines.append(row("Overall", self.overall))
        return "\n".join(lines) + "\n"


def run_corpus(cases: list[EvalCase], pipeline: Pipeline) -> EvalReport:
    """Score every case; pipeline failures count as full-false, never abort."""
    results: list[CaseResult] = []
    for case in sorted(cases, key=lambda c: c.id):
        try:
            outcome = pipeline.run(case.expression, case.snapshot)
            score = score_case(case, outcome.nl_rule, outcome.grounded, pipeline.catalog)
            results.append(CaseResult(case.id, case.complexity, score, None, outcome.grounded))
        except Exception as exc:  # noqa: BLE001 - per-case failures are data
            results.append(CaseResult(case.id, case.complexity, FAILED_SCORE, f"{type(exc).__name__}: {exc}"))
    return build_report(results)


def build_report(results: list[CaseResult]) -> EvalReport:
    by_class: dict[str, list[CaseScore]] = {}
    for result in results:
        by_class.setdefault(result.complexity, []).append(result.score)
    classes = {
        name: RowStats.from_scores(scores)
        for name in COMPLEXITY_CLASSES
        if (scores := by_class.get(name))
    }
    overall = RowStats.from_scores([r.score for r in results]) if results else None
    return EvalReport(classes=classes, overall=overall, results=tuple(results))


# --- corpus file ------------------------------------------------------------------


def load_corpus(path: str | Path) -> list[EvalCase]:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise CorpusError(f"cannot read corpus {path}: {exc}") from None
    if not isinstance(doc, list):
        raise CorpusError("corpus must be a JSON array of cases")
    cases = []
    seen: set[str] = set()
    for i, entry in enumerate(doc):
        try:
            case = case_from_dict(entry)
        except (KeyError, ValueError, TypeError) as exc:
            raise CorpusError(f"case #{i}: {exc}") from None
        if case.id in seen:
            raise CorpusError(f"duplicate case id {case.id!r}")
        seen.add(case.id)
        cases.append(case)
    return cases


def case_from_dict(entry: dict) -> EvalCase:
    reason = entry.get("gold_infeasible_reason")
    return EvalCase(
        id=str(entry["id"]),
        complexity=str(entry["complexity"]),
        expression=UserExpression.from_dict(entry["input"]["expression"]),
        snapshot=ContextSnapshot.from_dict(entry["input"].get("snapshot", {})),
        gold_nl=parse_rule_text(entry["gold_nl"]),
        gold_grounded=(
            grounded_from_dict(entry["gold_grounded"]) if "gold_grounded" in entry else None
        ),
        gold_infeasible_reason=(
            frozenset(GroundingCode(code) for code in reason) if reason is not None else None
        ),
    )


def case_to_dict(case: EvalCase, gold_nl_text: str) -> dict:
    out = {
        "id": case.id,
        "complexity": case.complexity,
        "input": {"expression": case.expression.to_dict(), "snapshot": case.snapshot.to_dict()},
        "gold_nl": gold_nl_text,
    }
    if case.gold_grounded is not None:
        out["gold_grounded"] = grounded_to_dict(case.gold_grounded)
    else:
        out["gold_infeasible_reason"] = sorted(c.value for c in case.gold_infeasible_reason)
    return out
