"""End-to-end wiring of the two inference stages.

One Pipeline owns the catalog, the backend, and the prompt machinery; the
CLI, the evaluation harness, and the refinement service all run through it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import Config, make_backend
from .context import ContextSnapshot, DeviceCatalog, load_catalog
from .grounding import build_grounding_prompt, ground_rule
from .normalizer import UserExpression, normalize_expression
from .reasoning import build_reasoning_prompt, infer_rule, load_examples
from .rules import GroundedRule, NLRule, RuleOperation


@dataclass(frozen=True)
class PipelineResult:
    normalized: str
    nl_rule: NLRule
    grounded: GroundedRule


def compose_user_message(normalized: str, draft_text: str | None = None) -> str:
    """Stage-1 user message; correction rounds carry the current draft."""
    if draft_text:
        return f"Current rule:\n{draft_text.rstrip()}\n{normalized}"
    return normalized


def apply_modification(draft: NLRule, modification: NLRule) -> NLRule:
    """MODIFY documents carry the complete revised rule body; applying one
    replaces the draft's triggers and groups while the draft stays a
    to-be-created rule."""
    return NLRule(
        operation=RuleOperation.CREATE,
        name=modification.name if modification.name is not None else draft.name,
        triggers=modification.triggers,
        groups=modification.groups,
    )


class Pipeline:
    def __init__(self, catalog: DeviceCatalog, backend, temperature: float = 0.0, max_tokens: int = 2048):
        self.catalog = catalog
        self.backend = backend
        self.temperature = temperature
        self.max_tokens = max_tokens
        self.examples = load_examples()
        self.grounding_prompt = build_grounding_prompt(catalog)

    @classmethod
    def from_config(cls, config: Config) -> "Pipeline":
        return cls(
            catalog=load_catalog(config.catalog_path),
            backend=make_backend(config),
            temperature=config.temperature,
            max_tokens=config.max_tokens,
        )

    def reasoning_prompt(self, snapshot: ContextSnapshot) -> str:
        return build_reasoning_prompt(self.catalog, snapshot, self.examples)

    def infer(
        self, expression: UserExpression, snapshot: ContextSnapshot, draft_text: str | None = None
    ) -> tuple[str, NLRule]:
        """Normalize and run stage 1; returns (normalized text, rule).

        A current draft document is prepended for correction rounds so the
        model revises the rule instead of starting over.
        """
        normalized = normalize_expression(expression, snapshot)
        message = compose_user_message(normalized, draft_text)
        rule = infer_rule(
            self.backend,
            self.reasoning_prompt(snapshot),
            message,
            self.temperature,
            self.max_tokens,
        )
        return normalized, rule

    def ground(self, rule: NLRule) -> GroundedRule:
        return ground_rule(
            self.backend,
            self.grounding_prompt,
            rule,
            self.catalog,
            self.temperature,
            self.max_tokens,
        )

    def run(
        self, expression: UserExpression, snapshot: ContextSnapshot, draft_text: str | None = None
    ) -> PipelineResult:
        normalized, nl_rule = self.infer(expression, snapshot, draft_text)
        grounded = self.ground(nl_rule)
        return PipelineResult(normalized, nl_rule, grounded)
