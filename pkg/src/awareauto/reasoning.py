"""Stage 1: reasoning. Build the prompt, call the model, parse the rule.

The system prompt has four segments in a fixed order: output format (the
rule-text grammar), generation details, scenario (layout only, never
interface names), and few-shot cases. One automatic repair round runs when
the model output fails to parse; after that the failure is surfaced with
the raw text so the user can react to it.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .context import ContextSnapshot, DeviceCatalog, render_scenario_text
from .llm import CompletionRequest, complete
from .rules import NLRule
from .ruletext import GRAMMAR, RuleTextError, parse_rule_text

_EXAMPLE_MARK = "=== EXAMPLE"


class PromptBuildError(ValueError):
    pass


class UnparseableOutputError(Exception):
    """Model output did not parse even after one repair round."""

    def __init__(self, raw_text: str, reason: str):
        super().__init__(f"model output is not a valid rule document: {reason}")
        self.raw_text = raw_text
        self.reason = reason


@dataclass(frozen=True)
class FewShotExample:
    input_text: str
    output_text: str


def _template_path(name: str) -> Path:
    return Path(str(resources.files("awareauto").joinpath(f"data/templates/{name}")))


def load_examples(path: str | Path | None = None) -> list[FewShotExample]:
    """Read input/output example pairs from the examples template file."""
    path = Path(path) if path else _template_path("reasoning_examples.txt")
    examples = []
    for block in path.read_text(encoding="utf-8").split(_EXAMPLE_MARK):
        if "INPUT:" not in block or "OUTPUT:" not in block:
            continue
        _, rest = block.split("INPUT:", 1)
        input_text, output_text = rest.split("OUTPUT:", 1)
        examples.append(FewShotExample(input_text.strip(), output_text.strip()))
    return examples


def load_prompt_template(name: str, path: str | Path | None = None) -> str:
    return (Path(path) if path else _template_path(name)).read_text(encoding="utf-8")


def build_reasoning_prompt(
    catalog: DeviceCatalog,
    snapshot: ContextSnapshot | None,
    examples: list[FewShotExample],
    template: str | None = None,
    details: str | None = None,
) -> str:
    """Fill the reasoning template; segment order is format, details,
    scenario, examples."""
    if not examples:
        raise PromptBuildError("reasoning prompt needs at least one few-shot example")
    template = template if template is not None else load_prompt_template("reasoning_prompt.txt")
    details = details if details is not None else load_prompt_template("reasoning_details.txt")
    scenario = render_scenario_text(catalog, snapshot, "layout_only")
    rendered_examples = "\n".join(
        f"Example {i}:\nInput:\n{ex.input_text}\nOutput:\n{ex.output_text}\n"
        for i, ex in enumerate(examples, start=1)
    )
    prompt = template
    for placeholder, value in (
        ("{{format}}", GRAMMAR),
        ("{{details}}", details.strip()),
        ("{{scenario}}", scenario.strip()),
        ("{{examples}}", rendered_examples.strip()),
    ):
        if placeholder not in prompt:
            raise PromptBuildError(f"reasoning template is missing {placeholder}")
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


def infer_rule(
    backend,
    prompt: str,
    normalized_expression: str,
    temperature: float = 0.0,
    max_tokens: int = 2048,
) -> NLRule:
    """Run the reasoning model on a normalized expression and parse it."""
    raw = complete(
        backend,
        CompletionRequest(prompt, normalized_expression, temperature, max_tokens),
    )
    try:
        return parse_rule_text(_strip_fences(raw))
    except RuleTextError as first_error:
        repair = (
            f"{normalized_expression}\n\n"
            f"Your previous answer could not be parsed ({first_error}).\n"
            f"Previous answer:\n{raw}\n"
            "Reply again with exactly one rule document in the required format "
            "and nothing else."
        )
        raw2 = complete(backend, CompletionRequest(prompt, repair, temperature, max_tokens))
        try:
            return parse_rule_text(_strip_fences(raw2))
        except RuleTextError as second_error:
            raise UnparseableOutputError(raw2, str(second_error)) from None
