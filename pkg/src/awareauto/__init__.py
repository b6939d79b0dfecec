"""Natural-expression smart-home automation toolkit.

Two-stage LLM pipeline (reasoning to a standardized rule document, then
grounding to device TA-pairs), catalog-backed feasibility validation, a
deterministic discrete-event simulator, a refinement HTTP service, and an
evaluation harness over a labeled corpus.
"""

from .context import ContextSnapshot, DeviceCatalog, load_bundled_catalog, load_catalog
from .engine import ActionRecord, Engine, SimEvent
from .normalizer import UserExpression, normalize_expression
from .pipeline import Pipeline
from .rules import (
    Duration,
    GroundedAction,
    GroundedRule,
    GroundedTrigger,
    GroundingCode,
    GroundingError,
    NLRule,
    RuleOperation,
    TAPair,
    TriggerMode,
    canonicalize,
    parse_action_tuple,
    parse_trigger_tuple,
    rules_equivalent,
)
from .ruletext import parse_rule_text, serialize_rule_text

__version__ = "0.1.0"

__all__ = [
    "ActionRecord",
    "ContextSnapshot",
    "DeviceCatalog",
    "Duration",
    "Engine",
    "GroundedAction",
    "GroundedRule",
    "GroundedTrigger",
    "GroundingCode",
    "GroundingError",
    "NLRule",
    "Pipeline",
    "RuleOperation",
    "SimEvent",
    "TAPair",
    "TriggerMode",
    "UserExpression",
    "canonicalize",
    "load_bundled_catalog",
    "load_catalog",
    "normalize_expression",
    "parse_action_tuple",
    "parse_rule_text",
    "parse_trigger_tuple",
    "rules_equivalent",
    "serialize_rule_text",
]
