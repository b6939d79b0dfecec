"""Turn structured multimodal input into the standardized expression text.

The sentence follows the fixed template "The user [posture/activity] on
[position], [orientation], [gesture] towards [target], and says ..." with
absent parts dropped cleanly, and is prefixed by an environment block
carrying time, temperature, and humidity plus any known device states.
"""

from __future__ import annotations

from dataclasses import dataclass

from .context import ContextSnapshot


class ExpressionError(ValueError):
    pass


@dataclass(frozen=True)
class UserExpression:
    speech: str
    posture_activity: str | None = None
    position: str | None = None
    orientation: str | None = None
    gesture: str | None = None
    gesture_target: str | None = None

    def __post_init__(self):
        if not self.speech.strip():
            raise ExpressionError("speech must be non-empty")
        if self.gesture_target is not None and self.gesture is None:
            raise ExpressionError("gesture_target requires a gesture")

    @classmethod
    def from_dict(cls, doc: dict) -> "UserExpression":
        if not isinstance(doc, dict) or "speech" not in doc:
            raise ExpressionError("expression JSON needs a 'speech' field")
        fields = ("speech", "posture_activity", "position", "orientation", "gesture", "gesture_target")
        unknown = set(doc) - set(fields)
        if unknown:
            raise ExpressionError(f"unknown expression fields: {sorted(unknown)}")
        return cls(**{k: doc[k] for k in fields if doc.get(k) is not None})

    def to_dict(self) -> dict:
        return {
            "speech": self.speech,
            "posture_activity": self.posture_activity,
            "position": self.position,
            "orientation": self.orientation,
            "gesture": self.gesture,
            "gesture_target": self.gesture_target,
        }


def _number(value: float) -> str:
    return str(int(value)) if float(value).is_integer() else str(value)


def render_environment_block(snapshot: ContextSnapshot) -> str:
    lines = [
        f"Context: time={snapshot.time} {snapshot.weekday}, "
        f"temperature={_number(snapshot.temperature)}C, humidity={_number(snapshot.humidity)}%."
    ]
    states = [
        f"{target}.{interface}={value}"
        for target in sorted(snapshot.device_states)
        for interface, value in sorted(snapshot.device_states[target].items())
    ]
    if states:
        lines.append("Device states: " + ", ".join(states) + ".")
    return "\n".join(lines)


def render_expression_sentence(expr: UserExpression) -> str:
    segments: list[str] = []
    if expr.posture_activity and expr.position:
        segments.append(f"{expr.posture_activity} on {expr.position}")
    elif expr.posture_activity:
        segments.append(expr.posture_activity)
    elif expr.position:
        segments.append(f"on {expr.position}")
    if expr.orientation:
        segments.append(expr.orientation)
    if expr.gesture:
        if expr.gesture_target:
            segments.append(f"{expr.gesture} towards {expr.gesture_target}")
        else:
            segments.append(expr.gesture)
    speech = f'says, "{expr.speech}"'
    if segments:
        return "The user " + ", ".join(segments) + ", and " + speech
    return "The user " + speech


def normalize_expression(expr: UserExpression, snapshot: ContextSnapshot) -> str:
    """Environment block plus the filled template sentence."""
    return render_environment_block(snapshot) + "\n" + render_expression_sentence(expr)
