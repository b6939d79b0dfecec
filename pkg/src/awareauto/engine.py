"""Deterministic discrete-event home simulator and TA-pair rule executor.

Virtual time is integer seconds with no wall-clock coupling. Every instant
the engine visits is processed in three phases:

  1. external stimuli at that instant, in injection order (state updates;
     injected events additionally count as event-trigger occurrences),
  2. due WAIT continuations, ordered by deployment order, then TA-pair
     index, then step index,
  3. one evaluation sweep over all TA-pairs in deployment order.

Within a TA-pair all triggers are conjunctive. A state trigger with delay d
is satisfied once its condition has held continuously for d seconds; any
falsification resets the hold. An event trigger is satisfied only at the
instant a matching stimulus is injected. Pairs containing an event trigger
fire at such instants when every other trigger is satisfied; all-state
pairs fire on the edge where the conjunction becomes satisfied and re-arm
only after it turns false again. Commands executed during the sweep become
visible to earlier pairs at the next second, so the engine schedules a
follow-up sweep whenever a sweep changed device state.

TA-pairs execute in canonical sorted order (see rules.pair_sort_key), which
makes equivalent rules produce identical traces.
"""

from __future__ import annotations

import heapq
import json
import re
from dataclasses import dataclass, field

from .context import DeviceCatalog, LookupResult, lookup_interface
from .rules import (
    Duration,
    GroundedRule,
    GroundedTrigger,
    TAPair,
    TriggerMode,
    condition_matches,
    pair_sort_key,
)

NEAREST_RE = re.compile(r"^@nearest\(\s*([^,()]+?)\s*,\s*user\s*\)$", re.IGNORECASE)

_TIMER_TARGET = "timer"
_UNSET = object()


class EngineError(Exception):
    pass


class DeploymentError(EngineError):
    """Deploy rejected: infeasible rule, duplicate name, or no pairs."""

    def __init__(self, message: str, errors=()):
        super().__init__(message)
        self.errors = tuple(errors)


@dataclass(frozen=True)
class SimEvent:
    """External stimulus: a query interface takes a value at an instant."""

    at: int
    target: str
    interface: str
    value: object

    @classmethod
    def from_dict(cls, doc: dict) -> "SimEvent":
        return cls(int(doc["at"]), str(doc["target"]), str(doc["interface"]), doc["value"])

    def to_dict(self) -> dict:
        return {"at": self.at, "target": self.target, "interface": self.interface, "value": self.value}


@dataclass(frozen=True)
class ActionRecord:
    at: int
    target: str
    interface: str
    parameter: str
    rule: str
    ta_pair: int

    def to_dict(self) -> dict:
        return {
            "at": self.at,
            "target": self.target,
            "interface": self.interface,
            "parameter": self.parameter,
            "rule": self.rule,
            "ta_pair": self.ta_pair,
        }


def trace_to_jsonl(trace: list[ActionRecord]) -> str:
    return "".join(json.dumps(r.to_dict(), ensure_ascii=False) + "\n" for r in trace)


class VirtualClock:
    """Monotonically non-decreasing integer-second clock."""

    def __init__(self):
        self.now = 0

    def advance_to(self, t: int):
        if t < self.now:
            raise EngineError(f"clock cannot move backwards ({t} < {self.now})")
        self.now = t


@dataclass
class _TriggerState:
    trigger: GroundedTrigger
    hold_start: int | None = None


@dataclass
class _PairState:
    pair: TAPair
    triggers: list[_TriggerState]
    armed: bool = True


@dataclass
class _Deployed:
    key: str
    order: int
    rule: GroundedRule
    pairs: list[_PairState] = field(default_factory=list)


class Engine:
    """Single-owner rule executor; all mutations run on the caller's thread."""

    def __init__(self, catalog: DeviceCatalog, initial_states: dict | None = None):
        self.catalog = catalog
        self.clock = VirtualClock()
        self._states: dict[tuple[str, str], object] = {}
        self._display: dict[tuple[str, str], tuple[str, str]] = {}
        self._rules: dict[str, _Deployed] = {}
        self._order = 0
        self._agenda: list[tuple] = []  # (time, seq, kind, payload)
        self._seq = 0
        self._trace: list[ActionRecord] = []
        self._sweep_changed = False
        for target, interfaces in (initial_states or {}).items():
            for interface, value in interfaces.items():
                self.set_state(target, interface, value, at=0)

    # -- deployment ---------------------------------------------------------

    def deploy(self, rule: GroundedRule, key: str | None = None) -> str:
        if not rule.feasible:
            reasons = "; ".join(e.message for e in rule.errors)
            raise DeploymentError(f"rule is not feasible: {reasons}", rule.errors)
        if not rule.ta_pairs:
            raise DeploymentError("rule has no TA-pairs to deploy")
        key = key or rule.name or f"rule-{self._order + 1}"
        if key.lower() in {k.lower() for k in self._rules}:
            raise DeploymentError(f"a rule named {key!r} is already deployed")
        for pair in rule.ta_pairs:
            for action in pair.actions:
                if action.target.strip().lower() == _TIMER_TARGET:
                    try:
                        delay = Duration.parse(action.parameter)
                    except ValueError as exc:
                        raise DeploymentError(f"bad timer parameter: {exc}") from None
                    if not delay:
                        raise DeploymentError("timer waits must be positive")
        self._order += 1
        deployed = _Deployed(key=key, order=self._order, rule=rule)
        for pair in sorted(rule.ta_pairs, key=pair_sort_key):
            states = [_TriggerState(t) for t in pair.triggers]
            ps = _PairState(pair, states)
            for ts in states:
                if ts.trigger.mode is TriggerMode.STATE:
                    value = self._states.get(self._skey(ts.trigger.target, ts.trigger.interface), _UNSET)
                    if value is not _UNSET and condition_matches(ts.trigger.condition, value):
                        ts.hold_start = self.clock.now
                        if ts.trigger.delay:
                            self._schedule(self.clock.now + ts.trigger.delay.seconds, "sweep", None)
            ps.armed = not self._pair_state_conjunction(ps, self.clock.now, require_all_state=True)
            deployed.pairs.append(ps)
        self._rules[key] = deployed
        return key

    def withdraw(self, key: str) -> None:
        found = next((k for k in self._rules if k.lower() == key.lower()), None)
        if found is None:
            raise EngineError(f"no deployed rule named {key!r}")
        del self._rules[found]  # agenda entries for it are skipped lazily

    def deployed(self) -> list[tuple[str, GroundedRule]]:
        return [(d.key, d.rule) for d in sorted(self._rules.values(), key=lambda d: d.order)]

    # -- stimuli and time ---------------------------------------------------

    def inject(self, event: SimEvent) -> list[ActionRecord]:
        return self.inject_many([event])

    def inject_many(self, events: list[SimEvent]) -> list[ActionRecord]:
        """Apply events in order; equal-time events share one instant."""
        mark = len(self._trace)
        for event in events:
            self._check_boundary(event.target, event.interface)
            if event.at < self.clock.now:
                raise EngineError(f"event at {event.at} is in the past (now {self.clock.now})")
        i = 0
        while i < len(events):
            j = i
            while j < len(events) and events[j].at == events[i].at:
                j += 1
            batch = events[i:j]
            self._run_agenda_before(batch[0].at)
            self.clock.advance_to(batch[0].at)
            self._process_instant(batch[0].at, [(e, True) for e in batch])
            i = j
        return self._trace[mark:]

    def set_state(self, target: str, interface: str, value, at: int | None = None) -> None:
        """Silent state update: visible to state triggers, not an occurrence."""
        self._check_boundary(target, interface)
        at = self.clock.now if at is None else at
        if at < self.clock.now:
            raise EngineError(f"set_state at {at} is in the past (now {self.clock.now})")
        self._run_agenda_before(at)
        self.clock.advance_to(at)
        self._process_instant(at, [(SimEvent(at, target, interface, value), False)])

    def advance(self, to: int) -> list[ActionRecord]:
        if to < self.clock.now:
            raise EngineError(f"cannot advance to {to}, now is {self.clock.now}")
        mark = len(self._trace)
        self._run_agenda_before(to + 1)
        self.clock.advance_to(to)
        return self._trace[mark:]

    def trace(self) -> list[ActionRecord]:
        return list(self._trace)

    def states(self) -> dict:
        out: dict[str, dict[str, object]] = {}
        for key, value in sorted(self._states.items()):
            target, interface = self._display[key]
            out.setdefault(target, {})[interface] = value
        return out

    # -- internals ----------------------------------------------------------

    @staticmethod
    def _skey(target: str, interface: str) -> tuple[str, str]:
        return (target.strip().lower(), interface.strip().lower())

    def _check_boundary(self, target: str, interface: str) -> None:
        result, _ = lookup_interface(self.catalog, target, interface, "query")
        if result is not LookupResult.FOUND:
            raise EngineError(f"{target}.{interface} is not a known query interface ({result.value})")

    def _schedule(self, when: int, kind: str, payload) -> None:
        self._seq += 1
        heapq.heappush(self._agenda, (when, self._seq, kind, payload))

    def _run_agenda_before(self, limit: int) -> None:
        """Process every scheduled instant strictly earlier than limit."""
        while self._agenda and self._agenda[0][0] < limit:
            t = self._agenda[0][0]
            self.clock.advance_to(t)
            self._process_instant(t, [])

    def _process_instant(self, t: int, stimuli: list[tuple[SimEvent, bool]]) -> None:
        occurrences = []
        for event, is_occurrence in stimuli:
            self._apply_value(event.target, event.interface, event.value, t)
            if is_occurrence:
                occurrences.append((*self._skey(event.target, event.interface), event.value))

        due = []
        while self._agenda and self._agenda[0][0] <= t:
            due.append(heapq.heappop(self._agenda))
        waits = sorted(
            (item for item in due if item[2] == "wait"),
            key=lambda item: (item[3][0], item[3][2], item[3][3]),
        )
        for _, _, _, (order, key, pair_idx, step_idx) in waits:
            deployed = self._rules.get(key)
            if deployed is None or deployed.order != order:
                continue  # withdrawn (or replaced) rule: timer is dead
            self._run_steps(deployed, pair_idx, step_idx, t)

        self._sweep(t, occurrences)

    def _sweep(self, t: int, occurrences: list[tuple]) -> None:
        self._sweep_changed = False
        for deployed in sorted(self._rules.values(), key=lambda d: d.order):
            for pair_idx, ps in enumerate(deployed.pairs):
                self._evaluate_pair(deployed, pair_idx, ps, t, occurrences)
        if self._sweep_changed:
            self._schedule(t + 1, "sweep", None)

    def _evaluate_pair(self, deployed: _Deployed, pair_idx: int, ps: _PairState, t: int, occurrences) -> None:
        event_triggers = [ts for ts in ps.triggers if ts.trigger.mode is TriggerMode.EVENT]
        states_ok = all(
            self._state_satisfied(ts, t)
            for ts in ps.triggers
            if ts.trigger.mode is TriggerMode.STATE
        )
        if event_triggers:
            if states_ok and all(self._occurred(ts.trigger, occurrences) for ts in event_triggers):
                self._run_steps(deployed, pair_idx, 0, t, in_sweep=True)
        elif states_ok:
            if ps.armed:
                ps.armed = False
                self._run_steps(deployed, pair_idx, 0, t, in_sweep=True)
        else:
            ps.armed = True

    def _pair_state_conjunction(self, ps: _PairState, t: int, require_all_state: bool) -> bool:
        if require_all_state and any(ts.trigger.mode is TriggerMode.EVENT for ts in ps.triggers):
            return False
        return all(
            self._state_satisfied(ts, t)
            for ts in ps.triggers
            if ts.trigger.mode is TriggerMode.STATE
        )

    @staticmethod
    def _state_satisfied(ts: _TriggerState, t: int) -> bool:
        return ts.hold_start is not None and t - ts.hold_start >= ts.trigger.delay.seconds

    @staticmethod
    def _occurred(trigger: GroundedTrigger, occurrences) -> bool:
        key = (trigger.target.strip().lower(), trigger.interface.strip().lower())
        return any(
            (target, interface) == key and condition_matches(trigger.condition, value)
            for target, interface, value in occurrences
        )

    def _run_steps(self, deployed: _Deployed, pair_idx: int, start: int, t: int, in_sweep: bool = False) -> None:
        actions = deployed.pairs[pair_idx].pair.actions
        for idx in range(start, len(actions)):
            action = actions[idx]
            if action.target.strip().lower() == _TIMER_TARGET:
                delay = Duration.parse(action.parameter)
                self._schedule(t + delay.seconds, "wait", (deployed.order, deployed.key, pair_idx, idx + 1))
                return
            target = self._resolve_target(action.target, action.interface)
            self._trace.append(
                ActionRecord(t, target, action.interface, action.parameter, deployed.key, pair_idx)
            )
            changed = self._apply_command_effect(target, action.interface, action.parameter, t)
            if changed and in_sweep:
                self._sweep_changed = True

    def _resolve_target(self, target: str, interface: str) -> str:
        m = NEAREST_RE.match(target.strip())
        if not m:
            return target
        kind = m.group(1).strip().lower()
        candidates = [
            dev
            for dev in self.catalog.devices
            if kind in dev.target.lower() and dev.interface(interface, "operation")
        ]
        if not candidates:
            raise EngineError(f"no {kind!r} device offers operation {interface!r}")
        user_pos = self._states.get(("usersensor", "position"))
        if isinstance(user_pos, str) and user_pos.strip():
            for dev in candidates:
                if user_pos.strip().lower() in dev.position.lower():
                    return dev.target
        return candidates[0].target

    def _apply_command_effect(self, target: str, interface: str, parameter: str, t: int) -> bool:
        """Reflect a command into the matching query state, if one exists.

        The query interface with the same name is updated; operations named
        set<X> fall back to the query named <x>. Commands with no matching
        query (announce, playMusic, ...) leave state untouched.
        """
        device = self.catalog.device(target)
        if device is None:
            return False
        for name in self._effect_query_names(interface):
            if device.interface(name, "query") is not None:
                return self._apply_value(target, name, parameter, t)
        return False

    @staticmethod
    def _effect_query_names(interface: str) -> list[str]:
        names = [interface]
        if interface.lower().startswith("set") and len(interface) > 3:
            stripped = interface[3:]
            names.append(stripped[0].lower() + stripped[1:])
        return names

    def _apply_value(self, target: str, interface: str, value, t: int) -> bool:
        key = self._skey(target, interface)
        old = self._states.get(key, _UNSET)
        self._states[key] = value
        if key not in self._display:
            device = self.catalog.device(target)
            itf = device.interface(interface, "query") if device else None
            self._display[key] = (device.target if device else target, itf.name if itf else interface)
        for deployed in self._rules.values():
            for ps in deployed.pairs:
                for ts in ps.triggers:
                    trigger = ts.trigger
                    if trigger.mode is not TriggerMode.STATE:
                        continue
                    if self._skey(trigger.target, trigger.interface) != key:
                        continue
                    if condition_matches(trigger.condition, value):
                        if ts.hold_start is None:
                            ts.hold_start = t
                            if trigger.delay:
                                self._schedule(t + trigger.delay.seconds, "sweep", None)
                    else:
                        ts.hold_start = None
        return old is _UNSET or old != value
