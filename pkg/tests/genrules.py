"""Seeded random (rule, event trace) instances for oracle-equivalence runs."""

from __future__ import annotations

import random

from awareauto.engine import Engine, SimEvent
from awareauto.rules import (
    Duration,
    GroundedAction,
    GroundedRule,
    GroundedTrigger,
    RuleOperation,
    TAPair,
    TriggerMode,
)

TRIGGER_POOL = [
    ("lamp a", "switch", ["on", "off"]),
    ("lamp b", "switch", ["on", "off"]),
    ("plug c", "switch", ["on", "off"]),
    ("sense", "motion", ["true", "false"]),
    ("sense", "level", [">50", "<50", ">=30", "70", "!=20"]),
]
ACTION_POOL = [("lamp a", "switch"), ("lamp b", "switch"), ("plug c", "switch")]
DELAYS = [0, 0, 0, 1, 5, 30, 60, 300, 900]
WAITS = ["1s", "5s", "30s", "2mins", "10mins", "15mins"]


def random_trigger(rng: random.Random) -> GroundedTrigger:
    target, interface, conditions = rng.choice(TRIGGER_POOL)
    condition = rng.choice(conditions)
    if rng.random() < 0.4:
        return GroundedTrigger(target, interface, condition, TriggerMode.EVENT)
    return GroundedTrigger(
        target, interface, condition, TriggerMode.STATE, Duration(rng.choice(DELAYS))
    )


def random_action(rng: random.Random) -> GroundedAction:
    if rng.random() < 0.2:
        return GroundedAction("timer", "wait", rng.choice(WAITS))
    target, interface = rng.choice(ACTION_POOL)
    return GroundedAction(target, interface, rng.choice(["on", "off"]))


def random_rule(rng: random.Random) -> GroundedRule:
    pairs = []
    for _ in range(rng.randint(1, 2)):
        triggers = tuple(random_trigger(rng) for _ in range(rng.randint(1, 3)))
        actions = tuple(random_action(rng) for _ in range(rng.randint(1, 4)))
        pairs.append(TAPair(triggers, actions))
    return GroundedRule(RuleOperation.CREATE, None, True, tuple(pairs))


def random_events(rng: random.Random, horizon: int, count: int) -> list[SimEvent]:
    times = sorted(rng.randint(0, horizon) for _ in range(count))
    events = []
    for at in times:
        target, interface, _ = rng.choice(TRIGGER_POOL)
        if interface == "level":
            value: object = rng.randint(0, 100)
        elif interface == "motion":
            value = rng.choice(["true", "false"])
        else:
            value = rng.choice(["on", "off"])
        events.append(SimEvent(at, target, interface, value))
    return events


def random_instance(rng: random.Random):
    horizon = rng.randint(600, 3600)
    rules = [(f"r{i}", random_rule(rng)) for i in range(rng.randint(1, 2))]
    events = random_events(rng, horizon, rng.randint(0, 20))
    return rules, events, horizon


def engine_trace(catalog, rules, events, horizon, initial_states=None) -> list[tuple]:
    engine = Engine(catalog, initial_states)
    for key, rule in rules:
        engine.deploy(rule, key=key)
    engine.inject_many(events)
    engine.advance(horizon)
    return [(r.at, r.target, r.interface, r.parameter, r.rule, r.ta_pair) for r in engine.trace()]
