import json
from importlib import resources

import pytest

from awareauto.engine import DeploymentError, Engine, EngineError, SimEvent, trace_to_jsonl
from awareauto.rules import (
    Duration,
    GroundedAction,
    GroundedRule,
    GroundedTrigger,
    GroundingCode,
    GroundingError,
    RuleOperation,
    TAPair,
    TriggerMode,
    grounded_from_dict,
)


def trig(target, interface, condition, mode=TriggerMode.STATE, delay=0):
    return GroundedTrigger(target, interface, condition, mode, Duration(delay))


def act(target, interface, parameter):
    return GroundedAction(target, interface, parameter)


def rule(pairs, name=None):
    return GroundedRule(RuleOperation.CREATE, name, True, tuple(pairs))


def tv_light_rule():
    # when the TV turns on, turn on lamp a
    return rule([TAPair((trig("lamp b", "switch", "on", TriggerMode.EVENT),), (act("lamp a", "switch", "on"),))])


def no_activity_rule(delay=600):
    return rule([TAPair((trig("sense", "motion", "false", delay=delay),), (act("lamp a", "switch", "off"),))])


def ac_timer_rule():
    return rule(
        [
            TAPair(
                (trig("lamp b", "switch", "on", TriggerMode.EVENT),),
                (act("plug c", "switch", "on"), act("timer", "wait", "10mins"), act("plug c", "switch", "off")),
            )
        ]
    )


def simple_trace(engine):
    return [(r.at, r.target, r.parameter) for r in engine.trace()]


class TestDeploy:
    def test_deploy_leaves_trace_empty(self, lab_catalog):
        engine = Engine(lab_catalog)
        key = engine.deploy(tv_light_rule(), key="tv light")
        assert key == "tv light"
        assert engine.trace() == []
        assert [k for k, _ in engine.deployed()] == ["tv light"]

    def test_infeasible_rule_rejected_with_reasons(self, lab_catalog):
        engine = Engine(lab_catalog)
        bad = GroundedRule(
            RuleOperation.CREATE,
            None,
            False,
            (),
            (GroundingError(GroundingCode.UNKNOWN_TARGET, "no porch light", target="porch light"),),
        )
        with pytest.raises(DeploymentError, match="porch light") as err:
            engine.deploy(bad)
        assert err.value.errors[0].code is GroundingCode.UNKNOWN_TARGET

    def test_duplicate_name_rejected(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(tv_light_rule(), key="dup")
        with pytest.raises(DeploymentError, match="already deployed"):
            engine.deploy(tv_light_rule(), key="DUP")

    def test_zero_wait_rejected(self, lab_catalog):
        engine = Engine(lab_catalog)
        zero = rule([TAPair((trig("lamp b", "switch", "on", TriggerMode.EVENT),), (act("timer", "wait", "0s"),))])
        with pytest.raises(DeploymentError, match="positive"):
            engine.deploy(zero)


class TestEventFiring:
    def test_event_fires_at_injection_instant(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(tv_light_rule())
        engine.inject(SimEvent(5, "lamp b", "switch", "on"))
        assert simple_trace(engine) == [(5, "lamp a", "on")]

    def test_event_value_must_match_condition(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(tv_light_rule())
        engine.inject(SimEvent(5, "lamp b", "switch", "off"))
        assert engine.trace() == []

    def test_event_fires_once_per_instant_and_again_later(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(tv_light_rule())
        engine.inject(SimEvent(5, "lamp b", "switch", "on"))
        engine.inject(SimEvent(9, "lamp b", "switch", "on"))
        assert simple_trace(engine) == [(5, "lamp a", "on"), (9, "lamp a", "on")]

    def test_set_state_is_not_an_occurrence(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(tv_light_rule())
        engine.set_state("lamp b", "switch", "on", at=5)
        assert engine.trace() == []

    def test_equal_time_events_share_the_instant(self, lab_catalog):
        both = rule(
            [
                TAPair((trig("sense", "motion", "true", TriggerMode.EVENT),), (act("lamp a", "switch", "on"),)),
                TAPair((trig("sense", "motion", "false", TriggerMode.EVENT),), (act("lamp b", "switch", "on"),)),
            ]
        )
        engine = Engine(lab_catalog)
        engine.deploy(both, key="r")
        engine.inject_many(
            [SimEvent(4, "sense", "motion", "true"), SimEvent(4, "sense", "motion", "false")]
        )
        # both occurrences exist at t=4; state keeps the last written value
        assert sorted(simple_trace(engine)) == [(4, "lamp a", "on"), (4, "lamp b", "on")]
        assert engine.states()["sense"]["motion"] == "false"

    def test_unknown_stimulus_rejected_at_boundary(self, lab_catalog):
        engine = Engine(lab_catalog)
        with pytest.raises(EngineError, match="not a known query interface"):
            engine.inject(SimEvent(1, "ghost", "switch", "on"))
        with pytest.raises(EngineError):
            engine.set_state("lamp a", "imaginary", "on")

    def test_past_events_rejected(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.advance(100)
        with pytest.raises(EngineError, match="past"):
            engine.inject(SimEvent(50, "lamp a", "switch", "on"))


class TestStateHold:
    def test_broken_hold_never_fires(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(no_activity_rule())
        engine.set_state("sense", "motion", "false", at=0)
        engine.set_state("sense", "motion", "true", at=300)
        engine.advance(3600)
        assert engine.trace() == []

    def test_uninterrupted_hold_fires_exactly_at_delay(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(no_activity_rule())
        engine.set_state("sense", "motion", "false", at=0)
        delta = engine.advance(3600)
        assert [(r.at, r.target, r.parameter) for r in delta] == [(600, "lamp a", "off")]

    def test_flip_resets_the_hold_clock(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(no_activity_rule(delay=300))
        engine.set_state("sense", "motion", "false", at=0)
        engine.set_state("sense", "motion", "true", at=100)
        engine.set_state("sense", "motion", "false", at=250)
        engine.advance(3600)
        assert simple_trace(engine) == [(550, "lamp a", "off")]

    def test_all_state_pair_is_edge_triggered_and_rearms(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(no_activity_rule(delay=0))
        engine.set_state("sense", "motion", "false", at=10)
        engine.advance(100)
        engine.set_state("sense", "motion", "false", at=150)  # still false: no new edge
        engine.advance(200)
        engine.set_state("sense", "motion", "true", at=300)   # conjunction breaks: re-arm
        engine.set_state("sense", "motion", "false", at=400)
        engine.advance(3600)
        assert simple_trace(engine) == [(10, "lamp a", "off"), (400, "lamp a", "off")]

    def test_pair_already_satisfied_at_deploy_does_not_fire(self, lab_catalog):
        engine = Engine(lab_catalog, initial_states={"sense": {"motion": "false"}})
        engine.deploy(no_activity_rule(delay=0))
        engine.advance(3600)
        assert engine.trace() == []

    def test_delayed_trigger_holding_at_deploy_fires_after_delay(self, lab_catalog):
        engine = Engine(lab_catalog, initial_states={"sense": {"motion": "false"}})
        engine.deploy(no_activity_rule(delay=600))
        engine.advance(3600)
        assert simple_trace(engine) == [(600, "lamp a", "off")]

    def test_mixed_pair_event_gated_by_held_state(self, lab_catalog):
        mixed = rule(
            [
                TAPair(
                    (
                        trig("lamp b", "switch", "on", TriggerMode.EVENT),
                        trig("sense", "motion", "false", delay=60),
                    ),
                    (act("lamp a", "switch", "on"),),
                )
            ]
        )
        engine = Engine(lab_catalog)
        engine.deploy(mixed)
        engine.set_state("sense", "motion", "false", at=0)
        engine.inject(SimEvent(30, "lamp b", "switch", "on"))  # hold only 30s: no fire
        engine.inject(SimEvent(90, "lamp b", "switch", "on"))  # hold 90s >= 60s: fire
        engine.advance(3600)
        assert simple_trace(engine) == [(90, "lamp a", "on")]


class TestTimers:
    def test_wait_suspends_following_steps(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(ac_timer_rule())
        engine.inject(SimEvent(0, "lamp b", "switch", "on"))
        assert simple_trace(engine) == [(0, "plug c", "on")]
        delta = engine.advance(600)
        assert [(r.at, r.target, r.parameter) for r in delta] == [(600, "plug c", "off")]

    def test_advance_with_no_pending_work_is_empty(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(ac_timer_rule())
        assert engine.advance(500) == []

    def test_withdraw_mid_wait_cancels_timer(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(ac_timer_rule(), key="ac")
        engine.inject(SimEvent(0, "lamp b", "switch", "on"))
        engine.advance(299)
        engine.withdraw("ac")
        assert engine.advance(3600) == []
        assert simple_trace(engine) == [(0, "plug c", "on")]

    def test_withdraw_unknown_rule(self, lab_catalog):
        engine = Engine(lab_catalog)
        with pytest.raises(EngineError, match="no deployed rule"):
            engine.withdraw("ghost")

    def test_two_rules_same_instant_ordered_by_deployment(self, lab_catalog):
        first = rule([TAPair((trig("sense", "motion", "true", TriggerMode.EVENT),), (act("lamp a", "switch", "on"),))])
        second = rule([TAPair((trig("sense", "motion", "true", TriggerMode.EVENT),), (act("lamp b", "switch", "on"),))])
        engine = Engine(lab_catalog)
        engine.deploy(second, key="second")   # deployed first
        engine.deploy(first, key="first")
        engine.inject(SimEvent(7, "sense", "motion", "true"))
        assert [(r.rule, r.target) for r in engine.trace()] == [
            ("second", "lamp b"),
            ("first", "lamp a"),
        ]

    def test_commands_update_states_and_chain_to_state_triggers(self, lab_catalog):
        chained = rule([TAPair((trig("lamp a", "switch", "on"),), (act("lamp b", "switch", "on"),))])
        engine = Engine(lab_catalog)
        engine.deploy(tv_light_rule(), key="tv")   # lamp b on (event) -> lamp a on
        engine.deploy(chained, key="chain")        # lamp a on (state) -> lamp b on
        engine.inject(SimEvent(3, "lamp b", "switch", "on"))
        engine.advance(10)
        # tv rule set lamp a on at t=3; the state edge fires the chained rule
        assert [(r.at, r.rule, r.target) for r in engine.trace()] == [
            (3, "tv", "lamp a"),
            (3, "chain", "lamp b"),
        ]
        assert engine.states()["lamp a"]["switch"] == "on"


class TestBranchIndependence:
    def test_sibling_pairs_do_not_interact(self, lab_catalog):
        full = rule(
            [
                TAPair((trig("sense", "motion", "true", TriggerMode.EVENT),), (act("lamp a", "switch", "on"),)),
                TAPair((trig("sense", "level", ">50"),), (act("lamp b", "switch", "on"),)),
            ]
        )
        events = [
            SimEvent(10, "sense", "motion", "true"),
            SimEvent(20, "sense", "level", 80),
            SimEvent(30, "sense", "motion", "true"),
        ]

        def run(r):
            engine = Engine(lab_catalog)
            engine.deploy(r, key="r")
            engine.inject_many(list(events))
            engine.advance(100)
            return [(t.at, t.target, t.interface, t.parameter) for t in engine.trace()]

        full_trace = run(full)
        only_first = run(rule([full.ta_pairs[0]]))
        only_second = run(rule([full.ta_pairs[1]]))
        assert [r for r in full_trace if r[1] == "lamp a"] == only_first
        assert [r for r in full_trace if r[1] == "lamp b"] == only_second


class TestNearestResolution:
    def test_resolves_by_user_position(self, catalog):
        dynamic = rule(
            [
                TAPair(
                    (trig("UserSensor", "posture", "sitting", TriggerMode.EVENT),),
                    (act("@nearest(light, user)", "switch", "on"),),
                )
            ]
        )
        engine = Engine(catalog, initial_states={"UserSensor": {"position": "sofa"}})
        engine.deploy(dynamic, key="r")
        engine.inject(SimEvent(1, "UserSensor", "posture", "sitting"))
        assert [(r.target, r.parameter) for r in engine.trace()] == [("sofa light", "on")]

    def test_falls_back_to_first_matching_device(self, catalog):
        dynamic = rule(
            [
                TAPair(
                    (trig("UserSensor", "posture", "sitting", TriggerMode.EVENT),),
                    (act("@nearest(light, user)", "switch", "on"),),
                )
            ]
        )
        engine = Engine(catalog)
        engine.deploy(dynamic, key="r")
        engine.inject(SimEvent(1, "UserSensor", "posture", "sitting"))
        assert engine.trace()[0].target == "ceiling light"

    def test_desk_position_picks_desk_light(self, catalog):
        dynamic = rule(
            [
                TAPair(
                    (trig("UserSensor", "posture", "sitting", TriggerMode.EVENT),),
                    (act("@nearest(light, user)", "switch", "on"),),
                )
            ]
        )
        engine = Engine(catalog, initial_states={"UserSensor": {"position": "desk"}})
        engine.deploy(dynamic, key="r")
        engine.inject(SimEvent(1, "UserSensor", "posture", "sitting"))
        assert engine.trace()[0].target == "desk light"


class TestDeterminismAndExport:
    def test_identical_runs_produce_identical_traces(self, lab_catalog):
        def run():
            engine = Engine(lab_catalog)
            engine.deploy(ac_timer_rule(), key="ac")
            engine.deploy(no_activity_rule(), key="idle")
            engine.inject_many(
                [
                    SimEvent(0, "sense", "motion", "false"),
                    SimEvent(5, "lamp b", "switch", "on"),
                    SimEvent(700, "lamp b", "switch", "off"),
                ]
            )
            engine.advance(3600)
            return engine.trace()

        assert run() == run()

    def test_trace_jsonl_round_trips(self, lab_catalog):
        engine = Engine(lab_catalog)
        engine.deploy(tv_light_rule(), key="r")
        engine.inject(SimEvent(5, "lamp b", "switch", "on"))
        lines = trace_to_jsonl(engine.trace()).strip().splitlines()
        assert [json.loads(line) for line in lines] == [r.to_dict() for r in engine.trace()]


def test_branch_corpus_rule_runs_both_branches(catalog):
    """The bundled branch-rule gold behaves per its two TA-pairs."""
    corpus = json.loads(
        resources.files("awareauto").joinpath("data/corpus.json").read_text(encoding="utf-8")
    )
    gold = next(e for e in corpus if e["id"] == "cb-01-tv-rain")
    branch = grounded_from_dict(gold["gold_grounded"])
    engine = Engine(catalog)
    engine.deploy(branch, key="branch")
    engine.set_state("UserSensor", "activity", "watching TV", at=10)
    engine.advance(50)
    engine.set_state("environment sensor", "isRaining", "true", at=100)
    engine.advance(200)
    assert [(r.at, r.target, r.interface, r.parameter) for r in engine.trace()] == [
        (10, "ceiling light", "switch", "on"),
        (100, "ceiling light", "setColorTemperature", "warm"),
    ]
