import json
import random
from importlib import resources

import pytest

from awareauto.rules import (
    ActionGroup,
    ActionStep,
    Duration,
    NLRule,
    RuleOperation,
    TriggerMode,
    TriggerSpec,
)
from awareauto.ruletext import (
    DanglingTriggerError,
    DuplicateIdError,
    RuleSyntaxError,
    RuleTextError,
    parse_rule_text,
    serialize_rule_text,
)

MINIMAL = """\
OPERATION: CREATE
NAME: sleep mode
TRIGGERS:
  T1 | EVENT | the user says the rule name "sleep mode"
ACTIONS:
  G1 WHEN T1:
    A1 | turn off the TV
"""

BRANCH = """\
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE | the user is watching TV
  T2 | STATE | it is raining outside
ACTIONS:
  G1 WHEN T1:
    A1 | turn on the ceiling light
  G2 WHEN T1,T2:
    A2 | set the ceiling light to a warm tone
"""


def corpus_gold_documents():
    path = resources.files("awareauto").joinpath("data/corpus.json")
    return [entry["gold_nl"] for entry in json.loads(path.read_text(encoding="utf-8"))]


class TestParse:
    def test_minimal_document(self):
        rule = parse_rule_text(MINIMAL)
        assert rule.operation is RuleOperation.CREATE
        assert rule.name == "sleep mode"
        assert len(rule.triggers) == 1 and len(rule.groups) == 1
        assert rule.triggers[0].mode is TriggerMode.EVENT

    def test_branch_rule_groups_share_trigger(self):
        rule = parse_rule_text(BRANCH)
        assert len(rule.groups) == 2
        assert rule.groups[0].trigger_ids == ("T1",)
        assert rule.groups[1].trigger_ids == ("T1", "T2")

    def test_dangling_trigger_reference(self):
        doc = MINIMAL.replace("G1 WHEN T1:", "G1 WHEN T9:")
        with pytest.raises(DanglingTriggerError) as err:
            parse_rule_text(doc)
        assert err.value.line == 6

    def test_duplicate_trigger_id(self):
        doc = MINIMAL.replace(
            'T1 | EVENT | the user says the rule name "sleep mode"',
            'T1 | EVENT | one\n  T1 | EVENT | two',
        )
        with pytest.raises(DuplicateIdError):
            parse_rule_text(doc)

    def test_duplicate_group_id(self):
        doc = MINIMAL + "  G1 WHEN T1:\n    A9 | again\n"
        with pytest.raises(DuplicateIdError):
            parse_rule_text(doc)

    def test_state_with_delay(self):
        doc = MINIMAL.replace("T1 | EVENT |", "T1 | STATE(10mins) |")
        rule = parse_rule_text(doc)
        assert rule.triggers[0].delay.seconds == 600

    def test_event_never_carries_delay(self):
        rule = parse_rule_text(MINIMAL)
        assert rule.triggers[0].delay.seconds == 0

    def test_wait_step(self):
        doc = MINIMAL + "    A2 | WAIT 10mins\n"
        rule = parse_rule_text(doc)
        step = rule.groups[0].steps[1]
        assert step.is_wait and step.description.seconds == 600

    def test_wait_text_that_is_not_a_duration_is_a_command(self):
        doc = MINIMAL + "    A2 | WAIT patiently for me\n"
        rule = parse_rule_text(doc)
        assert not rule.groups[0].steps[1].is_wait

    def test_syntax_error_carries_position(self):
        with pytest.raises(RuleSyntaxError) as err:
            parse_rule_text("OPERATION: CREATE\nNAME: x\nTRIGGERS:\n  banana\nACTIONS:\n")
        assert err.value.line == 4

    @pytest.mark.parametrize(
        "doc",
        [
            "",
            "OPERATION: FROB\nNAME: NONE\nTRIGGERS:\nACTIONS:\n",
            "OPERATION: CREATE\nNAME:\nTRIGGERS:\nACTIONS:\n",
            "OPERATION: CREATE\nNAME: x\nTRIGGERS:\n",
            MINIMAL + "    A1 | duplicate step id\n",
        ],
    )
    def test_rejected_documents(self, doc):
        with pytest.raises(RuleTextError):
            parse_rule_text(doc)

    def test_create_requires_a_group(self):
        doc = "OPERATION: CREATE\nNAME: NONE\nTRIGGERS:\n  T1 | EVENT | x\nACTIONS:\n"
        with pytest.raises(RuleTextError):
            parse_rule_text(doc)

    def test_delete_allows_empty_sections(self):
        rule = parse_rule_text("OPERATION: DELETE\nNAME: movie night\nTRIGGERS:\nACTIONS:\n")
        assert rule.operation is RuleOperation.DELETE
        assert rule.triggers == () and rule.groups == ()

    def test_keyword_case_and_whitespace_tolerated(self):
        doc = "operation: create\nname: NONE\ntriggers:\n T1|event|go\nactions:\n g1 when t1:\n  a1|do it\n"
        rule = parse_rule_text(doc)
        assert rule.triggers[0].id == "T1" and rule.groups[0].id == "G1"


class TestSerialize:
    def test_none_name_line(self):
        rule = parse_rule_text(BRANCH)
        assert "NAME: NONE" in serialize_rule_text(rule).splitlines()[1]

    def test_state_delay_rendering(self):
        rule = NLRule(
            RuleOperation.CREATE,
            None,
            (TriggerSpec("T1", TriggerMode.STATE, "no activity", Duration(600)),),
            (ActionGroup("G1", ("T1",), (ActionStep("A1", "turn off the light"),)),),
        )
        assert "T1 | STATE(10mins) | no activity" in serialize_rule_text(rule)

    def test_round_trip_equality(self):
        for doc in [MINIMAL, BRANCH]:
            rule = parse_rule_text(doc)
            assert parse_rule_text(serialize_rule_text(rule)) == rule

    def test_corpus_golds_are_canonical(self):
        docs = corpus_gold_documents()
        assert len(docs) >= 27
        for doc in docs:
            rule = parse_rule_text(doc)
            assert serialize_rule_text(rule) == doc
            assert parse_rule_text(serialize_rule_text(rule)) == rule


WORDS = ["turn", "the", "light", "soft", "music", "warm", "robot", "window", "slowly", "again"]


def random_nl_rule(rng: random.Random) -> NLRule:
    triggers = []
    for i in range(rng.randint(1, 4)):
        mode = rng.choice([TriggerMode.EVENT, TriggerMode.STATE])
        delay = Duration(rng.choice([0, 60, 600, 3600])) if mode is TriggerMode.STATE else Duration(0)
        text = " ".join(rng.choices(WORDS, k=rng.randint(2, 6)))
        triggers.append(TriggerSpec(f"T{i + 1}", mode, text, delay))
    groups = []
    step_no = 1
    for k in range(rng.randint(1, 3)):
        ids = tuple(
            sorted(rng.sample([t.id for t in triggers], rng.randint(1, len(triggers))))
        )
        steps = []
        for _ in range(rng.randint(1, 3)):
            if rng.random() < 0.3:
                steps.append(ActionStep(f"A{step_no}", Duration(rng.choice([5, 60, 600]))))
            else:
                steps.append(
                    ActionStep(f"A{step_no}", " ".join(rng.choices(WORDS, k=rng.randint(2, 5))))
                )
            step_no += 1
        groups.append(ActionGroup(f"G{k + 1}", ids, tuple(steps)))
    name = None if rng.random() < 0.5 else " ".join(rng.choices(WORDS, k=2))
    return NLRule(RuleOperation.CREATE, name, tuple(triggers), tuple(groups))


def test_random_rules_round_trip():
    rng = random.Random(42)
    for _ in range(200):
        rule = random_nl_rule(rng)
        doc = serialize_rule_text(rule)
        again = parse_rule_text(doc)
        assert again == rule
        assert serialize_rule_text(again) == doc


def test_unreferenced_trigger_is_warning_not_error():
    doc = (
        "OPERATION: CREATE\nNAME: NONE\nTRIGGERS:\n"
        "  T1 | EVENT | used\n  T2 | STATE | ignored\n"
        "ACTIONS:\n  G1 WHEN T1:\n    A1 | do the thing\n"
    )
    rule = parse_rule_text(doc)
    assert rule.warnings() == ["trigger T2 is not referenced by any action group"]
