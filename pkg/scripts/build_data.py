#!/usr/bin/env python3
"""Author the bundled corpus, scripted LLM fixtures, session flow, and
hallucination suite, then verify the whole set replays cleanly.

Run from the repo root after changing prompts, templates, the catalog, or
the case table:

    python scripts/build_data.py

Outputs (committed):
    src/awareauto/data/corpus.json
    src/awareauto/data/session_flow.json
    src/awareauto/data/hallucination_suite.json
    src/awareauto/data/fixtures/<hash>.txt
    tests/golden/reasoning_prompt.txt
    tests/golden/grounding_prompt.txt
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from awareauto.context import ContextSnapshot, load_bundled_catalog, render_scenario_text
from awareauto.evalharness import load_corpus, run_corpus
from awareauto.grounding import (
    build_grounding_prompt,
    ensure_default_trigger,
    validate_grounded,
)
from awareauto.llm import CompletionRequest, ScriptedBackend, fixture_key
from awareauto.normalizer import UserExpression, normalize_expression
from awareauto.pipeline import Pipeline, apply_modification, compose_user_message
from awareauto.reasoning import build_reasoning_prompt, load_examples
from awareauto.rules import grounded_from_dict, grounded_to_dict
from awareauto.ruletext import parse_rule_text, serialize_rule_text

DATA = REPO / "src" / "awareauto" / "data"
GOLDEN = REPO / "tests" / "golden"


def trig(target, interface, condition, mode="state", delay_s=0):
    return {
        "target": target,
        "interface": interface,
        "condition": condition,
        "mode": mode,
        "delay_s": delay_s,
    }


def act(target, interface, parameter):
    return {"target": target, "interface": interface, "parameter": parameter}


def pair(triggers, actions):
    return {"triggers": triggers, "actions": actions}


def grounded(pairs, name=None, operation="create", feasible=True, errors=()):
    return {
        "operation": operation,
        "name": name,
        "feasible": feasible,
        "ta_pairs": pairs,
        "errors": list(errors),
    }


def snap(time, weekday, temperature, humidity, device_states=None):
    return {
        "time": time,
        "weekday": weekday,
        "temperature": temperature,
        "humidity": humidity,
        "device_states": device_states or {},
    }


OFF_ALL_LIGHTS = [
    act("ceiling light", "switch", "off"),
    act("sofa light", "switch", "off"),
    act("desk light", "switch", "off"),
    act("light strip", "switch", "off"),
]

# Each case: id, complexity, expression, snapshot, gold rule document, and
# the grounding model output (pre-validation; hallucinated content stays in).
CASES = [
    # ----- multi_parameter ---------------------------------------------------
    {
        "id": "mp-01-hot-humid",
        "complexity": "multi_parameter",
        "expression": {"speech": "When it rises above 28 degrees and the humidity passes 70, turn on the air conditioner and the fan."},
        "snapshot": snap("14:10", "Tuesday", 27, 66),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE | the room temperature is above 28 degrees
  T2 | STATE | the humidity is above 70 percent
ACTIONS:
  G1 WHEN T1,T2:
    A1 | turn on the air conditioner
    A2 | turn on the fan
""",
        "model_grounded": grounded([
            pair(
                [trig("environment sensor", "temperature", ">28"), trig("environment sensor", "humidity", ">70")],
                [act("air conditioner", "switch", "on"), act("fan", "switch", "on")],
            )
        ]),
    },
    {
        "id": "mp-02-window-open",
        "complexity": "multi_parameter",
        "expression": {"speech": "When I open the window, turn off the air conditioner and the humidifier."},
        "snapshot": snap("11:20", "Saturday", 24, 52),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the window is opened
ACTIONS:
  G1 WHEN T1:
    A1 | turn off the air conditioner
    A2 | turn off the humidifier
""",
        "model_grounded": grounded([
            pair(
                [trig("window", "state", "open", mode="event")],
                [act("air conditioner", "switch", "off"), act("humidifier", "switch", "off")],
            )
        ]),
    },
    {
        "id": "mp-03-tv-scene",
        "complexity": "multi_parameter",
        "expression": {"speech": "When the TV turns on, dim the ceiling light to 30 percent and close the curtains."},
        "snapshot": snap("20:05", "Friday", 23, 54),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the TV turns on
ACTIONS:
  G1 WHEN T1:
    A1 | dim the ceiling light to 30 percent
    A2 | close the curtains
""",
        "model_grounded": grounded([
            pair(
                [trig("TV", "switch", "on", mode="event")],
                [act("ceiling light", "setBrightness", "30"), act("curtains", "setState", "closed")],
            )
        ]),
    },
    # ----- dynamic_parameters ------------------------------------------------
    {
        "id": "dp-01-sit-light",
        "complexity": "dynamic_parameters",
        "expression": {"speech": "When I sit down, turn on the light near me."},
        "snapshot": snap("19:45", "Monday", 22, 50),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the user sits down
ACTIONS:
  G1 WHEN T1:
    A1 | turn on the light near the user
""",
        "model_grounded": grounded([
            pair(
                [trig("UserSensor", "posture", "sitting", mode="event")],
                [act("@nearest(light, user)", "switch", "on")],
            )
        ]),
    },
    {
        "id": "dp-02-read-light",
        "complexity": "dynamic_parameters",
        "expression": {"speech": "When I read, turn on the light next to me."},
        "snapshot": snap("16:30", "Sunday", 23, 48),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE | the user is reading
ACTIONS:
  G1 WHEN T1:
    A1 | turn on the light near the user
""",
        "model_grounded": grounded([
            pair(
                [trig("UserSensor", "activity", "reading")],
                [act("@nearest(light, user)", "switch", "on")],
            )
        ]),
    },
    {
        "id": "dp-03-exercise-music",
        "complexity": "dynamic_parameters",
        "expression": {"speech": "When I start exercising, play some workout music on the speaker near me."},
        "snapshot": snap("07:15", "Wednesday", 21, 45),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the user starts exercising
ACTIONS:
  G1 WHEN T1:
    A1 | play workout music on the speaker near the user
""",
        "model_grounded": grounded([
            pair(
                [trig("UserSensor", "activity", "exercising", mode="event")],
                [act("@nearest(speaker, user)", "playMusic", "workout music")],
            )
        ]),
    },
    # ----- multimodal_parameters ----------------------------------------------
    {
        "id": "mm-01-sofa-point",
        "complexity": "multimodal_parameters",
        "expression": {
            "speech": "Turn on this light when I sit here.",
            "posture_activity": "sits",
            "position": "the sofa",
            "gesture": "points",
            "gesture_target": "ceiling light",
        },
        "snapshot": snap("20:30", "Saturday", 26, 55, {"ceiling light": {"switch": "off"}}),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE | the user sits on the sofa
ACTIONS:
  G1 WHEN T1:
    A1 | turn on the ceiling light
""",
        "model_grounded": grounded([
            pair(
                [trig("UserSensor", "posture", "sitting"), trig("UserSensor", "position", "sofa")],
                [act("ceiling light", "switch", "on")],
            )
        ]),
    },
    {
        "id": "mm-02-tv-sleep",
        "complexity": "multimodal_parameters",
        "expression": {
            "speech": "Turn this off when I fall asleep.",
            "posture_activity": "lies",
            "position": "the sofa",
            "gesture": "points",
            "gesture_target": "TV",
        },
        "snapshot": snap("22:50", "Sunday", 22, 50),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE | the user is sleeping
ACTIONS:
  G1 WHEN T1:
    A1 | turn off the TV
""",
        "model_grounded": grounded([
            pair([trig("UserSensor", "activity", "sleeping")], [act("TV", "switch", "off")])
        ]),
    },
    {
        "id": "mm-03-music-time",
        "complexity": "multimodal_parameters",
        "expression": {"speech": "Play music at this time every day."},
        "snapshot": snap("18:30", "Friday", 24, 57),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the clock reaches 18:30
ACTIONS:
  G1 WHEN T1:
    A1 | play music on the speaker
""",
        "model_grounded": grounded([
            pair([trig("clock", "time", "18:30", mode="event")], [act("speaker", "setPlayback", "play")])
        ]),
    },
    # ----- fuzzy_expression -----------------------------------------------------
    {
        "id": "fz-01-movie-dim",
        "complexity": "fuzzy_expression",
        "expression": {"speech": "Turn down the lights when the movie starts."},
        "snapshot": snap("21:15", "Saturday", 23, 52, {"TV": {"switch": "off"}}),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the TV turns on
ACTIONS:
  G1 WHEN T1:
    A1 | dim the ceiling light to 20 percent
    A2 | dim the sofa light to 20 percent
""",
        "model_grounded": grounded([
            pair(
                [trig("TV", "switch", "on", mode="event")],
                [act("ceiling light", "setBrightness", "20"), act("sofa light", "setBrightness", "20")],
            )
        ]),
    },
    {
        "id": "fz-02-hot-cool",
        "complexity": "fuzzy_expression",
        "expression": {"speech": "When it gets hot in here, cool the room down."},
        "snapshot": snap("15:00", "Thursday", 26, 58),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE | the room temperature is above 28 degrees
ACTIONS:
  G1 WHEN T1:
    A1 | turn on the air conditioner
    A2 | set the air conditioner to 24 degrees
""",
        "model_grounded": grounded([
            pair(
                [trig("environment sensor", "temperature", ">28")],
                [act("air conditioner", "switch", "on"), act("air conditioner", "setTemperature", "24")],
            )
        ]),
    },
    {
        "id": "fz-03-dry-air",
        "complexity": "fuzzy_expression",
        "expression": {"speech": "If the air gets too dry, do something about it."},
        "snapshot": snap("09:40", "Monday", 21, 35),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE | the humidity is below 30 percent
ACTIONS:
  G1 WHEN T1:
    A1 | turn on the humidifier
""",
        "model_grounded": grounded([
            pair([trig("environment sensor", "humidity", "<30")], [act("humidifier", "switch", "on")])
        ]),
    },
    # ----- redundant_expressions ---------------------------------------------------
    {
        "id": "rd-01-sleep-mode",
        "complexity": "redundant_expressions",
        "expression": {
            "speech": "Set a sleep mode. If I lie on the couch, then all devices are off, and only the air conditioning is on. Nope, it doesn't need to be triggered by lying.",
            "posture_activity": "lies",
            "position": "the sofa",
        },
        "snapshot": snap("23:05", "Wednesday", 22, 50),
        "nl": """
OPERATION: CREATE
NAME: sleep mode
TRIGGERS:
  T1 | EVENT | the user says the rule name "sleep mode"
ACTIONS:
  G1 WHEN T1:
    A1 | turn off the TV
    A2 | turn off the ceiling light
    A3 | stop the speaker playback
    A4 | turn on the air conditioner
""",
        "model_grounded": grounded(
            [
                pair(
                    [trig("VoiceAssistant", "ruleName", "sleep mode", mode="event")],
                    [
                        act("TV", "switch", "off"),
                        act("ceiling light", "switch", "off"),
                        act("speaker", "setPlayback", "stop"),
                        act("air conditioner", "switch", "on"),
                    ],
                )
            ],
            name="sleep mode",
        ),
    },
    {
        "id": "rd-02-morning-curtains",
        "complexity": "redundant_expressions",
        "expression": {"speech": "My sister says curtains fade the carpet, unbelievable. Anyway, open the curtains at 8 in the morning every day."},
        "snapshot": snap("10:10", "Tuesday", 22, 49),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the clock reaches 08:00
ACTIONS:
  G1 WHEN T1:
    A1 | open the curtains
""",
        "model_grounded": grounded([
            pair([trig("clock", "time", "08:00", mode="event")], [act("curtains", "setState", "open")])
        ]),
    },
    {
        "id": "rd-03-ac-correction",
        "complexity": "redundant_expressions",
        "expression": {"speech": "When the fan turns on... actually no, when the air conditioner turns on, close the window."},
        "snapshot": snap("13:55", "Sunday", 27, 60),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the air conditioner turns on
ACTIONS:
  G1 WHEN T1:
    A1 | close the window
""",
        "model_grounded": grounded([
            pair(
                [trig("air conditioner", "switch", "on", mode="event")],
                [act("window", "setState", "closed")],
            )
        ]),
    },
    # ----- complex_branch -------------------------------------------------------
    {
        "id": "cb-01-tv-rain",
        "complexity": "complex_branch",
        "expression": {"speech": "Turn on the ceiling light when I am watching TV and switch the light to warm if it is raining outside."},
        "snapshot": snap("17:25", "Saturday", 22, 63),
        "nl": """
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
""",
        "model_grounded": grounded([
            pair(
                [trig("UserSensor", "activity", "watching TV")],
                [act("ceiling light", "switch", "on")],
            ),
            pair(
                [trig("UserSensor", "activity", "watching TV"), trig("environment sensor", "isRaining", "true")],
                [act("ceiling light", "setColorTemperature", "warm")],
            ),
        ]),
    },
    {
        "id": "cb-02-desk-dark",
        "complexity": "complex_branch",
        "expression": {"speech": "When I sit at the desk, turn on the desk light, and if it is dark outside close the curtains too."},
        "snapshot": snap("18:50", "Monday", 22, 50),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE | the user sits at the desk
  T2 | STATE | it is dark outside
ACTIONS:
  G1 WHEN T1:
    A1 | turn on the desk light
  G2 WHEN T1,T2:
    A2 | close the curtains
""",
        "model_grounded": grounded([
            pair(
                [trig("UserSensor", "posture", "sitting"), trig("UserSensor", "position", "desk")],
                [act("desk light", "switch", "on")],
            ),
            pair(
                [
                    trig("UserSensor", "posture", "sitting"),
                    trig("UserSensor", "position", "desk"),
                    trig("environment sensor", "illumination", "<50"),
                ],
                [act("curtains", "setState", "closed")],
            ),
        ]),
    },
    {
        "id": "cb-03-robot-speaker",
        "complexity": "complex_branch",
        "expression": {"speech": "When the cleaning robot starts working, pause the speaker, and when it finishes, resume the music."},
        "snapshot": snap("10:35", "Thursday", 23, 51),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the cleaning robot starts working
  T2 | EVENT | the cleaning robot stops working
ACTIONS:
  G1 WHEN T1:
    A1 | pause the speaker
  G2 WHEN T2:
    A2 | resume the speaker
""",
        "model_grounded": grounded([
            pair(
                [trig("cleaning robot", "isCleaning", "true", mode="event")],
                [act("speaker", "setPlayback", "pause")],
            ),
            pair(
                [trig("cleaning robot", "isCleaning", "false", mode="event")],
                [act("speaker", "setPlayback", "play")],
            ),
        ]),
    },
    # ----- time_related_trigger ------------------------------------------------
    {
        "id": "tt-01-leave-lights",
        "complexity": "time_related_trigger",
        "expression": {"speech": "Turn off all the lights after I leave the living room for ten minutes."},
        "snapshot": snap("19:05", "Tuesday", 23, 53),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE(10mins) | there is no user activity in the living room
ACTIONS:
  G1 WHEN T1:
    A1 | turn off the ceiling light
    A2 | turn off the sofa light
    A3 | turn off the desk light
    A4 | turn off the light strip
""",
        "model_grounded": grounded([
            pair(
                [trig("ActivitySensor", "isThereUserActivity", "false", delay_s=600)],
                list(OFF_ALL_LIGHTS),
            )
        ]),
    },
    {
        "id": "tt-02-window-ac",
        "complexity": "time_related_trigger",
        "expression": {"speech": "If the window stays open for five minutes, turn off the air conditioner."},
        "snapshot": snap("14:45", "Friday", 26, 55),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE(5mins) | the window is open
ACTIONS:
  G1 WHEN T1:
    A1 | turn off the air conditioner
""",
        "model_grounded": grounded([
            pair(
                [trig("window", "state", "open", delay_s=300)],
                [act("air conditioner", "switch", "off")],
            )
        ]),
    },
    {
        "id": "tt-03-tv-idle",
        "complexity": "time_related_trigger",
        "expression": {"speech": "If nobody is around for half an hour while the TV is on, turn it off."},
        "snapshot": snap("12:05", "Sunday", 24, 50),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE(30mins) | there is no user activity in the room
  T2 | STATE | the TV is on
ACTIONS:
  G1 WHEN T1,T2:
    A1 | turn off the TV
""",
        "model_grounded": grounded([
            pair(
                [
                    trig("ActivitySensor", "isThereUserActivity", "false", delay_s=1800),
                    trig("TV", "switch", "on"),
                ],
                [act("TV", "switch", "off")],
            )
        ]),
    },
    # ----- time_dependent_action -------------------------------------------------
    {
        "id": "ta-01-ac-timer",
        "complexity": "time_dependent_action",
        "expression": {"speech": "Make a cool down rule: turn on the air conditioner for 10 minutes."},
        "snapshot": snap("15:50", "Wednesday", 28, 61),
        "nl": """
OPERATION: CREATE
NAME: cool down
TRIGGERS:
  T1 | EVENT | the user says the rule name "cool down"
ACTIONS:
  G1 WHEN T1:
    A1 | turn on the air conditioner
    A2 | WAIT 10mins
    A3 | turn off the air conditioner
""",
        "model_grounded": grounded(
            [
                pair(
                    [trig("VoiceAssistant", "ruleName", "cool down", mode="event")],
                    [
                        act("air conditioner", "switch", "on"),
                        act("timer", "wait", "10mins"),
                        act("air conditioner", "switch", "off"),
                    ],
                )
            ],
            name="cool down",
        ),
    },
    {
        "id": "ta-02-movie-time",
        "complexity": "time_dependent_action",
        "expression": {"speech": "When I say movie time, dim the ceiling light, then after 10 seconds turn on the TV."},
        "snapshot": snap("20:40", "Friday", 23, 52),
        "nl": """
OPERATION: CREATE
NAME: movie time
TRIGGERS:
  T1 | EVENT | the user says the rule name "movie time"
ACTIONS:
  G1 WHEN T1:
    A1 | dim the ceiling light to 10 percent
    A2 | WAIT 10s
    A3 | turn on the TV
""",
        "model_grounded": grounded(
            [
                pair(
                    [trig("VoiceAssistant", "ruleName", "movie time", mode="event")],
                    [
                        act("ceiling light", "setBrightness", "10"),
                        act("timer", "wait", "10s"),
                        act("TV", "switch", "on"),
                    ],
                )
            ],
            name="movie time",
        ),
    },
    {
        "id": "ta-03-morning-robot",
        "complexity": "time_dependent_action",
        "expression": {"speech": "At 9 in the morning, open the curtains, wait half a minute, then start the floor robot."},
        "snapshot": snap("08:20", "Monday", 21, 47),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the clock reaches 09:00
ACTIONS:
  G1 WHEN T1:
    A1 | open the curtains
    A2 | WAIT 30s
    A3 | start the floor robot
""",
        "model_grounded": grounded([
            pair(
                [trig("clock", "time", "09:00", mode="event")],
                [
                    act("curtains", "setState", "open"),
                    act("timer", "wait", "30s"),
                    act("floor robot", "setWorking", "start"),
                ],
            )
        ]),
    },
    # ----- combination -----------------------------------------------------------
    {
        "id": "cm-01-weekday-morning",
        "complexity": "combination",
        "expression": {"speech": "On weekdays at 7:30, open the curtains, and if it is colder than 18 degrees also turn on the air conditioner at 26."},
        "snapshot": snap("07:25", "Thursday", 17, 44),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the clock reaches 07:30
  T2 | STATE | it is not Saturday
  T3 | STATE | it is not Sunday
  T4 | STATE | the room temperature is below 18 degrees
ACTIONS:
  G1 WHEN T1,T2,T3:
    A1 | open the curtains
  G2 WHEN T1,T2,T3,T4:
    A2 | turn on the air conditioner
    A3 | set the air conditioner to 26 degrees
""",
        "model_grounded": grounded([
            pair(
                [
                    trig("clock", "time", "07:30", mode="event"),
                    trig("clock", "weekday", "!=Saturday"),
                    trig("clock", "weekday", "!=Sunday"),
                ],
                [act("curtains", "setState", "open")],
            ),
            pair(
                [
                    trig("clock", "time", "07:30", mode="event"),
                    trig("clock", "weekday", "!=Saturday"),
                    trig("clock", "weekday", "!=Sunday"),
                    trig("environment sensor", "temperature", "<18"),
                ],
                [act("air conditioner", "switch", "on"), act("air conditioner", "setTemperature", "26")],
            ),
        ]),
    },
    {
        "id": "cm-02-wind-down",
        "complexity": "combination",
        "expression": {"speech": "When I lie on the sofa for ten minutes in the evening, turn off the ceiling light and play soft jazz for half an hour."},
        "snapshot": snap("21:30", "Tuesday", 22, 50),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | STATE(10mins) | the user lies on the sofa
  T2 | STATE | it is dark outside
ACTIONS:
  G1 WHEN T1,T2:
    A1 | turn off the ceiling light
    A2 | play soft jazz on the speaker
    A3 | WAIT 30mins
    A4 | stop the speaker playback
""",
        "model_grounded": grounded([
            pair(
                [
                    trig("UserSensor", "posture", "lying", delay_s=600),
                    trig("UserSensor", "position", "sofa", delay_s=600),
                    trig("environment sensor", "illumination", "<50"),
                ],
                [
                    act("ceiling light", "switch", "off"),
                    act("speaker", "playMusic", "soft jazz"),
                    act("timer", "wait", "30mins"),
                    act("speaker", "setPlayback", "stop"),
                ],
            )
        ]),
    },
    {
        "id": "cm-03-bedroom-lamp",
        "complexity": "combination",
        "expression": {"speech": "Every evening when I enter the bedroom, turn on the bedroom lamp and play rain sounds."},
        "snapshot": snap("22:10", "Saturday", 22, 49),
        "nl": """
OPERATION: CREATE
NAME: NONE
TRIGGERS:
  T1 | EVENT | the user enters the bedroom
  T2 | STATE | it is dark outside
ACTIONS:
  G1 WHEN T1,T2:
    A1 | turn on the bedroom lamp
    A2 | play rain sounds on the speaker
""",
        # The model invents a presence interface and a device the home does
        # not have; validation must catch both.
        "model_grounded": grounded([
            pair(
                [
                    trig("environment sensor", "UserEnter", "true", mode="event"),
                    trig("environment sensor", "illumination", "<50"),
                ],
                [act("bedroom lamp", "switch", "on"), act("speaker", "playMusic", "rain sounds")],
            )
        ]),
        "infeasible_codes": ["UNKNOWN_INTERFACE", "UNKNOWN_TARGET"],
    },
]

SESSION_SNAPSHOT = snap("22:40", "Thursday", 22, 50)

SESSION_R1_EXPRESSION = {
    "speech": "Set a sleep mode. If I lie on the couch, then all devices are off, and only the air conditioning is on.",
    "posture_activity": "lies",
    "position": "the sofa",
}
SESSION_R1_NL = """
OPERATION: CREATE
NAME: sleep mode
TRIGGERS:
  T1 | EVENT | the user says the rule name "sleep mode"
  T2 | STATE | the user lies on the sofa
ACTIONS:
  G1 WHEN T1,T2:
    A1 | turn off the TV
    A2 | turn off the ceiling light
    A3 | stop the speaker playback
    A4 | turn on the air conditioner
"""
SESSION_R1_GROUNDED = grounded(
    [
        pair(
            [
                trig("VoiceAssistant", "ruleName", "sleep mode", mode="event"),
                trig("UserSensor", "posture", "lying"),
            ],
            [
                act("TV", "switch", "off"),
                act("ceiling light", "switch", "off"),
                act("speaker", "setPlayback", "stop"),
                act("air conditioner", "switch", "on"),
            ],
        )
    ],
    name="sleep mode",
)

SESSION_R2_EXPRESSION = {
    "speech": "Nope, it doesn't need to be triggered by lying. Oh, and also turn on the porch light."
}
SESSION_R2_NL = """
OPERATION: MODIFY
NAME: sleep mode
TRIGGERS:
  T1 | EVENT | the user says the rule name "sleep mode"
ACTIONS:
  G1 WHEN T1:
    A1 | turn off the TV
    A2 | turn off the ceiling light
    A3 | stop the speaker playback
    A4 | turn on the air conditioner
    A5 | turn on the porch light
"""
SESSION_R2_GROUNDED = grounded(
    [
        pair(
            [trig("VoiceAssistant", "ruleName", "sleep mode", mode="event")],
            [
                act("TV", "switch", "off"),
                act("ceiling light", "switch", "off"),
                act("speaker", "setPlayback", "stop"),
                act("air conditioner", "switch", "on"),
                act("porch light", "switch", "on"),
            ],
        )
    ],
    name="sleep mode",
)

SESSION_R3_EDIT = """
OPERATION: CREATE
NAME: sleep mode
TRIGGERS:
  T1 | EVENT | the user says the rule name "sleep mode"
ACTIONS:
  G1 WHEN T1:
    A1 | turn off the TV
    A2 | turn off the ceiling light
    A3 | stop the speaker playback
    A4 | turn on the air conditioner
"""
SESSION_R3_GROUNDED = grounded(
    [
        pair(
            [trig("VoiceAssistant", "ruleName", "sleep mode", mode="event")],
            [
                act("TV", "switch", "off"),
                act("ceiling light", "switch", "off"),
                act("speaker", "setPlayback", "stop"),
                act("air conditioner", "switch", "on"),
            ],
        )
    ],
    name="sleep mode",
)

HALLUCINATION_SUITE = [
    {
        "name": "userenter-interface",
        "about": "presence interface invented on the environment sensor",
        "rule": grounded([
            pair(
                [trig("environment sensor", "UserEnter", "true", mode="event")],
                [act("ceiling light", "switch", "on")],
            )
        ]),
        "expect_codes": ["UNKNOWN_INTERFACE"],
    },
    {
        "name": "unknown-sensor-target",
        "about": "trigger names a device the home does not have",
        "rule": grounded([
            pair(
                [trig("hologram projector", "presence", "true")],
                [act("TV", "switch", "on")],
            )
        ]),
        "expect_codes": ["UNKNOWN_TARGET"],
    },
    {
        "name": "unknown-action-target",
        "about": "action names a device the home does not have",
        "rule": grounded([
            pair([trig("TV", "switch", "on", mode="event")], [act("bedroom lamp", "switch", "on")])
        ]),
        "expect_codes": ["UNKNOWN_TARGET"],
    },
    {
        "name": "invented-action-interface",
        "about": "operation interface invented on a real device",
        "rule": grounded([
            pair([trig("TV", "switch", "on", mode="event")], [act("TV", "teleport", "on")])
        ]),
        "expect_codes": ["UNKNOWN_INTERFACE"],
    },
    {
        "name": "query-commanded",
        "about": "a read-only query used as a command",
        "rule": grounded([
            pair(
                [trig("TV", "switch", "on", mode="event")],
                [act("environment sensor", "temperature", "25")],
            )
        ]),
        "expect_codes": ["UNSUPPORTED_CAPABILITY"],
    },
    {
        "name": "operation-watched",
        "about": "a command interface used as a trigger query",
        "rule": grounded([
            pair(
                [trig("ceiling light", "setBrightness", "50")],
                [act("ceiling light", "switch", "on")],
            )
        ]),
        "expect_codes": ["UNSUPPORTED_CAPABILITY"],
    },
    {
        "name": "bad-color-parameter",
        "about": "color outside the light's tone set",
        "rule": grounded([
            pair(
                [trig("TV", "switch", "on", mode="event")],
                [act("ceiling light", "setColorTemperature", "purple")],
            )
        ]),
        "expect_codes": ["BAD_PARAMETER"],
    },
    {
        "name": "bad-condition-text",
        "about": "non-numeric condition against a numeric query",
        "rule": grounded([
            pair([trig("environment sensor", "temperature", "hot")], [act("fan", "switch", "on")])
        ]),
        "expect_codes": ["BAD_CONDITION"],
    },
    {
        "name": "fan-speed-out-of-range",
        "about": "numeric parameter outside the device range",
        "rule": grounded([
            pair([trig("TV", "switch", "on", mode="event")], [act("fan", "setSpeed", "11")])
        ]),
        "expect_codes": ["BAD_PARAMETER"],
    },
    {
        "name": "applaud-snap-finger",
        "about": "gesture mapped onto a gesture interface that does not exist",
        "rule": grounded([
            pair(
                [trig("UserSensor", "snapFinger", "true", mode="event")],
                [act("sofa light", "switch", "on")],
            )
        ]),
        "expect_codes": ["UNKNOWN_INTERFACE"],
    },
]


def canonical_nl(doc: str) -> str:
    return serialize_rule_text(parse_rule_text(doc))


def write_fixture(fixtures: Path, system_prompt: str, user_message: str, output: str) -> None:
    key = fixture_key(CompletionRequest(system_prompt, user_message))
    (fixtures / f"{key}.txt").write_text(output, encoding="utf-8")


def main() -> int:
    catalog = load_bundled_catalog()
    examples = load_examples()
    grounding_prompt = build_grounding_prompt(catalog)
    fixtures = DATA / "fixtures"
    fixtures.mkdir(parents=True, exist_ok=True)
    for stale in fixtures.glob("*.txt"):
        stale.unlink()

    corpus_entries = []
    for case in CASES:
        snapshot = ContextSnapshot.from_dict(case["snapshot"])
        expr = UserExpression.from_dict(case["expression"])
        nl_text = canonical_nl(case["nl"])
        reasoning_prompt = build_reasoning_prompt(catalog, snapshot, examples)
        normalized = normalize_expression(expr, snapshot)
        write_fixture(fixtures, reasoning_prompt, compose_user_message(normalized), nl_text)

        model_json = json.dumps(case["model_grounded"], indent=2, ensure_ascii=False)
        write_fixture(fixtures, grounding_prompt, nl_text, model_json)

        validated = validate_grounded(
            catalog, ensure_default_trigger(grounded_from_dict(case["model_grounded"]))
        )
        entry = {
            "id": case["id"],
            "complexity": case["complexity"],
            "input": {"expression": case["expression"], "snapshot": case["snapshot"]},
            "gold_nl": nl_text,
        }
        if "infeasible_codes" in case:
            codes = sorted(e.code.value for e in set(validated.errors))
            expected = sorted(set(case["infeasible_codes"]))
            assert not validated.feasible, f"{case['id']}: expected infeasible"
            assert sorted(set(codes)) == expected, f"{case['id']}: codes {codes} != {expected}"
            entry["gold_infeasible_reason"] = expected
        else:
            assert validated.feasible, (
                f"{case['id']}: gold grounding is infeasible: "
                + "; ".join(e.message for e in validated.errors)
            )
            entry["gold_grounded"] = grounded_to_dict(validated)
        corpus_entries.append(entry)

    (DATA / "corpus.json").write_text(
        json.dumps(corpus_entries, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    # session refinement flow (three rounds: expression, correction, edit)
    session_snapshot = ContextSnapshot.from_dict(SESSION_SNAPSHOT)
    r1_expr = UserExpression.from_dict(SESSION_R1_EXPRESSION)
    r2_expr = UserExpression.from_dict(SESSION_R2_EXPRESSION)
    reasoning_prompt = build_reasoning_prompt(catalog, session_snapshot, examples)

    r1_nl = canonical_nl(SESSION_R1_NL)
    write_fixture(
        fixtures,
        reasoning_prompt,
        compose_user_message(normalize_expression(r1_expr, session_snapshot)),
        r1_nl,
    )
    write_fixture(
        fixtures, grounding_prompt, r1_nl, json.dumps(SESSION_R1_GROUNDED, indent=2)
    )

    r2_nl = canonical_nl(SESSION_R2_NL)
    write_fixture(
        fixtures,
        reasoning_prompt,
        compose_user_message(normalize_expression(r2_expr, session_snapshot), r1_nl),
        r2_nl,
    )
    r2_applied = serialize_rule_text(
        apply_modification(parse_rule_text(r1_nl), parse_rule_text(r2_nl))
    )
    write_fixture(
        fixtures, grounding_prompt, r2_applied, json.dumps(SESSION_R2_GROUNDED, indent=2)
    )

    r3_edit = canonical_nl(SESSION_R3_EDIT)
    write_fixture(
        fixtures, grounding_prompt, r3_edit, json.dumps(SESSION_R3_GROUNDED, indent=2)
    )

    (DATA / "session_flow.json").write_text(
        json.dumps(
            {
                "deploy_name": "sleep mode",
                "rounds": [
                    {"kind": "expression", "expression": SESSION_R1_EXPRESSION, "snapshot": SESSION_SNAPSHOT},
                    {"kind": "expression", "expression": SESSION_R2_EXPRESSION, "snapshot": SESSION_SNAPSHOT},
                    {"kind": "edit", "document": r3_edit},
                ],
            },
            indent=2,
        )
        + "\n",
        encoding="utf-8",
    )

    (DATA / "hallucination_suite.json").write_text(
        json.dumps(HALLUCINATION_SUITE, indent=2, ensure_ascii=False) + "\n", encoding="utf-8"
    )

    # prompt goldens
    GOLDEN.mkdir(parents=True, exist_ok=True)
    golden_snapshot = ContextSnapshot.from_dict(CASES[6]["snapshot"])  # mm-01-sofa-point
    (GOLDEN / "reasoning_prompt.txt").write_text(
        build_reasoning_prompt(catalog, golden_snapshot, examples), encoding="utf-8"
    )
    (GOLDEN / "grounding_prompt.txt").write_text(grounding_prompt, encoding="utf-8")
    (GOLDEN / "scenario_layout.txt").write_text(
        render_scenario_text(catalog, None, "layout_only"), encoding="utf-8"
    )
    (GOLDEN / "scenario_interfaces.txt").write_text(
        render_scenario_text(catalog, None, "layout_and_interfaces"), encoding="utf-8"
    )

    # replay everything through the real pipeline to prove the set is coherent
    pipeline = Pipeline(catalog, ScriptedBackend(fixtures))
    report = run_corpus(load_corpus(DATA / "corpus.json"), pipeline)
    for result in report.results:
        assert result.score.success, f"{result.case_id} failed: {result.error}"
    for name, stats in report.classes.items():
        for field, rate in stats.rates.items():
            assert rate == 100.0, f"{name}.{field} = {rate}"
    print(f"corpus: {report.overall.count} cases, all metrics 100.0")

    for entry in HALLUCINATION_SUITE:
        validated = validate_grounded(catalog, grounded_from_dict(entry["rule"]))
        codes = sorted({e.code.value for e in validated.errors})
        assert not validated.feasible and codes == sorted(entry["expect_codes"]), (
            entry["name"],
            codes,
        )
    print(f"hallucination suite: {len(HALLUCINATION_SUITE)} cases all caught")

    # session flow dry run
    normalized, nl1 = pipeline.infer(r1_expr, session_snapshot)
    g1 = pipeline.ground(nl1)
    assert g1.feasible, [e.message for e in g1.errors]
    _, nl2 = pipeline.infer(r2_expr, session_snapshot, draft_text=serialize_rule_text(nl1))
    applied = apply_modification(nl1, nl2)
    g2 = pipeline.ground(applied)
    assert not g2.feasible and any(e.code.value == "UNKNOWN_TARGET" for e in g2.errors)
    g3 = pipeline.ground(parse_rule_text(r3_edit))
    assert g3.feasible
    print("session flow: round 1 feasible, round 2 infeasible, round 3 edit feasible")
    print(f"fixtures written: {len(list(fixtures.glob('*.txt')))}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
