from importlib import resources

import pytest

from hybridconf.automata import build_thermostat
from hybridconf.dsl import DSLError, format_automaton, parse_automaton

THERMOSTAT = resources.files("hybridconf").joinpath("data/thermostat.hioa").read_text()

WITH_INPUTS = """\
automaton tank
inputs u
outputs level
internal x, z
action input refill
action output alarm
action internal tick
location fill
  flow x' = u - x / 10
  flow z' = exp(-x) * 2
  invariant x <= 100 and x >= 0
  output level = x * 1.5
location drain
  flow x' = -(x + 1)
  flow z' = 0
  output level = x
transition fill -> drain on alarm guard x >= 90 reset z = 0, x = x - 1
transition drain -> fill on refill
transition fill -> fill on tick guard z > 3 reset z = z - 3
init fill x = 10, z = -0.5
"""


def test_bundled_thermostat_equals_factory():
    assert parse_automaton(THERMOSTAT) == build_thermostat()


@pytest.mark.parametrize("text", [THERMOSTAT, WITH_INPUTS])
def test_round_trip(text):
    A = parse_automaton(text)
    assert parse_automaton(format_automaton(A)) == A


def test_parsed_details():
    A = parse_automaton(WITH_INPUTS)
    assert A.inputs == ("u",) and A.internal == ("x", "z")
    assert A.internal_actions == ("tick",)
    assert A.start[0].valuation == {"x": 10.0, "z": -0.5}
    (alarm,) = [r for r in A.transitions if r.action == "alarm"]
    assert [v for v, _ in alarm.reset] == ["z", "x"]


def test_dangling_operator():
    bad = THERMOSTAT.replace("flow x' = -x + 20", "flow x' = -x + ")
    with pytest.raises(DSLError) as info:
        parse_automaton(bad)
    line = bad.splitlines()[info.value.line - 1]
    assert line.strip().startswith("flow")
    assert info.value.col == len(line.rstrip()) + 1


def test_duplicate_location_names_line():
    bad = THERMOSTAT.replace("location mode_OFF", "location mode_ON")
    with pytest.raises(DSLError) as info:
        parse_automaton(bad)
    assert "duplicate location" in str(info.value)
    assert bad.splitlines()[info.value.line - 1] == "location mode_ON"
    assert "line 8" in str(info.value)


@pytest.mark.parametrize("old, new, message", [
    ("guard x <= 2", "guard q <= 2", "undeclared variable 'q'"),
    ("on ON guard", "on PING guard", "undeclared action 'PING'"),
    ("-> mode_ON on", "-> mode_UP on", "undeclared location 'mode_UP'"),
    ("output y = x\n\nlocation mode_OFF", "output y = w\n\nlocation mode_OFF", "undeclared variable 'w'"),
    ("init mode_ON x = 5", "init mode_ON", "does not assign 'x'"),
    ("action output OFF", "action output OFF xi", "reserved"),
    ("var internal x", "var hidden x", "expected input, output or internal"),
    ("automaton thermostat", "automaton", "automaton NAME"),
    ("  invariant x <= 20\n", "  invariant x <= 20\n  speed 3\n", "unknown keyword 'speed'"),
    ("init mode_ON x = 5", "init mode_ON x = 25", "violates"),
])
def test_semantic_errors(old, new, message):
    assert old in THERMOSTAT
    with pytest.raises(DSLError) as info:
        parse_automaton(THERMOSTAT.replace(old, new))
    assert message in str(info.value)
    assert info.value.line >= 1


def test_overlapping_guards_name_both_lines():
    bad = THERMOSTAT + "transition mode_ON -> mode_ON on OFF guard x >= 19\n"
    with pytest.raises(DSLError) as info:
        parse_automaton(bad)
    assert "line 18" in str(info.value)
    assert info.value.line == len(bad.splitlines())


def test_flow_outside_location():
    with pytest.raises(DSLError) as info:
        parse_automaton("automaton a\nvar internal x\nflow x' = 1\n")
    assert info.value.line == 3


def test_missing_flow():
    with pytest.raises(DSLError) as info:
        parse_automaton("automaton a\nvar internal x\nlocation L\ninit L x = 0\n")
    assert "no flow" in str(info.value) and info.value.line == 3
