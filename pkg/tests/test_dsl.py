import json
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_trace_scenario

from ischema.dsl import (
    DslError,
    parse_formula,
    parse_scenario,
    parse_theory,
    parse_trace_json,
    rational_to_text,
    serialize_scenario,
    serialize_theory,
    serialize_trace,
    sort_check,
    text_to_rational,
)
from ischema.library import SHIPPED_SCHEMAS, schema_theory, _data_text
from ischema.logic import Always, And, Eventually, Implies, Not, Until

SHIPPED_SCENARIOS = (
    "fig1", "drop", "ball_cup", "path3", "stack", "solar", "atom", "containment_grid",
)


# --- rationals ----------------------------------------------------------------


@pytest.mark.parametrize(
    "value, text",
    [
        (Fraction(4), "4"),
        (Fraction(-7), "-7"),
        (Fraction(9, 2), "4.5"),
        (Fraction(1, 4), "0.25"),
        (Fraction(-3, 25), "-0.12"),
        (Fraction(1, 3), "1/3"),
        (Fraction(-5, 6), "-5/6"),
    ],
)
def test_rational_rendering(value, text):
    assert rational_to_text(value) == text
    assert text_to_rational(text) == value


@given(st.fractions(max_denominator=10**6))
@settings(max_examples=200, deadline=None)
def test_rational_text_round_trip(q):
    assert text_to_rational(rational_to_text(q)) == q


# --- parsing ------------------------------------------------------------------


def test_parse_figure_scenario():
    sc = parse_scenario(_data_text("fig1.scn"), "fig1.scn")
    assert [e.id for e in sc.entities] == ["a", "b", "c"]
    assert sc.trace.length == 1
    state = sc.trace.states[0]
    assert state.value("a", "x") == 4
    assert state.value("b", "y") == Fraction("4.5")
    assert state.value("c", "r") == 3


def test_trace_block_textual_inertia():
    sc = parse_scenario(
        """scenario s
          entity o : Object = Point(0, 7)
          trace length 3
            state 1 { o.x = 2 }
        end"""
    )
    xs = [s.value("o", "x") for s in sc.trace.states]
    ys = [s.value("o", "y") for s in sc.trace.states]
    assert xs == [0, 2, 2]
    assert ys == [7, 7, 7]


def test_trace_block_without_overrides_is_constant():
    sc = parse_scenario(
        """scenario s
          entity o : Object = Point(1, 2)
          trace length 4
        end"""
    )
    assert all(s.value("o", "x") == 1 for s in sc.trace.states)


def test_state_index_out_of_bounds():
    with pytest.raises(DslError) as err:
        parse_scenario(
            """scenario s
              entity o : Object = Point(0, 0)
              trace length 3
                state 5 { o.x = 1 }
            end"""
        )
    diag = err.value.diagnostics[0]
    assert "state index 5" in diag.message
    assert diag.span.line == 4


def test_parse_error_has_position():
    with pytest.raises(DslError) as err:
        parse_theory("theory T axiom inside(a b) end", "bad.ist")
    diag = err.value.diagnostics[0]
    assert diag.severity == "error"
    assert diag.span.file == "bad.ist"
    assert diag.span.line == 1
    assert diag.span.column > 0


def test_reserved_words_rejected_as_names():
    with pytest.raises(DslError):
        parse_theory("theory axiom end")
    with pytest.raises(DslError):
        parse_scenario("scenario s entity not : Object = Point(0, 0) trace length 1 end")


def test_negative_extent_diagnostic():
    with pytest.raises(DslError) as err:
        parse_scenario(
            "scenario s entity c : Container = Circle(0, 0, -1) trace length 1 end"
        )
    assert "positive" in err.value.diagnostics[0].message


def test_formula_precedence():
    phi = parse_formula("not final -> always inside(a, b) and eventually motion(a)")
    assert isinstance(phi, Implies)
    assert isinstance(phi.left, Not)
    assert isinstance(phi.right, And)
    assert isinstance(phi.right.left, Always)
    assert isinstance(phi.right.right, Eventually)
    chain = parse_formula("motion(a) until motion(b) until final")
    assert isinstance(chain, Until)
    assert isinstance(chain.right, Until)


def test_parenthesized_comparison_and_formula():
    phi = parse_formula("(a.x + 1) < 2")
    from ischema.logic import Compare

    assert isinstance(phi, Compare)
    phi2 = parse_formula("(a.x < 2) and true")
    assert isinstance(phi2, And)


def test_umph_and_generic_rules_parse():
    sc = parse_scenario(
        """scenario s
          entity o : Object = Point(0, 0)
          entity goal : Region = Point(3, 0)
          rules
            umph push on o (1, 0) until closeTo(o, goal, 0)
            rule spin forall x : Object when true do x.y += 1
          horizon 4
        end"""
    )
    assert [r.name for r in sc.rules] == ["umph:push", "spin"]
    assert sc.rules[0].until is not None
    assert sc.rules[1].scope == ("x", "Object")


# --- sort checking -----------------------------------------------------------------


def test_sort_check_rejects_misapplication():
    theory = parse_theory(
        """theory BAD
          role object : Object
          role container : Container
          relation inside(Object, Container)
          axiom inside(container, object)
        end""",
        "bad.ist",
    )
    diags = sort_check(theory)
    assert len(diags) == 2
    assert all(d.code == "sort-mismatch" for d in diags)
    assert all(d.span.file == "bad.ist" and d.span.line == 5 for d in diags)


def test_sort_check_accepts_subsort_application():
    theory = parse_theory(
        """theory OK
          role o : Object
          role circ : Circle
          relation inside(Object, Container)
          axiom inside(o, circ)
        end"""
    )
    assert sort_check(theory) == []


def test_sort_check_unbound_symbol():
    theory = parse_theory(
        """theory T
          role o : Object
          axiom eventually inside(o, c)
        end"""
    )
    diags = sort_check(theory)
    assert any(d.code == "unbound-symbol" for d in diags)


def test_sort_check_unknown_numeric_param():
    theory = parse_theory(
        """theory T
          role a : Entity
          role b : Entity
          axiom delta(a, b) <= tau
        end"""
    )
    assert any(d.code == "unbound-symbol" for d in sort_check(theory))


def test_sort_check_scenario_rules():
    sc = parse_scenario(
        """scenario s
          entity o : Object = Point(0, 0)
          rules
            rule bad when true do o.r := 1
          horizon 2
        end"""
    )
    diags = sort_check(sc)
    assert any(d.code == "unknown-parameter" for d in diags)


def test_sort_check_rejects_stray_rule_targets():
    sc = parse_scenario(
        """scenario s
          entity o : Object = Point(0, 0)
          rules
            umph push on ghost (1, 0)
            rule windy when true do addforce gust on phantom (0, 1)
          horizon 2
        end"""
    )
    diags = sort_check(sc)
    flagged = {d.message for d in diags if d.code == "unbound-symbol"}
    assert any("ghost" in m for m in flagged)
    assert any("phantom" in m for m in flagged)


# --- round trips --------------------------------------------------------------------


@pytest.mark.parametrize("name", SHIPPED_SCHEMAS)
def test_shipped_theories_round_trip(name):
    text = _data_text(name + ".ist")
    theory = parse_theory(text, name)
    assert sort_check(theory) == []
    assert parse_theory(serialize_theory(theory)) == theory


@pytest.mark.parametrize("name", SHIPPED_SCENARIOS)
def test_shipped_scenarios_round_trip(name):
    text = _data_text(name + ".scn")
    sc = parse_scenario(text, name)
    assert sort_check(sc) == []
    assert parse_scenario(serialize_scenario(sc)) == sc


def test_shipped_source_path_goal_axiom_count():
    assert len(schema_theory("SOURCE_PATH_GOAL").axioms) == 2
    assert len(schema_theory("REVOLUTION").axioms) == 2


@given(st.integers(0, 10**6))
@settings(max_examples=100, deadline=None)
def test_trace_json_round_trip_byte_identical(seed):
    rng = random.Random(seed)
    sc = random_trace_scenario(rng)
    payload = serialize_trace(sc.trace, sc.entities)
    entities, trace = parse_trace_json(payload)
    assert entities == sc.entities
    assert trace == sc.trace
    assert serialize_trace(trace, entities) == payload


def test_trace_json_figure_values(fig1_scenario):
    doc = json.loads(serialize_trace(fig1_scenario.trace, fig1_scenario.entities))
    assert doc["length"] == 1
    assert doc["states"][0]["values"]["a.x"] == "4"
    assert doc["states"][0]["values"]["c.r"] == "3"
    assert doc["states"][0]["values"]["b.y"] == "4.5"
    assert doc["states"][0]["forces"] == []


def test_trace_json_validates_against_schema(fig1_scenario):
    import jsonschema

    schema = json.loads(_data_text("trace.schema.json"))
    doc = json.loads(serialize_trace(fig1_scenario.trace, fig1_scenario.entities))
    jsonschema.validate(doc, schema)


def test_scenario_with_attributes_round_trips():
    sc = parse_scenario(
        """scenario s
          entity cup : Container = Circle(0, 0, 2) with open = 1
          trace length 1
        end"""
    )
    assert sc.entities[0].initial("open") == 1
    assert parse_scenario(serialize_scenario(sc)) == sc
