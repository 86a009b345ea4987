"""Acceptance suite: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`.
"""

import json
import random
import time
from fractions import Fraction
from pathlib import Path

from click.testing import CliRunner

from conftest import random_formula, random_trace_scenario, rational

from ischema import dsl, library
from ischema.cli import main as cli_main
from ischema.dynamics import gravity_rule, simulate
from ischema.errors import NotMeasurable, UnsupportedShapePair
from ischema.enumeration import GridSpec, count_models, enumerate_models
from ischema.geometry import (
    Add,
    EvalContext,
    Mul,
    ParamRef,
    Sub,
    eval_num_expr,
    eval_relation,
)
from ischema.library import classify, schema_theory, shipped_scenario, _data_text
from ischema.logic import check_theory, eval_formula, reference_eval
from ischema.model import (
    ShapeKind,
    Trace,
    declare_scenario,
    initial_state,
    make_entity,
    translate_scenario,
)

DATA = Path(__file__).resolve().parents[1] / "src" / "ischema" / "data"


def _path(name: str) -> str:
    return str(DATA / name)


def _cli(args):
    runner = CliRunner()
    return runner.invoke(cli_main, args, env={"ISCHEMA_COLOR": "0"})


def test_acceptance_1_figure_reproduction():
    sc = shipped_scenario("fig1")
    ctx = EvalContext.for_scenario(sc)
    ctx.epsilon = Fraction(0)
    state = sc.trace.states[0]

    dx = Sub(ParamRef("a", "x"), ParamRef("c", "x"))
    dy = Sub(ParamRef("a", "y"), ParamRef("c", "y"))
    lhs = eval_num_expr(Add(Mul(dx, dx), Mul(dy, dy)), state, ctx)
    rhs = eval_num_expr(Mul(ParamRef("c", "r"), ParamRef("c", "r")), state, ctx)
    assert isinstance(lhs, Fraction) and isinstance(rhs, Fraction)
    assert lhs == Fraction(1) and rhs == Fraction(9) and lhs < rhs

    assert eval_relation("inside", ["a", "c"], state, ctx) is True
    assert eval_relation("inside", ["b", "c"], state, ctx) is True

    result = _cli(
        ["check", _path("CONTAINMENT.ist"), _path("fig1.scn"),
         "--bind", "object=a", "--bind", "container=c"]
    )
    assert result.exit_code == 0
    print("\nACCEPTANCE 1 (figure reproduction, exact rationals): PASS")


def test_acceptance_2_temporal_differential():
    rng = random.Random(20260810)
    cases = 0
    start = time.monotonic()
    while cases < 1000:
        sc = random_trace_scenario(rng, max_entities=4, max_len=6)
        ctx = EvalContext.for_scenario(sc)
        phi = random_formula(rng, rng.randint(1, 4), sc)
        t = rng.randrange(sc.trace.length)
        assert eval_formula(phi, sc.trace, t, {}, ctx) == reference_eval(
            phi, sc.trace, t, {}, ctx
        )
        cases += 1
    elapsed = time.monotonic() - start
    assert elapsed < 5.0, f"differential run took {elapsed:.2f}s"
    print(f"\nACCEPTANCE 2 (evaluator vs naive oracle, {cases} cases, "
          f"{elapsed:.2f}s): PASS")


def test_acceptance_3_inertia():
    rng = random.Random(7)
    for _ in range(50):
        n = rng.randint(1, 4)
        entities = []
        for i in range(n):
            if rng.random() < 0.5:
                entities.append(
                    make_entity(f"e{i}", "Object", ShapeKind.POINT, [rational(rng), rational(rng)])
                )
            else:
                entities.append(
                    make_entity(
                        f"e{i}", "Circle", ShapeKind.CIRCLE,
                        [rational(rng), rational(rng), rational(rng, 1, 5)],
                    )
                )
        sc = declare_scenario(entities, rules=[], horizon=10)
        trace = simulate(sc)
        assert trace.length == 10
        baseline = dsl.serialize_trace(Trace((trace.states[0],)), sc.entities)
        for state in trace.states:
            import dataclasses

            snap = dsl.serialize_trace(Trace((dataclasses.replace(state, time=0),)), sc.entities)
            assert snap == baseline  # byte-identical to state 0
    print("\nACCEPTANCE 3 (inertia over 50 random scenarios x T=10): PASS")


def test_acceptance_4_gravity():
    for h in range(1, 21):
        o = make_entity("o", "Object", ShapeKind.POINT, [0, h])
        floor = make_entity("floor", "Floor", ShapeKind.FLOOR, [0])
        sc = declare_scenario([o, floor], rules=[gravity_rule(1)], horizon=h + 3)
        trace = simulate(sc)
        ys = [s.value("o", "y") for s in trace.states]
        assert all(ys[t + 1] == ys[t] - 1 for t in range(h))  # strictly decreasing
        assert all(y == 0 for y in ys[h:])  # constant after contact

        ctx = EvalContext.for_scenario(sc)
        for t, state in enumerate(trace.states):
            assert eval_relation("on", ["o", "floor"], state, ctx) is (t >= h)

        suffix = declare_scenario(sc.entities, trace=trace.suffix(h))
        results = classify(suffix, ("SUPPORT",))
        assert {tuple(r.binding.roles) for r in results} == {
            (("upper", "o"), ("lower", "floor"))
        }
    print("\nACCEPTANCE 4 (gravity descent, landing, SUPPORT suffix, h=1..20): PASS")


def test_acceptance_5_classifier_goldens():
    oic = classify(shipped_scenario("ball_cup"), ("OBJECT_INTO_CONTAINER",))
    assert [r.binding.as_dict() for r in oic] == [{"object": "ball", "container": "cup"}]

    spg = classify(shipped_scenario("path3"), ("SOURCE_PATH_GOAL",))
    assert [r.binding.as_dict() for r in spg] == [
        {"traveler": "traveler", "w1": "wp1", "w2": "wp2", "w3": "wp3"}
    ]

    stack = classify(shipped_scenario("stack"))
    schemas = {r.binding.schema for r in stack}
    assert "SUPPORT" in schemas and "AT_REST" in schemas
    assert "MOTION" not in schemas
    print("\nACCEPTANCE 5 (classifier goldens: into-container, path, stack): PASS")


def test_acceptance_6_analogy():
    for name in ("solar", "atom"):
        sc = shipped_scenario(name)
        assert sc.trace.length == 8
        bindings = list(library.satisfying_bindings(schema_theory("REVOLUTION"), sc))
        assert bindings, name

    result = _cli(["analogy", _path("solar.scn"), _path("atom.scn"), "--schema", "REVOLUTION", "--json"])
    assert result.exit_code == 0
    doc = json.loads(result.output)
    assert doc["bindingA"] == {"orbiter": "planet", "center": "sun"}
    assert doc["bindingB"] == {"orbiter": "electron", "center": "nucleus"}

    static = _cli(["analogy", _path("solar.scn"), _path("stack.scn"), "--schema", "REVOLUTION"])
    assert static.exit_code == 1
    print("\nACCEPTANCE 6 (solar/atom analogy via REVOLUTION): PASS")


def test_acceptance_7_enumerator_oracle():
    theory = schema_theory("CONTAINMENT")
    binding = {"object": "o", "container": "c"}
    grid = GridSpec(x_range=(0, 2), y_range=(0, 2), free_entities=("o",))

    def skeleton(radius):
        o = make_entity("o", "Object", ShapeKind.POINT, [0, 0])
        c = make_entity("c", "Container", ShapeKind.CIRCLE, [1, 1, Fraction(radius)])
        return declare_scenario([o, c], trace=Trace((initial_state([o, c]),)))

    def hand_count(radius):
        return sum(
            1
            for x in range(3)
            for y in range(3)
            if Fraction(x - 1) ** 2 + Fraction(y - 1) ** 2 < Fraction(radius) ** 2
        )

    assert count_models(theory, skeleton("1.2"), grid, binding) == hand_count("1.2") == 5
    assert count_models(theory, skeleton("1.5"), grid, binding) == hand_count("1.5") == 9
    counts = []
    for radius in ("1.0", "1.2", "1.5", "2.0"):
        c = count_models(theory, skeleton(radius), grid, binding)
        assert c == hand_count(radius)
        counts.append(c)
    assert counts == sorted(counts)
    assert len(enumerate_models(theory, skeleton("1.2"), grid, binding)) == 5
    print(f"\nACCEPTANCE 7 (grid containment counts {counts}, monotone): PASS")


def test_acceptance_8_dsl_round_trips():
    for name in library.SHIPPED_SCHEMAS:
        theory = dsl.parse_theory(_data_text(name + ".ist"), name)
        assert dsl.parse_theory(dsl.serialize_theory(theory)) == theory
    for name in ("fig1", "drop", "ball_cup", "path3", "stack", "solar", "atom", "containment_grid"):
        sc = dsl.parse_scenario(_data_text(name + ".scn"), name)
        assert dsl.parse_scenario(dsl.serialize_scenario(sc)) == sc

    rng = random.Random(99)
    for _ in range(100):
        sc = random_trace_scenario(rng)
        payload = dsl.serialize_trace(sc.trace, sc.entities)
        entities, trace = dsl.parse_trace_json(payload)
        assert (entities, trace) == (sc.entities, sc.trace)
        assert dsl.serialize_trace(trace, entities) == payload

    bad = dsl.parse_theory(
        """theory BAD
          role object : Object
          role container : Container
          relation inside(Object, Container)
          axiom inside(container, object)
        end""",
        "bad.ist",
    )
    diags = dsl.sort_check(bad)
    assert diags and all(d.code == "sort-mismatch" for d in diags)
    assert diags[0].span.file == "bad.ist" and diags[0].span.line == 5
    print("\nACCEPTANCE 8 (round-trips: shipped files + 100 traces; spanned "
          "sort diagnostic): PASS")


_RELATIONS = ("inside", "partOf", "contact", "overlaps", "disjoint", "on", "closeTo", "smaller")


def _relation_snapshot(sc):
    ctx = EvalContext.for_scenario(sc)
    ids = [e.id for e in sc.entities]
    out = {}
    for t, state in enumerate(sc.trace.states):
        for a in ids:
            for b in ids:
                for rel in _RELATIONS:
                    try:
                        out[(rel, a, b, t)] = eval_relation(rel, [a, b], state, ctx)
                    except (UnsupportedShapePair, NotMeasurable):
                        out[(rel, a, b, t)] = None
    return out


def test_acceptance_9_translation_invariance():
    goldens = {
        "fig1": ("CONTAINMENT", {"object": "a", "container": "c"}),
        "ball_cup": ("OBJECT_INTO_CONTAINER", {"object": "ball", "container": "cup"}),
        "path3": (
            "SOURCE_PATH_GOAL",
            {"traveler": "traveler", "w1": "wp1", "w2": "wp2", "w3": "wp3"},
        ),
        "stack": ("SUPPORT", {"upper": "crate", "lower": "f"}),
        "solar": ("REVOLUTION", {"orbiter": "planet", "center": "sun"}),
        "atom": ("REVOLUTION", {"orbiter": "electron", "center": "nucleus"}),
    }
    for name, (theory_name, binding) in goldens.items():
        sc = shipped_scenario(name)
        moved = translate_scenario(sc, 17, -3)
        assert _relation_snapshot(sc) == _relation_snapshot(moved)

        key = lambda rs: [(r.binding.schema, r.binding.roles) for r in rs]
        assert key(classify(sc)) == key(classify(moved))

        theory = schema_theory(theory_name)
        before = check_theory(theory, sc, binding)
        after = check_theory(theory, moved, binding)
        assert before.satisfied == after.satisfied
        assert [a.satisfied for a in before.axioms] == [a.satisfied for a in after.axioms]

    # the generative golden: translate, simulate, compare relation patterns
    drop = shipped_scenario("drop")
    moved_drop = translate_scenario(drop, 17, -3)
    t1 = declare_scenario(drop.entities, trace=simulate(drop))
    t2 = declare_scenario(moved_drop.entities, trace=simulate(moved_drop))
    assert _relation_snapshot(t1) == _relation_snapshot(t2)
    assert [
        (r.binding.schema, r.binding.roles) for r in classify(t1)
    ] == [(r.binding.schema, r.binding.roles) for r in classify(t2)]
    print("\nACCEPTANCE 9 (translation by (+17, -3) changes nothing): PASS")
