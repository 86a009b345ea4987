"""Command-line interface: check, simulate, classify, analogy, enumerate.

Exit codes separate semantic outcomes from operational failures:

    0  satisfied / done / analogy found
    1  theory violated / no analogy / no satisfying binding
    2  usage, parse, or sort errors (diagnostics on stderr as file:line:col)
    3  simulation rejected the rule set (conflicts, unstratifiable)
    4  enumeration search space exceeds the cap

Set ISCHEMA_COLOR=0|1 to force plain or colored text output; --json emits
machine-readable documents that validate against data/cli_output.schema.json.
Given identical inputs and flags, output bytes are identical across runs.
"""

from __future__ import annotations

import dataclasses
import json
import os
import sys
from fractions import Fraction
from pathlib import Path
from typing import NoReturn, Optional, Sequence

import click

from . import dsl, dynamics, enumeration, library, logic
from .errors import (
    ConflictingEffects,
    IschemaError,
    SearchSpaceTooLarge,
    UnstratifiableRuleSet,
)
from .geometry import DEFAULT_EPSILON, DEFAULT_TAU
from .model import Scenario, Theory

EXIT_OK = 0
EXIT_UNSATISFIED = 1
EXIT_USAGE = 2
EXIT_RULESET = 3
EXIT_SEARCH_SPACE = 4


@dataclasses.dataclass
class RunConfig:
    epsilon: Fraction = DEFAULT_EPSILON
    delta: Fraction = Fraction(1)
    tau: Fraction = DEFAULT_TAU
    json_output: bool = False
    cap: int = enumeration.DEFAULT_CAP

    def __post_init__(self):
        if self.epsilon < 0 or self.delta <= 0 or self.cap <= 0:
            raise click.UsageError("epsilon must be >= 0, delta > 0, cap > 0")


def _color_enabled() -> Optional[bool]:
    flag = os.environ.get("ISCHEMA_COLOR")
    if flag == "0":
        return False
    if flag == "1":
        return True
    return None


def _echo(text: str = "", fg: Optional[str] = None) -> None:
    color = _color_enabled()
    if fg is not None and color is not False:
        click.secho(text, fg=fg, color=color)
    else:
        click.echo(text)


def _emit_diagnostics(diags) -> None:
    for d in diags:
        click.echo(str(d), err=True)


def _fail_usage(message: str) -> NoReturn:
    click.echo(f"error: {message}", err=True)
    sys.exit(EXIT_USAGE)


def _load_theory(path: str) -> Theory:
    try:
        theory = dsl.parse_theory(Path(path).read_text(encoding="utf-8"), path)
    except OSError as exc:
        _fail_usage(str(exc))
    except dsl.DslError as exc:
        _emit_diagnostics(exc.diagnostics)
        sys.exit(EXIT_USAGE)
    diags = dsl.sort_check(theory)
    if diags:
        _emit_diagnostics(diags)
        sys.exit(EXIT_USAGE)
    return theory


def _load_scenario(path: str) -> Scenario:
    try:
        scenario = dsl.parse_scenario(Path(path).read_text(encoding="utf-8"), path)
    except OSError as exc:
        _fail_usage(str(exc))
    except dsl.DslError as exc:
        _emit_diagnostics(exc.diagnostics)
        sys.exit(EXIT_USAGE)
    diags = dsl.sort_check(scenario)
    if diags:
        _emit_diagnostics(diags)
        sys.exit(EXIT_USAGE)
    return scenario


def _parse_bindings(pairs: Sequence[str]) -> dict[str, str]:
    binding = {}
    for pair in pairs:
        if "=" not in pair:
            _fail_usage(f"--bind expects role=entity, got {pair!r}")
        role, entity = pair.split("=", 1)
        binding[role.strip()] = entity.strip()
    return binding


def _rational_option(text: str, what: str) -> Fraction:
    try:
        return Fraction(text)
    except (ValueError, ZeroDivisionError):
        _fail_usage(f"{what} must be a rational number, got {text!r}")


def _print_json(doc) -> None:
    click.echo(json.dumps(doc, sort_keys=True, indent=2))


def _report_to_json(report: logic.CheckReport) -> dict:
    axioms = []
    for a in report.axioms:
        entry = {
            "index": a.index,
            "formula": dsl.formula_to_text(a.formula),
            "satisfied": a.satisfied,
        }
        if a.witness is not None:
            entry["witness"] = {
                "time": a.witness.time,
                "formula": dsl.formula_to_text(a.witness.formula),
            }
        axioms.append(entry)
    return {
        "command": "check",
        "theory": report.theory,
        "binding": dict(report.binding),
        "satisfied": report.satisfied,
        "axioms": axioms,
    }


def _print_report_text(report: logic.CheckReport) -> None:
    binding = dict(report.binding)
    bound = ", ".join(f"{r}={e}" for r, e in report.binding)
    _echo(f"theory {report.theory}" + (f" with {bound}" if bound else ""))
    for a in report.axioms:
        shown = logic.substitute_symbols(a.formula, binding)
        verdict = "satisfied" if a.satisfied else "violated"
        _echo(
            f"  {dsl.formula_to_text(shown)}: {verdict}",
            fg="green" if a.satisfied else "red",
        )
        if a.witness is not None:
            wf = logic.substitute_symbols(a.witness.formula, binding)
            _echo(f"    fails at t={a.witness.time}: {dsl.formula_to_text(wf)}")
    _echo(f"result: {'satisfied' if report.satisfied else 'violated'}")


@click.group(name="ischema")
def main() -> None:
    """Check, simulate, classify, match, and enumerate embodied scenarios
    against image-schema theories."""


@main.command("check")
@click.argument("theory_file")
@click.argument("scenario_file")
@click.option("--bind", "binds", multiple=True, help="role=entity (repeatable)")
@click.option("--epsilon", default=None, help="coincidence tolerance")
@click.option("--tau", default=None, help="default proximity threshold")
@click.option("--json", "json_output", is_flag=True)
def cmd_check(theory_file, scenario_file, binds, epsilon, tau, json_output):
    """Check a concrete scenario against a theory under a role binding.

    Roles left unbound trigger a search over sort-compatible bindings; the
    first satisfying one is reported.
    """
    theory = _load_theory(theory_file)
    scenario = _load_scenario(scenario_file)
    if scenario.trace is None:
        _fail_usage("the scenario is generative; run `ischema simulate` first")
    eps = _rational_option(epsilon, "--epsilon") if epsilon else DEFAULT_EPSILON
    tau_v = _rational_option(tau, "--tau") if tau else DEFAULT_TAU
    binding = _parse_bindings(binds)
    unbound = [role for role, _ in theory.roles if role not in binding]

    try:
        if not unbound:
            report = logic.check_theory(theory, scenario, binding, epsilon=eps, tau=tau_v)
        else:
            candidates = [
                b
                for b in library.candidate_bindings(theory, scenario)
                if all(b.get(role) == entity for role, entity in binding.items())
            ]
            report = None
            for b in candidates:
                try:
                    r = logic.check_theory(theory, scenario, b, epsilon=eps, tau=tau_v)
                except IschemaError:
                    continue
                if r.satisfied:
                    report = r
                    break
            if report is None:
                if json_output:
                    _print_json(
                        {
                            "command": "check",
                            "theory": theory.name,
                            "binding": binding,
                            "satisfied": False,
                            "axioms": [],
                            "searched": len(candidates),
                        }
                    )
                else:
                    _echo(
                        f"theory {theory.name}: no satisfying binding "
                        f"among {len(candidates)} candidates"
                    )
                sys.exit(EXIT_UNSATISFIED)
    except IschemaError as exc:
        _fail_usage(str(exc))

    if json_output:
        _print_json(_report_to_json(report))
    else:
        _print_report_text(report)
    sys.exit(EXIT_OK if report.satisfied else EXIT_UNSATISFIED)


@main.command("simulate")
@click.argument("scenario_file")
@click.option("--steps", type=int, default=None, help="override the horizon")
@click.option("--delta", default=None, help="gravity step size")
@click.option("--trace-out", default=None, help="write the trace JSON here")
@click.option("--epsilon", default=None)
@click.option("--json", "json_output", is_flag=True)
def cmd_simulate(scenario_file, steps, delta, trace_out, epsilon, json_output):
    """Run a generative scenario and emit its trace."""
    scenario = _load_scenario(scenario_file)
    if not scenario.is_generative:
        _fail_usage("the scenario already carries a trace; nothing to simulate")
    eps = _rational_option(epsilon, "--epsilon") if epsilon else DEFAULT_EPSILON
    if delta is not None:
        delta_v = _rational_option(delta, "--delta")
        if delta_v <= 0:
            _fail_usage("--delta must be positive")
        rules = tuple(
            dynamics.gravity_rule(delta_v) if r.kind == "gravity" else r
            for r in scenario.rules
        )
        scenario = dataclasses.replace(scenario, rules=rules)
    try:
        trace = dynamics.simulate(scenario, epsilon=eps, horizon=steps)
    except (ConflictingEffects, UnstratifiableRuleSet) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_RULESET)
    except IschemaError as exc:
        _fail_usage(str(exc))
    payload = dsl.serialize_trace(trace, scenario.entities)
    if trace_out:
        Path(trace_out).write_text(payload, encoding="utf-8")
    if json_output:
        click.echo(payload, nl=False)
    elif not trace_out:
        for state in trace.states:
            parts = " ".join(
                f"{eid}.{p}={dsl.rational_to_text(v)}"
                for (eid, p), v in sorted(state.values.items())
            )
            _echo(f"t={state.time} {parts}")
    sys.exit(EXIT_OK)


@main.command("classify")
@click.argument("scenario_file")
@click.option("--schemas", default=None, help="comma-separated schema names")
@click.option("--epsilon", default=None)
@click.option("--tau", default=None)
@click.option("--json", "json_output", is_flag=True)
def cmd_classify(scenario_file, schemas, epsilon, tau, json_output):
    """List every (schema, binding) pair the scenario's trace satisfies."""
    scenario = _load_scenario(scenario_file)
    if scenario.trace is None:
        _fail_usage("the scenario is generative; run `ischema simulate` first")
    eps = _rational_option(epsilon, "--epsilon") if epsilon else DEFAULT_EPSILON
    tau_v = _rational_option(tau, "--tau") if tau else DEFAULT_TAU
    names = [s.strip() for s in schemas.split(",")] if schemas else None
    try:
        results = library.classify(scenario, names, epsilon=eps, tau=tau_v)
    except IschemaError as exc:
        _fail_usage(str(exc))
    if json_output:
        _print_json(
            {
                "command": "classify",
                "results": [
                    {"schema": r.binding.schema, "binding": r.binding.as_dict()}
                    for r in results
                ],
            }
        )
    else:
        if not results:
            _echo("no schema instantiations found")
        for r in results:
            bound = ", ".join(f"{role}={entity}" for role, entity in r.binding.roles)
            _echo(f"{r.binding.schema}: {bound}", fg="green")
    sys.exit(EXIT_OK)


@main.command("analogy")
@click.argument("scenario_a")
@click.argument("scenario_b")
@click.option("--schema", required=True, help="schema acting as the shared structure")
@click.option("--epsilon", default=None)
@click.option("--tau", default=None)
@click.option("--json", "json_output", is_flag=True)
def cmd_analogy(scenario_a, scenario_b, schema, epsilon, tau, json_output):
    """Find bindings showing both scenarios instantiate the same schema."""
    sc_a = _load_scenario(scenario_a)
    sc_b = _load_scenario(scenario_b)
    for sc, path in ((sc_a, scenario_a), (sc_b, scenario_b)):
        if sc.trace is None:
            _fail_usage(f"{path} is generative; run `ischema simulate` first")
    eps = _rational_option(epsilon, "--epsilon") if epsilon else DEFAULT_EPSILON
    tau_v = _rational_option(tau, "--tau") if tau else DEFAULT_TAU
    try:
        pair = library.analogy(sc_a, sc_b, schema, epsilon=eps, tau=tau_v)
    except IschemaError as exc:
        _fail_usage(str(exc))
    if pair is None:
        if json_output:
            _print_json({"command": "analogy", "schema": schema, "found": False})
        else:
            _echo(f"no analogy: {schema} is not instantiated in both scenarios")
        sys.exit(EXIT_UNSATISFIED)
    ba, bb = pair
    if json_output:
        _print_json(
            {
                "command": "analogy",
                "schema": schema,
                "found": True,
                "bindingA": ba.as_dict(),
                "bindingB": bb.as_dict(),
            }
        )
    else:
        _echo(f"analogy via {schema}:", fg="green")
        _echo("  " + ", ".join(f"{r}={e}" for r, e in ba.roles))
        _echo("  " + ", ".join(f"{r}={e}" for r, e in bb.roles))
    sys.exit(EXIT_OK)


def _parse_grid(text: str) -> tuple[tuple[int, int], tuple[int, int], Fraction]:
    parts = text.split(",")
    if len(parts) not in (2, 3):
        _fail_usage("--grid expects x0:x1,y0:y1[,step]")
    try:
        x0, x1 = (int(v) for v in parts[0].split(":"))
        y0, y1 = (int(v) for v in parts[1].split(":"))
        step = Fraction(parts[2]) if len(parts) == 3 else Fraction(1)
    except (ValueError, ZeroDivisionError):
        _fail_usage("--grid expects x0:x1,y0:y1[,step]")
    return (x0, x1), (y0, y1), step


@main.command("enumerate")
@click.argument("theory_file")
@click.argument("scenario_file")
@click.option("--grid", required=True, help="x0:x1,y0:y1[,step]")
@click.option("--steps", type=int, default=1, help="trace length per model")
@click.option("--free", default=None, help="comma-separated free entities")
@click.option("--bind", "binds", multiple=True, help="role=entity (repeatable)")
@click.option("--cap", type=int, default=enumeration.DEFAULT_CAP)
@click.option("--count-only", is_flag=True)
@click.option("--epsilon", default=None)
@click.option("--tau", default=None)
@click.option("--json", "json_output", is_flag=True)
def cmd_enumerate(theory_file, scenario_file, grid, steps, free, binds, cap,
                  count_only, epsilon, tau, json_output):
    """Enumerate grid placements of the free entities that satisfy the theory.

    Without --free, every entity of sort Object varies; fixed entities keep
    their declared values. Unbound roles take the first sort-compatible
    binding.
    """
    theory = _load_theory(theory_file)
    scenario = _load_scenario(scenario_file)
    eps = _rational_option(epsilon, "--epsilon") if epsilon else DEFAULT_EPSILON
    tau_v = _rational_option(tau, "--tau") if tau else DEFAULT_TAU
    x_range, y_range, step = _parse_grid(grid)

    if free:
        free_ids = tuple(s.strip() for s in free.split(","))
    else:
        hierarchy = theory.hierarchy()
        free_ids = tuple(
            e.id for e in scenario.entities if hierarchy.subsort_of(e.sort, "Object")
        )
    if not free_ids:
        _fail_usage("no free entities: pass --free or declare Object entities")

    binding = _parse_bindings(binds)
    unbound = [role for role, _ in theory.roles if role not in binding]
    if unbound:
        full = next(
            (
                b
                for b in library.candidate_bindings(theory, scenario)
                if all(b.get(r) == e for r, e in binding.items())
            ),
            None,
        )
        if full is None:
            _fail_usage(f"no sort-compatible binding for roles {', '.join(unbound)}")
        binding = full

    spec = enumeration.GridSpec(
        x_range=x_range,
        y_range=y_range,
        free_entities=free_ids,
        step=step,
        horizon=steps,
        cap=cap,
    )
    try:
        if count_only:
            count = enumeration.count_models(theory, scenario, spec, binding, eps, tau_v)
            models = None
        else:
            models = enumeration.enumerate_models(theory, scenario, spec, binding, eps, tau_v)
            count = len(models)
    except SearchSpaceTooLarge as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_SEARCH_SPACE)
    except IschemaError as exc:
        _fail_usage(str(exc))

    if json_output:
        doc = {"command": "enumerate", "count": count}
        if models is not None:
            doc["models"] = [
                json.loads(dsl.serialize_trace(m, scenario.entities)) for m in models
            ]
        _print_json(doc)
    else:
        _echo(f"models: {count}")
        for m in models or ():
            placements = []
            for eid in free_ids:
                xs = [dsl.rational_to_text(s.value(eid, "x")) for s in m.states]
                ys = [dsl.rational_to_text(s.value(eid, "y")) for s in m.states]
                coords = " -> ".join(f"({x}, {y})" for x, y in zip(xs, ys))
                placements.append(f"{eid}: {coords}")
            _echo("  " + "; ".join(placements))
    sys.exit(EXIT_OK)


if __name__ == "__main__":
    main()
