"""Sorted first-order temporal formulas and their finite-trace evaluation.

The trace is complete (every parameter has a value at every instant), so
default negation is evaluated classically here: what cannot be established in
the trace is false. Non-monotonic behavior lives in the simulator.

Temporal operators over a trace of length T, evaluated at instant t:

    next f        strong: t+1 < T and f at t+1
    always f      f at every t' in [t, T)
    eventually f  f at some t' in [t, T)
    f until g     g at some t'' >= t, f at every t' in [t, t'')
    final         t = T-1
    before f      f at some t' in [0, t]   (reflexive past)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Mapping, Optional

from . import geometry
from .errors import (
    MissingRole,
    SortMismatchInBinding,
    TimeOutOfRange,
    UnboundSymbol,
)
from .geometry import ConstraintAtom, EvalContext, eval_constraint, eval_num_expr
from .model import POSITION_X, POSITION_Y, Scenario, Theory, Trace

Binding = Mapping[str, str]


# --- terms and formula AST ----------------------------------------------------


@dataclass(frozen=True)
class Sym:
    """A symbolic term: entity id, theory role, bound variable, or numeric
    parameter name (disambiguated at evaluation time)."""

    name: str


@dataclass(frozen=True)
class NumTerm:
    """A numeric argument, e.g. the threshold of closeTo."""

    expr: geometry.NumExpr


Term = object  # Sym | NumTerm


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Atom(Formula):
    relation: str
    args: tuple[Term, ...]
    span: Optional[object] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class Compare(Formula):
    constraint: ConstraintAtom
    span: Optional[object] = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class TrueF(Formula):
    pass


@dataclass(frozen=True)
class FalseF(Formula):
    pass


@dataclass(frozen=True)
class Not(Formula):
    operand: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    sort: str
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    sort: str
    body: Formula


@dataclass(frozen=True)
class Next(Formula):
    operand: Formula


@dataclass(frozen=True)
class Always(Formula):
    operand: Formula


@dataclass(frozen=True)
class Eventually(Formula):
    operand: Formula


@dataclass(frozen=True)
class Until(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Final(Formula):
    pass


@dataclass(frozen=True)
class Before(Formula):
    operand: Formula


# --- shared atom semantics ------------------------------------------------------


def _domain(ctx: EvalContext, sort: str) -> list[str]:
    """Declared entities whose sort is a subsort of `sort`, in declaration order."""
    return [e.id for e in ctx.entities.values() if ctx.hierarchy.subsort_of(e.sort, sort)]


def _resolve_atom_args(
    atom: Atom, trace: Trace, t: int, binding: Binding, ctx: EvalContext
) -> tuple[list[str], list]:
    entity_args: list[str] = []
    num_args: list = []
    for term in atom.args:
        if isinstance(term, NumTerm):
            num_args.append(eval_num_expr(term.expr, trace.states[t], ctx, binding))
        elif isinstance(term, Sym):
            name = term.name
            if name in binding:
                entity_args.append(binding[name])
            elif name in ctx.entities:
                entity_args.append(name)
            elif name in ctx.numeric_params:
                num_args.append(ctx.numeric_params[name])
            else:
                raise UnboundSymbol(f"symbol {name!r} is not bound and names no entity")
        else:
            raise TypeError(f"bad term {term!r}")
    return entity_args, num_args


def _positions(trace: Trace, t: int, ctx: EvalContext, e: str) -> tuple:
    decl = ctx.decl(e)
    st = trace.states[t]
    return tuple(st.value(e, p) for p in POSITION_X[decl.shape] + POSITION_Y[decl.shape])


def _relative_vector(trace: Trace, t: int, ctx: EvalContext, o: str, c: str):
    co = geometry.center(trace.states[t], ctx.decl(o))
    cc = geometry.center(trace.states[t], ctx.decl(c))
    if co is None or cc is None:
        from .errors import UnsupportedShapePair

        raise UnsupportedShapePair("relative position needs centers on both sides")
    return co[0] - cc[0], co[1] - cc[1]


def eval_atom(atom: Atom, trace: Trace, t: int, binding: Binding, ctx: EvalContext) -> bool:
    """State atom, or one of the step relations that also read state t+1.

    motion(e):      e's position changes between t and t+1 (false at the end).
    ccwStep(o, c):  o's position around c advances counterclockwise between t
                    and t+1: cross(p_t, p_t+1) > 0 for center-relative vectors.
                    Wrap-safe replacement for "the angle increases".
    thetaStep(o,c): the literal reading, theta at t+1 greater than at t.
    """
    entity_args, num_args = _resolve_atom_args(atom, trace, t, binding, ctx)
    name = atom.relation
    if name == "motion":
        (e,) = entity_args
        if t + 1 >= trace.length:
            return False
        return _positions(trace, t, ctx, e) != _positions(trace, t + 1, ctx, e)
    if name == "ccwStep":
        o, c = entity_args
        if t + 1 >= trace.length:
            return False
        x0, y0 = _relative_vector(trace, t, ctx, o, c)
        x1, y1 = _relative_vector(trace, t + 1, ctx, o, c)
        return x0 * y1 - y0 * x1 > 0
    if name == "thetaStep":
        o, c = entity_args
        if t + 1 >= trace.length:
            return False
        return geometry.angular_position(
            trace.states[t + 1], o, c, ctx
        ) > geometry.angular_position(trace.states[t], o, c, ctx)
    return geometry.eval_relation(name, entity_args, trace.states[t], ctx, num_args)


# --- production evaluator ------------------------------------------------------


def eval_formula(
    phi: Formula,
    trace: Trace,
    t: int,
    binding: Binding | None = None,
    ctx: EvalContext | None = None,
    _memo: dict | None = None,
) -> bool:
    """Truth of `phi` at instant `t`, with short-circuiting and memoization."""
    if ctx is None:
        raise TypeError("eval_formula needs an EvalContext")
    if not 0 <= t < trace.length:
        raise TimeOutOfRange(f"instant {t} outside trace of length {trace.length}")
    binding = dict(binding) if binding else {}
    memo: dict = {} if _memo is None else _memo
    return _eval(phi, trace, t, binding, ctx, memo)


def _eval(phi: Formula, trace: Trace, t: int, binding: dict, ctx: EvalContext, memo: dict) -> bool:
    key = (id(phi), t, tuple(sorted(binding.items())))
    if key in memo:
        return memo[key]
    result = _eval_node(phi, trace, t, binding, ctx, memo)
    memo[key] = result
    return result


def _eval_node(phi: Formula, trace: Trace, t: int, binding: dict, ctx: EvalContext, memo: dict) -> bool:
    T = trace.length
    if isinstance(phi, Atom):
        return eval_atom(phi, trace, t, binding, ctx)
    if isinstance(phi, Compare):
        return eval_constraint(phi.constraint, trace.states[t], ctx, binding)
    if isinstance(phi, TrueF):
        return True
    if isinstance(phi, FalseF):
        return False
    if isinstance(phi, Final):
        return t == T - 1
    if isinstance(phi, Not):
        return not _eval(phi.operand, trace, t, binding, ctx, memo)
    if isinstance(phi, And):
        return _eval(phi.left, trace, t, binding, ctx, memo) and _eval(
            phi.right, trace, t, binding, ctx, memo
        )
    if isinstance(phi, Or):
        return _eval(phi.left, trace, t, binding, ctx, memo) or _eval(
            phi.right, trace, t, binding, ctx, memo
        )
    if isinstance(phi, Implies):
        return (not _eval(phi.left, trace, t, binding, ctx, memo)) or _eval(
            phi.right, trace, t, binding, ctx, memo
        )
    if isinstance(phi, Forall):
        return all(
            _eval(phi.body, trace, t, {**binding, phi.var: e}, ctx, memo)
            for e in _domain(ctx, phi.sort)
        )
    if isinstance(phi, Exists):
        return any(
            _eval(phi.body, trace, t, {**binding, phi.var: e}, ctx, memo)
            for e in _domain(ctx, phi.sort)
        )
    if isinstance(phi, Next):
        return t + 1 < T and _eval(phi.operand, trace, t + 1, binding, ctx, memo)
    if isinstance(phi, Always):
        return all(_eval(phi.operand, trace, u, binding, ctx, memo) for u in range(t, T))
    if isinstance(phi, Eventually):
        return any(_eval(phi.operand, trace, u, binding, ctx, memo) for u in range(t, T))
    if isinstance(phi, Until):
        for u in range(t, T):
            if _eval(phi.right, trace, u, binding, ctx, memo):
                return all(_eval(phi.left, trace, v, binding, ctx, memo) for v in range(t, u))
        return False
    if isinstance(phi, Before):
        return any(_eval(phi.operand, trace, u, binding, ctx, memo) for u in range(0, t + 1))
    raise TypeError(f"not a formula: {phi!r}")


# --- reference oracle ------------------------------------------------------------

def reference_eval(
    phi: Formula,
    trace: Trace,
    t: int,
    binding: Binding | None = None,
    ctx: EvalContext | None = None,
) -> bool:
    """Naive recursive expansion with no sharing, memoization, or early exit.

    Same contract as eval_formula; exists to cross-check it.
    """
    if ctx is None:
        raise TypeError("reference_eval needs an EvalContext")
    if not 0 <= t < trace.length:
        raise TimeOutOfRange(f"instant {t} outside trace of length {trace.length}")
    return _ref(phi, trace, t, dict(binding) if binding else {}, ctx)


def _ref(phi: Formula, trace: Trace, t: int, binding: dict, ctx: EvalContext) -> bool:
    T = trace.length
    if isinstance(phi, Atom):
        return eval_atom(phi, trace, t, binding, ctx)
    if isinstance(phi, Compare):
        return eval_constraint(phi.constraint, trace.states[t], ctx, binding)
    if isinstance(phi, TrueF):
        return True
    if isinstance(phi, FalseF):
        return False
    if isinstance(phi, Final):
        return t == T - 1
    if isinstance(phi, Not):
        return not _ref(phi.operand, trace, t, binding, ctx)
    if isinstance(phi, And):
        results = [_ref(phi.left, trace, t, binding, ctx), _ref(phi.right, trace, t, binding, ctx)]
        return results[0] and results[1]
    if isinstance(phi, Or):
        results = [_ref(phi.left, trace, t, binding, ctx), _ref(phi.right, trace, t, binding, ctx)]
        return results[0] or results[1]
    if isinstance(phi, Implies):
        results = [_ref(phi.left, trace, t, binding, ctx), _ref(phi.right, trace, t, binding, ctx)]
        return (not results[0]) or results[1]
    if isinstance(phi, Forall):
        results = [
            _ref(phi.body, trace, t, {**binding, phi.var: e}, ctx)
            for e in _domain(ctx, phi.sort)
        ]
        return all(results)
    if isinstance(phi, Exists):
        results = [
            _ref(phi.body, trace, t, {**binding, phi.var: e}, ctx)
            for e in _domain(ctx, phi.sort)
        ]
        return any(results)
    if isinstance(phi, Next):
        if t + 1 >= T:
            return False
        return _ref(phi.operand, trace, t + 1, binding, ctx)
    if isinstance(phi, Always):
        results = [_ref(phi.operand, trace, u, binding, ctx) for u in range(t, T)]
        return all(results)
    if isinstance(phi, Eventually):
        results = [_ref(phi.operand, trace, u, binding, ctx) for u in range(t, T)]
        return any(results)
    if isinstance(phi, Until):
        witnessed = []
        for u in range(t, T):
            right_here = _ref(phi.right, trace, u, binding, ctx)
            left_upto = [_ref(phi.left, trace, v, binding, ctx) for v in range(t, u)]
            witnessed.append(right_here and all(left_upto))
        return any(witnessed)
    if isinstance(phi, Before):
        results = [_ref(phi.operand, trace, u, binding, ctx) for u in range(0, t + 1)]
        return any(results)
    raise TypeError(f"not a formula: {phi!r}")


def substitute_symbols(phi: Formula, mapping: Mapping[str, str]) -> Formula:
    """Rename free symbols (roles to entity ids, say); bound variables shadow."""

    def sub_expr(e, live):
        if isinstance(e, geometry.ParamRef):
            return geometry.ParamRef(live.get(e.entity, e.entity), e.param)
        if isinstance(e, geometry.DeltaExpr):
            return geometry.DeltaExpr(live.get(e.a, e.a), live.get(e.b, e.b))
        if isinstance(e, geometry.ThetaExpr):
            return geometry.ThetaExpr(live.get(e.a, e.a), live.get(e.b, e.b))
        if isinstance(e, geometry.MeasureExpr):
            return geometry.MeasureExpr(live.get(e.entity, e.entity))
        if isinstance(e, (geometry.Add, geometry.Sub, geometry.Mul)):
            return type(e)(sub_expr(e.left, live), sub_expr(e.right, live))
        if isinstance(e, geometry.Neg):
            return geometry.Neg(sub_expr(e.operand, live))
        return e

    def walk(f: Formula, shadowed: frozenset[str]) -> Formula:
        live = {k: v for k, v in mapping.items() if k not in shadowed}
        if isinstance(f, Atom):
            args = tuple(
                Sym(live.get(t.name, t.name)) if isinstance(t, Sym) else NumTerm(sub_expr(t.expr, live))
                for t in f.args
            )
            return Atom(f.relation, args, span=f.span)
        if isinstance(f, Compare):
            c = f.constraint
            return Compare(
                ConstraintAtom(sub_expr(c.lhs, live), c.cmp, sub_expr(c.rhs, live)), span=f.span
            )
        if isinstance(f, Not):
            return Not(walk(f.operand, shadowed))
        if isinstance(f, (And, Or, Implies, Until)):
            return type(f)(walk(f.left, shadowed), walk(f.right, shadowed))
        if isinstance(f, (Forall, Exists)):
            return type(f)(f.var, f.sort, walk(f.body, shadowed | {f.var}))
        if isinstance(f, (Next, Always, Eventually, Before)):
            return type(f)(walk(f.operand, shadowed))
        return f

    return walk(phi, frozenset())


# --- theory checking ---------------------------------------------------------------


@dataclass(frozen=True)
class Witness:
    """Earliest failing instant plus the innermost failing subformula there."""

    time: int
    formula: Formula


@dataclass(frozen=True)
class AxiomResult:
    index: int
    formula: Formula
    satisfied: bool
    witness: Optional[Witness] = None


@dataclass(frozen=True)
class CheckReport:
    theory: str
    binding: tuple[tuple[str, str], ...]
    axioms: tuple[AxiomResult, ...]

    @property
    def satisfied(self) -> bool:
        return all(a.satisfied for a in self.axioms)


def _find_witness(phi: Formula, trace: Trace, t: int, binding: dict, ctx: EvalContext, memo: dict) -> Witness:
    """Descend into a formula known to be false at t; leftmost depth-first."""
    T = trace.length

    def holds(f: Formula, u: int, b: dict) -> bool:
        return _eval(f, trace, u, b, ctx, memo)

    if isinstance(phi, And):
        for side in (phi.left, phi.right):
            if not holds(side, t, binding):
                return _find_witness(side, trace, t, binding, ctx, memo)
    if isinstance(phi, Or):
        return _find_witness(phi.left, trace, t, binding, ctx, memo)
    if isinstance(phi, Implies):
        return _find_witness(phi.right, trace, t, binding, ctx, memo)
    if isinstance(phi, Forall):
        for e in _domain(ctx, phi.sort):
            b = {**binding, phi.var: e}
            if not holds(phi.body, t, b):
                return _find_witness(phi.body, trace, t, b, ctx, memo)
    if isinstance(phi, Exists):
        domain = _domain(ctx, phi.sort)
        if domain:
            b = {**binding, phi.var: domain[0]}
            return _find_witness(phi.body, trace, t, b, ctx, memo)
    if isinstance(phi, Next):
        if t + 1 < T:
            return _find_witness(phi.operand, trace, t + 1, binding, ctx, memo)
    if isinstance(phi, Always):
        for u in range(t, T):
            if not holds(phi.operand, u, binding):
                return _find_witness(phi.operand, trace, u, binding, ctx, memo)
    if isinstance(phi, Eventually):
        return _find_witness(phi.operand, trace, t, binding, ctx, memo)
    if isinstance(phi, Until):
        hits = [u for u in range(t, T) if holds(phi.right, u, binding)]
        if not hits:
            return _find_witness(phi.right, trace, t, binding, ctx, memo)
        for u in range(t, hits[0]):
            if not holds(phi.left, u, binding):
                return _find_witness(phi.left, trace, u, binding, ctx, memo)
    if isinstance(phi, Before):
        return _find_witness(phi.operand, trace, 0, binding, ctx, memo)
    return Witness(time=t, formula=phi)


def validate_binding(theory: Theory, scenario: Scenario, binding: Binding) -> None:
    hierarchy = theory.hierarchy()
    entity_sorts = {e.id: e.sort for e in scenario.entities}
    for role, sort in theory.roles:
        if role not in binding:
            raise MissingRole(f"role {role!r} of theory {theory.name} is unbound")
        entity = binding[role]
        if entity not in entity_sorts:
            raise MissingRole(f"role {role!r} bound to unknown entity {entity!r}")
        if not hierarchy.subsort_of(entity_sorts[entity], sort):
            raise SortMismatchInBinding(
                f"role {role}:{sort} cannot be bound to {entity}:{entity_sorts[entity]}"
            )


def check_theory(
    theory: Theory,
    scenario: Scenario,
    binding: Binding,
    epsilon: Fraction = geometry.DEFAULT_EPSILON,
    tau: Fraction = geometry.DEFAULT_TAU,
    evaluator: Callable = eval_formula,
) -> CheckReport:
    """Evaluate every axiom at instant 0 under the role binding.

    Violated axioms carry a witness: the earliest failing instant and an
    innermost failing subformula, chosen leftmost depth-first.
    """
    if scenario.trace is None:
        raise TimeOutOfRange("checking needs a concrete trace; simulate first")
    validate_binding(theory, scenario, binding)
    ctx = EvalContext.for_scenario(scenario, theory, epsilon=epsilon, tau=tau)
    trace = scenario.trace
    results = []
    for i, axiom in enumerate(theory.axioms):
        memo: dict = {}
        if evaluator is eval_formula:
            ok = eval_formula(axiom, trace, 0, binding, ctx, _memo=memo)
        else:
            ok = evaluator(axiom, trace, 0, binding, ctx)
        witness = None
        if not ok:
            witness = _find_witness(axiom, trace, 0, dict(binding), ctx, memo)
        results.append(AxiomResult(index=i, formula=axiom, satisfied=ok, witness=witness))
    return CheckReport(theory=theory.name, binding=tuple(sorted(binding.items())), axioms=tuple(results))
