"""Spatial relations as algebraic constraints over object parameters.

All decisions that can be made in exact rational arithmetic are: containment,
overlap and proximity compare squared distances as `Fraction`s. The tolerance
epsilon (itself a rational) only enters coincidence-style relations (contact)
and equality comparisons over the real-valued distance/angle functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .errors import (
    CoincidentCenters,
    NotMeasurable,
    UnboundSymbol,
    UnknownEntity,
    UnknownRelation,
    UnsupportedShapePair,
)
from .model import (
    BUILTIN_HIERARCHY,
    SHAPE_PARAMS,
    EntityDecl,
    RelationSig,
    Scenario,
    ShapeKind,
    SortHierarchy,
    State,
    Theory,
)

DEFAULT_EPSILON = Fraction(1, 10**9)
DEFAULT_TAU = Fraction(1, 2)


# --- numeric expressions ----------------------------------------------------


class NumExpr:
    """Marker base for numeric expression nodes."""

    __slots__ = ()


@dataclass(frozen=True)
class Const(NumExpr):
    value: Fraction


@dataclass(frozen=True)
class ParamRef(NumExpr):
    entity: str  # entity id, role, or bound variable
    param: str


@dataclass(frozen=True)
class NameRef(NumExpr):
    """Reference to a theory-level numeric parameter."""

    name: str


@dataclass(frozen=True)
class Add(NumExpr):
    left: NumExpr
    right: NumExpr


@dataclass(frozen=True)
class Sub(NumExpr):
    left: NumExpr
    right: NumExpr


@dataclass(frozen=True)
class Mul(NumExpr):
    left: NumExpr
    right: NumExpr


@dataclass(frozen=True)
class Neg(NumExpr):
    operand: NumExpr


@dataclass(frozen=True)
class DeltaExpr(NumExpr):
    """Euclidean distance between two entities (see `distance`)."""

    a: str
    b: str


@dataclass(frozen=True)
class ThetaExpr(NumExpr):
    """Angular position of a relative to b (see `angular_position`)."""

    a: str
    b: str


@dataclass(frozen=True)
class MeasureExpr(NumExpr):
    entity: str


@dataclass(frozen=True)
class ConstraintAtom:
    """lhs CMP rhs with CMP in {<, <=, =, !=, >=, >}.

    Equality and disequality over expressions containing distance or angle
    terms hold within the configured tolerance.
    """

    lhs: NumExpr
    cmp: str
    rhs: NumExpr


COMPARATORS = ("<", "<=", "=", "!=", ">=", ">")


# --- evaluation context -----------------------------------------------------


@dataclass
class EvalContext:
    """Everything relation evaluation needs besides the state itself."""

    entities: Mapping[str, EntityDecl]
    hierarchy: SortHierarchy = field(default_factory=lambda: BUILTIN_HIERARCHY)
    relations: Mapping[str, RelationSig] = field(default_factory=dict)
    numeric_params: Mapping[str, Fraction] = field(default_factory=dict)
    epsilon: Fraction = DEFAULT_EPSILON
    tau: Fraction = DEFAULT_TAU

    @classmethod
    def for_scenario(
        cls,
        scenario: Scenario,
        theory: Optional[Theory] = None,
        epsilon: Fraction = DEFAULT_EPSILON,
        tau: Fraction = DEFAULT_TAU,
    ) -> "EvalContext":
        hierarchy = theory.hierarchy() if theory is not None else BUILTIN_HIERARCHY
        relations = {sig.name: sig for sig in theory.relations} if theory else {}
        params = theory.params_map() if theory else {}
        return cls(
            entities=scenario.entity_map(),
            hierarchy=hierarchy,
            relations=relations,
            numeric_params=params,
            epsilon=epsilon,
            tau=tau,
        )

    def decl(self, entity: str) -> EntityDecl:
        try:
            return self.entities[entity]
        except KeyError:
            raise UnknownEntity(f"unknown entity {entity!r}") from None

    def resolve(self, symbol: str, binding: Mapping[str, str]) -> str:
        """Map a term symbol to an entity id through the binding."""
        if symbol in binding:
            return binding[symbol]
        if symbol in self.entities:
            return symbol
        raise UnboundSymbol(f"symbol {symbol!r} is not bound and names no entity")


# --- shape helpers ----------------------------------------------------------

_CENTERED = (ShapeKind.POINT, ShapeKind.CIRCLE, ShapeKind.RECTANGLE)


def center(state: State, decl: EntityDecl) -> Optional[tuple[Fraction, Fraction]]:
    if decl.shape in _CENTERED:
        return state.value(decl.id, "x"), state.value(decl.id, "y")
    return None


def bottom(state: State, decl: EntityDecl) -> Optional[Fraction]:
    if decl.shape is ShapeKind.POINT:
        return state.value(decl.id, "y")
    if decl.shape is ShapeKind.CIRCLE:
        return state.value(decl.id, "y") - state.value(decl.id, "r")
    if decl.shape is ShapeKind.RECTANGLE:
        return state.value(decl.id, "y") - state.value(decl.id, "h") / 2
    return None


def top(state: State, decl: EntityDecl) -> Optional[Fraction]:
    if decl.shape is ShapeKind.POINT:
        return state.value(decl.id, "y")
    if decl.shape is ShapeKind.CIRCLE:
        return state.value(decl.id, "y") + state.value(decl.id, "r")
    if decl.shape is ShapeKind.RECTANGLE:
        return state.value(decl.id, "y") + state.value(decl.id, "h") / 2
    if decl.shape is ShapeKind.FLOOR:
        return state.value(decl.id, "y")
    return None


def horizontal_interval(state: State, decl: EntityDecl) -> Optional[tuple[Fraction, Fraction]]:
    """Closed x-extent; None means unbounded (Floor)."""
    if decl.shape is ShapeKind.POINT:
        x = state.value(decl.id, "x")
        return x, x
    if decl.shape is ShapeKind.CIRCLE:
        x, r = state.value(decl.id, "x"), state.value(decl.id, "r")
        return x - r, x + r
    if decl.shape is ShapeKind.RECTANGLE:
        x, w = state.value(decl.id, "x"), state.value(decl.id, "w")
        return x - w / 2, x + w / 2
    if decl.shape is ShapeKind.SEGMENT:
        x1, x2 = state.value(decl.id, "x1"), state.value(decl.id, "x2")
        return min(x1, x2), max(x1, x2)
    return None  # Floor spans everything


def horizontal_overlap(state: State, a: EntityDecl, b: EntityDecl) -> bool:
    ia = horizontal_interval(state, a)
    ib = horizontal_interval(state, b)
    if ia is None or ib is None:
        return True
    return ia[0] <= ib[1] and ib[0] <= ia[1]


def distance_squared(state: State, ctx: EvalContext, a: str, b: str) -> Fraction:
    """Exact squared distance; anchors are centers, with Segment/Floor taking
    the nearest point to the other entity's center."""
    da, db = ctx.decl(a), ctx.decl(b)
    ca, cb = center(state, da), center(state, db)
    if ca is not None and cb is not None:
        return (ca[0] - cb[0]) ** 2 + (ca[1] - cb[1]) ** 2
    if ca is None and cb is not None:
        return _nearest_point_sq(state, da, cb)
    if cb is None and ca is not None:
        return _nearest_point_sq(state, db, ca)
    raise UnsupportedShapePair(
        f"distance between {da.shape.value} and {db.shape.value} needs a center on one side"
    )


def _nearest_point_sq(state: State, decl: EntityDecl, point: tuple[Fraction, Fraction]) -> Fraction:
    px, py = point
    if decl.shape is ShapeKind.FLOOR:
        return (py - state.value(decl.id, "y")) ** 2
    if decl.shape is ShapeKind.SEGMENT:
        x1, y1 = state.value(decl.id, "x1"), state.value(decl.id, "y1")
        x2, y2 = state.value(decl.id, "x2"), state.value(decl.id, "y2")
        dx, dy = x2 - x1, y2 - y1
        dd = dx * dx + dy * dy
        if dd == 0:
            return (px - x1) ** 2 + (py - y1) ** 2
        t = ((px - x1) * dx + (py - y1) * dy) / dd
        t = min(Fraction(1), max(Fraction(0), t))
        qx, qy = x1 + t * dx, y1 + t * dy
        return (px - qx) ** 2 + (py - qy) ** 2
    raise UnsupportedShapePair(f"no nearest-point rule for {decl.shape.value}")


def distance(state: State, a: str, b: str, ctx: EvalContext) -> float:
    """Euclidean distance as a real number."""
    return math.sqrt(distance_squared(state, ctx, a, b))


def angular_position(state: State, x: str, y: str, ctx: EvalContext) -> float:
    """Angle in (-pi, pi] of the vector from y's center to x's center."""
    cx = center(state, ctx.decl(x))
    cy = center(state, ctx.decl(y))
    if cx is None or cy is None:
        raise UnsupportedShapePair("angular position needs centers on both sides")
    dx, dy = cx[0] - cy[0], cx[1] - cy[1]
    if dx == 0 and dy == 0:
        raise CoincidentCenters(f"{x} and {y} share a center")
    return math.atan2(float(dy), float(dx))


def exact_measure(state: State, decl: EntityDecl) -> tuple[Fraction, bool]:
    """Area as (rational coefficient, multiplied-by-pi flag)."""
    if decl.shape is ShapeKind.POINT or decl.shape is ShapeKind.SEGMENT:
        return Fraction(0), False
    if decl.shape is ShapeKind.CIRCLE:
        return state.value(decl.id, "r") ** 2, True
    if decl.shape is ShapeKind.RECTANGLE:
        return state.value(decl.id, "w") * state.value(decl.id, "h"), False
    raise NotMeasurable(f"{decl.id} ({decl.shape.value}) has no measure")


def measure(state: State, e: str, ctx: EvalContext) -> float:
    coeff, has_pi = exact_measure(state, ctx.decl(e))
    return float(coeff) * math.pi if has_pi else float(coeff)


def _measure_less(state: State, ctx: EvalContext, a: str, b: str) -> bool:
    ca, pa = exact_measure(state, ctx.decl(a))
    cb, pb = exact_measure(state, ctx.decl(b))
    if pa == pb:
        return ca < cb
    return (float(ca) * math.pi if pa else float(ca)) < (float(cb) * math.pi if pb else float(cb))


# --- numeric expression evaluation -------------------------------------------


def eval_num_expr(
    e: NumExpr,
    state: State,
    ctx: EvalContext,
    binding: Mapping[str, str] | None = None,
):
    """Fold an expression to a Fraction, or a float once distance/angle/measure
    terms are involved."""
    binding = binding or {}
    if isinstance(e, Const):
        return e.value
    if isinstance(e, ParamRef):
        return state.value(ctx.resolve(e.entity, binding), e.param)
    if isinstance(e, NameRef):
        if e.name in ctx.numeric_params:
            return ctx.numeric_params[e.name]
        raise UnboundSymbol(f"unknown numeric parameter {e.name!r}")
    if isinstance(e, Add):
        return eval_num_expr(e.left, state, ctx, binding) + eval_num_expr(e.right, state, ctx, binding)
    if isinstance(e, Sub):
        return eval_num_expr(e.left, state, ctx, binding) - eval_num_expr(e.right, state, ctx, binding)
    if isinstance(e, Mul):
        return eval_num_expr(e.left, state, ctx, binding) * eval_num_expr(e.right, state, ctx, binding)
    if isinstance(e, Neg):
        return -eval_num_expr(e.operand, state, ctx, binding)
    if isinstance(e, DeltaExpr):
        return distance(state, ctx.resolve(e.a, binding), ctx.resolve(e.b, binding), ctx)
    if isinstance(e, ThetaExpr):
        return angular_position(state, ctx.resolve(e.a, binding), ctx.resolve(e.b, binding), ctx)
    if isinstance(e, MeasureExpr):
        return measure(state, ctx.resolve(e.entity, binding), ctx)
    raise TypeError(f"not a numeric expression: {e!r}")


def _contains_real_terms(e: NumExpr) -> bool:
    if isinstance(e, (DeltaExpr, ThetaExpr, MeasureExpr)):
        return True
    if isinstance(e, (Add, Sub, Mul)):
        return _contains_real_terms(e.left) or _contains_real_terms(e.right)
    if isinstance(e, Neg):
        return _contains_real_terms(e.operand)
    return False


def eval_constraint(
    c: ConstraintAtom,
    state: State,
    ctx: EvalContext,
    binding: Mapping[str, str] | None = None,
) -> bool:
    lhs = eval_num_expr(c.lhs, state, ctx, binding)
    rhs = eval_num_expr(c.rhs, state, ctx, binding)
    if c.cmp in ("=", "!="):
        if _contains_real_terms(c.lhs) or _contains_real_terms(c.rhs):
            equal = abs(lhs - rhs) <= ctx.epsilon
        else:
            equal = lhs == rhs
        return equal if c.cmp == "=" else not equal
    if c.cmp == "<":
        return lhs < rhs
    if c.cmp == "<=":
        return lhs <= rhs
    if c.cmp == ">":
        return lhs > rhs
    if c.cmp == ">=":
        return lhs >= rhs
    raise UnknownRelation(f"unknown comparator {c.cmp!r}")


# --- relation catalog ---------------------------------------------------------


def _sq(v: Fraction) -> Fraction:
    return v * v


def _within(value_sq: Fraction, bound: Fraction, eps: Fraction) -> bool:
    """|sqrt(value_sq) - bound| <= eps, decided in rational arithmetic."""
    hi = _sq(bound + eps)
    lo = _sq(bound - eps) if bound - eps > 0 else Fraction(0)
    return lo <= value_sq <= hi


def _contains(state: State, ctx: EvalContext, a: EntityDecl, b: EntityDecl, strict: bool) -> Optional[bool]:
    """a inside b; None when the shape pair is not supported.

    Strict containment turns every boundary comparison into a strict one; the
    non-strict variant realizes part-of.
    """
    lt = (lambda u, v: u < v) if strict else (lambda u, v: u <= v)
    sa, sb = a.shape, b.shape
    if sb is ShapeKind.CIRCLE:
        xc, yc, rc = (state.value(b.id, p) for p in ("x", "y", "r"))
        if sa is ShapeKind.POINT:
            d2 = _sq(state.value(a.id, "x") - xc) + _sq(state.value(a.id, "y") - yc)
            return lt(d2, _sq(rc))
        if sa is ShapeKind.CIRCLE:
            ra = state.value(a.id, "r")
            d2 = _sq(state.value(a.id, "x") - xc) + _sq(state.value(a.id, "y") - yc)
            return lt(ra, rc) and d2 <= _sq(rc - ra)
        if sa is ShapeKind.RECTANGLE:
            dx = abs(state.value(a.id, "x") - xc) + state.value(a.id, "w") / 2
            dy = abs(state.value(a.id, "y") - yc) + state.value(a.id, "h") / 2
            return lt(_sq(dx) + _sq(dy), _sq(rc))
    if sb is ShapeKind.RECTANGLE:
        xr, yr = state.value(b.id, "x"), state.value(b.id, "y")
        hw, hh = state.value(b.id, "w") / 2, state.value(b.id, "h") / 2
        if sa is ShapeKind.POINT:
            return lt(abs(state.value(a.id, "x") - xr), hw) and lt(
                abs(state.value(a.id, "y") - yr), hh
            )
        if sa is ShapeKind.CIRCLE:
            ra = state.value(a.id, "r")
            return lt(abs(state.value(a.id, "x") - xr) + ra, hw) and lt(
                abs(state.value(a.id, "y") - yr) + ra, hh
            )
        if sa is ShapeKind.RECTANGLE:
            return lt(abs(state.value(a.id, "x") - xr) + state.value(a.id, "w") / 2, hw) and lt(
                abs(state.value(a.id, "y") - yr) + state.value(a.id, "h") / 2, hh
            )
    return None


def _touches(state: State, ctx: EvalContext, a: EntityDecl, b: EntityDecl) -> Optional[bool]:
    """Boundary contact; symmetric; None when the pair is not supported."""
    eps = ctx.epsilon
    sa, sb = a.shape, b.shape
    if sa is ShapeKind.FLOOR and sb is ShapeKind.FLOOR:
        return None
    if sb is ShapeKind.FLOOR:
        ba = bottom(state, a)
        if ba is None:
            return None
        return abs(ba - state.value(b.id, "y")) <= eps
    if sa is ShapeKind.FLOOR:
        return _touches(state, ctx, b, a)
    if sa is ShapeKind.CIRCLE and sb is ShapeKind.CIRCLE:
        d2 = distance_squared(state, ctx, a.id, b.id)
        return _within(d2, state.value(a.id, "r") + state.value(b.id, "r"), eps)
    if {sa, sb} == {ShapeKind.POINT, ShapeKind.CIRCLE}:
        circ = a if sa is ShapeKind.CIRCLE else b
        d2 = distance_squared(state, ctx, a.id, b.id)
        return _within(d2, state.value(circ.id, "r"), eps)
    if sa is ShapeKind.RECTANGLE and sb is ShapeKind.RECTANGLE:
        dx = abs(state.value(a.id, "x") - state.value(b.id, "x"))
        dy = abs(state.value(a.id, "y") - state.value(b.id, "y"))
        sumw = (state.value(a.id, "w") + state.value(b.id, "w")) / 2
        sumh = (state.value(a.id, "h") + state.value(b.id, "h")) / 2
        if dx > sumw + eps or dy > sumh + eps:
            return False
        return dx >= sumw - eps or dy >= sumh - eps
    if {sa, sb} == {ShapeKind.POINT, ShapeKind.RECTANGLE}:
        p, r = (a, b) if sa is ShapeKind.POINT else (b, a)
        dx = abs(state.value(p.id, "x") - state.value(r.id, "x"))
        dy = abs(state.value(p.id, "y") - state.value(r.id, "y"))
        hw, hh = state.value(r.id, "w") / 2, state.value(r.id, "h") / 2
        if dx > hw + eps or dy > hh + eps:
            return False
        return dx >= hw - eps or dy >= hh - eps
    return None


def _interiors_overlap(state: State, ctx: EvalContext, a: EntityDecl, b: EntityDecl) -> Optional[bool]:
    sa, sb = a.shape, b.shape
    if sa is ShapeKind.CIRCLE and sb is ShapeKind.CIRCLE:
        d2 = distance_squared(state, ctx, a.id, b.id)
        touching_or_apart = d2 >= _sq(state.value(a.id, "r") + state.value(b.id, "r"))
        if touching_or_apart:
            return False
        return not _contains(state, ctx, a, b, True) and not _contains(state, ctx, b, a, True)
    if sa is ShapeKind.RECTANGLE and sb is ShapeKind.RECTANGLE:
        dx = abs(state.value(a.id, "x") - state.value(b.id, "x"))
        dy = abs(state.value(a.id, "y") - state.value(b.id, "y"))
        sumw = (state.value(a.id, "w") + state.value(b.id, "w")) / 2
        sumh = (state.value(a.id, "h") + state.value(b.id, "h")) / 2
        if dx >= sumw or dy >= sumh:
            return False
        return not _contains(state, ctx, a, b, True) and not _contains(state, ctx, b, a, True)
    return None


def _same_geometry(state: State, a: EntityDecl, b: EntityDecl) -> bool:
    if a.shape is not b.shape:
        return False
    return all(state.value(a.id, p) == state.value(b.id, p) for p in SHAPE_PARAMS[a.shape])


def rel_inside(state: State, ctx: EvalContext, a: str, b: str, strict: bool = True) -> bool:
    da, db = ctx.decl(a), ctx.decl(b)
    result = _contains(state, ctx, da, db, strict)
    if result is None:
        raise UnsupportedShapePair(
            f"inside({da.shape.value}, {db.shape.value}) is not defined"
        )
    return result


def rel_contact(state: State, ctx: EvalContext, a: str, b: str) -> bool:
    da, db = ctx.decl(a), ctx.decl(b)
    result = _touches(state, ctx, da, db)
    if result is None:
        raise UnsupportedShapePair(
            f"contact({da.shape.value}, {db.shape.value}) is not defined"
        )
    return result


def rel_on(state: State, ctx: EvalContext, a: str, b: str) -> bool:
    """a rests on b: contact, a's bottom at or above b's top, horizontal overlap.

    Total over all shape pairs: pairs lacking the needed notions are simply
    not in the relation (so quantified conditions like gravity's stay safe).
    """
    da, db = ctx.decl(a), ctx.decl(b)
    touching = _touches(state, ctx, da, db)
    if not touching:
        return False
    ba = bottom(state, da)
    tb = top(state, db)
    if ba is None or tb is None:
        return False
    return ba >= tb - ctx.epsilon and horizontal_overlap(state, da, db)


def rel_overlaps(state: State, ctx: EvalContext, a: str, b: str) -> bool:
    da, db = ctx.decl(a), ctx.decl(b)
    result = _interiors_overlap(state, ctx, da, db)
    if result is None:
        raise UnsupportedShapePair(
            f"overlaps({da.shape.value}, {db.shape.value}) is not defined"
        )
    return result


def rel_disjoint(state: State, ctx: EvalContext, a: str, b: str) -> bool:
    """No containment either way, no contact, no overlap.

    Component relations undefined for the pair count as not holding; two
    entities with identical geometry are never disjoint (a is never disjoint
    from itself).
    """
    da, db = ctx.decl(a), ctx.decl(b)
    if _same_geometry(state, da, db):
        return False
    for test in (
        _contains(state, ctx, da, db, False),
        _contains(state, ctx, db, da, False),
        _touches(state, ctx, da, db),
        _interiors_overlap(state, ctx, da, db),
    ):
        if test:
            return False
    return True


def rel_close_to(state: State, ctx: EvalContext, a: str, b: str, threshold=None) -> bool:
    tau = ctx.tau if threshold is None else threshold
    d2 = distance_squared(state, ctx, a, b)
    if isinstance(tau, Fraction):
        return tau >= 0 and d2 <= _sq(tau)
    return math.sqrt(d2) <= tau


def rel_smaller(state: State, ctx: EvalContext, a: str, b: str) -> bool:
    return _measure_less(state, ctx, a, b)


def rel_larger(state: State, ctx: EvalContext, a: str, b: str) -> bool:
    return _measure_less(state, ctx, b, a)


_BUILTIN_STATE_RELATIONS = {
    "inside": (2, 0, lambda st, ctx, ea, na: rel_inside(st, ctx, ea[0], ea[1])),
    "partOf": (2, 0, lambda st, ctx, ea, na: rel_inside(st, ctx, ea[0], ea[1], strict=False)),
    "contact": (2, 0, lambda st, ctx, ea, na: rel_contact(st, ctx, ea[0], ea[1])),
    "on": (2, 0, lambda st, ctx, ea, na: rel_on(st, ctx, ea[0], ea[1])),
    "overlaps": (2, 0, lambda st, ctx, ea, na: rel_overlaps(st, ctx, ea[0], ea[1])),
    "disjoint": (2, 0, lambda st, ctx, ea, na: rel_disjoint(st, ctx, ea[0], ea[1])),
    "closeTo": (2, 1, lambda st, ctx, ea, na: rel_close_to(st, ctx, ea[0], ea[1], na[0] if na else None)),
    "smaller": (2, 0, lambda st, ctx, ea, na: rel_smaller(st, ctx, ea[0], ea[1])),
    "larger": (2, 0, lambda st, ctx, ea, na: rel_larger(st, ctx, ea[0], ea[1])),
}

# Relations that read the next state as well; evaluated by the formula layer.
TEMPORAL_RELATIONS = ("motion", "ccwStep", "thetaStep")

BUILTIN_RELATIONS = tuple(_BUILTIN_STATE_RELATIONS) + TEMPORAL_RELATIONS


def is_builtin_relation(name: str) -> bool:
    return name in _BUILTIN_STATE_RELATIONS or name in TEMPORAL_RELATIONS


def builtin_arity(name: str) -> tuple[int, int]:
    """(entity arity, max numeric arity) of a builtin relation."""
    if name in _BUILTIN_STATE_RELATIONS:
        ea, na, _ = _BUILTIN_STATE_RELATIONS[name]
        return ea, na
    if name == "motion":
        return 1, 0
    return 2, 0  # ccwStep, thetaStep


def eval_relation(
    name: str,
    entity_args: Sequence[str],
    state: State,
    ctx: EvalContext,
    num_args: Sequence = (),
) -> bool:
    """Evaluate a state-local relation: a builtin from the catalog or a
    theory-defined constraint template."""
    sig = ctx.relations.get(name)
    if sig is not None and sig.definition is not None:
        if len(entity_args) != len(sig.arg_sorts):
            raise UnknownRelation(f"{name} expects {len(sig.arg_sorts)} arguments")
        template_binding = {f"arg{i + 1}": e for i, e in enumerate(entity_args)}
        return eval_constraint(sig.definition, state, ctx, template_binding)
    if name in _BUILTIN_STATE_RELATIONS:
        ea, na, fn = _BUILTIN_STATE_RELATIONS[name]
        if len(entity_args) != ea or len(num_args) > na:
            raise UnknownRelation(
                f"{name} takes {ea} entity argument(s)"
                + (f" and up to {na} numeric" if na else "")
            )
        for e in entity_args:
            ctx.decl(e)
        return fn(state, ctx, list(entity_args), list(num_args))
    raise UnknownRelation(f"unknown relation {name!r}")
