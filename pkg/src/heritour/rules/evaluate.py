"""Condition evaluation against an immutable pre-action snapshot."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from .model import (
    BinOp,
    BoolLit,
    Expr,
    IntLit,
    Not,
    PayloadField,
    PlayerHasBadge,
    PlayerLevel,
    PlayerPoints,
    PoiVisitedRef,
    StrLit,
)


@dataclass(frozen=True)
class EvalContext:
    """Snapshot of everything a condition may read.

    Built once per action from pre-action state; rules therefore cannot
    observe each other's effects within the same action.
    """

    payload: Mapping[str, object] = field(default_factory=dict)
    points_by_category: Mapping[str, int] = field(default_factory=dict)
    level: int = 1
    badges: frozenset[str] = frozenset()
    visited_pois: frozenset[str] = frozenset()  # nodes at visited or completed


def evaluate_condition(expr: Expr | None, ctx: EvalContext) -> bool:
    """Evaluate a typechecked condition; absent condition means True."""
    if expr is None:
        return True
    return bool(_eval(expr, ctx))


def _eval(expr: Expr, ctx: EvalContext):
    if isinstance(expr, (IntLit, BoolLit, StrLit)):
        return expr.value
    if isinstance(expr, PayloadField):
        return ctx.payload[expr.name]
    if isinstance(expr, PlayerPoints):
        return ctx.points_by_category.get(expr.category, 0)
    if isinstance(expr, PlayerLevel):
        return ctx.level
    if isinstance(expr, PlayerHasBadge):
        return expr.name in ctx.badges
    if isinstance(expr, PoiVisitedRef):
        return expr.poi_id in ctx.visited_pois
    if isinstance(expr, Not):
        return not _eval(expr.operand, ctx)
    if isinstance(expr, BinOp):
        if expr.op == "and":
            return _eval(expr.left, ctx) and _eval(expr.right, ctx)
        if expr.op == "or":
            return _eval(expr.left, ctx) or _eval(expr.right, ctx)
        left = _eval(expr.left, ctx)
        right = _eval(expr.right, ctx)
        if expr.op == "+":
            return left + right
        if expr.op == "-":
            return left - right
        if expr.op == "*":
            return left * right
        if expr.op == "<":
            return left < right
        if expr.op == "<=":
            return left <= right
        if expr.op == ">":
            return left > right
        if expr.op == ">=":
            return left >= right
        if expr.op == "==":
            return left == right
        if expr.op == "!=":
            return left != right
    raise AssertionError(f"unhandled expression node {expr!r}")
