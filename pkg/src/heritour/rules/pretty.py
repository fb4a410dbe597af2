"""Canonical printer: parse(pretty_print(rules)) reproduces the same ASTs.

Parentheses are emitted only where the grammar's precedence would otherwise
reassociate the tree; point-award categories are always spelled out.
"""

from __future__ import annotations

from .model import (
    AwardBadge,
    AwardPoints,
    BinOp,
    BoolLit,
    CompleteChallenge,
    Effect,
    Expr,
    IntLit,
    Not,
    PayloadField,
    PlayerHasBadge,
    PlayerLevel,
    PlayerPoints,
    PoiVisitedRef,
    Rule,
    StrLit,
    UnlockPoi,
)

_LEVEL_OR = 1
_LEVEL_AND = 2
_LEVEL_NOT = 3
_LEVEL_CMP = 4
_LEVEL_SUM = 5
_LEVEL_PROD = 6
_LEVEL_ATOM = 7

_BINOP_LEVEL = {
    "or": _LEVEL_OR,
    "and": _LEVEL_AND,
    "<": _LEVEL_CMP, "<=": _LEVEL_CMP, ">": _LEVEL_CMP, ">=": _LEVEL_CMP,
    "==": _LEVEL_CMP, "!=": _LEVEL_CMP,
    "+": _LEVEL_SUM, "-": _LEVEL_SUM,
    "*": _LEVEL_PROD,
}


def pretty_print(rules: list[Rule]) -> str:
    return "\n".join(_print_rule(rule) for rule in rules)


def _print_rule(rule: Rule) -> str:
    lines = [f'rule {_quote(rule.name)} {{']
    lines.append(f"  on action {rule.trigger}")
    if rule.condition is not None:
        lines.append(f"  when {format_expr(rule.condition)}")
    lines.append("  then " + "; ".join(_print_effect(e) for e in rule.effects))
    lines.append("}")
    return "\n".join(lines) + "\n"


def _print_effect(effect: Effect) -> str:
    if isinstance(effect, AwardPoints):
        return f"award points {effect.amount} in {_quote(effect.category)}"
    if isinstance(effect, AwardBadge):
        return f"award badge {_quote(effect.name)}"
    if isinstance(effect, UnlockPoi):
        return f"unlock poi {_quote(effect.poi_id)}"
    if isinstance(effect, CompleteChallenge):
        return f"complete challenge {_quote(effect.challenge_id)}"
    raise AssertionError(f"unhandled effect {effect!r}")


def format_expr(expr: Expr) -> str:
    return _fmt(expr, _LEVEL_OR)


def _fmt(expr: Expr, min_level: int) -> str:
    text, level = _render(expr)
    if level < min_level:
        return f"({text})"
    return text


def _render(expr: Expr) -> tuple[str, int]:
    if isinstance(expr, IntLit):
        return str(expr.value), _LEVEL_ATOM
    if isinstance(expr, BoolLit):
        return ("true" if expr.value else "false"), _LEVEL_ATOM
    if isinstance(expr, StrLit):
        return _quote(expr.value), _LEVEL_ATOM
    if isinstance(expr, PayloadField):
        return f"action.payload.{expr.name}", _LEVEL_ATOM
    if isinstance(expr, PlayerPoints):
        return f"player.points({_quote(expr.category)})", _LEVEL_ATOM
    if isinstance(expr, PlayerLevel):
        return "player.level()", _LEVEL_ATOM
    if isinstance(expr, PlayerHasBadge):
        return f"player.has_badge({_quote(expr.name)})", _LEVEL_ATOM
    if isinstance(expr, PoiVisitedRef):
        return f"poi.visited({_quote(expr.poi_id)})", _LEVEL_ATOM
    if isinstance(expr, Not):
        return f"not {_fmt(expr.operand, _LEVEL_NOT)}", _LEVEL_NOT
    if isinstance(expr, BinOp):
        level = _BINOP_LEVEL[expr.op]
        # comparisons do not chain: both sides must sit at sum level or above
        left_min = _LEVEL_SUM if level == _LEVEL_CMP else level
        right_min = _LEVEL_SUM if level == _LEVEL_CMP else level + 1
        left = _fmt(expr.left, left_min)
        right = _fmt(expr.right, right_min)
        return f"{left} {expr.op} {right}", level
    raise AssertionError(f"unhandled expression node {expr!r}")


def _quote(text: str) -> str:
    escaped = (
        text.replace("\\", "\\\\")
        .replace('"', '\\"')
        .replace("\n", "\\n")
        .replace("\t", "\\t")
    )
    return f'"{escaped}"'
