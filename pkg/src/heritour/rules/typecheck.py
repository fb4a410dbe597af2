"""Static typing of rule conditions against action schemas.

Checking happens at load time so a bad rule can never surface mid-visit.
"""

from __future__ import annotations

from dataclasses import dataclass

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
    Rule,
    StrLit,
)
from .schema import Schemas

_ARITH_OPS = {"+", "-", "*"}
_ORDER_OPS = {"<", "<=", ">", ">="}
_EQ_OPS = {"==", "!="}


@dataclass(frozen=True)
class TypeIssue:
    rule: str
    path: str
    kind: str  # unknown-action-type | unknown-payload-field | operand-type-mismatch | duplicate-rule-name
    message: str

    def __str__(self) -> str:
        return f"rule {self.rule!r} at {self.path}: [{self.kind}] {self.message}"


def typecheck(rules: list[Rule], schemas: Schemas) -> list[TypeIssue]:
    """Return all issues; an empty list means the rule set is well-typed."""
    issues: list[TypeIssue] = []
    seen: set[str] = set()
    for rule in rules:
        if rule.name in seen:
            issues.append(
                TypeIssue(rule.name, "name", "duplicate-rule-name", "rule name reused in this set")
            )
        seen.add(rule.name)
        if rule.trigger not in schemas:
            issues.append(
                TypeIssue(rule.name, "trigger", "unknown-action-type",
                          f"action type {rule.trigger!r} has no schema")
            )
            continue
        if rule.condition is None:
            continue
        fields = schemas[rule.trigger]
        checker = _Checker(rule.name, fields, issues)
        cond_type = checker.infer(rule.condition, "condition")
        if cond_type not in ("bool", None):
            issues.append(
                TypeIssue(rule.name, "condition", "operand-type-mismatch",
                          f"condition must be bool, got {cond_type}")
            )
    return issues


class _Checker:
    def __init__(self, rule_name: str, fields: dict[str, str], issues: list[TypeIssue]):
        self.rule_name = rule_name
        self.fields = fields
        self.issues = issues

    def report(self, path: str, kind: str, message: str):
        self.issues.append(TypeIssue(self.rule_name, path, kind, message))

    def infer(self, expr: Expr, path: str) -> str | None:
        """Infer the expression's scalar type; None signals already-reported."""
        if isinstance(expr, IntLit):
            return "int"
        if isinstance(expr, BoolLit):
            return "bool"
        if isinstance(expr, StrLit):
            return "string"
        if isinstance(expr, PayloadField):
            if expr.name not in self.fields:
                self.report(path, "unknown-payload-field",
                            f"payload has no field {expr.name!r}")
                return None
            return self.fields[expr.name]
        if isinstance(expr, (PlayerPoints, PlayerLevel)):
            return "int"
        if isinstance(expr, (PlayerHasBadge, PoiVisitedRef)):
            return "bool"
        if isinstance(expr, Not):
            t = self.infer(expr.operand, path + ".operand")
            if t not in ("bool", None):
                self.report(path, "operand-type-mismatch", f"'not' needs bool, got {t}")
            return "bool"
        if isinstance(expr, BinOp):
            lt = self.infer(expr.left, path + ".left")
            rt = self.infer(expr.right, path + ".right")
            if expr.op in ("and", "or"):
                for side, t in (("left", lt), ("right", rt)):
                    if t not in ("bool", None):
                        self.report(path, "operand-type-mismatch",
                                    f"{expr.op!r} {side} operand must be bool, got {t}")
                return "bool"
            if expr.op in _ARITH_OPS:
                for side, t in (("left", lt), ("right", rt)):
                    if t not in ("int", None):
                        self.report(path, "operand-type-mismatch",
                                    f"{expr.op!r} {side} operand must be int, got {t}")
                return "int"
            if expr.op in _ORDER_OPS:
                for side, t in (("left", lt), ("right", rt)):
                    if t not in ("int", None):
                        self.report(path, "operand-type-mismatch",
                                    f"{expr.op!r} {side} operand must be int, got {t}")
                return "bool"
            if expr.op in _EQ_OPS:
                if lt is not None and rt is not None and lt != rt:
                    self.report(path, "operand-type-mismatch",
                                f"{expr.op!r} compares {lt} with {rt}")
                return "bool"
        raise AssertionError(f"unhandled expression node {expr!r}")
