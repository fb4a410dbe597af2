"""Immutable AST for the gamification rule DSL."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union


@dataclass(frozen=True)
class IntLit:
    value: int


@dataclass(frozen=True)
class BoolLit:
    value: bool


@dataclass(frozen=True)
class StrLit:
    value: str


@dataclass(frozen=True)
class PayloadField:
    """`action.payload.<name>` — a field of the triggering action."""

    name: str


@dataclass(frozen=True)
class PlayerPoints:
    """`player.points("<category>")` — points in one category."""

    category: str


@dataclass(frozen=True)
class PlayerLevel:
    """`player.level()`"""


@dataclass(frozen=True)
class PlayerHasBadge:
    """`player.has_badge("<name>")`"""

    name: str


@dataclass(frozen=True)
class PoiVisitedRef:
    """`poi.visited("<poi-id>")` — true once the node is visited or beyond."""

    poi_id: str


@dataclass(frozen=True)
class Not:
    operand: "Expr"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of: or and + - * < <= > >= == !=
    left: "Expr"
    right: "Expr"


Expr = Union[
    IntLit, BoolLit, StrLit, PayloadField, PlayerPoints, PlayerLevel,
    PlayerHasBadge, PoiVisitedRef, Not, BinOp,
]


DEFAULT_POINTS_CATEGORY = "general"


@dataclass(frozen=True)
class AwardPoints:
    amount: int
    category: str = DEFAULT_POINTS_CATEGORY

    def __post_init__(self):
        if self.amount <= 0:
            raise ValueError("award amount must be positive")


@dataclass(frozen=True)
class AwardBadge:
    name: str


@dataclass(frozen=True)
class UnlockPoi:
    poi_id: str


@dataclass(frozen=True)
class CompleteChallenge:
    challenge_id: str


Effect = Union[AwardPoints, AwardBadge, UnlockPoi, CompleteChallenge]


@dataclass(frozen=True)
class Rule:
    name: str
    trigger: str
    condition: Expr | None
    effects: tuple[Effect, ...]

    def __post_init__(self):
        if not self.name:
            raise ValueError("rule name must be non-empty")
        if not self.effects:
            raise ValueError("rule must carry at least one effect")
