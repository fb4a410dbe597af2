"""Gamification rule DSL: parse, typecheck, evaluate, pretty-print.

Rule files (`.grule`) bind an action trigger and an optional boolean
condition to a list of effects:

    # award knowledge points for a good quiz
    rule "quiz-scholar" {
      on action QUIZ_COMPLETED
      when action.payload.correct >= 3
      then award points 50 in "knowledge"; award badge "Scholar"
    }

ASTs are immutable values, safe to share; parsing and evaluation are pure.
"""

from .evaluate import EvalContext, evaluate_condition
from .lexer import Token, tokenize
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
from .parser import ParseError, parse
from .pretty import pretty_print
from .schema import Schemas, validate_payload
from .typecheck import TypeIssue, typecheck

__all__ = [
    "AwardBadge",
    "AwardPoints",
    "BinOp",
    "BoolLit",
    "CompleteChallenge",
    "Effect",
    "EvalContext",
    "Expr",
    "IntLit",
    "Not",
    "ParseError",
    "PayloadField",
    "PlayerHasBadge",
    "PlayerLevel",
    "PlayerPoints",
    "PoiVisitedRef",
    "Rule",
    "Schemas",
    "StrLit",
    "Token",
    "TypeIssue",
    "UnlockPoi",
    "evaluate_condition",
    "parse",
    "pretty_print",
    "tokenize",
    "typecheck",
    "validate_payload",
]
