"""Recursive-descent parser for the rule DSL.

Grammar (soft keywords, '#' line comments, strings double-quoted):

    ruleset  := rule+
    rule     := "rule" STRING "{" "on" "action" IDENT ("when" expr)?
                "then" effect (";" effect)* "}"
    effect   := "award" "points" INT ("in" STRING)?
              | "award" "badge" STRING
              | "unlock" "poi" STRING
              | "complete" "challenge" STRING
    expr     := orExpr
    orExpr   := andExpr ("or" andExpr)*
    andExpr  := notExpr ("and" notExpr)*
    notExpr  := "not" notExpr | cmp
    cmp      := sum (("<"|"<="|">"|">="|"=="|"!=") sum)?
    sum      := prod (("+"|"-") prod)*
    prod     := atom ("*" atom)*
    atom     := INT | "true" | "false" | STRING | "(" expr ")"
              | "action" "." "payload" "." IDENT
              | "player" "." ("points" "(" STRING ")" | "level" "(" ")"
                             | "has_badge" "(" STRING ")")
              | "poi" "." "visited" "(" STRING ")"

Omitting `in` on a points award defaults the category to "general".
"""

from __future__ import annotations

from ..errors import HeritourError
from .lexer import LexError, Token, tokenize
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

_CMP_OPS = {"<", "<=", ">", ">=", "==", "!="}


class ParseError(HeritourError):
    """Syntax error with 1-based source position and token context."""

    def __init__(self, line: int, column: int, expected: str, found: str):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(f"{line}:{column}: expected {expected}, found {found!r}")


def parse(source: str) -> list[Rule]:
    """Parse one ruleset; raises ParseError at the first offending token."""
    try:
        tokens = tokenize(source)
    except LexError as exc:
        raise ParseError(exc.line, exc.col, "valid token", exc.message) from None
    return _Parser(tokens).ruleset()


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        if tok.kind != "EOF":
            self.pos += 1
        return tok

    def fail(self, expected: str, tok: Token | None = None):
        tok = tok or self.peek()
        found = tok.text if tok.kind != "EOF" else "end of input"
        raise ParseError(tok.line, tok.col, expected, found)

    def at_word(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == "IDENT" and tok.text == word

    def expect_word(self, word: str):
        if not self.at_word(word):
            self.fail(f"'{word}'")
        self.advance()

    def expect_punct(self, punct: str):
        tok = self.peek()
        if tok.kind != "PUNCT" or tok.text != punct:
            self.fail(f"'{punct}'")
        self.advance()

    def expect_string(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "STRING":
            self.fail(what)
        self.advance()
        return tok.value

    def expect_ident(self, what: str) -> str:
        tok = self.peek()
        if tok.kind != "IDENT":
            self.fail(what)
        self.advance()
        return tok.text

    # --- grammar -------------------------------------------------------

    def ruleset(self) -> list[Rule]:
        rules = [self.rule()]
        while not self.peek().kind == "EOF":
            rules.append(self.rule())
        return rules

    def rule(self) -> Rule:
        self.expect_word("rule")
        name_tok = self.peek()
        name = self.expect_string("rule name string")
        if not name:
            self.fail("non-empty rule name", name_tok)
        self.expect_punct("{")
        self.expect_word("on")
        self.expect_word("action")
        trigger = self.expect_ident("action type identifier")
        condition: Expr | None = None
        if self.at_word("when"):
            self.advance()
            condition = self.expr()
        self.expect_word("then")
        effects = [self.effect()]
        while self.peek().kind == "PUNCT" and self.peek().text == ";":
            self.advance()
            effects.append(self.effect())
        self.expect_punct("}")
        return Rule(name=name, trigger=trigger, condition=condition, effects=tuple(effects))

    def effect(self) -> Effect:
        if self.at_word("award"):
            self.advance()
            if self.at_word("points"):
                self.advance()
                amount_tok = self.peek()
                if amount_tok.kind != "INT":
                    self.fail("point amount")
                self.advance()
                if amount_tok.value <= 0:
                    self.fail("positive point amount", amount_tok)
                if self.at_word("in"):
                    self.advance()
                    category = self.expect_string("category string")
                    return AwardPoints(amount=amount_tok.value, category=category)
                return AwardPoints(amount=amount_tok.value)
            if self.at_word("badge"):
                self.advance()
                return AwardBadge(name=self.expect_string("badge name string"))
            self.fail("'points' or 'badge'")
        if self.at_word("unlock"):
            self.advance()
            self.expect_word("poi")
            return UnlockPoi(poi_id=self.expect_string("poi id string"))
        if self.at_word("complete"):
            self.advance()
            self.expect_word("challenge")
            return CompleteChallenge(challenge_id=self.expect_string("challenge id string"))
        self.fail("effect ('award', 'unlock' or 'complete')")

    def expr(self) -> Expr:
        return self.or_expr()

    def or_expr(self) -> Expr:
        node = self.and_expr()
        while self.at_word("or"):
            self.advance()
            node = BinOp("or", node, self.and_expr())
        return node

    def and_expr(self) -> Expr:
        node = self.not_expr()
        while self.at_word("and"):
            self.advance()
            node = BinOp("and", node, self.not_expr())
        return node

    def not_expr(self) -> Expr:
        if self.at_word("not"):
            self.advance()
            return Not(self.not_expr())
        return self.cmp()

    def cmp(self) -> Expr:
        node = self.sum()
        tok = self.peek()
        if tok.kind == "OP" and tok.text in _CMP_OPS:
            self.advance()
            node = BinOp(tok.text, node, self.sum())
        return node

    def sum(self) -> Expr:
        node = self.prod()
        while self.peek().kind == "OP" and self.peek().text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.prod())
        return node

    def prod(self) -> Expr:
        node = self.atom()
        while self.peek().kind == "OP" and self.peek().text == "*":
            self.advance()
            node = BinOp("*", node, self.atom())
        return node

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.kind == "INT":
            self.advance()
            return IntLit(tok.value)
        if tok.kind == "STRING":
            self.advance()
            return StrLit(tok.value)
        if tok.kind == "IDENT":
            if tok.text == "true":
                self.advance()
                return BoolLit(True)
            if tok.text == "false":
                self.advance()
                return BoolLit(False)
            if tok.text == "action":
                self.advance()
                self.expect_punct(".")
                self.expect_word("payload")
                self.expect_punct(".")
                return PayloadField(name=self.expect_ident("payload field name"))
            if tok.text == "player":
                self.advance()
                self.expect_punct(".")
                if self.at_word("points"):
                    self.advance()
                    self.expect_punct("(")
                    category = self.expect_string("category string")
                    self.expect_punct(")")
                    return PlayerPoints(category=category)
                if self.at_word("level"):
                    self.advance()
                    self.expect_punct("(")
                    self.expect_punct(")")
                    return PlayerLevel()
                if self.at_word("has_badge"):
                    self.advance()
                    self.expect_punct("(")
                    name = self.expect_string("badge name string")
                    self.expect_punct(")")
                    return PlayerHasBadge(name=name)
                self.fail("'points', 'level' or 'has_badge'")
            if tok.text == "poi":
                self.advance()
                self.expect_punct(".")
                self.expect_word("visited")
                self.expect_punct("(")
                poi_id = self.expect_string("poi id string")
                self.expect_punct(")")
                return PoiVisitedRef(poi_id=poi_id)
        if tok.kind == "PUNCT" and tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect_punct(")")
            return node
        self.fail("expression")
