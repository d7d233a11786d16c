"""Hand-written tokenizer and recursive-descent parser for .adl files.

Grammar (whitespace and ``%`` line comments are insignificant):

    program    := clause*
    clause     := head ( ":-" body )? "."
    head       := [ principal "attests" ] atom
    body       := literal ( "," literal )*
    literal    := [ "not" ] [ principal "attests" ] atom
                | operand cmp operand
    operand    := term ( "+" intconst )?        (sum only with a variable base)
    atom       := predicate ( "(" term ("," term)* ")" )?
    principal  := string | variable
    cmp        := "<" | "<=" | "=" | "!=" | ">" | ">="

Strings are single-quoted; a backslash inside a string is ordinary content
(``'\\ready_to_fly'`` is the seven.. nine characters as written), except that
``\\'`` escapes a quote.  Integers are signed 64-bit.
"""

from __future__ import annotations

from dataclasses import dataclass

from ..errors import SpecSyntaxError
from .terms import (
    INT64_MAX,
    INT64_MIN,
    Atom,
    AttestedLit,
    ComparisonLit,
    HeadLit,
    IntConst,
    Literal,
    NegatedLit,
    PlainLit,
    Rule,
    RuleSet,
    StrConst,
    Sum,
    SymConst,
    Term,
    Variable,
)

_PUNCT = {":-", "(", ")", ",", ".", "<=", ">=", "!=", "<", ">", "=", "+"}


@dataclass(frozen=True)
class Token:
    kind: str  # name | string | int | punct | eof
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    i, line, col = 0, 1, 1
    n = len(text)

    def error(msg: str) -> SpecSyntaxError:
        return SpecSyntaxError(msg, line, col)

    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c.isspace():
            i += 1
            col += 1
            continue
        if c == "%":
            while i < n and text[i] != "\n":
                i += 1
            continue
        start_line, start_col = line, col
        if c == "'":
            i += 1
            col += 1
            chars: list[str] = []
            while True:
                if i >= n:
                    raise SpecSyntaxError("unterminated string", start_line, start_col)
                c = text[i]
                if c == "\n":
                    raise SpecSyntaxError("unterminated string", start_line, start_col)
                if c == "\\" and i + 1 < n and text[i + 1] == "'":
                    chars.append("'")
                    i += 2
                    col += 2
                    continue
                if c == "'":
                    i += 1
                    col += 1
                    break
                chars.append(c)
                i += 1
                col += 1
            tokens.append(Token("string", "".join(chars), start_line, start_col))
            continue
        if c.isdigit() or (c == "-" and i + 1 < n and text[i + 1].isdigit()):
            j = i + 1
            while j < n and text[j].isdigit():
                j += 1
            lexeme = text[i:j]
            value = int(lexeme)
            if not (INT64_MIN <= value <= INT64_MAX):
                raise error(f"integer literal out of 64-bit range: {lexeme}")
            tokens.append(Token("int", lexeme, start_line, start_col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(Token("name", text[i:j], start_line, start_col))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        if two in _PUNCT:
            tokens.append(Token("punct", two, start_line, start_col))
            i += 2
            col += 2
            continue
        if c in _PUNCT:
            tokens.append(Token("punct", c, start_line, start_col))
            i += 1
            col += 1
            continue
        raise error(f"unexpected character {c!r}")
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def error(self, msg: str) -> SpecSyntaxError:
        t = self.cur
        shown = t.text or "end of input"
        return SpecSyntaxError(f"{msg}, found {shown!r}", t.line, t.column)

    def advance(self) -> Token:
        t = self.cur
        if t.kind != "eof":
            self.pos += 1
        return t

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.cur
        if t.kind == kind and (text is None or t.text == text):
            return self.advance()
        return None

    def expect(self, kind: str, text: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            want = text if text is not None else kind
            raise self.error(f"expected {want!r}")
        return t

    # --- grammar -------------------------------------------------------

    def program(self) -> RuleSet:
        rules: list[Rule] = []
        facts: list[HeadLit] = []
        while self.cur.kind != "eof":
            head = self.head_literal()
            if self.accept("punct", ":-"):
                body = self.body()
                self.expect("punct", ".")
                rules.append(Rule(head=head, body=tuple(body), id=len(rules)))
            else:
                self.expect("punct", ".")
                if not head.atom.is_ground():
                    t = self.tokens[self.pos - 1]
                    raise SpecSyntaxError("fact must be ground", t.line, t.column)
                facts.append(head)
        return RuleSet(rules=tuple(rules), facts=tuple(facts))

    def head_literal(self) -> HeadLit:
        lit = self.plain_or_attested()
        return lit

    def body(self) -> list[Literal]:
        literals = [self.literal()]
        while self.accept("punct", ","):
            literals.append(self.literal())
        return literals

    def literal(self) -> Literal:
        if self.cur.kind == "name" and self.cur.text == "not":
            # `not` is only a negation marker when an atom follows; a predicate
            # named `not` is not representable, which Listing-style specs never need.
            self.advance()
            inner = self.plain_or_attested()
            return NegatedLit(inner)
        # Could be an atom literal or a comparison; decide by lookahead.
        if self.is_comparison_ahead():
            return self.comparison()
        return self.plain_or_attested()

    def is_comparison_ahead(self) -> bool:
        """True when the upcoming tokens form `operand cmp ...`."""
        i = self.pos
        toks = self.tokens
        if toks[i].kind in ("int",) or (toks[i].kind == "string"):
            pass
        elif toks[i].kind == "name":
            # name followed by "(" is an atom; name followed by "attests" too
            nxt = toks[i + 1]
            if nxt.kind == "punct" and nxt.text == "(":
                return False
            if nxt.kind == "name" and nxt.text == "attests":
                return False
        else:
            return False
        i += 1
        if toks[i].kind == "punct" and toks[i].text == "+":
            i += 2  # skip "+ int"
        return toks[i].kind == "punct" and toks[i].text in ("<", "<=", "=", "!=", ">", ">=")

    def comparison(self) -> ComparisonLit:
        lhs = self.operand()
        t = self.cur
        if t.kind == "punct" and t.text in ("<", "<=", "=", "!=", ">", ">="):
            self.advance()
        else:
            raise self.error("expected comparison operator")
        rhs = self.operand()
        return ComparisonLit(lhs=lhs, op=t.text, rhs=rhs)

    def operand(self) -> Term:
        base = self.term()
        if self.accept("punct", "+"):
            off = self.expect("int")
            if not isinstance(base, Variable):
                raise self.error("left side of '+' must be a variable")
            return Sum(var=base, offset=IntConst(int(off.text)))
        return base

    def plain_or_attested(self) -> PlainLit | AttestedLit:
        # principal "attests" atom  |  atom
        if self.cur.kind == "string":
            principal: Term = StrConst(self.advance().text)
            self.expect("name", "attests")
            return AttestedLit(principal=principal, atom=self.atom())
        if (
            self.cur.kind == "name"
            and self.cur.text[0].isupper()
            and self.tokens[self.pos + 1].kind == "name"
            and self.tokens[self.pos + 1].text == "attests"
        ):
            principal = Variable(self.advance().text)
            self.advance()  # attests
            return AttestedLit(principal=principal, atom=self.atom())
        return PlainLit(self.atom())

    def atom(self) -> Atom:
        t = self.expect("name")
        if not t.text[0].islower():
            raise SpecSyntaxError(
                f"predicate must start lowercase, found {t.text!r}", t.line, t.column
            )
        args: list[Term] = []
        if self.accept("punct", "("):
            args.append(self.term())
            while self.accept("punct", ","):
                args.append(self.term())
            self.expect("punct", ")")
        return Atom(predicate=t.text, args=tuple(args))

    def term(self) -> Term:
        t = self.cur
        if t.kind == "string":
            self.advance()
            return StrConst(t.text)
        if t.kind == "int":
            self.advance()
            return IntConst(int(t.text))
        if t.kind == "name":
            if t.text[0].isupper():
                self.advance()
                return Variable(t.text)
            if t.text[0].islower():
                self.advance()
                return SymConst(t.text)
        raise self.error("expected a term")


def parse_spec(text: str) -> RuleSet:
    """Parse .adl source into a RuleSet, preserving rule order."""
    return _Parser(tokenize(text)).program()


def parse_literal(text: str) -> Literal:
    """Parse a single body literal (test/REPL convenience)."""
    p = _Parser(tokenize(text))
    lit = p.literal()
    p.expect("eof")
    return lit


def parse_atom(text: str) -> Atom:
    """Parse a single atom such as ``forbidden(Id)``."""
    p = _Parser(tokenize(text))
    atom = p.atom()
    p.expect("eof")
    return atom
