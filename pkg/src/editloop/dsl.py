"""Canonical edit-command DSL: tokenizer, recursive-descent parser, formatter.

The grammar (normative copy in docs/grammar.ebnf):

    program   = statement { ";" statement } [ ";" ] ;
    statement = add | remove | replace | adjust | undo ;
    add       = "add" "(" ident "," fields ")" ;
    remove    = "remove" "(" ident ")" ;
    replace   = "replace" "(" ident "," fields ")" ;
    adjust    = "adjust" "(" ident "," ident "=" value ")" ;
    undo      = "undo" "(" ")" ;
    fields    = field { "," field } ;
    field     = ident "=" ( value | box ) ;
    box       = "(" number "," number "," number "," number ")" ;

Whitespace is insignificant. Numbers are decimals ("0.25") or exact
fractions ("1/4"); both are read exactly. Errors carry 1-based line and
column positions and the expected-token set.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .errors import DslSemanticError, DslSyntaxError
from .scene import (
    Add,
    Adjust,
    EditCommand,
    ObjectSpec,
    Remove,
    Replace,
    Replacement,
    Undo,
    command_kind,
    make_bbox,
)
from .vocab import ADJUSTABLE_ATTRIBUTES, NOT_CANONICAL, canonicalize

_KEYWORDS = ("add", "remove", "replace", "adjust", "undo")
_PUNCT = "(),;="


@dataclass(frozen=True)
class Token:
    kind: str   # "ident" | "number" | one of _PUNCT | "eof"
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[Token]:
    tokens = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch.isspace():
            col += 1
            i += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(ch, ch, line, col))
            i += 1
            col += 1
            continue
        if ch.isalpha() or ch == "_":
            start, start_col = i, col
            while i < n and (text[i].isalnum() or text[i] in "_-"):
                i += 1
                col += 1
            tokens.append(Token("ident", text[start:i], line, start_col))
            continue
        if ch.isdigit() or ch == ".":
            start, start_col = i, col
            while i < n and (text[i].isdigit() or text[i] in "./"):
                i += 1
                col += 1
            tokens.append(Token("number", text[start:i], line, start_col))
            continue
        raise DslSyntaxError(line, col, ("identifier", "number", "punctuation"),
                             ch)
    tokens.append(Token("eof", "", line, col))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def advance(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, kind: str, expected_label: Optional[str] = None) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise DslSyntaxError(tok.line, tok.column,
                                 (expected_label or repr(kind),),
                                 tok.text or "end of input")
        return self.advance()

    def fail(self, expected: tuple[str, ...]):
        tok = self.peek()
        raise DslSyntaxError(tok.line, tok.column, expected,
                             tok.text or "end of input")

    # --- grammar ---------------------------------------------------------

    def parse_program(self) -> list[EditCommand]:
        if self.peek().kind == "eof":
            self.fail(("statement",))
        commands = [self.parse_statement()]
        while self.peek().kind == ";":
            self.advance()
            if self.peek().kind == "eof":
                break  # trailing separator
            commands.append(self.parse_statement())
        self.expect("eof", "';' or end of input")
        return commands

    def parse_statement(self) -> EditCommand:
        tok = self.peek()
        if tok.kind != "ident" or tok.text not in _KEYWORDS:
            self.fail(tuple(_KEYWORDS))
        keyword = self.advance()
        self.expect("(", "'('")
        if keyword.text == "undo":
            self.expect(")", "')'")
            return Undo()
        target = self.expect("ident", "object name")
        if keyword.text == "remove":
            self.expect(")", "')'")
            return Remove(target.text)
        self.expect(",", "','")
        fields = self.parse_fields(keyword.text)
        self.expect(")", "')'")
        if keyword.text == "adjust":
            return self._build_adjust(target, fields)
        if keyword.text == "add":
            return self._build_add(target, fields)
        return self._build_replace(target, fields)

    def parse_fields(self, context: str) -> list[tuple[Token, object]]:
        fields = [self.parse_field()]
        while self.peek().kind == ",":
            self.advance()
            fields.append(self.parse_field())
        return fields

    def parse_field(self) -> tuple[Token, object]:
        name = self.expect("ident", "field name")
        self.expect("=", "'='")
        if self.peek().kind == "(":
            return name, self.parse_box()
        value = self.expect("ident", "value")
        return name, value

    def parse_box(self):
        self.expect("(", "'('")
        numbers = [self.parse_number()]
        for _ in range(3):
            self.expect(",", "','")
            numbers.append(self.parse_number())
        self.expect(")", "')'")
        return tuple(numbers)

    def parse_number(self) -> Fraction:
        tok = self.expect("number", "number")
        try:
            if "/" in tok.text:
                return Fraction(tok.text)
            return Fraction(tok.text.rstrip("."))
        except (ValueError, ZeroDivisionError):
            raise DslSemanticError(tok.line, tok.column,
                                   f"bad number {tok.text!r}") from None

    # --- semantic construction --------------------------------------------

    def _canonical(self, attribute: str, tok: Token) -> str:
        value = canonicalize(attribute, tok.text)
        if value is NOT_CANONICAL:
            raise DslSemanticError(tok.line, tok.column,
                                   f"{tok.text!r} is not a {attribute} value")
        return value

    def _build_adjust(self, target: Token, fields) -> Adjust:
        if len(fields) != 1:
            name, _ = fields[1]
            raise DslSemanticError(name.line, name.column,
                                   "adjust takes exactly one attribute")
        name, value = fields[0]
        if name.text not in ADJUSTABLE_ATTRIBUTES:
            raise DslSemanticError(name.line, name.column,
                                   f"unknown attribute {name.text!r}")
        if not isinstance(value, Token):
            raise DslSemanticError(name.line, name.column,
                                   f"attribute {name.text!r} takes a word value")
        return Adjust(target.text, name.text, self._canonical(name.text, value))

    def _collect(self, fields, allowed: tuple[str, ...]) -> dict:
        out = {}
        for name, value in fields:
            if name.text not in allowed:
                raise DslSemanticError(name.line, name.column,
                                       f"unknown field {name.text!r}")
            if name.text in out:
                raise DslSemanticError(name.line, name.column,
                                       f"duplicate field {name.text!r}")
            if name.text == "at":
                if isinstance(value, Token):
                    raise DslSemanticError(name.line, name.column,
                                           "at takes a box (x,y,w,h)")
                out["at"] = value
            elif name.text == "name":
                if not isinstance(value, Token):
                    raise DslSemanticError(name.line, name.column,
                                           "name takes a word value")
                out["name"] = value.text
            else:
                out[name.text] = self._canonical(name.text, value)
        return out

    def _build_add(self, target: Token, fields) -> Add:
        out = self._collect(fields, ("shape", "color", "size", "material", "at"))
        for required in ("shape", "color", "size", "material", "at"):
            if required not in out:
                raise DslSemanticError(target.line, target.column,
                                       f"add requires field {required!r}")
        try:
            spec = ObjectSpec(
                object_id=target.text, name=target.text,
                color=out["color"], size=out["size"],
                material=out["material"], shape=out["shape"],
                bbox=make_bbox(*out["at"]), z_order=0,
            )
        except ValueError as exc:
            raise DslSemanticError(target.line, target.column, str(exc)) from None
        return Add(spec)

    def _build_replace(self, target: Token, fields) -> Replace:
        out = self._collect(fields, ("name", "shape", "color", "size",
                                     "material", "at"))
        if "name" not in out:
            raise DslSemanticError(target.line, target.column,
                                   "replace requires field 'name'")
        return Replace(target.text, Replacement(
            name=out["name"],
            color=out.get("color"),
            size=out.get("size"),
            material=out.get("material"),
            shape=out.get("shape"),
            bbox=make_bbox(*out["at"]) if "at" in out else None,
        ))


def parse_canonical(dsl_text: str) -> list[EditCommand]:
    """Parse a DSL program into canonical edit commands."""
    return _Parser(dsl_text).parse_program()


# --- formatting ----------------------------------------------------------------

def _format_fraction(f: Fraction) -> str:
    if f.denominator == 1:
        return str(f.numerator)
    return f"{f.numerator}/{f.denominator}"


def _format_box(bbox) -> str:
    return "(" + ",".join(_format_fraction(c) for c in bbox) + ")"


def format_command(command: EditCommand) -> str:
    """Render a command in the canonical DSL (inverse of parse_canonical)."""
    if isinstance(command, Adjust):
        return f"adjust({command.object_id}, {command.attribute}={command.value})"
    if isinstance(command, Remove):
        return f"remove({command.object_id})"
    if isinstance(command, Add):
        s = command.spec
        return (f"add({s.object_id}, shape={s.shape}, color={s.color}, "
                f"size={s.size}, material={s.material}, at={_format_box(s.bbox)})")
    if isinstance(command, Replace):
        r = command.replacement
        parts = [f"name={r.name}"]
        for attr in ("shape", "color", "size", "material"):
            if getattr(r, attr) is not None:
                parts.append(f"{attr}={getattr(r, attr)}")
        if r.bbox is not None:
            parts.append(f"at={_format_box(r.bbox)}")
        return f"replace({command.object_id}, {', '.join(parts)})"
    return "undo()"


def format_program(commands: list[EditCommand]) -> str:
    return "; ".join(format_command(c) for c in commands)
