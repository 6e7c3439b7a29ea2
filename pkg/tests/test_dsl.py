"""DSL parser and formatter."""

import pytest

from editloop.dsl import format_command, format_program, parse_canonical
from editloop.errors import DslSemanticError, DslSyntaxError
from editloop.rng import DetRng
from editloop.scene import Undo

from conftest import random_commands, random_state
from dsl_corpus import INVALID_CASES, VALID_CASES


@pytest.mark.parametrize("program,expected", VALID_CASES,
                         ids=[c[0][:40] for c in VALID_CASES])
def test_valid_programs(program, expected):
    assert parse_canonical(program) == expected


@pytest.mark.parametrize("program,exc_type,line,column", INVALID_CASES,
                         ids=[repr(c[0][:30]) for c in INVALID_CASES])
def test_invalid_programs_report_positions(program, exc_type, line, column):
    with pytest.raises(exc_type) as info:
        parse_canonical(program)
    assert info.value.line == line
    assert info.value.column == column


def test_syntax_errors_carry_expected_set():
    with pytest.raises(DslSyntaxError) as info:
        parse_canonical("frobnicate(x)")
    assert "adjust" in info.value.expected


def test_format_parse_round_trip():
    rng = DetRng(71)
    for _ in range(100):
        s = random_state(rng)
        commands = random_commands(rng, s)
        text = format_program(commands)
        assert parse_canonical(text) == commands
    assert parse_canonical(format_command(Undo())) == [Undo()]


def test_whitespace_insensitive():
    a = parse_canonical("remove(a);adjust(b,color=red)")
    b = parse_canonical("remove( a ) ;\n  adjust( b , color = red )")
    assert a == b
