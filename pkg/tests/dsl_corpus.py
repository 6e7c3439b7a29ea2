"""Thirty-case DSL corpus: valid programs with expected commands, invalid
programs with expected error positions. Shared by the parser tests and the
acceptance suite.
"""

from fractions import Fraction

from editloop.errors import DslSemanticError, DslSyntaxError
from editloop.scene import (
    Add,
    Adjust,
    ObjectSpec,
    Remove,
    Replace,
    Replacement,
    Undo,
)


def _spec(oid, shape, color, size, material, at):
    return ObjectSpec(object_id=oid, name=oid, color=color, size=size,
                      material=material, shape=shape, bbox=at, z_order=0)


# (program, expected command list)
VALID_CASES = [
    ("adjust(cooler, color=sea-foam-green)",
     [Adjust("cooler", "color", "sea-foam-green")]),
    ("adjust(cooler, color=sea-foam-green); "
     "add(flag, shape=triangle, color=red, size=small, material=matte, "
     "at=(0.7,0.1,0.1,0.1))",
     [Adjust("cooler", "color", "sea-foam-green"),
      Add(_spec("flag", "triangle", "red", "small", "matte",
                (Fraction(7, 10), Fraction(1, 10), Fraction(1, 10), Fraction(1, 10))))]),
    ("remove(crate)", [Remove("crate")]),
    ("undo()", [Undo()]),
    ("replace(cooler, name=lamp)",
     [Replace("cooler", Replacement(name="lamp"))]),
    ("replace(cooler, name=lamp, color=lime, shape=circle, at=(1/4,1/4,1/2,1/2))",
     [Replace("cooler", Replacement(name="lamp", color="lime", shape="circle",
                                    bbox=(Fraction(1, 4), Fraction(1, 4),
                                          Fraction(1, 2), Fraction(1, 2))))]),
    ("add(mug, shape=circle, color=navy, size=medium, material=glossy, "
     "at=(1/8, 1/8, 1/4, 1/4))",
     [Add(_spec("mug", "circle", "navy", "medium", "glossy",
                (Fraction(1, 8), Fraction(1, 8), Fraction(1, 4), Fraction(1, 4))))]),
    ("add(mug, shape=circle, color=navy, size=medium, material=glossy, "
     "at=(0.125, 0.125, 0.25, 0.25))",
     [Add(_spec("mug", "circle", "navy", "medium", "glossy",
                (Fraction(1, 8), Fraction(1, 8), Fraction(1, 4), Fraction(1, 4))))]),
    ("remove(a); remove(b);", [Remove("a"), Remove("b")]),
    ("  adjust( cooler ,\n    color = teal )  ",
     [Adjust("cooler", "color", "teal")]),
    ("adjust(cooler, color=Sea-Foam-Green)",
     [Adjust("cooler", "color", "sea-foam-green")]),
    ("adjust(cooler, material=stripey)",
     [Adjust("cooler", "material", "striped")]),
    ("adjust(box-one, size=large)", [Adjust("box-one", "size", "large")]),
    ("adjust(cooler, shape=circle)", [Adjust("cooler", "shape", "circle")]),
    ("remove(a); adjust(b, color=red); undo()",
     [Remove("a"), Adjust("b", "color", "red"), Undo()]),
    ("adjust(cooler, size=big)", [Adjust("cooler", "size", "large")]),
    ("replace(cooler, name=lamp, material=flat)",
     [Replace("cooler", Replacement(name="lamp", material="matte"))]),
    ("adjust(cooler, color=grey)", [Adjust("cooler", "color", "gray")]),
]

# (program, expected exception type, line, column)
INVALID_CASES = [
    ("", DslSyntaxError, 1, 1),
    ("adjust(cooler", DslSyntaxError, 1, 14),
    ("adjust(cooler, color=ultra-pink)", DslSemanticError, 1, 22),
    ("adjust(cooler, bbox=(1,2,3,4))", DslSemanticError, 1, 16),
    ("frobnicate(x)", DslSyntaxError, 1, 1),
    ("adjust cooler, color=red)", DslSyntaxError, 1, 8),
    ("add(flag, shape=triangle)", DslSemanticError, 1, 5),
    ("adjust(cooler, color=red", DslSyntaxError, 1, 25),
    ("remove()", DslSyntaxError, 1, 8),
    ("add(flag, shape=triangle, color=red, size=small, material=matte, "
     "at=(0.7,0.1,0.1))", DslSyntaxError, 1, 81),
    ("adjust(cooler, color=red, size=small)", DslSemanticError, 1, 27),
    (";", DslSyntaxError, 1, 1),
]

assert len(VALID_CASES) + len(INVALID_CASES) == 30
