"""editloop: multi-turn, layer-scoped image editing with a verifiable
symbolic scene oracle, folding session memory, a seeded benchmark engine,
and threshold-masked fidelity metrics."""

__version__ = "0.1.0"

from .scene import (  # noqa: F401
    Add,
    Adjust,
    EditCommand,
    ObjectSpec,
    Remove,
    Replace,
    Replacement,
    SceneState,
    Undo,
    apply_transition,
    diff_states,
)
from .raster import object_mask, render  # noqa: F401
from .dsl import format_program, parse_canonical  # noqa: F401
from .planning import EditSession, SessionConfig  # noqa: F401
from .synth import SessionSpec, build_session  # noqa: F401
