"""Safety controller synthesis for switched systems whose mode switches are announced ahead of time."""

from .geometry import Polytope
from .preview import (
    PreviewAutomaton,
    PreviewInput,
    reduce_to_lower_bounds,
    validate_automaton,
)
from .problem import Problem, bundled, load_problem
from .synthesis import (
    SynthesisCertificate,
    WinningSet,
    con_inv,
    inv_pre,
    max_controlled_invariant,
)
from .systems import (
    AffineMode,
    AffineSwitchedSystem,
    FiniteMode,
    FiniteSwitchedSystem,
    FixpointOptions,
)

__version__ = "0.1.0"

__all__ = [
    "Polytope",
    "PreviewAutomaton",
    "PreviewInput",
    "reduce_to_lower_bounds",
    "validate_automaton",
    "Problem",
    "bundled",
    "load_problem",
    "SynthesisCertificate",
    "WinningSet",
    "con_inv",
    "inv_pre",
    "max_controlled_invariant",
    "AffineMode",
    "AffineSwitchedSystem",
    "FiniteMode",
    "FiniteSwitchedSystem",
    "FixpointOptions",
]
