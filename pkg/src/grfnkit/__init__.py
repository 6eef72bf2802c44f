"""grfnkit: lift Fortran models into grounded function networks.

The pipeline runs front to back as parse -> lower -> ground -> analyze:

- fortran / ir / render: the source front-end and its expression IR
- modgraph: module dependency graphs and wavefront schedules
- grfn: the function-network IR, lowering, JSON and DOT forms
- interp: scalar execution and forward-mode differentiation
- tape: batched evaluation (numba kernel with a numpy fallback)
- equations: LaTeX equation parsing into the shared expression IR
- grounding: comment/text/equation links onto network variables
- compare: shared/path/control/isolated overlap classification
- sensitivity: Sobol indices and top-pair response surfaces
"""

from .errors import (
    CycleError,
    DomainError,
    ExecutionError,
    FortranSyntaxError,
    GrfnkitError,
    LatexParseError,
    LoweringError,
    NoAssignNodesError,
    NonDifferentiableError,
    UnboundInputError,
    UnsupportedFeatureError,
    ValidationError,
)
from .fortran import parse_file, parse_source
from .grfn import Grfn, lower
from .interp import Dual, execute, gradient
from .modgraph import build_dependency_graph, schedule
from .equations import EquationIR, SymbolHints, parse_latex
from .grounding import GroundingRecord, align_symbols, ground, match_equation
from .compare import structural_compare
from .sensitivity import Bounds, SensitivityReport, sobol_indices, top_pair_surface

__version__ = "0.1.0"

__all__ = [
    "Bounds",
    "CycleError",
    "DomainError",
    "Dual",
    "EquationIR",
    "ExecutionError",
    "FortranSyntaxError",
    "Grfn",
    "GrfnkitError",
    "GroundingRecord",
    "LatexParseError",
    "LoweringError",
    "NoAssignNodesError",
    "NonDifferentiableError",
    "SensitivityReport",
    "SymbolHints",
    "UnboundInputError",
    "UnsupportedFeatureError",
    "ValidationError",
    "align_symbols",
    "build_dependency_graph",
    "execute",
    "gradient",
    "ground",
    "lower",
    "match_equation",
    "parse_file",
    "parse_latex",
    "parse_source",
    "schedule",
    "sobol_indices",
    "structural_compare",
    "top_pair_surface",
    "__version__",
]
