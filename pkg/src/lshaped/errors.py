"""Exception hierarchy shared across the solver stack.

Errors are grouped by the exit-code class the CLI maps them to: usage
(bad parameters / config), data (instance files), and numeric (solver
breakdown).
"""

from __future__ import annotations


class SolverError(Exception):
    """Base class for all errors raised by this package."""


# ---------------------------------------------------------------- usage-class
class BadParameter(SolverError):
    """A caller-supplied parameter is outside its legal range."""


class BadInput(SolverError):
    """Structurally invalid input (empty candidate list, empty scenario set)."""


class MissingParameter(SolverError):
    """A policy or bound formula needs a parameter that was not supplied."""


class TooLarge(SolverError):
    """Requested construction exceeds a configured size cap."""


class EnumerationCapExceeded(SolverError):
    """Joint scenario support exceeds the enumeration cap."""


# ----------------------------------------------------------------- data-class
class BadProbabilities(SolverError):
    """Probabilities are negative or do not sum to one."""


class EmptyFeasibleSet(SolverError):
    """The first-stage feasible region is empty."""


class UnboundedFirstStage(SolverError):
    """A first-stage variable has no finite bound, even after tightening."""


class MalformedLine(SolverError):
    """An SMPS line could not be parsed; carries file and line number."""

    def __init__(self, message: str, source: str = "?", line_no: int = 0):
        super().__init__(f"{source}:{line_no}: {message}")
        self.source = source
        self.line_no = line_no


class MalformedDocument(SolverError):
    """A native instance document is truncated or schema-invalid."""


class UnsupportedSection(SolverError):
    """An SMPS section or feature outside the supported subset."""


class UnknownRowOrColumn(SolverError):
    """A TIME or STOCH record references a name absent from the CORE file."""


class StochasticRecourse(SolverError):
    """A STOCH entry targets the recourse matrix W (must be deterministic)."""


# -------------------------------------------------------------- numeric-class
class IterationLimit(SolverError):
    """Simplex or active-set iteration budget exhausted."""


class NumericalBreakdown(SolverError):
    """Basis too ill-conditioned to continue."""


class Infeasible(SolverError):
    """A subproblem that must be feasible was not (upstream corruption)."""


class SecondStageInfeasible(SolverError):
    """Recourse LP infeasible: relatively complete recourse violated."""

    def __init__(self, message: str, scenario=None):
        super().__init__(message)
        self.scenario = scenario


class SecondStageUnbounded(SolverError):
    """Recourse LP unbounded below."""


USAGE_ERRORS = (BadParameter, BadInput, MissingParameter, TooLarge, EnumerationCapExceeded)
DATA_ERRORS = (
    BadProbabilities,
    EmptyFeasibleSet,
    UnboundedFirstStage,
    MalformedLine,
    MalformedDocument,
    UnsupportedSection,
    UnknownRowOrColumn,
    StochasticRecourse,
)
NUMERIC_ERRORS = (
    IterationLimit,
    NumericalBreakdown,
    Infeasible,
    SecondStageInfeasible,
    SecondStageUnbounded,
)
