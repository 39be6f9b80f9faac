"""Exception taxonomy shared by all modules.

Every error carries a short machine-readable ``code`` and an ``exit_code``
used by the command line front end: 2 for bad input, 3 for numerical
failures, 4 for internal consistency violations.
"""

from __future__ import annotations


class StieltjesSpecError(Exception):
    """Base class for all package errors."""

    code = "ERROR"
    exit_code = 1

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.context = context


# ---------------------------------------------------------------------------
# input errors (exit code 2)


class InputError(StieltjesSpecError):
    code = "INPUT"
    exit_code = 2


class MeasureFormatError(InputError):
    """Measure violates a structural invariant (overlap, ordering, range)."""

    code = "MEASURE_FORMAT"


class MeasureParseError(InputError):
    """Measure file or literal could not be parsed."""

    code = "MEASURE_PARSE"


class UnsupportedMeasureError(InputError):
    """Operation requires a restricted measure class (e.g. purely atomic)."""

    code = "MEASURE_UNSUPPORTED"


class BadArgumentError(InputError):
    code = "BAD_ARGUMENT"


class UnsupportedMultiplicityError(InputError):
    """Sensitivity formulas require a geometrically simple eigenvalue."""

    code = "MULTIPLICITY_UNSUPPORTED"


# ---------------------------------------------------------------------------
# numerical failures (exit code 3)


class NumericalError(StieltjesSpecError):
    code = "NUMERICAL"
    exit_code = 3


class ConvergenceError(NumericalError):
    """Iteration budget exhausted before reaching the requested tolerance."""

    code = "NO_CONVERGENCE"


class QuadratureError(NumericalError):
    code = "QUADRATURE"


class DegeneracyError(NumericalError):
    """Characteristic roots too close to classify but too far to merge."""

    code = "ROOT_DEGENERACY"


class MeshRefinementError(NumericalError):
    code = "MESH_REFINEMENT"


class ThresholdRangeError(NumericalError):
    """Counting threshold overflows double range; scan mode must be used."""

    code = "THRESHOLD_RANGE"


class ContourResolutionError(NumericalError):
    """Winding number did not stabilise on the zero-counting contour."""

    code = "CONTOUR_RESOLUTION"


class RootSearchError(NumericalError):
    """Eigenvalue tracking lost the root inside its localization window."""

    code = "EIG_TRACKING"


# ---------------------------------------------------------------------------
# internal inconsistencies (exit code 4)


class InternalCheckError(StieltjesSpecError):
    code = "INTERNAL"
    exit_code = 4


class DeterminantError(InternalCheckError):
    """Fundamental matrix determinant drifted away from 1."""

    code = "DET_DRIFT"


class ConjugateMismatchError(InternalCheckError):
    """The two routes to the characteristic value disagree."""

    code = "CONJUGATE_MISMATCH"


class SpectrumConsistencyError(InternalCheckError):
    """Root count from scanning disagrees with the contour count."""

    code = "SPECTRUM_COUNT"
