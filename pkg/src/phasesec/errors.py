"""Exception types raised by the numerical core.

Everything derives from PhasesecError so callers that treat a whole
trajectory as expendable (parameter sweeps, initial-condition searches)
can catch one base class and record the sample as inconclusive.
"""


class PhasesecError(Exception):
    """Base class for all package-specific failures."""


class SingularConstraintSystem(PhasesecError):
    """Constraint-force solve hit a singular or near-singular system."""


class CoordinateSingularity(PhasesecError):
    """State reached a coordinate singularity of the chart (sin(theta) ~ 0)."""


class StepSizeUnderflow(PhasesecError):
    """Adaptive step control shrank the step below the representable floor."""


class ProjectionDiverged(PhasesecError):
    """Constraint-manifold projection failed to converge."""


class DegenerateSegment(PhasesecError):
    """A chain segment has near-zero length, its angle is undefined."""


class ReductionInvalid(PhasesecError):
    """Symmetry reduction requested for a configuration that breaks it."""


class DegenerateWindow(PhasesecError):
    """Correlation-dimension fit window is empty at the requested scales."""


class ConfigError(PhasesecError):
    """Bad configuration file or option value.

    Carries enough context to point the user at the offending entry.
    """

    def __init__(self, message, section=None, key=None, line=None):
        self.section = section
        self.key = key
        self.line = line
        where = ""
        if section is not None:
            where = f"[{section}]"
            if key is not None:
                where += f" {key}"
            if line is not None:
                where += f" (line {line})"
            where += ": "
        super().__init__(where + message)
