"""Exception hierarchy shared by every module."""


class IsacError(Exception):
    """Base class for all library errors."""


class EmptyLoS(IsacError):
    """No contour element is visible from the base station."""


class NotPSD(IsacError):
    """A covariance matrix has an eigenvalue below the PSD tolerance."""


class ZeroIllumination(IsacError):
    """Some contour subsection receives no transmit energy."""


class DegenerateFim(IsacError):
    """A Schur-reduced Fisher information term vanishes."""


class SingularEfim(IsacError):
    """The effective FIM cannot be inverted reliably."""

    def __init__(self, message, eigenvalue=None):
        super().__init__(message)
        self.eigenvalue = eigenvalue


class RankDeficient(IsacError):
    """The channel matrix does not have full row rank."""


class SolverFailure(IsacError):
    """The conic backend returned without a usable solution."""

    def __init__(self, message, status=None, residual=None):
        super().__init__(message)
        self.status = status
        self.residual = residual


class Infeasible(IsacError):
    """The constraint set is empty.

    ``constraint_class`` names the constraint family found to be responsible
    (``"sinr"``, ``"coverage"`` or ``"unknown"``) when it can be determined.
    """

    def __init__(self, message, constraint_class="unknown"):
        super().__init__(message)
        self.constraint_class = constraint_class


class AllInfeasible(Infeasible):
    """No ZF direction set admits a feasible design."""


class NegativePower(IsacError):
    """A power-allocation solve produced a negative entry."""


class ExtractionFailed(IsacError):
    """Rank-one extraction exhausted its attempts."""


class ScenarioError(IsacError):
    """A scenario file is malformed or violates a model constraint."""
