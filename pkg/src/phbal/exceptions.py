"""Exception hierarchy for phbal.

All library errors derive from :class:`PhbalError`.  Solver-side failures
(anything a different tolerance or algorithm could fix) derive from
:class:`SolverFailure`; structural problems with the input data derive from
:class:`StructureError`.
"""

__all__ = [
    "PhbalError",
    "StructureError",
    "DimensionMismatch",
    "SingularTransform",
    "BiorthogonalityViolated",
    "CompatibilityViolated",
    "NotPsd",
    "NotAKypSolution",
    "SingularQ22",
    "GramianVariantMismatch",
    "SolverFailure",
    "SingularSylvester",
    "NotConverged",
    "NoStabilizingSolution",
    "IllConditioned",
    "UnstableSystem",
    "NotStabilizing",
    "NotPassive",
    "UnboundedSolution",
    "RankDeficient",
    "ResolventSingular",
]


class PhbalError(Exception):
    """Base class for all phbal errors."""


class StructureError(PhbalError):
    """Input matrices violate a structural requirement beyond tolerance."""


class DimensionMismatch(StructureError):
    """Matrix dimensions are inconsistent."""


class SingularTransform(StructureError):
    """A state-space transformation matrix is (numerically) singular."""


class BiorthogonalityViolated(StructureError):
    """Petrov-Galerkin bases fail W^T V = I beyond tolerance."""


class CompatibilityViolated(StructureError):
    """Petrov-Galerkin bases fail the energy-matrix compatibility Q V = W Q_p."""


class NotPsd(StructureError):
    """A matrix required to be positive semidefinite is not."""


class NotAKypSolution(StructureError):
    """A candidate Hamiltonian matrix fails the passivity LMI check."""


class SingularQ22(StructureError):
    """The trailing block of the energy matrix is singular; no Schur complement."""


class GramianVariantMismatch(StructureError):
    """A Gramian pair of the wrong variant was passed to a synthesis routine."""


class SolverFailure(PhbalError):
    """A numerical solver failed to produce a certified result."""


class SingularSylvester(SolverFailure):
    """The Lyapunov/Sylvester operator is singular (eigenvalue pairing lambda_i + conj(lambda_j) = 0)."""


class NotConverged(SolverFailure):
    """An iteration stalled before reaching the requested residual."""


class NoStabilizingSolution(SolverFailure):
    """The Hamiltonian matrix/pencil has eigenvalues on the imaginary axis."""


class IllConditioned(SolverFailure):
    """Subspace extraction lost more than half of the working precision."""


class UnstableSystem(SolverFailure):
    """An operation requiring asymptotic stability received an unstable system."""


class NotStabilizing(SolverFailure):
    """A supplied Riccati solution does not stabilize the closed loop."""


class NotPassive(SolverFailure):
    """The system fails a passivity probe (Popov function indefinite on the axis)."""


class UnboundedSolution(SolverFailure):
    """The extremal LMI solution is unbounded (degenerate port, e.g. B = 0)."""


class RankDeficient(SolverFailure):
    """Requested order exceeds the numerical rank of a Gramian product."""


class ResolventSingular(SolverFailure):
    """Transfer-function evaluation at a (near-)eigenvalue of A."""
