"""Exception hierarchy shared by all modules.

The CLI maps :class:`ValidationError` to exit code 2 and :class:`SolverError`
to exit code 3; everything else is a bug.
"""

from __future__ import annotations


class HJError(Exception):
    """Base class for package errors."""


class ValidationError(HJError, ValueError):
    """Bad input: configs, out-of-range parameters, malformed tables."""


class DomainError(ValidationError):
    """Degenerate or collapsed domain, or a grid that is too coarse."""


class AmbientOverflowError(ValidationError):
    """A point left the ambient ball U = B(0, R0)."""


class KindMismatchError(ValidationError):
    """Operation requested for a Hamiltonian kind that does not support it."""


class InfiniteLagrangianError(HJError, ValueError):
    """Spatial derivative requested where L(x, v) = +inf."""


class SolverError(HJError, RuntimeError):
    """Numerical failure of an iterative method."""


class NonConvergenceError(SolverError):
    pass


class EmptyAdmissibleSetError(SolverError):
    pass


class NegativeCycleError(SolverError):
    """Shortest-path graph has a cycle of negative cost (c below the eigenvalue)."""


class LPError(SolverError):
    pass


class LPInfeasibleError(LPError):
    pass


class LPUnboundedError(LPError):
    pass


class ModulusSearchError(SolverError):
    """Bisection for the vanishing-discount modulus could not reach its target."""


class InvariantViolationError(HJError, AssertionError):
    """A construction-time invariant check failed."""


class SchemaError(ValidationError):
    """Report payload of an unknown type or with a malformed layout."""
