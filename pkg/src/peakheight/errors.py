"""Exception and warning types.

Two families matter to callers. :class:`NumericalError` covers failures of
a computation on valid input (a factorization that will not go through, a
quadrature that cannot reach tolerance, a Monte Carlo run with no usable
samples). :class:`ContractError` covers input that violates a documented
precondition. The command line maps the first family to exit code 3 and
the second to exit code 2.
"""


class PeakHeightError(Exception):
    """Base class for all errors raised by this package."""


class ContractError(PeakHeightError, ValueError):
    """Input violates a documented precondition."""


class NumericalError(PeakHeightError, ArithmeticError):
    """A computation failed on otherwise valid input."""


class ConfigError(ContractError):
    """A model or run configuration file is malformed."""


# gaussian-core
class SingularBlock(NumericalError):
    """Conditioning block is numerically singular."""


class NotPSD(NumericalError):
    """Covariance could not be factorized even after jitter."""


# covmodel
class NonPSDMoments(NumericalError):
    """Moment matrix of (X, X', X'') is not positive semi-definite."""


class QuadratureFailure(NumericalError):
    """Adaptive quadrature did not reach the requested tolerance."""


class StencilOutOfDomain(NumericalError):
    """A finite-difference stencil left the domain of the covariance."""


class BaseNotUnitVariance(ContractError):
    """Variance scaling was given a base process without unit variance."""


# peak1d
class DegenerateField(NumericalError):
    """Conditional correlation is undefined (rank-deficient moments)."""


class BoundaryRho(ContractError):
    """|rho| is at the boundary; use the Rayleigh formulas instead."""


class NotBoundary(ContractError):
    """Rayleigh formulas were called with |rho| away from 1."""


# scalespace
class UnsupportedDimension(ContractError):
    """Requested dimension has no implemented covariance blocks."""


# kacrice
class ZeroDenominator(NumericalError):
    """No Monte Carlo sample had a negative-definite Hessian."""


class TailUnderflowWarning(RuntimeWarning):
    """P(X > u | grad X = 0) underflowed; the threshold was reported as 0."""


# fieldsim
class NotPSDGrid(NotPSD):
    """Grid covariance could not be factorized even after jitter."""


class GridTooLarge(ContractError):
    """Grid covariance exceeds the memory budget."""


class NoPeaks(NumericalError):
    """A peak sample set is empty."""
