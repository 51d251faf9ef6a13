import os


class ShrinkageError(Exception):
    pass


class DomainError(ShrinkageError):

    def __init__(self, message, code=None, details=None):
        super(DomainError, self).__init__()
        self._message = message
        self._code = code
        self._details = details

    code = property(lambda self: self._code)
    details = property(lambda self: self._details)

    def __str__(self):
        return self._message


class DegenerateScaleError(DomainError):
    pass


class SingularityError(DomainError):
    pass


class RankDeficiencyError(DomainError):
    pass


class AssumptionError(DomainError):
    pass


class ParseError(DomainError):
    pass


class ConvergenceError(ShrinkageError):

    def __init__(self, message, estimate=None, error=None):
        super(ConvergenceError, self).__init__()
        self._message = message
        self._estimate = estimate
        self._error = error

    estimate = property(lambda self: self._estimate)
    error = property(lambda self: self._error)

    def __str__(self):
        if self._error is None:
            return self._message
        return '%s (best estimate %r, achieved error %.3g)' % (
            self._message, self._estimate, self._error)


from equivshrink.__version__ import __version__


__all__ = [
    '__version__',
    'AssumptionError',
    'ConvergenceError',
    'DegenerateScaleError',
    'DomainError',
    'ParseError',
    'GeneralizedT',
    'Gaussian',
    'CustomRadial',
    'LocationScale',
    'Observation',
    'PriorSpec',
    'ProblemDim',
    'QuadConfig',
    'RankDeficiencyError',
    'ShrinkageError',
    'ShrinkageRule',
    'SingularityError',
    'DEFAULT_THREADS',
    'MC_BLOCK_SIZE',
]

from .model import LocationScale, Observation, ProblemDim
from .densities import CustomRadial, Gaussian, GeneralizedT
from .quadrature import QuadConfig
from .priors import PriorSpec
from .estimators import ShrinkageRule

# Worker pool size for Monte Carlo runs and cache construction; 0 means one worker per CPU.
DEFAULT_THREADS = int(os.getenv('EQUIVSHRINK_THREADS', '0'))

# Replications per independently seeded Monte Carlo block. Changing it changes the random
# streams, so results are only reproducible for a fixed block size.
MC_BLOCK_SIZE = int(os.getenv('EQUIVSHRINK_BLOCK_SIZE', '10000'))
