import math
import os

import numpy as np
from packaging import version
import scipy
from scipy import special
from scipy import stats

import equivshrink
from equivshrink import DomainError
from equivshrink import ParseError

SCIPY_VERSION = version.parse(scipy.__version__)

# scipy renamed trapz to trapezoid in 1.6 and removed the old name later on.
if SCIPY_VERSION >= version.parse('1.6'):
    from scipy.integrate import trapezoid  # noqa
else:
    from scipy.integrate import trapz as trapezoid  # noqa

ORTHOGONALITY_TOLERANCE = 1e-10

# Significant digits used whenever a float leaves the process as text.
FLOAT_DIGITS = 17


def log_c_m(m):
    """Logarithm of c_m = pi^(m/2) / Gamma(m/2)."""
    if m <= 0:
        raise DomainError('c_m is defined for positive m only, got %r' % (m,))
    return 0.5 * m * math.log(math.pi) - special.gammaln(0.5 * m)


def c_m(m):
    """Surface constant: the integral of g(||v||^2) over R^m is c_m times that of t^(m/2-1) g(t)."""
    return math.exp(log_c_m(m))


def as_vector(values, name='vector', length=None):
    """Helper to turn user input into a 1-D float array, checking its length."""
    try:
        vector = np.asarray(values, dtype=float)
    except (TypeError, ValueError):
        raise DomainError('%s must be a sequence of real numbers' % name)
    if vector.ndim != 1:
        raise DomainError('%s must be one-dimensional, got shape %s' % (name, vector.shape))
    if length is not None and vector.shape[0] != length:
        raise DomainError(
            '%s must have length %d, got %d' % (name, length, vector.shape[0]),
            details={'expected': length, 'got': vector.shape[0]})
    if not np.all(np.isfinite(vector)):
        raise DomainError('%s must be finite' % name)
    return vector


def squared_norm(values):
    """Squared Euclidean norm along the last axis."""
    values = np.asarray(values, dtype=float)
    return np.einsum('...i,...i->...', values, values)


def check_orthogonal(matrix, tolerance=ORTHOGONALITY_TOLERANCE):
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError('an orthogonal matrix must be square, got shape %s' % (matrix.shape,))
    defect = np.linalg.norm(matrix.T @ matrix - np.eye(matrix.shape[0]), ord='fro')
    if defect > tolerance:
        raise DomainError(
            'matrix is not orthogonal: ||G^T G - I||_F = %.3g' % defect,
            details={'defect': float(defect), 'tolerance': tolerance})
    return matrix


def random_orthogonal(dim, rng):
    """Haar-distributed orthogonal matrix of size dim x dim."""
    if dim == 1:
        return np.array([[rng.choice([-1.0, 1.0])]])
    return stats.ortho_group.rvs(dim, random_state=rng)


def combine_moments(blocks):
    """Helper to merge per-block (sum, sum of squares, count) triples into (mean, std err, count).

    The merge uses compensated summation so that the result does not depend on the order in
    which workers handed their blocks back beyond the last unit in the last place.
    """
    blocks = list(blocks)
    count = sum(block[2] for block in blocks)
    if count == 0:
        raise DomainError('no replications to summarise')
    total = math.fsum(block[0] for block in blocks)
    total_sq = math.fsum(block[1] for block in blocks)
    mean = total / count
    if count == 1:
        return mean, float('nan'), count
    variance = max(total_sq - count * mean * mean, 0.0) / (count - 1)
    return mean, math.sqrt(variance / count), count


def format_float(value):
    """Shortest text that parses back to the same float: 0.2 -> '0.2', 3.0 -> '3'."""
    text = repr(float(value))
    return text[:-2] if text.endswith('.0') else text


def parse_float_list(text, name='list'):
    """Helper to parse '1,2.5,3' style command-line lists."""
    if text is None or not text.strip():
        raise ParseError('%s must not be empty' % name)
    try:
        return [float(item) for item in text.split(',')]
    except ValueError:
        raise ParseError('%s must be a comma separated list of numbers, got %r' % (name, text))


def resolve_threads(threads=None):
    """Helper to turn a ``--threads`` style value into a worker count (0 means one per CPU)."""
    if threads is None:
        threads = equivshrink.DEFAULT_THREADS
    threads = int(threads)
    if threads < 0:
        raise DomainError('the number of threads must be nonnegative, got %d' % threads)
    return threads or os.cpu_count() or 1
