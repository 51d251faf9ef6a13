"""Dimensions, observations, the W statistic, group actions and the scaled quadratic loss."""

import collections
import numbers

import numpy as np

from equivshrink import DegenerateScaleError
from equivshrink import DomainError
from equivshrink import helpers


class ProblemDim(collections.namedtuple('ProblemDim', ('p', 'n'))):
    """Dimensions of the location vector (p) and of the residual vector (n)."""

    def __new__(cls, p, n):
        for name, value in (('p', p), ('n', n)):
            if isinstance(value, bool) or not isinstance(value, numbers.Integral):
                raise DomainError('%s must be an integer, got %r' % (name, value))
        if p < 1:
            raise DomainError('p must be at least 1, got %d' % p, details={'p': p})
        if n < 2:
            raise DomainError('n must be at least 2, got %d' % n, details={'n': n})
        return tuple.__new__(cls, (int(p), int(n)))

    @property
    def total(self):
        return self.p + self.n

    def require_shrinkage(self, what='shrinkage rules'):
        if self.p < 3:
            raise DomainError(
                '%s require p >= 3, got p=%d' % (what, self.p), details={'p': self.p})
        return self


class Observation(collections.namedtuple('Observation', ('x', 'u', 's'))):
    """A draw (X, U); only s = ||u||^2 is consumed by the estimators."""

    def __new__(cls, x, u=None, s=None):
        x = helpers.as_vector(x, 'x')
        if u is not None:
            u = helpers.as_vector(u, 'u')
            u_squared = float(helpers.squared_norm(u))
            if s is not None and not np.isclose(s, u_squared, rtol=1e-12, atol=0.0):
                raise DomainError('s=%r does not match ||u||^2=%r' % (s, u_squared))
            s = u_squared
        if s is None:
            raise DomainError('an observation needs either u or s')
        s = float(s)
        if not np.isfinite(s) or s < 0:
            raise DomainError('s must be a finite nonnegative number, got %r' % s)
        return tuple.__new__(cls, (x, u, s))

    @property
    def p(self):
        return self.x.shape[0]


class LocationScale(collections.namedtuple('LocationScale', ('theta', 'eta'))):

    def __new__(cls, theta, eta=1.0):
        theta = helpers.as_vector(theta, 'theta')
        eta = float(eta)
        if not np.isfinite(eta) or eta <= 0:
            raise DomainError('eta must be positive, got %r' % eta)
        return tuple.__new__(cls, (theta, eta))

    @property
    def lam(self):
        """The maximal invariant lambda = eta ||theta||^2."""
        return self.eta * float(helpers.squared_norm(self.theta))

    @classmethod
    def from_lambda(cls, lam, p, eta=1.0):
        """theta aligned with the first axis, so that eta ||theta||^2 equals lam."""
        if lam < 0:
            raise DomainError('lambda must be nonnegative, got %r' % lam)
        theta = np.zeros(p)
        theta[0] = np.sqrt(lam / eta)
        return cls(theta, eta)


def w_statistic(obs):
    if obs.s <= 0:
        raise DegenerateScaleError('W = ||x||^2/s needs s > 0, got s=%r' % obs.s)
    return float(helpers.squared_norm(obs.x)) / obs.s


def w_values(x, s):
    """Vectorised W over a batch: x has shape (..., p) and s shape (...)."""
    s = np.asarray(s, dtype=float)
    if np.any(s <= 0):
        raise DegenerateScaleError('W = ||x||^2/s needs s > 0 for every draw')
    return helpers.squared_norm(x) / s


def group_act(obs, gamma, rotation):
    """Group I action: x -> gamma Gamma x, s -> gamma^2 s, u -> gamma u."""
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0:
        raise DomainError('gamma must be positive, got %r' % gamma)
    rotation = helpers.check_orthogonal(rotation)
    if rotation.shape[0] != obs.p:
        raise DomainError(
            'rotation is %dx%d but x has length %d' % (rotation.shape + (obs.p,)))
    x = gamma * (rotation @ obs.x)
    if obs.u is not None:
        return Observation(x, u=gamma * obs.u)
    return Observation(x, s=gamma * gamma * obs.s)


def scaled_quadratic_loss(delta, theta, eta):
    delta = np.asarray(delta, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if delta.shape[-1:] != theta.shape[-1:]:
        raise DomainError(
            'dimension mismatch: delta has %d coordinates, theta %d' % (
                delta.shape[-1], theta.shape[-1]))
    if eta <= 0:
        raise DomainError('eta must be positive, got %r' % eta)
    return eta * helpers.squared_norm(delta - theta)
