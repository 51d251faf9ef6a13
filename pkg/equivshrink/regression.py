"""Shrinkage of regression coefficients through the canonical form of a linear model.

With centered predictors Z and y = alpha 1 + Z beta + error, the orthogonal reduction gives
x = (Z^T Z)^(1/2) beta_hat in R^p, s = residual sum of squares over n = m - p - 1 degrees of
freedom, and W = ||x||^2 / s = R^2 / (1 - R^2).
"""

import collections
import csv
from concurrent import futures
import logging
import math

import numpy as np
from scipy import linalg

from equivshrink import DegenerateScaleError
from equivshrink import DomainError
from equivshrink import RankDeficiencyError
from equivshrink import helpers
from equivshrink import risk
from equivshrink.model import Observation
from equivshrink.model import ProblemDim
from equivshrink.results import RiskPoint


logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e12


class RegressionData(collections.namedtuple('RegressionData', ('y', 'z', 'names'))):
    """Response y (length m) and raw predictors z (m x p), optionally with column names."""

    def __new__(cls, y, z, names=None):
        y = helpers.as_vector(y, 'y')
        try:
            z = np.asarray(z, dtype=float)
        except (TypeError, ValueError):
            raise DomainError('the predictors must be a matrix of real numbers')
        if z.ndim == 1:
            z = z[:, np.newaxis]
        if z.ndim != 2 or z.shape[0] != y.shape[0]:
            raise DomainError(
                'predictors of shape %s do not match %d responses' % (z.shape, y.shape[0]))
        if not np.all(np.isfinite(z)):
            raise DomainError('the predictors must be finite')
        m, p = z.shape
        if m <= p + 1:
            raise RankDeficiencyError(
                'the canonical form needs m > p + 1, got m=%d and p=%d' % (m, p),
                details={'m': m, 'p': p})
        if names is not None:
            names = tuple(names)
            if len(names) != p:
                raise DomainError('expected %d predictor names, got %d' % (p, len(names)))
        return tuple.__new__(cls, (y, z, names))

    @property
    def dims(self):
        m, p = self.z.shape
        return ProblemDim(p, m - p - 1)


class CanonicalForm(collections.namedtuple('CanonicalForm', (
        'x', 's', 'ybar', 'r_squared', 'beta_hat', 'half_gram', 't_values', 'dims'))):

    @property
    def w(self):
        if self.s <= 0:
            raise DegenerateScaleError('W = R^2/(1 - R^2) is undefined for a perfect fit')
        return float(helpers.squared_norm(self.x)) / self.s

    def observation(self):
        return Observation(self.x, s=self.s)


class _Design(object):
    """Centered predictors with their QR factors and the symmetric root of Z^T Z."""

    def __init__(self, z):
        self.means = z.mean(axis=0)
        self.centered = z - self.means
        eigenvalues, eigenvectors = linalg.eigh(self.centered.T @ self.centered)
        smallest, largest = eigenvalues[0], eigenvalues[-1]
        if smallest <= 0 or largest / smallest > CONDITION_LIMIT:
            raise RankDeficiencyError(
                'the centered predictors are rank deficient or ill-conditioned '
                '(condition number %.3g > %.0e)' % (
                    largest / smallest if smallest > 0 else float('inf'), CONDITION_LIMIT),
                details={'eigenvalues': eigenvalues.tolist()})
        self.half_gram = (eigenvectors * np.sqrt(eigenvalues)) @ eigenvectors.T
        self.q, self.r = linalg.qr(self.centered, mode='economic')

    def least_squares(self, centered_y):
        """beta_hat for one response (m,) or a batch of responses (m, k)."""
        return linalg.solve_triangular(self.r, self.q.T @ centered_y)


def half_gram(z):
    """(Z^T Z)^(1/2) of the centered predictors, by symmetric eigendecomposition."""
    return _Design(np.asarray(z, dtype=float)).half_gram


def canonicalize(data):
    design = _Design(data.z)
    ybar = float(np.mean(data.y))
    centered_y = data.y - ybar
    total = float(helpers.squared_norm(centered_y))
    if total == 0:
        raise DegenerateScaleError('the response is constant; R^2 is undefined')
    beta_hat = design.least_squares(centered_y)
    residual = centered_y - design.centered @ beta_hat
    s = float(helpers.squared_norm(residual))
    x = design.half_gram @ beta_hat
    x_squared = float(helpers.squared_norm(x))
    with np.errstate(divide='ignore'):
        t_values = x / math.sqrt(s) if s > 0 else np.copysign(np.inf, x)
    logger.debug('canonical form: ||x||^2=%.6g, s=%.6g', x_squared, s)
    return CanonicalForm(
        x, s, ybar, x_squared / (x_squared + s), beta_hat, design.half_gram, t_values,
        data.dims)


def shrinkage_factor(canon, rule):
    """1 - psi(W) with W = R^2/(1 - R^2)."""
    if tuple(rule.dims) != tuple(canon.dims):
        raise DomainError(
            'rule %s was built for (p, n)=%s but the regression induces %s' % (
                rule.name, tuple(rule.dims), tuple(canon.dims)))
    return 1.0 - rule.psi_value(canon.w)


def shrink_coefficients(canon, rule):
    """{1 - psi(R^2/(1 - R^2))} beta_hat; the t-values are reported, never shrunk on."""
    return shrinkage_factor(canon, rule) * canon.beta_hat


def predictive_loss(beta_est, beta_true, z, eta=1.0, route='design'):
    """eta ||Z (beta_est - beta_true)||^2 for centered predictors Z.

    ``route='canonical'`` evaluates eta ||(Z^T Z)^(1/2) (beta_est - beta_true)||^2 instead.
    """
    z = np.asarray(z, dtype=float)
    beta_est = helpers.as_vector(beta_est, 'beta_est')
    beta_true = helpers.as_vector(beta_true, 'beta_true', length=beta_est.shape[0])
    if z.ndim != 2 or z.shape[1] != beta_est.shape[0]:
        raise DomainError(
            'a design of shape %s does not fit %d coefficients' % (z.shape, beta_est.shape[0]))
    if not eta > 0:
        raise DomainError('eta must be positive, got %r' % eta)
    if route == 'design':
        return eta * float(helpers.squared_norm(z @ (beta_est - beta_true)))
    if route == 'canonical':
        root = linalg.sqrtm(z.T @ z).real
        return eta * float(helpers.squared_norm(root @ (beta_est - beta_true)))
    raise DomainError('unknown route %r' % (route,))


def read_csv(path, response):
    """Load a regression from a CSV file with a header row.

    The ``response`` column becomes y and every other column a predictor; a row with an
    empty or non-numeric cell is rejected with its line number.
    """
    with open(path, newline='', encoding='utf-8') as handle:
        reader = csv.reader(handle)
        try:
            header = [name.strip() for name in next(reader)]
        except StopIteration:
            raise DomainError('%s is empty; a header row is required' % path)
        if response not in header:
            raise DomainError(
                'response column %r not found in %s (columns: %s)' % (
                    response, path, ', '.join(header)))
        rows = []
        for line, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DomainError(
                    '%s, line %d: expected %d fields, got %d' % (
                        path, line, len(header), len(row)))
            try:
                rows.append([float(cell) for cell in row])
            except ValueError:
                raise DomainError(
                    '%s, line %d: missing or non-numeric value in %r' % (path, line, row))
    if not rows:
        raise DomainError('%s has no data rows' % path)
    table = np.array(rows)
    column = header.index(response)
    predictors = [name for name in header if name != response]
    z = np.delete(table, column, axis=1)
    return RegressionData(table[:, column], z, predictors)


def mc_predictive_risk(z_raw, beta, rule, density, n_reps, seed=0, eta=1.0, intercept=0.0,
                       threads=None):
    """Monte Carlo predictive risk of the shrunk coefficients.

    y = intercept + Z beta + eta^(-1/2) error with a spherical error in R^m from the family
    of ``density``, whose dimensions must be the induced (p, m - p - 1).
    """
    z_raw = np.asarray(z_raw, dtype=float)
    beta = helpers.as_vector(beta, 'beta')
    data = RegressionData(np.arange(z_raw.shape[0], dtype=float), z_raw)
    dims = data.dims
    if beta.shape[0] != dims.p:
        raise DomainError('beta has %d coordinates for %d predictors' % (beta.shape[0], dims.p))
    if tuple(density.dims) != tuple(dims) or tuple(rule.dims) != tuple(dims):
        raise DomainError('the density and the rule must be built for (p, n)=%s' % (dims,))
    n_reps = risk.check_reps(n_reps)
    design = _Design(z_raw)
    m = z_raw.shape[0]
    mean = intercept + z_raw @ beta

    def _task(indexed):
        block_index, size = indexed
        rng = risk.block_generator(seed, 0, block_index)
        errors = density.sample_spherical(rng, size, dim=m) / math.sqrt(eta)
        responses = mean + errors
        centered = responses - responses.mean(axis=1, keepdims=True)
        beta_hat = design.least_squares(centered.T).T
        residual = centered - beta_hat @ design.centered.T
        s = helpers.squared_norm(residual)
        x = beta_hat @ design.half_gram
        keep = (s > 0) & (helpers.squared_norm(x) > 0)
        shrunk = (1.0 - rule.psi(helpers.squared_norm(x[keep]) / s[keep]))[:, np.newaxis]
        shrunk = shrunk * beta_hat[keep]
        losses = eta * helpers.squared_norm((shrunk - beta) @ design.centered.T)
        return float(losses.sum()), float(np.dot(losses, losses)), losses.shape[0]

    workers = helpers.resolve_threads(threads)
    with futures.ThreadPoolExecutor(max_workers=workers) as executor:
        blocks = list(executor.map(_task, enumerate(risk.block_sizes(n_reps))))
    value, std_err, count = helpers.combine_moments(blocks)
    lam = eta * float(helpers.squared_norm(design.half_gram @ beta))
    return RiskPoint(lam, value, std_err, count, rule.name, n_reps - count)
