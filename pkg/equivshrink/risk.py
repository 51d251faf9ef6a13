"""Monte Carlo risk of shrinkage rules and the Bayes equivariant risk of proper priors.

Random streams are keyed by (seed, lambda index, block index) through ``SeedSequence``
spawn keys and drive Philox generators, so a curve is reproducible whatever the number of
workers, and two rules evaluated on the same key see the same draws.
"""

from concurrent import futures
import logging
import math

import numpy as np
from scipy import special

import equivshrink
from equivshrink import AssumptionError
from equivshrink import DomainError
from equivshrink import helpers
from equivshrink import quadrature
from equivshrink.estimators import NumericBayes
from equivshrink.model import LocationScale
from equivshrink.results import DominanceReport
from equivshrink.results import MinimaxReport
from equivshrink.results import PairedDifference
from equivshrink.results import RiskCurve
from equivshrink.results import RiskPoint


logger = logging.getLogger(__name__)

MIN_REPS = 100
DEFAULT_REPS = 200000
VERDICT_THRESHOLD = 3.0

# Panels of the Gauss-Legendre rule in log w used for the Bayes equivariant risk.
BAYES_W_RANGE = (1e-7, 1e7)
BAYES_PANELS = 32
BAYES_NODES = 8

PROPRIETY_TOLERANCE = 1e-6


def block_generator(seed, lam_index, block_index):
    """The generator of one replication block; the key never depends on the worker."""
    sequence = np.random.SeedSequence(int(seed), spawn_key=(int(lam_index), int(block_index)))
    return np.random.Generator(np.random.Philox(sequence))


def block_sizes(n_reps):
    block = max(int(equivshrink.MC_BLOCK_SIZE), 1)
    full, rest = divmod(n_reps, block)
    return [block] * full + ([rest] if rest else [])


def check_reps(n_reps):
    if isinstance(n_reps, bool) or int(n_reps) != n_reps or n_reps < MIN_REPS:
        raise DomainError(
            'Monte Carlo risk needs at least %d replications, got %r' % (MIN_REPS, n_reps))
    return int(n_reps)


def _check_grid(lambda_grid):
    grid = [float(lam) for lam in lambda_grid]
    if not grid:
        raise DomainError('the lambda grid must not be empty')
    if any(lam < 0 or not math.isfinite(lam) for lam in grid):
        raise DomainError('lambda values must be finite and nonnegative')
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise DomainError('the lambda grid must be strictly increasing')
    return grid


def _check_rules(rules, density):
    for rule in rules:
        if tuple(rule.dims) != tuple(density.dims):
            raise DomainError(
                'rule %s was built for (p, n)=%s but the density for %s' % (
                    rule.name, tuple(rule.dims), tuple(density.dims)))


def _simulate_block(rules, density, loc, size, rng):
    """Losses of every rule on one block of common draws.

    Returns per rule (sum, sum of squares, count), per rule after the first the same triple
    for the loss difference with the first rule, and the number of rejected draws.
    """
    x, u = density.sample(loc, rng, size)
    s = helpers.squared_norm(u)
    norms = helpers.squared_norm(x)
    keep = (s > 0) & (norms > 0)
    rejected = int(size - np.count_nonzero(keep))
    x, s = x[keep], s[keep]
    losses = np.array([
        loc.eta * helpers.squared_norm(rule.apply_many(x, s) - loc.theta) for rule in rules])
    count = losses.shape[1]
    totals = [(float(row.sum()), float(np.dot(row, row)), count) for row in losses]
    diffs = losses[1:] - losses[0]
    differences = [(float(row.sum()), float(np.dot(row, row)), count) for row in diffs]
    return totals, differences, rejected


def _run(rules, density, lambda_grid, n_reps, seed, threads, locs=None):
    """Helper to evaluate rules on common draws over a lambda grid, block by block."""
    p = density.dims.p
    if locs is None:
        locs = [LocationScale.from_lambda(lam, p) for lam in lambda_grid]
    sizes = block_sizes(n_reps)
    tasks = [
        (lam_index, block_index, size)
        for lam_index in range(len(locs)) for block_index, size in enumerate(sizes)]

    def _task(task):
        lam_index, block_index, size = task
        rng = block_generator(seed, lam_index, block_index)
        return _simulate_block(rules, density, locs[lam_index], size, rng)

    workers = helpers.resolve_threads(threads)
    logger.info('simulating %d rule(s) on %d lambda value(s), %d block(s) each, %d workers',
                len(rules), len(locs), len(sizes), workers)
    with futures.ThreadPoolExecutor(max_workers=workers) as executor:
        outcomes = list(executor.map(_task, tasks))

    per_lambda = []
    for lam_index in range(len(locs)):
        blocks = outcomes[lam_index * len(sizes):(lam_index + 1) * len(sizes)]
        rejected = sum(block[2] for block in blocks)
        risks = [
            helpers.combine_moments(block[0][j] for block in blocks)
            for j in range(len(rules))]
        differences = [
            helpers.combine_moments(block[1][j] for block in blocks)
            for j in range(len(rules) - 1)]
        if rejected:
            logger.warning('rejected %d draws with W = 0 at lambda index %d',
                           rejected, lam_index)
        per_lambda.append((risks, differences, rejected))
    return per_lambda


def mc_risk(rule, density, lam, n_reps=DEFAULT_REPS, seed=0, threads=None, loc=None):
    """Monte Carlo estimate of the risk of ``rule`` at lambda.

    theta defaults to (sqrt(lambda), 0, ..., 0) with eta = 1; pass ``loc`` to simulate at
    any other (theta, eta), in which case lambda is taken from it.
    """
    n_reps = check_reps(n_reps)
    _check_rules([rule], density)
    if loc is not None:
        lam = loc.lam
        locs = [loc]
    else:
        locs = None
    lam = _check_grid([lam])[0]
    (risks, _, rejected), = _run([rule], density, [lam], n_reps, seed, threads, locs)
    mean, std_err, count = risks[0]
    return RiskPoint(lam, mean, std_err, count, rule.name, rejected)


def risk_curves(rules, density, lambda_grid, n_reps=DEFAULT_REPS, seed=0, threads=None):
    """Risk curves of several rules on common draws, and their paired differences with the
    first rule."""
    rules = list(rules)
    if not rules:
        raise DomainError('at least one rule is needed')
    n_reps = check_reps(n_reps)
    grid = _check_grid(lambda_grid)
    _check_rules(rules, density)
    per_lambda = _run(rules, density, grid, n_reps, seed, threads)
    curves = []
    for j, rule in enumerate(rules):
        points = [
            RiskPoint(lam, risks[j][0], risks[j][1], risks[j][2], rule.name, rejected)
            for lam, (risks, _, rejected) in zip(grid, per_lambda)]
        curves.append(RiskCurve(points, density.name, seed))
    differences = []
    for j in range(1, len(rules)):
        differences.append([
            PairedDifference(
                lam, diffs[j - 1][0], diffs[j - 1][1],
                math.hypot(risks[0][1], risks[j][1]))
            for lam, (risks, diffs, _) in zip(grid, per_lambda)])
    return curves, differences


def risk_curve(rule, density, lambda_grid, n_reps=DEFAULT_REPS, seed=0, threads=None):
    curves, _ = risk_curves([rule], density, lambda_grid, n_reps, seed, threads)
    return curves[0]


def compare_dominance(rule_a, rule_b, density, lambda_grid, n_reps=DEFAULT_REPS, seed=0,
                      threads=None):
    """Per-lambda verdicts on risk(a) - risk(b) at three paired standard errors."""
    (curve_b, curve_a), (differences,) = risk_curves(
        [rule_b, rule_a], density, lambda_grid, n_reps, seed, threads)
    return DominanceReport(curve_a, curve_b, differences, VERDICT_THRESHOLD)


def minimax_check(rule, density, lambda_grid, n_reps=DEFAULT_REPS, seed=0, threads=None):
    """risk <= p + 3 SE at every lambda of the grid."""
    curve = risk_curve(rule, density, lambda_grid, n_reps, seed, threads)
    return MinimaxReport(curve, density.dims.p, VERDICT_THRESHOLD)


class BayesRiskTable(object):
    """Posterior integrals of a proper prior tabulated on a Gauss-Legendre rule in log w.

    With ``mass_j`` = c_n c_p w_j^(p/2+1) M1(w_j) times the quadrature weight,
    B(delta_psi, pi) = sum_j mass_j psi(w_j) (psi(w_j) - 2 psi_pi(w_j)) + p.
    """

    def __init__(self, prior, density, cfg=None, w_range=BAYES_W_RANGE, panels=BAYES_PANELS,
                 nodes=BAYES_NODES, threads=None):
        p, n = density.dims
        if prior.p != p:
            raise DomainError('prior is defined for p=%d but the density for p=%d' % (prior.p, p))
        mass = prior.mass()
        if not np.isfinite(mass):
            raise AssumptionError(
                'the Bayes equivariant risk needs a proper prior; %s is improper' % prior.name)
        if abs(mass - 1.0) > PROPRIETY_TOLERANCE:
            raise AssumptionError(
                '%s has mass %.10g; normalize it first' % (prior.name, mass),
                details={'mass': mass})
        low, high = (math.log(bound) for bound in w_range)
        edges = np.linspace(low, high, int(panels) + 1)
        x, weights = special.roots_legendre(int(nodes))
        half = 0.5 * np.diff(edges)
        log_w = (0.5 * (edges[:-1] + edges[1:])[:, np.newaxis] + half[:, np.newaxis] * x).ravel()
        log_weights = np.log((half[:, np.newaxis] * weights).ravel())
        self._prior = prior
        self._density = density
        self._p = p
        self._w = np.exp(log_w)
        kernel = quadrature.posterior_kernel(density, prior, cfg or quadrature.DEFAULT_QUAD_CONFIG)
        workers = helpers.resolve_threads(threads)
        with futures.ThreadPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(kernel.integrals, self._w))
        log_m1 = np.array([result.log_m1 for result in results])
        self._psi_bayes = np.array([result.psi for result in results])
        self._mass = np.exp(
            helpers.log_c_m(n) + helpers.log_c_m(p) + log_weights
            + (0.5 * p + 1.0) * log_w + log_m1)
        logger.debug('Bayes risk table for %s: %d nodes, edge masses %.3g and %.3g',
                     prior.name, self._w.shape[0], self._mass[0], self._mass[-1])

    prior = property(lambda self: self._prior)
    density = property(lambda self: self._density)

    @property
    def w(self):
        return self._w.copy()

    @property
    def psi_bayes(self):
        return self._psi_bayes.copy()

    def risk(self, rule):
        psi = np.asarray(rule.psi(self._w), dtype=float)
        return float(math.fsum(self._mass * psi * (psi - 2.0 * self._psi_bayes)) + self._p)

    def bayes_risk(self):
        """B(delta_pi, pi) of the Bayes rule itself, p - sum mass psi_pi^2."""
        return float(self._p - math.fsum(self._mass * self._psi_bayes ** 2))


def bayes_equivariant_risk(rule, prior=None, density=None, cfg=None, threads=None):
    """B(delta_psi, pi) for a proper prior.

    ``prior`` and ``density`` default to those of a numerically integrated Bayes rule, which
    must then have been built with nu = -1.
    """
    if prior is None or density is None:
        if not isinstance(rule, NumericBayes):
            raise DomainError('pass the prior and density for rules other than bayes:...')
        if rule.nu != -1.0:
            raise DomainError(
                'the Bayes equivariant risk is tied to nu = -1, the rule has nu=%g' % rule.nu)
        prior = prior or rule.prior
        density = density or rule.density
    return BayesRiskTable(prior, density, cfg, threads=threads).risk(rule)


def mc_bayes_risk(rule, prior, density, n_reps=DEFAULT_REPS, seed=0, threads=None):
    """Monte Carlo average of the risk with lambda drawn from a proper prior."""
    n_reps = check_reps(n_reps)
    _check_rules([rule], density)
    p = density.dims.p
    sizes = block_sizes(n_reps)

    def _task(indexed):
        block_index, size = indexed
        rng = block_generator(seed, 0, block_index)
        lam = prior.sample_lambda(rng, size)
        draws = density.sample_spherical(rng, size)
        x, u = draws[:, :p].copy(), draws[:, p:]
        x[:, 0] += np.sqrt(lam)
        s = helpers.squared_norm(u)
        keep = (s > 0) & (helpers.squared_norm(x) > 0)
        theta = np.zeros_like(x[keep])
        theta[:, 0] = np.sqrt(lam[keep])
        losses = helpers.squared_norm(rule.apply_many(x[keep], s[keep]) - theta)
        return float(losses.sum()), float(np.dot(losses, losses)), losses.shape[0]

    workers = helpers.resolve_threads(threads)
    with futures.ThreadPoolExecutor(max_workers=workers) as executor:
        blocks = list(executor.map(_task, enumerate(sizes)))
    mean, std_err, count = helpers.combine_moments(blocks)
    return {'risk': mean, 'std_err': std_err, 'n_reps': count, 'estimator': rule.name,
            'prior': prior.name}
