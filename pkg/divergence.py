"""
Kullback-Leibler divergences between Normal-Inverse-Gamma posteriors

Closed forms for KL(f_B || f_R) per node and for two arbitrary NIG densities,
a Monte-Carlo estimator used to check them, and the network-level sums
D_Sigma together with the empty-graph and full-graph bounds.
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from config import KL_CLAMP_TOL
from errors import DimensionError, ValidationError
from model import Dag, check_ordering, require_acyclic
from numerics import digamma, log_gamma_ratio
from posterior import log_pdf, node_posterior, posterior_bayes, posterior_residual, sample
from scores import MetricKind, weighted_gram

logger = logging.getLogger(__name__)

MIN_MC_SAMPLES = 1000


def _kl_inverse_gamma(a1, b1, a2, b2):
    """KL(IG(a1, b1) || IG(a2, b2)), shape/rate parameterization"""
    return ((a1 - a2) * digamma(a1)
            + log_gamma_ratio(a1, a1 - a2)
            + a2 * math.log(b1 / b2)
            + a1 * (b2 / b1 - 1.0))


def kl_nig(p1, p2):
    """
    KL(p1 || p2) for two NIG posteriors over the same parent set.

    Splits into the inverse-gamma KL of the psi marginals plus the expected
    Gaussian KL of gamma | psi under p1, where E[1/psi] = shape/rate.
    """
    k = p1.k
    if p2.k != k:
        raise DimensionError(f"posteriors have {k} and {p2.k} coefficients")
    value = _kl_inverse_gamma(p1.shape, p1.rate, p2.shape, p2.rate)
    if k:
        d = p2.mu - p1.mu
        trace = float(np.trace(p1.A.solve(p2.A.values)))
        value += 0.5 * (trace - k + p1.A.logdet() - p2.A.logdet())
        value += 0.5 * (p1.shape / p1.rate) * float(d @ p2.A.values @ d)
    return value


def kl_from_posteriors(bayes, residual):
    """
    KL(f_B || f_R) term by term:

        1/2 ln(|A_B| / |A_R|) + 1/2 tr(A_R A_B^-1) - |P_i|/2
        + (delta + n + |P_i|) / (4 beta_B) (mu_R - mu_B)^T A_R (mu_R - mu_B)
        + (delta + n - m + |P_i|)/2 ln(beta_B / beta_R)
        + ln Gamma((delta + n - m + |P_i|)/2) - ln Gamma((delta + n + |P_i|)/2)
        + (delta + n + |P_i|)/2 (beta_R / beta_B - 1)
        + m/2 digamma((delta + n + |P_i|)/2)
    """
    k = bayes.k
    if residual.k != k:
        raise DimensionError(f"posteriors have {k} and {residual.k} coefficients")
    a = bayes.shape
    half_m = a - residual.shape
    value = 0.0
    if k:
        d = residual.mu - bayes.mu
        value += 0.5 * (bayes.A.logdet() - residual.A.logdet())
        value += 0.5 * float(np.trace(bayes.A.solve(residual.A.values))) - 0.5 * k
        value += (a / (2.0 * bayes.rate)) * float(d @ residual.A.values @ d)
    value += residual.shape * math.log(bayes.rate / residual.rate)
    value += log_gamma_ratio(a, half_m)
    value += a * (residual.rate / bayes.rate - 1.0)
    value += half_m * digamma(a)
    return value


def kl_bayes_residual(x_i, X_P, Q, V, h):
    """KL between the Bayesian and residual posteriors of one node"""
    bayes = posterior_bayes(x_i, X_P, Q, V, h)
    residual = posterior_residual(x_i, X_P, Q, h)
    if bayes.shape == residual.shape:
        return 0.0
    return kl_from_posteriors(bayes, residual)


def kl_asymptotic(bayes, residual):
    """
    Large-sample form of KL(f_B || f_R) keeping only the first-order terms
    of the log-determinant and ln(beta_B / beta_R) expansions.
    """
    a = bayes.shape
    half_m = a - residual.shape
    value = log_gamma_ratio(a, half_m) + half_m * digamma(a)
    if bayes.k:
        d = residual.mu - bayes.mu
        value += (a / (2.0 * bayes.rate)) * float(d @ residual.A.values @ d)
    return value


def mc_kl(p1, p2, samples=100_000, seed=None):
    """
    Monte-Carlo estimate of KL(p1 || p2).

    Returns:
        tuple: (mean of log p1 - log p2 over draws from p1, its standard error)
    """
    if samples < MIN_MC_SAMPLES:
        raise ValidationError(f"mc_kl needs at least {MIN_MC_SAMPLES} samples, got {samples}")
    gamma, psi = sample(p1, samples, seed)
    diff = log_pdf(p1, gamma, psi) - log_pdf(p2, gamma, psi)
    return float(np.mean(diff)), float(np.std(diff, ddof=1) / math.sqrt(samples))


@dataclass(frozen=True)
class FamilyGrams:
    """Bayesian and residual Gram matrices of one dataset"""
    bayes: object
    residual: object

    @classmethod
    def build(cls, ds, h):
        return cls(bayes=weighted_gram(MetricKind.BAYES, ds.X, ds.Q, h),
                   residual=weighted_gram(MetricKind.RESIDUAL, ds.X, ds.Q, h))

    def node_kl(self, node, parents, h):
        if self.residual.m == 0:
            return 0.0
        bayes = node_posterior(self.bayes, node, parents, h)
        residual = node_posterior(self.residual, node, parents, h)
        return kl_from_posteriors(bayes, residual)


def _clamp(value, node):
    if -KL_CLAMP_TOL < value < 0.0:
        logger.warning("clamped negative divergence %.3e at node %s to 0", value, node)
        return 0.0
    if value < 0.0:
        logger.warning("divergence %.3e at node %s is below the roundoff tolerance", value, node)
    return value


def node_divergences(g, ds, h, grams=None):
    """Raw KL(f_B || f_R) per node of g"""
    require_acyclic(g)
    if g.p != ds.p:
        raise DimensionError(f"graph has {g.p} nodes but data has {ds.p} variables")
    grams = grams or FamilyGrams.build(ds, h)
    values = []
    for i in range(g.p):
        value = grams.node_kl(i, g.parents(i), h)
        logger.debug("node %d parents %s: D = %.6g", i, g.parents(i), value)
        values.append(value)
    return values


def divergence_sigma(g, ds, h, grams=None):
    """D_Sigma(f_B, f_R) = sum of the node divergences under graph g"""
    return sum(node_divergences(g, ds, h, grams))


def divergence_bounds(ds, h, ordering=None, grams=None):
    """
    (D_Sigma^e, D_Sigma^f): the empty-graph sum and the sum for the full DAG
    whose node parents are all predecessors in `ordering` (index order by default).
    """
    ordering = check_ordering(range(ds.p) if ordering is None else ordering, ds.p)
    grams = grams or FamilyGrams.build(ds, h)
    empty = divergence_sigma(Dag.empty(ds.p), ds, h, grams)
    full = divergence_sigma(Dag.full(ordering), ds, h, grams)
    return empty, full


def divergence_sigma_between(g, ds, first, second):
    """
    D_Sigma between two posterior families on the same graph.

    `first` and `second` are (metric, Hyper) pairs, e.g. the Bayesian posterior
    under the true V against the one under V = I / upsilon.
    """
    require_acyclic(g)
    (metric1, h1), (metric2, h2) = first, second
    gram1 = weighted_gram(metric1, ds.X, ds.Q, h1)
    gram2 = weighted_gram(metric2, ds.X, ds.Q, h2)
    total = 0.0
    for i in range(g.p):
        parents = g.parents(i)
        total += kl_nig(node_posterior(gram1, i, parents, h1),
                        node_posterior(gram2, i, parents, h2))
    return total


@dataclass(frozen=True)
class DivergenceReport:
    per_node: tuple
    total: float
    bound_empty: float
    bound_full: float
    metadata: dict = field(default_factory=dict)

    def to_dict(self, names=None):
        label = (lambda i: names[i]) if names else (lambda i: i)
        return {
            'per_node': [[label(i), d] for i, d in self.per_node],
            'total': self.total,
            'bound_empty': self.bound_empty,
            'bound_full': self.bound_full,
            'metadata': self.metadata,
        }


def divergence_report(g, ds, h, ordering=None):
    """Per-node divergences for g, their sum and both bounds, negatives within roundoff clamped"""
    grams = FamilyGrams.build(ds, h)
    per_node = tuple((i, _clamp(d, i)) for i, d in enumerate(node_divergences(g, ds, h, grams)))
    empty, full = divergence_bounds(ds, h, ordering, grams)
    return DivergenceReport(
        per_node=per_node,
        total=sum(d for _, d in per_node),
        bound_empty=_clamp(empty, 'empty'),
        bound_full=_clamp(full, 'full'),
        metadata={'n': ds.n, 'm': ds.m, 'p': ds.p, 'prior': h.describe(), 'graph': g.describe()},
    )
