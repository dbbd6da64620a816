"""
Normal-Inverse-Gamma posteriors for the network parameters (gamma_i, psi_i)

    psi_i | x           ~ Inverse Gamma(shape, rate)       (density ~ psi^(-shape-1) e^(-rate/psi))
    gamma_i | psi_i, x  ~ N(mu, psi_i A^-1)

under the Bayesian approach (W = H_V, shape (delta + n + |P_i|)/2) and the
residual approach (W = PP^T, shape (delta + n - m + |P_i|)/2).
"""

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve, solve_triangular
from scipy.stats import invgamma

from errors import DimensionError, DomainError, UndefinedMeanError, ValidationError
from model import require_acyclic
from numerics import SpdMatrix
from scores import MetricKind, family_columns, family_stats, weighted_gram

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class NodePosterior:
    mu: np.ndarray
    A: SpdMatrix = field(repr=False)
    shape: float
    rate: float
    m_used: int
    n_eff: int
    parents: tuple = ()

    @property
    def k(self):
        return self.mu.shape[0]

    @property
    def psi_mean(self):
        if not self.shape > 1:
            raise UndefinedMeanError(f"inverse-gamma mean undefined for shape {self.shape} <= 1")
        return self.rate / (self.shape - 1.0)

    def to_dict(self, names=None):
        parents = list(self.parents) if names is None else [names[j] for j in self.parents]
        return {
            'parents': parents,
            'mu': self.mu.tolist(),
            'A': self.A.values.tolist(),
            'shape': self.shape,
            'rate': self.rate,
            'm_used': self.m_used,
            'n_eff': self.n_eff,
        }


@dataclass(frozen=True, eq=False)
class NetworkPosterior:
    """Per-node posteriors aligned with a Dag"""
    nodes: tuple
    dag: object
    metric: MetricKind

    def __post_init__(self):
        if len(self.nodes) != self.dag.p:
            raise DimensionError(f"{len(self.nodes)} node posteriors for {self.dag.p} nodes")
        for i, post in enumerate(self.nodes):
            if tuple(post.parents) != self.dag.parents(i):
                raise DimensionError(f"node {i} posterior parents {post.parents} != graph parents")

    def to_dict(self, names):
        return {
            'metric': self.metric.value,
            'nodes': {names[i]: post.to_dict(names) for i, post in enumerate(self.nodes)},
        }


def node_posterior(gram, node, parents, h):
    """Posterior for column `node` given `parents`, read from a weighted Gram matrix"""
    parents = tuple(parents)
    stats = family_stats(gram.S, node, parents, h.tau)
    m_used = gram.m if gram.metric is MetricKind.RESIDUAL else 0
    return NodePosterior(
        mu=stats.mu, A=stats.A,
        shape=0.5 * (h.delta + gram.n_eff + stats.k),
        rate=stats.rate, m_used=m_used, n_eff=gram.n_eff, parents=parents)


def posterior_bayes(x_i, X_P, Q, V, h):
    """
    Bayesian-approach posterior with exogenous effects b_i ~ N(0, psi_i V).

    V may be None to use the effect prior already carried by `h`.
    """
    if V is not None:
        h = h.with_V(V)
    Z, k = family_columns(x_i, X_P)
    gram = weighted_gram(MetricKind.BAYES, Z, Q, h)
    return node_posterior(gram, k, range(k), h)


def posterior_residual(x_i, X_P, Q, h):
    Z, k = family_columns(x_i, X_P)
    gram = weighted_gram(MetricKind.RESIDUAL, Z, Q, h)
    return node_posterior(gram, k, range(k), h)


def fit_network(metric, g, ds, h, gram=None):
    """NetworkPosterior of every node of g under one metric"""
    metric = MetricKind.parse(metric)
    require_acyclic(g)
    if g.p != ds.p:
        raise DimensionError(f"graph has {g.p} nodes but data has {ds.p} variables")
    if gram is None:
        gram = weighted_gram(metric, ds.X, ds.Q, h)
    nodes = tuple(node_posterior(gram, i, g.parents(i), h) for i in range(g.p))
    logger.debug("fitted %s posteriors for %s", metric.value, g.describe())
    return NetworkPosterior(nodes=nodes, dag=g, metric=metric)


def sample(post, count, seed=None):
    """
    Draw `count` pairs (gamma, psi) from a NodePosterior.

    Returns:
        tuple: gamma draws (count x k) and psi draws (count,)
    """
    if count < 1:
        raise ValidationError(f"count must be at least 1, got {count}")
    rng = np.random.default_rng(seed)
    psi = post.rate / rng.gamma(post.shape, 1.0, size=count)
    k = post.k
    if k == 0:
        return np.zeros((count, 0)), psi
    z = rng.standard_normal((count, k))
    # A = L L^T, so L^-T z ~ N(0, A^-1)
    w = solve_triangular(post.A.chol.T, z.T, lower=False).T
    return post.mu + np.sqrt(psi)[:, None] * w, psi


def log_pdf(post, gamma, psi):
    """
    Joint NIG log-density at (gamma, psi); accepts a single point or
    arrays of draws shaped like those returned by `sample`.
    """
    psi = np.asarray(psi, dtype=float)
    if np.any(psi <= 0):
        raise DomainError("log_pdf requires psi > 0")
    k = post.k
    gamma = np.asarray(gamma, dtype=float).reshape(psi.shape + (k,))
    value = invgamma.logpdf(psi, a=post.shape, scale=post.rate)
    if k:
        d = gamma - post.mu
        quad = np.einsum('...i,ij,...j->...', d, post.A.values, d)
        value = value + (-0.5 * k * np.log(2.0 * math.pi * psi)
                         + 0.5 * post.A.logdet() - 0.5 * quad / psi)
    return value if value.ndim else float(value)


def assemble_sigma(net, g=None):
    """
    Plug-in covariance (I - Gamma)^-T Psi (I - Gamma)^-1, where Gamma[j, i]
    is the posterior mean coefficient of parent j in node i's regression
    and Psi holds the posterior means of psi_i.
    """
    g = net.dag if g is None else g
    require_acyclic(g)
    p = g.p
    Gamma = np.zeros((p, p))
    psi = np.zeros(p)
    for i, post in enumerate(net.nodes):
        for j, coef in zip(post.parents, post.mu):
            Gamma[j, i] = coef
        psi[i] = post.psi_mean
    B = solve(np.eye(p) - Gamma, np.eye(p))
    Sigma = B.T @ np.diag(psi) @ B
    return SpdMatrix.from_array(0.5 * (Sigma + Sigma.T), name='Sigma')
