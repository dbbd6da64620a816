"""
Score metrics for Gaussian Bayesian networks with exogenous variables
BGe (f_O), Bayesian (f_V) and residual (f_R) local and network scores,
and the projection machinery that removes exogenous effects.

Every metric is the marginal likelihood of a linear-Gaussian regression whose
rows are weighted by a fixed n x n matrix W: I for BGe, H_V for the Bayesian
metric and PP^T for the residual metric. Scores therefore only need the
weighted Gram matrix X^T W X, which is formed once per dataset.
"""

import logging
import math
import threading
from dataclasses import dataclass
from enum import Enum
from functools import cached_property

import numpy as np
from scipy.linalg import qr, solve_triangular

from errors import DimensionError, FactorizationError, ValidationError
from model import column_rank, require_acyclic
from numerics import SpdMatrix, as_matrix, log_gamma

logger = logging.getLogger(__name__)

LOG_2PI = math.log(2.0 * math.pi)


class MetricKind(str, Enum):
    BGE = 'bge'
    BAYES = 'bayes'
    RESIDUAL = 'residual'

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ', '.join(kind.value for kind in cls)
            raise ValidationError(f"unknown metric '{value}' (choose from {choices})")


@dataclass(frozen=True, eq=False)
class Projector:
    """
    P with orthonormal columns spanning the orthogonal complement of col(Q).

    `range_basis` spans col(Q); PP^T Z is evaluated as Z - B(B^T Z) so the
    n x n product is only built when `outer` is requested.
    """
    basis: np.ndarray
    range_basis: np.ndarray

    @cached_property
    def outer(self):
        return self.basis @ self.basis.T

    def apply(self, Z):
        """PP^T Z"""
        Z = np.asarray(Z, dtype=float)
        if self.range_basis.shape[1] == 0:
            return Z.copy()
        return Z - self.range_basis @ (self.range_basis.T @ Z)


def _fix_signs(columns):
    # largest-magnitude entry of each column made positive
    if columns.shape[1] == 0:
        return columns
    idx = np.argmax(np.abs(columns), axis=0)
    signs = np.sign(columns[idx, np.arange(columns.shape[1])])
    signs[signs == 0] = 1.0
    return columns * signs


def projection_complement(Q):
    """
    Orthonormal basis of the orthogonal complement of col(Q).

    Computed from an unpivoted Householder QR so the result is deterministic
    for a fixed Q; column signs are fixed by the largest-magnitude entry.
    """
    Q = as_matrix(Q, 'Q')
    n, m = Q.shape
    if m == 0:
        return Projector(basis=np.eye(n), range_basis=np.zeros((n, 0)))
    if n <= m:
        raise ValidationError("n must exceed m")
    rank = column_rank(Q)
    if rank < m:
        raise ValidationError(f"Q rank {rank} < m {m}")
    full, _ = qr(Q, mode='full')
    return Projector(basis=_fix_signs(full[:, m:]), range_basis=full[:, :m])


@dataclass(frozen=True, eq=False)
class ShrunkHat:
    """H_V = I - Q (V^-1 + Q^T Q)^-1 Q^T"""
    matrix: np.ndarray


def shrunk_hat(Q, V=None, precision=None):
    """
    Build H_V from V, or directly from the precision V^-1 when it is known
    (the scalar prior V = I / upsilon has precision upsilon * I).
    """
    Q = as_matrix(Q, 'Q')
    n, m = Q.shape
    if m == 0:
        return ShrunkHat(matrix=np.eye(n))
    if precision is None:
        if V is None:
            raise ValidationError("shrunk_hat needs V or its precision")
        V = SpdMatrix.coerce(V, 'V')
        if V.dim != m:
            raise DimensionError(f"V is {V.dim}x{V.dim} but Q has {m} columns")
        precision = V.inverse()
    precision = as_matrix(precision, 'V^-1')
    if precision.shape != (m, m):
        raise DimensionError(f"V^-1 is {precision.shape} but Q has {m} columns")
    M = SpdMatrix.from_array(precision + Q.T @ Q, name='V^-1 + Q^T Q')
    H = np.eye(n) - Q @ M.solve(Q.T)
    return ShrunkHat(matrix=0.5 * (H + H.T))


@dataclass(frozen=True, eq=False)
class WeightedGram:
    """
    S = X^T W X for one metric, with the effective sample count n' and the
    graph-independent log-determinant correction ln|W^-1| (Bayesian only).
    """
    metric: MetricKind
    S: np.ndarray
    n_eff: int
    m: int
    log_det_correction: float = 0.0


def weighted_gram(metric, X, Q, h):
    """
    Gram matrix of the columns of X under the metric's row weighting.

    The Bayesian weighting uses H_V = I - Q M^-1 Q^T with M = V^-1 + Q^T Q,
    so S = X^T X - Y^T Y with Y = L^-1 Q^T X and M = L L^T; no n x n matrix
    is formed. ln|I + Q V Q^T| = ln|M| - ln|V^-1|.
    """
    metric = MetricKind.parse(metric)
    X = as_matrix(X, 'X')
    Q = as_matrix(Q, 'Q') if Q is not None else np.zeros((X.shape[0], 0))
    n, m = Q.shape
    if n != X.shape[0]:
        raise DimensionError(f"X has {X.shape[0]} rows but Q has {n}")
    if metric is MetricKind.BGE or m == 0:
        S = X.T @ X
        return WeightedGram(metric=metric, S=0.5 * (S + S.T), n_eff=n, m=m)
    if metric is MetricKind.BAYES:
        if not h.has_effect_prior:
            raise ValidationError("metric 'bayes' needs a prior for exogenous effects (upsilon or V)")
        precision = SpdMatrix.from_array(h.effect_precision(m), name='V^-1')
        M = SpdMatrix.from_array(precision.values + Q.T @ Q, name='V^-1 + Q^T Q')
        Y = solve_triangular(M.chol, Q.T @ X, lower=True)
        S = X.T @ X - Y.T @ Y
        correction = M.logdet() - precision.logdet()
        return WeightedGram(metric=metric, S=0.5 * (S + S.T), n_eff=n, m=m,
                            log_det_correction=correction)
    projector = projection_complement(Q)
    R = projector.apply(X)
    S = R.T @ R
    return WeightedGram(metric=metric, S=0.5 * (S + S.T), n_eff=n - m, m=m)


@dataclass(frozen=True)
class FamilyStats:
    """Conjugate update for one node given its parents"""
    A: SpdMatrix
    mu: np.ndarray
    rate: float
    k: int


def family_stats(S, node, parents, tau):
    """A = tau I + S_PP, mu = A^-1 S_Pi, beta = tau/2 + (S_ii - S_Pi^T mu)/2"""
    parents = list(parents)
    k = len(parents)
    S_PP = S[np.ix_(parents, parents)] if k else np.zeros((0, 0))
    S_Pi = S[parents, node] if k else np.zeros(0)
    A = SpdMatrix.from_array(tau * np.eye(k) + S_PP, name='tau I + X_P^T W X_P')
    mu = A.solve(S_Pi) if k else np.zeros(0)
    rate = 0.5 * tau + 0.5 * (S[node, node] - float(S_Pi @ mu))
    if not rate > 0:
        raise FactorizationError(f"non-positive posterior rate {rate} for node {node}")
    return FamilyStats(A=A, mu=mu, rate=rate, k=k)


def local_score_from_gram(gram, node, parents, h):
    """
    Log marginal likelihood of column `node` given `parents`:

        -(n'/2) ln 2pi - ln|W^-1|/2 + (k/2) ln tau - ln|A|/2
        + a0 ln(tau/2) + ln Gamma(a1) - ln Gamma(a0) - a1 ln beta

    with a0 = (delta + k)/2 and a1 = a0 + n'/2.
    """
    stats = family_stats(gram.S, node, parents, h.tau)
    a0 = 0.5 * (h.delta + stats.k)
    a1 = a0 + 0.5 * gram.n_eff
    return (-0.5 * gram.n_eff * LOG_2PI
            - 0.5 * gram.log_det_correction
            + 0.5 * stats.k * math.log(h.tau)
            - 0.5 * stats.A.logdet()
            + a0 * math.log(0.5 * h.tau)
            + log_gamma(a1) - log_gamma(a0)
            - a1 * math.log(stats.rate))


def family_columns(x_i, X_P):
    """[X_P, x_i] as one n x (k + 1) matrix, and k"""
    x_i = np.asarray(x_i, dtype=float).reshape(-1, 1)
    n = x_i.shape[0]
    X_P = np.zeros((n, 0)) if X_P is None else np.asarray(X_P, dtype=float)
    if X_P.ndim == 1:
        X_P = X_P.reshape(n, 1)
    if X_P.shape[0] != n:
        raise DimensionError(f"x_i has {n} rows but X_P has {X_P.shape[0]}")
    return np.column_stack([X_P, x_i]), X_P.shape[1]


def log_local_score(metric, x_i, X_P, Q, h):
    """Local score f(x_i | X_P) for one metric, from raw columns"""
    Z, k = family_columns(x_i, X_P)
    gram = weighted_gram(metric, Z, Q, h)
    return local_score_from_gram(gram, k, range(k), h)


class NetworkScorer:
    """
    Decomposable network score with a memo of local scores.

    Keys are (node, sorted parents, metric, hyper key). The memo is guarded by
    a lock so concurrent hill-climbing restarts can share one scorer; a value
    computed twice by racing threads is identical and the first write wins.
    """

    def __init__(self, ds, metric, h):
        self.metric = MetricKind.parse(metric)
        self.h = h
        self.p = ds.p
        self.gram = weighted_gram(self.metric, ds.X, ds.Q, h)
        self._hyper_key = h.cache_key()
        self._cache = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def local(self, node, parents):
        key = (node, tuple(sorted(parents)), self.metric.value, self._hyper_key)
        with self._lock:
            if key in self._cache:
                self.hits += 1
                return self._cache[key]
        value = local_score_from_gram(self.gram, node, key[1], self.h)
        with self._lock:
            self.misses += 1
            return self._cache.setdefault(key, value)

    def network(self, g):
        if g.p != self.p:
            raise DimensionError(f"graph has {g.p} nodes but data has {self.p} variables")
        return sum(self.local(i, g.parents(i)) for i in range(g.p))


def log_network_score(metric, g, ds, h, scorer=None):
    """Sum of local log scores over the nodes of g (uniform graph prior omitted)"""
    require_acyclic(g)
    if scorer is None:
        scorer = NetworkScorer(ds, metric, h)
    return scorer.network(g)
