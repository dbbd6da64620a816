"""
Core domain objects for exonet
Datasets with exogenous designs, DAGs and score hyperparameters, plus their validation
"""

import logging
from dataclasses import dataclass, field
from itertools import combinations

import networkx as nx
import numpy as np
from scipy.linalg import qr

from config import RANK_TOL
from errors import CycleError, DimensionError, ValidationError
from numerics import SpdMatrix

logger = logging.getLogger(__name__)


def default_names(prefix, count):
    return tuple(f"{prefix}{k + 1}" for k in range(count))


def column_rank(Q, tol=RANK_TOL):
    """Numerical column rank of Q from a pivoted QR, threshold tol * ||Q||_2"""
    if Q.shape[1] == 0:
        return 0
    _, R, _ = qr(Q, mode='economic', pivoting=True)
    threshold = tol * max(np.linalg.norm(Q, 2), 1e-300)
    return int(np.sum(np.abs(np.diag(R)) > threshold))


@dataclass(frozen=True, eq=False)
class Dataset:
    """n x p responses X and n x m exogenous design Q"""
    X: np.ndarray
    Q: np.ndarray
    variable_names: tuple
    exogenous_names: tuple

    @classmethod
    def create(cls, X, Q=None, variable_names=None, exogenous_names=None):
        X = np.array(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if Q is None:
            Q = np.zeros((X.shape[0], 0))
        Q = np.array(Q, dtype=float)
        if Q.ndim == 1:
            Q = Q.reshape(-1, 1)
        if variable_names is None:
            variable_names = default_names('X', X.shape[1])
        if exogenous_names is None:
            exogenous_names = default_names('Q', Q.shape[1])
        return cls(X=X, Q=Q, variable_names=tuple(variable_names),
                   exogenous_names=tuple(exogenous_names))

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def m(self):
        return self.Q.shape[1]

    def index_of(self, name):
        try:
            return self.variable_names.index(name)
        except ValueError:
            raise ValidationError(f"unknown variable '{name}'")


@dataclass(frozen=True, eq=False)
class StandardizedDataset(Dataset):
    """Dataset whose response columns have mean 0 and sum of squares n - 1"""
    center: np.ndarray = field(default=None, repr=False)
    scale: np.ndarray = field(default=None, repr=False)


def validate(ds):
    """
    Check every Dataset invariant.

    Returns:
        list[str]: all violations found; empty means the dataset is valid
    """
    problems = []
    X, Q = ds.X, ds.Q
    if X.ndim != 2 or Q.ndim != 2:
        return ["X and Q must be 2-D"]
    if Q.shape[0] != X.shape[0]:
        problems.append(f"Q has {Q.shape[0]} rows but X has {X.shape[0]}")
    if len(ds.variable_names) != X.shape[1]:
        problems.append(f"{len(ds.variable_names)} variable names for {X.shape[1]} columns")
    if len(ds.exogenous_names) != Q.shape[1]:
        problems.append(f"{len(ds.exogenous_names)} exogenous names for {Q.shape[1]} columns")
    if len(set(ds.variable_names)) != len(ds.variable_names):
        problems.append("variable names must be unique")
    if not np.all(np.isfinite(X)):
        problems.append("X contains missing or non-finite entries")
    q_finite = bool(np.all(np.isfinite(Q)))
    if not q_finite:
        problems.append("Q contains missing or non-finite entries")
    if X.shape[0] <= Q.shape[1]:
        problems.append("n must exceed m")
    if q_finite and Q.shape[1] > 0 and Q.shape[0] == X.shape[0]:
        rank = column_rank(Q)
        if rank < Q.shape[1]:
            problems.append(f"Q rank {rank} < m {Q.shape[1]}")
    return problems


def require_valid(ds):
    problems = validate(ds)
    if problems:
        raise ValidationError(problems)
    return ds


def standardize(ds):
    """
    Centre each response column and scale it so that x^T x = n - 1.

    Q is left untouched. The centre and scale used are kept on the result.
    """
    require_valid(ds)
    X = ds.X
    n = X.shape[0]
    center = X.mean(axis=0)
    centered = X - center
    ss = np.sum(centered ** 2, axis=0)
    constant = [name for name, s, col in zip(ds.variable_names, ss, X.T)
                if s <= (1e-14 * max(np.max(np.abs(col)), 1.0)) ** 2 * n]
    if constant:
        raise ValidationError([f"constant column '{name}'" for name in constant])
    scale = np.sqrt(ss / (n - 1))
    return StandardizedDataset(
        X=centered / scale, Q=ds.Q.copy(),
        variable_names=ds.variable_names, exogenous_names=ds.exogenous_names,
        center=center, scale=scale)


@dataclass(frozen=True)
class Dag:
    """Directed graph on nodes 0..p-1; edges are (parent, child) pairs"""
    p: int
    edges: frozenset = frozenset()

    def __post_init__(self):
        edges = frozenset((int(j), int(i)) for j, i in self.edges)
        problems = []
        for j, i in sorted(edges):
            if j == i:
                problems.append(f"self-loop on node {i}")
            if not (0 <= j < self.p and 0 <= i < self.p):
                problems.append(f"edge ({j}, {i}) outside 0..{self.p - 1}")
        if problems:
            raise ValidationError(problems)
        object.__setattr__(self, 'edges', edges)

    @classmethod
    def empty(cls, p):
        return cls(p)

    @classmethod
    def full(cls, ordering):
        """Complete DAG in which each node's parents are all its predecessors in `ordering`"""
        ordering = list(ordering)
        edges = {(ordering[a], ordering[b]) for a, b in combinations(range(len(ordering)), 2)}
        return cls(len(ordering), frozenset(edges))

    @classmethod
    def from_names(cls, names, named_edges):
        index = {name: k for k, name in enumerate(names)}
        missing = sorted({v for edge in named_edges for v in edge if v not in index})
        if missing:
            raise ValidationError([f"unknown variable '{name}'" for name in missing])
        return cls(len(names), frozenset((index[a], index[b]) for a, b in named_edges))

    def parents(self, i):
        return tuple(sorted(j for j, k in self.edges if k == i))

    def parent_sets(self):
        return [self.parents(i) for i in range(self.p)]

    def in_degree(self, i):
        return sum(1 for _, k in self.edges if k == i)

    def has_edge(self, j, i):
        return (j, i) in self.edges

    def sorted_edges(self):
        return sorted(self.edges)

    def named_edges(self, names):
        return [[names[j], names[i]] for j, i in self.sorted_edges()]

    def with_edge(self, j, i):
        return Dag(self.p, self.edges | {(j, i)})

    def without_edge(self, j, i):
        return Dag(self.p, self.edges - {(j, i)})

    def reversed_edge(self, j, i):
        return Dag(self.p, (self.edges - {(j, i)}) | {(i, j)})

    def to_networkx(self):
        G = nx.DiGraph()
        G.add_nodes_from(range(self.p))
        G.add_edges_from(self.edges)
        return G

    def is_acyclic(self):
        return nx.is_directed_acyclic_graph(self.to_networkx())

    def describe(self):
        return f"{self.p} nodes, {len(self.edges)} edges"


def topological_order(g):
    """
    Parents-before-children ordering, ties broken by ascending node index.

    Raises:
        CycleError: listing the nodes of one cycle
    """
    G = g.to_networkx()
    try:
        return tuple(nx.lexicographical_topological_sort(G))
    except nx.NetworkXUnfeasible:
        cycle = [j for j, _ in nx.find_cycle(G)]
        raise CycleError(cycle)


def require_acyclic(g):
    topological_order(g)
    return g


def check_ordering(ordering, p):
    ordering = [int(k) for k in ordering]
    if sorted(ordering) != list(range(p)):
        raise ValidationError(f"ordering {ordering} is not a permutation of 0..{p - 1}")
    return ordering


@dataclass(frozen=True, eq=False)
class Hyper:
    """
    Score hyperparameters: prior precision scale tau, degrees of freedom delta
    and the prior covariance of exogenous effects, either an explicit V or a
    scalar precision upsilon meaning V = I / upsilon.
    """
    tau: float = 1.0
    delta: float = 1.0
    V: np.ndarray = field(default=None, repr=False)
    upsilon: float = None

    def __post_init__(self):
        problems = []
        if not self.tau > 0:
            problems.append(f"tau must be positive, got {self.tau}")
        if not self.delta > 0:
            problems.append(f"delta must be positive, got {self.delta}")
        if self.V is not None and self.upsilon is not None:
            problems.append("give either V or upsilon, not both")
        if self.upsilon is not None and not self.upsilon > 0:
            problems.append(f"upsilon must be positive, got {self.upsilon}")
        if problems:
            raise ValidationError(problems)
        if self.V is not None:
            spd = SpdMatrix.from_array(self.V, name='V')
            object.__setattr__(self, 'V', spd.values)

    @property
    def has_effect_prior(self):
        return self.V is not None or self.upsilon is not None

    def with_V(self, V):
        return Hyper(tau=self.tau, delta=self.delta, V=V)

    def effect_covariance(self, m):
        """V as an SpdMatrix"""
        if self.V is not None:
            if self.V.shape != (m, m):
                raise DimensionError(f"V is {self.V.shape[0]}x{self.V.shape[1]} but m = {m}")
            return SpdMatrix.from_array(self.V, name='V')
        if self.upsilon is not None:
            return SpdMatrix.from_array(np.eye(m) / self.upsilon, name='V')
        raise ValidationError("no prior for exogenous effects (set upsilon or V)")

    def effect_precision(self, m):
        """V^-1, formed directly as upsilon * I for the scalar prior"""
        if self.upsilon is not None and self.V is None:
            return np.eye(m) * self.upsilon
        return self.effect_covariance(m).inverse()

    def describe(self):
        if self.V is not None:
            return f"V={np.round(self.V, 6).tolist()}"
        if self.upsilon is not None:
            return f"upsilon={self.upsilon:g}"
        return "no effect prior"

    def cache_key(self):
        v_key = None if self.V is None else tuple(np.round(self.V, 15).ravel())
        return (self.tau, self.delta, self.upsilon, v_key)
