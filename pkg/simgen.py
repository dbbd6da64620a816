"""
Seeded data generators for linear recursive systems with exogenous effects

    X_i = X_{P_i} gamma_i + Q b_i + e_i,   e_i ~ N(0, psi_i I)
    b_i ~ N(0, psi_i V),  gamma_i ~ N(0, psi_i I) on graph edges,  psi_i ~ Inverse Gamma(1, 2)

Inverse Gamma(1, 2) is shape 1, rate 2, the same convention as the posterior module.
All randomness for node i flows from SeedSequence(seed, spawn_key=(i,)), so a
dataset is identical no matter how many others are generated alongside it.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from errors import ValidationError
from model import Dag, Dataset, topological_order
from numerics import SpdMatrix, as_matrix

logger = logging.getLogger(__name__)

# Fixed designs are drawn once from these seeds and shared by every dataset
EXAMPLE2_DESIGN_SEED = 20_100
GRAPE_DESIGN_SEED = 26_050

COEFFICIENT_LAW = "psi_i ~ InvGamma(shape=1, rate=2); gamma on edges ~ N(0, psi_i); b_i ~ N(0, psi_i V)"

EXAMPLE1_UPSILONS = (0.001, 0.01, 0.1, 1.0, 10.0, 100.0)
EXAMPLE1_SIZES = (5, 10, 20, 50, 100)

EXAMPLE2_V = {
    'V0': np.eye(3),
    'V1': np.diag([10.0, 1.0, 0.1]),
    'V2': np.array([[1.0, 0.7, 0.6],
                    [0.7, 1.0, 0.5],
                    [0.6, 0.5, 1.0]]),
    'V3': np.array([[10.0, 0.7, 0.1],
                    [0.7, 1.0, 0.2],
                    [0.1, 0.2, 0.1]]),
}

# Vineyard sample counts over five sampling weeks: 4, 4 and 2 berries a week
GRAPE_VINEYARD_SIZES = (20, 20, 10)
GRAPE_HOURS = 6


def derive_seed(master, *keys):
    """Integer seed for the substream of `master` identified by non-negative integer keys"""
    if int(master) < 0 or any(int(k) < 0 for k in keys):
        raise ValidationError(f"seeds and keys must be non-negative, got {master} and {keys}")
    ss = np.random.SeedSequence(entropy=int(master), spawn_key=tuple(int(k) for k in keys))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _node_rng(seed, node):
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(node,)))


def default_graph():
    """
    Sparse 20-node graph of small connected components (15 edges) standing in
    for the unpublished Example 1 structure; nodes 18 and 19 are isolated.
    """
    edges = [
        (0, 1), (0, 2), (1, 3), (2, 3), (3, 4),
        (5, 6), (6, 7), (5, 8), (7, 9),
        (10, 11), (11, 12), (10, 13), (12, 14),
        (15, 16), (16, 17),
    ]
    return Dag(20, frozenset(edges))


def example2_graph():
    """The default graph restricted to its first ten nodes"""
    return Dag(10, frozenset((j, i) for j, i in default_graph().edges if j < 10 and i < 10))


@dataclass(frozen=True, eq=False)
class SimSpec:
    graph: Dag
    Q: np.ndarray = field(repr=False)
    V_true: np.ndarray = field(repr=False)
    seed: int = 0
    design: str = 'user'
    name: str = 'custom'
    coefficient_law: str = COEFFICIENT_LAW

    def __post_init__(self):
        Q = as_matrix(self.Q, 'Q')
        object.__setattr__(self, 'Q', Q)
        problems = []
        m = Q.shape[1]
        if self.seed < 0:
            problems.append(f"seed must be non-negative, got {self.seed}")
        if Q.shape[0] <= m:
            problems.append("n must exceed m")
        V = np.asarray(self.V_true, dtype=float).reshape(m, m) if m else np.zeros((0, 0))
        if m:
            V = SpdMatrix.from_array(V, name='V_true').values
        object.__setattr__(self, 'V_true', V)
        if problems:
            raise ValidationError(problems)

    @property
    def p(self):
        return self.graph.p

    @property
    def n(self):
        return self.Q.shape[0]

    @property
    def m(self):
        return self.Q.shape[1]

    def describe(self):
        return {
            'name': self.name,
            'design': self.design,
            'n': self.n, 'p': self.p, 'm': self.m,
            'seed': self.seed,
            'V_true': self.V_true.tolist(),
            'edges': self.graph.sorted_edges(),
            'coefficient_law': self.coefficient_law,
        }


@dataclass(frozen=True, eq=False)
class SimOutput:
    ds: Dataset
    truth: dict
    spec: SimSpec

    def truth_dict(self):
        names = self.ds.variable_names
        return {
            'spec': self.spec.describe(),
            'psi': {names[i]: v for i, v in sorted(self.truth['psi'].items())},
            'gamma': [[names[j], names[i], v] for (j, i), v in sorted(self.truth['gamma'].items())],
            'b': {names[i]: v.tolist() for i, v in sorted(self.truth['b'].items())},
        }


def simulate(spec):
    """
    Generate one dataset, composing nodes in topological order.

    Raises:
        CycleError: if the spec graph has a cycle
    """
    order = topological_order(spec.graph)
    n, m = spec.n, spec.m
    X = np.zeros((n, spec.p))
    chol_V = SpdMatrix.from_array(spec.V_true).chol if m else None
    psi, gamma, b = {}, {}, {}
    for i in order:
        rng = _node_rng(spec.seed, i)
        psi_i = 2.0 / rng.gamma(1.0, 1.0)
        scale = np.sqrt(psi_i)
        parents = spec.graph.parents(i)
        coefs = rng.normal(0.0, scale, size=len(parents))
        column = rng.normal(0.0, scale, size=n)
        if parents:
            column += X[:, list(parents)] @ coefs
        if m:
            b_i = scale * (chol_V @ rng.standard_normal(m))
            column += spec.Q @ b_i
            b[i] = b_i
        X[:, i] = column
        psi[i] = psi_i
        gamma.update({(j, i): float(c) for j, c in zip(parents, coefs)})
    ds = Dataset.create(X, spec.Q)
    logger.debug("simulated %s: n=%d p=%d m=%d seed=%d", spec.name, n, spec.p, m, spec.seed)
    return SimOutput(ds=ds, truth={'psi': psi, 'gamma': gamma, 'b': b}, spec=spec)


def group_indicators(sizes):
    """n x len(sizes) 0/1 design with consecutive blocks of the given sizes"""
    Q = np.zeros((sum(sizes), len(sizes)))
    start = 0
    for col, size in enumerate(sizes):
        Q[start:start + size, col] = 1.0
        start += size
    return Q


def example1_spec(n_per_group, upsilon, seed, graph=None):
    """Two groups of n_per_group samples, p = 20, V = I / upsilon"""
    if n_per_group < 2:
        raise ValidationError(f"n_per_group must be at least 2, got {n_per_group}")
    if not upsilon > 0:
        raise ValidationError(f"upsilon must be positive, got {upsilon}")
    return SimSpec(
        graph=graph or default_graph(),
        Q=group_indicators((n_per_group, n_per_group)),
        V_true=np.eye(2) / upsilon,
        seed=seed,
        design='group-indicator',
        name=f"example1 n={n_per_group} upsilon={upsilon:g}",
    )


def example2_design():
    """100 x 3 standard-normal design, identical for every Example 2 dataset"""
    return np.random.default_rng(EXAMPLE2_DESIGN_SEED).standard_normal((100, 3))


def example2_spec(V_choice, seed, graph=None):
    if V_choice not in EXAMPLE2_V:
        raise ValidationError(f"unknown V choice '{V_choice}' (choose from {', '.join(EXAMPLE2_V)})")
    return SimSpec(
        graph=graph or example2_graph(),
        Q=example2_design(),
        V_true=EXAMPLE2_V[V_choice],
        seed=seed,
        design='fixed-gaussian',
        name=f"example2 {V_choice}",
    )


def grape_graph():
    """Sparse fixed 26-node graph: each node takes at most two parents among earlier nodes"""
    rng = np.random.default_rng(GRAPE_DESIGN_SEED)
    edges = set()
    for i in range(1, 26):
        count = rng.choice(3, p=[0.5, 0.35, 0.15])
        for j in rng.choice(i, size=min(count, i), replace=False):
            edges.add((int(j), i))
    return Dag(26, frozenset(edges))


def grape_design(kind):
    """
    50-sample exogenous design shaped like the grape-berry study.

    'vineyard': three indicator columns for vineyards of 20, 20 and 10 samples.
    'temperature': six hourly air temperatures before sampling, driven by a
    per-vineyard level, a per-sample day effect and a warming trend.
    """
    if kind == 'vineyard':
        return group_indicators(GRAPE_VINEYARD_SIZES)
    if kind == 'temperature':
        rng = np.random.default_rng(derive_seed(GRAPE_DESIGN_SEED, 1))
        levels = np.repeat([22.0, 25.0, 28.0], GRAPE_VINEYARD_SIZES)
        day = rng.normal(0.0, 3.0, size=levels.shape[0])
        trend = 0.8 * np.arange(GRAPE_HOURS)
        noise = rng.normal(0.0, 0.7, size=(levels.shape[0], GRAPE_HOURS))
        return (levels + day)[:, None] + trend[None, :] + noise
    raise ValidationError(f"unknown grape design '{kind}' (choose from vineyard, temperature)")


def grape_like_spec(kind, seed, upsilon=1.0):
    """n = 50, p = 26 with a vineyard (m = 3) or temperature (m = 6) design"""
    if not upsilon > 0:
        raise ValidationError(f"upsilon must be positive, got {upsilon}")
    Q = grape_design(kind)
    return SimSpec(
        graph=grape_graph(),
        Q=Q,
        V_true=np.eye(Q.shape[1]) / upsilon,
        seed=seed,
        design='group-indicator' if kind == 'vineyard' else 'fixed-gaussian',
        name=f"grape-like {kind}",
    )

