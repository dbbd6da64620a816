"""
Score-based structure learning
Greedy hill-climbing over DAGs with add / delete / reverse moves and seeded
random restarts, plus brute-force DAG enumeration and Markov-equivalence keys
used to check it.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import combinations, product
from typing import NamedTuple

import networkx as nx
import numpy as np

from config import DEFAULTS, IMPROVEMENT_TOL
from errors import ValidationError
from model import Dag, require_acyclic
from scores import MetricKind, NetworkScorer

logger = logging.getLogger(__name__)

MOVES = ('add', 'delete', 'reverse')
MAX_ENUMERATION_NODES = 4


@dataclass(frozen=True)
class SearchConfig:
    metric: MetricKind = MetricKind.BGE
    max_in_degree: int = DEFAULTS['max_in_degree']
    restarts: int = DEFAULTS['restarts']
    seed: int = DEFAULTS['seed']
    moves: tuple = MOVES
    workers: int = 1
    edge_probability: float = 0.2

    def __post_init__(self):
        object.__setattr__(self, 'metric', MetricKind.parse(self.metric))
        object.__setattr__(self, 'moves', tuple(self.moves))
        problems = []
        if self.seed < 0:
            problems.append(f"seed must be non-negative, got {self.seed}")
        if self.restarts < 1:
            problems.append(f"restarts must be at least 1, got {self.restarts}")
        if self.max_in_degree < 1:
            problems.append(f"max_in_degree must be at least 1, got {self.max_in_degree}")
        unknown = [move for move in self.moves if move not in MOVES]
        if unknown or not self.moves:
            problems.append(f"moves must be a non-empty subset of {MOVES}, got {self.moves}")
        if not 0.0 <= self.edge_probability <= 1.0:
            problems.append(f"edge_probability must lie in [0, 1], got {self.edge_probability}")
        if problems:
            raise ValidationError(problems)


class TraceEntry(NamedTuple):
    restart: int
    iteration: int
    move: str
    score: float


@dataclass(frozen=True)
class SearchResult:
    best: Dag
    score: float
    trace: tuple
    restart: int = 0


def random_dag(p, rng, edge_probability, max_in_degree):
    """Seeded random DAG: a random node order plus independent edge coin-flips along it"""
    order = rng.permutation(p)
    edges = set()
    indegree = [0] * p
    for a, b in combinations(range(p), 2):
        j, i = int(order[a]), int(order[b])
        if rng.random() < edge_probability and indegree[i] < max_in_degree:
            edges.add((j, i))
            indegree[i] += 1
    return Dag(p, frozenset(edges))


def _restart_rng(seed, restart):
    return np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(restart,)))


class _Climber:
    """One restart: owns its graph and trace, shares the scorer"""

    def __init__(self, scorer, cfg, restart):
        self.scorer = scorer
        self.cfg = cfg
        self.restart = restart

    def _candidates(self, g, G, local):
        """Yield (delta, move, j, i) in ascending (j, i) order"""
        p = g.p
        for j, i in product(range(p), range(p)):
            if j == i:
                continue
            if g.has_edge(j, i):
                if 'delete' in self.cfg.moves:
                    parents = tuple(k for k in g.parents(i) if k != j)
                    yield self.scorer.local(i, parents) - local[i], 'delete', j, i
                if 'reverse' in self.cfg.moves and g.in_degree(j) < self.cfg.max_in_degree:
                    G.remove_edge(j, i)
                    creates_cycle = nx.has_path(G, j, i)
                    G.add_edge(j, i)
                    if not creates_cycle:
                        new_i = tuple(k for k in g.parents(i) if k != j)
                        new_j = tuple(sorted(g.parents(j) + (i,)))
                        delta = (self.scorer.local(i, new_i) - local[i]
                                 + self.scorer.local(j, new_j) - local[j])
                        yield delta, 'reverse', j, i
            elif 'add' in self.cfg.moves and not g.has_edge(i, j):
                if g.in_degree(i) >= self.cfg.max_in_degree or nx.has_path(G, i, j):
                    continue
                parents = tuple(sorted(g.parents(i) + (j,)))
                yield self.scorer.local(i, parents) - local[i], 'add', j, i

    def run(self, start):
        g = start
        G = g.to_networkx()
        local = [self.scorer.local(i, g.parents(i)) for i in range(g.p)]
        score = sum(local)
        trace = [TraceEntry(self.restart, 0, 'start', score)]
        iteration = 0
        while True:
            best = None
            for candidate in self._candidates(g, G, local):
                if best is None or candidate[0] > best[0]:
                    best = candidate
            if best is None or best[0] <= IMPROVEMENT_TOL:
                break
            delta, move, j, i = best
            if move == 'add':
                g = g.with_edge(j, i)
            elif move == 'delete':
                g = g.without_edge(j, i)
            else:
                g = g.reversed_edge(j, i)
            G = g.to_networkx()
            for node in {i, j}:
                local[node] = self.scorer.local(node, g.parents(node))
            score = sum(local)
            iteration += 1
            trace.append(TraceEntry(self.restart, iteration, f"{move} {j}->{i}", score))
        logger.debug("restart %d stopped after %d moves at %.6f", self.restart, iteration, score)
        return g, trace


def hill_climb(ds, h, cfg=None, scorer=None):
    """
    Greedy best-improvement search from the empty graph (restart 0) and from
    cfg.restarts - 1 seeded random DAGs. Among equal improvements the move
    with the lowest (source, target) pair wins; a restart ends when no move
    improves the score by more than IMPROVEMENT_TOL.
    """
    cfg = cfg or SearchConfig()
    scorer = scorer or NetworkScorer(ds, cfg.metric, h)
    p = ds.p

    def one(restart):
        if restart == 0:
            start = Dag.empty(p)
        else:
            start = random_dag(p, _restart_rng(cfg.seed, restart),
                               cfg.edge_probability, cfg.max_in_degree)
        return _Climber(scorer, cfg, restart).run(start)

    if cfg.workers > 1 and cfg.restarts > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(one, range(cfg.restarts)))
    else:
        results = [one(r) for r in range(cfg.restarts)]

    best_restart, best_graph, best_score = 0, None, None
    trace = []
    for restart, (g, restart_trace) in enumerate(results):
        trace.extend(restart_trace)
        score = scorer.network(g)
        if best_score is None or score > best_score:
            best_restart, best_graph, best_score = restart, g, score
    logger.info("%s search: best %s, score %.6f (restart %d of %d)",
                cfg.metric.value, best_graph.describe(), best_score, best_restart, cfg.restarts)
    return SearchResult(best=best_graph, score=best_score, trace=tuple(trace), restart=best_restart)


def enumerate_dags(p):
    """Every DAG on p <= 4 labelled nodes (1, 3, 25, 543 graphs)"""
    if p < 0 or p > MAX_ENUMERATION_NODES:
        raise ValidationError(f"enumerate_dags supports 0 <= p <= {MAX_ENUMERATION_NODES}, got {p}")
    pairs = list(combinations(range(p), 2))
    dags = []
    # each unordered pair is absent, j -> i or i -> j
    for states in product((0, 1, 2), repeat=len(pairs)):
        edges = set()
        for (j, i), state in zip(pairs, states):
            if state == 1:
                edges.add((j, i))
            elif state == 2:
                edges.add((i, j))
        g = Dag(p, frozenset(edges))
        if g.is_acyclic():
            dags.append(g)
    return dags


def equivalence_class(g):
    """
    Markov-equivalence key: (skeleton, colliders).

    The skeleton holds sorted node pairs; colliders are (j, i, k) with
    j -> i <- k, j < k and j, k non-adjacent.
    """
    require_acyclic(g)
    skeleton = frozenset((min(j, i), max(j, i)) for j, i in g.edges)
    colliders = set()
    for i in range(g.p):
        for j, k in combinations(g.parents(i), 2):
            if (j, k) not in skeleton:
                colliders.add((j, i, k))
    return skeleton, frozenset(colliders)
