"""
Replicate grids for the simulation studies and the divergence tables
Every replicate draws its data from derive_seed(master, ...) keys, so cells can
run in any order or in separate processes and still give the same numbers.
Output rows are sorted by their keys, never by completion order.
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from functools import partial

import numpy as np
import pandas as pd

from errors import UsageError
from divergence import (FamilyGrams, divergence_bounds, divergence_sigma,
                        divergence_sigma_between, kl_asymptotic, kl_from_posteriors, mc_kl)
from model import Dag, Hyper, standardize
from posterior import node_posterior
from simgen import (EXAMPLE1_SIZES, EXAMPLE1_UPSILONS, EXAMPLE2_V, derive_seed,
                    example1_spec, example2_spec, simulate)

logger = logging.getLogger(__name__)

EXAMPLE2_GRID = '0.0001:10:30'


def parse_grid(text):
    """'lo:hi:points' -> points log-spaced values from lo to hi inclusive"""
    try:
        lo, hi, points = text.split(':')
        lo, hi, points = float(lo), float(hi), int(points)
    except (AttributeError, ValueError):
        raise UsageError(f"grid '{text}' must look like lo:hi:points, e.g. 0.001:100:20")
    if not (lo > 0 and hi >= lo and points >= 1):
        raise UsageError(f"grid '{text}' needs 0 < lo <= hi and points >= 1")
    if points == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, points)


def summarize(frame, keys, columns):
    """Median and quartiles of `columns` within each `keys` group"""
    grouped = frame.groupby(keys, sort=True)
    parts = []
    for col in columns:
        stats = grouped[col].agg(
            median='median',
            q1=lambda s: s.quantile(0.25),
            q3=lambda s: s.quantile(0.75),
        )
        stats.columns = [f"{col}_{name}" for name in stats.columns]
        parts.append(stats)
    summary = pd.concat(parts, axis=1)
    summary.insert(0, 'replicates', grouped.size())
    return summary.reset_index()


def _map(fn, cells, workers):
    if workers > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, cells))
    return [fn(cell) for cell in cells]


def _example1_cell(cell, replicates, seed, tau, delta):
    n, upsilon = cell
    rows = []
    h = Hyper(tau=tau, delta=delta, upsilon=upsilon)
    for r in range(replicates):
        # common random numbers across upsilon for a given (n, replicate)
        spec = example1_spec(n, upsilon, derive_seed(seed, n, r))
        ds = standardize(simulate(spec).ds)
        grams = FamilyGrams.build(ds, h)
        empty, full = divergence_bounds(ds, h, grams=grams)
        true = divergence_sigma(spec.graph, ds, h, grams)
        rows.append({'n': n, 'upsilon': upsilon, 'replicate': r,
                     'D_empty': empty, 'D_full': full, 'D_true': true})
    logger.info("example1 cell n=%d upsilon=%g done (%d replicates)", n, upsilon, replicates)
    return rows


def run_example1(sizes=EXAMPLE1_SIZES, upsilons=EXAMPLE1_UPSILONS, replicates=100,
                 seed=0, tau=1.0, delta=1.0, workers=1):
    """
    Empty-graph, full-graph and true-graph divergences for every (n, upsilon).

    Returns:
        tuple: (per-replicate DataFrame, summary DataFrame)
    """
    cells = [(int(n), float(u)) for n in sizes for u in upsilons]
    fn = partial(_example1_cell, replicates=replicates, seed=seed, tau=tau, delta=delta)
    rows = [row for cell_rows in _map(fn, cells, workers) for row in cell_rows]
    raw = pd.DataFrame(rows).sort_values(['n', 'upsilon', 'replicate'], ignore_index=True)
    raw['ordered'] = (raw['D_empty'] <= raw['D_true']) & (raw['D_true'] <= raw['D_full'])
    summary = summarize(raw, ['n', 'upsilon'], ['D_empty', 'D_full', 'D_true'])
    ordered = raw.groupby(['n', 'upsilon'], sort=True)['ordered'].mean().reset_index(drop=True)
    summary['ordered_fraction'] = ordered
    return raw, summary


def _example2_cell(cell, upsilons, seed, tau, delta):
    choice_index, choice, replicate = cell
    spec = example2_spec(choice, derive_seed(seed, choice_index, replicate))
    ds = standardize(simulate(spec).ds)
    g = spec.graph
    h_true = Hyper(tau=tau, delta=delta, V=spec.V_true)
    residual = divergence_sigma(g, ds, h_true)
    rows = []
    for upsilon in upsilons:
        h_iid = Hyper(tau=tau, delta=delta, upsilon=float(upsilon))
        iid = divergence_sigma_between(g, ds, ('bayes', h_true), ('bayes', h_iid))
        rows.append({'V_choice': choice, 'upsilon': float(upsilon), 'replicate': replicate,
                     'D_iid': iid, 'D_residual': residual, 'difference': iid - residual})
    return rows


def run_example2(choices=tuple(EXAMPLE2_V), upsilons=None, replicates=100,
                 seed=0, tau=1.0, delta=1.0, workers=1):
    """
    D_Sigma(f_B, f_upsilon) - D_Sigma(f_B, f_R) per V choice and upsilon, where
    f_B uses the data-generating V and f_upsilon uses V = I / upsilon.
    """
    upsilons = parse_grid(EXAMPLE2_GRID) if upsilons is None else np.asarray(upsilons, dtype=float)
    cells = [(k, choice, r) for k, choice in enumerate(choices) for r in range(replicates)]
    fn = partial(_example2_cell, upsilons=upsilons, seed=seed, tau=tau, delta=delta)
    rows = [row for cell_rows in _map(fn, cells, workers) for row in cell_rows]
    logger.info("example2: %d datasets x %d upsilon values", len(cells), len(upsilons))
    raw = pd.DataFrame(rows).sort_values(['V_choice', 'upsilon', 'replicate'], ignore_index=True)
    raw['positive'] = raw['difference'] > 0
    summary = summarize(raw, ['V_choice', 'upsilon'], ['difference'])
    summary['positive_fraction'] = (
        raw.groupby(['V_choice', 'upsilon'], sort=True)['positive'].mean().reset_index(drop=True))
    return raw, summary


def divergence_grid(ds, upsilons, tau=1.0, delta=1.0, ordering=None, graph=None):
    """D_empty and D_full (plus D_graph for a given graph) at each upsilon"""
    rows = []
    for upsilon in upsilons:
        h = Hyper(tau=tau, delta=delta, upsilon=float(upsilon))
        grams = FamilyGrams.build(ds, h)
        empty, full = divergence_bounds(ds, h, ordering, grams)
        row = {'upsilon': float(upsilon), 'D_empty': empty, 'D_full': full}
        if graph is not None:
            row['D_graph'] = divergence_sigma(graph, ds, h, grams)
        rows.append(row)
        logger.debug("upsilon=%g D_empty=%.6g D_full=%.6g", upsilon, empty, full)
    return pd.DataFrame(rows)


def kl_check(ds, upsilons, samples, seed=0, tau=1.0, delta=1.0, graph=None):
    """
    Closed-form, large-sample and Monte-Carlo KL for every node of `graph`
    (the index-order full graph by default) at each upsilon.
    """
    graph = graph or Dag.full(range(ds.p))
    rows = []
    for u_index, upsilon in enumerate(upsilons):
        h = Hyper(tau=tau, delta=delta, upsilon=float(upsilon))
        grams = FamilyGrams.build(ds, h)
        for i in range(ds.p):
            parents = graph.parents(i)
            bayes = node_posterior(grams.bayes, i, parents, h)
            residual = node_posterior(grams.residual, i, parents, h)
            closed = kl_from_posteriors(bayes, residual)
            estimate, se = mc_kl(bayes, residual, samples, derive_seed(seed, u_index, i))
            rows.append({
                'upsilon': float(upsilon), 'node': ds.variable_names[i], 'parents': len(parents),
                'D_closed': closed, 'D_asymptotic': kl_asymptotic(bayes, residual),
                'D_mc': estimate, 'mc_se': se,
                'z': (closed - estimate) / se if se > 0 else 0.0,
            })
    return pd.DataFrame(rows)
