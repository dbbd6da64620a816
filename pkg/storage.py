"""
File persistence for exonet
Matrices as CSV with a header row (17 significant digits), graphs,
posteriors and simulation truth as JSON documents.
"""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from errors import UsageError, ValidationError
from manifest import MANIFEST_NAME
from model import Dag, Dataset, require_acyclic, require_valid

logger = logging.getLogger(__name__)

FLOAT_FORMAT = '%.17g'


def ensure_dir(path):
    path = Path(path)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_matrix_csv(path, values, names):
    """Write a matrix with one header row of column names"""
    frame = pd.DataFrame(np.asarray(values, dtype=float).reshape(len(values), len(names)),
                         columns=list(names))
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return Path(path)


def read_matrix_csv(path, label='matrix'):
    """
    Read a numeric CSV with a header row.

    Returns:
        tuple: (n x k float array, tuple of column names)
    """
    path = Path(path)
    if not path.exists():
        raise UsageError(f"{label} file not found: {path}")
    try:
        frame = pd.read_csv(path, float_precision='round_trip')
    except pd.errors.EmptyDataError:
        return np.zeros((0, 0)), ()
    except pd.errors.ParserError as e:
        raise ValidationError(f"{label} file {path} is not valid CSV: {e}")
    bad = [col for col in frame.columns if not pd.api.types.is_numeric_dtype(frame[col])]
    if bad:
        raise ValidationError([f"{label} column '{col}' is not numeric" for col in bad])
    if frame.isna().any().any():
        raise ValidationError(f"{label} file {path} has missing entries")
    return frame.to_numpy(dtype=float), tuple(str(c) for c in frame.columns)


def load_dataset(x_path, q_path=None):
    """Dataset from X.csv and an optional Q.csv, validated"""
    X, x_names = read_matrix_csv(x_path, 'X')
    if q_path is None:
        Q, q_names = np.zeros((X.shape[0], 0)), ()
    else:
        Q, q_names = read_matrix_csv(q_path, 'Q')
    ds = Dataset.create(X, Q, variable_names=x_names, exogenous_names=q_names)
    return require_valid(ds)


def save_dataset(directory, ds):
    directory = ensure_dir(directory)
    paths = [write_matrix_csv(directory / 'X.csv', ds.X, ds.variable_names)]
    if ds.m:
        paths.append(write_matrix_csv(directory / 'Q.csv', ds.Q, ds.exogenous_names))
    return paths


def write_json(path, document):
    with open(path, 'w') as f:
        json.dump(document, f, indent=2, sort_keys=True)
        f.write('\n')
    return Path(path)


def read_json(path, label='document'):
    path = Path(path)
    try:
        with open(path) as f:
            return json.load(f)
    except FileNotFoundError:
        raise UsageError(f"{label} file not found: {path}")
    except json.JSONDecodeError as e:
        raise ValidationError(f"{label} file {path} is not valid JSON: {e}")


def save_graph(path, g, names):
    return write_json(path, {
        'variables': list(names),
        'edges': g.named_edges(names),
        'manifest': MANIFEST_NAME,
    })


def load_graph(path, names):
    """Read an edge-list document of [parent, child] name pairs against `names`"""
    document = read_json(path, 'graph')
    edges = document.get('edges') if isinstance(document, dict) else None
    if not isinstance(edges, list) or any(not isinstance(e, list) or len(e) != 2 for e in edges):
        raise ValidationError(f"graph file {path} must hold 'edges': [[parent, child], ...]")
    g = Dag.from_names(list(names), [tuple(e) for e in edges])
    return require_acyclic(g)


def save_posterior(path, net, names):
    document = net.to_dict(names)
    document['manifest'] = MANIFEST_NAME
    return write_json(path, document)


def save_sigma(path, sigma, names):
    return write_matrix_csv(path, sigma.values, names)


def write_table(path, frame):
    """Write a results table (DataFrame) as CSV"""
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    return Path(path)


def save_sim_output(directory, out):
    """X.csv, Q.csv and truth.json for one simulated dataset"""
    directory = ensure_dir(directory)
    paths = save_dataset(directory, out.ds)
    truth = out.truth_dict()
    truth['manifest'] = MANIFEST_NAME
    paths.append(write_json(directory / 'truth.json', truth))
    return paths
