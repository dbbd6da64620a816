"""
Configuration for exonet
Environment variables (optionally from a .env file) provide the defaults;
a JSON config file and command-line flags override them in that order.
"""

import json
import logging
import os
from pathlib import Path

from dotenv import load_dotenv

from errors import UsageError

# Load environment variables from .env file
load_dotenv()

BASE_DIR = Path(__file__).parent
DATA_DIR = Path(os.environ.get('EXONET_DATA_DIR', BASE_DIR / 'data'))
OUTPUT_DIR = Path(os.environ.get('EXONET_OUTPUT_DIR', BASE_DIR / 'runs'))
LOG_LEVEL = os.environ.get('EXONET_LOG_LEVEL', 'INFO')
WORKERS = int(os.environ.get('EXONET_WORKERS', '1'))

VERSION = '0.3.0'

# Score and search defaults
DEFAULTS = {
    'tau': float(os.environ.get('EXONET_TAU', '1.0')),
    'delta': float(os.environ.get('EXONET_DELTA', '1.0')),
    'upsilon': None,
    'max_in_degree': int(os.environ.get('EXONET_MAX_IN_DEGREE', '4')),
    'restarts': int(os.environ.get('EXONET_RESTARTS', '5')),
    'seed': int(os.environ.get('EXONET_SEED', '0')),
    'workers': WORKERS,
}

# Numerical tolerances
SYMMETRY_TOL = 1e-10
SOLVE_RESIDUAL_TOL = 1e-9
RANK_TOL = 1e-8
IMPROVEMENT_TOL = 1e-9
KL_CLAMP_TOL = 1e-9

_logging_configured = False


def setup_logging(level=None):
    """Configure the root logger once"""
    global _logging_configured
    level = (level or LOG_LEVEL).upper()
    if not _logging_configured:
        logging.basicConfig(
            level=level,
            format='%(asctime)s %(levelname)s %(name)s: %(message)s',
        )
        _logging_configured = True
    else:
        logging.getLogger().setLevel(level)


def load_config_file(path):
    """Read a JSON config file into a dict"""
    if path is None:
        return {}
    path = Path(path)
    try:
        with open(path) as f:
            data = json.load(f)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise UsageError(f"config file {path} is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must contain a JSON object")
    return data


def resolve(defaults, config_file=None, flags=None):
    """
    Merge settings: flags override the config file, which overrides defaults.

    Args:
        defaults: dict of known keys and their default values
        config_file: path to a JSON object, or None
        flags: dict of command-line values; None means "not given"

    Returns:
        dict: resolved settings (every key of `defaults` present)
    """
    resolved = dict(defaults)
    file_values = load_config_file(config_file)
    unknown = sorted(set(file_values) - set(defaults))
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}")
    resolved.update(file_values)
    for key, value in (flags or {}).items():
        if key in defaults and value is not None:
            resolved[key] = value
    return resolved
