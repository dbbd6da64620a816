"""
Run manifests and the run ledger
Each CLI run writes manifest.json next to its outputs and appends a record to
ledger.json in the output root. A record stores the run's manifest with its
SHA-256 digest and links to the previous record through that record's hash.
"""

import hashlib
import json
import logging
from datetime import datetime, timezone
from pathlib import Path

from config import VERSION
from errors import ValidationError

logger = logging.getLogger(__name__)

LEDGER_NAME = 'ledger.json'
MANIFEST_NAME = 'manifest.json'

# outputs that carry a "manifest" key; everything else is bound by digest only
SELF_REFERENCING_SUFFIXES = ('.json',)


def _now():
    return datetime.now(timezone.utc).isoformat()


def file_digest(path):
    """SHA-256 of a file's bytes"""
    sha = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            sha.update(chunk)
    return sha.hexdigest()


def document_digest(document):
    """SHA-256 of a JSON document in canonical (sorted-key) form"""
    return hashlib.sha256(json.dumps(document, sort_keys=True).encode()).hexdigest()


class RunManifest:
    """Everything needed to rerun a command and check what it wrote"""

    def __init__(self, command, parameters, seed=None, config_file=None):
        self.command = command
        # stored as it will read back from JSON
        self.parameters = json.loads(json.dumps(dict(parameters), default=str))
        self.seed = seed
        self.config_file = str(config_file) if config_file else None
        self.version = VERSION
        self.started = _now()
        self.finished = None
        self.outputs = {}

    def record(self, path, root):
        """Register an output file by its path relative to the run directory"""
        path = Path(path)
        self.outputs[str(path.relative_to(root))] = file_digest(path)

    def finish(self):
        self.finished = _now()

    def bound_by_digest(self):
        """Outputs (the CSV tables) whose only link to this manifest is their digest"""
        return sorted(name for name in self.outputs
                      if not name.endswith(SELF_REFERENCING_SUFFIXES))

    def to_dict(self):
        return {
            'command': self.command,
            'config_file': self.config_file,
            'parameters': self.parameters,
            'seed': self.seed,
            'version': self.version,
            'started': self.started,
            'finished': self.finished,
            'outputs': dict(sorted(self.outputs.items())),
            'bound_by_digest': self.bound_by_digest(),
        }

    def save(self, directory):
        path = Path(directory) / MANIFEST_NAME
        with open(path, 'w') as f:
            json.dump(self.to_dict(), f, indent=2, sort_keys=True)
            f.write('\n')
        return path


class LedgerRecord:
    """
    One ledger entry. The link hash covers the position, time, run directory,
    manifest digest and the previous record's hash; the manifest itself is
    covered through its digest.
    """

    def __init__(self, index, recorded_at, run_dir, manifest, previous_hash,
                 manifest_digest=None, hash=None):
        self.index = index
        self.recorded_at = recorded_at
        self.run_dir = run_dir
        self.manifest = manifest
        self.previous_hash = previous_hash
        self.manifest_digest = manifest_digest or document_digest(manifest)
        self.hash = hash or self.link_hash()

    @property
    def is_genesis(self):
        return self.index == 0

    def link_hash(self):
        link = '|'.join([str(self.index), self.recorded_at, str(self.run_dir),
                         self.manifest_digest, self.previous_hash])
        return hashlib.sha256(link.encode()).hexdigest()

    def problems(self, previous=None):
        found = []
        if document_digest(self.manifest) != self.manifest_digest:
            found.append(f"record {self.index}: manifest does not match its digest")
        if self.link_hash() != self.hash:
            found.append(f"record {self.index}: link hash mismatch")
        if previous is not None and self.previous_hash != previous.hash:
            found.append(f"record {self.index}: not linked to record {previous.index}")
        return found

    def to_dict(self):
        return {
            'index': self.index,
            'recorded_at': self.recorded_at,
            'run_dir': self.run_dir,
            'manifest': self.manifest,
            'manifest_digest': self.manifest_digest,
            'previous_hash': self.previous_hash,
            'hash': self.hash,
        }


class Ledger:
    """Append-only, hash-linked record of runs under one output root"""

    def __init__(self, path):
        self.path = Path(path)
        self.chain = []

    @classmethod
    def open(cls, root):
        ledger = cls(Path(root) / LEDGER_NAME)
        if ledger.path.exists():
            with open(ledger.path) as f:
                try:
                    records = json.load(f)
                except json.JSONDecodeError as e:
                    raise ValidationError(f"ledger {ledger.path} is not valid JSON: {e}")
            try:
                ledger.chain = [LedgerRecord(**record) for record in records]
            except TypeError as e:
                raise ValidationError(f"ledger {ledger.path} has malformed records: {e}")
        else:
            ledger.chain.append(LedgerRecord(0, _now(), None, {'version': VERSION}, '0'))
        return ledger

    def add_manifest(self, manifest, run_dir):
        """Append a run and persist the ledger; returns the new record's hash"""
        latest = self.chain[-1]
        record = LedgerRecord(latest.index + 1, _now(), str(run_dir), manifest.to_dict(), latest.hash)
        self.chain.append(record)
        self.save()
        logger.info("ledger record %d for '%s' (%s)", record.index, manifest.command, record.hash[:12])
        return record.hash

    def save(self):
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with open(self.path, 'w') as f:
            json.dump([record.to_dict() for record in self.chain], f, indent=2)
            f.write('\n')

    def chain_problems(self):
        found = []
        previous = None
        for record in self.chain:
            found.extend(record.problems(previous))
            previous = record
        return found

    def is_chain_valid(self):
        return not self.chain_problems()

    def runs_for(self, run_dir):
        run_dir = str(run_dir)
        return [r for r in self.chain if not r.is_genesis and r.run_dir == run_dir]


def verify_run(run_dir, ledger=None):
    """
    Re-hash the outputs listed in a run's manifest.

    Returns:
        list[str]: problems found; empty when every output matches
    """
    run_dir = Path(run_dir)
    manifest_path = run_dir / MANIFEST_NAME
    if not manifest_path.exists():
        return [f"no {MANIFEST_NAME} in {run_dir}"]
    with open(manifest_path) as f:
        manifest = json.load(f)
    problems = []
    for name, digest in sorted(manifest.get('outputs', {}).items()):
        path = run_dir / name
        if not path.exists():
            problems.append(f"missing output {name}")
        elif file_digest(path) != digest:
            problems.append(f"output {name} changed since the run")
    if ledger is not None:
        problems.extend(f"ledger {ledger.path}: {p}" for p in ledger.chain_problems())
        recorded = ledger.runs_for(run_dir)
        if recorded and recorded[-1].manifest_digest != document_digest(manifest):
            problems.append(f"{MANIFEST_NAME} differs from the ledger record")
    return problems
