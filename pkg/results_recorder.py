"""
Results recorder for CSV tables, summaries, manifests and field dumps of a run
"""
import csv
import json
import logging
import platform
import time
from collections import defaultdict
from datetime import datetime
from importlib import metadata
from pathlib import Path

import numpy as np
from dateutil import parser as date_parser
from dateutil import tz

from torus_field import Field, load_field, save_field

logger = logging.getLogger(__name__)

PACKAGES = ('numpy', 'scipy', 'pydantic', 'PyYAML', 'python-dateutil')


def format_value(value):
    """repr-exact floats, plain everything else"""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    if value is None:
        return ''
    return str(value)


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if hasattr(value, 'value') and not isinstance(value, (int, float, str, bool)):
        return value.value
    return value


def package_versions():
    versions = {'python': platform.python_version()}
    for name in PACKAGES:
        try:
            versions[name] = metadata.version(name)
        except metadata.PackageNotFoundError:
            versions[name] = None
    return versions


def utc_now() -> str:
    return datetime.now(tz=tz.tzutc()).isoformat()


class ResultsRecorder:
    """Write run outputs below one directory and keep a record of what was written"""

    def __init__(self, output_dir):
        self.output_dir = Path(output_dir)
        self.records = []
        self._started = time.perf_counter()

    def _path(self, name):
        path = self.output_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    def _record(self, kind, path, **extra):
        entry = {'kind': kind, 'path': str(path), 'timestamp': utc_now()}
        entry.update(extra)
        self.records.append(entry)
        logger.debug(f"Wrote {kind}: {path}")
        return entry

    def write_csv(self, name, rows, columns=None):
        """
        Write rows (dicts) with a header row.

        Args:
            name: file name relative to the output directory
            rows: list of dicts
            columns: column order; defaults to first-seen key order

        Returns:
            Path of the written file
        """
        if columns is None:
            columns = []
            for row in rows:
                for key in row:
                    if key not in columns:
                        columns.append(key)
        path = self._path(name)
        with open(path, 'w', encoding='utf-8', newline='') as fh:
            writer = csv.writer(fh, lineterminator='\n')
            writer.writerow(columns)
            for row in rows:
                writer.writerow([format_value(row.get(c)) for c in columns])
        self._record('csv', path, rows=len(rows))
        return path

    def write_json(self, name, payload):
        path = self._path(name)
        with open(path, 'w', encoding='utf-8') as fh:
            json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        self._record('json', path)
        return path

    def write_summary(self, summary):
        return self.write_json('summary.json', summary)

    def write_manifest(self, config_hash=None, seed=None, command=None):
        """Config hash, package versions, seed, command, UTC timestamp and wall time"""
        manifest = {
            'config_sha256': config_hash,
            'versions': package_versions(),
            'seed': seed,
            'command': command,
            'timestamp': utc_now(),
            'wall_time_s': time.perf_counter() - self._started,
            'outputs': [r['path'] for r in self.records],
            'output_counts': self.get_statistics()['by_kind'],
        }
        return self.write_json('manifest.json', manifest)

    def dump_field(self, name, field: Field, label='', epsilon=0.0, **metadata):
        stem = self._path(Path('fields') / name)
        json_path, bin_path = save_field(stem, field, label=label or name, epsilon=epsilon,
                                         **_jsonable(metadata))
        self._record('field', bin_path, label=label or name)
        return json_path, bin_path

    def load_dump(self, name):
        return load_field(self.output_dir / 'fields' / name)

    def read_manifest(self):
        """Previously written manifest with its timestamp parsed, or None"""
        path = self.output_dir / 'manifest.json'
        if not path.exists():
            return None
        with open(path, 'r', encoding='utf-8') as fh:
            manifest = json.load(fh)
        manifest['timestamp_parsed'] = date_parser.isoparse(manifest['timestamp'])
        return manifest

    def get_statistics(self):
        by_kind = defaultdict(int)
        for record in self.records:
            by_kind[record['kind']] += 1
        return {
            'total': len(self.records),
            'by_kind': dict(by_kind),
            'output_dir': str(self.output_dir),
        }
