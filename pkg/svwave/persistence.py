"""
Result Persistence
Version-aware JSON reports, CSV curves, run manifests and field snapshots
"""
import csv
import json
import logging
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import __version__
from .logger import log_report_written
from .spectral_torus import dump_field, write_field_csv


# Current report file version
REPORT_VERSION = 1

TRAJECTORY_COLUMNS = ('t', 'norm_R', 'norm_S', 'energy', 'dissipation', 'mean_diff', 'W')


def _json_default(value):
    """Convert numpy scalars and arrays for json.dump"""
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, tuple):
        return list(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def format_cell(value):
    """repr-exact formatting so equal runs give byte-identical files"""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


class ResultStore:
    """
    Manages result artifacts under one output directory, one subdirectory per subcommand.

    Usage:
        store = ResultStore("results")

        # Write artifacts of a run
        store.write_manifest("simulate", config)
        store.write_trajectory("simulate", "trajectory", traj)
        store.write_report("simulate", {"passed": True, "checks": [...]})

        # Read them back
        report = store.load_report("simulate")
    """

    def __init__(self, output_dir="results"):
        """
        Initialize result store.

        Args:
            output_dir: Directory to store results in
        """
        self.output_dir = Path(output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)
        self.logger = logging.getLogger(__name__)

        self.logger.info(f"ResultStore initialized: {self.output_dir.absolute()}")

    def run_dir(self, subcommand):
        """Directory of one subcommand's artifacts"""
        path = self.output_dir / str(subcommand)
        path.mkdir(parents=True, exist_ok=True)
        return path

    # ═══════════════════════════════════════════════════════════════════
    # WRITING
    # ═══════════════════════════════════════════════════════════════════

    def write_report(self, subcommand, report: dict) -> Path:
        """
        Write the JSON report of a subcommand.

        Args:
            subcommand: Subcommand name
            report: Report data (passed flag, checks, results)

        Returns:
            Path of the written report
        """
        data = {'version': REPORT_VERSION, 'subcommand': str(subcommand)}
        data.update(report)
        report_file = self.run_dir(subcommand) / "report.json"
        with open(report_file, 'w', encoding='utf-8') as f:
            json.dump(data, f, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default)
            f.write('\n')
        log_report_written(self.logger, report_file)
        return report_file

    def write_manifest(self, subcommand, config, extra: Optional[dict] = None) -> Path:
        """
        Write the manifest needed to re-run a subcommand exactly.

        Args:
            subcommand: Subcommand name
            config: SimConfig
            extra: Additional provenance (e.g. seeds of an ensemble)
        """
        manifest = {
            'version': REPORT_VERSION,
            'code_version': __version__,
            'subcommand': str(subcommand),
            'seed': config.seed,
            'config_hash': config.config_hash(),
            'config': config.to_dict(),
        }
        if extra:
            manifest.update(extra)
        manifest_file = self.run_dir(subcommand) / "manifest.json"
        with open(manifest_file, 'w', encoding='utf-8') as f:
            json.dump(manifest, f, indent=2, sort_keys=True, ensure_ascii=False, default=_json_default)
            f.write('\n')
        return manifest_file

    def write_csv(self, subcommand, name, header, rows) -> Path:
        """Write rows under a header to <subcommand>/<name>.csv"""
        csv_file = self.run_dir(subcommand) / f"{name}.csv"
        with open(csv_file, 'w', encoding='utf-8', newline='') as f:
            writer = csv.writer(f, lineterminator='\n')
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_cell(v) for v in row])
        self.logger.debug(f"CSV written: {csv_file}")
        return csv_file

    def write_trajectory(self, subcommand, name, trajectory) -> Path:
        """Write trajectory diagnostics (t, norms, energy, dissipation, mean(R - S), W)"""
        return self.write_csv(subcommand, name, TRAJECTORY_COLUMNS, trajectory.rows())

    def write_snapshot(self, subcommand, name, field) -> Path:
        """Write a binary field snapshot"""
        snapshot_dir = self.run_dir(subcommand) / "snapshots"
        snapshot_dir.mkdir(exist_ok=True)
        snapshot_file = snapshot_dir / f"{name}.bin"
        dump_field(field, snapshot_file)
        return snapshot_file

    def write_field_csv(self, subcommand, name, field) -> Path:
        """Write a field as readable CSV next to the binary snapshots"""
        snapshot_dir = self.run_dir(subcommand) / "snapshots"
        snapshot_dir.mkdir(exist_ok=True)
        csv_file = snapshot_dir / f"{name}.csv"
        write_field_csv(field, csv_file)
        self.logger.debug(f"Field CSV written: {csv_file}")
        return csv_file

    # ═══════════════════════════════════════════════════════════════════
    # READING
    # ═══════════════════════════════════════════════════════════════════

    def load_report(self, subcommand) -> Optional[dict]:
        """
        Load a subcommand's report.

        Args:
            subcommand: Subcommand name

        Returns:
            Report dict, or None if missing, unreadable or of another version
        """
        report_file = self.output_dir / str(subcommand) / "report.json"
        if not report_file.exists():
            self.logger.warning(f"Report not found: {report_file}")
            return None
        try:
            with open(report_file, 'r', encoding='utf-8') as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            self.logger.error(f"Failed to load report {report_file}: {e}")
            return None

        version = data.get('version')
        if version != REPORT_VERSION:
            self.logger.warning(f"Skipping report {report_file}: version {version} (current: {REPORT_VERSION})")
            return None
        return data

    def list_reports(self) -> List[Dict[str, object]]:
        """
        List all reports under the output directory.

        Returns:
            List of dicts with subcommand, pass flag and check counts, sorted by subcommand
        """
        reports = []
        for report_file in sorted(self.output_dir.glob("*/report.json")):
            data = self.load_report(report_file.parent.name)
            if data is None:
                continue
            checks = data.get('checks', [])
            reports.append({
                'subcommand': data.get('subcommand', report_file.parent.name),
                'passed': bool(data.get('passed', False)),
                'checks': len(checks),
                'failed': sum(1 for c in checks if not c.get('passed', False)),
                'version': data['version'],
            })
        return reports
