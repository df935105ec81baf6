"""
Tests for reports, manifests, CSV curves and snapshots
"""
import json

import numpy as np
import pytest

from svwave import __version__
from svwave.persistence import REPORT_VERSION, ResultStore, format_cell
from svwave.spectral_torus import from_modes, load_spectral

from conftest import make_config


@pytest.fixture
def store(tmp_path):
    return ResultStore(tmp_path / "results")


class TestReports:

    def test_report_round_trip(self, store):
        store.write_report("simulate", {'passed': True, 'checks': [], 'results': {'energy': np.float64(0.5)}})
        report = store.load_report("simulate")
        assert report['version'] == REPORT_VERSION
        assert report['subcommand'] == "simulate"
        assert report['results']['energy'] == 0.5

    def test_report_is_sorted_json(self, store):
        path = store.write_report("simulate", {'passed': False, 'checks': []})
        text = path.read_text(encoding='utf-8')
        assert text.endswith('\n')
        assert list(json.loads(text)) == sorted(json.loads(text))

    def test_numpy_values_are_serialized(self, store):
        store.write_report("ensemble", {'values': np.array([1.0, 2.0]), 'count': np.int64(3),
                                        'flag': np.bool_(True), 'pair': (1, 2)})
        report = store.load_report("ensemble")
        assert report['values'] == [1.0, 2.0]
        assert report['count'] == 3 and report['flag'] is True and report['pair'] == [1, 2]

    def test_missing_report(self, store):
        assert store.load_report("holder-study") is None

    def test_unreadable_report(self, store):
        (store.run_dir("cutoff-check") / "report.json").write_text("{not json", encoding='utf-8')
        assert store.load_report("cutoff-check") is None

    def test_other_version_is_skipped(self, store):
        checks = [{'name': "a", 'passed': True}]
        (store.run_dir("energy-check") / "report.json").write_text(
            json.dumps({'subcommand': "energy-check", 'checks': checks}), encoding='utf-8')
        store.write_report("simulate", {'passed': True, 'checks': checks})
        assert store.load_report("energy-check") is None
        assert store.load_report("simulate")['version'] == REPORT_VERSION
        assert [entry['subcommand'] for entry in store.list_reports()] == ["simulate"]

    def test_list_reports(self, store):
        store.write_report("simulate", {'passed': True, 'checks': [{'name': "a", 'passed': True}]})
        store.write_report("ensemble", {'passed': False, 'checks': [{'name': "b", 'passed': False}]})
        listing = store.list_reports()
        assert [entry['subcommand'] for entry in listing] == ["ensemble", "simulate"]
        assert listing[0]['failed'] == 1
        assert listing[1]['passed'] is True


class TestManifest:

    def test_manifest_carries_provenance(self, store, tmp_path):
        config = make_config(tmp_path)
        path = store.write_manifest("simulate", config, {'study_seeds': [11, 12]})
        manifest = json.loads(path.read_text(encoding='utf-8'))
        assert manifest['code_version'] == __version__
        assert manifest['seed'] == 11
        assert manifest['config_hash'] == config.config_hash()
        assert manifest['config']['simulation']['N'] == 16
        assert manifest['study_seeds'] == [11, 12]


class TestCsv:

    def test_cells_use_repr(self):
        assert format_cell(0.1) == "0.1"
        assert format_cell(np.float64(1e-17)) == "1e-17"
        assert format_cell(np.int64(7)) == "7"
        assert format_cell(None) == "None"

    def test_csv_layout(self, store):
        path = store.write_csv("convergence-study", "median", ('N', 'difference'), [(8, 0.25), (16, 1 / 3)])
        assert path.read_text(encoding='utf-8') == "N,difference\n8,0.25\n16,0.3333333333333333\n"

    def test_trajectory_csv(self, store, small_config):
        from svwave.integrator import simulate
        trajectory = simulate(small_config, small_config.brownian_path())
        lines = store.write_trajectory("simulate", "trajectory", trajectory).read_text().splitlines()
        assert lines[0] == "t,norm_R,norm_S,energy,dissipation,mean_diff,W"
        assert len(lines) == len(trajectory.states) + 1

    def test_snapshot(self, store):
        field = from_modes([("sin", 1, 0.5), ("cos", 3, 0.25)])
        path = store.write_snapshot("simulate", "R_final", field)
        assert path.name == "R_final.bin"
        assert path.stat().st_size == 8 + 16 * (2 * field.K + 1)
        assert np.array_equal(load_spectral(path).coeffs, field.coeffs)

    def test_field_csv(self, store):
        field = from_modes([("sin", 1, 0.5), ("cos", 2, 0.25)])
        path = store.write_field_csv("simulate", "R_final", field)
        assert path.name == "R_final.csv"
        rows = [line.split(",") for line in path.read_text(encoding='utf-8').splitlines()]
        assert rows[0] == ["K", "2"]
        assert [int(row[0]) for row in rows[1:]] == [-2, -1, 0, 1, 2]
        # sin(2 pi x) / 2 has coefficient -i/4 at k = 1
        assert float(rows[4][1]) == pytest.approx(0.0, abs=1e-15)
        assert float(rows[4][2]) == pytest.approx(-0.25)
        assert float(rows[5][1]) == pytest.approx(0.125)
