"""
Tests for the command-line entry point and its exit codes
"""
import json
from pathlib import Path

import pytest

import newton_solver
from app import EXIT_CHECK_FAILED, EXIT_CONFIG_INVALID, EXIT_OK, EXIT_SOLVE_FAILED, main
from config import Config
from experiment_loader import load_experiment
from monotone_solver import Classification
from results_recorder import ResultsRecorder

EXPERIMENTS = Path(__file__).resolve().parent.parent / 'experiments'

ONE_VORTEX = {
    'grid': {'n': 64},
    'epsilon': 0.1,
    'vortices': [{'x': 0.5, 'y': 0.5}],
    'solver': 'monotone',
    'diagnostics': ['flux', 'existence'],
}


def read_summary(output_dir, name='summary.json'):
    with open(output_dir / name) as fh:
        return json.load(fh)


class TestSolve:
    """solve subcommand"""

    def test_no_vortex(self, write_experiment, tmp_path):
        path = write_experiment({'grid': {'n': 32}, 'epsilon': 0.1, 'diagnostics': ['flux', 'existence']},
                                name='empty')
        assert main(['solve', '--config', str(path)]) == EXIT_OK
        out = tmp_path / 'out' / 'empty'
        summary = read_summary(out)
        assert summary['status'] == 'ok'
        assert summary['checks']['flux'] == 0.0
        manifest = ResultsRecorder(out).read_manifest()
        assert manifest['config_sha256'] == load_experiment(path).config_hash()
        assert manifest['timestamp_parsed'].tzinfo is not None
        assert (out / 'fields' / 'v.bin').exists()

    def test_one_vortex(self, write_experiment, tmp_path):
        path = write_experiment(ONE_VORTEX, name='one')
        assert main(['solve', '--config', str(path)]) == EXIT_OK
        out = tmp_path / 'out' / 'one'
        summary = read_summary(out)
        assert summary['classification'] == 'Topological'
        assert summary['failed_checks'] == []
        lines = (out / 'diagnostics.csv').read_text().splitlines()
        assert lines[0] == 'check,value,tolerance,passed'
        assert all(line.endswith('True') for line in lines[1:])
        residuals = (out / 'residuals.csv').read_text().splitlines()
        assert residuals[0] == 'iteration,residual,increment,rise'
        assert summary['solver_diagnostics']['accepted_violations'] >= 0

    def test_seed_override(self, write_experiment, tmp_path):
        path = write_experiment(ONE_VORTEX, name='seeded')
        assert main(['--seed', '4', 'solve', '--config', str(path)]) == EXIT_OK
        assert ResultsRecorder(tmp_path / 'out' / 'seeded').read_manifest()['seed'] == 4

    def test_deterministic_outputs(self, write_experiment, tmp_path):
        first = write_experiment(ONE_VORTEX, name='first')
        second = write_experiment(ONE_VORTEX, name='second')
        assert main(['solve', '--config', str(first)]) == EXIT_OK
        assert main(['solve', '--config', str(second)]) == EXIT_OK
        for name in ('residuals.csv', 'diagnostics.csv', 'fields/v.bin'):
            a = (tmp_path / 'out' / 'first' / name).read_bytes()
            b = (tmp_path / 'out' / 'second' / name).read_bytes()
            assert a == b

    def test_newton_from_maximal(self, write_experiment, tmp_path):
        data = {**ONE_VORTEX, 'grid': {'n': 128}, 'epsilon': 0.05, 'solver': 'newton',
                'diagnostics': ['flux', 'subsolution']}
        path = write_experiment(data, name='newton')
        assert main(['solve', '--config', str(path)]) == EXIT_OK
        summary = read_summary(tmp_path / 'out' / 'newton')
        assert summary['solver'] == 'newton'
        assert summary['classification'] == 'Topological'
        assert summary['solver_diagnostics']['newton_steps'] <= 3
        assert summary['solver_diagnostics']['final_residual'] <= Config.NEWTON_TOL_RES / 0.05 ** 2

    def test_newton_wrong_branch_fails(self, write_experiment, tmp_path, monkeypatch):
        monkeypatch.setattr(newton_solver, 'classify_dichotomy',
                            lambda report, bg: Classification.NON_TOPOLOGICAL_SUSPECT)
        path = write_experiment({**ONE_VORTEX, 'solver': 'newton'}, name='branch')
        assert main(['solve', '--config', str(path)]) == EXIT_SOLVE_FAILED
        summary = read_summary(tmp_path / 'out' / 'branch')
        assert summary['error'] == 'NonTopologicalBranch'
        assert summary['details']['start'] == 'maximal'


class TestExitCodes:
    """Failure classes map to distinct statuses"""

    def test_solve_failed(self, write_experiment, tmp_path):
        path = write_experiment({**ONE_VORTEX, 'grid': {'n': 32}, 'epsilon': 0.2}, name='above')
        assert main(['solve', '--config', str(path)]) == EXIT_SOLVE_FAILED
        summary = read_summary(tmp_path / 'out' / 'above')
        assert summary['status'] == 'failed'
        assert summary['error'] == 'NonExistenceSuspected'
        assert summary['existence']['above_bound'] is True
        assert (tmp_path / 'out' / 'above' / 'manifest.json').exists()

    def test_config_invalid(self, write_experiment):
        path = write_experiment({**ONE_VORTEX, 'grid': {'n': 63}})
        assert main(['solve', '--config', str(path)]) == EXIT_CONFIG_INVALID

    def test_missing_config(self, tmp_path):
        assert main(['solve', '--config', str(tmp_path / 'absent.yml')]) == EXIT_CONFIG_INVALID

    def test_argument_error(self):
        assert main(['solve']) == EXIT_CONFIG_INVALID
        assert main(['sweep', '--config', 'x.yml', '--param', 'epsilon', '--values', 'a,b']) == EXIT_CONFIG_INVALID

    def test_check_failed(self, write_experiment, tmp_path):
        data = {**ONE_VORTEX, 'diagnostics': ['flux', 'pohozaev'], 'checks': {'pohozaev_radius_factor': 12}}
        path = write_experiment(data, name='ball')
        assert main(['solve', '--config', str(path)]) == EXIT_CHECK_FAILED
        summary = read_summary(tmp_path / 'out' / 'ball')
        assert summary['status'] == 'check_failed'
        assert summary['failed_checks'] == ['pohozaev']
        assert 'does not fit' in summary['checks']['pohozaev']['error']


class TestOtherCommands:
    """sweep, spectrum, check, shoot and beta"""

    def test_sweep(self, write_experiment, tmp_path):
        path = write_experiment(ONE_VORTEX, name='sweep')
        argv = ['sweep', '--config', str(path), '--param', 'epsilon', '--values', '0.1,0.08']
        assert main(argv) == EXIT_OK
        out = tmp_path / 'out' / 'sweep'
        lines = (out / 'sweep.csv').read_text().splitlines()
        assert len(lines) == 3
        assert lines[1].startswith('epsilon,0.1,ok')
        summary = read_summary(out)
        assert summary['executed'] == 2
        assert summary['failed'] == 0

    def test_separation_needs_two_vortices(self, write_experiment, tmp_path):
        path = write_experiment(ONE_VORTEX, name='sep')
        argv = ['sweep', '--config', str(path), '--param', 'separation', '--values', '2']
        assert main(argv) == EXIT_OK
        summary = read_summary(tmp_path / 'out' / 'sep')
        assert summary['failed'] == 1
        assert summary['rows'][0]['error'].startswith('ValueError')

    def test_spectrum(self, write_experiment, tmp_path):
        path = write_experiment(ONE_VORTEX, name='eigen')
        assert main(['spectrum', '--config', str(path)]) == EXIT_OK
        out = tmp_path / 'out' / 'eigen'
        assert read_summary(out)['lambda_min'] > 0
        assert (out / 'fields' / 'eigenvector.json').exists()

    def test_check_on_dumps(self, write_experiment, tmp_path):
        path = write_experiment(ONE_VORTEX, name='dumps')
        assert main(['solve', '--config', str(path)]) == EXIT_OK
        assert main(['check', '--config', str(path)]) == EXIT_OK
        out = tmp_path / 'out' / 'dumps'
        summary = read_summary(out, 'check_summary.json')
        assert summary['checks']['flux'] == pytest.approx(4 * 3.141592653589793, rel=1e-3)
        assert summary['source_timestamp'] is not None

    def test_check_grid_mismatch(self, write_experiment, tmp_path):
        out = str(tmp_path / 'out' / 'shared')
        first = write_experiment({**ONE_VORTEX, 'output_dir': out}, name='a')
        second = write_experiment({**ONE_VORTEX, 'grid': {'n': 32}, 'output_dir': out}, name='b')
        assert main(['solve', '--config', str(first)]) == EXIT_OK
        assert main(['check', '--config', str(second)]) == EXIT_CONFIG_INVALID

    def test_shoot(self, tmp_path):
        out = tmp_path / 'shot'
        assert main(['shoot', '--alpha', '1', '--s', '5', '--rmax', '40', '--output', str(out)]) == EXIT_OK
        assert (out / 'profile.csv').read_text().splitlines()[0] == 'r,u,du'
        assert read_summary(out)['tag'] == 'Overshot'

    def test_beta(self, tmp_path):
        out = tmp_path / 'beta'
        assert main(['beta', '--smin', '-3', '--smax', '-1', '--count', '3', '--output', str(out)]) == EXIT_OK
        assert len((out / 'beta.csv').read_text().splitlines()) == 4
        assert read_summary(out)['strictly_increasing'] is True

    def test_beta_range_checked(self, tmp_path):
        argv = ['beta', '--smin', '-1', '--smax', '0.5', '--count', '3', '--output', str(tmp_path)]
        assert main(argv) == EXIT_CONFIG_INVALID


class TestList:
    """list subcommand over an experiments directory"""

    def test_shipped(self, capsys):
        assert main(['list', '--dir', str(EXPERIMENTS)]) == EXIT_OK
        listing = json.loads(capsys.readouterr().out)
        assert listing['statistics']['total'] == 6
        assert listing['statistics']['invalid'] == 0
        assert {row['name'] for row in listing['experiments']} >= {'newton', 'perturbative'}

    def test_solver_filter(self, capsys):
        assert main(['list', '--dir', str(EXPERIMENTS), '--solver', 'newton']) == EXIT_OK
        listing = json.loads(capsys.readouterr().out)
        assert [row['name'] for row in listing['experiments']] == ['newton']
        assert listing['experiments'][0]['vortices'] == 2

    def test_by_name(self, capsys):
        assert main(['list', '--dir', str(EXPERIMENTS), '--name', 'newton']) == EXIT_OK
        exp = json.loads(capsys.readouterr().out)
        assert exp['newton']['start'] == 'maximal'
        assert len(exp['config_sha256']) == 64

    def test_unknown_name(self):
        assert main(['list', '--dir', str(EXPERIMENTS), '--name', 'absent']) == EXIT_CONFIG_INVALID

    def test_invalid_file(self, tmp_path):
        (tmp_path / 'good.yml').write_text('grid: {n: 32}\nepsilon: 0.1\n')
        (tmp_path / 'bad.yml').write_text('grid: {n: 31}\nepsilon: 0.1\n')
        assert main(['list', '--dir', str(tmp_path)]) == EXIT_CONFIG_INVALID

    def test_missing_directory(self, tmp_path):
        assert main(['list', '--dir', str(tmp_path / 'nope')]) == EXIT_CONFIG_INVALID
