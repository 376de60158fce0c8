"""
Shared fixtures: small grids, a converged single-vortex torus solution and a
planar single-vortex profile
"""
import numpy as np
import pytest
import yaml

from monotone_solver import maximal_solve
from radial_planar import planar_multivortex_solve
from torus_field import Grid
from vortex_background import VortexConfiguration, build_background


@pytest.fixture
def grid64():
    return Grid(n=64)


@pytest.fixture(scope='session')
def one_vortex():
    """Maximal solution for one vortex at the torus center, eps = 0.05, n = 128"""
    cfg = VortexConfiguration(points=[(0.5, 0.5)], epsilon=0.05)
    bg = build_background(cfg, Grid(n=128))
    report = maximal_solve(cfg, bg)
    return cfg, bg, report


@pytest.fixture(scope='session')
def planar_single():
    """Planar single vortex on [-20, 20]^2 with 128 cells per axis"""
    return planar_multivortex_solve([((0.0, 0.0), 1.0)], R=20.0, n=128)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def write_experiment(tmp_path):
    """Write an experiment dict to a YAML file under tmp_path; output goes to tmp_path/out"""

    def _write(data, name='exp'):
        data = dict(data)
        data.setdefault('output_dir', str(tmp_path / 'out' / name))
        path = tmp_path / f"{name}.yml"
        with open(path, 'w', encoding='utf-8') as fh:
            yaml.safe_dump(data, fh)
        return path

    return _write
