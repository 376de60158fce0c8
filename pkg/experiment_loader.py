"""
Experiment loader for reading and validating experiment files (YAML or TOML)
"""
import hashlib
import json
import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from pathlib import Path
from typing import List, Literal, Optional, Tuple, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PositiveInt, ValidationError, field_validator

from config import Config
from errors import ConfigInvalid
from monotone_solver import MonotoneSettings
from newton_solver import NewtonSettings
from torus_field import Grid
from vortex_background import VortexConfiguration

logger = logging.getLogger(__name__)

CHECK_NAMES = (
    'flux',
    'localized_flux',
    'pohozaev',
    'exterior_decay',
    'exterior_mass',
    'uniqueness',
    'spectrum',
    'existence',
    'subsolution',
    'epsilon_monotonicity',
)


class _Block(BaseModel):
    model_config = ConfigDict(frozen=True, extra='forbid')


class VortexRecord(_Block):
    x: float
    y: float
    multiplicity: PositiveInt = 1


class NewtonBlock(NewtonSettings):
    """Newton settings plus the starting guess: the maximal solution or v = 0"""

    start: Literal['maximal', 'zero'] = 'maximal'


class PerturbativeBlock(_Block):
    """Planar profile and cutoff; vortex records are read as rescaled planar positions"""

    delta: PositiveFloat = Config.CUTOFF_DELTA
    power: PositiveInt = Config.PERTURB_POWER
    tol: PositiveFloat = Config.PERTURB_TOL
    center: Tuple[float, float] = (0.5, 0.5)
    planar_half_width: PositiveFloat = Config.PLANAR_HALF_WIDTH
    planar_n: PositiveInt = Config.PLANAR_GRID
    compare_radius: Optional[PositiveFloat] = None


class DiagnosticsBlock(_Block):
    pohozaev_radius_factor: PositiveFloat = Config.POHOZAEV_RADIUS_FACTOR
    pohozaev_cluster: int = 0
    uniqueness_trials: int = Field(default=5, ge=2)
    decay_radii: List[PositiveFloat] = [2, 4, 6, 8, 10, 12]
    mass_radius_factors: List[PositiveFloat] = [2, 5, 10, 20]
    localized_radius_factor: PositiveFloat = Config.CORE_RADIUS_FACTOR
    monotonicity_epsilons: List[PositiveFloat] = []


class SweepBlock(_Block):
    param: Literal['epsilon', 'separation']
    values: List[PositiveFloat]

    @field_validator('values')
    @classmethod
    def _non_empty(cls, value):
        if not value:
            raise ValueError("sweep values must be a non-empty list")
        return value


class ExperimentConfig(_Block):
    """Validated experiment definition"""

    name: str = 'experiment'
    grid: Grid
    epsilon: Union[PositiveFloat, List[PositiveFloat]]
    vortices: List[VortexRecord] = []
    solver: Literal['monotone', 'newton', 'perturbative'] = 'monotone'
    monotone: MonotoneSettings = MonotoneSettings()
    newton: NewtonBlock = NewtonBlock()
    perturbative: PerturbativeBlock = PerturbativeBlock()
    diagnostics: List[str] = []
    checks: DiagnosticsBlock = DiagnosticsBlock()
    sweep: Optional[SweepBlock] = None
    output_dir: Optional[str] = None
    seed: int = Config.DEFAULT_SEED

    @field_validator('epsilon')
    @classmethod
    def _non_empty_sweep(cls, value):
        if isinstance(value, list) and not value:
            raise ValueError("epsilon sweep list must be non-empty")
        return value

    @field_validator('diagnostics')
    @classmethod
    def _known_checks(cls, value):
        unknown = [name for name in value if name not in CHECK_NAMES]
        if unknown:
            raise ValueError(f"unknown diagnostics {unknown}; choose from {list(CHECK_NAMES)}")
        return value

    @property
    def epsilons(self) -> List[float]:
        return list(self.epsilon) if isinstance(self.epsilon, list) else [self.epsilon]

    def configuration(self, epsilon: float = None) -> VortexConfiguration:
        """Torus vortex configuration at one coupling value"""
        eps = epsilon if epsilon is not None else self.epsilons[0]
        return VortexConfiguration.from_records([v.model_dump() for v in self.vortices], eps)

    def planar_vortices(self):
        return [((v.x, v.y), float(v.multiplicity)) for v in self.vortices]

    def output_path(self) -> Path:
        return Path(self.output_dir) if self.output_dir else Path(Config.OUTPUT_DIR) / self.name

    def canonical_json(self) -> str:
        return json.dumps(self.model_dump(mode='json'), sort_keys=True, separators=(',', ':'))

    def config_hash(self) -> str:
        """SHA-256 of the validated configuration"""
        return hashlib.sha256(self.canonical_json().encode('utf-8')).hexdigest()


def _read_raw(path: Path):
    if path.suffix == '.toml':
        with open(path, 'rb') as fh:
            return tomllib.load(fh)
    with open(path, 'r', encoding='utf-8') as fh:
        return yaml.safe_load(fh)


def load_experiment(path, **overrides) -> ExperimentConfig:
    """
    Read and validate one experiment file.

    Args:
        path: .yml, .yaml or .toml file
        overrides: top-level keys replacing file values (e.g. seed from the command line)

    Raises:
        ConfigInvalid: unreadable file or schema violation
    """
    path = Path(path)
    try:
        data = _read_raw(path)
    except (OSError, yaml.YAMLError, tomllib.TOMLDecodeError) as e:
        raise ConfigInvalid(f"cannot read experiment file {path}: {e}", {'path': str(path)}) from e
    if not isinstance(data, dict):
        raise ConfigInvalid(f"experiment file {path} must hold a mapping", {'path': str(path)})
    data = dict(data)
    data.setdefault('name', path.stem)
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigInvalid(f"invalid experiment {path}: {e.error_count()} error(s)\n{e}",
                            {'path': str(path), 'errors': e.errors(include_url=False)}) from e


class ExperimentLoader:
    """Load every experiment file below a directory"""

    def __init__(self, experiments_dir=None):
        self.experiments_dir = experiments_dir or Config.EXPERIMENTS_DIRECTORY
        self.experiments = []
        self.invalid = []

    def load_all(self):
        """Load all experiments; invalid files are logged and skipped"""
        self.experiments = []
        self.invalid = []
        root = Path(self.experiments_dir)
        if not root.exists():
            logger.error(f"Experiments directory not found: {self.experiments_dir}")
            return self.experiments

        files = sorted(list(root.rglob('*.yml')) + list(root.rglob('*.yaml')) + list(root.rglob('*.toml')))
        logger.info(f"Found {len(files)} experiment files")
        for path in files:
            try:
                self.experiments.append(load_experiment(path))
            except ConfigInvalid as e:
                logger.error(f"Skipping {path}: {e}")
                self.invalid.append(str(path))
        logger.info(f"Successfully loaded {len(self.experiments)} experiments")
        return self.experiments

    def get_by_name(self, name):
        for exp in self.experiments:
            if exp.name == name:
                return exp
        return None

    def get_by_solver(self, solver):
        return [e for e in self.experiments if e.solver == solver]

    def get_statistics(self):
        by_solver = {}
        for exp in self.experiments:
            by_solver[exp.solver] = by_solver.get(exp.solver, 0) + 1
        return {
            'total': len(self.experiments),
            'invalid': len(self.invalid),
            'by_solver': by_solver,
            'sweeps': sum(1 for e in self.experiments if len(e.epsilons) > 1 or e.sweep),
        }
