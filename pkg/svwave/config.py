"""
Simulation Configuration
INI-style experiment configuration with full validation, materialized
defaults and initial-data presets
"""
import configparser
import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from functools import cached_property
from pathlib import Path
from typing import Optional

from .dynamics import SdeParams, SystemState
from .errors import InvalidArgumentError, InvalidConfigurationError
from .logger import get_logger
from .noise import SigmaProfile, path_for_steps
from .rng import SEED_LIMIT, CHANNEL_INITIAL_DATA, SimRNG
from .spectral_torus import MEAN_TOLERANCE, OVERSAMPLE, from_modes, random_field
from .wave_speed import make_speed

logger = get_logger(__name__)


# Relative tolerance for T / dt being an integer
STEP_TOLERANCE = 1e-9

INITIAL_PRESETS = ('modes', 'random')


@dataclass
class SpeedConfig:
    """Wave-speed preset selection"""
    preset: str = 'cosine'
    params: tuple = ()
    kappa: Optional[float] = None
    table: Optional[str] = None
    smoothing_level: Optional[int] = None

    def build(self):
        speed = make_speed(self.preset, self.params, kappa=self.kappa, table_path=self.table)
        if self.smoothing_level:
            speed = speed.smooth(self.smoothing_level)
        return speed


@dataclass
class SigmaConfig:
    """Noise-profile preset selection"""
    preset: str = 'sine'
    params: tuple = (0.1, 0.05)

    def build(self):
        return SigmaProfile(self.preset, self.params)


@dataclass
class InitialConfig:
    """
    Initial data preset.

    modes:  R0 and S0 as lists of (kind, k, amplitude) terms
    random: band-limited random R0, S0 with amplitude ~ k^-decay; S0's mean
            is matched to R0's so mean(R0 - S0) = 0
    """
    preset: str = 'modes'
    R: tuple = (('sin', 1, 0.5),)
    S: tuple = (('sin', 1, -0.5),)
    max_mode: int = 8
    amplitude: float = 0.5
    decay: float = 2.0
    seed: Optional[int] = None


@dataclass
class StudyConfig:
    """Parameters of the diagnostic studies"""
    paths: int = 32
    moment_p: float = 3.0
    resolutions: tuple = (32, 64, 128)
    deltas: tuple = (0.2, 0.1, 0.05, 0.025, 0.0125)
    pairs: int = 200
    margin: float = 0.2
    energy_tolerance: float = 5e-3
    gamma: float = 0.5
    continuity_levels: int = 4
    bootstrap: int = 200


@dataclass
class SimConfig:
    """
    Complete, validated experiment configuration.

    Usage:
        config = parse_config(Path("run.ini").read_text())
        params = config.sde_params()
        state = config.initial_state()
        path = config.brownian_path()
    """
    N: int = 128
    oversample: int = OVERSAMPLE
    nu: float = 0.05
    T: float = 0.5
    dt: float = 1e-4
    cutoff_k: Optional[float] = None
    seed: int = 0
    sample_cadence: int = 50
    output_dir: str = 'results'
    speed: SpeedConfig = field(default_factory=SpeedConfig)
    sigma: SigmaConfig = field(default_factory=SigmaConfig)
    initial: InitialConfig = field(default_factory=InitialConfig)
    study: StudyConfig = field(default_factory=StudyConfig)

    # ═══════════════════════════════════════════════════════════════════
    # DERIVED OBJECTS
    # ═══════════════════════════════════════════════════════════════════

    @cached_property
    def wave_speed(self):
        return self.speed.build()

    @cached_property
    def sigma_profile(self):
        return self.sigma.build()

    def speed_for(self, N=None):
        """
        Speed used at Galerkin order N: c_N = c smoothed at level N, unless
        speed.smoothing_level pins the level. Smooth presets are unaffected.
        """
        if self.speed.smoothing_level:
            return self.wave_speed
        return self.wave_speed.smooth(self.N if N is None else N)

    def sde_params(self, with_cutoff=True, N=None):
        return SdeParams(
            nu=self.nu,
            speed=self.speed_for(N),
            sigma=self.sigma_profile,
            cutoff_k=self.cutoff_k if with_cutoff else None,
            oversample=self.oversample,
        )

    def step_count(self, dt=None):
        """Number of steps of size dt covering [0, T]"""
        dt = self.dt if dt is None else dt
        return int(round(self.T / dt))

    def brownian_path(self, seed=None, extra_levels=0):
        """Driving path with finest spacing dt / 2^extra_levels covering T"""
        seed = self.seed if seed is None else seed
        return path_for_steps(seed, self.dt, self.step_count(), extra_levels)

    def initial_fields(self):
        """(R0, S0) before projection"""
        init = self.initial
        if init.preset == 'modes':
            return from_modes(init.R), from_modes(init.S)
        seed = self.seed if init.seed is None else init.seed
        generator = SimRNG(seed).stream(CHANNEL_INITIAL_DATA, 0)
        R = random_field(generator, init.max_mode, init.amplitude, init.decay)
        S = random_field(generator, init.max_mode, init.amplitude, init.decay)
        return R, S + (R.mean - S.mean)

    def initial_state(self, N=None):
        R, S = self.initial_fields()
        return SystemState(0.0, R, S, self.N if N is None else N)

    # ═══════════════════════════════════════════════════════════════════
    # PROVENANCE
    # ═══════════════════════════════════════════════════════════════════

    def to_dict(self):
        """Every setting, defaults included, as JSON-ready data"""
        data = {
            'simulation': {
                'N': self.N, 'oversample': self.oversample, 'nu': self.nu, 'T': self.T,
                'dt': self.dt, 'cutoff_k': self.cutoff_k, 'seed': self.seed,
                'sample_cadence': self.sample_cadence, 'output_dir': self.output_dir,
            },
            'speed': asdict(self.speed),
            'sigma': asdict(self.sigma),
            'initial': asdict(self.initial),
            'study': asdict(self.study),
        }
        return json.loads(json.dumps(data))

    def config_hash(self):
        """sha256 of the canonical JSON form"""
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


# ═══════════════════════════════════════════════════════════════════
# PARSING
# ═══════════════════════════════════════════════════════════════════

KNOWN_KEYS = {
    'simulation': {'n', 'oversample', 'nu', 't', 'dt', 'cutoff_k', 'seed', 'sample_cadence', 'output_dir'},
    'speed': {'preset', 'params', 'kappa', 'table', 'smoothing_level'},
    'sigma': {'preset', 'params'},
    'initial': {'preset', 'r', 's', 'max_mode', 'amplitude', 'decay', 'seed'},
    'study': {'paths', 'moment_p', 'resolutions', 'deltas', 'pairs', 'margin',
              'energy_tolerance', 'gamma', 'continuity_levels', 'bootstrap'},
}


def parse_terms(text):
    """
    Parse 'sin:1:0.5, cos:2:0.3, const:0:0.1' into (kind, k, amp) tuples.

    Raises:
        InvalidArgumentError: On a malformed term
    """
    terms = []
    for chunk in text.split(','):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = chunk.split(':')
        if len(parts) != 3 or parts[0] not in ('sin', 'cos', 'const'):
            raise InvalidArgumentError(f"malformed mode term '{chunk}' (expected kind:k:amplitude)")
        try:
            k, amp = int(parts[1]), float(parts[2])
        except ValueError:
            raise InvalidArgumentError(f"malformed mode term '{chunk}'") from None
        if k < 0:
            raise InvalidArgumentError(f"mode term '{chunk}' has negative frequency")
        terms.append((parts[0], k, amp))
    return tuple(terms)


def format_terms(terms):
    return ', '.join(f"{kind}:{k}:{amp!r}" for kind, k, amp in terms)


class _Reader:
    """Typed access to a ConfigParser that records every violation"""

    def __init__(self, parser, violations):
        self.parser = parser
        self.violations = violations

    def get(self, section, key, cast, default):
        if not self.parser.has_option(section, key):
            return default
        raw = self.parser.get(section, key).strip()
        if raw == '' or raw.lower() == 'none':
            return None
        try:
            return cast(raw)
        except (ValueError, InvalidArgumentError) as e:
            self.violations.append(f"{section}.{key}: cannot parse '{raw}' ({e})")
            return default


def _floats(raw):
    return tuple(float(v) for v in raw.replace(';', ',').split(',') if v.strip())


def _ints(raw):
    return tuple(int(v) for v in raw.replace(';', ',').split(',') if v.strip())


def parse_config(text):
    """
    Parse and validate configuration text.

    Args:
        text: INI text with sections [simulation], [speed], [sigma], [initial], [study]

    Returns:
        SimConfig with every default materialized

    Raises:
        InvalidConfigurationError: Listing every violation found
    """
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as e:
        raise InvalidConfigurationError([f"config: unreadable ({e})"]) from e

    violations = []
    for section in parser.sections():
        if section not in KNOWN_KEYS:
            violations.append(f"{section}: unknown section")
            continue
        for key in parser.options(section):
            if key not in KNOWN_KEYS[section]:
                violations.append(f"{section}.{key}: unknown key")

    r = _Reader(parser, violations)
    defaults = SimConfig()
    d_init, d_study = defaults.initial, defaults.study

    config = SimConfig(
        N=r.get('simulation', 'n', int, defaults.N),
        oversample=r.get('simulation', 'oversample', int, defaults.oversample),
        nu=r.get('simulation', 'nu', float, defaults.nu),
        T=r.get('simulation', 't', float, defaults.T),
        dt=r.get('simulation', 'dt', float, defaults.dt),
        cutoff_k=r.get('simulation', 'cutoff_k', float, None),
        seed=r.get('simulation', 'seed', int, defaults.seed),
        sample_cadence=r.get('simulation', 'sample_cadence', int, defaults.sample_cadence),
        output_dir=r.get('simulation', 'output_dir', str, defaults.output_dir),
        speed=SpeedConfig(
            preset=r.get('speed', 'preset', str, 'cosine'),
            params=r.get('speed', 'params', _floats, ()) or (),
            kappa=r.get('speed', 'kappa', float, None),
            table=r.get('speed', 'table', str, None),
            smoothing_level=r.get('speed', 'smoothing_level', int, None),
        ),
        sigma=SigmaConfig(
            preset=r.get('sigma', 'preset', str, defaults.sigma.preset),
            params=r.get('sigma', 'params', _floats, defaults.sigma.params) or (),
        ),
        initial=InitialConfig(
            preset=r.get('initial', 'preset', str, d_init.preset),
            R=r.get('initial', 'r', parse_terms, d_init.R) or (),
            S=r.get('initial', 's', parse_terms, d_init.S) or (),
            max_mode=r.get('initial', 'max_mode', int, d_init.max_mode),
            amplitude=r.get('initial', 'amplitude', float, d_init.amplitude),
            decay=r.get('initial', 'decay', float, d_init.decay),
            seed=r.get('initial', 'seed', int, None),
        ),
        study=StudyConfig(
            paths=r.get('study', 'paths', int, d_study.paths),
            moment_p=r.get('study', 'moment_p', float, d_study.moment_p),
            resolutions=r.get('study', 'resolutions', _ints, d_study.resolutions),
            deltas=r.get('study', 'deltas', _floats, d_study.deltas),
            pairs=r.get('study', 'pairs', int, d_study.pairs),
            margin=r.get('study', 'margin', float, d_study.margin),
            energy_tolerance=r.get('study', 'energy_tolerance', float, d_study.energy_tolerance),
            gamma=r.get('study', 'gamma', float, d_study.gamma),
            continuity_levels=r.get('study', 'continuity_levels', int, d_study.continuity_levels),
            bootstrap=r.get('study', 'bootstrap', int, d_study.bootstrap),
        ),
    )
    return _finalize(config, violations)


def load_config(path=None):
    """Read and parse a configuration file (None gives the defaults)"""
    if path is None:
        return parse_config('')
    path = Path(path)
    if not path.exists():
        raise InvalidConfigurationError([f"config: file not found: {path}"])
    return parse_config(path.read_text(encoding='utf-8'))


def apply_overrides(config, **overrides):
    """
    Apply command-line overrides and re-validate.

    Recognized keys: seed, output_dir, dt, nu, paths, deltas, modes
    (modes is 'R terms; S terms'). None values are ignored.
    """
    changes = {k: v for k, v in overrides.items() if v is not None}
    violations = []
    simulation = {k: changes[k] for k in ('seed', 'output_dir', 'dt', 'nu') if k in changes}
    study = {k: changes[k] for k in ('paths', 'deltas') if k in changes}
    initial = {}
    if 'modes' in changes:
        parts = changes['modes'].split(';')
        if len(parts) != 2:
            violations.append("initial.modes: expected 'R terms; S terms'")
        else:
            try:
                initial = {'preset': 'modes', 'R': parse_terms(parts[0]), 'S': parse_terms(parts[1])}
            except InvalidArgumentError as e:
                violations.append(f"initial.modes: {e}")
    if 'deltas' in study:
        study['deltas'] = tuple(study['deltas'])
    config = replace(
        config,
        study=replace(config.study, **study),
        initial=replace(config.initial, **initial),
        **simulation,
    )
    return _finalize(config, violations)


# ═══════════════════════════════════════════════════════════════════
# VALIDATION
# ═══════════════════════════════════════════════════════════════════

def nearest_valid_dt(T, dt):
    """dt adjusted so T / dt is an integer"""
    n = max(1, int(round(T / dt)))
    return T / n


def _finalize(config, violations):
    violations = list(violations) + validate_config(config)
    if violations:
        for v in violations:
            logger.error(f"Config violation: {v}")
        raise InvalidConfigurationError(violations)
    if config.initial.seed is None:
        config = replace(config, initial=replace(config.initial, seed=config.seed))
    logger.info(f"Config accepted (hash {config.config_hash()[:12]})")
    return config


def validate_config(config):
    """
    Every violation in a config, as 'section.key: message' strings.
    """
    v = []
    if config.N is None or config.N < 1:
        v.append(f"simulation.N: Galerkin order must be >= 1, got {config.N}")
    if config.oversample is None or config.oversample < 2:
        v.append(f"simulation.oversample: must be >= 2, got {config.oversample}")
    if config.nu is None or not config.nu >= 0:
        v.append(f"simulation.nu: viscosity must be >= 0, got {config.nu}")
    if config.T is None or not config.T >= 0:
        v.append(f"simulation.T: horizon must be >= 0, got {config.T}")
    if config.dt is None or not config.dt > 0:
        v.append(f"simulation.dt: step must be positive, got {config.dt}")
    elif config.T is not None and config.T > 0:
        ratio = config.T / config.dt
        if abs(ratio - round(ratio)) > STEP_TOLERANCE * max(1.0, ratio) or round(ratio) < 1:
            v.append(f"simulation.dt: T / dt = {ratio:.6g} is not an integer; "
                     f"nearest valid dt is {nearest_valid_dt(config.T, config.dt)!r}")
    if config.cutoff_k is not None and not config.cutoff_k > 0:
        v.append(f"simulation.cutoff_k: must be positive, got {config.cutoff_k}")
    if config.seed is None or not 0 <= config.seed < SEED_LIMIT:
        v.append(f"simulation.seed: must lie in [0, 2**64), got {config.seed}")
    if config.sample_cadence is None or config.sample_cadence < 1:
        v.append(f"simulation.sample_cadence: must be >= 1, got {config.sample_cadence}")

    for name, builder in (('speed', config.speed.build), ('sigma', config.sigma.build)):
        try:
            builder()
        except InvalidConfigurationError as e:
            v.extend(e.violations)
        except (OSError, ValueError) as e:
            v.append(f"{name}: {e}")

    v.extend(_validate_initial(config))
    v.extend(_validate_study(config.study))
    return v


def _validate_initial(config):
    init = config.initial
    if init.preset not in INITIAL_PRESETS:
        return [f"initial.preset: unknown preset '{init.preset}' (choose from {list(INITIAL_PRESETS)})"]
    if init.preset == 'random':
        v = []
        if init.max_mode is None or init.max_mode < 0:
            v.append(f"initial.max_mode: must be >= 0, got {init.max_mode}")
        if init.amplitude is None or init.amplitude < 0:
            v.append(f"initial.amplitude: must be >= 0, got {init.amplitude}")
        return v
    try:
        R, S = from_modes(init.R), from_modes(init.S)
    except InvalidArgumentError as e:
        return [f"initial.modes: {e}"]
    mean = R.mean - S.mean
    if abs(mean) > MEAN_TOLERANCE:
        return [f"initial: mean(R0 - S0) = {mean:g} violates the zero-mean constraint"]
    return []


def _validate_study(study):
    v = []
    if study.paths is None or study.paths < 2:
        v.append(f"study.paths: need at least 2 paths, got {study.paths}")
    if study.moment_p is None or study.moment_p < 0:
        v.append(f"study.moment_p: must be >= 0, got {study.moment_p}")
    res = study.resolutions or ()
    if not res or any(b <= a for a, b in zip(res, res[1:])) or min(res) < 1:
        v.append(f"study.resolutions: must be positive and strictly increasing, got {res}")
    deltas = study.deltas or ()
    if not deltas or any(b >= a for a, b in zip(deltas, deltas[1:])) or min(deltas) <= 0:
        v.append(f"study.deltas: must be positive and strictly decreasing, got {deltas}")
    if study.pairs is None or study.pairs < 2:
        v.append(f"study.pairs: need at least 2 pairs, got {study.pairs}")
    if study.margin is None or not 0 <= study.margin < 1:
        v.append(f"study.margin: must lie in [0, 1), got {study.margin}")
    if study.continuity_levels is None or study.continuity_levels < 2:
        v.append(f"study.continuity_levels: must be >= 2, got {study.continuity_levels}")
    if study.bootstrap is None or study.bootstrap < 1:
        v.append(f"study.bootstrap: must be >= 1, got {study.bootstrap}")
    return v


def write_config(config, path):
    """Write a config back out in INI form (defaults materialized)"""
    parser = configparser.ConfigParser(interpolation=None)
    data = config.to_dict()

    def fmt(value):
        if value is None:
            return ''
        if isinstance(value, list):
            return ', '.join(str(x) for x in value)
        return str(value)

    parser['simulation'] = {k.lower(): fmt(v) for k, v in data['simulation'].items()}
    parser['speed'] = {k: fmt(v) for k, v in data['speed'].items()}
    parser['sigma'] = {k: fmt(v) for k, v in data['sigma'].items()}
    init = dict(data['initial'])
    init['R'] = format_terms(config.initial.R)
    init['S'] = format_terms(config.initial.S)
    parser['initial'] = {k.lower(): fmt(v) for k, v in init.items()}
    parser['study'] = {k: fmt(v) for k, v in data['study'].items()}
    with open(path, 'w', encoding='utf-8') as f:
        parser.write(f)
