"""
Noise System
Dyadically refinable Brownian paths and the spatial noise profile sigma(x)
"""
import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgumentError, InvalidConfigurationError
from .logger import get_logger
from .rng import SimRNG
from .spectral_torus import GridField, TWO_PI

logger = get_logger(__name__)


MAX_DEPTH = 40

# Relative tolerance when matching a step size to the dyadic grid of a path
ALIGNMENT_TOLERANCE = 1e-9


# ═══════════════════════════════════════════════════════════════════
# BROWNIAN PATHS
# ═══════════════════════════════════════════════════════════════════

@dataclass(frozen=True, eq=False)
class BrownianPath:
    """
    One Wiener realization sampled at t_j = j T / 2^depth.

    Level 0 draws W(T); level L fills the midpoints of level L-1 by the
    Brownian bridge, using normals keyed by (seed, L). A level-L path is
    therefore the exact subsample of every deeper path with the same seed.

    Usage:
        path = generate(seed=7, T=1.0, depth=10)
        fine = refine(path, 2)
        assert np.array_equal(fine.values[::4], path.values)
    """
    seed: int
    T: float
    depth: int
    values: np.ndarray

    @property
    def h(self):
        """Spacing of the finest level"""
        return self.T / (1 << self.depth)

    @property
    def times(self):
        return np.arange(self.values.size) * self.h

    def subsample(self, depth):
        """Coarser path at the given depth (bit-exact values)"""
        if not 0 <= depth <= self.depth:
            raise InvalidArgumentError(f"Cannot subsample depth {self.depth} path to depth {depth}")
        stride = 1 << (self.depth - depth)
        return BrownianPath(self.seed, self.T, depth, self.values[::stride].copy())


def _bridge_level(rng, level, values, T):
    """Insert bridge midpoints for one dyadic level"""
    count = values.size - 1
    h_prev = T / count
    mid = 0.5 * (values[:-1] + values[1:]) + math.sqrt(h_prev / 4.0) * rng.brownian_level(level, count)
    out = np.empty(2 * count + 1)
    out[0::2] = values
    out[1::2] = mid
    return out


def generate(seed, T, depth):
    """
    Generate a Brownian path on [0, T] at the given dyadic depth.

    Args:
        seed: 64-bit seed
        T: Horizon (> 0)
        depth: Dyadic depth, at most MAX_DEPTH

    Returns:
        BrownianPath with 2^depth + 1 values and W(0) = 0
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise InvalidArgumentError(f"Path depth must lie in [0, {MAX_DEPTH}]: {depth}")
    if not T > 0:
        raise InvalidArgumentError(f"Path horizon must be positive: {T}")
    rng = SimRNG(seed)
    values = np.array([0.0, math.sqrt(T) * rng.brownian_level(0, 1)[0]])
    for level in range(1, depth + 1):
        values = _bridge_level(rng, level, values, T)
    logger.debug(f"Generated Brownian path seed={seed} T={T} depth={depth}")
    return BrownianPath(int(seed), float(T), int(depth), values)


def refine(path, extra_levels):
    """
    Refine a path by Brownian-bridge midpoints.

    Args:
        path: BrownianPath
        extra_levels: Number of levels to add (>= 0)

    Returns:
        BrownianPath at depth path.depth + extra_levels, equal to generate() at that depth
    """
    if extra_levels < 0 or path.depth + extra_levels > MAX_DEPTH:
        raise InvalidArgumentError(f"Cannot refine depth {path.depth} by {extra_levels}")
    rng = SimRNG(path.seed)
    values = path.values
    for level in range(path.depth + 1, path.depth + extra_levels + 1):
        values = _bridge_level(rng, level, values, path.T)
    return BrownianPath(path.seed, path.T, path.depth + extra_levels, values)


def depth_for_steps(n_steps):
    """Smallest depth whose grid holds n_steps intervals"""
    return max(0, (max(int(n_steps), 1) - 1).bit_length())


def path_for_steps(seed, dt, n_steps, extra_levels=0):
    """
    Path whose finest spacing equals dt (refined by extra_levels).

    The horizon is dt * 2^depth_for_steps(n_steps), so it covers n_steps steps.
    """
    depth = depth_for_steps(n_steps)
    return generate(seed, dt * (1 << depth), depth + extra_levels)


def _stride(path, dt):
    ratio = dt / path.h
    stride = int(round(ratio))
    if stride < 1 or abs(ratio - stride) > ALIGNMENT_TOLERANCE * ratio or stride & (stride - 1):
        raise InvalidConfigurationError(
            f"simulation.dt: step {dt} is not a dyadic multiple of the path spacing {path.h}")
    return stride


def increments(path, dt, n):
    """
    Brownian increments for n steps of size dt.

    Args:
        path: BrownianPath whose spacing divides dt dyadically
        dt: Step size
        n: Number of steps

    Returns:
        numpy array of n increments W(t_{j+1}) - W(t_j)

    Raises:
        InvalidConfigurationError: If dt is misaligned or the path is too short
    """
    return np.diff(sample_values(path, dt, n))


def sample_values(path, dt, n):
    """W at t_j = j dt for j = 0..n"""
    stride = _stride(path, dt)
    if n * stride > path.values.size - 1:
        raise InvalidConfigurationError(
            f"simulation.T: path horizon {path.T} is shorter than {n} steps of {dt}")
    return path.values[: n * stride + 1 : stride]


def quadratic_variation(path):
    """Sum of squared finest-level increments"""
    return float(np.sum(np.diff(path.values) ** 2))


def write_path_csv(path, filename, depth=None):
    """Dump (t, W(t)) at the requested depth"""
    if depth is not None:
        path = path.subsample(depth)
    with open(filename, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f)
        writer.writerow(['t', 'W'])
        for t, w in zip(path.times, path.values):
            writer.writerow([repr(float(t)), repr(float(w))])


# ═══════════════════════════════════════════════════════════════════
# SIGMA PROFILE
# ═══════════════════════════════════════════════════════════════════

SIGMA_PRESETS = ('constant', 'sine')

# Dense grid for sup norms of sigma^2 and its derivatives
SUP_SAMPLES = 4096


@dataclass(frozen=True)
class SigmaProfile:
    """
    Spatial noise coefficient sigma in W^{2,inf}(T).

    Presets:
        constant: sigma = s0 (s0 = 0 switches the noise off)
        sine:     sigma = a + b sin(2 pi x), a > |b|

    Usage:
        sigma = SigmaProfile('sine', (1.0, 0.5))
        sigma.sigma(np.array([0.25]))   # [1.5]
    """
    kind: str
    params: tuple

    def __post_init__(self):
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, 'params', params)
        if self.kind == 'constant':
            if len(params) != 1:
                raise InvalidConfigurationError("sigma.params: constant sigma takes one value")
        elif self.kind == 'sine':
            if len(params) != 2:
                raise InvalidConfigurationError("sigma.params: sine sigma takes a, b")
            a, b = params
            if not a > abs(b):
                raise InvalidConfigurationError(f"sigma.params: sine sigma needs a > |b|, got a={a}, b={b}")
        else:
            raise InvalidConfigurationError(
                f"sigma.preset: unknown preset '{self.kind}' (choose from {list(SIGMA_PRESETS)})")

    @property
    def is_zero(self):
        return self.kind == 'constant' and self.params[0] == 0.0

    def sigma(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == 'constant':
            return np.full_like(x, self.params[0])
        a, b = self.params
        return a + b * np.sin(TWO_PI * x)

    def sigma_prime(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == 'constant':
            return np.zeros_like(x)
        return TWO_PI * self.params[1] * np.cos(TWO_PI * x)

    def sigma_second(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == 'constant':
            return np.zeros_like(x)
        return -TWO_PI**2 * self.params[1] * np.sin(TWO_PI * x)

    def sup_norms(self):
        """(||sigma||_inf, ||sigma'||_inf)"""
        if self.kind == 'constant':
            return abs(self.params[0]), 0.0
        a, b = self.params
        return abs(a) + abs(b), TWO_PI * abs(b)

    def sigma_squared_w2inf(self):
        """||sigma^2||_{W^{2,inf}} on a dense grid"""
        x = np.arange(SUP_SAMPLES) / SUP_SAMPLES
        s, s1, s2 = self.sigma(x), self.sigma_prime(x), self.sigma_second(x)
        return float(np.max(np.abs(s * s)) + np.max(np.abs(2 * s * s1))
                     + np.max(np.abs(2 * s1 * s1 + 2 * s * s2)))

    def to_dict(self):
        return {'preset': self.kind, 'params': list(self.params)}


def eval_sigma(profile, M):
    """sigma on the M-point collocation grid"""
    return GridField(profile.sigma(np.arange(M) / M))


def eval_sigma_prime(profile, M):
    return GridField(profile.sigma_prime(np.arange(M) / M))


def eval_sigma_second(profile, M):
    return GridField(profile.sigma_second(np.arange(M) / M))
