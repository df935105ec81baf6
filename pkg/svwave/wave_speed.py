"""
Wave Speed System
The nonlinear speed c(u), its derivative, c~ = c'/(4c), the antiderivative F
with its inverse, and smoothed approximants c_N
"""
import csv
from pathlib import Path

import numpy as np
from numpy.polynomial.hermite_e import hermegauss
from scipy.interpolate import PchipInterpolator
from scipy.special import ellipeinc

from .errors import InvalidConfigurationError, NumericalFailureError
from .logger import get_logger

logger = get_logger(__name__)


# Safeguarded Newton settings for F^-1
INVERSE_MAX_ITER = 200
INVERSE_TOLERANCE = 1e-13

# Gauss-Hermite nodes for smoothing tabulated speeds
SMOOTHING_NODES = 48

# Samples used to certify |c'| <= kappa for non-closed-form bounds
BOUND_SAMPLES = 20001


def _as_array(u):
    return np.asarray(u, dtype=float)


def _output(value, like):
    return float(value) if np.ndim(like) == 0 else value


def _kappa_for(required, given, name):
    """Smallest admissible kappa, or validate a user-given one"""
    required = max(required, 1.0 + 1e-9)
    if given is None:
        return required
    if given < required * (1 - 1e-12):
        raise InvalidConfigurationError(
            f"speed.kappa: {name} needs kappa >= {required:.6g}, got {given}")
    return float(given)


class WaveSpeed:
    """
    Base class for wave speeds satisfying kappa^-1 <= c <= kappa and |c'| <= kappa.

    Subclasses provide c, c_prime and F; F_inverse and c_tilde are shared.
    Every method accepts scalars or numpy arrays.

    Usage:
        w = make_speed("cosine")
        w.c(0.0)              # 2.0
        w.F_inverse(w.F(1.0)) # 1.0
    """

    name = "abstract"

    def __init__(self, kappa, params):
        """
        Args:
            kappa: Bound constant (> 1)
            params: Preset parameters (kept for manifests)
        """
        if not kappa > 1:
            raise InvalidConfigurationError(f"speed.kappa: must exceed 1, got {kappa}")
        self.kappa = float(kappa)
        self.params = tuple(float(p) for p in params)

    def __repr__(self):
        return f"{type(self).__name__}(params={self.params}, kappa={self.kappa:g})"

    # ═══════════════════════════════════════════════════════════════════
    # EVALUATION
    # ═══════════════════════════════════════════════════════════════════

    def c(self, u):
        raise NotImplementedError

    def c_prime(self, u):
        raise NotImplementedError

    def F(self, u):
        raise NotImplementedError

    def c_tilde(self, u):
        """c~(u) = c'(u) / (4 c(u))"""
        return self.c_prime(u) / (4.0 * self.c(u))

    def F_inverse(self, v):
        """
        Inverse of F by safeguarded Newton inside a monotone bracket.

        F' lies in [1/kappa, kappa], so F^-1(v) lies between v/kappa and
        kappa*v; a Newton step leaving the bracket is replaced by bisection.

        Args:
            v: Scalar or array of values

        Returns:
            u with F(u) = v to 1e-13 * max(1, |v|)

        Raises:
            NumericalFailureError: If the iteration cap is reached
        """
        v_arr = _as_array(v)
        kappa = self.kappa
        lo = np.where(v_arr >= 0, v_arr / kappa, v_arr * kappa)
        hi = np.where(v_arr >= 0, v_arr * kappa, v_arr / kappa)
        u = np.clip(v_arr / self.c(np.zeros_like(v_arr)), lo, hi)
        tol = INVERSE_TOLERANCE * np.maximum(1.0, np.abs(v_arr))

        for iteration in range(INVERSE_MAX_ITER):
            residual = self.F(u) - v_arr
            done = (np.abs(residual) <= tol) | (hi - lo <= 1e-15 * np.maximum(1.0, np.abs(u)))
            if np.all(done):
                logger.debug(f"F_inverse converged in {iteration} iterations")
                return _output(u, v)
            hi = np.where(residual > 0, u, hi)
            lo = np.where(residual < 0, u, lo)
            newton = u - residual / self.c(u)
            bisect = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
            u = np.where(done, u, np.where(bisect, 0.5 * (lo + hi), newton))

        worst = float(np.max(np.abs(self.F(u) - v_arr)))
        logger.error(f"F_inverse did not converge: residual {worst:.3e}")
        raise NumericalFailureError(f"F_inverse did not converge in {INVERSE_MAX_ITER} iterations")

    def smooth(self, level):
        """Smoothed approximant c_N; smooth presets return themselves"""
        return self

    def to_dict(self):
        """Preset description for manifests"""
        return {'preset': self.name, 'params': list(self.params), 'kappa': self.kappa}


# ═══════════════════════════════════════════════════════════════════
# PRESETS
# ═══════════════════════════════════════════════════════════════════

class ConstantSpeed(WaveSpeed):
    """c = c0; c~ vanishes and the system is linear"""

    name = "constant"

    def __init__(self, c0=1.0, kappa=None):
        if not c0 > 0:
            raise InvalidConfigurationError(f"speed.params: constant speed must be positive, got {c0}")
        super().__init__(_kappa_for(max(c0, 1.0 / c0), kappa, self.name), (c0,))
        self.c0 = float(c0)

    def c(self, u):
        return _output(np.full_like(_as_array(u), self.c0), u)

    def c_prime(self, u):
        return _output(np.zeros_like(_as_array(u)), u)

    def F(self, u):
        return _output(self.c0 * _as_array(u), u)

    def F_inverse(self, v):
        return _output(_as_array(v) / self.c0, v)


class CosineSpeed(WaveSpeed):
    """c(u) = (3 + cos u) / 2 with F(u) = (3u + sin u) / 2; c' changes sign"""

    name = "cosine"

    def __init__(self, kappa=None):
        super().__init__(_kappa_for(2.0, kappa, self.name), ())

    def c(self, u):
        return 0.5 * (3.0 + np.cos(u))

    def c_prime(self, u):
        return -0.5 * np.sin(u)

    def F(self, u):
        return 0.5 * (3.0 * u + np.sin(u))


class LiquidCrystalSpeed(WaveSpeed):
    """
    Director-field speed c(u) = sqrt(alpha^2 cos^2 u + beta^2 sin^2 u).

    F is an incomplete elliptic integral of the second kind.
    """

    name = "liquid_crystal"

    def __init__(self, alpha=1.0, beta=1.5, kappa=None):
        if not (alpha > 0 and beta > 0):
            raise InvalidConfigurationError(
                f"speed.params: liquid crystal needs alpha, beta > 0, got {alpha}, {beta}")
        self.alpha = float(alpha)
        self.beta = float(beta)
        # c is pi-periodic
        grid = np.linspace(0.0, np.pi, BOUND_SAMPLES)
        slope = float(np.max(np.abs(self.c_prime(grid))))
        low, high = min(alpha, beta), max(alpha, beta)
        required = max(high, 1.0 / low, slope * (1 + 1e-6))
        super().__init__(_kappa_for(required, kappa, self.name), (alpha, beta))

    def c(self, u):
        return np.sqrt(self.alpha**2 * np.cos(u) ** 2 + self.beta**2 * np.sin(u) ** 2)

    def c_prime(self, u):
        return (self.beta**2 - self.alpha**2) * np.sin(u) * np.cos(u) / self.c(u)

    def F(self, u):
        if self.alpha >= self.beta:
            return self.alpha * ellipeinc(u, 1.0 - (self.beta / self.alpha) ** 2)
        # Shift by pi/2 so the elliptic parameter stays in [0, 1)
        m = 1.0 - (self.alpha / self.beta) ** 2
        return self.beta * (ellipeinc(_as_array(u) - 0.5 * np.pi, m) - ellipeinc(-0.5 * np.pi, m))


class TabulatedSpeed(WaveSpeed):
    """
    Speed interpolated from (u, c) samples by a monotone cubic, constant beyond the table.

    The interpolant is C^1 only; use smooth(level) for the C^2 approximants.
    """

    name = "tabulated"

    def __init__(self, u_values, c_values, kappa=None):
        u_values = np.asarray(u_values, dtype=float)
        c_values = np.asarray(c_values, dtype=float)
        if u_values.size < 2 or u_values.shape != c_values.shape:
            raise InvalidConfigurationError("speed.table: need at least two (u, c) rows")
        if np.any(np.diff(u_values) <= 0):
            raise InvalidConfigurationError("speed.table: u column must be strictly increasing")
        if np.any(c_values <= 0):
            raise InvalidConfigurationError("speed.table: c column must be positive")
        self.u_values = u_values
        self.c_values = c_values
        self._interp = PchipInterpolator(u_values, c_values, extrapolate=True)
        self._slope = self._interp.derivative()
        self._area = self._interp.antiderivative()
        self._lo, self._hi = float(u_values[0]), float(u_values[-1])

        dense = np.linspace(self._lo, self._hi, BOUND_SAMPLES)
        slope = float(np.max(np.abs(self._slope(dense))))
        required = max(float(c_values.max()), 1.0 / float(c_values.min()), slope * (1 + 1e-6))
        super().__init__(_kappa_for(required, kappa, self.name), ())
        self._F0 = float(self._G(0.0))

    def _clip(self, u):
        return np.clip(_as_array(u), self._lo, self._hi)

    def _G(self, u):
        inside = self._clip(u)
        return self._area(inside) + self._interp(inside) * (_as_array(u) - inside)

    def c(self, u):
        return _output(self._interp(self._clip(u)), u)

    def c_prime(self, u):
        u_arr = _as_array(u)
        slope = np.where((u_arr < self._lo) | (u_arr > self._hi), 0.0, self._slope(self._clip(u_arr)))
        return _output(slope, u)

    def F(self, u):
        return _output(self._G(u) - self._F0, u)

    def smooth(self, level):
        return SmoothedSpeed(self, level)

    def to_dict(self):
        data = super().to_dict()
        data['table'] = [[float(a), float(b)] for a, b in zip(self.u_values, self.c_values)]
        return data


class SmoothedSpeed(WaveSpeed):
    """
    Gaussian smoothing in u of a base speed, width 1 / level.

    Convex averaging keeps kappa^-1 <= c_N <= kappa and |c_N'| <= kappa;
    F_N is the same average of F shifted so F_N(0) = 0.
    """

    name = "smoothed"

    def __init__(self, base, level):
        if level < 1:
            raise InvalidConfigurationError(f"speed.level: smoothing level must be >= 1, got {level}")
        super().__init__(base.kappa, base.params)
        self.base = base
        self.level = int(level)
        nodes, weights = hermegauss(SMOOTHING_NODES)
        self._shifts = nodes / self.level
        self._weights = weights / weights.sum()
        self._F0 = float(np.sum(self._weights * base.F(-self._shifts)))

    def _average(self, fn, u):
        u_arr = _as_array(u)
        values = fn(u_arr[..., None] - self._shifts) @ self._weights
        return _output(values, u)

    def c(self, u):
        return self._average(self.base.c, u)

    def c_prime(self, u):
        return self._average(self.base.c_prime, u)

    def F(self, u):
        return _output(self._average(self.base.F, u) - self._F0, u)

    def to_dict(self):
        data = self.base.to_dict()
        data['smoothing_level'] = self.level
        return data


# ═══════════════════════════════════════════════════════════════════
# CATALOGUE
# ═══════════════════════════════════════════════════════════════════

SPEED_PRESETS = {
    'constant': ConstantSpeed,
    'cosine': CosineSpeed,
    'liquid_crystal': LiquidCrystalSpeed,
}


def make_speed(name, params=(), kappa=None, table_path=None):
    """
    Build a speed from its preset name.

    Args:
        name: 'constant', 'cosine', 'liquid_crystal' or 'tabulated'
        params: Preset parameters (c0 | none | alpha, beta)
        kappa: Optional bound constant; defaults to the tightest admissible value
        table_path: Two-column CSV for 'tabulated'

    Returns:
        WaveSpeed instance

    Raises:
        InvalidConfigurationError: For unknown presets or violated bounds
    """
    if name == 'tabulated':
        if table_path is None:
            raise InvalidConfigurationError("speed.table: tabulated speed needs a table path")
        return load_tabulated(table_path, kappa=kappa)
    if name not in SPEED_PRESETS:
        raise InvalidConfigurationError(
            f"speed.preset: unknown preset '{name}' (choose from {sorted(SPEED_PRESETS)} or 'tabulated')")
    try:
        return SPEED_PRESETS[name](*params, kappa=kappa)
    except TypeError as e:
        raise InvalidConfigurationError(f"speed.params: bad parameters for '{name}': {e}") from e


def load_tabulated(path, kappa=None):
    """
    Load a tabulated speed from a two-column CSV (u, c(u)); a non-numeric header row is skipped.
    """
    rows = []
    with open(Path(path), 'r', encoding='utf-8', newline='') as f:
        for row in csv.reader(f):
            if not row or row[0].strip().startswith('#'):
                continue
            try:
                rows.append((float(row[0]), float(row[1])))
            except (ValueError, IndexError):
                if rows:
                    raise InvalidConfigurationError(f"speed.table: malformed row {row} in {path}")
    if not rows:
        raise InvalidConfigurationError(f"speed.table: no rows in {path}")
    u_values, c_values = zip(*rows)
    logger.info(f"Loaded tabulated speed with {len(rows)} rows from {path}")
    return TabulatedSpeed(u_values, c_values, kappa=kappa)
