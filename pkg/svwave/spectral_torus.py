"""
Spectral Fields on the Torus
Real periodic fields on [0, 1) in Fourier and collocation form, with the
Galerkin projection, derivative, zero-mean inverse derivative, mollifier and norms
"""
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
import csv

import numpy as np

from .errors import ConstraintViolationError, InvalidArgumentError
from .logger import get_logger

logger = get_logger(__name__)


TWO_PI = 2.0 * np.pi

# Zero-mean precondition of the inverse derivative
MEAN_TOLERANCE = 1e-10

# Collocation oversampling for sup / L1 norms and nonlinear products
OVERSAMPLE = 4


class Norm(Enum):
    """Norms available through norm()"""
    L2 = "L2"
    H1_SEMI = "H1_semi"
    H_NEG3 = "H_neg3"
    LINF = "Linf"
    L1 = "L1"

    def __str__(self):
        return self.value


def _frozen(array, dtype):
    array = np.array(array, dtype=dtype, copy=True)
    array.flags.writeable = False
    return array


@dataclass(frozen=True, eq=False)
class SpectralField:
    """
    Fourier coefficients of a real periodic function.

    Only k = 0..K is stored; coeff(-k) is conj(coeff(k)), so Hermitian
    symmetry holds by construction and coeff(0) is kept real.

    Usage:
        f = from_modes([("sin", 1, 1.0)], K=4)
        f.coeff(1)     # -0.5j
        f.coeff(-1)    # +0.5j
        f.mean         # 0.0
    """
    coeffs: np.ndarray

    def __post_init__(self):
        coeffs = np.array(self.coeffs, dtype=complex, copy=True)
        if coeffs.ndim != 1 or coeffs.size == 0:
            raise InvalidArgumentError("SpectralField needs a non-empty 1-D coefficient array")
        coeffs[0] = coeffs[0].real
        object.__setattr__(self, "coeffs", _frozen(coeffs, complex))

    @property
    def K(self):
        """Maximum stored frequency"""
        return self.coeffs.size - 1

    @property
    def mean(self):
        """Spatial mean (coefficient of k = 0)"""
        return float(self.coeffs[0].real)

    def coeff(self, k):
        """Coefficient of frequency k (any sign); zero beyond K"""
        if abs(k) > self.K:
            return 0j
        value = self.coeffs[abs(k)]
        return complex(np.conj(value)) if k < 0 else complex(value)

    def full_coeffs(self):
        """Coefficients for k = -K..K in ascending order"""
        return np.concatenate([np.conj(self.coeffs[:0:-1]), self.coeffs])

    def padded(self, K):
        """Coefficient array truncated or zero-padded to max frequency K"""
        out = np.zeros(K + 1, dtype=complex)
        n = min(K, self.K) + 1
        out[:n] = self.coeffs[:n]
        return out

    # ═══════════════════════════════════════════════════════════════════
    # ARITHMETIC
    # ═══════════════════════════════════════════════════════════════════

    def __add__(self, other):
        if isinstance(other, SpectralField):
            K = max(self.K, other.K)
            return SpectralField(self.padded(K) + other.padded(K))
        out = self.coeffs.copy()
        out[0] += float(other)
        return SpectralField(out)

    __radd__ = __add__

    def __neg__(self):
        return SpectralField(-self.coeffs)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, scalar):
        return SpectralField(self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return SpectralField(self.coeffs / float(scalar))

    def is_close(self, other, atol=1e-12):
        """Coefficient-wise comparison with absolute tolerance"""
        K = max(self.K, other.K)
        return bool(np.max(np.abs(self.padded(K) - other.padded(K))) <= atol)

    @classmethod
    def zeros(cls, K):
        """The zero field with max frequency K"""
        return cls(np.zeros(K + 1, dtype=complex))

    @classmethod
    def constant(cls, value, K=0):
        """A constant field"""
        coeffs = np.zeros(K + 1, dtype=complex)
        coeffs[0] = value
        return cls(coeffs)


@dataclass(frozen=True, eq=False)
class GridField:
    """
    Samples of a real periodic function at x_m = m / M.

    Usage:
        g = to_grid(f, 64)
        g.values.max()
    """
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 1:
            raise InvalidArgumentError("GridField needs a 1-D value array")
        object.__setattr__(self, "values", _frozen(values, float))

    @property
    def M(self):
        """Number of collocation points"""
        return self.values.size

    @property
    def x(self):
        """Collocation points"""
        return grid_points(self.M)


# ═══════════════════════════════════════════════════════════════════
# GRIDS
# ═══════════════════════════════════════════════════════════════════

def is_power_of_two(n):
    """True for 1, 2, 4, 8, ..."""
    return n >= 1 and (n & (n - 1)) == 0


def grid_points(M):
    """Uniform collocation points m / M on [0, 1)"""
    return np.arange(M) / M


def fine_grid_size(K, factor=OVERSAMPLE):
    """
    Smallest power of two holding factor * (2K + 1) points.

    Args:
        K: Max frequency of the fields to be sampled
        factor: Oversampling factor (default 4)

    Returns:
        int: Grid size M
    """
    target = max(2, int(np.ceil(factor * (2 * K + 1))))
    return 1 << (target - 1).bit_length()


def coeffs_to_values(coeffs, M):
    """
    Synthesize grid values from a half-spectrum array (k = 0..K).

    Args:
        coeffs: Complex array for k = 0..K
        M: Grid size with M >= 2K + 1

    Returns:
        Real numpy array of length M
    """
    K = len(coeffs) - 1
    if M < 2 * K + 1:
        raise InvalidArgumentError(f"Grid of {M} points cannot hold frequency {K}")
    padded = np.zeros(M // 2 + 1, dtype=complex)
    padded[:K + 1] = coeffs
    return np.fft.irfft(padded, n=M, norm="forward")


def values_to_coeffs(values, K=None):
    """
    Half-spectrum coefficients of grid values, normalized so coeff(0) is the mean.

    Args:
        values: Real grid values (length M)
        K: Max frequency to keep (default (M - 1) // 2, dropping any Nyquist mode)

    Returns:
        Complex array for k = 0..K
    """
    M = len(values)
    if K is None:
        K = (M - 1) // 2
    spectrum = np.fft.rfft(values, norm="forward")
    out = np.zeros(K + 1, dtype=complex)
    n = min(K, (M - 1) // 2) + 1
    out[:n] = spectrum[:n]
    out[0] = out[0].real
    return out


# ═══════════════════════════════════════════════════════════════════
# CONVERSIONS
# ═══════════════════════════════════════════════════════════════════

def to_spectral(g):
    """
    Discrete Fourier coefficients of a grid field.

    Args:
        g: GridField (or array of values) with a power-of-two length

    Returns:
        SpectralField with K = (M - 1) // 2

    Raises:
        InvalidArgumentError: If the grid is empty or not a power of two
    """
    values = g.values if isinstance(g, GridField) else np.asarray(g, dtype=float)
    M = values.size
    if M == 0:
        logger.error("to_spectral called with an empty grid")
        raise InvalidArgumentError("Cannot transform a grid of length zero")
    if not is_power_of_two(M):
        raise InvalidArgumentError(f"Grid size must be a power of two: {M}")
    return SpectralField(values_to_coeffs(values))


def to_grid(f, M=None):
    """
    Sample a spectral field on a collocation grid.

    Args:
        f: SpectralField
        M: Grid size (default: the oversampled size for f.K)

    Returns:
        GridField
    """
    if M is None:
        M = fine_grid_size(f.K)
    return GridField(coeffs_to_values(f.coeffs, M))


def from_modes(terms, K=None):
    """
    Build a field from trigonometric terms.

    Args:
        terms: Iterable of (kind, k, amplitude) with kind in {"sin", "cos", "const"}
        K: Max frequency (default: largest k in terms)

    Returns:
        SpectralField equal to sum of amp * sin(2 pi k x), amp * cos(2 pi k x), amp

    Example:
        from_modes([("sin", 1, 1.0), ("cos", 2, 0.3)])
    """
    terms = list(terms)
    top = max([int(k) for _, k, _ in terms] + [0])
    K = top if K is None else K
    if top > K:
        raise InvalidArgumentError(f"Mode {top} exceeds K={K}")
    coeffs = np.zeros(K + 1, dtype=complex)
    for kind, k, amp in terms:
        k = int(k)
        if kind not in ("sin", "cos", "const"):
            raise InvalidArgumentError(f"Unknown mode kind: {kind}")
        if kind == "const" or (kind == "cos" and k == 0):
            coeffs[0] += amp
        elif kind == "sin":
            # sin(0) vanishes
            coeffs[k] += -0.5j * amp if k else 0.0
        else:
            coeffs[k] += 0.5 * amp
    return SpectralField(coeffs)


def random_field(generator, K, amplitude=1.0, decay=1.0, zero_mean=False):
    """
    Random band-limited field with coefficients decaying like k^-decay.

    Args:
        generator: numpy Generator
        K: Max frequency
        amplitude: Overall scale
        decay: Spectral decay exponent
        zero_mean: Force coeff(0) = 0
    """
    k = np.arange(K + 1)
    scale = amplitude / np.maximum(k, 1) ** decay
    coeffs = scale * (generator.standard_normal(K + 1) + 1j * generator.standard_normal(K + 1)) / 2
    coeffs[0] = 0.0 if zero_mean else scale[0] * generator.standard_normal()
    return SpectralField(coeffs)


# ═══════════════════════════════════════════════════════════════════
# OPERATORS
# ═══════════════════════════════════════════════════════════════════

def wavenumbers(K):
    """Angular wavenumbers 2 pi k for k = 0..K"""
    return TWO_PI * np.arange(K + 1)


def project(f, N):
    """
    Galerkin projection P_N onto frequencies |k| <= N - 1.

    Args:
        f: SpectralField
        N: Galerkin order (>= 1)

    Returns:
        SpectralField with K = N - 1
    """
    if N < 1:
        raise InvalidArgumentError(f"Galerkin order must be >= 1: {N}")
    return SpectralField(f.padded(N - 1))


def derivative(f):
    """Spectral derivative: coeff(k) -> 2 pi i k coeff(k)"""
    return SpectralField(1j * wavenumbers(f.K) * f.coeffs)


def second_derivative(f):
    """Spectral second derivative"""
    return SpectralField(-wavenumbers(f.K) ** 2 * f.coeffs)


def antiderivative(f, mean_tolerance=MEAN_TOLERANCE):
    """
    The unique zero-mean antiderivative of a zero-mean field.

    Args:
        f: SpectralField with |mean| <= mean_tolerance
        mean_tolerance: Allowed size of the mean

    Returns:
        SpectralField G with mean 0 and derivative(G) = f

    Raises:
        ConstraintViolationError: If f has a nonzero mean
    """
    if abs(f.mean) > mean_tolerance:
        logger.error(f"antiderivative of a field with mean {f.mean:.3e}")
        raise ConstraintViolationError("Inverse derivative needs a zero-mean field", f.mean)
    coeffs = np.zeros_like(f.coeffs)
    k = wavenumbers(f.K)
    coeffs[1:] = f.coeffs[1:] / (1j * k[1:])
    return SpectralField(coeffs)


def mollify(f, delta):
    """
    Convolution with the periodized heat kernel at time delta^2 / 2.

    Args:
        f: SpectralField
        delta: Mollification width (> 0)

    Returns:
        SpectralField with coeff(k) * exp(-2 pi^2 k^2 delta^2)
    """
    if not delta > 0:
        raise InvalidArgumentError(f"Mollifier width must be positive: {delta}")
    k = np.arange(f.K + 1)
    return SpectralField(f.coeffs * np.exp(-2.0 * np.pi**2 * k**2 * delta**2))


# ═══════════════════════════════════════════════════════════════════
# NORMS & INNER PRODUCTS
# ═══════════════════════════════════════════════════════════════════

def _parseval(coeffs, weights=None):
    power = np.abs(coeffs) ** 2
    if weights is not None:
        power = power * weights
    return float(power[0] + 2.0 * np.sum(power[1:]))


def inner(f, g):
    """L2(T) inner product of two real fields"""
    K = max(f.K, g.K)
    product = f.padded(K) * np.conj(g.padded(K))
    return float(product[0].real + 2.0 * np.sum(product[1:].real))


def norm(f, which=Norm.L2):
    """
    Norm of a spectral field.

    Args:
        f: SpectralField
        which: Norm member or its name ("L2", "H1_semi", "H_neg3", "Linf", "L1")

    Returns:
        float: Nonnegative norm value
    """
    which = Norm(which)
    if which is Norm.L2:
        return np.sqrt(_parseval(f.coeffs))
    if which is Norm.H1_SEMI:
        return np.sqrt(_parseval(f.coeffs, wavenumbers(f.K) ** 2))
    if which is Norm.H_NEG3:
        return np.sqrt(_parseval(f.coeffs, (1.0 + wavenumbers(f.K) ** 2) ** -3))
    values = coeffs_to_values(f.coeffs, fine_grid_size(f.K))
    if which is Norm.LINF:
        return float(np.max(np.abs(values)))
    return float(np.mean(np.abs(values)))


# ═══════════════════════════════════════════════════════════════════
# SERIALIZATION
# ═══════════════════════════════════════════════════════════════════

def dump_field(field, path):
    """
    Write a field in the flat binary layout.

    Spectral: int64 K, then (re, im) float64 pairs for k = -K..K.
    Grid: int64 M, then M float64 values.
    """
    path = Path(path)
    if isinstance(field, SpectralField):
        header = np.array([field.K], dtype="<i8")
        full = field.full_coeffs()
        body = np.column_stack([full.real, full.imag]).astype("<f8").ravel()
    else:
        header = np.array([field.M], dtype="<i8")
        body = field.values.astype("<f8")
    with open(path, "wb") as f:
        f.write(header.tobytes())
        f.write(body.tobytes())


def load_spectral(path):
    """Read a SpectralField written by dump_field"""
    raw = Path(path).read_bytes()
    K = int(np.frombuffer(raw[:8], dtype="<i8")[0])
    pairs = np.frombuffer(raw[8:], dtype="<f8").reshape(2 * K + 1, 2)
    return SpectralField(pairs[K:, 0] + 1j * pairs[K:, 1])


def load_grid(path):
    """Read a GridField written by dump_field"""
    raw = Path(path).read_bytes()
    M = int(np.frombuffer(raw[:8], dtype="<i8")[0])
    return GridField(np.frombuffer(raw[8:], dtype="<f8", count=M))


def write_field_csv(field, path):
    """
    Write a field as CSV: header row with K (or M), then (k, re, im) or (x, value) rows.
    """
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        if isinstance(field, SpectralField):
            writer.writerow(["K", field.K])
            full = field.full_coeffs()
            for k, c in zip(range(-field.K, field.K + 1), full):
                writer.writerow([k, repr(float(c.real)), repr(float(c.imag))])
        else:
            writer.writerow(["M", field.M])
            for x, v in zip(field.x, field.values):
                writer.writerow([repr(float(x)), repr(float(v))])
