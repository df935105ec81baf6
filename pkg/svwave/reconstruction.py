"""
Wave Field Reconstruction
Recovers u = F^-1(1/2 dx^-1 (R - S)) from the Riemann invariants and checks
the constitutive identities on the collocation grid
"""
from dataclasses import dataclass

import numpy as np

from .logger import get_logger
from .spectral_torus import (
    GridField,
    MEAN_TOLERANCE,
    SpectralField,
    antiderivative,
    coeffs_to_values,
    derivative,
    fine_grid_size,
    values_to_coeffs,
)

logger = get_logger(__name__)


@dataclass(frozen=True)
class ReconstructedField:
    """
    Wave field on the collocation grid plus its self-consistency residuals.

    Attributes:
        u: GridField of the wave field
        residual_constitutive: L2 size of 2 c(u) dx u - (R - S)
        residual_mean_F: |spatial mean of F(u)|
    """
    u: GridField
    residual_constitutive: float
    residual_mean_F: float


def grid_l2(values):
    """L2(T) norm of grid samples (trapezoidal = spectral on the torus)"""
    return float(np.sqrt(np.mean(np.square(values))))


def grid_derivative(values):
    """Spectral derivative of grid samples, returned on the same grid"""
    M = len(values)
    return coeffs_to_values(derivative(SpectralField(values_to_coeffs(values))).coeffs, M)


def wave_field(R, S, speed, M, subtract_mean=False, mean_tolerance=MEAN_TOLERANCE):
    """
    Grid values of u without residual bookkeeping.

    Args:
        R, S: SpectralField invariants
        speed: WaveSpeed
        M: Grid size (>= 2K + 1)
        subtract_mean: Reconstruct from R - S minus its mean instead of
            requiring mean(R - S) = 0
        mean_tolerance: Allowed |mean(R - S)| when subtract_mean is False

    Returns:
        numpy array of u at the M collocation points

    Raises:
        ConstraintViolationError: If mean(R - S) is not zero
    """
    q = R - S
    if subtract_mean:
        q = q - q.mean
    F_u = antiderivative(q, mean_tolerance) / 2.0
    return speed.F_inverse(coeffs_to_values(F_u.coeffs, M))


def build_u(R, S, speed, M=None, mean_tolerance=MEAN_TOLERANCE):
    """
    Reconstruct the wave field from the Riemann invariants.

    Args:
        R, S: SpectralField invariants with mean(R - S) = 0
        speed: WaveSpeed
        M: Grid size (default: oversampled for the larger K)

    Returns:
        ReconstructedField

    Raises:
        ConstraintViolationError: If |mean(R - S)| > mean_tolerance
        NumericalFailureError: If F^-1 fails
    """
    if M is None:
        M = fine_grid_size(max(R.K, S.K))
    u = wave_field(R, S, speed, M, mean_tolerance=mean_tolerance)
    residual = constitutive_residual(R, S, u, speed)
    mean_F = abs(float(np.mean(speed.F(u))))
    logger.debug(f"build_u on M={M}: residual {residual:.3e}, mean F(u) {mean_F:.3e}")
    return ReconstructedField(GridField(u), residual, mean_F)


def _values(u):
    return u.values if isinstance(u, GridField) else np.asarray(u, dtype=float)


def constitutive_residual(R, S, u, speed):
    """
    L2 residual of 2 c(u) dx u = R - S.

    c(u) dx u is evaluated as the spectral derivative of F(u), which is the
    same quantity by the chain rule and keeps band-limited data exact.

    Args:
        R, S: SpectralField invariants
        u: GridField (or array) of the wave field
        speed: WaveSpeed

    Returns:
        float: Nonnegative residual
    """
    u = _values(u)
    M = u.size
    lhs = 2.0 * grid_derivative(speed.F(u))
    rhs = coeffs_to_values((R - S).coeffs, M)
    return grid_l2(lhs - rhs)


def c_derivative_identity_residual(R, S, u, speed):
    """L2 residual of dx c(u) = 2 c~(u) (R - S)"""
    u = _values(u)
    M = u.size
    lhs = grid_derivative(speed.c(u))
    rhs = 2.0 * speed.c_tilde(u) * coeffs_to_values((R - S).coeffs, M)
    return grid_l2(lhs - rhs)


def time_derivative_u(R, S, speed, nu, M=None):
    """
    Noiseless time derivative of the reconstructed wave field.

    From c(u) dt u = 1/2 dx^-1 dt(R - S) with
    dt(R - S) = nu dxx(R - S) + dx P_N[c(u)(R + S)]:
        dt u = (P_N[c(u)(R + S)] - mean + nu dx(R - S)) / (2 c(u))

    Args:
        R, S: SpectralField invariants
        speed: WaveSpeed
        nu: Viscosity
        M: Grid size

    Returns:
        GridField of dt u
    """
    K = max(R.K, S.K)
    if M is None:
        M = fine_grid_size(K)
    u = wave_field(R, S, speed, M)
    flux = SpectralField(values_to_coeffs(speed.c(u) * coeffs_to_values((R + S).coeffs, M), K))
    flux = flux - flux.mean
    viscous = nu * derivative(R - S)
    numerator = coeffs_to_values((flux + viscous).coeffs, M)
    return GridField(numerator / (2.0 * speed.c(u)))
