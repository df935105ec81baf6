"""
Galerkin Dynamics
Ito drift and diffusion of the projected Riemann-invariant system, in the
divergence (limit) form and the cut-off form, with Q_k and the stopping predicate
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidArgumentError
from .logger import get_logger
from .noise import SigmaProfile
from .reconstruction import wave_field
from .spectral_torus import (
    OVERSAMPLE,
    SpectralField,
    coeffs_to_values,
    derivative,
    fine_grid_size,
    grid_points,
    inner,
    norm,
    project,
    second_derivative,
    values_to_coeffs,
)
from .wave_speed import WaveSpeed

logger = get_logger(__name__)


def smoother_step(t):
    """Quintic step: 0 at t=0, 1 at t=1, first and second derivatives vanish at both ends"""
    return t * t * t * (t * (t * 6.0 - 15.0) + 10.0)


@dataclass(frozen=True)
class SystemState:
    """
    Galerkin state at time t; R and S are stored in the image of P_N.

    Usage:
        state = SystemState(0.0, R0, S0, N=64)
        state.R.K   # 63
    """
    t: float
    R: SpectralField
    S: SpectralField
    N: int

    def __post_init__(self):
        if self.N < 1:
            raise InvalidArgumentError(f"Galerkin order must be >= 1: {self.N}")
        if self.R.K != self.N - 1:
            object.__setattr__(self, 'R', project(self.R, self.N))
        if self.S.K != self.N - 1:
            object.__setattr__(self, 'S', project(self.S, self.N))

    @property
    def K(self):
        return self.N - 1

    @property
    def mean_difference(self):
        """Spatial mean of R - S"""
        return self.R.mean - self.S.mean

    def with_fields(self, t, R, S):
        return SystemState(t, R, S, self.N)


@dataclass(frozen=True)
class SdeParams:
    """
    Physical parameters of the Galerkin SDE.

    Attributes:
        nu: Viscosity (>= 0)
        speed: WaveSpeed
        sigma: SigmaProfile
        cutoff_k: Cut-off level k, or None for the limit (divergence-form) system
        oversample: Collocation oversampling factor for nonlinear products
    """
    nu: float
    speed: WaveSpeed
    sigma: SigmaProfile = field(default_factory=lambda: SigmaProfile('constant', (0.0,)))
    cutoff_k: Optional[float] = None
    oversample: int = OVERSAMPLE

    def __post_init__(self):
        if not self.nu >= 0:
            raise InvalidArgumentError(f"Viscosity must be nonnegative: {self.nu}")
        if self.cutoff_k is not None and not self.cutoff_k > 0:
            raise InvalidArgumentError(f"Cut-off level must be positive: {self.cutoff_k}")

    def grid_size(self, N):
        return fine_grid_size(N - 1, self.oversample)

    def without_cutoff(self):
        return SdeParams(self.nu, self.speed, self.sigma, None, self.oversample)

    def with_cutoff(self, k):
        return SdeParams(self.nu, self.speed, self.sigma, k, self.oversample)


# ═══════════════════════════════════════════════════════════════════
# COLLOCATION
# ═══════════════════════════════════════════════════════════════════

@dataclass
class _Collocation:
    """Grid values shared by one drift / diffusion evaluation"""
    M: int
    K: int
    R: np.ndarray
    S: np.ndarray
    R_x: np.ndarray
    S_x: np.ndarray
    p_xx: np.ndarray
    sigma: np.ndarray
    sigma_x: np.ndarray
    c: Optional[np.ndarray] = None
    c_tilde: Optional[np.ndarray] = None


def _grid(f, M):
    return coeffs_to_values(f.coeffs, M)


def _project(values, K):
    """P_N of grid values, N = K + 1"""
    return SpectralField(values_to_coeffs(values, K))


def _collocate(state, params, with_speed=True, subtract_mean=False):
    M = params.grid_size(state.N)
    x = grid_points(M)
    R, S = state.R, state.S
    col = _Collocation(
        M=M,
        K=state.K,
        R=_grid(R, M),
        S=_grid(S, M),
        R_x=_grid(derivative(R), M),
        S_x=_grid(derivative(S), M),
        p_xx=_grid(second_derivative(R + S), M),
        sigma=params.sigma.sigma(x),
        sigma_x=params.sigma.sigma_prime(x),
    )
    if with_speed:
        u = wave_field(R, S, params.speed, M, subtract_mean=subtract_mean)
        col.c = params.speed.c(u)
        col.c_tilde = params.speed.c_tilde(u)
    return col


def _noise_integrand(col):
    """sigma dx(R + S) on the grid"""
    return col.sigma * (col.R_x + col.S_x)


def _ito_correction(col):
    """P_N[sigma dx(sigma dx(R + S))] = P_N[sigma sigma' p_x + sigma^2 p_xx]"""
    p_x = col.R_x + col.S_x
    return _project(col.sigma * col.sigma_x * p_x + col.sigma**2 * col.p_xx, col.K)


# ═══════════════════════════════════════════════════════════════════
# DRIFTS
# ═══════════════════════════════════════════════════════════════════

def viscous_part(state, params):
    """(nu dxx R, nu dxx S)"""
    return params.nu * second_derivative(state.R), params.nu * second_derivative(state.S)


def drift_limit(state, params, include_viscous=True):
    """
    Drift of the divergence-form Galerkin system.

        dR = nu dxx R + dx P_N[c(u) R] - P_N[c~(u)(R - S)^2] + P_N[sigma dx(sigma dx(R + S))]
        dS = nu dxx S - dx P_N[c(u) S] - P_N[c~(u)(R - S)^2] + P_N[sigma dx(sigma dx(R + S))]

    Args:
        state: SystemState with mean(R - S) = 0
        params: SdeParams
        include_viscous: Add the nu dxx terms (the integrator treats them exactly)

    Returns:
        (dR, dS) SpectralFields band-limited at N - 1

    Raises:
        ConstraintViolationError: If the reconstruction precondition fails
    """
    col = _collocate(state, params)
    nonlinear = _project(col.c_tilde * (col.R - col.S) ** 2, col.K)
    correction = _ito_correction(col)
    dR = derivative(_project(col.c * col.R, col.K)) - nonlinear + correction
    dS = -derivative(_project(col.c * col.S, col.K)) - nonlinear + correction
    if include_viscous:
        vR, vS = viscous_part(state, params)
        dR, dS = dR + vR, dS + vS
    return dR, dS


def cutoff_chi(r, k):
    """
    Cut-off profile: 1 on [0, k], 0 from k + 1 on, quintic step in between.

    Args:
        r: Norm value (>= 0)
        k: Cut-off level (> 0)
    """
    if r <= k:
        return 1.0
    if r >= k + 1:
        return 0.0
    return 1.0 - smoother_step(r - k)


def cutoff_Q(f, k, M=None):
    """
    Q_k(f) = chi(||f||_L2) f^2, with f^2 computed exactly (up to frequency 2K).

    Args:
        f: SpectralField
        k: Cut-off level (> 0)
        M: Collocation grid (default oversampled for K)

    Returns:
        SpectralField with max frequency 2K
    """
    if not k > 0:
        raise InvalidArgumentError(f"Cut-off level must be positive: {k}")
    if M is None:
        M = fine_grid_size(f.K)
    chi = cutoff_chi(norm(f), k)
    return SpectralField(values_to_coeffs(chi * _grid(f, M) ** 2, 2 * f.K))


def drift_cutoff(state, params, k=None, include_viscous=True):
    """
    Drift of the cut-off Galerkin system (non-divergence transport).

        dR = nu dxx R + P_N[c(u) dx R] + P_N[c~(u)(Q_k(R) - Q_k(S))] + P_N[sigma dx(sigma dx(R + S))]
        dS = nu dxx S - P_N[c(u) dx S] - P_N[c~(u)(Q_k(R) - Q_k(S))] + P_N[sigma dx(sigma dx(R + S))]

    The cut-off system does not conserve mean(R - S) once chi < 1, so u is
    reconstructed from R - S minus its mean.

    Args:
        state: SystemState
        params: SdeParams
        k: Cut-off level (default params.cutoff_k)
        include_viscous: Add the nu dxx terms

    Returns:
        (dR, dS) SpectralFields band-limited at N - 1
    """
    k = params.cutoff_k if k is None else k
    if k is None or not k > 0:
        raise InvalidArgumentError(f"Cut-off drift needs a positive level k: {k}")
    col = _collocate(state, params, subtract_mean=True)
    chi_R = cutoff_chi(norm(state.R), k)
    chi_S = cutoff_chi(norm(state.S), k)
    nonlinear = _project(col.c_tilde * (chi_R * col.R**2 - chi_S * col.S**2), col.K)
    correction = _ito_correction(col)
    dR = _project(col.c * col.R_x, col.K) + nonlinear + correction
    dS = -_project(col.c * col.S_x, col.K) - nonlinear + correction
    if include_viscous:
        vR, vS = viscous_part(state, params)
        dR, dS = dR + vR, dS + vS
    return dR, dS


def drift(state, params, include_viscous=True):
    """Cut-off drift when params.cutoff_k is set, limit drift otherwise"""
    if params.cutoff_k is not None:
        return drift_cutoff(state, params, include_viscous=include_viscous)
    return drift_limit(state, params, include_viscous=include_viscous)


def diffusion(state, params):
    """
    Noise coefficients gR = gS = P_N[sigma dx(R + S)].

    Returns:
        (gR, gS): the same SpectralField twice
    """
    col = _collocate(state, params, with_speed=False)
    g = _project(_noise_integrand(col), col.K)
    return g, g


def stopping_predicate(state, k):
    """
    True once ||R||^2 + ||S||^2 >= k (closed first-crossing convention).
    """
    if not k > 0:
        raise InvalidArgumentError(f"Stopping level must be positive: {k}")
    return norm(state.R) ** 2 + norm(state.S) ** 2 >= k


# ═══════════════════════════════════════════════════════════════════
# ENERGY BALANCE
# ═══════════════════════════════════════════════════════════════════

def energy_budget(state, params):
    """
    Terms of the Ito energy balance

        1/2 d(||R||^2 + ||S||^2) + nu (||dx R||^2 + ||dx S||^2) dt
            = (I1 + I2 + I3 + I4 + I5) dt + I6 dW

    for the divergence-form system.

    Returns:
        dict with keys:
            I1: transport contribution <R, dx P_N[cR]> - <S, dx P_N[cS]>
            I2: nonlinear contribution -<R + S, P_N[c~(R - S)^2]>
            I3: Ito quadratic variation ||P_N[sigma dx(R + S)]||^2
            I4, I5: correction terms <R, .>, <S, .>
            I6: martingale integrand <R + S, P_N[sigma dx(R + S)]>
            dissipation: nu (||dx R||^2 + ||dx S||^2)
            bound_345: 1/2 ||sigma^2||_{W^{2,inf}} (||R||^2 + ||S||^2)
    """
    col = _collocate(state, params)
    R, S = state.R, state.S
    nonlinear = _project(col.c_tilde * (col.R - col.S) ** 2, col.K)
    correction = _ito_correction(col)
    g = _project(_noise_integrand(col), col.K)
    budget = {
        'I1': inner(R, derivative(_project(col.c * col.R, col.K)))
              - inner(S, derivative(_project(col.c * col.S, col.K))),
        'I2': -inner(R + S, nonlinear),
        'I3': inner(g, g),
        'I4': inner(R, correction),
        'I5': inner(S, correction),
        'I6': inner(R + S, g),
        'dissipation': params.nu * (inner(derivative(R), derivative(R)) + inner(derivative(S), derivative(S))),
        'bound_345': 0.5 * params.sigma.sigma_squared_w2inf() * (inner(R, R) + inner(S, S)),
    }
    logger.debug(f"Energy budget at t={state.t:.6g}: I1+I2={budget['I1'] + budget['I2']:.3e}")
    return budget
