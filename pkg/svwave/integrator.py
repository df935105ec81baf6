"""
Time Integrator
Integrating-factor Euler-Maruyama for the Galerkin SDE: the viscous term is
solved exactly per mode, everything else is stepped explicitly
"""
from dataclasses import dataclass, field

import numpy as np

from .dynamics import SystemState, diffusion, drift, stopping_predicate
from .errors import BlowUpError, InvalidArgumentError
from .logger import get_logger, log_performance, log_stopping_time
from .noise import sample_values
from .spectral_torus import SpectralField, Norm, derivative, norm, wavenumbers
from .timing import Stopwatch

logger = get_logger(__name__)


# Any coefficient norm above this aborts the run
BLOW_UP_THRESHOLD = 1e12

# Safety factor in the transport CFL guideline
CFL_SAFETY = 0.5


@dataclass
class Trajectory:
    """
    Sampled solution of one Galerkin run.

    Attributes:
        states: SystemStates at the sample times (first at t = 0)
        w_samples: W at the same times
        params: SdeParams used
        dt: Step size
        events: Stopping-time crossings as (t, k) pairs
    """
    states: list
    w_samples: np.ndarray
    params: object
    dt: float
    events: list = field(default_factory=list)

    @property
    def times(self):
        return np.array([s.t for s in self.states])

    @property
    def final(self):
        return self.states[-1]

    @property
    def N(self):
        return self.states[0].N

    def norms(self, which=Norm.L2):
        """(||R||, ||S||) arrays over the samples"""
        return (np.array([norm(s.R, which) for s in self.states]),
                np.array([norm(s.S, which) for s in self.states]))

    def energies(self):
        """E = ||R||^2 + ||S||^2 per sample"""
        norm_R, norm_S = self.norms()
        return norm_R**2 + norm_S**2

    def dissipations(self):
        """D = ||dx R||^2 + ||dx S||^2 per sample"""
        return np.array([norm(derivative(s.R)) ** 2 + norm(derivative(s.S)) ** 2 for s in self.states])

    def mean_differences(self):
        return np.array([s.mean_difference for s in self.states])

    def rows(self):
        """CSV rows: t, norm_R, norm_S, energy, dissipation, mean_diff, W"""
        norm_R, norm_S = self.norms()
        energy = norm_R**2 + norm_S**2
        dissipation = self.dissipations()
        mean_diff = self.mean_differences()
        return [
            (s.t, norm_R[j], norm_S[j], energy[j], dissipation[j], mean_diff[j], self.w_samples[j])
            for j, s in enumerate(self.states)
        ]

    @property
    def stopping_time(self):
        """First recorded crossing time, or None"""
        return self.events[0][0] if self.events else None


def integrating_factor(K, nu, dt):
    """exp(-nu (2 pi k)^2 dt) for k = 0..K"""
    return np.exp(-nu * wavenumbers(K) ** 2 * dt)


def _check_finite(R, S, t):
    size = max(float(np.max(np.abs(R))), float(np.max(np.abs(S))))
    if not np.isfinite(size) or size > BLOW_UP_THRESHOLD:
        logger.error(f"Blow-up detected at t={t:.6g}: max coefficient {size:.3e}")
        raise BlowUpError(t, size)


def step(state, params, dt, dW):
    """
    Advance one integrating-factor Euler-Maruyama step.

    Per mode: R(k) <- e^{-nu (2 pi k)^2 dt} [R(k) + dt rest(k) + dW gR(k)],
    where rest is the drift without the viscous part; likewise S.

    Args:
        state: SystemState
        params: SdeParams
        dt: Step size (> 0)
        dW: Brownian increment over the step

    Returns:
        SystemState at t + dt

    Raises:
        BlowUpError: If a coefficient is non-finite or exceeds the threshold
    """
    if not dt > 0:
        raise InvalidArgumentError(f"Step size must be positive: {dt}")
    rest_R, rest_S = drift(state, params, include_viscous=False)
    R = state.R.coeffs + dt * rest_R.coeffs
    S = state.S.coeffs + dt * rest_S.coeffs
    if dW != 0.0 and not params.sigma.is_zero:
        gR, gS = diffusion(state, params)
        R = R + dW * gR.coeffs
        S = S + dW * gS.coeffs
    factor = integrating_factor(state.K, params.nu, dt)
    R, S = factor * R, factor * S
    t = state.t + dt
    _check_finite(R, S, t)
    return state.with_fields(t, SpectralField(R), SpectralField(S))


def cfl_limit(params, N):
    """Transport CFL guideline 0.5 / (2 pi (N - 1)(kappa + 2 ||sigma|| ||sigma'||))"""
    if N <= 1:
        return np.inf
    sup_sigma, sup_sigma_prime = params.sigma.sup_norms()
    return CFL_SAFETY / (2 * np.pi * (N - 1) * (params.speed.kappa + 2 * sup_sigma * sup_sigma_prime))


def integrate(state, params, dt, w_values, cadence=1, monitor_k=None):
    """
    Integrate from state over len(w_values) - 1 steps.

    Args:
        state: Initial SystemState
        params: SdeParams
        dt: Step size
        w_values: W at the step times (length n + 1)
        cadence: Store every cadence-th step (the final state is always stored)
        monitor_k: Level whose first crossing is recorded (default params.cutoff_k)

    Returns:
        Trajectory
    """
    if cadence < 1:
        raise InvalidArgumentError(f"Sample cadence must be >= 1: {cadence}")
    w_values = np.asarray(w_values, dtype=float)
    n = w_values.size - 1
    monitor_k = params.cutoff_k if monitor_k is None else monitor_k
    limit = cfl_limit(params, state.N)
    if dt > limit:
        logger.warning(f"dt={dt:g} exceeds the transport CFL guideline {limit:.3g} at N={state.N}")

    watch = Stopwatch()
    t0 = state.t
    states, samples, events = [state], [w_values[0]], []
    if monitor_k is not None and stopping_predicate(state, monitor_k):
        events.append((state.t, monitor_k))
    for j in range(n):
        state = step(state, params, dt, w_values[j + 1] - w_values[j])
        # Keep sample times exact multiples of dt
        state = SystemState(t0 + (j + 1) * dt, state.R, state.S, state.N)
        if monitor_k is not None and not events and stopping_predicate(state, monitor_k):
            energy = norm(state.R) ** 2 + norm(state.S) ** 2
            log_stopping_time(logger, state.t, monitor_k, energy)
            events.append((state.t, monitor_k))
        if (j + 1) % cadence == 0 or j + 1 == n:
            states.append(state)
            samples.append(w_values[j + 1])
            logger.debug(f"t={state.t:.6g} |R|={norm(state.R):.6g} |S|={norm(state.S):.6g}")

    log_performance(logger, f"integrate N={state.N} steps={n}", watch.elapsed_ms())
    return Trajectory(states, np.array(samples), params, dt, events)


def simulate(config, path, N=None, dt=None, cadence=None):
    """
    Run one trajectory of a configuration on a given Brownian path.

    Args:
        config: SimConfig
        path: BrownianPath whose spacing divides dt dyadically and whose
            horizon covers T
        N: Override of the Galerkin order (resolution studies)
        dt: Override of the step size (step-size studies)
        cadence: Override of the sample cadence

    Returns:
        Trajectory; cut-off runs record the first stopping-time crossing

    Raises:
        InvalidConfigurationError: If dt is misaligned with the path
        BlowUpError: If the run leaves the representable range
    """
    N = config.N if N is None else N
    dt = config.dt if dt is None else dt
    cadence = config.sample_cadence if cadence is None else cadence
    n = config.step_count(dt)
    w_values = sample_values(path, dt, n)
    state = config.initial_state(N)
    params = config.sde_params(N=N)
    logger.info(f"Simulating N={N} dt={dt:g} steps={n} seed={path.seed}"
                + (f" cutoff k={params.cutoff_k:g}" if params.cutoff_k is not None else ""))
    return integrate(state, params, dt, w_values, cadence)
