"""
Diagnostics Suite
Numerical verification of the energy, moment, continuity, commutator,
difference and convergence estimates of the Galerkin scheme
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .dynamics import SdeParams, energy_budget
from .errors import BlowUpError, InvalidArgumentError, NumericalFailureError
from .integrator import Trajectory, integrate, simulate
from .logger import get_logger
from .noise import sample_values
from .reconstruction import grid_derivative, grid_l2, time_derivative_u, wave_field
from .rng import SimRNG
from .spectral_torus import (
    Norm,
    SpectralField,
    coeffs_to_values,
    derivative,
    fine_grid_size,
    from_modes,
    mollify,
    norm,
    random_field,
    values_to_coeffs,
    wavenumbers,
)

logger = get_logger(__name__)


# Grid used by the pointwise studies
STUDY_GRID = 512

# Commutator curves: allowed increase between neighbours past the peak, required overall decay
COMMUTATOR_SLACK = 0.1
COMMUTATOR_DECAY = 10.0

# Accepted fitted exponent of the noisy modulus of continuity
CONTINUITY_EXPONENT_RANGE = (0.35, 0.65)

# Steps of the energy-growth scenario behind the stopping-time comparison
SCENARIO_STEPS = 64

# Bootstrap confidence level
CONFIDENCE = 0.95


# ═══════════════════════════════════════════════════════════════════
# RESULT TYPES
# ═══════════════════════════════════════════════════════════════════

@dataclass
class Check:
    """
    One machine-readable pass/fail assertion.

    Usage:
        check = Check.at_most("energy identity", residual, 5e-3)
        if not check.passed:
            ...
    """
    name: str
    measured: float
    bound: object
    passed: bool
    margin: float

    @classmethod
    def at_most(cls, name, measured, bound):
        measured, bound = float(measured), float(bound)
        return cls(name, measured, bound, bool(measured <= bound), bound - measured)

    @classmethod
    def at_least(cls, name, measured, bound):
        measured, bound = float(measured), float(bound)
        return cls(name, measured, bound, bool(measured >= bound), measured - bound)

    @classmethod
    def within(cls, name, measured, low, high):
        measured = float(measured)
        margin = min(measured - low, high - measured)
        return cls(name, measured, [float(low), float(high)], bool(low <= measured <= high), margin)

    @classmethod
    def holds(cls, name, condition, measured=0.0):
        """A boolean assertion with an informative measured value"""
        return cls(name, float(measured), None, bool(condition), 0.0)

    def to_dict(self):
        return {'name': self.name, 'measured': self.measured, 'bound': self.bound,
                'passed': self.passed, 'margin': self.margin}


@dataclass
class DecayTable:
    """
    Errors against a refinement parameter (delta, 1/N, dt or a sample spacing),
    the parameter strictly decreasing.

    Usage:
        table = DecayTable("delta", [0.2, 0.1, 0.05], [1e-2, 3e-3, 8e-4])
        table.slope   # ~1.8
    """
    label: str
    parameters: np.ndarray
    errors: np.ndarray

    def __post_init__(self):
        self.parameters = np.asarray(self.parameters, dtype=float)
        self.errors = np.asarray(self.errors, dtype=float)
        if self.parameters.shape != self.errors.shape:
            raise InvalidArgumentError("DecayTable needs one error per parameter")
        if np.any(np.diff(self.parameters) >= 0):
            raise InvalidArgumentError(f"DecayTable parameters must strictly decrease: {self.parameters}")
        if np.any(self.errors < 0):
            raise InvalidArgumentError("DecayTable errors must be nonnegative")

    @property
    def slope(self):
        """Least-squares slope of log(error) against log(parameter); nan if undefined"""
        mask = self.errors > 0
        if mask.sum() < 2:
            return float('nan')
        return float(np.polyfit(np.log(self.parameters[mask]), np.log(self.errors[mask]), 1)[0])

    def is_decreasing(self, slack=0.0):
        """errors[j+1] < errors[j] (1 + slack); all-zero tables count as decreasing"""
        if np.all(self.errors == 0):
            return True
        return bool(np.all(self.errors[1:] < self.errors[:-1] * (1.0 + slack)))

    def is_decreasing_after_peak(self, slack=0.0):
        """is_decreasing over the entries from the largest error on"""
        peak = int(np.argmax(self.errors))
        return DecayTable(self.label, self.parameters[peak:], self.errors[peak:]).is_decreasing(slack)

    def rows(self):
        return list(zip(self.parameters, self.errors))

    def to_dict(self):
        return {'label': self.label, 'parameters': self.parameters.tolist(),
                'errors': self.errors.tolist(), 'slope': self.slope}


@dataclass
class EnsembleSummary:
    """
    Path functionals and empirical moments of a Monte Carlo ensemble.

    Attributes:
        N: Galerkin order
        seeds: Seeds of the surviving paths
        sup_energy: sup_t E(t) per path
        dissipation: integral of D dt per path
        moments: {p: {'sup_energy': E sup E^p, 'dissipation': nu^p E (int D)^p}}
        radii: Bootstrap confidence half-widths, same layout as moments
        blown_up: Seeds of paths excluded after a blow-up
    """
    N: int
    seeds: list
    sup_energy: np.ndarray
    dissipation: np.ndarray
    moments: dict
    radii: dict
    blown_up: list = field(default_factory=list)

    @property
    def path_count(self):
        return len(self.seeds)

    def lyapunov_monotone(self):
        """(E X^p)^(1/p) nondecreasing in p for the sup-energy moments"""
        ps = sorted(p for p in self.moments if p > 0)
        norms = [self.moments[p]['sup_energy'] ** (1.0 / p) for p in ps]
        return all(b >= a * (1 - 1e-12) for a, b in zip(norms, norms[1:]))

    def to_dict(self):
        return {
            'N': self.N,
            'path_count': self.path_count,
            'blown_up': list(self.blown_up),
            'moments': {str(p): m for p, m in self.moments.items()},
            'radii': {str(p): r for p, r in self.radii.items()},
        }


# ═══════════════════════════════════════════════════════════════════
# ENERGY
# ═══════════════════════════════════════════════════════════════════

def energy(state):
    """
    (E, D) with E = ||R||^2 + ||S||^2 and D = ||dx R||^2 + ||dx S||^2.
    """
    E = norm(state.R) ** 2 + norm(state.S) ** 2
    D = norm(state.R, Norm.H1_SEMI) ** 2 + norm(state.S, Norm.H1_SEMI) ** 2
    return float(E), float(D)


# Module-level handle on energy() for functions whose parameters shadow the name
_state_energy = energy


def energy_identity_residuals(trajectory):
    """
    |Delta E + 2 nu int D dt| / E(0) per sample interval (trapezoidal in time).

    Raises:
        InvalidArgumentError: If the trajectory was run with noise
    """
    params = trajectory.params
    if not params.sigma.is_zero:
        raise InvalidArgumentError("Energy identity applies to noiseless trajectories (sigma = 0)")
    E = trajectory.energies()
    D = trajectory.dissipations()
    t = trajectory.times
    if E.size < 2 or E[0] == 0:
        return np.zeros(max(E.size - 1, 0))
    dissipated = params.nu * (D[1:] + D[:-1]) * np.diff(t)
    return np.abs(np.diff(E) + dissipated) / E[0]


def energy_identity_report(trajectory):
    """Max per-step residual of the noiseless energy identity"""
    residuals = energy_identity_residuals(trajectory)
    return float(residuals.max()) if residuals.size else 0.0


def energy_budget_check(state, params, tolerance=1e-10):
    """
    I1 + I2 = 0 and I3 + I4 + I5 <= 1/2 ||sigma^2||_{W^{2,inf}} (||R||^2 + ||S||^2).

    Returns:
        [Check, Check]
    """
    budget = energy_budget(state, params)
    scale = max(1.0, abs(budget['I1']), abs(budget['I2']))
    ito = budget['I3'] + budget['I4'] + budget['I5']
    return [
        Check.at_most("transport/nonlinear cancellation", abs(budget['I1'] + budget['I2']) / scale, tolerance),
        Check.at_most("Ito terms bound", ito, budget['bound_345'] + tolerance),
    ]


def mean_drift_check(trajectory, tolerance=1e-12):
    """|mean(R - S)(t) - mean(R - S)(0)| over the trajectory"""
    means = trajectory.mean_differences()
    return Check.at_most("mean(R - S) conservation", np.max(np.abs(means - means[0])), tolerance)


# ═══════════════════════════════════════════════════════════════════
# MOMENTS
# ═══════════════════════════════════════════════════════════════════

def ensemble_path(job):
    """
    Path functionals of one ensemble member.

    Args:
        job: (config, seed, N)

    Returns:
        (seed, (sup_t E, int D dt)) or (seed, None) after a blow-up
    """
    config, seed, N = job
    try:
        trajectory = simulate(config, config.brownian_path(seed), N=N)
    except BlowUpError as e:
        logger.warning(f"Ensemble path seed={seed} N={N} blew up at t={e.t:.6g}; excluded")
        return seed, None
    energies = trajectory.energies()
    dissipated = trapezoid(trajectory.dissipations(), trajectory.times) if len(trajectory.states) > 1 else 0.0
    return seed, (float(energies.max()), float(dissipated))


def _bootstrap_radius(values, generator, resamples):
    if values.size < 2:
        return 0.0
    idx = generator.integers(0, values.size, size=(resamples, values.size))
    means = values[idx].mean(axis=1)
    low, high = np.quantile(means, [(1 - CONFIDENCE) / 2, (1 + CONFIDENCE) / 2])
    return float((high - low) / 2)


def summarize_ensemble(results, N, nu, ps, bootstrap_seed=0, resamples=200):
    """
    Build an EnsembleSummary from ensemble_path results.

    Raises:
        NumericalFailureError: If fewer than two paths survived
    """
    kept = [(seed, value) for seed, value in results if value is not None]
    blown_up = [seed for seed, value in results if value is None]
    if len(kept) < 2:
        logger.error(f"Only {len(kept)} ensemble paths survived at N={N}")
        raise NumericalFailureError(f"Fewer than two ensemble paths survived at N={N}")
    if blown_up:
        logger.warning(f"{len(blown_up)} blown-up paths excluded at N={N}")
    seeds = [seed for seed, _ in kept]
    sup_energy = np.array([value[0] for _, value in kept])
    dissipation = np.array([value[1] for _, value in kept])

    moments, radii = {}, {}
    for index, p in enumerate(ps):
        generator = SimRNG(bootstrap_seed).sample_generator(index)
        sup_p = sup_energy ** p
        diss_p = nu**p * dissipation ** p
        moments[p] = {'sup_energy': float(sup_p.mean()), 'dissipation': float(diss_p.mean())}
        radii[p] = {'sup_energy': _bootstrap_radius(sup_p, generator, resamples),
                    'dissipation': _bootstrap_radius(diss_p, generator, resamples)}
    return EnsembleSummary(N, seeds, sup_energy, dissipation, moments, radii, blown_up)


def moment_ensemble(config, seeds, p=None, N=None, mapper=map):
    """
    Empirical moments of sup_t E(t) and nu int D dt over an ensemble.

    Args:
        config: SimConfig
        seeds: Brownian seeds (at least 8)
        p: Moment exponent p0 (default config.study.moment_p)
        N: Galerkin order (default config.N)
        mapper: map-like callable used to fan out the paths

    Returns:
        EnsembleSummary with moments for p in {1, 2, p0}
    """
    seeds = list(seeds)
    if len(seeds) < 8:
        raise InvalidArgumentError(f"Moment ensemble needs at least 8 seeds, got {len(seeds)}")
    p = config.study.moment_p if p is None else p
    N = config.N if N is None else N
    ps = sorted({1.0, 2.0, float(p)})
    results = list(mapper(ensemble_path, [(config, seed, N) for seed in seeds]))
    summary = summarize_ensemble(results, N, config.nu, ps, config.seed, config.study.bootstrap)
    logger.info(f"Ensemble N={N}: {summary.path_count} paths, "
                f"E sup E^{p:g} = {summary.moments[float(p)]['sup_energy']:.6g}")
    return summary


def moment_uniformity(summaries, p=2.0, low=0.8, high=1.25):
    """Checks that E sup_t E^p does not grow systematically across successive N"""
    checks = []
    for a, b in zip(summaries, summaries[1:]):
        ratio = b.moments[p]['sup_energy'] / a.moments[p]['sup_energy']
        checks.append(Check.within(f"E sup E^{p:g} ratio N={b.N}/N={a.N}", ratio, low, high))
    return checks


# ═══════════════════════════════════════════════════════════════════
# TIME REGULARITY
# ═══════════════════════════════════════════════════════════════════

def _coefficient_matrix(states, which='R'):
    return np.array([getattr(s, which).coeffs for s in states])


def _parseval_weights(K, kind=None):
    weights = np.full(K + 1, 2.0)
    weights[0] = 1.0
    if kind == 'H_neg3':
        weights = weights * (1.0 + wavenumbers(K) ** 2) ** -3
    return weights


def holder_h_neg3(trajectory, gamma=0.5, min_samples=32):
    """
    Hoelder regularity of t -> R(t) in H^-3.

    Args:
        trajectory: Trajectory with at least min_samples samples
        gamma: Exponent of the reported sup ratio

    Returns:
        (sup ratio, fitted exponent): max over sample pairs of
        ||R(t) - R(s)||_{H^-3} / |t - s|^gamma, and the least-squares slope of
        the RMS increment against the lag (nan when every increment vanishes)
    """
    states = trajectory.states
    n = len(states)
    if n < min_samples:
        raise InvalidArgumentError(f"Hoelder study needs at least {min_samples} samples, got {n}")
    coeffs = _coefficient_matrix(states)
    weights = _parseval_weights(coeffs.shape[1] - 1, 'H_neg3')
    t = trajectory.times

    sup_ratio = 0.0
    lags, rms = [], []
    for lag in range(1, n):
        increments = np.sqrt((np.abs(coeffs[lag:] - coeffs[:-lag]) ** 2) @ weights)
        spans = t[lag:] - t[:-lag]
        sup_ratio = max(sup_ratio, float(np.max(increments / spans**gamma)))
        if lag <= max(2, n // 4):
            lags.append(float(np.mean(spans)))
            rms.append(float(np.sqrt(np.mean(increments**2))))

    rms = np.array(rms)
    mask = rms > 0
    if mask.sum() < 2:
        return sup_ratio, float('nan')
    exponent = float(np.polyfit(np.log(np.array(lags)[mask]), np.log(rms[mask]), 1)[0])
    logger.debug(f"Hoelder H^-3: sup ratio {sup_ratio:.4g}, exponent {exponent:.3f}")
    return sup_ratio, exponent


def _uniform_prefix(states):
    """Leading samples with uniform spacing (drops an off-cadence final sample)"""
    if len(states) < 3:
        return states
    t = np.array([s.t for s in states])
    h = t[1] - t[0]
    uniform = np.isclose(np.diff(t), h, rtol=1e-9, atol=0.0)
    if uniform.all():
        return states
    return states[: int(np.argmin(uniform)) + 1]


def continuity_moduli(trajectory, levels=4, min_samples=256):
    """
    Modulus of continuity of t -> (R, S)(t) in L2 under sampling refinement.

    For spacings 2^(levels-1) h, ..., 2h, h of the stored samples, the
    modulus is max_j ||R(t_{j+1}) - R(t_j)|| + ||S(t_{j+1}) - S(t_j)||.

    Returns:
        DecayTable over the spacing, coarsest first
    """
    states = _uniform_prefix(trajectory.states)
    if len(states) < min_samples:
        raise InvalidArgumentError(f"Continuity check needs at least {min_samples} samples, got {len(states)}")
    weights = _parseval_weights(states[0].K)
    h = states[1].t - states[0].t
    spacings, moduli = [], []
    for level in range(levels - 1, -1, -1):
        stride = 1 << level
        sub_R = _coefficient_matrix(states[::stride], 'R')
        sub_S = _coefficient_matrix(states[::stride], 'S')
        jumps = (np.sqrt((np.abs(np.diff(sub_R, axis=0)) ** 2) @ weights)
                 + np.sqrt((np.abs(np.diff(sub_S, axis=0)) ** 2) @ weights))
        spacings.append(stride * h)
        moduli.append(float(jumps.max()) if jumps.size else 0.0)
    return DecayTable("h", spacings, moduli)


def continuity_checks(table, noisy=True):
    """
    The finest modulus lies below the coarsest; for noisy runs the fitted
    exponent also lies in CONTINUITY_EXPONENT_RANGE.
    """
    coarsest, finest = table.errors[0], table.errors[-1]
    checks = [Check.holds("modulus shrinks under refinement", coarsest == 0 or finest < coarsest, finest)]
    if noisy:
        checks.append(Check.within("modulus exponent (noisy)", table.slope, *CONTINUITY_EXPONENT_RANGE))
    return checks


def continuity_ensemble(tables, noisy=True):
    """
    Mean modulus over paths sampled on one spacing ladder.

    Args:
        tables: continuity_moduli results, one per path
        noisy: Whether the paths were driven by noise

    Returns:
        dict with spacings, mean moduli, fitted exponent, per-path exponents and Checks

    Raises:
        NumericalFailureError: If there is no path
    """
    if not tables:
        raise NumericalFailureError("No continuity path survived")
    spacings = tables[0].parameters
    mean = DecayTable("h", spacings, np.mean([table.errors for table in tables], axis=0))
    logger.info(f"Continuity over {len(tables)} paths: exponent {mean.slope:.3f}")
    return {
        'spacings': spacings.tolist(),
        'moduli': mean.errors.tolist(),
        'exponent': mean.slope,
        'path_exponents': [table.slope for table in tables],
        'checks': continuity_checks(mean, noisy),
    }


def temporal_continuity_check(trajectory, levels=4, min_samples=256):
    """continuity_ensemble of a single trajectory"""
    table = continuity_moduli(trajectory, levels, min_samples)
    return continuity_ensemble([table], noisy=not trajectory.params.sigma.is_zero)


def u_bounds_report(trajectory, speed=None, M=STUDY_GRID):
    """
    Bounds on the reconstructed wave field along a trajectory.

    Checks sup_t ||u||_inf <= kappa sup_t ||R - S||_L1 and
    ||dx u||_L2 <= kappa ||R - S||_L2 / 2 at every sample, and reports
    ||dt u||_{L2_{t,x}} from the noiseless formula next to the finite
    difference of the stored u.
    """
    speed = trajectory.params.speed if speed is None else speed
    kappa = speed.kappa
    M = max(M, fine_grid_size(trajectory.N - 1))
    sup_u, sup_bound = 0.0, 0.0
    worst_gradient = 0.0
    u_values, dt_u = [], []
    for state in trajectory.states:
        u = wave_field(state.R, state.S, speed, M)
        difference = state.R - state.S
        sup_u = max(sup_u, float(np.max(np.abs(u))))
        sup_bound = max(sup_bound, kappa * norm(difference, Norm.L1))
        gradient_bound = kappa * norm(difference) / 2.0
        gradient = grid_l2(grid_derivative(u))
        worst_gradient = max(worst_gradient, gradient - gradient_bound)
        u_values.append(u)
        dt_u.append(time_derivative_u(state.R, state.S, speed, trajectory.params.nu, M).values)

    t = trajectory.times
    formula = np.array([np.mean(v**2) for v in dt_u])
    dt_u_norm = float(np.sqrt(trapezoid(formula, t))) if t.size > 1 else 0.0
    if t.size > 1:
        differences = np.diff(np.array(u_values), axis=0) / np.diff(t)[:, None]
        fd_norm = float(np.sqrt(np.sum(np.mean(differences**2, axis=1) * np.diff(t))))
    else:
        fd_norm = 0.0
    return {
        'sup_u': sup_u,
        'sup_u_bound': sup_bound,
        'dt_u_l2': dt_u_norm,
        'dt_u_l2_finite_difference': fd_norm,
        'checks': [
            Check.at_most("sup |u| <= kappa ||R - S||_L1", sup_u, sup_bound + 1e-12),
            Check.at_most("||dx u|| - kappa ||R - S|| / 2", worst_gradient, 1e-10),
        ],
    }


# ═══════════════════════════════════════════════════════════════════
# COMMUTATORS
# ═══════════════════════════════════════════════════════════════════

def _mollify_values(values, delta):
    """Grid samples convolved with the heat mollifier of width delta"""
    M = len(values)
    return coeffs_to_values(mollify(SpectralField(values_to_coeffs(values)), delta).coeffs, M)


def commutator_study(R, S, speed, deltas, M=None):
    """
    Mollifier commutator errors as delta decreases.

    For u = u(R, S) and u^delta = u(R_delta, S_delta):
        c_dR:     ||c(u^d) dx R_d - (c(u) dx R) * J_d||^2
        ctilde_R: ||c~(u^d)(R_d - S_d) R_d - (c~(u)(R - S) R) * J_d||^2
        c_dS, ctilde_S: the same with S in place of R

    Args:
        R, S: SpectralField invariants with mean(R - S) = 0
        speed: WaveSpeed
        deltas: Strictly decreasing mollifier widths
        M: Collocation grid

    Returns:
        dict of four DecayTables keyed by curve name
    """
    deltas = [float(d) for d in deltas]
    if M is None:
        M = max(STUDY_GRID, fine_grid_size(max(R.K, S.K)))
    u = wave_field(R, S, speed, M)
    R_g, S_g = coeffs_to_values(R.coeffs, M), coeffs_to_values(S.coeffs, M)
    R_x, S_x = coeffs_to_values(derivative(R).coeffs, M), coeffs_to_values(derivative(S).coeffs, M)
    c, c_tilde = speed.c(u), speed.c_tilde(u)
    products = {
        'c_dR': c * R_x,
        'ctilde_R': c_tilde * (R_g - S_g) * R_g,
        'c_dS': c * S_x,
        'ctilde_S': c_tilde * (R_g - S_g) * S_g,
    }
    curves = {name: [] for name in products}
    for delta in deltas:
        R_d, S_d = mollify(R, delta), mollify(S, delta)
        u_d = wave_field(R_d, S_d, speed, M)
        c_d, c_tilde_d = speed.c(u_d), speed.c_tilde(u_d)
        R_dg, S_dg = coeffs_to_values(R_d.coeffs, M), coeffs_to_values(S_d.coeffs, M)
        smoothed = {
            'c_dR': c_d * coeffs_to_values(derivative(R_d).coeffs, M),
            'ctilde_R': c_tilde_d * (R_dg - S_dg) * R_dg,
            'c_dS': c_d * coeffs_to_values(derivative(S_d).coeffs, M),
            'ctilde_S': c_tilde_d * (R_dg - S_dg) * S_dg,
        }
        for name, product in products.items():
            curves[name].append(grid_l2(smoothed[name] - _mollify_values(product, delta)) ** 2)
    return {name: DecayTable("delta", deltas, errors) for name, errors in curves.items()}


def standard_commutator_fields(K=2):
    """R = sin(2 pi x) + 0.3 cos(4 pi x) and S = 0.2 sin(2 pi x), both zero-mean"""
    R = from_modes([("sin", 1, 1.0), ("cos", 2, 0.3)], K)
    S = from_modes([("sin", 1, 0.2)], K)
    return R, S


def commutator_checks(tables):
    """
    Per curve: decrease up to COMMUTATOR_SLACK per step from its peak on,
    a positive fitted slope, and at least COMMUTATOR_DECAY overall.
    Curves may rise at the widest deltas before they decay.
    """
    checks = []
    for name, table in tables.items():
        first, last = table.errors[0], table.errors[-1]
        vanishing = bool(np.all(table.errors == 0))
        checks.append(Check.holds(f"{name} decay after peak",
                                  table.is_decreasing_after_peak(COMMUTATOR_SLACK), last))
        checks.append(Check.holds(f"{name} positive decay slope", vanishing or table.slope > 0,
                                  0.0 if vanishing else table.slope))
        decayed = first == 0 or last <= first / COMMUTATOR_DECAY
        checks.append(Check.holds(f"{name} {COMMUTATOR_DECAY:g}x decay", decayed,
                                  first / last if last > 0 else float('inf')))
    return checks


# ═══════════════════════════════════════════════════════════════════
# DIFFERENCE BOUNDS
# ═══════════════════════════════════════════════════════════════════

def random_pairs(seed, count, K=8, amplitude=1.0):
    """
    Random pairs ((R1, S1), (R2, S2)) of zero-mean fields at log-uniform distances.
    """
    pairs = []
    rng = SimRNG(seed)
    for index in range(count):
        generator = rng.sample_generator(index)
        R1 = random_field(generator, K, amplitude, 1.0, zero_mean=True)
        S1 = random_field(generator, K, amplitude, 1.0, zero_mean=True)
        scale = 10.0 ** generator.uniform(-3.0, 0.0)
        R2 = R1 + scale * random_field(generator, K, amplitude, 1.0, zero_mean=True)
        S2 = S1 + scale * random_field(generator, K, amplitude, 1.0, zero_mean=True)
        pairs.append(((R1, S1), (R2, S2)))
    return pairs


def _h1(f):
    return float(np.sqrt(norm(f) ** 2 + norm(f, Norm.H1_SEMI) ** 2))


def _pair_ratios(pair, speed, M):
    (R1, S1), (R2, S2) = pair
    u1, u2 = wave_field(R1, S1, speed, M), wave_field(R2, S2, speed, M)
    c1, c2 = speed.c(u1), speed.c(u2)
    grid = lambda f: coeffs_to_values(f.coeffs, M)
    dR, dS = R1 - R2, S1 - S2

    lhs_i = float(np.max(np.abs(u1 - u2)))
    rhs_i = speed.kappa * (norm(dR, Norm.L1) + norm(dS, Norm.L1))

    lhs_ii = grid_l2(c1 * grid(R1) - c2 * grid(R2)) + grid_l2(c1 * grid(S1) - c2 * grid(S2))
    rhs_ii = (1 + min(norm(R1), norm(R2)) + min(norm(S1), norm(S2))) * (norm(dR) + norm(dS))

    R1x, R2x, S1x, S2x = (grid(derivative(f)) for f in (R1, R2, S1, S2))
    lhs_iii = grid_l2(c1 * R1x - c2 * R2x) + grid_l2(c1 * S1x - c2 * S2x)
    rhs_iii = ((1 + min(norm(R1, Norm.H1_SEMI), norm(R2, Norm.H1_SEMI))
                + min(norm(S1, Norm.H1_SEMI), norm(S2, Norm.H1_SEMI))) * (_h1(dR) + _h1(dS)))

    ratio = lambda lhs, rhs: lhs / rhs if rhs > 0 else 0.0
    return lhs_i - rhs_i, ratio(lhs_ii, rhs_ii), ratio(lhs_iii, rhs_iii)


def difference_bound_check(pairs, speed, margin=0.2, M=STUDY_GRID):
    """
    Difference bounds for the reconstruction and speed products.

    (i)   ||u1 - u2||_inf <= kappa (||R1 - R2||_L1 + ||S1 - S2||_L1), explicit constant
    (ii)  ||c(u1)R1 - c(u2)R2|| + (S) <= C (1 + min||R|| + min||S||)(||dR|| + ||dS||)
    (iii) the same with dx R, dx S and H1 differences

    For (ii) and (iii), C is the largest ratio on the first half of the pairs
    (calibration) and is asserted with the given margin on the second half.

    Args:
        pairs: List of ((R1, S1), (R2, S2)), at least 2
        speed: WaveSpeed

    Returns:
        dict with fitted constants, violation counts and Checks
    """
    if len(pairs) < 2:
        raise InvalidArgumentError("Difference bound check needs at least two pairs")
    M = max(M, fine_grid_size(max(pair[0][0].K for pair in pairs)))
    rows = np.array([_pair_ratios(pair, speed, M) for pair in pairs])
    split = len(pairs) // 2
    calibration, test = rows[:split], rows[split:]

    excess_i = rows[:, 0]
    constants = {'ii': float(calibration[:, 1].max()), 'iii': float(calibration[:, 2].max())}
    violations = {
        'i': int(np.sum(excess_i > 1e-12)),
        'ii': int(np.sum(test[:, 1] > constants['ii'] * (1 + margin))),
        'iii': int(np.sum(test[:, 2] > constants['iii'] * (1 + margin))),
    }
    checks = [
        Check.at_most("(i) sup-norm difference bound", float(excess_i.max()), 1e-12),
        Check.at_most("(ii) product difference bound", float(test[:, 1].max()), constants['ii'] * (1 + margin)),
        Check.at_most("(iii) derivative product bound", float(test[:, 2].max()), constants['iii'] * (1 + margin)),
    ]
    logger.info(f"Difference bounds over {len(pairs)} pairs: violations {violations}")
    return {'constants': constants, 'violations': violations, 'checks': checks}


# ═══════════════════════════════════════════════════════════════════
# CONVERGENCE
# ═══════════════════════════════════════════════════════════════════

def _sup_distance(a, b):
    """sup over common samples of ||R_a - R_b|| + ||S_a - S_b||"""
    return max(norm(sa.R - sb.R) + norm(sa.S - sb.S) for sa, sb in zip(a.states, b.states))


def shared_noise_convergence(config, resolutions=None, seed=None):
    """
    Cauchy differences of Galerkin solutions driven by one Brownian path.

    Args:
        config: SimConfig
        resolutions: Strictly increasing Galerkin orders (default config.study.resolutions)
        seed: Brownian seed (default config.seed)

    Returns:
        DecayTable over 1/N of sup_t (||R_N' - R_N|| + ||S_N' - S_N||) for successive N < N'
    """
    resolutions = list(config.study.resolutions if resolutions is None else resolutions)
    if len(resolutions) < 2 or any(b <= a for a, b in zip(resolutions, resolutions[1:])):
        raise InvalidArgumentError(f"Resolutions must strictly increase: {resolutions}")
    path = config.brownian_path(seed)
    trajectories = [simulate(config, path, N=N) for N in resolutions]
    differences = [_sup_distance(a, b) for a, b in zip(trajectories, trajectories[1:])]
    return DecayTable("1/N", 1.0 / np.array(resolutions[:-1], dtype=float), differences)


def convergence_path(job):
    """(seed, errors) of shared_noise_convergence for one seed, None after a blow-up"""
    config, seed, resolutions = job
    try:
        return seed, shared_noise_convergence(config, resolutions, seed).errors.tolist()
    except BlowUpError as e:
        logger.warning(f"Convergence path seed={seed} blew up at t={e.t:.6g}; excluded")
        return seed, None


def convergence_batch(config, seeds, resolutions=None, mapper=map, fraction=0.9):
    """
    Shared-noise convergence over several seeds.

    Returns:
        dict with per-seed curves, median curve and Checks: strict decrease for
        at least `fraction` of seeds, strictly decreasing median, final median
        at most a quarter of the first
    """
    resolutions = tuple(config.study.resolutions if resolutions is None else resolutions)
    results = list(mapper(convergence_path, [(config, seed, resolutions) for seed in seeds]))
    curves = {seed: errors for seed, errors in results if errors is not None}
    if not curves:
        raise NumericalFailureError("Every convergence path blew up")
    matrix = np.array(list(curves.values()))
    decreasing = float(np.mean([np.all(np.diff(row) < 0) for row in matrix]))
    median = np.median(matrix, axis=0)
    checks = [
        Check.at_least("seeds with strictly decreasing differences", decreasing, fraction),
        Check.holds("median differences strictly decrease", bool(np.all(np.diff(median) < 0)), median[-1]),
    ]
    if median.size >= 2:
        checks.append(Check.at_most("final / first median difference", median[-1] / median[0], 0.25))
    return {
        'resolutions': list(resolutions),
        'curves': {str(seed): errors for seed, errors in curves.items()},
        'median': median.tolist(),
        'blown_up': [seed for seed, errors in results if errors is None],
        'checks': checks,
    }


def strong_order_study(config, seeds, levels=3, reference_levels=3):
    """
    Strong error at T against a fine-step reference on refined Brownian paths.

    Step sizes dt, dt/2, ..., dt/2^(levels-1); the reference uses
    dt/2^(levels-1+reference_levels). The error is the root mean square over
    seeds of ||R - R_ref|| + ||S - S_ref|| at T.

    Euler-Maruyama has strong order 1/2 for this multiplicative transport
    noise, so halving dt divides the error by about sqrt(2), not by 2.

    Returns:
        DecayTable over dt
    """
    finest = levels - 1 + reference_levels
    steps = [config.dt / (1 << j) for j in range(levels)]
    squared = np.zeros(levels)
    for seed in seeds:
        path = config.brownian_path(seed, extra_levels=finest)
        reference_dt = config.dt / (1 << finest)
        n_ref = config.step_count() << finest
        reference = simulate(config, path, dt=reference_dt, cadence=max(n_ref, 1)).final
        for j, dt in enumerate(steps):
            final = simulate(config, path, dt=dt, cadence=max(config.step_count() << j, 1)).final
            squared[j] += (norm(final.R - reference.R) + norm(final.S - reference.S)) ** 2
    errors = np.sqrt(squared / max(len(seeds), 1))
    return DecayTable("dt", steps, errors)


# ═══════════════════════════════════════════════════════════════════
# CUT-OFF EQUIVALENCE
# ═══════════════════════════════════════════════════════════════════

def _first_crossing(trajectory, k):
    for state, energy_value in zip(trajectory.states, trajectory.energies()):
        if energy_value >= k:
            return state.t
    return None


def stopping_level(trajectory):
    """
    A level k crossed strictly after t = 0 by a cadence-1 trajectory, with
    ||R||, ||S|| <= k at every step before the crossing, so that the cut-off
    run at level k coincides with the trajectory up to its stopping time.

    Tries the midpoint between E(0) and the peak of E over t > 0, then the
    midpoint between max(E(0), 1) and that peak.

    Returns:
        k, or None when no such level exists
    """
    energies = trajectory.energies()
    if energies.size < 2:
        return None
    start, peak = float(energies[0]), float(energies[1:].max())
    norm_R, norm_S = trajectory.norms()
    largest = np.maximum(norm_R, norm_S)
    for low in (start, max(start, 1.0)):
        k = 0.5 * (low + peak)
        if not start < k < peak:
            continue
        crossing = int(np.argmax(energies >= k))
        if np.all(largest[:crossing] <= k):
            return k
    return None


def energy_growth_scenario(state, params, energy=2.0):
    """
    Inviscid, noiseless copy of a run with the initial data scaled to
    E(0) = energy. Transport and nonlinearity cancel in the energy, so each
    explicit step raises E by dt^2 ||drift||^2 and every level between E(0)
    and E(T) is crossed after t = 0.

    Returns:
        (state, params), or None when the initial data vanish
    """
    E0, _ = _state_energy(state)
    if E0 == 0:
        return None
    scale = np.sqrt(energy / E0)
    scaled = state.with_fields(state.t, state.R * scale, state.S * scale)
    return scaled, SdeParams(0.0, params.speed, oversample=params.oversample)


def stopping_comparison(state, params, dt, w_values, k=None, limit=None):
    """
    Recorded stopping time of the cut-off run at level k against the first
    step at which the limit run has ||R||^2 + ||S||^2 >= k.

    Args:
        state: Initial SystemState
        params: SdeParams of the limit system
        dt: Step size
        w_values: W at the step times
        k: Level (default: stopping_level of the limit run)
        limit: Cadence-1 limit trajectory already run from state, if any

    Returns:
        dict with k, both stopping times and a Check; None when no level is given
        and the limit run admits none
    """
    if limit is None:
        limit = integrate(state, params.without_cutoff(), dt, w_values, cadence=1)
    k = stopping_level(limit) if k is None else k
    if k is None:
        return None
    expected = _first_crossing(limit, k)
    recorded = integrate(state, params.with_cutoff(k), dt, w_values, cadence=1).stopping_time
    agree = expected is not None and recorded is not None and abs(expected - recorded) < 0.5 * dt
    return {
        'k': k,
        'stopping_time_limit': expected,
        'stopping_time_cutoff': recorded,
        'check': Check.holds("stopping time matches first crossing", agree,
                             measured=recorded if recorded is not None else -1.0),
    }


def cutoff_equivalence(config, path, k_large=1e6, k_small=None, tolerance=1e-10,
                       scenario_steps=SCENARIO_STEPS):
    """
    Compare cut-off and divergence-form runs on the same Brownian path.

    With k_large above the trajectory's norms the two runs must agree to
    `tolerance` in sup_t L2. With k_small (default: stopping_level of the
    limit run) the cut-off run's recorded stopping time must equal the first
    step at which the limit run has ||R||^2 + ||S||^2 >= k_small. When the
    configured run admits no such level, the comparison runs on
    energy_growth_scenario over at most scenario_steps steps instead.

    Returns:
        dict with distance, stopping level and times, the source of the
        stopping comparison and Checks
    """
    params = config.sde_params(with_cutoff=False)
    state = config.initial_state()
    n = config.step_count()
    w_values = sample_values(path, config.dt, n)

    limit = integrate(state, params, config.dt, w_values, cadence=1)
    cut = integrate(state, params.with_cutoff(k_large), config.dt, w_values, cadence=1)
    distance = _sup_distance(limit, cut)
    checks = [Check.at_most("cut-off vs limit sup_t L2 distance", distance, tolerance)]

    source = 'configured run'
    stopping = stopping_comparison(state, params, config.dt, w_values, k_small, limit)
    if stopping is None:
        logger.info("Configured run crosses no admissible stopping level; using the energy-growth scenario")
        source = 'energy-growth scenario'
        scenario = energy_growth_scenario(state, params)
        steps = min(n, scenario_steps)
        if scenario is not None and steps > 0:
            stopping = stopping_comparison(*scenario, config.dt, np.zeros(steps + 1))
    if stopping is None:
        logger.warning("No stopping level could be compared")
        source = None
    else:
        checks.append(stopping.pop('check'))
    stopping = stopping or {}
    return {
        'k_large': k_large,
        'k_small': stopping.get('k'),
        'distance': distance,
        'stopping_source': source,
        'stopping_time_limit': stopping.get('stopping_time_limit'),
        'stopping_time_cutoff': stopping.get('stopping_time_cutoff'),
        'checks': checks,
    }


def trajectory_checks(trajectory, energy_tolerance=5e-3):
    """Checks run on every trajectory: mean conservation, plus the energy identity when noiseless"""
    checks = []
    if trajectory.params.cutoff_k is None:
        checks.append(mean_drift_check(trajectory))
    if trajectory.params.sigma.is_zero:
        checks.append(Check.at_most("noiseless energy identity", energy_identity_report(trajectory),
                                    energy_tolerance))
    return checks


# ═══════════════════════════════════════════════════════════════════
# LINEAR CASE
# ═══════════════════════════════════════════════════════════════════

def linear_exact_state(state, c0, nu, t):
    """
    Exact noiseless solution for constant speed c0: per mode
    R(k, t) = e^{(-nu (2 pi k)^2 + 2 pi i k c0) t} R(k, 0), S with -c0.
    """
    k = wavenumbers(state.K)
    elapsed = t - state.t
    R = state.R.coeffs * np.exp((-nu * k**2 + 1j * c0 * k) * elapsed)
    S = state.S.coeffs * np.exp((-nu * k**2 - 1j * c0 * k) * elapsed)
    return state.with_fields(t, SpectralField(R), SpectralField(S))


def linear_exact_error(trajectory):
    """
    sup_t L2 distance to the exact constant-speed solution, with its
    first-order Euler bound T dt (c0 2 pi k_max)^2 (||R0|| + ||S0||).

    Raises:
        InvalidArgumentError: Unless the run is noiseless with constant speed
    """
    params = trajectory.params
    c0 = getattr(params.speed, 'c0', None)
    if c0 is None or not params.sigma.is_zero:
        raise InvalidArgumentError("Exact comparison needs a constant speed and sigma = 0")
    start = trajectory.states[0]
    error = 0.0
    for state in trajectory.states:
        exact = linear_exact_state(start, c0, params.nu, state.t)
        error = max(error, norm(state.R - exact.R) + norm(state.S - exact.S))
    active = np.nonzero((np.abs(start.R.coeffs) > 0) | (np.abs(start.S.coeffs) > 0))[0]
    k_max = 2 * np.pi * (active.max() if active.size else 0)
    horizon = trajectory.final.t - start.t
    bound = horizon * trajectory.dt * (c0 * k_max) ** 2 * (norm(start.R) + norm(start.S))
    return float(error), float(bound)
