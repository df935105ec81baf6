"""
Experiment Orchestration
Subcommands that run simulations and studies, fan paths out to workers and
persist reports, CSV curves and manifests
"""
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import replace
from enum import Enum

import numpy as np

from . import diagnostics
from .config import SigmaConfig
from .errors import BlowUpError, SimulationError
from .integrator import simulate
from .logger import get_logger, log_exception, log_performance, log_run_end, log_run_start
from .persistence import ResultStore
from .timing import Stopwatch

logger = get_logger(__name__)


class Subcommand(Enum):
    """Experiments available from the command line"""
    SIMULATE = "simulate"
    ENSEMBLE = "ensemble"
    ENERGY_CHECK = "energy-check"
    COMMUTATOR_STUDY = "commutator-study"
    CONVERGENCE_STUDY = "convergence-study"
    CUTOFF_CHECK = "cutoff-check"
    HOLDER_STUDY = "holder-study"
    CONTINUITY_STUDY = "continuity-study"

    def __str__(self):
        return self.value


# Samples targeted by the continuity study
CONTINUITY_SAMPLES = 1024

# Samples fed to the u-bounds report
U_BOUND_SAMPLES = 64

# Accepted Hoelder exponents for noisy and noiseless runs
NOISY_EXPONENT_RANGE = (0.4, 0.65)
SMOOTH_EXPONENT_MIN = 0.9


@contextmanager
def worker_map(workers):
    """
    map-like callable: inline for one worker, a process pool otherwise.
    Results come back in submission order either way.
    """
    if workers is None or workers <= 1:
        yield map
        return
    with ProcessPoolExecutor(max_workers=workers) as pool:
        yield pool.map


def study_seeds(config):
    """Seeds of the study paths: config.seed, config.seed + 1, ..."""
    return [config.seed + i for i in range(config.study.paths)]


# ═══════════════════════════════════════════════════════════════════
# SUBCOMMANDS
# ═══════════════════════════════════════════════════════════════════

def run_simulate(config, store, mapper):
    """One trajectory on the configured path"""
    trajectory = simulate(config, config.brownian_path())
    store.write_trajectory(Subcommand.SIMULATE, "trajectory", trajectory)
    store.write_snapshot(Subcommand.SIMULATE, "R_final", trajectory.final.R)
    store.write_snapshot(Subcommand.SIMULATE, "S_final", trajectory.final.S)
    store.write_field_csv(Subcommand.SIMULATE, "R_final", trajectory.final.R)
    store.write_field_csv(Subcommand.SIMULATE, "S_final", trajectory.final.S)

    checks = diagnostics.trajectory_checks(trajectory, config.study.energy_tolerance)
    if trajectory.params.cutoff_k is None:
        checks.extend(diagnostics.energy_budget_check(trajectory.final, trajectory.params))
    E, D = diagnostics.energy(trajectory.final)
    results = {
        'samples': len(trajectory.states),
        'final_time': trajectory.final.t,
        'final_energy': E,
        'final_dissipation': D,
        'stopping_time': trajectory.stopping_time,
    }
    return results, checks


def run_ensemble(config, store, mapper):
    """Moments of sup E and nu int D over shared seeds at every study resolution"""
    seeds = study_seeds(config)
    summaries = [diagnostics.moment_ensemble(config, seeds, N=N, mapper=mapper)
                 for N in config.study.resolutions]

    path_rows, moment_rows = [], []
    checks = []
    for summary in summaries:
        for seed, sup_energy, dissipation in zip(summary.seeds, summary.sup_energy, summary.dissipation):
            path_rows.append((summary.N, seed, sup_energy, dissipation))
        for p in sorted(summary.moments):
            moment, radius = summary.moments[p], summary.radii[p]
            moment_rows.append((summary.N, p, moment['sup_energy'], radius['sup_energy'],
                                moment['dissipation'], radius['dissipation']))
        checks.append(diagnostics.Check.holds(f"Lyapunov monotone moments N={summary.N}",
                                              summary.lyapunov_monotone()))
    checks.extend(diagnostics.moment_uniformity(summaries))

    store.write_csv(Subcommand.ENSEMBLE, "paths", ('N', 'seed', 'sup_energy', 'dissipation'), path_rows)
    store.write_csv(Subcommand.ENSEMBLE, "moments",
                    ('N', 'p', 'sup_energy', 'sup_energy_radius', 'dissipation', 'dissipation_radius'),
                    moment_rows)
    return {'summaries': [s.to_dict() for s in summaries]}, checks


def run_energy_check(config, store, mapper):
    """Noiseless energy identity, halving under dt halving, exact solution for constant speed"""
    if config.sigma.preset != 'constant' or any(config.sigma.params):
        logger.info("energy-check runs noiseless: sigma forced to 0")
    config = replace(config, sigma=SigmaConfig('constant', (0.0,)))
    trajectory = simulate(config, config.brownian_path())
    residuals = diagnostics.energy_identity_residuals(trajectory)
    residual = float(residuals.max()) if residuals.size else 0.0

    refined = simulate(config, config.brownian_path(extra_levels=1), dt=config.dt / 2,
                       cadence=2 * config.sample_cadence)
    refined_residual = diagnostics.energy_identity_report(refined)

    store.write_trajectory(Subcommand.ENERGY_CHECK, "trajectory", trajectory)
    store.write_csv(Subcommand.ENERGY_CHECK, "residuals", ('t', 'residual'),
                    zip(trajectory.times[1:], residuals))

    checks = [diagnostics.Check.at_most("noiseless energy identity", residual,
                                        config.study.energy_tolerance)]
    results = {'residual': residual, 'residual_half_dt': refined_residual}
    if residual > 0 and refined_residual > 0:
        results['halving_ratio'] = residual / refined_residual
        checks.append(diagnostics.Check.at_least("residual ratio under dt halving",
                                                 results['halving_ratio'], 1.5))
    if config.speed.preset == 'constant':
        error, bound = diagnostics.linear_exact_error(trajectory)
        results['exact_error'] = error
        checks.append(diagnostics.Check.at_most("exact-solution L2 error", error, bound + 1e-14))
    return results, checks


def run_commutator_study(config, store, mapper):
    """Commutator decay on the standard fields and difference bounds on random pairs"""
    R, S = diagnostics.standard_commutator_fields()
    speed = config.speed_for()
    tables = diagnostics.commutator_study(R, S, speed, config.study.deltas)
    names = sorted(tables)
    rows = [(delta,) + tuple(tables[name].errors[j] for name in names)
            for j, delta in enumerate(config.study.deltas)]
    store.write_csv(Subcommand.COMMUTATOR_STUDY, "commutators", ('delta',) + tuple(names), rows)

    pairs = diagnostics.random_pairs(config.seed, config.study.pairs)
    bounds = diagnostics.difference_bound_check(pairs, speed, config.study.margin)
    checks = diagnostics.commutator_checks(tables) + bounds['checks']
    results = {
        'curves': {name: table.to_dict() for name, table in tables.items()},
        'difference_constants': bounds['constants'],
        'difference_violations': bounds['violations'],
    }
    return results, checks


def run_convergence_study(config, store, mapper):
    """Shared-noise Cauchy differences over the study resolutions"""
    batch = diagnostics.convergence_batch(config, study_seeds(config), mapper=mapper)
    resolutions = batch['resolutions']
    rows = []
    for seed, errors in batch['curves'].items():
        for N, error in zip(resolutions, errors):
            rows.append((seed, N, error))
    store.write_csv(Subcommand.CONVERGENCE_STUDY, "differences", ('seed', 'N', 'difference'), rows)
    store.write_csv(Subcommand.CONVERGENCE_STUDY, "median", ('N', 'difference'),
                    zip(resolutions, batch['median']))
    checks = batch.pop('checks')
    return batch, checks


def run_cutoff_check(config, store, mapper):
    """Cut-off and limit runs on the same path"""
    report = diagnostics.cutoff_equivalence(config, config.brownian_path())
    checks = report.pop('checks')
    store.write_csv(Subcommand.CUTOFF_CHECK, "stopping",
                    ('source', 'k', 'stopping_time_limit', 'stopping_time_cutoff'),
                    [(report['stopping_source'], report['k_small'], report['stopping_time_limit'],
                      report['stopping_time_cutoff'])])
    return report, checks


def holder_path(job):
    """(seed, (sup ratio, exponent)) of one Hoelder run, None after a blow-up"""
    config, seed = job
    try:
        trajectory = simulate(config, config.brownian_path(seed))
    except BlowUpError as e:
        logger.warning(f"Hoelder path seed={seed} blew up at t={e.t:.6g}; excluded")
        return seed, None
    return seed, diagnostics.holder_h_neg3(trajectory, config.study.gamma)


def run_holder_study(config, store, mapper):
    """Hoelder exponent of R in H^-3 over the study seeds"""
    results = list(mapper(holder_path, [(config, seed) for seed in study_seeds(config)]))
    kept = [(seed, value) for seed, value in results if value is not None]
    store.write_csv(Subcommand.HOLDER_STUDY, "exponents", ('seed', 'sup_ratio', 'exponent'),
                    [(seed, ratio, exponent) for seed, (ratio, exponent) in kept])
    exponents = np.array([exponent for _, (_, exponent) in kept], dtype=float)
    finite = exponents[np.isfinite(exponents)]
    median = float(np.median(finite)) if finite.size else float('nan')

    if config.sigma_profile.is_zero:
        checks = [diagnostics.Check.at_least("median exponent (noiseless)", median, SMOOTH_EXPONENT_MIN)]
    else:
        checks = [diagnostics.Check.within("median exponent (noisy)", median, *NOISY_EXPONENT_RANGE)]
    return {
        'median_exponent': median,
        'sup_ratio': max((ratio for _, (ratio, _) in kept), default=0.0),
        'blown_up': [seed for seed, value in results if value is None],
    }, checks


def continuity_path(job):
    """(seed, continuity moduli) of one run, None after a blow-up"""
    config, seed = job
    cadence = max(1, config.step_count() // CONTINUITY_SAMPLES)
    try:
        trajectory = simulate(config, config.brownian_path(seed), cadence=cadence)
    except BlowUpError as e:
        logger.warning(f"Continuity path seed={seed} blew up at t={e.t:.6g}; excluded")
        return seed, None
    return seed, diagnostics.continuity_moduli(trajectory, config.study.continuity_levels)


def run_continuity_study(config, store, mapper):
    """Mean modulus of continuity over the study seeds, and bounds on u along the configured path"""
    results = list(mapper(continuity_path, [(config, seed) for seed in study_seeds(config)]))
    kept = [(seed, table) for seed, table in results if table is not None]
    continuity = diagnostics.continuity_ensemble([table for _, table in kept],
                                                 noisy=not config.sigma_profile.is_zero)
    continuity['blown_up'] = [seed for seed, table in results if table is None]
    store.write_csv(Subcommand.CONTINUITY_STUDY, "modulus", ('spacing', 'mean_modulus'),
                    zip(continuity['spacings'], continuity['moduli']))
    store.write_csv(Subcommand.CONTINUITY_STUDY, "path_moduli", ('seed', 'spacing', 'modulus'),
                    [(seed, h, modulus) for seed, table in kept for h, modulus in table.rows()])

    cadence = max(1, config.step_count() // U_BOUND_SAMPLES)
    bounds = diagnostics.u_bounds_report(simulate(config, config.brownian_path(), cadence=cadence))
    checks = continuity.pop('checks') + bounds.pop('checks')
    return {'continuity': continuity, 'u_bounds': bounds}, checks


RUNNERS = {
    Subcommand.SIMULATE: run_simulate,
    Subcommand.ENSEMBLE: run_ensemble,
    Subcommand.ENERGY_CHECK: run_energy_check,
    Subcommand.COMMUTATOR_STUDY: run_commutator_study,
    Subcommand.CONVERGENCE_STUDY: run_convergence_study,
    Subcommand.CUTOFF_CHECK: run_cutoff_check,
    Subcommand.HOLDER_STUDY: run_holder_study,
    Subcommand.CONTINUITY_STUDY: run_continuity_study,
}


def run(subcommand, config, workers=1):
    """
    Run one subcommand and persist its artifacts.

    The report is written even when the run fails; the worker count changes
    wall time only.

    Args:
        subcommand: Subcommand or its name
        config: Validated SimConfig
        workers: Worker processes for path fan-out

    Returns:
        Exit status: 0 when every check passed, 1 otherwise
    """
    subcommand = Subcommand(str(subcommand))
    store = ResultStore(config.output_dir)
    store.write_manifest(subcommand, config, {'study_seeds': study_seeds(config)})
    log_run_start(logger, subcommand, config)
    watch = Stopwatch()

    results, checks, error = {}, [], None
    try:
        with worker_map(workers) as mapper:
            results, checks = RUNNERS[subcommand](config, store, mapper)
    except SimulationError as e:
        log_exception(logger, e, f"{subcommand} failed")
        error = {'type': type(e).__name__, 'message': str(e)}
        if isinstance(e, BlowUpError):
            error.update({'t': e.t, 'norm': e.norm})

    failed = [c for c in checks if not c.passed]
    passed = error is None and not failed
    for check in failed:
        logger.warning(f"Check failed: {check.name} (measured {check.measured:.6g}, bound {check.bound})")
    report = {
        'passed': passed,
        'checks': [c.to_dict() for c in checks],
        'results': results,
        'error': error,
    }
    store.write_report(subcommand, report)
    log_performance(logger, f"{subcommand}", watch.elapsed_ms())
    log_run_end(logger, subcommand, passed, len(failed))
    return 0 if passed else 1
