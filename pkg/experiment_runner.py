"""
Experiment runner: solve pipelines, diagnostics checks and parameter sweeps
"""
import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from config import Config
from diagnostics import (existence_check, exterior_decay, exterior_mass, flux, localized_flux_fraction, pohozaev,
                         uniqueness_probe)
from errors import CheckFailed, ConfigInvalid, NonTopologicalBranch, SolveFailed, VortexLabError
from experiment_loader import ExperimentConfig
from monotone_solver import (Classification, SolveReport, build_subsolution, classify_dichotomy, epsilon_monotonicity,
                             maximal_solve)
from newton_solver import LinearizedOperator, newton_solve, smallest_eigenvalue
from perturbative import Cutoff, PerturbativeProblem, contraction_solve, rescaled_compare
from radial_planar import beta_table, find_topological_threshold, planar_multivortex_solve, shoot, threshold_profile
from results_recorder import ResultsRecorder
from torus_field import Field, integrate
from vortex_background import VortexConfiguration, build_background, min_image

logger = logging.getLogger(__name__)


def with_separation(cfg: VortexConfiguration, separation: float) -> VortexConfiguration:
    """Move the first two vortices to distance separation * eps about their midpoint"""
    if len(cfg.points) < 2:
        raise ValueError("separation sweeps need at least two vortices")
    p1, p2 = cfg.positions[0], cfg.positions[1]
    d = min_image(p2 - p1)
    length = float(np.hypot(*d))
    direction = d / length if length > 0 else np.array([1.0, 0.0])
    mid = p1 + 0.5 * d
    half = 0.5 * separation * cfg.epsilon * direction
    points = [tuple(mid - half), tuple(mid + half)] + list(cfg.points[2:])
    return VortexConfiguration(points=points, multiplicities=cfg.multiplicities, epsilon=cfg.epsilon)


def report_from_smooth(v: Field, bg, eps, solver, diagnostics=None) -> SolveReport:
    """Wrap a smooth variable v as a classified SolveReport"""
    report = SolveReport(
        u=Field(v.grid, bg.u0.values + v.values),
        v=v,
        mean_d=integrate(v),
        residual_history=[],
        classification=Classification.NOT_CONVERGED,
        diagnostics=dict(diagnostics or {}),
        background=bg,
        epsilon=eps,
        solver=solver,
    )
    report.classification = classify_dichotomy(report, bg)
    return report


class ExperimentRunner:
    """Run one experiment: solve, check, record"""

    def __init__(self, experiment: ExperimentConfig, recorder: ResultsRecorder = None, workers=None, command=None):
        self.experiment = experiment
        self.recorder = recorder or ResultsRecorder(experiment.output_path())
        self.workers = workers or Config.WORKERS
        self.command = command
        self.grid = experiment.grid

    # Solve pipelines

    def solve_point(self, cfg: VortexConfiguration):
        """
        Solve one configuration with the experiment's solver

        Returns:
            (background, SolveReport, extras) where extras holds solver-specific outputs
        """
        exp = self.experiment
        bg = build_background(cfg, self.grid)
        eps = cfg.epsilon
        extras = {}
        if exp.solver == 'monotone':
            report = maximal_solve(cfg, bg, exp.monotone)
        elif exp.solver == 'newton':
            if exp.newton.start == 'maximal' and cfg.N > 0:
                v0 = maximal_solve(cfg, bg, exp.monotone).v
            else:
                v0 = Field.zeros(self.grid)
            report = newton_solve(v0, bg, eps, exp.newton)
            if report.classification != Classification.TOPOLOGICAL:
                raise NonTopologicalBranch(
                    f"Newton from the {exp.newton.start} start converged to a {report.classification.value} solution",
                    {'start': exp.newton.start, 'classification': report.classification.value,
                     'mean_d': report.mean_d,
                     'sup_u_outside_cores': report.diagnostics.get('sup_u_outside_cores')},
                )
        else:
            state, bg, report = self.construct_point(eps)
            extras['state'] = state
        return bg, report, extras

    def construct_point(self, eps):
        """Planar solve, transplant and contraction at one eps"""
        exp = self.experiment
        block = exp.perturbative
        planar = planar_multivortex_solve(exp.planar_vortices(), R=block.planar_half_width, n=block.planar_n)
        problem = PerturbativeProblem(planar, eps, self.grid, block.center, Cutoff(delta=block.delta), block.power)
        state = contraction_solve(problem, tol=block.tol, seed=exp.seed)
        cfg = problem.torus_configuration()
        bg = build_background(cfg, self.grid)
        report = report_from_smooth(state.torus_smooth(bg), bg, eps, 'perturbative', state.diagnostics)
        radius = block.compare_radius or block.delta
        state.diagnostics['rescaled_sup_diff'] = rescaled_compare(state, planar, eps, radius, problem.center)
        state.diagnostics['planar_decay_fit'] = list(planar.decay_fit)
        return state, bg, report

    # Checks

    def run_checks(self, cfg, bg, report):
        """
        Evaluate the requested diagnostics.

        Returns:
            (rows, results) with one row per check: name, value, tolerance, passed
        """
        exp = self.experiment
        block = exp.checks
        eps = cfg.epsilon
        rows, results = [], {}

        def add(name, value, tolerance, passed):
            rows.append({'check': name, 'value': value, 'tolerance': tolerance, 'passed': bool(passed)})

        for name in exp.diagnostics:
            try:
                if name == 'flux':
                    value = flux(report, bg, eps)
                    target = 4.0 * np.pi * cfg.N
                    error = abs(value - target) / target if target else abs(value)
                    results['flux'] = value
                    add(name, value, Config.FLUX_TOL, error <= Config.FLUX_TOL)
                elif name == 'localized_flux':
                    value = localized_flux_fraction(report, block.localized_radius_factor, bg)
                    results['localized_flux_fraction'] = value
                    add(name, value, 0.99, value >= 0.99)
                elif name == 'pohozaev':
                    if cfg.N == 0:
                        continue
                    result = pohozaev(report, bg, eps, block.pohozaev_radius_factor, block.pohozaev_cluster)
                    results['pohozaev'] = result.to_row()
                    self.recorder.write_csv('pohozaev.csv', [result.to_row()])
                    add(name, result.gap, Config.POHOZAEV_TOL, result.gap <= Config.POHOZAEV_TOL)
                elif name == 'exterior_decay':
                    table = exterior_decay(report, eps, block.decay_radii, bg)
                    results['exterior_decay'] = table
                    self.recorder.write_csv('exterior_decay.csv', table['rows'])
                    add(name, table['rate'], None, table['decreasing'])
                elif name == 'exterior_mass':
                    table = exterior_mass(report, block.mass_radius_factors, bg)
                    results['exterior_mass'] = table
                    self.recorder.write_csv('exterior_mass.csv', table['rows'])
                    add(name, table['rows'][-1]['mass'], None, table['monotone'])
                elif name == 'uniqueness':
                    multistart = uniqueness_probe(cfg, bg, eps, block.uniqueness_trials, exp.seed, exp.monotone,
                                                  exp.newton, self.workers)
                    results['uniqueness'] = multistart.summary()
                    self.recorder.write_csv('uniqueness.csv', multistart.trials)
                    ok = multistart.verdict.value == 'Unique' and (multistart.lambda_min or 0.0) > 0
                    add(name, multistart.max_deviation, Config.UNIQUENESS_TOL, ok)
                elif name == 'spectrum':
                    lam, _ = smallest_eigenvalue(LinearizedOperator.at_solution(report.v, bg, eps))
                    results['lambda_min'] = lam
                    add(name, lam, 0.0, lam > 0)
                elif name == 'existence':
                    info = existence_check(cfg)
                    results['existence'] = info
                    add(name, info['critical_epsilon'], eps, not info['above_bound'])
                elif name == 'subsolution':
                    if cfg.N == 0:
                        continue
                    sub = build_subsolution(cfg, self.grid, bg=bg)
                    margin = float(np.min(report.v.values - sub.w0.values))
                    results['subsolution_margin'] = margin
                    add(name, margin, -1e-8, margin >= -1e-8)
                elif name == 'epsilon_monotonicity':
                    epsilons = block.monotonicity_epsilons or exp.epsilons
                    outcome = epsilon_monotonicity(cfg, self.grid, epsilons, exp.monotone)
                    results['epsilon_monotonicity'] = outcome
                    add(name, outcome['worst_violation'], 1e-6, outcome['monotone'])
            except VortexLabError as e:
                logger.error(f"Check '{name}' could not run: {e}")
                results[name] = {'error': str(e)}
                add(name, None, None, False)
        return rows, results

    # Entry points

    def _base_summary(self, cfg):
        return {
            'experiment': self.experiment.name,
            'solver': self.experiment.solver,
            'n': self.grid.n,
            'epsilon': cfg.epsilon,
            'N': cfg.N,
            'vortices': [list(p) for p in cfg.points],
            'multiplicities': list(cfg.multiplicities),
            'seed': self.experiment.seed,
        }

    def _finish(self, summary):
        self.recorder.write_summary(summary)
        self.recorder.write_manifest(self.experiment.config_hash(), self.experiment.seed, self.command)
        stats = self.recorder.get_statistics()
        logger.info(f"Wrote {stats['total']} outputs to {stats['output_dir']}: {stats['by_kind']}")

    def run(self):
        """
        Run the experiment (a sweep when several eps values or a sweep block are given)

        Returns:
            summary dict

        Raises:
            SolveFailed: the solve itself failed (summary and manifest are still written)
            CheckFailed: a requested diagnostic missed its tolerance
        """
        exp = self.experiment
        if exp.sweep is not None:
            return self.sweep(exp.sweep.param, exp.sweep.values)
        if len(exp.epsilons) > 1:
            return self.sweep('epsilon', exp.epsilons)

        cfg = exp.configuration()
        summary = self._base_summary(cfg)
        try:
            bg, report, extras = self.solve_point(cfg)
        except SolveFailed as e:
            logger.error(f"Solve failed for '{exp.name}': {e}")
            summary.update({'status': 'failed', 'error': type(e).__name__, 'message': str(e),
                            'existence': existence_check(cfg), 'details': e.details})
            self._finish(summary)
            raise

        cfg = bg.cfg
        summary.update(self._base_summary(cfg))
        self._record_solution(report, extras)
        rows, results = self.run_checks(cfg, bg, report)
        self.recorder.write_csv('diagnostics.csv', rows, ['check', 'value', 'tolerance', 'passed'])
        failed = [row['check'] for row in rows if not row['passed']]
        summary.update({
            'status': 'ok' if not failed else 'check_failed',
            'classification': report.classification.value,
            'mean_d': report.mean_d,
            'u_sup': report.u.sup(),
            'solver_diagnostics': report.diagnostics,
            'checks': results,
            'failed_checks': failed,
        })
        if 'state' in extras:
            summary['perturbative'] = extras['state'].diagnostics
        self._finish(summary)
        logger.info(f"Experiment '{exp.name}' finished: {summary['status']}")
        if failed:
            raise CheckFailed(f"checks failed: {failed}", {'failed': failed})
        return summary

    def _record_solution(self, report, extras):
        eps = report.epsilon
        cfg = report.background.cfg
        self.recorder.dump_field('v', report.v, 'smooth variable v = u - u0', eps, solver=report.solver,
                                 mean_d=report.mean_d, points=[list(p) for p in cfg.points],
                                 multiplicities=list(cfg.multiplicities))
        self.recorder.dump_field('u', report.u, 'solution u', eps, solver=report.solver)
        history = [{'iteration': i + 1, 'residual': r} for i, r in enumerate(report.residual_history)]
        if report.increment_history:
            for row, inc in zip(history, report.increment_history):
                row['increment'] = inc
        if report.rise_history:
            for row, rise in zip(history, report.rise_history):
                row['rise'] = rise
        if history:
            self.recorder.write_csv('residuals.csv', history)
        state = extras.get('state')
        if state is not None:
            self.recorder.write_csv('convergence.csv', state.history, ['k', 'increment', 'residual'])
            self.recorder.dump_field('perturbation', state.v, 'scaled correction v', eps)
            self.recorder.dump_field('psi_eps', state.psi_eps, 'rescaled planar profile', eps)

    def _sweep_point(self, param, value):
        exp = self.experiment
        row = {'param': param, 'value': value}
        try:
            if param == 'epsilon':
                cfg = exp.configuration(value)
            else:
                cfg = with_separation(exp.configuration(), value)
            bg, report, _ = self.solve_point(cfg)
            cfg = bg.cfg
            checks, results = self.run_checks(cfg, bg, report)
            row.update({
                'status': 'ok' if all(c['passed'] for c in checks) else 'check_failed',
                'epsilon': cfg.epsilon,
                'classification': report.classification.value,
                'mean_d': report.mean_d,
                'flux': results.get('flux', flux(report, bg, cfg.epsilon)),
                'lambda_min': results.get('lambda_min'),
                'pohozaev_gap': results.get('pohozaev', {}).get('gap'),
                'iterations': report.diagnostics.get('iterations', report.diagnostics.get('newton_steps')),
                'error': None,
            })
        except (VortexLabError, ValueError) as e:
            logger.error(f"Sweep point {param}={value} failed: {e}")
            row.update({'status': 'failed', 'error': f"{type(e).__name__}: {e}"})
        return row

    def sweep(self, param, values):
        """
        Solve every sweep point in a worker pool; rows are merged in parameter order

        Returns:
            summary dict with executed and failed counts
        """
        exp = self.experiment
        logger.info(f"Starting sweep over {param} with {len(values)} points")
        with ThreadPoolExecutor(max_workers=self.workers) as pool:
            rows = list(pool.map(lambda v: self._sweep_point(param, v), values))
        columns = ['param', 'value', 'status', 'epsilon', 'classification', 'mean_d', 'flux', 'lambda_min',
                   'pohozaev_gap', 'iterations', 'error']
        self.recorder.write_csv('sweep.csv', rows, columns)
        failed = sum(1 for r in rows if r['status'] == 'failed')
        check_failed = sum(1 for r in rows if r['status'] == 'check_failed')
        summary = {
            'experiment': exp.name,
            'param': param,
            'total_points': len(rows),
            'executed': len(rows) - failed,
            'failed': failed,
            'check_failed': check_failed,
            'rows': rows,
        }
        self._finish(summary)
        logger.info(f"Sweep complete: {len(rows) - failed} executed, {failed} failed")
        if check_failed:
            raise CheckFailed(f"{check_failed} sweep point(s) failed their checks", {'param': param})
        return summary

    def spectrum(self):
        """Smallest eigenvalue of -L at the solution, with its eigenvector dumped"""
        cfg = self.experiment.configuration()
        bg, report, _ = self.solve_point(cfg)
        lam, vec = smallest_eigenvalue(LinearizedOperator.at_solution(report.v, bg, cfg.epsilon))
        self.recorder.dump_field('eigenvector', vec, 'lowest eigenvector of -L', cfg.epsilon, eigenvalue=lam)
        summary = self._base_summary(cfg)
        summary.update({'status': 'ok', 'lambda_min': lam, 'eps2_lambda_min': lam * cfg.epsilon ** 2,
                        'classification': report.classification.value})
        self._finish(summary)
        return summary

    def construct(self):
        """Perturbative construction regardless of the configured solver"""
        exp = self.experiment
        eps = exp.epsilons[0]
        state, bg, report = self.construct_point(eps)
        cfg = bg.cfg
        self._record_solution(report, {'state': state})
        rows, results = self.run_checks(cfg, bg, report)
        self.recorder.write_csv('diagnostics.csv', rows, ['check', 'value', 'tolerance', 'passed'])
        failed = [row['check'] for row in rows if not row['passed']]
        summary = self._base_summary(cfg)
        summary.update({'status': 'ok' if not failed else 'check_failed', 'perturbative': state.diagnostics,
                        'classification': report.classification.value, 'checks': results,
                        'failed_checks': failed})
        self._finish(summary)
        if failed:
            raise CheckFailed(f"checks failed: {failed}", {'failed': failed})
        return summary

    def check(self):
        """Diagnostics only, on the v dump of a previous run"""
        exp = self.experiment
        manifest = self.recorder.read_manifest()
        if manifest is not None:
            logger.info(f"Checking dumps written at {manifest['timestamp_parsed']:%Y-%m-%d %H:%M:%S %Z}")
        v, meta = self.recorder.load_dump('v')
        if v.grid != self.grid:
            raise ConfigInvalid(f"dump has n={v.grid.n}, experiment expects n={self.grid.n}")
        eps = float(meta['epsilon'])
        if 'points' in meta:
            cfg = VortexConfiguration(points=[tuple(p) for p in meta['points']],
                                      multiplicities=meta['multiplicities'], epsilon=eps)
        else:
            cfg = exp.configuration(eps)
        bg = build_background(cfg, self.grid)
        report = report_from_smooth(v, bg, eps, meta.get('solver', 'dump'))
        rows, results = self.run_checks(cfg, bg, report)
        self.recorder.write_csv('check.csv', rows, ['check', 'value', 'tolerance', 'passed'])
        failed = [row['check'] for row in rows if not row['passed']]
        summary = self._base_summary(cfg)
        summary.update({'status': 'ok' if not failed else 'check_failed', 'checks': results,
                        'failed_checks': failed, 'classification': report.classification.value,
                        'source_timestamp': manifest['timestamp'] if manifest else None})
        self.recorder.write_json('check_summary.json', summary)
        if failed:
            raise CheckFailed(f"checks failed: {failed}", {'failed': failed})
        return summary


def run_shoot(alpha, s, r_max, recorder: ResultsRecorder, threshold=False):
    """Radial shot (or the topological threshold profile) written to profile.csv"""
    if threshold:
        s = find_topological_threshold(alpha, r_max)
        profile = threshold_profile(alpha, r_max, s)
    else:
        profile = shoot(alpha, s, r_max)
    recorder.write_csv('profile.csv', profile.to_rows(), ['r', 'u', 'du'])
    summary = {
        'alpha': alpha,
        's': profile.s,
        'r_max': r_max,
        'tag': profile.tag.value,
        'r_stop': profile.r_stop,
        'flux': profile.flux,
        'mass': profile.mass,
        'flux_over_4pi': profile.flux / (4.0 * np.pi),
        'tail': profile.tail,
    }
    recorder.write_summary(summary)
    recorder.write_manifest(command=f"shoot --alpha {alpha} --s {s} --rmax {r_max}")
    return summary


def run_beta(s_min, s_max, count, recorder: ResultsRecorder, workers=None):
    """beta on an evenly spaced s grid written to beta.csv"""
    values = np.linspace(s_min, s_max, count)
    table = beta_table(values, workers)
    recorder.write_csv('beta.csv', table['rows'], ['s', 'beta'])
    summary = {'count': count, 's_min': s_min, 's_max': s_max, 'strictly_increasing': table['strictly_increasing'],
               'beta_over_8pi': [row['beta'] / (8.0 * np.pi) for row in table['rows']]}
    recorder.write_summary(summary)
    recorder.write_manifest(command=f"beta --smin {s_min} --smax {s_max} --count {count}")
    return summary
