"""
Experiment runners behind the `nbmf` subcommands.

Each runner writes into a directory it is handed; the CLI passes a staging
directory so a failed run leaves the real output directory untouched.

`trajectory.csv` records the error after every W-step and every H-step.
Wall-clock durations, including the cumulative elapsed seconds, live in
`timings.csv` only, so the trajectory is identical across repeated runs with
the same seed.
"""
import logging
import time
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, NamedTuple, Optional, Union

import numpy as np

from nbmf_annealing.als import FactorizationState, als_nbmf
from nbmf_annealing.annealing import reverse_anneal_reads
from nbmf_annealing.config import RunConfig, StudyRunConfig
from nbmf_annealing.constants import (
    CALIBRATION_HEADER,
    ENERGY_TOLERANCE,
    HAMMING_FREQUENCY_HEADER,
    ITERATION_SUMMARY_HEADER,
    METRICS_HEADER,
    STUDY_COLUMNS_HEADER,
    STUDY_HEADER,
    TIMINGS_HEADER,
    TRAJECTORY_HEADER,
)
from nbmf_annealing.core import BinaryVector, MatrixLike, NonnegMatrix, RngSpec, as_array
from nbmf_annealing.datagen import SyntheticSpec, generate_dataset
from nbmf_annealing.exact import solve_exact
from nbmf_annealing.metrics import (
    ColumnEval,
    evaluate_columns,
    exact_column_reports,
    hamming_frequencies,
    histogram,
    summarize_evaluations,
)
from nbmf_annealing.qubo import build_qubo, energy, write_qubo
from nbmf_annealing.reporting import environment_versions, write_csv, write_histogram, write_json
from nbmf_annealing.results import SolveReport, SolverKind
from nbmf_annealing.solvers import SolverConfig, solve_pgd_round

logger = logging.getLogger(__name__)


def method_slug(kind: SolverKind) -> str:
    return kind.value.lower().replace('+', '_')


def evaluate_trajectory(
    V: MatrixLike,
    states: Sequence[FactorizationState],
    config: SolverConfig,
    *,
    threads: int = 1,
) -> list[ColumnEval]:
    """
    Column metrics of every H-step of a trajectory against the exact optimum.

    Exact runs are their own reference, every other method gets the exact
    reports of its own W.
    """

    evaluations: list[ColumnEval] = []
    for state in states[1:]:
        if state.reports and all(report.solver is SolverKind.EXACT for report in state.reports):
            exact: list[Optional[SolveReport]] = list(state.reports)
        else:
            exact = list(exact_column_reports(
                V,
                state.W,
                config.exact_time_limit,
                threads=threads,
                method=config.exact_method,
                hard_cap=config.exact_hard_cap,
            ))
        evaluations += evaluate_columns(V, state.W, state.H, state.reports, exact, iteration=state.iteration)
    return evaluations


def summarize_trajectory(
    evaluations: Sequence[ColumnEval],
    size: int,
) -> tuple[list[tuple[Any, ...]], list[tuple[int, int, int]]]:
    """
    Per-iteration aggregates and Hamming distance counts of trajectory evaluations.

    `size` is the length of an H column, so distances run from 0 to `size`.
    """

    by_iteration: dict[int, list[ColumnEval]] = {}
    for item in evaluations:
        by_iteration.setdefault(item.iteration, []).append(item)
    summary_rows: list[tuple[Any, ...]] = []
    frequency_rows: list[tuple[int, int, int]] = []
    for iteration, items in sorted(by_iteration.items()):
        summary_rows.append((iteration, *summarize_evaluations(items).row()))
        counts = hamming_frequencies(items, size)
        frequency_rows += [(iteration, distance, int(count)) for distance, count in enumerate(counts)]
    return summary_rows, frequency_rows


def first_relaxed_values(states: Sequence[FactorizationState]) -> Optional[np.ndarray]:
    """Relaxed H values of the first H-step, if its method has any."""

    if len(states) < 2:
        return None
    relaxed = [report.relaxed for report in states[1].reports if report.relaxed is not None]
    if not relaxed:
        return None
    return np.concatenate(relaxed)


def run_factorize(config: RunConfig, V: NonnegMatrix, directory: Union[str, Path]) -> dict[str, Any]:
    """
    Run ALS NBMF once per configured method and write the reports.

    All methods share `config.als.seed`, so they start from the same W0, H0
    and draw the same per-column streams.
    """

    directory = Path(directory)
    trajectory_rows: list[tuple[Any, ...]] = []
    timing_rows: list[tuple[Any, ...]] = []
    methods: dict[str, Any] = {}

    for kind in config.methods:
        slug = method_slug(kind)
        als_config = config.als.model_copy(update={'solver': kind})
        started = time.perf_counter()
        states = als_nbmf(V, als_config)
        seconds = time.perf_counter() - started

        elapsed = 0.0
        for state in states:
            elapsed += state.w_step_seconds + state.h_step_seconds
            trajectory_rows.append((state.iteration, kind.value, state.error, state.error_after_w_step))
            timing_rows.append((
                state.iteration, kind.value, state.w_step_seconds, state.h_step_seconds, elapsed,
            ))

        if config.emit.hamming:
            evaluations = evaluate_trajectory(V, states, als_config.solvers, threads=als_config.threads)
            write_csv(directory / f'metrics_{slug}.csv', METRICS_HEADER, [item.row() for item in evaluations])
            summary_rows, frequency_rows = summarize_trajectory(evaluations, als_config.rank)
            write_csv(directory / f'metrics_summary_{slug}.csv', ITERATION_SUMMARY_HEADER, summary_rows)
            write_csv(directory / f'hamming_{slug}.csv', HAMMING_FREQUENCY_HEADER, frequency_rows)

        relaxed = first_relaxed_values(states)
        if config.emit.histograms and relaxed is not None:
            write_histogram(directory / f'histogram_{slug}.csv', histogram(relaxed, config.emit.histogram_bins))

        final = states[-1]
        if config.emit.qubo_dumps:
            v = as_array(V)
            dumps = directory / 'qubo' / slug
            dumps.mkdir(parents=True, exist_ok=True)
            for j in range(v.shape[1]):
                write_qubo(dumps / f'col_{j}.qubo', build_qubo(final.W, v[:, j]))

        methods[kind.value] = {
            'final_error': final.error,
            'iterations': final.iteration,
            'seconds': seconds,
        }
        logger.info('%s: final error %.6g after %d iteration(s)', kind.value, final.error, final.iteration)

    if config.emit.trajectory:
        write_csv(directory / 'trajectory.csv', TRAJECTORY_HEADER, trajectory_rows)
        write_csv(directory / 'timings.csv', TIMINGS_HEADER, timing_rows)

    summary = {
        'config': config.model_dump(mode='json'),
        'seed': config.als.seed.model_dump(mode='json'),
        'shape': list(as_array(V).shape),
        'versions': environment_versions(),
        'methods': methods,
    }
    write_json(directory / 'summary.json', summary)
    return summary


class CalibrationRow(NamedTuple):
    distance: float
    escape_rate: float
    improve_rate: float
    mean_energy: float


def _calibration_starts(
    config: RunConfig,
    V: np.ndarray,
    state: FactorizationState,
    count: int,
) -> list[BinaryVector]:
    H = as_array(state.H)
    if config.calibration.method is SolverKind.RA:
        return [BinaryVector(data=H[:, j]) for j in range(count)]
    starts = []
    for j in range(count):
        report, _ = solve_pgd_round(
            state.W, V[:, j], config.als.h_pgd, start=H[:, j], rounding=config.als.solvers.rounding,
        )
        starts.append(report.best_state)
    return starts


def run_calibration(config: RunConfig, V: NonnegMatrix, directory: Union[str, Path]) -> dict[str, Any]:
    """
    Estimate escape and improvement rates of reverse annealing per reversal distance.

    The column subproblems use the W reached after the PGDRound warm-up, each
    read starts from the state the calibrated method would start from. Every
    distance reuses the same per-column streams.
    """

    directory = Path(directory)
    calibration = config.calibration
    v = as_array(V)
    warmup = als_nbmf(V, config.als.model_copy(update={
        'solver': SolverKind.PGD_ROUND,
        'max_iterations': calibration.warmup_iterations,
        'rel_tol': 0.0,
    }))
    state = warmup[-1]
    count = min(v.shape[1], calibration.columns or v.shape[1])
    starts = _calibration_starts(config, v, state, count)
    problems = [build_qubo(state.W, v[:, j]) for j in range(count)]
    base = config.als.solvers.ra_schedule.model_copy(update={'reads': calibration.reads})
    seed = config.als.seed.at_epoch(calibration.warmup_iterations + 1)

    rows: list[CalibrationRow] = []
    for distance in calibration.distances:
        schedule = base.model_copy(update={'reversal_distance': distance})
        escaped = improved = reads = 0
        total_energy = 0.0
        for j, (q, start) in enumerate(zip(problems, starts)):
            states, values = reverse_anneal_reads(q, start, schedule, seed.stream(j))
            start_value = energy(q, start)
            slack = ENERGY_TOLERANCE * max(1.0, abs(start_value))
            escaped += int(np.any(states != start.data, axis=1).sum())
            improved += int((values < start_value - slack).sum())
            total_energy += float(values.sum())
            reads += values.shape[0]
        rows.append(CalibrationRow(distance, escaped / reads, improved / reads, total_energy / reads))
        logger.info(
            'distance %.3g: escape rate %.3f, improve rate %.3f',
            distance, rows[-1].escape_rate, rows[-1].improve_rate,
        )

    best = max(rows, key=lambda row: row.improve_rate)
    write_csv(directory / 'calibration.csv', CALIBRATION_HEADER, rows)
    recommendation = {
        'recommended_distance': best.distance,
        'improve_rate': best.improve_rate,
        'method': calibration.method.value,
        'columns': count,
        'reads': calibration.reads,
        'warmup_iterations': calibration.warmup_iterations,
        'versions': environment_versions(),
    }
    write_json(directory / 'calibration.json', recommendation)
    logger.info('recommended reversal distance %.3g (improve rate %.3f)', best.distance, best.improve_rate)
    return recommendation


def _cell_name(k: int, rho: float) -> str:
    return f'k{k}_rho{rho:g}'


def run_study_cell(
    config: StudyRunConfig,
    k: int,
    rho: float,
) -> tuple[list[ColumnEval], np.ndarray]:
    """
    Solve the column subproblems of one synthetic cell with W_true by PGDRound and Exact.

    Returns the column evaluations and the relaxed values of every column.
    """

    study = config.study
    spec = SyntheticSpec(n=study.n, k=k, rho=rho, theta=study.theta, seed=RngSpec(master_seed=config.seed))
    dataset = generate_dataset(spec)
    W, V = as_array(dataset.W_true), as_array(dataset.V)
    count = min(study.n, study.columns or study.n)

    def solve(j: int) -> tuple[SolveReport, SolveReport]:
        report, _ = solve_pgd_round(W, V[:, j], config.relaxation)
        return report, solve_exact(build_qubo(W, V[:, j]), study.time_limit)

    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as executor:
            pairs = list(executor.map(solve, range(count)))
    else:
        pairs = [solve(j) for j in range(count)]

    reports = [pair[0] for pair in pairs]
    evaluations = evaluate_columns(V[:, :count], W, None, reports, [pair[1] for pair in pairs])
    relaxed = np.concatenate([report.relaxed for report in reports if report.relaxed is not None])
    return evaluations, relaxed


def run_study(config: StudyRunConfig, directory: Union[str, Path]) -> list[tuple[Any, ...]]:
    """
    Relaxation accuracy over the (k, rho) grid.

    The summary and per-column CSVs are rewritten atomically after every
    cell, so an interrupted study keeps the cells it completed. Every cell
    uses the same seed.
    """

    directory = Path(directory)
    study = config.study
    summary_rows: list[tuple[Any, ...]] = []
    column_rows: list[tuple[Any, ...]] = []

    for k in study.ks:
        for rho in study.rhos:
            evaluations, relaxed = run_study_cell(config, k, rho)
            summary = summarize_evaluations(evaluations)
            summary_rows.append((k, rho, *summary.row(), *summary.hamming_per_bit(k)))
            column_rows += [
                (
                    k,
                    rho,
                    item.column,
                    item.objective_method,
                    item.objective_opt,
                    item.hamming,
                    item.approx_ratio,
                    item.optimal_flag,
                    item.degenerate,
                )
                for item in evaluations
            ]
            write_histogram(
                directory / f'histogram_{_cell_name(k, rho)}.csv', histogram(relaxed, study.histogram_bins),
            )
            write_csv(directory / 'study_columns.csv', STUDY_COLUMNS_HEADER, column_rows)
            write_csv(directory / 'study.csv', STUDY_HEADER, summary_rows)
            if summary.non_optimal:
                logger.warning(
                    'k=%d rho=%g: %d column(s) hit the exact time limit and are left out of the means',
                    k, rho, summary.non_optimal,
                )
            logger.info('k=%d rho=%g: mean hamming %s', k, rho, summary.mean_hamming)

    return summary_rows
