"""
Evaluation of H-step solutions against the exact optimum of each column.

Distances are measured to the specific optimum returned by `solve_exact`
(the lexicographically smallest one), so they stay well defined when a
column has several optima; such columns are flagged as degenerate when the
exact solver enumerated them.
"""
import logging
from collections.abc import Sequence
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Optional, Union

import numpy as np
import pydantic
from scipy import stats

from nbmf_annealing.constants import ENERGY_TOLERANCE, EXACT_HARD_CAP, SUMMARY_COLUMNS
from nbmf_annealing.core import BinaryVector, MatrixLike, as_array
from nbmf_annealing.errors import DimensionError, EvaluationError, RangeError
from nbmf_annealing.exact import ExactMethod, solve_exact
from nbmf_annealing.qubo import build_qubo
from nbmf_annealing.results import SolveReport

logger = logging.getLogger(__name__)

Binary = Union[BinaryVector, np.ndarray, Sequence[int]]


class ColumnEval(pydantic.BaseModel):
    """
    Quality of one column solution.

    `approx_ratio` is None when the optimal objective is zero (the ratio is
    undefined); `objective_method` still carries the absolute value then.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    iteration: int = pydantic.Field(default=0, ge=0)
    column: int = pydantic.Field(ge=0)
    objective_method: float = pydantic.Field(ge=0)
    objective_opt: float = pydantic.Field(ge=0)
    hamming: int = pydantic.Field(ge=0)
    approx_ratio: Optional[float] = None
    optimal_flag: bool
    degenerate: Optional[bool] = None

    def row(self) -> tuple[int, int, float, float, int, Optional[float], bool]:
        return (
            self.iteration,
            self.column,
            self.objective_method,
            self.objective_opt,
            self.hamming,
            self.approx_ratio,
            self.optimal_flag,
        )


class EvaluationSummary(pydantic.BaseModel):
    """
    Aggregate over the columns of one iteration or one study cell.

    Means and standard errors only cover columns whose optimum was proven;
    `non_optimal` counts the others. The ratio statistics additionally skip
    columns with an undefined ratio (`undefined_ratio`).
    """

    columns: int
    evaluated: int
    mean_hamming: Optional[float]
    sem_hamming: Optional[float]
    mean_approx_ratio: Optional[float]
    sem_approx_ratio: Optional[float]
    optimal_fraction: Optional[float]
    undefined_ratio: int
    non_optimal: int

    def row(self) -> tuple[Any, ...]:
        return tuple(getattr(self, name) for name in SUMMARY_COLUMNS)

    def hamming_per_bit(self, size: int) -> tuple[Optional[float], Optional[float]]:
        """Mean Hamming distance and its standard error as fractions of the `size` bits."""

        return (
            None if self.mean_hamming is None else self.mean_hamming / size,
            None if self.sem_hamming is None else self.sem_hamming / size,
        )


def _bits(x: Binary) -> np.ndarray:
    return as_array(x).reshape(-1)


def hamming(x: Binary, y: Binary) -> int:
    a, b = _bits(x), _bits(y)
    if a.shape != b.shape:
        raise DimensionError(f'hamming: lengths differ ({a.shape[0]} and {b.shape[0]})')
    return int(np.count_nonzero(a != b))


def column_objective(W: MatrixLike, v: Union[np.ndarray, Sequence[float]], h: Binary) -> float:
    """`||v - Wh||^2` computed directly from the residual."""

    residual = np.asarray(v, dtype=np.float64).reshape(-1) - as_array(W) @ _bits(h)
    return float(residual @ residual)


def evaluate_columns(
    V: MatrixLike,
    W: MatrixLike,
    H_method: Optional[MatrixLike],
    solver_reports: Optional[Sequence[SolveReport]],
    exact_reports: Sequence[Optional[SolveReport]],
    *,
    iteration: int = 0,
) -> list[ColumnEval]:
    """
    Compare every column of `H_method` with the state of its exact report.

    Without `H_method` the method's columns are taken from `solver_reports`.
    """

    v, w = as_array(V), as_array(W)
    n = v.shape[1]
    if H_method is not None:
        columns = [as_array(H_method)[:, j] for j in range(as_array(H_method).shape[1])]
    elif solver_reports is not None:
        columns = [report.best_state.data for report in solver_reports]
    else:
        raise EvaluationError('either H_method or solver_reports is required')
    if len(columns) != n:
        raise EvaluationError(f'method solution covers {len(columns)} of {n} columns')
    if len(exact_reports) != n:
        raise EvaluationError(f'exact reports cover {len(exact_reports)} of {n} columns')

    evaluations = []
    for j, (h, exact) in enumerate(zip(columns, exact_reports)):
        if exact is None:
            raise EvaluationError(f'column {j} has no exact report')
        method_value = column_objective(w, v[:, j], h)
        opt_value = column_objective(w, v[:, j], exact.best_state)
        optimal = bool(exact.optimal)
        scale = max(1.0, float(v[:, j] @ v[:, j]))
        ratio: Optional[float] = None
        if opt_value > ENERGY_TOLERANCE * scale:
            ratio = method_value / opt_value
            if optimal and ratio < 1.0:
                # Equal-energy optima may differ in the last bit
                ratio = 1.0
        evaluations.append(ColumnEval(
            iteration=iteration,
            column=j,
            objective_method=method_value,
            objective_opt=opt_value,
            hamming=hamming(h, exact.best_state),
            approx_ratio=ratio,
            optimal_flag=optimal,
            degenerate=exact.degenerate,
        ))
    return evaluations


def exact_column_reports(
    V: MatrixLike,
    W: MatrixLike,
    time_limit: float,
    *,
    threads: int = 1,
    method: ExactMethod = ExactMethod.AUTO,
    hard_cap: int = EXACT_HARD_CAP,
) -> list[SolveReport]:
    v, w = as_array(V), as_array(W)

    def solve(j: int) -> SolveReport:
        return solve_exact(build_qubo(w, v[:, j]), time_limit, method=method, hard_cap=hard_cap)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            return list(executor.map(solve, range(v.shape[1])))
    return [solve(j) for j in range(v.shape[1])]


def _mean_and_sem(values: Sequence[float]) -> tuple[Optional[float], Optional[float]]:
    if not values:
        return None, None
    mean = float(np.mean(values))
    if len(values) < 2:
        return mean, None
    return mean, float(stats.sem(values))


def summarize_evaluations(evaluations: Sequence[ColumnEval]) -> EvaluationSummary:
    proven = [evaluation for evaluation in evaluations if evaluation.optimal_flag]
    ratios = [evaluation.approx_ratio for evaluation in proven if evaluation.approx_ratio is not None]
    mean_hamming, sem_hamming = _mean_and_sem([float(evaluation.hamming) for evaluation in proven])
    mean_ratio, sem_ratio = _mean_and_sem(ratios)
    return EvaluationSummary(
        columns=len(evaluations),
        evaluated=len(proven),
        mean_hamming=mean_hamming,
        sem_hamming=sem_hamming,
        mean_approx_ratio=mean_ratio,
        sem_approx_ratio=sem_ratio,
        optimal_fraction=(
            sum(1 for evaluation in proven if evaluation.hamming == 0) / len(proven) if proven else None
        ),
        undefined_ratio=sum(1 for evaluation in proven if evaluation.approx_ratio is None),
        non_optimal=len(evaluations) - len(proven),
    )


def hamming_frequencies(evaluations: Sequence[ColumnEval], size: int) -> np.ndarray:
    """Number of columns at each Hamming distance 0..size."""

    distances = np.array([evaluation.hamming for evaluation in evaluations], dtype=np.int64)
    if distances.size and distances.max() > size:
        raise RangeError(f'hamming distance {int(distances.max())} exceeds the vector length {size}')
    return np.bincount(distances, minlength=size + 1)


def histogram(values: Union[np.ndarray, Sequence[float]], bins: int) -> np.ndarray:
    """
    Counts over `bins` equal-width bins on [0,1].

    Bins are closed on the left; the last bin also holds 1.0.
    """

    if bins < 1:
        raise RangeError(f'bins must be >= 1, got {bins}')
    data = np.asarray(values, dtype=np.float64).reshape(-1)
    outside = ~((data >= 0.0) & (data <= 1.0))
    if outside.any():
        raise RangeError(f'{int(outside.sum())} value(s) outside [0, 1], first {data[outside][0]!r}')
    index = np.minimum(np.floor(data * bins).astype(np.int64), bins - 1)
    return np.bincount(index, minlength=bins)
