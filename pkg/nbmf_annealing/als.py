"""
Alternating least squares for NMF and NBMF.

Both variants alternate a W-step (projected gradient descent on W >= 0 with
H fixed) and an H-step. NMF solves the H-step by the same PGD with H >= 0;
NBMF splits it into one binary subproblem per column and hands each to
`solve_column`. Iteration 0 of the returned trajectory is the random
initialization, shared by every method that uses the same seed.
"""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import Optional, Union

import numpy as np
import pydantic

from nbmf_annealing.constants import INIT_EPOCH
from nbmf_annealing.core import (
    BinaryMatrix,
    FrozenArrayModel,
    MatrixLike,
    NonnegMatrix,
    RngSpec,
    as_array,
    frobenius_error,
)
from nbmf_annealing.errors import ConfigurationError
from nbmf_annealing.pgd import LeastSquaresProblem, PgdConfig, pgd_solve
from nbmf_annealing.results import SolveReport, SolverKind
from nbmf_annealing.solvers import SolverConfig, solve_column

logger = logging.getLogger(__name__)


class AlsConfig(pydantic.BaseModel):
    """
    ALS parameters.

    `h_pgd` drives the nonnegative H-step of NMF and the relaxed H-step of the
    PGD based binary solvers; it takes precedence over `solvers.relaxation`.
    A `rel_tol` of 0 runs exactly `max_iterations` iterations.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    rank: int = pydantic.Field(gt=0)
    max_iterations: int = pydantic.Field(default=20, gt=0)
    rel_tol: float = pydantic.Field(default=1e-4, ge=0)
    solver: SolverKind = SolverKind.RA_PGD
    seed: RngSpec = RngSpec()
    w_pgd: PgdConfig = PgdConfig()
    h_pgd: PgdConfig = PgdConfig()
    solvers: SolverConfig = SolverConfig()
    threads: int = pydantic.Field(default=1, ge=1)

    @property
    def column_solver_config(self) -> SolverConfig:
        return self.solvers.model_copy(update={'relaxation': self.h_pgd})


class FactorizationState(FrozenArrayModel):
    """
    Snapshot after one ALS iteration (iteration 0 is the initialization).

    `error` is measured after both steps, `error_after_w_step` between them.
    `reports` holds the per-column solver outcomes of an NBMF H-step.
    """

    iteration: int = pydantic.Field(ge=0)
    W: NonnegMatrix
    H: Union[BinaryMatrix, NonnegMatrix]
    error: float = pydantic.Field(ge=0)
    error_after_w_step: Optional[float] = None
    w_step_seconds: float = 0.0
    h_step_seconds: float = 0.0
    reports: tuple[SolveReport, ...] = ()


def check_rank(V: MatrixLike, rank: int) -> None:
    m, n = as_array(V).shape
    if rank >= min(m, n):
        raise ConfigurationError(
            f'rank {rank} must be smaller than min(m, n) = {min(m, n)}',
            details=[(('als', 'rank'), f'must be < {min(m, n)}')],
        )
    if rank * (n + m) >= n * m:
        logger.warning(
            'rank %d over-parameterizes a %dx%d matrix: k(n+m)=%d >= nm=%d',
            rank, m, n, rank * (n + m), n * m,
        )


def initialize(V: MatrixLike, rank: int, seed: RngSpec) -> tuple[np.ndarray, np.ndarray]:
    """W0 uniform on [0,1), H0 Bernoulli(0.5), both drawn from the initialization epoch of `seed`."""

    m, n = as_array(V).shape
    generator = seed.at_epoch(INIT_EPOCH).stream(0).generator()
    W0 = generator.random((m, rank))
    H0 = generator.integers(0, 2, size=(rank, n)).astype(np.float64)
    return W0, H0


def w_step(V: np.ndarray, W: np.ndarray, H: np.ndarray, config: PgdConfig) -> np.ndarray:
    return pgd_solve(LeastSquaresProblem.w_step(V, H), W, config).solution


def binary_h_step(
    V: MatrixLike,
    W: MatrixLike,
    previous_H: Optional[MatrixLike],
    config: AlsConfig,
    epoch: int,
) -> tuple[np.ndarray, list[SolveReport]]:
    """
    Solve the n column subproblems of an NBMF H-step.

    Column j draws from stream j of `epoch`, so the result does not depend on
    the order or the number of threads the columns are solved with.
    """

    v, w = as_array(V), as_array(W)
    previous = as_array(previous_H) if previous_H is not None else None
    kind = config.solver
    solver_config = config.column_solver_config
    epoch_seed = config.seed.at_epoch(epoch)

    def solve(j: int) -> SolveReport:
        previous_column = previous[:, j] if previous is not None and kind.uses_previous_h else None
        return solve_column(kind, w, v[:, j], previous_column, solver_config, epoch_seed.stream(j))

    columns = range(v.shape[1])
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as executor:
            reports = list(executor.map(solve, columns))
    else:
        reports = [solve(j) for j in columns]
    H = np.stack([report.best_state.data for report in reports], axis=1).astype(np.float64)
    return H, reports


def _revive_dead_features(W: np.ndarray, H: np.ndarray, seed: RngSpec, epoch: int) -> np.ndarray:
    """
    Re-draw the W columns of features no data point uses.

    Runs before the W-step, so every recorded W is the one its H-step saw.
    The error is unchanged since those columns multiply zero rows of H.
    """

    dead = np.flatnonzero(~H.any(axis=1))
    if not dead.size:
        return W
    W = W.copy()
    n = H.shape[1]
    for row in dead:
        W[:, row] = seed.at_epoch(epoch).stream(n + int(row)).generator().random(W.shape[0])
    logger.warning('iteration %d: re-initialized %d dead feature(s) %s', epoch, dead.size, dead.tolist())
    return W


def _converged(previous: float, current: float, rel_tol: float) -> bool:
    """Exact fit, or a relative improvement in `[0, rel_tol)`; a rising error never stops the run."""

    if current == 0.0:
        return True
    if rel_tol <= 0 or previous <= 0:
        return False
    improvement = (previous - current) / previous
    return 0.0 <= improvement < rel_tol


def _run(V: MatrixLike, config: AlsConfig, *, binary: bool) -> list[FactorizationState]:
    v = as_array(V)
    if v.ndim != 2:
        raise ConfigurationError(f'V must be a matrix, got shape {v.shape}')
    check_rank(v, config.rank)
    W, H = initialize(v, config.rank, config.seed)
    H_type = BinaryMatrix if binary else NonnegMatrix

    states = [
        FactorizationState(iteration=0, W=NonnegMatrix(data=W), H=H_type(data=H), error=frobenius_error(v, W, H)),
    ]
    for t in range(1, config.max_iterations + 1):
        started = time.perf_counter()
        if binary:
            W = _revive_dead_features(W, H, config.seed, t)
        W = w_step(v, W, H, config.w_pgd)
        error_after_w_step = frobenius_error(v, W, H)
        w_seconds = time.perf_counter() - started

        started = time.perf_counter()
        reports: list[SolveReport] = []
        if binary:
            H, reports = binary_h_step(v, W, H, config, t)
        else:
            H = pgd_solve(LeastSquaresProblem.h_step(v, W), H, config.h_pgd).solution
        h_seconds = time.perf_counter() - started

        error = frobenius_error(v, W, H)
        states.append(FactorizationState(
            iteration=t,
            W=NonnegMatrix(data=W),
            H=H_type(data=H),
            error=error,
            error_after_w_step=error_after_w_step,
            w_step_seconds=w_seconds,
            h_step_seconds=h_seconds,
            reports=tuple(reports),
        ))
        logger.info(
            '%s iteration %d: error %.6g (after W-step %.6g), W-step %.3fs, H-step %.3fs',
            config.solver.value if binary else 'NMF', t, error, error_after_w_step, w_seconds, h_seconds,
        )
        if _converged(states[-2].error, error, config.rel_tol):
            break
    return states


def als_nmf(V: MatrixLike, config: AlsConfig) -> list[FactorizationState]:
    return _run(V, config, binary=False)


def als_nbmf(V: MatrixLike, config: AlsConfig) -> list[FactorizationState]:
    """
    NBMF trajectory with the H-step solved by `config.solver`.

    Methods that use the previous H receive the columns of the preceding
    iterate; every method sees the same W0 and H0 for one seed.
    """

    return _run(V, config, binary=True)
