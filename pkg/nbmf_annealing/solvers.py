"""
Dispatch of one binary column subproblem to the configured H-step method.

- Exact: `solve_exact`, previous h unused.
- PGDRound: relaxed PGD then rounding, warm started from the previous h if any.
- FA: forward anneal, previous h unused.
- RA: reverse anneal from the previous h (required).
- RA+FA: forward anneal, then reverse anneal from its best state.
- RA+PGD: PGDRound from the previous h (required), then reverse anneal from
  the rounded state.
"""
import logging
import time
from collections.abc import Mapping
from enum import Enum
from typing import Any, Optional, Union

import numpy as np
import pydantic

from nbmf_annealing.annealing import AnnealSchedule, Sampler, SimulatedAnnealingSampler
from nbmf_annealing.constants import EXACT_HARD_CAP, EXACT_TIME_LIMIT_SECONDS, ROUNDING_THRESHOLD
from nbmf_annealing.core import BinaryVector, MatrixLike, RngSpec, as_array
from nbmf_annealing.errors import ConfigurationError
from nbmf_annealing.exact import ExactMethod, solve_exact
from nbmf_annealing.pgd import LeastSquaresProblem, PgdConfig, pgd_solve
from nbmf_annealing.qubo import QuboInstance, build_qubo, energy
from nbmf_annealing.results import SolveReport, SolverKind

logger = logging.getLogger(__name__)


class RoundingMode(str, Enum):
    THRESHOLD = 'threshold'
    SAMPLE = 'sample'


class SolverConfig(pydantic.BaseModel):
    """
    Parameters of every H-step method.

    Every read runs 100 sweeps by default: a forward read cools for all of
    them, a reverse read spends 20 heating, 20 paused and 60 cooling. Forward
    annealing gets about four times the reads of reverse annealing, so both
    spend roughly the same time per column.
    """

    model_config = pydantic.ConfigDict(frozen=True, arbitrary_types_allowed=True)

    exact_time_limit: float = pydantic.Field(default=EXACT_TIME_LIMIT_SECONDS, gt=0)
    exact_method: ExactMethod = ExactMethod.AUTO
    exact_hard_cap: int = pydantic.Field(default=EXACT_HARD_CAP, gt=0)
    fa_schedule: AnnealSchedule = AnnealSchedule(reads=1000)
    ra_schedule: AnnealSchedule = AnnealSchedule(reads=240, sweeps_total=60)
    relaxation: PgdConfig = PgdConfig()
    rounding: RoundingMode = RoundingMode.THRESHOLD
    sampler: Sampler = pydantic.Field(default_factory=SimulatedAnnealingSampler, exclude=True)

    @pydantic.model_validator(mode='before')
    @classmethod
    def _complete_schedules(cls, values: Any) -> Any:
        """Keys given for a schedule override the default schedule key by key."""

        if not isinstance(values, Mapping):
            return values
        completed = dict(values)
        for name in ('fa_schedule', 'ra_schedule'):
            given = completed.get(name)
            if isinstance(given, Mapping):
                default = cls.model_fields[name].default
                completed[name] = {**default.model_dump(exclude_unset=True), **given}
        return completed


def round_relaxed(
    relaxed: np.ndarray,
    rounding: RoundingMode = RoundingMode.THRESHOLD,
    rng: Optional[RngSpec] = None,
) -> np.ndarray:
    """
    Map a relaxed solution in [0,1] to binary.

    `threshold` sets `h_i = 1` iff `relaxed_i >= 0.5`; `sample` draws
    `h_i ~ Bernoulli(relaxed_i)` from `rng`.
    """

    if RoundingMode(rounding) is RoundingMode.THRESHOLD:
        return (relaxed >= ROUNDING_THRESHOLD).astype(np.int8)
    generator = (rng if rng is not None else RngSpec()).generator()
    return (generator.random(relaxed.shape[0]) < relaxed).astype(np.int8)


def solve_pgd_round(
    W: MatrixLike,
    v: Union[np.ndarray, list[float]],
    config: PgdConfig = PgdConfig(),
    *,
    start: Optional[Union[BinaryVector, np.ndarray]] = None,
    rounding: RoundingMode = RoundingMode.THRESHOLD,
    rng: Optional[RngSpec] = None,
) -> tuple[SolveReport, np.ndarray]:
    """
    Solve `min ||v - Wh||^2` over the box `[0,1]^k` and round the result.

    PGD starts from `start` when given (the previous binary column) and from
    the box centre otherwise.
    """

    started = time.perf_counter()
    problem = LeastSquaresProblem.relaxed_h_step(v, W)
    box = problem.column_start(None if start is None else as_array(start))
    result = pgd_solve(problem, box, config)
    relaxed = result.solution[:, 0].copy()

    h = round_relaxed(relaxed, rounding, rng)
    q = build_qubo(W, v)
    best_energy = energy(q, h)
    report = SolveReport(
        best_state=BinaryVector(data=h),
        best_energy=best_energy,
        best_objective=best_energy + q.offset,
        samples_evaluated=1,
        wall_time=time.perf_counter() - started,
        seed=rng if RoundingMode(rounding) is RoundingMode.SAMPLE else None,
        solver=SolverKind.PGD_ROUND,
        relaxed=relaxed,
    )
    return report, relaxed


def solve_instance(
    kind: Union[SolverKind, str],
    q: QuboInstance,
    config: SolverConfig = SolverConfig(),
    rng: RngSpec = RngSpec(),
    *,
    initial: Optional[BinaryVector] = None,
) -> SolveReport:
    """
    Solve a bare QUBO instance with a method that needs no least-squares data.

    PGD based methods work on `W` and `v` rather than on Q, so they are
    rejected here.
    """

    kind = SolverKind(kind)
    if kind in (SolverKind.PGD_ROUND, SolverKind.RA_PGD):
        raise ConfigurationError(
            f'{kind.value} needs W and v, not a bare QUBO instance',
            details=[(('solver',), f'{kind.value} is not available for QUBO instances')],
        )
    if kind is SolverKind.RA and initial is None:
        raise ConfigurationError(
            'RA needs an initial state',
            details=[(('initial',), 'required by RA')],
        )

    if kind is SolverKind.EXACT:
        return solve_exact(q, config.exact_time_limit, method=config.exact_method, hard_cap=config.exact_hard_cap)
    if kind is SolverKind.FA:
        return config.sampler.sample(q, config.fa_schedule, rng).with_solver(kind)
    if kind is SolverKind.RA:
        return config.sampler.sample(q, config.ra_schedule, rng, initial=initial).with_solver(kind)

    first = config.sampler.sample(q, config.fa_schedule, rng)
    second = config.sampler.sample(q, config.ra_schedule, rng.at_phase(1), initial=first.best_state)
    return second.with_solver(
        kind,
        samples_evaluated=first.samples_evaluated + second.samples_evaluated,
        wall_time=first.wall_time + second.wall_time,
    )


def solve_column(
    kind: Union[SolverKind, str],
    W: MatrixLike,
    v: Union[np.ndarray, list[float]],
    previous_h: Optional[Union[BinaryVector, np.ndarray]],
    config: SolverConfig = SolverConfig(),
    rng: RngSpec = RngSpec(),
) -> SolveReport:
    """
    Run the pipeline of `kind` on the column `v`.

    Two-stage pipelines draw their stages from separate phases of `rng` and
    report the combined sample count and wall time under their own kind.
    """

    kind = SolverKind(kind)
    if kind.requires_previous_h and previous_h is None:
        raise ConfigurationError(
            f'{kind.value} needs the previous H column',
            details=[(('previous_h',), f'required by {kind.value}')],
        )
    if previous_h is not None and not isinstance(previous_h, BinaryVector):
        previous_h = BinaryVector(data=previous_h)
    if kind is SolverKind.PGD_ROUND:
        report, _ = solve_pgd_round(
            W, v, config.relaxation, start=previous_h, rounding=config.rounding, rng=rng,
        )
    elif kind is SolverKind.RA_PGD:
        first, _ = solve_pgd_round(
            W, v, config.relaxation, start=previous_h, rounding=config.rounding, rng=rng,
        )
        second = config.sampler.sample(
            build_qubo(W, v), config.ra_schedule, rng.at_phase(1), initial=first.best_state,
        )
        report = second.with_solver(
            kind,
            samples_evaluated=first.samples_evaluated + second.samples_evaluated,
            wall_time=first.wall_time + second.wall_time,
            relaxed=first.relaxed,
        )
    else:
        report = solve_instance(kind, build_qubo(W, v), config, rng, initial=previous_h)

    logger.debug('%s column stream %d: objective %.6g', kind.value, rng.stream_id, report.best_objective)
    return report
