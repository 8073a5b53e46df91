"""
Classical simulated-annealing analogs of forward and reverse quantum annealing.

Both run single-variable Metropolis sweeps over all reads at once: every
sweep visits the variables in a fresh random order and each visit flips the
variable with probability `min(1, exp(-delta / T))`.

Forward annealing starts every read from a uniform random state and cools
geometrically from `temp_max` to `temp_min` over `sweeps_total` sweeps.
Reverse annealing starts every read from one given state, heats linearly to
`T_peak = reversal_distance * temp_max`, holds `T_peak` for `pause_fraction *
sweeps_total` sweeps and then cools geometrically from `T_peak` to `temp_min`
over `sweeps_total` sweeps, the forward budget. A reversal distance of 0 never
leaves the initial state; at a distance of 1 the cooling leg is the forward
schedule itself, so the initial state is forgotten and the reads behave like
forward anneals.
"""
import logging
import time
from typing import Optional, Protocol, runtime_checkable

import numpy as np
import pydantic

from nbmf_annealing.core import BinaryVector, RngSpec, as_array
from nbmf_annealing.errors import ConfigurationError, DimensionError
from nbmf_annealing.qubo import QuboInstance, energies
from nbmf_annealing.results import SolveReport, SolverKind

logger = logging.getLogger(__name__)

TEMP_MIN_RATIO = 1e-3


class AnnealSchedule(pydantic.BaseModel):
    """
    Sweep budget and temperature shape of one annealing method.

    `temp_max` defaults to the largest absolute row sum of Q (an upper bound
    on any single-flip energy change), `temp_min` to `1e-3 * temp_max`.
    """

    model_config = pydantic.ConfigDict(frozen=True)

    sweeps_total: int = pydantic.Field(default=100, gt=0)
    reversal_distance: float = pydantic.Field(default=0.45, ge=0, le=1)
    pause_fraction: float = pydantic.Field(default=1 / 3, ge=0, lt=1)
    temp_max: Optional[float] = pydantic.Field(default=None, gt=0)
    temp_min: Optional[float] = pydantic.Field(default=None, gt=0)
    reads: int = pydantic.Field(default=1, ge=1)

    @pydantic.model_validator(mode='after')
    def _validate_temperatures(self) -> 'AnnealSchedule':
        if self.temp_max is not None and self.temp_min is not None and self.temp_min >= self.temp_max:
            raise ValueError('temp_min must be smaller than temp_max')
        return self

    def temperature_range(self, q: QuboInstance) -> tuple[float, float]:
        temp_max = self.temp_max
        if temp_max is None:
            temp_max = float(np.abs(q.q).sum(axis=1).max()) or 1.0
        temp_min = self.temp_min if self.temp_min is not None else TEMP_MIN_RATIO * temp_max
        if temp_min >= temp_max:
            raise ConfigurationError(f'temp_min {temp_min:g} must be below the derived temp_max {temp_max:g}')
        return temp_max, temp_min

    def forward_temperatures(self, q: QuboInstance) -> np.ndarray:
        temp_max, temp_min = self.temperature_range(q)
        return np.geomspace(temp_max, temp_min, self.sweeps_total)

    @property
    def pause_sweeps(self) -> int:
        return int(round(self.pause_fraction * self.sweeps_total))

    @property
    def heating_sweeps(self) -> int:
        return max(1, int(round((1 - self.pause_fraction) * self.sweeps_total / 2)))

    def reverse_temperatures(self, q: QuboInstance) -> np.ndarray:
        """Heating ramp, pause at the turning point, then a cooling leg as long as the forward anneal."""

        temp_max, temp_min = self.temperature_range(q)
        peak = self.reversal_distance * temp_max
        up = self.heating_sweeps
        if peak <= 0:
            return np.zeros(up + self.pause_sweeps + self.sweeps_total)
        heating = peak * np.arange(1, up + 1) / up
        cooling = np.geomspace(peak, min(temp_min, peak), self.sweeps_total)
        return np.concatenate([heating, np.full(self.pause_sweeps, peak), cooling])


def _metropolis(
    q: np.ndarray,
    states: np.ndarray,
    temperatures: np.ndarray,
    generator: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Anneal all reads (rows of `states`, updated in place) through `temperatures`.

    Returns the best state seen by each read (checked after every sweep,
    starting state included) and its tracked energy.
    """

    reads, size = states.shape
    diag = np.diag(q)
    fields = states @ q
    current = np.einsum('ri,ri->r', states, fields)
    best_states = states.copy()
    best = current.copy()

    for temperature in temperatures:
        order = generator.permutation(size)
        draws = generator.random((size, reads))
        if temperature <= 0:
            continue
        for step, i in enumerate(order):
            x_i = states[:, i]
            flip = 1.0 - 2.0 * x_i
            delta = flip * (diag[i] + 2.0 * (fields[:, i] - diag[i] * x_i))
            accept = (delta <= 0) | (draws[step] < np.exp(-np.maximum(delta, 0.0) / temperature))
            if not accept.any():
                continue
            change = np.where(accept, flip, 0.0)
            states[:, i] += change
            fields += change[:, None] * q[i]
            current += np.where(accept, delta, 0.0)
        improved = current < best
        if improved.any():
            best_states[improved] = states[improved]
            best[improved] = current[improved]

    return best_states, best


def _pick_best(candidates: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, float]:
    """Lowest energy among candidate rows, first row on ties."""

    index = int(np.argmin(values))
    return candidates[index], float(values[index])


def _report(
    q: QuboInstance,
    state: np.ndarray,
    value: float,
    *,
    reads: int,
    started: float,
    rng: RngSpec,
    solver: SolverKind,
) -> SolveReport:
    return SolveReport(
        best_state=BinaryVector(data=state),
        best_energy=value,
        best_objective=value + q.offset,
        samples_evaluated=reads,
        wall_time=time.perf_counter() - started,
        seed=rng,
        solver=solver,
    )


def _start_state(q: QuboInstance, initial: BinaryVector) -> np.ndarray:
    start = as_array(initial)
    if start.shape != (q.size,):
        raise DimensionError(f'initial state has shape {start.shape}, instance has {q.size} variables')
    return start


def best_read_states(
    q: QuboInstance,
    schedule: AnnealSchedule,
    rng: RngSpec,
    initial: Optional[BinaryVector] = None,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Best state seen by every read and its exact energy, one row per read.

    Without `initial` the reads are forward anneals, otherwise reverse
    anneals from `initial`. `solve_fa` and `solve_ra` select from these rows.
    """

    generator = rng.generator()
    if initial is None:
        temperatures = schedule.forward_temperatures(q)
        states = generator.integers(0, 2, size=(schedule.reads, q.size)).astype(np.float64)
    else:
        states = np.tile(_start_state(q, initial), (schedule.reads, 1))
        if schedule.reversal_distance == 0:
            return states, energies(q, states)
        temperatures = schedule.reverse_temperatures(q)
    best_states, _ = _metropolis(q.q, states, temperatures, generator)
    return best_states, energies(q, best_states)


def solve_fa(q: QuboInstance, schedule: AnnealSchedule, rng: RngSpec) -> SolveReport:
    """Forward anneal: `reads` independent runs from uniform random states."""

    started = time.perf_counter()
    state, value = _pick_best(*best_read_states(q, schedule, rng))
    return _report(q, state, value, reads=schedule.reads, started=started, rng=rng, solver=SolverKind.FA)


def solve_ra(
    q: QuboInstance,
    initial: BinaryVector,
    schedule: AnnealSchedule,
    rng: RngSpec,
) -> SolveReport:
    """
    Reverse anneal: `reads` runs that all start from `initial`.

    The result is never worse than `initial`: the initial state competes as a
    candidate and only a strictly lower exact energy replaces it.
    """

    started = time.perf_counter()
    start = _start_state(q, initial)
    start_value = float(energies(q, start[None, :])[0])

    state, value = start.copy(), start_value
    if schedule.reversal_distance > 0:
        candidate, candidate_value = _pick_best(*best_read_states(q, schedule, rng, initial))
        if candidate_value < start_value:
            state, value = candidate, candidate_value
    return _report(q, state, value, reads=schedule.reads, started=started, rng=rng, solver=SolverKind.RA)


def reverse_anneal_reads(
    q: QuboInstance,
    initial: BinaryVector,
    schedule: AnnealSchedule,
    rng: RngSpec,
) -> tuple[np.ndarray, np.ndarray]:
    """
    Final state and exact energy of every read of a reverse anneal.

    Unlike `solve_ra` nothing is selected, so the rows show where the reads
    actually ended up.
    """

    states = np.tile(_start_state(q, initial), (schedule.reads, 1))
    if schedule.reversal_distance > 0:
        _metropolis(q.q, states, schedule.reverse_temperatures(q), rng.generator())
    return states, energies(q, states)


@runtime_checkable
class Sampler(Protocol):
    """
    Backend boundary for binary samplers.

    `initial=None` asks for a forward anneal, a state asks for a reverse
    anneal from it. External samplers implement this to replace the built-in
    simulated annealing.
    """

    def sample(
        self,
        q: QuboInstance,
        schedule: AnnealSchedule,
        rng: RngSpec,
        initial: Optional[BinaryVector] = None,
    ) -> SolveReport: ...


class SimulatedAnnealingSampler:
    def sample(
        self,
        q: QuboInstance,
        schedule: AnnealSchedule,
        rng: RngSpec,
        initial: Optional[BinaryVector] = None,
    ) -> SolveReport:
        if initial is None:
            return solve_fa(q, schedule, rng)
        return solve_ra(q, initial, schedule, rng)
