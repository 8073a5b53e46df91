"""
Exact minimisation of `h^T Q h` over binary `h`.

Small instances are enumerated in lexicographic order; larger ones go
through a depth-first branch and bound. Both return the lexicographically
smallest optimal assignment, so Hamming distances against the optimum are
reproducible even when optima are degenerate.
"""
import logging
import time
from enum import Enum
from typing import Optional

import numpy as np

from nbmf_annealing.constants import (
    DEGENERACY_MAX_SIZE,
    ENERGY_TOLERANCE,
    EXACT_HARD_CAP,
    EXACT_TIME_LIMIT_SECONDS,
    EXHAUSTIVE_GUARD_SIZE,
    EXHAUSTIVE_MAX_SIZE,
)
from nbmf_annealing.core import BinaryVector
from nbmf_annealing.errors import CapacityError
from nbmf_annealing.qubo import QuboInstance, energies, energy
from nbmf_annealing.results import SolveReport, SolverKind

logger = logging.getLogger(__name__)

CHUNK_BITS = 16
# Nodes between two deadline checks
CLOCK_INTERVAL = 256


class ExactMethod(str, Enum):
    AUTO = 'auto'
    ENUMERATE = 'enumerate'
    BRANCH_AND_BOUND = 'branch-and-bound'


def energy_tolerance(q: QuboInstance) -> float:
    return ENERGY_TOLERANCE * max(1.0, abs(q.offset), float(np.abs(q.q).sum()))


def _lex_states(start: int, stop: int, size: int) -> np.ndarray:
    """Rows are the assignments with indices start..stop-1, bit 0 most significant."""

    indices = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(size - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts) & 1).astype(np.float64)


def _enumerate(q: QuboInstance, deadline: float) -> tuple[np.ndarray, bool, Optional[bool], int]:
    size = q.size
    total = 1 << size
    chunk = 1 << min(size, CHUNK_BITS)
    tol = energy_tolerance(q)

    best_value, best_index = np.inf, 0
    evaluated = 0
    for start in range(0, total, chunk):
        values = energies(q, _lex_states(start, min(start + chunk, total), size))
        evaluated += values.shape[0]
        position = int(np.argmin(values))
        if values[position] < best_value:
            best_value, best_index = float(values[position]), start + position
        if time.perf_counter() > deadline and evaluated < total:
            logger.warning('exact enumeration hit its time limit after %d of %d states', evaluated, total)
            return _lex_states(best_index, best_index + 1, size)[0], False, None, evaluated

    # Second pass: lexicographically first state within tolerance of the minimum
    first_index, ties = None, 0
    count_ties = size <= DEGENERACY_MAX_SIZE
    for start in range(0, total, chunk):
        values = energies(q, _lex_states(start, min(start + chunk, total), size))
        hits = np.flatnonzero(values <= best_value + tol)
        if hits.size and first_index is None:
            first_index = start + int(hits[0])
        ties += hits.size
        if first_index is not None and (not count_ties or ties > 1):
            break
    assert first_index is not None
    degenerate = ties > 1 if count_ties else None
    return _lex_states(first_index, first_index + 1, size)[0], True, degenerate, evaluated


def _greedy_descent(q: np.ndarray) -> np.ndarray:
    """Single-flip steepest descent from the all-zeros state."""

    x = np.zeros(q.shape[0])
    fields = q @ x
    diag = np.diag(q)
    while True:
        flip = 1.0 - 2.0 * x
        deltas = flip * (diag + 2.0 * (fields - diag * x))
        i = int(np.argmin(deltas))
        if deltas[i] >= 0:
            return x
        x[i] += flip[i]
        fields += flip[i] * q[:, i]


class _BranchAndBound:
    """
    Depth-first search over variables in index order, 0-branch first.

    Bound for a partial assignment: the energy of the fixed part plus, for
    each free variable, `min(0, linear_i + sum_j min(0, Q_ij))` over free
    `j != i`, valid since `Q_ij x_i x_j >= min(0, Q_ij) x_i` on binaries.
    """

    def __init__(self, q: QuboInstance, deadline: float) -> None:
        self.q = q.q
        self.size = q.size
        self.tol = energy_tolerance(q)
        self.deadline = deadline
        off = self.q - np.diag(np.diag(self.q))
        negative = np.minimum(off, 0.0)
        # suffix[i, d] = sum_{j >= d} min(0, Q_ij)
        self.suffix = np.concatenate(
            [np.cumsum(negative[:, ::-1], axis=1)[:, ::-1], np.zeros((self.size, 1))],
            axis=1,
        )
        self.nodes = 0
        self.timed_out = False
        self.incumbent = _greedy_descent(self.q)
        self.incumbent_value = float(self.incumbent @ self.q @ self.incumbent)

    def _offer(self, x: np.ndarray, value: float) -> None:
        if value < self.incumbent_value - self.tol or (
            value <= self.incumbent_value + self.tol and tuple(x) < tuple(self.incumbent)
        ):
            self.incumbent, self.incumbent_value = x.copy(), value

    def _visit(self, depth: int, x: np.ndarray, fixed_value: float, linear: np.ndarray) -> None:
        self.nodes += 1
        if self.nodes % CLOCK_INTERVAL == 0 and time.perf_counter() > self.deadline:
            self.timed_out = True
        if self.timed_out:
            return
        if depth == self.size:
            self._offer(x, fixed_value)
            return
        bound = fixed_value + float(
            np.minimum(0.0, linear[depth:] + self.suffix[depth:, depth]).sum(),
        )
        if bound > self.incumbent_value + self.tol:
            return
        for value in (0.0, 1.0):
            x[depth] = value
            if value:
                self._visit(depth + 1, x, fixed_value + linear[depth], linear + 2.0 * self.q[:, depth])
            else:
                self._visit(depth + 1, x, fixed_value, linear)
        x[depth] = 0.0

    def run(self) -> tuple[np.ndarray, bool]:
        self._visit(0, np.zeros(self.size), 0.0, np.diag(self.q).copy())
        if self.timed_out:
            logger.warning('branch and bound hit its time limit after %d nodes', self.nodes)
        return self.incumbent, not self.timed_out


def solve_exact(
    q: QuboInstance,
    time_limit: float = EXACT_TIME_LIMIT_SECONDS,
    *,
    method: ExactMethod = ExactMethod.AUTO,
    exhaustive_max: int = EXHAUSTIVE_MAX_SIZE,
    hard_cap: int = EXACT_HARD_CAP,
) -> SolveReport:
    """
    Global minimiser of `h^T Q h`, lexicographically smallest among optima.

    When the time limit expires first, the best incumbent is returned with
    `optimal=False`.
    """

    if q.size > hard_cap:
        raise CapacityError(f'exact solver accepts at most {hard_cap} variables, got {q.size}')
    method = ExactMethod(method)
    if method is ExactMethod.AUTO:
        method = ExactMethod.ENUMERATE if q.size <= exhaustive_max else ExactMethod.BRANCH_AND_BOUND
    if method is ExactMethod.ENUMERATE and q.size > EXHAUSTIVE_GUARD_SIZE:
        raise CapacityError(f'enumeration is limited to {EXHAUSTIVE_GUARD_SIZE} variables, got {q.size}')

    started = time.perf_counter()
    deadline = started + time_limit
    degenerate: Optional[bool] = None
    if method is ExactMethod.ENUMERATE:
        state, optimal, degenerate, evaluated = _enumerate(q, deadline)
    else:
        search = _BranchAndBound(q, deadline)
        state, optimal = search.run()
        evaluated = search.nodes

    best_energy = energy(q, state)
    logger.debug(
        'exact (%s): energy %.6g, optimal=%s, %d evaluated', method.value, best_energy, optimal, evaluated,
    )
    return SolveReport(
        best_state=BinaryVector(data=state),
        best_energy=best_energy,
        best_objective=best_energy + q.offset,
        samples_evaluated=evaluated,
        wall_time=time.perf_counter() - started,
        solver=SolverKind.EXACT,
        optimal=optimal,
        degenerate=degenerate,
    )
