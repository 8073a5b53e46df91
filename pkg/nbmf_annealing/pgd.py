"""
Box-constrained projected gradient descent for the least-squares blocks of ALS.

Step sizes follow the Armijo rule along the projection arc: the candidate
`x(a) = P(x - a * grad)` is accepted once
`f(x(a)) - f(x) <= sigma * grad . (x(a) - x)`. The accepted step size of one
iteration seeds the next; an accepted first guess is enlarged by `1 / beta`
while it stays acceptable and still moves the point.
"""
import logging
from enum import Enum
from typing import Any, NamedTuple, Optional, Union

import numpy as np
import pydantic

from nbmf_annealing.core import BoxVector, FrozenArrayModel, MatrixLike, as_array
from nbmf_annealing.errors import DimensionError, FeasibilityError, NumericError, shape_mismatch

logger = logging.getLogger(__name__)

# Enlarging steps beyond this many factors of 1/beta is never useful for bounded data
MAX_STEP_GROWTH = 20


class PgdConfig(pydantic.BaseModel):
    model_config = pydantic.ConfigDict(frozen=True)

    max_iters: int = pydantic.Field(default=1000, gt=0)
    tol: float = pydantic.Field(default=1e-6, gt=0)
    beta: float = pydantic.Field(default=0.1, gt=0, lt=1)
    sigma: float = pydantic.Field(default=0.01, gt=0, lt=1)
    alpha_init: float = pydantic.Field(default=1.0, gt=0)
    max_backtracks: int = pydantic.Field(default=60, gt=0)


class StepMode(str, Enum):
    W_STEP = 'W-step'
    H_STEP = 'H-step'


Bound = Union[float, np.ndarray]


def _as_matrix(V: MatrixLike) -> np.ndarray:
    array = as_array(V)
    return array.reshape(-1, 1) if array.ndim == 1 else array


def _variable_shape(mode: StepMode, V: np.ndarray, fixed: np.ndarray) -> tuple[int, int]:
    if V.ndim != 2 or fixed.ndim != 2:
        raise shape_mismatch(mode.value, V=V.shape, fixed_factor=fixed.shape)
    if mode is StepMode.W_STEP:
        if fixed.shape[1] != V.shape[1]:
            raise shape_mismatch(mode.value, V=V.shape, H=fixed.shape)
        return V.shape[0], fixed.shape[0]
    if fixed.shape[0] != V.shape[0]:
        raise shape_mismatch(mode.value, V=V.shape, W=fixed.shape)
    return fixed.shape[1], V.shape[1]


class LeastSquaresProblem(FrozenArrayModel):
    """
    One block of `||V - WH||_F^2` with the other factor held fixed.

    For the W-step the variable is W (m x k) and `fixed_factor` is H; for the
    H-step the variable is H (k x n) and `fixed_factor` is W. Bounds are
    broadcast to the variable's shape.
    """

    mode: StepMode
    V: np.ndarray
    fixed_factor: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    @pydantic.model_validator(mode='before')
    @classmethod
    def _broadcast(cls, values: Any) -> Any:
        if not isinstance(values, dict):
            return values
        V = np.array(_as_matrix(values['V']), dtype=np.float64)
        fixed = np.array(as_array(values['fixed_factor']), dtype=np.float64)
        mode = StepMode(values['mode'])
        shape = _variable_shape(mode, V, fixed)
        lower = np.broadcast_to(np.asarray(values.get('lower', 0.0), dtype=np.float64), shape).copy()
        upper = np.broadcast_to(np.asarray(values.get('upper', np.inf), dtype=np.float64), shape).copy()
        if (lower > upper).any():
            raise ValueError('lower must not exceed upper')
        for array in (V, fixed, lower, upper):
            array.flags.writeable = False
        return {'mode': mode, 'V': V, 'fixed_factor': fixed, 'lower': lower, 'upper': upper}

    @classmethod
    def w_step(cls, V: MatrixLike, H: MatrixLike) -> 'LeastSquaresProblem':
        _variable_shape(StepMode.W_STEP, _as_matrix(V), as_array(H))
        return cls(mode=StepMode.W_STEP, V=V, fixed_factor=H, lower=0.0, upper=np.inf)

    @classmethod
    def h_step(cls, V: MatrixLike, W: MatrixLike, *, upper: Bound = np.inf) -> 'LeastSquaresProblem':
        _variable_shape(StepMode.H_STEP, _as_matrix(V), as_array(W))
        return cls(mode=StepMode.H_STEP, V=V, fixed_factor=W, lower=0.0, upper=upper)

    @classmethod
    def relaxed_h_step(cls, V: MatrixLike, W: MatrixLike) -> 'LeastSquaresProblem':
        return cls.h_step(V, W, upper=1.0)

    @property
    def variable_shape(self) -> tuple[int, int]:
        return self.lower.shape

    def column_start(self, point: Optional[MatrixLike] = None) -> BoxVector:
        """
        Feasible start of a single-column variable together with its box.

        `point` is projected onto the box; without it the start is the box
        centre, or the lower bound where the box is unbounded above.
        """

        if self.variable_shape[1] != 1:
            raise DimensionError(
                f'{self.mode.value}: a column start needs a single-column variable, got {self.variable_shape}',
            )
        lower, upper = self.lower[:, 0], self.upper[:, 0]
        if point is None:
            data = np.where(np.isfinite(upper), (lower + upper) / 2, lower)
        else:
            data = project(as_array(point).reshape(-1), lower, upper)
        return BoxVector(data=data, lower=lower, upper=upper)


def project(x: np.ndarray, lower: Bound, upper: Bound) -> np.ndarray:
    """Projection `max(lower, min(upper, x))` onto a box."""

    x = np.asarray(x, dtype=np.float64)
    for name, bound in (('lower', lower), ('upper', upper)):
        if np.ndim(bound) > 0 and np.shape(bound) != x.shape:
            raise DimensionError(f'{name} bound has shape {np.shape(bound)}, expected {x.shape}')
    return np.maximum(lower, np.minimum(upper, x))


def _box_point(problem: LeastSquaresProblem, box: BoxVector) -> np.ndarray:
    x = _check_point(problem, box.data)
    if not (np.array_equal(box.lower.reshape(x.shape), problem.lower)
            and np.array_equal(box.upper.reshape(x.shape), problem.upper)):
        raise FeasibilityError(f'{problem.mode.value}: start box differs from the problem box')
    return x


def _check_point(problem: LeastSquaresProblem, point: MatrixLike) -> np.ndarray:
    x = as_array(point)
    if x.ndim == 1 and problem.variable_shape[1] == 1:
        x = x.reshape(-1, 1)
    if x.shape != problem.variable_shape:
        raise shape_mismatch(problem.mode.value, point=x.shape, expected=problem.variable_shape)
    return x


def _residual(problem: LeastSquaresProblem, x: np.ndarray) -> np.ndarray:
    if problem.mode is StepMode.W_STEP:
        return x @ problem.fixed_factor - problem.V
    return problem.fixed_factor @ x - problem.V


def objective(problem: LeastSquaresProblem, point: MatrixLike) -> float:
    residual = _residual(problem, _check_point(problem, point))
    return float(np.sum(residual * residual))


def gradient(problem: LeastSquaresProblem, point: MatrixLike) -> np.ndarray:
    """Exact gradient: `2(WH - V)H^T` for the W-step, `2W^T(WH - V)` for the H-step."""

    x = _check_point(problem, point)
    residual = _residual(problem, x)
    if problem.mode is StepMode.W_STEP:
        return 2.0 * residual @ problem.fixed_factor.T
    return 2.0 * problem.fixed_factor.T @ residual


def projected_gradient_norm(x: np.ndarray, grad: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> float:
    """Infinity norm of the projected gradient; zero exactly at constrained stationary points."""

    projected = np.where(
        x <= lower,
        np.minimum(grad, 0.0),
        np.where(x >= upper, np.maximum(grad, 0.0), grad),
    )
    return float(np.max(np.abs(projected))) if projected.size else 0.0


class PgdResult(NamedTuple):
    solution: np.ndarray
    iterations: int
    final_pg_norm: float


class _Quadratic:
    """Objective and gradient of one block through precomputed Gram products."""

    def __init__(self, problem: LeastSquaresProblem) -> None:
        fixed, V = problem.fixed_factor, problem.V
        self.w_step = problem.mode is StepMode.W_STEP
        self.problem = problem
        if self.w_step:
            self.gram = fixed @ fixed.T
            self.cross = V @ fixed.T
        else:
            self.gram = fixed.T @ fixed
            self.cross = fixed.T @ V

    def value(self, x: np.ndarray) -> float:
        residual = _residual(self.problem, x)
        return float(np.sum(residual * residual))

    def grad(self, x: np.ndarray) -> np.ndarray:
        if self.w_step:
            return 2.0 * (x @ self.gram - self.cross)
        return 2.0 * (self.gram @ x - self.cross)


def pgd_solve(
    problem: LeastSquaresProblem,
    start: Union[MatrixLike, BoxVector],
    config: PgdConfig,
) -> PgdResult:
    """
    Minimize one least-squares block over its box by projected gradient descent.

    Terminates when the projected-gradient infinity norm drops to `config.tol`,
    after `config.max_iters` accepted steps, or when no step size satisfies the
    Armijo condition. Every iterate is feasible and the objective never
    increases.
    A `BoxVector` start must carry the problem's own bounds.
    """

    point = _box_point(problem, start) if isinstance(start, BoxVector) else _check_point(problem, start)
    x = np.array(point, dtype=np.float64)
    lower, upper = problem.lower, problem.upper
    if np.isnan(x).any() or (x < lower).any() or (x > upper).any():
        raise FeasibilityError(f'{problem.mode.value}: start point violates the box constraints')

    quadratic = _Quadratic(problem)
    f = quadratic.value(x)
    if not np.isfinite(f):
        raise NumericError(f'{problem.mode.value}: objective is not finite at the start point')
    g = quadratic.grad(x)
    pg_norm = projected_gradient_norm(x, g, lower, upper)
    alpha = config.alpha_init
    iterations = 0

    def trial(step: float) -> tuple[np.ndarray, float, bool]:
        candidate = np.maximum(lower, np.minimum(upper, x - step * g))
        value = quadratic.value(candidate)
        accepted = bool(np.isfinite(value)) and value - f <= config.sigma * float(np.sum(g * (candidate - x)))
        return candidate, value, accepted

    while iterations < config.max_iters and pg_norm > config.tol:
        candidate, value, accepted = trial(alpha)
        if accepted:
            for _ in range(MAX_STEP_GROWTH):
                larger, larger_value, larger_accepted = trial(alpha / config.beta)
                if not larger_accepted or np.array_equal(larger, candidate):
                    break
                alpha, candidate, value = alpha / config.beta, larger, larger_value
        else:
            for _ in range(config.max_backtracks):
                alpha *= config.beta
                candidate, value, accepted = trial(alpha)
                if not np.isfinite(value):
                    raise NumericError(f'{problem.mode.value}: objective became non-finite during line search')
                if accepted:
                    break
            if not accepted:
                logger.debug('%s: no Armijo step after %d backtracks', problem.mode.value, config.max_backtracks)
                break

        if np.array_equal(candidate, x):
            break
        x, f = candidate, value
        g = quadratic.grad(x)
        pg_norm = projected_gradient_norm(x, g, lower, upper)
        iterations += 1

    logger.debug('%s: %d iterations, projected gradient norm %.3e', problem.mode.value, iterations, pg_norm)
    return PgdResult(solution=x, iterations=iterations, final_pg_norm=pg_norm)
