from enum import Enum
from typing import Any, Optional

import numpy as np
import pydantic

from nbmf_annealing.core import BinaryVector, FrozenArrayModel, RngSpec


class SolverKind(str, Enum):
    """The H-step methods compared in one run (the exact oracle stands in for a commercial MIP solver)."""

    EXACT = 'Exact'
    PGD_ROUND = 'PGDRound'
    FA = 'FA'
    RA = 'RA'
    RA_FA = 'RA+FA'
    RA_PGD = 'RA+PGD'

    @classmethod
    def _missing_(cls, value: object) -> Optional['SolverKind']:
        if isinstance(value, str):
            wanted = value.strip().lower().replace('_', '+')
            aliases = {'pgd': cls.PGD_ROUND, 'pgd+round': cls.PGD_ROUND}
            if wanted in aliases:
                return aliases[wanted]
            for member in cls:
                if member.value.lower() == wanted:
                    return member
        return None

    @property
    def uses_previous_h(self) -> bool:
        return self in (SolverKind.PGD_ROUND, SolverKind.RA, SolverKind.RA_PGD)

    @property
    def requires_previous_h(self) -> bool:
        return self in (SolverKind.RA, SolverKind.RA_PGD)

    @property
    def is_stochastic(self) -> bool:
        return self not in (SolverKind.EXACT, SolverKind.PGD_ROUND)


class SolveReport(FrozenArrayModel):
    """
    Outcome of one binary column subproblem.

    `samples_evaluated` counts complete assignments whose energy was taken:
    enumerated states or visited search nodes for the exact solver, reads for
    the annealers, one per rounding for PGDRound.
    """

    best_state: BinaryVector
    best_energy: float
    best_objective: float
    samples_evaluated: int = pydantic.Field(ge=0)
    wall_time: float = pydantic.Field(ge=0)
    seed: Optional[RngSpec] = None
    solver: SolverKind
    optimal: Optional[bool] = None
    degenerate: Optional[bool] = None
    relaxed: Optional[np.ndarray] = None

    @pydantic.field_validator('relaxed', mode='before')
    @classmethod
    def _validate_relaxed(cls, value: Any) -> Optional[np.ndarray]:
        if value is None:
            return None
        array = np.array(value, dtype=np.float64).reshape(-1)
        array.flags.writeable = False
        return array

    def with_solver(self, solver: SolverKind, **update: Any) -> 'SolveReport':
        return self.model_copy(update={'solver': solver, **update})
