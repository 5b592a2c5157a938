from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional

import numpy as np


class SolveStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    LIMIT = "limit"


@dataclass
class SolveReport:
    """Outcome of an LP or MILP solve.

    ``primal`` maps variable names to values; ``x`` holds the same values in
    declaration order. For an optimal status every row is satisfied within the
    solver tolerance and ``gap`` is at most the requested relative MIP gap.
    """

    status: SolveStatus
    objective: float = math.nan
    primal: Dict[str, float] = field(default_factory=dict)
    gap: float = math.inf
    nodes: int = 0
    wall_time: float = 0.0
    x: Optional[np.ndarray] = None
    dual_bound: float = -math.inf
    iterations: int = 0
    message: str = ""
    backend: str = "bundled"
    incumbent_history: List[float] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.status is SolveStatus.OPTIMAL

    def value(self, name: str) -> float:
        return self.primal[name]
