"""Incremental assembly of dense LPs / MILPs used by the master and pricing builders."""

from __future__ import annotations

import numpy as np

from .lp import LpProblem
from .milp import MilpProblem


class LinearModel:
    def __init__(self, sense: str):
        self.sense = sense
        self._lb: list[float] = []
        self._ub: list[float] = []
        self._cost: list[float] = []
        self._binary: list[int] = []
        self._rows: list[dict[int, float]] = []
        self._senses: list[str] = []
        self._rhs: list[float] = []
        self.labels: list[str] = []

    @property
    def num_vars(self) -> int:
        return len(self._cost)

    def add_var(self, lb=0.0, ub=np.inf, cost=0.0, binary=False, label="") -> int:
        j = len(self._cost)
        self._lb.append(float(lb))
        self._ub.append(float(ub))
        self._cost.append(float(cost))
        if binary:
            self._binary.append(j)
        self.labels.append(label)
        return j

    def add_vars(self, count, lb=0.0, ub=np.inf, cost=0.0, binary=False, label="") -> list[int]:
        return [self.add_var(lb, ub, cost, binary, f"{label}[{i}]" if label else "") for i in range(count)]

    def set_cost(self, j: int, cost: float):
        self._cost[j] = float(cost)

    def add_row(self, coeffs: dict[int, float], sense: str, rhs: float):
        self._rows.append({int(j): float(v) for j, v in coeffs.items() if v != 0.0})
        self._senses.append(sense)
        self._rhs.append(float(rhs))

    def _assemble(self) -> LpProblem:
        n = self.num_vars
        a = np.zeros((len(self._rows), n))
        for i, row in enumerate(self._rows):
            for j, v in row.items():
                a[i, j] = v
        return LpProblem(
            self.sense,
            np.array(self._cost),
            a,
            tuple(self._senses),
            np.array(self._rhs),
            np.array(self._lb),
            np.array(self._ub),
        )

    def build_lp(self) -> LpProblem:
        if self._binary:
            raise ValueError("model has binary variables; use build_milp")
        return self._assemble()

    def build_milp(self) -> MilpProblem:
        return MilpProblem(self._assemble(), tuple(self._binary))
