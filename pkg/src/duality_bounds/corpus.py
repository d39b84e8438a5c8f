"""Seeded desk-scale regression corpus."""
from __future__ import annotations

from dataclasses import dataclass

from .constraints import ConstraintSet, default_family
from .dual import LagrangianProblem
from .scattering import Design, ScatteringProblem, build_toy_problem, power_objective


@dataclass(frozen=True)
class CorpusEntry:
    dim: int
    J: int
    loss: float
    coupling: float
    seed: int
    objective: str = "extinction"

    def problem(self) -> ScatteringProblem:
        return build_toy_problem(self.dim, self.J, self.loss, self.coupling, self.seed)

    def backgrounds(self) -> list:
        """Two nontrivial backgrounds: alternating blocks and the first half."""
        alt = Design(tuple((j + 1) % 2 for j in range(self.J)))
        half = Design(tuple(int(j < self.J // 2) for j in range(self.J)))
        return [alt, half]

    def constraints(self, p: ScatteringProblem | None = None) -> ConstraintSet:
        return default_family(p or self.problem(), self.backgrounds())

    def lagrangian(self, p: ScatteringProblem | None = None) -> LagrangianProblem:
        p = p or self.problem()
        return LagrangianProblem.build(power_objective(p, self.objective), self.constraints(p))


_SHAPES = [(6, 3), (8, 4), (10, 5), (12, 6), (16, 8)]
_LOSSES = [0.1, 0.2, 0.3, 0.5]


def regression_corpus(n: int = 20) -> list[CorpusEntry]:
    """``n`` instances cycling through shapes (dim <= 16, J <= 8) and losses."""
    out = []
    for i in range(n):
        dim, J = _SHAPES[i % len(_SHAPES)]
        loss = _LOSSES[(i // len(_SHAPES)) % len(_LOSSES)]
        coupling = 0.5 + 0.1 * (i % 4)
        out.append(CorpusEntry(dim, J, loss, coupling, seed=100 + i))
    return out
