"""Quadratic equality constraints satisfied by every physical design.

Three generators are provided:

* :func:`compact_constraint` -- resistive-power conservation, the one
  positive-definite constraint that makes the relaxed feasible set bounded;
* :func:`gen_constraint_simple` -- ``Re(t^H P s) = t^H (P U)^h t`` for any
  block-diagonal ``P``;
* :func:`gen_constraint_background` -- the same relation written relative to
  a background design ``b``.

All of them vanish on ``solve_design(p, rho)`` for every binary ``rho``.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .exceptions import BlockStructureError, PreconditionViolation
from .quadratic import QuadraticForm, eval_form, hermitian_part, op_norm
from .scattering import (
    Design,
    ScatteringProblem,
    as_design,
    background_operators,
    build_U,
    enumerate_designs,
)

BLOCK_RTOL = 1e-12
DEDUP_TOL = 1e-12


class ConstraintKind(enum.Enum):
    EQUALITY = "Equality"
    #: ``form(t) >= 0`` is required; its multiplier is sign constrained
    INEQUALITY = "InequalityLE"


@dataclass(frozen=True)
class Constraint:
    form: QuadraticForm
    kind: ConstraintKind = ConstraintKind.EQUALITY
    label: str = ""

    def __call__(self, t) -> float:
        return eval_form(self.form, t)

    def violation(self, t) -> float:
        """Amount by which ``t`` fails this constraint (0 when satisfied)."""
        val = self(t)
        if self.kind is ConstraintKind.EQUALITY:
            return abs(val)
        return max(0.0, -val)

    def scale(self, t) -> float:
        """Magnitude used to normalize residuals at ``t``."""
        nt = np.linalg.norm(t)
        return float(
            np.linalg.norm(self.form.s) * nt + op_norm(self.form.A) * nt**2 + abs(self.form.v)
        )


@dataclass(frozen=True)
class ConstraintSet:
    """Ordered constraints; ``compact_index`` marks the resistive-power one."""

    constraints: tuple
    compact_index: int = 0
    _inequality: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        cons = tuple(self.constraints)
        object.__setattr__(self, "constraints", cons)
        if not 0 <= self.compact_index < len(cons):
            raise PreconditionViolation("compact_index out of range")
        dims = {c.form.dim for c in cons}
        if len(dims) != 1:
            raise PreconditionViolation("constraints of unequal dimension")
        compact = cons[self.compact_index]
        if compact.kind is not ConstraintKind.EQUALITY:
            raise PreconditionViolation("the compact constraint must be an equality")
        ineq = np.array([c.kind is ConstraintKind.INEQUALITY for c in cons])
        ineq.flags.writeable = False
        object.__setattr__(self, "_inequality", ineq)

    def __len__(self):
        return len(self.constraints)

    def __iter__(self):
        return iter(self.constraints)

    def __getitem__(self, k):
        return self.constraints[k]

    @property
    def dim(self) -> int:
        return self.constraints[0].form.dim

    @property
    def compact(self) -> Constraint:
        return self.constraints[self.compact_index]

    @property
    def inequality_mask(self) -> np.ndarray:
        return self._inequality

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.constraints]

    def values(self, t) -> np.ndarray:
        return np.array([c(t) for c in self.constraints])

    def appended(self, c: Constraint) -> "ConstraintSet":
        return ConstraintSet(self.constraints + (c,), self.compact_index)

    def stacked(self):
        """``(S, A, v)`` arrays of shape ``(K, d)``, ``(K, d, d)``, ``(K,)``."""
        S = np.array([c.form.s for c in self.constraints])
        A = np.array([c.form.A for c in self.constraints])
        v = np.array([c.form.v for c in self.constraints])
        return S, A, v


def _check_block_diagonal(p: ScatteringProblem, P) -> np.ndarray:
    P = np.asarray(P, dtype=complex)
    if P.shape != (p.dim, p.dim):
        raise BlockStructureError(f"P has shape {P.shape}, expected {(p.dim, p.dim)}")
    mass = p.partition.off_block_mass(P)
    if mass > BLOCK_RTOL:
        raise BlockStructureError(f"P mixes design blocks (off-block mass {mass:.3e})")
    return P


def normalized(c: Constraint) -> Constraint:
    """Rescale so that ``||A||_O = 1``; zero forms are returned unchanged."""
    n = op_norm(c.form.A)
    if n == 0:
        return c
    return Constraint(c.form.scaled(1.0 / n), c.kind, c.label)


def compact_constraint(p: ScatteringProblem) -> Constraint:
    """``s = i s_inc / 2``, ``A = (iU)^h``."""
    U = build_U(p)
    return Constraint(QuadraticForm(0.5j * p.s, hermitian_part(1j * U)), label="compact")


def gen_constraint_simple(p: ScatteringProblem, P, label: str | None = None) -> Constraint:
    """``Re(t^H P s) - t^H (P U)^h t = 0`` for block-diagonal ``P``."""
    P = _check_block_diagonal(p, P)
    U = p.Vinv - p.G
    form = QuadraticForm(0.5 * (P @ p.s), hermitian_part(P @ U))
    return Constraint(form, label=label or "simple")


def gen_constraint_background(
    p: ScatteringProblem, P, b, label: str | None = None
) -> Constraint:
    """Constraint written relative to the background design ``b``.

    ``P`` is taken as already multiplied by the inverse relative potential,
    so no extra factor is applied here.
    """
    P = _check_block_diagonal(p, P)
    ops = background_operators(p, b)
    Wb_H = ops.Wb_inv.conj().T
    Wc_H = ops.Wc_inv.conj().T
    lin = Wb_H @ P @ ops.Vc + Wc_H @ P.conj().T @ ops.Vb
    form = QuadraticForm(0.5 * (lin @ p.s), hermitian_part(Wb_H @ P @ ops.Wc_inv))
    return Constraint(form, label=label or f"background b={_bits(b)}")


def _bits(b) -> str:
    return "".join(str(x) for x in as_design(b).rho)


def _signature(c: Constraint) -> np.ndarray | None:
    vec = np.concatenate([c.form.s, c.form.A.ravel(), [c.form.v]])
    n = np.linalg.norm(vec)
    if n == 0:
        return None
    return vec / n


def deduplicate(constraints: Iterable[Constraint], tol: float = DEDUP_TOL) -> list[Constraint]:
    """Drop zero constraints and duplicates of earlier ones (up to sign)."""
    kept, sigs = [], []
    for c in constraints:
        sig = _signature(normalized(c))
        if sig is None:
            continue
        if any(min(np.linalg.norm(sig - q), np.linalg.norm(sig + q)) < tol for q in sigs):
            continue
        kept.append(c)
        sigs.append(sig)
    return kept


def default_family(
    p: ScatteringProblem, backgrounds: Sequence = (), normalize: bool = True
) -> ConstraintSet:
    """Compact constraint plus ``P = I|d_j`` and ``P = iI|d_j`` for every block,
    in the plain form and relative to each requested background.

    Non-compact constraints are rescaled to unit operator norm.
    """
    cands = [compact_constraint(p)]
    for j in range(p.J):
        Pj = p.partition.projector(j)
        cands.append(gen_constraint_simple(p, Pj, f"simple P=I|d{j}"))
        cands.append(gen_constraint_simple(p, 1j * Pj, f"simple P=iI|d{j}"))
    for b in backgrounds:
        b = as_design(b)
        for j in range(p.J):
            Pj = p.partition.projector(j)
            cands.append(gen_constraint_background(p, Pj, b, f"bg b={_bits(b)} P=I|d{j}"))
            cands.append(gen_constraint_background(p, 1j * Pj, b, f"bg b={_bits(b)} P=iI|d{j}"))
    if normalize:
        cands = [cands[0]] + [normalized(c) for c in cands[1:]]
    return ConstraintSet(tuple(deduplicate(cands)), compact_index=0)


@dataclass
class ValidityReport:
    max_violation: float
    worst_constraint: int | None
    worst_design: Design | None
    tol: float
    n_designs: int

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tol

    def to_dict(self) -> dict:
        return {
            "check": "constraint_validity",
            "max_violation": self.max_violation,
            "worst_constraint": self.worst_constraint,
            "worst_design": None if self.worst_design is None else list(self.worst_design.rho),
            "tol": self.tol,
            "n_designs": self.n_designs,
            "passed": self.passed,
        }


def validate_on_designs(
    cs: ConstraintSet, p: ScatteringProblem, tol: float = 1e-8, designs=None
) -> ValidityReport:
    """Worst normalized constraint violation over exact design solutions.

    ``designs`` defaults to all ``2^J`` designs; pass an explicit (possibly
    empty) iterable of ``(Design, t)`` pairs to restrict the check.
    """
    if designs is None:
        designs = enumerate_designs(p)
    worst, wk, wd, n = 0.0, None, None, 0
    for d, t in designs:
        n += 1
        for k, c in enumerate(cs):
            scale = c.scale(t)
            viol = c.violation(t)
            r = viol / scale if scale > 0 else viol
            if r > worst or wk is None:
                worst, wk, wd = max(r, worst), k, d
    return ValidityReport(float(worst), wk, wd, tol, n)
