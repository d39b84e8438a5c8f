"""Toy linear scattering models.

A problem is a background Green's function ``G``, an all-on potential ``V``
that is block diagonal over a design partition, and an incident field ``s``.
A binary design switches the potential on or off block by block; the induced
polarization ``t`` then solves ``(V^{-1} - G)_rr t_r = s_r`` on the active
index set ``r`` and vanishes elsewhere.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from .exceptions import (
    BlockStructureError,
    DesignCapExceeded,
    DimensionMismatch,
    PassivityViolation,
    SingularDesign,
)
from .quadratic import QuadraticForm, hermitian_part, lambda_min

MAX_ENUMERATION_BLOCKS = 20
COND_LIMIT = 1e14


@dataclass(frozen=True)
class DesignPartition:
    """Disjoint index blocks covering ``range(dim)``."""

    blocks: tuple

    def __post_init__(self):
        blocks = tuple(tuple(int(i) for i in b) for b in self.blocks)
        object.__setattr__(self, "blocks", blocks)
        flat = [i for b in blocks for i in b]
        if any(len(b) == 0 for b in blocks):
            raise BlockStructureError("empty design block")
        if len(set(flat)) != len(flat):
            raise BlockStructureError("design blocks overlap")
        if sorted(flat) != list(range(len(flat))):
            raise BlockStructureError("design blocks do not cover the index range")

    @property
    def J(self) -> int:
        return len(self.blocks)

    @property
    def dim(self) -> int:
        return sum(len(b) for b in self.blocks)

    @classmethod
    def contiguous(cls, dim: int, J: int) -> "DesignPartition":
        if not 1 <= J <= dim:
            raise BlockStructureError(f"cannot split dim={dim} into J={J} blocks")
        return cls(tuple(tuple(b) for b in np.array_split(np.arange(dim), J)))

    def labels(self) -> np.ndarray:
        """Block index of every site."""
        lab = np.empty(self.dim, dtype=int)
        for j, b in enumerate(self.blocks):
            lab[list(b)] = j
        return lab

    def mask(self, rho) -> np.ndarray:
        """Boolean site mask of the blocks switched on by ``rho``."""
        rho = np.asarray(rho, dtype=bool)
        if rho.size != self.J:
            raise DimensionMismatch(f"design of length {rho.size} for J={self.J}")
        return rho[self.labels()]

    def off_block_mass(self, P) -> float:
        """Frobenius norm of ``P`` outside the block diagonal, relative."""
        P = np.asarray(P)
        lab = self.labels()
        same = lab[:, None] == lab[None, :]
        total = np.linalg.norm(P)
        if total == 0:
            return 0.0
        return float(np.linalg.norm(np.where(same, 0, P)) / total)

    def projector(self, j: int) -> np.ndarray:
        """``I`` restricted to block ``j``."""
        P = np.zeros((self.dim, self.dim), dtype=complex)
        idx = list(self.blocks[j])
        P[idx, idx] = 1.0
        return P


@dataclass(frozen=True)
class Design:
    rho: tuple

    def __post_init__(self):
        rho = tuple(int(x) for x in np.asarray(self.rho).reshape(-1))
        if any(x not in (0, 1) for x in rho):
            raise ValueError(f"design entries must be 0/1, got {rho}")
        object.__setattr__(self, "rho", rho)

    def __len__(self):
        return len(self.rho)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.rho, dtype=dtype)

    @classmethod
    def empty(cls, J: int) -> "Design":
        return cls((0,) * J)

    @classmethod
    def full(cls, J: int) -> "Design":
        return cls((1,) * J)


def as_design(rho) -> Design:
    return rho if isinstance(rho, Design) else Design(rho)


@dataclass(frozen=True)
class ScatteringProblem:
    """Immutable toy scattering model; passivity is validated on construction."""

    G: np.ndarray
    V: np.ndarray
    partition: DesignPartition
    s: np.ndarray
    eps_passivity: float
    seed: int | None = None
    Vinv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        G = np.array(self.G, dtype=complex)
        V = np.array(self.V, dtype=complex)
        s = np.array(self.s, dtype=complex).reshape(-1)
        d = s.size
        if G.shape != (d, d) or V.shape != (d, d) or self.partition.dim != d:
            raise DimensionMismatch("G, V, s and partition disagree in dimension")
        if self.partition.off_block_mass(V) > 0:
            raise BlockStructureError("V is not block diagonal over the partition")
        Vinv = np.zeros_like(V)
        for b in self.partition.blocks:
            idx = np.ix_(b, b)
            Vinv[idx] = np.linalg.inv(V[idx])
        for arr in (G, V, s, Vinv):
            arr.flags.writeable = False
        object.__setattr__(self, "G", G)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "Vinv", Vinv)
        object.__setattr__(self, "eps_passivity", float(self.eps_passivity))
        check_passivity(self)

    @property
    def dim(self) -> int:
        return self.s.size

    @property
    def J(self) -> int:
        return self.partition.J


def passivity_margins(p: ScatteringProblem) -> tuple[float, float]:
    """``(min_j lambda_min((i D_j)^h |d_j), lambda_min((i U)^h))``."""
    block = min(
        lambda_min(hermitian_part(1j * p.Vinv[np.ix_(b, b)])) for b in p.partition.blocks
    )
    U = p.Vinv - p.G
    return block, lambda_min(hermitian_part(1j * U))


def check_passivity(p: ScatteringProblem) -> None:
    if not p.eps_passivity > 0:
        raise PassivityViolation(f"eps_passivity must be positive, got {p.eps_passivity}")
    block, lam_u = passivity_margins(p)
    if block <= p.eps_passivity:
        raise PassivityViolation(
            f"block passivity lambda_min = {block:.6g} <= eps = {p.eps_passivity:.6g}", block
        )
    if lam_u <= p.eps_passivity:
        raise PassivityViolation(
            f"lambda_min((iU)^h) = {lam_u:.6g} <= eps = {p.eps_passivity:.6g}", lam_u
        )


def toy_kernel(dim: int, coupling: float, rng: np.random.Generator) -> np.ndarray:
    """``G = c K + i (c^2/2) K^2`` for a random real tridiagonal ``K``.

    ``-i G^s = (c^2/2) K^2`` is PSD, a crude stand-in for radiation loss.
    """
    K = np.diag(rng.uniform(-0.5, 0.5, dim))
    off = 1.0 + 0.2 * rng.uniform(-1.0, 1.0, dim - 1)
    K += np.diag(off, 1) + np.diag(off, -1)
    return coupling * K + 0.5j * coupling**2 * (K @ K)


def build_toy_problem(
    dim: int, J: int, loss: float, coupling: float = 0.5, seed: int = 0
) -> ScatteringProblem:
    """Seeded desk-scale scattering model.

    The potential takes one complex value ``v`` on every block with
    ``1/v = chi - i*loss``, so each block dissipates at rate ``loss``.
    Raises :class:`PassivityViolation` for ``loss <= 0``.
    """
    if dim < 1:
        raise ValueError("dim must be positive")
    partition = DesignPartition.contiguous(dim, J)
    rng = np.random.default_rng(seed)
    G = toy_kernel(dim, coupling, rng)
    chi = rng.uniform(0.5, 1.5)
    s = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    s /= np.linalg.norm(s)
    if not loss > 0:
        raise PassivityViolation(
            f"block passivity lambda_min = {float(loss):.6g} is not positive", float(loss)
        )
    v = 1.0 / complex(chi, -loss)
    V = v * np.eye(dim)
    lam_u = lambda_min(hermitian_part(1j * (np.eye(dim) / v - G)))
    eps = 0.5 * min(loss, lam_u)
    return ScatteringProblem(G, V, partition, s, eps, seed=seed)


def _active(p: ScatteringProblem, rho) -> np.ndarray:
    rho = as_design(rho)
    if len(rho) != p.J:
        raise DimensionMismatch(f"design of length {len(rho)} for J={p.J}")
    return np.flatnonzero(p.partition.mask(rho.rho))


def solve_design(p: ScatteringProblem, rho) -> np.ndarray:
    """Exact polarization ``t`` induced by design ``rho``."""
    r = _active(p, rho)
    t = np.zeros(p.dim, dtype=complex)
    if r.size == 0:
        return t
    M = p.Vinv[np.ix_(r, r)] - p.G[np.ix_(r, r)]
    cond = np.linalg.cond(M)
    if not cond < COND_LIMIT:
        raise SingularDesign(f"active operator condition number {cond:.3e}")
    t[r] = np.linalg.solve(M, p.s[r])
    return t


def design_residual(p: ScatteringProblem, rho, t) -> float:
    """Relative residual of the restricted T-operator relation."""
    r = _active(p, rho)
    t = np.asarray(t)
    if r.size == 0:
        return float(np.linalg.norm(t))
    M = p.Vinv[np.ix_(r, r)] - p.G[np.ix_(r, r)]
    res = np.linalg.norm(M @ t[r] - p.s[r])
    off = np.linalg.norm(np.delete(t, r))
    return float((res + off) / max(np.linalg.norm(p.s[r]), np.finfo(float).tiny))


def enumerate_designs(p: ScatteringProblem) -> Iterator[tuple[Design, np.ndarray]]:
    """All ``2^J`` designs in lexicographic order with their exact fields."""
    if p.J > MAX_ENUMERATION_BLOCKS:
        raise DesignCapExceeded(f"J={p.J} exceeds the enumeration cap {MAX_ENUMERATION_BLOCKS}")
    for rho in itertools.product((0, 1), repeat=p.J):
        d = Design(rho)
        yield d, solve_design(p, d)


@dataclass(frozen=True)
class BackgroundOperators:
    Vb: np.ndarray
    Vc: np.ndarray
    Wb_inv: np.ndarray
    Wc_inv: np.ndarray


def background_operators(p: ScatteringProblem, b) -> BackgroundOperators:
    """Potential split into a background ``Vb`` and its complement ``Vc``.

    ``Vc`` carries ``V`` exactly on the blocks where ``b`` is off, so
    ``Vb + Vc == V`` entrywise.
    """
    b = as_design(b)
    on = p.partition.mask(b.rho)
    keep_b = on[:, None] & on[None, :]
    keep_c = ~on[:, None] & ~on[None, :]
    Vb = np.where(keep_b, p.V, 0)
    Vc = np.where(keep_c, p.V, 0)
    eye = np.eye(p.dim)
    return BackgroundOperators(Vb, Vc, eye - Vb @ p.G, eye - Vc @ p.G)


def build_U(p: ScatteringProblem) -> np.ndarray:
    """``U = V^{-1} - G``, re-checking ``(iU)^h > eps``."""
    U = p.Vinv - p.G
    lam = lambda_min(hermitian_part(1j * U))
    if lam <= p.eps_passivity:
        raise PassivityViolation(f"lambda_min((iU)^h) = {lam:.6g}", lam)
    return U


def block_diagonal_P(partition: DesignPartition, values: Sequence[complex]) -> np.ndarray:
    """``sum_j values[j] * I|d_j``."""
    return np.diag(np.asarray(values, dtype=complex)[partition.labels()])


OBJECTIVES = ("extinction", "absorption", "scattering")


def power_objective(p: ScatteringProblem, kind: str = "extinction") -> QuadraticForm:
    """Power quantities as quadratic forms in ``t``.

    ``extinction = Im(s^H t)``, ``absorption = t^H (i V^{-1})^h t`` and
    ``scattering = t^H (-(i G)^h) t``; on every design the first equals the
    sum of the other two.
    """
    zero = np.zeros(p.dim, dtype=complex)
    if kind == "extinction":
        return QuadraticForm(0.5j * p.s, np.zeros((p.dim, p.dim)))
    if kind == "absorption":
        return QuadraticForm(zero, -hermitian_part(1j * p.Vinv))
    if kind == "scattering":
        return QuadraticForm(zero, hermitian_part(1j * p.G))
    raise ValueError(f"unknown objective {kind!r}; choose from {OBJECTIVES}")
