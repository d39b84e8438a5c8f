"""Dense complex linear algebra and quadratic-form algebra.

A quadratic form here is the real-valued map

    f(t) = 2 Re(t^H s) - t^H A t + v

with ``A`` Hermitian. Every other module builds on :class:`QuadraticForm`.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import DimensionMismatch, IndefiniteMatrix, NotHermitian

#: relative asymmetry accepted (and removed) when building a form
HERMITIAN_RTOL = 1e-8
#: eigenvalue tolerance relative to the operator norm
EIG_RTOL = 1e-10
#: pseudo-inverse cutoff relative to the largest singular value
PINV_RCOND = 1e-12


class Definiteness(enum.Enum):
    POSITIVE_DEFINITE_EPS = "PositiveDefiniteEps"
    POSITIVE_SEMIDEFINITE_EPS = "PositiveSemidefiniteEps"
    BELOW = "Below"


def _frozen(x):
    x = np.array(x, dtype=complex)
    x.flags.writeable = False
    return x


def op_norm(M) -> float:
    """Operator (spectral) norm."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.norm(M, 2))


def eig_tol(A) -> float:
    return EIG_RTOL * op_norm(A)


def hermitian_split(M):
    """Return the Hermitian and skew-Hermitian parts ``(Mh, Ms)`` of ``M``."""
    M = np.asarray(M, dtype=complex)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    Mh = (M + M.conj().T) / 2
    Ms = M - Mh
    return Mh, Ms


def hermitian_part(M):
    return hermitian_split(M)[0]


def lambda_min(A) -> float:
    """Smallest eigenvalue of a Hermitian matrix."""
    A = np.asarray(A, dtype=complex)
    if A.shape[0] == 0:
        return np.inf
    return float(sla.eigh(A, eigvals_only=True, subset_by_index=[0, 0])[0])


def _check_hermitian(A, rtol=HERMITIAN_RTOL):
    scale = max(op_norm(A), np.finfo(float).tiny)
    skew = op_norm(A - A.conj().T) / 2
    if skew > rtol * scale:
        raise NotHermitian(f"relative skew-Hermitian part {skew / scale:.3e} exceeds {rtol:g}")


def definiteness(A, eps: float = 0.0) -> Definiteness:
    """Classify ``lambda_min(A)`` against ``eps``.

    The boundary band has half-width ``1e-10 * ||A||``.
    """
    A = np.asarray(A, dtype=complex)
    if eps < 0:
        raise ValueError("eps must be nonnegative")
    _check_hermitian(A)
    A = hermitian_part(A)
    lam = lambda_min(A)
    tol = eig_tol(A)
    if lam > eps + tol:
        return Definiteness.POSITIVE_DEFINITE_EPS
    if abs(lam - eps) <= tol:
        return Definiteness.POSITIVE_SEMIDEFINITE_EPS
    return Definiteness.BELOW


@dataclass(frozen=True)
class QuadraticForm:
    """``f(t) = 2 Re(t^H s) - t^H A t + v``.

    ``A`` is symmetrized on construction; asymmetry above ``1e-8`` relative
    raises :class:`NotHermitian`.
    """

    s: np.ndarray
    A: np.ndarray
    v: float = 0.0

    def __post_init__(self):
        s = np.asarray(self.s, dtype=complex).reshape(-1)
        A = np.asarray(self.A, dtype=complex)
        if A.ndim != 2 or A.shape != (s.size, s.size):
            raise DimensionMismatch(f"A has shape {A.shape}, s has length {s.size}")
        if not (np.all(np.isfinite(s)) and np.all(np.isfinite(A))):
            raise ValueError("non-finite entries in quadratic form")
        _check_hermitian(A)
        object.__setattr__(self, "s", _frozen(s))
        object.__setattr__(self, "A", _frozen(hermitian_part(A)))
        object.__setattr__(self, "v", float(np.real(self.v)))

    @property
    def dim(self) -> int:
        return self.s.size

    @classmethod
    def zero(cls, dim: int) -> "QuadraticForm":
        return cls(np.zeros(dim), np.zeros((dim, dim)), 0.0)

    def __call__(self, t) -> float:
        return eval_form(self, t)

    def scaled(self, c: float) -> "QuadraticForm":
        return QuadraticForm(c * self.s, c * self.A, c * self.v)

    def __add__(self, other: "QuadraticForm") -> "QuadraticForm":
        return combine_forms([1.0, 1.0], [self, other])

    def __sub__(self, other: "QuadraticForm") -> "QuadraticForm":
        return combine_forms([1.0, -1.0], [self, other])

    def gradient(self, t):
        """Wirtinger-style ascent direction: ``df = 2 Re(dt^H (s - A t))``."""
        return self.s - self.A @ np.asarray(t, dtype=complex)


def eval_form(f: QuadraticForm, t) -> float:
    t = np.asarray(t, dtype=complex).reshape(-1)
    if t.size != f.dim:
        raise DimensionMismatch(f"vector of length {t.size} for form of dim {f.dim}")
    lin = 2.0 * np.real(np.vdot(t, f.s))
    quad = np.vdot(t, f.A @ t)
    return float(lin - quad.real + f.v)


def combine_forms(coeffs: Sequence[float], forms: Sequence[QuadraticForm]) -> QuadraticForm:
    """Real linear combination ``sum_k c_k f_k``, exact componentwise."""
    coeffs = np.asarray(coeffs, dtype=float).reshape(-1)
    if coeffs.size != len(forms):
        raise DimensionMismatch(f"{coeffs.size} coefficients for {len(forms)} forms")
    if not forms:
        raise ValueError("need at least one form")
    dim = forms[0].dim
    if any(f.dim != dim for f in forms):
        raise DimensionMismatch("forms of unequal dimension")
    S = np.array([f.s for f in forms])
    A = np.array([f.A for f in forms])
    v = np.array([f.v for f in forms])
    return QuadraticForm(coeffs @ S, np.tensordot(coeffs, A, axes=1), float(coeffs @ v))


def solve_hermitian(A, b, rcond: float = PINV_RCOND, return_residual: bool = False):
    """Least-norm minimizer of ``||A x - b||`` for Hermitian PSD ``A``.

    Falls back to the eigen pseudo-inverse when ``lambda_min(A)`` is within
    ``1e-10 ||A||`` of zero; eigenvalues under ``rcond * sigma_max`` are
    treated as null directions.
    """
    A = np.asarray(A, dtype=complex)
    b = np.asarray(b, dtype=complex).reshape(-1)
    if A.shape != (b.size, b.size):
        raise DimensionMismatch(f"A has shape {A.shape}, b has length {b.size}")
    _check_hermitian(A)
    A = hermitian_part(A)
    w, V = sla.eigh(A)
    tol = EIG_RTOL * max(abs(w[0]), abs(w[-1])) if w.size else 0.0
    if w.size and w[0] < -tol:
        raise IndefiniteMatrix(f"lambda_min = {w[0]:.3e} below -{tol:.3e}")
    if w.size and w[0] > tol:
        x = sla.cho_solve(sla.cho_factor(A), b)
    else:
        cutoff = rcond * (abs(w[-1]) if w.size else 0.0)
        inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
        x = V @ (inv * (V.conj().T @ b))
    if return_residual:
        return x, float(np.linalg.norm(A @ x - b))
    return x
