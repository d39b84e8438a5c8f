"""Lagrangian dual of a compact QCQP.

For multipliers ``phi`` the Lagrangian is the quadratic form

    L(phi, t) = f_obj(t) + sum_k phi_k f_k(t)
              = 2 Re(t^H s_phi) - t^H A_phi t + v_phi

and the dual function is ``D(phi) = max_{t in C} L(phi, t)`` where
``C = {t : f_compact(t) >= 0}`` is bounded. ``D`` is minimized over
``{phi : A_phi >= eps}`` (with inequality multipliers kept nonnegative).

When the unconstrained maximizer of ``L(phi, .)`` leaves ``C``, the compact
multiplier is raised implicitly ("lifted") until the maximizer lands on the
boundary of ``C``; the value of ``D`` is then read off at the lifted point.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
from scipy.optimize import nnls

from .constraints import ConstraintKind, ConstraintSet
from .exceptions import (
    BoundaryState,
    CoercivityFailure,
    DimensionMismatch,
    IterationLimit,
    LiftBracketFailure,
    MultiplierOutsidePhiEps,
    PreconditionViolation,
)
from .quadratic import EIG_RTOL, PINV_RCOND, QuadraticForm, eval_form, lambda_min, op_norm

DEFAULT_EPS_FACTOR = 1e-6
LIFT_TOL = 1e-10
LIFT_MAX_DOUBLINGS = 60
LIFT_MAX_BISECTIONS = 60
#: changes in D below this (times scale) are rounding noise
ROUNDOFF = 4 * np.finfo(float).eps


class DualStatus(enum.Enum):
    INTERIOR = "Interior"
    ON_EPS_BOUNDARY = "OnEpsBoundary"
    LIFTED = "Lifted"


@dataclass(frozen=True)
class SolverConfig:
    eps_factor: float = DEFAULT_EPS_FACTOR
    grad_tol: float = 1e-8
    max_iters: int = 500
    seed: int = 0


def default_eps(constraints: ConstraintSet, factor: float = DEFAULT_EPS_FACTOR) -> float:
    return factor * lambda_min(constraints.compact.form.A)


@dataclass(frozen=True)
class LagrangianProblem:
    """Objective, constraint set and the ``eps`` of the multiplier domain."""

    objective: QuadraticForm
    constraints: ConstraintSet
    eps: float
    S: np.ndarray = field(init=False, repr=False, compare=False)
    A: np.ndarray = field(init=False, repr=False, compare=False)
    v: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.objective.dim != self.constraints.dim:
            raise DimensionMismatch("objective and constraints differ in dimension")
        if not self.eps > 0:
            raise PreconditionViolation(f"eps must be strictly positive, got {self.eps}")
        if abs(self.objective.v) > 0:
            raise PreconditionViolation("objective constant part must be zero")
        S, A, v = self.constraints.stacked()
        for name, arr in (("S", S), ("A", A), ("v", v)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "eps", float(self.eps))

    @classmethod
    def build(cls, objective, constraints, eps=None, eps_factor=DEFAULT_EPS_FACTOR):
        if eps is None:
            eps = default_eps(constraints, eps_factor)
        return cls(objective, constraints, eps)

    @property
    def dim(self) -> int:
        return self.objective.dim

    @property
    def n_multipliers(self) -> int:
        return len(self.constraints)

    @property
    def compact_index(self) -> int:
        return self.constraints.compact_index

    @property
    def compact(self) -> QuadraticForm:
        return self.constraints.compact.form

    @property
    def inequality_mask(self) -> np.ndarray:
        return self.constraints.inequality_mask

    def with_objective(self, objective: QuadraticForm) -> "LagrangianProblem":
        return LagrangianProblem(objective, self.constraints, self.eps)

    def with_constraints(self, constraints: ConstraintSet) -> "LagrangianProblem":
        return LagrangianProblem(self.objective, constraints, self.eps)

    def assemble(self, phi):
        """``(s_phi, A_phi, v_phi)``."""
        phi = self._check_phi(phi)
        s = self.objective.s + phi @ self.S
        A = self.objective.A + np.tensordot(phi, self.A, axes=1)
        A = (A + A.conj().T) / 2
        return s, A, float(phi @ self.v)

    def lagrangian(self, phi, t) -> float:
        s, A, v = self.assemble(phi)
        t = np.asarray(t, dtype=complex)
        return float(2 * np.real(np.vdot(t, s)) - np.real(np.vdot(t, A @ t)) + v)

    def combination(self, psi) -> QuadraticForm:
        """Constraint-only combination ``f_psi = sum_k psi_k f_k``."""
        psi = self._check_phi(psi)
        return QuadraticForm(psi @ self.S, np.tensordot(psi, self.A, axes=1), float(psi @ self.v))

    def constraint_values(self, t) -> np.ndarray:
        return self.constraints.values(t)

    def _check_phi(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float).reshape(-1)
        if phi.size != self.n_multipliers:
            raise DimensionMismatch(f"{phi.size} multipliers for {self.n_multipliers} constraints")
        return phi


@dataclass(frozen=True)
class DualState:
    """Dual function data at one multiplier vector.

    ``lambda_min`` is that of ``A_phi - eps I`` at the *un-lifted* ``phi``.
    """

    phi: np.ndarray
    lift_alpha: float
    t_star: np.ndarray
    value: float
    grad: np.ndarray
    lambda_min: float
    status: DualStatus
    scale: float | None = None
    iterations: int = 0
    history: tuple = ()
    kkt_residual: float | None = None
    _eig: tuple = field(default=None, repr=False, compare=False)

    @property
    def phi_effective(self) -> np.ndarray:
        return self.phi + self.lift_alpha * _unit(self.phi.size, self._compact_index)

    @property
    def _compact_index(self) -> int:
        return self._eig[2]

    @property
    def grad_norm(self) -> float:
        return float(np.linalg.norm(self.grad))


def _unit(n, k):
    e = np.zeros(n)
    e[k] = 1.0
    return e


class _Hermitian:
    """Eigendecomposition used for solves, ``lambda_min`` and pseudo-inverses."""

    def __init__(self, A):
        self.A = A
        self.w, self.Q = sla.eigh(A)
        self.norm = float(max(abs(self.w[0]), abs(self.w[-1]))) if self.w.size else 0.0

    def solve(self, b):
        w = self.w
        cutoff = PINV_RCOND * self.norm
        inv = np.where(w > cutoff, 1.0 / np.where(w > cutoff, w, 1.0), 0.0)
        if b.ndim == 1:
            return self.Q @ (inv * (self.Q.conj().T @ b))
        return self.Q @ (inv[:, None] * (self.Q.conj().T @ b))

    def in_range(self, b) -> bool:
        cutoff = PINV_RCOND * self.norm
        null = self.Q[:, self.w <= cutoff]
        if null.shape[1] == 0:
            return True
        return np.linalg.norm(null.conj().T @ b) <= 1e-10 * max(np.linalg.norm(b), 1e-300)


def _lift_tolerance(fdot: QuadraticForm, t, tol=LIFT_TOL) -> float:
    nt = np.linalg.norm(t)
    return tol * (np.linalg.norm(fdot.s) * nt + op_norm(fdot.A) * nt**2)


def _lift(s, A, fdot: QuadraticForm, tol=LIFT_TOL):
    """Smallest ``alpha >= 0`` putting the maximizer of ``L + alpha f_dot`` on ``C``.

    ``f_dot(t(alpha))`` is nondecreasing in ``alpha`` and positive in the
    limit, so a bracket found by doubling is refined by bisection. Returns
    ``(alpha, t, (f_lo, f_hi))`` with the bracket endpoint values.
    """

    def field_at(alpha):
        if alpha == 0:
            H = _Hermitian(A)
            if not H.in_range(s):
                return None, -np.inf
            t = H.solve(s)
        else:
            M = A + alpha * fdot.A
            t = sla.cho_solve(sla.cho_factor(M), s + alpha * fdot.s)
        return t, eval_form(fdot, t)

    lo, hi = 0.0, 1.0
    t_lo, f_lo = field_at(lo)
    t_hi, f_hi = field_at(hi)
    doublings = 0
    while f_hi < 0:
        if doublings >= LIFT_MAX_DOUBLINGS:
            raise LiftBracketFailure(f"f_dot still {f_hi:.3e} < 0 at alpha = {hi:.3e}")
        lo, t_lo, f_lo = hi, t_hi, f_hi
        hi *= 2.0
        t_hi, f_hi = field_at(hi)
        doublings += 1
    if f_lo >= 0:
        return lo, t_lo, (f_lo, f_lo)
    bracket = (f_lo, f_hi)
    for _ in range(LIFT_MAX_BISECTIONS):
        if abs(f_hi) <= _lift_tolerance(fdot, t_hi, tol):
            break
        mid = 0.5 * (lo + hi)
        if not lo < mid < hi:
            break
        t_mid, f_mid = field_at(mid)
        if f_mid < 0:
            lo, f_lo = mid, f_mid
        else:
            hi, t_hi, f_hi = mid, t_mid, f_mid
    return hi, t_hi, bracket


def _maximize_on_C(s, A, v, fdot: QuadraticForm, H: _Hermitian | None = None):
    """``max_{t in C} 2Re(t^H s) - t^H A t + v`` for PSD ``A``.

    Returns ``(value, t, alpha)``; ``value`` is read at the lifted multiplier.
    """
    H = H or _Hermitian(A)
    if H.in_range(s):
        t = H.solve(s)
        if eval_form(fdot, t) >= 0:
            return float(np.real(np.vdot(t, A @ t)) + v), t, 0.0
    alpha, t, _ = _lift(s, A, fdot)
    A_lift = A + alpha * fdot.A
    return float(np.real(np.vdot(t, A_lift @ t)) + v), t, alpha


def _check_membership(L: LagrangianProblem, phi, A) -> _Hermitian:
    H = _Hermitian(A)
    lam = H.w[0] - L.eps
    tol = EIG_RTOL * H.norm
    if lam < -tol:
        raise MultiplierOutsidePhiEps(f"lambda_min(A_phi - eps) = {lam:.3e} < 0", lam)
    ineq = L.inequality_mask
    if np.any(phi[ineq] < 0):
        raise MultiplierOutsidePhiEps("negative inequality multiplier", float(phi[ineq].min()))
    return H


def eval_dual(L: LagrangianProblem, phi) -> DualState:
    """Evaluate ``D(phi)``, its maximizer and gradient, lifting if required."""
    phi = L._check_phi(phi).copy()
    s, A, v = L.assemble(phi)
    H = _check_membership(L, phi, A)
    lam = float(H.w[0] - L.eps)
    fdot = L.compact
    t = H.solve(s) if H.in_range(s) else None
    if t is not None and eval_form(fdot, t) >= 0:
        value = float(np.real(np.vdot(t, A @ t)) + v)
        alpha = 0.0
    else:
        alpha, t, _ = _lift(s, A, fdot)
        value = float(np.real(np.vdot(t, (A + alpha * fdot.A) @ t)) + v)
    if alpha > 0:
        status = DualStatus.LIFTED
    elif lam <= EIG_RTOL * H.norm:
        status = DualStatus.ON_EPS_BOUNDARY
    else:
        status = DualStatus.INTERIOR
    grad = L.constraint_values(t)
    if alpha > 0:
        grad[L.compact_index] = 0.0
    phi.flags.writeable = False
    return DualState(
        phi, float(alpha), t, value, grad, lam, status,
        _eig=(H, alpha, L.compact_index),
    )


def lift_phi_dot(L: LagrangianProblem, phi):
    """``(alpha, t_star)`` for the implicit compact-multiplier increase."""
    s, A, _ = L.assemble(phi)
    _check_membership(L, L._check_phi(phi), A)
    alpha, t, _ = _lift(s, A, L.compact)
    return alpha, t


def lift_bracket(L: LagrangianProblem, phi):
    """Values of ``f_dot`` at the bisection bracket ends (``<= 0 <= ``)."""
    s, A, _ = L.assemble(phi)
    return _lift(s, A, L.compact)[2]


def dual_gradient(state: DualState, L: LagrangianProblem) -> np.ndarray:
    """``dD/dphi_k = f_k(t_star)``; the compact entry is zero after a lift."""
    g = L.constraint_values(state.t_star)
    if state.lift_alpha > 0:
        g[L.compact_index] = 0.0
    return g


def _residual_columns(state: DualState, L: LagrangianProblem) -> np.ndarray:
    t = state.t_star
    return (L.S - np.einsum("kij,j->ki", L.A, t)).T


def dual_hessian(state: DualState, L: LagrangianProblem) -> np.ndarray:
    """``H_kj = 2 Re[(s_k - A_k t)^H A_phi^{-1} (s_j - A_j t)]``.

    Only valid strictly inside the multiplier domain at an un-lifted point.
    """
    if state.lift_alpha > 0 or state.status is not DualStatus.INTERIOR:
        raise BoundaryState(f"Hessian formula not applicable at a {state.status.value} state")
    H = state._eig[0] if state._eig is not None else _Hermitian(L.assemble(state.phi)[1])
    R = _residual_columns(state, L)
    X = H.solve(R)
    Hm = 2.0 * np.real(R.conj().T @ X)
    return (Hm + Hm.T) / 2


def _unchecked_hessian(state: DualState, L: LagrangianProblem) -> np.ndarray:
    H = state._eig[0]
    R = _residual_columns(state, L)
    Hm = 2.0 * np.real(R.conj().T @ H.solve(R))
    return (Hm + Hm.T) / 2


def compact_shift(L: LagrangianProblem, phi, target: float) -> float:
    """Smallest ``c`` with ``lambda_min(A_{phi + c e_dot}) >= target``."""
    phi = L._check_phi(phi).copy()
    k = L.compact_index
    phi[k] = 0.0
    _, B, _ = L.assemble(phi)
    Adot = L.compact.A
    w = sla.eigh(target * np.eye(L.dim) - B, Adot, eigvals_only=True)
    return float(w[-1])


def initial_multipliers(L: LagrangianProblem) -> np.ndarray:
    """``c e_dot`` (plus small positive inequality multipliers) inside ``Phi_eps``."""
    phi = np.zeros(L.n_multipliers)
    phi[L.inequality_mask] = 1e-3
    margin = max(L.eps, 1e-3 * lambda_min(L.compact.A))
    c_min = compact_shift(L, phi, L.eps + margin)
    phi[L.compact_index] = c_min + max(1.0, 0.5 * abs(c_min))
    return phi


def dual_scale(L: LagrangianProblem, phi0=None) -> float:
    """``|D(phi0)| + 1``, the unit for all dimensionless tolerances."""
    phi0 = initial_multipliers(L) if phi0 is None else phi0
    return abs(eval_dual(L, phi0).value) + 1.0


# --------------------------------------------------------------------------
# minimization


class _Barrier:
    """``-mu [log det(A_phi - eps) + sum log phi_ineq]`` and its derivatives."""

    def __init__(self, L: LagrangianProblem):
        self.L = L
        self.ineq = L.inequality_mask

    def feasible(self, phi, H: _Hermitian) -> bool:
        return H.w[0] - self.L.eps > 0 and np.all(phi[self.ineq] > 0)

    def value(self, phi, H: _Hermitian) -> float:
        m = H.w - self.L.eps
        return -float(np.sum(np.log(m)) + np.sum(np.log(phi[self.ineq])))

    def derivatives(self, phi, H: _Hermitian):
        m = H.w - self.L.eps
        Q = H.Q
        root = 1.0 / np.sqrt(m)
        B = np.einsum("ia,kij,jb->kab", Q.conj(), self.L.A, Q) * root[None, :, None] * root[None, None, :]
        g = -np.real(np.einsum("kaa->k", B))
        flat = B.reshape(B.shape[0], -1)
        Hb = np.real(flat.conj() @ flat.T)
        g[self.ineq] -= 1.0 / phi[self.ineq]
        Hb[self.ineq, self.ineq] += 1.0 / phi[self.ineq] ** 2
        return g, (Hb + Hb.T) / 2


def _regularized_step(H, g, lam):
    w, V = np.linalg.eigh(H)
    floor = 1e-14 * max(np.abs(w).max(), 1.0)
    w = np.maximum(w, floor) + lam
    return -V @ ((V.T @ g) / w)


def _relocate(L, state):
    """Move a lifted iterate to its effective multiplier (same ``D``)."""
    if state.lift_alpha > 0:
        return eval_dual(L, state.phi_effective)
    return state


def _try_eval(L, phi):
    try:
        return eval_dual(L, phi)
    except (MultiplierOutsidePhiEps, LiftBracketFailure, np.linalg.LinAlgError):
        return None


def _boundary_kkt(L: LagrangianProblem, state: DualState, free) -> float:
    """Distance from ``grad`` to the cone spanned by inward normals of ``Phi_eps``.

    Normals are ``u^H A_k u`` over the (near) bottom eigenspace of
    ``A_phi - eps``, including pairwise combinations of eigenvectors.
    """
    g = np.where(free, state.grad, 0.0)
    H = state._eig[0]
    m = H.w - L.eps
    near = np.flatnonzero(m <= max(1e-6 * H.norm, m[0]))
    U = H.Q[:, near]
    vecs = [U[:, i] for i in range(U.shape[1])]
    for i in range(U.shape[1]):
        for j in range(i + 1, U.shape[1]):
            vecs += [(U[:, i] + U[:, j]) / np.sqrt(2), (U[:, i] + 1j * U[:, j]) / np.sqrt(2)]
    W = np.array(vecs).T
    N = np.real(np.einsum("ia,kij,ja->ka", W.conj(), L.A, W))
    N[~free] = 0.0
    _, res = nnls(N, g)
    return float(res)


def _free_mask(L, phi, g):
    return ~(L.inequality_mask & (phi <= 0) & (g > 0))


def _newton_step(state, L, g, Hm, lam, feasible, merit, merit0, project=None):
    """Backtracking on ``merit`` along a Levenberg-regularized Newton step."""
    step = _regularized_step(Hm, g, lam)
    decrement = -(g @ step)
    tau = 1.0
    for _ in range(50):
        phi_new = state.phi + tau * step
        if project is not None:
            phi_new = project(phi_new)
        trial = _try_eval(L, phi_new)
        if trial is not None and feasible(trial):
            val = merit(trial)
            if val <= merit0 - 1e-4 * tau * decrement:
                return trial, decrement
        tau *= 0.5
    return None, decrement


def _roundoff_step(state, L, g, Hm, lam, scale, project):
    """Newton step accepted on gradient decrease once ``D`` no longer resolves.

    Near the minimum the decrease in ``D`` drops below its rounding error and
    the Armijo test fails spuriously; a step that leaves ``D`` unchanged to
    roundoff while halving the free gradient is taken instead.
    """
    step = _regularized_step(Hm, g, lam)
    tau = 1.0
    for _ in range(10):
        trial = _try_eval(L, project(state.phi + tau * step))
        if trial is not None and trial.lambda_min >= 0:
            g_new = np.where(_free_mask(L, trial.phi, trial.grad), trial.grad, 0.0)
            if (
                trial.value <= state.value + ROUNDOFF * scale
                and np.linalg.norm(g_new) <= 0.5 * np.linalg.norm(g)
            ):
                return trial
        tau *= 0.5
    return None


def minimize_dual(L: LagrangianProblem, cfg: SolverConfig | None = None, phi0=None) -> DualState:
    """Minimize ``D`` over the multiplier domain.

    A log-barrier path (``mu`` shrinking tenfold per stage) is followed by
    damped Newton on ``D`` itself. Barrier stage endpoints are accepted only
    when they do not raise ``D``, so the accepted iterates are monotone up to
    rounding (``ROUNDOFF * scale``).
    Terminates with ``||grad|| <= grad_tol * scale`` or, when the minimum sits
    on the ``A_phi >= eps`` boundary, with status ``OnEpsBoundary``.
    """
    cfg = cfg or SolverConfig()
    phi = initial_multipliers(L) if phi0 is None else L._check_phi(phi0).copy()
    first = eval_dual(L, phi)
    scale = abs(first.value) + 1.0
    accepted = _relocate(L, first)
    history = [first.value]
    barrier = _Barrier(L)
    iters = 0
    phi_ref = 1.0 + np.linalg.norm(accepted.phi)

    def guard(st):
        if np.linalg.norm(st.phi) > 1e12 * phi_ref:
            raise CoercivityFailure(
                f"multipliers diverging (|phi| = {np.linalg.norm(st.phi):.3e}) while D decreases"
            )
        return st

    # -- barrier path
    dim_eff = L.dim + int(L.inequality_mask.sum())
    mu = 0.1 * scale / dim_eff
    mu_min = 1e-13 * scale
    cur = accepted
    if not barrier.feasible(cur.phi, cur._eig[0]):
        mu = 0.0
    while mu >= mu_min and iters < cfg.max_iters:
        lam = 1e-10

        def merit(st, mu=mu):
            return st.value + mu * barrier.value(st.phi, st._eig[0])

        def feasible(st):
            return barrier.feasible(st.phi, st._eig[0])

        while iters < cfg.max_iters:
            bg, bH = barrier.derivatives(cur.phi, cur._eig[0])
            g = cur.grad + mu * bg
            Hm = _unchecked_hessian(cur, L) + mu * bH
            trial, decrement = _newton_step(cur, L, g, Hm, lam, feasible, merit, merit(cur))
            if decrement <= 1e-13 * scale:
                break
            if trial is None:
                lam *= 10.0
                if lam > 1e6 * max(1.0, np.abs(Hm).max()):
                    break
                continue
            cur = guard(_relocate(L, trial))
            iters += 1
            lam = max(lam / 10.0, 1e-10)
        if cur.value <= accepted.value + 1e-15 * scale:
            accepted = cur
            history.append(cur.value)
        mu *= 0.1

    # -- Newton on D
    state = accepted
    lam = 1e-10
    ineq = L.inequality_mask

    def project(phi_new):
        phi_new[ineq] = np.maximum(phi_new[ineq], 0.0)
        return phi_new

    stalls = 0
    while iters < cfg.max_iters:
        free = _free_mask(L, state.phi, state.grad)
        g = np.where(free, state.grad, 0.0)
        if np.linalg.norm(g) <= cfg.grad_tol * scale:
            break
        Hfull = _unchecked_hessian(state, L)
        Hm = np.zeros_like(Hfull)
        Hm[np.ix_(free, free)] = Hfull[np.ix_(free, free)]
        Hm[~free, ~free] = 1.0
        trial, _ = _newton_step(
            state, L, g, Hm, lam, lambda st: st.lambda_min >= 0, lambda st: st.value, state.value, project
        )
        if trial is None:
            trial = _roundoff_step(state, L, g, Hm, lam, scale, project)
        if trial is not None and trial.value <= state.value + ROUNDOFF * scale:
            gain = state.value - trial.value
            state = guard(_relocate(L, trial))
            iters += 1
            history.append(state.value)
            lam = max(lam / 10.0, 1e-10)
            stalls = stalls + 1 if gain <= 1e-15 * scale else 0
            if stalls >= 20:
                break
            continue
        lam *= 10.0
        if lam > 1e8 * max(1.0, np.abs(Hm).max()):
            break

    free = _free_mask(L, state.phi, state.grad)
    gnorm = float(np.linalg.norm(np.where(free, state.grad, 0.0)))
    kkt = _boundary_kkt(L, state, free)
    final = replace(
        state, scale=scale, iterations=iters, history=tuple(history), kkt_residual=kkt / scale
    )
    if gnorm <= cfg.grad_tol * scale:
        return final
    if state.lambda_min <= EIG_RTOL * max(state._eig[0].norm, 1.0):
        return replace(final, status=DualStatus.ON_EPS_BOUNDARY)
    raise IterationLimit(
        f"dual minimization stopped after {iters} iterations with |grad| = {gnorm:.3e}"
        f" (status={state.status.value})",
        final,
    )


# --------------------------------------------------------------------------
# coercivity


@dataclass
class CoercivityResult:
    passed: bool
    direction: np.ndarray | None
    value: float
    n_checked: int

    def to_dict(self) -> dict:
        return {
            "check": "coercivity",
            "passed": self.passed,
            "direction": None if self.direction is None else self.direction.tolist(),
            "value": self.value,
            "n_checked": self.n_checked,
        }


def _null_space(M, rtol=1e-10):
    if M.shape[1] == 0:
        return np.zeros((0, 0))
    U, sv, Vt = np.linalg.svd(M, full_matrices=True)
    cut = rtol * (sv[0] if sv.size else 0.0)
    rank = int(np.sum(sv > cut))
    return Vt[rank:].T


def _real_map(L: LagrangianProblem, with_A: bool):
    S = L.S.T
    parts = [S.real, S.imag]
    if with_A:
        A = L.A.reshape(L.n_multipliers, -1).T
        parts += [A.real, A.imag]
    return np.vstack(parts)


def coercivity_check(
    L: LagrangianProblem, delta: float, n_samples: int = 200, seed: int = 0
) -> CoercivityResult:
    """Sample recession directions of the multiplier domain and check that the
    constraint-only Lagrangian has ``max_C > delta`` along each.

    Directions along which every constraint combination vanishes identically
    leave ``D`` unchanged and are factored out. Directions with zero linear
    part but PSD quadratic part are searched for explicitly, since there the
    maximum over ``C`` is zero.
    """
    rng = np.random.default_rng(seed)
    K = L.n_multipliers
    ineq = L.inequality_mask
    fdot = L.compact
    N_full = _null_space(_real_map(L, True))
    comp = np.eye(K) - (N_full @ N_full.T if N_full.size else 0.0)

    def admissible(psi):
        return np.all(psi[ineq] >= -1e-12)

    def value_of(psi):
        f = L.combination(psi)
        return _maximize_on_C(f.s, f.A, f.v, fdot)[0]

    worst, worst_dir, checked = np.inf, None, 0
    N_s = _null_space(_real_map(L, False))
    if N_s.size:
        R = comp @ N_s
        U, sv, _ = np.linalg.svd(R, full_matrices=False)
        R = U[:, sv > 1e-10]
        cands = [R[:, i] for i in range(R.shape[1])]
        cands += [R @ rng.standard_normal(R.shape[1]) for _ in range(min(n_samples, 50))] if R.shape[1] else []
        for r in cands:
            r = r / np.linalg.norm(r)
            for sign in (1.0, -1.0):
                psi = sign * r
                if not admissible(psi):
                    continue
                Apsi = np.tensordot(psi, L.A, axes=1)
                if lambda_min(Apsi) >= -EIG_RTOL * max(op_norm(Apsi), 1e-300):
                    checked += 1
                    val = value_of(psi)
                    if val <= delta:
                        return CoercivityResult(False, psi, val, checked)
    e_dot = comp @ _unit(K, L.compact_index)
    for _ in range(n_samples):
        g = comp @ rng.standard_normal(K)
        g[ineq] = np.abs(g[ineq])
        Ag = np.tensordot(g, L.A, axes=1)
        tau = float(sla.eigh(-Ag, fdot.A, eigvals_only=True)[-1])
        psi = g + max(tau, 0.0) * (1 + 1e-9) * e_dot
        nrm = np.linalg.norm(psi)
        if nrm == 0:
            continue
        psi = psi / nrm
        checked += 1
        val = value_of(psi)
        if val < worst:
            worst, worst_dir = val, psi
        if val <= delta:
            return CoercivityResult(False, psi, val, checked)
    return CoercivityResult(True, None, float(worst), checked)
