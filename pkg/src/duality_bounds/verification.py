"""Brute-force and sampling oracles for the dual bound.

Exact design enumeration gives the true primal optimum at desk scale, the
affine-in-``phi`` Lagrangian gives a sampled upper bound on the reversed
(min over ``phi``, then max over ``t``) problem, and combinations of
constraints with ``A_psi >= eps`` certify that a point violates them.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .dual import (
    DualState,
    DualStatus,
    LagrangianProblem,
    compact_shift,
    dual_gradient,
    dual_hessian,
    dual_scale,
    eval_dual,
    initial_multipliers,
    minimize_dual,
)
from .exceptions import DesignCapExceeded, PreconditionViolation
from .quadratic import EIG_RTOL, QuadraticForm, eval_form, lambda_min, op_norm
from .scattering import MAX_ENUMERATION_BLOCKS, Design, ScatteringProblem, enumerate_designs

#: values below ``-DIVERGENCE * scale`` are reported as -inf
DIVERGENCE = 1e12
FEAS_TOL = 1e-8
FD_STEP = 1e-5
FD_GRAD_TOL = 1e-6
FD_HESS_TOL = 1e-4
FD_INTERIOR = 1e-3


def oracle_bound(p: ScatteringProblem, f_obj: QuadraticForm) -> tuple[float, Design]:
    """Best objective over all binary designs; ties go to the first in
    lexicographic order."""
    if p.J > MAX_ENUMERATION_BLOCKS:
        raise DesignCapExceeded(f"J={p.J} exceeds the enumeration cap {MAX_ENUMERATION_BLOCKS}")
    best, arg = -np.inf, None
    for d, t in enumerate_designs(p):
        val = eval_form(f_obj, t)
        if val > best:
            best, arg = val, d
    return float(best), arg


@dataclass
class PrimalSample:
    t: np.ndarray
    L: LagrangianProblem = field(repr=False)

    @property
    def constraint_residuals(self) -> np.ndarray:
        return self.L.constraint_values(self.t)

    @property
    def in_C(self) -> bool:
        return eval_form(self.L.compact, self.t) >= 0


def normalized_residuals(L: LagrangianProblem, t) -> np.ndarray:
    """Constraint violations divided by their natural scale at ``t``."""
    out = np.empty(L.n_multipliers)
    for k, c in enumerate(L.constraints):
        sc = c.scale(t)
        out[k] = c.violation(t) / sc if sc > 0 else c.violation(t)
    return out


def is_feasible(L: LagrangianProblem, t, tol: float = FEAS_TOL) -> bool:
    return bool(np.all(normalized_residuals(L, t) <= tol))


def _random_domain_point(L: LagrangianProblem, rng, spread=1.0) -> np.ndarray:
    phi = spread * rng.standard_normal(L.n_multipliers)
    phi[L.inequality_mask] = np.abs(phi[L.inequality_mask])
    c = compact_shift(L, phi, L.eps)
    phi[L.compact_index] = c + rng.uniform(1e-3, 1.0) * max(1.0, abs(c))
    return phi


def _ray_limit(L: LagrangianProblem, phi, d) -> float:
    """Largest ``tau`` with ``phi + tau d`` still in the multiplier domain."""
    _, A0, _ = L.assemble(phi)
    M = A0 - L.eps * np.eye(L.dim)
    Ad = np.tensordot(d, L.A, axes=1)
    mu = sla.eigh(Ad, M, eigvals_only=True)
    tau = np.inf
    if mu[0] < 0:
        tau = -1.0 / mu[0]
    ineq = L.inequality_mask & (d < 0)
    if np.any(ineq):
        tau = min(tau, float(np.min(-phi[ineq] / d[ineq])))
    return tau


def sampled_F(
    L: LagrangianProblem,
    t,
    budget: int = 20,
    seed: int = 0,
    starts=(),
    scale: float | None = None,
    feas_tol: float = FEAS_TOL,
) -> float:
    """Anytime upper bound on ``F_eps(t) = inf_{phi} L(phi, t)``.

    ``L(., t)`` is affine with slope equal to the constraint residuals, so
    from each start the descent ray ``-r`` is followed to the edge of the
    multiplier domain. Unbounded rays, values below ``-1e12 * scale``, or a
    certificate from :func:`q_membership` return ``-inf``. Feasible ``t``
    returns ``f_obj(t)`` exactly.
    """
    t = np.asarray(t, dtype=complex)
    fdot = L.compact
    if eval_form(fdot, t) < -FEAS_TOL * max(L.constraints.compact.scale(t), 1e-300):
        raise PreconditionViolation("t lies outside C")
    f0 = eval_form(L.objective, t)
    if is_feasible(L, t, feas_tol):
        return f0
    scale = dual_scale(L) if scale is None else scale
    r = L.constraint_values(t)
    rng = np.random.default_rng(seed)
    phis = [np.asarray(s, dtype=float) for s in starts]
    phis += [initial_multipliers(L)] if budget > 0 else []
    phis += [_random_domain_point(L, rng) for _ in range(max(budget - 1, 0))]
    best = np.inf
    for phi in phis:
        best = min(best, f0 + phi @ r)
        d = -r.copy()
        d[L.inequality_mask & (phi <= 0) & (d < 0)] = 0.0
        if not np.any(d):
            continue
        tau = _ray_limit(L, phi, d)
        if not np.isfinite(tau):
            return -np.inf
        best = min(best, f0 + (phi + tau * d) @ r)
        if best < -DIVERGENCE * scale:
            return -np.inf
    # a certified combination is a recession direction of the domain along
    # which L(., t) decreases without bound
    if budget > 0 and q_membership(L, t, budget, seed, scale).verdict is QVerdict.NOT_IN_Q:
        return -np.inf
    return float(best)


class QVerdict(enum.Enum):
    NOT_IN_Q = "NotInQ"
    NO_VIOLATION_FOUND = "NoViolationFound"


@dataclass
class QMembership:
    verdict: QVerdict
    best_combination_value: float
    certificate: np.ndarray | None = None

    def to_dict(self) -> dict:
        return {
            "verdict": self.verdict.value,
            "best_combination_value": self.best_combination_value,
            "certificate": None if self.certificate is None else self.certificate.tolist(),
        }


def verify_certificate(L: LagrangianProblem, t, psi, scale: float) -> bool:
    """``A_psi >= eps`` (eigen check), ``||psi|| <= 1`` and ``f_psi(t) < 0``."""
    psi = np.asarray(psi, dtype=float)
    if np.linalg.norm(psi) > 1 + 1e-12 or np.any(psi[L.inequality_mask] < 0):
        return False
    f = L.combination(psi)
    tol = EIG_RTOL * max(op_norm(f.A), 1.0)
    return lambda_min(f.A) - L.eps >= -tol and eval_form(f, t) < -1e-10 * scale


def _smallest_shift(L, g, e):
    """Smallest ``c >= c0`` with ``lambda_min(A_{g+ce}) >= eps ||g+ce||`` on ``[c0, c0+big]``."""
    Ag = np.tensordot(g, L.A, axes=1)
    Ae = np.tensordot(e, L.A, axes=1)

    def ok(c):
        return lambda_min(Ag + c * Ae) >= L.eps * np.linalg.norm(g + c * e) * (1 + 1e-9)

    c0 = float(sla.eigh(-Ag, Ae, eigvals_only=True)[-1])
    lo, hi = c0, c0 + max(1.0, abs(c0))
    while not ok(hi):
        hi = lo + 2 * (hi - lo)
        if hi - lo > 1e12:
            return None
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def q_membership(
    L: LagrangianProblem, t, budget: int = 50, seed: int = 0, scale: float | None = None
) -> QMembership:
    """Search for ``psi`` with ``A_psi >= eps``, ``||psi|| <= 1`` and ``f_psi(t) < 0``.

    Starts from ``e_dot`` and from the steepest-descent direction ``-r``
    perturbed at growing noise levels, each shifted along ``e_dot`` just far
    enough to enter the domain. Found certificates are eigen-verified.
    """
    if budget <= 0:
        return QMembership(QVerdict.NO_VIOLATION_FOUND, np.inf)
    t = np.asarray(t, dtype=complex)
    scale = dual_scale(L) if scale is None else scale
    rng = np.random.default_rng(seed)
    r = L.constraint_values(t)
    K = L.n_multipliers
    e = np.zeros(K)
    e[L.compact_index] = 1.0
    cands = [e]
    nr = np.linalg.norm(r)
    for i in range(budget - 1):
        noise = (i / max(budget - 1, 1)) * rng.standard_normal(K) * max(nr, 1.0)
        g = -r + noise
        g[L.inequality_mask] = np.maximum(g[L.inequality_mask], 0.0)
        g[L.compact_index] = 0.0
        c = _smallest_shift(L, g, e)
        if c is not None:
            cands.append(g + c * e)
    best, cert = np.inf, None
    for psi in cands:
        psi = psi / np.linalg.norm(psi)
        val = float(psi @ r)
        if val < best:
            best = val
            if verify_certificate(L, t, psi, scale):
                cert = psi
    if cert is not None:
        return QMembership(QVerdict.NOT_IN_Q, best, cert)
    return QMembership(QVerdict.NO_VIOLATION_FOUND, best)


@dataclass
class ViolationBoundReport:
    values: np.ndarray
    bounds: np.ndarray
    delta: float
    eps: float
    #: rounding allowance per constraint, ``1e-12`` of its magnitude at ``t``
    slack: np.ndarray | None = None

    @property
    def margins(self) -> np.ndarray:
        return self.bounds - np.abs(self.values)

    @property
    def passed(self) -> bool:
        slack = 0.0 if self.slack is None else self.slack
        return bool(np.all(self.margins + slack >= 0))

    def to_dict(self) -> dict:
        return {
            "check": "lemma4_violation_bound",
            "values": self.values.tolist(),
            "bounds": self.bounds.tolist(),
            "margins": self.margins.tolist(),
            "slack": None if self.slack is None else self.slack.tolist(),
            "delta": self.delta,
            "eps": self.eps,
            "passed": self.passed,
        }


def lemma4_violation_bound(
    L: LagrangianProblem, t, f_d: QuadraticForm, delta: float
) -> ViolationBoundReport:
    """Check ``|f_k(t)| <= 2 delta ||A_k|| / eps`` for every constraint.

    ``f_d`` must satisfy ``A_d >= eps`` and ``0 <= f_d(t) <= delta``.
    """
    t = np.asarray(t, dtype=complex)
    tol = EIG_RTOL * max(op_norm(f_d.A), 1.0)
    if lambda_min(f_d.A) < L.eps - tol:
        raise PreconditionViolation("f_d is not eps-definite")
    fd_t = eval_form(f_d, t)
    slack = 1e-12 * (1.0 + abs(delta))
    if not -slack <= fd_t <= delta + slack:
        raise PreconditionViolation(f"f_d(t) = {fd_t:.3e} outside [0, {delta:.3e}]")
    values = L.constraint_values(t)
    lam = np.array([op_norm(a) for a in L.A])
    slack = 1e-12 * np.array([c.scale(t) for c in L.constraints])
    return ViolationBoundReport(values, 2.0 * delta * lam / L.eps, float(delta), L.eps, slack)


@dataclass
class FDReport:
    n_points: int
    n_checked: int
    n_excluded: int
    max_grad_rel_err: float
    max_hess_rel_err: float
    min_hess_eig_rel: float
    grad_tol: float = FD_GRAD_TOL
    hess_tol: float = FD_HESS_TOL

    @property
    def passed(self) -> bool:
        return (
            self.max_grad_rel_err <= self.grad_tol
            and self.max_hess_rel_err <= self.hess_tol
            and self.min_hess_eig_rel >= -1e-8
        )

    def to_dict(self) -> dict:
        return {
            "check": "finite_differences",
            "n_points": self.n_points,
            "n_checked": self.n_checked,
            "n_excluded": self.n_excluded,
            "max_grad_rel_err": self.max_grad_rel_err,
            "max_hess_rel_err": self.max_hess_rel_err,
            "min_hess_eig_rel": self.min_hess_eig_rel,
            "grad_tol": self.grad_tol,
            "hess_tol": self.hess_tol,
            "passed": self.passed,
        }


def fd_errors(L: LagrangianProblem, phi, h: float = FD_STEP):
    """Relative FD errors of gradient and Hessian at ``phi``, or ``None`` if
    the point or a stencil neighbour is lifted or near the boundary.

    Gradient: ``max|g_fd - g| / max|g|`` from central differences of ``D``.
    Hessian: ``max|H_fd - H| / max|H|`` from central differences of ``g``.
    """
    st = eval_dual(L, phi)
    if st.status is not DualStatus.INTERIOR or st.lambda_min <= FD_INTERIOR:
        return None
    K = L.n_multipliers
    g_fd = np.empty(K)
    H_fd = np.empty((K, K))
    for k in range(K):
        e = np.zeros(K)
        e[k] = h
        try:
            sp, sm = eval_dual(L, st.phi + e), eval_dual(L, st.phi - e)
        except Exception:
            return None
        if sp.lift_alpha > 0 or sm.lift_alpha > 0:
            return None
        g_fd[k] = (sp.value - sm.value) / (2 * h)
        H_fd[:, k] = (sp.grad - sm.grad) / (2 * h)
    g = dual_gradient(st, L)
    H = dual_hessian(st, L)
    gerr = np.abs(g_fd - g).max() / max(np.abs(g).max(), np.finfo(float).tiny)
    herr = np.abs(H_fd - H).max() / max(np.abs(H).max(), np.finfo(float).tiny)
    w = np.linalg.eigvalsh(H)
    eig_rel = w[0] / max(np.abs(w).max(), np.finfo(float).tiny)
    return float(gerr), float(herr), float(eig_rel)


def fd_check_suite(L: LagrangianProblem, n_points: int = 50, seed: int = 0) -> FDReport:
    """Finite-difference checks at ``n_points`` random interior multipliers."""
    rng = np.random.default_rng(seed)
    checked = excluded = 0
    ge = he = 0.0
    eig = 0.0
    attempts = 0
    while checked < n_points and attempts < 50 * max(n_points, 1):
        attempts += 1
        phi = _random_domain_point(L, rng, spread=0.5)
        res = fd_errors(L, phi)
        if res is None:
            excluded += 1
            continue
        checked += 1
        ge, he, eig = max(ge, res[0]), max(he, res[1]), min(eig, res[2])
    return FDReport(n_points, checked, excluded, ge, he, eig)


@dataclass
class MinimaxReport:
    dual_value: float
    max_sampled_F: float
    sandwich_gap: float
    weak_violation: float
    n_phi: int
    n_points: int
    scale: float
    tol_upper: float = 1e-7
    tol_lower: float = 1e-9

    @property
    def passed(self) -> bool:
        return (
            self.max_sampled_F <= self.dual_value + self.tol_upper * self.scale
            and self.weak_violation <= self.tol_lower * self.scale
        )

    def to_dict(self) -> dict:
        return {
            "check": "minimax_cross_check",
            "dual_value": self.dual_value,
            "max_sampled_F": self.max_sampled_F,
            "sandwich_gap": self.sandwich_gap,
            "weak_violation": self.weak_violation,
            "n_phi": self.n_phi,
            "n_points": self.n_points,
            "scale": self.scale,
            "passed": self.passed,
        }


def minimax_cross_check(
    L: LagrangianProblem,
    p: ScatteringProblem,
    budget: int = 100,
    seed: int = 0,
    state: DualState | None = None,
) -> MinimaxReport:
    """One-sided checks of the min-max exchange.

    ``max_t sampled_F(t) <= D*`` over enumerated designs and ``t*``, and
    ``L(phi, t) >= f_obj(t)`` for sampled ``phi`` and every design ``t``.
    The sandwich gap is ``D* - max_t sampled_F(t)``.
    """
    state = minimize_dual(L) if state is None else state
    scale = state.scale if state.scale is not None else dual_scale(L)
    rng = np.random.default_rng(seed)
    points = [t for _, t in enumerate_designs(p)]
    if eval_form(L.compact, state.t_star) >= 0:
        points.append(state.t_star)
    best = -np.inf
    for i, t in enumerate(points):
        F = sampled_F(L, t, budget=min(budget, 10), seed=seed + i, starts=[state.phi], scale=scale)
        best = max(best, F)
    phis = [_random_domain_point(L, rng) for _ in range(budget)]
    worst = 0.0
    for t in points[:-1] if len(points) > 2 ** p.J else points:
        f0 = eval_form(L.objective, t)
        for phi in phis:
            worst = max(worst, f0 - L.lagrangian(phi, t))
    return MinimaxReport(
        state.value, float(best), float(state.value - best), float(worst), len(phis), len(points), scale
    )


def sample_psd_combinations(L: LagrangianProblem, n: int, seed: int = 0) -> list:
    """Unit vectors ``psi`` with ``A_psi >= 0`` (eigen-verified).

    Gaussian draws, nonnegative on inequality entries, shifted along the
    compact direction just far enough to make ``A_psi`` semidefinite.
    """
    rng = np.random.default_rng(seed)
    e = np.zeros(L.n_multipliers)
    e[L.compact_index] = 1.0
    Ae = L.compact.A
    out = []
    while len(out) < n:
        g = rng.standard_normal(L.n_multipliers)
        g[L.inequality_mask] = np.abs(g[L.inequality_mask])
        Ag = np.tensordot(g, L.A, axes=1)
        c = float(sla.eigh(-Ag, Ae, eigvals_only=True)[-1])
        psi = g + max(c, 0.0) * (1 + 1e-9) * e + 1e-12 * e
        psi /= np.linalg.norm(psi)
        Apsi = np.tensordot(psi, L.A, axes=1)
        if lambda_min(Apsi) >= -EIG_RTOL * op_norm(Apsi):
            out.append(psi)
    return out


@dataclass
class PSDCombinationReport:
    min_value: float
    n_samples: int
    scale: float
    tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return self.min_value >= -self.tol * self.scale

    def to_dict(self) -> dict:
        return {
            "check": "psd_combinations_at_optimum",
            "min_value": self.min_value,
            "n_samples": self.n_samples,
            "scale": self.scale,
            "tol": self.tol,
            "passed": self.passed,
        }


def psd_combination_check(
    L: LagrangianProblem, state: DualState, n_samples: int = 100, seed: int = 0, tol: float = 1e-8
) -> PSDCombinationReport:
    """At a dual optimum every combination with ``A_psi >= 0`` is
    nonnegative at ``t*``; report the smallest sampled value."""
    scale = state.scale if state.scale is not None else dual_scale(L)
    r = L.constraint_values(state.t_star)
    vals = [float(psi @ r) for psi in sample_psd_combinations(L, n_samples, seed)]
    return PSDCombinationReport(min(vals, default=np.inf), n_samples, scale, tol)


@dataclass
class WeakDualityReport:
    dual_value: float
    oracle_value: float
    argmax: Design | None
    scale: float
    tol: float = 1e-8

    @property
    def passed(self) -> bool:
        return self.dual_value >= self.oracle_value - self.tol * self.scale

    def to_dict(self) -> dict:
        return {
            "check": "weak_duality",
            "dual_value": self.dual_value,
            "oracle_value": self.oracle_value,
            "argmax": None if self.argmax is None else list(self.argmax.rho),
            "gap": self.dual_value - self.oracle_value,
            "scale": self.scale,
            "tol": self.tol,
            "passed": self.passed,
        }


def weak_duality_check(
    p: ScatteringProblem, L: LagrangianProblem, state: DualState, tol: float = 1e-8
) -> WeakDualityReport:
    value, arg = oracle_bound(p, L.objective)
    scale = state.scale if state.scale is not None else dual_scale(L)
    return WeakDualityReport(state.value, value, arg, scale, tol)


def violation_bound_at_optimum(L: LagrangianProblem, state: DualState) -> ViolationBoundReport:
    """Violation bound at ``t*`` with ``f_d = f_dot`` and ``delta = f_dot(t*)``."""
    delta = max(eval_form(L.compact, state.t_star), 0.0)
    return lemma4_violation_bound(L, state.t_star, L.compact, delta)
