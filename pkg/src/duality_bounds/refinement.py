"""Strong-duality certificates and objective modifications.

When the dual minimum sits on the ``A_phi >= eps`` boundary its maximizer
``t*`` usually violates some constraints. Changing the objective's linear part
moves ``t*``; :func:`run_restart_loop` does so repeatedly until a modified
problem is certified strongly dual, and :func:`bound_feedback` feeds the
modified bound back into the original problem as an extra inequality.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import least_squares, minimize

from .constraints import Constraint, ConstraintKind
from .dual import (
    DualState,
    LagrangianProblem,
    SolverConfig,
    dual_scale,
    eval_dual,
    minimize_dual,
)
from .exceptions import (
    IterationLimit,
    MultiplierOutsidePhiEps,
    PreconditionViolation,
    RestoreFailure,
)
from .quadratic import EIG_RTOL, QuadraticForm, eval_form, lambda_min, op_norm

CERT_TOL = 1e-7
PENALTY_STAGES = 8
PENALTY_GROWTH = 10.0
INNER_STEPS = 200
HYBRID_STEPS = 20


class CertificateKind(enum.Enum):
    STRONG_DUAL = "StrongDual"
    GAP_SUSPECTED = "GapSuspected"


@dataclass
class Certificate:
    kind: CertificateKind
    residuals: np.ndarray
    primal_value: float
    dual_value: float
    gap: float
    scale: float
    cert_tol: float = CERT_TOL

    @property
    def strong(self) -> bool:
        return self.kind is CertificateKind.STRONG_DUAL

    @property
    def max_violation(self) -> float:
        """Largest constraint violation at ``t*`` in units of ``scale``."""
        return float(np.max(self._violations, initial=0.0) / self.scale)

    @property
    def _violations(self):
        return np.abs(self.residuals)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "residuals": self.residuals.tolist(),
            "primal_value": self.primal_value,
            "dual_value": self.dual_value,
            "gap": self.gap,
            "scale": self.scale,
            "cert_tol": self.cert_tol,
            "max_violation": self.max_violation,
        }


def _violations(L: LagrangianProblem, t) -> np.ndarray:
    return np.array([c.violation(t) for c in L.constraints])


def certify(
    state: DualState, L: LagrangianProblem, cert_tol: float = CERT_TOL, scale: float | None = None
) -> Certificate:
    """StrongDual iff every constraint holds at ``t*`` to ``cert_tol * scale``
    and the objective there matches the dual value to the same tolerance."""
    scale = scale or state.scale or dual_scale(L)
    t = state.t_star
    residuals = L.constraint_values(t)
    viol = _violations(L, t)
    primal = eval_form(L.objective, t)
    gap = state.value - primal
    strong = np.all(viol <= cert_tol * scale) and abs(gap) <= cert_tol * scale
    kind = CertificateKind.STRONG_DUAL if strong else CertificateKind.GAP_SUSPECTED
    # inequality constraints are satisfied by any nonnegative residual
    shown = np.where(L.inequality_mask, np.minimum(residuals, 0.0), residuals)
    return Certificate(kind, shown, float(primal), float(state.value), float(gap), float(scale), cert_tol)


def subtract_compact(f_obj: QuadraticForm, f_dot: Constraint, c: float) -> QuadraticForm:
    """``f_obj - c f_dot``; identical to ``f_obj`` on every feasible point."""
    if not c > 0:
        raise PreconditionViolation(f"c must be positive, got {c}")
    return f_obj - f_dot.form.scaled(c)


def default_margins(L: LagrangianProblem, t, scale: float, cert_tol: float = CERT_TOL) -> np.ndarray:
    """``0.5 |v_p|`` for violated constraints, 0 otherwise; the compact entry
    is ``1.01 max(v_dot, 0) + 1e-8 scale``."""
    v = L.constraint_values(t)
    viol = _violations(L, t)
    margins = np.where(viol > cert_tol * scale, 0.5 * np.abs(v), 0.0)
    k = L.compact_index
    margins[k] = 1.01 * max(v[k], 0.0) + 1e-8 * scale
    return margins


@dataclass
class _Bands:
    """``lo_k <= f_k(t + x) <= hi_k`` for every constraint."""

    lo: np.ndarray
    hi: np.ndarray

    def tightened(self, frac: float, v0: np.ndarray) -> "_Bands":
        """Two-sided bands shrink by ``frac`` of their width about the
        middle; one-sided ones move inward by ``frac`` of their distance
        from the starting values ``v0``."""
        lo, hi = self.lo.copy(), self.hi.copy()
        both = np.isfinite(lo) & np.isfinite(hi)
        w = np.where(both, hi - lo, 0.0)
        lo[both] += 0.5 * frac * w[both]
        hi[both] -= 0.5 * frac * w[both]
        only_hi = np.isfinite(hi) & ~both
        only_lo = np.isfinite(lo) & ~both
        hi[only_hi] -= frac * np.abs(hi[only_hi] - v0[only_hi])
        lo[only_lo] += frac * np.abs(lo[only_lo] - v0[only_lo])
        return _Bands(lo, hi)

    def excess(self, values) -> np.ndarray:
        return np.maximum(values - self.hi, 0.0) + np.maximum(self.lo - values, 0.0)


def restore_bands(L: LagrangianProblem, t, margins, scale: float, cert_tol: float = CERT_TOL) -> _Bands:
    """Target bands of the auxiliary feasibility program.

    Every non-compact constraint must end inside ``|f_p| <= |v_p| - delta_p``,
    floored at ``0.5 cert_tol scale`` so already satisfied constraints keep a
    band of nonzero width; the compact one must end below ``v_dot - delta_dot``.
    """
    v = L.constraint_values(t)
    margins = np.asarray(margins, dtype=float)
    width = np.maximum(np.abs(v) - margins, 0.5 * cert_tol * scale)
    lo, hi = -width, width.copy()
    ineq = L.inequality_mask
    lo[ineq] = np.minimum(v[ineq], 0.0) + margins[ineq]
    hi[ineq] = np.inf
    k = L.compact_index
    lo[k], hi[k] = -np.inf, v[k] - margins[k]
    return _Bands(lo, hi)


def _as_real(x):
    return np.concatenate([x.real, x.imag])


def _as_complex(y):
    d = y.size // 2
    return y[:d] + 1j * y[d:]


def _values_and_jac(L: LagrangianProblem, t):
    """Constraint values at ``t`` and their real Jacobian w.r.t. ``(Re t, Im t)``."""
    vals = L.constraint_values(t)
    G = L.S - np.einsum("kij,j->ki", L.A, t)
    return vals, 2.0 * np.hstack([G.real, G.imag])


def _restore_sqp(L: LagrangianProblem, t_star, a_obj, target: _Bands, scale: float) -> np.ndarray:
    """SLSQP on the auxiliary program, in units of ``scale``."""
    s_obj = _as_real(L.objective.s)
    hi_k = np.flatnonzero(np.isfinite(target.hi))
    lo_k = np.flatnonzero(np.isfinite(target.lo))

    def fun(y):
        return -(2 * s_obj @ y - a_obj * y @ y) / scale, -(2 * s_obj - 2 * a_obj * y) / scale

    def cons(y):
        vals = L.constraint_values(t_star + _as_complex(y))
        return np.concatenate([target.hi[hi_k] - vals[hi_k], vals[lo_k] - target.lo[lo_k]]) / scale

    def cons_jac(y):
        _, J = _values_and_jac(L, t_star + _as_complex(y))
        return np.vstack([-J[hi_k], J[lo_k]]) / scale

    res = minimize(fun, np.zeros(2 * L.dim), jac=True, method="SLSQP",
                   constraints=[{"type": "ineq", "fun": cons, "jac": cons_jac}],
                   options={"maxiter": 500, "ftol": 1e-14})
    return res.x


def feasibility_restore(
    L: LagrangianProblem,
    t_star,
    a_obj: float,
    margins,
    scale: float | None = None,
    cert_tol: float = CERT_TOL,
) -> np.ndarray:
    """Shift ``t_delta`` that pulls every violated constraint back into its band.

    Approximately maximizes ``2 Re(t_delta^H s_obj) - a_obj |t_delta|^2``
    subject to the bands of :func:`restore_bands`. SLSQP is tried first;
    quadratic-penalty continuation with L-BFGS inner solves is the fallback.
    Both target bands tightened by 10% and the result is checked against
    the full bands.
    """
    if not a_obj > 0:
        raise PreconditionViolation("a_obj must be positive")
    t_star = np.asarray(t_star, dtype=complex)
    scale = scale or dual_scale(L)
    bands = restore_bands(L, t_star, margins, scale, cert_tol)
    v0 = L.constraint_values(t_star)
    target = bands.tightened(0.1, v0)
    s_obj = L.objective.s

    def penalty(y, rho):
        x = _as_complex(y)
        vals, J = _values_and_jac(L, t_star + x)
        over = np.maximum(vals - target.hi, 0.0)
        under = np.maximum(target.lo - vals, 0.0)
        obj = -(2 * np.real(np.vdot(x, s_obj)) - a_obj * np.real(np.vdot(x, x)))
        gobj = -(2 * _as_real(s_obj) - 2 * a_obj * y)
        val = obj / scale + rho * np.sum(over**2 + under**2) / scale**2
        grad = gobj / scale + 2 * rho * J.T @ (over - under) / scale**2
        return val, grad

    y = _restore_sqp(L, t_star, a_obj, target, scale)
    if np.all(bands.excess(L.constraint_values(t_star + _as_complex(y))) == 0):
        return _as_complex(y)
    y = np.zeros(2 * L.dim)
    width = np.min(np.where(np.isfinite(target.hi - target.lo), target.hi - target.lo, np.inf))
    width = min(width, np.min(np.abs(target.hi[np.isfinite(target.hi)] - v0[np.isfinite(target.hi)]), initial=np.inf))
    rho = 1.0 / max(width / scale, 1e-12)
    for _ in range(PENALTY_STAGES):
        res = minimize(penalty, y, args=(rho,), jac=True, method="L-BFGS-B",
                       options={"maxiter": INNER_STEPS, "gtol": 1e-14, "ftol": 1e-15})
        y = res.x
        vals = L.constraint_values(t_star + _as_complex(y))
        if np.all(bands.excess(vals) == 0):
            return _as_complex(y)
        rho *= PENALTY_GROWTH
    vals = L.constraint_values(t_star + _as_complex(y))
    raise RestoreFailure(
        f"penalty continuation ended with band excess {bands.excess(vals).max():.3e}"
    )


def single_shot(
    L: LagrangianProblem, t_star, scale: float | None = None, cert_tol: float = CERT_TOL
) -> np.ndarray:
    """Shift ``t_delta`` making ``t* + t_delta`` satisfy every constraint.

    Nonlinear least squares on the constraint residuals, started at ``t*``;
    inequalities only contribute while violated.
    """
    t_star = np.asarray(t_star, dtype=complex)
    scale = scale or dual_scale(L)
    ineq = L.inequality_mask

    def resid(y):
        vals = L.constraint_values(t_star + _as_complex(y))
        vals[ineq] = np.minimum(vals[ineq], 0.0)
        return vals / scale

    def jac(y):
        vals, J = _values_and_jac(L, t_star + _as_complex(y))
        J[ineq & (vals > 0)] = 0.0
        return J / scale

    res = least_squares(resid, np.zeros(2 * L.dim), jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
    x = _as_complex(res.x)
    viol = _violations(L, t_star + x)
    if np.max(viol) > 0.1 * cert_tol * scale:
        raise RestoreFailure(f"single-shot descent left violation {np.max(viol) / scale:.3e}")
    return x


def modify_source(L: LagrangianProblem, phi_last, t_delta, mode: str = "direct") -> LagrangianProblem:
    """Shift the objective's linear part using the last dual minimum.

    ``mode="direct"`` adds ``A_{phi_last} t_delta``, which moves the
    Lagrangian maximizer at ``phi_last`` from ``t*`` to exactly
    ``t* + t_delta``. ``mode="inverse"`` adds ``A_{phi_last}^{-1} t_delta``.
    """
    phi_last = L._check_phi(phi_last)
    _, A, _ = L.assemble(phi_last)
    lam = lambda_min(A) - L.eps
    if lam < -EIG_RTOL * op_norm(A):
        raise MultiplierOutsidePhiEps(f"lambda_min(A_phi - eps) = {lam:.3e} < 0", lam)
    t_delta = np.asarray(t_delta, dtype=complex)
    if mode == "direct":
        ds = A @ t_delta
    elif mode == "inverse":
        ds = np.linalg.solve(A, t_delta)
    else:
        raise ValueError(f"unknown modification mode {mode!r}")
    obj = L.objective
    return L.with_objective(QuadraticForm(obj.s + ds, obj.A, obj.v))


def bound_feedback(
    original: LagrangianProblem, modified_obj: QuadraticForm, modified_bound: float
) -> LagrangianProblem:
    """Add ``f_mod(t) <= modified_bound`` to the original problem.

    Stored as the ``InequalityLE`` form ``modified_bound - f_mod(t) >= 0``
    with a nonnegative multiplier. An infinite bound adds nothing.
    """
    if not np.isfinite(modified_bound):
        return original
    form = QuadraticForm(-modified_obj.s, -modified_obj.A, modified_bound - modified_obj.v)
    c = Constraint(form, ConstraintKind.INEQUALITY, "bound feedback")
    return original.with_constraints(original.constraints.appended(c))


@dataclass(frozen=True)
class RefineConfig:
    max_restarts: int = 10
    cert_tol: float = CERT_TOL
    a_obj: float = 1.0
    hybrid: bool = False
    single_shot: bool = False
    mode: str = "direct"
    solver: SolverConfig = field(default_factory=SolverConfig)


@dataclass
class RefinementStep:
    source_modification: np.ndarray
    dual_value: float
    max_violation: float
    method: str = "initial"
    alpha: float | None = None

    def to_dict(self) -> dict:
        return {
            "source_modification": self.source_modification,
            "dual_value": self.dual_value,
            "max_violation": self.max_violation,
            "method": self.method,
            "alpha": self.alpha,
        }


@dataclass
class RefinementTrace:
    iterations: list
    final: Certificate
    objective: QuadraticForm
    state: DualState = field(repr=False, default=None)

    @property
    def violations(self) -> list:
        return [it.max_violation for it in self.iterations]

    @property
    def total_modification(self) -> np.ndarray:
        return sum((it.source_modification for it in self.iterations), np.zeros(self.objective.dim, complex))

    def to_dict(self) -> dict:
        return {
            "iterations": [it.to_dict() for it in self.iterations],
            "final": self.final.to_dict(),
            "objective": self.objective,
        }


def _solve(L, cfg: RefineConfig, scale):
    st = minimize_dual(L, cfg.solver)
    st = replace(st, scale=scale or st.scale)
    return st, certify(st, L, cfg.cert_tol, st.scale)


def _at(L, phi, scale, cfg):
    st = replace(eval_dual(L, phi), scale=scale)
    return st, certify(st, L, cfg.cert_tol, scale)


def _hybrid(L, state, t_delta, scale, cfg):
    """Smallest fraction ``alpha`` of the single-shot modification whose
    re-minimized dual certifies as strong.

    ``alpha = 1`` is always strong (the shifted maximizer is feasible), so
    bisection keeps ``hi`` certified. Returns ``(alpha, problem, state, cert)``.
    """
    full = modify_source(L, state.phi, t_delta, cfg.mode)
    ds = full.objective.s - L.objective.s

    def scaled(alpha):
        obj = L.objective
        return L.with_objective(QuadraticForm(obj.s + alpha * ds, obj.A, obj.v))

    def attempt(alpha):
        La = scaled(alpha)
        try:
            st, cert = _solve(La, cfg, scale)
        except IterationLimit:
            return None
        return (La, st, cert) if cert.strong else None

    hi, best = 1.0, attempt(1.0)
    if best is None:
        La = scaled(1.0)
        best = (La, *_at(La, state.phi, scale, cfg))
    lo = 0.0
    for _ in range(HYBRID_STEPS):
        mid = 0.5 * (lo + hi)
        res = attempt(mid)
        if res is None:
            lo = mid
        else:
            hi, best = mid, res
    return (hi, *best)


def run_restart_loop(L: LagrangianProblem, cfg: RefineConfig | None = None) -> RefinementTrace:
    """Minimize, certify, and while a gap remains modify the source and restart.

    Each restart must strictly lower the maximal constraint violation at the
    dual maximizer. The band-restoration step is tried first (unless
    ``cfg.single_shot``). It is kept only if its contraction rate, repeated
    over the remaining restarts, would reach ``cert_tol``. Otherwise a
    single-shot modification makes ``t* + t_delta`` feasible, which certifies
    immediately at the previous multipliers. With ``cfg.hybrid`` the smallest
    fraction of that modification that still certifies is used instead.
    """
    cfg = cfg or RefineConfig()
    state, cert = _solve(L, cfg, None)
    scale = state.scale
    zero = np.zeros(L.dim, dtype=complex)
    steps = [RefinementStep(zero, state.value, cert.max_violation)]
    cur = L
    for used in range(cfg.max_restarts):
        remaining = cfg.max_restarts - used
        if cert.strong:
            break
        candidate = None
        if not cfg.single_shot:
            try:
                margins = default_margins(cur, state.t_star, scale, cfg.cert_tol)
                t_delta = feasibility_restore(cur, state.t_star, cfg.a_obj, margins, scale, cfg.cert_tol)
                L_new = modify_source(cur, state.phi, t_delta, cfg.mode)
                st_new, cert_new = _solve(L_new, cfg, scale)
                q = cert_new.max_violation / cert.max_violation
                # at the observed contraction rate, would the remaining
                # restarts reach the certification tolerance?
                projected = cert_new.max_violation * q ** (remaining - 1)
                if q < 1 and (cert_new.strong or projected <= cfg.cert_tol):
                    candidate = (L_new, st_new, cert_new, "restore", None)
            except (RestoreFailure, IterationLimit):
                candidate = None
        if candidate is None:
            try:
                t_delta = single_shot(cur, state.t_star, scale, cfg.cert_tol)
            except RestoreFailure:
                break
            alpha = None
            if cfg.hybrid:
                alpha, L_h, st_h, cert_h = _hybrid(cur, state, t_delta, scale, cfg)
                if cert_h.max_violation < cert.max_violation:
                    candidate = (L_h, st_h, cert_h, "hybrid", alpha)
            if candidate is None:
                L_new = modify_source(cur, state.phi, t_delta, cfg.mode)
                st_new, cert_new = _at(L_new, state.phi, scale, cfg)
                candidate = (L_new, st_new, cert_new, "single_shot", None)
        L_new, st_new, cert_new, method, alpha = candidate
        if not cert_new.max_violation < cert.max_violation:
            break
        steps.append(
            RefinementStep(
                L_new.objective.s - cur.objective.s, st_new.value, cert_new.max_violation, method, alpha
            )
        )
        cur, state, cert = L_new, st_new, cert_new
    return RefinementTrace(steps, cert, cur.objective, state)
