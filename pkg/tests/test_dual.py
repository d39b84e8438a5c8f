import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq, minimize_scalar

from duality_bounds.constraints import Constraint, ConstraintSet, compact_constraint, default_family
from duality_bounds.dual import (
    DualStatus,
    LagrangianProblem,
    SolverConfig,
    coercivity_check,
    compact_shift,
    dual_gradient,
    dual_hessian,
    eval_dual,
    lift_bracket,
    lift_phi_dot,
    minimize_dual,
)
from duality_bounds.exceptions import BoundaryState, MultiplierOutsidePhiEps
from duality_bounds.quadratic import QuadraticForm, eval_form, solve_hermitian
from duality_bounds.scattering import Design, build_toy_problem, enumerate_designs, power_objective
from duality_bounds.verification import oracle_bound


def domain_point(L, rng, spread=1.0, margin=(1e-3, 1.0)):
    phi = spread * rng.standard_normal(L.n_multipliers)
    phi[L.inequality_mask] = np.abs(phi[L.inequality_mask])
    c = compact_shift(L, phi, L.eps)
    phi[L.compact_index] = c + rng.uniform(*margin) * max(1.0, abs(c))
    return phi


def scalar_max_on_C(f, fdot):
    """max of a scalar form over the disk ``fdot >= 0``.

    For each phase the radial profile is a concave quadratic on an interval,
    so the inner max is closed form; the phase is scanned then polished.
    """
    a, s, v = f.A[0, 0].real, f.s[0], f.v
    ad, sd = fdot.A[0, 0].real, fdot.s[0]

    def best_r(theta):
        u = np.exp(1j * theta)
        r_max = max(2 * (np.conj(u) * sd).real / ad, 0.0)
        lin = 2 * (np.conj(u) * s).real
        r = r_max if a <= 0 else min(max(lin / (2 * a), 0.0), r_max)
        r = r if lin * r - a * r * r >= 0 or a <= 0 else 0.0
        cands = [0.0, r, r_max]
        return max(lin * x - a * x * x for x in cands) + v

    th = np.linspace(0, 2 * np.pi, 20001)
    vals = np.array([best_r(x) for x in th])
    i = int(np.argmax(vals))
    res = minimize_scalar(lambda x: -best_r(x), bounds=(th[max(i - 1, 0)], th[min(i + 1, th.size - 1)]),
                          method="bounded", options={"xatol": 1e-13})
    return max(vals[i], -res.fun)


@pytest.fixture(scope="module")
def scalar_L():
    p = build_toy_problem(1, 1, 0.5, 0.0, 0)
    return LagrangianProblem.build(power_objective(p), default_family(p, []))


@pytest.fixture(scope="module")
def toy_L(toy8):
    cs = default_family(toy8, [Design((1, 0, 1, 0)), Design((1, 1, 0, 0))])
    return LagrangianProblem.build(power_objective(toy8), cs)


class TestEvalDual:
    def test_single_compact_constraint(self, toy8):
        c = compact_constraint(toy8)
        L = LagrangianProblem.build(QuadraticForm.zero(8), ConstraintSet((c,)))
        st_ = eval_dual(L, [1.0])
        t = solve_hermitian(c.form.A, c.form.s)
        assert st_.lift_alpha == 0
        assert st_.value == pytest.approx(np.vdot(c.form.s, t).real, rel=1e-12)
        np.testing.assert_allclose(st_.t_star, t, rtol=1e-10, atol=1e-14)

    def test_scalar_grid_oracle(self, scalar_L, rng):
        for _ in range(15):
            phi = domain_point(scalar_L, rng, spread=2.0, margin=(1e-3, 3.0))
            st_ = eval_dual(scalar_L, phi)
            f = QuadraticForm(*scalar_L.assemble(phi))
            oracle = scalar_max_on_C(f, scalar_L.compact)
            assert st_.value == pytest.approx(oracle, abs=1e-8 * (1 + abs(oracle)))

    def test_outside_domain(self, toy_L):
        with pytest.raises(MultiplierOutsidePhiEps):
            eval_dual(toy_L, np.zeros(toy_L.n_multipliers))

    def test_lagrangian_identity(self, toy_L, rng):
        for _ in range(10):
            phi = domain_point(toy_L, rng)
            st_ = eval_dual(toy_L, phi)
            assert toy_L.lagrangian(st_.phi_effective, st_.t_star) == pytest.approx(st_.value, rel=1e-10)
            assert eval_form(toy_L.compact, st_.t_star) >= -1e-10 * (1 + abs(st_.value))

    def test_lift_idempotent(self, toy_L, rng):
        n = 0
        while n < 10:
            phi = domain_point(toy_L, rng, spread=3.0, margin=(1e-3, 0.05))
            st_ = eval_dual(toy_L, phi)
            if st_.lift_alpha == 0:
                continue
            n += 1
            again = eval_dual(toy_L, st_.phi_effective)
            assert again.lift_alpha <= 1e-8 * (1 + st_.lift_alpha)
            assert again.value == pytest.approx(st_.value, rel=1e-9)


class TestLift:
    def adversarial(self, scalar_L, push):
        fd = scalar_L.compact
        # a linear objective pointing away from the disk makes t-hat leave C
        return scalar_L.with_objective(QuadraticForm(-push * fd.s, np.zeros((1, 1))))

    def test_no_lift_when_inside(self, toy_L):
        phi = domain_point(toy_L, np.random.default_rng(0))
        phi[toy_L.compact_index] += 1e3
        assert eval_dual(toy_L, phi).lift_alpha == 0

    @pytest.mark.parametrize("push", [1.0, 2.0, 10.0, 100.0])
    def test_scalar_root_scan(self, scalar_L, push):
        L = self.adversarial(scalar_L, push)
        phi = np.zeros(L.n_multipliers)
        phi[L.compact_index] = compact_shift(L, phi, L.eps) + 0.5
        alpha, t = lift_phi_dot(L, phi)
        assert alpha > 0
        s, A, _ = L.assemble(phi)
        fd = L.compact

        def g(a):
            return eval_form(fd, (s + a * fd.s) / (A + a * fd.A)[0, 0])

        grid = np.concatenate([[0.0], np.logspace(-12, 12, 4000)])
        vals = np.array([g(a) for a in grid])
        k = int(np.argmax(vals >= 0))
        root = brentq(g, grid[k - 1], grid[k], xtol=1e-15, rtol=1e-15)
        assert alpha == pytest.approx(root, abs=1e-8, rel=1e-8)
        lo, hi = lift_bracket(L, phi)
        assert lo <= 0 <= hi

    def test_lifted_gradient(self, scalar_L):
        L = self.adversarial(scalar_L, 5.0)
        phi = np.zeros(L.n_multipliers)
        phi[L.compact_index] = compact_shift(L, phi, L.eps) + 0.5
        st_ = eval_dual(L, phi)
        assert st_.status is DualStatus.LIFTED
        assert dual_gradient(st_, L)[L.compact_index] == 0.0
        with pytest.raises(BoundaryState):
            dual_hessian(st_, L)


class TestDerivatives:
    def test_gradient_is_residuals(self, toy_L, rng):
        phi = domain_point(toy_L, rng)
        st_ = eval_dual(toy_L, phi)
        if st_.lift_alpha == 0:
            np.testing.assert_allclose(dual_gradient(st_, toy_L), toy_L.constraint_values(st_.t_star))

    def test_single_constraint_hessian(self, toy8):
        c = compact_constraint(toy8)
        L = LagrangianProblem.build(power_objective(toy8), ConstraintSet((c,)))
        st_ = eval_dual(L, [5.0])
        H = dual_hessian(st_, L)
        assert H.shape == (1, 1) and H[0, 0] >= 0

    def test_hessian_psd(self, toy_L, rng):
        n = 0
        while n < 100:
            st_ = eval_dual(toy_L, domain_point(toy_L, rng))
            if st_.status is not DualStatus.INTERIOR or st_.lift_alpha > 0:
                continue
            n += 1
            H = dual_hessian(st_, toy_L)
            np.testing.assert_array_equal(H, H.T)
            assert np.linalg.eigvalsh(H)[0] >= -1e-8 * np.linalg.norm(H, 2)


class TestMinimizeDual:
    def test_weak_duality_toy(self, toy8, toy_L):
        st_ = minimize_dual(toy_L)
        best, _ = oracle_bound(toy8, toy_L.objective)
        assert st_.value >= best - 1e-8 * st_.scale

    def test_monotone_history(self, toy_L):
        st_ = minimize_dual(toy_L)
        h = np.array(st_.history)
        assert np.all(np.diff(h) <= 4 * np.finfo(float).eps * st_.scale)

    def test_converged_or_boundary(self, toy_L):
        st_ = minimize_dual(toy_L, SolverConfig(grad_tol=1e-8))
        if st_.status is DualStatus.INTERIOR:
            assert st_.grad_norm <= 1e-8 * st_.scale
        else:
            assert st_.status is DualStatus.ON_EPS_BOUNDARY

    def test_zero_objective(self, toy8):
        c = compact_constraint(toy8)
        L = LagrangianProblem.build(QuadraticForm.zero(8), ConstraintSet((c,)))
        st_ = minimize_dual(L)
        # D(phi) = s^H A^-1 s / phi decreases towards the boundary of the domain
        assert st_.value < eval_dual(L, [1.0]).value
        assert np.all(np.diff(st_.history) <= 0)

    def test_uniqueness(self, toy_L, rng):
        a = minimize_dual(toy_L)
        b = minimize_dual(toy_L, phi0=domain_point(toy_L, rng, spread=0.3))
        assert abs(a.value - b.value) <= 1e-7 * a.scale

    def test_visited_points_bound_designs(self, toy8, toy_L, rng):
        designs = [t for _, t in enumerate_designs(toy8)]
        fvals = [eval_form(toy_L.objective, t) for t in designs]
        for _ in range(20):
            st_ = eval_dual(toy_L, domain_point(toy_L, rng))
            assert max(fvals) <= st_.value + 1e-8 * (1 + abs(st_.value))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_convexity_midpoint(self, toy_L, seed):
        rng = np.random.default_rng(seed)
        a, b = domain_point(toy_L, rng), domain_point(toy_L, rng)
        da, db = eval_dual(toy_L, a).value, eval_dual(toy_L, b).value
        dm = eval_dual(toy_L, 0.5 * (a + b)).value
        assert dm <= 0.5 * (da + db) + 1e-9 * (1 + abs(da) + abs(db))


class TestCoercivity:
    def test_single_compact(self, toy8):
        c = compact_constraint(toy8)
        L = LagrangianProblem.build(power_objective(toy8), ConstraintSet((c,)))
        res = coercivity_check(L, 1e-6)
        assert res.passed
        # the only unit direction is e_dot, where max_C f_dot = s^H A^-1 s
        peak = np.vdot(c.form.s, solve_hermitian(c.form.A, c.form.s)).real
        assert res.value == pytest.approx(peak, rel=1e-9)

    def test_default_family_passes(self, toy_L):
        scale = minimize_dual(toy_L).scale
        assert coercivity_check(toy_L, 1e-6 * scale).passed

    def test_adversarial_pair_fails(self, toy8, toy_L):
        f = toy_L.constraints[1].form
        g = QuadraticForm(-f.s, -f.A + 0.1 * np.eye(8))
        cs = toy_L.constraints.appended(Constraint(g, label="mirror"))
        L2 = toy_L.with_constraints(cs)
        res = coercivity_check(L2, 1e-6)
        assert not res.passed
        assert res.value <= 1e-6
        assert np.linalg.norm(res.direction @ L2.S) <= 1e-10
