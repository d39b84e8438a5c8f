import numpy as np
import pytest

from duality_bounds.constraints import default_family
from duality_bounds.dual import LagrangianProblem, minimize_dual
from duality_bounds.exceptions import DesignCapExceeded, PreconditionViolation
from duality_bounds.quadratic import QuadraticForm, eval_form, lambda_min
from duality_bounds.scattering import (
    Design,
    build_toy_problem,
    enumerate_designs,
    power_objective,
    solve_design,
)
from duality_bounds.verification import (
    QVerdict,
    fd_check_suite,
    is_feasible,
    violation_bound_at_optimum,
    lemma4_violation_bound,
    minimax_cross_check,
    oracle_bound,
    psd_combination_check,
    q_membership,
    sampled_F,
    verify_certificate,
    weak_duality_check,
)

from conftest import random_complex


@pytest.fixture(scope="module")
def L8(toy8):
    cs = default_family(toy8, [Design((1, 0, 1, 0)), Design((1, 1, 0, 0))])
    return LagrangianProblem.build(power_objective(toy8), cs)


@pytest.fixture(scope="module")
def state8(L8):
    return minimize_dual(L8)


@pytest.fixture(scope="module")
def design_fields(toy8):
    return [t for _, t in enumerate_designs(toy8)]


class TestOracleBound:
    def test_zero_objective(self, toy8):
        val, arg = oracle_bound(toy8, QuadraticForm.zero(8))
        assert val == 0.0 and arg == Design.empty(4)

    def test_scalar(self):
        p = build_toy_problem(1, 1, 0.5, 0.0, 0)
        f = power_objective(p)
        t1 = p.s / (p.Vinv - p.G)[0, 0]
        val, _ = oracle_bound(p, f)
        assert val == pytest.approx(max(0.0, eval_form(f, t1)), rel=1e-14)

    def test_weak_duality(self, toy8, L8, state8):
        rep = weak_duality_check(toy8, L8, state8)
        assert rep.passed and rep.oracle_value <= state8.value

    def test_cap(self):
        p = build_toy_problem(21, 21, 0.3, 0.5, 0)
        with pytest.raises(DesignCapExceeded):
            oracle_bound(p, power_objective(p))


class TestSampledF:
    def test_feasible_design(self, L8, design_fields):
        for t in design_fields:
            assert is_feasible(L8, t)
            assert sampled_F(L8, t, budget=5) == eval_form(L8.objective, t)

    def test_certified_violation_diverges(self, L8, design_fields):
        u = 0.5 * design_fields[-1] * (1 + 0.3j)
        assert eval_form(L8.compact, u) >= 0
        q = q_membership(L8, u, budget=50)
        assert q.verdict is QVerdict.NOT_IN_Q
        assert sampled_F(L8, u, budget=20) == -np.inf

    def test_upper_bounds_starts(self, L8, state8, rng):
        t = 0.5 * design_fields_mix(L8, rng)
        val = sampled_F(L8, t, budget=10, starts=[state8.phi])
        assert val <= L8.lagrangian(state8.phi, t) + 1e-12

    def test_outside_C(self, L8, design_fields):
        with pytest.raises(PreconditionViolation):
            sampled_F(L8, -3 * design_fields[-1])


def design_fields_mix(L, rng):
    """A random point of C that is generally infeasible."""
    while True:
        t = 0.1 * random_complex(rng, L.dim)
        if eval_form(L.compact, t) >= 0:
            return t


class TestQMembership:
    def test_design_no_violation(self, L8, design_fields):
        for t in design_fields[:4]:
            assert q_membership(L8, t, budget=20).verdict is QVerdict.NO_VIOLATION_FOUND

    def test_scaled_design_not_in_Q(self, L8, state8, design_fields):
        t = 10 * design_fields[-1]
        q = q_membership(L8, t, budget=20)
        assert q.verdict is QVerdict.NOT_IN_Q
        psi = q.certificate
        Apsi = np.tensordot(psi, L8.A, axes=1)
        assert lambda_min(Apsi) - L8.eps >= -1e-10 * np.linalg.norm(Apsi, 2)
        assert eval_form(L8.combination(psi), t) < 0
        assert verify_certificate(L8, t, psi, state8.scale)

    def test_budget_zero(self, L8, design_fields):
        assert q_membership(L8, 10 * design_fields[-1], budget=0).verdict is QVerdict.NO_VIOLATION_FOUND


class TestViolationBound:
    def test_feasible_trivial(self, L8, design_fields):
        rep = lemma4_violation_bound(L8, design_fields[5], L8.compact, 0.0)
        assert rep.passed
        assert np.all(np.abs(rep.values) <= 1e-9)

    def test_perturbation_sweep(self, L8, design_fields, rng):
        n = 0
        for t0 in design_fields:
            t = t0 + 1e-4 * random_complex(rng, 8)
            delta = eval_form(L8.compact, t)
            if delta < 0:
                continue
            n += 1
            rep = lemma4_violation_bound(L8, t, L8.compact, delta)
            assert rep.passed and np.all(rep.margins >= 0)
        assert n > 0

    def test_injected_fault(self, L8, design_fields):
        # f_d outside the constraint span: eps-definite, tiny at t, yet t violates
        t = 1.5 * design_fields[-1]
        eps = L8.eps
        delta = 1e-12
        s_d = (eps * np.vdot(t, t).real + delta) / (2 * np.vdot(t, t).real) * t
        f_d = QuadraticForm(s_d, eps * np.eye(8))
        rep = lemma4_violation_bound(L8, t, f_d, 2 * delta)
        assert not rep.passed

    def test_precondition(self, L8, design_fields):
        with pytest.raises(PreconditionViolation):
            lemma4_violation_bound(L8, design_fields[0], QuadraticForm.zero(8), 0.0)
        with pytest.raises(PreconditionViolation):
            lemma4_violation_bound(L8, 2 * design_fields[-1], L8.compact, 0.0)

    def test_at_optimum(self, L8, state8):
        assert violation_bound_at_optimum(L8, state8).passed


class TestFD:
    def test_empty(self, L8):
        rep = fd_check_suite(L8, 0)
        assert rep.passed and rep.n_checked == 0

    def test_toy(self, L8):
        rep = fd_check_suite(L8, 10, seed=3)
        assert rep.n_checked == 10
        assert rep.max_grad_rel_err <= 1e-6
        assert rep.max_hess_rel_err <= 1e-4
        assert rep.n_excluded >= 0
        assert rep.passed


class TestMinimax:
    def test_random_toy(self, toy8, L8, state8):
        rep = minimax_cross_check(L8, toy8, budget=100, seed=1, state=state8)
        assert rep.passed
        assert rep.n_phi == 100

    def test_zero_objective(self, toy8, L8):
        L0 = L8.with_objective(QuadraticForm.zero(8))
        st0 = minimize_dual(L0)
        rep = minimax_cross_check(L0, toy8, budget=20, state=st0)
        assert rep.passed
        assert abs(rep.dual_value) <= 1e-7 * st0.scale
        assert abs(rep.max_sampled_F) <= 1e-7 * st0.scale
        assert rep.weak_violation <= 1e-9 * st0.scale


class TestPSDCombinations:
    def test_psd_combinations(self, L8, state8):
        rep = psd_combination_check(L8, state8, n_samples=100)
        assert rep.passed
