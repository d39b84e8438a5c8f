import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from duality_bounds.constraints import (
    Constraint,
    ConstraintSet,
    compact_constraint,
    default_family,
    gen_constraint_background,
    gen_constraint_simple,
    validate_on_designs,
)
from duality_bounds.exceptions import BlockStructureError
from duality_bounds.quadratic import (
    Definiteness,
    QuadraticForm,
    definiteness,
    eval_form,
    solve_hermitian,
)
from duality_bounds.scattering import Design, block_diagonal_P, build_toy_problem, enumerate_designs

from conftest import random_complex

designs4 = st.lists(st.integers(0, 1), min_size=4, max_size=4).map(tuple)


def max_normalized(c, p):
    return max(c.violation(t) / max(c.scale(t), 1e-300) for _, t in enumerate_designs(p))


class TestCompactConstraint:
    def test_zero_field(self, toy8):
        assert eval_form(compact_constraint(toy8).form, np.zeros(8)) == 0.0

    def test_positive_definite(self, toy8):
        A = compact_constraint(toy8).form.A
        assert definiteness(A, toy8.eps_passivity) is Definiteness.POSITIVE_DEFINITE_EPS

    def test_vanishes_on_designs(self, toy8):
        assert max_normalized(compact_constraint(toy8), toy8) <= 1e-9

    def test_maximum(self, toy8):
        f = compact_constraint(toy8).form
        t = solve_hermitian(f.A, f.s)
        peak = np.vdot(f.s, t).real
        assert eval_form(f, t) == pytest.approx(peak, rel=1e-12)
        assert peak > 0

    def test_compact_ball(self, toy8, rng):
        # boundary points of {f >= 0} along random rays stay in the ball
        f = compact_constraint(toy8).form
        radius = 2 * np.linalg.norm(f.s) / toy8.eps_passivity
        for _ in range(200):
            u = random_complex(rng, 8)
            tau = 2 * np.vdot(u, f.s).real / np.vdot(u, f.A @ u).real
            assert np.linalg.norm(abs(tau) * u) <= radius


class TestSimpleConstraint:
    def test_zero_P(self, toy8):
        f = gen_constraint_simple(toy8, np.zeros((8, 8))).form
        assert not f.s.any() and not f.A.any()

    def test_iI_matches_compact(self, toy8):
        a = gen_constraint_simple(toy8, 1j * np.eye(8)).form
        b = compact_constraint(toy8).form
        np.testing.assert_allclose(a.s, b.s, atol=1e-14)
        np.testing.assert_allclose(a.A, b.A, atol=1e-14)

    def test_rejects_block_mixing(self, toy8):
        with pytest.raises(BlockStructureError):
            gen_constraint_simple(toy8, np.ones((8, 8)))

    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_valid_random_P(self, toy8, seed):
        rng = np.random.default_rng(seed)
        P = np.zeros((8, 8), complex)
        for b in toy8.partition.blocks:
            P[np.ix_(b, b)] = random_complex(rng, len(b), len(b))
        assert max_normalized(gen_constraint_simple(toy8, P), toy8) <= 1e-9


class TestBackgroundConstraint:
    def test_empty_background_reduces(self, toy8, rng):
        P = block_diagonal_P(toy8.partition, random_complex(rng, 4))
        a = gen_constraint_background(toy8, P, Design.empty(4)).form
        # with no background the relation is the simple one for P V
        b = gen_constraint_simple(toy8, P @ toy8.V).form
        np.testing.assert_allclose(a.s, b.s, atol=1e-12)
        np.testing.assert_allclose(a.A, b.A, atol=1e-12)

    def test_zero_P(self, toy8):
        f = gen_constraint_background(toy8, np.zeros((8, 8)), Design.full(4)).form
        assert not f.s.any() and not f.A.any()

    @settings(max_examples=16, deadline=None)
    @given(designs4, st.integers(0, 3))
    def test_valid_projector(self, toy8, b, j):
        P = toy8.partition.projector(j)
        for Q in (P, 1j * P):
            assert max_normalized(gen_constraint_background(toy8, Q, Design(b)), toy8) <= 1e-9


class TestDefaultFamily:
    def test_count_no_backgrounds(self):
        p = build_toy_problem(4, 2, 0.3, 0.5, 3)
        cs = default_family(p, [])
        assert len(cs) == 5
        assert cs.compact_index == 0

    def test_full_background_adds(self, toy8):
        base = len(default_family(toy8, []))
        more = len(default_family(toy8, [Design.full(4)]))
        assert more > base

    def test_empty_background_in_simple_span(self, toy8):
        # b = empty gives P V = v P: a real combination of the P and iP constraints
        def rank(cs):
            S, A, _ = cs.stacked()
            M = np.concatenate([S, A.reshape(len(cs), -1)], axis=1)
            return np.linalg.matrix_rank(np.concatenate([M.real, M.imag], axis=1), tol=1e-10)

        assert rank(default_family(toy8, [Design.empty(4)])) == rank(default_family(toy8, []))

    def test_normalization(self, toy8):
        cs = default_family(toy8, [Design((1, 0, 1, 0))])
        for k, c in enumerate(cs):
            if k != cs.compact_index:
                assert np.linalg.norm(c.form.A, 2) == pytest.approx(1.0)

    def test_all_valid(self, toy8):
        cs = default_family(toy8, [Design((1, 0, 1, 0)), Design((1, 1, 0, 0))])
        assert validate_on_designs(cs, toy8, 1e-8).passed


class TestValidate:
    def test_corrupted(self, toy8):
        cs = default_family(toy8, [])
        k = 3
        bad = cs[k].form
        corrupted = Constraint(QuadraticForm(1.01 * bad.s, bad.A, bad.v), label="corrupt")
        cs2 = ConstraintSet(cs.constraints[:k] + (corrupted,) + cs.constraints[k + 1:])
        rep = validate_on_designs(cs2, toy8, 1e-8)
        assert not rep.passed
        assert rep.worst_constraint == k
        t = dict(enumerate_designs(toy8))[rep.worst_design]
        assert abs(eval_form(corrupted.form, t)) > 1e-8 * corrupted.scale(t)

    def test_vacuous(self, toy8):
        rep = validate_on_designs(default_family(toy8, []), toy8, 1e-8, designs=[])
        assert rep.passed and rep.n_designs == 0
