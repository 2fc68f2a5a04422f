import itertools
import json

import numpy as np
import pytest

from nlbp.lifting import (
    ConstraintKind,
    DegreeTooHighError,
    LiftedConstraint,
    OddOrderError,
    build_lifted_problem,
    generate_dependency_constraints,
    lift_vector,
    lifted_problem_from_json,
    lifted_problem_to_json,
    polynomial_to_quadratic_form,
)
from nlbp.monomials import (
    MultiIndex,
    Polynomial,
    enumerate_basis,
    eval_polynomial,
    random_polynomial,
)


def quad_value(matrix, vec):
    return float(vec @ matrix @ vec)


class TestQuadraticForm:
    def test_one_plus_x1_entries(self):
        basis = enumerate_basis(2, 2)
        p = Polynomial(2, {MultiIndex((0, 0)): 1.0, MultiIndex((1, 0)): 1.0})
        form = polynomial_to_quadratic_form(p, basis)
        assert form[0, 0] == 1.0
        assert form[0, 1] == 0.5
        assert form[1, 0] == 0.5
        assert np.count_nonzero(form) == 3
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.normal(size=2)
            lifted = lift_vector(x, basis)
            assert quad_value(form, lifted) == pytest.approx(
                eval_polynomial(p, x), rel=1e-12, abs=1e-12)

    def test_zero_polynomial(self):
        basis = enumerate_basis(2, 2)
        form = polynomial_to_quadratic_form(Polynomial(2, {}), basis)
        assert np.all(form == 0.0)

    def test_equal_split_over_pairs(self):
        # x^2 over a half-degree-2 basis splits across (1, x^2) and (x, x)
        basis = enumerate_basis(1, 2)
        p = Polynomial(1, {MultiIndex((2,)): 1.0})
        form = polynomial_to_quadratic_form(p, basis)
        assert form[0, 2] == 0.25
        assert form[2, 0] == 0.25
        assert form[1, 1] == 0.5

    def test_identity_random_quartics(self):
        # evaluation oracle: the quadratic form must reproduce the polynomial
        rng = np.random.default_rng(3)
        basis = enumerate_basis(3, 2)
        for seed in range(5):
            p = random_polynomial(3, 4, seed, 1.0)
            form = polynomial_to_quadratic_form(p, basis)
            assert np.array_equal(form, form.T)
            for _ in range(100):
                x = rng.normal(size=3)
                lifted = lift_vector(x, basis)
                val = eval_polynomial(p, x)
                assert abs(quad_value(form, lifted) - val) < 1e-9 * (1 + abs(val))

    def test_degree_too_high(self):
        basis = enumerate_basis(2, 1)
        p = Polynomial(2, {MultiIndex((2, 1)): 1.0})
        with pytest.raises(DegreeTooHighError):
            polynomial_to_quadratic_form(p, basis)

    def test_variable_count_mismatch(self):
        basis = enumerate_basis(2, 1)
        with pytest.raises(ValueError):
            polynomial_to_quadratic_form(Polynomial(3, {}), basis)


class TestDependencyGeneration:
    def test_normalization_first(self):
        basis = enumerate_basis(2, 2)
        cons = generate_dependency_constraints(basis)
        first = cons[0]
        assert first.kind is ConstraintKind.NORMALIZATION
        assert first.value == 1.0
        expected = np.zeros((6, 6))
        expected[0, 0] = 1.0
        assert np.array_equal(first.matrix, expected)

    def test_product_relation_cells(self):
        # x1 * x2 reproduces the x1*x2 entry: product cell 1/2, tie to the
        # constant-row cell -1/2
        basis = enumerate_basis(2, 2)
        cons = generate_dependency_constraints(basis)
        i_prod = basis.index_of[MultiIndex((1, 1))]
        k = basis.index_of[MultiIndex((1, 0))]
        l = basis.index_of[MultiIndex((0, 1))]
        match = [
            c for c in cons
            if c.kind is ConstraintKind.DEPENDENCY and c.matrix[k, l] == 0.5
            and c.matrix[0, i_prod] == -0.5
        ]
        assert len(match) == 1
        c = match[0]
        assert c.value == 0.0
        assert c.matrix[l, k] == 0.5
        assert c.matrix[i_prod, 0] == -0.5
        assert np.count_nonzero(c.matrix) == 4

    def test_square_relation_cells(self):
        basis = enumerate_basis(2, 2)
        cons = generate_dependency_constraints(basis)
        i_sq = basis.index_of[MultiIndex((2, 0))]
        k = basis.index_of[MultiIndex((1, 0))]
        match = [
            c for c in cons
            if c.kind is ConstraintKind.DEPENDENCY and c.matrix[k, k] == 1.0
            and c.matrix[0, i_sq] == -0.5
        ]
        assert len(match) == 1
        assert np.count_nonzero(match[0].matrix) == 3

    def test_no_dependencies_when_unrepresentable(self):
        # basis {1, x1}: the only candidate product x1*x1 leaves the basis
        basis = enumerate_basis(1, 1)
        cons = generate_dependency_constraints(basis)
        assert len(cons) == 1
        assert cons[0].kind is ConstraintKind.NORMALIZATION

    def test_dependency_shape_and_values(self):
        basis = enumerate_basis(3, 2)
        for c in generate_dependency_constraints(basis):
            if c.kind is not ConstraintKind.DEPENDENCY:
                continue
            assert c.value == 0.0
            nz = np.count_nonzero(c.matrix)
            assert nz in (3, 4)
            assert set(np.unique(c.matrix[c.matrix != 0.0])) <= {-0.5, 0.5, 1.0}

    def test_planted_lift_satisfies_dependencies(self):
        rng = np.random.default_rng(4)
        basis = enumerate_basis(3, 2)
        cons = generate_dependency_constraints(basis)
        for _ in range(20):
            x = rng.normal(size=3)
            lifted = lift_vector(x, basis)
            for c in cons:
                assert abs(quad_value(c.matrix, lifted) - c.value) < 1e-12 * (
                    1 + np.max(lifted) ** 2)

    def test_dedup_counts_two_vars(self):
        basis = enumerate_basis(2, 2)
        dedup = generate_dependency_constraints(basis, dedup=True)
        raw = generate_dependency_constraints(basis, dedup=False)
        # three representable products: x1^2, x1*x2, x2^2; the mixed one is
        # emitted twice by the raw sweep
        assert len(dedup) == 1 + 3
        assert len(raw) == 1 + 4

    def test_dedup_preserves_order_and_prefix(self):
        basis = enumerate_basis(3, 2)
        dedup = generate_dependency_constraints(basis, dedup=True)
        raw = generate_dependency_constraints(basis, dedup=False)
        # every dedup constraint appears in the raw list, in the same order
        raw_iter = iter(raw)
        for c in dedup:
            for r in raw_iter:
                if r.value == c.value and np.array_equal(r.matrix, c.matrix):
                    break
            else:
                pytest.fail("dedup emitted a constraint missing from the raw sweep")

    def test_dependency_completeness(self):
        # independent enumeration: every representable product of two
        # non-constant entries must be covered by some dependency
        basis = enumerate_basis(2, 3)
        cons = generate_dependency_constraints(basis)
        deps = [c for c in cons if c.kind is ConstraintKind.DEPENDENCY]
        for k, l in itertools.combinations_with_replacement(
                range(1, len(basis)), 2):
            total = basis.entries[k] + basis.entries[l]
            if total not in basis.index_of:
                continue
            i = basis.index_of[total]
            found = any(
                c.matrix[0, i] == -0.5
                and (c.matrix[k, l] == (1.0 if k == l else 0.5))
                for c in deps
            )
            assert found, f"missing dependency for entries {k} * {l} -> {i}"

    def test_count_is_function_of_shape_only(self):
        # frozen counts: 15 products of degree-one entries over 5 variables
        basis = enumerate_basis(5, 2)
        dedup = generate_dependency_constraints(basis, dedup=True)
        raw = generate_dependency_constraints(basis, dedup=False)
        assert len(dedup) == 1 + 15
        assert len(raw) == 1 + 25


class TestBuildLiftedProblem:
    def test_reference_experiment_shape(self):
        polys = [random_polynomial(5, 4, s, 1.0) for s in range(50)]
        values = np.zeros(50)
        problem = build_lifted_problem(polys, values, 4)
        assert problem.dim == 21
        kinds = [c.kind for c in problem.constraints]
        assert kinds[:50] == [ConstraintKind.DATA] * 50
        assert kinds[50] is ConstraintKind.NORMALIZATION
        assert all(k is ConstraintKind.DEPENDENCY for k in kinds[51:])
        assert problem.num_constraints == 66
        assert problem.num_data == 50

    def test_trivial_problem(self):
        p = Polynomial(1, {MultiIndex((1,)): 1.0})
        problem = build_lifted_problem([p], [0.0], 2)
        assert problem.num_constraints == 2

    def test_planted_lift_feasibility(self):
        rng = np.random.default_rng(5)
        for seed in range(5):
            n = int(rng.integers(1, 5))
            polys = [random_polynomial(n, 4, 100 + seed * 7 + j, 1.0)
                     for j in range(6)]
            x = rng.normal(size=n)
            values = [eval_polynomial(p, x) for p in polys]
            problem = build_lifted_problem(polys, values, 4)
            lifted = lift_vector(x, problem.basis)
            planted = np.outer(lifted, lifted)
            for c in problem.constraints:
                err = abs(float(np.sum(c.matrix * planted)) - c.value)
                assert err < 1e-9 * (1 + abs(c.value))

    def test_odd_order_rejected(self):
        p = Polynomial(1, {MultiIndex((1,)): 1.0})
        with pytest.raises(OddOrderError):
            build_lifted_problem([p], [0.0], 3)

    def test_degree_above_order_rejected(self):
        p = Polynomial(1, {MultiIndex((4,)): 1.0})
        with pytest.raises(DegreeTooHighError):
            build_lifted_problem([p], [0.0], 2)

    def test_length_mismatch(self):
        p = Polynomial(1, {MultiIndex((1,)): 1.0})
        with pytest.raises(ValueError):
            build_lifted_problem([p], [0.0, 1.0], 2)

    def test_mixed_arity_rejected(self):
        p = Polynomial(1, {MultiIndex((1,)): 1.0})
        q = Polynomial(2, {MultiIndex((1, 0)): 1.0})
        with pytest.raises(ValueError):
            build_lifted_problem([p, q], [0.0, 0.0], 2)


class TestLiftVector:
    def test_zero_point(self):
        basis = enumerate_basis(2, 2)
        assert np.array_equal(lift_vector((0.0, 0.0), basis),
                              np.array([1, 0, 0, 0, 0, 0.0]))

    def test_frozen_order_values(self):
        basis = enumerate_basis(2, 2)
        assert np.array_equal(lift_vector((2.0, 3.0), basis),
                              np.array([1.0, 2.0, 3.0, 4.0, 6.0, 9.0]))

    def test_leading_entry_always_one(self):
        rng = np.random.default_rng(6)
        basis = enumerate_basis(4, 2)
        for _ in range(10):
            assert lift_vector(rng.normal(size=4), basis)[0] == 1.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            lift_vector((1.0,), enumerate_basis(2, 1))


class TestConstraintType:
    def test_asymmetric_matrix_rejected(self):
        m = np.array([[0.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError):
            LiftedConstraint(0.0, m, ConstraintKind.DATA)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            LiftedConstraint(0.0, np.zeros((2, 3)), ConstraintKind.DATA)


class TestProblemJson:
    def test_round_trip(self):
        polys = [random_polynomial(2, 4, s, 1.0) for s in range(3)]
        x = np.array([0.5, -1.5])
        values = [eval_polynomial(p, x) for p in polys]
        problem = build_lifted_problem(polys, values, 4)
        text = json.dumps(lifted_problem_to_json(problem))
        back = lifted_problem_from_json(json.loads(text))
        assert back.num_vars == problem.num_vars
        assert back.order == problem.order
        assert back.num_constraints == problem.num_constraints
        for a, b in zip(problem.constraints, back.constraints):
            assert a.kind == b.kind
            assert a.value == b.value
            assert np.array_equal(a.matrix, b.matrix)

    def test_upper_triangle_only(self):
        p = Polynomial(2, {MultiIndex((1, 1)): 2.0})
        problem = build_lifted_problem([p], [0.0], 2)
        data = lifted_problem_to_json(problem)
        for c in data["constraints"]:
            for cell in c["entries"]:
                assert cell["row"] <= cell["col"]
