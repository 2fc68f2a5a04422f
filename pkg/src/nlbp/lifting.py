"""Lifting polynomial equations to linear trace constraints on a matrix.

A polynomial equation ``value = p(x)`` of degree <= q (q even) becomes a
quadratic form ``value = m(x)' C m(x)`` over the vector m(x) of all monomials
of degree <= q/2. Replacing the rank-one outer product m(x) m(x)' by a matrix
variable turns each equation into a linear trace constraint. Because entries
of m(x) are algebraically dependent (entry products reproduce other entries),
a set of structural constraints is generated alongside the data constraints:
one normalization (the constant entry squares to 1) and one dependency per
representable entry product.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .monomials import (
    MonomialBasis,
    MultiIndex,
    Polynomial,
    enumerate_basis,
    eval_monomial,
)


class DegreeTooHighError(ValueError):
    """A polynomial term exceeds the degree the basis can represent."""


class OddOrderError(ValueError):
    """The requested lift order is odd; the construction needs an even order."""


class ConstraintKind(Enum):
    DATA = "data"
    NORMALIZATION = "normalization"
    DEPENDENCY = "dependency"


@dataclass(frozen=True)
class LiftedConstraint:
    """One linear trace constraint: trace(matrix @ X) == value.

    ``matrix`` is dense, exactly symmetric, of the basis dimension. Dependency
    constraints always have value 0 and either 3 or 4 nonzero cells with
    values in {+-1/2, 1}; the normalization constraint pins the (0, 0) cell
    to 1.
    """

    value: float
    matrix: np.ndarray
    kind: ConstraintKind

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"constraint matrix must be square, got {m.shape}")
        if not np.array_equal(m, m.T):
            raise ValueError("constraint matrix must be exactly symmetric")


@dataclass(frozen=True)
class LiftedProblem:
    """A full lifted instance: basis plus ordered constraints.

    Constraint order is fixed: the N data constraints first, then the single
    normalization constraint, then the dependencies in generation order.
    """

    basis: MonomialBasis
    constraints: tuple[LiftedConstraint, ...]
    num_vars: int
    order: int

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def num_constraints(self) -> int:
        return len(self.constraints)

    @property
    def num_data(self) -> int:
        return sum(1 for c in self.constraints if c.kind is ConstraintKind.DATA)

    def values_vector(self) -> np.ndarray:
        return np.array([c.value for c in self.constraints])


def basis_pair_map(basis: MonomialBasis) -> dict[MultiIndex, list[tuple[int, int]]]:
    """Map each representable exponent sum to its unordered basis index pairs.

    For every i <= j the sum entries[i] + entries[j] is recorded once; a
    target multi-index of degree <= 2 * half_degree always has at least one
    pair (split the exponents greedily between two halves of degree <=
    half_degree).
    """
    pairs: dict[MultiIndex, list[tuple[int, int]]] = {}
    entries = basis.entries
    for i in range(len(entries)):
        for j in range(i, len(entries)):
            pairs.setdefault(entries[i] + entries[j], []).append((i, j))
    return pairs


def polynomial_to_quadratic_form(
    p: Polynomial,
    basis: MonomialBasis,
    pair_map: dict[MultiIndex, list[tuple[int, int]]] | None = None,
) -> np.ndarray:
    """Symmetric matrix C with m(x)' C m(x) == p(x) identically.

    Each coefficient is split equally over all unordered basis pairs whose
    exponents sum to its multi-index; a diagonal pair receives its full share
    and an off-diagonal pair half the share on each mirrored cell. Any split
    satisfying the identity would do; the equal split is the canonical one.
    """
    if p.num_vars != basis.num_vars:
        raise ValueError(
            f"polynomial has {p.num_vars} variables, basis has {basis.num_vars}"
        )
    cap = 2 * basis.half_degree
    if p.degree > cap:
        raise DegreeTooHighError(
            f"polynomial degree {p.degree} exceeds representable degree {cap}"
        )
    if pair_map is None:
        pair_map = basis_pair_map(basis)
    dim = len(basis)
    form = np.zeros((dim, dim))
    for alpha, coeff in p.terms.items():
        pairs = pair_map[alpha]
        share = coeff / len(pairs)
        for i, j in pairs:
            if i == j:
                form[i, i] += share
            else:
                form[i, j] += share / 2.0
                form[j, i] += share / 2.0
    return form


def generate_dependency_constraints(
    basis: MonomialBasis, dedup: bool = True
) -> list[LiftedConstraint]:
    """Normalization constraint followed by all entry-product dependencies.

    The sweep runs index triples (outer, middle, inner) = (i, l, k) over the
    basis, emitting a constraint whenever entries[k] * entries[l] equals
    entries[i]: the product cell gets weight 1/2 (or 1 on the diagonal when
    k == l) and the cell tying entry i to the constant gets weight -1/2, so
    the constraint value is 0 on any lifted point. The constant entry itself
    never participates as a factor.

    The raw sweep visits (k, l) and (l, k) separately and therefore emits
    each off-diagonal relation twice; with ``dedup`` (default) constraints
    that are exactly equal as matrices are dropped after their first
    occurrence, preserving order. ``dedup=False`` reproduces the raw sweep.
    """
    dim = len(basis)
    entries = basis.entries
    out: list[LiftedConstraint] = []

    norm = np.zeros((dim, dim))
    norm[0, 0] = 1.0
    out.append(LiftedConstraint(1.0, norm, ConstraintKind.NORMALIZATION))

    seen: set[tuple[int, int, int]] = set()
    for i in range(dim):
        target = entries[i]
        for l in range(1, dim):
            for k in range(1, dim):
                if entries[k].degree + entries[l].degree != target.degree:
                    continue
                if entries[k] + entries[l] != target:
                    continue
                key = (i, min(k, l), max(k, l))
                if dedup:
                    if key in seen:
                        continue
                    seen.add(key)
                dep = np.zeros((dim, dim))
                if k == l:
                    dep[l, l] = 1.0
                else:
                    dep[k, l] = 0.5
                    dep[l, k] = 0.5
                dep[0, i] = -0.5
                dep[i, 0] = -0.5
                out.append(LiftedConstraint(0.0, dep, ConstraintKind.DEPENDENCY))
    return out


def build_lifted_problem(
    polys: list[Polynomial],
    values,
    order: int,
    dedup: bool = True,
) -> LiftedProblem:
    """Assemble the lifted problem for the system values[i] = polys[i](x).

    ``order`` is the (even) lift order; every polynomial must have degree <=
    order. Inconsistent right-hand sides still build fine: infeasibility is a
    solver-level property and surfaces as a non-vanishing constraint residual.
    """
    values = np.asarray(values, dtype=float)
    if len(polys) == 0:
        raise ValueError("need at least one polynomial")
    if values.shape != (len(polys),):
        raise ValueError(
            f"got {len(polys)} polynomials but {values.shape} right-hand sides"
        )
    if order % 2 != 0 or order < 2:
        raise OddOrderError(f"lift order must be even and >= 2, got {order}")
    n = polys[0].num_vars
    for p in polys:
        if p.num_vars != n:
            raise ValueError("all polynomials must share the same variable count")
        if p.degree > order:
            raise DegreeTooHighError(
                f"polynomial degree {p.degree} exceeds lift order {order}"
            )
    basis = enumerate_basis(n, order // 2)
    pair_map = basis_pair_map(basis)
    constraints = [
        LiftedConstraint(float(v), polynomial_to_quadratic_form(p, basis, pair_map),
                         ConstraintKind.DATA)
        for p, v in zip(polys, values)
    ]
    constraints.extend(generate_dependency_constraints(basis, dedup=dedup))
    return LiftedProblem(basis=basis, constraints=tuple(constraints),
                         num_vars=n, order=order)


def lift_vector(x, basis: MonomialBasis) -> np.ndarray:
    """Evaluate every basis monomial at x; the leading entry is always 1."""
    x = np.asarray(x, dtype=float)
    if x.shape != (basis.num_vars,):
        raise ValueError(f"point has {x.shape} entries, expected {basis.num_vars}")
    return np.array([eval_monomial(alpha, x) for alpha in basis.entries])


def lifted_problem_to_json(problem: LiftedProblem) -> dict:
    """Sparse triplet export; only cells with row <= col are stored."""
    constraints = []
    for c in problem.constraints:
        rows, cols = np.nonzero(np.triu(c.matrix))
        constraints.append({
            "y": c.value,
            "kind": c.kind.value,
            "entries": [
                {"row": int(r), "col": int(col), "value": float(c.matrix[r, col])}
                for r, col in zip(rows, cols)
            ],
        })
    return {
        "num_vars": problem.num_vars,
        "order": problem.order,
        "basis": [list(a.exponents) for a in problem.basis.entries],
        "constraints": constraints,
    }


def lifted_problem_from_json(data: dict) -> LiftedProblem:
    n = int(data["num_vars"])
    order = int(data["order"])
    basis = enumerate_basis(n, order // 2)
    stored = [MultiIndex(tuple(int(e) for e in a)) for a in data["basis"]]
    if stored != list(basis.entries):
        raise ValueError("stored basis does not match the frozen basis order")
    dim = len(basis)
    constraints = []
    for item in data["constraints"]:
        m = np.zeros((dim, dim))
        for cell in item["entries"]:
            r, c, v = int(cell["row"]), int(cell["col"]), float(cell["value"])
            m[r, c] = v
            m[c, r] = v
        constraints.append(
            LiftedConstraint(float(item["y"]), m, ConstraintKind(item["kind"]))
        )
    return LiftedProblem(basis=basis, constraints=tuple(constraints),
                         num_vars=n, order=order)
