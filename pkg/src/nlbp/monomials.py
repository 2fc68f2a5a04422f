"""Multi-index algebra, graded monomial bases, and sparse polynomials.

Everything downstream (lifting, solving, recovery) is built on three small
types: a multi-index (exponent vector), a sparse polynomial keyed by
multi-indices, and an ordered monomial basis of bounded degree. All three are
immutable after construction.

The basis ordering is frozen globally: ascending total degree, and within a
degree the monomial with higher exponents on earlier variables comes first
(so for two variables: 1, x1, x2, x1^2, x1*x2, x2^2). Any total order with
the constant monomial first would work, but quadratic-form matrices, problem
files, and test vectors are only reproducible if one order is fixed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class MultiIndex:
    """Exponent vector of a single monomial: x^alpha = prod_j x_j ** alpha[j]."""

    exponents: tuple[int, ...]
    degree: int = field(init=False, compare=False)

    def __post_init__(self):
        exps = tuple(int(e) for e in self.exponents)
        if any(e < 0 for e in exps):
            raise ValueError(f"exponents must be non-negative, got {exps}")
        object.__setattr__(self, "exponents", exps)
        object.__setattr__(self, "degree", sum(exps))

    def __len__(self) -> int:
        return len(self.exponents)

    def __add__(self, other: "MultiIndex") -> "MultiIndex":
        if len(self.exponents) != len(other.exponents):
            raise ValueError("cannot add multi-indices of different lengths")
        return MultiIndex(tuple(a + b for a, b in zip(self.exponents, other.exponents)))


def _grlex_key(alpha: MultiIndex) -> tuple:
    # Higher exponents on earlier variables sort first within a degree.
    return (alpha.degree, tuple(-e for e in alpha.exponents))


def _exponents_summing_to(total: int, length: int):
    """Yield all exponent tuples of the given length summing exactly to total."""
    if length == 1:
        yield (total,)
        return
    for head in range(total, -1, -1):
        for tail in _exponents_summing_to(total - head, length - 1):
            yield (head,) + tail


@dataclass(frozen=True)
class Polynomial:
    """Sparse real polynomial: a finite map from multi-index to coefficient.

    Canonical form: every key has exactly ``num_vars`` exponents and no stored
    coefficient is exactly zero. The terms dict must not be mutated after
    construction.
    """

    num_vars: int
    terms: dict[MultiIndex, float]

    def __post_init__(self):
        if self.num_vars < 1:
            raise ValueError("num_vars must be >= 1")
        clean: dict[MultiIndex, float] = {}
        for alpha, coeff in self.terms.items():
            if len(alpha) != self.num_vars:
                raise ValueError(
                    f"term {alpha.exponents} has {len(alpha)} exponents, "
                    f"expected {self.num_vars}"
                )
            c = float(coeff)
            if c != 0.0:
                clean[alpha] = c
        object.__setattr__(self, "terms", clean)

    @property
    def degree(self) -> int:
        """Maximum total degree over stored terms; 0 for the zero polynomial."""
        if not self.terms:
            return 0
        return max(alpha.degree for alpha in self.terms)


@dataclass(frozen=True)
class MonomialBasis:
    """All monomials of degree <= half_degree over num_vars variables, in the
    frozen graded order. ``entries[0]`` is always the constant monomial and
    ``index_of`` is the exact inverse of ``entries``."""

    num_vars: int
    half_degree: int
    entries: tuple[MultiIndex, ...]
    index_of: dict[MultiIndex, int]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def dim(self) -> int:
        return len(self.entries)


def enumerate_alpha_set(n: int, max_degree: int) -> list[MultiIndex]:
    """All multi-indices over n variables with total degree <= max_degree.

    The result has C(n + max_degree, max_degree) elements in graded order.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_degree < 0:
        raise ValueError("max_degree must be >= 0")
    out = []
    for d in range(max_degree + 1):
        out.extend(MultiIndex(e) for e in _exponents_summing_to(d, n))
    out.sort(key=_grlex_key)
    return out


def enumerate_basis(n: int, half_degree: int) -> MonomialBasis:
    """Build the monomial basis of degree <= half_degree over n variables."""
    entries = tuple(enumerate_alpha_set(n, half_degree))
    expected = math.comb(n + half_degree, half_degree)
    assert len(entries) == expected
    index_of = {alpha: i for i, alpha in enumerate(entries)}
    return MonomialBasis(num_vars=n, half_degree=half_degree,
                         entries=entries, index_of=index_of)


def eval_monomial(alpha: MultiIndex, x) -> float:
    """Evaluate x^alpha; the zero multi-index evaluates to 1."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(alpha),):
        raise ValueError(f"point has {x.shape} entries, expected {len(alpha)}")
    return float(np.prod(x ** np.asarray(alpha.exponents)))


def eval_polynomial(p: Polynomial, x) -> float:
    """Evaluate p at x by summing coefficient * monomial over all terms."""
    x = np.asarray(x, dtype=float)
    if x.shape != (p.num_vars,):
        raise ValueError(f"point has {x.shape} entries, expected {p.num_vars}")
    if not p.terms:
        return 0.0
    exps = np.array([alpha.exponents for alpha in p.terms], dtype=float)
    coeffs = np.fromiter(p.terms.values(), dtype=float, count=len(p.terms))
    return float(coeffs @ np.prod(x ** exps, axis=1))


def random_polynomial(n: int, max_degree: int, rng_seed, std_dev: float = 1.0) -> Polynomial:
    """Polynomial with one i.i.d. Gaussian(0, std_dev^2) coefficient per
    multi-index of degree <= max_degree.

    ``rng_seed`` may be an int, a SeedSequence, or an existing Generator (in
    which case its stream is consumed), so callers can either pin a seed or
    thread a shared stream through several draws.
    """
    if std_dev <= 0:
        raise ValueError("std_dev must be > 0")
    rng = np.random.default_rng(rng_seed)
    alphas = enumerate_alpha_set(n, max_degree)
    coeffs = rng.normal(0.0, std_dev, size=len(alphas))
    return Polynomial(num_vars=n, terms=dict(zip(alphas, coeffs)))


def truncate_polynomial(p: Polynomial, max_degree: int) -> Polynomial:
    """Drop every term of degree > max_degree (Taylor truncation around 0)."""
    kept = {a: c for a, c in p.terms.items() if a.degree <= max_degree}
    return Polynomial(num_vars=p.num_vars, terms=kept)


def polynomial_to_json(p: Polynomial) -> dict:
    """JSON-ready dict; terms emitted in the frozen graded order."""
    alphas = sorted(p.terms, key=_grlex_key)
    return {
        "num_vars": p.num_vars,
        "terms": [{"alpha": list(a.exponents), "coeff": p.terms[a]} for a in alphas],
    }


def polynomial_from_json(data: dict) -> Polynomial:
    n = int(data["num_vars"])
    terms: dict[MultiIndex, float] = {}
    for item in data["terms"]:
        alpha = MultiIndex(tuple(int(e) for e in item["alpha"]))
        terms[alpha] = terms.get(alpha, 0.0) + float(item["coeff"])
    return Polynomial(num_vars=n, terms=terms)
