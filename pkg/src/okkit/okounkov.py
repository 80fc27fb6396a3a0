"""Value semigroups, subduction, and Newton-Okounkov bodies.

A graded presentation is a list of generators f_ij at levels i, each with a
declared valuation vector u_ij, together with a distinguished level-one
section h of value zero.  Representatives are polynomials in intrinsic
chart coordinates standing for f_ij / h^i, so multiplication of classes is
plain polynomial multiplication (optionally followed by reduction modulo a
chart relation).  The extended value of a nonzero class at level k is
(k, v(class)); these pairs are ordered by the composite order from
``algebra``, under which higher level means smaller.

The value semigroup collects the generator values; its Newton-Okounkov
body is the convex hull of the level-normalized values u/k, computed
exactly over the rationals.  Everything here is deterministic and
side-effect free, so results are reproducible bit for bit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property, lru_cache
from itertools import combinations

from . import _lattice
from ._polytope import _null_space_rows, _solve_exact, convex_hull
from .algebra import (
    BiDegree,
    Polynomial,
    Ring,
    SeriesContext,
    UndefinedValuationError,
    leading_coefficient,
    monomial_valuation,
    series_valuation,
)

__all__ = [
    "OkounkovError",
    "PresentationError",
    "NotInSemigroupError",
    "EmptySemigroupError",
    "InsufficientSamplesError",
    "SliceCompletenessWarning",
    "MONOMIAL_BACKEND",
    "SERIES_BACKEND",
    "SagbiGenerator",
    "SagbiDatum",
    "ValueSemigroup",
    "OkounkovBody",
    "GradingHomomorphism",
    "reduce_modulo",
    "extended_value",
    "subduct",
    "semigroup_hilbert",
    "okounkov_body",
    "degree_check",
    "slice",
]


class OkounkovError(Exception):
    pass


class PresentationError(OkounkovError):
    """A SagbiDatum violates one of its declared invariants."""


class NotInSemigroupError(OkounkovError):
    """A value fell outside the span of the generator values.

    During subduction this signals that the presentation is not actually a
    subalgebra basis for the input: the element's value cannot be matched
    by any product of generators at the right level.
    """


class EmptySemigroupError(OkounkovError):
    pass


class InsufficientSamplesError(OkounkovError):
    pass


class SliceCompletenessWarning(UserWarning):
    """The sliced semigroup's generators may be incomplete."""


MONOMIAL_BACKEND = "monomial"
SERIES_BACKEND = "series"


# ---------------------------------------------------------------------------
# reduction modulo a chart relation


def reduce_modulo(f: Polynomial, modulus: Polynomial | None) -> Polynomial:
    """Remainder of f under division by a single relation.

    The relation's lexicographically largest term is used as the rewriting
    head, so the result is the normal form in the quotient ring and the
    zero test on classes is exact.  With modulus None this is the identity.
    """
    if modulus is None:
        return f
    if modulus.is_zero():
        raise ValueError("zero modulus")
    head = max(modulus.terms)
    head_coeff = modulus.terms[head]
    tail = Polynomial(
        modulus.ring, {e: c for e, c in modulus.terms.items() if e != head}
    )
    result = f
    while True:
        reducible = [
            e
            for e in result.terms
            if all(a >= b for a, b in zip(e, head))
        ]
        if not reducible:
            return result
        e = max(reducible)
        shift = tuple(a - b for a, b in zip(e, head))
        c = result.terms[e] / head_coeff
        # kill the term, replace it by the rewritten tail
        result = result - Polynomial.monomial(result.ring, e, result.terms[e])
        result = result - Polynomial.monomial(result.ring, shift, c) * tail


# ---------------------------------------------------------------------------
# presentations


@dataclass(frozen=True)
class SagbiGenerator:
    """One generator: level, 1-based index within the level, representative
    polynomial in the intrinsic chart, and its declared valuation."""

    level: int
    index: int
    representative: Polynomial
    value: tuple

    def __post_init__(self):
        object.__setattr__(self, "value", tuple(int(x) for x in self.value))
        if self.level < 1:
            raise PresentationError("generator levels start at 1")
        if self.index < 1:
            raise PresentationError("generator indices start at 1")

    @property
    def symbol(self) -> str:
        return "x%d_%d" % (self.level, self.index)

    @property
    def bidegree(self) -> BiDegree:
        return BiDegree(self.level, self.value)


@dataclass(frozen=True)
class SagbiDatum:
    """A graded presentation with valuation data.

    backend selects how representatives are valued: "monomial" takes the
    lexicographically minimal exponent in the chart ring, "series" expands
    through a SeriesContext and returns the order of vanishing (a length-1
    value vector).  modulus, when present, is a single chart relation; all
    representatives and intermediate results are kept in normal form with
    respect to it.

    Construction verifies the declared invariants: values are pairwise
    distinct within each level, exactly one level-1 generator has value
    zero (the section), and every declared value matches the backend.
    """

    ring: Ring
    generators: tuple
    backend: str = MONOMIAL_BACKEND
    series_context: SeriesContext | None = None
    modulus: Polynomial | None = None

    def __post_init__(self):
        object.__setattr__(self, "generators", tuple(self.generators))
        if self.backend not in (MONOMIAL_BACKEND, SERIES_BACKEND):
            raise PresentationError("unknown valuation backend %r" % self.backend)
        if self.backend == SERIES_BACKEND and self.series_context is None:
            raise PresentationError("series backend needs a SeriesContext")
        if self.modulus is not None and self.ring.laurent:
            raise PresentationError("chart relations and Laurent rings do not mix")
        if not self.generators:
            raise PresentationError("a presentation needs at least one generator")
        canonical = sorted(self.generators, key=lambda g: (g.level, g.index))
        if list(self.generators) != canonical:
            raise PresentationError("generators must be sorted by (level, index)")

        by_level = {}
        for g in self.generators:
            if not isinstance(g, SagbiGenerator):
                raise PresentationError("generators must be SagbiGenerator")
            if g.representative.ring != self.ring:
                raise PresentationError(
                    "generator %s lives in a different ring" % g.symbol
                )
            if len(g.value) != self.value_dim:
                raise PresentationError(
                    "value of %s has length %d, expected %d"
                    % (g.symbol, len(g.value), self.value_dim)
                )
            by_level.setdefault(g.level, []).append(g)

        for level, gens in sorted(by_level.items()):
            indices = sorted(g.index for g in gens)
            if indices != list(range(1, len(gens) + 1)):
                raise PresentationError(
                    "level %d indices must run 1..%d" % (level, len(gens))
                )
            values = {g.value for g in gens}
            if len(values) != len(gens):
                raise PresentationError(
                    "level %d has repeated values; the images would not be"
                    " a vector space basis" % level
                )

        zero = (0,) * self.value_dim
        sections = [g for g in self.generators if g.level == 1 and g.value == zero]
        if len(sections) != 1:
            raise PresentationError(
                "expected exactly one level-1 generator of value 0, found %d"
                % len(sections)
            )

        for g in self.generators:
            declared = g.value
            actual = self.value_of(g.representative)
            if declared != actual:
                raise PresentationError(
                    "declared value %s of %s disagrees with the %s backend"
                    " value %s" % (declared, g.symbol, self.backend, actual)
                )

    # -- derived data --------------------------------------------------------

    @property
    def levels(self) -> int:
        return max(g.level for g in self.generators)

    @property
    def value_dim(self) -> int:
        if self.backend == SERIES_BACKEND:
            return 1
        return self.ring.nvars

    @property
    def section(self) -> SagbiGenerator:
        zero = (0,) * self.value_dim
        for g in self.generators:
            if g.level == 1 and g.value == zero:
                return g
        raise PresentationError("no section present")

    @cached_property
    def symbol_ring(self) -> Ring:
        return Ring(tuple(g.symbol for g in self.generators))

    @cached_property
    def _generator_leads(self) -> tuple:
        return tuple(
            self.leading_coefficient_of(g.representative) for g in self.generators
        )

    def semigroup(self) -> "ValueSemigroup":
        return ValueSemigroup(tuple(g.bidegree for g in self.generators))

    # -- the valuation interface ----------------------------------------------

    def reduce(self, f: Polynomial) -> Polynomial:
        return reduce_modulo(f, self.modulus)

    def value_of(self, f: Polynomial) -> tuple:
        g = self.reduce(f)
        if g.is_zero():
            raise UndefinedValuationError("the zero class has no value")
        if self.backend == MONOMIAL_BACKEND:
            return monomial_valuation(g)
        return (series_valuation(g, self.series_context),)

    def leading_coefficient_of(self, f: Polynomial) -> Fraction:
        g = self.reduce(f)
        if g.is_zero():
            raise UndefinedValuationError("the zero class has no value")
        if self.backend == MONOMIAL_BACKEND:
            return leading_coefficient(g)
        return self.series_context.leading_series_coefficient(g)

    def substitute(self, expression: Polynomial) -> Polynomial:
        """Replace each symbol x_ij by its representative, then reduce.

        expression lives in symbol_ring; the result lives in the chart ring.
        """
        if expression.ring != self.symbol_ring:
            raise PresentationError("expression is not over the symbol ring")
        out = Polynomial.zero(self.ring)
        for e, c in sorted(expression.terms.items()):
            term = Polynomial.constant(self.ring, c)
            for g, k in zip(self.generators, e):
                if k:
                    term = term * g.representative**k
            out = out + term
        return self.reduce(out)


# ---------------------------------------------------------------------------
# value semigroups


@dataclass(frozen=True)
class ValueSemigroup:
    """Finitely many generating bidegrees, all at level >= 1.

    group_complete records whether the generators generate the full group
    Z^(n+1) (row-Hermite rank and determinant test).  Bodies and Hilbert
    counts do not need this, but a presentation whose semigroup fails the
    test cannot have one-dimensional leaves on all of R, so the catalog
    requires it.
    """

    generators: tuple
    group_complete: bool = field(init=False)

    def __post_init__(self):
        gens = tuple(self.generators)
        object.__setattr__(self, "generators", gens)
        for g in gens:
            if not isinstance(g, BiDegree):
                raise TypeError("generators must be BiDegree")
            if g.level < 1:
                raise EmptySemigroupError(
                    "semigroup generators live at level >= 1, got %d" % g.level
                )
        if len(set(gens)) != len(gens):
            raise ValueError("repeated semigroup generator")
        dims = {len(g.value) for g in gens}
        if len(dims) > 1:
            raise ValueError("generators have mixed value dimensions")
        if gens:
            rows = [g.as_tuple() for g in gens]
            complete = _lattice.is_full_lattice(rows, len(gens[0].value) + 1)
        else:
            complete = False
        object.__setattr__(self, "group_complete", complete)

    @property
    def value_dim(self) -> int:
        if not self.generators:
            raise EmptySemigroupError("empty semigroup has no value dimension")
        return len(self.generators[0].value)


@lru_cache(maxsize=None)
def _reachable_values(gens: tuple, k: int) -> frozenset:
    """Values u with (k, u) in the semigroup generated by gens."""
    if k == 0:
        if not gens:
            return frozenset({()})
        return frozenset({(0,) * len(gens[0].value)})
    out = set()
    for g in gens:
        if g.level <= k:
            for u in _reachable_values(gens, k - g.level):
                out.add(tuple(a + b for a, b in zip(u, g.value)))
    return frozenset(out)


def semigroup_hilbert(S: ValueSemigroup, k: int) -> int:
    """Number of distinct values at level k, by memoized reachability."""
    if k < 0:
        raise ValueError("level must be nonnegative")
    if not S.generators:
        return 1 if k == 0 else 0
    return len(_reachable_values(S.generators, k))


# ---------------------------------------------------------------------------
# extended values and subduction


def extended_value(f: Polynomial, k: int, datum: SagbiDatum) -> BiDegree:
    """(k, v(f)) for a nonzero representative of a level-k class."""
    if k < 0:
        raise ValueError("level must be nonnegative")
    return BiDegree(k, datum.value_of(f))


def _decompose(datum: SagbiDatum, k: int, target: tuple):
    """Exponents alpha over datum.generators with sum of levels k and sum
    of values target, or None.  Deterministic: prefers high powers of
    early generators."""
    gens = datum.generators
    memo = {}

    def reachable(i, level_left, residual):
        if i == len(gens):
            return level_left == 0 and all(x == 0 for x in residual)
        key = (i, level_left, residual)
        hit = memo.get(key)
        if hit is not None:
            return hit
        g = gens[i]
        ok = False
        for c in range(level_left // g.level + 1):
            res = tuple(
                r - c * v for r, v in zip(residual, g.value)
            )
            if reachable(i + 1, level_left - c * g.level, res):
                ok = True
                break
        memo[key] = ok
        return ok

    if not reachable(0, k, tuple(target)):
        return None
    counts = []
    level_left, residual = k, tuple(target)
    for i, g in enumerate(gens):
        for c in range(level_left // g.level, -1, -1):
            res = tuple(r - c * v for r, v in zip(residual, g.value))
            if reachable(i + 1, level_left - c * g.level, res):
                counts.append(c)
                level_left -= c * g.level
                residual = res
                break
    return tuple(counts)


def subduct(f: Polynomial, k: int, datum: SagbiDatum):
    """Rewrite a level-k class as a polynomial in the generators.

    Returns (expression, chain): expression is a Polynomial in the symbols
    x_ij with substitute(expression) == reduce(f) exactly, and chain lists
    the extended value consumed at each step, strictly increasing in the
    composite order.  If some intermediate value is not a sum of generator
    values a NotInSemigroupError is raised; by the subduction argument this
    is precisely a failure of the subalgebra-basis property for f.
    """
    g = datum.reduce(f)
    if g.is_zero():
        raise UndefinedValuationError("cannot subduct the zero class")
    symbol_ring = datum.symbol_ring
    expression = Polynomial.zero(symbol_ring)
    chain = []
    budget = semigroup_hilbert(datum.semigroup(), k) + 1
    for _ in range(budget):
        if g.is_zero():
            return expression, chain
        u = datum.value_of(g)
        step = BiDegree(k, u)
        if chain and not chain[-1] < step:
            raise NotInSemigroupError(
                "subduction failed to increase the value at %s" % (step,)
            )
        alpha = _decompose(datum, k, u)
        if alpha is None:
            raise NotInSemigroupError(
                "value (%d, %s) is not a sum of generator values" % (k, u)
            )
        product_lead = Fraction(1)
        product = Polynomial.constant(datum.ring, 1)
        for gen, c, lead in zip(datum.generators, alpha, datum._generator_leads):
            if c:
                product = product * gen.representative**c
                product_lead *= lead**c
        lam = datum.leading_coefficient_of(g) / product_lead
        expression = expression + Polynomial.monomial(symbol_ring, alpha, lam)
        g = datum.reduce(g - lam * product)
        chain.append(step)
    raise NotInSemigroupError(
        "subduction did not terminate within %d steps" % budget
    )


# ---------------------------------------------------------------------------
# bodies


@dataclass(frozen=True)
class OkounkovBody:
    """Rational polytope conv{u/k} in both V- and H-representation.

    ambient_dim is the length n of the value vectors; dim is the dimension
    of the polytope itself (-1 for the empty body, from slicing).  facets
    are pairs (integer normal, rational offset) meaning normal . x <=
    offset; a polytope of dimension below n carries equality pairs for its
    affine hull.  volume is the n-dimensional measure, zero when dim < n.
    """

    ambient_dim: int
    dim: int
    vertices: tuple
    facets: tuple
    volume: Fraction

    @classmethod
    def from_hull(cls, hull) -> "OkounkovBody":
        body = cls(
            hull.ambient_dim, hull.dim, hull.vertices, hull.facets, hull.volume
        )
        for v in body.vertices:
            if not body.contains(v):
                raise OkounkovError("hull vertex violates its own facets")
        return body

    @classmethod
    def empty(cls, ambient_dim: int) -> "OkounkovBody":
        unsatisfiable = (((0,) * ambient_dim, Fraction(-1)),)
        return cls(ambient_dim, -1, (), unsatisfiable, Fraction(0))

    @property
    def is_empty(self) -> bool:
        return not self.vertices

    def contains(self, point, slack=Fraction(0)) -> bool:
        point = tuple(Fraction(x) for x in point)
        if len(point) != self.ambient_dim:
            raise ValueError("point dimension mismatch")
        return all(
            sum(n * x for n, x in zip(normal, point)) <= offset + slack
            for normal, offset in self.facets
        )

    def to_json_dict(self) -> dict:
        """The documented serialization: rationals as [numerator,
        denominator] pairs, one pair per coordinate."""
        return {
            "dim": self.ambient_dim,
            "vertices": [
                [[x.numerator, x.denominator] for x in v] for v in self.vertices
            ],
            "facets": [
                {
                    "normal": [int(a) for a in normal],
                    "offset": [offset.numerator, offset.denominator],
                }
                for normal, offset in self.facets
            ],
            "volume": [self.volume.numerator, self.volume.denominator],
        }


def okounkov_body(S: ValueSemigroup) -> OkounkovBody:
    """Exact convex hull of the level-normalized generator values."""
    if not S.generators:
        raise EmptySemigroupError("cannot take the body of an empty semigroup")
    points = [
        tuple(Fraction(x, g.level) for x in g.value) for g in S.generators
    ]
    return OkounkovBody.from_hull(convex_hull(points))


def degree_check(S: ValueSemigroup, K: int) -> dict:
    """Compare Hilbert growth against the body's volume.

    The leading coefficient of the Hilbert function is estimated by the
    n-th finite difference of H_S over k = K-n .. K divided by n!, which
    is exact as soon as H_S agrees with its Hilbert polynomial on that
    window.  Returns {"volume", "fitted_leading_coefficient",
    "relative_error"}, all exact rationals (relative_error falls back to
    the absolute error when the volume is zero).
    """
    body = okounkov_body(S)
    n = body.ambient_dim
    if K < n + 1:
        raise InsufficientSamplesError(
            "need K >= %d samples to difference a degree-%d Hilbert"
            " function, got K = %d" % (n + 1, n, K)
        )
    values = [semigroup_hilbert(S, k) for k in range(K - n, K + 1)]
    diffs = [Fraction(v) for v in values]
    for _ in range(n):
        diffs = [b - a for a, b in zip(diffs, diffs[1:])]
    fitted = diffs[0] / math.factorial(n)
    vol = body.volume
    if vol != 0:
        err = abs(fitted - vol) / vol
    else:
        err = abs(fitted)
    return {
        "volume": vol,
        "fitted_leading_coefficient": fitted,
        "relative_error": err,
    }


# ---------------------------------------------------------------------------
# GIT slicing


@dataclass(frozen=True)
class GradingHomomorphism:
    """Integer matrix from Z^(n+1) (level, value) to Z^m."""

    matrix: tuple

    def __post_init__(self):
        rows = tuple(tuple(int(x) for x in row) for row in self.matrix)
        if not rows:
            raise ValueError("the matrix needs at least one row")
        widths = {len(r) for r in rows}
        if len(widths) != 1:
            raise ValueError("ragged matrix")
        if rows[0] == ():
            raise ValueError("the matrix needs at least one column")
        object.__setattr__(self, "matrix", rows)

    @property
    def codomain_dim(self) -> int:
        return len(self.matrix)

    @property
    def domain_dim(self) -> int:
        return len(self.matrix[0])

    def apply(self, element) -> tuple:
        vec = element.as_tuple() if isinstance(element, BiDegree) else tuple(element)
        if len(vec) != self.domain_dim:
            raise ValueError("element dimension mismatch")
        return tuple(sum(r * x for r, x in zip(row, vec)) for row in self.matrix)

    def kernel_lattice(self) -> list:
        """Basis rows of the saturated integer kernel in Z^(n+1)."""
        transpose = [
            [self.matrix[i][j] for i in range(self.codomain_dim)]
            for j in range(self.domain_dim)
        ]
        return _lattice.integer_kernel(transpose)


def _minimal_generators(elements):
    """Drop every element that is a sum of two others from the set."""
    lookup = {(e.level, e.value) for e in elements}
    out = []
    for e in sorted(elements, key=lambda b: (b.level, b.value)):
        decomposable = False
        for a in elements:
            if a.level < e.level:
                rest = (
                    e.level - a.level,
                    tuple(x - y for x, y in zip(e.value, a.value)),
                )
                if rest in lookup:
                    decomposable = True
                    break
        if not decomposable:
            out.append(e)
    return tuple(out)


def _sliced_body(body: OkounkovBody, grading: GradingHomomorphism) -> OkounkovBody:
    """Intersect the body with {v : grading(1, v) = 0}, exactly."""
    n = body.ambient_dim
    m = grading.codomain_dim
    A = [list(row[1:]) for row in grading.matrix]
    rhs = [-row[0] for row in grading.matrix]
    particular = _solve_exact(A, rhs)
    if particular is None:
        return OkounkovBody.empty(n)
    # W spans {v : A v = 0}
    At = [[A[i][j] for i in range(m)] for j in range(n)]
    W = _null_space_rows(At)
    d = len(W)
    if d == 0:
        if body.contains(particular):
            return OkounkovBody.from_hull(convex_hull([particular], n))
        return OkounkovBody.empty(n)
    # inequalities in the y chart: (normal . W_j) y_j <= offset - normal . v0
    rows = []
    for normal, offset in body.facets:
        coeffs = tuple(sum(Fraction(a) * w for a, w in zip(normal, wrow)) for wrow in W)
        rows.append((coeffs, offset - sum(Fraction(a) * p for a, p in zip(normal, particular))))
    candidates = set()
    for subset in combinations(range(len(rows)), d):
        mat = [list(rows[i][0]) for i in subset]
        vec = [rows[i][1] for i in subset]
        y = _solve_exact(mat, vec)
        if y is None:
            continue
        if all(
            sum(c * yi for c, yi in zip(coeffs, y)) <= off for coeffs, off in rows
        ):
            candidates.add(y)
    if not candidates:
        return OkounkovBody.empty(n)
    points = [
        tuple(
            p + sum(y[j] * W[j][i] for j in range(d)) for i, p in enumerate(particular)
        )
        for y in sorted(candidates)
    ]
    return OkounkovBody.from_hull(convex_hull(points, n))


def slice(
    S: ValueSemigroup,
    body: OkounkovBody,
    grading: GradingHomomorphism,
    bound: int | None = None,
):
    """Semigroup and body cut down to the kernel of a grading map.

    The sliced body is the exact polytope intersection of the level-1
    affine slice with the kernel.  The sliced semigroup is found by
    enumerating semigroup elements up to level `bound` (default: lcm of
    the generator levels times n+1) and keeping the kernel elements, then
    dropping decomposable ones.  Completeness of that generator list is
    checked against the saturated kernel lattice, and for full-dimensional
    sliced bodies also against Hilbert growth; failures are reported with
    a SliceCompletenessWarning, never silently.
    """
    n = S.value_dim if S.generators else body.ambient_dim
    if grading.domain_dim != n + 1:
        raise ValueError(
            "grading matrix has %d columns, expected %d"
            % (grading.domain_dim, n + 1)
        )
    sliced = _sliced_body(body, grading)

    if bound is None:
        levels = [g.level for g in S.generators]
        bound = math.lcm(*levels) * (n + 1) if levels else n + 1
    kept = []
    zero_m = (0,) * grading.codomain_dim
    for k in range(1, bound + 1):
        for u in sorted(_reachable_values(S.generators, k)):
            b = BiDegree(k, u)
            if grading.apply(b) == zero_m:
                kept.append(b)
    gens = _minimal_generators(kept)
    sliced_semigroup = ValueSemigroup(gens)

    kernel_rows = grading.kernel_lattice()
    generated_rows = [g.as_tuple() for g in gens]
    complete = _lattice.lattices_equal(generated_rows, kernel_rows)
    if complete and sliced.dim == n and n >= 1:
        # growth cross-check against the sliced body itself: the Hilbert
        # leading coefficient of an incomplete generator list undershoots
        K = max(n + 1, 4)
        values = [semigroup_hilbert(sliced_semigroup, k) for k in range(K - n, K + 1)]
        diffs = [Fraction(v) for v in values]
        for _ in range(n):
            diffs = [b - a for a, b in zip(diffs, diffs[1:])]
        fitted = diffs[0] / math.factorial(n)
        complete = abs(fitted - sliced.volume) <= Fraction(1, 4) * sliced.volume
    if not complete:
        warnings.warn(
            "sliced semigroup generators (bound %d) may be incomplete for"
            " the kernel lattice" % bound,
            SliceCompletenessWarning,
            stacklevel=2,
        )
    return sliced_semigroup, sliced
