"""Flat degeneration of a presented algebra to its toric initial algebra.

Given verified relations among the generator symbols, a weight functional
p on bidegrees is built so that, within each level-homogeneous relation,
the composite order of monomial bidegrees is reflected (reversed in sign)
by the p-values.  Rescaling each variable by tau^(-w_ij) and clearing
denominators turns every relation g_k into a one-parameter family
g~_k(x, tau) with g~(x, 1) = g and g~(x, 0) the initial form.  All the
identities this construction promises are verified here as exact
polynomial equations, never assumed.

Orientation: the initial form collects the monomials of MAXIMAL p-value,
which are exactly the monomials of composite-minimal bidegree (the ones
whose images cancel in the associated graded).  The consistency of these
two descriptions is checked on every call and a mismatch is an error, so
a wrong global orientation cannot fail silently.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import cached_property
from itertools import combinations

from .algebra import BiDegree, Polynomial, Ring, format_polynomial
from .okounkov import SagbiDatum

__all__ = [
    "DegenerationError",
    "RelationError",
    "NoProjectionError",
    "InconsistentProjectionError",
    "FamilyConstructionError",
    "TooLargeError",
    "RelationSet",
    "WeightFunctional",
    "FamilyPresentation",
    "ComplexPolynomial",
    "monomial_bidegree",
    "build_projection",
    "initial_form",
    "build_family",
    "specialize_fiber",
    "buchberger_small",
]

TAU = "tau"


class DegenerationError(Exception):
    pass


class RelationError(DegenerationError):
    """A relation is not level-homogeneous or does not vanish."""


class NoProjectionError(DegenerationError):
    """No weight functional satisfies the order constraints."""


class InconsistentProjectionError(DegenerationError):
    """p-maximal monomials disagree with the composite-minimal ones."""


class FamilyConstructionError(DegenerationError):
    pass


class TooLargeError(DegenerationError):
    """Input exceeds the desk-scale guard of the small Groebner checker."""


def monomial_bidegree(exponents, tags) -> BiDegree:
    """Bidegree of a monomial in tagged variables: levels and values add."""
    level = 0
    value = [0] * len(tags[0].value)
    for e, tag in zip(exponents, tags):
        if e:
            level += e * tag.level
            for i, v in enumerate(tag.value):
                value[i] += e * v
    return BiDegree(level, tuple(value))


# ---------------------------------------------------------------------------
# relation sets


@dataclass(frozen=True)
class RelationSet:
    """Relations among the generator symbols of a presentation.

    Each relation must be homogeneous in the level grading (deg x_ij = i)
    and must vanish identically after substituting the representatives;
    both facts are established at construction, exactly.
    """

    datum: SagbiDatum
    relations: tuple

    def __post_init__(self):
        object.__setattr__(self, "relations", tuple(self.relations))
        ring = self.datum.symbol_ring
        tags = self.tags
        for idx, g in enumerate(self.relations, start=1):
            if g.ring != ring:
                raise RelationError(
                    "relation %d is not over the presentation's symbol ring" % idx
                )
            if g.is_zero():
                raise RelationError("relation %d is the zero polynomial" % idx)
            levels = {monomial_bidegree(e, tags).level for e in g.terms}
            if len(levels) != 1:
                raise RelationError(
                    "relation %d mixes levels %s" % (idx, sorted(levels))
                )
            if not self.datum.substitute(g).is_zero():
                raise RelationError(
                    "relation %d does not vanish on the representatives" % idx
                )

    @cached_property
    def tags(self) -> tuple:
        return tuple(g.bidegree for g in self.datum.generators)

    @property
    def variables(self) -> tuple:
        return self.datum.symbol_ring.variables

    @property
    def levels(self) -> tuple:
        """Level n_k of each relation."""
        tags = self.tags
        return tuple(
            monomial_bidegree(next(iter(g.terms)), tags).level
            for g in self.relations
        )


# ---------------------------------------------------------------------------
# weight functionals


@dataclass(frozen=True)
class WeightFunctional:
    """Integer functional p on bidegrees, acting by p . (k, u).

    Carries the variable tags of the relation set it was built for, so the
    p-value of a monomial is computable without further context.  Entries
    are even (the construction doubles), which forces every within-relation
    p-gap to be even, in particular never 1.
    """

    p: tuple
    tags: tuple

    def __post_init__(self):
        p = tuple(int(x) for x in self.p)
        object.__setattr__(self, "p", p)
        if any(x % 2 for x in p):
            raise NoProjectionError("weight functional entries must be even")
        for tag in self.tags:
            if len(tag.value) + 1 != len(p):
                raise NoProjectionError(
                    "p has length %d but values have length %d"
                    % (len(p), len(tag.value))
                )

    def pair(self, bd: BiDegree) -> int:
        return self.p[0] * bd.level + sum(
            a * b for a, b in zip(self.p[1:], bd.value)
        )

    def weight_of(self, exponents) -> int:
        return self.pair(monomial_bidegree(exponents, self.tags))

    @property
    def variable_weights(self) -> tuple:
        return tuple(self.pair(tag) for tag in self.tags)

    def verify(self, relations):
        """Check the order constraints against every relation, loudly.

        Within a level-homogeneous relation the composite order on monomial
        bidegrees reduces to lex on values; p must reverse it (composite
        smaller means p-value larger), separate distinct degrees, and keep
        every gap away from 1.
        """
        for idx, g in enumerate(relations, start=1):
            degs = [monomial_bidegree(e, self.tags) for e in g.terms]
            for a, b in combinations(degs, 2):
                if a == b:
                    continue
                pa, pb = self.pair(a), self.pair(b)
                if pa == pb:
                    raise NoProjectionError(
                        "relation %d: p does not separate %s and %s"
                        % (idx, a, b)
                    )
                if (a < b) != (pa > pb):
                    raise NoProjectionError(
                        "relation %d: p does not reverse the composite order"
                        " on %s and %s" % (idx, a, b)
                    )
                if abs(pa - pb) == 1:
                    raise NoProjectionError(
                        "relation %d: p-gap 1 between %s and %s" % (idx, a, b)
                    )


def build_projection(rels: RelationSet) -> WeightFunctional:
    """Order-reversing weight functional for a relation set.

    Nested base-B construction: with B one more than the largest total
    coordinate spread between two monomials of one relation, the functional
    p = 2 (B^n, -B^(n-1), ..., -1) reverses lex on values with gaps of at
    least two.  Doubling keeps every entry and every gap even.  The result
    is deterministic and verified before being returned; an empty relation
    set is allowed and yields the canonical functional with B = 1.
    """
    tags = rels.tags
    n = len(tags[0].value)
    spread = 0
    for g in rels.relations:
        degs = [monomial_bidegree(e, tags) for e in g.terms]
        for a, b in combinations(degs, 2):
            spread = max(
                spread, sum(abs(x - y) for x, y in zip(a.value, b.value))
            )
    base = 1 + spread
    p = (2 * base**n,) + tuple(-2 * base ** (n - j) for j in range(1, n + 1))
    functional = WeightFunctional(p, tags)
    functional.verify(rels.relations)
    return functional


def initial_form(g: Polynomial, p: WeightFunctional) -> Polynomial:
    """Monomials of g with maximal p-value.

    Cross-checked against the valuation picture: the p-maximal monomials
    must be exactly the ones of composite-minimal bidegree.  A mismatch
    means the functional does not reflect the order on this polynomial and
    raises rather than returning a wrong initial form.
    """
    if g.is_zero():
        raise ValueError("the zero polynomial has no initial form")
    degs = {e: monomial_bidegree(e, p.tags) for e in g.terms}
    weights = {e: p.pair(d) for e, d in degs.items()}
    top = max(weights.values())
    by_weight = {e for e, w in weights.items() if w == top}
    least = min(degs.values())
    by_order = {e for e, d in degs.items() if d == least}
    if by_weight != by_order:
        raise InconsistentProjectionError(
            "p-maximal monomials %s differ from composite-minimal ones %s"
            % (sorted(by_weight), sorted(by_order))
        )
    return Polynomial(g.ring, {e: g.terms[e] for e in by_weight})


# ---------------------------------------------------------------------------
# the family


@dataclass(frozen=True)
class FamilyPresentation:
    """The one-parameter family: weights, levels, g~_k, and initial forms.

    family polynomials live in the symbol ring extended by tau (last
    variable).  Invariants are established by build_family; the fields are
    plain data.
    """

    relation_set: RelationSet
    functional: WeightFunctional
    weights: tuple
    levels: tuple
    family: tuple
    initial_forms: tuple

    @property
    def family_ring(self) -> Ring:
        return Ring(self.relation_set.datum.symbol_ring.variables + (TAU,))

    def to_json_dict(self) -> dict:
        return {
            "variables": list(self.relation_set.variables),
            "weights": [int(w) for w in self.weights],
            "levels": [int(l) for l in self.levels],
            "relations": [format_polynomial(g) for g in self.relation_set.relations],
            "family": [format_polynomial(g) for g in self.family],
            "initial_forms": [format_polynomial(g) for g in self.initial_forms],
        }


def _drop_tau(poly: Polynomial, target: Ring, t) -> Polynomial:
    """Exact substitution tau = t (t rational), back into the symbol ring."""
    t = Fraction(t)
    out = {}
    for e, c in poly.terms.items():
        base, q = e[:-1], e[-1]
        scaled = c * t**q
        if scaled:
            out[base] = out.get(base, Fraction(0)) + scaled
    return Polynomial(target, out)


def build_family(rels: RelationSet, p: WeightFunctional) -> FamilyPresentation:
    """Rescale the relations into the flat family over the tau-line.

    g~_k is tau^(l_k) g_k(tau^(-w_11) x_11, ...): each monomial of g_k
    picks up tau to the gap between l_k and its own p-value.  Everything
    the construction promises is re-checked on the result as exact
    polynomial identities: nonnegative tau-exponents, g~(x,1) = g,
    g~(x,0) = initial form, and a vanishing tau^1 coefficient.
    """
    p.verify(rels.relations)
    symbol_ring = rels.datum.symbol_ring
    fam_ring = Ring(symbol_ring.variables + (TAU,))
    levels = []
    family = []
    initials = []
    for idx, g in enumerate(rels.relations, start=1):
        weights = {e: p.weight_of(e) for e in g.terms}
        ell = max(weights.values())
        terms = {}
        for e, c in g.terms.items():
            gap = ell - weights[e]
            if gap < 0:
                raise FamilyConstructionError(
                    "relation %d, monomial %s: negative tau-exponent %d"
                    % (idx, e, gap)
                )
            if gap == 1:
                raise FamilyConstructionError(
                    "relation %d, monomial %s: tau-exponent 1 (the functional"
                    " was not doubled?)" % (idx, e)
                )
            terms[e + (gap,)] = c
        curve = Polynomial(fam_ring, terms)
        init = initial_form(g, p)
        if _drop_tau(curve, symbol_ring, 1) != g:
            raise FamilyConstructionError(
                "relation %d: specializing tau = 1 does not recover it" % idx
            )
        if _drop_tau(curve, symbol_ring, 0) != init:
            raise FamilyConstructionError(
                "relation %d: specializing tau = 0 misses the initial form" % idx
            )
        levels.append(ell)
        family.append(curve)
        initials.append(init)
    return FamilyPresentation(
        relation_set=rels,
        functional=p,
        weights=p.variable_weights,
        levels=tuple(levels),
        family=tuple(family),
        initial_forms=tuple(initials),
    )


# ---------------------------------------------------------------------------
# fibers


@dataclass(frozen=True)
class ComplexPolynomial:
    """Polynomial with complex coefficients, for numeric fibers.

    terms is a tuple of (exponents, coefficient) pairs sorted by descending
    exponent, which makes equality and serialization deterministic.
    """

    ring: Ring
    terms: tuple

    @classmethod
    def from_dict(cls, ring, mapping):
        cleaned = [
            (tuple(e), complex(c)) for e, c in mapping.items() if complex(c) != 0
        ]
        return cls(ring, tuple(sorted(cleaned, key=lambda t: t[0], reverse=True)))

    def evaluate(self, point) -> complex:
        total = 0j
        for e, c in self.terms:
            term = c
            for base, k in zip(point, e):
                if k:
                    term = term * base**k
            total += term
        return total

    def to_json_terms(self) -> list:
        return [
            {
                "coeff": [c.real, c.imag],
                "monomial": _monomial_text(self.ring, e),
            }
            for e, c in self.terms
        ]


def _monomial_text(ring: Ring, exponents) -> str:
    parts = []
    for name, k in zip(ring.variables, exponents):
        if k == 1:
            parts.append(name)
        elif k != 0:
            parts.append("%s^%d" % (name, k))
    return "*".join(parts) if parts else "1"


def specialize_fiber(fam: FamilyPresentation, t):
    """Substitute tau = t in every family polynomial.

    Exact inputs (int, Fraction) give exact Polynomials, so t = 1 returns
    the original relations and t = 0 the initial forms, on the nose.
    float or complex t gives ComplexPolynomials.
    """
    symbol_ring = fam.relation_set.datum.symbol_ring
    if isinstance(t, (int, Fraction)) and not isinstance(t, bool):
        return [_drop_tau(g, symbol_ring, t) for g in fam.family]
    t = complex(t)
    out = []
    for g in fam.family:
        acc = {}
        for e, c in g.terms.items():
            base, q = e[:-1], e[-1]
            val = complex(c) * t**q
            acc[base] = acc.get(base, 0j) + val
        out.append(ComplexPolynomial.from_dict(symbol_ring, acc))
    return out


# ---------------------------------------------------------------------------
# small Groebner verification


def _order_key(p: WeightFunctional):
    def key(exponents):
        return (p.weight_of(exponents), exponents)

    return key


def _leading(g: Polynomial, key):
    e = max(g.terms, key=key)
    return e, g.terms[e]


def _reduce_by(f: Polynomial, basis, key):
    """Normal form of f against the basis under the given monomial order."""
    ring = f.ring
    remainder = {}
    work = f
    leads = [_leading(g, key) for g in basis]
    while not work.is_zero():
        e = max(work.terms, key=key)
        c = work.terms[e]
        for g, (le, lc) in zip(basis, leads):
            if all(a >= b for a, b in zip(e, le)):
                shift = tuple(a - b for a, b in zip(e, le))
                work = work - Polynomial.monomial(ring, shift, c / lc) * g
                break
        else:
            remainder[e] = c
            work = work - Polynomial.monomial(ring, e, c)
    return Polynomial(ring, remainder)


def buchberger_small(relations, p: WeightFunctional, tie_break: str = "lex"):
    """Complete (or just verify) a small level-homogeneous basis.

    Monomials are ordered by p-weight with lexicographic tie-breaking.
    Level homogeneity is required because it bounds the monomials of each
    level, which is what makes division terminate under a weight order
    with possibly negative weights.  Pairs with coprime leading monomials
    are skipped (Buchberger's first criterion), so an input that is
    already a Groebner basis comes back unchanged.

    This is a desk-scale checker: at most 8 variables and 6 input
    relations, with a hard cap on completion growth.
    """
    if tie_break != "lex":
        raise ValueError("only lexicographic tie-breaking is implemented")
    relations = list(relations)
    if not relations:
        return ()
    ring = relations[0].ring
    if ring.nvars > 8 or len(relations) > 6:
        raise TooLargeError(
            "buchberger_small handles at most 8 variables and 6 relations,"
            " got %d and %d" % (ring.nvars, len(relations))
        )
    for idx, g in enumerate(relations, start=1):
        if g.ring != ring:
            raise ValueError("relations live in different rings")
        if g.is_zero():
            raise ValueError("relation %d is zero" % idx)
        levels = {monomial_bidegree(e, p.tags).level for e in g.terms}
        if len(levels) != 1:
            raise RelationError(
                "relation %d is not level-homogeneous; termination of the"
                " weight-order division would be unprovable" % idx
            )

    key = _order_key(p)
    basis = list(relations)
    pairs = list(combinations(range(len(basis)), 2))
    while pairs:
        i, j = pairs.pop(0)
        ei, ci = _leading(basis[i], key)
        ej, cj = _leading(basis[j], key)
        if all(min(a, b) == 0 for a, b in zip(ei, ej)):
            continue  # coprime leading monomials reduce to zero
        lcm = tuple(max(a, b) for a, b in zip(ei, ej))
        si = Polynomial.monomial(ring, tuple(a - b for a, b in zip(lcm, ei)), 1 / ci)
        sj = Polynomial.monomial(ring, tuple(a - b for a, b in zip(lcm, ej)), 1 / cj)
        s_poly = si * basis[i] - sj * basis[j]
        if s_poly.is_zero():
            continue
        remainder = _reduce_by(s_poly, basis, key)
        if remainder.is_zero():
            continue
        le, lc = _leading(remainder, key)
        remainder = remainder * (1 / lc)
        basis.append(remainder)
        if len(basis) > 60:
            raise TooLargeError("Groebner completion exceeded the growth cap")
        pairs.extend((m, len(basis) - 1) for m in range(len(basis) - 1))
    return tuple(basis)
