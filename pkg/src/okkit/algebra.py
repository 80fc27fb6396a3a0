"""Exact arithmetic foundation: rationals, Laurent polynomials, the composite
order on N x Z^n, and two valuation backends with one-dimensional leaves.

Everything here is immutable after construction and safe to share across
threads.  Exact computation stays in rationals; complex doubles appear only
through :func:`evaluate_complex`.

Conventions fixed once for the whole package:

* the monomial backend returns the lex-MINIMAL exponent of a nonzero
  polynomial (think "order of vanishing along a flag"),
* the series backend returns the order of vanishing of a rational function
  at a point, computed on truncated power series with doubling escalation.

Both satisfy v(fg) = v(f) + v(g) and v(f+g) >= min(v(f), v(g)), and both
have one-dimensional leaves: equal values can always be cancelled by
subtracting a scalar multiple.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

__all__ = [
    "Rational",
    "ExponentVector",
    "Ring",
    "Polynomial",
    "BiDegree",
    "SeriesContext",
    "AlgebraError",
    "DimensionError",
    "UndefinedValuationError",
    "InconclusiveValuationError",
    "EvaluationError",
    "ParseError",
    "compare_composite",
    "monomial_valuation",
    "series_valuation",
    "evaluate_complex",
    "parse_polynomial",
    "format_polynomial",
]

# Rational numbers are stdlib Fractions: always reduced, denominator > 0.
Rational = Fraction

# An exponent vector is a plain tuple of ints of the ring's variable count.
ExponentVector = tuple


class AlgebraError(Exception):
    """Base class for errors raised by the exact-arithmetic layer."""


class DimensionError(AlgebraError):
    pass


class UndefinedValuationError(AlgebraError):
    """The zero element has no valuation."""


class InconclusiveValuationError(AlgebraError):
    """All computed series coefficients vanished up to the escalation cap.

    Raised instead of silently returning a wrong order.
    """


class EvaluationError(AlgebraError):
    pass


class ParseError(AlgebraError):
    pass


# ---------------------------------------------------------------------------
# rings and polynomials


@dataclass(frozen=True)
class Ring:
    """Descriptor of a (Laurent) polynomial ring: named variables, Laurent flag."""

    variables: tuple
    laurent: bool = False

    def __post_init__(self):
        if len(set(self.variables)) != len(self.variables):
            raise ValueError("duplicate variable names")
        for v in self.variables:
            if not re.fullmatch(r"[A-Za-z_][A-Za-z0-9_]*", v):
                raise ValueError("bad variable name %r" % (v,))

    @property
    def nvars(self):
        return len(self.variables)

    def index(self, name):
        return self.variables.index(name)


def _as_rational(c):
    if isinstance(c, Fraction):
        return c
    if isinstance(c, int):
        return Fraction(c)
    raise TypeError("coefficients must be exact rationals, got %r" % type(c))


class Polynomial:
    """Immutable multivariate (Laurent) polynomial with exact rational
    coefficients, stored as a map exponent tuple -> Fraction.

    No zero coefficients are stored.  Negative exponents are rejected unless
    the ring's Laurent flag is set.
    """

    __slots__ = ("ring", "terms", "_hash")

    def __init__(self, ring: Ring, terms: Mapping[tuple, Fraction]):
        clean = {}
        n = ring.nvars
        for e, c in terms.items():
            e = tuple(int(x) for x in e)
            if len(e) != n:
                raise DimensionError(
                    "exponent length %d does not match ring with %d variables"
                    % (len(e), n)
                )
            if not ring.laurent and any(x < 0 for x in e):
                raise ValueError("negative exponent in a non-Laurent ring")
            c = _as_rational(c)
            if c != 0:
                clean[e] = clean.get(e, Fraction(0)) + c
                if clean[e] == 0:
                    del clean[e]
        object.__setattr__(self, "ring", ring)
        object.__setattr__(self, "terms", clean)
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, *a):
        raise AttributeError("Polynomial is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, ring):
        return cls(ring, {})

    @classmethod
    def constant(cls, ring, c):
        return cls(ring, {(0,) * ring.nvars: _as_rational(c)})

    @classmethod
    def variable(cls, ring, name):
        e = [0] * ring.nvars
        e[ring.index(name)] = 1
        return cls(ring, {tuple(e): Fraction(1)})

    @classmethod
    def monomial(cls, ring, exponents, coeff=1):
        return cls(ring, {tuple(exponents): _as_rational(coeff)})

    # -- predicates --------------------------------------------------------

    def is_zero(self):
        return not self.terms

    def is_constant(self):
        z = (0,) * self.ring.nvars
        return not self.terms or set(self.terms) == {z}

    def constant_value(self):
        return self.terms.get((0,) * self.ring.nvars, Fraction(0))

    def total_degree(self):
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    # -- arithmetic --------------------------------------------------------

    def _check_ring(self, other):
        if self.ring != other.ring:
            raise DimensionError("polynomials from different rings")

    def __add__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.ring, other)
        self._check_ring(other)
        t = dict(self.terms)
        for e, c in other.terms.items():
            s = t.get(e, Fraction(0)) + c
            if s == 0:
                t.pop(e, None)
            else:
                t[e] = s
        return Polynomial(self.ring, t)

    __radd__ = __add__

    def __neg__(self):
        return Polynomial(self.ring, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.ring, other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            c = _as_rational(other)
            if c == 0:
                return Polynomial.zero(self.ring)
            return Polynomial(
                self.ring, {e: c * v for e, v in self.terms.items()}
            )
        self._check_ring(other)
        out = {}
        for e1, c1 in self.terms.items():
            for e2, c2 in other.terms.items():
                e = tuple(a + b for a, b in zip(e1, e2))
                s = out.get(e, Fraction(0)) + c1 * c2
                if s == 0:
                    out.pop(e, None)
                else:
                    out[e] = s
        return Polynomial(self.ring, out)

    __rmul__ = __mul__

    def __pow__(self, k):
        if k < 0:
            raise ValueError("negative polynomial power")
        result = Polynomial.constant(self.ring, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.ring == other.ring and self.terms == other.terms

    def __hash__(self):
        h = self._hash
        if h is None:
            h = hash((self.ring, frozenset(self.terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    def __repr__(self):
        return "Polynomial(%s)" % format_polynomial(self)

    def coefficient(self, exponents):
        return self.terms.get(tuple(exponents), Fraction(0))

    def map_exponents(self, fn):
        """Apply fn to every exponent tuple (must stay injective)."""
        out = {}
        for e, c in self.terms.items():
            e2 = tuple(fn(e))
            if e2 in out:
                raise ValueError("exponent map is not injective")
            out[e2] = c
        return Polynomial(self.ring, out)


# ---------------------------------------------------------------------------
# the composite order on N x Z^n


@dataclass(frozen=True, order=False)
class BiDegree:
    """Element (m, u) of N x Z^n.

    Comparisons use the composite order: (m, u) <= (m', u') iff m > m', or
    m = m' and u lexicographically <= u'.  Note the switch: a HIGHER level is
    a SMALLER element.  This is the order under which the extended valuation
    of a sum is at least the minimum of the two values.
    """

    level: int
    value: tuple

    def __post_init__(self):
        if self.level < 0:
            raise ValueError("level must be nonnegative")
        object.__setattr__(self, "value", tuple(int(x) for x in self.value))

    def __add__(self, other):
        if len(self.value) != len(other.value):
            raise DimensionError("value length mismatch")
        return BiDegree(
            self.level + other.level,
            tuple(a + b for a, b in zip(self.value, other.value)),
        )

    def scale(self, k):
        return BiDegree(k * self.level, tuple(k * x for x in self.value))

    def __lt__(self, other):
        return compare_composite(self, other) < 0

    def __le__(self, other):
        return compare_composite(self, other) <= 0

    def __gt__(self, other):
        return compare_composite(self, other) > 0

    def __ge__(self, other):
        return compare_composite(self, other) >= 0

    def as_tuple(self):
        return (self.level,) + self.value


def compare_composite(a: BiDegree, b: BiDegree) -> int:
    """Compare two bidegrees in the composite order.

    Returns -1, 0 or 1.  Total and translation invariant:
    compare(a, b) == compare(a + c, b + c).
    """
    if len(a.value) != len(b.value):
        raise DimensionError(
            "cannot compare values of lengths %d and %d"
            % (len(a.value), len(b.value))
        )
    if a.level != b.level:
        # higher level is SMALLER
        return -1 if a.level > b.level else 1
    if a.value == b.value:
        return 0
    return -1 if a.value < b.value else 1


# ---------------------------------------------------------------------------
# monomial valuation backend


def monomial_valuation(f: Polynomial) -> tuple:
    """Lex-minimal exponent of a nonzero (Laurent) polynomial.

    This is a valuation with one-dimensional leaves on the polynomial ring:
    v(fg) = v(f) + v(g) because lex is compatible with addition of exponents,
    and v(f+g) >= min since cancellation can only remove the bottom term.
    """
    if f.is_zero():
        raise UndefinedValuationError("the zero polynomial has no valuation")
    return min(f.terms)


def leading_coefficient(f: Polynomial) -> Fraction:
    """Coefficient at the lex-minimal exponent."""
    return f.terms[monomial_valuation(f)]


# ---------------------------------------------------------------------------
# truncated power series and the series valuation backend


class _Series:
    """Dense truncated power series in one parameter, exact coefficients.

    coeffs[i] is the coefficient of u^i; everything at order >= trunc is
    unknown.  Only what the valuation backend needs: ring operations and
    order-of-vanishing queries.
    """

    __slots__ = ("coeffs", "trunc")

    def __init__(self, coeffs: Sequence[Fraction], trunc: int):
        coeffs = list(coeffs)[:trunc]
        coeffs += [Fraction(0)] * (trunc - len(coeffs))
        self.coeffs = [_as_rational(c) for c in coeffs]
        self.trunc = trunc

    @classmethod
    def zero(cls, trunc):
        return cls([], trunc)

    @classmethod
    def constant(cls, c, trunc):
        return cls([_as_rational(c)], trunc)

    @classmethod
    def parameter(cls, trunc):
        return cls([Fraction(0), Fraction(1)], trunc)

    def __add__(self, other):
        t = min(self.trunc, other.trunc)
        return _Series(
            [a + b for a, b in zip(self.coeffs[:t], other.coeffs[:t])], t
        )

    def __sub__(self, other):
        t = min(self.trunc, other.trunc)
        return _Series(
            [a - b for a, b in zip(self.coeffs[:t], other.coeffs[:t])], t
        )

    def __mul__(self, other):
        t = min(self.trunc, other.trunc)
        out = [Fraction(0)] * t
        for i, a in enumerate(self.coeffs[:t]):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs[: t - i]):
                if b != 0:
                    out[i + j] += a * b
        return _Series(out, t)

    def scale(self, c):
        c = _as_rational(c)
        return _Series([c * a for a in self.coeffs], self.trunc)

    def __pow__(self, k):
        result = _Series.constant(1, self.trunc)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def order(self):
        """Index of the first nonzero coefficient, or None if all vanish."""
        for i, c in enumerate(self.coeffs):
            if c != 0:
                return i
        return None

    def __eq__(self, other):
        t = min(self.trunc, other.trunc)
        return self.coeffs[:t] == other.coeffs[:t]


class SeriesContext:
    """Local expansion data for the series valuation backend.

    Maps each ambient variable to a truncated power series in the local
    parameter.  Some variables may be defined implicitly as the fixed point
    of ``var = rhs(vars)``; the constructor solves those by iteration, which
    converges whenever each occurrence of the unknown in ``rhs`` carries
    positive order (the substitution is then a contraction in the u-adic
    metric).

    ``truncation`` is the working order; when a valuation query finds only
    zero coefficients the context escalates by doubling up to ``cap`` and
    recomputes, then gives up loudly.
    """

    def __init__(
        self,
        parameter: str,
        assignments: Mapping[str, Polynomial],
        implicit: Mapping[str, Polynomial] | None = None,
        truncation: int = 64,
        cap: int = 256,
    ):
        if truncation > cap:
            raise ValueError("truncation order exceeds the escalation cap")
        if truncation < 2:
            raise ValueError("truncation order too small")
        self.parameter = parameter
        self.assignments = dict(assignments)
        self.implicit = dict(implicit or {})
        self.truncation = truncation
        self.cap = cap
        self._tables = {}  # truncation order -> {var: _Series}
        self._table(truncation)

    # -- series construction ------------------------------------------------

    def _table(self, trunc):
        if trunc in self._tables:
            return self._tables[trunc]
        table = {}
        for var, poly in self.assignments.items():
            table[var] = self._expand_explicit(poly, trunc)
        # solve implicit variables by fixed-point iteration
        for var in self.implicit:
            table[var] = _Series.zero(trunc)
        for _ in range(trunc + 2):
            changed = False
            for var, rhs in self.implicit.items():
                new = self._substitute(rhs, table, trunc)
                if not (new == table[var]):
                    table[var] = new
                    changed = True
            if not changed:
                break
        else:
            raise InconclusiveValuationError(
                "implicit series for %s did not stabilize at order %d"
                % (sorted(self.implicit), trunc)
            )
        self._tables[trunc] = table
        return table

    def _expand_explicit(self, poly, trunc):
        ring = poly.ring
        if list(ring.variables) != [self.parameter]:
            raise ValueError(
                "explicit assignments must be polynomials in the parameter"
            )
        s = _Series.zero(trunc)
        for e, c in poly.terms.items():
            if e[0] < trunc:
                coeffs = [Fraction(0)] * e[0] + [c]
                s = s + _Series(coeffs, trunc)
        return s

    def _substitute(self, poly, table, trunc):
        out = _Series.zero(trunc)
        ring = poly.ring
        for e, c in poly.terms.items():
            term = _Series.constant(c, trunc)
            for var, k in zip(ring.variables, e):
                if k == 0:
                    continue
                if k < 0:
                    raise EvaluationError(
                        "Laurent exponent under a series substitution"
                    )
                term = term * (table[var] ** k)
            out = out + term
        return out

    def expand(self, poly: Polynomial, trunc: int | None = None) -> _Series:
        """Expand an ambient polynomial to a truncated series."""
        trunc = trunc or self.truncation
        return self._substitute(poly, self._table(trunc), trunc)

    def order_of(self, poly: Polynomial) -> int | None:
        """Order of vanishing, escalating the truncation as needed.

        Returns None only after every order up to the cap yields all-zero
        coefficients; callers turn that into a loud error or, knowing the
        input is zero, into a zero test.
        """
        if poly.is_zero():
            return None
        trunc = self.truncation
        while True:
            o = self.expand(poly, trunc).order()
            if o is not None:
                return o
            if trunc >= self.cap:
                return None
            trunc = min(2 * trunc, self.cap)

    def leading_series_coefficient(self, poly: Polynomial) -> Fraction:
        o = self.order_of(poly)
        if o is None:
            raise InconclusiveValuationError(
                "no nonzero coefficient up to the cap"
            )
        return self.expand(poly).coeffs[o] if o < self.truncation else (
            self.expand(poly, self.cap).coeffs[o]
        )


def series_valuation(f, ctx: SeriesContext) -> int:
    """Order of zero/pole of a rational function at the expansion point.

    ``f`` is a pair (numerator, denominator) of Polynomials, or a single
    Polynomial meaning denominator 1.  Returns ord(num) - ord(den).
    Escalates the truncation by doubling; if every coefficient vanishes up
    to the cap an InconclusiveValuationError is raised rather than a value
    invented.
    """
    if isinstance(f, Polynomial):
        num, den = f, None
    else:
        num, den = f
    if num.is_zero():
        raise UndefinedValuationError("the zero function has no valuation")
    o_num = ctx.order_of(num)
    if o_num is None:
        raise InconclusiveValuationError(
            "numerator vanished to order %d; raise the cap or check for an"
            " identically zero representative" % ctx.cap
        )
    if den is None or den.is_constant():
        if den is not None and den.constant_value() == 0:
            raise UndefinedValuationError("zero denominator")
        return o_num
    o_den = ctx.order_of(den)
    if o_den is None:
        raise UndefinedValuationError(
            "denominator vanishes identically under the substitution"
        )
    return o_num - o_den


# ---------------------------------------------------------------------------
# numeric evaluation


def evaluate_complex(f: Polynomial, point: Sequence[complex]) -> complex:
    """Evaluate at a complex point, deterministically (sorted term order).

    Laurent exponents require the matching coordinate to be nonzero.
    """
    if len(point) != f.ring.nvars:
        raise EvaluationError(
            "point length %d does not match ring with %d variables"
            % (len(point), f.ring.nvars)
        )
    point = [complex(z) for z in point]
    total = 0j
    for e in sorted(f.terms):
        c = f.terms[e]
        term = complex(c)
        for z, k in zip(point, e):
            if k == 0:
                continue
            if k < 0 and z == 0:
                raise EvaluationError("zero coordinate with negative exponent")
            term *= z ** k
        total += term
    return total


# ---------------------------------------------------------------------------
# canonical text grammar
#
#   poly   := [-] term (('+' | '-') term)*
#   term   := coeff | coeff '*' factors | factors
#   factors:= factor ('*' factor)*
#   factor := var ('^' int)?
#   coeff  := int ('/' int)?
#
# Canonical printing sorts terms by descending lex exponent and always
# round-trips: parse(format(f)) == f.

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^()]))"
)


def _tokenize(text):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            if text[pos:].strip():
                raise ParseError("unexpected input at %r" % text[pos : pos + 10])
            break
        if m.lastgroup == "num":
            out.append(("num", int(m.group("num"))))
        elif m.lastgroup == "name":
            out.append(("name", m.group("name")))
        else:
            out.append(("op", m.group("op")))
        pos = m.end()
    return out


def parse_polynomial(text: str, ring: Ring) -> Polynomial:
    """Parse the canonical grammar, e.g. ``3/2*x^2*y^-1 + 5``."""
    toks = _tokenize(text)
    if not toks:
        raise ParseError("empty polynomial text")
    pos = 0

    def peek():
        return toks[pos] if pos < len(toks) else (None, None)

    def take():
        nonlocal pos
        t = toks[pos]
        pos += 1
        return t

    def parse_int():
        kind, val = peek()
        sign = 1
        if kind == "op" and val == "-":
            take()
            sign = -1
        kind, val = peek()
        if kind != "num":
            raise ParseError("expected an integer")
        take()
        return sign * val

    def parse_term(sign):
        coeff = Fraction(sign)
        exps = [0] * ring.nvars
        saw_factor = False
        expect_factor = True
        while expect_factor:
            kind, val = peek()
            if kind == "num":
                take()
                c = Fraction(val)
                k2, v2 = peek()
                if k2 == "op" and v2 == "/":
                    take()
                    k3, v3 = peek()
                    if k3 != "num":
                        raise ParseError("expected a denominator")
                    take()
                    if v3 == 0:
                        raise ParseError("zero denominator")
                    c /= v3
                coeff *= c
                saw_factor = True
            elif kind == "name":
                take()
                if val not in ring.variables:
                    raise ParseError("unknown variable %r" % val)
                k = 1
                k2, v2 = peek()
                if k2 == "op" and v2 == "^":
                    take()
                    k = parse_int()
                exps[ring.index(val)] += k
                saw_factor = True
            else:
                raise ParseError("expected a coefficient or variable")
            kind, val = peek()
            if kind == "op" and val == "*":
                take()
                expect_factor = True
            else:
                expect_factor = False
        if not saw_factor:
            raise ParseError("empty term")
        return Polynomial.monomial(ring, exps, coeff)

    result = Polynomial.zero(ring)
    sign = 1
    kind, val = peek()
    if kind == "op" and val in "+-":
        take()
        sign = -1 if val == "-" else 1
    while True:
        result = result + parse_term(sign)
        kind, val = peek()
        if kind is None:
            break
        if kind == "op" and val in "+-":
            take()
            sign = -1 if val == "-" else 1
        else:
            raise ParseError("expected '+' or '-', got %r" % (val,))
    return result


def format_polynomial(f: Polynomial) -> str:
    """Canonical text form; inverse of parse_polynomial on its image."""
    if f.is_zero():
        return "0"
    pieces = []
    for e in sorted(f.terms, reverse=True):
        c = f.terms[e]
        factors = []
        for name, k in zip(f.ring.variables, e):
            if k == 0:
                continue
            factors.append(name if k == 1 else "%s^%d" % (name, k))
        abs_c = abs(c)
        if not factors:
            body = _format_coeff(abs_c)
        elif abs_c == 1:
            body = "*".join(factors)
        else:
            body = _format_coeff(abs_c) + "*" + "*".join(factors)
        if not pieces:
            pieces.append(body if c > 0 else "-" + body)
        else:
            pieces.append((" + " if c > 0 else " - ") + body)
    return "".join(pieces)


def _format_coeff(c: Fraction) -> str:
    if c.denominator == 1:
        return str(c.numerator)
    return "%d/%d" % (c.numerator, c.denominator)
