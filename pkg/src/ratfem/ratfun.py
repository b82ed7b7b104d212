"""Symbolic rational functions lam^alpha / (1-lam)^beta in barycentric coordinates.

A :class:`RatCombo` is a finite linear combination of terms
``coeff * lam0^a0 lam1^a1 lam2^a2 / ((1-lam0)^b0 (1-lam1)^b1 (1-lam2)^b2)``
with rational coefficients.  The class is closed under multiplication and
differentiation with respect to the barycentric coordinates, which is all the
finite element tables need.
"""

from __future__ import annotations

from fractions import Fraction


class SingularEvaluationError(ArithmeticError):
    """Evaluation point hits a vertex where the termwise limit is undefined."""


def midx_add(a, b):
    return (a[0] + b[0], a[1] + b[1], a[2] + b[2])


def midx_sub(a, b):
    return (a[0] - b[0], a[1] - b[1], a[2] - b[2])


_E = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


class RatCombo:
    """Linear combination of rational terms, keyed by (alpha, beta).

    Terms are collected eagerly: no two stored terms share a multi-index pair
    and zero coefficients are dropped, so structural equality of the term maps
    is equality of the represented functions within this class.
    """

    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict = {}
        if terms:
            for (alpha, beta), coeff in terms.items():
                if coeff != 0:
                    self.terms[(tuple(alpha), tuple(beta))] = Fraction(coeff)

    @classmethod
    def zero(cls) -> "RatCombo":
        return cls()

    @classmethod
    def monomial(cls, alpha, beta=(0, 0, 0), coeff=1) -> "RatCombo":
        """Single term coeff * lam^alpha / (1-lam)^beta."""
        alpha, beta = tuple(alpha), tuple(beta)
        if min(alpha) < 0 or min(beta) < 0:
            raise ValueError(f"negative multi-index: {alpha}, {beta}")
        return cls({(alpha, beta): Fraction(coeff)})

    @classmethod
    def one(cls) -> "RatCombo":
        return cls.monomial((0, 0, 0))

    @classmethod
    def lam(cls, j: int) -> "RatCombo":
        """The barycentric coordinate lam_j."""
        return cls.monomial(_E[j])

    def is_zero(self) -> bool:
        return not self.terms

    def __add__(self, other):
        if not isinstance(other, RatCombo):
            return NotImplemented
        acc = dict(self.terms)
        for key, coeff in other.terms.items():
            new = acc.get(key, 0) + coeff
            if new == 0:
                acc.pop(key, None)
            else:
                acc[key] = new
        out = RatCombo()
        out.terms = acc
        return out

    def __neg__(self):
        out = RatCombo()
        out.terms = {key: -coeff for key, coeff in self.terms.items()}
        return out

    def __sub__(self, other):
        if not isinstance(other, RatCombo):
            return NotImplemented
        return self + (-other)

    def scale(self, c) -> "RatCombo":
        c = Fraction(c)
        if c == 0:
            return RatCombo()
        out = RatCombo()
        out.terms = {key: c * coeff for key, coeff in self.terms.items()}
        return out

    def __rmul__(self, c):
        if isinstance(c, (int, float, Fraction)):
            return self.scale(c)
        return NotImplemented

    def __mul__(self, other):
        """Product; multi-indices add termwise (both numerator and denominator)."""
        if isinstance(other, (int, float, Fraction)):
            return self.scale(other)
        if not isinstance(other, RatCombo):
            return NotImplemented
        acc: dict = {}
        for (a1, b1), c1 in self.terms.items():
            for (a2, b2), c2 in other.terms.items():
                key = (midx_add(a1, a2), midx_add(b1, b2))
                new = acc.get(key, 0) + c1 * c2
                if new == 0:
                    acc.pop(key, None)
                else:
                    acc[key] = new
        out = RatCombo()
        out.terms = acc
        return out

    def diff(self, j: int) -> "RatCombo":
        """Partial derivative with respect to lam_j.

        Termwise, by the quotient rule,
        d/dlam_j [lam^a/(1-lam)^b] = a_j lam^(a-e_j)/(1-lam)^b
                                     + b_j lam^a/(1-lam)^(b+e_j);
        the denominator term enters with a PLUS sign since
        d/dt (1-t)^(-b) = +b (1-t)^(-b-1).
        """
        acc: dict = {}

        def bump(key, coeff):
            new = acc.get(key, 0) + coeff
            if new == 0:
                acc.pop(key, None)
            else:
                acc[key] = new

        for (alpha, beta), coeff in self.terms.items():
            if alpha[j] > 0:
                bump((midx_sub(alpha, _E[j]), beta), coeff * alpha[j])
            if beta[j] > 0:
                bump((alpha, midx_add(beta, _E[j])), coeff * beta[j])
        out = RatCombo()
        out.terms = acc
        return out

    def grad(self):
        """Gradient with respect to (lam0, lam1, lam2) as a triple."""
        return (self.diff(0), self.diff(1), self.diff(2))

    def hessian(self):
        """Symmetric 3x3 array of second lam-derivatives (nested tuples)."""
        first = self.grad()
        rows = [[None] * 3 for _ in range(3)]
        for i in range(3):
            for j in range(i, 3):
                rows[i][j] = first[i].diff(j)
        for i in range(3):
            for j in range(i):
                rows[i][j] = rows[j][i]
        return tuple(tuple(r) for r in rows)

    def evaluate(self, point) -> Fraction:
        """Exact evaluation at a barycentric point (triple of rationals).

        At a vertex i the denominator factor (1-lam_i)^b_i vanishes; a term is
        taken as 0 whenever the numerator vanishing order sum(alpha_k, k != i)
        strictly exceeds b_i, otherwise the termwise limit is undefined and
        SingularEvaluationError is raised.
        """
        l = tuple(Fraction(x) for x in point)
        if sum(l) != 1:
            raise ValueError(f"barycentric point must sum to 1, got {point}")
        total = Fraction(0)
        for (alpha, beta), coeff in self.terms.items():
            value = self._term_value(alpha, beta, coeff, l)
            if value is not None:
                total += value
        return total

    @staticmethod
    def _term_value(alpha, beta, coeff, l):
        for i in range(3):
            if beta[i] > 0 and l[i] == 1:
                order = sum(alpha[k] for k in range(3) if k != i)
                if order > beta[i]:
                    return None
                raise SingularEvaluationError(
                    f"term lam^{alpha}/(1-lam)^{beta} singular at vertex {i}")
        num = Fraction(coeff)
        for i in range(3):
            if alpha[i]:
                num *= l[i] ** alpha[i]
            if beta[i]:
                num /= (1 - l[i]) ** beta[i]
        return num

    def eval_float(self, l) -> float:
        """Float evaluation; applies the same vertex rule when 1-lam_i == 0."""
        total = 0.0
        for (alpha, beta), coeff in self.terms.items():
            term = float(coeff)
            singular = False
            for i in range(3):
                if beta[i] > 0 and l[i] == 1.0:
                    order = sum(alpha[k] for k in range(3) if k != i)
                    if order > beta[i]:
                        singular = True
                        break
                    raise SingularEvaluationError(
                        f"term lam^{alpha}/(1-lam)^{beta} singular at vertex {i}")
            if singular:
                continue
            for i in range(3):
                if alpha[i]:
                    term *= l[i] ** alpha[i]
                if beta[i]:
                    term /= (1.0 - l[i]) ** beta[i]
            total += term
        return total

    def __eq__(self, other):
        if not isinstance(other, RatCombo):
            return NotImplemented
        return self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def __repr__(self):
        if not self.terms:
            return "RatCombo<0>"
        parts = [
            f"{coeff} * lam^{alpha}/(1-lam)^{beta}"
            for (alpha, beta), coeff in sorted(self.terms.items())
        ]
        return "RatCombo<" + " + ".join(parts) + ">"


def sobolev_member(alpha, beta, m: int, p) -> bool:
    """Membership of lam^alpha/(1-lam)^beta in W^{m,p} of a triangle.

    The criterion is |alpha| - max_i(alpha_i + beta_i) > m - 2/p for finite p
    and >= m for p = infinity.
    """
    gap = sum(alpha) - max(a + b for a, b in zip(alpha, beta))
    if p == float("inf"):
        return gap >= m
    p = Fraction(p)
    if p < 1:
        raise ValueError(f"p must be in [1, inf], got {p}")
    return gap > m - Fraction(2) / p


def bubble(j: int) -> RatCombo:
    """Rational edge bubble for edge f_j (opposite vertex j).

    In multi-index form it is lam^((2,2,2)-e_j) / (1-lam)^((1,1,1)-e_j); on
    edge f_j it restricts to a cubic and it is C^1 on the closed triangle.
    """
    alpha = midx_sub((2, 2, 2), _E[j])
    beta = midx_sub((1, 1, 1), _E[j])
    return RatCombo.monomial(alpha, beta)
