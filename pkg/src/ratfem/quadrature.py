"""Exact integral means of lam^alpha/(1-lam)^beta over a triangle.

The mean is independent of the triangle, so everything here is a function of
the two multi-indices alone.  Two mutually recursive routines do the work:

* ``compute_J`` handles the Fubini-splittable case alpha0 = beta0 = 0 by
  iterated 1D integration; its only non-rational base case contributes pi^2/3.
* ``integral_mean`` reduces the general case to ``compute_J`` and to two
  factorial closed forms via index-lowering identities, memoized under
  permutation symmetry.

The module also provides the inexact tensorized Gauss rule on the reference
triangle used by the quadrature-error experiments.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .exact import INFINITE, ExactValue, factorial
from .ratfun import RatCombo


class IndexNotFiniteError(ArithmeticError):
    """A closed form was requested outside its finiteness range."""


class InfiniteTermError(ArithmeticError):
    """A linear combination contains a non-integrable term."""


def is_finite_index(alpha, beta) -> bool:
    """True iff the integral mean of lam^alpha/(1-lam)^beta is finite."""
    return max(a + b for a, b in zip(alpha, beta)) <= sum(alpha) + 1


def integral_mean_poly(alpha, d: int | None = None) -> ExactValue:
    """Mean of lam^alpha over a d-simplex: d! alpha! / (d + |alpha|)!."""
    if d is None:
        d = len(alpha) - 1
    if d < 1 or len(alpha) != d + 1:
        raise ValueError(f"need d+1 indices for a d-simplex, got {alpha}")
    num = factorial(d)
    for a in alpha:
        num *= factorial(a)
    return ExactValue(Fraction(num, factorial(d + sum(alpha))))


def integral_mean_beta2(alpha, beta2: int) -> ExactValue:
    """Closed form for beta = (0, 0, beta2):

    2 a0! a1! a2! / (|alpha| - beta2 + 2)! * (a0 + a1 + 1 - beta2)! / (a0 + a1 + 1)!
    """
    a0, a1, a2 = alpha
    if not is_finite_index(alpha, (0, 0, beta2)):
        raise IndexNotFiniteError(f"I({alpha}, (0,0,{beta2})) is infinite")
    value = Fraction(2 * factorial(a0) * factorial(a1) * factorial(a2),
                     factorial(a0 + a1 + a2 - beta2 + 2))
    value *= Fraction(factorial(a0 + a1 + 1 - beta2), factorial(a0 + a1 + 1))
    return ExactValue(value)


def _harmonic2(n: int) -> Fraction:
    return sum((Fraction(1, i * i) for i in range(1, n + 1)), Fraction(0))


def compute_J(a1: int, a2: int, b1: int, b2: int) -> ExactValue:
    """Mean of x^a1 y^a2 / ((1-x)^b1 (1-y)^b2) over the reference triangle.

    Fubini splits the integral into nested 1D integrals.  The recursion lowers
    b1 + b2 until it reaches either the polynomial-weight case b1 = 0 or the
    case b1 = b2 = 1, whose y-integral of log(y)/(1-y) produces the pi^2/3
    term (a polygamma value); everything else is a factorial ratio.
    """
    if max(a1 + b1, a2 + b2) > a1 + a2 + 1:
        return INFINITE
    if b1 > b2:
        a1, a2, b1, b2 = a2, a1, b2, b1
    if b1 == 0:
        value = Fraction(2, a1 + 1) * Fraction(
            factorial(a2) * factorial(a1 - b2 + 1),
            factorial(a1 + a2 - b2 + 2))
        return ExactValue(value)
    if b1 == 1:
        if b2 == 1:
            q0 = -2 * _harmonic2(a2)
            for j in range(1, a1 + 1):
                q0 -= Fraction(2, j) * Fraction(
                    factorial(a2) * factorial(j - 1), factorial(a2 + j))
            return ExactValue(q0, Fraction(1, 3))
        rec = compute_J(a1, a2, 1, b2 - 1).scale(Fraction(b2 - a2 - 2, b2 - 1))
        extra = Fraction(2, b2 - 1) * Fraction(
            factorial(a1 - b2 + 1) * factorial(a2),
            factorial(a1 - b2 + a2 + 2))
        return rec + ExactValue(extra)
    rec = compute_J(a1, a2, b1 - 1, b2).scale(Fraction(b1 - a1 - 2, b1 - 1))
    extra = Fraction(2, b1 - 1) * Fraction(
        factorial(a2 - b1 + 1) * factorial(a1 - b2 + 1),
        factorial(a2 - b1 + a1 - b2 + 3))
    return rec + ExactValue(extra)


class MemoCache:
    """Memo table for integral means, keyed by the sorted (alpha_i, beta_i) pairs.

    Sorting is justified by the permutation invariance of the mean and shrinks
    the table by up to a factor six.
    """

    __slots__ = ("table",)

    def __init__(self):
        self.table: dict = {}

    @staticmethod
    def key(alpha, beta):
        return tuple(sorted(zip(alpha, beta)))

    def get(self, alpha, beta):
        return self.table.get(self.key(alpha, beta))

    def put(self, alpha, beta, value: ExactValue) -> ExactValue:
        self.table[self.key(alpha, beta)] = value
        return value

    def __len__(self):
        return len(self.table)


#: Shared default cache; computations are pure so sharing is safe.
DEFAULT_CACHE = MemoCache()

_V = ((1, 0, 0), (0, 1, 0), (0, 0, 1))


def _sub(idx, v):
    return (idx[0] - v[0], idx[1] - v[1], idx[2] - v[2])


def _add(idx, v):
    return (idx[0] + v[0], idx[1] + v[1], idx[2] + v[2])


def integral_mean(alpha, beta, cache: MemoCache | None = None) -> ExactValue:
    """Mean of lam^alpha/(1-lam)^beta over any triangle (exact).

    Branches, in order: finiteness guard; sort the index pairs so the beta
    entries increase; factorial closed form when the two smallest beta vanish;
    a four-term reduction when all beta are positive; delegation to
    ``compute_J`` when alpha0 = 0; two three-term reductions lowering alpha0;
    and a six-term reduction for the remaining tie case.
    """
    alpha = tuple(alpha)
    beta = tuple(beta)
    if cache is None:
        cache = DEFAULT_CACHE
    cached = cache.get(alpha, beta)
    if cached is not None:
        return cached
    value = _integral_mean_impl(alpha, beta, cache)
    return cache.put(alpha, beta, value)


def _integral_mean_impl(alpha, beta, cache) -> ExactValue:
    asum = sum(alpha)
    if max(a + b for a, b in zip(alpha, beta)) > asum + 1:
        return INFINITE

    pairs = sorted(zip(alpha, beta), key=lambda ab: (ab[1], ab[0]))
    alpha = tuple(a for a, _ in pairs)
    beta = tuple(b for _, b in pairs)

    if beta[0] == 0 and beta[1] == 0:
        return integral_mean_beta2(alpha, beta[2])

    if beta[0] >= 1:
        acc = ExactValue(0)
        for j in range(3):
            acc = acc + integral_mean(alpha, _sub(beta, _V[j]), cache)
        return acc.scale(Fraction(1, 2))

    if alpha[0] == 0:
        return compute_J(alpha[1], alpha[2], beta[1], beta[2])

    if alpha[1] + beta[1] < asum + 1:
        return (integral_mean(_sub(alpha, _V[0]), _sub(beta, _V[2]), cache)
                - integral_mean(_add(_sub(alpha, _V[0]), _V[1]), beta, cache))

    if alpha[2] + beta[2] < asum + 1:
        return (integral_mean(_sub(alpha, _V[0]), _sub(beta, _V[1]), cache)
                - integral_mean(_add(_sub(alpha, _V[0]), _V[2]), beta, cache))

    acc = ExactValue(0)
    for j in (1, 2):
        acc = acc + integral_mean(alpha, _sub(beta, _V[j]), cache)
        acc = acc + integral_mean(_add(_sub(alpha, _V[0]), _V[j]),
                                  _sub(beta, _V[j]), cache)
    acc = acc.scale(Fraction(1, 2))
    return acc - integral_mean(_add(_add(_sub(alpha, _V[0]), _V[1]), _V[2]),
                               beta, cache)


def integral_mean_combo(f: RatCombo, cache: MemoCache | None = None) -> ExactValue:
    """Exact mean of a rational linear combination; all terms must be finite."""
    total = ExactValue(0)
    for (alpha, beta), coeff in f.terms.items():
        value = integral_mean(alpha, beta, cache)
        if value.infinite:
            raise InfiniteTermError(
                f"term lam^{alpha}/(1-lam)^{beta} is not integrable")
        total = total + value.scale(coeff)
    return total


# ---------------------------------------------------------------------------
# Inexact quadrature: tensorized 1D Gauss via Fubini on the reference triangle.

def _legendre_and_derivative(n: int, x: np.ndarray):
    # three-term recurrence for P_n and its derivative on (-1, 1)
    p0 = np.ones_like(x)
    p1 = x.copy()
    for m in range(2, n + 1):
        p0, p1 = p1, ((2 * m - 1) * x * p1 - (m - 1) * p0) / m
    if n == 0:
        return p0, np.zeros_like(x)
    dp = n * (x * p1 - p0) / (x * x - 1.0)
    return p1, dp


def gauss_legendre_01(n: int):
    """n-point Gauss-Legendre nodes and weights on [0, 1].

    Newton iteration on the Legendre polynomial P_n from the Chebyshev initial
    guess; no tables, any n >= 1.
    """
    if n < 1:
        raise ValueError("need at least one Gauss point")
    if n == 1:
        return np.array([0.5]), np.array([1.0])
    k = np.arange(n)
    x = np.cos(np.pi * (k + 0.75) / (n + 0.5))
    for _ in range(100):
        pn, dpn = _legendre_and_derivative(n, x)
        dx = pn / dpn
        x = x - dx
        if np.max(np.abs(dx)) < 1e-15:
            break
    _, dpn = _legendre_and_derivative(n, x)
    w = 2.0 / ((1.0 - x * x) * dpn ** 2)
    order = np.argsort(x)
    x, w = x[order], w[order]
    return (x + 1.0) / 2.0, w / 2.0


class GaussRule2D:
    """Fubini-Gauss rule on the reference triangle [(0,0), (1,0), (0,1)].

    Outer axis: n Gauss points x_i on [0,1]; inner axis: n Gauss points on
    [0, 1-x_i] with weights scaled by (1-x_i).  Exact for polynomials of total
    degree up to 2n-2.  Weights sum to 1/2 (the reference area).
    """

    __slots__ = ("n", "points", "weights")

    def __init__(self, n: int):
        x, wx = gauss_legendre_01(n)
        pts = np.empty((n * n, 2))
        wts = np.empty(n * n)
        for i in range(n):
            yi = x * (1.0 - x[i])
            pts[i * n:(i + 1) * n, 0] = x[i]
            pts[i * n:(i + 1) * n, 1] = yi
            wts[i * n:(i + 1) * n] = wx[i] * wx * (1.0 - x[i])
        self.n = n
        self.points = pts
        self.weights = wts

    def bary_points(self):
        """Barycentric coordinates of the rule points, shape (n*n, 3)."""
        x, y = self.points[:, 0], self.points[:, 1]
        return np.column_stack([1.0 - x - y, x, y])


_RULE_CACHE: dict = {}


def gauss_rule(n: int) -> GaussRule2D:
    rule = _RULE_CACHE.get(n)
    if rule is None:
        rule = _RULE_CACHE[n] = GaussRule2D(n)
    return rule


def gauss_integrate(f, rule: GaussRule2D, vertices=None) -> float:
    """Integrate a callable f(x, y) over a physical triangle with the rule.

    `vertices` is a 3x2 array; None means the reference triangle.  The affine
    map contributes the factor |det DF| = 2*area.
    """
    pts = rule.points
    if vertices is None:
        xy = pts
        jac = 1.0
    else:
        v = np.asarray(vertices, dtype=float)
        df = np.column_stack([v[1] - v[0], v[2] - v[0]])
        jac = abs(float(np.linalg.det(df)))
        xy = v[0] + pts @ df.T
    vals = np.array([f(p[0], p[1]) for p in xy])
    return jac * float(np.dot(rule.weights, vals))


def combo_values(funcs, bary) -> np.ndarray:
    """Float values of a list of RatCombos at barycentric points (Q,3) -> (Q,L)."""
    bary = np.asarray(bary, dtype=float)
    out = np.zeros((bary.shape[0], len(funcs)))
    for r, f in enumerate(funcs):
        for (alpha, beta), coeff in f.terms.items():
            term = float(coeff) * np.ones(bary.shape[0])
            for i in range(3):
                if alpha[i]:
                    term = term * bary[:, i] ** alpha[i]
                if beta[i]:
                    term = term / (1.0 - bary[:, i]) ** beta[i]
            out[:, r] += term
    return out


def hessian_values(funcs, bary) -> np.ndarray:
    """Float lam-Hessians of RatCombos at barycentric points -> (Q, L, 3, 3)."""
    bary = np.asarray(bary, dtype=float)
    out = np.zeros((bary.shape[0], len(funcs), 3, 3))
    for r, f in enumerate(funcs):
        hess = f.hessian()
        for i in range(3):
            for j in range(i, 3):
                vals = combo_values([hess[i][j]], bary)[:, 0]
                out[:, r, i, j] = vals
                if i != j:
                    out[:, r, j, i] = vals
    return out


def gradient_values(funcs, bary) -> np.ndarray:
    """Float lam-gradients of RatCombos at barycentric points -> (Q, L, 3)."""
    bary = np.asarray(bary, dtype=float)
    out = np.zeros((bary.shape[0], len(funcs), 3))
    for r, f in enumerate(funcs):
        for k, g in enumerate(f.grad()):
            out[:, r, k] = combo_values([g], bary)[:, 0]
    return out
