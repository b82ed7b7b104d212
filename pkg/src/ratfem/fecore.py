"""Element-type-independent machinery: exact moment tensors, the generalized
Vandermonde basis change, right-hand-side moment matrices and triplet assembly.

All reference tensors are computed once per process by exact rational
quadrature and floated at the very end, so recomputation is bit-reproducible.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .quadrature import MemoCache, integral_mean_combo
from .ratfun import RatCombo


class SingularVandermondeError(np.linalg.LinAlgError):
    pass


def moment_tensor(left, right, cache: MemoCache | None = None) -> np.ndarray:
    """Means of pairwise products of two RatCombo families.

    `left` and `right` are arbitrarily nested sequences of RatCombos; the
    result has shape left_shape + right_shape with every entry the floated
    exact mean of the product.  A product-level memo avoids recomputing
    symmetric entries.
    """
    larr = np.asarray(left, dtype=object)
    rarr = np.asarray(right, dtype=object)
    out = np.empty(larr.shape + rarr.shape)
    memo: dict = {}
    for il in np.ndindex(larr.shape):
        f = larr[il]
        for ir in np.ndindex(rarr.shape):
            g = rarr[ir]
            key = (id(f), id(g)) if id(f) <= id(g) else (id(g), id(f))
            val = memo.get(key)
            if val is None:
                val = memo[key] = integral_mean_combo(f * g, cache).to_float()
            out[il + ir] = val
    return out


def vandermonde_invert(V: np.ndarray) -> np.ndarray:
    """Inverse of the generalized Vandermonde matrix with a refinement step.

    One step of iterative refinement keeps the delta-property of the shape
    functions robust on badly shaped elements.
    """
    V = np.asarray(V, dtype=float)
    try:
        Vinv = np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise SingularVandermondeError(str(exc)) from exc
    # refinement: Vinv <- Vinv (2I - V Vinv)
    Vinv = Vinv @ (2.0 * np.eye(V.shape[0]) - V @ Vinv)
    resid = np.abs(V @ Vinv - np.eye(V.shape[0])).max()
    if not np.isfinite(resid) or resid > 1e-6:
        raise SingularVandermondeError(f"residual {resid} after refinement")
    return Vinv


def lagrange_nodes(degree: int):
    """Barycentric Lagrange nodes: vertices, then edge midpoints for degree 2."""
    from fractions import Fraction as F
    vertices = [(F(1), F(0), F(0)), (F(0), F(1), F(0)), (F(0), F(0), F(1))]
    if degree == 1:
        return vertices
    if degree == 2:
        h = F(1, 2)
        return vertices + [(F(0), h, h), (h, F(0), h), (h, h, F(0))]
    raise ValueError(f"unsupported Lagrange degree {degree}")


def lagrange_basis(degree: int):
    """Barycentric Lagrange basis matching :func:`lagrange_nodes` ordering."""
    lam = [RatCombo.lam(j) for j in range(3)]
    if degree == 1:
        return lam
    if degree == 2:
        vertex = [2 * (l * l) - l for l in lam]
        edge = [4 * (lam[(j + 1) % 3] * lam[(j + 2) % 3]) for j in range(3)]
        return vertex + edge
    raise ValueError(f"unsupported Lagrange degree {degree}")


def rhs_moments(degree: int, basis, cache: MemoCache | None = None) -> np.ndarray:
    """Moment matrix (J, L) of the degree-r Lagrange basis against `basis`."""
    phi = lagrange_basis(degree)
    return moment_tensor(phi, list(basis), cache)


def assemble_matrix(l2g: np.ndarray, local: np.ndarray, ndof: int) -> sp.csr_matrix:
    """Scatter per-element dense blocks into a global sparse matrix.

    l2g is (p, L), local is (p, L, L); duplicate triplets are accumulated by
    the COO -> CSR conversion in a fixed order, so assembly is deterministic.
    """
    p, L = l2g.shape
    if l2g.min() < 0 or l2g.max() >= ndof:
        raise IndexError("dof index out of range")
    rows = np.repeat(l2g, L, axis=1).ravel()
    cols = np.tile(l2g, (1, L)).ravel()
    mat = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(ndof, ndof))
    return mat.tocsr()


def assemble_vector(l2g: np.ndarray, local: np.ndarray, ndof: int) -> np.ndarray:
    out = np.zeros(ndof)
    np.add.at(out, l2g.ravel(), local.ravel())
    return out
