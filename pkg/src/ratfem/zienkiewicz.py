"""Singular (and reduced singular) Zienkiewicz element for the biharmonic
problem: local bases, exact reference tensors, Vandermonde basis change,
global assembly with clamped-plate constraints, and the eigenvalue solve.

Local basis ordering: six quadratic monomials lam2^2, lam1*lam2, lam1^2,
lam0*lam2, lam0*lam1, lam0^2; three cubic differences lam_j^2 lam_{j+1} -
lam_j lam_{j+1}^2; three rational edge bubbles.  Degrees of freedom are point
values, the two gradient components at the vertices, and normal derivatives
at edge midpoints (global edge normals).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .fecore import assemble_matrix, assemble_vector, lagrange_nodes, rhs_moments
from .mesh import Triangulation
from .quadrature import (combo_values, gauss_rule, hessian_values,
                         integral_mean_combo)
from .ratfun import RatCombo, bubble

_HALF = Fraction(1, 2)
_VERTS = [(Fraction(1), Fraction(0), Fraction(0)),
          (Fraction(0), Fraction(1), Fraction(0)),
          (Fraction(0), Fraction(0), Fraction(1))]
_MIDS = [(Fraction(0), _HALF, _HALF),
         (_HALF, Fraction(0), _HALF),
         (_HALF, _HALF, Fraction(0))]


def zienkiewicz_basis():
    """The 12 local basis functions of the singular Zienkiewicz space."""
    lam = [RatCombo.lam(j) for j in range(3)]
    quad = [lam[2] * lam[2], lam[1] * lam[2], lam[1] * lam[1],
            lam[0] * lam[2], lam[0] * lam[1], lam[0] * lam[0]]
    cubic = [lam[j] * lam[j] * lam[(j + 1) % 3]
             - lam[j] * lam[(j + 1) % 3] * lam[(j + 1) % 3] for j in range(3)]
    bubbles = [bubble(j) for j in range(3)]
    return quad + cubic + bubbles


@dataclass(frozen=True)
class ZienkiewiczTables:
    basis: list
    hessians: list
    Ahat: np.ndarray     # (12,12,3,3,3,3) means of Hessian-entry products
    Mhat: np.ndarray     # (12,12) means of value products
    That_v: np.ndarray   # (3,12) values at vertices
    That_gv: np.ndarray  # (3,12,3) lam-gradients at vertices
    That_ge: np.ndarray  # (3,12,3) lam-gradients at edge midpoints
    bhat: np.ndarray     # (6,12) P2 Lagrange moments


_TABLES: ZienkiewiczTables | None = None


def get_tables() -> ZienkiewiczTables:
    global _TABLES
    if _TABLES is None:
        _TABLES = _compute_tables()
    return _TABLES


def _compute_tables() -> ZienkiewiczTables:
    basis = zienkiewicz_basis()
    grads = [b.grad() for b in basis]
    hess = [b.hessian() for b in basis]

    pairs = [(i, j) for i in range(3) for j in range(i, 3)]
    Ahat = np.empty((12, 12, 3, 3, 3, 3))
    for r in range(12):
        for s in range(r, 12):
            for (i, j) in pairs:
                for (k, l) in pairs:
                    val = integral_mean_combo(hess[r][i][j] * hess[s][k][l]).to_float()
                    for ii, jj in {(i, j), (j, i)}:
                        for kk, ll in {(k, l), (l, k)}:
                            Ahat[r, s, ii, jj, kk, ll] = val
                            Ahat[s, r, kk, ll, ii, jj] = val

    Mhat = np.empty((12, 12))
    for r in range(12):
        for s in range(r, 12):
            Mhat[r, s] = Mhat[s, r] = integral_mean_combo(basis[r] * basis[s]).to_float()

    That_v = np.array([[float(b.evaluate(v)) for b in basis] for v in _VERTS])
    That_gv = np.array([[[float(grads[r][k].evaluate(v)) for k in range(3)]
                         for r in range(12)] for v in _VERTS])
    That_ge = np.array([[[float(grads[r][k].evaluate(mid)) for k in range(3)]
                         for r in range(12)] for mid in _MIDS])
    bhat = rhs_moments(2, basis)
    return ZienkiewiczTables(basis, hess, Ahat, Mhat, That_v, That_gv,
                             That_ge, bhat)


# -- local matrices -------------------------------------------------------------

def local_stiffness(area, GG, tables=None) -> np.ndarray:
    """Batched A_T = |T| * Ahat : (GG x GG) with GG = G G^T per element."""
    tables = tables or get_tables()
    p = GG.shape[0]
    Q = np.einsum("eij,ekl->eijkl", GG, GG).reshape(p, 81)
    flat = tables.Ahat.reshape(144, 81)
    return area[:, None, None] * (Q @ flat.T).reshape(p, 12, 12)


def local_vandermonde_batch(G, normals, tables=None) -> np.ndarray:
    """Batched 12x12 Vandermonde: values, physical gradients, edge normals."""
    tables = tables or get_tables()
    p = G.shape[0]
    V = np.empty((p, 12, 12))
    V[:, 0:3, :] = tables.That_v[None, :, :]
    Tgv = np.einsum("ekc,irk->eirc", G, tables.That_gv)
    V[:, 3:6, :] = Tgv[..., 0]
    V[:, 6:9, :] = Tgv[..., 1]
    Tge = np.einsum("ekc,irk->eirc", G, tables.That_ge)
    V[:, 9:12, :] = np.einsum("eic,eirc->eir", normals, Tge)
    return V


class ZeroBubbleNormalDerivativeError(ArithmeticError):
    """A bubble's own midpoint normal derivative vanished (degenerate element)."""


def reduced_coefficients(V, normals) -> np.ndarray:
    """Bubble corrections making the edge normal derivative affine.

    For each cubic column k = 7, 8, 9 the correction weight on bubble j is
    (normal derivative at mid(f_j) minus the endpoint average) divided by the
    bubble's own midpoint normal derivative.
    """
    p = V.shape[0]
    diag = np.stack([V[:, 9 + j, 9 + j] for j in range(3)], axis=1)
    if np.any(np.abs(diag) < 1e-14):
        raise ZeroBubbleNormalDerivativeError(
            "bubble normal derivative vanished at an edge midpoint")
    gamma = np.empty((p, 3, 3))
    for j in range(3):
        i1, i2 = (j + 1) % 3, (j + 2) % 3
        avg = 0.5 * (
            normals[:, j, 0, None] * (V[:, 3 + i1, 6:9] + V[:, 3 + i2, 6:9])
            + normals[:, j, 1, None] * (V[:, 6 + i1, 6:9] + V[:, 6 + i2, 6:9]))
        gamma[:, j, :] = (V[:, 9 + j, 6:9] - avg) / V[:, 9 + j, 9 + j, None]
    return gamma


def shape_coefficients(V, variant: str, normals=None) -> np.ndarray:
    """Coefficient matrices of the nodal shape functions in the 12-basis.

    Full variant: inv(V), shape (p,12,12).  Reduced: (p,12,9) built from the
    identity on the first nine basis functions minus bubble corrections.
    """
    if variant == "full":
        return np.linalg.inv(V)
    gamma = reduced_coefficients(V, normals)
    p = V.shape[0]
    red = np.zeros((p, 12, 9))
    red[:, :9, :] = np.eye(9)[None, :, :]
    red[:, 9:12, 6:9] = -gamma
    V9inv = np.linalg.inv(V[:, :9, :9])
    return red @ V9inv


# -- global assembly ------------------------------------------------------------

@dataclass
class BiharmonicSystem:
    tria: Triangulation
    variant: str
    ndof: int
    l2g: np.ndarray       # (p, L)
    free: np.ndarray      # (ndof,) bool
    A: "object"           # csr stiffness (Laplacian products)
    M: "object"           # csr mass
    b: np.ndarray
    coeffs: np.ndarray    # (p, 12, L) shape-function coefficients


def dof_layout(tria: Triangulation, variant: str):
    m = tria.num_vertices
    if variant == "full":
        ndof = 3 * m + tria.num_edges
        l2g = np.hstack([tria.n4e, m + tria.n4e, 2 * m + tria.n4e,
                         3 * m + tria.s4e])
    elif variant == "reduced":
        ndof = 3 * m
        l2g = np.hstack([tria.n4e, m + tria.n4e, 2 * m + tria.n4e])
    else:
        raise ValueError(f"unknown variant {variant!r}")
    constrained = np.zeros(ndof, dtype=bool)
    bv = np.where(tria.boundary_vertex)[0]
    constrained[bv] = True
    constrained[m + bv] = True
    constrained[2 * m + bv] = True
    if variant == "full":
        constrained[3 * m + np.where(tria.boundary_edge)[0]] = True
    return ndof, l2g, ~constrained


_GAUSS_EVAL_CACHE: dict = {}


def _gauss_tables(n: int):
    """Basis values and lam-Hessians at the n^2 Fubini-Gauss points."""
    cached = _GAUSS_EVAL_CACHE.get(n)
    if cached is None:
        rule = gauss_rule(n)
        bary = rule.bary_points()
        tables = get_tables()
        Vq = combo_values(tables.basis, bary)
        Hq = hessian_values(tables.basis, bary)
        cached = _GAUSS_EVAL_CACHE[n] = (rule, Vq, Hq)
    return cached


def assemble_biharmonic(tria: Triangulation, f=None, variant: str = "full",
                        quadrature="exact", load_degree: int = 2) -> BiharmonicSystem:
    """Assemble stiffness (Laplacian form), mass and load for the plate problem.

    `quadrature` is "exact" or an integer n selecting the tensorized Gauss
    rule; the inexact rule replaces the stiffness and mass integrands, while
    the Vandermonde basis change stays exact (point evaluations).
    """
    tables = get_tables()
    _, area, G = tria.geometry_arrays()
    GG = np.einsum("eic,ejc->eij", G, G)
    normals = tria.normal4s[tria.s4e]
    V = local_vandermonde_batch(G, normals, tables)
    C = shape_coefficients(V, variant, normals)
    ndof, l2g, free = dof_layout(tria, variant)

    p = tria.num_elements
    if quadrature == "exact":
        A_T = local_stiffness(area, GG, tables)
        M_T = area[:, None, None] * tables.Mhat[None, :, :]
    else:
        n = int(quadrature)
        rule, Vq, Hq = _gauss_tables(n)
        w = rule.weights
        A_T = np.empty((p, 12, 12))
        chunk = max(1, 2 ** 22 // (len(w) * 12))
        for lo in range(0, p, chunk):
            hi = min(lo + chunk, p)
            # Delta b(x_q) on element e is the contraction Hq[q,r,:,:] : GG[e]
            D = np.einsum("qrij,eij->eqr", Hq, GG[lo:hi])
            Dw = D * w[None, :, None]
            A_T[lo:hi] = 2.0 * area[lo:hi, None, None] * np.matmul(
                D.transpose(0, 2, 1), Dw)
        Vw = Vq * w[:, None]
        M_T = 2.0 * area[:, None, None] * (Vw.T @ Vq)[None, :, :]

    A_loc = np.einsum("eri,ers,esj->eij", C, A_T, C, optimize=True)
    M_loc = np.einsum("eri,ers,esj->eij", C, M_T, C, optimize=True)
    A = assemble_matrix(l2g, A_loc, ndof)
    M = assemble_matrix(l2g, M_loc, ndof)

    b = np.zeros(ndof)
    if f is not None:
        nodes = np.array([[float(x) for x in pt] for pt in lagrange_nodes(load_degree)])
        verts = tria.c4n[tria.n4e]
        pts = np.einsum("jk,ekc->ejc", nodes, verts)
        fvals = np.array([[f(x, y) for (x, y) in elem_pts] for elem_pts in pts])
        if quadrature == "exact":
            bhat = tables.bhat if load_degree == 2 else rhs_moments(load_degree, tables.basis)
            b_T = np.einsum("jr,ej->er", bhat, fvals)
        else:
            n = int(quadrature)
            rule, Vq, _ = _gauss_tables(n)
            bary = rule.bary_points()
            phi = combo_values(_lagrange_combos(load_degree), bary)
            fq = np.einsum("qj,ej->eq", phi, fvals)
            b_T = 2.0 * np.einsum("eq,qr,q->er", fq, Vq, rule.weights)
        b = assemble_vector(l2g, area[:, None] * np.einsum("eri,er->ei", C, b_T), ndof)

    return BiharmonicSystem(tria, variant, ndof, l2g, free, A, M, b, C)


def _lagrange_combos(degree):
    from .fecore import lagrange_basis
    return lagrange_basis(degree)


def solve_biharmonic_eigen(system: BiharmonicSystem, tol: float = 1e-12,
                           x0: np.ndarray | None = None):
    """Smallest clamped-plate eigenpair on the free dofs; vector is padded."""
    from .solvers import gen_eig_smallest
    free = system.free
    A = system.A[free][:, free].tocsc()
    M = system.M[free][:, free].tocsc()
    lam, x = gen_eig_smallest(A, M, tol=tol,
                              x0=None if x0 is None else x0[free])
    full = np.zeros(system.ndof)
    full[free] = x
    return lam, full


def solve_biharmonic_source(system: BiharmonicSystem) -> np.ndarray:
    from .solvers import spd_solve
    free = system.free
    x = spd_solve(system.A[free][:, free].tocsc(), system.b[free])
    full = np.zeros(system.ndof)
    full[free] = x
    return full


# -- pointwise evaluation (tests, conformity checks) ----------------------------

def element_eval(system: BiharmonicSystem, e: int, u: np.ndarray, bary_pts):
    """Values and physical gradients of the global function on element e."""
    tables = get_tables()
    w = system.coeffs[e] @ u[system.l2g[e]]
    _, _, G = system.tria.geometry_arrays()
    vals, grads = [], []
    for pt in bary_pts:
        lam = tuple(float(x) for x in pt)
        vals.append(sum(float(c) * tables.basis[r].eval_float(lam)
                        for r, c in enumerate(w)))
        glam = np.array([sum(float(c) * tables.basis[r].grad()[k].eval_float(lam)
                             for r, c in enumerate(w)) for k in range(3)])
        grads.append(G[e].T @ glam)
    return np.array(vals), np.array(grads)


def hermite_psi(fun: RatCombo, vertices=None) -> float:
    """The cubic-Hermite constraint functional on one triangle.

    6 f(mid) - 2 sum_j f(v_j) + sum_k grad f(v_k) . (v_k - mid), evaluated
    with physical gradients; affine-invariant.
    """
    if vertices is None:
        vertices = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    v = np.asarray(vertices, dtype=float)
    df = np.column_stack([v[1] - v[0], v[2] - v[0]])
    G = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]) @ np.linalg.inv(df)
    mid = v.mean(axis=0)
    val = 6.0 * fun.eval_float((1 / 3, 1 / 3, 1 / 3))
    bary_verts = [(1.0, 0.0, 0.0), (0.0, 1.0, 0.0), (0.0, 0.0, 1.0)]
    grads = fun.grad()
    for j in range(3):
        val -= 2.0 * fun.eval_float(bary_verts[j])
        glam = np.array([grads[k].eval_float(bary_verts[j]) for k in range(3)])
        val += float((G.T @ glam) @ (v[j] - mid))
    return val


def nodal_interpolant(tria: Triangulation, g, grad_g, variant: str = "full"):
    """Global dof vector of a smooth function (value, gradient, edge-normal dofs)."""
    m = tria.num_vertices
    vals = np.array([g(x, y) for x, y in tria.c4n])
    grads = np.array([grad_g(x, y) for x, y in tria.c4n])
    out = [vals, grads[:, 0], grads[:, 1]]
    if variant == "full":
        mids = (tria.c4n[tria.n4s[:, 0]] + tria.c4n[tria.n4s[:, 1]]) / 2.0
        gm = np.array([grad_g(x, y) for x, y in mids])
        out.append(np.sum(gm * tria.normal4s, axis=1))
    return np.concatenate(out)
