"""Lowest-order Guzman-Neilan mixed element (full and reduced) for Stokes.

Velocity basis: the six P1 hat fields lam_i e_1, lam_i e_2, plus the curls of
six scalar potentials (three cubic differences and three rational bubbles).
Pressure space: piecewise constants.  Discretely divergence-free velocities
are exactly divergence-free because the divergence of every basis field is
elementwise constant (P1 part) or identically zero (curl part).

Degrees of freedom: vector point values at vertices, then normal and
tangential components at edge midpoints, both taken with the global per-edge
frames so they are single-valued across neighbours.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .fecore import assemble_matrix, assemble_vector, lagrange_nodes, rhs_moments
from .mesh import Triangulation
from .quadrature import (gauss_rule, gradient_values, hessian_values,
                         integral_mean_combo)
from .ratfun import RatCombo
from .zienkiewicz import zienkiewicz_basis

ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])   # curl g = ROT grad g

_HALF = Fraction(1, 2)
_VERTS = [(Fraction(1), Fraction(0), Fraction(0)),
          (Fraction(0), Fraction(1), Fraction(0)),
          (Fraction(0), Fraction(0), Fraction(1))]
_MIDS = [(Fraction(0), _HALF, _HALF),
         (_HALF, Fraction(0), _HALF),
         (_HALF, _HALF, Fraction(0))]


def stream_potentials():
    """The six scalar potentials whose curls extend P1^2 to the velocity space."""
    return zienkiewicz_basis()[6:12]


@dataclass(frozen=True)
class GNTables:
    rho: list
    Rhat: np.ndarray      # (6,6,3,3,3,3) Hessian-product means, R_T layout
    Mhat: np.ndarray      # (6,6,2,3,3,3) P1-gradient x Hessian means
    That_gv: np.ndarray   # (3,6,3) potential lam-gradients at vertices
    That_ge: np.ndarray   # (3,6,3) potential lam-gradients at edge midpoints
    val_mid: np.ndarray   # (3,6,2) P1 vector basis values at edge midpoints
    bhat1: np.ndarray     # (J,3) Lagrange x lam moments
    bhat2: np.ndarray     # (J,3,6) Lagrange x potential-gradient moments


_TABLES: GNTables | None = None


def get_tables() -> GNTables:
    global _TABLES
    if _TABLES is None:
        _TABLES = _compute_tables()
    return _TABLES


def _compute_tables() -> GNTables:
    rho = stream_potentials()
    grads = [r.grad() for r in rho]
    hess = [r.hessian() for r in rho]

    # means of H_r[i,k] * H_s[j,l]; entries depend on the unordered pairs
    pairs = [(i, k) for i in range(3) for k in range(i, 3)]
    prod_mean: dict = {}
    for r in range(6):
        for s in range(r, 6):
            for (i, k) in pairs:
                for (j, l) in pairs:
                    val = integral_mean_combo(hess[r][i][k] * hess[s][j][l]).to_float()
                    prod_mean[(r, i, k, s, j, l)] = val
                    prod_mean[(s, j, l, r, i, k)] = val

    def pm(r, i, k, s, j, l):
        i, k = min(i, k), max(i, k)
        j, l = min(j, l), max(j, l)
        return prod_mean[(r, i, k, s, j, l)]

    Rhat = np.empty((6, 6, 3, 3, 3, 3))
    for r in range(6):
        for s in range(6):
            for i in range(3):
                for j in range(3):
                    for k in range(3):
                        for l in range(3):
                            Rhat[r, s, i, j, k, l] = pm(r, i, k, s, j, l)

    mean_h = np.empty((6, 3, 3))
    for s in range(6):
        for j in range(3):
            for l in range(j, 3):
                mean_h[s, j, l] = mean_h[s, l, j] = \
                    integral_mean_combo(hess[s][j][l]).to_float()

    # P1 field r is lam_{r mod 3} e_{r//3}; its gradient is the constant
    # delta_{i, r//3} delta_{k, r mod 3}, so Mhat is a placed copy of mean_h
    Mhat = np.zeros((6, 6, 2, 3, 3, 3))
    for r in range(6):
        comp, node = divmod(r, 3)
        for s in range(6):
            Mhat[r, s, comp, :, node, :] = mean_h[s]

    That_gv = np.array([[[float(grads[s][k].evaluate(v)) for k in range(3)]
                         for s in range(6)] for v in _VERTS])
    That_ge = np.array([[[float(grads[s][k].evaluate(mid)) for k in range(3)]
                         for s in range(6)] for mid in _MIDS])

    val_mid = np.zeros((3, 6, 2))
    for i, mid in enumerate(_MIDS):
        for r in range(6):
            comp, node = divmod(r, 3)
            val_mid[i, r, comp] = float(mid[node])

    lam = [RatCombo.lam(j) for j in range(3)]
    bhat1 = rhs_moments(2, lam)
    from .fecore import lagrange_basis
    phi = lagrange_basis(2)
    bhat2 = np.empty((len(phi), 3, 6))
    for j, ph in enumerate(phi):
        for k in range(3):
            for s in range(6):
                bhat2[j, k, s] = integral_mean_combo(ph * grads[s][k]).to_float()

    return GNTables(rho, Rhat, Mhat, That_gv, That_ge, val_mid, bhat1, bhat2)


# -- local matrices --------------------------------------------------------------

def local_matrices(area, G, GG, tables=None):
    """Batched stiffness A_T (p,12,12) and divergence vector B_T (p,12)."""
    tables = tables or get_tables()
    p = G.shape[0]
    RGt = np.einsum("ab,ekb->eak", ROT, G)          # (p,2,3)
    A_T = np.zeros((p, 12, 12))
    A_T[:, 0:3, 0:3] = area[:, None, None] * GG
    A_T[:, 3:6, 3:6] = A_T[:, 0:3, 0:3]
    Q = np.einsum("eij,ekl->eijkl", GG, GG).reshape(p, 81)
    A_T[:, 6:12, 6:12] = area[:, None, None] * (
        Q @ tables.Rhat.reshape(36, 81).T).reshape(p, 6, 6)
    W = np.einsum("eij,ekl->eijkl", RGt, GG).reshape(p, 54)
    M = area[:, None, None] * (W @ tables.Mhat.reshape(36, 54).T).reshape(p, 6, 6)
    A_T[:, 0:6, 6:12] = M
    A_T[:, 6:12, 0:6] = M.transpose(0, 2, 1)

    B_T = np.zeros((p, 12))
    B_T[:, 0:3] = area[:, None] * G[:, :, 0]
    B_T[:, 3:6] = area[:, None] * G[:, :, 1]
    return A_T, B_T


def local_vandermonde(G, normals, tangents, tables=None) -> np.ndarray:
    """Batched 12x12 Vandermonde of the velocity dofs."""
    tables = tables or get_tables()
    p = G.shape[0]
    RGt = np.einsum("ab,ekb->eak", ROT, G)
    V = np.empty((p, 12, 12))
    V[:, 0:6, 0:6] = np.eye(6)[None, :, :]
    V[:, 6:9, 0:6] = np.einsum("eic,irc->eir", normals, tables.val_mid)
    V[:, 9:12, 0:6] = np.einsum("eic,irc->eir", tangents, tables.val_mid)
    Tgv = np.einsum("eck,isk->eisc", RGt, tables.That_gv)   # curl rho at vertices
    V[:, 0:3, 6:12] = Tgv[..., 0]
    V[:, 3:6, 6:12] = Tgv[..., 1]
    Tge = np.einsum("eck,isk->eisc", RGt, tables.That_ge)
    V[:, 6:9, 6:12] = np.einsum("eic,eisc->eis", normals, Tge)
    V[:, 9:12, 6:12] = np.einsum("eic,eisc->eis", tangents, Tge)
    return V


class ZeroBubbleTangentialTraceError(ArithmeticError):
    """A curl bubble's own midpoint tangential trace vanished."""


def reduced_coefficients(V, tangents) -> np.ndarray:
    """Bubble-curl corrections making the tangential edge traces affine."""
    p = V.shape[0]
    diag = np.stack([V[:, 9 + j, 9 + j] for j in range(3)], axis=1)
    if np.any(np.abs(diag) < 1e-14):
        raise ZeroBubbleTangentialTraceError(
            "curl-bubble tangential trace vanished at an edge midpoint")
    gamma = np.empty((p, 3, 3))
    for j in range(3):
        i1, i2 = (j + 1) % 3, (j + 2) % 3
        avg = 0.5 * (
            tangents[:, j, 0, None] * (V[:, i1, 6:9] + V[:, i2, 6:9])
            + tangents[:, j, 1, None] * (V[:, 3 + i1, 6:9] + V[:, 3 + i2, 6:9]))
        gamma[:, j, :] = (V[:, 9 + j, 6:9] - avg) / V[:, 9 + j, 9 + j, None]
    return gamma


def shape_coefficients(V, variant, tangents=None) -> np.ndarray:
    if variant == "full":
        return np.linalg.inv(V)
    gamma = reduced_coefficients(V, tangents)
    p = V.shape[0]
    red = np.zeros((p, 12, 9))
    red[:, :9, :] = np.eye(9)[None, :, :]
    red[:, 9:12, 6:9] = -gamma
    return red @ np.linalg.inv(V[:, :9, :9])


# -- global system ---------------------------------------------------------------

@dataclass
class StokesSystem:
    tria: Triangulation
    variant: str
    ndof: int
    l2g: np.ndarray
    free: np.ndarray
    A: "object"            # velocity stiffness, csr (ndof, ndof)
    B: "object"            # divergence matrix, csr (ndof, p)
    b: np.ndarray
    coeffs: np.ndarray     # (p, 12, L)
    areas: np.ndarray


def dof_layout(tria: Triangulation, variant: str):
    m, n = tria.num_vertices, tria.num_edges
    if variant == "full":
        ndof = 2 * m + 2 * n
        l2g = np.hstack([tria.n4e, m + tria.n4e,
                         2 * m + tria.s4e, 2 * m + n + tria.s4e])
    elif variant == "reduced":
        ndof = 2 * m + n
        l2g = np.hstack([tria.n4e, m + tria.n4e, 2 * m + tria.s4e])
    else:
        raise ValueError(f"unknown variant {variant!r}")
    constrained = np.zeros(ndof, dtype=bool)
    bv = np.where(tria.boundary_vertex)[0]
    bs = np.where(tria.boundary_edge)[0]
    constrained[bv] = True
    constrained[m + bv] = True
    constrained[2 * m + bs] = True
    if variant == "full":
        constrained[2 * m + n + bs] = True
    return ndof, l2g, ~constrained


_GAUSS_EVAL_CACHE: dict = {}


def _gauss_tables(n: int):
    """Potential gradients/Hessians and P2 values at the rule points."""
    cached = _GAUSS_EVAL_CACHE.get(n)
    if cached is None:
        rule = gauss_rule(n)
        bary = rule.bary_points()
        rho = get_tables().rho
        Gq = gradient_values(rho, bary)
        Hq = hessian_values(rho, bary)
        cached = _GAUSS_EVAL_CACHE[n] = (rule, bary, Gq, Hq)
    return cached


def assemble_stokes(tria: Triangulation, f=None, variant: str = "full",
                    quadrature="exact", load_degree: int = 2) -> StokesSystem:
    """Assemble the Stokes saddle system for the Guzman-Neilan pair.

    Under an integer `quadrature` every local integral (stiffness blocks,
    divergence entries and load) is replaced by the n-point tensorized Gauss
    rule applied to the physical integrands; the Vandermonde stays exact.
    """
    tables = get_tables()
    _, area, G = tria.geometry_arrays()
    GG = np.einsum("eic,ejc->eij", G, G)
    normals = tria.normal4s[tria.s4e]
    tangents = tria.tangent4s[tria.s4e]
    V = local_vandermonde(G, normals, tangents, tables)
    C = shape_coefficients(V, variant, tangents)
    ndof, l2g, free = dof_layout(tria, variant)
    p = tria.num_elements

    if quadrature == "exact":
        A_T, B_T = local_matrices(area, G, GG, tables)
    else:
        n = int(quadrature)
        rule, bary, Gq, Hq = _gauss_tables(n)
        w = rule.weights
        wsum = w.sum()
        A_T = np.zeros((p, 12, 12))
        A_T[:, 0:3, 0:3] = 2.0 * wsum * area[:, None, None] * GG
        A_T[:, 3:6, 3:6] = A_T[:, 0:3, 0:3]
        B_T = np.zeros((p, 12))
        B_T[:, 0:3] = 2.0 * wsum * area[:, None] * G[:, :, 0]
        B_T[:, 3:6] = 2.0 * wsum * area[:, None] * G[:, :, 1]
        chunk = max(1, 2 ** 22 // (len(w) * 24))
        for lo in range(0, p, chunk):
            hi = min(lo + chunk, p)
            Gc, ac = G[lo:hi], area[lo:hi]
            # physical Hessians of the potentials at the rule points
            S = np.einsum("eia,qsik,ekb->eqsab", Gc, Hq, Gc, optimize=True)
            Sw = S * w[None, :, None, None, None]
            A_T[lo:hi, 6:12, 6:12] = 2.0 * ac[:, None, None] * np.einsum(
                "eqrab,eqsab->ers", Sw, S, optimize=True)
            RS = np.empty_like(S)   # R @ S pointwise
            RS[..., 0, :] = S[..., 1, :]
            RS[..., 1, :] = -S[..., 0, :]
            M = np.zeros((hi - lo, 6, 6))
            for r in range(6):
                comp, node = divmod(r, 3)
                M[:, r, :] = 2.0 * ac[:, None] * np.einsum(
                    "ec,eqsc,q->es", Gc[:, node, :], RS[:, :, :, comp, :], w)
            A_T[lo:hi, 0:6, 6:12] = M
            A_T[lo:hi, 6:12, 0:6] = M.transpose(0, 2, 1)
            # div curl rho vanishes pointwise; the rule sees only roundoff
            div_curl = S[..., 1, 0] - S[..., 0, 1]
            B_T[lo:hi, 6:12] = 2.0 * ac[:, None] * np.einsum(
                "eqs,q->es", div_curl, w)

    A_loc = np.einsum("eri,ers,esj->eij", C, A_T, C, optimize=True)
    A = assemble_matrix(l2g, A_loc, ndof)
    bt = np.einsum("eri,er->ei", C, B_T)
    rows = l2g.ravel()
    cols = np.repeat(np.arange(p), l2g.shape[1])
    B = sp.coo_matrix((bt.ravel(), (rows, cols)), shape=(ndof, p)).tocsr()

    b = np.zeros(ndof)
    if f is not None:
        if quadrature == "exact":
            nodes = np.array([[float(x) for x in pt]
                              for pt in lagrange_nodes(load_degree)])
            verts = tria.c4n[tria.n4e]
            pts = np.einsum("jk,ekc->ejc", nodes, verts)
            fvals = np.array([[f(x, y) for (x, y) in elem_pts]
                              for elem_pts in pts])
            if load_degree == 2:
                bhat1, bhat2 = tables.bhat1, tables.bhat2
            else:
                lam = [RatCombo.lam(j) for j in range(3)]
                bhat1 = rhs_moments(load_degree, lam)
                from .fecore import lagrange_basis
                phi = lagrange_basis(load_degree)
                grads = [r.grad() for r in tables.rho]
                bhat2 = np.array([[[integral_mean_combo(ph * grads[s][k]).to_float()
                                    for s in range(6)] for k in range(3)]
                                  for ph in phi])
            b_T = np.empty((p, 12))
            b_T[:, 0:3] = np.einsum("jn,ej->en", bhat1, fvals[:, :, 0])
            b_T[:, 3:6] = np.einsum("jn,ej->en", bhat1, fvals[:, :, 1])
            b2 = np.einsum("ekm,jks->emjs", G, bhat2)
            b_T[:, 6:12] = (np.einsum("ejs,ej->es", b2[:, 1], fvals[:, :, 0])
                            - np.einsum("ejs,ej->es", b2[:, 0], fvals[:, :, 1]))
        else:
            n = int(quadrature)
            rule, bary, Gq, Hq = _gauss_tables(n)
            w = rule.weights
            verts = tria.c4n[tria.n4e]
            pts = np.einsum("qk,ekc->eqc", bary, verts)
            fq = np.array([[f(x, y) for (x, y) in elem_pts]
                           for elem_pts in pts])      # (p, Q, 2)
            RGt = np.einsum("ab,ekb->eak", ROT, G)
            curlq = np.einsum("eck,qsk->eqsc", RGt, Gq)
            b_T = np.empty((p, 12))
            b_T[:, 0:3] = 2.0 * np.einsum("eq,q,qn->en", fq[:, :, 0], w, bary)
            b_T[:, 3:6] = 2.0 * np.einsum("eq,q,qn->en", fq[:, :, 1], w, bary)
            b_T[:, 6:12] = 2.0 * np.einsum("eqc,eqsc,q->es", fq, curlq, w)
        b = assemble_vector(l2g, area[:, None] * np.einsum(
            "eri,er->ei", C, b_T), ndof)

    return StokesSystem(tria, variant, ndof, l2g, free, A, B, b, C, area)


def solve_stokes(system: StokesSystem):
    """Velocity and mean-zero piecewise-constant pressure of the saddle system.

    One pressure value is pinned during the solve (kernel gauge) and the
    result is shifted to zero mean afterwards.
    """
    from .solvers import sym_indef_solve
    free = system.free
    nf = int(free.sum())
    p = system.B.shape[1]
    A = system.A[free][:, free]
    B = system.B[free][:, 1:]          # pin pressure dof 0
    K = sp.bmat([[A, -B], [-B.T, None]], format="csc")
    rhs = np.concatenate([system.b[free], np.zeros(p - 1)])
    sol = sym_indef_solve(K, rhs)
    u = np.zeros(system.ndof)
    u[free] = sol[:nf]
    pressure = np.concatenate([[0.0], sol[nf:]])
    total = float(system.areas.sum())
    pressure -= float(system.areas @ pressure) / total
    return u, pressure


# -- measurements ------------------------------------------------------------------

def grad_norm(system: StokesSystem, u: np.ndarray) -> float:
    """H1 seminorm u' A u taken with this system's stiffness.

    Pass a system assembled with exact quadrature so the measurement does not
    inherit the defect of an inexact solve.
    """
    return float(np.sqrt(max(u @ (system.A @ u), 0.0)))


def divergence_l2(exact_system: StokesSystem, u: np.ndarray) -> float:
    """L2 norm of div u_h; the elementwise divergence is constant."""
    means = (exact_system.B.T @ u) / exact_system.areas
    return float(np.sqrt(np.sum(exact_system.areas * means ** 2)))


def divergence_pointwise(system: StokesSystem, e: int, u: np.ndarray, bary_pts):
    """div u_h at barycentric points of element e, evaluated literally."""
    tables = get_tables()
    _, _, G = system.tria.geometry_arrays()
    w = system.coeffs[e] @ u[system.l2g[e]]
    out = []
    for pt in bary_pts:
        lam = tuple(float(x) for x in pt)
        val = 0.0
        for r in range(6):
            comp, node = divmod(r, 3)
            val += w[r] * G[e][node, comp]
        for s in range(6):
            H = np.array([[tables.rho[s].hessian()[i][j].eval_float(lam)
                           for j in range(3)] for i in range(3)])
            Sp = G[e].T @ H @ G[e]
            val += w[6 + s] * (Sp[1, 0] - Sp[0, 1])
        out.append(val)
    return np.array(out)


def velocity_eval(system: StokesSystem, e: int, u: np.ndarray, bary_pts):
    """Velocity vectors at barycentric points of element e."""
    tables = get_tables()
    _, _, G = system.tria.geometry_arrays()
    w = system.coeffs[e] @ u[system.l2g[e]]
    out = []
    for pt in bary_pts:
        lam = tuple(float(x) for x in pt)
        vec = np.zeros(2)
        for r in range(6):
            comp, node = divmod(r, 3)
            vec[comp] += w[r] * lam[node]
        for s in range(6):
            glam = np.array([tables.rho[s].grad()[k].eval_float(lam)
                             for k in range(3)])
            vec += w[6 + s] * (ROT @ (G[e].T @ glam))
        out.append(vec)
    return np.array(out)
