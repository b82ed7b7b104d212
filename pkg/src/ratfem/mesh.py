"""Conforming triangulations: coarse domains, red refinement, newest-vertex
bisection with Dörfler marking, and per-element affine geometry.

Data layout follows the usual c4n/n4e/n4s/s4e convention: vertex coordinates,
element vertex triples, edge vertex pairs (sorted ascending), and the
element-to-edge table with edge j opposite local vertex j.  Every edge carries
one global unit normal (the 90-degree clockwise rotation of the unit tangent
from its lower- to its higher-numbered vertex) so that edge degrees of freedom
are single-valued across neighbouring elements.

The refinement edge for newest-vertex bisection is the edge between the first
two vertices of each element row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class DegenerateElementError(ValueError):
    pass


class DegenerateBarycenterError(ValueError):
    pass


class MeshFormatError(ValueError):
    pass


class Triangulation:
    """Immutable conforming triangulation of a polygonal domain."""

    def __init__(self, c4n, n4e):
        self.c4n = np.asarray(c4n, dtype=float)
        self.n4e = np.asarray(n4e, dtype=int)
        if self.c4n.ndim != 2 or self.c4n.shape[1] != 2:
            raise MeshFormatError("c4n must be (m, 2)")
        if self.n4e.ndim != 2 or self.n4e.shape[1] != 3:
            raise MeshFormatError("n4e must be (p, 3)")
        self._check_orientation()
        self._build_edges()
        self.c4n.setflags(write=False)
        self.n4e.setflags(write=False)

    # -- construction helpers -------------------------------------------------

    def _check_orientation(self):
        v = self.c4n[self.n4e]
        det = ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
               - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1]))
        if np.any(det <= 0):
            bad = int(np.argmin(det))
            raise DegenerateElementError(
                f"element {bad} not positively oriented (det={det[bad]})")

    def _build_edges(self):
        edge_index: dict = {}
        edges = []
        count = []
        p = self.n4e.shape[0]
        s4e = np.empty((p, 3), dtype=int)
        for e in range(p):
            tri = self.n4e[e]
            for j in range(3):
                a, b = tri[(j + 1) % 3], tri[(j + 2) % 3]
                key = (a, b) if a < b else (b, a)
                idx = edge_index.get(key)
                if idx is None:
                    idx = edge_index[key] = len(edges)
                    edges.append(key)
                    count.append(0)
                count[idx] += 1
                s4e[e, j] = idx
        self.n4s = np.array(edges, dtype=int)
        self.s4e = s4e
        counts = np.array(count)
        if np.any(counts > 2):
            raise MeshFormatError("edge shared by more than two elements")
        self.boundary_edge = counts == 1
        self.boundary_vertex = np.zeros(self.c4n.shape[0], dtype=bool)
        for (a, b), is_bd in zip(self.n4s, self.boundary_edge):
            if is_bd:
                self.boundary_vertex[a] = True
                self.boundary_vertex[b] = True
        tang = self.c4n[self.n4s[:, 1]] - self.c4n[self.n4s[:, 0]]
        norms = np.linalg.norm(tang, axis=1)
        tang = tang / norms[:, None]
        # global normal: clockwise rotation of the min->max tangent
        self.normal4s = np.column_stack([tang[:, 1], -tang[:, 0]])
        self.tangent4s = tang
        self.normal4s.setflags(write=False)
        self.tangent4s.setflags(write=False)

    # -- invariants and queries -----------------------------------------------

    @property
    def num_vertices(self) -> int:
        return self.c4n.shape[0]

    @property
    def num_elements(self) -> int:
        return self.n4e.shape[0]

    @property
    def num_edges(self) -> int:
        return self.n4s.shape[0]

    def areas(self) -> np.ndarray:
        v = self.c4n[self.n4e]
        det = ((v[:, 1, 0] - v[:, 0, 0]) * (v[:, 2, 1] - v[:, 0, 1])
               - (v[:, 2, 0] - v[:, 0, 0]) * (v[:, 1, 1] - v[:, 0, 1]))
        return det / 2.0

    def midpoints(self) -> np.ndarray:
        return self.c4n[self.n4e].mean(axis=1)

    def min_angle(self) -> float:
        v = self.c4n[self.n4e]
        best = np.inf
        for j in range(3):
            a = v[:, (j + 1) % 3] - v[:, j]
            b = v[:, (j + 2) % 3] - v[:, j]
            cosang = np.sum(a * b, axis=1) / (
                np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            best = min(best, float(np.arccos(np.clip(cosang, -1, 1)).min()))
        return best

    def geometry_arrays(self):
        """Vectorized per-element geometry: DF (p,2,2), area (p,), G=Dlam (p,3,2)."""
        v = self.c4n[self.n4e]
        df = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
        det = df[:, 0, 0] * df[:, 1, 1] - df[:, 0, 1] * df[:, 1, 0]
        inv = np.empty_like(df)
        inv[:, 0, 0] = df[:, 1, 1]
        inv[:, 0, 1] = -df[:, 0, 1]
        inv[:, 1, 0] = -df[:, 1, 0]
        inv[:, 1, 1] = df[:, 0, 0]
        inv /= det[:, None, None]
        gref = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
        g = np.einsum("ik,ekj->eij", gref, inv)
        return df, det / 2.0, g


@dataclass
class ElementGeometry:
    """Affine data of one element: Jacobian, area, Dlam and edge frames."""

    DF: np.ndarray          # (2,2)
    area: float
    G: np.ndarray           # (3,2), rows are the physical gradients of lam_j
    outward_normals: np.ndarray  # (3,2), edge j opposite vertex j
    tangents: np.ndarray         # (3,2), rotated outward normals


def element_geometry(t: Triangulation, e: int) -> ElementGeometry:
    v = t.c4n[t.n4e[e]]
    df = np.column_stack([v[1] - v[0], v[2] - v[0]])
    det = float(np.linalg.det(df))
    scale = max(np.linalg.norm(v[1] - v[0]), np.linalg.norm(v[2] - v[0]))
    if abs(det) < 1e-14 * scale ** 2:
        raise DegenerateElementError(f"element {e} is degenerate")
    g = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]]) @ np.linalg.inv(df)
    # outward normal of edge f_j is the negative normalized gradient of lam_j
    outward = -g / np.linalg.norm(g, axis=1)[:, None]
    rot_t = np.array([[0.0, -1.0], [1.0, 0.0]])   # R^T for tau = R^T nu
    tangents = outward @ rot_t.T
    return ElementGeometry(df, det / 2.0, g, outward, tangents)


# -- coarse meshes -------------------------------------------------------------

def unit_square_mesh() -> Triangulation:
    """Two-triangle mesh of (0,1)^2; refinement edges on the diagonal."""
    c4n = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]
    n4e = [[2, 0, 1], [0, 2, 3]]
    return Triangulation(c4n, n4e)


def lshape_mesh() -> Triangulation:
    """Six-triangle mesh of (-1,1)^2 minus [0,1)^2, reentrant corner at 0."""
    c4n = [[-1.0, -1.0], [0.0, -1.0], [1.0, -1.0],
           [-1.0, 0.0], [0.0, 0.0], [1.0, 0.0],
           [-1.0, 1.0], [0.0, 1.0]]
    n4e = [[4, 0, 1], [0, 4, 3],
           [5, 1, 2], [1, 5, 4],
           [7, 3, 4], [3, 7, 6]]
    return Triangulation(c4n, n4e)


def domain_area(t: Triangulation) -> float:
    return float(t.areas().sum())


# -- refinement ----------------------------------------------------------------

def refine_uniform(t: Triangulation) -> Triangulation:
    """Red refinement: each triangle splits into four congruent children."""
    coords = [tuple(p) for p in t.c4n]
    mid_of_edge = {}
    m = t.num_vertices
    new_coords = list(coords)
    for idx, (a, b) in enumerate(t.n4s):
        mid_of_edge[idx] = m + idx
        new_coords.append(tuple((t.c4n[a] + t.c4n[b]) / 2.0))
    children = []
    for e in range(t.num_elements):
        v0, v1, v2 = t.n4e[e]
        m12 = mid_of_edge[t.s4e[e, 0]]   # opposite v0: edge (v1, v2)
        m02 = mid_of_edge[t.s4e[e, 1]]
        m01 = mid_of_edge[t.s4e[e, 2]]
        children += [[v0, m01, m02], [m01, v1, m12],
                     [m02, m12, v2], [m12, m02, m01]]
    return Triangulation(np.array(new_coords), np.array(children))


def dorfler_mark(eta2, theta: float):
    """Greedy minimal set carrying a theta-fraction of the total indicator.

    Ties are broken toward the lower element index via a stable sort.
    """
    if not 0 < theta <= 1:
        raise ValueError(f"theta must be in (0, 1], got {theta}")
    eta2 = np.asarray(eta2, dtype=float)
    order = np.argsort(-eta2, kind="stable")
    total = eta2.sum()
    acc = 0.0
    marked = []
    for e in order:
        if acc >= theta * total:
            break
        marked.append(int(e))
        acc += eta2[e]
    return marked


def grading_indicator(t: Triangulation) -> np.ndarray:
    """eta^2(T) = |mid(T)|^-2 |T|^(5/7), grading toward the origin."""
    mid = t.midpoints()
    r2 = np.sum(mid ** 2, axis=1)
    if np.any(r2 == 0.0):
        raise DegenerateBarycenterError("element barycenter at the origin")
    return r2 ** -1 * t.areas() ** (5.0 / 7.0)


def refine_bisect(t: Triangulation, marked) -> Triangulation:
    """Newest-vertex bisection of the marked elements with conforming closure.

    The refinement edge of element (a, b, c) is (a, b).  Closure iterates
    until every element with any marked edge also has its refinement edge
    marked; bisection then recurses into children whose refinement edges are
    marked parent edges.
    """
    marked = set(int(e) for e in marked)
    if not marked:
        return Triangulation(t.c4n.copy(), t.n4e.copy())

    def edge_key(a, b):
        return (a, b) if a < b else (b, a)

    marked_edges = set()
    for e in marked:
        a, b, _ = t.n4e[e]
        marked_edges.add(edge_key(a, b))

    # conforming closure on refinement edges
    changed = True
    while changed:
        changed = False
        for e in range(t.num_elements):
            a, b, c = t.n4e[e]
            if (edge_key(b, c) in marked_edges or edge_key(c, a) in marked_edges) \
                    and edge_key(a, b) not in marked_edges:
                marked_edges.add(edge_key(a, b))
                changed = True

    new_coords = [tuple(p) for p in t.c4n]
    midpoint_index: dict = {}

    def midpoint(a, b):
        key = edge_key(a, b)
        idx = midpoint_index.get(key)
        if idx is None:
            idx = midpoint_index[key] = len(new_coords)
            new_coords.append(tuple((t.c4n[a] + t.c4n[b]) / 2.0))
        return idx

    children = []

    def split(a, b, c, allow):
        # bisect (a,b,c) at the midpoint of (a,b) when marked; children keep
        # the opposite original edges as their refinement edges
        if edge_key(a, b) in allow:
            m = midpoint(a, b)
            split(c, a, m, allow)
            split(b, c, m, allow)
        else:
            children.append([a, b, c])

    for e in range(t.num_elements):
        a, b, c = t.n4e[e]
        # only the parent's own edges can be marked; grandchildren edges never are
        split(a, b, c, marked_edges)

    return Triangulation(np.array(new_coords), np.array(children))


# -- text format ----------------------------------------------------------------

def dump_mesh(t: Triangulation) -> str:
    lines = [f"nodes {t.num_vertices} elements {t.num_elements} edges {t.num_edges}"]
    for i in range(t.num_vertices):
        x, y = t.c4n[i]
        lines.append(f"{float(x)!r} {float(y)!r} {int(t.boundary_vertex[i])}")
    for tri in t.n4e:
        lines.append(f"{tri[0]} {tri[1]} {tri[2]}")
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> Triangulation:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    head = lines[0].split()
    if len(head) < 6 or head[0] != "nodes" or head[2] != "elements":
        raise MeshFormatError(f"bad header: {lines[0]!r}")
    m, p = int(head[1]), int(head[3])
    if len(lines) < 1 + m + p:
        raise MeshFormatError("truncated mesh file")
    coords = []
    for ln in lines[1:1 + m]:
        parts = ln.split()
        coords.append([float(parts[0]), float(parts[1])])
    elems = []
    for ln in lines[1 + m:1 + m + p]:
        parts = ln.split()
        elems.append([int(parts[0]), int(parts[1]), int(parts[2])])
    return Triangulation(np.array(coords), np.array(elems))
