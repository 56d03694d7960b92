"""Exact admissibility and obstruction checks.

Surfaces: a pair (surface, embedded curve) supports the singular locus of a
structure exactly when the first Stiefel-Whitney class is Poincare dual to
the curve over GF(2).  The pairing of w1 with a loop is computed by
transporting a triangle orientation along dual paths; intersection numbers
come for free because dual steps cross primal edges transversally.

Cohomology rings: integer cup-product matrices are screened for the two
class-level obstructions (a nonzero square in the middle dimension; an
isotropic nonzero class), entirely in exact arithmetic.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import sympy as sp


class TopologyError(ValueError):
    pass


# --------------------------------------------------------------------------
# triangulated surfaces
# --------------------------------------------------------------------------

def _edge(u, v):
    return (u, v) if u < v else (v, u)


class TriangulatedSurface:
    """Closed surface given by triangles; each edge must bound exactly two."""

    def __init__(self, n_vertices: int, triangles):
        self.n_vertices = int(n_vertices)
        tris = [tuple(int(v) for v in t) for t in triangles]
        for t in tris:
            if len(set(t)) != 3:
                raise TopologyError(f"degenerate triangle {t}")
            if any(not 0 <= v < self.n_vertices for v in t):
                raise TopologyError(f"vertex out of range in {t}")
        self.triangles = tris
        edge_tris: dict[tuple[int, int], list[int]] = {}
        for idx, (a, b, c) in enumerate(tris):
            for e in (_edge(a, b), _edge(b, c), _edge(c, a)):
                edge_tris.setdefault(e, []).append(idx)
        bad = {e: len(ts) for e, ts in edge_tris.items() if len(ts) != 2}
        if bad:
            raise TopologyError(f"not a closed surface: edges with wrong "
                                f"triangle count {bad}")
        self.edge_tris = edge_tris
        self.edges = sorted(edge_tris)

    @property
    def euler_characteristic(self) -> int:
        return self.n_vertices - len(self.edges) + len(self.triangles)

    def _directed_edges(self, t: int) -> list[tuple[int, int]]:
        a, b, c = self.triangles[t]
        return [(a, b), (b, c), (c, a)]

    def _orientation_mismatch(self, t1: int, t2: int, e) -> int:
        """1 iff the given triangle orders induce the same direction on e."""
        d1 = self._directed_edges(t1)
        d2 = self._directed_edges(t2)
        u, v = e
        in1 = (u, v) in d1
        in2 = (u, v) in d2
        return 1 if in1 == in2 else 0

    def _dual_tree(self):
        """BFS tree of the dual graph: parent triangle and crossed edge."""
        n = len(self.triangles)
        adj: dict[int, list[tuple[int, tuple[int, int]]]] = {i: [] for i in range(n)}
        for e, (t1, t2) in self.edge_tris.items():
            adj[t1].append((t2, e))
            adj[t2].append((t1, e))
        parent = {0: (None, None)}
        order = [0]
        for t in order:
            for (t2, e) in adj[t]:
                if t2 not in parent:
                    parent[t2] = (t, e)
                    order.append(t2)
        if len(parent) != n:
            raise TopologyError("surface is not connected")
        return parent

    def fundamental_dual_cycles(self):
        """Dual cycles generating the cycle space: one per non-tree edge.

        Each cycle is returned as a list of (t, t', crossed_edge) steps.
        """
        parent = self._dual_tree()
        tree_edges = {(_dual_key(t, p[0])) for t, p in parent.items()
                      if p[0] is not None}
        cycles = []
        for e, (t1, t2) in self.edge_tris.items():
            if t1 == t2:
                continue
            if _dual_key(t1, t2) in tree_edges:
                # several primal edges can join the same triangles; only the
                # edge actually used by the tree is a tree edge
                if any(parent[a][0] == b and parent[a][1] == e
                       for a, b in ((t1, t2), (t2, t1))):
                    continue
            steps = [(t1, t2, e)]
            steps.extend(_tree_path(parent, t2, t1))
            cycles.append(steps)
        return cycles

    def orientation_parity(self, steps) -> int:
        return sum(self._orientation_mismatch(a, b, e)
                   for a, b, e in steps) % 2

    def is_orientable(self) -> bool:
        return all(self.orientation_parity(c) == 0
                   for c in self.fundamental_dual_cycles())


def _dual_key(a, b):
    return (a, b) if a < b else (b, a)


def _tree_path(parent, start, goal):
    """Dual steps start -> goal through the BFS tree (via their root paths)."""
    def root_path(t):
        path = []
        while parent[t][0] is not None:
            p, e = parent[t]
            path.append((t, p, e))
            t = p
        return path

    up_s, up_g = root_path(start), root_path(goal)
    # start -> root, then root -> goal; the shared top segment cancels
    sa = [(t, p, e) for (t, p, e) in up_s]
    sb = [(p, t, e) for (t, p, e) in reversed(up_g)]
    # remove cancelling pairs where the same dual tree edge is crossed twice
    steps = sa + sb
    changed = True
    while changed:
        changed = False
        for i in range(len(steps) - 1):
            a1, b1, e1 = steps[i]
            a2, b2, e2 = steps[i + 1]
            if e1 == e2 and a1 == b2 and b1 == a2:
                del steps[i:i + 2]
                changed = True
                break
    return steps


@dataclass
class Z2Cycle:
    """Subset of triangulation edges with zero boundary over GF(2)."""

    edges: frozenset

    @classmethod
    def from_pairs(cls, pairs) -> "Z2Cycle":
        return cls(frozenset(_edge(int(u), int(v)) for u, v in pairs))

    def validate(self, surf: TriangulatedSurface):
        missing = [e for e in self.edges if e not in surf.edge_tris]
        if missing:
            raise TopologyError(f"cycle uses non-edges {missing}")
        degree: dict[int, int] = {}
        for (u, v) in self.edges:
            degree[u] = degree.get(u, 0) + 1
            degree[v] = degree.get(v, 0) + 1
        odd = [v for v, d in degree.items() if d % 2]
        if odd:
            raise TopologyError(f"edge set has GF(2) boundary at vertices {odd}")


def surface_log_admissibility(surf: TriangulatedSurface, Z: Z2Cycle) -> bool:
    """Whether the pair supports the singular locus: w1 = PD[Z] over GF(2).

    Both sides are pairings with dual loops: orientation transport for w1,
    crossing parity for the intersection with Z; they must agree on the
    generating dual cycles.
    """
    Z.validate(surf)
    for steps in surf.fundamental_dual_cycles():
        w1 = surf.orientation_parity(steps)
        crossings = sum(1 for _, _, e in steps if e in Z.edges) % 2
        if w1 != crossings:
            return False
    return True


def barycentric_subdivision(surf: TriangulatedSurface, Z: Z2Cycle | None = None):
    """Subdivide every triangle into six; a cycle maps to its half-edges."""
    next_vertex = surf.n_vertices
    mid: dict[tuple[int, int], int] = {}
    for e in surf.edges:
        mid[e] = next_vertex
        next_vertex += 1
    tris = []
    for (a, b, c) in surf.triangles:
        center = next_vertex
        next_vertex += 1
        mab, mbc, mca = mid[_edge(a, b)], mid[_edge(b, c)], mid[_edge(c, a)]
        tris.extend([(a, mab, center), (mab, b, center),
                     (b, mbc, center), (mbc, c, center),
                     (c, mca, center), (mca, a, center)])
    out = TriangulatedSurface(next_vertex, tris)
    if Z is None:
        return out
    new_edges = []
    for (u, v) in Z.edges:
        m = mid[(u, v)]
        new_edges.extend([(u, m), (m, v)])
    return out, Z2Cycle.from_pairs(new_edges)


# ---- model surfaces -------------------------------------------------------

def sphere_octahedron() -> TriangulatedSurface:
    tris = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4),
            (1, 0, 5), (2, 1, 5), (3, 2, 5), (0, 3, 5)]
    return TriangulatedSurface(6, tris)


def sphere_equator_cycle() -> Z2Cycle:
    return Z2Cycle.from_pairs([(0, 1), (1, 2), (2, 3), (3, 0)])


def torus_grid(n: int = 3) -> TriangulatedSurface:
    def v(i, j):
        return (i % n) * n + (j % n)
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = v(i, j), v(i + 1, j), v(i, j + 1), v(i + 1, j + 1)
            tris.extend([(a, b, d), (a, d, c)])
    return TriangulatedSurface(n * n, tris)


def torus_essential_cycle(n: int = 3) -> Z2Cycle:
    def v(i, j):
        return (i % n) * n + (j % n)
    return Z2Cycle.from_pairs([(v(i, 0), v(i + 1, 0)) for i in range(n)])


def projective_plane() -> TriangulatedSurface:
    # minimal 6-vertex triangulation (antipodal icosahedron)
    tris = [(0, 1, 3), (0, 1, 4), (0, 2, 3), (0, 2, 5), (0, 4, 5),
            (1, 2, 4), (1, 2, 5), (1, 3, 5), (2, 3, 4), (3, 4, 5)]
    return TriangulatedSurface(6, tris)


def klein_bottle(nx: int = 4, ny: int = 3) -> TriangulatedSurface:
    # square with (x, y) ~ (x + nx, -y) ~ (x, y + ny)
    def v(i, j):
        ii = i % nx
        flip = (i // nx) % 2
        jj = (-j) % ny if flip else j % ny
        return ii * ny + jj
    tris = []
    for i in range(nx):
        for j in range(ny):
            a, b = v(i, j), v(i + 1, j)
            c, d = v(i, j + 1), v(i + 1, j + 1)
            tris.extend([(a, b, d), (a, d, c)])
    return TriangulatedSurface(nx * ny, tris)


def klein_seam_cycle(nx: int = 4, ny: int = 3) -> Z2Cycle:
    """Vertical circle: Poincare dual of the orientation-reversing class."""
    def v(i, j):
        return (i % nx) * ny + (j % ny)
    return Z2Cycle.from_pairs([(v(0, j), v(0, j + 1)) for j in range(ny)])


MODEL_SURFACES = {
    "sphere": sphere_octahedron,
    "torus": torus_grid,
    "projective_plane": projective_plane,
    "klein_bottle": klein_bottle,
}

MODEL_CYCLES = {
    "sphere_equator": sphere_equator_cycle,
    "torus_essential": torus_essential_cycle,
    "klein_seam": klein_seam_cycle,
    "empty": lambda: Z2Cycle(frozenset()),
}


# --------------------------------------------------------------------------
# cohomology ring obstructions
# --------------------------------------------------------------------------

@dataclass
class CohomologyRing:
    b2: int
    Q: sp.Matrix
    n: int | None = None

    def __post_init__(self):
        M = sp.Matrix(self.Q)
        if M.shape != (self.b2, self.b2):
            raise TopologyError(f"pairing matrix shape {M.shape} vs b2 = {self.b2}")
        if M != M.T:
            raise TopologyError("pairing matrix must be symmetric")
        for entry in M:
            if not (entry.is_integer or entry.is_Integer):
                raise TopologyError("pairing matrix must have integer entries")
        self.Q = M


@dataclass
class ObstructionResult:
    witness: list | None
    certain: bool
    note: str
    details: dict = field(default_factory=dict)

    @property
    def obstructed(self) -> bool | None:
        """True = structure excluded; None = no witness found but uncertain."""
        if self.witness is not None:
            return False
        return True if self.certain else None

    def to_dict(self):
        return {"witness": None if self.witness is None
                else [sp.srepr(sp.sympify(w)) for w in self.witness],
                "witness_str": None if self.witness is None
                else [str(w) for w in self.witness],
                "certain": self.certain, "note": self.note,
                "details": {k: str(v) for k, v in self.details.items()}}


def obstruction_a(ring: CohomologyRing, n: int | None = None) -> ObstructionResult:
    """Search for a degree-two class with nonzero (n-1)-st power.

    n = 2: exact (any nonzero class works iff b2 > 0).  n = 3: bounded
    integer search for a class with nonzero square; absence inside the box
    is evidence, not proof.
    """
    n = n if n is not None else (ring.n or 2)
    if n < 2 or n > 3:
        raise TopologyError(f"unsupported half-dimension n = {n} (need 2 or 3)")
    if n == 2:
        if ring.b2 > 0:
            w = [sp.Integer(1)] + [sp.Integer(0)] * (ring.b2 - 1)
            return ObstructionResult(w, True, "nonzero class exists (b2 > 0)")
        return ObstructionResult(None, True, "H^2 = 0: no nonzero class",
                                 {"b2": 0})
    box = 10
    if ring.b2 == 0:
        return ObstructionResult(None, True, "H^2 = 0: no nonzero class")
    for a in itertools.product(range(-box, box + 1), repeat=ring.b2):
        if all(x == 0 for x in a):
            continue
        v = sp.Matrix(a)
        val = (v.T * ring.Q * v)[0, 0]
        if val != 0:
            return ObstructionResult([sp.Integer(x) for x in a], True,
                                     f"Q(a, a) = {val} != 0",
                                     {"box": box})
    return ObstructionResult(None, False,
                             f"no class with nonzero square in box +-{box}; "
                             "absence in a finite box is evidence, not proof",
                             {"box": box})


def _congruence_diagonalize(Q: sp.Matrix):
    """P invertible rational with P.T * Q * P diagonal (exact)."""
    n = Q.shape[0]
    M = sp.Matrix(Q)
    P = sp.eye(n)
    for i in range(n):
        if M[i, i] == 0:
            pivot = next((j for j in range(i + 1, n) if M[j, j] != 0), None)
            if pivot is not None:
                M.col_swap(i, pivot); M.row_swap(i, pivot); P.col_swap(i, pivot)
            else:
                j = next((j for j in range(i + 1, n) if M[i, j] != 0), None)
                if j is not None:
                    M[:, i] += M[:, j]; M[i, :] += M[j, :]; P[:, i] += P[:, j]
        if M[i, i] == 0:
            continue
        for j in range(i + 1, n):
            f = -M[i, j] / M[i, i]
            if f:
                M[:, j] += f * M[:, i]; M[j, :] += f * M[i, :]
                P[:, j] += f * P[:, i]
    return P, M


def obstruction_b(ring: CohomologyRing) -> ObstructionResult:
    """Exact isotropic-witness search: nonzero b with Q(b, b) = 0.

    Exhaustive over the rationals (extended by a single square root when the
    signature mixes): a witness exists iff the pairing is not definite.
    """
    b2, Q = ring.b2, ring.Q
    details = {"b2_at_least_2": b2 >= 2}
    if b2 == 0:
        return ObstructionResult(None, True,
                                 "H^2 = 0: no nonzero class at all", details)
    P, M = _congruence_diagonalize(Q)
    D = [M[i, i] for i in range(b2)]
    assert sp.simplify(P.T * Q * P - sp.diag(*D)) == sp.zeros(b2, b2)
    details["diagonal"] = D
    for i, d in enumerate(D):
        if d == 0:
            w = list(P[:, i])
            return ObstructionResult(w, True, "isotropic basis direction",
                                     details)
    pos = [i for i, d in enumerate(D) if d > 0]
    neg = [i for i, d in enumerate(D) if d < 0]
    if pos and neg:
        i, j = pos[0], neg[0]
        x, y = sp.sqrt(-D[j]), sp.sqrt(D[i])
        w = [sp.expand(x * P[k, i] + y * P[k, j]) for k in range(b2)]
        v = sp.Matrix(w)
        assert sp.expand((v.T * Q * v)[0, 0]) == 0
        return ObstructionResult(w, True, "indefinite pairing", details)
    sign = "positive" if pos else "negative"
    return ObstructionResult(None, True,
                             f"pairing is {sign} definite: diagonalization "
                             "proof attached", details)
