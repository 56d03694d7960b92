"""Chart-level maps compatible with the hypersurface structure.

A map into a chart with hypersurface must send {x1 = 0} onto {y1 = 0}
transversally; computationally this is demanded up front by supplying the
first component in factored form ``f1 = x1 * u`` with ``u`` nonvanishing.
The factored datum is what makes the singular coframe pull back smoothly
and the b-differential well defined on the hypersurface.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import expr as ex
from .charts import BChart


class MapError(ValueError):
    pass


@dataclass
class BMapModel:
    source: BChart
    target: BChart
    u: sp.Expr | None = None          # factor of f1 = x1 * u (target with Z)
    rest: tuple = ()                  # remaining components f2.. (or f1.. if no Z)
    name: str = ""
    components: tuple = field(init=False)

    def __post_init__(self):
        rest = tuple(sp.sympify(c) for c in self.rest)
        if self.target.has_Z:
            if not self.source.has_Z:
                raise MapError("map into a chart with hypersurface needs one upstream "
                               "(f^{-1}(Z) would be empty)")
            if self.u is None:
                raise MapError("first component must be supplied factored as x1 * u")
            self.u = sp.sympify(self.u)
            if len(rest) != self.target.dim - 1:
                raise MapError(f"expected {self.target.dim - 1} further components, "
                               f"got {len(rest)}")
            comps = (ex.coord(1) * self.u,) + rest
        else:
            if self.u is not None:
                raise MapError("target has no hypersurface; supply plain components")
            if len(rest) != self.target.dim:
                raise MapError(f"expected {self.target.dim} components, got {len(rest)}")
            comps = rest
        self.rest = rest
        self.components = comps

    # ------------------------------------------------------------------
    @classmethod
    def identity(cls, chart: BChart, name: str = "id") -> "BMapModel":
        if chart.has_Z:
            return cls(chart, chart, u=sp.Integer(1),
                       rest=[ex.coord(i) for i in range(2, chart.dim + 1)], name=name)
        return cls(chart, chart, rest=[ex.coord(i) for i in range(1, chart.dim + 1)],
                   name=name)

    def compose_components(self, s: "BMapModel") -> list[sp.Expr]:
        """Components of self after s (substitute s into self)."""
        if s.target != self.source:
            raise MapError("composition charts do not match")
        sub = [(ex.coord(i + 1), s.components[i]) for i in range(self.source.dim)]
        return [sp.sympify(c).subs(sub, simultaneous=True) for c in self.components]

    # ------------------------------------------------------------------
    def b_differential_exprs(self) -> sp.Matrix:
        """Matrix of the differential in the singular frames (rows: target)."""
        x1 = ex.coord(1)
        rows = []
        for alpha in range(1, self.target.dim + 1):
            if self.target.has_Z and alpha == 1:
                du = [sp.diff(self.u, ex.coord(j)) for j in range(1, self.source.dim + 1)]
                row = [1 + x1 * du[0] / self.u]
                row += [du[j - 1] / self.u for j in range(2, self.source.dim + 1)]
            else:
                g = self.components[alpha - 1]
                dg = [sp.diff(g, ex.coord(j)) for j in range(1, self.source.dim + 1)]
                row = [x1 * dg[0] if self.source.has_Z else dg[0]]
                row += [dg[j - 1] for j in range(2, self.source.dim + 1)]
            rows.append(row)
        return sp.Matrix(rows)

    _DIFF_CACHE = {}

    def b_differential_eval(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        M = self.b_differential_exprs()
        exprs = list(M)
        vals = ex.evaluate_exprs(exprs, points, self.source.dim)
        return vals.reshape(points.shape[0], self.target.dim, self.source.dim)

    def eval_components(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return ex.evaluate_exprs(list(self.components), points, self.source.dim)


def kernel_basis(mat: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal basis of the null space (columns)."""
    u, s, vt = np.linalg.svd(mat)
    rank = int(np.sum(s > tol * max(1.0, s[0] if s.size else 1.0)))
    return vt[rank:].T
