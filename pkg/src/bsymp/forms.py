"""Exterior algebra of b-forms over a single chart.

A degree-k form is stored as a map from strictly increasing k-tuples of
coframe indices to smooth coefficient expressions.  On a chart with
hypersurface, index 1 denotes the singular coframe element
``lam = dx1/x1`` and an ordinary ``dx1`` never appears in stored index
sets: constructing from ordinary data rewrites ``dx1 = x1 * lam``.  All
singular behaviour thus lives in the coframe, and coefficients stay smooth.

Ordinary forms (``basis="ordinary"``) use the same machinery with index 1
meaning ``dx1``; they appear on charts without hypersurface and as folded
two-forms on charts with one.
"""

from __future__ import annotations

from typing import Iterable, Mapping

import numpy as np
import sympy as sp

from . import expr as ex
from .charts import BChart


class FormError(ValueError):
    pass


def _merge_sign(I: tuple[int, ...], J: tuple[int, ...]):
    """Sorted union of disjoint index tuples with the permutation sign."""
    merged, sign = [], 1
    i = j = 0
    while i < len(I) and j < len(J):
        if I[i] < J[j]:
            merged.append(I[i]); i += 1
        elif I[i] > J[j]:
            # moving J[j] past the remaining entries of I
            if (len(I) - i) % 2:
                sign = -sign
            merged.append(J[j]); j += 1
        else:
            return None, 0
    merged.extend(I[i:]); merged.extend(J[j:])
    return tuple(merged), sign


def _insert_sign(j: int, I: tuple[int, ...]):
    """Index set for e_j ^ e_I and its sign; None if j in I."""
    if j in I:
        return None, 0
    pos = sum(1 for i in I if i < j)
    key = tuple(sorted((j,) + I))
    return key, (-1) ** pos


class BForm:
    """Degree-k form on a chart, canonical coefficients over sorted index sets."""

    __slots__ = ("chart", "degree", "coeffs", "basis")

    def __init__(self, chart: BChart, degree: int,
                 coeffs: Mapping[tuple[int, ...], sp.Expr] | None = None,
                 basis: str = "b"):
        if basis not in ("b", "ordinary"):
            raise FormError(f"unknown basis {basis!r}")
        if basis == "b" and not chart.has_Z:
            basis = "ordinary"
        if not 0 <= degree <= chart.dim:
            raise FormError(f"degree {degree} out of range for dim {chart.dim}")
        self.chart = chart
        self.degree = degree
        self.basis = basis
        clean: dict[tuple[int, ...], sp.Expr] = {}
        for key, c in (coeffs or {}).items():
            key = tuple(int(i) for i in key)
            if len(key) != degree:
                raise FormError(f"index set {key} has wrong length for degree {degree}")
            if any(not 1 <= i <= chart.dim for i in key):
                raise FormError(f"index out of range in {key}")
            skey = tuple(sorted(key))
            if len(set(skey)) != degree:
                raise FormError(f"repeated index in {key}")
            sign = _permutation_sign(key, skey)
            c = sp.sympify(c) * sign
            if c is sp.S.Zero or c == 0:
                continue
            clean[skey] = clean.get(skey, sp.S.Zero) + c
        self.coeffs = {k: v for k, v in clean.items() if v != 0}

    # -- construction helpers ------------------------------------------
    @classmethod
    def zero(cls, chart: BChart, degree: int, basis: str = "b") -> "BForm":
        return cls(chart, degree, {}, basis)

    @classmethod
    def scalar(cls, chart: BChart, value: sp.Expr, basis: str = "b") -> "BForm":
        return cls(chart, 0, {(): sp.sympify(value)}, basis)

    @classmethod
    def from_ordinary(cls, chart: BChart, degree: int,
                      coeffs: Mapping[tuple[int, ...], sp.Expr]) -> "BForm":
        """Interpret coefficients over the ordinary coframe {dx1, dx2, ...}.

        On a chart with hypersurface this rewrites dx1 = x1 * lam, so the
        stored index 1 means lam and the coefficient picks up a factor x1.
        """
        if not chart.has_Z:
            return cls(chart, degree, coeffs, basis="ordinary")
        x1 = ex.coord(1)
        adj = {}
        for key, c in coeffs.items():
            key = tuple(int(i) for i in key)
            c = sp.sympify(c)
            if 1 in key:
                c = c * x1
            adj[key] = adj.get(key, sp.S.Zero) + c
        return cls(chart, degree, adj, basis="b")

    # -- ring structure -------------------------------------------------
    def _compat(self, other: "BForm"):
        if self.chart is not other.chart and self.chart != other.chart:
            raise FormError("forms live on different charts")
        if self.basis != other.basis:
            raise FormError("forms use different coframe bases")

    def __add__(self, other: "BForm") -> "BForm":
        self._compat(other)
        if self.degree != other.degree:
            raise FormError("cannot add forms of different degree")
        out = dict(self.coeffs)
        for k, c in other.coeffs.items():
            out[k] = out.get(k, sp.S.Zero) + c
        return BForm(self.chart, self.degree, out, self.basis)

    def __sub__(self, other: "BForm") -> "BForm":
        return self + (-1) * other

    def __rmul__(self, scalar) -> "BForm":
        s = sp.sympify(scalar)
        return BForm(self.chart, self.degree,
                     {k: s * c for k, c in self.coeffs.items()}, self.basis)

    __mul__ = __rmul__

    def __neg__(self) -> "BForm":
        return (-1) * self

    def map_coeffs(self, fn) -> "BForm":
        return BForm(self.chart, self.degree,
                     {k: fn(c) for k, c in self.coeffs.items()}, self.basis)

    def __repr__(self):
        if not self.coeffs:
            return f"BForm<deg {self.degree}, 0>"
        slot = (lambda i: "lam" if i == 1 and self.basis == "b" else f"dx{i}")
        parts = [f"({sp.sstr(c)})*" + "^".join(slot(i) for i in k) if k
                 else sp.sstr(c)
                 for k, c in sorted(self.coeffs.items())]
        return f"BForm<deg {self.degree}, " + " + ".join(parts) + ">"

    # -- matrix views (degree 2) ----------------------------------------
    def matrix(self) -> sp.Matrix:
        if self.degree != 2:
            raise FormError("matrix view requires degree 2")
        n = self.chart.dim
        M = sp.zeros(n, n)
        for (i, j), c in self.coeffs.items():
            M[i - 1, j - 1] = c
            M[j - 1, i - 1] = -c
        return M

    @classmethod
    def from_matrix(cls, chart: BChart, M: sp.Matrix, basis: str = "b") -> "BForm":
        n = chart.dim
        coeffs = {(i + 1, j + 1): M[i, j] for i in range(n) for j in range(i + 1, n)}
        return cls(chart, 2, coeffs, basis)

    # -- numeric evaluation ----------------------------------------------
    def coeff_values(self, points: np.ndarray) -> tuple[list, np.ndarray]:
        """Coefficient columns over points with removable-singularity rescue.

        Coefficients are smooth by invariant but may be written with
        denominators (x1/sin, profile windows times 1/x1); points that
        evaluate non-finite are redone through symbolic restriction in x1.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        keys = sorted(self.coeffs)
        if not keys:
            return keys, np.zeros((points.shape[0], 0))
        exprs = [self.coeffs[k] for k in keys]
        vals = ex.evaluate_exprs(exprs, points, self.chart.dim)
        bad = np.nonzero(~np.all(np.isfinite(vals), axis=1))[0]
        for n in bad:
            vals[n] = _rescue_point(exprs, points[n], self.chart.dim)
        return keys, vals

    def evaluate(self, point) -> np.ndarray | float:
        """Numeric coefficient tensor at a point, fully antisymmetrised."""
        point = np.asarray(point, dtype=float)
        keys, vals = self.coeff_values(point[None, :])
        if self.degree == 0:
            return float(vals[0, 0]) if keys else 0.0
        out = np.zeros((self.chart.dim,) * self.degree)
        from itertools import permutations
        for key, v in zip(keys, vals[0]):
            idx0 = tuple(i - 1 for i in key)
            for perm in permutations(range(self.degree)):
                sign = _perm_parity(perm)
                out[tuple(idx0[p] for p in perm)] = sign * v
        return out

    def evaluate_matrices(self, points: np.ndarray) -> np.ndarray:
        """Degree-2 fast path: stack of full antisymmetric matrices."""
        if self.degree != 2:
            raise FormError("evaluate_matrices requires degree 2")
        points = np.atleast_2d(points)
        n, N = self.chart.dim, points.shape[0]
        out = np.zeros((N, n, n))
        keys, vals = self.coeff_values(points)
        for col, (i, j) in enumerate(keys):
            out[:, i - 1, j - 1] = vals[:, col]
            out[:, j - 1, i - 1] = -vals[:, col]
        return out


def _perm_parity(perm) -> int:
    inv = 0
    for i in range(len(perm)):
        for j in range(i + 1, len(perm)):
            if perm[i] > perm[j]:
                inv += 1
    return -1 if inv % 2 else 1


def _rescue_point(exprs, point, dim) -> np.ndarray:
    """Evaluate smooth-but-singularly-written coefficients at one point."""
    x1 = ex.coord(1)
    out = np.empty(len(exprs))
    rest = point[1:]
    syms = [ex.coord(i) for i in range(2, dim + 1)]
    for col, e in enumerate(exprs):
        r = ex.substitute_limit(sp.sympify(e), x1,
                                sp.nsimplify(point[0], rational=True))
        r = sp.sympify(r).subs(list(zip(syms, rest)), simultaneous=True)
        out[col] = float(ex.evaluate_exprs([r], np.zeros((1, 1)), 1)[0, 0]) \
            if r.free_symbols or ex.has_profile(r) else float(r)
    return out


def _permutation_sign(key, sorted_key) -> int:
    perm = tuple(sorted_key.index(k) for k in key)
    return _perm_parity(perm)


# --------------------------------------------------------------------------
# exterior operations
# --------------------------------------------------------------------------

def wedge(a: BForm, b: BForm) -> BForm:
    a._compat(b)
    if a.degree + b.degree > a.chart.dim:
        return BForm.zero(a.chart, min(a.degree + b.degree, a.chart.dim), a.basis)
    out: dict[tuple[int, ...], sp.Expr] = {}
    for I, ca in a.coeffs.items():
        for J, cb in b.coeffs.items():
            key, sign = _merge_sign(I, J)
            if key is None:
                continue
            out[key] = out.get(key, sp.S.Zero) + sign * ca * cb
    return BForm(a.chart, a.degree + b.degree, out, a.basis)


def wedge_power(a: BForm, k: int) -> BForm:
    if k == 0:
        return BForm.scalar(a.chart, 1, a.basis)
    out = a
    for _ in range(k - 1):
        out = wedge(out, a)
    return out


def b_d(a: BForm) -> BForm:
    """Exterior differential; on the b-coframe, dx1 is rewritten as x1*lam."""
    if a.degree >= a.chart.dim:
        return BForm.zero(a.chart, a.chart.dim, a.basis)
    x1 = ex.coord(1)
    out: dict[tuple[int, ...], sp.Expr] = {}
    for I, c in a.coeffs.items():
        for j in range(1, a.chart.dim + 1):
            dc = sp.diff(c, ex.coord(j))
            if dc == 0:
                continue
            if j == 1 and a.basis == "b":
                dc = x1 * dc
            key, sign = _insert_sign(j, I)
            if key is None:
                continue
            out[key] = out.get(key, sp.S.Zero) + sign * dc
    return BForm(a.chart, a.degree + 1, out, a.basis)


def pullback(f, a: BForm) -> BForm:
    """Pull a form on the target chart of the map back to its source chart.

    ``f`` is a map model (see :mod:`bsymp.bmaps`) whose first component is
    factored as ``x1 * u`` when the target carries a hypersurface.  The
    singular coframe pulls back as ``lam_Y -> lam_X + du/u`` which is smooth
    because u never vanishes.
    """
    src, tgt = f.source, f.target
    if a.chart != tgt:
        raise FormError("form does not live on the map's target chart")
    expected = "b" if tgt.has_Z else "ordinary"
    if a.basis != expected:
        raise FormError(f"pullback expects a {expected}-basis form on the target")
    out_basis = "b" if src.has_Z else "ordinary"
    comps = f.components
    sub = [(ex.coord(i + 1), comps[i]) for i in range(tgt.dim)]

    one_forms = [_pull_coframe(f, alpha) for alpha in range(1, tgt.dim + 1)]
    total = BForm.zero(src, a.degree, out_basis)
    for I, c in a.coeffs.items():
        cf = sp.sympify(c).subs(sub, simultaneous=True)
        term = BForm.scalar(src, cf, out_basis)
        for i in I:
            term = wedge(term, one_forms[i - 1])
        total = total + term
    return total


def _pull_coframe(f, alpha: int) -> BForm:
    src, tgt = f.source, f.target
    out_basis = "b" if src.has_Z else "ordinary"
    x1 = ex.coord(1)
    coeffs: dict[tuple[int, ...], sp.Expr] = {}
    if tgt.has_Z and alpha == 1:
        u = f.u
        du = [sp.diff(u, ex.coord(j)) for j in range(1, src.dim + 1)]
        coeffs[(1,)] = 1 + x1 * du[0] / u
        for j in range(2, src.dim + 1):
            coeffs[(j,)] = du[j - 1] / u
    else:
        g = f.components[alpha - 1]
        dg = [sp.diff(g, ex.coord(j)) for j in range(1, src.dim + 1)]
        coeffs[(1,)] = x1 * dg[0] if src.has_Z else dg[0]
        for j in range(2, src.dim + 1):
            coeffs[(j,)] = dg[j - 1]
    return BForm(src, 1, coeffs, out_basis)


# --------------------------------------------------------------------------
# zero / equality testing with sampling fallback
# --------------------------------------------------------------------------

def form_is_zero(a: BForm, *, samples: np.ndarray | None = None,
                 tol: float = 1e-10, rng: np.random.Generator | None = None,
                 n_samples: int = 200) -> tuple[bool, str, float]:
    """(verdict, method, worst) where method is 'symbolic' or 'sampled'."""
    unresolved = []
    for c in a.coeffs.values():
        v = ex.is_zero_symbolic(c)
        if v is False:
            return False, "symbolic", float("nan")
        if v is None:
            unresolved.append(c)
    if not unresolved:
        return True, "symbolic", 0.0
    if samples is None:
        rng = rng or np.random.default_rng(0)
        samples = a.chart.sample(n_samples, rng)
    ok, worst = ex.sample_zero(unresolved, samples, a.chart.dim, tol)
    return ok, "sampled", worst


def forms_equal(a: BForm, b: BForm, **kw) -> tuple[bool, str, float]:
    return form_is_zero(a - b, **kw)


def is_closed(a: BForm, **kw) -> tuple[bool, str, float]:
    return form_is_zero(b_d(a), **kw)


# --------------------------------------------------------------------------
# bivectors
# --------------------------------------------------------------------------

class BBivector:
    """Antisymmetric bivector in the b-frame {x1 d/dx1, d/dx2, ...}.

    Stored as the strict upper triangle; the anchor image multiplies the
    first row and column by x1, giving an ordinary bivector.
    """

    __slots__ = ("chart", "coeffs", "denominator_hint")

    def __init__(self, chart: BChart,
                 coeffs: Mapping[tuple[int, int], sp.Expr],
                 denominator_hint: sp.Expr | None = None):
        self.chart = chart
        clean = {}
        for (i, j), c in coeffs.items():
            i, j = int(i), int(j)
            c = sp.sympify(c)
            if i == j:
                raise FormError("diagonal bivector entry")
            if j < i:
                i, j, c = j, i, -c
            if c == 0:
                continue
            clean[(i, j)] = clean.get((i, j), sp.S.Zero) + c
        self.coeffs = {k: v for k, v in clean.items() if v != 0}
        self.denominator_hint = denominator_hint

    @classmethod
    def from_matrix(cls, chart: BChart, M: sp.Matrix,
                    denominator_hint: sp.Expr | None = None) -> "BBivector":
        n = chart.dim
        return cls(chart, {(i + 1, j + 1): M[i, j]
                           for i in range(n) for j in range(i + 1, n)},
                   denominator_hint)

    def matrix(self) -> sp.Matrix:
        n = self.chart.dim
        M = sp.zeros(n, n)
        for (i, j), c in self.coeffs.items():
            M[i - 1, j - 1] = c
            M[j - 1, i - 1] = -c
        return M

    def anchor_matrix(self) -> sp.Matrix:
        """Ordinary-bivector coefficient matrix (row/col 1 scaled by x1)."""
        M = self.matrix()
        if not self.chart.has_Z:
            return M
        x1 = ex.coord(1)
        n = self.chart.dim
        D = sp.diag(*([x1] + [1] * (n - 1)))
        return D * M * D

    def evaluate_matrices(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        n, N = self.chart.dim, points.shape[0]
        out = np.zeros((N, n, n))
        keys = sorted(self.coeffs)
        if keys:
            vals = ex.evaluate_exprs([self.coeffs[k] for k in keys], points, n)
            for col, (i, j) in enumerate(keys):
                out[:, i - 1, j - 1] = vals[:, col]
                out[:, j - 1, i - 1] = -vals[:, col]
        return out

    def __repr__(self):
        parts = [f"({sp.sstr(c)})*E{i}^E{j}" for (i, j), c in sorted(self.coeffs.items())]
        return "BBivector<" + (" + ".join(parts) or "0") + ">"


# --------------------------------------------------------------------------
# Pfaffian (symbolic, small even dimension)
# --------------------------------------------------------------------------

def pfaffian(M: sp.Matrix) -> sp.Expr:
    n = M.shape[0]
    if n % 2:
        return sp.S.Zero
    if n == 0:
        return sp.S.One
    if n == 2:
        return M[0, 1]
    total = sp.S.Zero
    rest = list(range(1, n))
    for pos, j in enumerate(rest):
        sign = (-1) ** pos
        keep = [k for k in rest if k != j]
        sub = M[keep, keep]
        total += sign * M[0, j] * pfaffian(sub)
    return total
