"""Form/bivector duality, singular-locus transversality, collar data.

Conventions: for a two-form with coefficient matrix ``O`` in the singular
coframe, the dual bivector has matrix ``-O^{-1}`` in the singular frame;
this is the sign for which the standard block pair
``dlog x1 ^ dx2 + dx3 ^ dx4 + ...``  <->  ``x1 d1 ^ d2 + d3 ^ d4 + ...``
are each other's duals, and the two operations are mutually inverse.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import expr as ex
from .certificates import Certificate
from .charts import BChart
from .config import Config, DEFAULT
from .bmaps import BMapModel, kernel_basis
from .forms import (BForm, BBivector, b_d, form_is_zero, pfaffian, wedge,
                    wedge_power)


class GeometryError(ValueError):
    pass


class DegenerateFormError(GeometryError):
    pass


class PoissonError(GeometryError):
    pass


class CosymplecticError(GeometryError):
    pass


class SectionError(GeometryError):
    pass


# --------------------------------------------------------------------------
# duality
# --------------------------------------------------------------------------

def _nondegeneracy_scan(pf_expr: sp.Expr, chart: BChart, cfg: Config,
                        what: str) -> float:
    """Scan the Pfaffian (not the determinant, which is its square and so
    never changes sign): a sign change betrays a zero between grid nodes."""
    pts = chart.grid_total(cfg.sampling.random_points * 5)
    vals = ex.evaluate_exprs([pf_expr], pts, chart.dim)[:, 0]
    i = int(np.argmin(np.abs(vals)))
    margin = float(np.abs(vals[i]))
    if margin < cfg.tol.tol_margin or vals.min() < 0 < vals.max():
        raise DegenerateFormError(
            f"{what} degenerate near grid point {pts[i].tolist()}: "
            f"|pfaffian| = {margin:.3e}")
    return margin


def dual_bivector(omega: BForm, cfg: Config = DEFAULT) -> BBivector:
    """Invert a nondegenerate two-form into its dual bivector (dim <= 6)."""
    chart = omega.chart
    if omega.degree != 2:
        raise GeometryError("dual_bivector expects a two-form")
    if chart.dim > 6:
        raise GeometryError("symbolic inversion capped at dimension 6")
    O = omega.matrix()
    _nondegeneracy_scan(pfaffian(O), chart, cfg, "two-form")
    det = sp.expand(O.det(method="berkowitz"))
    adj = O.adjugate()
    Pi = -adj / det
    return BBivector.from_matrix(chart, Pi, denominator_hint=det)


def invert_bivector(pi: BBivector, cfg: Config = DEFAULT) -> BForm:
    """Mirror of :func:`dual_bivector`."""
    chart = pi.chart
    if chart.dim > 6:
        raise GeometryError("symbolic inversion capped at dimension 6")
    P = pi.matrix()
    q = pi.denominator_hint
    if q is not None:
        # entries are N_ij / q with polynomial N: invert the polynomial
        # matrix and restore the scalar, keeping the algebra off rational
        # functions: (N/q)^{-1} = q * adj(N) / det(N)
        N = (P * q).applyfunc(sp.cancel)
        _nondegeneracy_scan(pfaffian(N), chart, cfg, "bivector")
        detN = sp.expand(N.det(method="berkowitz"))
        Omega = -(q * N.adjugate()) / detN
    else:
        _nondegeneracy_scan(pfaffian(P), chart, cfg, "bivector")
        det = sp.expand(P.det(method="berkowitz"))
        Omega = -P.adjugate() / det
    return BForm.from_matrix(chart, Omega, basis="b" if chart.has_Z else "ordinary")


# --------------------------------------------------------------------------
# log-symplectic transversality check
# --------------------------------------------------------------------------

@dataclass
class TransversalityReport:
    verdict: bool
    max_h_on_Z: float
    min_dh_on_Z: float
    grid: dict
    thresholds: dict
    extra_zeros: list = field(default_factory=list)
    methods: dict = field(default_factory=dict)
    poisson: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        from .certificates import _plain
        return _plain({
            "verdict": bool(self.verdict), "max_h_on_Z": self.max_h_on_Z,
            "min_dh_on_Z": self.min_dh_on_Z, "grid": self.grid,
            "thresholds": self.thresholds, "extra_zeros": self.extra_zeros,
            "methods": self.methods, "poisson": self.poisson})


def _fragment_poly_trig(e: sp.Expr) -> bool:
    if ex.has_profile(e):
        return False
    for p in e.atoms(sp.Pow):
        if p.exp.is_negative and p.base.free_symbols:
            return False
    return True


def _eval_on_Z(exprs, chart: BChart, n_axis: int):
    """Evaluate x1-restricted expressions over a grid on the hypersurface."""
    pts = chart.with_z_inserted(chart.z_grid(n_axis))
    return ex.evaluate_exprs(exprs, pts, chart.dim)


def schouten_bracket_components(P: sp.Matrix, dim: int) -> list[sp.Expr]:
    """Components [pi,pi]^{ijk} (up to constant factor) for i<j<k."""
    comps = []
    for i in range(dim):
        for j in range(i + 1, dim):
            for k in range(j + 1, dim):
                total = sp.S.Zero
                for l in range(dim):
                    total += (P[l, i] * sp.diff(P[j, k], ex.coord(l + 1))
                              + P[l, j] * sp.diff(P[k, i], ex.coord(l + 1))
                              + P[l, k] * sp.diff(P[i, j], ex.coord(l + 1)))
                comps.append(total)
    return comps


def log_symplectic_check(pi, chart: BChart, cfg: Config = DEFAULT
                         ) -> TransversalityReport:
    """Transversal vanishing of the top power of an ordinary bivector.

    ``pi`` is the ordinary-frame antisymmetric coefficient matrix (sympy
    Matrix) or a :class:`BBivector`, in which case its anchor image is used.
    """
    if isinstance(pi, BBivector):
        P = pi.anchor_matrix()
    else:
        P = sp.Matrix(pi)
    dim = chart.dim
    if dim > 6:
        raise GeometryError("check capped at dimension 6")
    if not chart.has_Z:
        raise GeometryError("chart carries no hypersurface")
    x1 = ex.coord(1)
    n_axis = cfg.sampling.grid
    thresholds = {"tol_zero": cfg.tol.tol_zero, "tol_margin": cfg.tol.tol_margin}
    grid_spec = {"z_axis_points": n_axis, "sweep_points": 201}
    methods = {}

    h = pfaffian(P)
    # vanishing of h on Z
    h0 = ex.substitute_limit(h, x1, 0)
    sym = ex.is_zero_symbolic(h0) if _fragment_poly_trig(h0) else None
    if sym is True:
        max_h, methods["h_on_Z"] = 0.0, "symbolic"
    else:
        vals = _eval_on_Z([h0], chart, n_axis)
        max_h, methods["h_on_Z"] = float(np.max(np.abs(vals))), "sampled"

    # transversal derivative on Z
    dh0 = ex.substitute_limit(sp.diff(h, x1), x1, 0)
    dvals = _eval_on_Z([dh0], chart, n_axis)
    min_dh = float(np.min(np.abs(dvals)))
    methods["dh_on_Z"] = "sampled"

    # Poisson condition (vacuous in dimension 2)
    poisson = {"checked": dim > 2}
    if dim > 2:
        comps = schouten_bracket_components(P, dim)
        if all(_fragment_poly_trig(c) for c in comps):
            oks = [ex.is_zero_symbolic(c) for c in comps]
            if all(o is True for o in oks):
                poisson.update(ok=True, method="symbolic", worst=0.0)
            elif any(o is False for o in oks):
                poisson.update(ok=False, method="symbolic", worst=float("nan"))
            else:
                oks = None
        else:
            oks = None
        if "ok" not in poisson:
            pts = chart.grid_total(cfg.sampling.random_points * 3)
            ok, worst = ex.sample_zero(comps, pts, dim, cfg.tol.tol_zero)
            poisson.update(ok=bool(ok), method="sampled", worst=worst)
        if not poisson["ok"]:
            raise PoissonError(f"Schouten bracket nonzero: {poisson}")

    # companion zero sweep along x1 (other zero components are reported,
    # not failed: in-chart the hypersurface is always {x1 = 0})
    extra = _companion_zero_sweep(h, chart)

    verdict = (max_h <= cfg.tol.tol_zero) and (min_dh >= cfg.tol.tol_margin) \
        and poisson.get("ok", True)
    return TransversalityReport(verdict, max_h, min_dh, grid_spec, thresholds,
                                extra, methods, poisson)


def _companion_zero_sweep(h: sp.Expr, chart: BChart, n_sweep: int = 201,
                          n_slices: int = 3) -> list[float]:
    lo, hi = chart.box[0]
    xs = np.linspace(lo, hi, n_sweep)
    step = (hi - lo) / (n_sweep - 1)
    rng = np.random.default_rng(7)
    slices = chart.sample(n_slices, rng)
    found = set()
    for s in slices:
        pts = np.tile(s, (n_sweep, 1))
        pts[:, 0] = xs
        vals = ex.evaluate_exprs([h], pts, chart.dim)[:, 0]
        sign = np.sign(vals)
        for i in np.nonzero(sign[:-1] * sign[1:] < 0)[0]:
            a, b = xs[i], xs[i + 1]
            fa = vals[i]
            pt = s.copy()
            for _ in range(50):
                m = 0.5 * (a + b)
                pt[0] = m
                fm = ex.evaluate_exprs([h], pt[None, :], chart.dim)[0, 0]
                if fa * fm <= 0:
                    b = m
                else:
                    a, fa = m, fm
            x0 = 0.5 * (a + b)
            if abs(x0) > 1.5 * step:
                found.add(round(float(x0), 6))
    return sorted(found)


# --------------------------------------------------------------------------
# collar (cosymplectic) data on the hypersurface
# --------------------------------------------------------------------------

@dataclass
class CosymplecticData:
    """Closed one- and two-forms induced on Z, with the pairing margin.

    The forms are stored on the ambient chart in the ordinary coframe with
    x1-independent coefficients and no dx1 slot; this represents forms on Z
    in the coordinates x2..x_{2n}.
    """
    theta: BForm
    sigma: BForm
    margin: float
    report: dict = field(default_factory=dict)


def cosymplectic_extract(omega: BForm, cfg: Config = DEFAULT) -> CosymplecticData:
    chart = omega.chart
    if not chart.has_Z:
        raise GeometryError("chart carries no hypersurface")
    if omega.degree != 2 or omega.basis != "b":
        raise GeometryError("collar extraction expects a singular-coframe two-form")
    x1 = ex.coord(1)
    closed, method, worst = form_is_zero(b_d(omega), tol=cfg.tol.tol_zero,
                                         rng=np.random.default_rng(cfg.sampling.seed))
    if not closed:
        raise CosymplecticError(f"input form is not closed (method {method}, "
                                f"worst {worst:.2e})")
    O = omega.matrix()
    n2 = chart.dim
    theta = BForm(chart, 1, {(j,): ex.substitute_limit(O[0, j - 1], x1, 0)
                             for j in range(2, n2 + 1)}, basis="ordinary")
    sigma = BForm(chart, 2, {(i, j): ex.substitute_limit(O[i - 1, j - 1], x1, 0)
                             for i in range(2, n2 + 1) for j in range(i + 1, n2 + 1)},
                  basis="ordinary")
    for name, frm in (("theta", theta), ("sigma", sigma)):
        ok, method, worst = form_is_zero(b_d(frm), tol=cfg.tol.tol_zero,
                                         rng=np.random.default_rng(cfg.sampling.seed))
        if not ok:
            raise CosymplecticError(f"d{name} != 0 on Z (method {method})")
    n = n2 // 2
    top = wedge(theta, wedge_power(sigma, n - 1))
    key = tuple(range(2, n2 + 1))
    coef = top.coeffs.get(key, sp.S.Zero)
    vals = _eval_on_Z([coef], chart, cfg.sampling.grid)
    margin = float(np.min(np.abs(vals)))
    if margin < cfg.tol.cosymplectic_margin:
        raise CosymplecticError(
            f"degenerate collar data: min |theta ^ sigma^{n - 1}| = {margin:.3e}")
    return CosymplecticData(theta, sigma, margin,
                            {"grid_axis": cfg.sampling.grid,
                             "threshold": cfg.tol.cosymplectic_margin})


# --------------------------------------------------------------------------
# map validation and sections
# --------------------------------------------------------------------------

def validate_bmap(f: BMapModel, cfg: Config = DEFAULT) -> Certificate:
    """Grid certificate that the factored first component is transverse."""
    name = f"validate_bmap[{f.name or 'map'}]"
    if not f.target.has_Z:
        return Certificate(name, True, parameters={"target_has_Z": False},
                           notes=["target carries no hypersurface; nothing to check"])
    pts = f.source.grid_total(cfg.sampling.random_points * 5)
    vals = ex.evaluate_exprs([f.u], pts, f.source.dim)[:, 0]
    i = int(np.argmin(np.abs(vals)))
    margin = float(np.abs(vals[i]))
    sign_change = bool(vals.min() < 0 < vals.max())
    passed = margin >= cfg.tol.tol_margin and not sign_change
    cert = Certificate(
        name, passed,
        parameters={"factored": True},
        grid={"points": int(pts.shape[0])},
        margins={"min_abs_u": margin, "argmin_point": pts[i].tolist(),
                 "sign_change": sign_change},
        thresholds={"tol_margin": cfg.tol.tol_margin})
    if not passed:
        cert.notes.append("u vanishes on the sampled domain: first component "
                          "is not transverse to the hypersurface")
    return cert


def section_splitting_check(f: BMapModel, s: BMapModel,
                            cfg: Config = DEFAULT) -> bool:
    """Kernel of the map plus image of the section spans every fiber frame."""
    if s.source != f.target or s.target != f.source:
        raise SectionError("section charts do not match the map")
    comps = f.compose_components(s)
    rng = np.random.default_rng(cfg.sampling.seed)
    for i, c in enumerate(comps):
        diff = sp.sympify(c) - ex.coord(i + 1)
        v = ex.is_zero_symbolic(diff)
        if v is False:
            raise SectionError(f"f o s != id in component {i + 1}")
        if v is None:
            pts = f.target.sample(cfg.sampling.random_points, rng)
            ok, worst = ex.sample_zero([diff], pts, f.target.dim, cfg.tol.tol_zero)
            if not ok:
                raise SectionError(f"f o s != id in component {i + 1} "
                                   f"(sampled error {worst:.2e})")
    ys = f.target.sample(64, rng)
    xs = s.eval_components(ys)
    dfs = f.b_differential_eval(xs)
    dss = s.b_differential_eval(ys)
    dimX = f.source.dim
    for a in range(ys.shape[0]):
        K = kernel_basis(dfs[a], cfg.tol.rank_tol)
        rank_ds = np.linalg.matrix_rank(dss[a], tol=1e-8)
        rank_sum = np.linalg.matrix_rank(np.hstack([K, dss[a]]), tol=1e-8)
        if K.shape[1] + rank_ds != dimX or rank_sum != dimX:
            return False
    return True
