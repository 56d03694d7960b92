"""Form-building machines with grid certificates.

* Thurston-style assembly: pull the base form back along a fibration-like
  map and add a small multiple of a fiberwise form, with the smallness
  parameter found by sampled bisection over a sphere bundle.
* The quadratic-singularity local model: a closed two-form on the critical
  ball equal to the standard symplectic form near the critical point and to
  the pulled-back fiber area form near the boundary.
* Both conversions between logarithmic and folded singular structure along
  the hypersurface, driven by explicit interpolation profiles.
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
from .forms import (BForm, b_d, form_is_zero, forms_equal, pfaffian, pullback,
                    wedge, wedge_power)
from .geometry import (CosymplecticData, TransversalityReport, _eval_on_Z,
                       dual_bivector, log_symplectic_check)
from .profiles import ProfileSpec, make_log_fold_interp, make_radial_bump, xlogx


class ConstructionError(ValueError):
    pass


class TamingSearchError(ConstructionError):
    pass


# --------------------------------------------------------------------------
# cover data for the assembly
# --------------------------------------------------------------------------

@dataclass
class CoverDatum:
    """One chart of the base cover: weight, fiber form, primitive."""

    index: int
    box: tuple                      # box in base-chart coordinates
    weight: sp.Expr                 # function of the base coordinates
    eta: BForm                      # closed two-form on the total chart
    alpha: BForm | None = None      # primitive of eta - xi (None = zero)


def _constant_acs(matrix: np.ndarray):
    M = np.asarray(matrix, dtype=float)

    def evaluator(points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(points)
        return np.broadcast_to(M, (points.shape[0],) + M.shape)

    return evaluator


def block_rotation_acs(chart: BChart, blocks) -> callable:
    """Constant complex structure rotating each listed coordinate pair."""
    J = np.zeros((chart.dim, chart.dim))
    seen = set()
    for (i, j) in blocks:
        if i in seen or j in seen:
            raise ConstructionError("overlapping rotation blocks")
        seen.update((i, j))
        J[i - 1, j - 1] = -1.0
        J[j - 1, i - 1] = 1.0
    if len(seen) != chart.dim:
        raise ConstructionError("rotation blocks must cover every coordinate")
    return _constant_acs(J)


# --------------------------------------------------------------------------
# taming-parameter search
# --------------------------------------------------------------------------

def _sphere_directions(n_points: int, k: int, dim: int,
                       rng: np.random.Generator) -> np.ndarray:
    v = rng.standard_normal((n_points, k, dim))
    return v / np.linalg.norm(v, axis=2, keepdims=True)


def find_taming_t(fstar_omega: BForm, eta: BForm, J_eval, chart: BChart,
                  cfg: Config = DEFAULT, *, base_points: int | None = None,
                  sphere_samples: int | None = None,
                  t_max: float | None = None) -> tuple[float, Certificate]:
    """Largest sampled-safe multiple of the fiberwise form.

    Samples a sphere bundle over a deterministic grid.  The pulled-back
    base pairing must be nonnegative with kernel exactly the fiber
    directions, and the fiberwise pairing must be positive on that kernel;
    bisection then finds the threshold where positivity of the sum is lost,
    and half of it is returned (the configured cap if nothing is lost).
    """
    K = sphere_samples or cfg.sampling.sphere_samples
    N_req = base_points or cfg.sampling.grid ** chart.dim
    t_cap = t_max if t_max is not None else cfg.sampling.t_max
    pts = chart.grid_total(N_req)
    zpts = chart.with_z_inserted(chart.z_grid(3)) if chart.has_Z else None
    if zpts is not None:
        pts = np.vstack([pts, zpts])
    N = pts.shape[0]
    rng = np.random.default_rng(cfg.sampling.seed)
    dirs = _sphere_directions(N, K, chart.dim, rng)

    A = fstar_omega.evaluate_matrices(pts)
    B = eta.evaluate_matrices(pts)
    J = J_eval(pts)
    Jv = np.einsum("nij,nkj->nki", J, dirs)
    a = np.einsum("nki,nij,nkj->nk", dirs, A, Jv)
    b = np.einsum("nki,nij,nkj->nk", dirs, B, Jv)

    thresholds = {"tol_zero": cfg.tol.tol_zero, "kernel_band": 0.3}
    grid_spec = {"base_points": int(N), "sphere_samples": int(K),
                 "seed": cfg.sampling.seed, "t_cap": t_cap}

    min_a = float(a.min())
    if min_a < -cfg.tol.tol_zero:
        n, k = np.unravel_index(np.argmin(a), a.shape)
        raise TamingSearchError(
            f"base pairing negative ({min_a:.3e}) at point "
            f"{pts[n].tolist()} direction {dirs[n, k].tolist()}")

    # kernel of the pulled-back form = fiber directions (base nondegenerate)
    kernel_b = []
    scaleA = np.linalg.norm(A, axis=(1, 2))
    for n in range(N):
        Kb = kernel_basis(A[n], 1e-7)
        if Kb.shape[1] == 0:
            continue
        combos = rng.standard_normal((8, Kb.shape[1]))
        vs = combos @ Kb.T
        vs /= np.linalg.norm(vs, axis=1, keepdims=True)
        Jvs = vs @ J[n].T
        qb = np.einsum("ki,ij,kj->k", vs, B[n], Jvs)
        kernel_b.append(qb.min())
    min_kernel_b = float(min(kernel_b)) if kernel_b else float("inf")
    if kernel_b and min_kernel_b <= 0:
        raise TamingSearchError(
            f"fiberwise form not positive on the kernel (min {min_kernel_b:.3e})")

    def margin(t):
        return float((a + t * b).min())

    if margin(t_cap) > 0:
        t_star, final = t_cap, margin(t_cap)
    else:
        lo, hi = 0.0, t_cap
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if margin(mid) > 0:
                lo = mid
            else:
                hi = mid
        if lo == 0.0:
            n, k = np.unravel_index(np.argmin(a + 1e-12 * b), a.shape)
            raise TamingSearchError(
                f"no positive taming parameter at grid resolution; worst "
                f"sample at {pts[n].tolist()} direction {dirs[n, k].tolist()}")
        t_star, final = lo / 2, margin(lo / 2)
    cert = Certificate(
        "find_taming_t", final > 0,
        parameters={"t": t_star},
        grid=grid_spec,
        margins={"taming_margin": final, "min_base_pairing": min_a,
                 "min_kernel_fiber_pairing": min_kernel_b},
        thresholds=thresholds)
    return t_star, cert


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------

def thurston_assemble(f: BMapModel, omega_Y: BForm, cover: list[CoverDatum],
                      xi: BForm, J_eval, cfg: Config = DEFAULT,
                      **search_kw) -> tuple[BForm, Certificate]:
    """Pullback of the base form plus a certified small fiberwise form."""
    src, tgt = f.source, f.target
    rng = np.random.default_rng(cfg.sampling.seed)

    ok, method, worst = form_is_zero(b_d(omega_Y), rng=rng, tol=cfg.tol.tol_zero)
    if not ok:
        raise ConstructionError("base form is not closed")
    ok, _, _ = form_is_zero(b_d(xi), rng=rng, tol=cfg.tol.tol_zero)
    if not ok:
        raise ConstructionError("reference fiber form is not closed")

    total_weight = sum(sp.sympify(c.weight) for c in cover) - 1
    wsum = ex.is_zero_symbolic(total_weight)
    if wsum is False:
        raise ConstructionError("cover weights do not sum to 1")
    if wsum is None:
        okw, worst = ex.sample_zero([total_weight], tgt.sample(200, rng),
                                    tgt.dim, cfg.tol.tol_zero)
        if not okw:
            raise ConstructionError(f"cover weights do not sum to 1 "
                                    f"(sampled error {worst:.2e})")
    for c in cover:
        okc, _, _ = form_is_zero(b_d(c.eta), rng=rng, tol=cfg.tol.tol_zero)
        if not okc:
            raise ConstructionError(f"cover form {c.index} is not closed")
        alpha = c.alpha if c.alpha is not None else BForm.zero(src, 1, c.eta.basis)
        oke, method, worst = forms_equal(b_d(alpha), c.eta - xi, rng=rng,
                                         tol=cfg.tol.tol_zero)
        if not oke:
            raise ConstructionError(
                f"cover primitive {c.index} does not satisfy "
                f"d(alpha) = eta - xi (method {method}, worst {worst})")

    # pointwise taming precondition for the guiding structure
    from .taming import SkewForm, is_tame
    check_pts = src.grid_total(256)
    dF = f.b_differential_eval(check_pts)
    Jmats = J_eval(check_pts)
    base_pts = f.eval_components(check_pts)
    OmY = omega_Y.evaluate_matrices(base_pts)
    min_margin = float("inf")
    for n in range(check_pts.shape[0]):
        rep = is_tame(SkewForm(OmY[n]), dF[n], Jmats[n], cfg)
        if not rep.tame:
            raise ConstructionError(
                f"guiding structure not tame over the map at "
                f"{check_pts[n].tolist()}: {rep.reason or rep.margin}")
        min_margin = min(min_margin, rep.margin)

    # fiberwise positivity of each cover form over its own box
    for c in cover:
        lo = np.array([b[0] for b in c.box])
        hi = np.array([b[1] for b in c.box])
        inside = np.all((base_pts >= lo) & (base_pts <= hi), axis=1)
        idx = np.nonzero(inside)[0]
        Bm = c.eta.evaluate_matrices(check_pts[idx]) if idx.size else None
        for row, n in enumerate(idx):
            Kb = kernel_basis(dF[n], 1e-7)
            if Kb.shape[1] == 0:
                continue
            vs = rng.standard_normal((6, Kb.shape[1])) @ Kb.T
            vs /= np.linalg.norm(vs, axis=1, keepdims=True)
            q = np.einsum("ki,ij,kj->k", vs, Bm[row], vs @ Jmats[n].T)
            if q.min() <= 0:
                raise ConstructionError(
                    f"cover form {c.index} fails to tame the fiber "
                    f"directions at {check_pts[n].tolist()}")

    # eta = xi + d(sum_i (weight_i o f) alpha_i), exactly as assembled
    correction = BForm.zero(src, 1, xi.basis)
    sub = [(ex.coord(i + 1), f.components[i]) for i in range(tgt.dim)]
    for c in cover:
        if c.alpha is None:
            continue
        wf = sp.sympify(c.weight).subs(sub, simultaneous=True)
        correction = correction + wf * c.alpha
    eta = xi + b_d(correction)

    fstar = pullback(f, omega_Y)
    t, cert_t = find_taming_t(fstar, eta, J_eval, src, cfg, **search_kw)
    omega_t = fstar + t * eta

    ok, method, worst = form_is_zero(b_d(omega_t), rng=rng, tol=cfg.tol.tol_zero)
    if not ok:
        raise ConstructionError("assembled form failed the closedness check")

    # independent denser nondegeneracy scan at twice the axis resolution,
    # including points on the hypersurface
    requested = search_kw.get("base_points") or cfg.sampling.grid ** src.dim
    n_axis = max(2, int(round(requested ** (1.0 / src.dim))))
    dense = src.grid(min(2 * n_axis, 24))
    if src.has_Z:
        dense = np.vstack([dense, src.with_z_inserted(src.z_grid(4))])
    M = omega_t.evaluate_matrices(dense)
    pf = _numeric_pfaffian(M)
    min_pf = float(np.min(np.abs(pf)))
    sign_change = bool(pf.min() < 0 < pf.max())
    nondeg_ok = min_pf > 0 and not sign_change

    cert = Certificate(
        "thurston_assemble", bool(cert_t.passed and nondeg_ok and ok),
        parameters={"t": t, "closedness_method": method},
        grid={**cert_t.grid, "dense_points": int(dense.shape[0])},
        margins={**cert_t.margins, "min_taming_margin_guide": min_margin,
                 "dense_min_abs_pfaffian": min_pf,
                 "dense_sign_change": sign_change},
        thresholds=cert_t.thresholds)
    return omega_t, cert


def _numeric_pfaffian(M: np.ndarray) -> np.ndarray:
    """Pfaffian of a stack of antisymmetric matrices (dim 2, 4 or 6)."""
    n = M.shape[-1]
    if n == 2:
        return M[..., 0, 1]
    if n == 4:
        return (M[..., 0, 1] * M[..., 2, 3] - M[..., 0, 2] * M[..., 1, 3]
                + M[..., 0, 3] * M[..., 1, 2])
    if n == 6:
        total = np.zeros(M.shape[:-2])
        rest = [1, 2, 3, 4, 5]
        for pos, j in enumerate(rest):
            keep = [k for k in rest if k != j]
            sub = M[..., np.ix_(keep, keep)[0], np.ix_(keep, keep)[1]]
            total += (-1) ** pos * M[..., 0, j] * _numeric_pfaffian(sub)
        return total
    raise ConstructionError(f"pfaffian for dimension {n} not supported")


# --------------------------------------------------------------------------
# quadratic-singularity local model
# --------------------------------------------------------------------------

def _lefschetz_chart(size: float) -> BChart:
    return BChart(4, ((-size, size),) * 4, (False,) * 4, has_Z=False)


def lefschetz_local_eta(r0: float, r1: float, *, sigma_scale=1,
                        alternate_primitive: bool = False,
                        chart_size: float = 1.5,
                        cfg: Config = DEFAULT,
                        profile_name: str | None = None
                        ) -> tuple[BForm, Certificate]:
    """Closed two-form on the model ball around a quadratic critical point.

    Coordinates (q1, q2, q3, q4) = (Re z1, Im z1, Re z2, Im z2) with the
    fibration g = z1^2 + z2^2 = a*b for a = z1 + i z2, b = z1 - i z2; the
    singular fiber is the union of the orthogonal planes {b = 0}, {a = 0}.
    The form is sigma exactly inside radius r0 and the pulled-back fiber
    area form past r1; a central cutoff collapses the ambiguous middle zone
    of the retraction onto the singular fiber, where the radial factor
    vanishes anyway.
    """
    if not 0 < r0 < r1 < chart_size:
        raise ConstructionError(f"radii out of order: {r0}, {r1}, {chart_size}")
    chart = _lefschetz_chart(chart_size)
    q = [ex.coord(i) for i in range(1, 5)]
    name = profile_name or f"lefbump_{r0}_{r1}".replace(".", "p")
    bump = make_radial_bump(name, r0, r1)
    tau_step = make_radial_bump(name + "_tau", sp.Rational(5, 4), sp.Rational(3, 2))

    A1, A2 = q[0] - q[3], q[1] + q[2]
    B1, B2 = q[0] + q[3], q[1] - q[2]
    rho = q[0]**2 + q[1]**2 + q[2]**2 + q[3]**2
    tau = (A1**2 + A2**2 - B1**2 - B2**2) / (2 * rho)
    c_plus = tau_step.sym_sq((1 + tau)**2)
    c_minus = tau_step.sym_sq((1 - tau)**2)

    def plane_term(c_cut, P1, P2):
        W1, W2 = c_cut * P1, c_cut * P2
        f_here = bump.sym_sq((W1**2 + W2**2) / 2)
        dW1 = b_d(BForm.scalar(chart, W1, "ordinary"))
        dW2 = b_d(BForm.scalar(chart, W2, "ordinary"))
        return sp.Rational(1, 2) * f_here * wedge(dW1, dW2)

    sigma = BForm(chart, 2, {(1, 2): sigma_scale, (3, 4): sigma_scale},
                  basis="ordinary")
    if alternate_primitive:
        alpha = BForm(chart, 1, {(2,): sigma_scale * q[0],
                                 (4,): sigma_scale * q[2]}, basis="ordinary")
    else:
        half = sp.Rational(1, 2) * sigma_scale
        alpha = BForm(chart, 1, {(1,): -half * q[1], (2,): half * q[0],
                                 (3,): -half * q[3], (4,): half * q[2]},
                      basis="ordinary")
    eta = (plane_term(c_plus, A1, A2) + plane_term(c_minus, B1, B2)
           + b_d((1 - bump.sym_sq(rho)) * alpha))

    # certificate -----------------------------------------------------
    closed, method, worst = form_is_zero(b_d(eta), tol=cfg.tol.tol_zero,
                                         rng=np.random.default_rng(cfg.sampling.seed))

    # equals sigma inside radius r0: all bump arguments lie in the inner
    # flat region there, so regional substitution is exact
    inner = eta
    for coeff_name in (name, name + "__sq"):
        inner = inner.map_coeffs(
            lambda e: ex.substitute_profile_region(e, coeff_name, 0.0, r0**2))
    inner_matches, inner_method, _ = forms_equal(inner, sigma)

    # sampled fiber positivity over regular values near the critical one
    rng = np.random.default_rng(cfg.sampling.seed + 1)
    margins = _fiber_positivity_margins(eta, chart, rng, chart_size,
                                        n_fibers=64, per_fiber=8)
    min_fiber = float(min(margins)) if margins else float("nan")
    if min_fiber <= 0:
        raise ConstructionError(
            f"fiber tangent pairing nonpositive at a sample ({min_fiber:.3e})")

    passed = bool(closed and inner_matches and min_fiber > 0)
    cert = Certificate(
        "lefschetz_local_eta", passed,
        parameters={"r0": r0, "r1": r1, "sigma_scale": float(sigma_scale),
                    "alternate_primitive": alternate_primitive},
        grid={"n_fibers": 64, "per_fiber": 8, "seed": cfg.sampling.seed + 1},
        margins={"closedness_method": method,
                 "inner_equals_sigma": bool(inner_matches),
                 "inner_method": inner_method,
                 "min_fiber_pairing": min_fiber},
        thresholds={"tol_zero": cfg.tol.tol_zero})
    return eta, cert


def fiber_points_and_tangents(c: complex, samples: int, rng, radius: float):
    """Points on the fiber {a*b = c} with complex tangent pairs (v, Jv)."""
    out = []
    for _ in range(samples):
        r = rng.uniform(np.sqrt(abs(c)) * 1.05, radius)
        phase = np.exp(1j * rng.uniform(0, 2 * np.pi))
        a = r * phase
        b = c / a
        z1, z2 = (a + b) / 2, -1j * (a - b) / 2
        pt = np.array([z1.real, z1.imag, z2.real, z2.imag])
        if np.max(np.abs(pt)) > radius:
            continue

        def vec(da, db):
            dz1, dz2 = (da + db) / 2, -1j * (da - db) / 2
            return np.array([dz1.real, dz1.imag, dz2.real, dz2.imag])

        v = vec(a, -b)
        Jv = vec(1j * a, -1j * b)
        out.append((pt, v, Jv))
    return out


def _fiber_positivity_margins(eta: BForm, chart: BChart, rng,
                              radius: float, n_fibers: int, per_fiber: int):
    margins = []
    for _ in range(n_fibers):
        c = rng.uniform(0.005, 0.05) * np.exp(1j * rng.uniform(0, 2 * np.pi))
        triples = fiber_points_and_tangents(c, per_fiber, rng, radius * 0.95)
        if not triples:
            continue
        pts = np.array([t[0] for t in triples])
        M = eta.evaluate_matrices(pts)
        for (pt, v, Jv), Mi in zip(triples, M):
            val = v @ Mi @ Jv / (np.linalg.norm(v) * np.linalg.norm(Jv))
            margins.append(val)
    return margins


# --------------------------------------------------------------------------
# conversions between logarithmic and folded structure
# --------------------------------------------------------------------------

@dataclass
class CollarSpec:
    width: float              # collar is |x1| <= width
    inner_fraction: float = 0.25
    outer_fraction: float = 0.75

    def __post_init__(self):
        if not 0 < self.inner_fraction < self.outer_fraction <= 1:
            raise ConstructionError("collar fractions out of order")

    @property
    def r_inner(self) -> float:
        return self.inner_fraction * self.width

    @property
    def r_outer(self) -> float:
        return self.outer_fraction * self.width


def _fold_report(omega: BForm, cfg: Config) -> TransversalityReport:
    """Transversal vanishing of the top power of an ordinary two-form."""
    chart = omega.chart
    x1 = ex.coord(1)
    h = pfaffian(omega.matrix())
    h0 = ex.substitute_limit(h, x1, 0)
    sym = ex.is_zero_symbolic(h0)
    if sym is True:
        max_h, meth = 0.0, "symbolic"
    else:
        vals = _eval_on_Z([h0], chart, cfg.sampling.grid)
        max_h, meth = float(np.max(np.abs(vals))), "sampled"
    dh0 = ex.substitute_limit(sp.diff(h, x1), x1, 0)
    dvals = _eval_on_Z([dh0], chart, cfg.sampling.grid)
    min_dh = float(np.min(np.abs(dvals)))
    return TransversalityReport(
        max_h <= cfg.tol.tol_zero and min_dh >= cfg.tol.tol_margin,
        max_h, min_dh, {"z_axis_points": cfg.sampling.grid},
        {"tol_zero": cfg.tol.tol_zero, "tol_margin": cfg.tol.tol_margin},
        methods={"h_on_Z": meth})


def _restrict_to_Z_form(omega: BForm) -> BForm:
    """Pull back along the inclusion of Z: drop dx1 slots, set x1 = 0."""
    x1 = ex.coord(1)
    coeffs = {}
    for key, c in omega.coeffs.items():
        if 1 in key:
            continue
        coeffs[key] = ex.substitute_limit(c, x1, 0)
    return BForm(omega.chart, omega.degree, coeffs, basis="ordinary")


def _z_form_min_norm(frm: BForm, cfg: Config) -> float:
    """min over the Z grid of the euclidean norm of the coefficient vector."""
    keys = sorted(frm.coeffs)
    if not keys:
        return 0.0
    vals = _eval_on_Z([frm.coeffs[k] for k in keys], frm.chart,
                      cfg.sampling.grid)
    return float(np.min(np.linalg.norm(vals, axis=1)))


def log_to_folded(omega_b: BForm, collar: CosymplecticData, spec: CollarSpec,
                  cfg: Config = DEFAULT, profile_name: str | None = None
                  ) -> tuple[BForm, Certificate]:
    """Replace the logarithmic singularity by a transversal fold.

    Inside the collar the form becomes d f(|x1| k) ^ theta + sigma for the
    monotone interpolation profile f (quadratic near Z, logarithmic past the
    outer collar radius); outside it coincides with the inverse-image form
    of the input.  Inputs that differ from the collar model d log|x1| ^
    theta + sigma are supported in dimension two by blending the closed
    difference; in higher dimension the input must match the model.
    """
    chart = omega_b.chart
    if not chart.has_Z or omega_b.basis != "b" or omega_b.degree != 2:
        raise ConstructionError("input must be a singular-coframe two-form "
                                "on a chart with hypersurface")
    lo, hi = chart.box[0]
    if spec.width > min(-lo, hi):
        raise ConstructionError("collar wider than the chart")
    ratio = spec.outer_fraction / spec.inner_fraction
    pname = profile_name or f"logfold_c{spec.inner_fraction}_{spec.outer_fraction}"
    pname = pname.replace(".", "p")
    prof = make_log_fold_interp(pname, a=1.0, b=ratio)
    kappa = 1.0 / spec.r_inner          # xi = kappa * |x1|
    kap = sp.nsimplify(kappa, rational=True)
    x1 = ex.coord(1)

    n2 = chart.dim
    model = BForm(chart, 2, dict(collar.sigma.coeffs), basis="b")
    model = model + BForm(chart, 2,
                          {(1,) + k: c for k, c in collar.theta.coeffs.items()},
                          basis="b")
    delta = omega_b - model
    delta_zero, dmethod, worst = form_is_zero(
        delta, rng=np.random.default_rng(cfg.sampling.seed),
        tol=cfg.tol.tol_zero)

    # d f(kappa |x1|) = F1 dx1 with a coefficient smooth through x1 = 0
    F1 = prof.sym_sq(kap**2 * x1**2, order=1) * 2 * kap**2 * x1
    out = BForm(chart, 2,
                {(1,) + k: F1 * c for k, c in collar.theta.coeffs.items()},
                basis="ordinary")
    out = out + BForm(chart, 2, dict(collar.sigma.coeffs), basis="ordinary")

    notes = []
    if not delta_zero:
        if chart.dim != 2:
            raise ConstructionError(
                "input differs from the collar model away from Z "
                f"(method {dmethod}); blending the difference is only "
                "closed automatically in dimension 2")
        chi = make_radial_bump(pname + "_blend", spec.r_inner, spec.r_outer)
        dcoef = delta.coeffs.get((1, 2), sp.S.Zero)
        out = out + BForm(chart, 2,
                          {(1, 2): chi.sym_sq(x1**2) * dcoef / x1},
                          basis="ordinary")
        notes.append("input blended against the collar model; the "
                     "difference is closed and vanishes on Z")

    rep = _fold_report(out, cfg)
    restr = _restrict_to_Z_form(wedge_power(out, n2 // 2 - 1)) \
        if n2 > 2 else BForm.scalar(chart, 1, "ordinary")
    if n2 > 2:
        rank_margin = _z_form_min_norm(restr, cfg)
    else:
        rank_margin = 1.0
    # exact agreement with the input's inverse image outside the collar:
    # substitute the outer branches of every profile and compare (the
    # interpolation profile sees the rescaled squared radius)
    out_outer = out.map_coeffs(
        lambda e: ex.substitute_profile_region(
            e, pname + "__sq", kappa**2 * spec.width**2, 1e280))
    if ex.profile_registered(pname + "_blend__sq"):
        out_outer = out_outer.map_coeffs(
            lambda e: ex.substitute_profile_region(
                e, pname + "_blend__sq", spec.width**2, 1e280))
    anchor = BForm(chart, 2,
                   {k: (c / x1 if 1 in k else c)
                    for k, c in omega_b.coeffs.items()}, basis="ordinary")
    outside_ok, outside_method, worst_out = forms_equal(
        out_outer, anchor, rng=np.random.default_rng(cfg.sampling.seed),
        tol=cfg.tol.tol_equality)

    passed = bool(rep.verdict and rank_margin > 0 and outside_ok)
    cert = Certificate(
        "log_to_folded", passed,
        parameters={"collar_width": spec.width,
                    "r_inner": spec.r_inner, "r_outer": spec.r_outer,
                    "profile": prof.params, "fold_slope": 2 * kappa**2,
                    "model_difference_zero": bool(delta_zero)},
        grid=rep.grid,
        margins={"max_h_on_Z": rep.max_h_on_Z, "min_dh_on_Z": rep.min_dh_on_Z,
                 "restricted_power_min_norm": rank_margin,
                 "outside_agreement": outside_method,
                 "outside_worst": worst_out},
        thresholds=rep.thresholds,
        notes=notes)
    return out, cert


def folded_to_log(omega: BForm, theta: BForm, spec: CollarSpec,
                  cfg: Config = DEFAULT, t_max: float | None = None,
                  profile_name: str | None = None
                  ) -> tuple[BForm, Certificate]:
    """Open the fold into a logarithmic singularity along the hypersurface.

    Requires a closed one-form on Z pairing nondegenerately with the
    restricted power of the fold; this is exactly the data lost by folding,
    and without it the conversion is obstructed.
    """
    chart = omega.chart
    if not chart.has_Z or omega.basis != "ordinary" or omega.degree != 2:
        raise ConstructionError("input must be an ordinary two-form on a "
                                "chart with hypersurface")
    x1 = ex.coord(1)
    n2 = chart.dim
    n = n2 // 2
    rng = np.random.default_rng(cfg.sampling.seed)

    fold = _fold_report(omega, cfg)
    if not fold.verdict:
        raise ConstructionError(f"input is not folded: {fold.to_dict()}")
    okc, _, _ = form_is_zero(b_d(omega), rng=rng, tol=cfg.tol.tol_zero)
    if not okc:
        raise ConstructionError("input form is not closed")

    if theta.degree != 1 or any(1 in k for k in theta.coeffs) \
            or any(sp.diff(c, x1) != 0 for c in theta.coeffs.values()):
        raise ConstructionError("theta must be a one-form on Z "
                                "(no dx1 slot, x1-independent)")
    okt, _, _ = form_is_zero(b_d(theta), rng=rng, tol=cfg.tol.tol_zero)
    if not okt:
        raise ConstructionError("theta is not closed")
    pairing = wedge(theta, _restrict_to_Z_form(wedge_power(omega, n - 1)))
    key = tuple(range(2, n2 + 1))
    pair_coef = pairing.coeffs.get(key, sp.S.Zero)
    pvals = _eval_on_Z([pair_coef], chart, cfg.sampling.grid)
    theta_margin = float(np.min(np.abs(pvals)))
    if theta_margin < cfg.tol.cosymplectic_margin or \
            (pvals.min() < 0 < pvals.max()):
        raise ConstructionError(
            f"theta ^ (fold power) degenerate on Z (margin {theta_margin:.3e}): "
            "the conversion is obstructed without this pairing")

    pname = profile_name or f"fold2log_w{spec.width}".replace(".", "p")
    window = make_radial_bump(pname, spec.r_inner, spec.r_outer)
    rho = x1**2
    lam_coef = (1 - window.sym_sq(rho)) - window.sym_sq(rho, order=1) * xlogx(rho)
    beta = BForm(chart, 1, {(1,): lam_coef}, basis="b")
    omega_bb = BForm(chart, 2, dict(omega.coeffs), basis="ordinary")
    omega_b_basis = BForm.from_ordinary(
        chart, 2, {k: c for k, c in omega.coeffs.items()})

    theta_b = BForm(chart, 1, dict(theta.coeffs), basis="b")
    singular_part = wedge(beta, theta_b)

    # orientation: the singular summand must reinforce the fold volume on
    # the symplectic side of the collar
    probe = np.array([0.5 * (a + b) for a, b in chart.box])
    probe[0] = spec.r_inner / 2
    B0 = omega_b_basis.evaluate_matrices(probe[None, :])[0]
    C0 = singular_part.evaluate_matrices(probe[None, :])[0]
    g0 = _numeric_pfaffian(B0[None, :, :])[0]
    eps = 1e-4
    gplus = _numeric_pfaffian((B0 + eps * C0)[None, :, :])[0]
    gminus = _numeric_pfaffian((B0 - eps * C0)[None, :, :])[0]
    t_sign = 1.0 if g0 * (gplus - gminus) > 0 else -1.0

    t_cap = t_max if t_max is not None else cfg.sampling.t_max
    pts = np.vstack([chart.grid_total(cfg.sampling.grid ** min(chart.dim, 4)),
                     chart.with_z_inserted(chart.z_grid(4))])
    Bm = omega_b_basis.evaluate_matrices(pts)
    Cm = singular_part.evaluate_matrices(pts)

    def min_abs_pf(t):
        pf = _numeric_pfaffian(Bm + t * Cm)
        return float(np.min(np.abs(pf))), bool(pf.min() < 0 < pf.max())

    t_abs = t_cap
    chosen = None
    for _ in range(60):
        m, flips = min_abs_pf(t_sign * t_abs)
        if m > cfg.tol.tol_zero and not flips:
            chosen = t_sign * t_abs
            break
        t_abs *= 0.5
    if chosen is None:
        raise ConstructionError("no nondegenerate multiple found at grid "
                                "resolution")
    out = omega_b_basis + chosen * singular_part
    margin, _ = min_abs_pf(chosen)

    check = log_symplectic_check(dual_bivector(out, cfg), chart, cfg)

    # agreement with the input outside the collar: outer window branch
    out_outer = out.map_coeffs(
        lambda e: ex.substitute_profile_region(e, pname + "__sq",
                                               spec.width**2, 1e280))
    agree, agree_method, agree_worst = forms_equal(
        out_outer, omega_b_basis, rng=rng, tol=cfg.tol.tol_equality)

    passed = bool(check.verdict and margin > 0 and agree)
    cert = Certificate(
        "folded_to_log", passed,
        parameters={"t": chosen, "collar_width": spec.width,
                    "window": window.params},
        grid={"points": int(pts.shape[0]), "seed": cfg.sampling.seed},
        margins={"min_abs_pfaffian": margin,
                 "theta_pairing_margin": theta_margin,
                 "outside_agreement": agree_method,
                 "outside_worst": agree_worst,
                 "log_symplectic_check": check.to_dict()},
        thresholds={"tol_zero": cfg.tol.tol_zero,
                    "cosymplectic_margin": cfg.tol.cosymplectic_margin})
    return out, cert
