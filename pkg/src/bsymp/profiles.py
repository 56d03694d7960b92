"""Named one-variable profile functions.

Two kinds are provided:

* ``log_fold_interp`` -- a strictly monotone C^3 function equal to ``r^2`` on
  ``[0, 1]`` and to ``log r`` on ``[e^2, oo)``.  A naive value-space blend of
  the two branches by a smooth step is not monotone (the quadratic branch
  overshoots the final value), so the interpolation is done in derivative
  space: the derivative decays from ``2r`` to a positive interior bump and
  rises into ``1/r``, with the bump height solved exactly so the
  antiderivative lands on ``log`` at the right end.  All pieces are
  polynomials or ``poly/t`` terms, so values and derivatives have exact
  closed forms.

* ``radial_bump`` -- monotone step from 0 to 1 across radii ``[r0, r1]``,
  flat outside.  Parametrised by the squared radius so all composed
  expressions stay polynomial in the chart coordinates.

Each profile registers numeric evaluators and flat-region closed forms with
:mod:`bsymp.expr`; symbolic form coefficients reference profiles through the
``__sq`` flavour (argument = squared radius), which keeps them smooth across
the hypersurface.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import sympy as sp

from . import expr as ex

E2 = float(np.exp(2.0))


class ProfileError(ValueError):
    pass


def _step7(u: sp.Expr) -> sp.Expr:
    # C^3 polynomial smoothstep on [0, 1]
    return 35 * u**4 - 84 * u**5 + 70 * u**6 - 20 * u**7


def _integrate_poly_over_t(e: sp.Expr, t: sp.Symbol) -> sp.Expr:
    """Antiderivative of sum(c_k t^k), k integer >= -1; fast and exact."""
    total = sp.Integer(0)
    for term in sp.Add.make_args(sp.expand(e)):
        c, k = term.as_coeff_exponent(t)
        if not k.is_Integer:
            raise ProfileError(f"unexpected integrand term {term}")
        k = int(k)
        total += c * sp.log(t) if k == -1 else c * t**(k + 1) / (k + 1)
    return total


def _definite(e: sp.Expr, t: sp.Symbol, lo, hi) -> sp.Expr:
    anti = _integrate_poly_over_t(e, t)
    return anti.subs(t, hi) - anti.subs(t, lo)


@dataclass
class ProfileSpec:
    """A named profile: numeric evaluators plus symbolic leaf builders."""

    name: str
    kind: str
    params: dict
    _value: callable = field(repr=False, default=None)
    _d1: callable = field(repr=False, default=None)
    _d2: callable = field(repr=False, default=None)

    def value(self, r):
        return self._value(np.asarray(r, dtype=float))

    def derivative(self, r):
        return self._d1(np.asarray(r, dtype=float))

    def second_derivative(self, r):
        return self._d2(np.asarray(r, dtype=float))

    @property
    def sq_name(self) -> str:
        return self.name + "__sq"

    def sym(self, arg: sp.Expr, order: int = 0) -> sp.Expr:
        """Symbolic leaf in the natural (radius) variable."""
        return ex.profile_expr(self.name, arg, order)

    def sym_sq(self, arg: sp.Expr, order: int = 0) -> sp.Expr:
        """Symbolic leaf in the squared-radius variable."""
        return ex.profile_expr(self.sq_name, arg, order)

    # ------------------------------------------------------------------
    def table(self, sample_count: int, r_max: float | None = None):
        """Rows (r, f(r), f'(r)) on a uniform grid."""
        if sample_count < 2:
            raise ProfileError("sample_count must be >= 2")
        if r_max is None:
            if self.kind == "log_fold_interp":
                r_max = self.params["b"] + 2.0
            else:
                r_max = 1.5 * self.params["r1"]
        rs = np.linspace(0.0, r_max, sample_count)
        return np.column_stack([rs, self.value(rs), self.derivative(rs)])

    def validate(self, n: int = 2000) -> dict:
        """Check the declared invariants; raise on violation."""
        report = {"name": self.name, "kind": self.kind}
        if self.kind == "log_fold_interp":
            a, b = self.params["a"], self.params["b"]
            rs = np.linspace(1e-6, b + 2.0, n)
            vals = self.value(rs)
            if not np.all(np.diff(vals) > 0):
                raise ProfileError(f"{self.name}: not strictly increasing")
            report["monotone"] = True
            inner = rs <= 1.0
            if not np.allclose(vals[inner], rs[inner] ** 2, rtol=0, atol=1e-14):
                raise ProfileError(f"{self.name}: != r^2 on [0,1]")
            outer = rs >= E2
            if np.any(outer) and not np.allclose(
                    vals[outer], np.log(rs[outer]), rtol=0, atol=1e-12):
                raise ProfileError(f"{self.name}: != log r beyond e^2")
            smooth = rs[(rs > a + 0.05) & (rs < b - 0.05)]
        else:
            r0, r1 = self.params["r0"], self.params["r1"]
            rs = np.linspace(0.0, 1.5 * r1, n)
            vals = self.value(rs)
            if vals.min() < -1e-15 or vals.max() > 1 + 1e-15:
                raise ProfileError(f"{self.name}: range outside [0,1]")
            if not np.all(np.diff(vals) >= -1e-15):
                raise ProfileError(f"{self.name}: not monotone")
            report["range_ok"] = True
            smooth = rs[(rs > r0 + 0.02 * (r1 - r0)) & (rs < r1 - 0.02 * (r1 - r0))]
        # finite-difference consistency of the derivative on smooth regions
        h = 1e-6
        fd = (self.value(smooth + h) - self.value(smooth - h)) / (2 * h)
        dv = self.derivative(smooth)
        scale = np.maximum(np.abs(dv), 1.0)
        err = float(np.max(np.abs(fd - dv) / scale)) if smooth.size else 0.0
        if err > 1e-6:
            raise ProfileError(f"{self.name}: derivative/value mismatch {err:.2e}")
        report["fd_error"] = err
        return report


# --------------------------------------------------------------------------
# piecewise helpers
# --------------------------------------------------------------------------

def _piecewise_eval(breaks, call_low, seg_calls, call_high):
    """Vectorised piecewise evaluator from per-region callables.

    breaks: [b0, ..., bk]; below b0 use call_low, on [b_i, b_{i+1}) use
    seg_calls[i], above bk use call_high.
    """
    breaks = [float(b) for b in breaks]

    def call(r):
        r = np.asarray(r, dtype=float)
        out = np.empty_like(r)
        mask = r < breaks[0]
        out[mask] = np.broadcast_to(call_low(r[mask]), r[mask].shape)
        for i in range(len(breaks) - 1):
            mask = (r >= breaks[i]) & (r < breaks[i + 1])
            out[mask] = np.broadcast_to(seg_calls[i](r[mask]), r[mask].shape)
        mask = r >= breaks[-1]
        out[mask] = np.broadcast_to(call_high(r[mask]), r[mask].shape)
        return out

    return call


def _fn(var, e):
    return sp.lambdify(var, e, "numpy")


def _cheb_fn(e, t, lo, hi, deg: int = 48):
    """Stable evaluator for an exact expression on a segment [lo, hi].

    The exact closed forms of the transition antiderivatives split into
    hugely cancelling pieces (polynomial + big*log), so double-precision
    evaluation loses ~8 digits.  Instead, sample the exact expression at
    Chebyshev nodes with 40-digit arithmetic and interpolate; the function is
    smooth, so the fit is accurate to ~1e-15 and evaluation is stable.
    """
    lo_f, hi_f = float(lo), float(hi)
    k = np.arange(deg + 1)
    nodes = np.cos(np.pi * (2 * k + 1) / (2 * (deg + 1)))
    ts = 0.5 * (hi_f - lo_f) * nodes + 0.5 * (hi_f + lo_f)
    vals = np.array([float(e.subs(t, sp.Float(tv, 45)).evalf(40)) for tv in ts])
    coef = np.polynomial.chebyshev.chebfit(nodes, vals, deg)

    def call(r):
        r = np.asarray(r, dtype=float)
        u = (2 * r - (hi_f + lo_f)) / (hi_f - lo_f)
        return np.polynomial.chebyshev.chebval(u, coef)

    return call


# --------------------------------------------------------------------------
# log_fold_interp
# --------------------------------------------------------------------------

def make_log_fold_interp(name: str = "logfold", a: float = 1.0,
                         b: float = 7.2) -> ProfileSpec:
    """Monotone interpolation: r^2 below ``a``, log r above ``b``.

    Requires ``1 <= a < b <= e^2`` so the fixed branches are honoured; the
    endpoints should be rational (symbolic irrational constants make the
    exact piecewise algebra explode).
    """
    if not (1.0 <= a < b <= E2 + 1e-12):
        raise ProfileError(f"transition interval [{a}, {b}] not inside [1, e^2]")
    a_r = sp.Rational(sp.nsimplify(a, rational=True))
    b_r = sp.Rational(sp.nsimplify(b, rational=True))
    t = sp.Symbol("t")

    # the 2t decay must be fast: its integral eats into the total rise
    # budget log(b) - a^2, which can be thin for narrow intervals; shrink
    # the end matching spans until the interior bump height comes out
    # positive (strict monotonicity)
    target = sp.log(b_r) - a_r**2
    c = (a_r + b_r) / 2                 # bump midpoint
    for shrink in range(9):
        m1 = a_r + (b_r - a_r) / (32 * 2**shrink)
        m2 = b_r - (b_r - a_r) / (8 * 2**shrink)
        beta = 2 * t * (1 - _step7((t - a_r) / (m1 - a_r)))
        gamma = _step7((t - m2) / (b_r - m2)) / t
        bump_lo = _step7((t - a_r) / (c - a_r))
        bump_hi = 1 - _step7((t - c) / (b_r - c))
        I_fixed = _definite(beta, t, a_r, m1) + _definite(gamma, t, m2, b_r)
        I_bump = _definite(bump_lo, t, a_r, c) + _definite(bump_hi, t, c, b_r)
        c_exact = (target - I_fixed) / I_bump
        if float(c_exact) > 0:
            break
    else:
        raise ProfileError(f"no monotone interpolation with interval [{a}, {b}]")
    segs = [(a_r, m1), (m1, c), (c, m2), (m2, b_r)]
    # keep the bump height atomic while expanding: distributing its exact
    # log-bearing value over polynomial coefficients creates huge terms that
    # cancel catastrophically in float arithmetic
    C = sp.Symbol("__bump_height")

    def g_of(i):
        base = {0: beta, 3: gamma}.get(i, sp.Integer(0))
        bump = bump_lo if i <= 1 else bump_hi
        return base + C * bump

    # composed (unexpanded) forms evaluate stably; expansion only feeds the
    # exact antiderivative
    g_comp = [g_of(i) for i in range(4)]
    gp_comp = [sp.diff(g, t) for g in g_comp]
    G_exprs, acc = [], a_r**2
    for (lo, hi), g in zip(segs, g_comp):
        anti = _integrate_poly_over_t(sp.expand(g), t)
        G_exprs.append(anti - anti.subs(t, lo) + acc)
        acc = sp.expand(G_exprs[-1].subs(t, hi))
    # seam exactness: acc is linear in C and the solved height makes it log(b)
    assert abs(float(acc.subs(C, c_exact) - sp.log(b_r))) < 1e-12
    CF = c_exact.evalf(30)

    breaks = [a_r, m1, c, m2, b_r]
    val_segs = [_cheb_fn(G.subs(C, c_exact), t, lo, hi)
                for (lo, hi), G in zip(segs, G_exprs)]
    d1_segs = [_fn(t, g.subs(C, CF)) for g in g_comp]
    d2_segs = [_fn(t, g.subs(C, CF)) for g in gp_comp]
    val = _piecewise_eval(breaks, _fn(t, t**2), val_segs, np.log)
    d1 = _piecewise_eval(breaks, _fn(t, 2 * t), d1_segs, lambda r: 1.0 / r)
    d2 = _piecewise_eval(breaks, lambda r: np.full_like(r, 2.0), d2_segs,
                         lambda r: -1.0 / r**2)

    # squared-argument flavour by composition: F(rho) = f(sqrt(rho)),
    # F' = g(u)/(2u), F'' = g'(u)/(4 rho) - g(u)/(4 rho u) at u = sqrt(rho)
    def val_sq(s):
        return val(np.sqrt(np.asarray(s, dtype=float)))

    def d1_sq(s):
        s = np.asarray(s, dtype=float)
        u_ = np.sqrt(s)
        return np.where(s <= float(a_r) ** 2, 1.0,
                        d1(u_) / (2 * np.maximum(u_, 1e-300)))

    def d2_sq(s):
        s = np.asarray(s, dtype=float)
        u_ = np.sqrt(np.maximum(s, 1e-300))
        return np.where(s <= float(a_r) ** 2, 0.0,
                        d2(u_) / (4 * np.maximum(s, 1e-300))
                        - d1(u_) / (4 * np.maximum(s * u_, 1e-300)))

    a2f, b2f = float(a_r**2), float(b_r**2)
    ex.register_profile(name, (val, d1, d2), regions={
        0: [(-1e300, float(a_r), lambda s: s**2)],
        1: [(-1e300, float(a_r), lambda s: 2 * s)],
        2: [(-1e300, float(a_r), lambda s: sp.Integer(2))],
    })
    ex.register_profile(name + "__sq", (val_sq, d1_sq, d2_sq), regions={
        0: [(-1e300, a2f, lambda s: s), (b2f, 1e300, lambda s: sp.log(s) / 2)],
        1: [(-1e300, a2f, lambda s: sp.Integer(1)), (b2f, 1e300, lambda s: 1 / (2 * s))],
        2: [(-1e300, a2f, lambda s: sp.Integer(0)), (b2f, 1e300, lambda s: -1 / (2 * s**2))],
    })
    spec = ProfileSpec(name, "log_fold_interp",
                       {"a": float(a_r), "b": float(b_r), "bump_height": float(c_exact)},
                       val, d1, d2)
    return spec


# --------------------------------------------------------------------------
# radial_bump
# --------------------------------------------------------------------------

def make_radial_bump(name: str, r0: float, r1: float) -> ProfileSpec:
    """Monotone bump: 0 for r <= r0, 1 for r >= r1.

    The step runs in the radius itself (a step in the squared radius is too
    steep at its outer end: r * f'(r) would exceed 2 for any radii, which
    kills fiberwise positivity in the critical-ball model).  The
    squared-argument flavour composes with sqrt, which is harmless because
    the profile is identically 0 near 0 when r0 > 0.
    """
    if not (0 <= r0 < r1):
        raise ProfileError(f"radii out of order: r0={r0}, r1={r1}")
    r0s, r1s = sp.nsimplify(r0), sp.nsimplify(r1)
    r = sp.Symbol("r")
    w = (r - r0s) / (r1s - r0s)
    s = _step7(w)
    sp1, sp2 = sp.diff(s, r), sp.diff(s, r, 2)

    def zeros(r_):
        return np.zeros_like(r_)

    def ones(r_):
        return np.ones_like(r_)

    rb = [r0s, r1s]
    val = _piecewise_eval(rb, zeros, [_fn(r, s)], ones)
    d1 = _piecewise_eval(rb, zeros, [_fn(r, sp1)], zeros)
    d2 = _piecewise_eval(rb, zeros, [_fn(r, sp2)], zeros)

    def val_sq(s_):
        return val(np.sqrt(np.maximum(np.asarray(s_, dtype=float), 0.0)))

    def d1_sq(s_):
        s_ = np.asarray(s_, dtype=float)
        u_ = np.sqrt(np.maximum(s_, 1e-300))
        return d1(u_) / (2 * u_)

    def d2_sq(s_):
        s_ = np.asarray(s_, dtype=float)
        u_ = np.sqrt(np.maximum(s_, 1e-300))
        den = np.maximum(s_, 1e-300)
        return d2(u_) / (4 * den) - d1(u_) / (4 * den * u_)

    p0f, p1f = float(r0s**2), float(r1s**2)
    zero = lambda s_: sp.Integer(0)
    one = lambda s_: sp.Integer(1)
    ex.register_profile(name, (val, d1, d2), regions={
        0: [(-1e300, r0, zero), (r1, 1e300, one)],
        1: [(-1e300, r0, zero), (r1, 1e300, zero)],
        2: [(-1e300, r0, zero), (r1, 1e300, zero)],
    })
    ex.register_profile(name + "__sq", (val_sq, d1_sq, d2_sq), regions={
        0: [(-1e300, p0f, zero), (p1f, 1e300, one)],
        1: [(-1e300, p0f, zero), (p1f, 1e300, zero)],
        2: [(-1e300, p0f, zero), (p1f, 1e300, zero)],
    })
    return ProfileSpec(name, "radial_bump", {"r0": float(r0), "r1": float(r1)},
                       val, d1, d2)


def make_profile(name: str, kind: str, params: dict) -> ProfileSpec:
    if kind == "log_fold_interp":
        return make_log_fold_interp(name, params.get("a", 1.0),
                                    params.get("b", E2))
    if kind == "radial_bump":
        return make_radial_bump(name, params["r0"], params["r1"])
    raise ProfileError(f"unknown profile kind {kind!r}")


# --------------------------------------------------------------------------
# builtin: x*log(x) with a finite evaluator at 0 (used for b-normal windows)
# --------------------------------------------------------------------------

def _xlogx_val(s):
    s = np.asarray(s, dtype=float)
    return np.where(s > 0, s * np.log(np.maximum(s, 1e-300)), 0.0)


def _xlogx_d1(s):
    s = np.asarray(s, dtype=float)
    return np.log(np.maximum(s, 1e-300)) + 1.0


def _xlogx_d2(s):
    s = np.asarray(s, dtype=float)
    return 1.0 / np.maximum(s, 1e-300)


ex.register_profile("xlogx", (_xlogx_val, _xlogx_d1, _xlogx_d2),
                    regions={0: [(0.0, 0.0, lambda s: sp.Integer(0))]})


def xlogx(arg: sp.Expr) -> sp.Expr:
    """Symbolic leaf for ``arg * log(arg)`` extended by 0 at arg = 0."""
    return ex.profile_expr("xlogx", arg)
