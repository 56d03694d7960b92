"""Smooth scalar coefficients on a coordinate chart.

Expressions are sympy trees over chart coordinates ``x1..x2n`` built from
exact rationals, ``+ - * / ^k``, ``sin``, ``cos``, ``exp``, ``pi`` and named
profile functions.  Profile functions are opaque one-variable leaves whose
derivatives are further opaque leaves; their numeric evaluators and optional
closed forms on flat regions are registered by :mod:`bsymp.profiles`.

The module also owns the scene-file grammar (parser and printer, exact for
rational constants), symbolic zero-testing for the polynomial/trig/rational
fragment, and vectorised numeric evaluation.
"""

from __future__ import annotations

import re
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np
import sympy as sp


class ExprError(ValueError):
    """Malformed expression text or unsupported construct."""


# --------------------------------------------------------------------------
# coordinates
# --------------------------------------------------------------------------

_COORDS: dict[int, sp.Symbol] = {}


def coord(i: int) -> sp.Symbol:
    """The chart coordinate ``x<i>`` (1-based)."""
    if i < 1:
        raise ExprError(f"coordinate index must be >= 1, got {i}")
    if i not in _COORDS:
        _COORDS[i] = sp.Symbol(f"x{i}", real=True)
    return _COORDS[i]


def coords(dim: int) -> tuple[sp.Symbol, ...]:
    return tuple(coord(i) for i in range(1, dim + 1))


def coord_index(sym: sp.Symbol) -> int:
    m = re.fullmatch(r"x(\d+)", sym.name)
    if not m:
        raise ExprError(f"not a chart coordinate: {sym}")
    return int(m.group(1))


# --------------------------------------------------------------------------
# profile atoms
# --------------------------------------------------------------------------

# name -> dict with keys:
#   "evaluators": tuple of vectorised callables, index = derivative order
#   "regions":    dict order -> list of (lo, hi, builder) with builder(arg)->Expr
_PROFILE_REGISTRY: dict[str, dict] = {}

_ATOM_CLASSES: dict[tuple[str, int], type] = {}

_NAME_RX = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


def register_profile(name: str, evaluators: Sequence[Callable],
                     regions: dict[int, list] | None = None) -> None:
    """Register numeric evaluators (order 0..k) for a named profile."""
    if not _NAME_RX.match(name):
        raise ExprError(f"bad profile name {name!r}")
    if name in _PROFILE_REGISTRY:
        # re-registration (e.g. a scene reusing a profile name) may swap the
        # evaluators; drop compiled callables that closed over the old ones
        _EVAL_CACHE.clear()
    _PROFILE_REGISTRY[name] = {
        "evaluators": tuple(evaluators),
        "regions": dict(regions or {}),
    }


def profile_registered(name: str) -> bool:
    return name in _PROFILE_REGISTRY


def _atom_class(name: str, order: int) -> type:
    key = (name, order)
    if key in _ATOM_CLASSES:
        return _ATOM_CLASSES[key]
    clsname = f"pf__{name}" + (f"__d{order}" if order else "")

    def fdiff(self, argindex=1):
        return _atom_class(name, order + 1)(self.args[0])

    cls = type(clsname, (sp.Function,), {
        "nargs": (1,),
        "profile_name": name,
        "deriv_order": order,
        "fdiff": fdiff,
    })
    _ATOM_CLASSES[key] = cls
    return cls


def profile_expr(name: str, arg: sp.Expr, order: int = 0) -> sp.Expr:
    """The symbolic leaf ``profile(name, arg)`` (or its order-th derivative)."""
    if not _NAME_RX.match(name):
        raise ExprError(f"bad profile name {name!r}")
    return _atom_class(name, order)(sp.sympify(arg))


def _is_profile_atom(e: sp.Basic) -> bool:
    return isinstance(e, sp.Function) and hasattr(type(e), "profile_name")


def profile_atoms(e: sp.Expr) -> list[sp.Function]:
    return [a for a in e.atoms(sp.Function) if _is_profile_atom(a)]


def has_profile(e: sp.Expr) -> bool:
    return any(_is_profile_atom(a) for a in e.atoms(sp.Function))


def substitute_profile_region(e: sp.Expr, name: str, lo: float, hi: float) -> sp.Expr:
    """Replace atoms of profile ``name`` by their closed form on [lo, hi].

    The caller asserts that on the domain of interest every occurrence of the
    profile's argument lies in ``[lo, hi]``.  Atoms whose profile has no
    registered region covering the interval are left untouched.
    """
    if name not in _PROFILE_REGISTRY:
        raise ExprError(f"unknown profile {name!r}")
    regions = _PROFILE_REGISTRY[name]["regions"]
    repl = {}
    for atom in profile_atoms(e):
        if atom.profile_name != name:
            continue
        for (rlo, rhi, builder) in regions.get(atom.deriv_order, []):
            if rlo <= lo and hi <= rhi:
                repl[atom] = builder(atom.args[0])
                break
    return e.xreplace(repl) if repl else e


# --------------------------------------------------------------------------
# parsing (scene-file grammar)
# --------------------------------------------------------------------------

_TOKEN_RX = re.compile(
    r"\s*(?:(?P<num>\d+\.\d+|\d+)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op>[-+*/^(),]))"
)

_FUNCS = {"sin": sp.sin, "cos": sp.cos, "exp": sp.exp}


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens, pos = [], 0
    while pos < len(text):
        m = _TOKEN_RX.match(text, pos)
        if not m or m.end() == pos:
            raise ExprError(f"bad character at position {pos}: {text[pos:pos + 10]!r}")
        if m.group("num"):
            tokens.append(("num", m.group("num")))
        elif m.group("name"):
            tokens.append(("name", m.group("name")))
        else:
            tokens.append(("op", m.group("op")))
        pos = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[tuple[str, str]], max_coord: int | None):
        self.toks = tokens
        self.i = 0
        self.max_coord = max_coord

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None)

    def next(self):
        tok = self.peek()
        self.i += 1
        return tok

    def expect(self, kind, value=None):
        k, v = self.next()
        if k != kind or (value is not None and v != value):
            raise ExprError(f"expected {value or kind}, got {v!r}")
        return v

    def parse(self) -> sp.Expr:
        e = self.expr()
        if self.i != len(self.toks):
            raise ExprError(f"trailing input: {self.toks[self.i:]}")
        return e

    def expr(self) -> sp.Expr:
        e = self.term()
        while self.peek() == ("op", "+") or self.peek() == ("op", "-"):
            _, op = self.next()
            rhs = self.term()
            e = e + rhs if op == "+" else e - rhs
        return e

    def term(self) -> sp.Expr:
        e = self.unary()
        while self.peek() == ("op", "*") or self.peek() == ("op", "/"):
            _, op = self.next()
            rhs = self.unary()
            e = e * rhs if op == "*" else e / rhs
        return e

    def unary(self) -> sp.Expr:
        if self.peek() == ("op", "-"):
            self.next()
            return -self.unary()
        return self.power()

    def power(self) -> sp.Expr:
        base = self.atom()
        if self.peek() == ("op", "^"):
            self.next()
            return base ** self.exponent()
        return base

    def exponent(self) -> int:
        sign = 1
        if self.peek() == ("op", "-"):
            self.next()
            sign = -1
        paren = False
        if self.peek() == ("op", "("):
            self.next()
            paren = True
            if self.peek() == ("op", "-"):
                self.next()
                sign = -sign
        k, v = self.next()
        if k != "num" or "." in v:
            raise ExprError(f"exponent must be an integer, got {v!r}")
        if paren:
            self.expect("op", ")")
        return sign * int(v)

    def atom(self) -> sp.Expr:
        k, v = self.next()
        if k == "num":
            return sp.Rational(v) if "." in v else sp.Integer(v)
        if k == "op" and v == "(":
            e = self.expr()
            self.expect("op", ")")
            return e
        if k == "name":
            if v == "pi":
                return sp.pi
            if v in _FUNCS:
                self.expect("op", "(")
                arg = self.expr()
                self.expect("op", ")")
                return _FUNCS[v](arg)
            m = re.fullmatch(r"profile(?:_d(\d+))?", v)
            if m:
                order = int(m.group(1) or 0)
                self.expect("op", "(")
                _, name = self.next()
                if not name or not _NAME_RX.match(name):
                    raise ExprError(f"bad profile name {name!r}")
                self.expect("op", ",")
                arg = self.expr()
                self.expect("op", ")")
                return profile_expr(name, arg, order)
            m = re.fullmatch(r"x(\d+)", v)
            if m:
                idx = int(m.group(1))
                if idx < 1 or (self.max_coord is not None and idx > self.max_coord):
                    raise ExprError(f"coordinate x{idx} out of range (dim {self.max_coord})")
                return coord(idx)
        raise ExprError(f"unexpected token {v!r}")


def parse_scalar(text: str, dim: int | None = None) -> sp.Expr:
    """Parse the scene-file expression grammar into a sympy expression."""
    if not isinstance(text, str) or not text.strip():
        raise ExprError("empty expression")
    return _Parser(_tokenize(text), dim).parse()


# --------------------------------------------------------------------------
# printing (inverse of the grammar; exact for rationals)
# --------------------------------------------------------------------------

def scalar_to_str(e: sp.Expr) -> str:
    return _print(sp.sympify(e), 0)


# precedence levels: 0 add, 1 mul, 2 unary, 3 pow, 4 atom
def _paren(s: str, level: int, need: int) -> str:
    return f"({s})" if level < need else s


def _print(e: sp.Expr, need: int) -> str:
    if e is sp.pi:
        return "pi"
    if isinstance(e, sp.Integer):
        s = str(e)
        return _paren(s, 2 if e < 0 else 4, need)
    if isinstance(e, sp.Rational):
        s = f"{e.p}/{e.q}"
        return _paren(s, 1 if e >= 0 else 0, need)
    if isinstance(e, sp.Float):
        frac = Fraction(float(e)).limit_denominator(10 ** 12)
        return _paren(f"{frac.numerator}/{frac.denominator}", 1, need)
    if isinstance(e, sp.Symbol):
        return e.name
    if isinstance(e, sp.Add):
        parts = []
        for i, t in enumerate(sp.Add.make_args(e)):
            s = _print(t, 1)
            if i and not s.startswith("-"):
                s = "+ " + s
            elif i:
                s = "- " + s.lstrip("-")
            parts.append(s)
        return _paren(" ".join(parts), 0, need)
    if isinstance(e, sp.Mul):
        num, den = [], []
        sign = ""
        for f in sp.Mul.make_args(e):
            if f is sp.S.NegativeOne:
                sign = "-" if not sign else ""
                continue
            if isinstance(f, sp.Rational) and not isinstance(f, sp.Integer):
                if f.p < 0:
                    sign = "-" if not sign else ""
                if abs(f.p) != 1:
                    num.append(str(abs(f.p)))
                den.append(str(f.q))
                continue
            if isinstance(f, sp.Integer) and f < 0:
                sign = "-" if not sign else ""
                if f != -1:
                    num.append(str(-f))
                continue
            if isinstance(f, sp.Pow) and isinstance(f.exp, sp.Integer) and f.exp < 0:
                den.append(_print(f.base ** (-f.exp), 3))
                continue
            num.append(_print(f, 1))
        s = "*".join(num) if num else "1"
        for d in den:
            s += f"/{d}"
        s = sign + s
        return _paren(s, 1 if not sign else 0, need)
    if isinstance(e, sp.Pow):
        if isinstance(e.exp, sp.Integer):
            k = int(e.exp)
            base = _print(e.base, 4)
            if k >= 0:
                return _paren(f"{base}^{k}", 3, need)
            return _paren(f"1/{base}^{-k}", 1, need)
        raise ExprError(f"cannot serialize non-integer power: {e}")
    if _is_profile_atom(e):
        fname = "profile" if e.deriv_order == 0 else f"profile_d{e.deriv_order}"
        return f"{fname}({e.profile_name}, {_print(e.args[0], 0)})"
    if isinstance(e, (sp.sin, sp.cos, sp.exp)):
        name = type(e).__name__
        return f"{name}({_print(e.args[0], 0)})"
    raise ExprError(f"cannot serialize expression node: {e} ({type(e).__name__})")


# --------------------------------------------------------------------------
# zero testing
# --------------------------------------------------------------------------

def is_zero_symbolic(e: sp.Expr) -> bool | None:
    """Decide ``e == 0`` by normal form.

    Returns True/False for the polynomial / trigonometric / rational
    fragment; None when the expression contains opaque profile leaves and
    does not cancel syntactically (callers fall back to sampling).
    """
    e = sp.sympify(e)
    if e.is_zero:
        return True
    opaque = has_profile(e)
    r = sp.expand(e)
    if r.is_zero:
        return True
    if r.is_number:
        return bool(r == 0)
    try:
        r = sp.cancel(r)
    except sp.PolynomialError:
        pass
    if r.is_zero:
        return True
    if opaque:
        return None
    if r.has(sp.sin, sp.cos):
        r2 = sp.trigsimp(r)
        if sp.expand(r2).is_zero:
            return True
        r = r2
    r3 = sp.simplify(r) if r.count_ops() < 400 else r
    if r3.is_zero:
        return True
    return False


def sample_zero(exprs: Iterable[sp.Expr], points: np.ndarray, dim: int,
                tol: float) -> tuple[bool, float]:
    """Max |value| over points for each expression; True iff all below tol."""
    exprs = list(exprs)
    if not exprs:
        return True, 0.0
    vals = evaluate_exprs(exprs, points, dim)
    worst = float(np.max(np.abs(vals))) if vals.size else 0.0
    return worst <= tol, worst


# --------------------------------------------------------------------------
# restriction (substitution with removable-singularity handling)
# --------------------------------------------------------------------------

_BAD = (sp.nan, sp.zoo, sp.oo, -sp.oo)


def substitute_limit(e: sp.Expr, sym: sp.Symbol, val) -> sp.Expr:
    """``e.subs(sym, val)`` with a limit fallback for removable 0/0 points."""
    e = sp.sympify(e)
    # profile atoms whose argument becomes a definite number at sym=val can
    # be replaced by their regional closed form first; this removes factors
    # that are identically constant near the substitution point and keeps
    # opaque leaves out of the limit machinery.
    repl = {}
    for atom in profile_atoms(e):
        arg_at = atom.args[0].subs(sym, val)
        if not arg_at.is_number or arg_at.has(*_BAD):
            continue
        info = _PROFILE_REGISTRY.get(atom.profile_name)
        if not info:
            continue
        for (rlo, rhi, builder) in info["regions"].get(atom.deriv_order, []):
            if rlo <= float(arg_at) <= rhi:
                repl[atom] = builder(atom.args[0])
                break
    if repl:
        e = e.xreplace(repl)
    r = e.subs(sym, val)
    if r.has(*_BAD):
        if has_profile(e):
            raise ExprError(
                f"cannot restrict {e} at {sym}={val}: opaque profile leaf "
                "with singular companion")
        r = sp.limit(e, sym, val, dir="+-")
        if r.has(*_BAD):
            raise ExprError(f"expression singular at {sym}={val}: {e}")
    return r


# --------------------------------------------------------------------------
# numeric evaluation
# --------------------------------------------------------------------------

_EVAL_CACHE: dict = {}


def _profile_modules(exprs: Sequence[sp.Expr]) -> dict:
    mod = {}
    for e in exprs:
        for atom in profile_atoms(e):
            name, order = atom.profile_name, atom.deriv_order
            info = _PROFILE_REGISTRY.get(name)
            if info is None:
                raise ExprError(f"profile {name!r} has no registered evaluators")
            evs = info["evaluators"]
            if order >= len(evs):
                raise ExprError(
                    f"profile {name!r}: derivative order {order} not available "
                    f"(have 0..{len(evs) - 1})")
            mod[type(atom).__name__] = evs[order]
    return mod


def evaluate_exprs(exprs: Sequence[sp.Expr], points: np.ndarray,
                   dim: int) -> np.ndarray:
    """Evaluate expressions on points of shape (N, dim) -> array (N, len)."""
    exprs = [sp.sympify(e) for e in exprs]
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != dim:
        raise ExprError(f"points have dim {points.shape[1]}, expected {dim}")
    key = (tuple(exprs), dim)
    fn = _EVAL_CACHE.get(key)
    if fn is None:
        syms = coords(dim)
        mod = _profile_modules(exprs)
        fn = sp.lambdify(syms, list(exprs), modules=[mod, "numpy"])
        _EVAL_CACHE[key] = fn
    cols = fn(*(points[:, i] for i in range(dim)))
    out = np.empty((points.shape[0], len(exprs)), dtype=float)
    for j, c in enumerate(cols):
        out[:, j] = np.broadcast_to(np.asarray(c, dtype=float), (points.shape[0],))
    return out


def evaluate_scalar(e: sp.Expr, point: Sequence[float], dim: int) -> float:
    return float(evaluate_exprs([e], np.asarray(point, float)[None, :], dim)[0, 0])
