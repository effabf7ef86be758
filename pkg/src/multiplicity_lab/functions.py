"""Scalar functions and functionals given by builtin names or expressions.

Expressions are parsed with sympy, which also supplies exact derivatives
and, when it can, closed-form antiderivatives.  Everything handed out is
vectorised over numpy arrays.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import sympy as sp
from scipy import integrate
from sympy.integrals.manualintegrate import manualintegrate

from .errors import ConfigError, DomainError

_FD_REL = 1e-6


def fd_step(x):
    return _FD_REL * (1.0 + np.abs(x))


def _vectorise(fn):
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        out = fn(x)
        return np.broadcast_to(np.asarray(out, dtype=float), x.shape).copy() if np.ndim(x) else float(out)

    return wrapped


@dataclass(frozen=True)
class ScalarFunction:
    """A real function of one real variable.

    ``deriv`` and ``antideriv`` are optional closed forms; without them the
    derivative falls back to a central difference with step 1e-6 (1 + |x|)
    and the antiderivative to adaptive quadrature.
    """

    name: str
    fn: object
    deriv: object = None
    antideriv: object = None

    def __call__(self, x):
        return self.fn(x)

    def derivative(self, x):
        if self.deriv is not None:
            return self.deriv(x)
        x = np.asarray(x, dtype=float)
        h = fd_step(x)
        return (self.fn(x + h) - self.fn(x - h)) / (2 * h)


def antiderivative(g, xi, upper=None):
    """int_0^xi g.  Closed form when registered, otherwise adaptive quadrature
    at relative tolerance 1e-10.  ``upper`` bounds the admissible domain
    [0, upper] for coefficient-type integrands that blow up at the end."""
    if upper is not None and not (0.0 <= xi <= upper):
        raise DomainError(f"xi = {xi!r} outside [0, {upper!r}]")
    if g.antideriv is not None:
        return float(g.antideriv(xi))
    return quad_antiderivative(g, xi)


def quad_antiderivative(g, xi):
    if xi == 0:
        return 0.0
    val, _ = integrate.quad(lambda s: float(g(s)), 0.0, float(xi), epsabs=1e-14, epsrel=1e-10, limit=200)
    return float(val)


# --------------------------------------------------------------------------
# expressions
# --------------------------------------------------------------------------

_MODULES = ["numpy"]


def from_expression(expr, var="u", **params):
    """A :class:`ScalarFunction` from a sympy-parsable expression in ``var``."""
    sym = sp.Symbol(var)
    local = {var: sym}
    local.update({k: sp.Symbol(k) for k in params})
    try:
        e = sp.sympify(expr, locals=local)
    except (sp.SympifyError, TypeError) as exc:
        raise ConfigError(f"cannot parse expression {expr!r}: {exc}") from exc
    e = e.subs({sp.Symbol(k): v for k, v in params.items()})
    extra = e.free_symbols - {sym}
    if extra:
        raise ConfigError(f"expression {expr!r} has unbound symbols {sorted(map(str, extra))}")
    fn = _vectorise(sp.lambdify(sym, e, _MODULES))
    d = _vectorise(sp.lambdify(sym, sp.diff(e, sym), _MODULES))
    return ScalarFunction(str(expr), fn, d, _closed_primitive(e, sym, fn))


def _closed_primitive(e, sym, fn):
    # rule-based integration only: full sp.integrate can search for seconds
    try:
        prim = manualintegrate(e, sym)
    except Exception:  # sympy gives up in many ways; quadrature covers it
        return None
    if prim.has(sp.Integral) or prim.has(sp.Piecewise):
        return None
    prim = prim - prim.subs(sym, 0)
    anti = _vectorise(sp.lambdify(sym, prim, _MODULES))
    # guard against primitives that jump across a branch cut
    for xi in (-0.37, 0.29, 0.81):
        try:
            with warnings.catch_warnings(), np.errstate(all="ignore"):
                warnings.simplefilter("ignore")
                ref, _ = integrate.quad(lambda s: float(fn(s)), 0.0, xi, epsabs=1e-13)
                val = float(anti(xi))
        except (ValueError, ZeroDivisionError, OverflowError):
            continue
        if not np.isfinite(val) or abs(val - ref) > 1e-8 * (1 + abs(ref)):
            return None
    return anti


# --------------------------------------------------------------------------
# builtins
# --------------------------------------------------------------------------

REACTIONS = {
    "identity": "u",
    "zero": "0",
    "one": "1",
    "cube": "u**3",
    "sin": "sin(u)",
    "tanh": "tanh(u)",
}


def reaction(spec):
    """The reaction term f from a builtin name or an expression in ``u``."""
    if isinstance(spec, (int, float)):
        spec = repr(float(spec))
    return from_expression(REACTIONS.get(spec, spec), "u")


def _reciprocal(rho):
    return ScalarFunction(
        "reciprocal",
        lambda x: 1.0 / (rho - np.asarray(x, dtype=float)),
        lambda x: 1.0 / (rho - np.asarray(x, dtype=float)) ** 2,
        lambda xi: -np.log((rho - np.asarray(xi, dtype=float)) / rho),
    )


def _reciprocal_square(rho):
    return ScalarFunction(
        "reciprocal_square",
        lambda x: rho / (rho - np.asarray(x, dtype=float)) ** 2,
        lambda x: 2.0 * rho / (rho - np.asarray(x, dtype=float)) ** 3,
        lambda xi: np.asarray(xi, dtype=float) / (rho - np.asarray(xi, dtype=float)),
    )


def _constant(rho):
    return ScalarFunction(
        "constant",
        lambda x: np.ones_like(np.asarray(x, dtype=float)) if np.ndim(x) else 1.0,
        lambda x: np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0,
        lambda xi: np.asarray(xi, dtype=float) * 1.0,
    )


COEFFICIENTS = {
    "reciprocal": _reciprocal,
    "reciprocal_square": _reciprocal_square,
    "constant": _constant,
}


def coefficient(spec, rho):
    """The nonlocal coefficient omega on [0, rho): builtin name or expression
    in ``x`` (the symbol ``rho`` is substituted)."""
    if spec in COEFFICIENTS:
        return COEFFICIENTS[spec](float(rho))
    return from_expression(spec, "x", rho=float(rho))


# --------------------------------------------------------------------------
# functionals on R^n
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Functional:
    """A C^1 functional on R^n; ``value`` and ``grad`` take (m, n) batches."""

    name: str
    dim: int
    value_batch: object
    grad_batch: object = None

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return float(self.value_batch(x[None, :])[0])
        return self.value_batch(x)

    def grad(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        X = x[None, :] if single else x
        if self.grad_batch is not None:
            g = self.grad_batch(X)
        else:
            g = fd_gradient(self.value_batch, X)
        return g[0] if single else g


def fd_gradient(value_batch, X):
    """Central differences with step 1e-6 (1 + |x_i|) per coordinate."""
    X = np.asarray(X, dtype=float)
    g = np.empty_like(X)
    for c in range(X.shape[1]):
        h = fd_step(X[:, c])
        e = np.zeros_like(X)
        e[:, c] = h
        g[:, c] = (value_batch(X + e) - value_batch(X - e)) / (2 * h)
    return g


FUNCTIONALS = {
    "zero": "0",
    "cos": "cos(x0)",
    "sin": "sin(x0)",
    "cos_sum": "{cos_sum}",
}


def functional(spec, dim=1, analytic_gradient=True):
    """A functional from a builtin name or an expression in x0, ..., x{n-1}.

    With ``analytic_gradient=False`` the gradient is left to central
    differences, as for data known only through an evaluator.
    """
    syms = sp.symbols(f"x0:{dim}")
    text = FUNCTIONALS.get(spec, spec)
    text = text.replace("{cos_sum}", "+".join(f"cos(x{i})" for i in range(dim)))
    local = {str(s): s for s in syms}
    try:
        e = sp.sympify(text, locals=local)
    except (sp.SympifyError, TypeError) as exc:
        raise ConfigError(f"cannot parse functional {spec!r}: {exc}") from exc
    if e.free_symbols - set(syms):
        raise ConfigError(f"functional {spec!r} uses symbols outside x0..x{dim - 1}")
    f = sp.lambdify(syms, e, _MODULES)

    def value_batch(X):
        X = np.asarray(X, dtype=float)
        return np.broadcast_to(np.asarray(f(*X.T), dtype=float), (X.shape[0],)).copy()

    grad_batch = None
    if analytic_gradient:
        parts = [sp.lambdify(syms, sp.diff(e, s), _MODULES) for s in syms]

        def grad_batch(X):
            X = np.asarray(X, dtype=float)
            cols = [np.broadcast_to(np.asarray(p(*X.T), dtype=float), (X.shape[0],)) for p in parts]
            return np.stack(cols, axis=1)

    return Functional(str(spec), dim, value_batch, grad_batch)
