"""Right-hand sides ``f(x, t)`` and their primitives ``F(x, t)``.

Every nonlinearity is evaluated vectorially: ``x`` is an array of vertex
indices (or ``None`` when the caller passes one value per vertex of the
level in order) and ``t`` an array of the same length. Implementations
must be free of side effects; solvers call them concurrently from
independent path points.
"""
from __future__ import annotations

import ast
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

__all__ = [
    "Nonlinearity",
    "PowerSum",
    "ExampleF1",
    "CallableNonlinearity",
    "ExpressionNonlinearity",
    "LinearCombination",
    "ProblemSpec",
    "power_problem",
    "psi_nonlinearity",
    "example_f1",
    "signed_power",
    "C2Report",
    "check_C2",
    "from_config",
]


def signed_power(t, p: float) -> np.ndarray:
    """``|t|**(p-2) * t`` written as ``sign(t) * |t|**(p-1)`` (zero at ``t = 0``)."""
    t = np.asarray(t, dtype=float)
    return np.sign(t) * np.abs(t) ** (p - 1.0)


def _coef(a, x, t):
    """Per-vertex coefficient lookup broadcast against ``t``."""
    if np.isscalar(a):
        return a
    a = np.asarray(a, dtype=float)
    if x is None:
        return a if a.shape == np.shape(t) else a[: np.size(t)]
    return a[np.asarray(x)]


class Nonlinearity:
    """Base class; subclasses implement :meth:`f` and :meth:`F`."""

    family = "generic"

    def f(self, x, t) -> np.ndarray:
        raise NotImplementedError

    def F(self, x, t) -> np.ndarray:
        raise NotImplementedError

    def df(self, x, t) -> np.ndarray:
        """``d f / d t``; central differences unless overridden."""
        t = np.asarray(t, dtype=float)
        h = 1e-6 * np.maximum(1.0, np.abs(t))
        return (self.f(x, t + h) - self.f(x, t - h)) / (2.0 * h)

    def metadata(self) -> dict:
        return {"family": self.family}

    def __add__(self, other: "Nonlinearity") -> "LinearCombination":
        return LinearCombination(((1.0, self), (1.0, other)))

    def __mul__(self, c: float) -> "LinearCombination":
        return LinearCombination(((float(c), self),))

    __rmul__ = __mul__


@dataclass(frozen=True)
class LinearCombination(Nonlinearity):
    """``sum_k c_k f_k``; used for ``lambda f + eta g`` perturbations."""

    terms: tuple[tuple[float, Nonlinearity], ...]
    family = "combination"

    def f(self, x, t):
        return sum(c * nl.f(x, t) for c, nl in self.terms)

    def F(self, x, t):
        return sum(c * nl.F(x, t) for c, nl in self.terms)

    def df(self, x, t):
        return sum(c * nl.df(x, t) for c, nl in self.terms)

    def metadata(self):
        return {"family": self.family,
                "terms": [[c, nl.metadata()] for c, nl in self.terms]}


@dataclass(frozen=True)
class PowerSum(Nonlinearity):
    """``f(t) = sum_k c_k |t|**(p_k-2) t`` with ``F(t) = sum_k c_k |t|**p_k / p_k``."""

    terms: tuple[tuple[float, float], ...]
    family = "power"

    def f(self, x, t):
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for c, p in self.terms:
            if c:
                out = out + c * signed_power(t, p)
        return out

    def F(self, x, t):
        a = np.abs(np.asarray(t, dtype=float))
        out = np.zeros_like(a)
        for c, p in self.terms:
            if c:
                out = out + c * a**p / p
        return out

    def df(self, x, t):
        a = np.abs(np.asarray(t, dtype=float))
        out = np.zeros_like(a)
        with np.errstate(divide="ignore"):
            for c, p in self.terms:
                if c:
                    out = out + c * (p - 1.0) * a ** (p - 2.0)
        return out

    def metadata(self):
        return {"family": self.family, "terms": [list(t) for t in self.terms]}


@dataclass(frozen=True)
class ProblemSpec:
    """Data of the perturbed problem with exponents ``1 < r < s < 2 < q``."""

    N: int = 3
    m: int = 4
    r: float = 1.5
    s: float = 1.8
    q: float = 4.0
    lam: float = 0.0
    eta: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"N must be an integer >= 2, got {self.N}")
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"level m must be an integer >= 0, got {self.m}")
        if not 1.0 < self.r < self.s < 2.0 < self.q:
            raise ValueError(
                f"exponents must satisfy 1 < r < s < 2 < q, got "
                f"r={self.r}, s={self.s}, q={self.q}"
            )
        if self.lam < 0 or self.eta < 0:
            raise ValueError(f"lambda and eta must be >= 0, got {self.lam}, {self.eta}")

    def replace(self, **changes) -> "ProblemSpec":
        vals = {k: getattr(self, k) for k in ("N", "m", "r", "s", "q", "lam", "eta")}
        vals.update(changes)
        return ProblemSpec(**vals)


def power_problem(spec: ProblemSpec) -> PowerSum:
    """``lam |t|^(s-2) t - eta |t|^(r-2) t + |t|^(q-2) t`` and its primitive."""
    return PowerSum(((spec.lam, spec.s), (-spec.eta, spec.r), (1.0, spec.q)))


def psi_nonlinearity(lam: float, s: float) -> PowerSum:
    """The pure sublinear term ``lam |t|^(s-2) t`` (functional without q and r terms)."""
    return PowerSum(((lam, s),))


@dataclass(frozen=True)
class ExampleF1(Nonlinearity):
    """``a(x) f_1(t)`` with ``f_1`` switching from ``|t|^(beta-2)t`` to ``|t|^(alpha-2)t`` at ``|t| = 1``."""

    alpha: float
    beta: float
    a: object = 1.0
    family = "example_f1"

    def __post_init__(self):
        if not 0.0 < self.alpha < 2.0 < self.beta:
            raise ValueError(
                f"need 0 < alpha < 2 < beta, got alpha={self.alpha}, beta={self.beta}"
            )
        a = self.a
        if callable(a):
            raise TypeError("pass the coefficient as a scalar or per-vertex array")
        if not np.isscalar(a):
            a = np.asarray(a, dtype=float)
            a.setflags(write=False)
            object.__setattr__(self, "a", a)
        if np.any(np.asarray(a) <= 0):
            raise ValueError("coefficient a(x) must be positive")

    def f(self, x, t):
        t = np.asarray(t, dtype=float)
        inner_ = np.abs(t) <= 1.0
        val = np.where(inner_, signed_power(t, self.beta), signed_power(t, self.alpha))
        return _coef(self.a, x, t) * val

    def F(self, x, t):
        at = np.abs(np.asarray(t, dtype=float))
        al, be = self.alpha, self.beta
        val = np.where(at <= 1.0, at**be / be, 1.0 / be - 1.0 / al + at**al / al)
        return _coef(self.a, x, at) * val

    def df(self, x, t):
        at = np.abs(np.asarray(t, dtype=float))
        with np.errstate(divide="ignore"):
            val = np.where(at <= 1.0, (self.beta - 1.0) * at ** (self.beta - 2.0),
                           (self.alpha - 1.0) * at ** (self.alpha - 2.0))
        return _coef(self.a, x, at) * val

    def metadata(self):
        a = self.a if np.isscalar(self.a) else np.asarray(self.a).tolist()
        return {"family": self.family, "alpha": self.alpha, "beta": self.beta, "a": a}


def example_f1(alpha: float, beta: float, a=1.0) -> ExampleF1:
    return ExampleF1(alpha, beta, a)


@dataclass(frozen=True)
class CallableNonlinearity(Nonlinearity):
    """User hook built from vectorized callables ``f(x, t)``, ``F(x, t)``."""

    f_fn: Callable
    F_fn: Callable
    df_fn: Callable | None = None
    family = "custom"

    def f(self, x, t):
        return np.asarray(self.f_fn(x, np.asarray(t, dtype=float)), dtype=float)

    def F(self, x, t):
        return np.asarray(self.F_fn(x, np.asarray(t, dtype=float)), dtype=float)

    def df(self, x, t):
        if self.df_fn is None:
            return super().df(x, t)
        return np.asarray(self.df_fn(x, np.asarray(t, dtype=float)), dtype=float)


# ---------------------------------------------------------------------------
# custom-expression family

_FUNCS = {
    "abs": np.abs, "sign": np.sign, "sqrt": np.sqrt, "exp": np.exp,
    "log": np.log, "sin": np.sin, "cos": np.cos, "tanh": np.tanh,
    "minimum": np.minimum, "maximum": np.maximum,
}
_BINOPS = {
    ast.Add: np.add, ast.Sub: np.subtract, ast.Mult: np.multiply,
    ast.Div: np.divide, ast.Pow: np.power,
}


def _compile_expression(text: str) -> Callable:
    """Compile an arithmetic expression over ``t`` and ``a`` to a numpy callable."""
    tree = ast.parse(text, mode="eval")

    def build(node):
        if isinstance(node, ast.Expression):
            return build(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            v = float(node.value)
            return lambda env: v
        if isinstance(node, ast.Name):
            if node.id not in ("t", "a"):
                raise ValueError(f"unknown name {node.id!r} in expression {text!r}")
            name = node.id
            return lambda env: env[name]
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            op, lhs, rhs = _BINOPS[type(node.op)], build(node.left), build(node.right)
            return lambda env: op(lhs(env), rhs(env))
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            sub = build(node.operand)
            if isinstance(node.op, ast.USub):
                return lambda env: -sub(env)
            return sub
        if (isinstance(node, ast.Call) and isinstance(node.func, ast.Name)
                and node.func.id in _FUNCS and not node.keywords):
            fn = _FUNCS[node.func.id]
            args = [build(a) for a in node.args]
            return lambda env: fn(*(a(env) for a in args))
        raise ValueError(f"unsupported syntax in expression {text!r}: {ast.dump(node)}")

    return build(tree)


class ExpressionNonlinearity(Nonlinearity):
    """Nonlinearity given by expression strings over ``t`` and the coefficient ``a``.

    Without a closed-form ``F`` the primitive is computed by Gauss-Legendre
    quadrature on ``[0, t]`` with ``quad_nodes`` nodes; this is exact for
    polynomial ``f`` of degree below ``2 * quad_nodes`` and otherwise carries
    the usual quadrature error (large near kinks of ``f``).
    """

    family = "custom-expression"

    def __init__(self, f: str, F: str | None = None, a=1.0, quad_nodes: int = 32):
        self.f_text, self.F_text = f, F
        self._f = _compile_expression(f)
        self._F = _compile_expression(F) if F is not None else None
        self.a = a if np.isscalar(a) else np.asarray(a, dtype=float)
        self.quad_nodes = quad_nodes
        self._nodes, self._w = np.polynomial.legendre.leggauss(quad_nodes)

    def f(self, x, t):
        t = np.asarray(t, dtype=float)
        out = self._f({"t": t, "a": _coef(self.a, x, t)})
        return np.broadcast_to(np.asarray(out, dtype=float), t.shape).copy()

    def F(self, x, t):
        t = np.asarray(t, dtype=float)
        a = _coef(self.a, x, t)
        if self._F is not None:
            out = self._F({"t": t, "a": a})
            return np.broadcast_to(np.asarray(out, dtype=float), t.shape).copy()
        half = 0.5 * t[..., None]
        xi = half * (self._nodes + 1.0)
        a_b = a if np.isscalar(a) else np.asarray(a)[..., None]
        vals = self._f({"t": xi, "a": a_b})
        return half[..., 0] * (np.asarray(vals) @ self._w)

    def metadata(self):
        a = self.a if np.isscalar(self.a) else self.a.tolist()
        return {"family": self.family, "f": self.f_text, "F": self.F_text, "a": a}


# ---------------------------------------------------------------------------
# sampling check of the growth hypotheses


@dataclass
class C2Report:
    """Outcome of :func:`check_C2`; ``violations`` holds a few offending samples."""

    growth_at_infinity: bool
    growth_at_zero: bool
    positivity: bool
    n_samples: int
    violations: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.growth_at_infinity and self.growth_at_zero and self.positivity


def check_C2(nl: Nonlinearity, xs: Sequence[int], ts: Sequence[float], *,
             alpha: float, a=1.0, m_const: float, t0: float, M: float,
             beta: float, t1: float, n_between: int = 64) -> C2Report:
    """Check the three growth/sign conditions on a grid of samples.

    1. ``F(x,t) <= m_const * (a(x) + |t|**alpha)`` for all grid points;
    2. ``F(x,t) <= M |t|**beta`` for grid points with ``|t| <= t0``;
    3. ``F(x,t1) > 0`` and ``F(x,t) >= 0`` for ``t`` between 0 and ``t1``
       (grid points in that range plus ``n_between`` equispaced extras).

    A sampling check only; it cannot prove the hypotheses.
    """
    xs = np.asarray(xs, dtype=int)
    ts = np.asarray(ts, dtype=float)
    X, T = np.meshgrid(xs, ts, indexing="ij")
    X, T = X.ravel(), T.ravel()
    Fv = nl.F(X, T)
    slack = 1e-12

    def bad(mask, xa, ta):
        return [(int(xa[i]), float(ta[i])) for i in np.flatnonzero(mask)[:5]]

    a_x = np.broadcast_to(_coef(a, X, T), T.shape)
    b1 = m_const * (a_x + np.abs(T) ** alpha)
    v1 = Fv > b1 + slack * np.abs(b1)
    near = np.abs(T) <= t0
    b2 = M * np.abs(T) ** beta
    v2 = near & (Fv > b2 + slack * np.abs(b2))

    violations = {}
    if v1.any():
        violations["growth_at_infinity"] = bad(v1, X, T)
    if v2.any():
        violations["growth_at_zero"] = bad(v2, X, T)

    ok3 = t1 != 0
    if ok3:
        lo, hi = min(0.0, t1), max(0.0, t1)
        extra = np.linspace(lo, hi, n_between)
        tb = np.concatenate([ts[(ts >= lo) & (ts <= hi)], extra])
        Xb, Tb = np.meshgrid(xs, tb, indexing="ij")
        Xb, Tb = Xb.ravel(), Tb.ravel()
        Fb = nl.F(Xb, Tb)
        F1 = nl.F(xs, np.full(xs.shape, float(t1)))
        neg = Fb < 0
        nonpos = F1 <= 0
        ok3 = not (neg.any() or nonpos.any())
        if nonpos.any():
            violations["positivity_at_t1"] = [int(x) for x in xs[nonpos][:5]]
        if neg.any():
            violations["positivity_between"] = bad(neg, Xb, Tb)
    else:
        violations["positivity_at_t1"] = "t1 must be nonzero"

    return C2Report(
        growth_at_infinity=not v1.any(),
        growth_at_zero=not v2.any(),
        positivity=bool(ok3),
        n_samples=int(T.size),
        violations=violations,
    )


def from_config(cfg: dict, spec: ProblemSpec | None = None) -> Nonlinearity:
    """Build a nonlinearity from a config mapping with key ``family``."""
    family = cfg.get("family", "power")
    if family == "power":
        if spec is None:
            raise ValueError("the power family needs a ProblemSpec")
        return power_problem(spec)
    if family == "example_f1":
        return ExampleF1(float(cfg["alpha"]), float(cfg["beta"]), cfg.get("a", 1.0))
    if family == "custom-expression":
        return ExpressionNonlinearity(cfg["f"], cfg.get("F"), cfg.get("a", 1.0),
                                      int(cfg.get("quad_nodes", 32)))
    raise ValueError(f"unknown nonlinearity family {family!r}")
