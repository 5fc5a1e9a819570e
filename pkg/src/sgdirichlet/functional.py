"""Discrete energy functional, its weak derivative and the energy-metric gradient.

On level ``m`` the functional is ``I(u) = energy(u)/2 - sum_x w_x F(x, u(x))``
with the vertex weights ``w_x`` of :func:`gasket.measure_weights`. Its
partial derivative in the direction of the vertex indicator ``phi_x`` is the
weak residual ``W_m(u, phi_x) - w_x f(x, u(x))``, so the discrete gradient
is the exact gradient of the discrete functional.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .energy import DiscreteFunction, stiffness_matrix
from .gasket import GasketLevel
from .nonlinearity import Nonlinearity

__all__ = [
    "SolverError",
    "FunctionalContext",
    "pcg",
    "eval_I",
    "weak_residual",
    "energy_gradient",
    "residual_norm",
]


class SolverError(RuntimeError):
    """Raised when an iterative solve fails; ``diagnostics`` records the history."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


def pcg(A, b: np.ndarray, rtol: float = 1e-10, maxiter: int | None = None,
        x0: np.ndarray | None = None):
    """Jacobi-preconditioned conjugate gradients for SPD ``A``.

    Stops when ``||b - A x|| <= rtol * ||b||``. Returns ``(x, iterations)``.
    """
    n = b.shape[0]
    maxiter = 10 * n + 20 if maxiter is None else maxiter
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), 0
    dinv = 1.0 / A.diagonal()
    x = np.zeros(n) if x0 is None else x0.copy()
    r = b - A @ x
    z = dinv * r
    p = z.copy()
    rz = r @ z
    history = []
    for it in range(1, maxiter + 1):
        Ap = A @ p
        alpha = rz / (p @ Ap)
        x += alpha * p
        r -= alpha * Ap
        rnorm = np.linalg.norm(r)
        history.append(rnorm / bnorm)
        if rnorm <= rtol * bnorm:
            return x, it
        z = dinv * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError(
        f"pcg did not reach rtol={rtol} in {maxiter} iterations "
        f"(last relative residual {history[-1]:.3e})",
        {"iterations": maxiter, "relative_residuals": history[-10:]},
    )


@dataclass(eq=False)
class FunctionalContext:
    """Discrete functional ``I`` for a nonlinearity on one gasket level.

    ``free`` selects the unknowns (default: all interior vertices). Vertices
    outside ``free`` are pinned to zero, which also gives the small reduced
    problems used as oracles.
    """

    level: GasketLevel
    nl: Nonlinearity
    free: np.ndarray | None = None
    cg_rtol: float = 1e-10
    A: sp.csr_matrix = field(init=False, repr=False)
    A_ff: sp.csr_matrix = field(init=False, repr=False)
    w_f: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        lev = self.level
        if self.free is None:
            self.free = lev.interior_index
        free = np.unique(np.asarray(self.free, dtype=np.int64))
        if free.size and (free.min() < lev.N or free.max() >= lev.n_vertices):
            raise ValueError("free vertices must be interior vertices of the level")
        free.setflags(write=False)
        self.free = free
        self.A = stiffness_matrix(lev)
        self.A_ff = self.A[free][:, free].tocsr()
        self.w_f = lev.weights[free]

    @property
    def n_free(self) -> int:
        return self.free.size

    # -- array interface on the free unknowns -------------------------------

    def full(self, v: np.ndarray) -> np.ndarray:
        out = np.zeros(self.level.n_vertices)
        out[self.free] = v
        return out

    def function(self, v: np.ndarray) -> DiscreteFunction:
        return DiscreteFunction(self.level, self.full(v))

    def restrict(self, u) -> np.ndarray:
        vals = u.values if isinstance(u, DiscreteFunction) else np.asarray(u, float)
        if vals.shape[0] == self.level.n_vertices:
            return vals[self.free].copy()
        return np.array(vals, dtype=float)

    def energy_of(self, v: np.ndarray) -> float:
        e = self.level.edges
        full = self.full(v)
        d = full[e[:, 0]] - full[e[:, 1]]
        return self.level.energy_scale * math.fsum(d * d)

    def norm_of(self, v: np.ndarray) -> float:
        return math.sqrt(self.energy_of(v))

    def J_of(self, v: np.ndarray) -> float:
        """Quadrature of ``F(x, u(x))`` against the measure."""
        return math.fsum(self.w_f * self.nl.F(self.free, v))

    def I_of(self, v: np.ndarray) -> float:
        return 0.5 * self.energy_of(v) - self.J_of(v)

    def residual_of(self, v: np.ndarray) -> np.ndarray:
        return self.A_ff @ v - self.w_f * self.nl.f(self.free, v)

    def riesz(self, res: np.ndarray) -> np.ndarray:
        """Solve ``A_ff g = res`` (energy-metric representative)."""
        g, _ = pcg(self.A_ff, res, rtol=self.cg_rtol)
        return g

    def gradient_of(self, v: np.ndarray):
        """Return ``(g, residual, ||g||)`` with ``||g||`` the energy norm."""
        res = self.residual_of(v)
        g = self.riesz(res)
        return g, res, math.sqrt(max(float(res @ g), 0.0))

    def hessian_of(self, v: np.ndarray) -> sp.csc_matrix:
        """``A_ff - diag(w f'(u))`` with singular ``f'`` clipped near ``u = 0``."""
        scale = float(np.max(np.abs(v))) if v.size else 0.0
        floor = max(scale * 1e-12, 1e-300)
        t = np.where(np.abs(v) < floor, np.where(v < 0, -floor, floor), v)
        d = self.w_f * self.nl.df(self.free, t)
        d = np.nan_to_num(d, nan=0.0, posinf=1e300, neginf=-1e300)
        return (self.A_ff - sp.diags(d)).tocsc()

    def newton_direction(self, v: np.ndarray, res: np.ndarray | None = None):
        res = self.residual_of(v) if res is None else res
        H = self.hessian_of(v)
        with np.errstate(all="ignore"):
            d = spla.spsolve(H, -res)
        if not np.all(np.isfinite(d)):
            return None
        return d


def _vals(ctx: FunctionalContext, u) -> np.ndarray:
    if isinstance(u, DiscreteFunction):
        if (u.level.N, u.level.m) != (ctx.level.N, ctx.level.m):
            raise ValueError("function and context live on different levels")
        if not u.zero_boundary:
            raise ValueError("the functional is defined on zero-boundary functions")
    return ctx.restrict(u)


def eval_I(ctx: FunctionalContext, u) -> float:
    """``energy(u)/2 - sum_x w_x F(x, u(x))``."""
    return ctx.I_of(_vals(ctx, u))


def weak_residual(ctx: FunctionalContext, u) -> DiscreteFunction:
    """Dual coefficients ``W_m(u, phi_x) - w_x f(x, u(x))``; zero off the free set."""
    return ctx.function(ctx.residual_of(_vals(ctx, u)))


def energy_gradient(ctx: FunctionalContext, u) -> DiscreteFunction:
    """Riesz representative of the weak residual in the energy inner product."""
    g, _, _ = ctx.gradient_of(_vals(ctx, u))
    return ctx.function(g)


def residual_norm(ctx: FunctionalContext, u) -> float:
    """Energy norm of :func:`energy_gradient` (dual norm of the residual)."""
    return ctx.gradient_of(_vals(ctx, u))[2]
