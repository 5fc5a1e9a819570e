"""Constructive constants of the three-solution result and the ratio estimator.

``compute_constants`` gives ``c, R, m, Lambda``; ``compute_u_lambda`` and
``eta_thresholds`` produce the ``lambda``-dependent part. ``estimate_rho2``
builds a truncated witness for the supremum of ``J / Phi`` and improves it
by normalized gradient ascent, giving a lower bound only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .critical import SolverOptions, minimize
from .energy import DiscreteFunction, embedding_constant, extend_to_level, lipschitz_compose
from .functional import FunctionalContext
from .gasket import GasketLevel, build_level
from .nonlinearity import Nonlinearity, ProblemSpec, psi_nonlinearity

__all__ = [
    "Constants",
    "ThresholdReport",
    "compute_constants",
    "harmonic_bump",
    "compute_u_lambda",
    "eta_thresholds",
    "threshold_report",
    "Rho2Estimate",
    "estimate_rho2",
]


@dataclass(frozen=True)
class Constants:
    c: float
    R: float
    m: float
    Lambda: float

    def as_dict(self) -> dict:
        return {"c": self.c, "R": self.R, "m": self.m, "Lambda": self.Lambda}


def compute_constants(N: int, q: float, s: float) -> Constants:
    """``c = 2N+3``, ``R = c**(-q/(q-2))``, ``m = (1/2 - 1/q) R**2 / 2`` and
    ``Lambda = min(m s / (c R)**s, R**(2-s) / c**s)``."""
    if int(N) != N or N < 2:
        raise ValueError(f"N must be an integer >= 2, got {N}")
    if not q > 2:
        raise ValueError(f"need q > 2, got {q}")
    if not 1 < s < 2:
        raise ValueError(f"need 1 < s < 2, got {s}")
    c = float(embedding_constant(int(N)))
    R = c ** (-q / (q - 2))
    lhs, rhs = (c * R) ** q, R * R
    if abs(lhs - rhs) > 1e-14 * rhs:
        raise ArithmeticError(f"c^q R^q = {lhs!r} differs from R^2 = {rhs!r}")
    m = 0.5 * (0.5 - 1.0 / q) * R * R
    Lam = min(m * s / (c**s * R**s), R ** (2 - s) / c**s)
    return Constants(c, R, m, Lam)


def harmonic_bump(level: GasketLevel) -> DiscreteFunction:
    """Harmonic extension of the level-1 function equal to 1 off ``V_0``."""
    if level.m < 1:
        raise ValueError("level 0 has no interior vertices")
    coarse = build_level(level.N, 1)
    vals = np.ones(coarse.n_vertices)
    vals[: coarse.N] = 0.0
    return extend_to_level(DiscreteFunction(coarse, vals), level.m)


def compute_u_lambda(spec: ProblemSpec, level: GasketLevel | None = None,
                     options: SolverOptions | None = None, rtol_identity: float = 1e-6):
    """Global minimizer of ``psi(u) = |u|^2/2 - (lam/s) int |u|^s``.

    The descent starts from the harmonic bump scaled so that ``psi < 0``
    (half of the admissible power of the scaling factor). Returns
    ``(u_lambda, diagnostics)``.
    """
    level = level or build_level(spec.N, spec.m)
    opts = options or SolverOptions(rtol=1e-12)
    c = embedding_constant(spec.N)
    ctx = FunctionalContext(level, psi_nonlinearity(spec.lam, spec.s))
    if spec.lam == 0:
        u = DiscreteFunction.zeros(level)
        return u, {"degenerate": True, "norm": 0.0, "psi": 0.0, "converged": True,
                   "message": "lambda = 0: the only minimizer is 0"}

    v = ctx.restrict(harmonic_bump(level))
    E = ctx.energy_of(v)
    Ls = math.fsum(ctx.w_f * np.abs(v) ** spec.s)
    t = (0.5 * 2 * spec.lam * Ls / (spec.s * E)) ** (1.0 / (2.0 - spec.s))
    seed = ctx.function(t * v)
    rep = minimize(ctx, seed, opts, kind="minimizer")
    u = rep.u
    vals = ctx.restrict(u)
    norm = ctx.norm_of(vals)
    Ls_u = math.fsum(ctx.w_f * np.abs(vals) ** spec.s)
    bound = (spec.lam * c**spec.s) ** (1.0 / (2.0 - spec.s))
    ident = abs(norm**2 - spec.lam * Ls_u)
    diag = {
        "degenerate": norm == 0.0,
        "converged": rep.converged,
        "iterations": rep.iterations,
        "residual": rep.residual,
        "psi": rep.energy_value,
        "psi_seed": ctx.I_of(t * v),
        "seed_scale": t,
        "norm": norm,
        "identity_error": ident / norm**2 if norm else 0.0,
        "identity_holds": norm > 0 and ident <= rtol_identity * norm**2,
        "norm_bound": bound,
        "norm_bound_holds": norm <= bound,
        "message": rep.message,
    }
    if norm == 0.0:
        diag["message"] = "converged to zero: the negative well is not resolved"
    return u, diag


def eta_thresholds(spec: ProblemSpec, u_lambda: DiscreteFunction):
    """``(eta_1, eta_2, eta_lambda)`` for a nonzero ``u_lambda``."""
    level = u_lambda.level
    ctx = FunctionalContext(level, psi_nonlinearity(spec.lam, spec.s))
    v = ctx.restrict(u_lambda)
    Lr = math.fsum(ctx.w_f * np.abs(v) ** spec.r)
    if Lr == 0.0:
        raise ArithmeticError("int |u_lambda|^r vanishes: u_lambda must be nonzero")
    Lq = math.fsum(ctx.w_f * np.abs(v) ** spec.q)
    norm2 = ctx.energy_of(v)
    consts = compute_constants(spec.N, spec.q, spec.s)
    eta1 = spec.r * (norm2 * (1.0 / spec.s - 0.5) + Lq / spec.q) / Lr
    eta2 = consts.m * spec.r / Lr
    return eta1, eta2, min(eta1, eta2)


@dataclass
class ThresholdReport:
    c: float
    R: float
    m: float
    Lambda: float
    lam: float | None = None
    u_lambda: DiscreteFunction | None = None
    eta1: float | None = None
    eta2: float | None = None
    eta_lambda: float | None = None
    diagnostics: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self, include_function: bool = True) -> dict:
        d = {
            "c": self.c, "R": self.R, "m": self.m, "Lambda": self.Lambda,
            "lambda": self.lam, "eta_1": self.eta1, "eta_2": self.eta2,
            "eta_lambda": self.eta_lambda,
            "diagnostics": {k: v for k, v in self.diagnostics.items()},
            "notes": list(self.notes),
        }
        if include_function and self.u_lambda is not None:
            d["u_lambda"] = self.u_lambda.to_dict()
        return d

    def table(self) -> list[tuple[str, object]]:
        rows = [("c", self.c), ("R", self.R), ("m", self.m), ("Lambda", self.Lambda)]
        if self.lam is not None:
            rows.append(("lambda", self.lam))
            for key in ("norm", "psi", "identity_error", "norm_bound", "degenerate"):
                if key in self.diagnostics:
                    rows.append((f"u_lambda.{key}", self.diagnostics[key]))
            rows += [("eta_1", self.eta1), ("eta_2", self.eta2), ("eta_lambda", self.eta_lambda)]
        return rows


def threshold_report(spec: ProblemSpec, lam: float | None = None,
                     level: GasketLevel | None = None,
                     options: SolverOptions | None = None) -> ThresholdReport:
    """All constants, plus the ``lambda`` part when ``lam`` is given."""
    consts = compute_constants(spec.N, spec.q, spec.s)
    rep = ThresholdReport(**consts.as_dict())
    if lam is None:
        return rep
    spec_l = spec.replace(lam=lam)
    u, diag = compute_u_lambda(spec_l, level, options)
    rep.lam, rep.u_lambda, rep.diagnostics = lam, u, diag
    if diag["degenerate"]:
        rep.notes.append("u_lambda is zero; eta thresholds undefined")
        return rep
    rep.eta1, rep.eta2, rep.eta_lambda = eta_thresholds(spec_l, u)
    if not 0 < lam < consts.Lambda:
        rep.notes.append("lambda outside ]0, Lambda[")
    return rep


@dataclass
class Rho2Estimate:
    rho2_lower: float
    lambda_upper: float
    witness: DiscreteFunction
    witness_ratio: float
    best: DiscreteFunction
    plateau: np.ndarray
    history: list


def _ratio(ctx: FunctionalContext, v: np.ndarray) -> float:
    phi = 0.5 * ctx.energy_of(v)
    return ctx.J_of(v) / phi


def estimate_rho2(nl: Nonlinearity, t1: float, level: GasketLevel,
                  steps: int = 50, step0: float = 0.5) -> Rho2Estimate:
    """Lower bound for ``sup J(u) / Phi(u)`` over ``Phi(u) > 0``.

    The witness is the harmonic bump scaled to peak at ``2 t1`` and then
    truncated at ``t1``; ``steps`` normalized ascent steps follow. The
    reciprocal of the bound is an upper bound for the threshold
    ``1 / rho_2``.
    """
    if t1 == 0:
        raise ValueError("t1 must be nonzero")
    if level.m < 1:
        raise ValueError("the witness needs a level with interior vertices")
    ctx = FunctionalContext(level, nl)
    bump = harmonic_bump(level) * (2.0 * t1)
    if t1 > 0:
        h = lambda t: np.minimum(t, t1)
    else:
        h = lambda t: np.maximum(t, t1)
    witness = lipschitz_compose(h, bump, lipschitz=1.0)
    plateau = np.abs(bump.values) > abs(t1)
    if not plateau.any():
        raise ValueError("bump does not exceed t1 anywhere")
    v = ctx.restrict(witness)
    r0 = _ratio(ctx, v)
    best_v, best_r = v, r0
    history = [r0]
    tau = step0
    for _ in range(steps):
        phi = 0.5 * ctx.energy_of(v)
        r = _ratio(ctx, v)
        grad = (ctx.riesz(ctx.w_f * nl.f(ctx.free, v)) - r * v) / phi
        gn = ctx.norm_of(grad)
        if gn == 0.0:
            break
        nv = ctx.norm_of(v)
        while tau > 1e-12:
            trial = v + (tau * nv / gn) * grad
            nt = ctx.norm_of(trial)
            if nt < 1e-3 * nv:
                # keep away from Phi = 0
                trial = trial * (nv / nt) if nt > 0 else v
            rt = _ratio(ctx, trial)
            if rt > r:
                v = trial
                tau = min(1.0, 2 * tau)
                break
            tau *= 0.5
        else:
            break
        r = _ratio(ctx, v)
        history.append(r)
        if r > best_r:
            best_v, best_r = v, r
    return Rho2Estimate(
        rho2_lower=best_r,
        lambda_upper=1.0 / best_r if best_r > 0 else math.inf,
        witness=witness,
        witness_ratio=r0,
        best=ctx.function(best_v),
        plateau=plateau,
        history=history,
    )
