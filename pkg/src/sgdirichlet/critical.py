"""Critical-point engines: descent minimization and the mountain-pass algorithm.

All engines work on the free unknowns of a :class:`FunctionalContext`.
Criticality is measured by the energy norm of the energy-metric gradient.
Since the solutions of the sublinear problems can be extremely small
(``1e-22`` is typical on level 4), a point is accepted as critical when that
norm is below ``tol`` *and* below ``rtol`` times the energy norm of the
point itself.
"""
from __future__ import annotations

import json
import time
from dataclasses import dataclass, field

import numpy as np

from .energy import DiscreteFunction
from .functional import FunctionalContext, SolverError

__all__ = [
    "SolverOptions",
    "SolutionReport",
    "PathState",
    "minimize",
    "minimize_in_ball",
    "mountain_pass",
    "newton_polish",
    "is_converged",
    "three_solutions",
    "ThreeSolutions",
    "PipelineError",
]


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-8
    rtol: float = 1e-8
    max_iter: int = 500
    armijo: float = 1e-4
    min_step: float = 1e-20
    newton: bool = True
    # mountain pass
    path_points: int = 41
    mp_max_iter: int = 20000
    mp_switch_rtol: float = 1e-3
    polish: bool = True
    polish_max_iter: int = 100
    polish_max_shift: float = 0.25
    mp_step_fraction: float = 1.0


def is_converged(residual: float, norm: float, opts: SolverOptions) -> bool:
    return residual == 0.0 or (residual <= opts.tol and residual <= opts.rtol * norm)


@dataclass
class SolutionReport:
    """A critical-point candidate together with its diagnostics."""

    u: DiscreteFunction
    energy_value: float
    residual: float
    kind: str
    iterations: int
    converged: bool
    norm: float
    wall_time: float = 0.0
    constrained: bool = False
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def relative_residual(self) -> float:
        return self.residual / self.norm if self.norm > 0 else 0.0

    def to_dict(self, include_timing: bool = True) -> dict:
        d = {
            "kind": self.kind,
            "energy": self.energy_value,
            "residual": self.residual,
            "norm": self.norm,
            "converged": self.converged,
            "constrained": self.constrained,
            "iterations": self.iterations,
            "message": self.message,
            "extra": self.extra,
            "u": self.u.to_dict(),
        }
        if include_timing:
            d["wall_time"] = self.wall_time
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolutionReport":
        return cls(
            u=DiscreteFunction.from_dict(d["u"]),
            energy_value=float(d["energy"]),
            residual=float(d["residual"]),
            kind=d["kind"],
            iterations=int(d["iterations"]),
            converged=bool(d["converged"]),
            norm=float(d["norm"]),
            wall_time=float(d.get("wall_time", 0.0)),
            constrained=bool(d.get("constrained", False)),
            message=d.get("message", ""),
            extra=d.get("extra", {}),
        )

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def csv_row(self, label: str = "") -> list:
        return [label, self.kind, repr(self.energy_value), repr(self.residual),
                repr(self.norm), self.converged, self.iterations]


CSV_HEADER = ["label", "kind", "energy", "residual", "norm", "converged", "iterations"]


def _descent_step(ctx, v, I0, res, g, rn, opts, use_newton):
    """One safeguarded descent step; returns ``(v_new, I_new, step, used_newton)``."""
    d = None
    if use_newton:
        d = ctx.newton_direction(v, res)
        if d is not None:
            slope = float(res @ d)
            dn = ctx.norm_of(d)
            if not slope < -1e-8 * rn * dn:
                d = None
    if d is None:
        d, slope, used = -g, -rn * rn, False
    else:
        used = True
    alpha = 1.0
    while alpha >= opts.min_step:
        trial = v + alpha * d
        It = ctx.I_of(trial)
        if It <= I0 + opts.armijo * alpha * slope:
            return trial, It, alpha, used
        alpha *= 0.5
    # roundoff floor: I can no longer resolve the decrease
    if used:
        trial = v + d
        if ctx.gradient_of(trial)[2] < 0.5 * rn:
            return trial, ctx.I_of(trial), 1.0, used
    return None, I0, 0.0, used


def minimize(ctx: FunctionalContext, u0, options: SolverOptions | None = None,
             kind: str = "minimizer") -> SolutionReport:
    """Descent minimization of ``I`` from ``u0``.

    The search direction is the Newton direction when it is a descent
    direction and the energy-metric steepest-descent direction otherwise;
    the step is chosen by halving from 1 until the sufficient-decrease test
    holds. ``I`` is nonincreasing along the iterates.
    """
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    v = ctx.restrict(u0)
    I_v = ctx.I_of(v)
    history = [I_v]
    it, message, converged = 0, "", False
    for it in range(opts.max_iter + 1):
        g, res, rn = ctx.gradient_of(v)
        nv = ctx.norm_of(v)
        if is_converged(rn, nv, opts):
            converged = True
            break
        if it == opts.max_iter:
            message = f"iteration cap {opts.max_iter} reached"
            break
        v_new, I_new, step, _ = _descent_step(ctx, v, I_v, res, g, rn, opts, opts.newton)
        if v_new is None:
            message = "line search failed"
            break
        v, I_v = v_new, I_new
        history.append(I_v)
    g, res, rn = ctx.gradient_of(v)
    return SolutionReport(
        u=ctx.function(v), energy_value=ctx.I_of(v), residual=rn, kind=kind,
        iterations=it, converged=converged, norm=ctx.norm_of(v),
        wall_time=time.perf_counter() - t0, message=message,
        extra={"I_history": history},
    )


def minimize_in_ball(ctx: FunctionalContext, radius: float, u0=None,
                     options: SolverOptions | None = None) -> SolutionReport:
    """Minimize ``I`` over the closed energy ball of radius ``radius``.

    Steps leaving the ball are rescaled onto the sphere. A result strictly
    inside the ball with small residual is a genuine critical point; a
    result on the sphere is reported as ``constrained``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    v = np.zeros(ctx.n_free) if u0 is None else ctx.restrict(u0)
    if ctx.norm_of(v) > radius * (1 + 1e-12):
        raise ValueError("initial point lies outside the ball")

    def project(w):
        nw = ctx.norm_of(w)
        return w * (radius / nw) if nw > radius else w

    I_v = ctx.I_of(v)
    history = [I_v]
    it, message, converged = 0, "", False
    for it in range(opts.max_iter + 1):
        g, res, rn = ctx.gradient_of(v)
        nv = ctx.norm_of(v)
        on_sphere = nv >= radius * (1 - 1e-10)
        if not on_sphere and is_converged(rn, nv, opts):
            converged = True
            break
        if on_sphere:
            # stationarity on the sphere: gradient parallel to the outward normal
            tang = g - (float(res @ v) / (nv * nv)) * v
            if ctx.norm_of(tang) <= max(opts.rtol * nv, 1e-300) and float(res @ v) <= 0:
                converged = True
                break
        if it == opts.max_iter:
            message = f"iteration cap {opts.max_iter} reached"
            break
        v_new, I_new, step, _ = _descent_step(ctx, v, I_v, res, g, rn, opts, opts.newton)
        if v_new is None:
            message = "line search failed"
            break
        if ctx.norm_of(v_new) > radius:
            # projected backtracking along the steepest-descent direction
            alpha, v_new = 1.0, None
            while alpha >= opts.min_step:
                trial = project(v - alpha * g)
                It = ctx.I_of(trial)
                if It <= I_v + opts.armijo * float(res @ (trial - v)):
                    v_new, I_new = trial, It
                    break
                alpha *= 0.5
            if v_new is None:
                message = "projected line search failed"
                break
        v, I_v = v_new, I_new
        history.append(I_v)
    g, res, rn = ctx.gradient_of(v)
    nv = ctx.norm_of(v)
    constrained = nv >= radius * (1 - 1e-10)
    return SolutionReport(
        u=ctx.function(v), energy_value=ctx.I_of(v), residual=rn, kind="ball-minimizer",
        iterations=it, converged=converged, norm=nv, constrained=constrained,
        wall_time=time.perf_counter() - t0,
        message=message or ("minimizer lies on the sphere" if constrained else ""),
        extra={"I_history": history, "radius": radius},
    )


@dataclass
class PathState:
    """Discrete path ``g(t_0 = 0), ..., g(t_n = 1) = e`` and its ``I`` values."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        if self.points.shape[0] < 3:
            raise ValueError("a path needs at least 3 points")

    @property
    def argmax(self) -> int:
        # lowest index wins ties
        return 1 + int(np.argmax(self.values[1:-1]))

    @property
    def max_value(self) -> float:
        return float(self.values[self.argmax])


def _reparametrize(ctx, points):
    """Re-space path points uniformly in energy-norm arclength."""
    seg = np.array([ctx.norm_of(points[i + 1] - points[i]) for i in range(len(points) - 1)])
    total = seg.sum()
    if total == 0.0:
        return points
    s = np.concatenate([[0.0], np.cumsum(seg)]) / total
    targets = np.linspace(0.0, 1.0, len(points))
    out = np.empty_like(points)
    out[0], out[-1] = points[0], points[-1]
    idx = np.searchsorted(s, targets[1:-1], side="right") - 1
    idx = np.clip(idx, 0, len(points) - 2)
    for k, (i, t) in enumerate(zip(idx, targets[1:-1]), start=1):
        span = s[i + 1] - s[i]
        lam = 0.0 if span == 0 else (t - s[i]) / span
        out[k] = (1 - lam) * points[i] + lam * points[i + 1]
    return out


def newton_polish(ctx: FunctionalContext, v: np.ndarray, options: SolverOptions):
    """Newton iteration on the residual with residual-norm backtracking.

    Returns ``(v, residual, iterations)``.
    """
    g, res, rn = ctx.gradient_of(v)
    it = 0
    for it in range(1, options.polish_max_iter + 1):
        if is_converged(rn, ctx.norm_of(v), options):
            return v, rn, it - 1
        d = ctx.newton_direction(v, res)
        if d is None:
            break
        alpha, accepted = 1.0, False
        while alpha >= 1e-6:
            trial = v + alpha * d
            try:
                _, res_t, rn_t = ctx.gradient_of(trial)
            except SolverError:
                alpha *= 0.5
                continue
            if rn_t < (1 - 1e-4 * alpha) * rn:
                v, res, rn, accepted = trial, res_t, rn_t, True
                break
            alpha *= 0.5
        if not accepted:
            break
    return v, rn, it


def mountain_pass(ctx: FunctionalContext, e, path_points: int | None = None,
                  options: SolverOptions | None = None) -> SolutionReport:
    """Numerical mountain pass between ``0`` and ``e``.

    The straight segment ``t e`` is discretized and repeatedly deformed:
    the interior point of maximal ``I`` takes a backtracking steepest-descent
    step (never longer than the distance to its nearer neighbour), then the
    path is re-spaced by energy-norm arclength. A step is accepted only if
    the re-spaced path has a maximum no larger than before, so the estimate
    ``kappa`` of the minimax value is nonincreasing. When the relative
    residual at the maximum drops below ``mp_switch_rtol``, or the
    deformation stalls at the resolution of the path, the maximum is handed
    to :func:`newton_polish` (if enabled); the polished point must stay
    within ``polish_max_shift`` (relative) of it.
    """
    opts = options or SolverOptions()
    n = path_points or opts.path_points
    t0 = time.perf_counter()
    ev = ctx.restrict(e)
    if not np.any(ev):
        raise ValueError("endpoint e must be nonzero")
    I_e = ctx.I_of(ev)
    if I_e > 0:
        raise ValueError(f"endpoint must satisfy I(e) <= 0, got {I_e:.3e}")
    ts = np.linspace(0.0, 1.0, n)
    path = PathState(ts[:, None] * ev[None, :], np.array([ctx.I_of(t * ev) for t in ts]))
    kappa0 = path.max_value
    kappas = [kappa0]
    endpoint_level = max(path.values[0], path.values[-1])

    def report(v, rn, it, converged, message, kind="mountain-pass", **extra):
        return SolutionReport(
            u=ctx.function(v), energy_value=ctx.I_of(v), residual=rn, kind=kind,
            iterations=it, converged=converged, norm=ctx.norm_of(v),
            wall_time=time.perf_counter() - t0, message=message,
            extra={"kappa_initial": kappa0, "kappa_path": kappas[-1],
                   "kappa_history": list(kappas), "path_points": n, **extra},
        )

    if kappa0 <= endpoint_level:
        return report(ev * 0.0, 0.0, 0, False,
                      "path collapse onto an endpoint: no mountain geometry detected")

    alpha = 1.0
    it = 0
    stop_reason = ""
    switch = opts.mp_switch_rtol if opts.polish else opts.rtol
    for it in range(1, opts.mp_max_iter + 1):
        j = path.argmax
        v = path.points[j]
        g, res, rn = ctx.gradient_of(v)
        nv = ctx.norm_of(v)
        if is_converged(rn, nv, opts) or (opts.polish and rn <= switch * nv):
            break
        Ij = path.values[j]
        # a single move never exceeds the distance to the nearer neighbour
        spacing = min(ctx.norm_of(v - path.points[j - 1]),
                      ctx.norm_of(path.points[j + 1] - v))
        cap = opts.mp_step_fraction * spacing / rn if rn > 0 else 1.0
        alpha = min(1.0, cap, 2.0 * alpha)
        accepted = None
        while alpha >= opts.min_step:
            trial = v - alpha * g
            It = ctx.I_of(trial)
            if It <= Ij - opts.armijo * alpha * rn * rn:
                pts = path.points.copy()
                pts[j] = trial
                pts = _reparametrize(ctx, pts)
                vals = np.array([ctx.I_of(p) for p in pts])
                vals[0], vals[-1] = path.values[0], path.values[-1]
                if vals[1:-1].max() <= path.max_value:
                    accepted = PathState(pts, vals)
                    break
            alpha *= 0.5
        if accepted is None:
            stop_reason = "path deformation stalled at the path resolution"
            break
        path = accepted
        kappas.append(path.max_value)
        if path.max_value <= endpoint_level:
            return report(path.points[path.argmax], rn, it, False,
                          "path collapse onto an endpoint during deformation")
    else:
        stop_reason = f"iteration cap {opts.mp_max_iter} reached"

    v_path = path.points[path.argmax]
    _, _, rn_path = ctx.gradient_of(v_path)
    rn = rn_path
    message = stop_reason
    if opts.polish and not is_converged(rn, ctx.norm_of(v_path), opts):
        v_pol, rn_pol, pit = newton_polish(ctx, v_path, opts)
        shift = ctx.norm_of(v_pol - v_path)
        if shift <= opts.polish_max_shift * ctx.norm_of(v_path):
            v, rn = v_pol, rn_pol
            message = "; ".join(filter(None, [message, f"polished by {pit} Newton steps"]))
        else:
            v, rn = v_path, rn_path
            message = "; ".join(filter(None, [
                message, "Newton polish left the neighbourhood of the path maximum"]))
    else:
        v = v_path
    converged = is_converged(rn, ctx.norm_of(v), opts)
    return report(v, rn, it, converged, message, path_residual=rn_path,
                  path_max_index=int(path.argmax))


class PipelineError(RuntimeError):
    """A step of :func:`three_solutions` failed; ``step`` names it."""

    def __init__(self, step: str, message: str):
        super().__init__(f"[{step}] {message}")
        self.step = step


@dataclass
class ThreeSolutions:
    """Outcome of :func:`three_solutions`."""

    spec: object
    thresholds: object
    reports: dict
    in_regime: bool
    applicable: bool
    ordering: dict
    distances: dict
    notes: list

    @property
    def all_converged(self) -> bool:
        return len(self.reports) == 3 and all(r.converged for r in self.reports.values())

    @property
    def ordering_holds(self) -> bool:
        return bool(self.ordering) and all(self.ordering.values())

    def to_dict(self, include_timing: bool = True) -> dict:
        sp_ = self.spec
        return {
            "problem": {"N": sp_.N, "m": sp_.m, "r": sp_.r, "s": sp_.s, "q": sp_.q,
                        "lambda": sp_.lam, "eta": sp_.eta},
            "thresholds": self.thresholds.to_dict(include_function=False),
            "regime_flags": {"in_regime": self.in_regime, "applicable": self.applicable},
            "ordering": self.ordering,
            "ordering_holds": self.ordering_holds,
            "distances": self.distances,
            "notes": self.notes,
            "solutions": {k: r.to_dict(include_timing) for k, r in self.reports.items()},
        }


def _ray_endpoint(ctx, v, grid=800):
    """Smallest ``t`` on a dyadic grid past the barrier with ``I(t v) < 0``.

    Returns the endpoint scale for the first mountain pass when the
    straight path to ``v`` cannot resolve the barrier near 0.
    """
    ks = np.arange(grid, -1, -1) / 4.0
    seen_pos = False
    for k in ks:
        t = 2.0 ** (-k)
        val = ctx.I_of(t * v)
        if val > 0:
            seen_pos = True
        elif val < 0 and seen_pos:
            te = min(1.0, 2.0 * t)
            return te if ctx.I_of(te * v) < 0 else t
    return None


def three_solutions(spec, options: SolverOptions | None = None,
                    max_doublings: int = 200) -> ThreeSolutions:
    """Three nonzero critical points of the perturbed power problem.

    1. ``u_lambda`` minimizes the pure sublinear functional; the first
       solution minimizes ``I`` over the ball of radius ``R`` from it.
    2. A mountain pass between 0 and ``u_lambda`` (or a point ``t u_lambda``
       just beyond the barrier near 0 when the straight path collapses).
    3. ``t`` is doubled from 1 until ``I(t u_lambda) < 0`` and
       ``t |u_lambda| > R``; a mountain pass between 0 and ``t u_lambda``.

    The energies are checked against ``I1 < 0 <= I2 < m <= I3``.
    """
    from .gasket import build_level
    from .nonlinearity import power_problem
    from .thresholds import threshold_report

    opts = options or SolverOptions()
    level = build_level(spec.N, spec.m)
    notes: list[str] = []
    try:
        thr = threshold_report(spec, lam=spec.lam, level=level)
    except Exception as exc:  # noqa: BLE001 - relabelled for the caller
        raise PipelineError("u_lambda", str(exc)) from exc
    in_regime = (0 < spec.lam < thr.Lambda and thr.eta_lambda is not None
                 and 0 <= spec.eta < thr.eta_lambda)
    if thr.u_lambda is None or thr.diagnostics.get("degenerate", True):
        notes.append("u_lambda is zero: the three-solution construction is inapplicable")
        return ThreeSolutions(spec, thr, {}, False, False, {}, {}, notes)
    if not in_regime:
        notes.append("parameters outside the admissible region; ordering not enforced")

    ctx = FunctionalContext(level, power_problem(spec))
    ul = ctx.restrict(thr.u_lambda)
    nul = ctx.norm_of(ul)
    reports: dict[str, SolutionReport] = {}

    try:
        start = ul if nul <= thr.R else ul * (thr.R / nul)
        reports["u1"] = minimize_in_ball(ctx, thr.R, ctx.function(start), opts)
    except Exception as exc:  # noqa: BLE001
        raise PipelineError("ball-minimizer", str(exc)) from exc

    try:
        rep2 = mountain_pass(ctx, thr.u_lambda, options=opts)
        if not rep2.converged and "collapse" in rep2.message:
            te = _ray_endpoint(ctx, ul)
            if te is None:
                raise PipelineError("mountain-pass-1", "no barrier found along the ray")
            notes.append(f"first mountain pass uses endpoint {float(te)!r} * u_lambda")
            rep2 = mountain_pass(ctx, ctx.function(te * ul), options=opts)
            rep2.extra["endpoint_scale"] = te
        reports["u2"] = rep2
    except PipelineError:
        raise
    except Exception as exc:  # noqa: BLE001
        raise PipelineError("mountain-pass-1", str(exc)) from exc

    t, k = 1.0, 0
    while not (ctx.I_of(t * ul) < 0 and t * nul > thr.R):
        if k == max_doublings:
            raise PipelineError("doubling", f"no admissible t after {max_doublings} doublings")
        t *= 2.0
        k += 1
    notes.append(f"second mountain pass endpoint: 2**{k} * u_lambda")
    try:
        rep3 = mountain_pass(ctx, ctx.function(t * ul), options=opts)
        rep3.extra["endpoint_scale"] = t
        reports["u3"] = rep3
    except Exception as exc:  # noqa: BLE001
        raise PipelineError("mountain-pass-2", str(exc)) from exc

    I1, I2, I3 = (reports[k_].energy_value for k_ in ("u1", "u2", "u3"))
    ordering = {"I1<0": I1 < 0, "0<=I2": 0 <= I2, "I2<m": I2 < thr.m, "m<=I3": thr.m <= I3}
    vals = {k_: r.u.values for k_, r in reports.items()}
    distances = {
        f"{a}-{b}": float(np.max(np.abs(vals[a] - vals[b])))
        for a, b in (("u1", "u2"), ("u1", "u3"), ("u2", "u3"))
    }
    if in_regime and not all(ordering.values()):
        notes.append("FALSIFICATION: energy ordering violated inside the admissible region")
    return ThreeSolutions(spec, thr, reports, in_regime, True, ordering, distances, notes)
