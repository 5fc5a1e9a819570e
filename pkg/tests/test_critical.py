import json
import math

import numpy as np
import pytest

from sgdirichlet.critical import (
    PathState,
    SolutionReport,
    SolverOptions,
    _reparametrize,
    minimize,
    minimize_in_ball,
    mountain_pass,
    three_solutions,
)
from sgdirichlet.energy import DiscreteFunction
from sgdirichlet.functional import FunctionalContext
from sgdirichlet.gasket import build_level
from sgdirichlet.nonlinearity import ProblemSpec, power_problem, psi_nonlinearity
from sgdirichlet.thresholds import compute_constants, harmonic_bump, threshold_report

L1 = build_level(3, 1)


def one_vertex_context(q=4.0):
    """Single free vertex (midpoint index 3) at level 1: I(t) = 10/3 t^2 - (2/9) t^q/q."""
    return FunctionalContext(L1, power_problem(ProblemSpec(m=1, q=q)), free=np.array([3]))


def grid_mountain(ctx, e, n=200001):
    ts = np.linspace(0.0, 1.0, n)
    return max(ctx.I_of(np.array([t * e])) for t in ts)


def test_zero_is_fixed_point():
    lev = build_level(3, 3)
    ctx = FunctionalContext(lev, power_problem(ProblemSpec(m=3)))
    rep = minimize(ctx, DiscreteFunction.zeros(lev))
    assert rep.converged and rep.residual == 0.0 and not np.any(rep.u.values)
    rep = minimize_in_ball(ctx, 0.5, DiscreteFunction.zeros(lev))
    assert rep.converged and not np.any(rep.u.values) and not rep.constrained


def test_psi_minimizer_is_nonzero_and_negative():
    lev = build_level(3, 3)
    lam = 0.5
    ctx = FunctionalContext(lev, psi_nonlinearity(lam, 1.8))
    rep = minimize(ctx, harmonic_bump(lev) * 1e-3, SolverOptions(rtol=1e-12))
    assert rep.converged and rep.energy_value < 0 and rep.norm > 0
    hist = rep.extra["I_history"]
    assert all(b <= a for a, b in zip(hist, hist[1:]))


def test_ball_minimizer_can_be_constrained():
    # pure energy with a linear source pulls the minimizer outside a small ball
    lev = build_level(3, 2)
    from sgdirichlet.nonlinearity import CallableNonlinearity
    nl = CallableNonlinearity(lambda x, t: np.ones_like(t), lambda x, t: t)
    ctx = FunctionalContext(lev, nl)
    free_min = minimize(ctx, DiscreteFunction.zeros(lev))
    rep = minimize_in_ball(ctx, 0.1 * free_min.norm)
    assert rep.constrained and rep.norm == pytest.approx(0.1 * free_min.norm, rel=1e-9)
    assert rep.energy_value < 0


def test_one_dimensional_mountain_pass_oracle():
    ctx = one_vertex_context()
    e = 10.0  # I(10) = 1000/3 - 10000/18 < 0
    assert ctx.I_of(np.array([e])) < 0
    rep = mountain_pass(ctx, ctx.function(np.array([e])))
    kappa_grid = grid_mountain(ctx, e)
    assert rep.converged
    assert abs(rep.energy_value - kappa_grid) <= 1e-4
    # closed form: critical point t^2 = 30, value 50
    assert rep.energy_value == pytest.approx(50.0, rel=1e-10)
    assert abs(rep.u.values[3]) == pytest.approx(math.sqrt(30.0), rel=1e-8)


def test_kappa_is_monotone():
    lev = build_level(3, 2)
    ctx = FunctionalContext(lev, power_problem(ProblemSpec(m=2)))
    bump = harmonic_bump(lev)
    t = 1.0
    while ctx.I_of(ctx.restrict(bump) * t) >= 0:
        t *= 2
    rep = mountain_pass(ctx, bump * t)
    kap = rep.extra["kappa_history"]
    assert all(b <= a for a, b in zip(kap, kap[1:]))
    assert rep.converged
    assert rep.energy_value > 0


def test_mountain_pass_rejects_bad_endpoints():
    ctx = one_vertex_context()
    with pytest.raises(ValueError):
        mountain_pass(ctx, DiscreteFunction.zeros(L1))
    with pytest.raises(ValueError):
        mountain_pass(ctx, ctx.function(np.array([1.0])))


def test_no_mountain_reports_collapse():
    # I(t) = 10/3 t^2 - 2t/9 has no barrier between 0 and its negative well
    from sgdirichlet.nonlinearity import CallableNonlinearity
    nl = CallableNonlinearity(lambda x, t: np.ones_like(t), lambda x, t: t)
    ctx = FunctionalContext(L1, nl, free=np.array([3]))
    rep = mountain_pass(ctx, ctx.function(np.array([0.05])))
    assert not rep.converged and "collapse" in rep.message


def test_path_tie_break_and_reparametrize():
    pts = np.array([[0.0], [1.0], [2.5], [3.0]])
    path = PathState(pts, np.array([0.0, 5.0, 5.0, -1.0]))
    assert path.argmax == 1
    ctx = FunctionalContext(L1, psi_nonlinearity(0.0, 1.5), free=np.array([3]))
    out = _reparametrize(ctx, pts)
    np.testing.assert_allclose(np.diff(out[:, 0]), 1.0, rtol=1e-12)


def test_report_round_trip():
    ctx = one_vertex_context()
    rep = mountain_pass(ctx, ctx.function(np.array([10.0])))
    back = SolutionReport.from_dict(json.loads(json.dumps(rep.to_dict())))
    assert back.energy_value == rep.energy_value
    assert np.array_equal(back.u.values, rep.u.values)
    v = ctx.restrict(back.u)
    assert ctx.gradient_of(v)[2] <= 1e-8


def test_three_solutions_zero_lambda_is_inapplicable():
    res = three_solutions(ProblemSpec(lam=0.0))
    assert not res.applicable and not res.reports
    assert any("inapplicable" in n for n in res.notes)


@pytest.fixture(scope="module")
def pipeline():
    spec = ProblemSpec(lam=compute_constants(3, 4.0, 1.8).Lambda / 2)
    thr = threshold_report(spec, lam=spec.lam)
    return three_solutions(spec.replace(eta=thr.eta_lambda / 2))


def test_three_solutions_in_regime(pipeline):
    res = pipeline
    assert res.in_regime and res.applicable and res.all_converged
    assert res.ordering_holds, res.ordering
    R = res.thresholds.R
    assert res.reports["u1"].norm < R
    assert res.reports["u1"].energy_value < 0


def test_three_solutions_reports_survive_serialization(pipeline):
    doc = json.loads(json.dumps(pipeline.to_dict(include_timing=False), sort_keys=True))
    ctx = FunctionalContext(build_level(3, 4), power_problem(pipeline.spec))
    for key, d in doc["solutions"].items():
        rep = SolutionReport.from_dict(d)
        _, _, rn = ctx.gradient_of(ctx.restrict(rep.u))
        assert rn <= 1e-8, key
