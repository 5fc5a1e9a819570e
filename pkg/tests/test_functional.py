import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sgdirichlet.energy import DiscreteFunction, energy
from sgdirichlet.functional import (
    FunctionalContext,
    SolverError,
    energy_gradient,
    eval_I,
    pcg,
    residual_norm,
    weak_residual,
)
from sgdirichlet.gasket import build_level
from sgdirichlet.nonlinearity import CallableNonlinearity, ProblemSpec, example_f1, power_problem
from sgdirichlet.energy import stiffness_matrix

ZERO_NL = CallableNonlinearity(lambda x, t: 0 * t, lambda x, t: 0 * t)


def loop_I(ctx, u):
    """Direct vertex/edge loop evaluation of the discrete functional."""
    lev = u.level
    W = sum((u.values[a] - u.values[b]) ** 2 for a, b in lev.edges)
    W *= ((lev.N + 2) / lev.N) ** lev.m
    J = sum(lev.weights[i] * float(ctx.nl.F(np.array([i]), u.values[i:i + 1])[0])
            for i in range(lev.N, lev.n_vertices))
    return 0.5 * W - J


def test_examples_level1():
    lev = build_level(3, 1)
    ctx = FunctionalContext(lev, power_problem(ProblemSpec(q=4.0)))
    assert eval_I(ctx, DiscreteFunction.zeros(lev)) == 0.0
    u = DiscreteFunction.indicator(lev, 3)
    assert eval_I(ctx, u) == pytest.approx(0.5 * 20 / 3 - 0.25 * 2 / 9, rel=1e-14)
    assert eval_I(ctx, u) == pytest.approx(3.2777777777777777, rel=1e-14)
    assert np.all(weak_residual(ctx, DiscreteFunction.zeros(lev)).values == 0.0)


def test_gradient_of_pure_energy_is_identity(rng):
    lev = build_level(3, 3)
    ctx = FunctionalContext(lev, ZERO_NL)
    vals = rng.standard_normal(lev.n_vertices)
    vals[:3] = 0.0
    u = DiscreteFunction(lev, vals)
    np.testing.assert_allclose(energy_gradient(ctx, u).values, vals, rtol=1e-8, atol=1e-9)
    assert residual_norm(ctx, u) == pytest.approx(math.sqrt(energy(u)), rel=1e-8)
    assert np.all(energy_gradient(ctx, DiscreteFunction.zeros(lev)).values == 0.0)


@pytest.mark.parametrize("family", ["power", "example_f1"])
def test_residual_matches_finite_differences(family, rng):
    lev = build_level(3, 3)
    if family == "power":
        nl = power_problem(ProblemSpec(lam=1.0, eta=0.5))
        vals = rng.uniform(0.2, 1.5, lev.n_vertices) * rng.choice([-1, 1], lev.n_vertices)
    else:
        nl = example_f1(1.0, 4.0)
        vals = np.where(rng.random(lev.n_vertices) < 0.5,
                        rng.uniform(0.2, 0.8, lev.n_vertices), rng.uniform(1.2, 3.0, lev.n_vertices))
    vals[:3] = 0.0
    ctx = FunctionalContext(lev, nl)
    u = DiscreteFunction(lev, vals)
    res = weak_residual(ctx, u).values
    h = 1e-6
    for _ in range(20):
        d = rng.standard_normal(lev.n_vertices)
        d[:3] = 0.0
        fd = (eval_I(ctx, u.with_values(vals + h * d)) - eval_I(ctx, u.with_values(vals - h * d))) / (2 * h)
        exact = float(res @ d)
        assert abs(fd - exact) <= 1e-6 * abs(exact)


def test_eval_I_matches_loop_oracle(rng):
    lev = build_level(3, 2)
    ctx = FunctionalContext(lev, power_problem(ProblemSpec(lam=0.7, eta=0.2)))
    vals = rng.standard_normal(lev.n_vertices)
    vals[:3] = 0.0
    u = DiscreteFunction(lev, vals)
    assert eval_I(ctx, u) == pytest.approx(loop_I(ctx, u), rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_descent_along_negative_gradient(seed):
    rng = np.random.default_rng(seed)
    lev = build_level(3, 3)
    ctx = FunctionalContext(lev, power_problem(ProblemSpec(lam=0.5, eta=0.1)))
    v = rng.standard_normal(ctx.n_free)
    g, res, rn = ctx.gradient_of(v)
    if rn == 0:
        return
    I0 = ctx.I_of(v)
    tau = 1.0
    while tau > 1e-12 and ctx.I_of(v - tau * g) >= I0:
        tau /= 2
    assert ctx.I_of(v - tau * g) < I0
    # first-order slope is -||g||^2
    assert float(res @ g) == pytest.approx(rn * rn, rel=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), radius=st.floats(1e-4, 0.05))
def test_positivity_near_zero(seed, radius):
    rng = np.random.default_rng(seed)
    lev = build_level(3, 3)
    q = 4.0
    ctx = FunctionalContext(lev, power_problem(ProblemSpec(q=q)))
    v = rng.standard_normal(ctx.n_free)
    v *= radius / ctx.norm_of(v)
    lower = (0.5 - 9.0**q * radius ** (q - 2) / q) * radius**2
    assert ctx.I_of(v) >= lower * (1 - 1e-12)
    assert ctx.I_of(v) > 0


def test_positivity_near_zero_with_eta(rng):
    lev = build_level(3, 3)
    ctx = FunctionalContext(lev, power_problem(ProblemSpec(eta=0.1)))
    for _ in range(100):
        v = rng.standard_normal(ctx.n_free)
        v *= 1e-3 / ctx.norm_of(v)
        assert ctx.I_of(v) > 0


def test_pcg_solves_spd_system(rng):
    lev = build_level(3, 4)
    A = stiffness_matrix(lev)[3:, 3:].tocsr()
    x = rng.standard_normal(A.shape[0])
    sol, its = pcg(A, A @ x, rtol=1e-12)
    assert its > 0
    np.testing.assert_allclose(sol, x, rtol=1e-8, atol=1e-8)
    with pytest.raises(SolverError):
        pcg(A, A @ x, rtol=1e-14, maxiter=2)


def test_context_rejects_boundary_unknowns():
    with pytest.raises(ValueError):
        FunctionalContext(build_level(3, 1), ZERO_NL, free=np.array([0, 3]))


def test_level_mismatch():
    ctx = FunctionalContext(build_level(3, 1), ZERO_NL)
    with pytest.raises(ValueError):
        eval_I(ctx, DiscreteFunction.zeros(build_level(3, 2)))
