import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnap.diffusion_ref import (
    DiffusionProblem,
    DiffusionSide,
    DiffusionState,
    diffusion_operator,
    evolve_mode,
    growth_factor,
    linear_step,
    stable_diffusion_timestep,
    stencil_growth_factor,
    step_diffusion,
)
from pnap.discretization import Mesh

import oracles


def periodic_problem(N=32, sigma=10.0, Cv=0.1):
    mesh = Mesh.uniform([(0, 2)], (N,))
    return DiffusionProblem(mesh, lambda T: np.full(np.shape(T), sigma), Cv, 1.0, 1.0)


def test_step_matches_oracle():
    prob = periodic_problem()
    x = prob.mesh.centers()
    T = (3 + np.sin(np.pi * x)) / 4
    dt = 4e-4
    out = step_diffusion(DiffusionState(T), dt, prob)
    ref = oracles.five_point_step(T, dt, prob.mesh.spacing[0], np.full(32, 10.0), 0.1)
    np.testing.assert_allclose(out.T, ref, rtol=1e-12)
    assert out.step == 1 and out.time == dt


def test_periodic_conserves_energy():
    prob = periodic_problem(sigma=1.0)
    x = prob.mesh.centers()
    st = DiffusionState((3 + np.sin(np.pi * x)) / 4)
    E = lambda s: np.sum(0.1 * s.T + s.T**4)
    E0 = E(st)
    for _ in range(20):
        st = step_diffusion(st, 1e-3, prob)
    assert E(st) == pytest.approx(E0, rel=1e-13)


def test_operator_2d_separable():
    mesh = Mesh.uniform([(0, 1), (0, 1)], (8, 8))
    prob = DiffusionProblem(mesh, lambda T: np.ones_like(T), 1.0, 1.0, 1.0)
    X, Z = mesh.grid()
    phi = np.cos(2 * np.pi * X)
    div = diffusion_operator(phi, np.ones_like(phi), prob)
    # only the x direction contributes and the result is x-only
    np.testing.assert_allclose(div, div[:, :1] * np.ones((1, 8)), atol=1e-12)
    assert np.abs(div).max() > 0


def test_dirichlet_wall_drives_heating():
    mesh = Mesh.uniform([(0, 1)], (20,))
    prob = DiffusionProblem(mesh, lambda T: np.ones_like(T), 1.0, 1.0, 1.0,
                            {"x-": DiffusionSide("dirichlet", 1.0), "x+": DiffusionSide("reflect")})
    st = DiffusionState(np.full(20, 0.1))
    for _ in range(10):
        st = step_diffusion(st, 1e-3, prob)
    assert st.T[0] > st.T[-1]
    assert st.T[-1] == pytest.approx(0.1, rel=1e-12)


def test_reflect_conserves():
    mesh = Mesh.uniform([(0, 1)], (16,))
    prob = DiffusionProblem(mesh, lambda T: np.ones_like(T), 1.0, 1.0, 1.0,
                            {"x-": DiffusionSide("reflect"), "x+": DiffusionSide("reflect")})
    T = 1 + 0.5 * mesh.centers()
    st = step_diffusion(DiffusionState(T), 1e-4, prob)
    assert np.sum(st.T + st.T**4) == pytest.approx(np.sum(T + T**4), rel=1e-14)
    with pytest.raises(ValueError):
        DiffusionSide("neumann")


@settings(max_examples=40, deadline=None)
@given(st.floats(0.01, 2.5), st.integers(1, 31))
def test_stencil_growth_factor_is_exact(ratio, kidx):
    n, dx, sigma = 64, 1 / 64, 2.0
    k = 2 * np.pi * kidx
    dt = ratio * 3 * sigma * dx * dx
    x = np.arange(n) * dx
    phi = np.cos(k * x)
    out = linear_step(phi, dt, dx, sigma)
    np.testing.assert_allclose(out, stencil_growth_factor(sigma, dt, dx, k) * phi, atol=1e-12)


def test_growth_factor_formula():
    dx, sigma = 0.1, 1.0
    dt = 3 * sigma * dx * dx
    assert growth_factor(sigma, dt, dx, math.pi / (2 * dx)) == pytest.approx(-1.0)
    assert stencil_growth_factor(sigma, dt, dx, math.pi / (2 * dx)) == pytest.approx(0.0)


def test_worst_mode_evolution():
    assert evolve_mode(0.5, 100)[-1] <= 1.0
    assert evolve_mode(2.5, 100)[-1] > 1e10
    with pytest.raises(ValueError):
        evolve_mode(1.0, n=30)


def test_stable_timestep_estimate():
    prob = periodic_problem(sigma=1.0, Cv=1e-12)
    dt = stable_diffusion_timestep(prob, np.ones(32), safety=1.0)
    dx = prob.mesh.spacing[0]
    assert dt == pytest.approx(2 * 3 * dx * dx, rel=1e-9)
