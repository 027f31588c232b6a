"""Explicit reference solver for the equilibrium diffusion limit.

The flux uses the wide (two-cell) stencil

    (ac/3) [ (phi_{i+2} - phi_i) / (2 dx sigma_{i+1})
           - (phi_i - phi_{i-2}) / (2 dx sigma_{i-1}) ] / (2 dx),   phi = T^4,

per axis, with the material and radiation energy ``C_v T + a T^4`` advanced
implicitly in ``T`` and the flux taken at the old level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .discretization import AXIS_NAMES, Mesh, _take
from .physics import solve_temperature_update


@dataclass
class DiffusionState:
    T: np.ndarray
    time: float = 0.0
    step: int = 0


@dataclass(frozen=True)
class DiffusionSide:
    """``periodic``, ``dirichlet`` (fixed ``temperature``) or ``reflect`` (zero flux)."""

    kind: str = "periodic"
    temperature: float = 0.0

    def __post_init__(self):
        if self.kind not in ("periodic", "dirichlet", "reflect"):
            raise ValueError(f"unknown diffusion boundary {self.kind!r}")


@dataclass
class DiffusionProblem:
    mesh: Mesh
    absorption: Callable[[np.ndarray], np.ndarray]
    heat_capacity: object = 1.0
    a: float = 1.0
    c: float = 1.0
    sides: dict = field(default_factory=dict)

    def side(self, axis: int, upper: bool) -> DiffusionSide:
        return self.sides.get(AXIS_NAMES[axis] + ("+" if upper else "-"), DiffusionSide())


def _pad(q: np.ndarray, axis: int, lo, hi, kind_lo: str, kind_hi: str, width: int = 2) -> np.ndarray:
    n = q.shape[axis]
    if kind_lo == "periodic":
        left = _take(q, axis, slice(n - width, n))
        right = _take(q, axis, slice(0, width))
        return np.concatenate([left, q, right], axis=axis)
    parts = []
    for kind, val, upper in ((kind_lo, lo, False), (kind_hi, hi, True)):
        if kind == "dirichlet":
            shape = list(q.shape)
            shape[axis] = width
            parts.append(np.full(shape, val))
        else:
            # mirror image about the face
            idx = np.arange(n - 1, n - 1 - width, -1) if upper else np.arange(width - 1, -1, -1)
            parts.append(np.take(q, idx, axis=axis))
    return np.concatenate([parts[0], q, parts[1]], axis=axis)


def diffusion_operator(phi: np.ndarray, sigma: np.ndarray, problem: DiffusionProblem,
                       phi_wall: dict | None = None, sigma_wall: dict | None = None) -> np.ndarray:
    """Wide-stencil divergence ``(ac/3) div(grad(phi) / sigma)`` per cell."""
    mesh = problem.mesh
    out = np.zeros_like(phi)
    for axis in range(mesh.dim):
        lo, hi = problem.side(axis, False), problem.side(axis, True)
        pw = (phi_wall or {}).get(axis, (None, None))
        sw = (sigma_wall or {}).get(axis, (None, None))
        p = _pad(phi, axis, pw[0], pw[1], lo.kind, hi.kind, 2)
        s = _pad(sigma, axis, sw[0], sw[1], lo.kind, hi.kind, 2)
        n = phi.shape[axis]
        dx = mesh.spacing[axis]
        p0 = _take(p, axis, slice(2, n + 2))
        pp = _take(p, axis, slice(4, n + 4))
        pm = _take(p, axis, slice(0, n))
        sp_ = _take(s, axis, slice(3, n + 3))
        sm = _take(s, axis, slice(1, n + 1))
        out += ((pp - p0) / (2 * dx * sp_) - (p0 - pm) / (2 * dx * sm)) / (2 * dx)
    return problem.a * problem.c / 3.0 * out


def step_diffusion(state: DiffusionState, dt: float, problem: DiffusionProblem) -> DiffusionState:
    """Advance ``C_v T + a T^4`` with the explicit wide-stencil flux."""
    T = state.T
    sigma = problem.absorption(T)
    phi_wall, sigma_wall = {}, {}
    for axis in range(problem.mesh.dim):
        pair_phi, pair_sig = [], []
        for upper in (False, True):
            side = problem.side(axis, upper)
            Tw = side.temperature
            pair_phi.append(Tw**4)
            pair_sig.append(float(problem.absorption(np.array([Tw]))[0]) if side.kind == "dirichlet" else None)
        phi_wall[axis] = tuple(pair_phi)
        sigma_wall[axis] = tuple(pair_sig)
    Cv = np.broadcast_to(np.asarray(problem.heat_capacity, dtype=float), T.shape)
    r = Cv * T + problem.a * T**4 + dt * diffusion_operator(T**4, sigma, problem, phi_wall, sigma_wall)
    T_new = solve_temperature_update(Cv, np.full(T.shape, problem.a), r)
    return DiffusionState(T_new, state.time + dt, state.step + 1)


def stable_diffusion_timestep(problem: DiffusionProblem, T: np.ndarray, safety: float = 0.9) -> float:
    """Explicit limit from the linearized stencil at the current state."""
    T = np.asarray(T, dtype=float)
    sigma = problem.absorption(T)
    Cv = np.asarray(problem.heat_capacity, dtype=float)
    # d(aT^4)/d(C_v T + aT^4) times the linear diffusivity c/(3 sigma)
    w = 4 * problem.a * T**3 / (Cv + 4 * problem.a * T**3)
    D = np.max(w * problem.c / (3.0 * sigma))
    h2 = sum(1.0 / d**2 for d in problem.mesh.spacing)
    if D <= 0:
        return math.inf
    return safety * 2.0 / (D * h2)


def linear_step(phi: np.ndarray, dt: float, dx: float, sigma: float, c: float = 1.0) -> np.ndarray:
    """Linearized periodic update ``phi += (c dt / 3 sigma) (phi_{i+2} - 2 phi_i + phi_{i-2}) / (4 dx^2)``."""
    lap = (np.roll(phi, -2) - 2.0 * phi + np.roll(phi, 2)) / (4.0 * dx * dx)
    return phi + c * dt / (3.0 * sigma) * lap


def growth_factor(sigma: float, dt: float, dx: float, k: float, c: float = 1.0) -> float:
    """Amplification ``1 + (c dt / (3 sigma dx^2)) (cos(2 k dx) - 1)`` as stated for the limit scheme."""
    return 1.0 + c * dt / (3.0 * sigma * dx * dx) * (math.cos(2.0 * k * dx) - 1.0)


def stencil_growth_factor(sigma: float, dt: float, dx: float, k: float, c: float = 1.0) -> float:
    """Exact amplification of :func:`linear_step` for the mode ``exp(i k x)``.

    The ``1/(4 dx^2)`` stencil weight gives half the rate of
    :func:`growth_factor`, so the explicit limit sits at
    ``c dt / (3 sigma dx^2) = 2`` rather than 1.
    """
    return 1.0 + c * dt / (3.0 * sigma * dx * dx) * (math.cos(2.0 * k * dx) - 1.0) / 2.0


def evolve_mode(ratio: float, steps: int = 200, n: int = 64, sigma: float = 1.0, c: float = 1.0,
                dx: float | None = None) -> np.ndarray:
    """Amplitude history of the period-4 (worst) mode under :func:`linear_step`.

    ``ratio`` is ``c dt / (3 sigma dx^2)``.
    """
    if n % 4:
        raise ValueError("grid size must be a multiple of 4 to carry the worst mode")
    dx = dx if dx is not None else 1.0 / n
    dt = ratio * 3.0 * sigma * dx * dx / c
    phi = np.cos(0.5 * np.pi * np.arange(n))
    amps = [np.max(np.abs(phi))]
    for _ in range(steps):
        phi = linear_step(phi, dt, dx, sigma, c)
        amps.append(np.max(np.abs(phi)))
    return np.array(amps)
