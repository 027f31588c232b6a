"""Time integration of the P_N system: AP IMEX-RK steps, fixed-point sweeps, filter.

Each stage solves, in order,

* the coupled ``(I_0^0, T)`` relaxation through one scalar quartic per cell,
* the degrees ``l = 1 .. M`` in ascending order, each using the freshly
  computed degree ``l - 1`` for its low-side convection and the explicit
  stage data for its up-side convection.

The top degree carries the only implicit jump dissipation, which couples
neighbouring cells and is solved with a sparse LU per stage.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .discretization import (
    BoundarySpec,
    Mesh,
    apply_matrix,
    boundary_ghosts,
    divergence,
    face_alpha,
    ghost_width,
    lf_interface_flux,
    pad_axis,
    reconstruct_interfaces,
    _take,
)
from .harmonics import PnOperator, degree_slice
from .physics import PhysicalConstants, planck_energy, solve_temperature_update

log = logging.getLogger(__name__)


class ConvergenceWarning(RuntimeWarning):
    pass


class SweepDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class ButcherTableau:
    """Paired explicit/implicit Runge-Kutta tables in ARS form."""

    name: str
    A_exp: np.ndarray
    A_imp: np.ndarray
    b_exp: np.ndarray
    b_imp: np.ndarray

    def __post_init__(self):
        for attr in ("A_exp", "A_imp", "b_exp", "b_imp"):
            object.__setattr__(self, attr, np.asarray(getattr(self, attr), dtype=float))
        s = self.stages
        if self.A_exp.shape != (s, s) or self.A_imp.shape != (s, s) or self.b_imp.shape != (s,):
            raise ValueError(f"{self.name}: inconsistent tableau shapes")
        if np.any(np.triu(self.A_exp) != 0):
            raise ValueError(f"{self.name}: explicit table must be strictly lower triangular")
        if np.any(np.triu(self.A_imp, 1) != 0) or self.A_imp[0, 0] != 0:
            raise ValueError(f"{self.name}: implicit table must be lower triangular with a_11 = 0")
        if np.any(np.diag(self.A_imp)[1:] <= 0):
            raise ValueError(f"{self.name}: implicit diagonal must be positive after the first stage")
        if not (np.array_equal(self.A_exp[-1], self.b_exp) and np.array_equal(self.A_imp[-1], self.b_imp)):
            raise ValueError(f"{self.name}: tableau is not globally stiffly accurate")

    @property
    def stages(self) -> int:
        return len(self.b_exp)

    @property
    def c_exp(self) -> np.ndarray:
        return self.A_exp.sum(axis=1)

    @property
    def c_imp(self) -> np.ndarray:
        return self.A_imp.sum(axis=1)


def _ars222() -> ButcherTableau:
    g = 1.0 - 1.0 / math.sqrt(2.0)
    d = 1.0 - 1.0 / (2.0 * g)
    A_exp = [[0, 0, 0], [g, 0, 0], [d, 1 - d, 0]]
    A_imp = [[0, 0, 0], [0, g, 0], [0, 1 - g, g]]
    return ButcherTableau("ars222", A_exp, A_imp, A_exp[-1], A_imp[-1])


def _ars443() -> ButcherTableau:
    A_exp = [
        [0, 0, 0, 0, 0],
        [1 / 2, 0, 0, 0, 0],
        [11 / 18, 1 / 18, 0, 0, 0],
        [5 / 6, -5 / 6, 1 / 2, 0, 0],
        [1 / 4, 7 / 4, 3 / 4, -7 / 4, 0],
    ]
    A_imp = [
        [0, 0, 0, 0, 0],
        [0, 1 / 2, 0, 0, 0],
        [0, 1 / 6, 1 / 2, 0, 0],
        [0, -1 / 2, 1 / 2, 1 / 2, 0],
        [0, 3 / 2, -3 / 2, 1 / 2, 1 / 2],
    ]
    return ButcherTableau("ars443", A_exp, A_imp, A_exp[-1], A_imp[-1])


EULER = ButcherTableau("euler", [[0, 0], [1, 0]], [[0, 0], [0, 1]], [1, 0], [0, 1])
ARS222 = _ars222()
ARS443 = _ars443()
TABLEAUS = {t.name: t for t in (EULER, ARS222, ARS443)}
DISSIPATION = ("flux", "limit")


@dataclass
class SolverState:
    moments: np.ndarray
    T: np.ndarray
    time: float = 0.0
    step: int = 0

    def copy(self) -> "SolverState":
        return SolverState(self.moments.copy(), self.T.copy(), self.time, self.step)


@dataclass
class StepReport:
    """Energy bookkeeping of one step (all quantities integrated over the domain)."""

    leakage: float = 0.0
    absorbed: float = 0.0
    injected: float = 0.0
    sweeps: int = 1
    residual: float = 0.0


@dataclass(frozen=True)
class FilterSpec:
    enabled: bool = False
    length: float = 1.0

    def strength(self, dt: float, dx: float, c: float) -> float:
        return 2.0 * c * dt / dx


@dataclass
class PnSystem:
    """Everything a step needs besides the state.

    ``absorption`` maps a temperature field to the absorption coefficient;
    ``source`` is the isotropic kinetic source density ``G``.  With
    ``coupled = False`` the material temperature is frozen and absorbed
    photons leave the system.  ``opacity_sweeps`` is the number of
    absorption evaluations per stage: 1 lags the opacity at the previous
    stage temperature, more iterate it towards the new one.
    ``dissipation`` scales the jump term: "flux" uses ``alpha eps / 2``,
    "limit" uses ``alpha eps / (4c)``.
    """

    mesh: Mesh
    operator: PnOperator
    boundary: BoundarySpec
    constants: PhysicalConstants
    absorption: Callable[[np.ndarray], np.ndarray]
    heat_capacity: object = 1.0
    scattering: object = 0.0
    source: object = None
    coupled: bool = True
    reconstruction: str = "constant"
    filter: FilterSpec = field(default_factory=FilterSpec)
    opacity_sweeps: int = 1
    dissipation: str = "flux"
    _lu_cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self.boundary.check_mesh(self.mesh)
        expect = {"slab": 1, "xz": 2}[self.operator.geometry]
        if self.mesh.dim != expect:
            raise ValueError(f"{self.operator.geometry} operator needs a {expect}D mesh")
        ghost_width(self.reconstruction)
        if self.opacity_sweeps < 1:
            raise ValueError("opacity_sweeps must be at least 1")
        if self.dissipation not in DISSIPATION:
            raise ValueError(f"dissipation must be one of {DISSIPATION}")
        self._low_blocks = []
        op = self.operator
        for l in range(op.order + 1):
            if l == 0:
                self._low_blocks.append(None)
                continue
            rows, cols = degree_slice(l, op.geometry), degree_slice(l - 1, op.geometry)
            self._low_blocks.append((rows, cols, [m[rows, cols] for m in op.low]))

    @property
    def moment_count(self) -> int:
        return self.operator.size

    def sigma_total(self, T) -> np.ndarray:
        return self.absorption(T) + self.scattering

    def source_moment(self) -> np.ndarray | float:
        """Isotropic source projected on ``I_0^0``."""
        if self.source is None:
            return 0.0
        return 4.0 * math.pi * np.asarray(self.source, dtype=float)

    def total_energy(self, state: SolverState) -> float:
        c = self.constants.c
        density = state.moments[0] / c
        if self.coupled:
            density = density + np.asarray(self.heat_capacity) * state.T
        return float(np.sum(density) * self.mesh.cell_volume)

    def equilibrium(self, T) -> SolverState:
        T = np.broadcast_to(np.asarray(T, dtype=float), self.mesh.shape).copy()
        U = np.zeros((self.moment_count,) + self.mesh.shape)
        U[0] = planck_energy(T, self.constants.a, self.constants.c)
        return SolverState(U, T)


def stable_timestep(mesh: Mesh, cfl: float, constants: PhysicalConstants, regime: str = "transport") -> float:
    if not 0 < cfl <= 1:
        raise ValueError("CFL must lie in (0, 1]")
    h = min(mesh.spacing)
    if regime == "transport":
        return cfl * h / constants.c
    if regime == "diffusion":
        return cfl * h * h / constants.c
    raise ValueError(f"unknown time-step regime {regime!r}")


# --------------------------------------------------------------------------
# spatial terms
# --------------------------------------------------------------------------

def _alpha_faces(system: PnSystem, sigma_t) -> list:
    """Face damping, with the jump prefactor relative to ``eps/2`` folded in."""
    eps = system.constants.eps
    scale = 1.0 if system.dissipation == "flux" else 0.5 / system.constants.c
    return [scale * face_alpha(sigma_t, system.mesh, system.boundary, ax, eps)
            for ax in range(system.mesh.dim)]


def _boundary_area(mesh: Mesh, axis: int) -> float:
    return mesh.cell_volume / mesh.spacing[axis]


def _explicit_term(system: PnSystem, U, sigma_t):
    """Minus the up-side flux divergence, and the row-0 outflow through the boundary."""
    mesh, op, eps = system.mesh, system.operator, system.constants.eps
    a, c = system.constants.a, system.constants.c
    width = ghost_width(system.reconstruction)
    ghosts = boundary_ghosts(U, mesh, system.boundary, op, a, c)
    alpha = _alpha_faces(system, sigma_t)
    mask = (op.degree < op.order).astype(float)
    out = np.zeros_like(U)
    outflow = 0.0
    for axis in range(mesh.dim):
        padded = pad_axis(U, axis, width, system.boundary.periodic(axis),
                          ghosts.get((axis, False)), ghosts.get((axis, True)))
        UL, UR = reconstruct_interfaces(padded, axis + 1, system.reconstruction, width)
        F = lf_interface_flux(UL, UR, op.up[axis], alpha[axis], mask, eps)
        out -= divergence(F, axis + 1, mesh.spacing[axis])
        if not system.boundary.periodic(axis):
            F0 = F[0]
            outflow += _boundary_area(mesh, axis) * float(
                np.sum(_take(F0, axis, -1)) - np.sum(_take(F0, axis, 0)))
    return out, outflow


def _low_central(system: PnSystem, U, l: int, ghosts: dict):
    """Central low-side divergence for the rows of degree ``l``."""
    rows, cols, mats = system._low_blocks[l]
    mesh, eps = system.mesh, system.constants.eps
    width = ghost_width(system.reconstruction)
    sub = U[cols]
    out = 0.0
    for axis in range(mesh.dim):
        per = system.boundary.periodic(axis)
        glo = ghosts.get((axis, False))
        ghi = ghosts.get((axis, True))
        padded = pad_axis(sub, axis, width, per,
                          None if per else glo[cols], None if per else ghi[cols])
        UL, UR = reconstruct_interfaces(padded, axis + 1, system.reconstruction, width)
        F = 0.5 * eps * apply_matrix(mats[axis], UL + UR)
        out = out + divergence(F, axis + 1, mesh.spacing[axis])
    return out


def _top_degree_solve(system: PnSystem, diag, rhs, beta: float, alpha, ghosts: dict):
    """Solve ``diag*I + beta*J(I) = rhs`` for the top-degree rows.

    ``J`` is the implicit low-side jump dissipation with cell-average
    jumps; ``rhs`` has shape ``(rows,) + mesh.shape``.
    """
    mesh, eps = system.mesh, system.constants.eps
    M = system.operator.order
    rows = degree_slice(M, system.operator.geometry)
    shape = mesh.shape
    n = math.prod(shape)
    idx = np.arange(n).reshape(shape)
    d = np.asarray(np.broadcast_to(diag, shape), dtype=float).ravel().copy()
    rhs = rhs.reshape(rhs.shape[0], n).copy()
    ii, jj, vv = [], [], []
    for axis in range(mesh.dim):
        w = beta * eps * alpha[axis] / (2.0 * mesh.spacing[axis])
        N = shape[axis]
        inner = _take(w, axis, slice(1, N))
        a_idx = _take(idx, axis, slice(0, N - 1)).ravel()
        b_idx = _take(idx, axis, slice(1, N)).ravel()
        wi = inner.ravel()
        if system.boundary.periodic(axis):
            if N > 1:
                w0 = _take(w, axis, 0).ravel()
                a_idx = np.concatenate([a_idx, _take(idx, axis, N - 1).ravel()])
                b_idx = np.concatenate([b_idx, _take(idx, axis, 0).ravel()])
                wi = np.concatenate([wi, w0])
        else:
            for upper in (False, True):
                wf = _take(w, axis, N if upper else 0).ravel()
                cells = _take(idx, axis, N - 1 if upper else 0).ravel()
                g = ghosts[(axis, upper)][rows].reshape(rhs.shape[0], -1)
                np.add.at(d, cells, wf)
                rhs[:, cells] += wf * g
        np.add.at(d, a_idx, wi)
        np.add.at(d, b_idx, wi)
        ii += [a_idx, b_idx]
        jj += [b_idx, a_idx]
        vv += [-wi, -wi]
    off = np.concatenate(vv) if vv else np.zeros(0)
    if not np.any(off):
        return (rhs / d).reshape((rhs.shape[0],) + shape)
    key = system._lu_cache.get("key")
    if key is not None and np.array_equal(key[0], d) and np.array_equal(key[1], off):
        lu = system._lu_cache["lu"]
    else:
        mat = sp.csc_matrix((np.concatenate([d, off]),
                             (np.concatenate([np.arange(n)] + ii), np.concatenate([np.arange(n)] + jj))),
                            shape=(n, n))
        lu = splu(mat)
        system._lu_cache["key"] = (d.copy(), off.copy())
        system._lu_cache["lu"] = lu
    sol = lu.solve(np.ascontiguousarray(rhs.T))
    return sol.T.reshape((rhs.shape[0],) + shape)


def _stage_solve(system: PnSystem, base: SolverState, expl_sum, impl_sum, beta: float,
                 sigma_couple, ghosts: dict, dt: float):
    """One implicit stage; returns ``(U, T, R)`` with ``R`` the known right side."""
    const = system.constants
    eps2, a, c = const.eps**2, const.a, const.c
    U_n, T_n = base.moments, base.T
    R = (eps2 / c) * U_n + dt * (expl_sum + impl_sum)
    U = np.empty_like(U_n)
    if system.coupled:
        sig = sigma_couple
        Cv = np.asarray(system.heat_capacity, dtype=float)
        e = Cv * T_n + U_n[0] / c + (dt / eps2) * expl_sum[0]
        for sweep in range(system.opacity_sweeps):
            if sweep:
                sig = system.absorption(T)
            denom = eps2 + beta * sig * c
            r = e - R[0] / denom
            c4 = beta * sig * a * c / denom
            T = solve_temperature_update(np.broadcast_to(Cv, r.shape), c4, r)
        U[0] = (R[0] + beta * sig * a * c * T**4) / (eps2 / c + beta * sig)
    else:
        T = T_n.copy()
        sig_a = system.absorption(T)
        U[0] = (R[0] + beta * eps2 * system.source_moment()) / (eps2 / c + beta * sig_a)
    op = system.operator
    M = op.order
    sigma_t = system.sigma_total(T)
    diag = eps2 / c + beta * sigma_t
    for l in range(1, M + 1):
        rows = degree_slice(l, op.geometry)
        U[rows] = 0.0
        central = _low_central(system, U, l, ghosts)
        rhs = R[rows] - beta * central
        if l < M:
            U[rows] = rhs / diag
        else:
            alpha = _alpha_faces(system, sigma_t)
            U[rows] = _top_degree_solve(system, diag, rhs, beta, alpha, ghosts)
    return U, T, R


def _absorbed(system: PnSystem, U, T) -> float:
    if system.coupled:
        return 0.0
    return float(np.sum(system.absorption(T) * U[0]) * system.mesh.cell_volume)


def step_imex_rk(state: SolverState, dt: float, tableau: ButcherTableau, system: PnSystem,
                 report: StepReport | None = None) -> SolverState:
    """Advance one globally stiffly accurate IMEX-RK step."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    const = system.constants
    eps2, a, c = const.eps**2, const.a, const.c
    s = tableau.stages
    Us, Ts, E, S = [state.moments], [state.T], [], []
    outflow, absorbed = [], []
    for k in range(s):
        if k > 0:
            expl_sum = sum(tableau.A_exp[k, j] * E[j] for j in range(k) if tableau.A_exp[k, j] != 0)
            impl_sum = sum(tableau.A_imp[k, j] * S[j] for j in range(k) if tableau.A_imp[k, j] != 0)
            if np.isscalar(expl_sum):
                expl_sum = np.zeros_like(state.moments)
            if np.isscalar(impl_sum):
                impl_sum = np.zeros_like(state.moments)
            beta = dt * tableau.A_imp[k, k]
            ghosts = boundary_ghosts(Us[k - 1], system.mesh, system.boundary, system.operator, a, c)
            sigma_couple = system.absorption(Ts[k - 1])
            U, T, R = _stage_solve(system, state, expl_sum, impl_sum, beta, sigma_couple, ghosts, dt)
            Us.append(U)
            Ts.append(T)
            if k == s - 1:
                absorbed.append(_absorbed(system, U, T))
                break
            S.append(((eps2 / c) * U - R) / beta)
        else:
            S.append(np.zeros_like(state.moments))
        Ek, out_k = _explicit_term(system, Us[k], system.sigma_total(Ts[k]))
        E.append(Ek)
        outflow.append(out_k)
        absorbed.append(_absorbed(system, Us[k], Ts[k]))
    if report is not None:
        b_e, b_i = tableau.b_exp, tableau.b_imp
        report.leakage = dt / eps2 * float(sum(b_e[j] * outflow[j] for j in range(len(outflow))))
        report.absorbed = dt / eps2 * float(sum(b_i[j] * absorbed[j] for j in range(s)))
        report.injected = dt * float(np.sum(np.broadcast_to(system.source_moment(), system.mesh.shape))
                                     * system.mesh.cell_volume) if system.source is not None else 0.0
    return SolverState(Us[-1], Ts[-1], state.time + dt, state.step + 1)


def step_first_order(state: SolverState, dt: float, system: PnSystem,
                     report: StepReport | None = None) -> SolverState:
    """First-order AP step: implicit relaxation and low side, explicit up side."""
    return step_imex_rk(state, dt, EULER, system, report)


def fixed_point_iterate(state: SolverState, dt: float, system: PnSystem, tol: float = 1e-8,
                        max_sweeps: int = 20, on_fail: str = "warn",
                        report: StepReport | None = None, history: list | None = None) -> SolverState:
    """Repeat the first-order update with the up side lagged at the previous sweep."""
    if on_fail not in ("warn", "abort"):
        raise ValueError("on_fail must be 'warn' or 'abort'")
    const = system.constants
    a, c = const.a, const.c
    prev = state
    outflow = 0.0
    residual = math.inf
    zero = np.zeros_like(state.moments)
    for sweep in range(1, max_sweeps + 1):
        ghosts = boundary_ghosts(prev.moments, system.mesh, system.boundary, system.operator, a, c)
        expl, outflow = _explicit_term(system, prev.moments, system.sigma_total(prev.T))
        U, T, _ = _stage_solve(system, state, expl, zero, dt, system.absorption(prev.T), ghosts, dt)
        residual = (np.linalg.norm(U - prev.moments) + np.linalg.norm(T - prev.T)) / dt
        if history is not None:
            history.append(residual)
        prev = SolverState(U, T)
        if residual < tol:
            break
    else:
        msg = f"fixed-point sweeps did not converge in {max_sweeps} sweeps (residual {residual:.3e})"
        if on_fail == "abort":
            raise SweepDivergenceError(msg)
        warnings.warn(msg, ConvergenceWarning, stacklevel=2)
    if report is not None:
        eps2 = const.eps**2
        report.leakage = dt / eps2 * outflow
        report.absorbed = dt / eps2 * _absorbed(system, prev.moments, prev.T)
        report.injected = dt * float(np.sum(np.broadcast_to(system.source_moment(), system.mesh.shape))
                                     * system.mesh.cell_volume) if system.source is not None else 0.0
        report.sweeps = sweep
        report.residual = residual
    return SolverState(prev.moments, prev.T, state.time + dt, state.step + 1)


def filter_coefficient(spec: FilterSpec, order: int, sigma_t, dt: float, dx: float, c: float):
    """Per-cell filter strength ``(omega / M^2) / ((sigma_a + sigma_s) L + M)^2``."""
    omega = spec.strength(dt, dx, c)
    return omega / order**2 / (np.asarray(sigma_t, dtype=float) * spec.length + order) ** 2


def apply_filter(moments: np.ndarray, alpha_f, operator: PnOperator) -> np.ndarray:
    """Damp degrees ``l >= ceil(2M/3)`` by ``1 / (1 + alpha_f l^2 (l+1)^2)``."""
    M = operator.order
    lmin = math.ceil(2 * M / 3)
    out = moments.copy()
    alpha_f = np.asarray(alpha_f, dtype=float)
    for l in range(max(lmin, 1), M + 1):
        rows = degree_slice(l, operator.geometry)
        out[rows] = moments[rows] / (1.0 + alpha_f * (l * (l + 1)) ** 2)
    return out


def advance(state: SolverState, dt: float, system: PnSystem, integrator: str = "euler",
            sweeps: bool = False, tol: float = 1e-8, max_sweeps: int = 20, on_fail: str = "warn",
            report: StepReport | None = None) -> SolverState:
    """Filter (when enabled) and take one step with the chosen integrator."""
    if system.filter.enabled:
        sig = system.sigma_total(state.T)
        af = filter_coefficient(system.filter, system.operator.order, sig, dt,
                                system.mesh.spacing[0], system.constants.c)
        state = replace(state, moments=apply_filter(state.moments, af, system.operator))
    if integrator not in TABLEAUS:
        raise ValueError(f"unknown integrator {integrator!r}")
    if sweeps and integrator == "euler":
        return fixed_point_iterate(state, dt, system, tol, max_sweeps, on_fail, report)
    return step_imex_rk(state, dt, TABLEAUS[integrator], system, report)
