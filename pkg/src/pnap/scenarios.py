"""Scenario definitions, key=value configuration files and the run driver.

A scenario file is plain text, one ``key = value`` per line, ``#`` starts a
comment.  Every key of :data:`SCHEMA` may appear; unknown keys are errors.

Built-in layouts
----------------
``lattice``  7x7 unit squares on [0,7]^2.  Square ``(i, j)`` covers
             ``[i, i+1] x [j, j+1]``.  Absorbers (sigma_a = 10) are the squares
             with ``1 <= i, j <= 5`` and ``i + j`` even, except ``(3, 3)`` (the
             source, sigma_s = 1, G = 1/(4 pi)) and ``(3, 5)``.  Everything else
             is background with sigma_s = 1.
``hohlraum`` walls on [0,1]^2: ``[0,0.05]x[0.25,0.75]``, ``[0.25,0.75]^2``,
             ``[0,1]x[0,0.05]``, ``[0,1]x[0.95,1]``, ``[0.95,1]x[0,1]``;
             vacuum elsewhere.
"""

from __future__ import annotations

import dataclasses
import logging
import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .diagnostics import (
    DiagnosticLog,
    DiagnosticRecord,
    ap_error,
    discrete_energy,
)
from .diffusion_ref import (
    DiffusionProblem,
    DiffusionSide,
    DiffusionState,
    stable_diffusion_timestep,
    step_diffusion,
)
from .discretization import RECONSTRUCTIONS, BoundaryCondition, BoundarySpec, Mesh
from .harmonics import build_operator
from .integrator import (
    DISSIPATION,
    FilterSpec,
    PnSystem,
    SolverState,
    StepReport,
    TABLEAUS,
    advance,
    stable_timestep,
)
from .physics import OpacityModel, PhysicalConstants, TEMPERATURE_FLOOR, opacity_eval

log = logging.getLogger(__name__)

BUILTINS = ("ap_test", "marshak2a", "marshak2b", "lattice", "hohlraum")
INTEGRATORS = tuple(TABLEAUS) + ("diffusion",)
LAYOUTS = ("uniform", "lattice", "hohlraum")
INITIALS = ("uniform", "sine")
SIDE_KEYS = {"bc_xlo": "x-", "bc_xhi": "x+", "bc_zlo": "z-", "bc_zhi": "z+"}

LATTICE_SIGMA_A = 10.0
LATTICE_SIGMA_S = 1.0
LATTICE_ABSORBERS = tuple(
    (i, j) for i in range(1, 6) for j in range(1, 6)
    if (i + j) % 2 == 0 and (i, j) not in ((3, 3), (3, 5))
)
LATTICE_SOURCE = (3, 3)
HOHLRAUM_WALLS = (
    ((0.0, 0.05), (0.25, 0.75)),
    ((0.25, 0.75), (0.25, 0.75)),
    ((0.0, 1.0), (0.0, 0.05)),
    ((0.0, 1.0), (0.95, 1.0)),
    ((0.95, 1.0), (0.0, 1.0)),
)


class ConfigError(ValueError):
    pass


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("on", "yes", "true", "1"):
        return True
    if t in ("off", "no", "false", "0"):
        return False
    raise ValueError(f"expected on/off, got {text!r}")


def _pair(text: str) -> tuple[float, float]:
    parts = [float(p) for p in text.split(",")]
    if len(parts) != 2:
        raise ValueError(f"expected 'lo,hi', got {text!r}")
    return parts[0], parts[1]


def _cells(text: str) -> tuple[int, ...]:
    parts = tuple(int(p) for p in text.lower().split("x"))
    if not 1 <= len(parts) <= 2 or min(parts) < 1:
        raise ValueError(f"expected N or NxM, got {text!r}")
    return parts


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    return tuple(float(p) for p in text.split(",")) if text else ()


def _choice(options):
    def parse(text: str) -> str:
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


def _boundary(text: str) -> str:
    parse_boundary(text)
    return text.strip()


def parse_boundary(text: str) -> BoundaryCondition:
    t = text.strip()
    if t in ("periodic", "vacuum"):
        return BoundaryCondition(t)
    if t.startswith("inflow:"):
        key, _, val = t[len("inflow:"):].partition("=")
        if key == "T":
            return BoundaryCondition("inflow", temperature=float(val))
        if key == "I":
            return BoundaryCondition("inflow", intensity=float(val))
    raise ValueError(f"boundary must be periodic, vacuum, inflow:T=<keV> or inflow:I=<value>, got {t!r}")


REQUIRED = object()

# key -> (parser, default)
SCHEMA: dict[str, tuple[Callable, object]] = {
    "name": (str.strip, REQUIRED),
    "geometry": (_choice(("slab", "xz")), REQUIRED),
    "x_range": (_pair, REQUIRED),
    "z_range": (_pair, None),
    "cells": (_cells, REQUIRED),
    "order": (int, REQUIRED),
    "epsilon": (float, 1.0),
    "a": (float, 1.0),
    "c": (float, 1.0),
    "heat_capacity": (float, 1.0),
    "density": (float, 1.0),
    "opacity": (_choice(("constant", "powerlaw")), "constant"),
    "kappa": (float, 0.0),
    "scattering": (float, 0.0),
    "layout": (_choice(LAYOUTS), "uniform"),
    "coupled": (_bool, True),
    "source": (float, 0.0),
    "initial": (_choice(INITIALS), "uniform"),
    "initial_T": (float, TEMPERATURE_FLOOR),
    "bc_xlo": (_boundary, "periodic"),
    "bc_xhi": (_boundary, "periodic"),
    "bc_zlo": (_boundary, None),
    "bc_zhi": (_boundary, None),
    "integrator": (_choice(INTEGRATORS), "euler"),
    "reconstruction": (_choice(RECONSTRUCTIONS), "constant"),
    "filter": (_bool, False),
    "filter_length": (float, 1.0),
    "cfl": (float, 0.4),
    "dt_rule": (_choice(("transport", "diffusion")), "transport"),
    "tmax": (float, REQUIRED),
    "output_times": (_floats, ()),
    "snap_every": (int, 0),
    "sweeps": (_bool, False),
    "sweep_tol": (float, 1e-8),
    "sweep_max": (int, 20),
    "sweep_fail": (_choice(("warn", "abort")), "warn"),
    "opacity_sweeps": (int, 1),
    "dissipation": (_choice(DISSIPATION), "flux"),
}


@dataclass
class Scenario:
    name: str
    geometry: str
    x_range: tuple
    cells: tuple
    order: int
    tmax: float
    z_range: tuple | None = None
    epsilon: float = 1.0
    a: float = 1.0
    c: float = 1.0
    heat_capacity: float = 1.0
    density: float = 1.0
    opacity: str = "constant"
    kappa: float = 0.0
    scattering: float = 0.0
    layout: str = "uniform"
    coupled: bool = True
    source: float = 0.0
    initial: str = "uniform"
    initial_T: float = TEMPERATURE_FLOOR
    bc_xlo: str = "periodic"
    bc_xhi: str = "periodic"
    bc_zlo: str | None = None
    bc_zhi: str | None = None
    integrator: str = "euler"
    reconstruction: str = "constant"
    filter: bool = False
    filter_length: float = 1.0
    cfl: float = 0.4
    dt_rule: str = "transport"
    output_times: tuple = ()
    snap_every: int = 0
    sweeps: bool = False
    sweep_tol: float = 1e-8
    sweep_max: int = 20
    sweep_fail: str = "warn"
    opacity_sweeps: int = 1
    dissipation: str = "flux"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        dim = 1 if self.geometry == "slab" else 2
        if len(self.cells) != dim:
            raise ConfigError(f"cells: {self.geometry} needs {dim} cell count(s), got {len(self.cells)}")
        if dim == 2:
            for key in ("z_range", "bc_zlo", "bc_zhi"):
                if getattr(self, key) is None:
                    raise ConfigError(f"{key}: required for xz geometry")
        else:
            for key in ("z_range", "bc_zlo", "bc_zhi"):
                if getattr(self, key) is not None:
                    raise ConfigError(f"{key}: not allowed for slab geometry")
        if self.opacity_sweeps < 1:
            raise ConfigError("opacity_sweeps: must be at least 1")
        if self.order < 1:
            raise ConfigError("order: must be at least 1")
        if self.layout != "uniform" and self.geometry != "xz":
            raise ConfigError(f"layout: {self.layout} is a 2D layout")
        if not 0 < self.cfl <= 1:
            raise ConfigError("cfl: must lie in (0, 1]")
        if self.sweeps and self.integrator != "euler":
            raise ConfigError("sweeps: fixed-point sweeps are available for the euler integrator only")
        if self.tmax <= 0:
            raise ConfigError("tmax: must be positive")
        for key in ("epsilon", "a", "c"):
            if getattr(self, key) <= 0:
                raise ConfigError(f"{key}: must be positive")
        try:
            self.boundary_spec()
        except ValueError as exc:
            raise ConfigError(f"boundary: {exc}") from exc

    # -- derived objects ---------------------------------------------------

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)

    def mesh(self) -> Mesh:
        extents = [self.x_range] + ([self.z_range] if self.geometry == "xz" else [])
        return Mesh.uniform(extents, self.cells)

    def constants(self) -> PhysicalConstants:
        return PhysicalConstants(self.a, self.c, self.epsilon)

    def boundary_spec(self) -> BoundarySpec:
        sides = {}
        for key, side in SIDE_KEYS.items():
            val = getattr(self, key)
            if val is not None:
                sides[side] = parse_boundary(val)
        return BoundarySpec(sides)

    def regions(self):
        """Integer region id per cell and the region names."""
        return region_map(self.layout, self.mesh())

    def materials(self):
        """Absorption law, scattering array and source array per cell."""
        mesh = self.mesh()
        ids, names = self.regions()
        shape = mesh.shape
        if self.layout == "uniform":
            model = OpacityModel(self.opacity, self.kappa, self.density, self.scattering)
            sig_s = np.full(shape, self.scattering)
            src = np.full(shape, self.source) if self.source else None
            return (lambda T: opacity_eval(model, T)), sig_s, src
        if self.layout == "lattice":
            sig_a = np.where(ids == names.index("absorber"), LATTICE_SIGMA_A, 0.0)
            sig_s = np.where(ids == names.index("absorber"), 0.0, LATTICE_SIGMA_S)
            src = np.where(ids == names.index("source"), self.source, 0.0)
            return (lambda T: sig_a), sig_s, src
        wall = ids == names.index("wall")
        model = OpacityModel(self.opacity, self.kappa, self.density, 0.0)
        return (lambda T: np.where(wall, opacity_eval(model, T), 0.0)), np.zeros(shape), None

    def system(self) -> PnSystem:
        absorption, sig_s, src = self.materials()
        return PnSystem(
            mesh=self.mesh(),
            operator=build_operator(self.order, self.geometry),
            boundary=self.boundary_spec(),
            constants=self.constants(),
            absorption=absorption,
            heat_capacity=self.heat_capacity * self.density,
            scattering=sig_s,
            source=src,
            coupled=self.coupled,
            reconstruction=self.reconstruction,
            filter=FilterSpec(self.filter, self.filter_length),
            opacity_sweeps=self.opacity_sweeps,
            dissipation=self.dissipation,
        )

    def initial_state(self, system: PnSystem | None = None) -> SolverState:
        system = system or self.system()
        mesh = system.mesh
        if self.initial == "sine":
            x = mesh.grid()[0]
            T = (3.0 + np.sin(np.pi * x)) / 4.0
        else:
            T = np.full(mesh.shape, self.initial_T)
        return system.equilibrium(T)

    def timestep(self) -> float:
        return stable_timestep(self.mesh(), self.cfl, self.constants(), self.dt_rule)

    def diffusion_problem(self) -> DiffusionProblem:
        absorption, _, _ = self.materials()
        sides = {}
        for key, side in SIDE_KEYS.items():
            val = getattr(self, key)
            if val is None:
                continue
            bc = parse_boundary(val)
            if bc.kind == "periodic":
                sides[side] = DiffusionSide("periodic")
            elif bc.kind == "inflow" and bc.temperature is not None:
                sides[side] = DiffusionSide("dirichlet", bc.temperature)
            else:
                sides[side] = DiffusionSide("reflect")
        return DiffusionProblem(self.mesh(), absorption, self.heat_capacity * self.density,
                                self.a, self.c, sides)

    def to_mapping(self) -> dict:
        out = {}
        for key in SCHEMA:
            val = getattr(self, key)
            if val is None:
                continue
            out[key] = _format_value(val)
        return out


def _format_value(val) -> str:
    if isinstance(val, bool):
        return "on" if val else "off"
    if isinstance(val, tuple):
        if val and isinstance(val[0], int) and not isinstance(val[0], bool):
            return "x".join(str(v) for v in val)
        return ",".join(repr(float(v)) for v in val)
    if isinstance(val, float):
        return repr(val)
    return str(val)


def region_map(layout: str, mesh: Mesh):
    """Region id of every cell, decided at the cell centre."""
    if layout == "uniform":
        return np.zeros(mesh.shape, dtype=int), ["medium"]
    X, Z = mesh.grid()
    if layout == "lattice":
        names = ["background", "absorber", "source"]
        ids = np.zeros(mesh.shape, dtype=int)
        i, j = np.floor(X).astype(int), np.floor(Z).astype(int)
        for (a, b) in LATTICE_ABSORBERS:
            ids[(i == a) & (j == b)] = 1
        ids[(i == LATTICE_SOURCE[0]) & (j == LATTICE_SOURCE[1])] = 2
        return ids, names
    if layout == "hohlraum":
        names = ["vacuum", "wall"]
        ids = np.zeros(mesh.shape, dtype=int)
        # centres on a wall edge count as wall, so coarse grids stay mirror-symmetric
        tol = 1e-9
        for (x0, x1), (z0, z1) in HOHLRAUM_WALLS:
            ids[(X > x0 - tol) & (X < x1 + tol) & (Z > z0 - tol) & (Z < z1 + tol)] = 1
        return ids, names
    raise ValueError(f"unknown layout {layout!r}")


def lookup_region(layout: str, x: float, z: float) -> str:
    if layout == "lattice":
        i, j = int(math.floor(x)), int(math.floor(z))
        if (i, j) == LATTICE_SOURCE:
            return "source"
        return "absorber" if (i, j) in LATTICE_ABSORBERS else "background"
    if layout == "hohlraum":
        for (x0, x1), (z0, z1) in HOHLRAUM_WALLS:
            if x0 <= x <= x1 and z0 <= z <= z1:
                return "wall"
        return "vacuum"
    return "medium"


# --------------------------------------------------------------------------
# builtins and configuration files
# --------------------------------------------------------------------------

MARSHAK_COMMON = dict(
    geometry="slab", x_range=(0.0, 0.2), a=0.01372, c=29.98, heat_capacity=0.1, density=3.0,
    opacity="powerlaw", initial="uniform", initial_T=TEMPERATURE_FLOOR, bc_xlo="inflow:T=1.0",
    bc_xhi="vacuum", cfl=0.4, dt_rule="transport",
)


def build_scenario_lattice(**overrides) -> Scenario:
    params = dict(
        name="lattice", geometry="xz", x_range=(0.0, 7.0), z_range=(0.0, 7.0), cells=(280, 280),
        order=5, epsilon=1.0, a=1.0, c=1.0, layout="lattice", coupled=False,
        source=1.0 / (4.0 * math.pi), initial="uniform", initial_T=TEMPERATURE_FLOOR,
        bc_xlo="vacuum", bc_xhi="vacuum", bc_zlo="vacuum", bc_zhi="vacuum",
        integrator="euler", reconstruction="weno3", filter=True, filter_length=1.0,
        cfl=0.1, tmax=3.2, output_times=(3.2,),
    )
    params.update(overrides)
    return Scenario(**params)


def builtin(name: str) -> Scenario:
    if name == "ap_test":
        return Scenario(name="ap_test", geometry="slab", x_range=(0.0, 2.0), cells=(100,), order=7,
                        epsilon=1e-2, a=1.0, c=1.0, heat_capacity=0.1, opacity="constant", kappa=10.0,
                        initial="sine", bc_xlo="periodic", bc_xhi="periodic", cfl=0.4,
                        dt_rule="diffusion", tmax=1.0)
    if name == "marshak2b":
        return Scenario(name="marshak2b", cells=(400,), order=11, kappa=100.0, integrator="ars443",
                        tmax=10.0, output_times=(1.0, 5.0, 10.0), **MARSHAK_COMMON)
    if name == "marshak2a":
        return Scenario(name="marshak2a", cells=(400,), order=11, kappa=10.0, integrator="ars443",
                        tmax=1.0, output_times=(0.2, 0.4, 0.6, 0.8, 1.0), **MARSHAK_COMMON)
    if name == "lattice":
        return build_scenario_lattice()
    if name == "hohlraum":
        return Scenario(name="hohlraum", geometry="xz", x_range=(0.0, 1.0), z_range=(0.0, 1.0),
                        cells=(100, 100), order=7, epsilon=1.0, a=0.01372, c=29.98,
                        heat_capacity=0.3, density=1.0, opacity="powerlaw", kappa=100.0,
                        layout="hohlraum", initial="uniform", initial_T=TEMPERATURE_FLOOR,
                        bc_xlo="inflow:T=1.0", bc_xhi="vacuum", bc_zlo="vacuum", bc_zhi="vacuum",
                        integrator="euler", reconstruction="weno3", filter=True, cfl=0.1,
                        tmax=1.0, output_times=(1.0,))
    raise ConfigError(f"unknown scenario {name!r}; builtins are {', '.join(BUILTINS)}")


def parse_config_text(text: str, source: str = "<config>") -> dict:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = val.strip()
    return raw


def scenario_from_mapping(raw: dict, base: Scenario | None = None) -> Scenario:
    """Typed scenario from string values; ``base`` supplies unset keys."""
    values = {}
    for key, text in raw.items():
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
        parser = SCHEMA[key][0]
        try:
            values[key] = parser(text)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{key}: {exc}") from exc
    if base is not None:
        return _rebuild(base, values)
    for key, (_, default) in SCHEMA.items():
        if key not in values:
            if default is REQUIRED:
                raise ConfigError(f"{key}: missing required key")
            values[key] = default
    try:
        return Scenario(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _rebuild(base: Scenario, values: dict) -> Scenario:
    try:
        return base.replace(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path_or_name: str) -> Scenario:
    if path_or_name in BUILTINS:
        return builtin(path_or_name)
    if not os.path.exists(path_or_name):
        raise ConfigError(f"no such scenario file or builtin: {path_or_name!r}")
    with open(path_or_name) as fh:
        raw = parse_config_text(fh.read(), path_or_name)
    return scenario_from_mapping(raw)


def save_config(scenario: Scenario, path) -> None:
    lines = [f"# scenario {scenario.name}"]
    if scenario.layout == "lattice":
        lines.append("# absorbers (i,j) cover [i,i+1]x[j,j+1]: " +
                     " ".join(f"({i},{j})" for i, j in LATTICE_ABSORBERS) +
                     f"; source {LATTICE_SOURCE}")
    elif scenario.layout == "hohlraum":
        lines.append("# walls: " + " ".join(f"[{a},{b}]x[{c},{d}]" for (a, b), (c, d) in HOHLRAUM_WALLS))
    lines += [f"{k} = {v}" for k, v in scenario.to_mapping().items()]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def apply_overrides(scenario: Scenario, **overrides) -> Scenario:
    """Apply typed overrides (``None`` values are ignored)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    for key in changes:
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}")
    return _rebuild(scenario, changes)


# --------------------------------------------------------------------------
# running
# --------------------------------------------------------------------------

class StepFailure(RuntimeError):
    pass


@dataclass
class RunResult:
    scenario: Scenario
    state: object
    log: DiagnosticLog
    snapshots: dict = field(default_factory=dict)
    energies: list = field(default_factory=list)
    reports: list = field(default_factory=list)


def _record(scenario: Scenario, system: PnSystem, state: SolverState, report: StepReport) -> DiagnosticRecord:
    U, T = state.moments, state.T
    if scenario.geometry == "slab":
        eap = ap_error(U, T)
        phi = discrete_energy(U, T, system.constants, scenario.heat_capacity * scenario.density)
    else:
        eap = phi = float("nan")
    return DiagnosticRecord(
        time=state.time, step=state.step, ap_error=eap, energy_functional=phi,
        total_energy=system.total_energy(state),
        I00_min=float(U[0].min()), I00_max=float(U[0].max()),
        T_min=float(T.min()), T_max=float(T.max()),
        sweeps=report.sweeps, leakage=report.leakage, absorbed=report.absorbed,
        injected=report.injected, negative_I00=bool(np.any(U[0] < 0)),
    )


def _schedule(scenario: Scenario, dt: float):
    """Step sizes that land exactly on every output time and on ``tmax``."""
    stops = sorted({t for t in scenario.output_times if 0 < t < scenario.tmax} | {scenario.tmax})
    t = 0.0
    for stop in stops:
        n = max(1, math.ceil((stop - t) / dt - 1e-9))
        h = (stop - t) / n
        for _ in range(n):
            yield h, None
        yield 0.0, stop
        t = stop


def run_simulation(scenario: Scenario, callback=None, keep_reports: bool = False) -> RunResult:
    """Integrate ``scenario`` to ``tmax``.

    Snapshots are kept at ``output_times`` and every ``snap_every`` steps.
    ``callback(state)`` is called after every step.
    """
    dt = scenario.timestep()
    if scenario.integrator == "diffusion":
        return _run_diffusion(scenario, dt, callback)
    system = scenario.system()
    state = scenario.initial_state(system)
    result = RunResult(scenario, state, DiagnosticLog())
    result.energies.append(system.total_energy(state))
    result.log.append(_record(scenario, system, state, StepReport()))
    for h, stop in _schedule(scenario, dt):
        if stop is not None:
            result.snapshots[stop] = state.copy()
            continue
        report = StepReport()
        try:
            state = advance(state, h, system, scenario.integrator, scenario.sweeps,
                            scenario.sweep_tol, scenario.sweep_max, scenario.sweep_fail, report)
        except (ArithmeticError, RuntimeError) as exc:
            raise StepFailure(f"step {state.step + 1} at t = {state.time:.6g}: {exc}") from exc
        if not np.all(np.isfinite(state.moments)):
            raise StepFailure(f"non-finite moments after step {state.step} at t = {state.time:.6g}")
        result.energies.append(system.total_energy(state))
        result.log.append(_record(scenario, system, state, report))
        if keep_reports:
            result.reports.append(report)
        if scenario.snap_every and state.step % scenario.snap_every == 0:
            result.snapshots[state.time] = state.copy()
        if callback is not None:
            callback(state)
    result.state = state
    return result


def _run_diffusion(scenario: Scenario, dt: float, callback=None) -> RunResult:
    problem = scenario.diffusion_problem()
    T0 = scenario.initial_state().T
    state = DiffusionState(T0)
    result = RunResult(scenario, state, DiagnosticLog())
    for h, stop in _schedule(scenario, dt):
        if stop is not None:
            result.snapshots[stop] = DiffusionState(state.T.copy(), state.time, state.step)
            continue
        try:
            # substep when the explicit diffusion limit is tighter than h
            n = max(1, math.ceil(h / stable_diffusion_timestep(problem, state.T)))
            for _ in range(n):
                state = step_diffusion(state, h / n, problem)
        except ArithmeticError as exc:
            raise StepFailure(f"diffusion step {state.step + 1} at t = {state.time:.6g}: {exc}") from exc
        if callback is not None:
            callback(state)
    result.state = state
    return result


# --------------------------------------------------------------------------
# convergence study
# --------------------------------------------------------------------------

@dataclass
class ConvergenceTable:
    epsilons: tuple
    cells: tuple
    errors_I: dict
    errors_T: dict
    slopes_I: dict
    slopes_T: dict

    def rows(self):
        for eps in self.epsilons:
            for k, n in enumerate(self.cells[:-1]):
                yield eps, n, self.errors_I[eps][k], self.errors_T[eps][k]


def restrict(field: np.ndarray, factor: int) -> np.ndarray:
    """Average groups of ``factor`` cells along the last axis (1D fields)."""
    shape = field.shape[:-1] + (field.shape[-1] // factor, factor)
    return field.reshape(shape).mean(axis=-1)


def fitted_slope(h, err) -> float:
    return float(np.polyfit(np.log(np.asarray(h, float)), np.log(np.asarray(err, float)), 1)[0])


def convergence_study(scenario: Scenario, ladder, epsilons, t_end: float | None = None,
                      progress=None) -> ConvergenceTable:
    """l2 errors of coarse runs against the finest grid, with fitted slopes."""
    ladder = tuple(sorted(int(n) for n in ladder))
    if len(ladder) < 3:
        raise ConfigError("convergence ladder needs at least two coarse grids and a reference")
    if scenario.geometry != "slab":
        raise ConfigError("convergence study is implemented for slab scenarios")
    ref_n = ladder[-1]
    for n in ladder[:-1]:
        if ref_n % n:
            raise ConfigError(f"reference grid {ref_n} is not a multiple of {n}")
    t_end = scenario.tmax if t_end is None else t_end
    length = scenario.x_range[1] - scenario.x_range[0]
    eI, eT, sI, sT = {}, {}, {}, {}
    for eps in epsilons:
        sols = {}
        for n in ladder:
            sc = scenario.replace(cells=(n,), epsilon=float(eps), tmax=t_end, output_times=(), snap_every=0)
            sols[n] = run_simulation(sc).state
            if progress:
                progress(eps, n)
        ref = sols[ref_n]
        errs_I, errs_T = [], []
        for n in ladder[:-1]:
            f = ref_n // n
            dI = sols[n].moments - restrict(ref.moments, f)
            dT = sols[n].T - restrict(ref.T, f)
            errs_I.append(float(np.sqrt(np.sum(dI**2) / n)))
            errs_T.append(float(np.sqrt(np.sum(dT**2) / n)))
        h = [length / n for n in ladder[:-1]]
        eI[eps], eT[eps] = errs_I, errs_T
        sI[eps], sT[eps] = fitted_slope(h, errs_I), fitted_slope(h, errs_T)
    return ConvergenceTable(tuple(epsilons), ladder, eI, eT, sI, sT)
