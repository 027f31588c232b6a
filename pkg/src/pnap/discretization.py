"""Structured finite-volume machinery: mesh, ghost cells, reconstruction, fluxes.

Moment fields are arrays of shape ``(K,) + mesh.shape``; spatial axis ``d``
of the mesh is array axis ``d + 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .harmonics import PnOperator, half_sphere_table

SIDES = ("x-", "x+", "z-", "z+")
AXIS_NAMES = ("x", "z")
RECONSTRUCTIONS = ("constant", "linear", "weno3")
WENO_EPS = 1e-6


@dataclass(frozen=True)
class Mesh:
    """Uniform Cartesian mesh on ``[lower, upper]`` per axis."""

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    shape: tuple[int, ...]

    def __post_init__(self):
        if not (len(self.lower) == len(self.upper) == len(self.shape)) or len(self.shape) not in (1, 2):
            raise ValueError("mesh must be 1D or 2D with matching extents")
        for lo, hi, n in zip(self.lower, self.upper, self.shape):
            if not hi > lo or n < 1:
                raise ValueError("mesh extents must be increasing and cell counts positive")

    @classmethod
    def uniform(cls, extents, shape) -> "Mesh":
        lower = tuple(float(e[0]) for e in extents)
        upper = tuple(float(e[1]) for e in extents)
        return cls(lower, upper, tuple(int(n) for n in shape))

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((hi - lo) / n for lo, hi, n in zip(self.lower, self.upper, self.shape))

    @property
    def cell_volume(self) -> float:
        return math.prod(self.spacing)

    def centers(self, axis: int = 0) -> np.ndarray:
        d = self.spacing[axis]
        return self.lower[axis] + (np.arange(self.shape[axis]) + 0.5) * d

    def grid(self) -> tuple[np.ndarray, ...]:
        return np.meshgrid(*(self.centers(a) for a in range(self.dim)), indexing="ij")


def ghost_width(scheme: str) -> int:
    if scheme not in RECONSTRUCTIONS:
        raise ValueError(f"unknown reconstruction {scheme!r}")
    return 1 if scheme == "constant" else 2


@dataclass(frozen=True)
class BoundaryCondition:
    """One side of the domain.

    ``inflow`` takes an isotropic Planckian at ``temperature`` (keV) or a
    given isotropic ``intensity``; ``vacuum`` is inflow of nothing.
    """

    kind: str = "periodic"
    temperature: float | None = None
    intensity: float | None = None

    def __post_init__(self):
        if self.kind not in ("periodic", "inflow", "vacuum"):
            raise ValueError(f"unknown boundary kind {self.kind!r}")
        if self.kind == "inflow" and (self.temperature is None) == (self.intensity is None):
            raise ValueError("inflow needs exactly one of temperature or intensity")

    def isotropic_intensity(self, a: float, c: float, geometry: str) -> float:
        if self.kind != "inflow":
            return 0.0
        if self.intensity is not None:
            return float(self.intensity)
        total = a * c * self.temperature**4
        return total / 2.0 if geometry == "slab" else total / (4.0 * math.pi)

    def describe(self) -> str:
        if self.kind == "inflow":
            if self.temperature is not None:
                return f"inflow:T={self.temperature!r}"
            return f"inflow:I={self.intensity!r}"
        return self.kind


@dataclass(frozen=True)
class BoundarySpec:
    sides: dict = field(default_factory=dict)

    def __post_init__(self):
        for side in self.sides:
            if side not in SIDES:
                raise ValueError(f"unknown boundary side {side!r}")
        for ax in AXIS_NAMES:
            lo, hi = self.sides.get(ax + "-"), self.sides.get(ax + "+")
            if lo is None and hi is None:
                continue
            if (lo is not None and lo.kind == "periodic") != (hi is not None and hi.kind == "periodic"):
                raise ValueError(f"periodic boundary on {ax} must be set on both sides")

    def side(self, axis: int, upper: bool) -> BoundaryCondition:
        key = AXIS_NAMES[axis] + ("+" if upper else "-")
        if key not in self.sides:
            raise KeyError(f"no boundary condition for side {key}")
        return self.sides[key]

    def periodic(self, axis: int) -> bool:
        return self.side(axis, False).kind == "periodic"

    def check_mesh(self, mesh: Mesh) -> None:
        for axis in range(mesh.dim):
            self.side(axis, False)
            self.side(axis, True)


def _take(a: np.ndarray, axis: int, sl) -> np.ndarray:
    idx = [slice(None)] * a.ndim
    idx[axis] = sl
    return a[tuple(idx)]


def boundary_ghosts(field: np.ndarray, mesh: Mesh, spec: BoundarySpec, op: PnOperator,
                    a: float, c: float) -> dict:
    """Ghost moment layers for every non-periodic side, keyed ``(axis, upper)``.

    Outgoing directions copy the adjacent interior state through the
    half-range overlap table; incoming directions carry the prescribed
    isotropic inflow.
    """
    ghosts = {}
    for axis in range(mesh.dim):
        for upper in (False, True):
            bc = spec.side(axis, upper)
            if bc.kind == "periodic":
                continue
            normal = ("+" if upper else "-") + AXIS_NAMES[axis]
            table = half_sphere_table(normal, op.order, op.geometry)
            interior = _take(field, axis + 1, -1 if upper else 0)
            ghosts[(axis, upper)] = table.ghost(interior, bc.isotropic_intensity(a, c, op.geometry))
    return ghosts


def pad_axis(field: np.ndarray, axis: int, width: int, periodic: bool,
             ghost_lo=None, ghost_hi=None) -> np.ndarray:
    """Pad spatial ``axis`` (array axis ``axis + 1``) with ``width`` ghost layers."""
    ax = axis + 1
    if periodic:
        lo = _take(field, ax, slice(-width, None))
        hi = _take(field, ax, slice(0, width))
    else:
        shape = list(field.shape)
        shape[ax] = width
        lo = np.broadcast_to(np.expand_dims(ghost_lo, ax), shape)
        hi = np.broadcast_to(np.expand_dims(ghost_hi, ax), shape)
    return np.concatenate([lo, field, hi], axis=ax)


def apply_boundary(field: np.ndarray, mesh: Mesh, spec: BoundarySpec, op: PnOperator,
                   a: float, c: float, width: int = 1, ghosts: dict | None = None) -> list:
    """One ghost-padded copy of ``field`` per spatial axis.

    ``ghosts`` may carry precomputed non-periodic ghost layers (for
    instance from an earlier time level); otherwise they are built from
    ``field`` itself.
    """
    if ghosts is None:
        ghosts = boundary_ghosts(field, mesh, spec, op, a, c)
    out = []
    for axis in range(mesh.dim):
        per = spec.periodic(axis)
        out.append(pad_axis(field, axis, width, per, ghosts.get((axis, False)), ghosts.get((axis, True))))
    return out


def pad_scalar(q: np.ndarray, mesh: Mesh, spec: BoundarySpec, axis: int, width: int = 1) -> np.ndarray:
    """Pad a cell scalar along ``axis``: wrap if periodic, else copy the edge cell."""
    q = np.asarray(q)[None]
    if spec.periodic(axis):
        return pad_axis(q, axis, width, True)[0]
    lo = _take(q, axis + 1, 0)
    hi = _take(q, axis + 1, -1)
    return pad_axis(q, axis, width, False, lo, hi)[0]


# --------------------------------------------------------------------------
# reconstruction
# --------------------------------------------------------------------------

def _minmod(a, b):
    return np.where(a * b > 0, np.sign(a) * np.minimum(np.abs(a), np.abs(b)), 0.0)


def _weno3_left(um, u0, up):
    """Value at the right face of the centre cell from ``(u_{i-1}, u_i, u_{i+1})``."""
    p0 = -0.5 * um + 1.5 * u0
    p1 = 0.5 * u0 + 0.5 * up
    b0 = (u0 - um) ** 2
    b1 = (up - u0) ** 2
    a0 = (1.0 / 3.0) / (WENO_EPS + b0) ** 2
    a1 = (2.0 / 3.0) / (WENO_EPS + b1) ** 2
    return (a0 * p0 + a1 * p1) / (a0 + a1)


def reconstruct_interfaces(padded: np.ndarray, axis: int, scheme: str, width: int):
    """Left and right states at the ``N + 1`` faces along array ``axis``.

    ``padded`` holds ``width`` ghost layers on each side of ``N`` cells.
    Face ``f`` separates cells ``f - 1`` and ``f`` (interior numbering).
    """
    need = ghost_width(scheme)
    if width < need:
        raise ValueError(f"{scheme} reconstruction needs {need} ghost layers, got {width}")
    n = padded.shape[axis] - 2 * width
    g = width

    def cells(start, stop):
        return _take(padded, axis, slice(start, stop))

    if scheme == "constant":
        return cells(g - 1, g + n), cells(g, g + n + 1)
    # cells g-1 .. g+n and their neighbours
    um = cells(g - 2, g + n)
    u0 = cells(g - 1, g + n + 1)
    up = cells(g, g + n + 2)
    if scheme == "linear":
        slope = _minmod(u0 - um, up - u0)
        plus = u0 + 0.5 * slope   # right face of each cell
        minus = u0 - 0.5 * slope  # left face of each cell
    else:
        plus = _weno3_left(um, u0, up)
        minus = _weno3_left(up, u0, um)
    left = _take(plus, axis, slice(0, n + 1))
    right = _take(minus, axis, slice(1, n + 2))
    return left, right


# --------------------------------------------------------------------------
# fluxes
# --------------------------------------------------------------------------

def damping(sigma, eps: float) -> np.ndarray:
    """Dissipation weight ``exp(-sigma / eps**2)``; 1 in vacuum, 0 when thick."""
    return np.exp(-np.asarray(sigma, dtype=float) / eps**2)


def face_alpha(sigma_t: np.ndarray, mesh: Mesh, spec: BoundarySpec, axis: int, eps: float) -> np.ndarray:
    """Face damping from the mean opacity of the two adjacent cells."""
    s = pad_scalar(sigma_t, mesh, spec, axis, 1)
    lo = _take(s, axis, slice(0, -1))
    hi = _take(s, axis, slice(1, None))
    return damping(0.5 * (lo + hi), eps)


def lf_interface_flux(U_minus, U_plus, A, alpha, coe, eps: float) -> np.ndarray:
    """Damped Lax-Friedrichs flux between left state ``U_minus`` and right ``U_plus``.

    ``(eps/2) A (U- + U+) - coe * (alpha eps / 2) (U+ - U-)``; moments on
    axis 0.  ``coe`` is a scalar or a per-row 0/1 mask.
    """
    U_minus = np.asarray(U_minus, dtype=float)
    U_plus = np.asarray(U_plus, dtype=float)
    central = 0.5 * eps * apply_matrix(A, U_minus + U_plus)
    coe = np.asarray(coe, dtype=float)
    if coe.ndim:
        coe = coe.reshape((-1,) + (1,) * (U_minus.ndim - 1))
    return central - coe * (0.5 * eps) * alpha * (U_plus - U_minus)


def apply_matrix(A: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``A`` acting on the moment axis (axis 0) of ``U``."""
    return (A @ U.reshape(U.shape[0], -1)).reshape((A.shape[0],) + U.shape[1:])


def divergence(flux: np.ndarray, axis: int, dx: float) -> np.ndarray:
    """Cell difference of face fluxes along array ``axis``."""
    return (_take(flux, axis, slice(1, None)) - _take(flux, axis, slice(0, -1))) / dx


def dissipation_mask(op: PnOperator, side: str) -> np.ndarray:
    """Rows receiving the jump term: up side for l < M, low side for l = M."""
    top = op.degree == op.order
    return (~top if side == "up" else top).astype(float)


def convection_divergence(field: np.ndarray, mesh: Mesh, spec: BoundarySpec, op: PnOperator,
                          side: str, alpha_faces, eps: float, a: float = 1.0, c: float = 1.0,
                          scheme: str = "constant", ghosts: dict | None = None) -> np.ndarray:
    """Per-cell divergence of the ``side`` fluxes ("low" or "up") of ``field``."""
    if side not in ("low", "up"):
        raise ValueError("side must be 'low' or 'up'")
    width = ghost_width(scheme)
    padded = apply_boundary(field, mesh, spec, op, a, c, width, ghosts)
    mats = op.low if side == "low" else op.up
    mask = dissipation_mask(op, side)
    out = np.zeros_like(field, dtype=float)
    for axis in range(mesh.dim):
        UL, UR = reconstruct_interfaces(padded[axis], axis + 1, scheme, width)
        F = lf_interface_flux(UL, UR, mats[axis], alpha_faces[axis], mask, eps)
        out += divergence(F, axis + 1, mesh.spacing[axis])
    return out
