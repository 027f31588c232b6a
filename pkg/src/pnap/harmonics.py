"""Angular basis bookkeeping and P_N flux operators.

Two geometries are supported:

``"slab"``
    1D planar transport.  Moments are ``I_l = int P_l(mu) I dmu`` for
    ``l = 0..M`` (Legendre, not normalized), so an isotropic intensity
    ``I = I_0 / 2``.

``"xz"``
    2D transport in the x-z plane with the full set of ``(M+1)**2``
    spherical-harmonic moments.  The state is kept in the real harmonic
    basis; moments are ``I_lm = 2 sqrt(pi) int Y_lm I dOmega`` so that
    ``I_00`` is the angle-integrated intensity and an isotropic field is
    ``I = I_00 / (4 pi)``.

Moments are stored flat in l-major order, ``m`` ascending within ``l``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple

import numpy as np
from scipy.special import eval_legendre, sph_harm_y

GEOMETRIES = ("slab", "xz")
SQRT_4PI = 2.0 * math.sqrt(math.pi)


class QuadratureError(RuntimeError):
    """Raised when a half-range integral does not settle on the resolution ladder."""


# --------------------------------------------------------------------------
# index bookkeeping
# --------------------------------------------------------------------------

def _check_geometry(geometry: str) -> None:
    if geometry not in GEOMETRIES:
        raise ValueError(f"unknown geometry {geometry!r}; expected one of {GEOMETRIES}")


def moment_count(M: int, geometry: str) -> int:
    _check_geometry(geometry)
    return M + 1 if geometry == "slab" else (M + 1) ** 2


def moment_index(l: int, m: int, M: int, geometry: str) -> int:
    """Flat position of moment ``(l, m)``."""
    _check_geometry(geometry)
    if not 0 <= l <= M:
        raise IndexError(f"degree l={l} outside 0..{M}")
    if geometry == "slab":
        if m != 0:
            raise IndexError(f"slab moments have m=0, got m={m}")
        return l
    if abs(m) > l:
        raise IndexError(f"order |m|={abs(m)} exceeds degree l={l}")
    return l * l + m + l


def moment_lm(flat: int, M: int, geometry: str) -> tuple[int, int]:
    """Inverse of :func:`moment_index`."""
    n = moment_count(M, geometry)
    if not 0 <= flat < n:
        raise IndexError(f"flat index {flat} outside 0..{n - 1}")
    if geometry == "slab":
        return flat, 0
    l = math.isqrt(flat)
    return l, flat - l * l - l


def degrees(M: int, geometry: str) -> np.ndarray:
    """Degree ``l`` of every flat moment."""
    n = moment_count(M, geometry)
    return np.array([moment_lm(k, M, geometry)[0] for k in range(n)])


def degree_slice(l: int, geometry: str) -> slice:
    """Flat range holding all moments of degree ``l``."""
    if geometry == "slab":
        return slice(l, l + 1)
    return slice(l * l, (l + 1) * (l + 1))


# --------------------------------------------------------------------------
# closed-form coupling coefficients
# --------------------------------------------------------------------------

class Coupling(NamedTuple):
    A: float
    B: float
    C: float
    D: float
    E: float
    F: float


def _root(num: float, den: float) -> float:
    if den <= 0 or num <= 0:
        return 0.0
    return math.sqrt(num / den)


def coupling_coefficients(l: int, m: int) -> Coupling:
    """The six recurrence radicals for ``(l, m)``; invalid radicands give 0."""
    if l < 0 or abs(m) > l:
        return Coupling(0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    up = (2 * l + 3) * (2 * l + 1)
    dn = (2 * l + 1) * (2 * l - 1)
    return Coupling(
        A=_root((l - m + 1) * (l + m + 1), up),
        B=_root((l - m) * (l + m), dn),
        C=_root((l + m + 1) * (l + m + 2), up),
        D=_root((l - m) * (l - m - 1), dn),
        E=_root((l - m + 1) * (l - m + 2), up),
        F=_root((l + m) * (l + m - 1), dn),
    )


def _coef(l: int, m: int, name: str) -> float:
    return getattr(coupling_coefficients(l, m), name)


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class PnOperator:
    """Flux matrices split by the degree of the coupled column.

    ``low[w]`` couples row degree ``l`` to column degree ``l - 1`` and
    ``up[w]`` to ``l + 1``, for each spatial direction ``w``.
    """

    order: int
    geometry: str
    low: tuple[np.ndarray, ...]
    up: tuple[np.ndarray, ...]
    degree: np.ndarray = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.degree)

    @property
    def ndim(self) -> int:
        return len(self.low)

    @property
    def e1(self) -> np.ndarray:
        v = np.zeros(self.size)
        v[0] = 1.0
        return v

    def full(self, axis: int) -> np.ndarray:
        return self.low[axis] + self.up[axis]

    def block(self, l: int) -> slice:
        return degree_slice(l, self.geometry)

    # 1D / 2D aliases matching the usual notation
    @property
    def B_low(self) -> np.ndarray:
        return self.low[0]

    @property
    def B_up(self) -> np.ndarray:
        return self.up[0]

    @property
    def Ax_low(self) -> np.ndarray:
        return self.low[0]

    @property
    def Ax_up(self) -> np.ndarray:
        return self.up[0]

    @property
    def Az_low(self) -> np.ndarray:
        return self.low[1]

    @property
    def Az_up(self) -> np.ndarray:
        return self.up[1]


def _split(A: np.ndarray, deg: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    low = np.where(deg[:, None] - 1 == deg[None, :], A, 0.0)
    up = np.where(deg[:, None] + 1 == deg[None, :], A, 0.0)
    return low, up


def build_operator_1d(M: int) -> PnOperator:
    """Slab operator from ``mu P_l = ((l+1) P_{l+1} + l P_{l-1}) / (2l+1)``."""
    if M < 1:
        raise ValueError("P_N order must be >= 1")
    low = np.zeros((M + 1, M + 1))
    up = np.zeros((M + 1, M + 1))
    for l in range(M + 1):
        if l + 1 <= M:
            up[l, l + 1] = (l + 1) / (2 * l + 1)
        if l >= 1:
            low[l, l - 1] = l / (2 * l + 1)
    for a in (low, up):
        a.setflags(write=False)
    return PnOperator(M, "slab", (low,), (up,), degrees(M, "slab"))


def complex_to_real(M: int) -> np.ndarray:
    """Unitary ``V`` with ``I_real = V @ I_complex`` for moment vectors."""
    n = (M + 1) ** 2
    U = np.zeros((n, n), dtype=complex)  # Y_real = U Y_complex
    s2 = 1.0 / math.sqrt(2.0)
    for l in range(M + 1):
        U[l * l + l, l * l + l] = 1.0
        for m in range(1, l + 1):
            sign = (-1) ** m
            p, q = l * l + l + m, l * l + l - m
            U[p, p] = sign * s2
            U[p, q] = s2
            U[q, p] = -1j * sign * s2
            U[q, q] = 1j * s2
    return U.conj()


def _complex_operators(M: int) -> tuple[np.ndarray, np.ndarray]:
    n = (M + 1) ** 2
    Ax = np.zeros((n, n))
    Az = np.zeros((n, n))

    def put(A, l, m, lc, mc, val):
        if 0 <= lc <= M and abs(mc) <= lc and val != 0.0:
            A[l * l + l + m, lc * lc + lc + mc] += val

    for l in range(M + 1):
        for m in range(-l, l + 1):
            put(Ax, l, m, l - 1, m - 1, -0.5 * _coef(l - 1, m - 1, "C"))
            put(Ax, l, m, l + 1, m - 1, 0.5 * _coef(l + 1, m - 1, "D"))
            put(Ax, l, m, l - 1, m + 1, 0.5 * _coef(l - 1, m + 1, "E"))
            put(Ax, l, m, l + 1, m + 1, -0.5 * _coef(l + 1, m + 1, "F"))
            put(Az, l, m, l - 1, m, _coef(l - 1, m, "A"))
            put(Az, l, m, l + 1, m, _coef(l + 1, m, "B"))
    return Ax, Az


def build_operator_2d(M: int) -> PnOperator:
    """x-z operator from the closed-form recurrences, rotated to the real basis."""
    if M < 1:
        raise ValueError("P_N order must be >= 1")
    V = complex_to_real(M)
    deg = degrees(M, "xz")
    low, up = [], []
    for Ac in _complex_operators(M):
        Ar = V @ Ac @ V.conj().T
        if np.abs(Ar.imag).max() > 1e-12:
            raise ArithmeticError("real-basis rotation left an imaginary residue")
        lo, hi = _split(np.ascontiguousarray(Ar.real), deg)
        lo.setflags(write=False)
        hi.setflags(write=False)
        low.append(lo)
        up.append(hi)
    return PnOperator(M, "xz", tuple(low), tuple(up), deg)


@lru_cache(maxsize=None)
def build_operator(M: int, geometry: str) -> PnOperator:
    _check_geometry(geometry)
    return build_operator_1d(M) if geometry == "slab" else build_operator_2d(M)


# --------------------------------------------------------------------------
# basis evaluation and quadrature
# --------------------------------------------------------------------------

def real_harmonics(M: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Orthonormal real harmonics, shape ``((M+1)**2,) + theta.shape``."""
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    out = np.empty(((M + 1) ** 2,) + np.broadcast(theta, phi).shape)
    r2 = math.sqrt(2.0)
    for l in range(M + 1):
        out[l * l + l] = sph_harm_y(l, 0, theta, phi).real
        for m in range(1, l + 1):
            y = sph_harm_y(l, m, theta, phi)
            sign = (-1) ** m
            out[l * l + l + m] = r2 * sign * y.real
            out[l * l + l - m] = r2 * sign * y.imag
    return out


def legendre_basis(M: int, mu: np.ndarray) -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    return np.stack([eval_legendre(l, mu) for l in range(M + 1)])


_AXES = {"x": np.array([1.0, 0.0, 0.0]), "y": np.array([0.0, 1.0, 0.0]),
         "z": np.array([0.0, 0.0, 1.0])}


def _normal_vector(normal: str) -> np.ndarray:
    if len(normal) != 2 or normal[0] not in "+-" or normal[1] not in _AXES:
        raise ValueError(f"normal must look like '+x' or '-z', got {normal!r}")
    return (1.0 if normal[0] == "+" else -1.0) * _AXES[normal[1]]


def hemisphere_nodes(normal: str, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Nodes ``(theta, phi)`` and weights covering ``{Omega . normal > 0}``.

    Gauss-Legendre in the cosine about ``normal`` times a uniform
    trapezoid in the azimuth about it.
    """
    nvec = _normal_vector(normal)
    x, w = np.polynomial.legendre.leggauss(n)
    mu = 0.5 * (x + 1.0)
    wmu = 0.5 * w
    nphi = 2 * n
    psi = (np.arange(nphi) + 0.5) * (2.0 * np.pi / nphi)
    wpsi = np.full(nphi, 2.0 * np.pi / nphi)
    # orthonormal frame (t1, t2, nvec)
    helper = np.array([0.0, 1.0, 0.0]) if abs(nvec[1]) < 0.5 else np.array([1.0, 0.0, 0.0])
    t1 = np.cross(helper, nvec)
    t1 /= np.linalg.norm(t1)
    t2 = np.cross(nvec, t1)
    MU, PSI = np.meshgrid(mu, psi, indexing="ij")
    s = np.sqrt(np.clip(1.0 - MU**2, 0.0, None))
    omega = (MU[..., None] * nvec + s[..., None] * np.cos(PSI)[..., None] * t1
             + s[..., None] * np.sin(PSI)[..., None] * t2)
    theta = np.arccos(np.clip(omega[..., 2], -1.0, 1.0))
    phi = np.arctan2(omega[..., 1], omega[..., 0])
    weights = np.outer(wmu, wpsi)
    return theta.ravel(), phi.ravel(), weights.ravel()


def sphere_nodes(n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    nphi = 2 * n
    phi = np.arange(nphi) * (2.0 * np.pi / nphi)
    TH, PH = np.meshgrid(np.arccos(x), phi, indexing="ij")
    W = np.outer(w, np.full(nphi, 2.0 * np.pi / nphi))
    return TH.ravel(), PH.ravel(), W.ravel()


# --------------------------------------------------------------------------
# half-range tables for inflow boundaries
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HalfSphereTable:
    """Boundary projection data for one outward normal.

    ``overlap @ I_interior`` is the contribution of directions leaving the
    domain (``Omega . n > 0``); ``incoming`` is the moment vector of a
    unit isotropic intensity restricted to directions entering it.
    """

    normal: str
    order: int
    geometry: str
    overlap: np.ndarray
    incoming: np.ndarray

    def ghost(self, interior: np.ndarray, inflow_intensity: float = 0.0) -> np.ndarray:
        """Ghost moments for isotropic inflow; ``interior`` has moments on axis 0."""
        g = np.tensordot(self.overlap, interior, axes=(1, 0))
        if inflow_intensity:
            g += inflow_intensity * self.incoming.reshape((-1,) + (1,) * (g.ndim - 1))
        return g


def _slab_half(M: int, sign: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    mu_out = sign * 0.5 * (x + 1.0)  # Omega . n > 0
    P = legendre_basis(M, mu_out)
    weight = 0.5 * w
    scale = (2.0 * np.arange(M + 1) + 1.0) / 2.0
    overlap = (P * weight) @ P.T * scale[None, :]
    P_in = legendre_basis(M, -mu_out)
    incoming = P_in @ weight
    return overlap, incoming


def _xz_half(M: int, normal: str, n: int) -> tuple[np.ndarray, np.ndarray]:
    th, ph, w = hemisphere_nodes(normal, n)
    Y = real_harmonics(M, th, ph)
    overlap = (Y * w) @ Y.T
    opposite = ("-" if normal[0] == "+" else "+") + normal[1]
    th2, ph2, w2 = hemisphere_nodes(opposite, n)
    incoming = SQRT_4PI * (real_harmonics(M, th2, ph2) @ w2)
    return overlap, incoming


@lru_cache(maxsize=None)
def half_sphere_table(normal: str, M: int, geometry: str = "xz",
                      tol: float = 1e-12, max_nodes: int = 512) -> HalfSphereTable:
    """Overlap integrals on the outgoing half-range, refined until stable."""
    _check_geometry(geometry)
    if geometry == "slab" and normal not in ("+x", "-x"):
        raise ValueError("slab geometry only has x normals")
    if geometry == "xz" and normal[1:] not in ("x", "z"):
        raise ValueError("x-z geometry has x and z normals only")
    n = max(4, M + 2)
    prev = None
    while n <= max_nodes:
        if geometry == "slab":
            cur = _slab_half(M, 1.0 if normal[0] == "+" else -1.0, n)
        else:
            cur = _xz_half(M, normal, n)
        if prev is not None:
            diff = max(np.abs(cur[0] - prev[0]).max(), np.abs(cur[1] - prev[1]).max())
            if diff < tol:
                for a in cur:
                    a.setflags(write=False)
                return HalfSphereTable(normal, M, geometry, cur[0], cur[1])
        prev = cur
        n *= 2
    raise QuadratureError(f"half-range table for {normal} did not converge to {tol}")


# --------------------------------------------------------------------------
# intensity reconstruction
# --------------------------------------------------------------------------

def evaluate_intensity(coefficients: np.ndarray, direction, geometry: str = "xz") -> np.ndarray:
    """Truncated expansion evaluated at ``direction``.

    ``direction`` is ``mu`` for the slab and a unit 3-vector (or array of
    them, last axis of length 3) in the x-z geometry.
    """
    coefficients = np.asarray(coefficients, dtype=float)
    n = coefficients.shape[0]
    if geometry == "slab":
        M = n - 1
        P = legendre_basis(M, direction)
        scale = (2.0 * np.arange(M + 1) + 1.0) / 2.0
        return np.tensordot(coefficients * scale, P, axes=(0, 0))
    M = math.isqrt(n) - 1
    if (M + 1) ** 2 != n:
        raise ValueError(f"{n} coefficients is not a square moment count")
    d = np.asarray(direction, dtype=float)
    theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
    phi = np.arctan2(d[..., 1], d[..., 0])
    Y = real_harmonics(M, theta, phi)
    return np.tensordot(coefficients, Y, axes=(0, 0)) / SQRT_4PI


def project_intensity(func, M: int, geometry: str = "xz", n: int = 64) -> np.ndarray:
    """Moments of ``func`` (of ``mu`` or of unit vectors) by quadrature."""
    if geometry == "slab":
        x, w = np.polynomial.legendre.leggauss(n)
        return legendre_basis(M, x) @ (w * func(x))
    th, ph, w = sphere_nodes(n)
    omega = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)], axis=-1)
    return SQRT_4PI * (real_harmonics(M, th, ph) @ (w * func(omega)))
