"""Material models: opacities, Planck emission and the implicit temperature solve."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Marshak initial temperature; keeps power-law opacities finite at the cold start.
TEMPERATURE_FLOOR = 1e-6


class NegativeEnergyError(ArithmeticError):
    """The energy available to a cell became negative during an update."""

    def __init__(self, message: str, cells=None):
        super().__init__(message)
        self.cells = cells


@dataclass(frozen=True)
class PhysicalConstants:
    a: float = 1.0
    c: float = 1.0
    eps: float = 1.0

    def __post_init__(self):
        for name in ("a", "c", "eps"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")


@dataclass(frozen=True)
class OpacityModel:
    """Absorption law of one material.

    ``kind`` is ``"constant"`` (``sigma = kappa * rho``) or ``"powerlaw"``
    (``sigma = kappa * rho / T**3``).  ``kappa`` is a mass opacity in
    cm^2/g and ``rho`` a density in g/cm^3; for a plain 1/cm value keep
    ``rho = 1``.  ``sigma_s`` is an isotropic scattering coefficient.
    """

    kind: str = "constant"
    kappa: float = 0.0
    rho: float = 1.0
    sigma_s: float = 0.0
    floor: float = TEMPERATURE_FLOOR

    def __post_init__(self):
        if self.kind not in ("constant", "powerlaw"):
            raise ValueError(f"unknown opacity kind {self.kind!r}")
        if self.kappa < 0 or self.rho < 0 or self.sigma_s < 0:
            raise ValueError("opacity parameters must be non-negative")


def opacity_eval(model: OpacityModel, T) -> np.ndarray:
    """Absorption coefficient in 1/cm."""
    T = np.asarray(T, dtype=float)
    if not np.all(np.isfinite(T)):
        raise ValueError("non-finite temperature passed to opacity_eval")
    if model.kind == "constant":
        return np.full(T.shape, model.kappa * model.rho)
    return model.kappa * model.rho / np.maximum(T, model.floor) ** 3


def planck_energy(T, a: float, c: float):
    """Angle-integrated blackbody intensity ``a c T^4``."""
    return a * c * np.asarray(T, dtype=float) ** 4


def solve_temperature_update(c1, c4, r, tol: float = 1e-15, max_iter: int = 100) -> np.ndarray:
    """Positive root of ``c1 T + c4 T^4 = r``, elementwise.

    The left side is increasing and convex on ``T >= 0``, so Newton's
    method started above the root decreases monotonically onto it.  The
    start ``min(r/c1, (r/c4)^(1/4))`` is always an upper bound.  Iterates
    are kept non-increasing, so round-off at the root ends the loop.
    """
    c1, c4, r = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (c1, c4, r)))
    if np.any(c1 <= 0) or np.any(c4 < 0):
        raise ValueError("temperature update needs c1 > 0 and c4 >= 0")
    if np.any(r < 0):
        bad = np.argwhere(r < 0)
        raise NegativeEnergyError(
            f"negative available energy in {len(bad)} cell(s), min r = {r.min():.3e}", bad)
    with np.errstate(divide="ignore", over="ignore"):
        hi = np.where(c4 > 0, np.minimum(r / c1, (r / np.where(c4 > 0, c4, 1.0)) ** 0.25), r / c1)
    T = hi.copy()
    for _ in range(max_iter):
        f = c1 * T + c4 * T**4 - r
        step = f / (c1 + 4.0 * c4 * T**3)
        if np.all(np.abs(step) <= tol * T):
            break
        T_new = np.minimum(T - step, T)
        if np.any(T_new < 0):
            T_new = np.where(T_new < 0, 0.5 * T, T_new)
        if np.array_equal(T_new, T):
            break
        T = T_new
    return T
