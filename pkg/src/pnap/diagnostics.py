"""Scalar diagnostics: AP error, discrete energy, radiation temperature, energy balance."""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .physics import PhysicalConstants


def ap_error(moments: np.ndarray, T: np.ndarray, equilibrium_form: bool = False,
             a: float = 1.0, c: float = 1.0) -> float:
    """Distance from local equilibrium of a 1D moment state.

    Default: ``sum_i (I_0 - T)^2 + sum_{l>=1} I_l^2``.  With
    ``equilibrium_form`` the zeroth moment is compared with ``a c T^4``.
    """
    moments = np.asarray(moments, dtype=float)
    T = np.asarray(T, dtype=float)
    ref = a * c * T**4 if equilibrium_form else T
    return float(np.sum((moments[0] - ref) ** 2) + np.sum(moments[1:] ** 2))


def discrete_energy(moments: np.ndarray, T: np.ndarray, constants: PhysicalConstants,
                    heat_capacity: float, weighted: bool = False) -> float:
    """Energy functional ``sum_i eps^2/(2c) |I_i|^2 + eps^2 a c C_v T_i^5 / 5``.

    ``weighted`` uses the angular L2 norm of the slab intensity,
    ``sum_l (2l+1)/2 I_l^2``, with the matching ``T^5/10`` material term.
    """
    eps2, a, c = constants.eps**2, constants.a, constants.c
    U = np.asarray(moments, dtype=float)
    T = np.asarray(T, dtype=float)
    if weighted:
        w = (2.0 * np.arange(U.shape[0]) + 1.0) / 2.0
        rad = np.tensordot(w, U**2, axes=(0, 0))
        mat = eps2 * a * c * heat_capacity * T**5 / 10.0
    else:
        rad = np.sum(U**2, axis=0)
        mat = eps2 * a * c * heat_capacity * T**5 / 5.0
    return float(np.sum(eps2 / (2.0 * c) * rad + mat))


def radiation_temperature(I00, constants: PhysicalConstants):
    """``(I00 / (a c))^(1/4)``; returns ``(T_rad, clamped)`` where negative inputs are clamped to 0."""
    I00 = np.asarray(I00, dtype=float)
    negative = I00 < 0
    Trad = (np.maximum(I00, 0.0) / (constants.a * constants.c)) ** 0.25
    return Trad, bool(np.any(negative))


def energy_balance(energies, leakage, absorbed=None, injected=None) -> np.ndarray:
    """Per-step residual ``dE - (injected - absorbed - leakage)``.

    ``energies`` has one more entry than the per-step logs.
    """
    E = np.asarray(energies, dtype=float)
    leak = np.asarray(leakage, dtype=float)
    n = len(leak)
    if len(E) != n + 1:
        raise ValueError("energy history must have one entry more than the step logs")
    absd = np.zeros(n) if absorbed is None else np.asarray(absorbed, dtype=float)
    inj = np.zeros(n) if injected is None else np.asarray(injected, dtype=float)
    return np.diff(E) - (inj - absd - leak)


def fick_residual(moments: np.ndarray, T: np.ndarray, sigma, dx: float, constants: PhysicalConstants) -> float:
    """Relative mismatch between the slab flux and ``-(ac / 3 sigma) d(T^4)/dx``.

    The flux of the kinetic scale is ``I_1 / eps``; derivatives are
    periodic central differences.
    """
    eps, a, c = constants.eps, constants.a, constants.c
    flux = np.asarray(moments)[1] / eps
    phi = np.asarray(T, dtype=float) ** 4
    grad = (np.roll(phi, -1) - np.roll(phi, 1)) / (2.0 * dx)
    fick = -a * c / (3.0 * np.asarray(sigma)) * grad
    scale = np.max(np.abs(fick))
    return float(np.max(np.abs(flux - fick)) / scale) if scale > 0 else 0.0


@dataclass
class DiagnosticRecord:
    time: float
    step: int
    ap_error: float
    energy_functional: float
    total_energy: float
    I00_min: float
    I00_max: float
    T_min: float
    T_max: float
    sweeps: int = 1
    leakage: float = 0.0
    absorbed: float = 0.0
    injected: float = 0.0
    negative_I00: bool = False


class DiagnosticLog:
    """Append-only diagnostics written as CSV with one row per step."""

    header = [f.name for f in fields(DiagnosticRecord)]

    def __init__(self):
        self.records: list[DiagnosticRecord] = []

    def append(self, record: DiagnosticRecord) -> None:
        if self.records and record.time < self.records[-1].time:
            raise ValueError("diagnostic records must be appended in time order")
        self.records.append(record)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records])

    def write_csv(self, path) -> None:
        try:
            with open(path, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(self.header)
                for r in self.records:
                    w.writerow([_fmt(v) for v in asdict(r).values()])
        except OSError as exc:
            raise OSError(f"cannot write diagnostics to {path}: {exc}") from exc


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else str(v)
    return str(v)
