"""Snapshot output: CSV tables and legacy ASCII VTK structured points."""

from __future__ import annotations

import csv
import math
import os

import numpy as np

from .diagnostics import radiation_temperature
from .discretization import Mesh
from .harmonics import moment_lm
from .physics import PhysicalConstants

FORMATS = ("csv", "vtk")


def _r(v: float) -> str:
    v = float(v)
    return repr(v) if math.isfinite(v) else str(v)


def moment_names(count: int, geometry: str) -> list[str]:
    if geometry == "slab":
        return [f"I_{l}" for l in range(count)]
    M = math.isqrt(count) - 1
    return [f"I_{l}_{m}" for l, m in (moment_lm(k, M, geometry) for k in range(count))]


def snapshot_columns(mesh: Mesh, moments: np.ndarray, T: np.ndarray, constants: PhysicalConstants,
                     geometry: str, all_moments: bool = False):
    """Header and column arrays of a snapshot table, one row per cell in row-major order."""
    Trad, _ = radiation_temperature(moments[0], constants)
    coords = [g.ravel() for g in mesh.grid()]
    header = ["x", "z"][: mesh.dim] + ["I00", "T", "Trad"]
    cols = coords + [moments[0].ravel(), T.ravel(), Trad.ravel()]
    if all_moments:
        names = moment_names(moments.shape[0], geometry)
        header += names[1:]
        cols += [moments[k].ravel() for k in range(1, moments.shape[0])]
    return header, cols


def write_csv(path, mesh: Mesh, moments, T, constants: PhysicalConstants, geometry: str,
              all_moments: bool = False) -> None:
    header, cols = snapshot_columns(mesh, np.asarray(moments), np.asarray(T), constants, geometry, all_moments)
    try:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in zip(*cols):
                w.writerow([_r(v) for v in row])
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) for v in r] for r in body]) if body else np.zeros((0, len(header)))
    return {name: data[:, k] for k, name in enumerate(header)}


def write_vtk(path, mesh: Mesh, moments, T, constants: PhysicalConstants, title: str = "pn snapshot") -> None:
    """Legacy ASCII VTK, STRUCTURED_POINTS with cell-centred point data."""
    moments, T = np.asarray(moments), np.asarray(T)
    Trad, _ = radiation_temperature(moments[0], constants)
    nx = mesh.shape[0]
    nz = mesh.shape[1] if mesh.dim == 2 else 1
    dx = mesh.spacing[0]
    dz = mesh.spacing[1] if mesh.dim == 2 else 1.0
    ox = mesh.lower[0] + 0.5 * dx
    oz = mesh.lower[1] + 0.5 * dz if mesh.dim == 2 else 0.0
    lines = [
        "# vtk DataFile Version 3.0",
        title.replace("\n", " ")[:255],
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {nx} {nz} 1",
        f"ORIGIN {_r(ox)} {_r(oz)} 0.0",
        f"SPACING {_r(dx)} {_r(dz)} 1.0",
        f"POINT_DATA {nx * nz}",
    ]
    for name, arr in (("I00", moments[0]), ("T", T), ("Trad", Trad)):
        lines.append(f"SCALARS {name} double 1")
        lines.append("LOOKUP_TABLE default")
        lines.extend(_r(v) for v in np.asarray(arr).ravel(order="F"))
    try:
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write snapshot {path}: {exc}") from exc


def read_vtk(path) -> dict:
    """Minimal reader for files written by :func:`write_vtk`."""
    with open(path) as fh:
        tokens = fh.read().splitlines()
    out: dict = {}
    i = 0
    while i < len(tokens):
        line = tokens[i].strip()
        if line.startswith("DIMENSIONS"):
            out["dimensions"] = tuple(int(v) for v in line.split()[1:])
        elif line.startswith("SCALARS"):
            name = line.split()[1]
            n = out["dimensions"][0] * out["dimensions"][1]
            out[name] = np.array([float(v) for v in tokens[i + 2:i + 2 + n]])
            i += 1 + n
        i += 1
    return out


def snapshot_path(outdir, name: str, time: float, fmt: str) -> str:
    return os.path.join(outdir, f"{name}_t{time:.6e}.{fmt}")


def write_snapshot(outdir, name: str, time: float, fmt: str, mesh: Mesh, moments, T,
                   constants: PhysicalConstants, geometry: str) -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown output format {fmt!r}")
    path = snapshot_path(outdir, name, time, fmt)
    if fmt == "csv":
        write_csv(path, mesh, moments, T, constants, geometry, all_moments=True)
    else:
        write_vtk(path, mesh, moments, T, constants, f"{name} t={time!r}")
    return path
