"""Reference computations kept independent of the package internals.

Nothing here imports ``pnap``: the flux matrices come from brute-force
angular quadrature with harmonics built from associated Legendre
functions, the quartic root from bisection, and the limit scheme from an
explicit loop over cells.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.special import lpmv


def _real_ylm(l: int, m: int, theta, phi):
    """Orthonormal real harmonic, Condon-Shortley phase included in lpmv."""
    am = abs(m)
    norm = math.sqrt((2 * l + 1) / (4 * math.pi) * math.factorial(l - am) / math.factorial(l + am))
    p = lpmv(am, l, np.cos(theta))
    if m == 0:
        return norm * p
    base = math.sqrt(2.0) * norm * (-1) ** am * p
    return base * (np.cos(am * phi) if m > 0 else np.sin(am * phi))


def _sphere_grid(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    nphi = 2 * n + 2
    phi = (np.arange(nphi) + 0.25) * 2 * np.pi / nphi
    TH, PH = np.meshgrid(np.arccos(x), phi, indexing="ij")
    W = np.outer(w, np.full(nphi, 2 * np.pi / nphi))
    return TH.ravel(), PH.ravel(), W.ravel()


def flux_matrices_2d(M: int, n: int | None = None):
    """``A_w[k, j] = int Y_k Omega_w Y_j dOmega`` for ``w = x, z`` by quadrature."""
    n = n or (M + 4)
    th, ph, w = _sphere_grid(n)
    basis = []
    for l in range(M + 1):
        for m in range(-l, l + 1):
            basis.append(_real_ylm(l, m, th, ph))
    Y = np.array(basis)
    ox = np.sin(th) * np.cos(ph)
    oz = np.cos(th)
    return (Y * w * ox) @ Y.T, (Y * w * oz) @ Y.T


def flux_matrix_1d(M: int, n: int | None = None):
    """Slab matrix for ``I_l = int P_l I dmu`` and ``I = sum (2l+1)/2 I_l P_l``."""
    n = n or (M + 4)
    mu, w = np.polynomial.legendre.leggauss(n)
    P = np.array([lpmv(0, l, mu) for l in range(M + 1)])
    scale = (2 * np.arange(M + 1) + 1) / 2
    return (P * w * mu) @ P.T * scale[None, :]


def quartic_root_bisect(c1: float, c4: float, r: float, iters: int = 200) -> float:
    """Root of ``c1 T + c4 T^4 = r`` on ``[0, r/c1]`` by bisection."""
    lo, hi = 0.0, r / c1
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if c1 * mid + c4 * mid**4 > r:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def sign_changes(c1: float, c4: float, r: float) -> int:
    """Descartes count of positive roots of ``c4 T^4 + c1 T - r``."""
    coeffs = [c for c in (c4, 0.0, 0.0, c1, -r) if c != 0]
    return sum(1 for a, b in zip(coeffs, coeffs[1:]) if a * b < 0)


def five_point_step(T, dt, dx, sigma, Cv, a=1.0, c=1.0):
    """One periodic step of the wide-stencil limit scheme, cell by cell.

    ``C_v T^{n+1} + a (T^{n+1})^4 = C_v T^n + a (T^n)^4 + dt (ac/3) L(T^4)``
    with the five-point operator ``L``; the quartic is solved by bisection.
    """
    n = len(T)
    phi = T**4
    out = np.empty(n)
    for i in range(n):
        ip2, ip1, im1, im2 = (i + 2) % n, (i + 1) % n, (i - 1) % n, (i - 2) % n
        flux = ((phi[ip2] - phi[i]) / (2 * dx * sigma[ip1]) - (phi[i] - phi[im2]) / (2 * dx * sigma[im1])) / (2 * dx)
        r = Cv * T[i] + a * T[i] ** 4 + dt * a * c / 3 * flux
        out[i] = quartic_root_bisect(Cv, a, r)
    return out


def ars_tableaus():
    """The ARS(2,2,2) and ARS(4,4,3) pairs written out by hand."""
    g = 1 - 1 / math.sqrt(2)
    d = 1 - 1 / (2 * g)
    ars222 = dict(
        A_exp=[[0, 0, 0], [g, 0, 0], [d, 1 - d, 0]],
        A_imp=[[0, 0, 0], [0, g, 0], [0, 1 - g, g]],
    )
    ars443 = dict(
        A_exp=[[0, 0, 0, 0, 0], [1 / 2, 0, 0, 0, 0], [11 / 18, 1 / 18, 0, 0, 0],
               [5 / 6, -5 / 6, 1 / 2, 0, 0], [1 / 4, 7 / 4, 3 / 4, -7 / 4, 0]],
        A_imp=[[0, 0, 0, 0, 0], [0, 1 / 2, 0, 0, 0], [0, 1 / 6, 1 / 2, 0, 0],
               [0, -1 / 2, 1 / 2, 1 / 2, 0], [0, 3 / 2, -3 / 2, 1 / 2, 1 / 2]],
    )
    return {"ars222": ars222, "ars443": ars443}
