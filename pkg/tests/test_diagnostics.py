import csv

import numpy as np
import pytest

from pnap.diagnostics import (
    DiagnosticLog,
    DiagnosticRecord,
    ap_error,
    discrete_energy,
    energy_balance,
    fick_residual,
    radiation_temperature,
)
from pnap.physics import PhysicalConstants


def test_ap_error_forms():
    T = np.array([1.0, 2.0])
    U = np.zeros((3, 2))
    U[0] = T**4
    assert ap_error(U, T, equilibrium_form=True) == 0.0
    assert ap_error(U, T) == pytest.approx(14.0**2)
    U[1] = 1.0
    assert ap_error(U, T, equilibrium_form=True) == pytest.approx(2.0)


def test_discrete_energy():
    c = PhysicalConstants(1.0, 2.0, 0.5)
    U = np.ones((2, 3))
    T = np.ones(3)
    lit = 3 * (0.25 / 4 * 2 + 0.25 * 2 * 0.1 / 5)
    assert discrete_energy(U, T, c, 0.1) == pytest.approx(lit)
    wtd = 3 * (0.25 / 4 * (0.5 + 1.5) + 0.25 * 2 * 0.1 / 10)
    assert discrete_energy(U, T, c, 0.1, weighted=True) == pytest.approx(wtd)


def test_radiation_temperature_clamps():
    c = PhysicalConstants(2.0, 8.0, 1.0)
    Trad, clamped = radiation_temperature(np.array([16.0, -1.0]), c)
    np.testing.assert_allclose(Trad, [1.0, 0.0])
    assert clamped
    assert not radiation_temperature(np.array([1.0]), c)[1]


def test_energy_balance():
    res = energy_balance([10.0, 9.0, 8.5], [1.0, 0.25], absorbed=[0.0, 0.25])
    np.testing.assert_allclose(res, 0.0)
    with pytest.raises(ValueError):
        energy_balance([1.0], [1.0])


def test_fick_residual_zero_for_fick_flux():
    n, L = 64, 2.0
    dx = L / n
    x = (np.arange(n) + 0.5) * dx
    T = 1 + 0.1 * np.sin(np.pi * x)
    phi = T**4
    grad = (np.roll(phi, -1) - np.roll(phi, 1)) / (2 * dx)
    c = PhysicalConstants(1.0, 1.0, 0.01)
    U = np.zeros((2, n))
    U[1] = -c.eps * grad / 30.0
    assert fick_residual(U, T, 10.0, dx, c) < 1e-14


def test_log_csv(tmp_path):
    log = DiagnosticLog()
    log.append(DiagnosticRecord(0.0, 0, 1.0, 2.0, 3.0, 0, 1, 0, 1))
    log.append(DiagnosticRecord(0.1, 1, 0.5, 1.0 / 3.0, 3.0, 0, 1, 0, 1, negative_I00=True))
    with pytest.raises(ValueError):
        log.append(DiagnosticRecord(0.05, 2, 0, 0, 0, 0, 0, 0, 0))
    path = tmp_path / "d.csv"
    log.write_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == DiagnosticLog.header
    assert float(rows[2][3]) == 1.0 / 3.0
    assert rows[2][-1] == "1"
    np.testing.assert_array_equal(log.column("step"), [0, 1])
    with pytest.raises(OSError):
        log.write_csv(tmp_path / "missing" / "d.csv")
