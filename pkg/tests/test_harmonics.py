import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pnap.harmonics import (
    build_operator,
    coupling_coefficients,
    degree_slice,
    evaluate_intensity,
    half_sphere_table,
    moment_count,
    moment_index,
    moment_lm,
    project_intensity,
)

import oracles


@pytest.mark.parametrize("M", range(1, 10))
def test_slab_operator_matches_quadrature(M):
    op = build_operator(M, "slab")
    np.testing.assert_allclose(op.full(0), oracles.flux_matrix_1d(M), atol=1e-12)


@pytest.mark.parametrize("M", range(1, 6))
def test_xz_operator_matches_quadrature(M):
    op = build_operator(M, "xz")
    Ax, Az = oracles.flux_matrices_2d(M)
    np.testing.assert_allclose(op.full(0), Ax, atol=1e-12)
    np.testing.assert_allclose(op.full(1), Az, atol=1e-12)


def test_slab_entries():
    op = build_operator(3, "slab")
    assert op.B_up[0, 1] == pytest.approx(1.0)
    assert op.B_up[1, 2] == pytest.approx(2 / 3)
    assert op.B_low[1, 0] == pytest.approx(1 / 3)
    assert op.B_low[3, 2] == pytest.approx(3 / 7)


@pytest.mark.parametrize("geometry,M", [("slab", 5), ("xz", 4)])
def test_split_by_degree(geometry, M):
    op = build_operator(M, geometry)
    deg = op.degree
    for axis in range(op.ndim):
        rows, cols = np.nonzero(op.low[axis])
        assert np.all(deg[rows] - deg[cols] == 1)
        rows, cols = np.nonzero(op.up[axis])
        assert np.all(deg[cols] - deg[rows] == 1)
        # degree M has no up coupling, degree 0 no low coupling
        assert not np.any(op.up[axis][deg == M])
        assert not np.any(op.low[axis][deg == 0])


def test_xz_operator_symmetric():
    op = build_operator(4, "xz")
    for axis in range(2):
        np.testing.assert_allclose(op.full(axis), op.full(axis).T, atol=1e-14)
        assert np.all(np.abs(np.linalg.eigvalsh(op.full(axis))) <= 1 + 1e-12)


def test_coupling_values():
    c = coupling_coefficients(0, 0)
    assert c.A == pytest.approx(1 / math.sqrt(3))
    assert c.B == 0.0
    assert coupling_coefficients(2, 3) == (0.0,) * 6


@given(st.integers(1, 8), st.data())
def test_index_roundtrip(M, data):
    l = data.draw(st.integers(0, M))
    m = data.draw(st.integers(-l, l))
    k = moment_index(l, m, M, "xz")
    assert moment_lm(k, M, "xz") == (l, m)
    assert 0 <= k < moment_count(M, "xz")
    assert degree_slice(l, "xz").start <= k < degree_slice(l, "xz").stop


def test_index_errors():
    with pytest.raises(IndexError):
        moment_index(4, 0, 3, "xz")
    with pytest.raises(IndexError):
        moment_index(1, 1, 3, "slab")
    with pytest.raises(ValueError):
        moment_count(3, "xyz")


def test_isotropic_projection():
    U = project_intensity(lambda om: np.ones(om.shape[:-1]), 3, "xz", 16)
    assert U[0] == pytest.approx(4 * math.pi)
    np.testing.assert_allclose(U[1:], 0.0, atol=1e-12)
    U = project_intensity(lambda mu: np.full_like(mu, 0.5), 4, "slab", 8)
    np.testing.assert_allclose(U, [1, 0, 0, 0, 0], atol=1e-14)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=9, max_size=9))
def test_expand_then_project(coeffs):
    coeffs = np.array(coeffs)
    U = project_intensity(lambda om: evaluate_intensity(coeffs, om, "xz"), 2, "xz", 12)
    np.testing.assert_allclose(U, coeffs, atol=1e-12)


@pytest.mark.parametrize("normal", ["+x", "-x", "+z", "-z"])
def test_half_tables_partition(normal):
    # outgoing plus incoming halves of an isotropic field recover it
    M = 3
    table = half_sphere_table(normal, M, "xz")
    opp = half_sphere_table(("-" if normal[0] == "+" else "+") + normal[1], M, "xz")
    iso = np.zeros((M + 1) ** 2)
    iso[0] = 4 * math.pi
    total = table.overlap @ iso + opp.overlap @ iso
    np.testing.assert_allclose(total, iso, atol=1e-12)
    # ghost of an isotropic interior with matching inflow is the same field
    np.testing.assert_allclose(table.ghost(iso, 1.0), iso, atol=1e-12)


def test_slab_ghost_vacuum_and_inflow():
    t = half_sphere_table("-x", 4, "slab")
    iso = np.array([2.0, 0, 0, 0, 0])
    np.testing.assert_allclose(t.ghost(iso, 1.0), iso, atol=1e-13)
    g = t.ghost(np.zeros(5), 1.0)
    # half-range isotropic inflow into +x: zeroth moment 1, first moment 1/2
    assert g[0] == pytest.approx(1.0)
    assert g[1] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        half_sphere_table("+z", 3, "slab")
