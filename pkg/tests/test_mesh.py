import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import circle_fd_eigenvalues
from spectriples.errors import InvalidSpecError, UnsupportedDimensionError
from spectriples.lattice import TorusSpec, weight_table
from spectriples.mesh import build_torus_mesh, stencil


def test_total_mass(rectangle):
    mesh = build_torus_mesh(rectangle, 32)
    assert mesh.mass.sum() == pytest.approx(2.0)
    assert mesh.vertex_count == 32 * 32


def test_lowest_rectangle_eigenvalue_near_continuum(rectangle):
    mesh = build_torus_mesh(rectangle, 32)
    lam = np.sort(np.linalg.eigvalsh(mesh.stiffness.toarray()))
    exact = weight_table(rectangle, 2).eigenvalues[1]
    assert exact == pytest.approx(math.pi**2)
    assert abs(lam[1] - exact) / exact < 0.02


def test_circle_matches_closed_form(circle):
    mesh = build_torus_mesh(circle, 40)
    lam = np.sort(np.linalg.eigvalsh(mesh.stiffness.toarray()))
    np.testing.assert_allclose(lam[:15], circle_fd_eigenvalues(1.0, 40, 15), atol=1e-9)


@pytest.mark.parametrize("spec_name", ["square", "skewed", "rectangle"])
def test_stiffness_structure(spec_name, request):
    spec = request.getfixturevalue(spec_name)
    s = build_torus_mesh(spec, 16).stiffness
    assert abs(s - s.T).max() < 1e-12
    assert np.abs(np.asarray(s.sum(axis=1))).max() < 1e-9
    assert np.linalg.eigvalsh(s.toarray()).min() > -1e-9


def test_skewed_stencil_has_diagonals(skewed, square):
    assert len(stencil(skewed, 16)) == 8
    assert len(stencil(square, 16)) == 4


def test_constant_in_kernel(skewed):
    mesh = build_torus_mesh(skewed, 12)
    assert np.abs(mesh.apply(np.ones(mesh.vertex_count))).max() < 1e-9


@given(st.integers(0, 2**31 - 1))
def test_product_rule(seed):
    # L(uv) = u Lv + v Lu - 2 du.dv holds exactly for the edge-sum gradient
    spec = TorusSpec.from_basis(np.array([[1.0, 0.4], [0.1, 0.9]]))
    mesh = build_torus_mesh(spec, 10)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, mesh.vertex_count))
    lhs = mesh.apply(u * v)
    rhs = u * mesh.apply(v) + v * mesh.apply(u) - 2 * mesh.gradient_product(u, v)
    assert np.abs(lhs - rhs).max() < 1e-9 * np.abs(lhs).max()


def test_stiffness_matches_apply(skewed):
    mesh = build_torus_mesh(skewed, 10)
    u = np.random.default_rng(0).standard_normal(mesh.vertex_count)
    np.testing.assert_allclose(mesh.stiffness @ u, mesh.apply(u), atol=1e-10)


def test_gradient_of_plane_wave(circle):
    # on the circle the edge gradient of exp(2 pi i x) has |d|^2 = 4 R^2 sin^2(pi/R) / 2 per side
    r = 32
    mesh = build_torus_mesh(circle, r)
    x = mesh.points[:, 0]
    e = np.exp(2j * np.pi * x)
    g = mesh.gradient_product(e, e.conj())
    assert np.allclose(g, 4 * r**2 * np.sin(np.pi / r) ** 2)


def test_vertex_order_row_major(square):
    mesh = build_torus_mesh(square, 8)
    assert mesh.points[1].tolist() == [0.0, 1 / 8]
    assert mesh.points[8].tolist() == [1 / 8, 0.0]


def test_errors(circle):
    three = TorusSpec.from_basis(np.eye(3))
    with pytest.raises(UnsupportedDimensionError):
        build_torus_mesh(three, 8)
    with pytest.raises(InvalidSpecError):
        build_torus_mesh(circle, 4)
