import json
import math
from importlib import resources

import jsonschema
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spectriples.eigen import eigensolve, exact_basis
from spectriples.invariants import (
    IdentityReport,
    check_normalization,
    decay_diagnostic,
    gradient_identity,
    polarization_identity,
    qform,
    qform_J,
    run_suite,
    square_relation_identity,
    suite_json,
)
from spectriples.lattice import TorusSpec, torus_triple
from spectriples.mesh import build_torus_mesh
from spectriples.triple import fourier_coeffs, triple_tensor


@pytest.fixture(scope="module")
def square_mesh(square):
    return eigensolve(build_torus_mesh(square, 48), 20)


@pytest.fixture(scope="module")
def circle_mesh(circle):
    return eigensolve(build_torus_mesh(circle, 256), 9)


def test_report_pass_semantics():
    assert IdentityReport("x", 1e-9, 1e-9).passed
    assert not IdentityReport("x", 2e-9, 1e-9).passed
    assert IdentityReport("x", 0.0, 0.0).to_dict()["pass"] is True


def test_normalization(circle, square_mesh):
    r = check_normalization(torus_triple(circle, 9))
    assert r.residual == 0 and r.passed
    assert check_normalization(triple_tensor(square_mesh)).residual < 1e-8


def test_normalization_detects_corruption(circle):
    t = torus_triple(circle, 9)
    vals = t.values.copy()
    pos = next(n for n, (i, j, k) in enumerate(t.index.tolist()) if (i, j, k) == (0, 4, 4))
    vals[pos] = 0.9
    r = check_normalization(t.with_values(t.index, vals))
    assert not r.passed and r.worst == (0, 4, 4)


def test_gradient_exact(circle, rectangle):
    for spec in (circle, rectangle):
        b = exact_basis(spec, 15)
        r = gradient_identity(b, triple_tensor(b))
        assert r.residual < 1e-12
        assert r.details["skipped"] > 0


def test_gradient_mesh(circle_mesh, square_mesh):
    assert gradient_identity(circle_mesh, triple_tensor(circle_mesh)).residual < 1e-3
    assert gradient_identity(square_mesh, triple_tensor(square_mesh)).passed


def test_gradient_skips_resonant_triples(circle):
    # (1, 2, 0): lambda_1 + lambda_2 - lambda_0 != 0 ; (0, k, k) is resonant and skipped
    b = exact_basis(circle, 5)
    r = gradient_identity(b, triple_tensor(b))
    assert r.details["skipped"] >= 5


def test_polarization(circle, square_mesh):
    b = exact_basis(circle, 5)
    assert polarization_identity(b, triple_tensor(b)).residual < 1e-12
    r = polarization_identity(square_mesh, triple_tensor(square_mesh))
    assert r.residual < 1e-8 and r.details["limit"] == 12


def test_decay(circle, pair_4d, square_mesh):
    assert decay_diagnostic(torus_triple(circle, 30)).residual == 0
    for spec in pair_4d:
        assert decay_diagnostic(torus_triple(spec, 120)).residual == 0
    assert decay_diagnostic(triple_tensor(square_mesh)).residual < 1e-6


def test_qform_examples(circle, square_mesh):
    b = exact_basis(circle, 9)
    t = triple_tensor(b)
    const = np.eye(9)[0] * 3.0
    f = np.random.default_rng(1).standard_normal(9)
    assert np.abs(qform(const, f, None, t)).max() < 1e-12
    c = fourier_coeffs({(1,): 0.5, (-1,): 0.5}, b)
    # int |d cos|^2 = 4 pi^2 / 2, and Q_0 pairs it with e^0 = 1/sqrt(vol)
    assert qform(c, c, 0, t) == pytest.approx(4 * math.pi**2 / 2 / math.sqrt(t.vol), rel=1e-8)
    tm = triple_tensor(square_mesh)
    g = np.random.default_rng(2).standard_normal(20)
    lhs = qform(g, g, 0, tm) * math.sqrt(tm.vol)
    assert lhs == pytest.approx(np.sum(g**2 * square_mesh.eigenvalues), rel=1e-10)


def test_qform_matches_gradient_quadrature(square_mesh):
    tm = triple_tensor(square_mesh)
    rng = np.random.default_rng(3)
    f = np.r_[rng.standard_normal(5), np.zeros(15)]
    g = np.r_[rng.standard_normal(5), np.zeros(15)]
    mesh = square_mesh.mesh
    fv, gv = square_mesh.values @ f, square_mesh.values @ g
    gam = mesh.gradient_product(fv, gv)
    ref = square_mesh.values.T @ (square_mesh.mass * gam)
    np.testing.assert_allclose(qform(f, g, None, tm), ref, atol=1e-9)


@given(st.integers(0, 2**31 - 1))
def test_qform_J_identities(seed):
    t = torus_triple(TorusSpec.from_basis([[1.0, 0.2], [0.0, 1.3]]), 15)
    rng = np.random.default_rng(seed)
    f, g = rng.standard_normal((2, 15))
    np.testing.assert_allclose(qform_J(f, g, None, t, J=lambda x: x**2), qform(f, g, None, t), atol=1e-8)
    c = 2.5
    np.testing.assert_allclose(qform_J(f, g, None, t, J=lambda x: c + 0 * x), c / 2 * t.contract(f, g), atol=1e-12)


def test_signed_root(circle, square):
    t = torus_triple(circle, 15)
    eye = np.eye(15)
    for i in range(15):
        for j in range(15):
            assert np.all(qform_J(eye[i], eye[j], None, t, signed=True) == 0)
    # the nonnegative root does not vanish: (m=-1)(m=+1) -> 0 has J-sum 4 pi
    assert qform_J(eye[1], eye[2], 0, t) != 0
    with pytest.raises(ValueError):
        qform_J(eye[0][:5], eye[0][:5], 0, torus_triple(square, 5), signed=True)


@pytest.mark.parametrize("kind", ["exact", "mesh"])
def test_suite_on_both_backends(kind, square, square_mesh):
    b = exact_basis(square, 20) if kind == "exact" else square_mesh
    reports = run_suite(b)
    assert all(r.passed for r in reports), [r.to_dict() for r in reports if not r.passed]
    names = {r.identity for r in reports}
    assert {"normalization", "gradient", "polarization", "decay", "product", "power", "idempotent"} <= names


def test_conjugate_basis_consistency(skewed, circle):
    for basis in (eigensolve(build_torus_mesh(skewed, 24), 15), exact_basis(circle, 15)):
        a = run_suite(basis)
        b = run_suite(basis.conjugate())
        for x, y in zip(a, b):
            assert x.identity == y.identity and x.passed == y.passed
            assert abs(x.residual - y.residual) <= 1e-12 + 1e-6 * max(x.residual, y.residual)


def test_suite_json_schema(circle):
    schema = json.loads(resources.files("spectriples.schemas").joinpath("verify.schema.json").read_text())
    data = json.loads(suite_json(run_suite(exact_basis(circle, 9))))
    jsonschema.validate(data, schema)


def test_square_relation_supplied_pair(circle):
    # f = sin(2 pi x) / (2 pi) has |f'|^2 = cos^2(2 pi x), so g = cos(2 pi x)
    b = exact_basis(circle, 9)
    t = triple_tensor(b)
    f = fourier_coeffs({(1,): -0.5j / (2 * math.pi), (-1,): 0.5j / (2 * math.pi)}, b)
    g = fourier_coeffs({(1,): 0.5, (-1,): 0.5}, b)
    assert square_relation_identity(f, g, t).passed
    assert not square_relation_identity(f, 1.1 * g, t).passed
