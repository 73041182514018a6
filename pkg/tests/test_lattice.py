import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import FOUR_PI_SQ, brute_force_weights, character_quadrature
from spectriples.errors import InvalidSpecError, UnsupportedDimensionError
from spectriples.lattice import (
    TorusSpec,
    enumerate_weights,
    isospectral_prefix,
    lattice_congruent,
    lll_reduce,
    load_spec,
    rotation,
    save_spec,
    shell_counts,
    spec_from_dict,
    torus_triple,
    weight_table,
)

bases_2d = st.lists(st.floats(-1.5, 1.5), min_size=4, max_size=4).map(
    lambda v: np.array([[1.0 + abs(v[0]), v[1]], [v[2], 1.0 + abs(v[3])]])
).filter(lambda a: abs(np.linalg.det(a)) > 0.2)


# -- specs ---------------------------------------------------------------------


def test_spec_exact_and_inexact():
    exact = spec_from_dict({"gram": [["1/2", 0], [0, 2]]})
    assert exact.is_exact
    assert exact.exact_gram[0][0] == Fraction(1, 2)
    assert math.isclose(exact.volume, 1.0)
    inexact = spec_from_dict({"basis": [[1.0, 0.5], [0, 1]]})
    assert not inexact.is_exact


def test_gram_input_factors_to_same_geometry():
    a = np.array([[1.0, 0.3], [0.2, 1.4]])
    from_basis = TorusSpec.from_basis(a)
    from_gram = TorusSpec.from_gram(a.T @ a)
    np.testing.assert_allclose(from_gram.gram, from_basis.gram, atol=1e-14)
    assert math.isclose(from_gram.volume, from_basis.volume, rel_tol=1e-12)


@pytest.mark.parametrize(
    "data",
    [
        {"basis": [[1, 0], [2, 0]]},
        {"basis": [[1, 0], [0, 1]], "gram": [[1, 0], [0, 1]]},
        {},
        {"basis": [[1, 0]]},
        {"gram": [[1, 2], [2, 1]]},
        {"gram": [[1, 1], [0, 1]]},
        {"basis": [["x"]]},
        {"basis": [[True]]},
        [1, 2],
    ],
)
def test_malformed_specs(data):
    with pytest.raises(InvalidSpecError):
        spec_from_dict(data)


def test_degenerate_basis_threshold():
    with pytest.raises(InvalidSpecError):
        TorusSpec.from_basis(np.array([[1.0, 1.0], [1.0, 1.0 + 1e-13]]))


def test_spec_roundtrip(tmp_path):
    spec = spec_from_dict({"gram": [["3/2", "1/4"], ["1/4", 1]]})
    save_spec(spec, tmp_path / "s.json")
    back = load_spec(tmp_path / "s.json")
    assert back.exact_gram == spec.exact_gram


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(InvalidSpecError):
        load_spec(p)


# -- enumeration -----------------------------------------------------------------


def test_circle_weights(circle):
    ws = enumerate_weights(circle, 5)
    assert [w.coords for w in ws] == [(0,), (-1,), (1,), (-2,), (2,)]
    np.testing.assert_allclose([w.eigenvalue for w in ws], FOUR_PI_SQ * np.array([0, 1, 1, 4, 4]))
    assert ws[-1].eigenvalue == pytest.approx(16 * math.pi**2)


def test_square_weights(square):
    ws = enumerate_weights(square, 5)
    assert [w.coords for w in ws] == [(0, 0), (-1, 0), (0, -1), (0, 1), (1, 0)]
    assert all(w.eigenvalue == pytest.approx(FOUR_PI_SQ) for w in ws[1:])


def test_rectangle_against_brute_force(rectangle):
    oracle = brute_force_weights([[1, 0], [0, 2]], 10)
    table = weight_table(rectangle, 40)
    assert [tuple(c) for c in table.coords.tolist()] == [m for _, m in oracle[:40]]
    assert table.coords[:4].tolist() == [[0, 0], [0, -1], [0, 1], [-1, 0]]
    np.testing.assert_allclose(table.eigenvalues[:4], math.pi**2 * np.array([0, 1, 1, 4]))


@given(bases_2d)
def test_enumeration_matches_brute_force(a):
    spec = TorusSpec.from_basis(a)
    table = weight_table(spec, 30)
    # the box must contain the whole ellipsoid of the largest reported norm
    radius = int(np.ceil(np.sqrt(table.norm_sq[-1] * np.diag(spec.gram).max()))) + 1
    oracle = brute_force_weights(a, radius)
    # norms agree exactly in order; coordinates agree up to float ties
    np.testing.assert_allclose(table.norm_sq, [n for n, _ in oracle[:30]], rtol=1e-8, atol=1e-12)


@given(bases_2d, st.integers(5, 30), st.integers(1, 20))
def test_enumeration_prefix_stable(a, n, extra):
    spec = TorusSpec.from_basis(a)
    short = weight_table(spec, n).coords
    longer = weight_table(spec, n + extra).coords
    np.testing.assert_array_equal(longer[:n], short)


def test_count_must_be_positive(circle):
    with pytest.raises(ValueError):
        weight_table(circle, 0)


# -- delta tensor --------------------------------------------------------------


def test_circle_delta_entries(circle):
    t = torus_triple(circle, 5)
    assert t[1, 2, 0] == 1
    assert t[1, 1, 3] == 1
    assert t[1, 1, 4] == 0
    assert t.vol == 1.0
    np.testing.assert_allclose(t.eigenvalues, FOUR_PI_SQ * np.array([0, 1, 1, 4, 4]))


@given(bases_2d, st.integers(2, 25))
def test_delta_rule(a, n):
    spec = TorusSpec.from_basis(a)
    t = torus_triple(spec, n)
    coords = weight_table(spec, n).coords
    expect = {
        (i, j, k)
        for i in range(n)
        for j in range(i, n)
        for k in range(n)
        if np.array_equal(coords[i] + coords[j], coords[k])
    }
    assert {tuple(x) for x in t.index.tolist()} == expect
    assert np.all(t.values == 1 / math.sqrt(spec.volume))


def test_rectangle_tensor_matches_quadrature(rectangle):
    n = 20
    t = torus_triple(rectangle, n)
    coords = weight_table(rectangle, n).coords
    quad = character_quadrature([[1, 0], [0, 2]], coords, 64)
    assert np.abs(t.dense() - quad).max() < 1e-10


@given(bases_2d, st.floats(0, 2 * math.pi))
def test_rotation_invariance(a, theta):
    spec = TorusSpec.from_basis(a)
    rot = TorusSpec.from_basis(rotation(theta) @ a)
    ta, tb = weight_table(spec, 25), weight_table(rot, 25)
    np.testing.assert_allclose(ta.eigenvalues, tb.eigenvalues, rtol=1e-9, atol=1e-9)
    # coordinates are intrinsic, so the delta pattern is identical index for index
    assert isospectral_prefix(spec, rot, 25).equal


# -- spectra and shells --------------------------------------------------------


def test_isospectral_prefix_examples(square, rotated_square, rectangle):
    assert isospectral_prefix(square, rotated_square, 50) == (True, None)
    assert isospectral_prefix(square, rectangle, 10) == (False, 1)
    with pytest.raises(ValueError):
        isospectral_prefix(square, rectangle, 10, rtol=0.1)


def test_shell_counts_square(square):
    counts = shell_counts(square, 5)
    assert counts == {0: 1, 1: 4, 2: 4, 4: 4, 5: 8}


def test_4d_pair_isospectral_prefix(pair_4d):
    a, b = pair_4d
    assert isospectral_prefix(a, b, 200).equal


def test_shell_counts_match_oracle(pair_4d):
    from oracles import theta_counts

    a, _ = pair_4d
    assert {int(k): v for k, v in shell_counts(a, 60).items()} == theta_counts(a.dual_gram_exact, 60)


# -- congruence ----------------------------------------------------------------


def test_lll_reduces_and_is_unimodular():
    gram = [[Fraction(x) for x in row] for row in [[10, 7, 3], [7, 6, 2], [3, 2, 5]]]
    u = lll_reduce(gram)
    assert round(abs(np.linalg.det(u))) == 1
    red = u.T.astype(object) @ np.array(gram, dtype=object) @ u.astype(object)
    assert max(red[i][i] for i in range(3)) <= max(gram[i][i] for i in range(3))


def test_rotated_square_congruent(square, rotated_square):
    found = lattice_congruent(square, rotated_square)
    assert found is not None
    np.testing.assert_allclose(found.matrix.T @ found.matrix, np.eye(2), atol=1e-9)
    assert abs(abs(found.det) - 1) < 1e-9
    # the map carries weight lattice A into weight lattice B
    w_a = square.embedding @ np.eye(2)
    m_b = np.linalg.solve(rotated_square.embedding, found.matrix @ w_a)
    np.testing.assert_allclose(m_b, np.rint(m_b), atol=1e-9)


def test_not_congruent_when_spectra_differ(square, rectangle):
    assert lattice_congruent(square, rectangle) is None


@given(
    st.lists(st.integers(-2, 2), min_size=1, max_size=3),
    st.floats(0, 2 * math.pi),
    bases_2d,
)
def test_congruent_under_basis_change(shears, theta, a):
    u = np.eye(2, dtype=np.int64)
    for s in shears:
        u = u @ np.array([[1, s], [0, 1]]) @ np.array([[0, 1], [1, 0]])
    spec = TorusSpec.from_basis(a)
    other = TorusSpec.from_basis(rotation(theta) @ a @ u)
    found = lattice_congruent(spec, other)
    assert found is not None
    assert abs(abs(found.det) - 1) < 1e-9
    assert round(abs(np.linalg.det(found.coord_map))) == 1


def test_4d_pair_not_congruent(pair_4d):
    a, b = pair_4d
    assert lattice_congruent(a, b) is None
    assert lattice_congruent(a, a).det == pytest.approx(1.0)


def test_congruence_dimension_limit():
    eye5 = TorusSpec.from_gram(np.eye(5, dtype=int).tolist())
    with pytest.raises(UnsupportedDimensionError):
        lattice_congruent(eye5, eye5)
