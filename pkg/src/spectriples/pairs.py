"""Reference torus pairs: the bundled isospectral 4D pair and a congruent 2D pair.

The 4D pair comes from a glue construction.  Let ``D = diag(1, 7, 13, 19)``.
The two weight lattices are the sublattices of ``Z^4`` of index 144 cut out
by a code ``C4`` over ``Z/4`` and one of two codes ``C3+``, ``C3-`` over
``Z/3``, carrying the quadratic form ``x^T D x / 12``.  Both codes over
``Z/3`` have the same weight enumerator with respect to the diagonal form,
so the two lattices have equal theta series while their short-vector
configurations differ.  The stored files hold the period Gram matrices
(inverses of the LLL-reduced weight Grams) as exact fractions.
"""
from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources

import numpy as np

from .lattice import TorusSpec, _frac_inverse, lll_reduce, rotation, spec_from_dict

DIAGONAL = (1, 7, 13, 19)
MODULUS = 12
CODE_4 = ((0, 0, 2, 2), (0, 2, 0, 2), (1, 1, 1, 3))
CODE_3_PLUS = ((0, 1, 1, 1), (1, 0, 1, 2))
CODE_3_MINUS = ((0, 1, 1, 1), (1, 0, 2, 1))
PAIR_FILES = ("isospectral_4d_a.json", "isospectral_4d_b.json")


def _integer_basis(generators):
    """Basis (as columns) of the integer span of ``generators`` by row reduction."""
    rows = [list(map(int, g)) for g in generators]
    n = len(rows[0])
    basis = []
    for col in range(n):
        while True:
            live = [r for r in rows if r[col] != 0]
            if len(live) <= 1:
                break
            live.sort(key=lambda r: abs(r[col]))
            piv = live[0]
            for r in live[1:]:
                q = r[col] // piv[col]
                for c in range(n):
                    r[c] -= q * piv[c]
        live = [r for r in rows if r[col] != 0]
        if live:
            piv = live[0]
            rows = [r for r in rows if r is not piv]
            basis.append(piv if piv[col] > 0 else [-x for x in piv])
    return np.array(basis, dtype=np.int64).T


def glue_lattice(code3, code4=CODE_4, modulus=MODULUS):
    """Columns spanning ``{x in Z^4 : x mod 4 in code4, x mod 3 in code3}``.

    Codewords are lifted through the Chinese remainder map: ``9 c`` is
    ``c`` mod 4 and 0 mod 3, ``4 c`` is 0 mod 4 and ``c`` mod 3.
    """
    n = len(code4[0])
    gens = [[modulus * int(i == j) for j in range(n)] for i in range(n)]
    gens += [[9 * x for x in c] for c in code4]
    gens += [[4 * x for x in c] for c in code3]
    return _integer_basis(gens)


def glue_weight_gram(code3, diagonal=DIAGONAL):
    """LLL-reduced weight Gram ``B^T D B / 12`` as a matrix of Fractions."""
    b = glue_lattice(code3)
    raw = b.T @ np.diag(diagonal) @ b
    gram = [[Fraction(int(x), MODULUS) for x in row] for row in raw]
    u = lll_reduce(gram)
    g = np.array(gram, dtype=object)
    uo = u.astype(object)
    return (uo.T @ g @ uo).tolist()


def spec_from_weight_gram(weight_gram) -> TorusSpec:
    """Torus whose weight lattice has the given Gram matrix."""
    exact = [[Fraction(x) for x in row] for row in weight_gram]
    period = _frac_inverse(tuple(tuple(r) for r in exact))
    return TorusSpec.from_gram([list(r) for r in period])


def construct_isospectral_pair():
    """Rebuild the 4D pair from the glue construction (no bundled data)."""
    return tuple(spec_from_weight_gram(glue_weight_gram(c)) for c in (CODE_3_PLUS, CODE_3_MINUS))


def load_bundled(name):
    """Load a bundled spec by file name, with or without the ``.json`` suffix."""
    if not name.endswith(".json"):
        name += ".json"
    text = resources.files("spectriples.data").joinpath(name).read_text()
    return spec_from_dict(json.loads(text))


def isospectral_pair():
    """The bundled 4D isospectral, non-congruent pair as exact specs."""
    return tuple(load_bundled(name) for name in PAIR_FILES)


def bundled_path(name):
    return resources.files("spectriples.data").joinpath(name)


def rotated_pair(theta=0.3):
    """The unit square torus and a rotated copy (congruent, hence isometric)."""
    return TorusSpec.from_basis(np.eye(2)), TorusSpec.from_basis(rotation(theta))


__all__ = [
    "glue_lattice",
    "glue_weight_gram",
    "spec_from_weight_gram",
    "construct_isospectral_pair",
    "isospectral_pair",
    "rotated_pair",
    "load_bundled",
    "bundled_path",
]
