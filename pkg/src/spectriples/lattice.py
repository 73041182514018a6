"""Exact flat-torus backend.

A flat torus ``R^n / A Z^n`` has the characters ``exp(2 pi i <x, w>)`` as an
orthonormal eigenbasis (after dividing by ``sqrt(|det A|)``), where ``w``
ranges over the weight lattice ``(A^{-1})^T Z^n``.  The eigenvalue of a
character is ``4 pi^2 |w|^2`` and the triple product of three characters is
``1/sqrt(|det A|)`` exactly when the weights add up, else zero.

Weights are addressed by integer coordinates ``m`` with ``w = (A^{-1})^T m``;
``|w|^2 = m^T G^{-1} m`` where ``G = A^T A`` is the Gram matrix of the
period lattice.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import InvalidSpecError, UnsupportedDimensionError
from .tensor import TripleTensor

FOUR_PI_SQ = 4.0 * math.pi**2
DEGENERATE_DET = 1e-12
NORM_RTOL = 1e-9


def _frac_matrix(rows):
    return tuple(tuple(Fraction(x) for x in row) for row in rows)


def _frac_inverse(m):
    """Gauss-Jordan inverse of a square Fraction matrix."""
    n = len(m)
    aug = [list(row) + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(m)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] != 0), None)
        if piv is None:
            raise InvalidSpecError("singular Gram matrix")
        aug[col], aug[piv] = aug[piv], aug[col]
        p = aug[col][col]
        aug[col] = [x / p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col] != 0:
                factor = aug[r][col]
                aug[r] = [a - factor * b for a, b in zip(aug[r], aug[col])]
    return tuple(tuple(row[n:]) for row in aug)


def _frac_det(m):
    n = len(m)
    a = [list(row) for row in m]
    det = Fraction(1)
    for col in range(n):
        piv = next((r for r in range(col, n) if a[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            a[col], a[piv] = a[piv], a[col]
            det = -det
        det *= a[col][col]
        for r in range(col + 1, n):
            f = a[r][col] / a[col][col]
            a[r] = [x - f * y for x, y in zip(a[r], a[col])]
    return det


@dataclass(frozen=True, eq=False)
class TorusSpec:
    """Flat torus ``R^n / A Z^n`` given by its basis matrix ``A`` (columns are periods).

    ``exact_gram`` holds ``A^T A`` as Fractions when the input was exact
    (integers or rational strings); norms are then compared exactly.
    """

    basis: np.ndarray
    exact_gram: tuple | None = None

    def __post_init__(self):
        a = np.array(self.basis, dtype=float)
        if a.ndim == 1 and a.size == 1:
            a = a.reshape(1, 1)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise InvalidSpecError(f"basis must be a square matrix, got shape {a.shape}")
        if not np.all(np.isfinite(a)):
            raise InvalidSpecError("basis has non-finite entries")
        det = abs(float(np.linalg.det(a)))
        if det < DEGENERATE_DET:
            raise InvalidSpecError(f"degenerate basis: |det A| = {det:.3e}")
        a.setflags(write=False)
        object.__setattr__(self, "basis", a)
        gram = a.T @ a
        gram = 0.5 * (gram + gram.T)
        if self.exact_gram is not None:
            dual_exact = _frac_inverse(self.exact_gram)
            dual = np.array([[float(x) for x in row] for row in dual_exact])
            gram = np.array([[float(x) for x in row] for row in self.exact_gram])
            object.__setattr__(self, "_dual_exact", dual_exact)
        else:
            dual = np.linalg.inv(gram)
            dual = 0.5 * (dual + dual.T)
            object.__setattr__(self, "_dual_exact", None)
        if np.any(np.linalg.eigvalsh(gram) <= 0):
            raise InvalidSpecError("Gram matrix is not positive definite")
        cond = float(np.linalg.cond(gram))
        if cond > 1e12 or not np.allclose(dual @ gram, np.eye(len(gram)), atol=1e-14 * max(cond, 100.0), rtol=0):
            raise InvalidSpecError("Gram matrix is too ill-conditioned to invert accurately")
        for arr in (gram, dual):
            arr.setflags(write=False)
        object.__setattr__(self, "gram", gram)
        object.__setattr__(self, "dual_gram", dual)
        object.__setattr__(self, "volume", det)
        # w = E m with E = (A^{-1})^T
        emb = np.linalg.inv(a).T
        emb.setflags(write=False)
        object.__setattr__(self, "embedding", emb)

    @property
    def dim(self):
        return self.basis.shape[0]

    @property
    def is_exact(self):
        return self.exact_gram is not None

    @property
    def dual_gram_exact(self):
        return self._dual_exact

    @classmethod
    def from_basis(cls, basis):
        rows = np.atleast_2d(np.asarray(basis, dtype=object))
        exact = None
        if all(isinstance(x, (int, Fraction, np.integer)) for x in rows.flat):
            fr = [[Fraction(int(x)) if isinstance(x, np.integer) else Fraction(x) for x in row] for row in rows]
            n = len(fr)
            exact = tuple(
                tuple(sum(fr[r][i] * fr[r][j] for r in range(n)) for j in range(n)) for i in range(n)
            )
        return cls(np.array([[float(x) for x in row] for row in rows]), exact)

    @classmethod
    def from_gram(cls, gram):
        """Build from a Gram matrix; the basis is its upper Cholesky factor."""
        rows = np.atleast_2d(np.asarray(gram, dtype=object))
        exact = None
        if all(isinstance(x, (int, Fraction, np.integer)) for x in rows.flat):
            exact = _frac_matrix([[int(x) if isinstance(x, np.integer) else x for x in row] for row in rows])
            if any(exact[i][j] != exact[j][i] for i in range(len(exact)) for j in range(len(exact))):
                raise InvalidSpecError("Gram matrix is not symmetric")
        g = np.array([[float(x) for x in row] for row in rows])
        if g.shape[0] != g.shape[1]:
            raise InvalidSpecError("Gram matrix must be square")
        if not np.allclose(g, g.T, rtol=0, atol=1e-12 * max(1.0, np.abs(g).max())):
            raise InvalidSpecError("Gram matrix is not symmetric")
        try:
            upper = np.linalg.cholesky(0.5 * (g + g.T)).T
        except np.linalg.LinAlgError as exc:
            raise InvalidSpecError("Gram matrix is not positive definite") from exc
        return cls(upper, exact)

    def to_dict(self):
        if self.exact_gram is not None:
            return {"gram": [[_frac_str(x) for x in row] for row in self.exact_gram]}
        return {"basis": self.basis.tolist()}


def _frac_str(x):
    x = Fraction(x)
    return x.numerator if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def _parse_entry(x):
    if isinstance(x, bool):
        raise InvalidSpecError("boolean entry in matrix")
    if isinstance(x, int):
        return x
    if isinstance(x, float):
        return x
    if isinstance(x, str):
        try:
            return Fraction(x.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InvalidSpecError(f"cannot parse matrix entry {x!r}") from exc
    raise InvalidSpecError(f"unsupported matrix entry {x!r}")


def spec_from_dict(data):
    """Parse ``{"basis": [[...]]}`` or ``{"gram": [[...]]}`` (exactly one).

    Entries may be numbers or rational strings such as ``"7/12"``; a matrix
    without float entries is treated as exact.
    """
    if not isinstance(data, dict):
        raise InvalidSpecError("torus spec must be a JSON object")
    keys = {"basis", "gram"} & set(data)
    if len(keys) != 1:
        raise InvalidSpecError('torus spec needs exactly one of "basis" or "gram"')
    key = keys.pop()
    rows = data[key]
    if isinstance(rows, (int, float, str)):
        rows = [[rows]]
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InvalidSpecError(f'"{key}" must be a non-empty list of rows')
    n = len(rows)
    if any(len(r) != n for r in rows):
        raise InvalidSpecError(f'"{key}" must be square')
    parsed = [[_parse_entry(x) for x in row] for row in rows]
    if any(isinstance(x, float) for row in parsed for x in row):
        parsed = [[float(x) for x in row] for row in parsed]
    return TorusSpec.from_basis(parsed) if key == "basis" else TorusSpec.from_gram(parsed)


def load_spec(path):
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InvalidSpecError(f"{path}: invalid JSON ({exc})") from exc
    return spec_from_dict(data)


def save_spec(spec, path):
    Path(path).write_text(json.dumps(spec.to_dict(), indent=1) + "\n")


def rotation(theta):
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class Weight:
    coords: tuple
    embedded: np.ndarray
    norm_sq: float
    exact_norm: Fraction | None = None

    @property
    def eigenvalue(self):
        return FOUR_PI_SQ * self.norm_sq


class WeightTable(NamedTuple):
    coords: np.ndarray  # (N, n) int64
    norm_sq: np.ndarray  # (N,) float
    exact_norm: list | None  # Fractions, exact specs only

    @property
    def eigenvalues(self):
        return FOUR_PI_SQ * self.norm_sq


def _scaled_dual(spec):
    """Integer matrix ``D * G^{-1}`` and denominator ``D`` for exact specs."""
    dual = spec.dual_gram_exact
    den = 1
    for row in dual:
        for x in row:
            den = den * x.denominator // math.gcd(den, x.denominator)
    return np.array([[int(x * den) for x in row] for row in dual], dtype=object), den


def _box(radii):
    axes = [np.arange(-r, r + 1, dtype=np.int64) for r in radii]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=1)


def points_within(spec, bound, dual=True):
    """All integer coordinate vectors of norm at most ``bound`` (plus a float margin).

    With ``dual`` the norm is ``m^T G^{-1} m`` (weight lattice), otherwise
    ``m^T G m`` (period lattice).  Returns coords and float norms, unsorted.
    """
    h = spec.dual_gram if dual else spec.gram
    inv = spec.gram if dual else spec.dual_gram
    # min of m^T H m with m_i = t fixed is t^2 / (H^{-1})_ii
    slack = bound * (1 + 1e-6)
    radii = [int(math.floor(math.sqrt(max(slack, 0.0) * inv[i, i]) + 1e-9)) for i in range(spec.dim)]
    pts = _box(radii)
    norms = np.einsum("pi,ij,pj->p", pts, h, pts)
    keep = norms <= slack
    return pts[keep], norms[keep]


def _order(coords, norms, exact_keys=None):
    """Total order: norm ascending, ties broken lexicographically on coords."""
    if exact_keys is not None:
        primary = exact_keys
    else:
        o = np.argsort(norms, kind="stable")
        cluster = np.empty(len(norms), dtype=np.int64)
        cid, start = 0, None
        for pos in o:
            v = norms[pos]
            if start is None or v - start > NORM_RTOL * max(abs(start), 1e-300):
                cid += 1
                start = v
            cluster[pos] = cid
        primary = cluster
    keys = [coords[:, d] for d in range(coords.shape[1] - 1, -1, -1)] + [primary]
    return np.lexsort(keys)


def weight_table(spec, count):
    """Array form of :func:`enumerate_weights` (the ``count`` smallest weights)."""
    if count < 1:
        raise ValueError("count must be positive")
    n = spec.dim
    # ball volume estimate for the initial radius: count ~ V_n r^n / sqrt(det G^{-1})
    vn = math.pi ** (n / 2) / math.gamma(n / 2 + 1)
    bound = (2.0 * count * math.sqrt(np.linalg.det(spec.dual_gram)) / vn) ** (2.0 / n)
    while True:
        coords, norms = points_within(spec, bound)
        if np.count_nonzero(norms <= bound) >= count:
            break
        bound *= 2.0
    exact_keys = exact = None
    if spec.is_exact:
        scaled, den = _scaled_dual(spec)
        c_obj = coords.astype(object)
        ints = np.einsum("pi,ij,pj->p", c_obj, scaled, c_obj)
        exact_keys = np.array([int(x) for x in ints], dtype=np.int64)
        exact = [Fraction(int(x), den) for x in ints]
    order = _order(coords, norms, exact_keys)[:count]
    coords = coords[order]
    if exact is not None:
        exact = [exact[i] for i in order]
        norms = np.array([float(x) for x in exact])
    else:
        norms = norms[order]
    return WeightTable(coords, norms, exact)


def enumerate_weights(spec, count):
    """The ``count`` smallest weights in norm order, ties broken lexicographically.

    The first weight is always ``m = 0``.  The result is a prefix of a total
    order on the weight lattice, so a larger ``count`` only extends it.
    """
    table = weight_table(spec, count)
    emb = spec.embedding
    out = []
    for n, m in enumerate(table.coords):
        out.append(
            Weight(
                coords=tuple(int(x) for x in m),
                embedded=emb @ m,
                norm_sq=float(table.norm_sq[n]),
                exact_norm=None if table.exact_norm is None else table.exact_norm[n],
            )
        )
    return out


def _encode(coords, offset, base):
    key = np.zeros(coords.shape[0], dtype=np.int64)
    for d in range(coords.shape[1]):
        key = key * base + (coords[:, d] + offset)
    return key


def delta_tensor(coords, vol, eigenvalues=None, embedding=None, threshold=1e-12):
    """Character triple products: ``1/sqrt(vol)`` where ``m_i + m_j = m_k``."""
    coords = np.asarray(coords, dtype=np.int64)
    n_idx = coords.shape[0]
    bound = int(np.abs(coords).max()) if coords.size else 0
    offset = 2 * bound + 1
    base = 2 * offset + 1
    keys = _encode(coords, offset, base)
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    ii, jj = np.triu_indices(n_idx)
    sums = _encode(coords[ii] + coords[jj], offset, base)
    pos = np.searchsorted(sorted_keys, sums)
    pos = np.minimum(pos, n_idx - 1)
    hit = sorted_keys[pos] == sums
    kk = order[pos[hit]]
    index = np.stack([ii[hit], jj[hit], kk], axis=1)
    value = 1.0 / math.sqrt(vol)
    return TripleTensor(
        cutoff=n_idx,
        index=index,
        values=np.full(index.shape[0], value, dtype=np.complex128),
        vol=vol,
        eigenvalues=eigenvalues,
        threshold=threshold,
        source="exact",
        coords=coords,
        embedding=embedding,
    )


def torus_triple(spec, cutoff):
    """Exact triple-product tensor of the first ``cutoff`` characters."""
    if cutoff < 1:
        raise ValueError("cutoff must be positive")
    table = weight_table(spec, cutoff)
    return delta_tensor(table.coords, spec.volume, table.eigenvalues, spec.embedding)


class PrefixComparison(NamedTuple):
    equal: bool
    first_mismatch: int | None


def isospectral_prefix(spec_a, spec_b, cutoff, rtol=1e-9):
    """Compare the first ``cutoff`` eigenvalues of two tori with relative tolerance."""
    if not 0 < rtol <= 1e-2:
        raise ValueError("rtol must lie in (0, 1e-2]")
    ea = weight_table(spec_a, cutoff).eigenvalues
    eb = weight_table(spec_b, cutoff).eigenvalues
    bad = np.abs(ea - eb) > rtol * np.maximum(np.abs(ea), np.abs(eb))
    if np.any(bad):
        return PrefixComparison(False, int(np.argmax(bad)))
    return PrefixComparison(True, None)


def shell_counts(spec, max_norm, dual=True):
    """Lattice-point counts per squared-norm shell up to ``max_norm``.

    Keys are exact Fractions for exact specs, rounded floats otherwise.
    """
    coords, norms = points_within(spec, max_norm, dual=dual)
    if spec.is_exact:
        if dual:
            scaled, den = _scaled_dual(spec)
        else:
            g = spec.exact_gram
            den = 1
            for row in g:
                for x in row:
                    den = den * x.denominator // math.gcd(den, x.denominator)
            scaled = np.array([[int(x * den) for x in row] for row in g], dtype=object)
        c_obj = coords.astype(object)
        ints = np.einsum("pi,ij,pj->p", c_obj, scaled, c_obj)
        keys = [Fraction(int(x), den) for x in ints]
        keys = [k for k in keys if k <= max_norm]
    else:
        keys = [round(float(x), 9) for x in norms if x <= max_norm * (1 + NORM_RTOL)]
    counts = {}
    for k in keys:
        counts[k] = counts.get(k, 0) + 1
    return dict(sorted(counts.items()))


# -- congruence -------------------------------------------------------------


def lll_reduce(gram, delta=Fraction(3, 4)):
    """LLL-reduce a basis given by its Gram matrix; returns the unimodular transform.

    Works on Fractions (exact) or floats.  Columns of the returned integer
    matrix ``U`` express the reduced basis in the original one, so the reduced
    Gram matrix is ``U^T gram U``.  Meant for n <= 4, so the Gram matrix is
    simply recomputed after every step.
    """
    n = len(gram)
    exact = isinstance(gram[0][0], Fraction)
    conv = Fraction if exact else float
    delta = conv(delta)
    base = [[conv(gram[i][j]) for j in range(n)] for i in range(n)]
    u = [[int(i == j) for j in range(n)] for i in range(n)]

    def current():
        return [
            [sum(u[a][i] * u[b][j] * base[a][b] for a in range(n) for b in range(n)) for j in range(n)]
            for i in range(n)
        ]

    def gso(g):
        mu = [[conv(0)] * n for _ in range(n)]
        bstar = [conv(0)] * n
        for i in range(n):
            for j in range(i):
                mu[i][j] = (g[i][j] - sum(mu[j][k] * mu[i][k] * bstar[k] for k in range(j))) / bstar[j]
            bstar[i] = g[i][i] - sum(mu[i][k] ** 2 * bstar[k] for k in range(i))
        return mu, bstar

    k = 1
    for _ in range(100000):
        if k >= n:
            break
        for j in range(k - 1, -1, -1):
            mu, _ = gso(current())
            q = int(round(mu[k][j]))
            if q:
                for r in range(n):
                    u[r][k] -= q * u[r][j]
        mu, bstar = gso(current())
        if bstar[k] >= (delta - mu[k][k - 1] ** 2) * bstar[k - 1]:
            k += 1
        else:
            for r in range(n):
                u[r][k], u[r][k - 1] = u[r][k - 1], u[r][k]
            k = max(k - 1, 1)
    else:
        raise RuntimeError("LLL did not terminate")
    return np.array(u, dtype=np.int64)


@dataclass(frozen=True)
class Congruence:
    """Orthogonal ``matrix`` carrying weight lattice A onto weight lattice B.

    ``coord_map`` is the same map in integer weight coordinates
    (``m_B = coord_map @ m_A``).
    """

    matrix: np.ndarray
    det: float
    coord_map: np.ndarray


def _int_det(m):
    return int(_frac_det([[Fraction(int(x)) for x in row] for row in m]))


def lattice_congruent(spec_a, spec_b):
    """Search for an orthogonal map between the weight lattices of two tori.

    Backtracking over images of an LLL-reduced basis of lattice A among
    norm-matched vectors of lattice B, pruning on Gram-matrix agreement.  The
    search is exhaustive, so ``None`` means no congruence exists.  Both
    orientations are allowed; the result reports ``det``.
    """
    n = spec_a.dim
    if n > 4 or spec_b.dim > 4:
        raise UnsupportedDimensionError(f"congruence search supports n <= 4, got {max(n, spec_b.dim)}")
    if spec_b.dim != n:
        return None
    exact = spec_a.is_exact and spec_b.is_exact
    if exact:
        ha = spec_a.dual_gram_exact
        hb = spec_b.dual_gram_exact
        if _frac_det(ha) != _frac_det(hb):
            return None
    else:
        ha = spec_a.dual_gram.tolist()
        hb = spec_b.dual_gram.tolist()
        da, db = np.linalg.det(spec_a.dual_gram), np.linalg.det(spec_b.dual_gram)
        if abs(da - db) > 1e-9 * max(abs(da), abs(db)):
            return None

    u = lll_reduce(ha)
    if exact:
        ua = u.astype(object)
        red = (ua.T @ np.array(ha, dtype=object) @ ua).tolist()
        hb_obj = np.array(hb, dtype=object)
    else:
        red = (u.T @ np.array(ha) @ u).tolist()
        hb_obj = np.array(hb)
    scale = max(abs(float(red[i][i])) for i in range(n))

    def same(x, y):
        if exact:
            return x == y
        return abs(float(x) - float(y)) <= NORM_RTOL * scale

    target_norms = [red[i][i] for i in range(n)]
    coords, _ = points_within(spec_b, max(float(t) for t in target_norms))
    if exact:
        c_obj = coords.astype(object)
        norms_b = np.einsum("pi,ij,pj->p", c_obj, hb_obj, c_obj)
        images = c_obj @ hb_obj  # row p holds (H_B m_p)^T
    else:
        norms_b = np.einsum("pi,ij,pj->p", coords, hb_obj, coords)
        images = coords @ hb_obj
    candidates = [[p for p in range(len(coords)) if same(norms_b[p], t)] for t in target_norms]
    if any(not c for c in candidates):
        return None

    chosen = []

    def search(level):
        if level == n:
            v = np.array([coords[p] for p in chosen], dtype=np.int64).T
            return abs(_int_det(v)) == 1
        for p in candidates[level]:
            ok = True
            for lv, q in enumerate(chosen):
                if not same(sum(images[p][d] * coords[q][d] for d in range(n)), red[level][lv]):
                    ok = False
                    break
            if ok:
                chosen.append(p)
                if search(level + 1):
                    return True
                chosen.pop()
        return False

    if not search(0):
        return None
    v = np.array([coords[p] for p in chosen], dtype=np.int64).T
    uinv = np.rint(np.linalg.inv(u)).astype(np.int64)
    cmap = v @ uinv
    mat = spec_b.embedding @ cmap @ np.linalg.inv(spec_a.embedding)
    if not np.allclose(mat.T @ mat, np.eye(n), atol=1e-9, rtol=0):
        raise RuntimeError("congruence search produced a non-orthogonal map")
    return Congruence(matrix=mat, det=float(np.linalg.det(mat)), coord_map=cmap)
