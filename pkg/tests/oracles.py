"""Independent reference computations used by the tests.

Nothing here calls the package's enumeration, tensor or solver code; each
oracle recomputes its answer from first principles (brute force, closed
forms, or direct quadrature).
"""
import itertools
import math
from collections import Counter
from fractions import Fraction

import numpy as np

FOUR_PI_SQ = 4 * math.pi**2


def brute_force_weights(basis, radius):
    """All integer coords in a cube, sorted by (norm, coords) with norms from inv(A)^T."""
    a = np.asarray(basis, dtype=float)
    emb = np.linalg.inv(a).T
    n = a.shape[0]
    rows = []
    for m in itertools.product(range(-radius, radius + 1), repeat=n):
        w = emb @ np.array(m, dtype=float)
        rows.append((round(float(w @ w), 9), m))
    rows.sort()
    return rows


def theta_counts(weight_gram, max_norm):
    """Number of lattice vectors of each norm <= max_norm for an integral Gram matrix.

    Coordinates are bounded by ``|m_i| <= sqrt(max_norm * (G^{-1})_ii)``, the
    extent of the ellipsoid ``m^T G m <= max_norm`` along each axis.
    """
    g = np.array([[int(Fraction(x)) for x in row] for row in weight_gram], dtype=np.int64)
    inv = np.linalg.inv(g.astype(float))
    radius = [int(math.floor(math.sqrt(max_norm * inv[i, i]) + 1e-9)) for i in range(len(g))]
    axes = [np.arange(-r, r + 1) for r in radius]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(g))
    norms = np.einsum("pa,ab,pb->p", pts, g, pts)
    return dict(sorted(Counter(int(x) for x in norms[norms <= max_norm]).items()))


def short_vector_profile(weight_gram, norm):
    """Sorted multiset of inner products among all pairs of vectors of a given norm."""
    g = np.array([[int(Fraction(x)) for x in row] for row in weight_gram], dtype=np.int64)
    inv = np.linalg.inv(g.astype(float))
    radius = [int(math.floor(math.sqrt(norm * inv[i, i]) + 1e-9)) for i in range(len(g))]
    pts = np.array(list(itertools.product(*[range(-r, r + 1) for r in radius])), dtype=np.int64)
    vecs = pts[np.einsum("pa,ab,pb->p", pts, g, pts) == norm]
    ips = vecs @ g @ vecs.T
    return sorted(Counter(ips.ravel().tolist()).items())


def circle_fd_eigenvalues(length, resolution, count):
    """Closed-form spectrum of the periodic 3-point Laplacian on a circle."""
    m = np.arange(-(resolution // 2), resolution // 2 + 1)
    lam = 4 * resolution**2 * np.sin(np.pi * m / resolution) ** 2 / length**2
    return np.sort(lam)[:count]


def rect_fd_eigenvalues(lengths, resolution, count):
    """Closed-form spectrum of the periodic 5-point Laplacian on a rectangle."""
    r = resolution
    m = np.arange(r)
    one = [4 * r**2 * np.sin(np.pi * m / r) ** 2 / l**2 for l in lengths]
    return np.sort((one[0][:, None] + one[1][None, :]).ravel())[:count]


def character_quadrature(basis, coords, grid):
    """``<e^i e^j, e^k>`` for characters by brute-force midpoint quadrature."""
    a = np.asarray(basis, dtype=float)
    vol = abs(np.linalg.det(a))
    n = a.shape[0]
    axes = [(np.arange(grid) + 0.5) / grid] * n
    pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
    e = np.exp(2j * np.pi * np.asarray(coords, float) @ pts.T) / math.sqrt(vol)
    w = vol / pts.shape[0]
    return np.einsum("ip,jp,kp->ijk", e, e, e.conj() * w)
