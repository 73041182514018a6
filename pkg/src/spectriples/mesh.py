"""Periodic finite-difference discretization of flat tori in one and two dimensions.

The torus is parametrized by ``x in [0, 1)^n`` with physical position ``A x``.
In these coordinates the metric is the constant Gram matrix ``G = A^T A``
and the (non-negative) Laplacian is ``-sum g^{ab} d_a d_b`` with
``g^{ab} = (G^{-1})_{ab}``.

The discrete operator is written as an edge sum

    (L u)(x) = sum_s c_s (u(x) - u(x + s))

over a symmetric set of grid offsets ``s`` (``c_s = c_{-s}``).  Axis offsets
carry the second differences and the diagonal offsets carry the centered
cross-derivative, giving the 9-point stencil in 2D.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidSpecError, UnsupportedDimensionError
from .lattice import TorusSpec

MIN_RESOLUTION = 8


def stencil(spec, resolution):
    """Edge weights ``{offset: c_s}`` of the periodic Laplacian stencil."""
    g = spec.dual_gram
    r2 = float(resolution) ** 2
    if spec.dim == 1:
        c = g[0, 0] * r2
        return {(1,): c, (-1,): c}
    c11 = g[0, 0] * r2
    c22 = g[1, 1] * r2
    # -2 g12 d1 d2 u ~ -2 g12 R^2 (u_pp - u_pm - u_mp + u_mm) / 4
    cx = 0.5 * g[0, 1] * r2
    out = {(1, 0): c11, (-1, 0): c11, (0, 1): c22, (0, -1): c22}
    if cx != 0.0:
        out.update({(1, 1): cx, (-1, -1): cx, (1, -1): -cx, (-1, 1): -cx})
    return out


@dataclass(frozen=True, eq=False)
class Mesh:
    """Uniform periodic grid on the fundamental domain of a flat torus.

    ``stiffness`` is the discrete operator itself (symmetric because the
    lumped mass is uniform); the mass-weighted form is ``diag(mass) @ stiffness``.
    """

    spec: TorusSpec
    resolution: int
    points: np.ndarray  # (V, dim) parameter coordinates in [0, 1)
    mass: np.ndarray  # (V,)
    stiffness: sp.csr_matrix
    offsets: tuple  # stencil offsets s
    weights: tuple  # stencil weights c_s
    neighbors: np.ndarray  # (V, len(offsets)) index of x + s

    @property
    def dim(self):
        return self.spec.dim

    @property
    def vertex_count(self):
        return self.points.shape[0]

    @property
    def volume(self):
        return self.spec.volume

    def apply(self, u):
        """Apply the Laplacian stencil to vertex values."""
        u = np.asarray(u)
        out = np.zeros_like(u, dtype=np.result_type(u, float))
        for col, c in enumerate(self.weights):
            out += c * (u - u[self.neighbors[:, col]])
        return out

    def gradient_product(self, u, v):
        """Discrete ``du . dv`` from edge differences: ``1/2 sum_s c_s (u(x+s)-u(x)) (v(x+s)-v(x))``.

        This is the carre du champ of the stiffness stencil, so
        ``L(uv) = u Lv + v Lu - 2 du.dv`` holds exactly on the grid.
        Accepts stacked inputs with vertices on the first axis.
        """
        u = np.asarray(u)
        v = np.asarray(v)
        out = np.zeros(np.broadcast_shapes(u.shape, v.shape), dtype=np.result_type(u, v, float))
        for col, c in enumerate(self.weights):
            nb = self.neighbors[:, col]
            out += 0.5 * c * (u[nb] - u) * (v[nb] - v)
        return out


def build_torus_mesh(spec, resolution):
    """Uniform ``R`` (1D) or ``R x R`` (2D) periodic grid with lumped mass."""
    if spec.dim not in (1, 2):
        raise UnsupportedDimensionError(f"meshes support dimension 1 or 2, got {spec.dim}")
    resolution = int(resolution)
    if resolution < MIN_RESOLUTION:
        raise InvalidSpecError(f"resolution must be at least {MIN_RESOLUTION}, got {resolution}")
    n = spec.dim
    shape = (resolution,) * n
    grid = np.indices(shape).reshape(n, -1).T  # row-major vertex order
    count = grid.shape[0]
    points = grid / resolution
    mass = np.full(count, spec.volume / count)

    sten = stencil(spec, resolution)
    offsets = tuple(sten.keys())
    weights = tuple(sten[o] for o in offsets)
    nbrs = np.empty((count, len(offsets)), dtype=np.int64)
    for col, off in enumerate(offsets):
        shifted = (grid + np.array(off)) % resolution
        nbrs[:, col] = np.ravel_multi_index(shifted.T, shape)

    rows = np.repeat(np.arange(count), len(offsets))
    cols = nbrs.ravel()
    vals = -np.tile(np.array(weights), count)
    diag = np.full(count, sum(weights))
    stiff = sp.coo_matrix(
        (np.concatenate([vals, diag]), (np.concatenate([rows, np.arange(count)]), np.concatenate([cols, np.arange(count)]))),
        shape=(count, count),
    ).tocsr()
    stiff.sum_duplicates()
    stiff.sort_indices()
    for arr in (points, mass, nbrs):
        arr.setflags(write=False)
    return Mesh(
        spec=spec,
        resolution=resolution,
        points=points,
        mass=mass,
        stiffness=stiff,
        offsets=offsets,
        weights=weights,
        neighbors=nbrs,
    )
