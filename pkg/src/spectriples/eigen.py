"""Orthonormal Laplacian eigenbases, exact (characters) or discrete (mesh vectors)."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg
import scipy.sparse.linalg

from .errors import SolverError
from .lattice import TorusSpec, weight_table
from .mesh import Mesh

DENSE_LIMIT = 2000
CLUSTER_RTOL = 1e-6
RESIDUAL_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Ordered eigenpairs, orthonormal under the manifold's measure.

    Exact bases hold integer weight coordinates ``coords`` and represent the
    characters ``exp(2 pi i m.x) / sqrt(vol)`` in parameter coordinates.  Mesh
    bases hold per-vertex ``values`` (one column per eigenfunction) and the
    lumped ``mass``.  ``clusters`` lists ``(start, stop)`` ranges of
    numerically degenerate eigenvalues.
    """

    eigenvalues: np.ndarray
    source: str
    vol: float
    spec: TorusSpec
    values: np.ndarray | None = None
    mass: np.ndarray | None = None
    mesh: Mesh | None = None
    coords: np.ndarray | None = None
    clusters: tuple = ()

    def __len__(self):
        return len(self.eigenvalues)

    @property
    def is_exact(self):
        return self.source == "exact"

    def truncate(self, count):
        if count > len(self):
            raise ValueError("cannot truncate beyond basis length")
        return replace(
            self,
            eigenvalues=self.eigenvalues[:count],
            values=None if self.values is None else self.values[:, :count],
            coords=None if self.coords is None else self.coords[:count],
            clusters=tuple((a, min(b, count)) for a, b in self.clusters if min(b, count) - a > 1),
        )

    def conjugate(self):
        """The basis of complex-conjugate eigenfunctions (same eigenvalues)."""
        if self.is_exact:
            return replace(self, coords=-self.coords)
        return replace(self, values=self.values.conj())

    def evaluate(self, points, count=None):
        """Exact characters at parameter points ``(P, n)``; returns ``(count, P)``."""
        if not self.is_exact:
            raise TypeError("evaluate() is for exact bases; use .values for meshes")
        count = len(self) if count is None else count
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        phase = 2.0 * math.pi * (self.coords[:count] @ pts.T)
        return np.exp(1j * phase) / math.sqrt(self.vol)

    def quadrature_grid(self, count=None, factors=3):
        """Uniform grid exact for products of ``factors`` basis functions.

        A uniform grid with ``Q`` points per direction integrates
        ``exp(2 pi i t x)`` exactly for ``|t| < Q``, so ``Q = factors * K + 1``
        suffices when the first ``count`` weights have ``|m_d| <= K``.
        """
        count = len(self) if count is None else count
        k = np.abs(self.coords[:count]).max(axis=0) if count else np.zeros(self.spec.dim, int)
        q = [int(factors * kd + 1) for kd in k]
        axes = [np.arange(qd) / qd for qd in q]
        grid = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([g.ravel() for g in grid], axis=1)
        w = np.full(pts.shape[0], self.vol / pts.shape[0])
        return pts, w

    def sampled(self, count=None, factors=3):
        """``(values, weights)`` with functions on rows, ready for quadrature sums."""
        count = len(self) if count is None else count
        if self.is_exact:
            pts, w = self.quadrature_grid(count, factors)
            return self.evaluate(pts, count), w
        return self.values[:, :count].T, self.mass

    def max_safe_cutoff(self):
        """Largest cutoff whose pairwise products stay resolvable on the mesh.

        Modes with ``|m_d| <= R/4`` in every direction are kept; the 1D
        discrete eigenvalue at ``|m| = R/4`` is ``2 R^2 / G_dd``.
        """
        if self.is_exact:
            return len(self)
        r = self.mesh.resolution
        lam = 2.0 * r**2 * float(np.min(1.0 / np.diag(self.spec.gram)))
        return int(np.count_nonzero(self.eigenvalues <= lam * (1 + 1e-9)))


def exact_basis(spec, count):
    """The first ``count`` characters of a flat torus."""
    table = weight_table(spec, count)
    return SpectralBasis(
        eigenvalues=table.eigenvalues,
        source="exact",
        vol=spec.volume,
        spec=spec,
        coords=table.coords,
    )


def _clusters(evals, scale):
    out = []
    start = 0
    for i in range(1, len(evals) + 1):
        if i == len(evals) or evals[i] - evals[i - 1] >= CLUSTER_RTOL * max(abs(evals[i]), scale):
            if i - start > 1:
                out.append((start, i))
            start = i
    return tuple(out)


def _fix_sign(v):
    """Make the first entry of (numerically) largest modulus real and positive."""
    mag = np.abs(v)
    pos = int(np.argmax(mag >= mag.max() * (1 - 1e-8)))
    ph = v[pos] / mag[pos]
    return v / ph if np.iscomplexobj(v) else v * np.sign(ph)


def eigensolve(mesh, count):
    """The ``count`` lowest eigenpairs of the mesh Laplacian, mass-orthonormal.

    Below ``DENSE_LIMIT`` vertices a dense symmetric solve is used; above it,
    implicitly restarted Lanczos (ARPACK) in shift-invert mode about a small
    negative shift.
    """
    nv = mesh.vertex_count
    if not 1 <= count <= nv // 2:
        raise ValueError(f"count must lie in [1, {nv // 2}] for {nv} vertices, got {count}")
    stiff = mesh.stiffness
    snorm = float(np.abs(stiff).sum(axis=1).max())
    if nv < DENSE_LIMIT:
        evals, vecs = scipy.linalg.eigh(stiff.toarray(), subset_by_index=[0, count - 1])
    else:
        shift = 0.1 * 4.0 * math.pi**2 * float(np.linalg.eigvalsh(mesh.spec.dual_gram).min())
        v0 = np.random.default_rng(0).standard_normal(nv)
        try:
            evals, vecs = scipy.sparse.linalg.eigsh(
                stiff, k=count, sigma=-shift, which="LM", v0=v0, tol=0, ncv=max(2 * count + 1, 32)
            )
        except scipy.sparse.linalg.ArpackNoConvergence as exc:
            raise SolverError("Lanczos iteration did not converge", residual=float("inf")) from exc
        order = np.argsort(evals, kind="stable")
        evals, vecs = evals[order], vecs[:, order]

    evals = np.maximum(evals, 0.0)
    clusters = _clusters(evals, 1e-12 * snorm)
    for a, b in clusters:
        q, _ = np.linalg.qr(vecs[:, a:b])
        vecs[:, a:b] = q
    for i in range(count):
        vecs[:, i] = _fix_sign(vecs[:, i])

    resid = np.linalg.norm(stiff @ vecs - vecs * evals, axis=0)
    worst = float(resid.max())
    if worst > RESIDUAL_RTOL * snorm:
        raise SolverError(f"eigen-residual {worst:.3e} exceeds {RESIDUAL_RTOL:.0e} * ||S||", residual=worst)

    # uniform lumped mass: Euclidean orthonormality scaled by 1/sqrt(mass)
    cell = float(mesh.mass[0])
    vecs = vecs / math.sqrt(cell)
    const = 1.0 / math.sqrt(mesh.volume)
    simple_ground = not clusters or clusters[0][0] != 0
    if simple_ground and np.allclose(vecs[:, 0], const, rtol=0, atol=1e-8 * const):
        vecs[:, 0] = const
        evals[0] = 0.0
    return SpectralBasis(
        eigenvalues=evals,
        source="mesh",
        vol=mesh.volume,
        spec=mesh.spec,
        values=vecs,
        mass=np.asarray(mesh.mass),
        mesh=mesh,
        clusters=clusters,
    )
