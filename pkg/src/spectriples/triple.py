"""Triple-product tensors and the coefficient-side multiplication they encode.

With ``M^{i,j,k} = <e^i e^j, e^k>`` the Fourier coefficients of a pointwise
product are ``(fg)^(k) = sum_{i,j} f^(i) g^(j) M^{i,j,k}``, so powers and
polynomials of band-limited functions can be evaluated entirely on
coefficient vectors.
"""
from __future__ import annotations

import math
from collections.abc import Mapping

import numpy as np

from .eigen import SpectralBasis
from .errors import AliasingError, CutoffMismatchError
from .lattice import delta_tensor
from .tensor import TripleTensor

EXACT_THRESHOLD = 1e-12
MESH_THRESHOLD = 1e-9
_PAIR_CHUNK = 4096


def triple_tensor(basis: SpectralBasis, cutoff: int | None = None, threshold: float | None = None) -> TripleTensor:
    """``M^{i,j,k}`` for all indices below ``cutoff``.

    Exact bases use the weight-addition rule; mesh bases sum
    ``mass * e^i * e^j * conj(e^k)`` over vertices.  Entries smaller than
    ``threshold`` in magnitude are dropped.
    """
    cutoff = len(basis) if cutoff is None else int(cutoff)
    if not 1 <= cutoff <= len(basis):
        raise ValueError(f"cutoff must lie in [1, {len(basis)}]")
    if basis.is_exact:
        thr = EXACT_THRESHOLD if threshold is None else threshold
        return delta_tensor(
            basis.coords[:cutoff],
            basis.vol,
            eigenvalues=basis.eigenvalues[:cutoff],
            embedding=basis.spec.embedding,
            threshold=thr,
        )
    safe = basis.max_safe_cutoff()
    if cutoff > safe:
        raise AliasingError(
            f"cutoff {cutoff} exceeds the anti-aliasing limit for resolution "
            f"{basis.mesh.resolution}; max safe cutoff is {safe}",
            max_safe=safe,
        )
    thr = MESH_THRESHOLD if threshold is None else threshold
    vals = basis.values[:, :cutoff]
    weighted_conj = (basis.mass[:, None] * vals).conj() if np.iscomplexobj(vals) else basis.mass[:, None] * vals
    ii, jj = np.triu_indices(cutoff)
    idx_parts, val_parts = [], []
    for start in range(0, len(ii), _PAIR_CHUNK):
        i = ii[start : start + _PAIR_CHUNK]
        j = jj[start : start + _PAIR_CHUNK]
        prod = vals[:, i] * vals[:, j]
        block = prod.T @ weighted_conj  # (pairs, cutoff)
        p, k = np.nonzero(np.abs(block) >= thr)
        idx_parts.append(np.stack([i[p], j[p], k], axis=1))
        val_parts.append(block[p, k])
    index = np.concatenate(idx_parts) if idx_parts else np.zeros((0, 3), np.int64)
    values = np.concatenate(val_parts).astype(np.complex128) if val_parts else np.zeros(0, complex)
    return TripleTensor(
        cutoff=cutoff,
        index=index,
        values=values,
        vol=basis.vol,
        eigenvalues=basis.eigenvalues[:cutoff],
        threshold=thr,
        source="mesh",
    )


def fourier_coeffs(f, basis: SpectralBasis, cutoff: int | None = None, grid: int | None = None) -> np.ndarray:
    """Coefficients ``f^(i) = <f, e^i>`` for ``i < cutoff``.

    ``f`` may be per-vertex values (mesh bases), a callable on parameter
    points of shape ``(P, n)``, or, for exact bases, a mapping from integer
    frequency tuples to coefficients of ``exp(2 pi i m.x)``.  For callables on
    exact bases ``grid`` sets the quadrature points per direction.
    """
    cutoff = len(basis) if cutoff is None else int(cutoff)
    if basis.is_exact:
        if isinstance(f, Mapping):
            lookup = {tuple(int(x) for x in m): c for m, c in f.items()}
            scale = math.sqrt(basis.vol)
            return np.array(
                [lookup.get(tuple(int(x) for x in m), 0.0) * scale for m in basis.coords[:cutoff]], dtype=np.complex128
            )
        if not callable(f):
            raise TypeError("exact bases take a callable or a frequency mapping")
        if grid is None:
            kmax = int(np.abs(basis.coords[:cutoff]).max()) if cutoff else 0
            grid = max(4 * kmax + 1, 32)
        axes = [np.arange(grid) / grid] * basis.spec.dim
        pts = np.stack([g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=1)
        vals = np.asarray(f(pts))
        weights = np.full(pts.shape[0], basis.vol / pts.shape[0])
        return basis.evaluate(pts, cutoff).conj() @ (weights * vals)
    if callable(f):
        f = f(basis.mesh.points)
    f = np.asarray(f)
    if f.shape != (basis.values.shape[0],):
        raise ValueError(f"expected {basis.values.shape[0]} vertex values, got shape {f.shape}")
    return basis.values[:, :cutoff].conj().T @ (basis.mass * f)


def reconstruct(coeffs, basis: SpectralBasis, points=None) -> np.ndarray:
    """Evaluate ``sum_i f^(i) e^i`` on the mesh (or at ``points`` for exact bases)."""
    coeffs = np.asarray(coeffs)
    n = len(coeffs)
    if basis.is_exact:
        return coeffs @ basis.evaluate(points, n)
    return basis.values[:, :n] @ coeffs


def _check_cutoff(t: TripleTensor, *vecs):
    for v in vecs:
        if len(v) != t.cutoff:
            raise CutoffMismatchError(f"coefficient length {len(v)} does not match tensor cutoff {t.cutoff}")


def multiply_via_tensor(f, g, t: TripleTensor) -> np.ndarray:
    """Coefficients of the pointwise product, ``h(k) = sum f(i) g(j) M^{i,j,k}``."""
    f = np.asarray(f)
    g = np.asarray(g)
    _check_cutoff(t, f, g)
    return t.contract(f, g)


def _aliasing_budget(f, p, t: TripleTensor, rtol=1e-12):
    if t.source == "exact" or t.eigenvalues is None:
        return
    mag = np.abs(f)
    if not mag.any():
        return
    active = mag > rtol * mag.max()
    root_f = math.sqrt(max(float(t.eigenvalues[active].max()), 0.0))
    root_top = math.sqrt(max(float(t.eigenvalues[-1]), 0.0))
    if p * root_f > root_top * (1 + 1e-9):
        raise AliasingError(
            f"power {p} of a function with active frequency sqrt(lambda)={root_f:.4g} "
            f"exceeds the tensor's range sqrt(lambda)={root_top:.4g}"
        )


def power_via_tensor(f, p: int, t: TripleTensor) -> np.ndarray:
    """Coefficients of ``f^p`` by left-associated repeated multiplication."""
    if int(p) != p or p < 2:
        raise ValueError("power must be an integer >= 2")
    f = np.asarray(f)
    _check_cutoff(t, f)
    _aliasing_budget(f, p, t)
    out = f
    for _ in range(int(p) - 1):
        out = t.contract(out, f)
    return out


def polynomial_via_tensor(coeffs_by_power: Mapping[int, complex], f, t: TripleTensor, vol: float) -> np.ndarray:
    """Coefficients of ``sum_p c_p f^p``; the constant term uses ``e^0 = 1/sqrt(vol)``."""
    f = np.asarray(f)
    _check_cutoff(t, f)
    out = np.zeros(t.cutoff, dtype=np.complex128)
    for p, c in coeffs_by_power.items():
        if p == 0:
            out[0] += c * math.sqrt(vol)
        elif p == 1:
            out += c * f
        else:
            out += c * power_via_tensor(f, p, t)
    return out


def idempotent_residual(f, t: TripleTensor) -> float:
    """``max_k |f(k) - sum f(i) f(j) M^{i,j,k}|``; zero for characteristic functions."""
    f = np.asarray(f)
    _check_cutoff(t, f)
    return float(np.abs(f - t.contract(f, f)).max())


__all__ = [
    "triple_tensor",
    "fourier_coeffs",
    "reconstruct",
    "multiply_via_tensor",
    "power_via_tensor",
    "polynomial_via_tensor",
    "idempotent_residual",
]
