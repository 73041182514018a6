"""Executable checks of the identities satisfied by triple-product tensors.

Every check returns an :class:`IdentityReport` with the worst residual, its
location and a pass flag against a stated tolerance.  Quadrature-based
checks evaluate eigenfunctions on the mesh (mesh bases) or on a uniform grid
that integrates the relevant products exactly (exact bases), so they do not
reuse the tensor they are checking.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .eigen import SpectralBasis
from .tensor import TripleTensor
from .triple import fourier_coeffs, multiply_via_tensor, power_via_tensor, triple_tensor

FOUR_PI_SQ = 4.0 * math.pi**2

# (exact, mesh)
TOLERANCES = {
    "normalization": (0.0, 1e-8),
    "gradient": (1e-12, 1e-3),
    "polarization": (1e-12, 1e-8),
    "decay": (0.0, 1e-6),
    "product": (1e-10, 1e-6),
    "power": (1e-8, 1e-6),
    "idempotent": (1e-10, 1e-10),
    "q0_closed_form": (1e-10, 1e-10),
    "signed_root": (0.0, 0.0),
}


def default_tolerance(name, source):
    exact, mesh = TOLERANCES[name]
    return exact if source == "exact" else mesh


@dataclass
class IdentityReport:
    identity: str
    residual: float
    tolerance: float
    worst: tuple | None = None
    details: dict = field(default_factory=dict)

    @property
    def passed(self):
        return bool(self.residual <= self.tolerance)

    def to_dict(self):
        return {
            "identity": self.identity,
            "residual": float(self.residual),
            "tolerance": float(self.tolerance),
            "pass": self.passed,
            "worst_indices": None if self.worst is None else [int(x) for x in self.worst],
            "details": self.details,
        }


def _tol(tolerance, name, t):
    return default_tolerance(name, t.source) if tolerance is None else float(tolerance)


def _dense_first_pairs(t: TripleTensor):
    """Dense ``(pairs, N)`` view of the stored ``i <= j`` entries."""
    n = t.cutoff
    ii, jj = np.triu_indices(n)
    pair_of = {(int(a), int(b)): p for p, (a, b) in enumerate(zip(ii, jj))}
    out = np.zeros((len(ii), n), dtype=np.complex128)
    for (i, j, k), v in zip(t.index.tolist(), t.values):
        out[pair_of[(i, j)], k] = v
    return ii, jj, out


def check_normalization(t: TripleTensor, tolerance=None) -> IdentityReport:
    """``M^{0,j,k} = delta_{jk} / sqrt(vol)`` for all ``j, k`` below the cutoff."""
    tol = _tol(tolerance, "normalization", t)
    n = t.cutoff
    block = np.zeros((n, n), dtype=np.complex128)
    sel = t.index[:, 0] == 0
    block[t.index[sel, 1], t.index[sel, 2]] = t.values[sel]
    diff = np.abs(block - np.eye(n) / math.sqrt(t.vol))
    j, k = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return IdentityReport("normalization", float(diff.max()), tol, (0, int(j), int(k)))


def _gradient_pairings(basis: SpectralBasis, n: int):
    """``<de^i . de^j, e^k>`` for ``i <= j`` as a ``(pairs, n)`` array."""
    ii, jj = np.triu_indices(n)
    if basis.is_exact:
        vals, w = basis.sampled(n, factors=3)
        h = basis.spec.dual_gram
        m = basis.coords[:n].astype(float)
        # d exp(2 pi i m.x) = 2 pi i m exp(...): du.dv = -4 pi^2 (m_i^T G^{-1} m_j) e^i e^j
        dots = -FOUR_PI_SQ * np.einsum("pa,ab,pb->p", m[ii], h, m[jj])
        prods = vals[ii] * vals[jj]
        return ii, jj, dots[:, None] * (prods @ (w[:, None] * vals.conj().T))
    mesh = basis.mesh
    v = basis.values[:, :n]
    weighted = basis.mass[:, None] * v.conj()
    out = np.empty((len(ii), n), dtype=np.complex128)
    chunk = 2048
    for s in range(0, len(ii), chunk):
        a = ii[s : s + chunk]
        b = jj[s : s + chunk]
        gam = mesh.gradient_product(v[:, a], v[:, b])
        out[s : s + chunk] = gam.T @ weighted
    return ii, jj, out


def gradient_identity(basis: SpectralBasis, t: TripleTensor, tolerance=None) -> IdentityReport:
    """``(lambda_i + lambda_j - lambda_k) M^{i,j,k} / 2 = <de^i . de^j, e^k>``.

    Triples with ``|lambda_i + lambda_j - lambda_k| <= 1e-6 lambda_max`` are
    skipped (the identity carries no information there) and counted.  The
    residual is relative to the largest right-hand side.
    """
    tol = _tol(tolerance, "gradient", t)
    n = t.cutoff
    lam = np.asarray(basis.eigenvalues[:n], dtype=float)
    ii, jj, grad = _gradient_pairings(basis, n)
    _, _, dense = _dense_first_pairs(t)
    comb = lam[ii][:, None] + lam[jj][:, None] - lam[None, :]
    lhs = 0.5 * comb * dense
    mask = np.abs(comb) > 1e-6 * max(float(lam.max()), 0.0)
    skipped = int(np.count_nonzero(~mask))
    if not mask.any():
        return IdentityReport("gradient", 0.0, tol, None, {"skipped": skipped, "checked": 0})
    diff = np.where(mask, np.abs(lhs - grad), 0.0)
    scale = float(np.abs(np.where(mask, grad, 0.0)).max()) or 1.0
    p, k = np.unravel_index(int(np.argmax(diff)), diff.shape)
    return IdentityReport(
        "gradient",
        float(diff.max()) / scale,
        tol,
        (int(ii[p]), int(jj[p]), int(k)),
        {"skipped": skipped, "checked": int(mask.sum()), "scale": scale},
    )


def polarization_identity(basis: SpectralBasis, t: TripleTensor, tolerance=None, limit=12) -> IdentityReport:
    """``M^{i,j,k} = (M^{i,i,k} + M^{j,j,k} - <(e^i - e^j)^2, e^k>) / 2`` for indices below ``limit``."""
    tol = _tol(tolerance, "polarization", t)
    n = min(t.cutoff, limit)
    vals, w = basis.sampled(n, factors=3)
    d = t.truncate(n).dense()
    diffsq = (vals[:, None, :] - vals[None, :, :]) ** 2  # (i, j, P)
    square = np.einsum("ijp,kp->ijk", diffsq, w[None, :] * vals.conj())
    diag = np.einsum("iik->ik", d)
    rhs = 0.5 * (diag[:, None, :] + diag[None, :, :] - square)
    err = np.abs(d - rhs)
    loc = np.unravel_index(int(np.argmax(err)), err.shape)
    return IdentityReport("polarization", float(err.max()), tol, tuple(int(x) for x in loc), {"limit": n})


def _pair_coefficients(t: TripleTensor, weight):
    """Accumulate ``sum_{i,j} f(i) g(j) weight(i,j,k) M^{i,j,k}`` through a closure."""
    idx, vals = t.expanded()
    i, j, k = idx.T
    c = weight(i, j, k) * vals

    def apply(f, g):
        out = np.zeros(t.cutoff, dtype=np.complex128)
        np.add.at(out, k, f[i] * g[j] * c)
        return out

    return apply


def qform(f, g, k, t: TripleTensor):
    """``Q_k(f, g) = 1/2 sum_{i,j} f(i) g(j) (lambda_i + lambda_j - lambda_k) M^{i,j,k}``.

    ``k=None`` returns the whole vector over ``k``.
    """
    lam = np.asarray(t.eigenvalues, dtype=float)
    apply = _pair_coefficients(t, lambda i, j, kk: 0.5 * (lam[i] + lam[j] - lam[kk]))
    out = apply(np.asarray(f), np.asarray(g))
    return out if k is None else out[k]


def qform_J(f, g, k, t: TripleTensor, J=None, signed=False):
    """``Q^J_k(f, g) = 1/2 sum f(i) g(j) (J(r_i) + J(r_j) - J(r_k)) M^{i,j,k}``.

    ``r_i`` is the non-negative root ``sqrt(lambda_i)`` by default.  With
    ``signed=True`` (one-dimensional exact tori only) ``r_i = 2 pi w_i`` uses
    the signed weight, i.e. the symbol of ``-i d/dx``; for ``J=None`` the
    combination is then formed from integer weight sums and vanishes exactly
    wherever ``M`` does not.  ``J=None`` means the identity.
    """
    f = np.asarray(f)
    g = np.asarray(g)
    if signed:
        if t.coords is None or t.coords.shape[1] != 1:
            raise ValueError("signed roots need a one-dimensional exact tensor")
        m = t.coords[:, 0].astype(np.int64)
        step = 2.0 * math.pi * float(t.embedding[0, 0])
        if J is None:
            weight = lambda i, j, kk: step * (m[i] + m[j] - m[kk]).astype(float)  # noqa: E731
        else:
            r = step * m.astype(float)
            weight = lambda i, j, kk: J(r[i]) + J(r[j]) - J(r[kk])  # noqa: E731
    else:
        r = np.sqrt(np.maximum(np.asarray(t.eigenvalues, dtype=float), 0.0))
        fn = (lambda x: x) if J is None else J
        weight = lambda i, j, kk: fn(r[i]) + fn(r[j]) - fn(r[kk])  # noqa: E731
    apply = _pair_coefficients(t, lambda i, j, kk: 0.5 * np.asarray(weight(i, j, kk), dtype=np.complex128))
    out = apply(f, g)
    return out if k is None else out[k]


def decay_diagnostic(t: TripleTensor, tolerance=None) -> IdentityReport:
    """Largest ``|M^{i,j,k}|`` over triples with ``sqrt(lambda_k) > sqrt(lambda_i) + sqrt(lambda_j)``."""
    tol = _tol(tolerance, "decay", t)
    r = np.sqrt(np.maximum(np.asarray(t.eigenvalues, dtype=float), 0.0))
    i, j, k = t.index.T
    viol = r[k] > r[i] + r[j] + 1e-9 * (r.max() if len(r) else 0.0)
    if not viol.any():
        return IdentityReport("decay", 0.0, tol, None, {"violating_triples": 0})
    mags = np.where(viol, np.abs(t.values), 0.0)
    p = int(np.argmax(mags))
    return IdentityReport(
        "decay", float(mags[p]), tol, tuple(int(x) for x in t.index[p]), {"violating_triples": int(viol.sum())}
    )


# -- algebraic checks driven by band-limited test functions -------------------


def band_limited(basis: SpectralBasis, t: TripleTensor, power: int, seed=0):
    """Random coefficient vector whose ``power``-th power stays inside the cutoff.

    Active modes satisfy ``power * sqrt(lambda_i) < sqrt(lambda_{N-1})``
    strictly.  Coefficients are real, so mesh functions are real-valued.
    """
    lam = np.maximum(np.asarray(t.eigenvalues, dtype=float), 0.0)
    top = math.sqrt(lam[-1])
    active = power * np.sqrt(lam) < top * (1 - 1e-6)
    active[0] = True
    rng = np.random.default_rng(seed)
    out = np.zeros(t.cutoff, dtype=np.complex128)
    out[active] = rng.uniform(-1.0, 1.0, int(active.sum()))
    return out


def _pointwise(basis: SpectralBasis, coeffs_list, combine, factors):
    """Synthesize functions from coefficients, combine pointwise, and project back."""
    n = len(coeffs_list[0])
    vals, w = basis.sampled(n, factors=factors)
    funcs = [np.asarray(c) @ vals for c in coeffs_list]
    h = combine(*funcs)
    return vals.conj() @ (w * h)


def product_identity(basis, t, tolerance=None, seed=0) -> IdentityReport:
    """Tensor product path vs pointwise multiplication for band-limited inputs."""
    tol = _tol(tolerance, "product", t)
    f = band_limited(basis, t, 2, seed)
    g = band_limited(basis, t, 2, seed + 1)
    via = multiply_via_tensor(f, g, t)
    ref = _pointwise(basis, [f, g], lambda a, b: a * b, factors=3)
    err = np.abs(via - ref)
    return IdentityReport("product", float(err.max()), tol, (int(np.argmax(err)),))


def power_identity(basis, t, tolerance=None, max_power=4, seed=0) -> IdentityReport:
    """``f^p`` via the tensor agrees with the pointwise power, ``2 <= p <= max_power``."""
    tol = _tol(tolerance, "power", t)
    worst, where = 0.0, None
    for p in range(2, max_power + 1):
        f = band_limited(basis, t, p, seed + p)
        via = power_via_tensor(f, p, t)
        ref = _pointwise(basis, [f], lambda a, p=p: a**p, factors=p + 1)
        err = np.abs(via - ref)
        if err.max() >= worst:
            worst, where = float(err.max()), (p, int(np.argmax(err)))
    return IdentityReport("power", worst, tol, where)


def idempotent_identity(basis, t, tolerance=None) -> IdentityReport:
    """The constant function 1 is a fixed point of ``f -> f*f``."""
    tol = _tol(tolerance, "idempotent", t)
    one = np.zeros(t.cutoff, dtype=np.complex128)
    one[0] = math.sqrt(t.vol)
    err = np.abs(one - multiply_via_tensor(one, one, t))
    return IdentityReport("idempotent", float(err.max()), tol, (int(np.argmax(err)),))


def _partner(t: TripleTensor, basis: SpectralBasis):
    """Index of the conjugate eigenfunction: itself for real bases, ``-m`` for characters."""
    n = t.cutoff
    if not basis.is_exact:
        return np.arange(n)
    lookup = {tuple(c): p for p, c in enumerate(basis.coords[:n].tolist())}
    return np.array([lookup.get(tuple((-np.asarray(c)).tolist()), -1) for c in basis.coords[:n].tolist()])


def q0_identity(basis, t, tolerance=None, seed=0) -> IdentityReport:
    """``Q_0(f, f) sqrt(vol) = sum_i f(i) f(conj i) lambda_i``.

    For real bases ``conj i = i`` and this is ``sum f(i)^2 lambda_i``; for
    characters the conjugate of ``e^m`` is ``e^{-m}``.  Relative residual.
    """
    tol = _tol(tolerance, "q0_closed_form", t)
    f = band_limited(basis, t, 1, seed)
    partner = _partner(t, basis)
    ok = partner >= 0
    f[~ok] = 0  # partner outside the cutoff: drop the mode
    lam = np.asarray(t.eigenvalues, dtype=float)
    lhs = qform(f, f, 0, t) * math.sqrt(t.vol)
    rhs = np.sum(f[ok] * f[partner[ok]] * lam[ok])
    res = abs(lhs - rhs) / max(1.0, abs(rhs))
    return IdentityReport("q0_closed_form", float(res), tol, (0,), {"lhs": [lhs.real, lhs.imag], "rhs": [rhs.real, rhs.imag]})


def square_relation_identity(f, g, t: TripleTensor, tolerance=1e-10) -> IdentityReport:
    """Check ``Q_k(f, f) = (g * g)_k`` for a caller-supplied ``g`` with ``g^2 = |df|^2``.

    The library does not construct ``g``; both coefficient vectors come from
    the caller.  The residual is relative to the largest coefficient of
    ``g * g``.  Not part of :func:`run_suite`.
    """
    lhs = qform(f, f, None, t)
    rhs = multiply_via_tensor(np.asarray(g), np.asarray(g), t)
    diff = np.abs(lhs - rhs)
    k = int(np.argmax(diff))
    res = float(diff[k] / max(1.0, np.abs(rhs).max()))
    return IdentityReport("square_relation", res, tolerance, (k,))


def signed_root_identity(t: TripleTensor, tolerance=None) -> IdentityReport:
    """On a 1D exact torus the signed-root form vanishes: ``Q~_k(e^i, e^j) = 0``."""
    tol = _tol(tolerance, "signed_root", t)
    n = t.cutoff
    worst, where = 0.0, None
    eye = np.eye(n)
    for i in range(n):
        for j in range(i, n):
            q = np.abs(qform_J(eye[i], eye[j], None, t, signed=True))
            if q.max() > worst or where is None:
                worst, where = float(q.max()), (i, j, int(np.argmax(q)))
    return IdentityReport("signed_root", worst, tol, where)


def run_suite(basis: SpectralBasis, t: TripleTensor | None = None, cutoff=None) -> list[IdentityReport]:
    """Run every applicable identity check on a basis and its tensor."""
    if t is None:
        t = triple_tensor(basis, cutoff)
    reports = [
        check_normalization(t),
        gradient_identity(basis, t),
        polarization_identity(basis, t),
        decay_diagnostic(t),
        product_identity(basis, t),
        power_identity(basis, t),
        idempotent_identity(basis, t),
        q0_identity(basis, t),
    ]
    if t.source == "exact" and t.coords is not None and t.coords.shape[1] == 1:
        reports.append(signed_root_identity(t))
    return reports


def suite_json(reports) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=1, sort_keys=True)


__all__ = [
    "IdentityReport",
    "check_normalization",
    "gradient_identity",
    "polarization_identity",
    "qform",
    "qform_J",
    "decay_diagnostic",
    "product_identity",
    "power_identity",
    "idempotent_identity",
    "q0_identity",
    "signed_root_identity",
    "square_relation_identity",
    "run_suite",
    "suite_json",
    "fourier_coeffs",
]
