"""Finite-cutoff comparison of two manifolds through their triple-product tensors.

The pipeline matches spectra, groups indices into eigenvalue blocks, compares
unitary-invariant singular values of every block sub-tensor, and, where the
gauge group reduces to signs, searches for an explicit sign gauge carrying one
tensor onto the other.  Verdicts are evidence at the given cutoff, not proofs.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .eigen import SpectralBasis, eigensolve, exact_basis
from .errors import BlockMismatchError, NotIsospectralError
from .lattice import TorusSpec
from .mesh import Mesh
from .tensor import TripleTensor
from .triple import triple_tensor

EXACT_RTOL = 1e-9
MESH_RTOL = 1e-4
SINGULAR_DROP = 1e-10
RATIO_TOL = 1e-6

CONSISTENT = "Consistent"
DISTINGUISHED = "Distinguished"
NOT_ISOSPECTRAL = "NotIsospectral"
INCONCLUSIVE = "Inconclusive"
EXIT_CODES = {CONSISTENT: 0, DISTINGUISHED: 2, NOT_ISOSPECTRAL: 3, INCONCLUSIVE: 4}


# -- eigenvalue blocks --------------------------------------------------------


@dataclass(frozen=True)
class EigBlocks:
    """Contiguous ``[start, stop)`` runs of numerically equal eigenvalues.

    ``complete_until`` is the stop of the last block known to be complete:
    the block containing ``cutoff - 1`` is complete only if a later eigenvalue
    was available and lies outside it.
    """

    ranges: tuple
    representatives: np.ndarray
    cutoff: int
    rtol: float
    complete_until: int

    def __len__(self):
        return len(self.ranges)

    @property
    def sizes(self):
        return [b - a for a, b in self.ranges]

    @property
    def all_simple(self):
        return all(b - a == 1 for a, b in self.ranges)

    def labels(self):
        """Block number of every index below the cutoff."""
        out = np.empty(self.cutoff, dtype=np.int64)
        for n, (a, b) in enumerate(self.ranges):
            out[a:b] = n
        return out

    def complete(self):
        """The blocks restricted to complete ones."""
        keep = [r for r in self.ranges if r[1] <= self.complete_until]
        return EigBlocks(
            tuple(keep), self.representatives[: len(keep)], self.complete_until, self.rtol, self.complete_until
        )


def _close(a, b, rtol, floor):
    return abs(a - b) <= rtol * max(abs(a), abs(b), floor)


def _blocks_of(eigs, n, rtol):
    eigs = np.asarray(eigs, dtype=float)
    floor = 1e-12 * max(float(np.abs(eigs[:n]).max()), 1e-300)
    ranges = []
    start = 0
    for i in range(1, n + 1):
        if i == n or not _close(eigs[i], eigs[i - 1], rtol, floor):
            ranges.append((start, i))
            start = i
    last_start = ranges[-1][0]
    if len(eigs) > n and not _close(eigs[n], eigs[n - 1], rtol, floor):
        complete = n
    else:
        complete = last_start
    reps = np.array([eigs[a:b].mean() for a, b in ranges])
    return EigBlocks(tuple(ranges), reps, n, rtol, complete)


def block_spectra(eigs_a, eigs_b, n, rtol=EXACT_RTOL):
    """Common block structure of two spectra, or :class:`NotIsospectralError`.

    Per-index relative differences must be within ``rtol`` and the block
    boundaries (runs with consecutive relative gaps within ``rtol``) must
    agree.  The error carries the first offending index.
    """
    a = np.asarray(eigs_a, dtype=float)
    b = np.asarray(eigs_b, dtype=float)
    if len(a) < n or len(b) < n:
        raise ValueError(f"both spectra need at least {n} eigenvalues")
    floor = 1e-12 * max(float(np.abs(a[:n]).max()), float(np.abs(b[:n]).max()), 1e-300)
    for i in range(n):
        if not _close(a[i], b[i], rtol, floor):
            raise NotIsospectralError(i, float(a[i]), float(b[i]))
    ba = _blocks_of(a, n, rtol)
    bb = _blocks_of(b, n, rtol)
    if ba.ranges != bb.ranges:
        for ra, rb in zip(ba.ranges, bb.ranges):
            if ra != rb:
                i = min(ra[1], rb[1])
                raise NotIsospectralError(i, float(a[i]), float(b[i]))
    if ba.complete_until != bb.complete_until:
        lim = min(ba.complete_until, bb.complete_until)
        ba = EigBlocks(ba.ranges, ba.representatives, n, rtol, lim)
        bb = EigBlocks(bb.ranges, bb.representatives, n, rtol, lim)
    return ba, bb


# -- gauge assignments --------------------------------------------------------


@dataclass(frozen=True, eq=False)
class GaugeAssignment:
    """A block-diagonal unitary: either a sign per index or a matrix per block."""

    signs: np.ndarray | None = None
    unitaries: tuple | None = None
    undetermined: tuple = ()

    def __post_init__(self):
        if (self.signs is None) == (self.unitaries is None):
            raise ValueError("give exactly one of signs or unitaries")
        if self.signs is not None:
            z = np.asarray(self.signs)
            if not np.all((z == 1) | (z == -1)):
                raise ValueError("signs must be exactly +1 or -1")
            object.__setattr__(self, "signs", z.astype(np.int64))
        else:
            mats = tuple(np.atleast_2d(np.asarray(u, dtype=np.complex128)) for u in self.unitaries)
            for u in mats:
                if u.shape[0] != u.shape[1] or np.abs(u.conj().T @ u - np.eye(len(u))).max() > 1e-9:
                    raise ValueError("block matrices must be unitary to 1e-9")
            object.__setattr__(self, "unitaries", mats)

    @classmethod
    def identity(cls, blocks: EigBlocks):
        return cls(unitaries=tuple(np.eye(b - a) for a, b in blocks.ranges))

    @property
    def is_identity(self):
        if self.signs is not None:
            return bool(np.all(self.signs == 1))
        return all(np.array_equal(u, np.eye(len(u))) for u in self.unitaries)

    def inverse(self):
        if self.signs is not None:
            return self
        return GaugeAssignment(unitaries=tuple(u.conj().T for u in self.unitaries))

    def matrix(self, blocks: EigBlocks):
        """Dense ``N x N`` block-diagonal matrix."""
        self.check(blocks)
        if self.signs is not None:
            return np.diag(self.signs.astype(np.complex128))
        out = np.zeros((blocks.cutoff, blocks.cutoff), dtype=np.complex128)
        for (a, b), u in zip(blocks.ranges, self.unitaries):
            out[a:b, a:b] = u
        return out

    def check(self, blocks: EigBlocks):
        if self.signs is not None:
            if len(self.signs) != blocks.cutoff:
                raise BlockMismatchError(f"{len(self.signs)} signs for cutoff {blocks.cutoff}")
            return
        if len(self.unitaries) != len(blocks):
            raise BlockMismatchError(f"{len(self.unitaries)} matrices for {len(blocks)} blocks")
        for (a, b), u in zip(blocks.ranges, self.unitaries):
            if u.shape != (b - a, b - a):
                raise BlockMismatchError(f"block [{a}, {b}) needs a {b - a}x{b - a} matrix, got {u.shape}")

    def to_dict(self):
        if self.signs is not None:
            return {"signs": [int(z) for z in self.signs], "undetermined": [int(i) for i in self.undetermined]}
        return {
            "unitaries": [[[[float(x.real), float(x.imag)] for x in row] for row in u] for u in self.unitaries],
            "undetermined": [int(i) for i in self.undetermined],
        }


def random_block_unitary(blocks: EigBlocks, rng, real=False) -> GaugeAssignment:
    """Haar-random unitary (or orthogonal, ``real=True``) matrix per block."""
    mats = []
    for a, b in blocks.ranges:
        d = b - a
        z = rng.standard_normal((d, d))
        if not real:
            z = z + 1j * rng.standard_normal((d, d))
        q, r = np.linalg.qr(z)
        ph = np.diag(r) / np.abs(np.diag(r))
        mats.append(q * ph)
    return GaugeAssignment(unitaries=tuple(mats))


def _group_by_blocks(idx, vals, labels):
    """``{(a, b, c): (positions, values)}`` over block triples."""
    keys = labels[idx]
    order = np.lexsort((keys[:, 2], keys[:, 1], keys[:, 0]))
    keys = keys[order]
    idx = idx[order]
    vals = vals[order]
    if len(keys) == 0:
        return {}
    cut = np.flatnonzero(np.any(keys[1:] != keys[:-1], axis=1)) + 1
    out = {}
    for lo, hi in zip(np.r_[0, cut], np.r_[cut, len(keys)]):
        out[tuple(int(x) for x in keys[lo])] = (idx[lo:hi], vals[lo:hi])
    return out


def unitary_action(t: TripleTensor, blocks: EigBlocks, u: GaugeAssignment) -> TripleTensor:
    """The tensor of the rotated basis ``f^i = sum_r u_{ir} e^r``.

    ``M'^{i,j,k} = sum u_{ir} u_{js} conj(u_{kt}) M^{r,s,t}``.  The identity
    assignment returns ``t`` itself.
    """
    if blocks.cutoff != t.cutoff:
        raise BlockMismatchError(f"blocks cover {blocks.cutoff} indices, tensor has cutoff {t.cutoff}")
    u.check(blocks)
    if u.is_identity:
        return t
    if u.signs is not None:
        z = u.signs
        i, j, k = t.index.T
        vals = t.values * (z[i] * z[j] * z[k])
        return TripleTensor(t.cutoff, t.index, vals, t.vol, t.eigenvalues, t.threshold, t.source)

    labels = blocks.labels()
    starts = np.array([a for a, _ in blocks.ranges])
    idx, vals = t.expanded()
    groups = _group_by_blocks(idx, vals, labels)
    mats = u.unitaries
    out_idx, out_val = [], []
    for (a, b, c), (pos, v) in groups.items():
        if a > b:
            continue
        sub = np.zeros((len(mats[a]), len(mats[b]), len(mats[c])), dtype=np.complex128)
        sub[pos[:, 0] - starts[a], pos[:, 1] - starts[b], pos[:, 2] - starts[c]] = v
        rot = np.einsum("ir,js,kt,rst->ijk", mats[a], mats[b], mats[c].conj(), sub, optimize=True)
        ii, jj, kk = np.nonzero(np.abs(rot) > t.threshold)
        gi, gj, gk = ii + starts[a], jj + starts[b], kk + starts[c]
        keep = gi <= gj
        out_idx.append(np.stack([gi[keep], gj[keep], gk[keep]], axis=1))
        out_val.append(rot[ii[keep], jj[keep], kk[keep]])
    index = np.concatenate(out_idx) if out_idx else np.zeros((0, 3), np.int64)
    values = np.concatenate(out_val) if out_val else np.zeros(0, np.complex128)
    return TripleTensor(t.cutoff, index, values, t.vol, t.eigenvalues, t.threshold, t.source)


# -- singular-value invariants ------------------------------------------------


class SingularInvariants(dict):
    """``{(a, b, c): non-increasing singular values}`` with truncation metadata."""

    def __init__(self, data, cutoff, notice=None):
        super().__init__(data)
        self.cutoff = cutoff
        self.notice = notice


def singular_invariants(t: TripleTensor, blocks: EigBlocks, drop=SINGULAR_DROP) -> SingularInvariants:
    """Singular values of every block sub-tensor matricized to ``d_a x (d_b d_c)``.

    Only complete blocks are used; if the tensor runs into an incomplete
    trailing block it is truncated and a notice is attached.  Block triples
    whose singular values all fall below ``drop`` are omitted.
    """
    if blocks.cutoff != t.cutoff:
        raise BlockMismatchError(f"blocks cover {blocks.cutoff} indices, tensor has cutoff {t.cutoff}")
    notice = None
    use = blocks
    if blocks.complete_until < t.cutoff:
        use = blocks.complete()
        t = t.truncate(use.cutoff)
        notice = f"truncated to cutoff {use.cutoff}: the trailing block is incomplete"
    labels = use.labels()
    starts = [a for a, _ in use.ranges]
    sizes = use.sizes
    idx, vals = t.expanded()
    out = {}
    for (a, b, c), (pos, v) in _group_by_blocks(idx, vals, labels).items():
        sub = np.zeros((sizes[a], sizes[b], sizes[c]), dtype=np.complex128)
        sub[pos[:, 0] - starts[a], pos[:, 1] - starts[b], pos[:, 2] - starts[c]] = v
        s = np.linalg.svd(sub.reshape(sizes[a], -1), compute_uv=False)
        s = s[s >= drop]
        if len(s):
            out[(a, b, c)] = s
    return SingularInvariants(out, use.cutoff, notice)


def invariant_mismatches(sa: SingularInvariants, sb: SingularInvariants, tol):
    """Block triples whose singular-value lists differ, with the worst drift.

    Returns ``(mismatched keys ordered by largest block then key, max drift)``.
    """
    worst = 0.0
    bad = []
    for key in set(sa) | set(sb):
        x = sa.get(key, np.zeros(0))
        y = sb.get(key, np.zeros(0))
        if len(x) != len(y):
            bad.append(key)
            worst = max(worst, float(max(x.max(initial=0.0), y.max(initial=0.0))))
            continue
        d = float(np.abs(x - y).max())
        worst = max(worst, d)
        if d > tol:
            bad.append(key)
    bad.sort(key=lambda k: (max(k), k))
    return bad, worst


# -- sign gauge search --------------------------------------------------------


@dataclass
class SignSearch:
    """Outcome of :func:`gauge_search_signs`.

    ``status`` is ``"found"`` or ``"distinguished"`` (an entry contradicts
    every sign gauge).  ``determined`` lists indices whose sign is fixed by a
    nonzero diagonal entry ``t0^{i,i,k}``; ``undetermined`` lists the rest.
    Undetermined signs are solved from off-diagonal entries up to the sign
    characters in ``free``, which act trivially on ``t0`` and are set to +1.
    """

    status: str
    gauge: GaugeAssignment | None
    undetermined: tuple = ()
    evidence: dict | None = None
    inconsistent: tuple = ()
    residual: float = 0.0
    determined: tuple = ()
    free: tuple = ()


def _gf2_solve(rows, rhs, n):
    """Solve ``rows @ x = rhs`` over GF(2); rows are int bitmasks.

    Returns ``(x, free, ok)``; free variables are set to 0.
    """
    pivots = {}  # pivot bit -> (row mask, rhs)
    for r, b in zip(rows, rhs):
        for bit, (pr, pb) in pivots.items():
            if r >> bit & 1:
                r ^= pr
                b ^= pb
        if r == 0:
            if b:
                return None, (), False
            continue
        bit = r.bit_length() - 1
        for key, (pr, pb) in list(pivots.items()):
            if pr >> bit & 1:
                pivots[key] = (pr ^ r, pb ^ b)
        pivots[bit] = (r, b)
    x = [0] * n
    for bit, (r, b) in pivots.items():
        # after full reduction each pivot row holds its pivot plus free bits only
        x[bit] = b
    free = tuple(i for i in range(n) if i not in pivots)
    return x, free, True


def gauge_search_signs(t0: TripleTensor, t1: TripleTensor, blocks=None, eps=1e-9, ratio_tol=RATIO_TOL) -> SignSearch:
    """Find ``z in {+1, -1}^N`` with ``t1^{i,j,k} = z_i z_j z_k t0^{i,j,k}``.

    Diagonal entries fix ``z_k = t1^{i,i,k} / t0^{i,i,k}`` directly; a ratio
    whose magnitude is outside ``1 +- ratio_tol`` or that changes with ``i``
    is returned as evidence that no sign gauge exists.  Signs not fixed this
    way are solved from the remaining entries as a linear system over GF(2).
    The result is verified against every entry of both tensors.
    """
    if not (t0.is_real(1e-12) and t1.is_real(1e-12)):
        raise TypeError("the sign path needs real tensors")
    if t0.cutoff != t1.cutoff:
        raise BlockMismatchError("tensors have different cutoffs")
    n = t0.cutoff
    a = {tuple(map(int, k)): float(v.real) for k, v in zip(t0.index, t0.values) if abs(v) > eps}
    b = {tuple(map(int, k)): float(v.real) for k, v in zip(t1.index, t1.values) if abs(v) > eps}

    def evidence(key, why):
        return SignSearch(
            "distinguished",
            None,
            evidence={"indices": list(key), "reason": why, "t0": a.get(key, 0.0), "t1": b.get(key, 0.0)},
        )

    for key in set(a) ^ set(b):
        return evidence(key, "entry present in only one tensor")

    z = {}
    inconsistent = []
    for (i, j, k), v0 in sorted(a.items()):
        if i != j:
            continue
        ratio = b[(i, j, k)] / v0
        if abs(abs(ratio) - 1.0) > ratio_tol:
            return evidence((i, j, k), f"ratio magnitude {abs(ratio):.9g} is not 1")
        s = 1 if ratio > 0 else -1
        if k in z and z[k] != s:
            inconsistent.append(k)
            return SignSearch(
                "distinguished",
                None,
                evidence={"indices": [i, i, k], "reason": "z_k depends on i"},
                inconsistent=tuple(inconsistent),
            )
        z[k] = s

    # remaining entries: z_i z_j z_k = t1 / t0, i.e. x_i + x_j + x_k = bit over GF(2)
    rows, rhs = [], []
    for key, v0 in a.items():
        ratio = b[key] / v0
        if abs(abs(ratio) - 1.0) > ratio_tol:
            return evidence(key, f"ratio magnitude {abs(ratio):.9g} is not 1")
        mask = 0
        for x in key:
            mask ^= 1 << x
        bit = int(ratio < 0)
        for x in key:
            if x in z and (mask >> x & 1):
                mask ^= 1 << x
                bit ^= int(z[x] < 0)
        if mask == 0:
            if bit:
                return evidence(key, "sign relation contradicts fixed signs")
            continue
        rows.append(mask)
        rhs.append(bit)
    sol, free, ok = _gf2_solve(rows, rhs, n)
    if not ok:
        return SignSearch("distinguished", None, evidence={"reason": "sign relations are inconsistent"})
    signs = np.ones(n, dtype=np.int64)
    for x in range(n):
        if x in z:
            signs[x] = z[x]
        elif sol[x]:
            signs[x] = -1
    undetermined = tuple(x for x in range(n) if x not in z)
    free = tuple(x for x in free if x not in z)

    gauge = GaugeAssignment(signs=signs, undetermined=undetermined)
    worst, where = 0.0, None
    for key in set(a) | set(b):
        i, j, k = key
        d = abs(b.get(key, 0.0) - signs[i] * signs[j] * signs[k] * a.get(key, 0.0))
        if d > worst:
            worst, where = d, key
    scale = max((abs(v) for v in a.values()), default=0.0)
    if worst > max(eps, ratio_tol * scale):
        return evidence(where, f"gauge verification residual {worst:.3g}")
    return SignSearch("found", gauge, undetermined, residual=worst, determined=tuple(sorted(z)), free=free)


# -- mesh-to-character alignment ----------------------------------------------


def align_gauge(mesh_basis: SpectralBasis, reference: SpectralBasis, rtol=EXACT_RTOL) -> SpectralBasis:
    """Rotate each mesh eigenspace onto the sampled characters of ``reference``.

    Within every block of ``reference`` the overlap matrix with the mesh
    vectors is replaced by its nearest unitary (polar factor), so a mesh basis
    that spans the same spaces is carried onto the characters up to
    discretization error.  Returns a complex mesh basis.
    """
    n = min(len(mesh_basis), len(reference))
    blocks = _blocks_of(reference.eigenvalues, n, rtol)
    pts = mesh_basis.mesh.points
    target = reference.evaluate(pts, n).T  # (V, n)
    v = mesh_basis.values[:, :n].astype(np.complex128)
    out = np.empty_like(v)
    for a, b in blocks.ranges:
        overlap = v[:, a:b].conj().T @ (mesh_basis.mass[:, None] * target[:, a:b])
        w, _, zh = np.linalg.svd(overlap)
        out[:, a:b] = v[:, a:b] @ (w @ zh)
    return SpectralBasis(
        eigenvalues=mesh_basis.eigenvalues[:n],
        source="mesh",
        vol=mesh_basis.vol,
        spec=mesh_basis.spec,
        values=out,
        mass=mesh_basis.mass,
        mesh=mesh_basis.mesh,
        clusters=tuple(r for r in blocks.ranges if r[1] - r[0] > 1),
    )


# -- the comparison pipeline --------------------------------------------------


@dataclass
class ComparisonReport:
    verdict: str
    cutoff: int
    analyzed_cutoff: int = 0
    spectra_residual: float = 0.0
    invariant_residual: float | None = None
    tensor_residual: float | None = None
    gauge: GaugeAssignment | None = None
    undetermined: tuple = ()
    free_signs: tuple = ()
    first_mismatch: int | None = None
    first_distinguishing: dict | None = None
    block_count: int = 0
    evidence: dict | None = None
    notices: list = field(default_factory=list)

    @property
    def exit_code(self):
        return EXIT_CODES[self.verdict]

    def to_dict(self):
        return {
            "verdict": self.verdict,
            "cutoff": int(self.cutoff),
            "analyzed_cutoff": int(self.analyzed_cutoff),
            "spectra_residual": float(self.spectra_residual),
            "invariant_residual": None if self.invariant_residual is None else float(self.invariant_residual),
            "tensor_residual": None if self.tensor_residual is None else float(self.tensor_residual),
            "gauge": None if self.gauge is None else self.gauge.to_dict(),
            "undetermined": [int(i) for i in self.undetermined],
            "free_signs": [int(i) for i in self.free_signs],
            "first_mismatch": self.first_mismatch,
            "first_distinguishing": self.first_distinguishing,
            "block_count": int(self.block_count),
            "evidence": self.evidence,
            "notices": list(self.notices),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def default_tolerances(source):
    if source == "exact":
        return {"spectra_rtol": EXACT_RTOL, "singular": 1e-9, "sign_eps": 1e-9, "ratio": RATIO_TOL}
    return {"spectra_rtol": MESH_RTOL, "singular": 1e-6, "sign_eps": 1e-7, "ratio": RATIO_TOL}


def _spectra_residual(a, b, n):
    a = np.asarray(a[:n], dtype=float)
    b = np.asarray(b[:n], dtype=float)
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-300)
    d = np.abs(a - b) / scale
    d[(a == 0) & (b == 0)] = 0.0
    return float(d.max())


def compare_tensors(t0, t1, eigs_a, eigs_b, n=None, tolerances=None) -> ComparisonReport:
    """Run the comparison pipeline on two precomputed tensors.

    ``eigs_a`` and ``eigs_b`` may extend beyond the cutoff; the extra values
    decide whether the trailing block is complete.
    """
    n = t0.cutoff if n is None else n
    tol = default_tolerances(t0.source)
    tol.update(tolerances or {})
    report = ComparisonReport(INCONCLUSIVE, n)
    try:
        ba, _ = block_spectra(eigs_a, eigs_b, n, tol["spectra_rtol"])
    except NotIsospectralError as exc:
        report.verdict = NOT_ISOSPECTRAL
        report.first_mismatch = int(exc.index)
        report.spectra_residual = _spectra_residual(eigs_a, eigs_b, n)
        report.evidence = {"index": int(exc.index), "a": exc.a, "b": exc.b}
        return report
    report.spectra_residual = _spectra_residual(eigs_a, eigs_b, n)
    t0 = t0.truncate(n) if t0.cutoff > n else t0
    t1 = t1.truncate(n) if t1.cutoff > n else t1

    sa = singular_invariants(t0, ba)
    sb = singular_invariants(t1, ba)
    report.analyzed_cutoff = sa.cutoff
    report.block_count = len(ba.complete())
    if sa.notice:
        report.notices.append(sa.notice)
    bad, drift = invariant_mismatches(sa, sb, tol["singular"])
    report.invariant_residual = drift
    if bad:
        key = bad[0]
        ranges = ba.ranges
        report.verdict = DISTINGUISHED
        report.first_distinguishing = {
            "blocks": [int(x) for x in key],
            "cutoff": int(ranges[max(key)][1]),
            "eigenvalues": [float(ba.representatives[x]) for x in key],
            "block_sizes": [int(ranges[x][1] - ranges[x][0]) for x in key],
            "singular_values_a": [float(x) for x in sa.get(key, [])],
            "singular_values_b": [float(x) for x in sb.get(key, [])],
        }
        report.evidence = {"mismatched_block_triples": len(bad)}
        return report

    simple = ba.complete().all_simple
    delta_path = t0.source == "exact" and t1.source == "exact"
    if not (simple or delta_path):
        report.notices.append("multiplicities present: only the singular-invariant test applies")
        return report
    if not (t0.is_real(1e-12) and t1.is_real(1e-12)):
        report.notices.append("complex tensors: the sign gauge search does not apply")
        return report
    cut = sa.cutoff
    search = gauge_search_signs(
        t0.truncate(cut), t1.truncate(cut), ba.complete(), eps=tol["sign_eps"], ratio_tol=tol["ratio"]
    )
    if search.status == "found":
        report.verdict = CONSISTENT
        report.gauge = search.gauge
        report.undetermined = search.undetermined
        report.free_signs = search.free
        report.tensor_residual = search.residual
        return report
    report.evidence = search.evidence
    if simple:
        report.verdict = DISTINGUISHED
    else:
        report.notices.append("no sign gauge found; a block unitary may still relate the tensors")
    return report


def _basis_for(src, count):
    if isinstance(src, TorusSpec):
        return exact_basis(src, count)
    if isinstance(src, Mesh):
        return eigensolve(src, count)
    if isinstance(src, SpectralBasis):
        return src
    raise TypeError(f"unsupported source {type(src).__name__}")


def compare_manifolds(src_a, src_b, n, tolerances=None) -> ComparisonReport:
    """Compare two manifolds (exact tori or meshes) at cutoff ``n``.

    One eigenvalue beyond the cutoff is computed to decide whether the
    trailing block is complete.
    """
    if n < 10:
        raise ValueError("compare_manifolds needs a cutoff of at least 10")
    basis_a = _basis_for(src_a, n + 1)
    basis_b = _basis_for(src_b, n + 1)
    kind = "exact" if basis_a.is_exact and basis_b.is_exact else "mesh"
    tol = default_tolerances(kind)
    tol.update(tolerances or {})
    try:
        block_spectra(basis_a.eigenvalues, basis_b.eigenvalues, n, tol["spectra_rtol"])
    except NotIsospectralError:
        return compare_tensors(_empty(n, basis_a), _empty(n, basis_b), basis_a.eigenvalues, basis_b.eigenvalues, n, tol)
    t0 = triple_tensor(basis_a, n)
    t1 = triple_tensor(basis_b, n)
    return compare_tensors(t0, t1, basis_a.eigenvalues, basis_b.eigenvalues, n, tol)


def _empty(n, basis):
    return TripleTensor(n, np.zeros((0, 3), np.int64), np.zeros(0), basis.vol, source=basis.source)


def first_distinguishing_cutoff(src_a, src_b, max_cutoff, tolerances=None):
    """Smallest block-complete cutoff at which the comparison is Distinguished, or None."""
    report = compare_manifolds(src_a, src_b, max_cutoff, tolerances)
    if report.verdict != DISTINGUISHED or report.first_distinguishing is None:
        return None, report
    return report.first_distinguishing["cutoff"], report


__all__ = [
    "EigBlocks",
    "GaugeAssignment",
    "ComparisonReport",
    "SignSearch",
    "SingularInvariants",
    "block_spectra",
    "unitary_action",
    "singular_invariants",
    "invariant_mismatches",
    "gauge_search_signs",
    "random_block_unitary",
    "align_gauge",
    "compare_tensors",
    "compare_manifolds",
    "first_distinguishing_cutoff",
    "EXIT_CODES",
]
