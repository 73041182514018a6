"""Command-line front end.

Subcommands print JSON (default) or plain text and use exit codes as their
primary result: ``compare`` maps verdicts to 0/2/3/4, ``verify`` returns 0
only if every identity passes, malformed input exits 64 and unsupported
dimensions exit 65.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .compare import compare_manifolds
from .eigen import eigensolve, exact_basis
from .errors import AliasingError, InvalidSpecError, SolverError, UnsupportedDimensionError
from .invariants import run_suite
from .lattice import lattice_congruent, load_spec
from .mesh import build_torus_mesh
from .pairs import load_bundled
from .tensor import TripleTensor
from .triple import triple_tensor

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_USAGE = 64
EXIT_UNSUPPORTED = 65
BUNDLED_PREFIX = "bundled:"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class RunConfig:
    command: str
    spec: str | None
    spec_b: str | None
    cutoff: int
    resolution: int
    mesh: bool
    rtol: float | None
    threshold: float | None
    out: str | None
    fmt: str
    tensor: str | None = None

    @classmethod
    def from_args(cls, args):
        cfg = cls(
            command=args.command,
            spec=args.spec,
            spec_b=getattr(args, "spec_b", None),
            cutoff=args.cutoff,
            resolution=args.resolution,
            mesh=args.mesh,
            rtol=getattr(args, "rtol", None),
            threshold=getattr(args, "threshold", None),
            out=getattr(args, "out", None),
            fmt=args.format,
            tensor=getattr(args, "tensor", None),
        )
        if cfg.cutoff is not None and cfg.cutoff < 1:
            raise UsageError("cutoff must be at least 1")
        for p in (cfg.spec, cfg.spec_b, cfg.tensor):
            if p is not None and not p.startswith(BUNDLED_PREFIX) and not Path(p).is_file():
                raise UsageError(f"no such file: {p}")
        return cfg


def _load(path):
    if path.startswith(BUNDLED_PREFIX):
        try:
            return load_bundled(path[len(BUNDLED_PREFIX) :])
        except FileNotFoundError as exc:
            raise UsageError(f"no bundled spec named {path[len(BUNDLED_PREFIX):]!r}") from exc
    return load_spec(path)


def _basis(cfg, spec, count):
    if cfg.mesh:
        return eigensolve(build_torus_mesh(spec, cfg.resolution), count)
    return exact_basis(spec, count)


def _emit(cfg, payload, text):
    out = json.dumps(payload, indent=1, sort_keys=True) + "\n" if cfg.fmt == "json" else text
    if cfg.out:
        Path(cfg.out).write_text(out)
    else:
        sys.stdout.write(out)


def cmd_spectrum(cfg):
    spec = _load(cfg.spec)
    basis = _basis(cfg, spec, cfg.cutoff)
    lam = basis.eigenvalues
    coords = None if basis.coords is None else basis.coords.tolist()
    lines = []
    for i, ev in enumerate(lam):
        extra = "" if coords is None else " " + " ".join(str(c) for c in coords[i])
        lines.append(f"{i} {float(ev)!r}{extra}")
    payload = {
        "source": basis.source,
        "cutoff": len(lam),
        "volume": float(basis.vol),
        "eigenvalues": [float(x) for x in lam],
        "coords": coords,
        "resolution": cfg.resolution if cfg.mesh else None,
    }
    _emit(cfg, payload, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_triple(cfg):
    spec = _load(cfg.spec)
    basis = _basis(cfg, spec, cfg.cutoff)
    t = triple_tensor(basis, cfg.cutoff, cfg.threshold)
    text = t.dumps()
    if cfg.out:
        Path(cfg.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_verify(cfg):
    spec = _load(cfg.spec)
    basis = _basis(cfg, spec, cfg.cutoff)
    if cfg.tensor:
        try:
            loaded = TripleTensor.load(cfg.tensor)
        except ValueError as exc:
            raise UsageError(f"{cfg.tensor}: {exc}") from exc
        if loaded.cutoff != cfg.cutoff:
            raise UsageError(f"tensor cutoff {loaded.cutoff} does not match -N {cfg.cutoff}")
        t = TripleTensor(
            loaded.cutoff,
            loaded.index,
            loaded.values,
            loaded.vol,
            eigenvalues=basis.eigenvalues,
            threshold=loaded.threshold,
            source=loaded.source,
        )
    else:
        t = triple_tensor(basis, cfg.cutoff, cfg.threshold)
    reports = run_suite(basis, t)
    ok = all(r.passed for r in reports)
    payload = [r.to_dict() for r in reports]
    text = "".join(
        f"{'PASS' if r.passed else 'FAIL'} {r.identity} residual={r.residual:.3e} tol={r.tolerance:.1e}\n"
        for r in reports
    )
    _emit(cfg, payload, text)
    return EXIT_OK if ok else EXIT_FAILED


def cmd_compare(cfg):
    a = _load(cfg.spec)
    b = _load(cfg.spec_b)
    if cfg.mesh:
        a = build_torus_mesh(a, cfg.resolution)
        b = build_torus_mesh(b, cfg.resolution)
    tol = {} if cfg.rtol is None else {"spectra_rtol": cfg.rtol}
    report = compare_manifolds(a, b, cfg.cutoff, tol)
    if report.first_mismatch is not None:
        text = f"{report.verdict}: spectra differ at index {report.first_mismatch}\n"
    else:
        text = f"{report.verdict} at cutoff {report.analyzed_cutoff}"
        if report.analyzed_cutoff is not None and report.analyzed_cutoff < report.cutoff:
            text += f" (requested {report.cutoff}, trailing eigenvalue block incomplete)"
        text += "\n"
    if report.first_distinguishing:
        fd = report.first_distinguishing
        text += f"first distinguishing block triple {fd['blocks']} at cutoff {fd['cutoff']}\n"
    _emit(cfg, report.to_dict(), text)
    return report.exit_code


def cmd_congruence(cfg):
    a = _load(cfg.spec)
    b = _load(cfg.spec_b)
    found = lattice_congruent(a, b)
    if found is None:
        payload = {"congruent": False, "matrix": None, "det": None, "coord_map": None}
        text = "none\n"
    else:
        mat = np.asarray(found.matrix, dtype=float)
        payload = {
            "congruent": True,
            "matrix": mat.tolist(),
            "det": float(found.det),
            "coord_map": np.asarray(found.coord_map).astype(int).tolist(),
        }
        rows = "\n".join(" ".join(f"{x: .12f}" for x in row) for row in mat)
        text = f"{rows}\ndet {found.det:+.12f}\n"
    _emit(cfg, payload, text)
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "triple": cmd_triple,
    "verify": cmd_verify,
    "compare": cmd_compare,
    "congruence": cmd_congruence,
}
DEFAULT_CUTOFF = {"spectrum": 10, "triple": 10, "verify": 20, "compare": 60, "congruence": None}


def build_parser():
    parser = _Parser(prog="spectriples", description="Spectral triple-product tensors of flat tori.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, pair=False, backend=True):
        p.add_argument("--spec", required=True, help="torus spec JSON (or bundled:NAME)")
        if pair:
            p.add_argument("--spec-b", required=True, help="second torus spec JSON")
        if backend:
            p.add_argument("-N", "--cutoff", type=int, default=None, help="number of eigenpairs")
            group = p.add_mutually_exclusive_group()
            group.add_argument("--mesh", action="store_true", help="finite-difference mesh backend")
            group.add_argument("--exact", dest="mesh", action="store_false", help="exact lattice backend (default)")
            p.add_argument("-R", "--resolution", type=int, default=64, help="mesh points per direction")
        p.add_argument("--format", choices=("json", "text"), default="json")
        p.add_argument("--out", default=None, help="write output here instead of stdout")

    p = sub.add_parser("spectrum", help="list eigenvalues")
    common(p)
    p = sub.add_parser("triple", help="write a tensor dump")
    common(p)
    p.add_argument("--threshold", type=float, default=None, help="drop entries below this magnitude")
    p = sub.add_parser("verify", help="run the identity suite")
    common(p)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--tensor", default=None, help="check this tensor dump instead of computing one")
    p = sub.add_parser("compare", help="compare two tori through their tensors")
    common(p, pair=True)
    p.add_argument("--rtol", type=float, default=None, help="eigenvalue matching tolerance")
    p = sub.add_parser("congruence", help="search for a lattice congruence")
    common(p, pair=True, backend=False)
    return parser


def _thread_limit():
    raw = os.environ.get("SPECTRIPLES_THREADS")
    if not raw:
        return contextlib.nullcontext()
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"SPECTRIPLES_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise UsageError("SPECTRIPLES_THREADS must be positive")
    from threadpoolctl import threadpool_limits

    return threadpool_limits(limits=n)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "cutoff"):
        args.cutoff, args.resolution, args.mesh = None, None, False
    if args.cutoff is None:
        args.cutoff = DEFAULT_CUTOFF[args.command]
    try:
        cfg = RunConfig.from_args(args)
        with _thread_limit():
            return COMMANDS[cfg.command](cfg)
    except (UsageError, InvalidSpecError, AliasingError) as exc:
        print(f"spectriples: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnsupportedDimensionError as exc:
        print(f"spectriples: unsupported: {exc}", file=sys.stderr)
        return EXIT_UNSUPPORTED
    except SolverError as exc:
        print(f"spectriples: solver failed: {exc}", file=sys.stderr)
        return EXIT_FAILED
    except ValueError as exc:
        print(f"spectriples: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


__all__ = ["main", "build_parser", "RunConfig"]
