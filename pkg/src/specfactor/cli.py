"""Command-line harness.

Exit codes: 0 success, 2 precondition failure, 3 numerical failure.
JSON outputs are written with sorted keys and carry ``"schema": 1`` and the
validated run configuration, so identical invocations produce identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import digital, measure, numtheory, susy
from .errors import NumericalError, PreconditionError

EXIT_OK, EXIT_PRECONDITION, EXIT_NUMERICAL = 0, 2, 3
SPECTRUM_NAMES = {
    "logprimes": "log-primes",
    "logintegers": "log-integers",
    "primes": "primes",
    "integers": "integers",
    "custom": "custom",
}


def max_d() -> int:
    raw = os.environ.get("SPECFACTOR_MAX_D", "20")
    try:
        return int(raw)
    except ValueError:
        raise PreconditionError(f"SPECFACTOR_MAX_D must be an integer, got {raw!r}")


def _resolve_d(n: int, d: int | None) -> int:
    if n < 2:
        raise PreconditionError(f"N must be >= 2, got {n}")
    if d is None:
        d = max(1, (n - 1).bit_length())
    if d > max_d():
        raise PreconditionError(f"d = {d} exceeds SPECFACTOR_MAX_D = {max_d()}")
    if n > 1 << d:
        raise PreconditionError(f"N = {n} exceeds the cutoff 2^{d} = {1 << d}")
    return d


def _dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _write(path, text: str) -> None:
    Path(path).write_text(text)


def _config(args, **extra) -> dict:
    cfg = {k: v for k, v in vars(args).items() if k not in ("func",)}
    cfg.update(extra)
    return cfg


# --- factor -----------------------------------------------------------------


def _sweep_one(job):
    n, variant, d, seed = job
    run = measure.factorize(n, variant, numtheory.sieve(1 << d), seed)
    return run.to_dict()


def cmd_factor(args) -> int:
    d = _resolve_d(args.n, args.d)
    table = numtheory.sieve(1 << d)
    if args.sweep <= 1:
        run = measure.factorize(args.n, args.variant, table, args.seed)
        print(f"{args.n} = {run.result}")
        if run.result.factors == {args.n: 1}:
            print(f"{args.n} is prime")
        print(f"measurements: {run.measurements}  divisions: {run.divisions}")
        if args.trace:
            doc = run.to_dict()
            doc["config"] = _config(args, d=d)
            _write(args.trace, _dump(doc))
        return EXIT_OK

    jobs = [(args.n, args.variant, d, args.seed + i) for i in range(args.sweep)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            runs = list(pool.map(_sweep_one, jobs, chunksize=max(1, len(jobs) // (4 * args.jobs))))
    else:
        runs = [measure.factorize(args.n, args.variant, table, s).to_dict() for *_, s in jobs]
    counts = sorted({r["counts"]["measurements"] for r in runs})
    results = {json.dumps(r["result"], sort_keys=True) for r in runs}
    print(f"{len(runs)} runs of N = {args.n}, variant {args.variant}")
    print(f"distinct results: {len(results)}  measurement counts seen: {counts}")
    if args.trace:
        _write(args.trace, _dump({"schema": 1, "config": _config(args, d=d), "runs": runs}))
    return EXIT_OK


# --- paths ------------------------------------------------------------------


def cmd_paths(args) -> int:
    d = _resolve_d(args.n, args.d)
    root = measure.enumerate_paths(args.n, numtheory.sieve(1 << d), args.variant)
    paths = list(root.paths())
    leaves = {json.dumps(leaf.found, sort_keys=True) for leaf in root.leaves()}
    print(f"{len(paths)} root-to-leaf paths; first-stage outcomes {sorted(root.children)}")
    for p in paths:
        print("  " + " -> ".join(str(q) for q in p))
    print(f"distinct leaf factorizations: {len(leaves)}")
    if args.out:
        _write(args.out, _dump({"schema": 1, "config": _config(args, d=d), "tree": root.to_dict()}))
    if args.edges:
        with open(args.edges, "w", newline="") as fh:
            writer = csv.DictWriter(fh, ["parent", "child", "parent_n", "child_n", "prime"], lineterminator="\n")
            writer.writeheader()
            writer.writerows(measure.path_edges(root))
    return EXIT_OK


# --- digital ----------------------------------------------------------------


def cmd_synth_digital(args) -> int:
    d = args.d
    if d > max_d():
        raise PreconditionError(f"d = {d} exceeds SPECFACTOR_MAX_D = {max_d()}")
    target = "primes" if args.target == "primes" else "log-primes"
    order = "lexicographic" if args.assignment == "canonical" else "reference"
    cs = digital.synthesize(d, target, order)
    report = digital.verify_couplings(cs)
    ok = report["multiset_match"]
    doc = cs.to_dict()
    doc["config"] = _config(args)
    if args.verify:
        tables = digital.reference_tables()
        if target == "primes" and d in tables:
            reference = tables[d]
            report["reference_table_multiset_match"] = digital.verify_couplings(reference)["multiset_match"]
            report["matches_reference_coefficients"] = bool(np.array_equal(reference.j, cs.j))
        doc["verification"] = report
        print(_dump(report), end="")
    else:
        print(f"d = {d}: {1 << d} couplings, spectrum check {'passed' if ok else 'FAILED'}")
    if args.out:
        _write(args.out, _dump(doc))
    return EXIT_OK if ok else EXIT_NUMERICAL


# --- potentials -------------------------------------------------------------


def _targets(args) -> np.ndarray:
    kind = SPECTRUM_NAMES[args.spectrum]
    if kind == "custom":
        if not args.values:
            raise PreconditionError("--spectrum custom needs --values")
        spec = numtheory.SpectrumSpec("custom", 0, values=tuple(float(v) for v in args.values.split(",")))
    else:
        if args.levels is None:
            raise PreconditionError("--levels is required")
        spec = numtheory.SpectrumSpec(kind, args.levels, include_unity=args.include_unity)
    return numtheory.spectrum_values(spec)


def _grid(args):
    if args.L is None and args.h is None:
        return None
    half = args.L if args.L is not None else susy.DEFAULT_HALF_WIDTH
    return susy.Grid(half, args.h)


def cmd_potential(args) -> int:
    targets = _targets(args)
    pt = susy.build_potential(targets, _grid(args))
    pt.meta["config"] = _config(args)
    pt.meta["well"] = susy.well_profile(pt)
    pt.write_csv(args.out)
    meta_path = args.meta or str(Path(args.out).with_suffix(".json"))
    pt.write_metadata(meta_path)
    print(f"{targets.size} levels, grid [-{pt.half_width:g}, {pt.half_width:g}] step {pt.step:g}, {pt.x.size} nodes")
    print(f"offset {pt.offset:.12g}; Riccati residual max {pt.residual_max:.3g}")
    print(f"wrote {args.out} and {meta_path}")
    return EXIT_OK


def cmd_verify_spectrum(args) -> int:
    meta_path = Path(args.meta) if args.meta else Path(args.csv).with_suffix(".json")
    metadata = json.loads(meta_path.read_text()) if meta_path.exists() else None
    pt = susy.PotentialTable.read_csv(args.csv, metadata)
    report = {"schema": 1, "csv": str(args.csv), "metadata": str(meta_path) if metadata else None}
    if metadata is not None:
        n = args.levels or pt.targets.size
        if n > pt.targets.size:
            raise PreconditionError(f"table was built for {pt.targets.size} levels, asked for {n}")
        levels = susy.recovered_spectrum(pt)[:n]
        expected = pt.targets[:n]
        err = np.abs(np.diff(levels) - np.diff(expected))
        report.update(
            levels=levels.tolist(),
            targets=expected.tolist(),
            spacing_errors=err.tolist(),
            max_spacing_error=float(err.max()) if err.size else 0.0,
        )
    else:
        if not args.levels:
            raise PreconditionError("--levels is required when no metadata file is available")
        levels = susy.eigen_solve(pt, args.levels)
        report.update(levels=levels.tolist(), spacings=np.diff(levels).tolist())
    print(_dump(report), end="")
    if args.out:
        _write(args.out, _dump(report))
    if args.tol is not None and metadata is not None and report["max_spacing_error"] > args.tol:
        print(f"spacing error {report['max_spacing_error']:.3g} exceeds {args.tol:g}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_lloyd(args) -> int:
    sps = susy.build_superpotentials(_targets(args), _grid(args))
    if sps.m == 0:
        raise PreconditionError("need at least two levels")
    xi, _ = sps.derivatives()
    x = float(xi[int(np.argmin(np.abs(xi - args.x)))])
    system = susy.build_lloyd_system(sps, x, args.variant)
    doc = {"schema": 1, "config": _config(args), "system": system.to_dict(),
           "equivalence": susy.lloyd_equivalence_report(sps, args.tol)}
    print(_dump(doc["equivalence"]), end="")
    if args.out:
        _write(args.out, _dump(doc))
    return EXIT_OK


# --- goldbach ---------------------------------------------------------------


def cmd_goldbach(args) -> int:
    report = numtheory.goldbach_check(args.max, args.d)
    doc = {"schema": 1, "config": _config(args), "goldbach": report.to_dict()}
    print(f"even numbers 4..{args.max} as p + q with p, q among the first {1 << args.d} primes: "
          f"{len(report.witnesses)} covered, uncovered {report.uncovered}")
    if args.two_copy_d is not None:
        two = numtheory.two_copy_spectrum(args.two_copy_d)
        doc["two_copy"] = two
        print(f"two-copy spectrum d = {args.two_copy_d}: ln p + ln q identifies p*q exactly: {two['integers_match']}")
    if args.out:
        _write(args.out, _dump(doc))
    return EXIT_OK


# --- parser -----------------------------------------------------------------


def _add_spectrum_args(p):
    p.add_argument("--spectrum", choices=sorted(SPECTRUM_NAMES), default="logprimes")
    p.add_argument("--levels", type=int, help="number of target levels")
    p.add_argument("--values", help="comma-separated levels for --spectrum custom")
    p.add_argument("--include-unity", action="store_true", help="integer spectra start at 1 instead of 2")
    p.add_argument("--L", type=float, help="grid half-width (default: adaptive, starting at 12)")
    p.add_argument("--h", type=float, help="grid step (default 12/512)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="specfactor", description="Factorization by simulated quantum measurements.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("factor", help="factorize N by repeated H1 measurements")
    p.add_argument("n", type=int)
    p.add_argument("--variant", choices=measure.VARIANTS, default="B")
    p.add_argument("--d", type=int, help="qubit count; cutoff 2^d (default: smallest that fits N)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="write the run as JSON")
    p.add_argument("--sweep", type=int, default=1, help="run this many consecutive seeds")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for --sweep")
    p.set_defaults(func=cmd_factor)

    p = sub.add_parser("paths", help="enumerate every measurement-outcome path for N")
    p.add_argument("n", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--variant", choices=measure.VARIANTS, default="B")
    p.add_argument("--out", help="JSON tree")
    p.add_argument("--edges", help="edge-list CSV")
    p.set_defaults(func=cmd_paths)

    p = sub.add_parser("synth-digital", help="couplings of the diagonal prime operator")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--target", choices=("primes", "logprimes"), default="primes")
    p.add_argument("--assignment", choices=("canonical", "paper"), default="canonical")
    p.add_argument("--out")
    p.add_argument("--verify", action="store_true", help="print a verification report")
    p.set_defaults(func=cmd_synth_digital)

    p = sub.add_parser("potential", help="build a potential with a prescribed spectrum")
    _add_spectrum_args(p)
    p.add_argument("--out", required=True, help="CSV of x, V")
    p.add_argument("--meta", help="metadata JSON (default: CSV path with .json suffix)")
    p.set_defaults(func=cmd_potential)

    p = sub.add_parser("verify-spectrum", help="eigenvalues of a potential CSV")
    p.add_argument("csv")
    p.add_argument("--levels", type=int)
    p.add_argument("--meta")
    p.add_argument("--tol", type=float, help="fail (exit 3) if a spacing error exceeds this")
    p.add_argument("--out")
    p.set_defaults(func=cmd_verify_spectrum)

    p = sub.add_parser("lloyd", help="Lloyd-form system and equivalence report")
    _add_spectrum_args(p)
    p.add_argument("--x", type=float, default=1.0, help="sample node")
    p.add_argument("--variant", choices=susy.LLOYD_VARIANTS, default="upper")
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--out")
    p.set_defaults(func=cmd_lloyd)

    p = sub.add_parser("goldbach", help="two-prime sums and the two-copy spectrum")
    p.add_argument("--max", type=int, default=100)
    p.add_argument("--d", type=int, default=5)
    p.add_argument("--two-copy-d", type=int)
    p.add_argument("--out")
    p.set_defaults(func=cmd_goldbach)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (PreconditionError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
