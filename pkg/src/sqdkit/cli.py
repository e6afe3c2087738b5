"""``sqdkit`` command-line front end.

Exit codes: 0 success, 2 input error, 3 eigensolver non-convergence (the
report is still written), 4 a dimension cap was exceeded.

File formats
  FCIDUMP   Molpro-style header (NORB, NELEC, MS2) closed by &END or '/',
            then lines 'value i j k l' with 1-based orbital indices.
  samples   one '<alpha_bits> <beta_bits> <count>' line per bitstring pair;
            leftmost character is orbital 0; '#' starts a comment.
  config    INI file with a [pipeline] section whose keys are the
            lower_snake_case pipeline option names; command-line flags win.
  report    JSON document; floats are written in shortest round-trip form.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from ._threads import get_threads, set_threads
from .configs import SystemSpec, fci_dimension, spin_strings
from .errors import CapExceeded, NoConvergence, SQDError
from .integrals import parse_fcidump, random_hamiltonian
from .pipeline import (
    PipelineConfig,
    binding_energy,
    run_fci_report,
    run_pipeline,
    solver_router,
)
from .sampling import load_samples, sample_exact, save_samples

EXIT_OK, EXIT_INPUT, EXIT_NOCONV, EXIT_CAP = 0, 2, 3, 4

# pipeline options exposed as flags: name -> (type, help)
_PIPELINE_FLAGS = {
    "shots": (int, "shots drawn when sampling on the fly (default 100000)"),
    "recovery_iterations": (int, "configuration-recovery iterations (default 5)"),
    "subgroup_count": (int, "subgroups G per iteration (default 8)"),
    "subgroup_capacity": (int, "configurations per subgroup (default 10000)"),
    "k1": (float, "percent kept per subgroup (default 10)"),
    "k2": (float, "percent of the merged subspace carried over (default 50)"),
    "epsilon": (float, "final amplitude threshold (default 5e-6 trimsqd, 1e-6 extsqd, 0 sqd)"),
    "extension_distance": (int, "2 = extend by single excitations, 0 = no extension"),
    "seed": (lambda s: int(s, 0), "64-bit master seed"),
    "fragment_id": (str, "fragment label mixed into the seed"),
    "early_stop": (float, "stop recovery once |dE| falls below this (0 = off)"),
    "solver_tol": (float, "eigensolver residual tolerance (default 1e-8)"),
    "max_matvecs": (int, "eigensolver matvec budget (default 2000)"),
}


# -- subcommands ------------------------------------------------------------


def cmd_info(args) -> int:
    H = parse_fcidump(args.fcidump)
    dim = fci_dimension(H.spec)
    counts = H.count_nonzero()
    print(f"norb: {H.norb}")
    print(f"electrons: {H.spec.n_electrons} (alpha {H.spec.n_alpha}, beta {H.spec.n_beta})")
    print(f"e_core: {H.e_core!r}")
    print(f"one_electron_nonzero: {counts['one_electron']}")
    print(f"two_electron_nonzero: {counts['two_electron']}")
    print(f"fci_dimension: {dim} ({dim:.2e})")
    print(f"suggested_solver: {solver_router(H.norb, force=True)}")
    return EXIT_OK


def cmd_fci(args) -> int:
    from .oracle import fci_solve

    H = parse_fcidump(args.fcidump)
    res = fci_solve(H, cap=args.cap, method=args.method)
    print(f"fci_energy: {res.ground_energy!r}")
    print(f"dimension: {res.dimension}")
    if args.out:
        doc = {"method": res.method, "ground_energy": res.ground_energy, "dimension": res.dimension}
        Path(args.out).write_text(json.dumps(doc, indent=2) + "\n")
    return EXIT_OK


def cmd_sample(args) -> int:
    H = parse_fcidump(args.fcidump)
    samples = sample_exact(H, args.shots, args.noise_p, args.seed)
    save_samples(samples, args.out)
    print(f"wrote {samples.total} shots ({len(samples)} distinct) to {args.out}")
    return EXIT_OK


def _pipeline_config(args) -> PipelineConfig:
    overrides = {k: getattr(args, k) for k in _PIPELINE_FLAGS}
    if args.method not in ("auto", "fci"):
        overrides["method"] = args.method
    if args.config:
        if not Path(args.config).is_file():
            raise FileNotFoundError(f"config file not found: {args.config}")
        return PipelineConfig.from_file(args.config, **overrides)
    return PipelineConfig.from_mapping({}, **overrides)


def cmd_run(args) -> int:
    for path in (args.fcidump, args.samples):
        if path and not Path(path).is_file():
            raise FileNotFoundError(f"input file not found: {path}")
    H = parse_fcidump(args.fcidump)
    cfg = _pipeline_config(args)
    method = args.method
    if method == "auto":
        method = solver_router(H.norb, force=args.force)
        if method != "fci" and cfg.method != method:
            cfg = cfg.replace(method=method)

    code = EXIT_OK
    if method == "fci":
        report = run_fci_report(H, cfg)
    else:
        if args.samples:
            samples = load_samples(args.samples, H.spec)
        else:
            samples = sample_exact(H, cfg.shots, args.noise_p, cfg.effective_seed)
        try:
            report = run_pipeline(H, samples, cfg)
        except NoConvergence as exc:
            report = exc.result
            print(f"error: {exc}", file=sys.stderr)
            code = EXIT_NOCONV
    report.write(args.report, include_timings=not args.no_timings)
    print(f"method: {report.method}")
    print(f"final_energy: {report.final_energy!r}")
    print(f"final_dimension: {report.final_dimension}")
    print(f"report: {args.report}")
    return code


def cmd_bind(args) -> int:
    de, kcal = binding_energy(args.e_bound, args.e_unbound, args.e_ligand)
    print(f"binding_energy_hartree: {de:.6f}")
    print(f"binding_energy_kcal_per_mol: {kcal:.4f}")
    return EXIT_OK


def synthetic_basis_configs(dim: int, norb: int = 16, nelec: int = 4) -> tuple[SystemSpec, np.ndarray]:
    """Product of the first ceil(sqrt(dim)) alpha and beta strings of (norb, nelec)."""
    strings = spin_strings(norb, nelec)
    side = math.isqrt(max(dim, 1) - 1) + 1
    if side > len(strings):
        raise CapExceeded(f"dimension {dim} needs {side} strings per spin; only {len(strings)} exist")
    s = strings[:side]
    a, b = np.meshgrid(s, s, indexing="ij")
    return SystemSpec(norb, nelec, nelec), np.stack([a.ravel(), b.ravel()], axis=1)


def bench_matvec(basis, H, threads: list[int], repeats: int = 3) -> list[dict]:
    """Best-of-``repeats`` matvec wall time per thread count, with speedup and
    parallel efficiency relative to the first entry."""
    from .sbd import apply_hamiltonian

    v = np.random.default_rng(0).standard_normal(len(basis))
    previous = get_threads()
    rows = []
    try:
        apply_hamiltonian(basis, H, v)  # compile and warm caches
        for n in threads:
            set_threads(n)
            best = math.inf
            for _ in range(repeats):
                t = time.perf_counter()
                apply_hamiltonian(basis, H, v)
                best = min(best, time.perf_counter() - t)
            rows.append({"threads": n, "seconds": best})
    finally:
        set_threads(previous)
    base = rows[0]["seconds"] * rows[0]["threads"]
    for r in rows:
        r["speedup"] = rows[0]["seconds"] / r["seconds"]
        r["efficiency"] = base / (r["seconds"] * r["threads"])
    return rows


def cmd_bench(args) -> int:
    from .sbd import build_basis

    threads = [int(t) for t in args.threads_list.split(",")]
    if args.fcidump:
        from .configs import all_configurations_array

        H = parse_fcidump(args.fcidump)
        configs = all_configurations_array(H.spec, cap=args.cap)
    else:
        spec, configs = synthetic_basis_configs(args.dim)
        H = random_hamiltonian(spec, seed=0)
    basis = build_basis(configs, H)
    rows = bench_matvec(basis, H, threads, args.repeats)
    print(f"dimension: {len(basis)}  hardware_threads: {os.cpu_count()}")
    print(f"{'threads':>8} {'seconds':>10} {'speedup':>8} {'efficiency':>10}")
    for r in rows:
        print(f"{r['threads']:>8d} {r['seconds']:>10.4f} {r['speedup']:>8.2f} {100 * r['efficiency']:>9.1f}%")
    if args.json:
        Path(args.json).write_text(json.dumps({"dimension": len(basis), "rows": rows}, indent=2) + "\n")
    return EXIT_OK


# -- parser -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="sqdkit",
        description=__doc__,
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--threads", type=int, help="kernel threads (overrides SQD_THREADS; default: hardware)")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("info", help="summarize an FCIDUMP")
    s.add_argument("fcidump")
    s.set_defaults(func=cmd_info)

    s = sub.add_parser("fci", help="exact ground state by brute-force full CI")
    s.add_argument("fcidump")
    s.add_argument("--method", choices=("auto", "dense", "lanczos"), default="auto")
    s.add_argument("--cap", type=int, default=10**6, help="largest FCI dimension attempted")
    s.add_argument("--out", help="write {method, ground_energy, dimension} as JSON")
    s.set_defaults(func=cmd_fci)

    s = sub.add_parser("sample", help="draw noisy samples from the exact ground state")
    s.add_argument("fcidump")
    s.add_argument("--shots", type=int, default=100_000)
    s.add_argument("--noise_p", type=float, default=0.0, help="independent bit-flip probability")
    s.add_argument("--seed", type=lambda x: int(x, 0), default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_sample)

    s = sub.add_parser("run", help="run an SQD-family pipeline and write a JSON report")
    s.add_argument("fcidump")
    s.add_argument("--samples", help="sample file; omitted = sample the exact state on the fly")
    s.add_argument("--noise_p", type=float, default=0.0, help="bit-flip probability for on-the-fly sampling")
    s.add_argument("--config", help="INI file with a [pipeline] section")
    s.add_argument("--method", choices=("auto", "fci", "sqd", "extsqd", "trimsqd"), default="trimsqd")
    s.add_argument("--force", action="store_true", help="let 'auto' route fragments above 45 orbitals to trimsqd")
    s.add_argument("--report", required=True, help="output JSON report path")
    s.add_argument("--no_timings", action="store_true", help="omit wall-clock timings (byte-stable reports)")
    for name, (typ, text) in _PIPELINE_FLAGS.items():
        s.add_argument(f"--{name}", type=typ, help=text)
    s.set_defaults(func=cmd_run)

    s = sub.add_parser("bind", help="binding energy E_bound - E_unbound - E_ligand")
    s.add_argument("e_bound", type=float)
    s.add_argument("e_unbound", type=float)
    s.add_argument("e_ligand", type=float)
    s.set_defaults(func=cmd_bind)

    s = sub.add_parser("bench", help="matvec thread scaling")
    s.add_argument("--fcidump", help="benchmark the full FCI basis of this FCIDUMP")
    s.add_argument("--dim", type=int, default=10**6, help="synthetic basis dimension (default 1e6)")
    s.add_argument("--threads_list", default="1,2,4", help="comma-separated thread counts")
    s.add_argument("--repeats", type=int, default=3)
    s.add_argument("--cap", type=int, default=10**7)
    s.add_argument("--json", help="write the scaling table as JSON")
    s.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.threads is not None:
            set_threads(args.threads)
        return args.func(args)
    except CapExceeded as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CAP
    except NoConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NOCONV
    except (SQDError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
