"""End-to-end SQD, ExtSQD and TrimSQD runs for one fragment Hamiltonian.

Every run follows the same skeleton: a fixed number of recovery
iterations (recover samples with the current occupancies, merge a subsample
with the carried-over set, diagonalize, select what to carry over), then an
optional single-excitation extension of the carried set, a solve over the
extended subspace, and a final solve restricted to |amplitude| > epsilon.
The methods differ only in how the carried set is selected.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .configs import sort_unique
from .errors import EmptyBasis, NoConvergence, Unsupported
from .sampling import (
    OccupancyEstimate,
    SampleSet,
    estimate_occupancy,
    fragment_seed,
    recover_configurations,
    stage_rng,
    subsample,
)
from .sbd import SolverOptions, build_basis, extend_basis, solve_ground_state, trim_by_amplitude

HARTREE_TO_KCAL_PER_MOL = 627.5094740631

METHODS = ("sqd", "extsqd", "trimsqd")
DEFAULT_EPSILON = {"sqd": 0.0, "extsqd": 1e-6, "trimsqd": 5e-6}

# stage keys for the per-iteration random streams
_RECOVER, _SUBSAMPLE, _PARTITION = 0, 1, 2


@dataclass
class PipelineConfig:
    method: str = "trimsqd"
    shots: int = 100_000
    recovery_iterations: int = 5
    subgroup_count: int = 8
    subgroup_capacity: int = 10_000
    k1: float = 10.0
    k2: float = 50.0
    # None selects the per-method default
    epsilon: float | None = None
    # 2 = add all single excitations (Hamming distance 2); 0 = no extension
    extension_distance: int = 2
    seed: int = 0
    fragment_id: str = ""
    # stop the recovery loop once |dE| between iterations drops below this; 0 = never
    early_stop: float = 0.0
    solver_tol: float = 1e-8
    max_matvecs: int = 2000

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        for name in ("k1", "k2"):
            v = getattr(self, name)
            if not 0 < v <= 100:
                raise ValueError(f"{name} must lie in (0, 100], got {v}")
        if self.epsilon is not None and not self.epsilon >= 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        for name in ("shots", "recovery_iterations", "subgroup_count", "subgroup_capacity", "max_matvecs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.extension_distance not in (0, 2):
            raise ValueError(f"extension_distance must be 2 (singles) or 0 (disabled), got {self.extension_distance}")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.early_stop < 0 or self.solver_tol <= 0:
            raise ValueError("early_stop must be >= 0 and solver_tol > 0")

    @property
    def resolved_epsilon(self) -> float:
        return DEFAULT_EPSILON[self.method] if self.epsilon is None else float(self.epsilon)

    @property
    def effective_seed(self) -> int:
        return fragment_seed(self.seed, self.fragment_id) if self.fragment_id else self.seed

    def solver_options(self) -> SolverOptions:
        return SolverOptions(tol=self.solver_tol, max_matvecs=self.max_matvecs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["epsilon"] = self.resolved_epsilon
        return d

    def replace(self, **changes) -> PipelineConfig:
        d = asdict(self)
        d.update({k: v for k, v in changes.items() if v is not None})
        return PipelineConfig(**d)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> PipelineConfig:
        """Read a ``[pipeline]`` section of ``key = value`` lines; ``overrides`` win."""
        parser = configparser.ConfigParser()
        if not parser.read(path):
            raise FileNotFoundError(path)
        if not parser.has_section("pipeline"):
            raise ValueError(f"{path}: missing [pipeline] section")
        return cls.from_mapping(dict(parser["pipeline"]), **overrides)

    @classmethod
    def from_mapping(cls, raw: dict, **overrides) -> PipelineConfig:
        known = {f.name: f for f in fields(cls)}
        values = {}
        for key, text in raw.items():
            if key not in known:
                raise ValueError(f"unknown pipeline key {key!r}")
            values[key] = _coerce(key, text)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**values)


def _coerce(key: str, text):
    if not isinstance(text, str):
        return text
    text = text.strip()
    if key in ("method", "fragment_id"):
        return text
    if key == "epsilon":
        return None if text.lower() in ("", "auto", "none") else float(text)
    if key in ("k1", "k2", "early_stop", "solver_tol"):
        return float(text)
    return int(text, 0)


# -- reporting ---------------------------------------------------------------


class PhaseTimer:
    """Accumulates wall-clock seconds per named phase.

    ``timer.phase(name)`` is a reusable context manager; entering one phase
    while another is open is not supported.  Time spent between phases is
    booked under ``overhead`` so the phases add up to the elapsed time.
    """

    def __init__(self):
        self.phases: dict[str, float] = {}
        self._start = self._mark = time.perf_counter()
        self._name = ""

    def phase(self, name: str) -> PhaseTimer:
        self._name = name
        return self

    def _book(self, name: str) -> None:
        now = time.perf_counter()
        self.phases[name] = self.phases.get(name, 0.0) + now - self._mark
        self._mark = now

    def __enter__(self):
        self._book("overhead")
        return self

    def __exit__(self, *exc):
        self._book(self._name)
        return False

    def summary(self) -> dict:
        total = time.perf_counter() - self._start
        covered = sum(self.phases.values())
        return {
            "phases": dict(self.phases),
            "total": total,
            "coverage": covered / total if total > 0 else 1.0,
        }


@dataclass
class IterationRecord:
    iteration: int
    recovered_unique: int
    pool_dimension: int
    subgroup_dimensions: list[int]
    subgroup_energies: list[float]
    merged_dimension: int | None
    merged_energy: float | None
    carryover_dimension: int


@dataclass
class EnergyReport:
    method: str
    final_energy: float
    final_dimension: int
    extended_dimension: int
    extended_energy: float
    iterations: list[IterationRecord] = field(default_factory=list)
    matvec_counts: dict = field(default_factory=dict)
    timings: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)
    converged: bool = True
    retained_digest: str = ""
    retained: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.final_dimension > self.extended_dimension:
            raise ValueError("final dimension exceeds extended dimension")
        if not (math.isfinite(self.final_energy) and math.isfinite(self.extended_energy)):
            raise ValueError("report energies must be finite")

    def to_dict(self, *, include_timings: bool = True) -> dict:
        d = {
            "method": self.method,
            "final_energy": self.final_energy,
            "final_dimension": self.final_dimension,
            "extended_energy": self.extended_energy,
            "extended_dimension": self.extended_dimension,
            "converged": self.converged,
            "iterations": [asdict(r) for r in self.iterations],
            "matvec_counts": self.matvec_counts,
            "retained_digest": self.retained_digest,
            "seeds": self.seeds,
            "config": self.config,
            "provenance": self.provenance,
        }
        if include_timings:
            d["timings"] = self.timings
        return d

    def to_json(self, *, include_timings: bool = True) -> str:
        # float repr is the shortest string that round-trips the double exactly
        return json.dumps(self.to_dict(include_timings=include_timings), indent=2, allow_nan=False) + "\n"

    def write(self, path: str | Path, *, include_timings: bool = True) -> None:
        Path(path).write_text(self.to_json(include_timings=include_timings))


def _provenance() -> dict:
    import numba
    import scipy

    from . import __version__
    from ._threads import get_threads

    return {
        "sqdkit": __version__,
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "numba": numba.__version__,
        "python": platform.python_version(),
        "threads": get_threads(),
    }


def _digest(configs: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(configs, dtype="<u8").tobytes()).hexdigest()


# -- the shared driver ----------------------------------------------------------


class _Run:
    def __init__(self, H, cfg: PipelineConfig):
        self.H = H
        self.opts = cfg.solver_options()
        self.matvecs: dict[str, int] = {}
        self.converged = True

    def solve(self, configs: np.ndarray, label: str):
        basis = build_basis(configs, self.H)
        res = solve_ground_state(basis, self.H, self.opts, raise_on_failure=False)
        self.matvecs[label] = self.matvecs.get(label, 0) + res.matvec_count
        self.converged &= res.converged
        return basis, res


def _partition(pool: np.ndarray, cfg: PipelineConfig, rng) -> list[np.ndarray]:
    """Seeded shuffle, then contiguous split into G groups (more if a group
    would exceed the capacity); empty groups are dropped."""
    groups = max(cfg.subgroup_count, math.ceil(len(pool) / cfg.subgroup_capacity))
    shuffled = pool[rng.permutation(len(pool))]
    return [g for g in np.array_split(shuffled, groups) if len(g)]


def _mean_occupancy(occs: list[OccupancyEstimate]) -> OccupancyEstimate:
    return OccupancyEstimate(np.mean([o.alpha for o in occs], axis=0), np.mean([o.beta for o in occs], axis=0))


def _run(H, samples: SampleSet, cfg: PipelineConfig) -> EnergyReport:
    timer = PhaseTimer()
    if samples.total == 0:
        raise EmptyBasis("no samples")
    spec = H.spec
    seed = cfg.effective_seed
    run = _Run(H, cfg)
    occ = OccupancyEstimate.uniform(spec)
    carry = np.empty((0, 2), dtype=np.uint64)
    records: list[IterationRecord] = []
    prev_energy = None
    budget = cfg.subgroup_capacity * (1 if cfg.method == "sqd" else cfg.subgroup_count)

    for it in range(cfg.recovery_iterations):
        with timer.phase("recovery"):
            recovered = recover_configurations(samples, occ, spec, stage_rng(seed, it, _RECOVER))
            assert recovered.total == samples.total and recovered.valid_mask(spec).all()
        with timer.phase("merge"):
            drawn = subsample(recovered, max(1, budget - len(carry)), stage_rng(seed, it, _SUBSAMPLE))
            pool = sort_unique(np.concatenate([drawn, carry]))

        sub_dims: list[int] = []
        sub_energies: list[float] = []
        merged_dim = merged_energy = None
        if cfg.method == "sqd":
            with timer.phase("pool_solve"):
                basis, res = run.solve(pool, "pool_solve")
                carry = trim_by_amplitude(basis, res.vector, top_percent=cfg.k1)
                occ = estimate_occupancy(basis, res.vector)
            merged_dim, merged_energy = len(basis), res.energy
            energy = res.energy
            last_pool = (basis, res)
        else:
            with timer.phase("subgroup_solves"):
                kept, occs = [], []
                for g in _partition(pool, cfg, stage_rng(seed, it, _PARTITION)):
                    basis, res = run.solve(g, "subgroup_solves")
                    sub_dims.append(len(basis))
                    sub_energies.append(res.energy)
                    kept.append(trim_by_amplitude(basis, res.vector, top_percent=cfg.k1))
                    if cfg.method == "extsqd":
                        occs.append(estimate_occupancy(basis, res.vector))
                union = sort_unique(np.concatenate(kept))
            if cfg.method == "trimsqd":
                with timer.phase("merged_solve"):
                    basis, res = run.solve(union, "merged_solve")
                    carry = trim_by_amplitude(basis, res.vector, top_percent=cfg.k2)
                    occ = estimate_occupancy(basis, res.vector)
                merged_dim, merged_energy = len(basis), res.energy
                energy = res.energy
            else:
                carry = union
                occ = _mean_occupancy(occs)
                energy = min(sub_energies)

        records.append(
            IterationRecord(
                iteration=it,
                recovered_unique=len(recovered),
                pool_dimension=len(pool),
                subgroup_dimensions=sub_dims,
                subgroup_energies=sub_energies,
                merged_dimension=merged_dim,
                merged_energy=merged_energy,
                carryover_dimension=len(carry),
            )
        )
        if cfg.early_stop > 0 and prev_energy is not None and abs(energy - prev_energy) < cfg.early_stop:
            break
        prev_energy = energy

    if cfg.method == "sqd":
        # plain SQD reports the last pool; no extension
        ext_basis, ext_res = last_pool
    else:
        with timer.phase("extended_solve"):
            extended = carry
            if cfg.extension_distance == 2:
                extended = extend_basis(build_basis(carry, H), H, max_distance=2)
            ext_basis, ext_res = run.solve(extended, "extended_solve")
    with timer.phase("final_solve"):
        final_set = trim_by_amplitude(ext_basis, ext_res.vector, threshold=cfg.resolved_epsilon)
        if len(final_set) == len(ext_basis):
            final_basis, final_res = ext_basis, ext_res
        else:
            final_basis, final_res = run.solve(final_set, "final_solve")

    with timer.phase("report"):
        report = EnergyReport(
            method=cfg.method,
            final_energy=final_res.energy,
            final_dimension=len(final_basis),
            extended_dimension=len(ext_basis),
            extended_energy=ext_res.energy,
            iterations=records,
            matvec_counts={**run.matvecs, "total": sum(run.matvecs.values())},
            seeds={"master": cfg.seed, "effective": seed},
            config=cfg.to_dict(),
            provenance=_provenance(),
            converged=run.converged,
            retained_digest=_digest(final_basis.configs),
            retained=final_basis.configs,
        )
    report.timings = timer.summary()
    if not report.converged:
        raise NoConvergence("an eigensolve did not reach the residual tolerance", report)
    return report


def run_trimsqd(H, samples: SampleSet, cfg: PipelineConfig) -> EnergyReport:
    """Top-k1% per subgroup, merged solve, top-k2% carried over."""
    return _run(H, samples, cfg.replace(method="trimsqd") if cfg.method != "trimsqd" else cfg)


def run_extsqd(H, samples: SampleSet, cfg: PipelineConfig) -> EnergyReport:
    """Independent subgroup solves; the union of per-subgroup top-k1% sets is carried over."""
    return _run(H, samples, cfg.replace(method="extsqd") if cfg.method != "extsqd" else cfg)


def run_sqd(H, samples: SampleSet, cfg: PipelineConfig) -> EnergyReport:
    """Single pool solve per iteration, top-k1% carried over; the last pool is
    the reported subspace (no extension)."""
    return _run(H, samples, cfg.replace(method="sqd") if cfg.method != "sqd" else cfg)


RUNNERS = {"sqd": run_sqd, "extsqd": run_extsqd, "trimsqd": run_trimsqd}


def run_pipeline(H, samples: SampleSet, cfg: PipelineConfig) -> EnergyReport:
    return RUNNERS[cfg.method](H, samples, cfg)


def run_fci_report(H, cfg: PipelineConfig | None = None) -> EnergyReport:
    """Oracle FCI wrapped in the report format (the router's ``fci`` branch)."""
    from .oracle import fci_solve

    timer = PhaseTimer()
    with timer.phase("fci"):
        res = fci_solve(H)
    seed = cfg.seed if cfg else 0
    report = EnergyReport(
        method="fci",
        final_energy=res.ground_energy,
        final_dimension=res.dimension,
        extended_dimension=res.dimension,
        extended_energy=res.ground_energy,
        seeds={"master": seed, "effective": cfg.effective_seed if cfg else seed},
        config=cfg.to_dict() if cfg else {},
        provenance=_provenance(),
        retained_digest=_digest(res.configs),
    )
    report.timings = timer.summary()
    return report


# -- routing and binding energies --------------------------------------------


FCI_BELOW = 13
TRIMSQD_MAX = 45


def solver_router(norb: int, *, force: bool = False) -> str:
    """``fci`` below 13 orbitals, ``trimsqd`` up to 45; larger needs ``force``."""
    if norb < 1:
        raise ValueError("orbital count must be >= 1")
    if norb < FCI_BELOW:
        return "fci"
    if norb <= TRIMSQD_MAX or force:
        return "trimsqd"
    raise Unsupported(f"{norb} orbitals exceeds the supported maximum of {TRIMSQD_MAX}")


def binding_energy(e_bound: float, e_unbound: float, e_ligand: float) -> tuple[float, float]:
    """(E_bound - E_unbound - E_ligand) in Hartree and kcal/mol."""
    for v in (e_bound, e_unbound, e_ligand):
        if not math.isfinite(v):
            raise ValueError("energies must be finite")
    de = e_bound - e_unbound - e_ligand
    return de, de * HARTREE_TO_KCAL_PER_MOL

