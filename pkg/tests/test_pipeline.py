from __future__ import annotations

import json
import math

import numpy as np
import pytest

from sqdkit.configs import SystemSpec, all_configurations_array
from sqdkit.errors import NoConvergence, Unsupported
from sqdkit.integrals import random_hamiltonian
from sqdkit.oracle import fci_solve
from sqdkit.pipeline import (
    EnergyReport,
    PipelineConfig,
    binding_energy,
    run_extsqd,
    run_fci_report,
    run_pipeline,
    run_sqd,
    run_trimsqd,
    solver_router,
)
from sqdkit.sampling import SampleSet, sample_exact


def full_coverage(spec: SystemSpec) -> SampleSet:
    return SampleSet.from_configs(spec.norb, all_configurations_array(spec))


class TestConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert (cfg.method, cfg.recovery_iterations, cfg.subgroup_count, cfg.subgroup_capacity) == ("trimsqd", 5, 8, 10_000)
        assert (cfg.k1, cfg.k2, cfg.extension_distance) == (10.0, 50.0, 2)
        assert cfg.resolved_epsilon == 5e-6
        assert PipelineConfig(method="extsqd").resolved_epsilon == 1e-6
        assert PipelineConfig(method="extsqd", epsilon=0.0).resolved_epsilon == 0.0

    @pytest.mark.parametrize(
        "bad",
        [dict(k1=0), dict(k2=101), dict(epsilon=-1e-9), dict(subgroup_count=0), dict(method="dmrg"),
         dict(extension_distance=4), dict(seed=-1), dict(seed=2**64)],
    )
    def test_validation(self, bad):
        with pytest.raises(ValueError):
            PipelineConfig(**bad)

    def test_from_file_with_overrides(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[pipeline]\nmethod = extsqd\nk1 = 25\nseed = 0x10\nepsilon = auto\nsubgroup_count = 3\n")
        cfg = PipelineConfig.from_file(path, subgroup_count=2)
        assert (cfg.method, cfg.k1, cfg.seed, cfg.subgroup_count) == ("extsqd", 25.0, 16, 2)
        assert cfg.epsilon is None and cfg.resolved_epsilon == 1e-6

    def test_unknown_key(self, tmp_path):
        path = tmp_path / "run.ini"
        path.write_text("[pipeline]\nk3 = 1\n")
        with pytest.raises(ValueError, match="k3"):
            PipelineConfig.from_file(path)

    def test_fragment_seed(self):
        a = PipelineConfig(seed=1, fragment_id="f1").effective_seed
        assert a != PipelineConfig(seed=1, fragment_id="f2").effective_seed
        assert PipelineConfig(seed=1).effective_seed == 1


class TestExactness:
    @pytest.mark.parametrize("run", [run_trimsqd, run_extsqd, run_sqd])
    def test_tiny_full_coverage(self, run):
        spec = SystemSpec(2, 1, 1)
        H = random_hamiltonian(spec, 3)
        rep = run(H, full_coverage(spec), PipelineConfig(epsilon=0.0, seed=1))
        assert rep.final_energy == pytest.approx(fci_solve(H).ground_energy, abs=1e-9)

    @pytest.mark.parametrize("method", ["trimsqd", "extsqd"])
    def test_full_coverage_without_trimming(self, method, h_633):
        cfg = PipelineConfig(method=method, k1=100, k2=100, epsilon=0.0, seed=2)
        rep = run_pipeline(h_633, full_coverage(h_633.spec), cfg)
        assert rep.final_energy == pytest.approx(fci_solve(h_633).ground_energy, abs=1e-9)


class TestEquivalences:
    def _setup(self):
        H = random_hamiltonian(SystemSpec(6, 3, 3), 5)
        return H, sample_exact(H, 20_000, 0.02, seed=5)

    def test_trimsqd_degenerates_to_sqd(self):
        H, s = self._setup()
        base = dict(subgroup_count=1, k1=100, k2=100, extension_distance=0, epsilon=0.0, seed=3)
        t = run_trimsqd(H, s, PipelineConfig(method="trimsqd", **base))
        q = run_sqd(H, s, PipelineConfig(method="sqd", **base))
        assert abs(t.final_energy - q.final_energy) <= 1e-10
        assert t.retained_digest == q.retained_digest

    def test_extsqd_matches_trimsqd_on_degenerate_parameters(self):
        H, s = self._setup()
        base = dict(subgroup_count=1, k1=100, k2=100, epsilon=1e-6, seed=4)
        t = run_trimsqd(H, s, PipelineConfig(method="trimsqd", **base))
        e = run_extsqd(H, s, PipelineConfig(method="extsqd", **base))
        assert abs(t.final_energy - e.final_energy) <= 1e-10


class TestNoisy:
    def test_chemical_accuracy_m6(self):
        spec = SystemSpec(6, 3, 3)
        H = random_hamiltonian(spec, 101)
        s = sample_exact(H, 10**5, 0.02, seed=1)
        cfg = PipelineConfig(subgroup_count=1, k1=100, k2=50, seed=1)
        rep = run_trimsqd(H, s, cfg)
        assert abs(rep.final_energy - fci_solve(H).ground_energy) < 1.6e-3
        assert rep.final_dimension <= rep.extended_dimension

    def test_paired_regression_m8(self):
        # frozen from a reference run of this code; tracks drift, asserts no ordering
        spec = SystemSpec(8, 4, 4)
        H = random_hamiltonian(spec, 8)
        s = sample_exact(H, 10**5, 0.02, seed=8)
        trim = run_trimsqd(H, s, PipelineConfig(method="trimsqd", seed=8))
        ext = run_extsqd(H, s, PipelineConfig(method="extsqd", seed=8))
        e_fci = fci_solve(H).ground_energy
        assert trim.final_energy >= e_fci - 1e-9 and ext.final_energy >= e_fci - 1e-9
        assert trim.final_energy == pytest.approx(-2.785646979487916, abs=1e-7)
        assert ext.final_energy == pytest.approx(-2.9499777874596167, abs=1e-7)


class TestReport:
    def _run(self, **kw):
        H = random_hamiltonian(SystemSpec(5, 2, 2), 1)
        s = sample_exact(H, 5000, 0.05, seed=2)
        return run_trimsqd(H, s, PipelineConfig(seed=9, **kw))

    def test_fields_and_invariants(self):
        rep = self._run()
        assert rep.final_dimension <= rep.extended_dimension
        assert math.isfinite(rep.final_energy)
        assert len(rep.iterations) == 5
        for it in rep.iterations:
            assert len(it.subgroup_energies) == len(it.subgroup_dimensions) >= 1
            assert max(it.subgroup_dimensions) <= 10_000
        assert rep.matvec_counts["total"] == sum(v for k, v in rep.matvec_counts.items() if k != "total")
        assert rep.seeds == {"master": 9, "effective": 9}
        assert rep.timings["coverage"] >= 0.99

    def test_json(self):
        rep = self._run()
        doc = json.loads(rep.to_json())
        for key in ("method", "final_energy", "final_dimension", "extended_dimension", "iterations",
                    "matvec_counts", "timings", "seeds", "config", "provenance"):
            assert key in doc
        assert doc["final_energy"] == rep.final_energy  # shortest repr round-trips exactly
        assert "timings" not in json.loads(rep.to_json(include_timings=False))

    def test_deterministic(self):
        a, b = self._run(), self._run()
        assert a.to_json(include_timings=False) == b.to_json(include_timings=False)

    def test_early_stop(self):
        rep = self._run(early_stop=1.0, recovery_iterations=5)
        assert len(rep.iterations) == 2

    def test_rejects_inconsistent_dimensions(self):
        with pytest.raises(ValueError):
            EnergyReport("trimsqd", -1.0, 10, 5, -1.0)
        with pytest.raises(ValueError):
            EnergyReport("trimsqd", float("nan"), 1, 5, -1.0)

    def test_no_convergence_propagates_with_report(self):
        spec = SystemSpec(8, 4, 4)
        H = random_hamiltonian(spec, 3)
        cfg = PipelineConfig(subgroup_count=1, k1=100, k2=100, max_matvecs=3, recovery_iterations=1, seed=1)
        with pytest.raises(NoConvergence) as info:
            run_trimsqd(H, full_coverage(spec), cfg)
        rep = info.value.result
        assert isinstance(rep, EnergyReport) and not rep.converged

    def test_fci_report(self, h_44):
        rep = run_fci_report(h_44)
        assert rep.method == "fci" and rep.final_dimension == 36
        assert rep.final_energy == fci_solve(h_44).ground_energy


class TestRouterAndBinding:
    def test_router(self):
        assert solver_router(12) == "fci"
        assert solver_router(13) == "trimsqd"
        assert solver_router(45) == "trimsqd"
        with pytest.raises(Unsupported):
            solver_router(46)
        assert solver_router(46, force=True) == "trimsqd"

    def test_trypsin_row(self):
        de, kcal = binding_energy(-319_415.8966, -319_040.9552, -374.9986)
        assert abs(de - 0.0572) <= 5e-5
        assert abs(kcal - 35.89) <= 0.05

    def test_identity(self):
        x = -1234.56789
        assert binding_energy(x, x, 0.0) == (0.0, 0.0)

    def test_conversion_factor(self):
        assert binding_energy(1.0, 0.0, 0.0)[1] == 627.5094740631

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            binding_energy(float("inf"), 0.0, 0.0)
