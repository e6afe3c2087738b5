from __future__ import annotations

import io

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import chisquare

from sqdkit.configs import SystemSpec, all_configurations_array
from sqdkit.errors import CapExceeded, LengthMismatch, ParseError
from sqdkit.integrals import random_hamiltonian
from sqdkit.oracle import fci_solve
from sqdkit.sampling import (
    OccupancyEstimate,
    SampleSet,
    estimate_occupancy,
    fragment_seed,
    load_samples,
    recover_configurations,
    sample_exact,
    save_samples,
    stage_rng,
    subsample,
)
from sqdkit.sbd import build_basis

from conftest import random_subset


def load(text: str, spec: SystemSpec) -> SampleSet:
    return load_samples(io.StringIO(text), spec)


class TestLoadSave:
    def test_single_line(self):
        s = load("10 01 250\n", SystemSpec(2, 1, 1))
        assert len(s) == 1 and s.total == 250
        assert (int(s.alpha[0]), int(s.beta[0])) == (0b01, 0b10)

    def test_duplicates_merge(self):
        s = load("10 01 3\n10 01 4\n", SystemSpec(2, 1, 1))
        assert len(s) == 1 and s.counts.tolist() == [7]

    def test_comments_and_blank_lines(self):
        s = load("# header\n\n10 01 2  # trailing\n", SystemSpec(2, 1, 1))
        assert s.total == 2

    def test_invalid_strings_are_kept(self):
        s = load("11 00 5\n", SystemSpec(2, 1, 1))
        assert s.total == 5 and not s.valid_mask(SystemSpec(2, 1, 1)).any()

    def test_length_mismatch(self):
        with pytest.raises(LengthMismatch, match="line 2"):
            load("10 01 1\n100 01 1\n", SystemSpec(2, 1, 1))

    @pytest.mark.parametrize("text", ["10 01\n", "10 01 x\n", "10 0a 3\n", "10 01 0\n"])
    def test_parse_errors(self, text):
        with pytest.raises(ParseError, match="line 1"):
            load(text, SystemSpec(2, 1, 1))

    def test_round_trip(self):
        H = random_hamiltonian(SystemSpec(5, 2, 2), 0)
        s = sample_exact(H, 2000, 0.05, seed=1)
        buf = io.StringIO()
        save_samples(s, buf)
        text = buf.getvalue()
        assert load(text, H.spec) == s
        lines = text.splitlines()
        assert len(lines) == len(s)


class TestSampleExact:
    def test_noiseless_samples_are_valid(self, h_44):
        s = sample_exact(h_44, 5000, 0.0, seed=3)
        assert s.total == 5000 and s.valid_mask(h_44.spec).all()

    def test_reproducible(self, h_44):
        assert sample_exact(h_44, 1000, 0.1, seed=9) == sample_exact(h_44, 1000, 0.1, seed=9)
        assert sample_exact(h_44, 1000, 0.1, seed=9) != sample_exact(h_44, 1000, 0.1, seed=10)

    def test_converges_to_born_probabilities(self, h_44):
        s = sample_exact(h_44, 10**6, 0.0, seed=4)
        fci = fci_solve(h_44)
        pos = build_basis(fci.configs, h_44).positions(s.configs)
        empirical = np.zeros(fci.dimension)
        empirical[pos] = s.counts / s.total
        tv = 0.5 * np.abs(empirical - fci.ground_vector**2).sum()
        assert tv < 0.01

    def test_maximal_noise_gives_uniform_bits(self):
        H = random_hamiltonian(SystemSpec(2, 1, 1), 0)
        s = sample_exact(H, 20_000, 0.5, seed=5)
        for strings in (s.alpha, s.beta):
            for p in range(2):
                ones = int(s.counts[((strings >> np.uint64(p)) & np.uint64(1)) == 1].sum())
                assert chisquare([ones, s.total - ones]).pvalue > 1e-3

    def test_cap(self):
        H = random_hamiltonian(SystemSpec(8, 4, 4), 0)
        with pytest.raises(CapExceeded):
            sample_exact(H, 10, 0.0, seed=0, cap=1000)


class TestOccupancy:
    def test_single_configuration(self, h_44):
        b = build_basis(np.array([[0b0101, 0b0011]], dtype=np.uint64), h_44)
        occ = estimate_occupancy(b, np.array([1.0]))
        assert occ.alpha.tolist() == [1, 0, 1, 0]
        assert occ.beta.tolist() == [1, 1, 0, 0]

    def test_equal_superposition(self):
        spec = SystemSpec(2, 1, 1)
        # (10,10) and (01,10): alpha in either orbital, beta always in orbital 0
        b = build_basis(np.array([[0b01, 0b01], [0b10, 0b01]], dtype=np.uint64), spec)
        occ = estimate_occupancy(b, np.array([1.0, 1.0]) / np.sqrt(2))
        np.testing.assert_allclose(occ.alpha, [0.5, 0.5], atol=1e-15)
        np.testing.assert_allclose(occ.beta, [1.0, 0.0], atol=1e-15)

    @given(st.integers(0, 2**32 - 1))
    def test_marginals_sum_to_electron_counts(self, seed):
        spec = SystemSpec(6, 2, 3)
        b = build_basis(random_subset(all_configurations_array(spec), 60, seed), spec)
        v = np.random.default_rng(seed).standard_normal(len(b))
        occ = estimate_occupancy(b, v / np.linalg.norm(v))
        assert abs(occ.alpha.sum() - 2) <= 1e-12
        assert abs(occ.beta.sum() - 3) <= 1e-12
        assert ((occ.alpha >= 0) & (occ.alpha <= 1)).all()

    def test_requires_normalized(self, h_44):
        b = build_basis(all_configurations_array(h_44.spec), h_44)
        with pytest.raises(ValueError):
            estimate_occupancy(b, np.ones(len(b)))

    def test_bounds(self):
        with pytest.raises(ValueError):
            OccupancyEstimate(np.array([1.2]), np.array([0.0]))


class TestRecovery:
    def test_valid_input_passes_through(self, h_44):
        s = sample_exact(h_44, 3000, 0.0, seed=2)
        assert recover_configurations(s, OccupancyEstimate.uniform(h_44.spec), h_44.spec, 0) == s

    def test_flip_rule_prefers_low_occupancy(self):
        spec = SystemSpec(2, 1, 1)
        s = SampleSet.from_arrays(2, [0b11], [0b01], [10_000])
        occ = OccupancyEstimate(np.array([0.99, 0.01]), np.array([0.5, 0.5]))
        out = recover_configurations(s, occ, spec, seed=1)
        emptied_1 = int(out.counts[out.alpha == 0b01].sum())
        # empty probability of orbital 1 is 0.990001 / 1.000002 ~ 0.98999
        assert emptied_1 / 10_000 >= 0.95
        assert abs(emptied_1 / 10_000 - 0.990001 / 1.000002) < 0.005

    def test_fill_rule_prefers_high_occupancy(self):
        spec = SystemSpec(3, 2, 0)
        s = SampleSet.from_arrays(3, [0b000], [0], [5000])
        occ = OccupancyEstimate(np.array([0.9, 0.9, 0.2]), np.zeros(3))
        out = recover_configurations(s, occ, spec, seed=2)
        assert out.valid_mask(spec).all()
        frac = out.counts[out.alpha == 0b011].sum() / 5000
        # exact successive-sampling probability of picking {0, 1}
        w = np.array([0.9, 0.9, 0.2]) + 1e-6
        p01 = 2 * (w[0] / w.sum()) * (w[1] / (w.sum() - w[0]))
        assert abs(frac - p01) < 0.03

    def test_zero_occupancy_floor_avoids_deadlock(self):
        spec = SystemSpec(3, 1, 1)
        s = SampleSet.from_arrays(3, [0b000], [0b111], [50])
        occ = OccupancyEstimate(np.zeros(3), np.ones(3))
        out = recover_configurations(s, occ, spec, seed=3)
        assert out.valid_mask(spec).all() and out.total == 50

    @given(st.integers(0, 2**32 - 1), st.floats(0.0, 0.5))
    def test_contract(self, seed, noise):
        spec = SystemSpec(5, 2, 3)
        H = random_hamiltonian(spec, seed % 7)
        s = sample_exact(H, 500, noise, seed)
        rng = np.random.default_rng(seed)
        occ = OccupancyEstimate(rng.uniform(size=5), rng.uniform(size=5))
        out = recover_configurations(s, occ, spec, seed)
        assert out.total == s.total
        assert out.valid_mask(spec).all()

    def test_reproducible(self, h_44):
        s = sample_exact(h_44, 2000, 0.2, seed=5)
        occ = OccupancyEstimate.uniform(h_44.spec)
        assert recover_configurations(s, occ, h_44.spec, 7) == recover_configurations(s, occ, h_44.spec, 7)


class TestSubsample:
    def _pool(self):
        return SampleSet.from_arrays(2, [1, 2], [1, 1], [99, 1])

    def test_large_size_returns_everything(self):
        assert np.array_equal(subsample(self._pool(), 5, 0), self._pool().configs)

    def test_weighted_by_multiplicity(self):
        hits = sum(int(subsample(self._pool(), 1, seed)[0, 0]) == 1 for seed in range(2000))
        assert abs(hits / 2000 - 0.99) < 0.01

    def test_deterministic_and_unique(self, h_633):
        s = sample_exact(h_633, 3000, 0.0, seed=0)
        a = subsample(s, 50, 11)
        assert np.array_equal(a, subsample(s, 50, 11))
        assert len({tuple(r) for r in a.tolist()}) == 50

    def test_size_must_be_positive(self):
        with pytest.raises(ValueError):
            subsample(self._pool(), 0, 0)


def test_seed_splitting():
    assert fragment_seed(5, "frag-1") == fragment_seed(5, "frag-1")
    assert fragment_seed(5, "frag-1") != fragment_seed(5, "frag-2")
    assert 0 <= fragment_seed(2**64 - 1, 3) < 2**64
    a = stage_rng(7, 0, 1).random(4)
    assert np.array_equal(a, stage_rng(7, 0, 1).random(4))
    assert not np.array_equal(a, stage_rng(7, 1, 1).random(4))
