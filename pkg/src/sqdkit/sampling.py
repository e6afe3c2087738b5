"""Configuration samples: ingestion, an exact-state sampler with bit-flip
noise, occupancy-guided configuration recovery and weighted subsampling.

Seeds: a fragment's stream is ``master ^ blake2b64(fragment_id)``; every
stochastic stage then draws from ``SeedSequence(seed, spawn_key=keys)`` so
stages never share a generator state.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import TextIO

import numpy as np

from .configs import SystemSpec, fci_dimension, format_config_row, parse_spin_string, popcount_array
from .errors import CapExceeded, LengthMismatch, ParseError

SAMPLER_CAP = 10**6
_MASK64 = (1 << 64) - 1


# -- seeds -------------------------------------------------------------------


def fragment_seed(master: int, fragment_id: str | int) -> int:
    digest = hashlib.blake2b(str(fragment_id).encode(), digest_size=8).digest()
    return (int(master) ^ int.from_bytes(digest, "little")) & _MASK64


def stage_rng(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for one stochastic stage, keyed e.g. by (iteration, stage)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(keys)))


# -- sample sets ---------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Multiset of raw (alpha, beta) bitstrings, sorted by configuration order.

    Entries may violate particle number; ``counts`` are all >= 1.
    """

    norb: int
    alpha: np.ndarray
    beta: np.ndarray
    counts: np.ndarray

    @classmethod
    def from_arrays(cls, norb: int, alpha, beta, counts=None) -> SampleSet:
        """Merge duplicates and sort; ``counts`` defaults to one per row."""
        alpha = np.asarray(alpha, dtype=np.uint64).ravel()
        beta = np.asarray(beta, dtype=np.uint64).ravel()
        if counts is None:
            counts = np.ones(len(alpha), dtype=np.int64)
        counts = np.asarray(counts, dtype=np.int64).ravel()
        if not len(alpha) == len(beta) == len(counts):
            raise ValueError("alpha, beta and counts must have equal lengths")
        if np.any(counts < 1):
            raise ValueError("sample counts must be >= 1")
        if len(alpha) == 0:
            return cls(norb, alpha, beta, counts)
        order = np.lexsort((beta, alpha))
        a, b, c = alpha[order], beta[order], counts[order]
        start = np.ones(len(a), dtype=bool)
        start[1:] = (a[1:] != a[:-1]) | (b[1:] != b[:-1])
        idx = np.flatnonzero(start)
        return cls(norb, a[idx], b[idx], np.add.reduceat(c, idx))

    @classmethod
    def from_configs(cls, norb: int, configs: np.ndarray, counts=None) -> SampleSet:
        configs = np.asarray(configs, dtype=np.uint64).reshape(-1, 2)
        return cls.from_arrays(norb, configs[:, 0], configs[:, 1], counts)

    def __len__(self) -> int:
        return len(self.counts)

    def __eq__(self, other) -> bool:
        if not isinstance(other, SampleSet):
            return NotImplemented
        return (
            self.norb == other.norb
            and np.array_equal(self.alpha, other.alpha)
            and np.array_equal(self.beta, other.beta)
            and np.array_equal(self.counts, other.counts)
        )

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def configs(self) -> np.ndarray:
        return np.stack([self.alpha, self.beta], axis=1)

    def valid_mask(self, spec: SystemSpec) -> np.ndarray:
        return (popcount_array(self.alpha) == spec.n_alpha) & (popcount_array(self.beta) == spec.n_beta)


def load_samples(stream: TextIO | str | Path, spec: SystemSpec) -> SampleSet:
    """Parse lines ``<alpha_bits> <beta_bits> <count>``; '#' starts a comment."""
    if isinstance(stream, (str, Path)):
        with open(stream) as fh:
            return load_samples(fh, spec)
    m = spec.norb
    alpha, beta, counts = [], [], []
    for lineno, raw in enumerate(stream, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        if len(fields) != 3:
            raise ParseError(f"expected '<alpha> <beta> <count>', got {raw.rstrip()!r}", lineno)
        for text in fields[:2]:
            if len(text) != m:
                raise LengthMismatch(f"bitstring {text!r} has length {len(text)}, expected M={m}", lineno)
        try:
            a = parse_spin_string(fields[0])
            b = parse_spin_string(fields[1])
            n = int(fields[2])
        except ParseError as exc:
            raise ParseError(str(exc), lineno) from None
        except ValueError:
            raise ParseError(f"bad count {fields[2]!r}", lineno) from None
        if n < 1:
            raise ParseError(f"count must be >= 1, got {n}", lineno)
        alpha.append(a)
        beta.append(b)
        counts.append(n)
    return SampleSet.from_arrays(m, alpha, beta, counts)


def save_samples(samples: SampleSet, stream: TextIO | str | Path) -> None:
    if isinstance(stream, (str, Path)):
        with open(stream, "w") as fh:
            return save_samples(samples, fh)
    for a, b, c in zip(samples.alpha, samples.beta, samples.counts):
        stream.write(f"{format_config_row(a, b, samples.norb)} {int(c)}\n")


# -- exact sampler -------------------------------------------------------------


def _flip_masks(rng: np.random.Generator, n: int, norb: int, p: float) -> np.ndarray:
    weights = np.uint64(1) << np.arange(norb, dtype=np.uint64)
    flips = rng.random((n, norb)) < p
    return (flips.astype(np.uint64) * weights).sum(axis=1, dtype=np.uint64)


def sample_exact(H, shots: int, noise_p: float, seed: int, *, cap: int = SAMPLER_CAP) -> SampleSet:
    """Draw ``shots`` configurations from |Psi_x|^2 of the exact ground state,
    then flip each of the 2M bits independently with probability ``noise_p``."""
    from .oracle import fci_solve

    if shots < 1:
        raise ValueError("shots must be >= 1")
    if not 0.0 <= noise_p <= 1.0:
        raise ValueError(f"noise_p must lie in [0, 1], got {noise_p}")
    dim = fci_dimension(H.spec)
    if dim > cap:
        raise CapExceeded(f"FCI dimension {dim} exceeds sampler cap {cap}")
    fci = fci_solve(H, cap=cap)
    prob = fci.ground_vector**2
    prob /= prob.sum()

    rng = stage_rng(seed, 0)
    idx = rng.choice(dim, size=shots, p=prob)
    alpha = fci.configs[idx, 0].copy()
    beta = fci.configs[idx, 1].copy()
    if noise_p > 0.0:
        chunk = 1 << 16
        m = H.norb
        for lo in range(0, shots, chunk):
            hi = min(lo + chunk, shots)
            alpha[lo:hi] ^= _flip_masks(rng, hi - lo, m, noise_p)
            beta[lo:hi] ^= _flip_masks(rng, hi - lo, m, noise_p)
    return SampleSet.from_arrays(H.norb, alpha, beta)


# -- occupancies and recovery --------------------------------------------------


@dataclass(frozen=True, eq=False)
class OccupancyEstimate:
    """Per-orbital mean occupations of each spin, entries in [0, 1]."""

    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        for name in ("alpha", "beta"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if arr.ndim != 1:
                raise ValueError(f"{name} occupancies must be 1-D")
            if np.any(arr < -1e-12) or np.any(arr > 1 + 1e-12) or not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} occupancies must lie in [0, 1]")
            object.__setattr__(self, name, np.clip(arr, 0.0, 1.0))

    @classmethod
    def uniform(cls, spec: SystemSpec) -> OccupancyEstimate:
        m = spec.norb
        return cls(np.full(m, spec.n_alpha / m), np.full(m, spec.n_beta / m))


def _bit_matrix(strings: np.ndarray, norb: int) -> np.ndarray:
    shifts = np.arange(norb, dtype=np.uint64)
    return ((strings[:, None] >> shifts) & np.uint64(1)).astype(np.float64)


def estimate_occupancy(basis, v: np.ndarray) -> OccupancyEstimate:
    """n_sigma[p] = sum_x |v_x|^2 occ_sigma(x, p)."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (len(basis),):
        raise ValueError(f"vector shape {v.shape} does not match basis size {len(basis)}")
    if abs(np.linalg.norm(v) - 1.0) > 1e-9:
        raise ValueError("vector must be normalized")
    w = v * v
    m = basis.norb
    return OccupancyEstimate(
        w @ _bit_matrix(basis.configs[:, 0], m),
        w @ _bit_matrix(basis.configs[:, 1], m),
    )


_FLOOR = 1e-6


def _repair_string(bits: int, nelec: int, occ: np.ndarray, copies: int, rng: np.random.Generator) -> np.ndarray:
    """``copies`` independent repairs of one spin string to popcount ``nelec``.

    Emptying ``k`` orbitals one at a time with probability proportional to
    fixed weights is successive weighted sampling without replacement, which
    equals taking the top ``k`` of log(weight) + Gumbel noise; same for filling.
    """
    m = len(occ)
    occupied = np.array([p for p in range(m) if (bits >> p) & 1], dtype=np.int64)
    empty = np.array([p for p in range(m) if not (bits >> p) & 1], dtype=np.int64)
    w = len(occupied)
    if w > nelec:
        cand, weight, k = occupied, (1.0 - occ[occupied]) + _FLOOR, w - nelec
    else:
        cand, weight, k = empty, occ[empty] + _FLOOR, nelec - w
    keys = np.log(weight)[None, :] + rng.gumbel(size=(copies, len(cand)))
    chosen = cand[np.argsort(-keys, axis=1, kind="stable")[:, :k]]
    masks = (np.uint64(1) << chosen.astype(np.uint64)).sum(axis=1, dtype=np.uint64)
    return np.uint64(bits) ^ masks


def recover_configurations(samples: SampleSet, occ: OccupancyEstimate, spec: SystemSpec, seed) -> SampleSet:
    """Repair particle-number violations; valid entries pass through unchanged.

    Each shot of an invalid entry is repaired independently, so the output
    total equals the input total and every entry has (n_alpha, n_beta).
    ``seed`` is an int or a numpy Generator.
    """
    if samples.norb != spec.norb:
        raise LengthMismatch(f"samples have M={samples.norb}, system has M={spec.norb}")
    rng = seed if isinstance(seed, np.random.Generator) else stage_rng(seed, 1)
    ok_a = popcount_array(samples.alpha) == spec.n_alpha
    ok_b = popcount_array(samples.beta) == spec.n_beta
    ok = ok_a & ok_b
    parts_a = [samples.alpha[ok]]
    parts_b = [samples.beta[ok]]
    parts_c = [samples.counts[ok]]
    for i in np.flatnonzero(~ok):
        c = int(samples.counts[i])
        a, b = int(samples.alpha[i]), int(samples.beta[i])
        ra = np.full(c, a, dtype=np.uint64) if ok_a[i] else _repair_string(a, spec.n_alpha, occ.alpha, c, rng)
        rb = np.full(c, b, dtype=np.uint64) if ok_b[i] else _repair_string(b, spec.n_beta, occ.beta, c, rng)
        parts_a.append(ra)
        parts_b.append(rb)
        parts_c.append(np.ones(c, dtype=np.int64))
    return SampleSet.from_arrays(
        spec.norb, np.concatenate(parts_a), np.concatenate(parts_b), np.concatenate(parts_c)
    )


# -- subsampling -----------------------------------------------------------------


def subsample(pool: SampleSet, size: int, seed) -> np.ndarray:
    """min(size, |pool|) distinct configurations drawn without replacement,
    weighted by multiplicity; returned sorted in configuration order."""
    if size < 1:
        raise ValueError("size must be >= 1")
    n = len(pool)
    if size >= n:
        return pool.configs
    rng = seed if isinstance(seed, np.random.Generator) else stage_rng(seed, 2)
    p = pool.counts / pool.counts.sum()
    idx = np.sort(rng.choice(n, size=size, replace=False, p=p))
    return pool.configs[idx]
