"""Occupation-string configurations, combinatorics and fermionic phases.

A spin string is a plain ``int`` whose bit ``p`` is the occupation of spatial
orbital ``p``.  Its text form has one character per orbital with the leftmost
character standing for orbital 0, so ``"110"`` has orbitals 0 and 1 occupied.

A configuration is an (alpha, beta) pair of spin strings.  Bulk code stores
configurations as ``(n, 2)`` ``uint64`` arrays whose rows are sorted
lexicographically on (alpha, beta), which is the global total order used for
deduplication and tie-breaking everywhere in the package.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterator

import numpy as np

from .errors import CapExceeded, ParseError, SpecError

MAX_ORBITALS = 64
DEFAULT_ENUMERATION_CAP = 10**7

ALPHA = "alpha"
BETA = "beta"


@dataclass(frozen=True)
class SystemSpec:
    """Active space: ``norb`` spatial orbitals holding ``n_alpha`` + ``n_beta`` electrons."""

    norb: int
    n_alpha: int
    n_beta: int

    def __post_init__(self):
        if not 1 <= self.norb <= MAX_ORBITALS:
            raise SpecError(f"norb must lie in [1, {MAX_ORBITALS}], got {self.norb}")
        for name in ("n_alpha", "n_beta"):
            n = getattr(self, name)
            if not 0 <= n <= self.norb:
                raise SpecError(f"{name}={n} outside [0, norb={self.norb}]")

    @classmethod
    def from_active_space(cls, n_electrons: int, norb: int) -> "SystemSpec":
        """(Ne, Mo) notation: n_alpha = ceil(Ne / 2), n_beta = floor(Ne / 2)."""
        return cls(norb, (n_electrons + 1) // 2, n_electrons // 2)

    @property
    def nelec(self) -> tuple[int, int]:
        return (self.n_alpha, self.n_beta)

    @property
    def n_electrons(self) -> int:
        return self.n_alpha + self.n_beta


def popcount(bits: int) -> int:
    return int(bits).bit_count()


def parse_spin_string(text: str, norb: int | None = None) -> int:
    """Text form (leftmost char = orbital 0) to bit integer."""
    if not text or any(ch not in "01" for ch in text):
        raise ParseError(f"invalid spin string {text!r}")
    if norb is not None and len(text) != norb:
        raise ParseError(f"spin string {text!r} has length {len(text)}, expected {norb}")
    bits = 0
    for p, ch in enumerate(text):
        if ch == "1":
            bits |= 1 << p
    return bits


def format_spin_string(bits: int, norb: int) -> str:
    return "".join("1" if (bits >> p) & 1 else "0" for p in range(norb))


def occupied_orbitals(bits: int) -> list[int]:
    out = []
    p = 0
    while bits:
        if bits & 1:
            out.append(p)
        bits >>= 1
        p += 1
    return out


def excitation_phase(bits: int, from_orb: int, to_orb: int) -> int:
    """(-1) raised to the number of occupied orbitals strictly between the two indices."""
    lo, hi = sorted((from_orb, to_orb))
    mask = ((1 << hi) - 1) & ~((1 << (lo + 1)) - 1)
    return -1 if popcount(bits & mask) & 1 else 1


@dataclass(frozen=True, order=True)
class Configuration:
    """One Slater determinant; ordering is lexicographic on (alpha, beta)."""

    alpha: int
    beta: int
    norb: int

    def __post_init__(self):
        limit = 1 << self.norb
        if not (0 <= self.alpha < limit and 0 <= self.beta < limit):
            raise SpecError("spin string has bits set at positions >= norb")

    @classmethod
    def from_text(cls, text: str, norb: int | None = None) -> "Configuration":
        fields = text.split()
        if len(fields) != 2:
            raise ParseError(f"expected '<alpha_bits> <beta_bits>', got {text!r}")
        a, b = fields
        if norb is None:
            norb = len(a)
        return cls(parse_spin_string(a, norb), parse_spin_string(b, norb), norb)

    def to_text(self) -> str:
        return f"{format_spin_string(self.alpha, self.norb)} {format_spin_string(self.beta, self.norb)}"

    @property
    def n_alpha(self) -> int:
        return popcount(self.alpha)

    @property
    def n_beta(self) -> int:
        return popcount(self.beta)

    def string(self, spin: str) -> int:
        return self.alpha if spin == ALPHA else self.beta

    def is_valid_for(self, spec: SystemSpec) -> bool:
        return (
            self.norb == spec.norb
            and self.n_alpha == spec.n_alpha
            and self.n_beta == spec.n_beta
        )

    def hamming(self, other: "Configuration") -> int:
        return popcount(self.alpha ^ other.alpha) + popcount(self.beta ^ other.beta)


@dataclass(frozen=True)
class Excitation:
    spin: str
    from_orb: int
    to_orb: int
    phase: int

    def apply(self, c: Configuration) -> Configuration:
        flip = (1 << self.from_orb) | (1 << self.to_orb)
        if self.spin == ALPHA:
            return Configuration(c.alpha ^ flip, c.beta, c.norb)
        return Configuration(c.alpha, c.beta ^ flip, c.norb)


def hamming(x: Configuration, y: Configuration) -> int:
    return x.hamming(y)


def fci_dimension(spec: SystemSpec) -> int:
    """Exact number of determinants, C(M, n_alpha) * C(M, n_beta)."""
    return math.comb(spec.norb, spec.n_alpha) * math.comb(spec.norb, spec.n_beta)


def enumerate_singles(c: Configuration) -> list[tuple[Configuration, Excitation]]:
    out = []
    for spin in (ALPHA, BETA):
        bits = c.string(spin)
        for p in range(c.norb):
            if not (bits >> p) & 1:
                continue
            for q in range(c.norb):
                if (bits >> q) & 1:
                    continue
                exc = Excitation(spin, p, q, excitation_phase(bits, p, q))
                out.append((exc.apply(c), exc))
    return out


def spin_strings(norb: int, nelec: int) -> np.ndarray:
    """All ``norb``-bit strings with ``nelec`` set bits, ascending as integers."""
    values = sorted(sum(1 << p for p in occ) for occ in combinations(range(norb), nelec))
    return np.array(values, dtype=np.uint64)


def enumerate_all_configurations(
    spec: SystemSpec, cap: int = DEFAULT_ENUMERATION_CAP
) -> Iterator[Configuration]:
    return (
        Configuration(int(a), int(b), spec.norb)
        for a, b in all_configurations_array(spec, cap)
    )


def all_configurations_array(spec: SystemSpec, cap: int = DEFAULT_ENUMERATION_CAP) -> np.ndarray:
    dim = fci_dimension(spec)
    if dim > cap:
        raise CapExceeded(f"FCI dimension {dim} exceeds cap {cap}")
    alphas = spin_strings(spec.norb, spec.n_alpha)
    betas = spin_strings(spec.norb, spec.n_beta)
    out = np.empty((dim, 2), dtype=np.uint64)
    out[:, 0] = np.repeat(alphas, len(betas))
    out[:, 1] = np.tile(betas, len(alphas))
    return out


# -- bulk helpers on (n, 2) uint64 arrays ------------------------------------


def as_config_array(configs) -> np.ndarray:
    """Accept an (n, 2) array or an iterable of Configuration."""
    if isinstance(configs, np.ndarray):
        arr = np.asarray(configs, dtype=np.uint64)
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ValueError(f"configuration array must have shape (n, 2), got {arr.shape}")
        return arr
    rows = [(c.alpha, c.beta) for c in configs]
    return np.array(rows, dtype=np.uint64).reshape(-1, 2)


def to_configurations(arr: np.ndarray, norb: int) -> list[Configuration]:
    return [Configuration(int(a), int(b), norb) for a, b in arr]


def sort_unique(arr: np.ndarray) -> np.ndarray:
    """Sort rows lexicographically on (alpha, beta) and drop duplicates."""
    arr = as_config_array(arr)
    if len(arr) == 0:
        return arr.copy()
    order = np.lexsort((arr[:, 1], arr[:, 0]))
    s = arr[order]
    keep = np.ones(len(s), dtype=bool)
    keep[1:] = (s[1:, 0] != s[:-1, 0]) | (s[1:, 1] != s[:-1, 1])
    return s[keep]


def popcount_array(bits: np.ndarray) -> np.ndarray:
    return np.bitwise_count(np.asarray(bits, dtype=np.uint64)).astype(np.int64)


def valid_mask(arr: np.ndarray, spec: SystemSpec) -> np.ndarray:
    arr = as_config_array(arr)
    return (popcount_array(arr[:, 0]) == spec.n_alpha) & (popcount_array(arr[:, 1]) == spec.n_beta)


def format_config_row(alpha: int, beta: int, norb: int) -> str:
    return f"{format_spin_string(int(alpha), norb)} {format_spin_string(int(beta), norb)}"
