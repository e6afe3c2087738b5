"""Fragment Hamiltonians: FCIDUMP I/O and Slater-Condon matrix elements.

Two-electron integrals use chemists' notation ``(pq|rs)`` with real orbitals,
so they carry the 8-fold permutational symmetry and are stored once per
canonical quadruple (``p >= q``, ``r >= s``, ``pq >= rs``).
"""

from __future__ import annotations

import io
import re
import warnings
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import TextIO

import numpy as np

from .configs import (
    ALPHA,
    BETA,
    Configuration,
    SystemSpec,
    excitation_phase,
    occupied_orbitals,
    popcount,
)
from .errors import ParseError, SpecError, SpecMismatch


def pair_index(i: int, j: int) -> int:
    if i < j:
        i, j = j, i
    return i * (i + 1) // 2 + j


def eri_index(p: int, q: int, r: int, s: int) -> int:
    return pair_index(pair_index(p, q), pair_index(r, s))


def packed_eri_size(norb: int) -> int:
    npair = norb * (norb + 1) // 2
    return npair * (npair + 1) // 2


def _canonical_quads(norb: int):
    for p in range(norb):
        for q in range(p + 1):
            pq = pair_index(p, q)
            for r in range(norb):
                for s in range(r + 1):
                    if pair_index(r, s) <= pq:
                        yield p, q, r, s


@dataclass(frozen=True, eq=False)
class FragmentHamiltonian:
    spec: SystemSpec
    e_core: float
    h: np.ndarray
    eri: np.ndarray  # packed canonical (pq|rs), length packed_eri_size(norb)

    def __post_init__(self):
        m = self.spec.norb
        h = np.ascontiguousarray(self.h, dtype=np.float64)
        eri = np.ascontiguousarray(self.eri, dtype=np.float64).ravel()
        if h.shape != (m, m):
            raise SpecError(f"h has shape {h.shape}, expected {(m, m)}")
        if eri.shape != (packed_eri_size(m),):
            raise SpecError(f"packed eri has length {eri.size}, expected {packed_eri_size(m)}")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(eri)) and np.isfinite(self.e_core)):
            raise SpecError("non-finite integral")
        if not np.array_equal(h, h.T):
            raise SpecError("one-electron integrals are not symmetric")
        h.setflags(write=False)
        eri.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "eri", eri)
        object.__setattr__(self, "e_core", float(self.e_core))

    @property
    def norb(self) -> int:
        return self.spec.norb

    @classmethod
    def from_full(cls, spec: SystemSpec, e_core: float, h: np.ndarray, eri4: np.ndarray):
        """Pack a dense ``(M, M, M, M)`` tensor, reading its canonical entries."""
        m = spec.norb
        eri4 = np.asarray(eri4, dtype=np.float64)
        packed = np.zeros(packed_eri_size(m))
        for p, q, r, s in _canonical_quads(m):
            packed[eri_index(p, q, r, s)] = eri4[p, q, r, s]
        return cls(spec, e_core, np.asarray(h, dtype=np.float64), packed)

    def eri_value(self, p: int, q: int, r: int, s: int) -> float:
        return float(self.eri[eri_index(p, q, r, s)])

    @cached_property
    def eri_full(self) -> np.ndarray:
        """Dense 4-index view; O(M^4) memory, used by the matvec kernels."""
        m = self.norb
        idx = np.arange(m)
        pairs = np.maximum(idx[:, None], idx[None, :])
        pairs = pairs * (pairs + 1) // 2 + np.minimum(idx[:, None], idx[None, :])
        hi = np.maximum(pairs[:, :, None, None], pairs[None, None, :, :])
        lo = np.minimum(pairs[:, :, None, None], pairs[None, None, :, :])
        full = self.eri[hi * (hi + 1) // 2 + lo]
        full.setflags(write=False)
        return full

    def count_nonzero(self) -> dict[str, int]:
        return {
            "one_electron": int(np.count_nonzero(np.tril(self.h))),
            "two_electron": int(np.count_nonzero(self.eri)),
        }


def random_hamiltonian(
    spec: SystemSpec, seed: int = 0, *, n_factors: int | None = None, coupling: float = 0.3
) -> FragmentHamiltonian:
    """Molecule-like random instance with a positive semidefinite ERI tensor.

    Orbital energies increase with the orbital index so the lowest-diagonal
    determinant is aufbau-like; ``coupling`` scales the off-diagonal terms.
    """
    rng = np.random.default_rng(seed)
    m = spec.norb
    n_factors = n_factors or m + 2
    h = np.diag(np.sort(rng.uniform(-2.0, 1.0, m)))
    off = rng.normal(scale=coupling, size=(m, m))
    h = h + np.triu(off, 1) + np.triu(off, 1).T
    factors = rng.normal(scale=0.35, size=(n_factors, m, m))
    factors = 0.5 * (factors + factors.transpose(0, 2, 1))
    factors[:, np.arange(m), np.arange(m)] += 0.6
    eri4 = np.einsum("Lpq,Lrs->pqrs", factors, factors) / n_factors
    return FragmentHamiltonian.from_full(spec, float(rng.uniform(-1.0, 1.0)), h, eri4)


# -- FCIDUMP -----------------------------------------------------------------


def _header_int(header: str, key: str, line: int) -> int:
    m = re.search(rf"\b{key}\s*=\s*(-?\d+)", header, re.I)
    if m is None:
        raise ParseError(f"FCIDUMP header lacks {key}", line)
    return int(m.group(1))


def parse_fcidump(stream: TextIO | str | Path) -> FragmentHamiltonian:
    """Read a Molpro-style FCIDUMP from a text stream (or a path)."""
    if isinstance(stream, (str, Path)):
        with open(stream) as fh:
            return parse_fcidump(fh)

    lines = stream.read().splitlines()
    header_parts = []
    body_start = None
    for lineno, line in enumerate(lines, start=1):
        header_parts.append(line)
        stripped = line.strip().upper()
        if stripped.endswith("&END") or stripped == "/" or stripped.endswith("/"):
            body_start = lineno
            break
    if body_start is None:
        raise ParseError("FCIDUMP header is not terminated by &END or /", len(lines) or 1)
    header = " ".join(header_parts)
    norb = _header_int(header, "NORB", 1)
    nelec = _header_int(header, "NELEC", 1)
    ms2 = _header_int(header, "MS2", 1) if re.search(r"\bMS2\b", header, re.I) else 0

    if norb < 1:
        raise ParseError(f"NORB must be positive, got {norb}", 1)
    if (nelec + ms2) % 2:
        raise SpecError(f"NELEC={nelec} and MS2={ms2} give half-integer electron counts")
    n_alpha, n_beta = (nelec + ms2) // 2, (nelec - ms2) // 2
    if n_alpha < 0 or n_beta < 0:
        raise SpecError(f"NELEC={nelec}, MS2={ms2} give negative electron counts")
    spec = SystemSpec(norb, n_alpha, n_beta)

    e_core = 0.0
    h = np.zeros((norb, norb))
    eri = np.zeros(packed_eri_size(norb))
    seen: set[tuple] = set()

    def note(key, lineno):
        if key in seen:
            warnings.warn(f"FCIDUMP line {lineno}: duplicate entry {key[1:]} overwritten", stacklevel=3)
        seen.add(key)

    for lineno in range(body_start + 1, len(lines) + 1):
        fields = lines[lineno - 1].split()
        if not fields:
            continue
        if len(fields) != 5:
            raise ParseError(f"expected 'value i j k l', got {lines[lineno - 1]!r}", lineno)
        try:
            value = float(fields[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(f) for f in fields[1:])
        except ValueError:
            raise ParseError(f"cannot parse {lines[lineno - 1]!r}", lineno) from None
        if not all(0 <= x <= norb for x in (i, j, k, l)):
            raise ParseError(f"index outside [0, {norb}]", lineno)
        if i and j and k and l:
            key = ("eri", eri_index(i - 1, j - 1, k - 1, l - 1))
            note(key, lineno)
            eri[key[1]] = value
        elif i and j and not k and not l:
            key = ("h", pair_index(i - 1, j - 1))
            note(key, lineno)
            h[i - 1, j - 1] = h[j - 1, i - 1] = value
        elif not (i or j or k or l):
            note(("core",), lineno)
            e_core = value
        elif i and not (j or k or l):
            continue  # orbital energy, unused
        else:
            raise ParseError(f"unsupported index pattern {i} {j} {k} {l}", lineno)

    return FragmentHamiltonian(spec, e_core, h, eri)


def write_fcidump(H: FragmentHamiltonian, stream: TextIO | str | Path) -> None:
    if isinstance(stream, (str, Path)):
        with open(stream, "w") as fh:
            write_fcidump(H, fh)
        return
    m = H.norb
    spec = H.spec
    stream.write(
        f" &FCI NORB={m},NELEC={spec.n_electrons},MS2={spec.n_alpha - spec.n_beta},\n"
        f"  ORBSYM={'1,' * m}\n  ISYM=1,\n &END\n"
    )
    fmt = "{: .16e} {:4d} {:4d} {:4d} {:4d}\n"
    for p, q, r, s in _canonical_quads(m):
        v = H.eri[eri_index(p, q, r, s)]
        if v != 0.0:
            stream.write(fmt.format(v, p + 1, q + 1, r + 1, s + 1))
    for p in range(m):
        for q in range(p + 1):
            if H.h[p, q] != 0.0:
                stream.write(fmt.format(H.h[p, q], p + 1, q + 1, 0, 0))
    stream.write(fmt.format(H.e_core, 0, 0, 0, 0))


def fcidump_text(H: FragmentHamiltonian) -> str:
    buf = io.StringIO()
    write_fcidump(H, buf)
    return buf.getvalue()


# -- Slater-Condon rules -----------------------------------------------------


def diagonal_element(c: Configuration, H: FragmentHamiltonian) -> float:
    eri = H.eri_full
    occ = [(p, ALPHA) for p in occupied_orbitals(c.alpha)] + [
        (p, BETA) for p in occupied_orbitals(c.beta)
    ]
    e = H.e_core + sum(H.h[p, p] for p, _ in occ)
    two = 0.0
    for p, sp in occ:
        for q, sq in occ:
            two += eri[p, p, q, q]
            if sp == sq:
                two -= eri[p, q, q, p]
    return float(e + 0.5 * two)


def _single_value(y: Configuration, spin: str, p: int, q: int, H: FragmentHamiltonian) -> float:
    """<x|H|y> where x is y with one ``spin`` electron moved from p to q."""
    eri = H.eri_full
    same = y.string(spin)
    other = y.beta if spin == ALPHA else y.alpha
    v = H.h[p, q]
    for r in occupied_orbitals(same):
        v += eri[p, q, r, r] - eri[p, r, r, q]
    for r in occupied_orbitals(other):
        v += eri[p, q, r, r]
    return excitation_phase(same, p, q) * v


def coupling_element(x: Configuration, y: Configuration, H: FragmentHamiltonian) -> float:
    """Hamiltonian matrix element <x|H|y> by the Slater-Condon rules."""
    if x.norb != y.norb or x.n_alpha != y.n_alpha or x.n_beta != y.n_beta:
        raise SpecMismatch("configurations belong to different particle-number sectors")
    da, db = x.alpha ^ y.alpha, x.beta ^ y.beta
    na, nb = popcount(da), popcount(db)
    if na + nb == 0:
        return diagonal_element(x, H)
    if na + nb > 4:
        return 0.0
    if na + nb == 2:
        spin = ALPHA if na else BETA
        d = da if na else db
        (p,) = occupied_orbitals(d & y.string(spin))
        (q,) = occupied_orbitals(d & x.string(spin))
        return float(_single_value(y, spin, p, q, H))
    if na == 2:
        (p,) = occupied_orbitals(da & y.alpha)
        (q,) = occupied_orbitals(da & x.alpha)
        (r,) = occupied_orbitals(db & y.beta)
        (s,) = occupied_orbitals(db & x.beta)
        sign = excitation_phase(y.alpha, p, q) * excitation_phase(y.beta, r, s)
        return float(sign * H.eri_value(q, p, s, r))
    spin = ALPHA if na else BETA
    d = da if na else db
    src = y.string(spin)
    p1, p2 = occupied_orbitals(d & src)
    q1, q2 = occupied_orbitals(d & x.string(spin))
    mid = src ^ (1 << p2) ^ (1 << q2)
    sign = excitation_phase(src, p2, q2) * excitation_phase(mid, p1, q1)
    return float(sign * (H.eri_value(q1, p1, q2, p2) - H.eri_value(q1, p2, q2, p1)))
