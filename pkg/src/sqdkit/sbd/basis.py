"""Explicit configuration subspaces and the matrix-free projected Hamiltonian."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import _threads  # noqa: F401  (configures numba before the kernels load)
from ..configs import Configuration, SystemSpec, as_config_array, sort_unique, valid_mask
from ..errors import EmptyBasis, SpecMismatch
from . import _kernels as K

# Dense (alpha, beta) -> row lookup table is used below this many entries.
DENSE_TABLE_LIMIT = 1 << 23


@dataclass(frozen=True, eq=False)
class SingleLinks:
    ptr: np.ndarray
    target: np.ndarray
    p: np.ndarray
    q: np.ndarray
    sign: np.ndarray

    def __len__(self):
        return len(self.target)


@dataclass(frozen=True, eq=False)
class DoubleLinks:
    ptr: np.ndarray
    target: np.ndarray
    orbs: np.ndarray
    sign: np.ndarray

    def __len__(self):
        return len(self.target)


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Sorted, deduplicated configurations plus excitation-mapping tables.

    Rows are ordered by (alpha, beta), so the rows sharing an alpha string
    form the contiguous block ``row_ptr[ia]:row_ptr[ia + 1]`` with ascending
    beta indices. Link tables are built over the unique alpha and beta
    strings present and only contain targets that are themselves present.
    """

    spec: SystemSpec
    configs: np.ndarray
    alpha_strings: np.ndarray
    beta_strings: np.ndarray
    cfg_a: np.ndarray
    cfg_b: np.ndarray
    row_ptr: np.ndarray
    table: np.ndarray | None
    alpha_singles: SingleLinks
    beta_singles: SingleLinks
    alpha_doubles: DoubleLinks
    beta_doubles: DoubleLinks
    occ_a: np.ndarray
    occ_b: np.ndarray
    _diag_cache: dict = field(default_factory=dict, repr=False)

    def __len__(self) -> int:
        return len(self.configs)

    @property
    def norb(self) -> int:
        return self.spec.norb

    def positions(self, configs) -> np.ndarray:
        """Row index of each configuration, -1 where absent."""
        arr = as_config_array(configs)
        return K.locate(
            self.alpha_strings, self.beta_strings, self.row_ptr, self.cfg_b,
            np.ascontiguousarray(arr[:, 0]), np.ascontiguousarray(arr[:, 1]),
        )

    def index_of(self, c: Configuration) -> int:
        i = int(self.positions([c])[0])
        if i < 0:
            raise KeyError(c)
        return i

    def configurations(self) -> list[Configuration]:
        return [Configuration(int(a), int(b), self.norb) for a, b in self.configs]

    def diagonal(self, H) -> np.ndarray:
        hit = self._diag_cache.get(id(H))
        if hit is not None and hit[0] is H:
            return hit[1]
        _check_spec(self.spec, H.spec)
        eri4 = H.eri_full
        ea = K.spin_diagonal(self.occ_a, H.h, eri4)
        eb = K.spin_diagonal(self.occ_b, H.h, eri4)
        diag = K.config_diagonal(self.cfg_a, self.cfg_b, self.occ_a, self.occ_b, ea, eb, eri4, H.e_core)
        diag.setflags(write=False)
        self._diag_cache.clear()
        self._diag_cache[id(H)] = (H, diag)
        return diag


def _check_spec(a: SystemSpec, b: SystemSpec) -> None:
    if a != b:
        raise SpecMismatch(f"basis built for {a}, Hamiltonian is {b}")


def build_basis(configs, H) -> SubspaceBasis:
    """Sort/deduplicate ``configs`` and precompute the excitation tables.

    ``H`` may be a FragmentHamiltonian or a bare SystemSpec; only the
    particle-number sector is needed, matrix elements are evaluated later.
    """
    spec: SystemSpec = getattr(H, "spec", H)
    arr = sort_unique(as_config_array(configs))
    if len(arr) == 0:
        raise EmptyBasis("cannot build a basis from zero configurations")
    if spec.norb < 64 and np.any(arr >> np.uint64(spec.norb)):
        raise SpecMismatch("configuration has bits beyond norb")
    if not np.all(valid_mask(arr, spec)):
        raise SpecMismatch(f"configurations outside the ({spec.n_alpha}, {spec.n_beta}) sector")

    alpha_strings, cfg_a = np.unique(arr[:, 0], return_inverse=True)
    beta_strings, cfg_b = np.unique(arr[:, 1], return_inverse=True)
    cfg_a = cfg_a.astype(np.int64).ravel()
    cfg_b = cfg_b.astype(np.int64).ravel()
    row_ptr = np.zeros(len(alpha_strings) + 1, dtype=np.int64)
    np.cumsum(np.bincount(cfg_a, minlength=len(alpha_strings)), out=row_ptr[1:])

    table = None
    if len(alpha_strings) * len(beta_strings) <= DENSE_TABLE_LIMIT:
        table = np.full((len(alpha_strings), len(beta_strings)), -1, dtype=np.int64)
        table[cfg_a, cfg_b] = np.arange(len(arr))

    m = spec.norb
    return SubspaceBasis(
        spec=spec,
        configs=arr,
        alpha_strings=alpha_strings,
        beta_strings=beta_strings,
        cfg_a=cfg_a,
        cfg_b=cfg_b,
        row_ptr=row_ptr,
        table=table,
        alpha_singles=SingleLinks(*K.single_links(alpha_strings, m)),
        beta_singles=SingleLinks(*K.single_links(beta_strings, m)),
        alpha_doubles=DoubleLinks(*K.double_links(alpha_strings, m)),
        beta_doubles=DoubleLinks(*K.double_links(beta_strings, m)),
        occ_a=K.occupation_table(alpha_strings, m, spec.n_alpha),
        occ_b=K.occupation_table(beta_strings, m, spec.n_beta),
    )


_NO_TABLE = np.full((1, 1), -1, dtype=np.int64)


def apply_hamiltonian(basis: SubspaceBasis, H, v: np.ndarray) -> np.ndarray:
    """w = P H P v without materializing H; ``v`` may be a vector or (n, k) block."""
    _check_spec(basis.spec, H.spec)
    v = np.asarray(v, dtype=np.float64)
    if v.shape[0] != len(basis):
        raise ValueError(f"vector length {v.shape[0]} does not match basis size {len(basis)}")
    V = np.ascontiguousarray(v.reshape(len(basis), -1))
    W = np.empty_like(V)
    sa, sb = basis.alpha_singles, basis.beta_singles
    da, db = basis.alpha_doubles, basis.beta_doubles
    use_table = basis.table is not None
    K.matvec(
        V, W, basis.diagonal(H), basis.cfg_a, basis.cfg_b, basis.row_ptr, basis.cfg_b,
        basis.table if use_table else _NO_TABLE, use_table,
        sa.ptr, sa.target, sa.p, sa.q, sa.sign,
        sb.ptr, sb.target, sb.p, sb.q, sb.sign,
        da.ptr, da.target, da.orbs, da.sign,
        db.ptr, db.target, db.orbs, db.sign,
        basis.occ_a, basis.occ_b, H.h, H.eri_full,
    )
    return W.reshape(v.shape)


def dense_projection(basis: SubspaceBasis, H) -> np.ndarray:
    """Projected matrix assembled column-block-wise through the matvec kernel."""
    n = len(basis)
    M = apply_hamiltonian(basis, H, np.eye(n))
    return 0.5 * (M + M.T)
