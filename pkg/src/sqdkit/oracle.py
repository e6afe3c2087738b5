"""Brute-force full CI: the ground truth every other module is checked against.

Two independent matrix-element paths exist on purpose. ``assemble_dense``
uses the Slater-Condon rules of :mod:`sqdkit.integrals`; the reference
``operator_apply_reference`` applies every second-quantized Hamiltonian
term to an occupation vector with Jordan-Wigner sign tracking and shares no
code with them.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .configs import Configuration, all_configurations_array, fci_dimension
from .errors import CapExceeded, NoConvergence
from .integrals import FragmentHamiltonian, coupling_element

DENSE_CAP = 10**4
LANCZOS_CAP = 10**6
# 'auto' switches to Lanczos above this size: entrywise Python assembly plus a
# dense eigh costs tens of seconds already near 5,000 configurations
AUTO_DENSE_LIMIT = 2000


@dataclass
class DenseSpectrumResult:
    ground_energy: float
    ground_vector: np.ndarray
    dimension: int
    configs: np.ndarray
    method: str = "dense"


# -- explicit operator application ------------------------------------------


def _annihilate(state: int, i: int):
    if not (state >> i) & 1:
        return 0, state
    sign = -1 if bin(state & ((1 << i) - 1)).count("1") & 1 else 1
    return sign, state ^ (1 << i)


def _create(state: int, i: int):
    if (state >> i) & 1:
        return 0, state
    sign = -1 if bin(state & ((1 << i) - 1)).count("1") & 1 else 1
    return sign, state | (1 << i)


def operator_apply_reference(c: Configuration, H: FragmentHamiltonian) -> dict[Configuration, float]:
    """H|c> as {configuration: amplitude}, by explicit operator application.

    Spin orbital ``p`` is alpha orbital ``p`` and ``M + p`` is beta orbital
    ``p``; determinants are ordered products of creators, alpha block first.
    """
    m = c.norb
    low = (1 << m) - 1
    ket = c.alpha | (c.beta << m)
    out: dict[int, float] = {ket: H.e_core}
    spins = (0, m)

    def add(state, amp):
        out[state] = out.get(state, 0.0) + amp

    for off in spins:
        for q in range(m):
            s1, k1 = _annihilate(ket, off + q)
            if not s1:
                continue
            for p in range(m):
                s2, k2 = _create(k1, off + p)
                if s2 and H.h[p, q] != 0.0:
                    add(k2, s1 * s2 * H.h[p, q])

    # 1/2 sum (pq|rs) a+_{p s} a+_{r t} a_{s t} a_{q s}
    for off_q in spins:
        for q in range(m):
            s1, k1 = _annihilate(ket, off_q + q)
            if not s1:
                continue
            for off_s in spins:
                for s in range(m):
                    s2, k2 = _annihilate(k1, off_s + s)
                    if not s2:
                        continue
                    for r in range(m):
                        s3, k3 = _create(k2, off_s + r)
                        if not s3:
                            continue
                        for p in range(m):
                            s4, k4 = _create(k3, off_q + p)
                            if not s4:
                                continue
                            v = H.eri_value(p, q, r, s)
                            if v != 0.0:
                                add(k4, 0.5 * s1 * s2 * s3 * s4 * v)

    return {Configuration(k & low, k >> m, m): v for k, v in out.items()}


def reference_matrix(configs: np.ndarray, H: FragmentHamiltonian) -> np.ndarray:
    """Dense projected matrix from ``operator_apply_reference`` columns."""
    n = len(configs)
    index = {(int(a), int(b)): i for i, (a, b) in enumerate(configs)}
    M = np.zeros((n, n))
    for j, (a, b) in enumerate(configs):
        for y, amp in operator_apply_reference(Configuration(int(a), int(b), H.norb), H).items():
            i = index.get((y.alpha, y.beta))
            if i is not None:
                M[i, j] += amp
    return M


# -- Slater-Condon dense assembly -------------------------------------------


def assemble_dense(configs: np.ndarray, H: FragmentHamiltonian) -> np.ndarray:
    """Projected matrix over ``configs`` entrywise from the Slater-Condon rules."""
    configs = np.asarray(configs, dtype=np.uint64)
    n = len(configs)
    m = H.norb
    cfg = [Configuration(int(a), int(b), m) for a, b in configs]
    M = np.zeros((n, n))
    for i in range(n):
        ham = np.bitwise_count(configs[i:, 0] ^ configs[i, 0]) + np.bitwise_count(configs[i:, 1] ^ configs[i, 1])
        for j in np.flatnonzero(ham <= 4) + i:
            M[i, j] = M[j, i] = coupling_element(cfg[i], cfg[j], H)
    return M


# -- FCI ---------------------------------------------------------------------


def lanczos_ground_state(op, n: int, *, max_iter: int = 300, tol: float = 1e-9, seed: int = 0):
    """Lowest eigenpair of a symmetric operator by Lanczos with full reorthogonalization.

    Returns (energy, vector, residual_norm, iterations).
    """
    rng = np.random.default_rng(seed)
    k_max = min(max_iter, n)
    Q = np.empty((n, k_max))
    alpha = np.empty(k_max)
    beta = np.empty(k_max)
    q = rng.standard_normal(n)
    Q[:, 0] = q / np.linalg.norm(q)
    energy, vec, resid = np.inf, Q[:, 0], np.inf
    for k in range(k_max):
        w = op(Q[:, k])
        alpha[k] = Q[:, k] @ w
        for _ in range(2):
            w -= Q[:, : k + 1] @ (Q[:, : k + 1].T @ w)
        beta[k] = np.linalg.norm(w)
        evals, evecs = eigh_tridiagonal(alpha[: k + 1], beta[:k], select="i", select_range=(0, 0))
        energy = float(evals[0])
        resid = abs(beta[k] * evecs[-1, 0])
        if resid <= tol or beta[k] < 1e-14 or k + 1 == k_max:
            vec = Q[:, : k + 1] @ evecs[:, 0]
            vec /= np.linalg.norm(vec)
            break
        Q[:, k + 1] = w / beta[k]
    true_resid = float(np.linalg.norm(op(vec) - energy * vec))
    return energy, vec, true_resid, k + 1


def fci_solve(
    H: FragmentHamiltonian,
    cap: int = LANCZOS_CAP,
    *,
    dense_cap: int = DENSE_CAP,
    method: str = "auto",
    tol: float = 1e-9,
) -> DenseSpectrumResult:
    """Exact ground state over the full configuration enumeration.

    ``method='dense'`` assembles H entrywise from the Slater-Condon rules;
    ``'lanczos'`` runs matrix-free over the full basis; ``'auto'`` picks dense
    up to ``min(dense_cap, AUTO_DENSE_LIMIT)``.
    """
    dim = fci_dimension(H.spec)
    if dim > cap:
        raise CapExceeded(f"FCI dimension {dim} exceeds cap {cap}")
    if method == "auto":
        method = "dense" if dim <= min(dense_cap, AUTO_DENSE_LIMIT) else "lanczos"
    configs = all_configurations_array(H.spec, cap=cap)
    if method == "dense":
        if dim > dense_cap:
            raise CapExceeded(f"dense FCI dimension {dim} exceeds cap {dense_cap}")
        w, U = np.linalg.eigh(assemble_dense(configs, H))
        vec = U[:, 0]
        energy = float(w[0])
    elif method == "lanczos":
        from .sbd import apply_hamiltonian, build_basis

        basis = build_basis(configs, H)
        energy, vec, resid, _ = lanczos_ground_state(
            lambda x: apply_hamiltonian(basis, H, x), dim, tol=tol
        )
        if resid > 1e-6:
            raise NoConvergence(f"Lanczos residual {resid:.3e}", (energy, vec))
    else:
        raise ValueError(f"unknown method {method!r}")
    i = int(np.argmax(np.abs(vec)))
    vec = -vec if vec[i] < 0 else vec
    return DenseSpectrumResult(energy, vec, dim, configs, method)
