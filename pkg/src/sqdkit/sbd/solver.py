"""Lowest eigenpair of the projected Hamiltonian (Davidson with dense fallback)."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import EmptyBasis, NoConvergence
from .basis import SubspaceBasis, apply_hamiltonian, dense_projection


@dataclass
class SolverOptions:
    tol: float = 1e-8
    max_matvecs: int = 2000
    max_subspace: int = 24
    restart_size: int = 4
    dense_threshold: int = 512
    shift_guard: float = 1e-8
    # relative size of the seeded perturbation mixed into the unit-vector guess
    guess_noise: float = 1e-4


@dataclass
class GroundStateResult:
    energy: float
    vector: np.ndarray
    residual_norm: float
    iterations: int
    matvec_count: int
    wall_times: dict = field(default_factory=dict)
    converged: bool = True


def _fix_sign(v: np.ndarray) -> np.ndarray:
    i = int(np.argmax(np.abs(v)))
    return -v if v[i] < 0 else v


def _dense_solve(basis, H, opts, t0) -> GroundStateResult:
    M = dense_projection(basis, H)
    t1 = time.perf_counter()
    w, U = np.linalg.eigh(M)
    v = _fix_sign(U[:, 0].copy())
    resid = float(np.linalg.norm(M @ v - w[0] * v))
    t2 = time.perf_counter()
    return GroundStateResult(
        energy=float(w[0]),
        vector=v,
        residual_norm=resid,
        iterations=1,
        matvec_count=len(basis),
        wall_times={"matvec": t1 - t0, "eigensolve": t2 - t1},
        converged=resid <= max(opts.tol, 1e-10),
    )


def solve_ground_state(
    basis: SubspaceBasis, H, opts: SolverOptions | None = None, *, raise_on_failure: bool = True
) -> GroundStateResult:
    """Lowest eigenpair of P H P.

    Bases up to ``opts.dense_threshold`` are diagonalized densely. Larger ones
    use Davidson iteration with a diagonal preconditioner, a subspace capped
    at ``max_subspace`` vectors and thick restarts to ``restart_size`` Ritz
    vectors. On failure ``NoConvergence`` carries the best iterate unless
    ``raise_on_failure`` is false, in which case it is returned flagged.
    """
    opts = opts or SolverOptions()
    n = len(basis)
    if n == 0:
        raise EmptyBasis("empty basis")
    t0 = time.perf_counter()
    if n <= opts.dense_threshold:
        res = _dense_solve(basis, H, opts, t0)
    else:
        res = _davidson(basis, H, opts, t0)
    if not res.converged and raise_on_failure:
        raise NoConvergence(
            f"Davidson stopped at residual {res.residual_norm:.3e} after {res.matvec_count} matvecs",
            res,
        )
    return res


def _orthonormalize(t: np.ndarray, V: np.ndarray) -> float:
    for _ in range(2):
        t -= V @ (V.T @ t)
    return float(np.linalg.norm(t))


def _davidson(basis, H, opts: SolverOptions, t0: float) -> GroundStateResult:
    n = len(basis)
    diag = basis.diagonal(H)
    t_mv = 0.0

    def op(x):
        nonlocal t_mv
        s = time.perf_counter()
        y = apply_hamiltonian(basis, H, x)
        t_mv += time.perf_counter() - s
        return y

    # unit vector on the lowest diagonal entry (first in configuration order on ties)
    v0 = np.zeros(n)
    v0[int(np.argmin(diag))] = 1.0
    noise = np.random.default_rng(0x5EED).standard_normal(n)
    v0 += opts.guess_noise * noise / np.linalg.norm(noise)
    v0 /= np.linalg.norm(v0)

    V = np.empty((n, opts.max_subspace))
    AV = np.empty((n, opts.max_subspace))
    V[:, 0] = v0
    AV[:, 0] = op(v0)
    m = 1
    matvecs = 1
    iterations = 0
    theta = float(v0 @ AV[:, 0])
    u = v0
    rnorm = np.inf
    while True:
        iterations += 1
        T = V[:, :m].T @ AV[:, :m]
        T = 0.5 * (T + T.T)
        w, S = np.linalg.eigh(T)
        theta = float(w[0])
        u = V[:, :m] @ S[:, 0]
        Au = AV[:, :m] @ S[:, 0]
        r = Au - theta * u
        rnorm = float(np.linalg.norm(r))
        if rnorm <= opts.tol or matvecs >= opts.max_matvecs:
            break
        if m == opts.max_subspace:
            keep = opts.restart_size
            V[:, :keep] = V[:, :m] @ S[:, :keep]
            AV[:, :keep] = AV[:, :m] @ S[:, :keep]
            m = keep
        denom = diag - theta
        small = np.abs(denom) < opts.shift_guard
        denom[small] = np.where(denom[small] < 0, -opts.shift_guard, opts.shift_guard)
        t = r / denom
        norm = _orthonormalize(t, V[:, :m])
        if norm < 1e-14:
            # preconditioned residual collapsed into the subspace: fall back to the raw residual
            t = r.copy()
            norm = _orthonormalize(t, V[:, :m])
            if norm < 1e-14:
                break
        V[:, m] = t / norm
        AV[:, m] = op(V[:, m])
        m += 1
        matvecs += 1

    # honest residual with a fresh product
    u = u / np.linalg.norm(u)
    Au = op(u)
    matvecs += 1
    theta = float(u @ Au)
    rnorm = float(np.linalg.norm(Au - theta * u))
    total = time.perf_counter() - t0
    return GroundStateResult(
        energy=theta,
        vector=_fix_sign(u),
        residual_norm=rnorm,
        iterations=iterations,
        matvec_count=matvecs,
        wall_times={"matvec": t_mv, "other": total - t_mv},
        converged=rnorm <= opts.tol,
    )
