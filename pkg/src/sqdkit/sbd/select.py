"""Subspace extension and amplitude-based trimming."""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from ..configs import sort_unique
from . import _kernels as K
from .basis import SubspaceBasis


def extend_basis(basis: SubspaceBasis, H, max_distance: int = 2, screen: float = 0.0) -> np.ndarray:
    """Basis configurations plus every single-excitation partner.

    With ``screen > 0`` a partner y of x is only added when |H_xy| > screen.
    Only Hamming distance 2 is supported; wider extensions are disabled.
    """
    if max_distance != 2:
        raise ValueError(f"only max_distance=2 is supported, got {max_distance}")
    alphas = np.ascontiguousarray(basis.configs[:, 0])
    betas = np.ascontiguousarray(basis.configs[:, 1])
    _, neighbours = K.single_neighbours(alphas, betas, basis.norb)
    if screen > 0.0:
        vals = K.single_neighbour_values(alphas, betas, basis.norb, H.h, H.eri_full)
        neighbours = neighbours[np.abs(vals) > screen]
    return sort_unique(np.concatenate([basis.configs, neighbours]))


def top_count(percent: float, n: int) -> int:
    """ceil(percent / 100 * n), evaluated exactly."""
    if not 0 < percent <= 100:
        raise ValueError(f"percent must lie in (0, 100], got {percent}")
    return min(n, math.ceil(Fraction(str(percent)) * n / 100))


def rank_by_amplitude(v: np.ndarray) -> np.ndarray:
    """Row indices by decreasing |v|; ties keep configuration order."""
    return np.lexsort((np.arange(len(v)), -np.abs(v)))


def trim_by_amplitude(
    basis: SubspaceBasis,
    v: np.ndarray,
    *,
    top_percent: float | None = None,
    threshold: float | None = None,
) -> np.ndarray:
    """Keep the top ``top_percent`` configurations by |v|, or those with |v| > threshold."""
    v = np.asarray(v)
    if len(v) != len(basis):
        raise ValueError("vector is not aligned with the basis")
    if (top_percent is None) == (threshold is None):
        raise ValueError("give exactly one of top_percent or threshold")
    if top_percent is not None:
        keep = np.sort(rank_by_amplitude(v)[: top_count(top_percent, len(v))])
    else:
        if threshold < 0:
            raise ValueError("threshold must be >= 0")
        keep = np.flatnonzero(np.abs(v) > threshold)
    return basis.configs[keep]
