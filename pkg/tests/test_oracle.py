from __future__ import annotations

import math

import numpy as np
import pytest

from sqdkit.configs import Configuration, SystemSpec, all_configurations_array, to_configurations
from sqdkit.errors import CapExceeded
from sqdkit.integrals import FragmentHamiltonian, diagonal_element, packed_eri_size, random_hamiltonian
from sqdkit.oracle import (
    assemble_dense,
    fci_solve,
    lanczos_ground_state,
    operator_apply_reference,
    reference_matrix,
)


def test_single_configuration():
    eri = np.zeros(packed_eri_size(1))
    eri[0] = 0.5
    H = FragmentHamiltonian(SystemSpec(1, 1, 1), 0.0, np.array([[-1.0]]), eri)
    res = fci_solve(H)
    assert res.ground_energy == pytest.approx(-1.5, abs=1e-15)
    assert res.dimension == 1


def test_two_orbital_model_closed_form():
    # two closed shells coupled by K, two open shells coupled by K: lowest root
    # is the closed-shell pair, E = (a + d)/2 - sqrt(((a - d)/2)^2 + K^2)
    e1, e2, j11, j22, j12, k = -1.25, -0.47, 0.67, 0.70, 0.66, 0.18
    full = np.zeros((2, 2, 2, 2))
    full[0, 0, 0, 0], full[1, 1, 1, 1] = j11, j22
    full[0, 0, 1, 1] = full[1, 1, 0, 0] = j12
    full[0, 1, 1, 0] = full[1, 0, 0, 1] = full[0, 1, 0, 1] = full[1, 0, 1, 0] = k
    H = FragmentHamiltonian.from_full(SystemSpec(2, 1, 1), 0.0, np.diag([e1, e2]), full)
    a, d = 2 * e1 + j11, 2 * e2 + j22
    closed_form = (a + d) / 2 - math.sqrt(((a - d) / 2) ** 2 + k**2)
    M = reference_matrix(all_configurations_array(H.spec), H)
    assert fci_solve(H).ground_energy == pytest.approx(closed_form, abs=1e-12)
    assert fci_solve(H).ground_energy == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-12)


@pytest.mark.parametrize("seed", range(4))
def test_reference_diagonal_matches_slater_condon(seed):
    H = random_hamiltonian(SystemSpec(4, 2, 1), seed)
    for c in to_configurations(all_configurations_array(H.spec), 4):
        assert operator_apply_reference(c, H)[c] == pytest.approx(diagonal_element(c, H), abs=1e-12)


def test_reference_conserves_particle_numbers(h_44):
    c = Configuration(0b0011, 0b0101, 4)
    for y in operator_apply_reference(c, h_44):
        assert (y.n_alpha, y.n_beta) == (2, 2)


def test_dense_matrix_symmetric(h_633):
    M = assemble_dense(all_configurations_array(h_633.spec), h_633)
    assert np.abs(M - M.T).max() <= 1e-12


@pytest.mark.parametrize("spec,seed", [(SystemSpec(4, 2, 2), 0), (SystemSpec(5, 2, 3), 1), (SystemSpec(6, 3, 3), 2),
                                       (SystemSpec(6, 1, 4), 3)])
def test_dense_and_lanczos_agree(spec, seed):
    H = random_hamiltonian(spec, seed)
    dense = fci_solve(H, method="dense")
    lanczos = fci_solve(H, method="lanczos")
    assert dense.method == "dense" and lanczos.method == "lanczos"
    assert dense.ground_energy == pytest.approx(lanczos.ground_energy, abs=1e-9)
    assert abs(dense.ground_vector @ lanczos.ground_vector) == pytest.approx(1.0, abs=1e-7)
    assert np.linalg.norm(dense.ground_vector) == pytest.approx(1.0, abs=1e-12)


def test_vector_is_eigenvector(h_633):
    res = fci_solve(h_633)
    M = assemble_dense(res.configs, h_633)
    r = M @ res.ground_vector - res.ground_energy * res.ground_vector
    assert np.linalg.norm(r) < 1e-10
    assert res.ground_energy == pytest.approx(np.linalg.eigvalsh(M)[0], abs=1e-12)


def test_caps():
    H = random_hamiltonian(SystemSpec(8, 4, 4), 0)
    with pytest.raises(CapExceeded):
        fci_solve(H, cap=1000)
    with pytest.raises(CapExceeded):
        fci_solve(H, method="dense", dense_cap=1000)


def test_lanczos_on_explicit_matrix():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((200, 200))
    A = A + A.T
    e, v, resid, iters = lanczos_ground_state(lambda x: A @ x, 200, tol=1e-10)
    assert e == pytest.approx(np.linalg.eigvalsh(A)[0], abs=1e-9)
    assert resid < 1e-8 and iters <= 200
