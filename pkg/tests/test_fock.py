import math

import numpy as np
import pytest

from esqpt_lab import fock

ALL = ["LMG", "VM2D", "VM3D", "IBM"]


def test_lmg_n2_basis_order():
    b = fock.build_basis("LMG", 2)
    assert b.states == ((2, 0), (1, 1), (0, 2))
    assert b.dim == 3


@pytest.mark.parametrize("model,N,dim", [("VM2D", 1, 3), ("IBM", 2, 21)])
def test_small_dimensions(model, N, dim):
    assert fock.build_basis(model, N).dim == dim


@pytest.mark.parametrize("model", ALL)
def test_dimension_formulas(model):
    d = fock.MODEL_DIMS[model]
    for N in range(1, 11 if model != "IBM" else 8):
        b = fock.build_basis(model, N)
        assert b.dim == math.comb(N + d, d) == fock.fock_dimension(model, N)
        assert all(sum(s) == N for s in b.states)
        assert list(b.states) == sorted(b.states, reverse=True)


def test_invalid_inputs():
    with pytest.raises(ValueError):
        fock.build_basis("XYZ", 2)
    with pytest.raises(ValueError):
        fock.build_basis("LMG", 0)
    with pytest.raises(ValueError):
        fock.operator_matrix(fock.build_basis("LMG", 2), "D_+")
    with pytest.raises(ValueError):
        fock.full_hamiltonian(fock.build_basis("LMG", 2), 1.5)


def test_lmg_jx_entries():
    Jx = fock.operator_matrix(fock.build_basis("LMG", 2), "J_x").entries
    r = math.sqrt(2) / 2
    np.testing.assert_allclose(Jx, [[0, r, 0], [r, 0, r], [0, r, 0]], atol=1e-15)


def test_vm2d_ell_and_dplus():
    b = fock.build_basis("VM2D", 2)
    ell = fock.operator_matrix(b, "ell").entries
    occ = b.occupations()
    np.testing.assert_array_equal(np.diag(ell), occ[:, 1] - occ[:, 2])
    Dp = fock.operator_matrix(b, "D_+").entries
    src, tgt = b.index[(1, 1, 0)], b.index[(0, 2, 0)]
    assert Dp[tgt, src] == pytest.approx(2.0)


def test_dminus_is_transpose_of_dplus():
    b = fock.build_basis("VM2D", 4)
    Dp = fock.operator_matrix(b, "D_+").entries
    Dm = fock.operator_matrix(b, "D_-").entries
    np.testing.assert_array_equal(Dm, Dp.T)


def test_lmg_hamiltonian_examples():
    b = fock.build_basis("LMG", 2)
    np.testing.assert_array_equal(fock.full_hamiltonian(b, 0.0).entries, np.diag([0.0, 1.0, 2.0]))
    np.testing.assert_allclose(fock.oracle_spectrum(b, 1.0), [0, 0, 2], atol=1e-14)
    r = math.sqrt(0.5)
    np.testing.assert_allclose(fock.oracle_spectrum(b, 0.5), [1 - r, 0.5, 1 + r], atol=1e-14)


def test_vm2d_xi1_ell0():
    b = fock.build_basis("VM2D", 2)
    lab = fock.conserved_expectations(b, 1.0)
    np.testing.assert_allclose(np.sort(lab.energies[lab.labels == 0]), [0.0, 3.0], atol=1e-12)


@pytest.mark.parametrize("model", ALL)
def test_xi0_spectrum_is_quanta(model):
    b = fock.build_basis(model, 3)
    expected = np.sort(b.occupations()[:, 1:].sum(axis=1)).astype(float)
    np.testing.assert_allclose(fock.oracle_spectrum(b, 0.0), expected, atol=1e-14)


def test_conserved_labels_examples():
    lab = fock.conserved_expectations(fock.build_basis("LMG", 2), 0.5)
    assert list(lab.labels) == [1, -1, 1]
    lab = fock.conserved_expectations(fock.build_basis("VM2D", 1), 0.3)
    assert sorted(lab.labels) == [-1, 0, 1]
    lab = fock.conserved_expectations(fock.build_basis("LMG", 2), 1.0)
    assert sorted(lab.labels[:2]) == [-1, 1]


_CONSERVED = {"LMG": "parity", "VM2D": "ell", "VM3D": "J2", "IBM": "so5"}


@pytest.mark.parametrize("model", ALL)
@pytest.mark.parametrize("xi", [0.0, 0.2, 0.5, 1.0])
def test_conserved_quantity_commutes(model, xi):
    for N in range(1, 7 if model != "IBM" else 5):
        b = fock.build_basis(model, N)
        H = fock.full_hamiltonian(b, xi)
        C = fock.operator_matrix(b, _CONSERVED[model]).entries
        assert np.abs(H.entries @ C - C @ H.entries).max() < 1e-10
        assert H.asymmetry() < 1e-12


def test_lmg_casimir_identity():
    for N in range(1, 8):
        b = fock.build_basis("LMG", N)
        x = fock.operator_matrix(b, "J_x")
        y = fock.operator_matrix(b, "J_y")
        z = fock.operator_matrix(b, "J_z").entries
        # J_y = -i Y with Y real antisymmetric, so J_y^2 = -Y^2
        y2 = (y.phase ** 2 * (y.entries @ y.entries)).real
        total = x.entries @ x.entries + y2 + z @ z
        np.testing.assert_allclose(total, (N / 2) * (N / 2 + 1) * np.eye(N + 1), atol=1e-12)
        assert y.asymmetry() == 0.0


def test_ibm_pairing_is_twice_a_pair_product():
    """2(N(N+4) - C_so6) pairs s^2 + d.d; the pair_product helper uses d.d - s^2.

    The two differ by the phase i^{n_d}, so their spectra coincide.
    """
    b = fock.build_basis("IBM", 3)
    Pd = fock.operator_matrix(b, "P_d").entries
    pp = fock.operator_matrix(b, "pair_product").entries
    np.testing.assert_allclose(np.linalg.eigvalsh(Pd), 2 * np.linalg.eigvalsh(pp), atol=1e-10)


def test_dense_guard():
    with pytest.raises(ValueError, match="dense oracle"):
        fock.oracle_spectrum(fock.build_basis("IBM", 12), 0.5)
