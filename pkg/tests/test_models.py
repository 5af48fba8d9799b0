import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from esqpt_lab import fock
from esqpt_lab import eigensolver as es
from esqpt_lab.analysis import union_spectrum
from esqpt_lab.models import (
    ModelInstance,
    SectorLabel,
    analytic_limit_spectrum,
    block_from_json,
    block_to_json,
    build_block,
    critical_xi,
    fock_to_block_index,
    sector_list,
    sector_quanta,
    total_dimension,
)
from conftest import embed

ALL = ["LMG", "VM2D", "VM3D", "IBM"]
KIND = {"LMG": "parity", "VM2D": "ell", "VM3D": "J", "IBM": "seniority"}


def test_instance_validation():
    with pytest.raises(ValueError):
        ModelInstance("LMG", 0, 0.5)
    with pytest.raises(ValueError):
        ModelInstance("LMG", 3, -0.1)
    with pytest.raises(ValueError):
        ModelInstance("NOPE", 3, 0.1)
    with pytest.raises(ValueError):
        build_block(ModelInstance("LMG", 3, 0.1), SectorLabel("parity", 2))
    with pytest.raises(ValueError):
        build_block(ModelInstance("LMG", 3, 0.1), SectorLabel("parity", 0), bits=32)


def test_sector_lists():
    assert [len(sector_quanta(ModelInstance("LMG", 2, 0), s)) for s in sector_list(ModelInstance("LMG", 2, 0))] == [2, 1]
    inst = ModelInstance("VM2D", 3, 0)
    dims = {s.value: len(sector_quanta(inst, s)) for s in sector_list(inst)}
    assert dims == {-3: 1, -2: 1, -1: 2, 0: 2, 1: 2, 2: 1, 3: 1}
    inst = ModelInstance("IBM", 2, 0)
    assert {s.value: len(sector_quanta(inst, s)) for s in sector_list(inst)} == {0: 2, 1: 1, 2: 1}


def test_lmg_block_example():
    b = build_block(ModelInstance("LMG", 2, 0.5), SectorLabel("parity", 0))
    np.testing.assert_allclose(b.diag, [0.5, 1.5], atol=1e-15)
    np.testing.assert_allclose(b.offdiag, [-0.5], atol=1e-15)


@pytest.mark.parametrize("parity", [0, 1])
def test_lmg_xi0_block_is_diagonal(parity):
    b = build_block(ModelInstance("LMG", 17, 0.0), SectorLabel("parity", parity))
    np.testing.assert_array_equal(b.diag, b.basis_quanta)
    assert not np.any(b.offdiag)
    assert len(b.offdiag) == b.dim - 1


def test_vm2d_xi1_ell0_block():
    b = build_block(ModelInstance("VM2D", 2, 1.0), SectorLabel("ell", 0))
    np.testing.assert_allclose(es.eig_values(b).values(), [0.0, 3.0], atol=1e-13)


def test_vm2d_mirror_blocks_identical():
    inst = ModelInstance("VM2D", 12, 0.37)
    for l in range(1, 13):
        a, b = build_block(inst, SectorLabel("ell", l)), build_block(inst, SectorLabel("ell", -l))
        assert np.array_equal(a.diag, b.diag) and np.array_equal(a.offdiag, b.offdiag)


@pytest.mark.parametrize("model", ALL)
def test_total_dimension_matches_fock(model):
    for N in range(1, 7):
        assert total_dimension(ModelInstance(model, N, 0.3)) == fock.fock_dimension(model, N)


@pytest.mark.parametrize("model", ALL)
@pytest.mark.parametrize("xi", [0.0, 0.2, 0.5, 0.8, 1.0])
def test_oracle_equivalence(model, xi):
    for N in range(1, 7 if model != "IBM" else 5):
        inst = ModelInstance(model, N, xi)
        ref = fock.oracle_spectrum(fock.build_basis(model, N), xi)
        got = union_spectrum(inst)
        assert len(got) == len(ref)
        assert np.abs(got - ref).max() < 1e-9


@pytest.mark.parametrize("model", ["LMG", "VM2D"])
@settings(max_examples=25, deadline=None)
@given(N=st.integers(1, 7), xi=st.floats(0, 1), pick=st.integers(0, 100))
def test_block_entries_equal_oracle_restriction(model, N, xi, pick):
    """Entry by entry: the block is the full Hamiltonian restricted to the sector."""
    inst = ModelInstance(model, N, xi)
    labels = sector_list(inst)
    lab = labels[pick % len(labels)]
    block = build_block(inst, lab)
    H = fock.full_hamiltonian(fock.build_basis(model, N), xi).entries
    E = np.column_stack([embed(inst, lab, np.eye(block.dim)[:, k]) for k in range(block.dim)])
    np.testing.assert_allclose(E.T @ H @ E, block.dense(), atol=1e-12)


def test_fock_to_block_index_rejects_other_models():
    with pytest.raises(ValueError):
        fock_to_block_index(ModelInstance("IBM", 2, 0.1), SectorLabel("seniority", 0), (2, 0, 0, 0, 0, 0))


@pytest.mark.parametrize("model", ALL)
@pytest.mark.parametrize("xi", [0.0, 1.0])
def test_analytic_limits(model, xi):
    for N in (1, 2, 7, 20, 50):
        inst = ModelInstance(model, N, xi)
        for lab in sector_list(inst, distinct=True):
            got = es.eig_values(build_block(inst, lab)).values()
            np.testing.assert_allclose(got, analytic_limit_spectrum(inst, lab), atol=1e-10)


def test_analytic_limit_examples():
    inst = ModelInstance("LMG", 2, 1.0)
    np.testing.assert_allclose(analytic_limit_spectrum(inst, SectorLabel("parity", 0)), [0, 2])
    np.testing.assert_allclose(analytic_limit_spectrum(inst, SectorLabel("parity", 1)), [0])
    inst = ModelInstance("VM2D", 50, 1.0)
    assert analytic_limit_spectrum(inst, SectorLabel("ell", 0))[0] == 0
    assert analytic_limit_spectrum(inst, SectorLabel("ell", 1))[0] == 0
    with pytest.raises(ValueError):
        analytic_limit_spectrum(ModelInstance("LMG", 4, 0.5), SectorLabel("parity", 0))


def test_ground_energy_continuous_n50():
    from esqpt_lab.analysis import scaled_ground_energy
    for model in ALL:
        e = scaled_ground_energy(model, 50, np.arange(0, 1.0005, 1e-3))
        assert np.abs(np.diff(e)).max() < 0.01


def test_critical_xi():
    assert critical_xi("LMG") == critical_xi("VM2D") == critical_xi("VM3D") == pytest.approx(0.2)
    assert critical_xi("IBM") == pytest.approx(1 / 9)


@pytest.mark.parametrize("bits", [None, 80, 300])
def test_block_json_round_trip(bits):
    b = build_block(ModelInstance("IBM", 9, 0.1), SectorLabel("seniority", 3), bits)
    text = block_to_json(b)
    c = block_from_json(text)
    assert c.bits == bits and c.label == b.label and c.basis_quanta == b.basis_quanta
    assert list(c.diag) == list(b.diag) and list(c.offdiag) == list(b.offdiag)
    import json
    doc = json.loads(text)
    assert set(doc) == {"model", "N", "xi", "sector", "bits", "diag", "offdiag"}
    assert all(isinstance(x, str) for x in doc["diag"])


def test_arbitrary_entries_not_rounded_through_double():
    import gmpy2
    b = build_block(ModelInstance("LMG", 10, 0.1), SectorLabel("parity", 0), bits=200)
    # diag[1] = 0.9 * 2 + (0.1/10)(8*7 + 0) exactly representable only as a decimal
    with gmpy2.context(precision=200):
        expected = gmpy2.mpfr("0.9") * 2 + gmpy2.mpfr("0.1") / 10 * (8 * 7 + 2 * 1)
        assert abs(b.diag[1] - expected) < gmpy2.mpfr(2) ** -190
        assert abs(b.diag[1] - gmpy2.mpfr(float(b.diag[1]))) > gmpy2.mpfr(2) ** -100


def test_sector_label_parse_round_trip():
    for lab in (SectorLabel("ell", -3), SectorLabel("parity", 1)):
        assert SectorLabel.parse(str(lab)) == lab
