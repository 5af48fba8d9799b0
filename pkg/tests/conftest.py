"""Shared brute-force references for the test suite."""
import numpy as np
import pytest

from esqpt_lab import fock
from esqpt_lab.models import ModelInstance, fock_to_block_index


def embed(instance, label, vector):
    """Place a sector-block vector into the full Fock space of ``instance``."""
    basis = fock.build_basis(instance.model, instance.N)
    out = np.zeros(basis.dim)
    for k, occ in enumerate(basis.states):
        idx = fock_to_block_index(instance, label, occ)
        if idx is not None:
            out[k] = vector[idx]
    return out


def dense_motoc(instance, label, vector, V, W, T=None, tol=1e-8):
    """Triple sum over the full-space eigenbasis of the dense Hamiltonian.

    The state ``|j>`` comes from the block solver; every intermediate state is
    a full-space eigenvector, so no selection rule is assumed.  Sums grouped by
    energy make the result independent of the basis chosen inside degenerate
    subspaces.
    """
    basis = fock.build_basis(instance.model, instance.N)
    H = fock.full_hamiltonian(basis, instance.xi).entries
    E, U = np.linalg.eigh(H)
    psi = embed(instance, label, vector)
    Ej = float(psi @ H @ psi)
    Vf = fock.operator_matrix(basis, V).entries
    Wf = fock.operator_matrix(basis, W).entries
    a = (U.T @ Wf @ psi)                  # <j|W^+|j1> = <j1|W|j>
    b = U.T @ Vf.T @ U                    # <j1|V^+|j2>
    c = U.T @ Wf @ U                      # <j2|W|j3>
    d = U.T @ Vf @ psi                    # <j3|V|j>
    amp = a[:, None, None] * b[:, :, None] * c[None, :, :] * d[None, None, :]
    omega = Ej + E[None, :, None] - E[:, None, None] - E[None, None, :]
    if T is None:
        return float(amp[np.abs(omega) <= tol].sum())
    x = omega * T
    with np.errstate(invalid="ignore", divide="ignore"):
        k = np.where(np.abs(x) > 1e-12, np.sin(x) / x, 1.0)
    return float(np.sum(amp * k))


@pytest.fixture
def lmg_small():
    return ModelInstance("LMG", 6, 0.5)


# -- acceptance summary ----------------------------------------------------------
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
