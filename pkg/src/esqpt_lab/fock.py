"""Brute-force Fock-space representation of the two-level boson models.

Every state is an occupation tuple ``(n_scalar, n_1, ..., n_d)`` summing to
``N``.  Operators are assembled from elementary creation/annihilation moves,
so nothing here depends on the closed-form matrix elements in
:mod:`esqpt_lab.models`.  That independence is the point: this module is the
ground truth the analytic blocks are tested against.

Mode layout per model (index 0 is always the scalar boson):

* ``LMG``  -- ``s, t``
* ``VM2D`` -- ``sigma, tau_+, tau_-`` (circular components, ``l`` diagonal)
* ``VM3D`` -- ``s, p_x, p_y, p_z`` (Cartesian)
* ``IBM``  -- ``s, d_1 .. d_5`` (Cartesian components of the quadrupole boson)
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from math import comb, sqrt

import numpy as np

MODEL_DIMS = {"LMG": 1, "VM2D": 2, "VM3D": 3, "IBM": 5}

MAX_DENSE_DIM = 5000

# (mode, is_creation) pairs, applied right to left like an operator product
Word = tuple[tuple[int, bool], ...]


def _check_model(model: str) -> int:
    try:
        return MODEL_DIMS[model]
    except KeyError:
        raise ValueError(f"unknown model {model!r}; expected one of {sorted(MODEL_DIMS)}") from None


def fock_dimension(model: str, N: int) -> int:
    """Number of weak compositions of N into d + 1 parts."""
    d = _check_model(model)
    return comb(N + d, d)


@dataclass(frozen=True)
class FockBasis:
    model: str
    N: int
    states: tuple[tuple[int, ...], ...]
    index: dict = field(repr=False, compare=False, hash=False)

    @property
    def dim(self) -> int:
        return len(self.states)

    @property
    def n_modes(self) -> int:
        return MODEL_DIMS[self.model] + 1

    def occupations(self) -> np.ndarray:
        return np.array(self.states, dtype=np.int64)


@dataclass(frozen=True)
class DenseOperator:
    """Real matrix representation; the operator itself is ``phase * entries``.

    ``phase`` is ``1`` for every Hermitian generator used in the Hamiltonians and
    ``-1j`` for ``J_y``, whose matrix is purely imaginary in the occupation basis.
    """

    basis: FockBasis
    entries: np.ndarray
    phase: complex = 1

    def asymmetry(self) -> float:
        """Largest ``|A - A^T|`` entry relative to the largest entry."""
        scale = np.abs(self.entries).max()
        if scale == 0:
            return 0.0
        sign = 1 if self.phase == 1 else -1
        return float(np.abs(self.entries - sign * self.entries.T).max() / scale)


def build_basis(model: str, N: int) -> FockBasis:
    """Occupation-tuple basis, ordered so the second-boson count increases.

    The order is descending lexicographic on ``(n_scalar, n_1, ...)``, which puts
    ``(N, 0, ..., 0)`` first.
    """
    d = _check_model(model)
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    states = [
        (N - sum(rest),) + rest
        for rest in itertools.product(range(N + 1), repeat=d)
        if sum(rest) <= N
    ]
    states.sort(reverse=True)
    states = tuple(states)
    return FockBasis(model, N, states, {s: i for i, s in enumerate(states)})


def _apply_word(word: Word, state: tuple[int, ...]):
    occ = list(state)
    coef = 1.0
    for mode, create in reversed(word):
        if create:
            occ[mode] += 1
            coef *= sqrt(occ[mode])
        else:
            if occ[mode] == 0:
                return 0.0, None
            coef *= sqrt(occ[mode])
            occ[mode] -= 1
    return coef, tuple(occ)


def _matrix(basis: FockBasis, terms: list[tuple[float, Word]]) -> np.ndarray:
    """Matrix of ``sum(c * word)`` restricted to the N-boson space."""
    mat = np.zeros((basis.dim, basis.dim))
    for col, state in enumerate(basis.states):
        for c, word in terms:
            coef, out = _apply_word(word, state)
            if out is None or coef == 0.0:
                continue
            row = basis.index.get(out)
            if row is None:
                raise ValueError("operator word does not conserve the boson number")
            mat[row, col] += c * coef
    return mat


def _cr(m):
    return (m, True)


def _an(m):
    return (m, False)


def _hop(i: int, j: int) -> Word:
    """b_i^dagger b_j"""
    return (_cr(i), _an(j))


def _antisym_generators(basis: FockBasis, modes) -> list[np.ndarray]:
    """Real antisymmetric ``L_ab = b_a^+ b_b - b_b^+ b_a`` for all pairs in ``modes``."""
    gens = []
    for a, b in itertools.combinations(modes, 2):
        gens.append(_matrix(basis, [(1.0, _hop(a, b)), (-1.0, _hop(b, a))]))
    return gens


def _casimir(basis: FockBasis, modes) -> np.ndarray:
    """``-sum L_ab^2``: the so(k) Casimir over Cartesian modes, eigenvalues w(w+k-2)."""
    out = np.zeros((basis.dim, basis.dim))
    for L in _antisym_generators(basis, modes):
        out -= L @ L
    return out


def _pair_product(basis: FockBasis) -> np.ndarray:
    """``(b^+.b^+ - s^+s^+)(b.b - ss)`` with the model's natural scalar product."""
    model = basis.model
    if model == "VM2D":
        # tau.tau = 2 tau_+ tau_- for circular components
        bb = [(2.0, (_an(1), _an(2)))]
        bbd = [(2.0, (_cr(1), _cr(2)))]
    else:
        d = MODEL_DIMS[model]
        bb = [(1.0, (_an(k), _an(k))) for k in range(1, d + 1)]
        bbd = [(1.0, (_cr(k), _cr(k))) for k in range(1, d + 1)]
    ann = bb + [(-1.0, (_an(0), _an(0)))]
    cre = bbd + [(-1.0, (_cr(0), _cr(0)))]
    terms = [(c1 * c2, w1 + w2) for c1, w1 in cre for c2, w2 in ann]
    return _matrix(basis, terms)


_OPS = {
    "LMG": {"n_second", "n_t", "J_x", "J_y", "J_z", "parity", "P_t", "casimir", "pair_product", "identity"},
    "VM2D": {"n_second", "n_tau", "D_+", "D_-", "ell", "W2", "P_tau", "casimir", "pair_product", "identity"},
    "VM3D": {"n_second", "n_p", "J2", "D2", "so4", "P_p", "casimir", "pair_product", "identity"},
    "IBM": {"n_second", "n_d", "so5", "so6", "P_d", "casimir", "pair_product", "identity"},
}


def operator_ids(model: str) -> set[str]:
    _check_model(model)
    return set(_OPS[model])


def operator_matrix(basis: FockBasis, op_id: str) -> DenseOperator:
    """Dense matrix of a named operator in ``basis``.

    ``casimir`` is the Casimir of the model's symmetry algebra (the conserved
    quantity that labels the sectors): ``J_x^2``-free parity for LMG is served
    by ``parity``; ``casimir`` there is ``(t^+s + s^+t)^2``.
    """
    model, N = basis.model, basis.N
    if op_id not in _OPS[model]:
        raise ValueError(f"operator {op_id!r} is not defined for model {model}")
    d = MODEL_DIMS[model]
    occ = basis.occupations()
    eye = np.eye(basis.dim)

    if op_id == "identity":
        return DenseOperator(basis, eye)
    if op_id in ("n_second", "n_t", "n_tau", "n_p", "n_d"):
        return DenseOperator(basis, np.diag(occ[:, 1:].sum(axis=1).astype(float)))
    if op_id == "pair_product":
        return DenseOperator(basis, _pair_product(basis))

    if model == "LMG":
        if op_id == "J_x":
            return DenseOperator(basis, _matrix(basis, [(0.5, _hop(1, 0)), (0.5, _hop(0, 1))]))
        if op_id == "J_y":
            return DenseOperator(basis, _matrix(basis, [(0.5, _hop(1, 0)), (-0.5, _hop(0, 1))]), -1j)
        if op_id == "J_z":
            return DenseOperator(basis, np.diag(0.5 * (occ[:, 1] - occ[:, 0]).astype(float)))
        if op_id == "parity":
            return DenseOperator(basis, np.diag((-1.0) ** occ[:, 1]))
        x2 = _matrix(basis, [(1.0, _hop(1, 0)), (1.0, _hop(0, 1))])
        x2 = x2 @ x2
        if op_id == "casimir":
            return DenseOperator(basis, x2)
        return DenseOperator(basis, N * N * eye - x2)  # P_t

    if model == "VM2D":
        r2 = sqrt(2.0)
        dp = _matrix(basis, [(r2, _hop(1, 0)), (-r2, _hop(0, 2))])
        dm = _matrix(basis, [(-r2, _hop(2, 0)), (r2, _hop(0, 1))])
        ell = np.diag((occ[:, 1] - occ[:, 2]).astype(float))
        if op_id == "D_+":
            return DenseOperator(basis, dp)
        if op_id == "D_-":
            return DenseOperator(basis, dm)
        if op_id == "ell":
            return DenseOperator(basis, ell)
        w2 = 0.5 * (dp @ dm + dm @ dp) + ell @ ell
        if op_id in ("W2", "casimir"):
            return DenseOperator(basis, w2)
        return DenseOperator(basis, N * (N + 1) * eye - w2)  # P_tau

    inner = range(1, d + 1)
    c_inner = _casimir(basis, inner)
    if model == "VM3D":
        if op_id in ("J2", "casimir"):
            return DenseOperator(basis, c_inner)
        d2 = np.zeros_like(c_inner)
        for k in inner:
            L = _matrix(basis, [(1.0, _hop(0, k)), (-1.0, _hop(k, 0))])
            d2 -= L @ L
        if op_id == "D2":
            return DenseOperator(basis, d2)
        if op_id == "so4":
            return DenseOperator(basis, d2 + c_inner)
        return DenseOperator(basis, N * (N + 2) * eye - d2 - c_inner)  # P_p

    # IBM
    if op_id in ("so5", "casimir"):
        return DenseOperator(basis, c_inner)
    c6 = _casimir(basis, range(0, d + 1))
    if op_id == "so6":
        return DenseOperator(basis, c6)
    return DenseOperator(basis, 2.0 * (N * (N + 4) * eye - c6))  # P_d


_PAIRING = {"LMG": "P_t", "VM2D": "P_tau", "VM3D": "P_p", "IBM": "P_d"}


def full_hamiltonian(basis: FockBasis, xi: float) -> DenseOperator:
    """``(1 - xi) n_second + (xi / N) P`` on the full N-boson space."""
    if not 0.0 <= xi <= 1.0:
        raise ValueError(f"xi must lie in [0, 1], got {xi}")
    n2 = operator_matrix(basis, "n_second").entries
    pairing = operator_matrix(basis, _PAIRING[basis.model]).entries
    return DenseOperator(basis, (1.0 - xi) * n2 + (xi / basis.N) * pairing)


def _guard(basis: FockBasis):
    if basis.dim > MAX_DENSE_DIM:
        raise ValueError(f"dense oracle limited to dimension {MAX_DENSE_DIM}, got {basis.dim}")


def oracle_spectrum(basis: FockBasis, xi: float) -> np.ndarray:
    _guard(basis)
    return np.linalg.eigvalsh(full_hamiltonian(basis, xi).entries)


# conserved operator and the quantized values it can take, per model
def _conserved(basis: FockBasis):
    N = basis.N
    if basis.model == "LMG":
        return "parity", np.array([1.0, -1.0])
    if basis.model == "VM2D":
        return "ell", np.arange(-N, N + 1, dtype=float)
    if basis.model == "VM3D":
        J = np.arange(N + 1)
        return "J2", (J * (J + 1)).astype(float)
    t = np.arange(N + 1)
    return "so5", (t * (t + 3)).astype(float)


@dataclass(frozen=True)
class ConservedLabels:
    energies: np.ndarray
    operator: str
    expectations: np.ndarray
    labels: np.ndarray  # parity (+1/-1), l, J or tau


def _decode(model: str, values: np.ndarray) -> np.ndarray:
    if model in ("LMG", "VM2D"):
        return np.rint(values).astype(int)
    if model == "VM3D":
        return np.rint((-1 + np.sqrt(1 + 4 * values)) / 2).astype(int)
    return np.rint((-3 + np.sqrt(9 + 4 * values)) / 2).astype(int)


def conserved_expectations(basis: FockBasis, xi: float, cluster_tol: float = 1e-9) -> ConservedLabels:
    """Label every full-space eigenstate by its conserved quantum number.

    Degenerate eigenvalue clusters (relative tolerance ``cluster_tol`` of the
    spectral width) are re-resolved by diagonalizing the conserved operator
    inside the cluster, so sector-mixed eigenvectors never reach the caller.
    """
    _guard(basis)
    H = full_hamiltonian(basis, xi).entries
    op_id, allowed = _conserved(basis)
    C = operator_matrix(basis, op_id).entries
    evals, evecs = np.linalg.eigh(H)
    width = max(evals[-1] - evals[0], 1.0)
    tol = cluster_tol * width

    start = 0
    while start < len(evals):
        stop = start + 1
        while stop < len(evals) and evals[stop] - evals[stop - 1] <= tol:
            stop += 1
        if stop - start > 1:
            block = evecs[:, start:stop]
            _, rot = np.linalg.eigh(block.T @ C @ block)
            evecs[:, start:stop] = block @ rot
        start = stop

    expect = np.einsum("ij,ik,kj->j", evecs, C, evecs)
    dist = np.abs(expect[:, None] - allowed[None, :]).min(axis=1)
    if dist.max() > 1e-6:
        raise RuntimeError(
            f"conserved {op_id} expectation {dist.max():.3g} away from any quantized value"
        )
    return ConservedLabels(evals, op_id, expect, _decode(basis.model, expect))
