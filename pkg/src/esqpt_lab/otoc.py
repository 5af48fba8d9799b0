"""Microcanonical out-of-time-order correlators in the sector eigenbases.

For an eigenstate ``|j>`` the four-point correlator is a sum over triples::

    F_j(t) = sum e^{i w t} <j|W^+|j1><j1|V^+|j2><j2|W|j3><j3|V|j>
    w      = E_j + E_j2 - E_j1 - E_j3

Operators only connect neighbouring sectors (J_x flips parity, D_+- shift l by
one), so each of j1, j2, j3 ranges over one sector block.  Time averages are
closed form per triple; nothing is integrated numerically.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from . import eigensolver as es
from .models import ModelInstance, SectorLabel, build_block, sector_list

log = logging.getLogger(__name__)

_ADJOINT = {"J_x": "J_x", "D_+": "D_-", "D_-": "D_+", "identity": "identity"}
_MODEL_OPS = {"LMG": {"J_x", "identity"}, "VM2D": {"D_+", "D_-", "identity"}}


def adjoint(op_id: str) -> str:
    try:
        return _ADJOINT[op_id]
    except KeyError:
        raise ValueError(f"unknown operator {op_id!r}") from None


def target_sector(instance: ModelInstance, op_id: str, source: SectorLabel) -> SectorLabel:
    """Sector reached by applying ``op_id`` to states of ``source``."""
    if op_id not in _MODEL_OPS.get(instance.model, ()):
        raise ValueError(f"operator {op_id!r} not available for {instance.model}")
    if op_id == "identity":
        return source
    if op_id == "J_x":
        return SectorLabel("parity", 1 - source.value)
    step = 1 if op_id == "D_+" else -1
    return SectorLabel("ell", source.value + step)


def banded_operator(instance: ModelInstance, op_id: str, source: SectorLabel) -> sparse.csr_matrix:
    """Closed-form matrix of ``op_id`` from the ``source`` block basis to its target.

    ``J_x``:  <n+1|J_x|n> = sqrt((N-n)(n+1))/2, <n-1|J_x|n> = sqrt((N-n+1) n)/2
    ``D_+``:  <n+1, l+1|D_+|n, l> =  sqrt((N-n)(n+l+2))
              <n-1, l+1|D_+|n, l> = -sqrt((N-n+1)(n-l))
    ``D_-`` is the transpose of ``D_+`` taken from the l-1 block.
    """
    N = instance.N
    target = target_sector(instance, op_id, source)
    if target not in sector_list(instance):
        return sparse.csr_matrix((0, len(range(source.tau, N + 1, 2))))
    qs = range(source.tau, N + 1, 2)
    qt = range(target.tau, N + 1, 2)
    where = {n: i for i, n in enumerate(qt)}
    rows, cols, vals = [], [], []

    def put(n_out, col, value):
        if n_out in where and value != 0.0:
            rows.append(where[n_out])
            cols.append(col)
            vals.append(value)

    if op_id == "identity":
        return sparse.identity(len(qs), format="csr")
    for col, n in enumerate(qs):
        if op_id == "J_x":
            put(n + 1, col, 0.5 * math.sqrt((N - n) * (n + 1)))
            put(n - 1, col, 0.5 * math.sqrt((N - n + 1) * n))
        elif op_id == "D_+":
            l = source.value
            put(n + 1, col, math.sqrt((N - n) * (n + l + 2)))
            put(n - 1, col, -math.sqrt((N - n + 1) * (n - l)))
        else:  # D_-
            l = source.value
            put(n + 1, col, -math.sqrt((N - n) * (n - l + 2)))
            put(n - 1, col, math.sqrt((N - n + 1) * (n + l)))
    return sparse.csr_matrix((vals, (rows, cols)), shape=(len(qt), len(qs)))


@dataclass(frozen=True)
class EigenOperator:
    """``entries[a, b] = <psi_a(target)| O |psi_b(source)>``."""

    op_id: str
    source: SectorLabel
    target: SectorLabel
    entries: np.ndarray


SpectraMap = dict  # SectorLabel -> es.Spectrum with eigenvectors


def sector_spectra(instance: ModelInstance, labels, precision: es.PrecisionConfig = es.DOUBLE) -> SpectraMap:
    """Full spectra with eigenvectors for each requested sector."""
    out = {}
    valid = sector_list(instance)
    for lab in labels:
        if lab not in valid:
            continue  # beyond the edge of the spectrum: the operator maps to zero
        block = build_block(instance, lab, precision.bits)
        out[lab] = es.solve(block, precision, vectors=True)
    return out


def required_sectors(instance: ModelInstance, sector: SectorLabel, V: str, W: str) -> list[SectorLabel]:
    s3 = target_sector(instance, V, sector)
    s2 = target_sector(instance, W, s3)
    s1 = target_sector(instance, W, sector)
    if target_sector(instance, adjoint(V), s2) != s1:
        raise ValueError(f"operators {V}, {W} do not close a four-point loop from {sector}")
    labs = []
    for lab in (sector, s1, s2, s3):
        if lab not in labs:
            labs.append(lab)
    return labs


def eigen_operator(spectra: SpectraMap, op_id: str, source: SectorLabel) -> EigenOperator:
    """Matrix elements of ``op_id`` between eigenstates, via the banded closed form."""
    spec = spectra.get(source)
    if spec is None or spec.eigenvectors is None:
        raise ValueError(f"eigenvectors missing for sector {source}")
    instance = spec.block.instance
    target = target_sector(instance, op_id, source)
    if op_id == "identity":
        n = spec.block.dim
        return EigenOperator(op_id, source, target, np.eye(n))
    tspec = spectra.get(target)
    if target not in sector_list(instance):
        return EigenOperator(op_id, source, target, np.zeros((0, spec.block.dim)))
    if tspec is None or tspec.eigenvectors is None:
        raise ValueError(f"eigenvectors missing for sector {target}")
    O = banded_operator(instance, op_id, source)
    entries = tspec.vectors().T @ (O @ spec.vectors())
    return EigenOperator(op_id, source, target, entries)


@dataclass(frozen=True)
class MotocResult:
    j: int
    energy: float
    scaled_energy: float  # (E - E_gs) / N
    value: float          # Re of the average
    magnitude: float      # |average|
    T: float              # math.inf for the stationary average
    tol_deg: float
    accidental: int = 0   # resonant triples not explained by a near-degenerate pair


@dataclass
class _Loop:
    """Everything needed to evaluate the triple sums for one sector."""

    sector: SectorLabel
    E0: np.ndarray
    E1: np.ndarray
    E2: np.ndarray
    E3: np.ndarray
    Wd: np.ndarray  # <j|W^+|j1>   (n0, n1)
    Vd: np.ndarray  # <j1|V^+|j2>  (n1, n2)
    Wm: np.ndarray  # <j2|W|j3>    (n2, n3)
    Vm: np.ndarray  # <j3|V|j>     (n3, n0)
    width: float


def _loop(spectra: SpectraMap, sector: SectorLabel, V: str, W: str) -> _Loop:
    inst = spectra[sector].block.instance
    s3 = target_sector(inst, V, sector)
    s2 = target_sector(inst, W, s3)
    s1 = target_sector(inst, W, sector)

    def energies(lab):
        return spectra[lab].values() if lab in spectra else np.zeros(0)

    def op(op_id, src, tgt):
        if src in spectra and tgt in spectra:
            return eigen_operator(spectra, op_id, src).entries
        return np.zeros((len(energies(tgt)), len(energies(src))))

    Vm = op(V, sector, s3)               # s3 <- s0
    Wm = op(W, s3, s2)                   # s2 <- s3
    Vd = op(adjoint(V), s2, s1)          # s1 <- s2
    Wd = op(W, sector, s1).T             # (s1 <- s0)^T
    all_e = np.concatenate([energies(lab) for lab in {sector, s1, s2, s3}])
    width = float(all_e.max() - all_e.min())
    return _Loop(sector, energies(sector), energies(s1), energies(s2), energies(s3),
                 Wd, Vd, Wm, Vm, max(width, 1e-300))


def _triples(loop: _Loop, j: int):
    a = loop.Wd[j]                 # j1
    d = loop.Vm[:, j]              # j3
    amp = a[:, None, None] * loop.Vd[:, :, None] * loop.Wm[None, :, :] * d[None, None, :]
    omega = (loop.E0[j] + loop.E2[None, :, None]
             - loop.E1[:, None, None] - loop.E3[None, None, :])
    return amp, omega


def _stationary(loop: _Loop, j: int, tol: float):
    amp, omega = _triples(loop, j)
    res = np.abs(omega) <= tol
    total = amp[res].sum()
    # resonances are expected from (j, j1) and (j2, j3) near-degenerate pairs
    # (or the crossed assignment); anything else is accidental
    d01 = np.abs(loop.E0[j] - loop.E1)[:, None, None]
    d23 = np.abs(loop.E2[None, :, None] - loop.E3[None, None, :])
    d03 = np.abs(loop.E0[j] - loop.E3)[None, None, :]
    d21 = np.abs(loop.E2[None, :, None] - loop.E1[:, None, None])
    paired = ((d01 <= tol) & (d23 <= tol)) | ((d03 <= tol) & (d21 <= tol))
    accidental = int(np.count_nonzero(res & ~paired & (np.abs(amp) > 1e-14)))
    return complex(total), accidental


def _kernel(x):
    """(e^{ix} - 1)/(ix), equal to 1 at x = 0."""
    x = np.asarray(x, dtype=float)
    out = np.ones(x.shape, dtype=complex)
    nz = np.abs(x) > 1e-8
    xs = x[nz]
    out[nz] = np.sin(xs) / xs + 1j * (1 - np.cos(xs)) / xs
    small = ~nz
    out[small] = 1 + 0.5j * x[small]
    return out


def _finite_T(loop: _Loop, j: int, T: float):
    amp, omega = _triples(loop, j)
    return complex(np.sum(amp * _kernel(omega * T)))


def _ground(spectra: SpectraMap) -> float:
    return min(float(s.values()[0]) for s in spectra.values())


def _result(loop, j, total, T, tol_deg, gs, N, accidental=0):
    E = float(loop.E0[j])
    return MotocResult(j, E, (E - gs) / N, float(total.real), float(abs(total)), T, tol_deg, accidental)


def certified_tol_deg(spectra: SpectraMap) -> float:
    """Smallest meaningful ``tol_deg``: four certified eigenvalue widths over the spectral width.

    ``w`` combines four energies, each known to within its bisection width, so
    resonances cannot be resolved more finely than this.
    """
    worst = max(float(np.max(s.widths)) for s in spectra.values())
    all_e = np.concatenate([s.values() for s in spectra.values()])
    return 4.0 * worst / max(float(all_e.max() - all_e.min()), 1e-300)


def _check_tol(tol_deg):
    if not tol_deg > 0:
        raise ValueError("tol_deg must be positive")


def motoc_stationary(j: int, V: str, W: str, spectra: SpectraMap, sector: SectorLabel,
                     tol_deg: float = 1e-10, ground: float | None = None) -> MotocResult:
    """Infinite-time average: triples with ``|w| <= tol_deg * spectral width``."""
    _check_tol(tol_deg)
    loop = _loop(spectra, sector, V, W)
    total, acc = _stationary(loop, j, tol_deg * loop.width)
    if acc:
        log.warning("state %d: %d accidental resonant triples", j, acc)
    gs = _ground(spectra) if ground is None else ground
    return _result(loop, j, total, math.inf, tol_deg, gs, spectra[sector].block.instance.N, acc)


def motoc_finite_T(j: int, V: str, W: str, spectra: SpectraMap, sector: SectorLabel,
                   T: float, ground: float | None = None) -> MotocResult:
    """Average over [0, T]: each triple weighted by ``(e^{iwT} - 1)/(iwT)``."""
    if not T > 0:
        raise ValueError("averaging time must be positive")
    loop = _loop(spectra, sector, V, W)
    total = _finite_T(loop, j, T)
    gs = _ground(spectra) if ground is None else ground
    return _result(loop, j, total, float(T), 0.0, gs, spectra[sector].block.instance.N)


def four_point(j: int, V: str, W: str, spectra: SpectraMap, sector: SectorLabel, t: float) -> complex:
    """``F_j(t)`` itself."""
    loop = _loop(spectra, sector, V, W)
    amp, omega = _triples(loop, j)
    return complex(np.sum(amp * np.exp(1j * omega * t)))


def squared_commutator(j: int, V: str, W: str, spectra: SpectraMap, sector: SectorLabel,
                       t: float) -> float:
    """``C_j(t) = A_j(t) - 2 Re F_j(t)`` for ``[W(t), V]`` in eigenstate ``j``.

    ``A_j(t) = |V W(t)|j>|^2 + |W(t) V|j>|^2``.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    loop = _loop(spectra, sector, V, W)
    E0, E1, E2, E3 = loop.E0, loop.E1, loop.E2, loop.E3
    # W(t) V|j>: V|j> in s3, then W(t) into s2
    x = (loop.Wm * np.exp(1j * (E2[:, None] - E3[None, :]) * t)) @ loop.Vm[:, j]
    # V W(t)|j>: W(t)|j> in s1, then V into s2 (V_{s2<-s1} = Vd^T)
    w_j = loop.Wd[j] * np.exp(1j * (E1 - E0[j]) * t)
    y = loop.Vd.T @ w_j
    A = float(np.vdot(x, x).real + np.vdot(y, y).real)
    F = four_point(j, V, W, spectra, sector, t)
    return A - 2.0 * F.real


def motoc_scan(sector: SectorLabel, V: str, W: str, spectra: SpectraMap, T: float | None = None,
               tol_deg: float = 1e-10, ground: float | None = None) -> list[MotocResult]:
    """Stationary (``T=None``) or finite-time averages for every state of ``sector``.

    A state whose evaluation fails is logged and skipped; the rest of the scan
    still runs.
    """
    if T is None:
        _check_tol(tol_deg)
    loop = _loop(spectra, sector, V, W)
    inst = spectra[sector].block.instance
    gs = _ground(spectra) if ground is None else ground
    results, failed = [], []
    for j in range(len(loop.E0)):
        try:
            if T is None:
                total, acc = _stationary(loop, j, tol_deg * loop.width)
                results.append(_result(loop, j, total, math.inf, tol_deg, gs, inst.N, acc))
            else:
                total = _finite_T(loop, j, T)
                results.append(_result(loop, j, total, float(T), 0.0, gs, inst.N))
        except (FloatingPointError, ValueError, MemoryError) as exc:
            failed.append((j, str(exc)))
    if failed:
        log.warning("%d states failed in the scan: %s", len(failed), failed[:5])
    acc = sum(r.accidental for r in results)
    if acc:
        log.warning("%d accidental resonant triples over the scan", acc)
    return results


def setup(model: str, N: int, xi: float, sector: SectorLabel, V: str, W: str,
          precision: es.PrecisionConfig = es.DOUBLE) -> SpectraMap:
    inst = ModelInstance(model, N, xi)
    return sector_spectra(inst, required_sectors(inst, sector, V, W), precision)
