"""Symmetry-blocked Hamiltonians of the four two-level boson models.

All four Hamiltonians have the form ``H = (1 - xi) n + (xi / N) P`` where ``n``
counts the d-dimensional boson and ``P`` is a pairing operator
``c * A^+ A`` with ``A = s s -/+ b.b``.  In the seniority-reduced basis
``|n, tau>`` of u(d) > so(d) the pair creator acts as::

    <n+2, tau| b^+.b^+ |n, tau> = sqrt((n - tau + 2)(n + tau + d))
    b^+.b^+ b.b |n, tau>       = [n(n + d - 2) - tau(tau + d - 2)] |n, tau>

so each sector block is tridiagonal in ``n = tau, tau + 2, ...``.  ``tau`` is the
parity for LMG (d=1), ``|l|`` for the 2D vibron model (d=2), ``J`` for the
vibron model (d=3) and the so(5) seniority for the IBM (d=5).
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import numpy as np

from ._mp import to_decimal, workprec
from .fock import MODEL_DIMS

# the sign of b.b in A fixes the phase convention of the off-diagonal elements;
# VM2D uses the convention of the real D_+- generators, LMG that of J_x
_PAIR_SIGN = {"LMG": -1, "VM2D": +1, "VM3D": +1, "IBM": -1}
_PAIR_FACTOR = {"LMG": 1, "VM2D": 1, "VM3D": 1, "IBM": 2}
_SECTOR_KIND = {"LMG": "parity", "VM2D": "ell", "VM3D": "J", "IBM": "seniority"}


@dataclass(frozen=True)
class ModelInstance:
    model: str
    N: int
    xi: float

    def __post_init__(self):
        if self.model not in MODEL_DIMS:
            raise ValueError(f"unknown model {self.model!r}")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N!r}")
        if not 0.0 <= float(self.xi) <= 1.0:
            raise ValueError(f"xi must lie in [0, 1], got {self.xi}")

    @property
    def d(self) -> int:
        return MODEL_DIMS[self.model]


@dataclass(frozen=True, order=True)
class SectorLabel:
    kind: str
    value: int

    def __str__(self):
        return f"{self.kind}={self.value}"

    @property
    def tau(self) -> int:
        return abs(self.value)

    @classmethod
    def parse(cls, text: str) -> "SectorLabel":
        kind, _, value = text.partition("=")
        return cls(kind.strip(), int(value))


@dataclass(frozen=True)
class SectorBlock:
    """Symmetric tridiagonal block; ``bits`` is None for double precision.

    In double precision ``diag``/``offdiag`` are float64 arrays, otherwise
    tuples of ``gmpy2.mpfr`` built at ``bits`` of mantissa.
    """

    instance: ModelInstance
    label: SectorLabel
    basis_quanta: tuple[int, ...]
    diag: object
    offdiag: object
    bits: int | None = None

    @property
    def dim(self) -> int:
        return len(self.basis_quanta)

    def as_float(self) -> tuple[np.ndarray, np.ndarray]:
        return (np.array([float(x) for x in self.diag]),
                np.array([float(x) for x in self.offdiag]))

    def dense(self) -> np.ndarray:
        d, e = self.as_float()
        return np.diag(d) + np.diag(e, 1) + np.diag(e, -1)


def critical_xi(model: str) -> float:
    """Ground-state critical coupling of the large-N energy functional.

    ``1 - xi = 4 c xi`` with ``c`` the pairing prefactor: 0.2 for LMG and both
    vibron models, 1/9 for the IBM whose pairing carries an extra factor 2.
    """
    c = _PAIR_FACTOR[model]
    return 1.0 / (1.0 + 4.0 * c)


def sector_list(instance: ModelInstance, distinct: bool = False) -> list[SectorLabel]:
    """All symmetry sectors; ``distinct=True`` drops the ``l < 0`` mirror blocks of VM2D."""
    N, kind = instance.N, _SECTOR_KIND[instance.model]
    if instance.model == "LMG":
        values = [0, 1]
    elif instance.model == "VM2D":
        values = list(range(0 if distinct else -N, N + 1))
    else:
        values = list(range(N + 1))
    return [SectorLabel(kind, v) for v in values]


def sector_multiplicity(instance: ModelInstance, label: SectorLabel, distinct: bool = False) -> int:
    """How many copies of the block live in the full space."""
    t = label.tau
    if instance.model == "VM2D":
        return 2 if distinct and t > 0 else 1
    if instance.model == "VM3D":
        return 2 * t + 1
    if instance.model == "IBM":
        return (t + 1) * (t + 2) * (2 * t + 3) // 6
    return 1


def sector_quanta(instance: ModelInstance, label: SectorLabel) -> tuple[int, ...]:
    _validate_label(instance, label)
    return tuple(range(label.tau, instance.N + 1, 2))


def _validate_label(instance: ModelInstance, label: SectorLabel):
    if label not in sector_list(instance):
        raise ValueError(f"sector {label} does not exist for {instance}")


def _block_entries(N, d, tau, quanta, xi, sign, factor, num, sqrt):
    one = num(1)
    xi = num(xi)
    scale = xi * factor / N
    diag = []
    for n in quanta:
        ns = N - n
        pp = ns * (ns - 1) + n * (n + d - 2) - tau * (tau + d - 2)
        diag.append((one - xi) * n + scale * pp)
    off = []
    for n in quanta[:-1]:
        ns = N - n
        amp = sqrt(num((n - tau + 2) * (n + tau + d))) * sqrt(num(ns * (ns - 1)))
        off.append(sign * scale * amp)
    return diag, off


@lru_cache(maxsize=4096)
def _cached_block(model, N, xi, tau, bits):
    quanta = tuple(range(tau, N + 1, 2))
    d, sign, factor = MODEL_DIMS[model], _PAIR_SIGN[model], _PAIR_FACTOR[model]
    if bits is None:
        q = np.array(quanta, dtype=float)
        ns = N - q
        pp = ns * (ns - 1) + q * (q + d - 2) - tau * (tau + d - 2)
        diag = (1.0 - xi) * q + (xi * factor / N) * pp
        ql, nsl = q[:-1], ns[:-1]
        off = sign * (xi * factor / N) * np.sqrt((ql - tau + 2) * (ql + tau + d)) * np.sqrt(nsl * (nsl - 1))
        return quanta, diag, off
    with workprec(bits):
        # xi is taken from its decimal string so 0.1 means 1/10, not the nearest double
        x = gmpy2.mpfr(repr(xi)) if isinstance(xi, float) else gmpy2.mpfr(xi)
        diag, off = _block_entries(N, d, tau, quanta, x, sign, factor, gmpy2.mpfr, gmpy2.sqrt)
        return quanta, tuple(diag), tuple(off)


def build_block(instance: ModelInstance, label: SectorLabel, bits: int | None = None) -> SectorBlock:
    """Tridiagonal block of ``H`` in the sector ``label``.

    ``bits=None`` builds float64 entries; an integer builds ``gmpy2.mpfr``
    entries at that mantissa width so tiny gaps are not poisoned by a
    double-precision round trip.
    """
    _validate_label(instance, label)
    if bits is not None and bits < 64:
        raise ValueError("arbitrary precision needs at least 64 mantissa bits")
    quanta, diag, off = _cached_block(instance.model, instance.N, instance.xi, label.tau, bits)
    if bits is None:
        diag, off = diag.copy(), off.copy()
    return SectorBlock(instance, label, quanta, diag, off, bits)


def analytic_limit_spectrum(instance: ModelInstance, label: SectorLabel) -> np.ndarray:
    """Closed-form sector spectrum at the dynamical-symmetry points xi = 0 and 1."""
    _validate_label(instance, label)
    xi = float(instance.xi)
    quanta = sector_quanta(instance, label)
    if xi == 0.0:
        return np.array(quanta, dtype=float)
    if xi != 1.0:
        raise ValueError(f"closed form only exists at xi = 0 or 1, got {xi}")
    N, d, tau = instance.N, instance.d, label.tau
    omega = np.arange(N, tau - 1, -2, dtype=float)
    casimir = omega * (omega + d - 1)
    return np.sort(_PAIR_FACTOR[instance.model] * (N * (N + d - 1) - casimir) / N)


def block_to_json(block: SectorBlock) -> str:
    """``{model, N, xi, sector, diag[], offdiag[]}`` with numbers as decimal strings."""

    def fmt(x):
        if block.bits is None:
            return repr(float(x))
        return to_decimal(x)

    inst = block.instance
    doc = {
        "model": inst.model,
        "N": str(inst.N),
        "xi": repr(float(inst.xi)),
        "sector": str(block.label),
        "bits": None if block.bits is None else str(block.bits),
        "diag": [fmt(x) for x in block.diag],
        "offdiag": [fmt(x) for x in block.offdiag],
    }
    return json.dumps(doc, indent=2, sort_keys=True)


def block_from_json(text: str) -> SectorBlock:
    doc = json.loads(text)
    inst = ModelInstance(doc["model"], int(doc["N"]), float(doc["xi"]))
    label = SectorLabel.parse(doc["sector"])
    bits = None if doc.get("bits") is None else int(doc["bits"])
    if bits is None:
        diag = np.array([float(x) for x in doc["diag"]])
        off = np.array([float(x) for x in doc["offdiag"]])
    else:
        with workprec(bits):
            diag = tuple(gmpy2.mpfr(x) for x in doc["diag"])
            off = tuple(gmpy2.mpfr(x) for x in doc["offdiag"])
    return SectorBlock(inst, label, sector_quanta(inst, label), diag, off, bits)


def total_dimension(instance: ModelInstance) -> int:
    return sum(
        len(sector_quanta(instance, lab)) * sector_multiplicity(instance, lab)
        for lab in sector_list(instance)
    )


def fock_to_block_index(instance: ModelInstance, label: SectorLabel, occupation) -> int | None:
    """Position of a Fock state in the block basis, for LMG and VM2D only.

    Those two models have sector bases that are single occupation tuples:
    ``|n_t>`` and ``|n_+, n_->`` with ``l = n_+ - n_-``.
    """
    if instance.model == "LMG":
        n = occupation[1]
        if n % 2 != label.value:
            return None
    elif instance.model == "VM2D":
        n = occupation[1] + occupation[2]
        if occupation[1] - occupation[2] != label.value:
            return None
    else:
        raise ValueError("direct Fock embedding only exists for LMG and VM2D")
    return (n - label.tau) // 2


__all__ = [
    "ModelInstance", "SectorLabel", "SectorBlock", "critical_xi", "sector_list",
    "sector_multiplicity", "sector_quanta", "build_block", "analytic_limit_spectrum",
    "block_to_json", "block_from_json", "total_dimension", "fock_to_block_index",
]
