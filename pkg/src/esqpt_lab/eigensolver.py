"""Symmetric tridiagonal eigensolver at double and arbitrary precision.

Both paths are Sturm-sequence bisection followed by inverse iteration.  The
double path calls LAPACK (``dstebz``/``dstein``); the arbitrary path runs the
same recurrences on ``gmpy2.mpfr`` numbers, which is what makes eigenvalue
gaps far below double epsilon measurable.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from scipy.linalg import lapack

from ._mp import workprec
from .models import SectorBlock

DEFAULT_BITS = 256
MAX_BITS = 4096


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PrecisionConfig:
    mode: str = "double"
    mantissa_bits: int = DEFAULT_BITS
    eig_tol: float | None = None

    def __post_init__(self):
        if self.mode not in ("double", "arbitrary"):
            raise ValueError(f"precision mode must be 'double' or 'arbitrary', got {self.mode!r}")
        if self.mode == "arbitrary":
            if self.mantissa_bits < 64:
                raise ValueError("arbitrary mode requires mantissa_bits >= 64")
            if self.eig_tol is not None and self.eig_tol < 2.0 ** (1 - self.mantissa_bits):
                raise ValueError("eig_tol below the working precision")

    @property
    def bits(self) -> int | None:
        return None if self.mode == "double" else self.mantissa_bits

    @property
    def tol(self) -> float:
        if self.eig_tol is not None:
            return self.eig_tol
        if self.mode == "double":
            return 1e-14
        return 2.0 ** (8 - self.mantissa_bits)

    def doubled(self) -> "PrecisionConfig":
        bits = min(2 * self.mantissa_bits, MAX_BITS)
        return PrecisionConfig("arbitrary", bits, None)


DOUBLE = PrecisionConfig()


@dataclass
class Spectrum:
    """Ascending eigenvalues of one block, optionally with unit eigenvectors.

    ``eigenvalues`` is a float64 array in double mode and a list of ``mpfr``
    in arbitrary mode; ``widths`` holds the final bisection bracket of each
    eigenvalue (the certified resolution).
    """

    block: SectorBlock
    eigenvalues: object
    precision: PrecisionConfig
    widths: object = None
    eigenvectors: object = None
    indices: tuple[int, int] | None = None
    width: float = field(default=0.0)

    def values(self) -> np.ndarray:
        return np.array([float(x) for x in self.eigenvalues])

    def vectors(self) -> np.ndarray:
        if self.eigenvectors is None:
            raise ValueError("spectrum was computed without eigenvectors")
        if isinstance(self.eigenvectors, np.ndarray):
            return self.eigenvectors
        return np.array([[float(x) for x in col] for col in self.eigenvectors]).T


def _check_finite(block: SectorBlock):
    for x in list(block.diag) + list(block.offdiag):
        if not math.isfinite(float(x)):
            raise ValueError("block has NaN or infinite entries")


def gershgorin(block: SectorBlock) -> tuple[float, float]:
    d, e = block.as_float()
    r = np.zeros_like(d)
    r[:-1] += np.abs(e)
    r[1:] += np.abs(e)
    return float((d - r).min()), float((d + r).max())


def spectral_width(block: SectorBlock) -> float:
    lo, hi = gershgorin(block)
    return max(hi - lo, abs(lo), abs(hi), 1e-300)


def _sturm(diag, e2, x, pivmin):
    count = 0
    q = diag[0] - x
    if abs(q) <= pivmin:
        q = -pivmin
    if q < 0:
        count += 1
    for i in range(1, len(diag)):
        q = diag[i] - x - e2[i - 1] / q
        if abs(q) <= pivmin:
            q = -pivmin
        if q < 0:
            count += 1
    return count


def sturm_count(block: SectorBlock, x) -> int:
    """Number of eigenvalues strictly below ``x``.

    Uses the LDL^T pivot recurrence; a pivot that underflows to (near) zero is
    replaced by ``-pivmin``, which keeps the count consistent with a tiny
    shift of ``x``.
    """
    if block.bits is None:
        diag = [float(v) for v in block.diag]
        e2 = [float(v) ** 2 for v in block.offdiag]
        pivmin = np.finfo(float).tiny * max(max(e2, default=1.0), 1.0)
        return _sturm(diag, e2, float(x), pivmin)
    with workprec(block.bits):
        e2 = [v * v for v in block.offdiag]
        pivmin = _mp_pivmin(block, e2)
        return _sturm(block.diag, e2, gmpy2.mpfr(x), pivmin)


def _mp_pivmin(block, e2):
    big = max([abs(v) for v in block.diag] + [abs(v) for v in e2] + [gmpy2.mpfr(1)])
    return big * gmpy2.mpfr(2) ** (-2 * block.bits)


def _check_indices(block, indices):
    n = block.dim
    if indices is None:
        return 0, n - 1
    i0, i1 = indices
    if not 0 <= i0 <= i1 < n:
        raise ValueError(f"eigenvalue index range {indices} outside block dimension {n}")
    return i0, i1


def eig_values(block: SectorBlock, precision: PrecisionConfig = DOUBLE, indices=None) -> Spectrum:
    """Eigenvalues ``indices[0]..indices[1]`` (inclusive, ascending) by bisection."""
    if block.dim < 1:
        raise ValueError("empty block")
    _check_finite(block)
    i0, i1 = _check_indices(block, indices)
    width = spectral_width(block)
    if precision.mode == "double":
        if block.bits is not None:
            raise ValueError("double-precision solve requested for an arbitrary-precision block")
        vals, widths = _double_values(block, i0, i1, precision.tol * width)
    else:
        if block.bits != precision.mantissa_bits:
            raise ValueError(
                f"block built at {block.bits} bits but solver asked for {precision.mantissa_bits}"
            )
        vals, widths = _mp_values(block, i0, i1, precision)
    return Spectrum(block, vals, precision, widths, None, (i0, i1), width)


def _double_values(block, i0, i1, abstol):
    d = np.asarray(block.diag, dtype=float)
    e = np.asarray(block.offdiag, dtype=float)
    if block.dim == 1:
        return d.copy(), np.zeros(1)
    # dstebz: order='E' (ascending), range='I'
    m, w, _, _, info = lapack.dstebz(d, e, 2, 0.0, 1.0, i0 + 1, i1 + 1, abstol, "E")
    if info != 0:
        raise ConvergenceError(f"dstebz failed to converge (info={info})")
    vals = np.array(w[:m])
    eps = np.finfo(float).eps
    floor = 2 * eps * np.maximum(np.abs(vals), 1.0)
    return vals, np.maximum(abstol, floor)


def _mp_values(block, i0, i1, precision):
    bits = precision.mantissa_bits
    tol = precision.tol
    with workprec(bits):
        diag = list(block.diag)
        e2 = [v * v for v in block.offdiag]
        pivmin = _mp_pivmin(block, e2)
        lo0, hi0 = _mp_gershgorin(diag, block.offdiag)
        span = hi0 - lo0
        abs_floor = max(span, gmpy2.mpfr(1)) * gmpy2.mpfr(2) ** (2 - bits)
        max_iter = bits + 64 + int(abs(math.log2(max(float(span), 1e-300))))
        m = i1 - i0 + 1
        lo = [lo0] * m
        hi = [hi0] * m
        for j in range(m):
            k = i0 + j
            for _ in range(max_iter):
                if hi[j] - lo[j] <= max(tol * max(abs(lo[j]), abs(hi[j])), abs_floor):
                    break
                mid = (lo[j] + hi[j]) / 2
                count = _sturm(diag, e2, mid, pivmin)
                # every count tightens the brackets of all remaining eigenvalues
                for jj in range(j, m):
                    if i0 + jj < count:
                        if mid < hi[jj]:
                            hi[jj] = mid
                    elif mid > lo[jj]:
                        lo[jj] = mid
            else:
                raise ConvergenceError(f"eigenvalue {k} did not converge; bracket [{lo[j]}, {hi[j]}]")
        vals = [(a + b) / 2 for a, b in zip(lo, hi)]
        widths = [b - a for a, b in zip(lo, hi)]
        return vals, widths


def _mp_gershgorin(diag, off):
    n = len(diag)
    lo = hi = None
    for i in range(n):
        r = gmpy2.mpfr(0)
        if i > 0:
            r += abs(off[i - 1])
        if i < n - 1:
            r += abs(off[i])
        a, b = diag[i] - r, diag[i] + r
        lo = a if lo is None or a < lo else lo
        hi = b if hi is None or b > hi else hi
    pad = (hi - lo) * gmpy2.mpfr(2) ** -40 + gmpy2.mpfr(2) ** -40
    return lo - pad, hi + pad


def eig_vectors(block: SectorBlock, spectrum: Spectrum) -> Spectrum:
    """Attach unit eigenvectors by inverse iteration.

    Start vector is all-ones; eigenvalues closer than ``1e3 * eig_tol * width``
    form a cluster whose vectors are Gram-Schmidt orthogonalized against each
    other; a cluster that still loses orthogonality is retried with a
    perturbed shift up to three times.
    """
    precision = spectrum.precision
    if spectrum.block is not block:
        if spectrum.block.dim != block.dim:
            raise ValueError("spectrum does not belong to this block")
    if precision.mode == "double":
        vecs = _double_vectors(block, spectrum)
    else:
        vecs = _mp_vectors(block, spectrum)
    return Spectrum(block, spectrum.eigenvalues, precision, spectrum.widths, vecs,
                    spectrum.indices, spectrum.width)


def _double_vectors(block, spectrum):
    d = np.asarray(block.diag, dtype=float)
    e = np.asarray(block.offdiag, dtype=float)
    i0, i1 = spectrum.indices
    m = i1 - i0 + 1
    if block.dim == 1:
        return np.ones((1, 1))
    # dstein wants the eigenvalues grouped by the split blocks dstebz found
    abstol = spectrum.precision.tol * spectrum.width
    mm, w, iblock, isplit, info = lapack.dstebz(d, e, 2, 0.0, 1.0, i0 + 1, i1 + 1, abstol, "B")
    if info != 0 or mm != m:
        raise ConvergenceError(f"dstebz failed to converge (info={info})")
    z, info = lapack.dstein(d, e, w[:m], iblock, isplit)
    if info != 0:
        raise ConvergenceError(f"dstein failed for {info} eigenvectors")
    order = np.argsort(w[:m], kind="stable")
    z = np.array(z[:, order])
    # deterministic sign: first non-negligible component positive
    pivot = np.argmax(np.abs(z) > 1e-8 * np.abs(z).max(axis=0), axis=0)
    signs = np.sign(z[pivot, np.arange(m)])
    signs[signs == 0] = 1.0
    return z * signs


def _tri_solve(diag, off, shift, rhs, pivmin):
    """Solve (T - shift) x = rhs by Gaussian elimination with partial pivoting.

    Row i keeps entries at columns i, i+1, i+2 (``a``, ``c``, ``f``); the
    second superdiagonal ``f`` only fills in when rows are swapped.
    """
    n = len(diag)
    a = [x - shift for x in diag]
    b = list(off)
    c = list(off)
    f = [0] * n
    r = list(rhs)
    for i in range(n - 1):
        if abs(a[i]) >= abs(b[i]):
            if abs(a[i]) <= pivmin:
                a[i] = pivmin
            m = b[i] / a[i]
            a[i + 1] = a[i + 1] - m * c[i]
            r[i + 1] = r[i + 1] - m * r[i]
        else:
            m = a[i] / b[i]
            c_next = c[i + 1] if i + 1 < n - 1 else 0
            a[i], c[i], f[i], a[i + 1] = b[i], a[i + 1], c_next, c[i] - m * a[i + 1]
            if i + 1 < n - 1:
                c[i + 1] = -m * c_next
            r[i], r[i + 1] = r[i + 1], r[i] - m * r[i + 1]
    if abs(a[n - 1]) <= pivmin:
        a[n - 1] = pivmin
    x = [0] * n
    x[n - 1] = r[n - 1] / a[n - 1]
    if n > 1:
        x[n - 2] = (r[n - 2] - c[n - 2] * x[n - 1]) / a[n - 2]
    for i in range(n - 3, -1, -1):
        x[i] = (r[i] - c[i] * x[i + 1] - f[i] * x[i + 2]) / a[i]
    return x


def _mp_norm(v):
    return gmpy2.sqrt(sum(x * x for x in v))


def _mp_vectors(block, spectrum):
    precision = spectrum.precision
    bits = precision.mantissa_bits
    tol = precision.tol
    with workprec(bits):
        diag, off = list(block.diag), list(block.offdiag)
        n = len(diag)
        width = gmpy2.mpfr(spectrum.width)
        pivmin = max(width, gmpy2.mpfr(1)) * gmpy2.mpfr(2) ** (-bits)
        cluster_gap = 1e3 * tol * width
        ortho_tol = gmpy2.mpfr(2) ** (20 - bits)
        vals = list(spectrum.eigenvalues)
        out = []
        cluster = []
        def project_out(v):
            # two Gram-Schmidt passes keep the result orthogonal to working precision
            for _ in range(2):
                for u in cluster:
                    dot = sum(a * b for a, b in zip(u, v))
                    v = [a - dot * b for a, b in zip(v, u)]
            nrm = _mp_norm(v)
            return [x / nrm for x in v]

        for k, lam in enumerate(vals):
            if k > 0 and lam - vals[k - 1] > cluster_gap:
                cluster = []
            # deterministic start vectors that differ per index, so members of an
            # exactly degenerate cluster do not all start from the same direction
            rng = np.random.default_rng(k)
            for attempt in range(4):
                shift = lam + attempt * width * gmpy2.mpfr(2) ** (10 - bits) * (k + 1)
                v = project_out([gmpy2.mpfr(float(x)) for x in rng.uniform(0.5, 1.5, n)])
                for _ in range(4):
                    v = project_out(_tri_solve(diag, off, shift, v, pivmin))
                if all(abs(sum(a * b for a, b in zip(u, v))) <= ortho_tol for u in cluster):
                    break
            else:
                raise ConvergenceError(f"eigenvector {k} lost orthogonality within its cluster")
            j = next(i for i, x in enumerate(v) if abs(x) > gmpy2.mpfr(1e-8))
            if v[j] < 0:
                v = [-x for x in v]
            cluster.append(v)
            out.append(v)
        return out


def solve(block: SectorBlock, precision: PrecisionConfig = DOUBLE, indices=None,
          vectors: bool = False) -> Spectrum:
    spec = eig_values(block, precision, indices)
    return eig_vectors(block, spec) if vectors else spec


def residual(block: SectorBlock, spectrum: Spectrum) -> float:
    """max_k |T v_k - lambda_k v_k|_inf, evaluated at the block's precision."""
    if block.bits is None:
        d, e = block.as_float()
        V = spectrum.vectors()
        lam = spectrum.values()
        TV = d[:, None] * V
        TV[:-1] += e[:, None] * V[1:]
        TV[1:] += e[:, None] * V[:-1]
        return float(np.abs(TV - V * lam[None, :]).max())
    worst = 0.0
    with workprec(block.bits):
        d, e, n = block.diag, block.offdiag, block.dim
        for lam, v in zip(spectrum.eigenvalues, spectrum.eigenvectors):
            for i in range(n):
                t = (d[i] - lam) * v[i]
                if i > 0:
                    t += e[i - 1] * v[i - 1]
                if i < n - 1:
                    t += e[i] * v[i + 1]
                worst = max(worst, float(abs(t)))
    return worst


def orthonormality_error(spectrum: Spectrum) -> float:
    """max |V^T V - I| at the spectrum's precision."""
    if isinstance(spectrum.eigenvectors, np.ndarray):
        V = spectrum.eigenvectors
        return float(np.abs(V.T @ V - np.eye(V.shape[1])).max())
    vecs = spectrum.eigenvectors
    worst = 0.0
    with workprec(spectrum.precision.mantissa_bits):
        for i, u in enumerate(vecs):
            for j in range(i, len(vecs)):
                dot = sum(a * b for a, b in zip(u, vecs[j]))
                worst = max(worst, float(abs(dot - (1 if i == j else 0))))
    return worst
