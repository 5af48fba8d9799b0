"""Spectral post-processing: correlation diagrams, symmetry-sector gaps and fits."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from scipy.ndimage import median_filter
from scipy.optimize import minimize_scalar

from . import eigensolver as es
from ._mp import to_decimal, workprec
from .models import (
    _PAIR_FACTOR,
    ModelInstance,
    SectorLabel,
    build_block,
    critical_xi,
    sector_list,
    sector_multiplicity,
)

log = logging.getLogger(__name__)


def symmetric_sector(model: str) -> SectorLabel:
    """The sector holding the ground state (even parity, l = 0, J = 0, tau = 0)."""
    return sector_list(ModelInstance(model, 1, 0.0), distinct=True)[0]


def sector_energies(instance: ModelInstance, label: SectorLabel,
                    precision: es.PrecisionConfig = es.DOUBLE, indices=None) -> es.Spectrum:
    block = build_block(instance, label, precision.bits)
    return es.eig_values(block, precision, indices)


def ground_energy(instance: ModelInstance, exhaustive: bool = False) -> float:
    """Lowest eigenvalue of H.

    The ground state sits in the symmetric sector for every xi (at xi = 1 it
    is degenerate with the heads of all other sectors), so only that block is
    diagonalized unless ``exhaustive`` asks for the minimum over all sectors.
    """
    labels = sector_list(instance, distinct=True) if exhaustive else [symmetric_sector(instance.model)]
    return min(float(sector_energies(instance, lab, indices=(0, 0)).values()[0]) for lab in labels)


# -- correlation energy diagrams ---------------------------------------------

@dataclass
class CorrelationDiagram:
    model: str
    N: int
    xi: np.ndarray
    sectors: list[SectorLabel]
    levels: dict[SectorLabel, np.ndarray]  # (len(xi), block dim), scaled (E - E0)/N
    ground: np.ndarray
    failures: dict[int, str] = field(default_factory=dict)


def correlation_diagram(model: str, N: int, xi_grid, sectors=None) -> CorrelationDiagram:
    """Scaled excitation energies ``(E - E0)/N`` per sector across a xi grid.

    A failure at one grid point is recorded and the sweep continues; the row
    for that point is left as NaN.
    """
    xi_grid = np.asarray(xi_grid, dtype=float)
    if np.any(np.diff(xi_grid) < 0) or xi_grid.min(initial=0) < 0 or xi_grid.max(initial=0) > 1:
        raise ValueError("xi grid must be sorted and inside [0, 1]")
    if sectors is None:
        sectors = sector_list(ModelInstance(model, N, 0.0), distinct=True)[:2]
    sectors = list(sectors)
    levels = {}
    for lab in sectors:
        dim = len(range(lab.tau, N + 1, 2))
        levels[lab] = np.full((len(xi_grid), dim), np.nan)
    ground = np.full(len(xi_grid), np.nan)
    failures = {}
    for k, xi in enumerate(xi_grid):
        inst = ModelInstance(model, N, float(xi))
        try:
            e0 = ground_energy(inst)
            ground[k] = e0
            for lab in sectors:
                levels[lab][k] = (sector_energies(inst, lab).values() - e0) / N
        except (es.ConvergenceError, ValueError) as exc:
            failures[k] = str(exc)
            log.warning("xi=%s failed: %s", xi, exc)
    return CorrelationDiagram(model, N, xi_grid, sectors, levels, ground, failures)


# -- gaps between symmetry sectors ---------------------------------------------

@dataclass(frozen=True)
class LevelPair:
    """i-th level of sector ``a`` against the i-th level of sector ``b``."""

    sector_a: SectorLabel
    sector_b: SectorLabel
    index: int = 0

    def __str__(self):
        return f"{self.sector_a}/{self.sector_b}#{self.index}"

    @classmethod
    def parse(cls, text: str) -> "LevelPair":
        sectors, _, idx = text.partition("#")
        a, _, b = sectors.partition("/")
        return cls(SectorLabel.parse(a), SectorLabel.parse(b), int(idx or 0))


def default_pair(model: str, index: int = 0) -> LevelPair:
    a, b = sector_list(ModelInstance(model, 1, 0.0), distinct=True)[:2]
    return LevelPair(a, b, index)


_TINY = float(np.nextafter(0.0, 1.0))


@dataclass(frozen=True)
class Gap:
    """Inter-sector gap.

    ``value``/``resolution`` are float views, clamped to the smallest positive
    double when the true number underflows; ``exact``/``exact_resolution`` keep
    the arbitrary-precision numbers for output.
    """

    value: float            # E_b - E_a, or the resolution when flagged
    resolution: float       # certified bisection resolution of the difference
    below_resolution: bool
    bits: int | None        # None for double precision
    exact: object = None
    exact_resolution: object = None

    @property
    def text(self) -> str:
        if self.exact is None:
            return format_value(self.value)
        return format_value(self.exact_resolution if self.below_resolution else self.exact)


def level_gap(instance: ModelInstance, pair: LevelPair,
              precision: es.PrecisionConfig = es.DOUBLE, escalate: bool = True) -> Gap:
    """``E_b[i] - E_a[i]`` with a certified resolution.

    In arbitrary mode the mantissa is doubled (up to 4096 bits) while the gap
    is below ``2**(16 - bits)`` times the spectral width.  A gap that cannot be
    told apart from zero is returned as its resolution and flagged.
    """
    i = pair.index
    while True:
        sa = sector_energies(instance, pair.sector_a, precision, (i, i))
        sb = sector_energies(instance, pair.sector_b, precision, (i, i))
        width = max(sa.width, sb.width)
        if precision.mode == "double":
            gap = float(sb.eigenvalues[0] - sa.eigenvalues[0])
            res = float(sa.widths[0] + sb.widths[0])
            flagged = abs(gap) <= res
            return Gap(res if flagged else gap, res, flagged, None)
        with workprec(precision.mantissa_bits):
            exact = sb.eigenvalues[0] - sa.eigenvalues[0]
            exact_res = sa.widths[0] + sb.widths[0]
            threshold = width * gmpy2.mpfr(2) ** (16 - precision.mantissa_bits)
            tiny = abs(exact) < threshold
            flagged = abs(exact) <= exact_res
        if not (escalate and tiny and precision.mantissa_bits < es.MAX_BITS):
            break
        precision = precision.doubled()
    res = max(float(exact_res), _TINY)
    gap = res if flagged else float(exact)
    if gap == 0.0:
        gap = _TINY
    return Gap(gap, res, flagged, precision.bits, exact, exact_res)


@dataclass
class GapCurves:
    model: str
    N: int
    xi: np.ndarray
    pairs: list[LevelPair]
    gaps: dict[LevelPair, np.ndarray]
    resolution: dict[LevelPair, np.ndarray]
    flagged: dict[LevelPair, np.ndarray]
    failures: dict[int, str] = field(default_factory=dict)
    text: dict[LevelPair, list] = field(default_factory=dict)  # full-precision gap strings


def gap_vs_xi(model: str, N: int, pairs, xi_grid, precision: es.PrecisionConfig = es.DOUBLE) -> GapCurves:
    """Unscaled inter-sector gaps along a xi grid, ready for a log axis."""
    xi_grid = np.asarray(xi_grid, dtype=float)
    pairs = list(pairs)
    out = GapCurves(model, N, xi_grid, pairs,
                    {p: np.full(len(xi_grid), np.nan) for p in pairs},
                    {p: np.full(len(xi_grid), np.nan) for p in pairs},
                    {p: np.zeros(len(xi_grid), dtype=bool) for p in pairs},
                    text={p: ["nan"] * len(xi_grid) for p in pairs})
    for k, xi in enumerate(xi_grid):
        inst = ModelInstance(model, N, float(xi))
        try:
            for p in pairs:
                g = level_gap(inst, p, precision)
                out.gaps[p][k] = g.value
                out.resolution[p][k] = g.resolution
                out.flagged[p][k] = g.below_resolution
                out.text[p][k] = g.text
        except (es.ConvergenceError, ValueError) as exc:
            out.failures[k] = str(exc)
            log.warning("xi=%s failed: %s", xi, exc)
    return out


@dataclass
class GapSeries:
    model: str
    xi: float
    pair: LevelPair
    N: np.ndarray
    gaps: np.ndarray
    resolution: np.ndarray
    flagged: np.ndarray
    bits: list
    text: list = field(default_factory=list)  # full-precision gap strings


def gap_vs_N(model: str, xi: float, pair: LevelPair, N_list,
             precision: es.PrecisionConfig = es.DOUBLE) -> GapSeries:
    """Inter-sector gap for each system size; sub-resolution gaps are flagged, not dropped."""
    N_list = [int(n) for n in N_list]
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N list must be strictly ascending")
    gaps, res, flags, bits, text = [], [], [], [], []
    for N in N_list:
        g = level_gap(ModelInstance(model, N, xi), pair, precision)
        text.append(g.text)
        gaps.append(g.value)
        res.append(g.resolution)
        flags.append(g.below_resolution)
        bits.append(g.bits)
    return GapSeries(model, xi, pair, np.array(N_list), np.array(gaps), np.array(res),
                     np.array(flags), bits, text)


@dataclass(frozen=True)
class FitResult:
    form: str  # "exponential": a exp(-b N); "power": a N^-b
    a: float
    b: float
    r2: float
    residuals: np.ndarray


def fit_gap(series, form: str) -> FitResult:
    """Least squares on the linearized law (log gap against N or log N).

    ``series`` is a :class:`GapSeries` or an ``(N, gaps)`` pair.
    """
    if isinstance(series, GapSeries):
        N, y = series.N, series.gaps
    else:
        N, y = series
    N = np.asarray(N, dtype=float)
    y = np.asarray(y, dtype=float)
    if len(N) < 4:
        raise ValueError("need at least 4 samples to fit")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("gaps must be positive and finite")
    if form == "exponential":
        x = N
    elif form == "power":
        x = np.log(N)
    else:
        raise ValueError(f"unknown fit form {form!r}")
    X = np.column_stack([np.ones_like(x), x])
    coef, _, rank, _ = np.linalg.lstsq(X, np.log(y), rcond=None)
    if rank < 2:
        raise ValueError("rank-deficient fit: all abscissae coincide")
    fitted = X @ coef
    resid = np.log(y) - fitted
    ss_tot = np.sum((np.log(y) - np.log(y).mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(form, float(np.exp(coef[0])), float(-coef[1]), float(min(max(r2, 0.0), 1.0)), resid)


# -- mean-field limit ----------------------------------------------------------

def meanfield_energy(model: str, xi: float, beta):
    """Energy per boson of the condensate ``(s^+ + beta b_x^+)^N |0>`` as N -> inf.

    ``n/N -> beta^2/(1+beta^2)`` and ``A^+A/N^2 -> ((1-beta^2)/(1+beta^2))^2``
    for the pair operator ``A``, so ``e = (1-xi) x + c xi (1 - 2x)^2``.
    """
    beta = np.asarray(beta, dtype=float)
    x = beta ** 2 / (1 + beta ** 2)
    return (1 - xi) * x + _PAIR_FACTOR[model] * xi * (1 - 2 * x) ** 2


def meanfield_critical_energy(model: str, xi: float) -> float:
    """Scaled ESQPT energy ``e(0) - min_beta e(beta)`` above the ground state."""
    xc = critical_xi(model)
    if xi < xc - 1e-15:
        raise ValueError(f"xi={xi} is in the symmetric phase (xi_c={xc:.6g}); no ESQPT")
    res = minimize_scalar(lambda b: float(meanfield_energy(model, xi, b)),
                          bounds=(0.0, 2.0), method="bounded", options={"xatol": 1e-12})
    e_min = min(float(res.fun), float(meanfield_energy(model, xi, 0.0)))
    return float(meanfield_energy(model, xi, 0.0)) - e_min


def level_density_peak(model: str, N: int, xi: float) -> float:
    """Scaled energy where the symmetric-sector level density peaks.

    Density is the inverse nearest-neighbour spacing, smoothed by a 5-point
    median so that residual doublet structure does not produce spikes.
    """
    inst = ModelInstance(model, N, xi)
    E = sector_energies(inst, symmetric_sector(model)).values()
    s = np.diff(E)
    rho = median_filter(1.0 / np.maximum(s, np.finfo(float).tiny), size=5, mode="nearest")
    k = int(np.argmax(rho))
    return float((0.5 * (E[k] + E[k + 1]) - E[0]) / N)


def extrapolated_critical_energy(model: str, xi: float, N_list=(300, 600, 1200)) -> float:
    """Richardson extrapolation of the level-density peak to 1/N -> 0."""
    h = 1.0 / np.asarray(N_list, dtype=float)
    peaks = np.array([level_density_peak(model, int(n), xi) for n in N_list])
    coef = np.polyfit(h, peaks, len(h) - 1)
    return float(np.polyval(coef, 0.0))


def scaled_ground_energy(model: str, N: int, xi_grid) -> np.ndarray:
    return np.array([ground_energy(ModelInstance(model, N, float(x))) / N for x in xi_grid])


def qpt_location(model: str, N: int, xi_grid=None, step: float = 1e-3) -> float:
    """xi where the finite-difference second derivative of E0/N peaks in magnitude.

    The curvature is negative (E0 is concave in xi), so the peak is the
    extremum of ``|d2 e0 / d xi2|``.
    """
    if xi_grid is None:
        xi_grid = np.arange(0.05, 0.45 + step / 2, step)
    xi_grid = np.asarray(xi_grid, dtype=float)
    e = scaled_ground_energy(model, N, xi_grid)
    d2 = (e[2:] - 2 * e[1:-1] + e[:-2]) / step ** 2
    return float(xi_grid[1:-1][np.argmax(np.abs(d2))])


# -- centrifugal barrier -----------------------------------------------------

def centrifugal_scan(N: int, ells, xi_grid) -> dict[int, np.ndarray]:
    """``(E_head(l) - E0) / l`` for the 2D vibron model along a xi grid."""
    ells = [int(l) for l in ells]
    for l in ells:
        if not 1 <= l <= N:
            raise ValueError(f"angular momentum {l} outside [1, {N}]")
    xi_grid = np.asarray(xi_grid, dtype=float)
    out = {l: np.empty(len(xi_grid)) for l in ells}
    for k, xi in enumerate(xi_grid):
        inst = ModelInstance("VM2D", N, float(xi))
        e0 = ground_energy(inst)
        for l in ells:
            head = sector_energies(inst, SectorLabel("ell", l), indices=(0, 0)).values()[0]
            out[l][k] = (head - e0) / l
    return out


def format_value(x) -> str:
    """17 significant digits for floats, the full decimal string for mpfr."""
    if isinstance(x, (float, np.floating, int, np.integer)):
        x = float(x)
        return "nan" if math.isnan(x) else f"{x:.16e}"
    return to_decimal(x)


def union_spectrum(instance: ModelInstance) -> np.ndarray:
    """All sector spectra, each repeated by its multiplicity, sorted.

    Comparable one-to-one with the spectrum of the full Fock-space matrix.
    """
    parts = []
    for lab in sector_list(instance, distinct=True):
        vals = sector_energies(instance, lab).values()
        parts.append(np.repeat(vals, sector_multiplicity(instance, lab, distinct=True)))
    return np.sort(np.concatenate(parts))
