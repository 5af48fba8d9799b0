import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st
from scipy.stats import spearmanr

from esqpt_lab import analysis as an
from esqpt_lab import eigensolver as es
from esqpt_lab.models import ModelInstance, SectorLabel, analytic_limit_spectrum

EVEN, ODD = SectorLabel("parity", 0), SectorLabel("parity", 1)
L0, L1 = SectorLabel("ell", 0), SectorLabel("ell", 1)
MP256 = es.PrecisionConfig("arbitrary", 256)


@pytest.mark.parametrize("model", ["LMG", "VM2D", "VM3D", "IBM"])
def test_ground_state_in_symmetric_sector(model):
    for xi in (0.0, 0.1, 0.3, 0.6, 1.0):
        inst = ModelInstance(model, 12, xi)
        assert an.ground_energy(inst) == pytest.approx(an.ground_energy(inst, exhaustive=True), abs=1e-12)


def test_ced_xi0_lmg():
    d = an.correlation_diagram("LMG", 50, [0.0], [EVEN, ODD])
    np.testing.assert_allclose(d.levels[EVEN][0], np.arange(0, 51, 2) / 50, atol=1e-15)
    np.testing.assert_allclose(d.levels[ODD][0], np.arange(1, 51, 2) / 50, atol=1e-15)


def test_ced_vm2d_heads_collapse_at_xi1():
    d = an.correlation_diagram("VM2D", 50, [1.0], [L0, L1])
    assert d.levels[L0][0, 0] == pytest.approx(0, abs=1e-12)
    assert d.levels[L1][0, 0] == pytest.approx(0, abs=1e-12)


def test_ced_lmg_doublet_below_separatrix():
    d = an.correlation_diagram("LMG", 50, [0.6], [EVEN, ODD])
    assert abs(d.levels[EVEN][0, 0] - d.levels[ODD][0, 0]) < 1e-6


def test_ced_endpoints_match_analytic():
    N = 30
    d = an.correlation_diagram("VM2D", N, np.linspace(0, 1, 5), [L0, L1])
    for k, xi in ((0, 0.0), (-1, 1.0)):
        inst = ModelInstance("VM2D", N, xi)
        for lab in (L0, L1):
            ref = (analytic_limit_spectrum(inst, lab) - d.ground[k]) / N
            np.testing.assert_allclose(d.levels[lab][k], ref, atol=1e-10)
    assert np.nanmin([d.levels[L0].min(), d.levels[L1].min()]) >= -1e-12


def test_ced_rejects_bad_grid():
    with pytest.raises(ValueError):
        an.correlation_diagram("LMG", 5, [0.5, 0.2])


def test_level_pair_parse():
    p = an.LevelPair(EVEN, ODD, 3)
    assert an.LevelPair.parse(str(p)) == p
    assert an.default_pair("VM2D") == an.LevelPair(L0, L1, 0)


def test_gap_exact_degeneracy_flagged_not_zero():
    g = an.level_gap(ModelInstance("LMG", 50, 1.0), an.LevelPair(EVEN, ODD), MP256)
    assert g.below_resolution and g.value > 0 and g.resolution > 0
    assert g.value == g.resolution
    gd = an.level_gap(ModelInstance("LMG", 50, 1.0), an.LevelPair(EVEN, ODD))
    assert gd.below_resolution and gd.value > 0


def test_gap_escalates_precision():
    g = an.level_gap(ModelInstance("LMG", 120, 0.5), an.LevelPair(EVEN, ODD),
                     es.PrecisionConfig("arbitrary", 128))
    assert g.bits > 128 and not g.below_resolution and g.value > 0
    assert g.text.startswith("1.37")


def test_vm2d_gap_only_closes_at_xi1():
    c = an.gap_vs_xi("VM2D", 50, [an.LevelPair(L0, L1)], np.linspace(0, 0.95, 20))
    p = an.LevelPair(L0, L1)
    assert np.all(c.gaps[p] > 1e-4) and not c.flagged[p].any()
    c1 = an.gap_vs_xi("VM2D", 50, [p], [1.0])
    # exact degeneracy: double precision leaves only rounding-level residue
    assert c1.gaps[p][0] < 1e-10


def test_vm2d_gap_at_half():
    g = an.level_gap(ModelInstance("VM2D", 50, 0.5), an.LevelPair(L0, L1))
    assert 1e-3 <= g.value <= 1e-1


def test_lmg_gap_series_monotone():
    s = an.gap_vs_N("LMG", 0.5, an.LevelPair(EVEN, ODD), range(20, 121, 10), MP256)
    assert not s.flagged.any()
    assert spearmanr(s.N, np.log(s.gaps)).statistic == pytest.approx(-1.0)


def test_vm2d_gap_series_power_law():
    s = an.gap_vs_N("VM2D", 0.5, an.LevelPair(L0, L1), [20, 40, 60, 100, 150, 200, 300, 400])
    assert np.all(np.diff(s.gaps) < 0)
    assert an.fit_gap(s, "power").r2 >= 0.99


@pytest.mark.parametrize("model,pair", [("LMG", an.LevelPair(EVEN, ODD)), ("VM2D", an.LevelPair(L0, L1))])
def test_gap_constant_at_xi0(model, pair):
    s = an.gap_vs_N(model, 0.0, pair, [5, 10, 20, 40])
    np.testing.assert_allclose(s.gaps, 1.0, atol=1e-12)


def test_gap_series_rejects_unsorted():
    with pytest.raises(ValueError):
        an.gap_vs_N("LMG", 0.5, an.default_pair("LMG"), [20, 10])


def test_fit_examples():
    N = np.arange(10, 100, 10)
    f = an.fit_gap((N, np.exp(-0.1 * N)), "exponential")
    assert f.a == pytest.approx(1.0, rel=1e-10) and f.b == pytest.approx(0.1, rel=1e-10) and f.r2 == pytest.approx(1.0)
    f = an.fit_gap((N, 2.0 * N ** -3.0), "power")
    assert f.a == pytest.approx(2.0, rel=1e-10) and f.b == pytest.approx(3.0, rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(1e-3, 1e3), b=st.floats(0.01, 5), form=st.sampled_from(["exponential", "power"]))
def test_fit_round_trip(a, b, form):
    N = np.array([20, 35, 50, 80, 120, 200], dtype=float)
    y = a * np.exp(-b * N) if form == "exponential" else a * N ** (-b)
    assume(y.min() > 1e-300)  # keep the synthetic data out of subnormal range
    f = an.fit_gap((N, y), form)
    assert abs(f.a - a) / a < 1e-8 and abs(f.b - b) / b < 1e-8
    assert 0.0 <= f.r2 <= 1.0 and math.isfinite(f.b)


def test_fit_errors():
    with pytest.raises(ValueError):
        an.fit_gap(([1, 2, 3], [1, 2, 3]), "power")
    with pytest.raises(ValueError):
        an.fit_gap(([1, 2, 3, 4], [1, 0, 3, 4]), "power")
    with pytest.raises(ValueError):
        an.fit_gap(([1, 2, 3, 4], [1, 2, 3, 4]), "cubic")
    with pytest.raises(ValueError):
        an.fit_gap(([5, 5, 5, 5], [1, 2, 3, 4]), "exponential")


@pytest.mark.parametrize("model", ["LMG", "VM2D", "VM3D"])
def test_meanfield_at_critical_point(model):
    assert an.meanfield_critical_energy(model, 0.2) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(ValueError):
        an.meanfield_critical_energy(model, 0.1)


def test_meanfield_closed_form():
    # minimum of (1-xi) x + xi (1-2x)^2 over x in [0, 1/2): e_c = (5 xi - 1)^2 / (16 xi)
    for xi in (0.3, 0.6, 0.9):
        assert an.meanfield_critical_energy("LMG", xi) == pytest.approx((5 * xi - 1) ** 2 / (16 * xi), rel=1e-9)


def test_meanfield_energy_at_origin_is_xi():
    assert float(an.meanfield_energy("VM2D", 0.7, 0.0)) == pytest.approx(0.7)


def test_level_density_peak_near_meanfield():
    ec = an.meanfield_critical_energy("LMG", 0.6)
    assert an.level_density_peak("LMG", 300, 0.6) == pytest.approx(ec, rel=0.05)


def test_qpt_location_moderate_N():
    assert abs(an.qpt_location("LMG", 200) - 0.2) < 0.05


def test_centrifugal_limits_and_ordering():
    scan = an.centrifugal_scan(50, [1, 14, 30], [0.0, 0.6, 1.0])
    for l, v in scan.items():
        assert v[0] == pytest.approx(1.0, abs=1e-10)
        assert v[2] == pytest.approx(0.0, abs=1e-10)
    assert scan[1][1] < scan[14][1] < scan[30][1]
    with pytest.raises(ValueError):
        an.centrifugal_scan(10, [0], [0.5])


def test_format_value():
    import gmpy2
    assert an.format_value(0.1) == "1.0000000000000001e-01"
    assert an.format_value(float("nan")) == "nan"
    with gmpy2.context(precision=100):
        s = an.format_value(gmpy2.mpfr(1) / 3)
    assert s.startswith("3.333333333333333333333333333") and s.endswith("e-01")


def test_union_spectrum_length():
    from esqpt_lab.models import total_dimension
    inst = ModelInstance("VM3D", 5, 0.4)
    assert len(an.union_spectrum(inst)) == total_dimension(inst)
