import pytest

from esqpt_lab.plotting import build_figure, emit_plot


def test_gaps_n_axes():
    data = {"N": [20, 40, 80, 160], "gap": [1e-2, 5e-3, 2.5e-3, 1.2e-3]}
    fit = {"form": "power", "a": 0.2, "b": 1.0, "r2": 0.999}
    ax = build_figure(data, "gaps-n", {"model": "LMG", "fit": fit}).axes[0]
    assert (ax.get_xscale(), ax.get_yscale()) == ("linear", "log")
    ax = build_figure(data, "gaps-n", {"model": "VM2D"}).axes[0]
    assert (ax.get_xscale(), ax.get_yscale()) == ("log", "log")


def test_gaps_xi_and_centrifugal_log_y():
    ax = build_figure({"xi": [0, 1], "pair": ["p", "p"], "gap": [1, 0.1]}, "gaps-xi").axes[0]
    assert ax.get_yscale() == "log"
    ax = build_figure({"xi": [0, 1], "ell": [1, 1], "scaled_gap": [1, 0.1]}, "centrifugal").axes[0]
    assert ax.get_yscale() == "log"


def test_deterministic(tmp_path):
    data = {"xi": [0, 0.5, 1], "pair": ["a", "a", "a"], "gap": [1, 0.1, 0.01]}
    a = emit_plot(data, "gaps-xi", tmp_path / "a.svg").read_bytes()
    b = emit_plot(data, "gaps-xi", tmp_path / "b.svg").read_bytes()
    assert a == b


def test_empty_dataset_warns(tmp_path):
    p = emit_plot({"scaled_energy": [], "value": []}, "otoc", tmp_path / "e.svg")
    assert "no data" in p.read_text()


def test_column_mismatch(tmp_path):
    with pytest.raises(ValueError, match="lacks columns"):
        emit_plot({"N": [1]}, "gaps-n", tmp_path / "x.svg")
    with pytest.raises(ValueError, match="unequal"):
        emit_plot({"N": [1, 2], "gap": [1]}, "gaps-n", tmp_path / "x.svg")
    with pytest.raises(ValueError, match="unknown"):
        emit_plot({}, "pie", tmp_path / "x.svg")


def test_otoc_marker(tmp_path):
    data = {"scaled_energy": [0, 0.2, 0.4], "value": [1, 1, 0], "T": ["inf"] * 3}
    with_marker = emit_plot(data, "otoc", tmp_path / "m.svg", {"critical_energy": 0.3}).read_text()
    without = emit_plot(data, "otoc", tmp_path / "n.svg").read_text()
    assert with_marker.count("<path") > without.count("<path")


@pytest.mark.parametrize("kind,data", [
    ("ced", {"xi": [0, 1, 0, 1], "sector": ["ell=0"] * 2 + ["ell=1"] * 2, "level": [0] * 4,
             "energy": [0, 0.1, 0.5, 0.2]}),
    ("centrifugal", {"xi": [0, 0.5, 1], "ell": [1, 1, 1], "scaled_gap": [1, 0.5, 0]}),
])
def test_other_kinds_render(tmp_path, kind, data):
    assert emit_plot(data, kind, tmp_path / f"{kind}.svg").stat().st_size > 1000
