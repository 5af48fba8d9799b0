"""SVG figures for the CLI report path.

Datasets are column dictionaries (the same columns the CSV writer emits), so
a figure can be regenerated from a CSV alone.  Rendering goes through the Agg
backend with a fixed hash salt and no date stamp, which makes identical
datasets produce byte-identical SVG files.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

REQUIRED_COLUMNS = {
    "ced": ("xi", "sector", "level", "energy"),
    "gaps-xi": ("xi", "pair", "gap"),
    "gaps-n": ("N", "gap"),
    "centrifugal": ("xi", "ell", "scaled_gap"),
    "otoc": ("scaled_energy", "value"),
}

_STYLES = ("-", "--", ":", "-.")
_RC = {
    "svg.hashsalt": "esqpt-lab",
    "svg.fonttype": "none",
    "font.size": 10,
    "axes.linewidth": 0.8,
    "lines.linewidth": 0.9,
    "legend.frameon": False,
}


def _column(dataset, name, dtype=float):
    return np.asarray(dataset[name], dtype=dtype)


def _ced(ax, data, meta):
    sectors = sorted(set(data["sector"]), key=str)
    sector = np.asarray(data["sector"], dtype=object)
    level = _column(data, "level", int)
    xi, energy = _column(data, "xi"), _column(data, "energy")
    for k, sec in enumerate(sectors):
        style = _STYLES[k % len(_STYLES)]
        for lv in np.unique(level[sector == sec]):
            m = (sector == sec) & (level == lv)
            ax.plot(xi[m], energy[m], style, color=f"C{k}", label=str(sec) if lv == 0 else None)
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel(r"$(E - E_0)/N$")
    ax.legend(loc="upper right")


def _gaps_xi(ax, data, meta):
    pair = np.asarray(data["pair"], dtype=object)
    xi, gap = _column(data, "xi"), _column(data, "gap")
    for k, p in enumerate(sorted(set(pair), key=str)):
        m = pair == p
        ax.semilogy(xi[m], gap[m], _STYLES[k % len(_STYLES)], color=f"C{k}", label=str(p))
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel(r"$\Delta E$")
    ax.legend(loc="lower left")


def _gaps_n(ax, data, meta):
    N, gap = _column(data, "N"), _column(data, "gap")
    ax.plot(N, gap, "o", ms=3, color="C0", label="gap")
    fit = meta.get("fit")
    if fit:
        grid = np.linspace(N.min(), N.max(), 200)
        if fit["form"] == "exponential":
            model = fit["a"] * np.exp(-fit["b"] * grid)
        else:
            model = fit["a"] * grid ** (-fit["b"])
        ax.plot(grid, model, "-", color="C1", label=f"{fit['form']} fit, $r^2$={fit['r2']:.6f}")
    ax.set_yscale("log")
    # exponential closing shows up as a line on lin-log axes, a power law on log-log
    if meta.get("model") != "LMG":
        ax.set_xscale("log")
    ax.set_xlabel("$N$")
    ax.set_ylabel(r"$\Delta E$")
    ax.legend(loc="lower left")


def _centrifugal(ax, data, meta):
    ell = _column(data, "ell", int)
    xi, y = _column(data, "xi"), _column(data, "scaled_gap")
    for k, l in enumerate(np.unique(ell)):
        m = ell == l
        ax.plot(xi[m], np.where(y[m] > 0, y[m], np.nan), _STYLES[k % len(_STYLES)],
                color=f"C{k}", label=rf"$\ell$={l}")
    ax.set_yscale("log")
    ax.set_xlabel(r"$\xi$")
    ax.set_ylabel(r"$(E_\ell - E_0)/\ell$")
    ax.legend(loc="lower left")


def _otoc(ax, data, meta):
    e, v = _column(data, "scaled_energy"), _column(data, "value")
    T = np.asarray(data.get("T", ["inf"] * len(e)), dtype=float)
    for k, t in enumerate(np.unique(T)):
        m = T == t
        label = "stationary" if np.isinf(t) else f"T={t:g}"
        ax.plot(e[m], v[m], ".-", ms=2, color=f"C{k}", label=label)
    ec = meta.get("critical_energy")
    if ec is not None:
        ax.axvline(ec, ls="-.", color="tab:pink", label=r"$\epsilon_c$")
    ax.set_xlabel(r"$(E - E_0)/N$")
    ax.set_ylabel(r"$\overline{F}$")
    ax.legend(loc="upper right")


_DRAW = {"ced": _ced, "gaps-xi": _gaps_xi, "gaps-n": _gaps_n,
         "centrifugal": _centrifugal, "otoc": _otoc}


def _validate(dataset: dict, kind: str):
    if kind not in REQUIRED_COLUMNS:
        raise ValueError(f"unknown figure kind {kind!r}")
    missing = [c for c in REQUIRED_COLUMNS[kind] if c not in dataset]
    if missing:
        raise ValueError(f"dataset for {kind!r} lacks columns {missing}")
    lengths = {len(dataset[c]) for c in REQUIRED_COLUMNS[kind]}
    if len(lengths) > 1:
        raise ValueError(f"dataset columns for {kind!r} have unequal lengths")
    return lengths == {0}


def build_figure(dataset: dict, kind: str, meta: dict | None = None) -> Figure:
    """Figure for ``dataset``; call inside ``matplotlib.rc_context(_RC)`` for the house style."""
    empty = _validate(dataset, kind)
    meta = meta or {}
    fig = Figure(figsize=(5.0, 3.6))
    ax = fig.add_subplot()
    if empty:
        ax.text(0.5, 0.5, "no data: every task failed or was empty", ha="center",
                va="center", transform=ax.transAxes, color="tab:red")
    else:
        _DRAW[kind](ax, dataset, meta)
    if meta.get("title"):
        ax.set_title(meta["title"])
    fig.tight_layout()
    return fig


def emit_plot(dataset: dict, kind: str, path, meta: dict | None = None) -> Path:
    """Render ``dataset`` as figure ``kind`` to an SVG file at ``path``.

    ``meta`` carries plot extras: ``model`` (axis scaling of ``gaps-n``),
    ``fit`` (overlay), ``critical_energy`` (vertical marker), ``title``.
    """
    path = Path(path)
    with matplotlib.rc_context(_RC):
        fig = build_figure(dataset, kind, meta)
        fig.savefig(path, format="svg", metadata={"Date": None})
    return path
