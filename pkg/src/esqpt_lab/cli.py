"""Batch front end: ``esqpt-lab <subcommand> --config run.json [--out DIR] [--plots] [--workers K]``.

Each subcommand splits its sweep into independent tasks, runs them on a
process pool, and collects the results in task order so that CSV output does
not depend on scheduling.  A manifest listing every written file, the echoed
configuration and per-task status is written even when tasks fail.
"""
from __future__ import annotations

import argparse
import csv
import datetime as _dt
import json
import logging
import math
import os
import sys
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

from . import analysis as an
from . import eigensolver as es
from . import fock, otoc
from .models import (
    ModelInstance,
    SectorLabel,
    block_to_json,
    build_block,
    critical_xi,
    sector_list,
)
from .plotting import emit_plot

log = logging.getLogger("esqpt_lab")

SUBCOMMANDS = ("ced", "gaps-xi", "gaps-n", "centrifugal", "otoc-scan",
               "critical-energy", "oracle-check", "block")
MODELS = tuple(fock.MODEL_DIMS)

EXIT_OK, EXIT_PARTIAL, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    pass


# -- config ------------------------------------------------------------------

def _num(value, name, kind=float):
    """Numbers may arrive as JSON numbers or strings."""
    try:
        if kind is int:
            f = float(value)
            if f != int(f):
                raise ValueError
            return int(f)
        return float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: expected a number, got {value!r}") from None


def _grid(value, name, kind=float):
    """A list, or a ``{start, stop, num}`` (floats) / ``{start, stop, step}`` (ints) range."""
    if isinstance(value, dict):
        start = _num(value.get("start"), f"{name}.start", kind)
        stop = _num(value.get("stop"), f"{name}.stop", kind)
        if kind is int:
            step = _num(value.get("step", 1), f"{name}.step", int)
            if step <= 0:
                raise ConfigError(f"{name}.step must be positive")
            return list(range(start, stop + 1, step))
        num = _num(value.get("num"), f"{name}.num", int)
        if num < 1:
            raise ConfigError(f"{name}.num must be positive")
        return [float(x) for x in np.linspace(start, stop, num)]
    if isinstance(value, (list, tuple)):
        if not value:
            raise ConfigError(f"{name} is empty")
        return [_num(v, f"{name}[{i}]", kind) for i, v in enumerate(value)]
    raise ConfigError(f"{name}: expected a list or a range object")


@dataclass
class RunConfig:
    subcommand: str
    raw: dict
    model: str | None = None
    N: int | None = None
    N_list: list = field(default_factory=list)
    xi: float | None = None
    xi_grid: list = field(default_factory=list)
    sectors: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    ells: list = field(default_factory=list)
    precision: es.PrecisionConfig = es.DOUBLE
    V: str | None = None
    W: str | None = None
    T_list: list = field(default_factory=list)
    tol_deg: float = 1e-10
    fit: list = field(default_factory=list)
    models: list = field(default_factory=list)
    plots: bool = False


def _precision(raw) -> es.PrecisionConfig:
    if raw is None:
        return es.DOUBLE
    if not isinstance(raw, dict):
        raise ConfigError("precision must be an object")
    mode = raw.get("mode", "double")
    bits = _num(raw.get("mantissa_bits", es.DEFAULT_BITS), "precision.mantissa_bits", int)
    tol = raw.get("eig_tol")
    tol = None if tol is None else _num(tol, "precision.eig_tol")
    try:
        return es.PrecisionConfig(mode, bits, tol)
    except ValueError as exc:
        raise ConfigError(f"precision: {exc}") from None


def _need(raw, key, sub):
    if key not in raw:
        raise ConfigError(f"{sub} requires '{key}'")
    return raw[key]


def _model(raw, sub):
    m = _need(raw, "model", sub)
    if m not in MODELS:
        raise ConfigError(f"model must be one of {MODELS}, got {m!r}")
    return m


def _xi(value, name):
    x = _num(value, name)
    if not 0.0 <= x <= 1.0:
        raise ConfigError(f"{name} must lie in [0, 1]")
    return x


def _sector(text, name, model, N):
    try:
        lab = SectorLabel.parse(str(text))
    except ValueError:
        raise ConfigError(f"{name}: cannot parse sector {text!r}") from None
    if lab not in sector_list(ModelInstance(model, N, 0.0)):
        raise ConfigError(f"{name}: sector {lab} does not exist for {model} N={N}")
    return lab


def _pair(text, name, model, N):
    try:
        p = an.LevelPair.parse(str(text))
    except ValueError:
        raise ConfigError(f"{name}: cannot parse pair {text!r}") from None
    for lab in (p.sector_a, p.sector_b):
        _sector(str(lab), name, model, N)
    top = min(len(range(lab.tau, N + 1, 2)) for lab in (p.sector_a, p.sector_b))
    if not 0 <= p.index < top:
        raise ConfigError(f"{name}: level index {p.index} outside the shorter block")
    return p


def parse_config(subcommand: str, raw: dict) -> RunConfig:
    """Validate everything before any computation starts."""
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    cfg = RunConfig(subcommand, raw, plots=bool(raw.get("plots", False)))
    sub = subcommand
    cfg.precision = _precision(raw.get("precision"))

    if sub in ("ced", "gaps-xi"):
        cfg.model = _model(raw, sub)
        cfg.N = _num(_need(raw, "N", sub), "N", int)
        if cfg.N < 1:
            raise ConfigError("N must be positive")
        cfg.xi_grid = [_xi(x, "xi_grid") for x in _grid(_need(raw, "xi_grid", sub), "xi_grid")]
        if any(b < a for a, b in zip(cfg.xi_grid, cfg.xi_grid[1:])):
            raise ConfigError("xi_grid must be ascending")
        if sub == "ced":
            default = [str(s) for s in sector_list(ModelInstance(cfg.model, cfg.N, 0.0), distinct=True)[:2]]
            cfg.sectors = [_sector(s, "sectors", cfg.model, cfg.N) for s in raw.get("sectors", default)]
        else:
            default = [str(an.default_pair(cfg.model))]
            cfg.pairs = [_pair(p, "pairs", cfg.model, cfg.N) for p in raw.get("pairs", default)]
    elif sub == "gaps-n":
        cfg.model = _model(raw, sub)
        cfg.xi = _xi(_need(raw, "xi", sub), "xi")
        cfg.N_list = _grid(_need(raw, "N_list", sub), "N_list", int)
        if any(n < 1 for n in cfg.N_list) or any(b <= a for a, b in zip(cfg.N_list, cfg.N_list[1:])):
            raise ConfigError("N_list must be positive and strictly ascending")
        cfg.pairs = [_pair(raw.get("pair", str(an.default_pair(cfg.model))), "pair", cfg.model, cfg.N_list[0])]
        fit = raw.get("fit", ["exponential", "power"])
        cfg.fit = [fit] if isinstance(fit, str) else list(fit)
        for f in cfg.fit:
            if f not in ("exponential", "power"):
                raise ConfigError(f"fit: unknown form {f!r}")
    elif sub == "centrifugal":
        cfg.model = "VM2D"
        cfg.N = _num(_need(raw, "N", sub), "N", int)
        cfg.ells = _grid(_need(raw, "ells", sub), "ells", int)
        if any(not 1 <= l <= cfg.N for l in cfg.ells):
            raise ConfigError(f"ells must lie in [1, {cfg.N}]")
        cfg.xi_grid = [_xi(x, "xi_grid") for x in _grid(_need(raw, "xi_grid", sub), "xi_grid")]
    elif sub == "otoc-scan":
        cfg.model = _model(raw, sub)
        if cfg.model not in ("LMG", "VM2D"):
            raise ConfigError("otoc-scan supports LMG and VM2D")
        cfg.N = _num(_need(raw, "N", sub), "N", int)
        cfg.xi = _xi(_need(raw, "xi", sub), "xi")
        default = "parity=0" if cfg.model == "LMG" else "ell=0"
        cfg.sectors = [_sector(raw.get("sector", default), "sector", cfg.model, cfg.N)]
        op_default = ("J_x", "J_x") if cfg.model == "LMG" else ("D_-", "D_+")
        cfg.V, cfg.W = raw.get("V", op_default[0]), raw.get("W", op_default[1])
        inst = ModelInstance(cfg.model, cfg.N, cfg.xi)
        try:
            otoc.required_sectors(inst, cfg.sectors[0], cfg.V, cfg.W)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        cfg.T_list = [math.inf if str(t).lower() in ("inf", "infinity", "stationary") else _num(t, "T_list")
                      for t in raw.get("T_list", ["inf"])]
        if any(t <= 0 for t in cfg.T_list):
            raise ConfigError("averaging times must be positive")
        cfg.tol_deg = _num(raw.get("tol_deg", 1e-10), "tol_deg")
        if cfg.tol_deg <= 0:
            raise ConfigError("tol_deg must be positive")
        if cfg.precision.mode != "double":
            raise ConfigError("otoc-scan runs in double precision")
    elif sub == "critical-energy":
        cfg.model = _model(raw, sub)
        cfg.xi_grid = [_xi(x, "xi_grid") for x in _grid(_need(raw, "xi_grid", sub), "xi_grid")]
        xc = critical_xi(cfg.model)
        if any(x < xc for x in cfg.xi_grid):
            raise ConfigError(f"xi_grid must lie in the broken phase xi >= {xc:.6g}")
        cfg.N_list = _grid(raw.get("N_list", []), "N_list", int) if raw.get("N_list") else []
    elif sub == "oracle-check":
        cfg.models = list(raw.get("models", MODELS))
        for m in cfg.models:
            if m not in MODELS:
                raise ConfigError(f"unknown model {m!r}")
        cfg.N = _num(raw.get("N_max", 4), "N_max", int)
        if not 1 <= cfg.N <= 8:
            raise ConfigError("N_max must lie in [1, 8]")
        cfg.xi_grid = [_xi(x, "xi_grid") for x in _grid(raw.get("xi_grid", [0, 0.2, 0.5, 0.8, 1]), "xi_grid")]
    elif sub == "block":
        cfg.model = _model(raw, sub)
        cfg.N = _num(_need(raw, "N", sub), "N", int)
        cfg.xi = _xi(_need(raw, "xi", sub), "xi")
        cfg.sectors = [_sector(s, "sectors", cfg.model, cfg.N)
                       for s in raw.get("sectors", [str(an.symmetric_sector(cfg.model))])]
    return cfg


# -- tasks (top level so they pickle) -----------------------------------------

def _task_ced(model, N, xi, sectors):
    diag = an.correlation_diagram(model, N, [xi], sectors)
    if diag.failures:
        raise RuntimeError(diag.failures[0])
    return [(str(lab), k, float(e)) for lab in sectors for k, e in enumerate(diag.levels[lab][0])]


def _task_gaps_xi(model, N, xi, pairs, precision):
    inst = ModelInstance(model, N, xi)
    out = []
    for p in pairs:
        g = an.level_gap(inst, p, precision)
        out.append((str(p), g))
    return out


def _task_gap_n(model, N, xi, pair, precision):
    return an.level_gap(ModelInstance(model, N, xi), pair, precision)


def _task_centrifugal(N, ells, xi):
    scan = an.centrifugal_scan(N, ells, [xi])
    return [(l, float(scan[l][0])) for l in ells]


def _task_otoc(model, N, xi, sector, V, W, T, tol_deg):
    spectra = otoc.setup(model, N, xi, sector, V, W)
    ground = an.ground_energy(ModelInstance(model, N, xi))
    return otoc.motoc_scan(sector, V, W, spectra, None if math.isinf(T) else T, tol_deg, ground)


def _task_critical(model, xi, N_list):
    mf = an.meanfield_critical_energy(model, xi)
    ex = an.extrapolated_critical_energy(model, xi, N_list) if N_list else math.nan
    return mf, ex


def _task_oracle(model, N, xi):
    inst = ModelInstance(model, N, xi)
    a = an.union_spectrum(inst)
    b = fock.oracle_spectrum(fock.build_basis(model, N), xi)
    if len(a) != len(b):
        raise RuntimeError(f"dimension mismatch {len(a)} != {len(b)}")
    return len(a), float(np.abs(a - b).max())


# -- orchestration -------------------------------------------------------------

@dataclass
class TaskResult:
    key: str
    ok: bool
    value: object = None
    error: str | None = None


def _call(fn, args):
    try:
        return True, fn(*args), None
    except Exception as exc:  # recorded per task, the sweep continues
        return False, None, f"{type(exc).__name__}: {exc}"


def run_tasks(tasks, workers: int) -> list[TaskResult]:
    """``tasks`` is a list of ``(key, fn, args)``; results come back in task order."""
    if workers <= 1 or len(tasks) <= 1:
        outcomes = [_call(fn, args) for _, fn, args in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_call, fn, args) for _, fn, args in tasks]
            outcomes = [f.result() for f in futures]
    results = []
    for (key, _, _), (ok, value, err) in zip(tasks, outcomes):
        if not ok:
            log.warning("task %s failed: %s", key, err)
        results.append(TaskResult(key, ok, value, err))
    return results


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    if x is None:
        return ""
    if isinstance(x, (float, np.floating)) and math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return an.format_value(x)


class Collector:
    """Single writer for all output files; tracks them for the manifest."""

    def __init__(self, out_dir: Path, plots: bool):
        self.out = out_dir
        self.plots = plots
        self.files: list[str] = []
        self.notes: list[str] = []
        self.out.mkdir(parents=True, exist_ok=True)

    def csv(self, name: str, header, rows) -> dict:
        path = self.out / name
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_fmt(x) for x in r])
        self.files.append(name)
        return {h: [r[i] for r in rows] for i, h in enumerate(header)}

    def text(self, name: str, content: str):
        (self.out / name).write_text(content, encoding="utf-8")
        self.files.append(name)

    def plot(self, name: str, dataset, kind, meta=None):
        if not self.plots:
            return
        emit_plot(dataset, kind, self.out / name, meta)
        self.files.append(name)


def _version() -> str:
    try:
        return metadata.version("esqpt-lab")
    except metadata.PackageNotFoundError:
        return "unknown"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def execute(cfg: RunConfig, col: Collector, workers: int) -> list[TaskResult]:
    sub, prec = cfg.subcommand, cfg.precision
    if sub == "ced":
        tasks = [(f"xi={xi!r}", _task_ced, (cfg.model, cfg.N, xi, cfg.sectors)) for xi in cfg.xi_grid]
        res = run_tasks(tasks, workers)
        rows = [(cfg.model, cfg.N, xi, sec, k, e)
                for xi, r in zip(cfg.xi_grid, res) if r.ok for sec, k, e in r.value]
        data = col.csv("ced.csv", ["model", "N", "xi", "sector", "level", "energy"], rows)
        col.plot("ced.svg", data, "ced", {"title": f"{cfg.model} N={cfg.N}"})
        return res

    if sub == "gaps-xi":
        tasks = [(f"xi={xi!r}", _task_gaps_xi, (cfg.model, cfg.N, xi, cfg.pairs, prec)) for xi in cfg.xi_grid]
        res = run_tasks(tasks, workers)
        rows = []
        for xi, r in zip(cfg.xi_grid, res):
            if r.ok:
                for p, g in r.value:
                    rows.append((cfg.model, cfg.N, xi, p, g.text, g.value, g.resolution,
                                 g.below_resolution, g.bits if g.bits else "double"))
                    if g.below_resolution:
                        col.notes.append(f"xi={xi!r} {p}: gap below certified resolution {g.resolution:.3e}")
        data = col.csv("gaps_xi.csv", ["model", "N", "xi", "pair", "gap", "gap_float", "resolution",
                                       "below_resolution", "bits"], rows)
        data["gap"] = data["gap_float"]
        col.plot("gaps_xi.svg", data, "gaps-xi", {"title": f"{cfg.model} N={cfg.N}"})
        return res

    if sub == "gaps-n":
        pair = cfg.pairs[0]
        tasks = [(f"N={n}", _task_gap_n, (cfg.model, n, cfg.xi, pair, prec)) for n in cfg.N_list]
        res = run_tasks(tasks, workers)
        rows, Ns, gaps = [], [], []
        for n, r in zip(cfg.N_list, res):
            if r.ok:
                g = r.value
                rows.append((cfg.model, cfg.xi, str(pair), n, g.text, g.value, g.resolution,
                             g.below_resolution, g.bits if g.bits else "double"))
                Ns.append(n)
                gaps.append(g.value)
                if g.below_resolution:
                    col.notes.append(f"N={n}: gap below certified resolution {g.resolution:.3e}")
        data = col.csv("gaps_n.csv", ["model", "xi", "pair", "N", "gap", "gap_float", "resolution",
                                      "below_resolution", "bits"], rows)
        fits, best = [], None
        for form in cfg.fit:
            try:
                f = an.fit_gap((Ns, gaps), form)
            except ValueError as exc:
                col.notes.append(f"{form} fit skipped: {exc}")
                continue
            fits.append(f)
            if best is None or f.r2 > best.r2:
                best = f
        col.csv("gaps_n_fit.csv", ["form", "a", "b", "r2", "selected"],
                [(f.form, f.a, f.b, f.r2, f is best) for f in fits])
        meta = {"model": cfg.model, "title": f"{cfg.model} xi={cfg.xi:g}"}
        if best is not None:
            meta["fit"] = {"form": best.form, "a": best.a, "b": best.b, "r2": best.r2}
        col.plot("gaps_n.svg", {"N": Ns, "gap": gaps}, "gaps-n", meta)
        return res

    if sub == "centrifugal":
        tasks = [(f"xi={xi!r}", _task_centrifugal, (cfg.N, cfg.ells, xi)) for xi in cfg.xi_grid]
        res = run_tasks(tasks, workers)
        rows = [(cfg.N, l, xi, v) for xi, r in zip(cfg.xi_grid, res) if r.ok for l, v in r.value]
        rows.sort(key=lambda r: (r[1], r[2]))
        data = col.csv("centrifugal.csv", ["N", "ell", "xi", "scaled_gap"], rows)
        col.plot("centrifugal.svg", data, "centrifugal", {"title": f"VM2D N={cfg.N}"})
        return res

    if sub == "otoc-scan":
        sector = cfg.sectors[0]
        tasks = [(f"T={T!r}", _task_otoc, (cfg.model, cfg.N, cfg.xi, sector, cfg.V, cfg.W, T, cfg.tol_deg))
                 for T in cfg.T_list]
        res = run_tasks(tasks, workers)
        rows = []
        for r in res:
            if r.ok:
                rows.extend((m.j, m.energy, m.scaled_energy, m.value, m.magnitude, m.T, m.tol_deg, m.accidental)
                            for m in r.value)
                acc = sum(m.accidental for m in r.value)
                if acc:
                    col.notes.append(f"{r.key}: {acc} accidental resonant triples")
        data = col.csv("otoc.csv", ["j", "E_j", "scaled_energy", "value", "magnitude", "T", "tol_deg",
                                    "accidental"], rows)
        meta = {"title": f"{cfg.model} N={cfg.N} xi={cfg.xi:g} V={cfg.V} W={cfg.W}"}
        if cfg.xi >= critical_xi(cfg.model):
            meta["critical_energy"] = an.meanfield_critical_energy(cfg.model, cfg.xi)
        col.plot("otoc.svg", data, "otoc", meta)
        return res

    if sub == "critical-energy":
        tasks = [(f"xi={xi!r}", _task_critical, (cfg.model, xi, cfg.N_list)) for xi in cfg.xi_grid]
        res = run_tasks(tasks, workers)
        rows = []
        for xi, r in zip(cfg.xi_grid, res):
            if r.ok:
                mf, ex = r.value
                rel = abs(ex - mf) / mf if mf > 0 and not math.isnan(ex) else math.nan
                rows.append((cfg.model, xi, mf, ex, rel))
        col.csv("critical_energy.csv", ["model", "xi", "meanfield", "extrapolated", "rel_diff"], rows)
        return res

    if sub == "oracle-check":
        tasks = []
        for m in cfg.models:
            top = min(cfg.N, 4) if m == "IBM" else cfg.N
            for n in range(1, top + 1):
                for xi in cfg.xi_grid:
                    tasks.append((f"{m} N={n} xi={xi!r}", _task_oracle, (m, n, xi)))
        res = run_tasks(tasks, workers)
        rows, worst = [], 0.0
        for (key, _, (m, n, xi)), r in zip(tasks, res):
            if r.ok:
                dim, err = r.value
                worst = max(worst, err)
                rows.append((m, n, xi, dim, err, err <= 1e-9))
                if err > 1e-9:
                    r.ok, r.error = False, f"max deviation {err:.3e} exceeds 1e-9"
        col.csv("oracle_check.csv", ["model", "N", "xi", "dim", "max_abs_diff", "match"], rows)
        if all(r.ok for r in res):
            col.notes.append("all blocks match oracle within 1e-9")
        print(col.notes[-1] if col.notes else f"oracle mismatch, worst deviation {worst:.3e}")
        return res

    if sub == "block":
        res = []
        inst = ModelInstance(cfg.model, cfg.N, cfg.xi)
        for lab in cfg.sectors:
            name = f"block_{cfg.model}_N{cfg.N}_{lab.kind}{lab.value}.json"
            try:
                col.text(name, block_to_json(build_block(inst, lab, prec.bits)) + "\n")
                res.append(TaskResult(str(lab), True))
            except Exception as exc:
                res.append(TaskResult(str(lab), False, error=f"{type(exc).__name__}: {exc}"))
        return res
    raise ConfigError(f"unknown subcommand {sub!r}")


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_manifest(out: Path, cfg_raw, subcommand, started, results, col, status, error=None):
    files = sorted(set(col.files)) if col else []
    doc = {
        "config": cfg_raw,
        "subcommand": subcommand,
        "version": _version(),
        "started": started,
        "finished": _now(),
        "status": status,
        "outputs": files,
        "tasks": [{"key": r.key, "status": "ok" if r.ok else "failed", "error": r.error}
                  for r in results],
        "notes": col.notes if col else [],
    }
    if error is not None:
        doc["error"] = error
    out.mkdir(parents=True, exist_ok=True)
    (out / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True, default=_jsonable) + "\n",
                                       encoding="utf-8")


def _workers(arg) -> int:
    if arg is not None:
        return max(1, arg)
    env = os.environ.get("ESQPT_LAB_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            log.warning("ignoring non-integer ESQPT_LAB_WORKERS=%r", env)
    return 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="esqpt-lab", description=__doc__.splitlines()[0])
    p.add_argument("subcommand", choices=SUBCOMMANDS)
    p.add_argument("--config", required=True, type=Path, help="JSON run configuration")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--plots", action="store_true", help="render SVG figures")
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes (default: $ESQPT_LAB_WORKERS or 1)")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = _now()
    raw = None
    try:
        raw = json.loads(args.config.read_text(encoding="utf-8"))
        cfg = parse_config(args.subcommand, raw)
    except (OSError, json.JSONDecodeError, ConfigError) as exc:
        err = {"kind": "validation", "message": str(exc)}
        write_manifest(args.out, raw, args.subcommand, started, [], None, "invalid", err)
        print(json.dumps({"error": err}, sort_keys=True), file=sys.stderr)
        return EXIT_INVALID
    col = Collector(args.out, args.plots or cfg.plots)
    results, error = [], None
    try:
        results = execute(cfg, col, _workers(args.workers))
    except Exception as exc:
        error = {"kind": "compute", "message": f"{type(exc).__name__}: {exc}",
                 "traceback": traceback.format_exc()}
    failed = error is not None or any(not r.ok for r in results)
    status = "ok" if not failed else ("failed" if error or not any(r.ok for r in results) else "partial")
    write_manifest(args.out, raw, args.subcommand, started, results, col, status, error)
    if failed:
        record = error or {"kind": "compute", "message": "some tasks failed",
                           "failed": [r.key for r in results if not r.ok]}
        print(json.dumps({"error": record}, sort_keys=True), file=sys.stderr)
        return EXIT_PARTIAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
