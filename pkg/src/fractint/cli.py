"""Command line runner: ``fractint <experiment> --config FILE [--seed N] [--force] [--out DIR]``.

Exit status: 0 for respected bounds and informational runs, 2 when a
bound is violated while its hypotheses hold, 1 on any error.
"""
from __future__ import annotations

import argparse
import csv
import io
import os
import shutil
import sys
import tempfile
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from . import diophantine as dio
from . import estimators as est
from . import intersection as ix
from .config import EXPERIMENTS, Config, ConfigError
from .constructions import build
from .grid import CellSet, DiscreteMeasure, GridError, make_grid, uniform_measure
from .maps import MapSpec
from .thresholds import predict

FIT_EXPERIMENTS = {
    "intersect-translate": "translation", "intersect-rotate": "rotation",
    "intersect-dilate": "dilation", "levelset": "levelset", "maximal": "maximal",
    "two-surface": "two-surface", "inverse": "inverse", "average-slope": "numbertheory",
    "dims": "dimension", "fourier": "fourier-decay", "hyperplane": "hyperplane",
}


class RunError(Exception):
    pass


@dataclass
class Outcome:
    tables: dict = field(default_factory=dict)   # file name -> (header, rows)
    blobs: dict = field(default_factory=dict)    # file name -> bytes
    info: dict = field(default_factory=dict)     # manifest fields
    loglog: tuple | None = None                  # (x, y) for plot data
    verdict: str = "informational"
    hypotheses_ok: bool = True

    @property
    def exit_code(self) -> int:
        return 2 if self.verdict == "bound-violated" and self.hypotheses_ok else 0


# ---------------------------------------------------------------------------
# formatting

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.12g" % float(v)
    if isinstance(v, (list, tuple, np.ndarray)):
        return " ".join(fmt(u) for u in np.ravel(np.asarray(v, dtype=object)))
    return "" if v is None else str(v)


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue()


def read_manifest(path) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if "=" in line:
                k, v = line.split("=", 1)
                out[k.strip()] = v.strip()
    return out


# ---------------------------------------------------------------------------
# config helpers

def _grid(cfg: Config, section: str | None = None):
    sec = cfg.sections.get(section, {}) if section else {}
    d = int(sec.get("d", cfg.typed("run", "d", int, 2)))
    k = int(sec.get("k", cfg.typed("run", "k", int, 10)))
    L = int(sec.get("L", cfg.typed("run", "L", int, 1)))
    return make_grid(d, k, L)


def _construct(cfg: Config, name: str, grid=None):
    """(object, descriptor, s) for the construction section ``name``."""
    sec = cfg.section(name)
    g = _grid(cfg, name) if grid is None else grid
    if "file" in sec:
        obj = CellSet.load(sec["file"])
        s = sec.get("s")
        if s is None:
            raise ConfigError(f"{cfg.source}: [{name}] s: required for file-based sets")
        return obj, None, float(s)
    kind = sec.pop("kind", None)
    if kind is None:
        raise ConfigError(f"{cfg.source}: [{name}] kind: required field missing")
    s = sec.pop("s", None)
    for key in ("d", "k", "L"):
        sec.pop(key, None)
    try:
        obj, desc = build(str(kind), g, **sec)
    except TypeError as e:
        raise ConfigError(f"{cfg.source}: [{name}]: {e}") from None
    return obj, desc, float(desc.design_dimension if s is None else s)


def _as_set(obj) -> CellSet:
    return obj.support if isinstance(obj, DiscreteMeasure) else obj


def _as_measure(obj) -> DiscreteMeasure:
    return obj if isinstance(obj, DiscreteMeasure) else uniform_measure(obj)


def _label(desc, fallback):
    return desc.label if desc is not None else fallback


def _levels(cfg: Config, k: int):
    lv = cfg.get("run", "levels", None)
    if lv is None:
        return ix.default_ladder(k, kappa=cfg.typed("run", "kappa", int, ix.KAPPA))
    return [int(j) for j in lv]


def _sampler(cfg: Config, d: int, section: str = "sampler"):
    if not cfg.has(section):
        return None
    sec = cfg.section(section)
    kind = sec.get("kind", "tent")
    if kind == "measure":
        src = sec.get("source", "mu")
        obj, _, _ = _construct(cfg, src)
        return ix.XSampler("measure", measure=_as_measure(obj))
    if kind == "points":
        return ix.XSampler("points", points=np.asarray(sec["points"], dtype=np.float64))
    if "lo" not in sec or "hi" not in sec:
        raise ConfigError(f"{cfg.source}: [{section}] lo/hi: required for {kind} sampling")
    return ix.XSampler(kind, np.asarray(sec["lo"], dtype=float), np.asarray(sec["hi"], dtype=float))


def _map(cfg: Config, section: str) -> MapSpec:
    sec = cfg.section(section)
    fam = sec.get("family", "euclidean")
    if fam == "custom":
        raise ConfigError(f"{cfg.source}: [{section}] family: custom maps are library-only")
    return MapSpec(fam, m=int(sec.get("m", 2)))


# ---------------------------------------------------------------------------
# experiments

def run_construct(cfg, seed):
    obj, desc, s = _construct(cfg, "A")
    A = _as_set(obj)
    out = Outcome()
    out.blobs["set.txt"] = A.to_text().encode()
    out.blobs["set.bin"] = A.to_bytes()
    if isinstance(obj, DiscreteMeasure):
        cells = A.cells
        out.tables["weights.csv"] = ([f"c{i}" for i in range(A.grid.d)] + ["weight"],
                                     [(*c, w) for c, w in zip(cells.tolist(), obj.weights)])
    out.tables["summary.csv"] = (["construction", "design_dimension", "cells", "d", "k", "L"],
                                 [(_label(desc, "file"), s, len(A), A.grid.d, A.grid.k, A.grid.L)])
    out.info["construction"] = _label(desc, "file")
    return out


def run_dims(cfg, seed):
    obj, desc, s = _construct(cfg, "A")
    A = _as_set(obj)
    lv = cfg.get("run", "levels", None)
    fit = est.minkowski_dim(A, lv)
    js = np.log2(fit.x).round().astype(int)
    out = Outcome()
    out.tables["records.csv"] = (["j", "epsilon", "N"], [(j, 2.0**-j, int(n)) for j, n in zip(js, fit.y)])
    out.tables["summary.csv"] = (["construction", "design_dimension", "slope", "intercept", "residual", "n_scales"],
                                 [(_label(desc, "file"), s, fit.slope, fit.intercept, fit.residual, fit.n_points)])
    out.loglog = (js, np.log2(fit.y))
    out.info.update(construction=_label(desc, "file"), predicted=s, slope=fit.slope, residual=fit.residual)
    return out


def run_energy(cfg, seed):
    obj, desc, _ = _construct(cfg, "mu")
    mu = _as_measure(obj)
    ss = cfg.get("run", "s", [0.5])
    ss = [float(v) for v in np.atleast_1d(ss)]
    rows = []
    for s in ss:
        a = est.energy_spatial(mu, s).value
        b = est.energy_fourier(mu, s).value
        rows.append((s, a, b, a / b))
    out = Outcome()
    out.tables["summary.csv"] = (["s", "spatial", "fourier", "ratio"], rows)
    out.info["construction"] = _label(desc, "file")
    return out


def run_fourier(cfg, seed):
    obj, desc, _ = _construct(cfg, "mu")
    mu = _as_measure(obj)
    fit = est.fourier_decay(mu, cfg.get("run", "xi_range", None),
                            cfg.typed("run", "n_directions", int, 64), seed=seed)
    out = Outcome()
    out.tables["records.csv"] = (["radius", "sup_amplitude"], list(zip(fit.x, fit.y)))
    out.tables["summary.csv"] = (["construction", "slope", "beta", "residual"],
                                 [(_label(desc, "file"), fit.slope, fit.extra["beta"], fit.residual)])
    out.loglog = (np.log2(fit.x), np.log2(fit.y))
    out.info.update(construction=_label(desc, "file"), slope=fit.slope, residual=fit.residual,
                    beta=fit.extra["beta"])
    return out


def _slab_deltas(cfg, mu):
    deltas = cfg.get("run", "deltas", None)
    if deltas is None:
        e = mu.grid.eps
        deltas = [4 * e * 2**i for i in range(5)]
    return [float(x) for x in deltas]


def run_hyperplane(cfg, seed):
    obj, desc, s = _construct(cfg, "mu")
    mu = _as_measure(obj)
    fit = est.hyperplane_exponent(mu, _slab_deltas(cfg, mu), cfg.typed("run", "n_directions", int, 32),
                                  seed=seed, origin=cfg.get("run", "origin", None))
    out = Outcome()
    out.tables["records.csv"] = (["delta", "sup_slab_mass"], list(zip(fit.x, fit.y)))
    out.tables["summary.csv"] = (["construction", "slope", "h", "residual"],
                                 [(_label(desc, "file"), fit.slope, s - fit.slope, fit.residual)])
    out.loglog = (np.log2(fit.x), np.log2(fit.y))
    out.info.update(construction=_label(desc, "file"), slope=fit.slope, residual=fit.residual, h=s - fit.slope)
    return out


def _param_columns(records, d):
    keys = []
    for r in records:
        for k, v in r.params.items():
            if k not in keys:
                keys.append(k)
    cols, getters = [], []
    for k in keys:
        v = records[0].params.get(k)
        arr = np.asarray(v) if not isinstance(v, str) else None
        if arr is not None and arr.ndim >= 1:
            for i in range(arr.size):
                cols.append(f"{k}{i}")
                getters.append((k, i))
        else:
            cols.append(k)
            getters.append((k, None))
    return cols, getters


def _experiment_tables(res: ix.ExperimentResult, out: Outcome, d: int):
    cols, getters = _param_columns(res.records, d)
    rows = []
    for r in res.records:
        vals = []
        for k, i in getters:
            v = r.params.get(k)
            if v is None:
                vals.append("")
            elif i is None:
                vals.append(v)
            else:
                vals.append(np.ravel(np.asarray(v))[i])
        rows.append((r.sample, *vals, r.j, r.epsilon, r.N))
    out.tables["records.csv"] = (["sample", *cols, "j", "epsilon", "N"], rows)
    pred = res.prediction
    out.tables["summary.csv"] = (["j", "epsilon", "average", "prediction"],
                                 [(j, 2.0**-j, a, pred) for j, a in zip(res.levels, res.averaged_counts)])
    out.tables["gammas.csv"] = (["sample", "gamma"], list(enumerate(res.gammas)))
    out.loglog = (np.asarray(res.levels), np.log2(res.averaged_counts))
    out.verdict = res.verdict
    out.hypotheses_ok = res.threshold.hypotheses_ok
    out.info.update(predicted=pred, slope=res.fitted_slope.slope, residual=res.fitted_slope.residual,
                    exceptional_fraction=res.exceptional_fraction, hypotheses=res.threshold.status,
                    violations="; ".join(res.threshold.violations),
                    predicted_exceptional=res.threshold.predicted_exceptional_dim)


def _exceptional(cfg, out, gamma_fn, d, L, threshold, predicted):
    if not cfg.has("exceptional"):
        return
    kx = cfg.typed("exceptional", "kx", int, 5)
    span = float(cfg.get("exceptional", "span", 2 * L))
    margin = float(cfg.get("exceptional", "margin", ix.TOLERANCE))
    xg, xs = ix.x_grid(kx, d, int(span) if span >= 1 else 1)
    if span < 1:
        xs = xs * span
    gam, _ = gamma_fn(xs)
    rep = ix.exceptional_set_dim(gam, xg, threshold, margin, predicted)
    out.tables["exceptional.csv"] = ([f"x{i}" for i in range(d)] + ["gamma", "exceptional"],
                                     [(*x, g, bool(g > threshold + margin)) for x, g in zip(xs, np.nan_to_num(gam, nan=-1.0))])
    out.info.update(exceptional_dim=rep.dimension, exceptional_empty=rep.empty,
                    exceptional_cells=len(rep.cells))


def _pair(cfg):
    A_obj, dA, sA = _construct(cfg, "A")
    B_obj, dB, sB = _construct(cfg, "B")
    A, B = _as_set(A_obj), _as_set(B_obj)
    if A.grid != B.grid:
        raise ConfigError(f"{cfg.source}: [A] and [B] must share d, k and L")
    return A, B, sA, sB, f"{_label(dA, 'file')} | {_label(dB, 'file')}"


def run_translate(cfg, seed):
    A, B, sA, sB, label = _pair(cfg)
    beta = cfg.get("run", "beta", None)
    theorem, inputs = "translation", {}
    if beta is not None:
        theorem = "fourier"
        inputs = {"alpha": float(cfg.get("run", "alpha")), "beta": float(beta)}
    res = ix.translation_experiment(
        A, B, sA, sB, n_samples=cfg.typed("run", "n_samples", int, 64), levels=_levels(cfg, A.grid.k),
        sampler=_sampler(cfg, A.grid.d), seed=seed, theorem=theorem, theorem_inputs=inputs,
        kappa=cfg.typed("run", "kappa", int, ix.KAPPA), tol=float(cfg.get("run", "tol", ix.TOLERANCE)))
    out = Outcome()
    _experiment_tables(res, out, A.grid.d)
    out.info.update(construction=label, theorem=theorem)
    _exceptional(cfg, out, lambda xs: ix.motion_gammas(A, B, xs, res.levels, cfg.typed("run", "kappa", int, ix.KAPPA)),
                 A.grid.d, A.grid.L, res.prediction, res.threshold.predicted_exceptional_dim)
    return out


def run_rotate(cfg, seed):
    A, B, sA, sB, label = _pair(cfg)
    res = ix.rotation_experiment(
        A, B, sA, sB, float(cfg.get("run", "alpha")),
        n_rotations=cfg.typed("run", "n_rotations", int, 16),
        n_translations=cfg.typed("run", "n_translations", int, 8), levels=_levels(cfg, A.grid.k),
        sampler=_sampler(cfg, A.grid.d), seed=seed, kappa=cfg.typed("run", "kappa", int, ix.KAPPA),
        tol=float(cfg.get("run", "tol", ix.TOLERANCE)))
    out = Outcome()
    _experiment_tables(res, out, A.grid.d)
    out.tables["rotations.csv"] = (["rotation", *[f"g{i}{j}" for i in range(A.grid.d) for j in range(A.grid.d)]],
                                   [(i, *G.ravel()) for i, G in enumerate(res.extra["rotations"])])
    out.info.update(construction=label, theorem="rotation")
    return out


def run_dilate(cfg, seed):
    A, B_obj_set, sA, sB, label = _pair(cfg)
    h = cfg.get("run", "h", None)
    if h is None:
        mu_B = _as_measure(_construct(cfg, "B")[0])
        fit = est.hyperplane_exponent(mu_B, _slab_deltas(cfg, mu_B), seed=seed)
        h = sB - fit.slope
    res = ix.dilation_experiment(
        A, B_obj_set, sA, sB, float(cfg.get("run", "alpha")), float(h),
        t_grid=cfg.get("run", "t_grid", None), n_samples=cfg.typed("run", "n_samples", int, 64),
        levels=_levels(cfg, A.grid.k), sampler=_sampler(cfg, A.grid.d), seed=seed,
        kappa=cfg.typed("run", "kappa", int, ix.KAPPA), tol=float(cfg.get("run", "tol", ix.TOLERANCE)))
    out = Outcome()
    _experiment_tables(res, out, A.grid.d)
    out.info.update(construction=label, theorem="dilation", h=float(h))
    return out


def _level_common(cfg):
    A_obj, dA, sA = _construct(cfg, "A")
    return _as_set(A_obj), sA, _label(dA, "file")


def run_levelset(cfg, seed):
    A, sA, label = _level_common(cfg)
    spec = _map(cfg, "map")
    t = float(cfg.get("map", "t", 1.0))
    res = ix.level_set_experiment(
        A, spec, t, sA, alpha=cfg.get("run", "alpha", None), samplers=_sampler(cfg, A.grid.d),
        n_samples=cfg.typed("run", "n_samples", int, 64), levels=_levels(cfg, A.grid.k), seed=seed,
        kappa=cfg.typed("run", "kappa", int, ix.KAPPA), tol=float(cfg.get("run", "tol", ix.TOLERANCE)))
    out = Outcome()
    _experiment_tables(res, out, A.grid.d)
    out.info.update(construction=label, theorem="levelset", map=spec.family)
    _exceptional(cfg, out, lambda xs: ix.level_gammas(A, spec, t, xs, res.levels,
                                                       cfg.typed("run", "kappa", int, ix.KAPPA)),
                 A.grid.d, A.grid.L, res.prediction, res.threshold.predicted_exceptional_dim)
    return out


def run_two_surface(cfg, seed):
    A, sA, label = _level_common(cfg)
    s1 = _map(cfg, "map1" if cfg.has("map1") else "map")
    s2 = _map(cfg, "map2" if cfg.has("map2") else "map")
    t = cfg.get("run", "t", [1.0, 1.0])
    samplers = [_sampler(cfg, A.grid.d, "sampler1") or _sampler(cfg, A.grid.d),
                _sampler(cfg, A.grid.d, "sampler2") or _sampler(cfg, A.grid.d)]
    samplers = None if samplers[0] is None and samplers[1] is None else \
        [s or ix.XSampler("uniform", 0.0, float(A.grid.L)) for s in samplers]
    res = ix.level_set_experiment(
        A, [s1, s2], t, sA, alpha=cfg.get("run", "alpha", None), samplers=samplers,
        n_samples=cfg.typed("run", "n_samples", int, 64), levels=_levels(cfg, A.grid.k), seed=seed,
        kappa=cfg.typed("run", "kappa", int, ix.KAPPA), tol=float(cfg.get("run", "tol", ix.TOLERANCE)))
    out = Outcome()
    _experiment_tables(res, out, A.grid.d)
    out.info.update(construction=label, theorem="two-surface")
    return out


def run_maximal(cfg, seed):
    A, sA, label = _level_common(cfg)
    spec = _map(cfg, "map")
    res = ix.maximal_experiment(
        A, spec, sA, float(cfg.get("run", "alpha")), t_grid=cfg.get("run", "t_grid", None),
        n_samples=cfg.typed("run", "n_samples", int, 64), levels=_levels(cfg, A.grid.k),
        sampler=_sampler(cfg, A.grid.d), seed=seed, kappa=cfg.typed("run", "kappa", int, ix.KAPPA),
        tol=float(cfg.get("run", "tol", ix.TOLERANCE)))
    out = Outcome()
    _experiment_tables(res, out, A.grid.d)
    out.info.update(construction=label, theorem="maximal")
    return out


def _u_samples(cfg, d, seed):
    sec = cfg.section("U")
    kind = sec.get("kind", "directions")
    if kind == "points":
        return np.atleast_2d(np.asarray(sec["points"], dtype=np.float64))
    if kind == "directions":
        n = int(sec.get("n", 64))
        if d == 2:
            th = np.arange(n) * (2 * np.pi / n)
            return np.stack([np.cos(th), np.sin(th)], 1)
        return est.sample_directions(d, n - d, seed)
    raise ConfigError(f"{cfg.source}: [U] kind: expected points or directions, got {kind!r}")


def run_inverse(cfg, seed):
    E_obj, dE, _ = _construct(cfg, "E")
    E = _as_set(E_obj)
    spec = _map(cfg, "map")
    U = _u_samples(cfg, E.grid.d, seed)
    t_grid = cfg.get("run", "t_grid", None)
    if t_grid is None:
        t_grid = np.linspace(-float(E.grid.L) * E.grid.d, float(E.grid.L) * E.grid.d, 65)
    rep = ix.inverse_experiment(E, spec, U, t_grid, levels=cfg.get("run", "levels", None),
                                kappa=cfg.typed("run", "kappa", int, ix.KAPPA),
                                slack=float(cfg.get("run", "slack", 0.1)))
    d = E.grid.d
    out = Outcome()
    out.tables["records.csv"] = ([f"x{i}" for i in range(d)] + ["best_t", "gamma"],
                                 [(*x, t, g) for x, t, g in zip(U, rep.best_t, rep.gammas)])
    out.tables["summary.csv"] = (["gamma_uniform", "lower_bound", "minkowski_dim", "holds", *[f"witness{i}" for i in range(d)]],
                                 [(rep.gamma_uniform, rep.lower_bound, rep.dim_E, rep.holds, *rep.witness)])
    out.verdict = "bound-respected" if rep.holds else "bound-violated"
    out.hypotheses_ok = rep.threshold.hypotheses_ok or rep.gamma_uniform == 0
    out.info.update(construction=_label(dE, "file"), theorem="inverse", predicted=rep.dim_E,
                    slope=rep.lower_bound, residual=0.0)
    return out


def _lattice_cfg(cfg):
    sec = cfg.section("count")
    return dio.LatticeConfig(int(sec.get("d", 2)), int(sec["q"]), float(sec["s"]),
                             sec.get("family", "euclidean"), int(sec.get("m", 2)),
                             sec.get("lam1"), sec.get("lam2"), bool(sec.get("single", False)))


def run_count(cfg, seed):
    lc = _lattice_cfg(cfg)
    mode = cfg.get("count", "mode", "exhaustive")
    pairs = "exhaustive" if mode == "exhaustive" else cfg.typed("count", "n_pairs", int, 4096)
    method = cfg.get("count", "method", "fast")
    fn = dio.count_bruteforce if method == "brute" else dio.count_fast
    tab = fn(lc, pairs, seed=seed)
    out = Outcome()
    out.tables["records.csv"] = (tab.header(), list(tab.rows()))
    out.tables["summary.csv"] = (["q", "aggregate", "stderr", "mode", "delta", "pairs"],
                                 [(lc.q, tab.aggregate, tab.stderr, tab.mode, lc.delta, len(tab.counts))])
    out.info.update(construction=f"lattice d={lc.d} q={lc.q} s={lc.s:g} {lc.family}")
    return out


def run_average_slope(cfg, seed):
    sec = cfg.section("count")
    mode = sec.get("mode", "sampled")
    pairs = "exhaustive" if mode == "exhaustive" else ("auto" if mode == "auto" else int(sec.get("n_pairs", 4096)))
    rep = dio.average_slope(float(sec["s"]), sec.get("q_list", [8, 16, 32, 64]), pairs, seed=seed,
                            d=int(sec.get("d", 2)), family=sec.get("family", "euclidean"), m=int(sec.get("m", 2)),
                            slack=float(sec.get("slack", dio.SLACK)))
    out = Outcome()
    out.tables["records.csv"] = (["q", "aggregate", "stderr", "mean_nu", "mode"],
                                 [(t.cfg.q, t.aggregate, t.stderr, t.mean, t.mode) for t in rep.tables])
    out.tables["summary.csv"] = (["slope", "predicted", "residual", "verdict"],
                                 [(rep.fit.slope, rep.predicted, rep.fit.residual, rep.verdict)])
    out.loglog = (np.log2(rep.fit.x), np.log2(rep.fit.y))
    out.verdict = rep.verdict
    out.info.update(construction=f"lattice d={sec.get('d', 2)} s={float(sec['s']):g}", theorem="numbertheory",
                    predicted=rep.predicted, slope=rep.fit.slope, residual=rep.fit.residual)
    return out


RUNNERS = {
    "construct": run_construct, "dims": run_dims, "energy": run_energy, "fourier": run_fourier,
    "hyperplane": run_hyperplane, "intersect-translate": run_translate, "intersect-rotate": run_rotate,
    "intersect-dilate": run_dilate, "levelset": run_levelset, "maximal": run_maximal,
    "two-surface": run_two_surface, "inverse": run_inverse, "count": run_count,
    "average-slope": run_average_slope,
}


# ---------------------------------------------------------------------------
# persistence

def _write_run(target: Path, out: Outcome, meta: dict):
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=".tmp-", dir=target.parent))
    try:
        files = []
        for name, (header, rows) in out.tables.items():
            (tmp / name).write_text(csv_text(header, rows), encoding="utf-8")
            files.append(name)
        for name, data in out.blobs.items():
            (tmp / name).write_bytes(data)
            files.append(name)
        if out.loglog is not None:
            x, y = out.loglog
            (tmp / "loglog.csv").write_text(csv_text(["x", "y"], zip(x, y)), encoding="utf-8")
            files.append("loglog.csv")
        (tmp / "verdict.txt").write_text(out.verdict + "\n", encoding="utf-8")
        files.append("verdict.txt")
        lines = dict(meta)
        lines.update({k: fmt(v) for k, v in out.info.items()})
        lines.update(verdict=out.verdict, hypotheses_ok=fmt(out.hypotheses_ok), exit_code=str(out.exit_code),
                     files=", ".join(sorted(files + ["manifest.txt"])))
        (tmp / "manifest.txt").write_text("".join(f"{k} = {v}\n" for k, v in lines.items()), encoding="utf-8")
        if target.exists():
            shutil.rmtree(target)
        os.replace(tmp, target)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise


def run(command: str, config_path, seed=None, force=False, out="results") -> tuple:
    """Execute one experiment; returns (exit code, result directory)."""
    cfg = Config.load(config_path)
    exp = cfg.get("run", "experiment", command)
    if exp != command:
        raise ConfigError(f"{cfg.source}: [run] experiment: config is for {exp!r}, not {command!r}")
    if seed is None:
        seed = cfg.typed("run", "seed", int, 0)
    digest = cfg.digest(seed, __version__)
    target = Path(out) / f"{command}-{digest[:16]}"
    man = target / "manifest.txt"
    if man.exists() and not force:
        return int(read_manifest(man).get("exit_code", 0)), target
    t0 = time.perf_counter()
    outcome = RUNNERS[command](cfg, seed)
    meta = {"experiment": command, "config_hash": digest, "tool_version": __version__, "seed": str(seed),
            "config": str(config_path), "wall_time": "%.3f" % (time.perf_counter() - t0)}
    _write_run(target, outcome, meta)
    return outcome.exit_code, target


# ---------------------------------------------------------------------------
# report

def _find_runs(paths):
    runs = []
    for p in paths:
        p = Path(p)
        if (p / "manifest.txt").exists():
            runs.append(p)
            continue
        if not p.is_dir():
            raise RunError(f"{p}: no manifest.txt")
        found = sorted(m.parent for m in p.rglob("manifest.txt"))
        if not found:
            raise RunError(f"{p}: no manifest.txt")
        runs.extend(found)
    return runs


REPORT_COLUMNS = ["theorem", "construction", "predicted_exponent", "fitted_slope", "residual", "verdict", "run"]


def report(inputs, out) -> int:
    runs = _find_runs(inputs)
    groups = {}
    for r in runs:
        m = read_manifest(r / "manifest.txt")
        theorem = m.get("theorem") or FIT_EXPERIMENTS.get(m.get("experiment", ""), m.get("experiment", ""))
        groups.setdefault(theorem, []).append((m, r))
    outdir = Path(out)
    outdir.mkdir(parents=True, exist_ok=True)
    combined = []
    for theorem in sorted(groups):
        rows = []
        for m, r in sorted(groups[theorem], key=lambda mr: (mr[0].get("construction", ""), mr[1].name)):
            rows.append((theorem, m.get("construction", ""), m.get("predicted", ""), m.get("slope", ""),
                         m.get("residual", ""), m.get("verdict", ""), r.name))
            if (r / "loglog.csv").exists():
                shutil.copyfile(r / "loglog.csv", outdir / f"plot_{r.name}.csv")
        (outdir / f"report_{theorem}.csv").write_text(csv_text(REPORT_COLUMNS, rows), encoding="utf-8")
        combined.extend(rows)
    (outdir / "report.csv").write_text(csv_text(REPORT_COLUMNS, combined), encoding="utf-8")
    return 0


# ---------------------------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="fractint", description="Fractal intersection and lattice-count experiments.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=name != "report")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--force", action="store_true")
        sp.add_argument("--out", default="results")
        if name == "report":
            sp.add_argument("inputs", nargs="*")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "report":
            inputs = list(args.inputs)
            if args.config:
                inputs += list(Config.load(args.config).get("run", "inputs", []))
            code = report(inputs, args.out)
            print(f"report written to {args.out}")
            return code
        code, target = run(args.command, args.config, args.seed, args.force, args.out)
        print(f"{read_manifest(target / 'manifest.txt').get('verdict')}: {target}")
        return code
    except (ConfigError, GridError, RunError, ValueError, OSError, KeyError) as e:
        msg = e.args[0] if isinstance(e, KeyError) and e.args else e
        print(f"fractint: error: {msg}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
