"""Command-line driver: configuration, orchestration, and result files.

Every experiment consumes a JSON config (unknown keys are rejected), derives
one deterministic child seed per work item from the master seed, and writes
three files to the output directory:

* records.csv   - one VerificationRecord per row; the body is byte-identical
                  across runs and worker counts for equal configs
* summary.json  - pass/fail counts and experiment-specific report values
* manifest.json - config echo, artifact version, wall clock, failure list
                  (the only file carrying timing)

Exit code 0 when every record passes, 1 when any verification fails, 2 on
configuration errors.
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import jsonschema

from . import __version__
from .curvature import curvature_constants
from .differential import check_cd_inequality
from .geometry import DistanceOptions, SolverError, cc_distance
from .groups import GroupElement, HormanderError, make_preset, preset_catalog
from .heat import (
    BumpFunction,
    SemigroupSampler,
    pde_oracle_h3,
    strong_feller_modulus,
    verify_integrated_harnack,
    verify_reverse_logsobolev,
    verify_reverse_poincare,
    verify_wang_harnack,
)
from .polynomials import random_polynomial
from .records import VerificationRecord, coords_str, fmt_float, records_to_csv, summarize
from .rng import child_seed
from .stochastic import refinement_convergence, approximation_report, sample_endpoints

WORKERS_ENV = "HEISLAB_WORKERS"

EXPERIMENTS = [
    "curvature", "distance", "simulate", "convergence", "verify-cd",
    "verify-harnack", "verify-reverse-poincare", "verify-reverse-logsobolev",
    "verify-integrated-harnack", "verify-strong-feller", "oracle-h3",
    "list-presets",
]


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str
    preset_name: str = "heisenberg"
    preset_params: dict = field(default_factory=lambda: {"pairs": 1})
    ranks: list = field(default_factory=list)
    seed: int = 20240801
    out: str | None = None
    params: dict = field(default_factory=dict)

    def echo(self) -> dict:
        return {
            "experiment": self.experiment,
            "preset": {"name": self.preset_name, "params": self.preset_params},
            "ranks": self.ranks,
            "seed": self.seed,
            "params": self.params,
        }


CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {"type": "string", "enum": EXPERIMENTS},
        "preset": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "name": {"type": "string"},
                "params": {"type": "object"},
            },
            "required": ["name"],
        },
        "ranks": {"type": "array", "items": {"type": "integer", "minimum": 1}},
        "seed": {"type": "integer", "minimum": 0},
        "out": {"type": "string"},
        "params": {"type": "object"},
    },
}

_NUM = {"type": "number"}
_POSNUM = {"type": "number", "exclusiveMinimum": 0}
_POSINT = {"type": "integer", "minimum": 1}
_VEC = {"type": "array", "items": _NUM}
_POINT = {
    "type": "object", "additionalProperties": False,
    "properties": {"w": _VEC, "c": _VEC}, "required": ["w", "c"],
}
_BUMP = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "center": _POINT, "radius": _POSNUM, "height": _POSNUM,
        "floor": {"type": "number", "minimum": 0},
    },
}
_GRID = {
    "type": "object", "additionalProperties": False,
    "properties": {
        "box": {"type": "array", "items": {"type": "array", "items": _NUM,
                                           "minItems": 2, "maxItems": 2},
                "minItems": 3, "maxItems": 3},
        "shape": {"type": "array", "items": _POSINT, "minItems": 3, "maxItems": 3},
        "cfl_fraction": _POSNUM,
        "mollifier_cells": _POSNUM,
    },
}

PARAMS_SCHEMAS = {
    "curvature": {"type": "object", "additionalProperties": False, "properties": {}},
    "list-presets": {"type": "object", "additionalProperties": False, "properties": {}},
    "distance": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "target": _POINT, "segments": _POSINT, "restarts": _POSINT,
        },
        "required": ["target"],
    },
    "simulate": {
        "type": "object", "additionalProperties": False,
        "properties": {"T": _POSNUM, "steps": _POSINT, "samples": _POSINT},
    },
    "convergence": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "T": _POSNUM, "samples": _POSINT,
            "K_list": {"type": "array", "items": _POSINT, "minItems": 2},
            "p_moments": {"type": "array", "items": _POSINT},
        },
    },
    "verify-cd": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "functions": _POSINT, "points": _POSINT, "max_degree": _POSINT,
            "terms": _POSINT, "nu_grid": {"type": "array", "items": _POSNUM},
            "box_half_width": _POSNUM,
            "vertical_coeff_scale": _POSNUM,
        },
    },
    "verify-harnack": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "T": _POSNUM, "samples": _POSINT, "steps": _POSINT,
            "p_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}},
            "pairs": {"type": "array", "items": {
                "type": "object", "additionalProperties": False,
                "properties": {"x": _POINT, "y": _POINT, "dist_sq": {"type": "number", "minimum": 0}},
                "required": ["x", "y"],
            }},
            "bump": _BUMP,
        },
    },
    "verify-reverse-poincare": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "T_grid": {"type": "array", "items": _POSNUM},
            "samples": _POSINT, "steps": _POSINT,
            "points": {"type": "array", "items": _POINT},
            "bump": _BUMP, "h": _POSNUM,
        },
    },
    "verify-reverse-logsobolev": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "T_grid": {"type": "array", "items": _POSNUM},
            "samples": _POSINT, "steps": _POSINT,
            "points": {"type": "array", "items": _POINT},
            "bump": _BUMP, "h": _POSNUM,
        },
    },
    "verify-integrated-harnack": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "T": _POSNUM,
            "q_grid": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 1}},
            "ys": {"type": "array", "items": _POINT},
            "grid": _GRID, "grid_tol": _POSNUM,
        },
    },
    "verify-strong-feller": {
        "type": "object", "additionalProperties": False,
        "properties": {
            "T": _POSNUM, "samples": _POSINT, "steps": _POSINT,
            "x": _POINT, "direction": _VEC,
            "offsets": {"type": "array", "items": _POSNUM},
            "bump": _BUMP,
        },
    },
    "oracle-h3": {
        "type": "object", "additionalProperties": False,
        "properties": {"T": _POSNUM, "grid": _GRID},
    },
}


def load_config(experiment: str, path: str | None, seed_flag, out_flag) -> RunConfig:
    raw = {}
    if path is not None:
        try:
            with open(path, "r", encoding="utf-8") as fh:
                raw = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        jsonschema.validate(raw, CONFIG_SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"config schema violation: {exc.message}") from exc
    if "experiment" in raw and raw["experiment"] != experiment:
        raise ConfigError(
            f"config is for experiment {raw['experiment']!r}, command is {experiment!r}"
        )
    params = raw.get("params", {})
    try:
        jsonschema.validate(params, PARAMS_SCHEMAS[experiment])
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"invalid params for {experiment}: {exc.message}") from exc
    preset = raw.get("preset", {"name": "heisenberg", "params": {"pairs": 1}})
    cfg = RunConfig(
        experiment=experiment,
        preset_name=preset["name"],
        preset_params=preset.get("params", {}),
        ranks=list(raw.get("ranks", [])),
        seed=int(raw.get("seed", 20240801)),
        out=raw.get("out"),
        params=copy.deepcopy(params),
    )
    if seed_flag is not None:
        cfg.seed = seed_flag
    if out_flag is not None:
        cfg.out = out_flag
    if cfg.out is None:
        cfg.out = os.path.join("runs", experiment)
    return cfg


def _point(form, spec) -> GroupElement:
    w = np.zeros(form.n)
    c = np.zeros(form.d)
    ws = np.asarray(spec["w"], dtype=float)
    cs = np.asarray(spec["c"], dtype=float)
    if len(ws) > form.n or len(cs) > form.d:
        raise ConfigError(f"point has too many coordinates for n={form.n}, d={form.d}")
    w[: len(ws)] = ws
    c[: len(cs)] = cs
    return GroupElement(w, c)


def _bump(form, spec) -> BumpFunction:
    spec = dict(spec or {})
    center = _point(form, spec.get("center", {"w": [], "c": []}))
    return BumpFunction(center, spec.get("radius", 2.5),
                        spec.get("height", 1.0), spec.get("floor", 0.0))


def run_items(items, workers: int):
    """Evaluate callables in submission order; results do not depend on workers."""
    if workers <= 1:
        return [item() for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda item: item(), items))


# --------------------------------------------------------------------------
# experiments; each returns (records, summary_extras, artifacts)
# artifacts maps filename -> text content


def exp_curvature(cfg, form, preset, workers):
    ranks = cfg.ranks or [form.n]
    records, rows = [], ["rank,hs_norm_sq,rho2,harnack_coeff"]
    constants = {}
    for m in ranks:
        rid = f"curvature-rank{m}"
        try:
            c = curvature_constants(form, m)
        except HormanderError as exc:
            records.append(VerificationRecord(
                record_id=rid, preset=preset.name, rank=m, passed=False,
                detail={"error": str(exc)}))
            continue
        ok = (0.0 < c.rho2 <= c.hs_norm_sq + 1e-12
              and abs(np.trace(c.gram) - c.hs_norm_sq) <= 1e-9 * max(c.hs_norm_sq, 1)
              and c.harnack_coeff >= 3.0 - 1e-12)
        records.append(VerificationRecord(
            record_id=rid, preset=preset.name, rank=m,
            lhs=c.rho2, rhs=c.hs_norm_sq, margin=c.hs_norm_sq - c.rho2, passed=ok))
        constants[str(m)] = c.as_dict()
        rows.append(f"{m},{fmt_float(c.hs_norm_sq)},{fmt_float(c.rho2)},{fmt_float(c.harnack_coeff)}")
    return records, {"constants": constants}, {"constants.csv": "\n".join(rows) + "\n"}


def exp_distance(cfg, form, preset, workers):
    p = cfg.params
    target = _point(form, p["target"])
    opts = DistanceOptions(segments=p.get("segments", 64),
                           restarts=p.get("restarts", 16), seed=cfg.seed)
    e = GroupElement(np.zeros(form.n), np.zeros(form.d))
    try:
        res = cc_distance(form, e, target, opts=opts)
    except (SolverError, HormanderError) as exc:
        rec = VerificationRecord(record_id="distance", preset=preset.name,
                                 rank=form.n, passed=False, detail={"error": str(exc)})
        return [rec], {"error": str(exc)}, {}
    rec = VerificationRecord(
        record_id="distance", preset=preset.name, rank=form.n,
        x=coords_str(e.coords()), y=coords_str(target.coords()),
        lhs=res.distance, rhs=res.distance,
        margin=res.constraint_residual, passed=True,
        detail={"energy": res.energy},
    )
    prof = res.witness.vertical_profile(form)
    lines = ["t," + ",".join(f"A{i+1}" for i in range(form.n))
             + "," + ",".join(f"a{l+1}" for l in range(form.d))]
    K = res.witness.segments
    for k in range(K + 1):
        cells = [fmt_float(k / max(K, 1))]
        cells += [fmt_float(v) for v in res.witness.nodes[k]]
        cells += [fmt_float(v) for v in prof[k]]
        lines.append(",".join(cells))
    extras = {"distance": res.distance, "energy": res.energy,
              "constraint_residual": res.constraint_residual,
              "restart_index": res.restart_index}
    return [rec], extras, {"witness.csv": "\n".join(lines) + "\n"}


def exp_simulate(cfg, form, preset, workers):
    p = cfg.params
    T, steps, samples = p.get("T", 1.0), p.get("steps", 256), p.get("samples", 10000)
    W, C = sample_endpoints(form, T, steps, samples, cfg.seed)
    header = ",".join([f"w{i+1}" for i in range(form.n)] + [f"c{l+1}" for l in range(form.d)])
    lines = [header]
    for k in range(samples):
        lines.append(",".join(fmt_float(v) for v in np.concatenate([W[k], C[k]])))
    mean_c = C.mean(axis=0)
    se_c = C.std(axis=0, ddof=1) / math.sqrt(samples)
    within = bool(np.all(np.abs(mean_c) <= 3.0 * se_c + 1e-12))
    rec = VerificationRecord(
        record_id="simulate-vertical-mean", preset=preset.name, rank=form.n, T=T,
        lhs=float(np.abs(mean_c).max()), rhs=float(3.0 * se_c.max()),
        margin=float(3.0 * se_c.max() - np.abs(mean_c).max()), passed=within,
    )
    return [rec], {"samples": samples, "T": T, "steps": steps}, \
        {"endpoints.csv": "\n".join(lines) + "\n"}


def exp_convergence(cfg, form, preset, workers):
    p = cfg.params
    T = p.get("T", 1.0)
    K_list = p.get("K_list", [16, 32, 64, 128, 256])
    samples = p.get("samples", 2000)
    p_moments = p.get("p_moments", [1, 2, 4])
    ranks = cfg.ranks or sorted({max(2, form.n // 4), max(2, form.n // 2), form.n})
    ref = refinement_convergence(form, T, K_list, samples, seed=child_seed(cfg.seed, "refine", 0))
    order_ok = abs(ref.fitted_order - 0.5) <= 0.15
    records = [VerificationRecord(
        record_id="refinement-order", preset=preset.name, rank=form.n, T=T,
        lhs=ref.fitted_order, rhs=0.5, margin=0.15 - abs(ref.fitted_order - 0.5),
        passed=order_ok, detail={"rms": ref.rms})]
    rep = approximation_report(form, T, max(K_list), ranks, samples,
                               p_moments=tuple(p_moments),
                               seed=child_seed(cfg.seed, "projection", 0))
    for pm in p_moments:
        seq = rep.sequence(pm)
        records.append(VerificationRecord(
            record_id=f"projection-monotone-p{pm}", preset=preset.name,
            rank=form.n, T=T, p_or_q=pm,
            lhs=seq[-1], rhs=seq[0], margin=seq[0] - seq[-1], passed=rep.monotone_ok,
            detail={"errors": seq}))
    extras = {
        "refinement": {"K_list": ref.K_list, "rms": ref.rms, "order": ref.fitted_order},
        "projection": {"ranks": rep.ranks,
                       "errors": {f"p{pm}": rep.sequence(pm) for pm in p_moments}},
    }
    return records, extras, {}


def exp_verify_cd(cfg, form, preset, workers):
    p = cfg.params
    n_funcs = p.get("functions", 50)
    n_points = p.get("points", 20)
    max_degree = p.get("max_degree", 4)
    terms = p.get("terms", 8)
    nu_grid = p.get("nu_grid", [0.1, 1.0, 10.0])
    half_width = p.get("box_half_width", 3.0)
    vc_scale = p.get("vertical_coeff_scale", 1.0)
    nvars = form.n + form.d
    from .curvature import rho2 as _rho2
    vc = vc_scale * _rho2(form)

    def job(idx):
        def run():
            rng = np.random.default_rng(child_seed(cfg.seed, "verify-cd", idx))
            f = random_polynomial(nvars, max_degree, rng, terms=terms)
            pts = rng.uniform(-half_width, half_width, size=(n_points, nvars))
            out = []
            for j in range(n_points):
                x = GroupElement(pts[j, :form.n], pts[j, form.n:])
                for nu in nu_grid:
                    rec = check_cd_inequality(form, f, x, nu, vertical_coeff=vc)
                    rec.record_id = f"cd-f{idx}-x{j}-nu{nu:g}"
                    rec.preset = preset.name
                    out.append(rec)
            return out
        return run

    batches = run_items([job(i) for i in range(n_funcs)], workers)
    records = [rec for batch in batches for rec in batch]
    worst = min((r.margin for r in records), default=float("nan"))
    return records, {"worst_margin": worst, "vertical_coeff": vc}, {}


def _sampler_for(cfg, form, T, p):
    return SemigroupSampler(form, T, p.get("steps", 256), p.get("samples", 30000),
                            child_seed(cfg.seed, f"sampler-T{T:g}", 0))


def exp_verify_reverse_poincare(cfg, form, preset, workers, log_version=False):
    p = cfg.params
    T_grid = p.get("T_grid", [0.25, 0.5, 1.0, 2.0])
    default_floor = 0.1 if log_version else 0.0
    spec = dict(p.get("bump") or {})
    spec.setdefault("floor", default_floor)
    bump = _bump(form, spec)
    points = [_point(form, q) for q in p.get("points", _default_points(form))]
    h = p.get("h", 1e-3 * bump.radius)
    constants = curvature_constants(form)
    verify = verify_reverse_logsobolev if log_version else verify_reverse_poincare
    name = "reverse-logsobolev" if log_version else "reverse-poincare"

    def job(T):
        def run():
            sampler = _sampler_for(cfg, form, T, p)
            out = []
            for j, x in enumerate(points):
                rec = verify(sampler, bump, x, constants, h,
                             record_id=f"{name}-T{T:g}-x{j}", preset=preset.name)
                out.append(rec)
            return out
        return run

    batches = run_items([job(T) for T in T_grid], workers)
    records = [rec for batch in batches for rec in batch]
    return records, {"T_grid": T_grid, "points": len(points)}, {}


def exp_verify_reverse_logsobolev(cfg, form, preset, workers):
    return exp_verify_reverse_poincare(cfg, form, preset, workers, log_version=True)


def _default_points(form):
    pts = [{"w": [0.0] * form.n, "c": [0.0] * form.d}]
    base = [0.5, -0.4, 0.3, 0.6, -0.2, 0.1]
    for k in range(4):
        w = [base[(k + i) % len(base)] for i in range(min(form.n, 3))]
        c = [0.2 * (k - 1.5)] * min(form.d, 1)
        pts.append({"w": w, "c": c})
    return pts


def _pair_distance_sq(cfg, form, pair, opts):
    if "dist_sq" in pair:
        return float(pair["dist_sq"])
    x = _point(form, pair["x"])
    y = _point(form, pair["y"])
    return cc_distance(form, x, y, opts=opts).distance ** 2


def exp_verify_harnack(cfg, form, preset, workers):
    p = cfg.params
    T = p.get("T", 1.0)
    p_grid = p.get("p_grid", [1.5, 2.0, 4.0])
    bump = _bump(form, p.get("bump"))
    pairs = p.get("pairs", _default_pairs(form))
    constants = curvature_constants(form)
    opts = DistanceOptions(restarts=8, seed=child_seed(cfg.seed, "harnack-dist", 0))
    sampler = _sampler_for(cfg, form, T, p)
    records = []
    for i, pair in enumerate(pairs):
        x, y = _point(form, pair["x"]), _point(form, pair["y"])
        d2 = _pair_distance_sq(cfg, form, pair, opts)
        for pv in p_grid:
            records.append(verify_wang_harnack(
                sampler, bump, x, y, pv, d2, constants,
                record_id=f"wang-pair{i}-p{pv:g}", preset=preset.name))
    return records, {"T": T, "pairs": len(pairs)}, {}


def _default_pairs(form):
    zero = {"w": [0.0], "c": [0.0]}
    return [
        {"x": zero, "y": zero, "dist_sq": 0.0},
        {"x": zero, "y": {"w": [1.0], "c": [0.0]}, "dist_sq": 1.0},
        {"x": zero, "y": {"w": [0.0, 0.5], "c": [0.0]}, "dist_sq": 0.25},
        {"x": {"w": [0.3], "c": [0.0]}, "y": {"w": [0.9], "c": [0.0]}, "dist_sq": 0.36},
        {"x": zero, "y": {"w": [0.4, 0.4], "c": [0.1]}},
        {"x": {"w": [0.2, 0.1], "c": [0.0]}, "y": {"w": [-0.4, 0.6], "c": [0.15]}},
    ]


def exp_verify_integrated_harnack(cfg, form, preset, workers):
    if form.n != 2 or form.d != 1:
        raise ConfigError("the integrated Harnack check requires the n=2, d=1 group")
    p = cfg.params
    T = p.get("T", 1.0)
    q_grid = p.get("q_grid", [1.5, 2.0, 3.0])
    grid = p.get("grid", {})
    box = tuple(tuple(b) for b in grid.get("box", ((-6, 6), (-6, 6), (-8, 8))))
    shape = tuple(grid.get("shape", (96, 96, 128)))
    cells = grid.get("mollifier_cells", 3.0)
    cfl = grid.get("cfl_fraction", 0.5)
    grid_tol = p.get("grid_tol", 0.02)
    constants = curvature_constants(form)
    density = pde_oracle_h3("delta", T, box=box, shape=shape,
                            cfl_fraction=cfl, mollifier_cells=cells)
    ys = [_point(form, q) for q in p.get("ys", _default_ys())]
    opts = DistanceOptions(restarts=8, seed=child_seed(cfg.seed, "ih-dist", 0))
    records = []
    for i, y in enumerate(ys):
        d2 = _oracle_distance_sq_h3(form, y, opts)
        for q in q_grid:
            records.append(verify_integrated_harnack(
                density, form, y, q, d2, constants, grid_tol=grid_tol,
                record_id=f"integrated-harnack-y{i}-q{q:g}", preset=preset.name))
    extras = {"mass": density.mass, "mass_ok": density.mass_ok,
              "steps": density.meta["steps"]}
    return records, extras, {}


def _default_ys():
    return [
        {"w": [0.0], "c": [0.0]},
        {"w": [0.5], "c": [0.0]},
        {"w": [0.0, -0.4], "c": [0.0]},
        {"w": [0.0], "c": [0.25]},
        {"w": [0.3, 0.3], "c": [0.1]},
    ]


def _oracle_distance_sq_h3(form, y, opts):
    """Exact distances for purely horizontal or purely vertical targets."""
    wn = float(np.linalg.norm(y.w))
    cn = float(np.abs(y.c).max()) if form.d else 0.0
    if cn == 0.0:
        return wn * wn
    if wn == 0.0:
        return 4.0 * math.pi * float(np.linalg.norm(y.c))
    e = GroupElement(np.zeros(form.n), np.zeros(form.d))
    return cc_distance(form, e, y, opts=opts).distance ** 2


def exp_verify_strong_feller(cfg, form, preset, workers):
    p = cfg.params
    T = p.get("T", 1.0)
    bump = _bump(form, p.get("bump"))
    x = _point(form, p.get("x", {"w": [0.4, 0.2], "c": [0.1]}))
    direction = np.zeros(form.n)
    dirspec = p.get("direction", [1.0])
    direction[: len(dirspec)] = dirspec
    offsets = p.get("offsets", [0.5, 0.25, 0.125])
    constants = curvature_constants(form)
    sampler = _sampler_for(cfg, form, T, p)
    records, shrinking, diffs = strong_feller_modulus(
        sampler, bump, x, direction, offsets, constants, bump.sup_bound(),
        preset=preset.name)
    records.append(VerificationRecord(
        record_id="strong-feller-shrinking", preset=preset.name, rank=form.n, T=T,
        lhs=diffs[-1], rhs=diffs[0], margin=diffs[0] - diffs[-1], passed=shrinking,
        detail={"diffs": diffs, "offsets": list(offsets)}))
    return records, {"diffs": diffs, "offsets": list(offsets)}, {}


def exp_oracle_h3(cfg, form, preset, workers):
    if form.n != 2 or form.d != 1:
        raise ConfigError("the grid oracle requires the n=2, d=1 group")
    p = cfg.params
    T = p.get("T", 1.0)
    grid = p.get("grid", {})
    box = tuple(tuple(b) for b in grid.get("box", ((-6, 6), (-6, 6), (-8, 8))))
    shape = tuple(grid.get("shape", (96, 96, 128)))
    cells = grid.get("mollifier_cells", 3.0)
    cfl = grid.get("cfl_fraction", 0.5)
    density = pde_oracle_h3("delta", T, box=box, shape=shape,
                            cfl_fraction=cfl, mollifier_cells=cells)
    u = density.values
    asym = float(np.abs(u - u[::-1, ::-1, ::-1]).max() / u.max())
    records = [
        VerificationRecord(record_id="oracle-mass", preset=preset.name, rank=form.n,
                           T=T, lhs=density.mass, rhs=0.99,
                           margin=density.mass - 0.99, passed=density.mass_ok),
        VerificationRecord(record_id="oracle-inversion-symmetry", preset=preset.name,
                           rank=form.n, T=T, lhs=asym, rhs=1e-3,
                           margin=1e-3 - asym, passed=asym < 1e-3),
    ]
    extras = {"mass": density.mass, "asymmetry": asym, "steps": density.meta["steps"],
              "dt": density.meta["dt"]}
    return records, extras, {}


def exp_list_presets(cfg, form, preset, workers):
    catalog = []
    records = []
    for name, params, entry in preset_catalog():
        c = curvature_constants(entry.form)
        catalog.append({
            "name": entry.name, "factory": name, "params": params,
            "n": entry.form.n, "d": entry.form.d,
            "description": entry.description,
            "constants": {"hs_norm_sq": c.hs_norm_sq, "rho2": c.rho2,
                          "harnack_coeff": c.harnack_coeff},
        })
        records.append(VerificationRecord(
            record_id=f"preset-{entry.name}", preset=entry.name,
            rank=entry.form.n, lhs=c.rho2, rhs=c.hs_norm_sq,
            margin=c.hs_norm_sq - c.rho2, passed=True))
    return records, {"presets": catalog}, {}


RUNNERS = {
    "curvature": exp_curvature,
    "distance": exp_distance,
    "simulate": exp_simulate,
    "convergence": exp_convergence,
    "verify-cd": exp_verify_cd,
    "verify-harnack": exp_verify_harnack,
    "verify-reverse-poincare": exp_verify_reverse_poincare,
    "verify-reverse-logsobolev": exp_verify_reverse_logsobolev,
    "verify-integrated-harnack": exp_verify_integrated_harnack,
    "verify-strong-feller": exp_verify_strong_feller,
    "oracle-h3": exp_oracle_h3,
    "list-presets": exp_list_presets,
}


def run(cfg: RunConfig, workers: int) -> int:
    t0 = time.time()
    try:
        preset = make_preset(cfg.preset_name, **cfg.preset_params)
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"invalid preset: {exc}") from exc
    form = preset.form
    if any(m > form.n for m in cfg.ranks):
        raise ConfigError(f"rank exceeds horizontal dimension {form.n}")
    records, extras, artifacts = RUNNERS[cfg.experiment](cfg, form, preset, workers)

    os.makedirs(cfg.out, exist_ok=True)
    csv_text = records_to_csv(records)
    with open(os.path.join(cfg.out, "records.csv"), "w", encoding="utf-8") as fh:
        fh.write(csv_text)
    summary = summarize(records)
    summary["experiment"] = cfg.experiment
    summary["report"] = extras
    with open(os.path.join(cfg.out, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    manifest = {
        "config": cfg.echo(),
        "version": __version__,
        "wall_clock_s": time.time() - t0,
        "records": summary["records"],
        "passed": summary["passed"],
        "failed": summary["failed"],
        "failures": summary["failures"],
    }
    with open(os.path.join(cfg.out, "manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    for name, text in artifacts.items():
        with open(os.path.join(cfg.out, name), "w", encoding="utf-8") as fh:
            fh.write(text)
    print(json.dumps({k: summary[k] for k in ("experiment", "records", "passed", "failed")}))
    return 0 if summary["failed"] == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="heislab",
        description="Heisenberg-like projection groups: constants, distances, "
                    "simulation, and heat-semigroup inequality verification.")
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", default=None, help="JSON config path")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--workers", type=int, default=None,
                        help=f"worker count (default: ${WORKERS_ENV} or 1)")
    args = parser.parse_args(argv)

    workers = args.workers
    if workers is None:
        try:
            workers = int(os.environ.get(WORKERS_ENV, "1"))
        except ValueError:
            workers = 1
    workers = max(1, workers)

    try:
        cfg = load_config(args.experiment, args.config, args.seed, args.out)
        return run(cfg, workers)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    except (HormanderError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
