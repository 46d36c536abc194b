"""Experiment pipelines: generate, mark, decompose, summarise, test, write artifacts.

Every replica draws from its own streams (see :mod:`levytree.rng`), rows are
sorted by replica id before writing, and floats are printed in shortest
round-trip form, so the artifact bytes depend only on the configuration.
"""
from __future__ import annotations

import json
import math
import os
import shutil
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .config import ExperimentConfig
from .errors import CalibrationError, ConfigError
from .gwgen import (
    RAYLEIGH_MEAN,
    Calibration,
    ScalingPlan,
    edge_scale_from_heights,
    pilot_height,
    rescale,
    rescaled_length,
    sample_conditioned_tree,
)
from .mechanism import brownian_canonical_tail, z_moment
from .record import (
    assign_marks,
    count_cuts_edges,
    count_cuts_vertices,
    cuts_edges_from_keys,
    cuts_vertices_from_keys,
    decompose_classes,
)
from .regraft import bismut_summary, regraft_summary
from .rng import stream
from .stats import MIN_KS_SAMPLES, SampleSet, ks_one_sample, ks_two_sample, moments
from .tree import sample_vertex_by_mass, tree_to_dict

__all__ = ["run_experiment", "emit_manifest", "RunResult", "rayleigh_cdf", "COLUMN_DOCS"]

MAX_REL_STDERR = 0.05
THEOREM31_MAX_D = 0.08
THEOREM31_COUNT_MAX_D = 0.10
THEOREM31_COUNT_EPS = 0.05
THEOREM31_MEAN_TOL = 0.05
COROLLARY_MEDIAN_TOL = 0.15
COROLLARY_TREND_SLACK = 0.10


def rayleigh_cdf(x):
    return -np.expm1(-np.square(np.asarray(x, dtype=float)) / 2.0)


COLUMN_DOCS = {
    "replica_id": "replica index",
    "kind": "regraft (pruning classes on the regraft branch) or bismut (spine of a mass-uniform vertex)",
    "branch_len": "Theta for regraft rows, H for bismut rows",
    "n_atoms": "number of (position, mass) atoms",
    "n": "number of vertices",
    "L_n": "total length of the rescaled tree, (n - 1) * edge_scale",
    "H": "height of a mass-uniform vertex",
    "max_height": "largest vertex height",
    "total_mass": "total vertex mass",
    "Theta": "sum over classes of sigma_i * theta_i",
    "sigma_check": "sum of class masses minus total mass",
    "n_classes": "number of pruning classes",
    "X_n": "edge cuts until the root is isolated",
    "Xtilde_n": "vertex cuts until the root is removed",
    "Z_hat": "Xtilde_n / L_n",
    "pilot_height": "mean vertex depth over sqrt(n) at unit edge length",
    "theta_i": "record value of the class",
    "sigma_i": "mass of the class",
    "graft_pos": "position of the class on the regraft branch",
    "attach_height": "height of the class attach vertex in the source tree",
}


def _eps_docs(eps):
    e = repr(float(eps))
    return {
        f"count_{e}": f"number of atoms with mass >= {e}",
        f"ratio_{e}": f"count_{e} / N[sigma > {e}]",
        f"relerr_{e}": f"|ratio_{e} - Theta| / Theta",
        f"small_{e}": f"sum of atom masses <= {e}",
        f"smallratio_{e}": f"small_{e} / N[sigma 1(sigma <= {e})]",
    }


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _write_csv(path: Path, columns: list[str], rows: list[dict]) -> None:
    docs = {c: COLUMN_DOCS[c] if c in COLUMN_DOCS else _eps_docs(c.split("_", 1)[1])[c] for c in columns}
    lines = ["# " + "; ".join(f"{c}: {docs[c]}" for c in columns), ",".join(columns)]
    lines += [",".join(_fmt(r[c]) for c in columns) for r in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


# -- per-replica work ----------------------------------------------------------

@dataclass(frozen=True)
class _Context:
    edge_scale: float


@dataclass
class _Replica:
    replica_id: int
    row: dict
    summary: list = field(default_factory=list)
    decomposition: list = field(default_factory=list)
    tree: Optional[dict] = None


def _plan(cfg: ExperimentConfig, ctx: _Context) -> ScalingPlan:
    return ScalingPlan.unit_mass(cfg.n, ctx.edge_scale, cfg.node_mass_scale)


def _tree(cfg, ctx, r, tag):
    raw = sample_conditioned_tree(cfg.offspring, cfg.n, stream(cfg.master_seed, r, tag + ".tree"))
    return rescale(raw, _plan(cfg, ctx))


def _marked(cfg, ctx, r, tag):
    t = _tree(cfg, ctx, r, tag)
    m = assign_marks(t, cfg.beta, stream(cfg.master_seed, r, tag + ".marks"))
    return t, m, decompose_classes(m)


def _summary_row(r, s, eps):
    row = {"replica_id": r, "kind": s.kind, "branch_len": s.branch_len, "n_atoms": s.n_atoms}
    row.update({f"count_{e!r}": c for e, c in zip(eps, s.counts)})
    return row


def _uniform_height(cfg, t, r, tag):
    u = sample_vertex_by_mass(t, stream(cfg.master_seed, r, tag + ".vertex"))
    return u, float(t.heights[u])


def _rep_gen(cfg, ctx, r):
    t = _tree(cfg, ctx, r, "gen")
    _, h = _uniform_height(cfg, t, r, "gen")
    row = {"replica_id": r, "n": t.n, "L_n": rescaled_length(cfg.n, _plan(cfg, ctx)), "H": h,
           "max_height": float(t.heights.max()), "total_mass": t.total_mass}
    return _Replica(r, row, tree=tree_to_dict(t) if cfg.save_trees else None)


def _rep_mark(cfg, ctx, r):
    t, m, d = _marked(cfg, ctx, r, "mark")
    eps = cfg.thresholds
    row = {"replica_id": r, "Theta": d.Theta, "sigma_check": math.fsum(d.sigmas) - t.total_mass,
           "n_classes": len(d.classes), "L_n": rescaled_length(cfg.n, _plan(cfg, ctx))}
    dec = [{"replica_id": r, "theta_i": c.theta, "sigma_i": c.sigma, "graft_pos": c.graft_pos,
            "attach_height": float(t.heights[c.attach])} for c in d.classes]
    return _Replica(r, row, [_summary_row(r, regraft_summary(d, eps), eps)], dec)


def _rep_theorem31(cfg, ctx, r):
    eps = cfg.thresholds
    tA, _, d = _marked(cfg, ctx, r, "regraft")
    rs = regraft_summary(d, eps)
    tB = _tree(cfg, ctx, r, "bismut")
    u, h = _uniform_height(cfg, tB, r, "bismut")
    bs = bismut_summary(tB, u, eps, require_leaf=False)
    row = {"replica_id": r, "Theta": d.Theta, "H": h, "sigma_check": math.fsum(d.sigmas) - tA.total_mass,
           "n_classes": len(d.classes), "L_n": rescaled_length(cfg.n, _plan(cfg, ctx))}
    return _Replica(r, row, [_summary_row(r, rs, eps), _summary_row(r, bs, eps)])


def _rep_corollary32(cfg, ctx, r):
    eps = cfg.thresholds
    t, _, d = _marked(cfg, ctx, r, "corollary")
    rs = regraft_summary(d, eps)
    row = {"replica_id": r, "Theta": d.Theta, "sigma_check": math.fsum(d.sigmas) - t.total_mass,
           "n_classes": len(d.classes)}
    for e, c, sm in zip(eps, rs.counts, rs.small_mass):
        tail = brownian_canonical_tail(e, cfg.mechanism)
        small_norm = math.sqrt(2.0 * e / math.pi)
        row[f"count_{e!r}"] = c
        row[f"ratio_{e!r}"] = c / tail
        row[f"relerr_{e!r}"] = abs(c / tail - d.Theta) / d.Theta
        row[f"small_{e!r}"] = sm
        row[f"smallratio_{e!r}"] = sm / small_norm
    return _Replica(r, row, [_summary_row(r, rs, eps)])


def _rep_rayleigh(cfg, ctx, r):
    t, _, d = _marked(cfg, ctx, r, "rayleigh")
    _, h = _uniform_height(cfg, t, r, "rayleigh")
    return _Replica(r, {"replica_id": r, "H": h, "Theta": d.Theta})


def _cut_tree(cfg, ctx, r, tag):
    if cfg.cuts_parent is not None:
        parent = np.asarray(cfg.cuts_parent, dtype=np.int64)
        length = (parent.size - 1) * ctx.edge_scale
    else:
        parent = sample_conditioned_tree(cfg.offspring, cfg.n, stream(cfg.master_seed, r, tag + ".tree"))
        length = rescaled_length(cfg.n, _plan(cfg, ctx))
    return parent, length


def _rep_cuts(cfg, ctx, r):
    parent, length = _cut_tree(cfg, ctx, r, "cuts")
    x = count_cuts_edges(parent, stream(cfg.master_seed, r, "cuts.edges"))
    xt = count_cuts_vertices(parent, stream(cfg.master_seed, r, "cuts.vertices"))
    return _Replica(r, {"replica_id": r, "n": int(parent.size), "L_n": length, "X_n": x, "Xtilde_n": xt})


def _rep_zmoments(cfg, ctx, r):
    parent, length = _cut_tree(cfg, ctx, r, "zmoments")
    xt = count_cuts_vertices(parent, stream(cfg.master_seed, r, "zmoments.vertices"))
    return _Replica(r, {"replica_id": r, "L_n": length, "Xtilde_n": xt, "Z_hat": xt / length})


def _rep_calibrate(cfg, ctx, r):
    h = pilot_height(cfg.offspring, cfg.n, stream(cfg.master_seed, r, "calibrate"))
    return _Replica(r, {"replica_id": r, "pilot_height": h})


_REPLICA = {
    "gen": _rep_gen, "mark": _rep_mark, "theorem31": _rep_theorem31, "corollary32": _rep_corollary32,
    "rayleigh": _rep_rayleigh, "cuts": _rep_cuts, "zmoments": _rep_zmoments, "calibrate": _rep_calibrate,
}


def _fixed_shape_chunk(kind, cfg, ctx, ids):
    # same per-replica streams as the generic path, counted in one batch
    parent = np.asarray(cfg.cuts_parent, dtype=np.int64)
    length = (parent.size - 1) * ctx.edge_scale
    tags = ("cuts.edges", "cuts.vertices") if kind == "cuts" else ("zmoments.vertices",)
    keys = {t: np.array([stream(cfg.master_seed, r, t).random(parent.size) for r in ids]).reshape(len(ids), parent.size)
            for t in tags}
    xt = cuts_vertices_from_keys(parent, keys[tags[-1]])
    if kind == "zmoments":
        return [_Replica(r, {"replica_id": r, "L_n": length, "Xtilde_n": int(v), "Z_hat": int(v) / length})
                for r, v in zip(ids, xt)]
    x = cuts_edges_from_keys(parent, keys["cuts.edges"])
    return [_Replica(r, {"replica_id": r, "n": int(parent.size), "L_n": length, "X_n": int(a), "Xtilde_n": int(b)})
            for r, a, b in zip(ids, x, xt)]


def _run_chunk(kind, cfg, ctx, ids):
    if kind in ("cuts", "zmoments") and cfg.cuts_parent is not None:
        return _fixed_shape_chunk(kind, cfg, ctx, ids)
    fn = _REPLICA[kind]
    return [fn(cfg, ctx, r) for r in ids]


def _run_replicas(kind, cfg, ctx, ids, threads) -> list[_Replica]:
    ids = list(ids)
    if threads <= 1 or len(ids) < 2:
        out = _run_chunk(kind, cfg, ctx, ids)
    else:
        size = max(1, math.ceil(len(ids) / (threads * 4)))
        chunks = [ids[i:i + size] for i in range(0, len(ids), size)]
        with ProcessPoolExecutor(max_workers=threads) as pool:
            out = [rep for part in pool.map(_run_chunk, [kind] * len(chunks), [cfg] * len(chunks),
                                            [ctx] * len(chunks), chunks) for rep in part]
    return sorted(out, key=lambda rep: rep.replica_id)


# -- reports -----------------------------------------------------------------------

def _ks1(values, label, cfg, max_D=None, name=None):
    if len(values) < MIN_KS_SAMPLES:
        return {"test": name, "skipped": f"needs at least {MIN_KS_SAMPLES} samples, got {len(values)}"}
    s = SampleSet(np.asarray(values, dtype=float), label)
    return ks_one_sample(s, rayleigh_cdf, alpha=cfg.alpha, max_D=max_D, name=name).to_dict()


def _ks2(a, b, labels, cfg, max_D=None, name=None):
    if min(len(a), len(b)) < MIN_KS_SAMPLES:
        return {"test": name, "skipped": f"needs at least {MIN_KS_SAMPLES} samples per side"}
    sa = SampleSet(np.asarray(a, dtype=float), labels[0])
    sb = SampleSet(np.asarray(b, dtype=float), labels[1])
    return ks_two_sample(sa, sb, alpha=cfg.alpha, max_D=max_D, name=name).to_dict()


def _moment_tests(values, targets, orders, name):
    if len(values) < 2:
        return []
    est = moments(SampleSet(np.asarray(values, dtype=float), name), orders)
    out = []
    for k, (m, se), target in zip(orders, est, targets):
        out.append({"test": f"{name}_moment_{k}", "estimate": m, "stderr": se, "target": target,
                    "pass": bool(abs(m - target) <= 3 * se)})
    return out


def _col(reps, key):
    return [rep.row[key] for rep in reps]


def _report(kind, cfg, reps, cal) -> dict:
    tests: list[dict] = []
    metrics: dict = {}
    if kind == "theorem31":
        theta, h = _col(reps, "Theta"), _col(reps, "H")
        tests.append(_ks1(h, "H", cfg, THEOREM31_MAX_D, "ks_H_vs_rayleigh"))
        tests.append(_ks2(theta, h, ("Theta", "H"), cfg, THEOREM31_MAX_D, "ks_Theta_vs_H"))
        mean = float(np.mean(theta))
        rel = abs(mean - RAYLEIGH_MEAN) / RAYLEIGH_MEAN
        tests.append({"test": "mean_Theta", "estimate": mean, "target": RAYLEIGH_MEAN, "rel_error": rel,
                      "tol": THEOREM31_MEAN_TOL, "pass": bool(rel <= THEOREM31_MEAN_TOL)})
        for e in cfg.thresholds:
            a = [s["count_" + repr(e)] for rep in reps for s in rep.summary if s["kind"] == "regraft"]
            b = [s["count_" + repr(e)] for rep in reps for s in rep.summary if s["kind"] == "bismut"]
            max_D = THEOREM31_COUNT_MAX_D if e == THEOREM31_COUNT_EPS else None
            tests.append(_ks2(a, b, ("regraft", "bismut"), cfg, max_D, f"ks_counts_{e!r}"))
        metrics["max_abs_sigma_check"] = float(np.max(np.abs(_col(reps, "sigma_check"))))
    elif kind == "corollary32":
        med = {}
        for e in cfg.thresholds:
            med[e] = float(np.median(_col(reps, "relerr_" + repr(e))))
            theta = np.asarray(_col(reps, "Theta"))
            small = np.asarray(_col(reps, "smallratio_" + repr(e)))
            metrics[f"median_relerr_{e!r}"] = med[e]
            metrics[f"median_small_relerr_{e!r}"] = float(np.median(np.abs(small - theta) / theta))
        eps = list(cfg.thresholds)
        smallest = eps[-1]
        tests.append({"test": "median_relerr_smallest_eps", "eps": smallest, "estimate": med[smallest],
                      "tol": COROLLARY_MEDIAN_TOL, "pass": bool(med[smallest] <= COROLLARY_MEDIAN_TOL)})
        steps = [med[b] <= med[a] for a, b in zip(eps, eps[1:])]
        slack_ok = [med[b] <= med[a] * (1 + COROLLARY_TREND_SLACK) for a, b in zip(eps, eps[1:])]
        trend = all(slack_ok) and sum(not s for s in steps) <= 1
        tests.append({"test": "median_relerr_trend", "eps": eps, "medians": [med[e] for e in eps],
                      "pass": bool(trend)})
    elif kind == "rayleigh":
        tests.append(_ks1(_col(reps, "H"), "H", cfg, name="ks_H_vs_rayleigh"))
        tests.append(_ks1(_col(reps, "Theta"), "Theta", cfg, name="ks_Theta_vs_rayleigh"))
        orders = list(cfg.zmoment_orders)
        tests += _moment_tests(_col(reps, "H"), [z_moment(2.0, 0.5, k) for k in orders], orders, "H")
    elif kind == "cuts":
        for key in ("X_n", "Xtilde_n"):
            x = np.asarray(_col(reps, key), dtype=float)
            metrics[f"mean_{key}"] = float(x.mean())
            metrics[f"stderr_{key}"] = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else None
            metrics[f"mean_{key}_over_L_n"] = float(np.mean(x / np.asarray(_col(reps, "L_n"))))
    elif kind == "zmoments":
        gamma, c0 = _stable_index(cfg)
        orders = list(cfg.zmoment_orders)
        tests += _moment_tests(_col(reps, "Z_hat"), [z_moment(gamma, c0, k) for k in orders], orders, "Z")
        metrics.update(gamma=gamma, c0=c0)
    elif kind == "gen":
        metrics["mean_H"] = float(np.mean(_col(reps, "H")))
        metrics["mean_L_n"] = float(np.mean(_col(reps, "L_n")))
    elif kind == "mark":
        metrics["mean_Theta"] = float(np.mean(_col(reps, "Theta")))
        metrics["max_abs_sigma_check"] = float(np.max(np.abs(_col(reps, "sigma_check"))))
    if cal is not None:
        metrics["calibration"] = {"c": cal.c, "edge_scale": cal.edge_scale, "rel_stderr": cal.rel_stderr,
                                  "pilot_mean": cal.pilot_mean, "pilot_reps": cal.pilot_reps}
    ran = [t for t in tests if "pass" in t]
    return {"kind": kind, "replicas": len(reps), "tests": tests, "metrics": metrics,
            "pass": bool(all(t["pass"] for t in ran))}


def _stable_index(cfg) -> tuple[float, float]:
    mech = cfg.mechanism
    if mech.is_pure_stable:
        return mech.levy.gamma, mech.levy.c0
    if mech.is_pure_quadratic and mech.alpha == 0:
        return 2.0, mech.beta
    raise ConfigError("mechanism: zmoments needs psi = c0 * lambda**gamma (pure stable or alpha = 0 quadratic)")


# -- driver --------------------------------------------------------------------------

@dataclass
class RunResult:
    out: Path
    files: list[str]
    report: dict
    manifest: dict


class _Timer:
    def __init__(self):
        self.stages: dict[str, float] = {}

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = self.stages.get(name, 0.0) + time.perf_counter() - t0


def _needs_scale(cfg) -> bool:
    if cfg.kind == "calibrate":
        return False
    if cfg.kind in ("cuts", "zmoments") and cfg.cuts_parent is not None:
        return False
    return cfg.edge_scale is None


def _calibrate(cfg, ids, threads) -> tuple[Calibration, list[_Replica]]:
    if not math.isfinite(cfg.offspring.variance):
        raise ConfigError("scaling.edge_scale: required for offspring laws with infinite variance")
    reps = _run_replicas("calibrate", cfg, _Context(1.0), ids, threads)
    cal = edge_scale_from_heights([rep.row["pilot_height"] for rep in reps], cfg.n)
    if cal.rel_stderr > MAX_REL_STDERR:
        raise CalibrationError(f"pilot relative stderr {cal.rel_stderr:.3g} exceeds {MAX_REL_STDERR}")
    return cal, reps


_SAMPLE_COLUMNS = {
    "gen": ["replica_id", "n", "L_n", "H", "max_height", "total_mass"],
    "mark": ["replica_id", "Theta", "sigma_check", "n_classes", "L_n"],
    "theorem31": ["replica_id", "Theta", "H", "sigma_check", "n_classes", "L_n"],
    "rayleigh": ["replica_id", "H", "Theta"],
    "cuts": ["replica_id", "n", "L_n", "X_n", "Xtilde_n"],
    "zmoments": ["replica_id", "L_n", "Xtilde_n", "Z_hat"],
    "calibrate": ["replica_id", "pilot_height"],
}


def _sample_columns(cfg):
    if cfg.kind == "corollary32":
        cols = ["replica_id", "Theta", "sigma_check", "n_classes"]
        for e in cfg.thresholds:
            cols += [f"{p}_{e!r}" for p in ("count", "ratio", "relerr", "small", "smallratio")]
        return cols
    return _SAMPLE_COLUMNS[cfg.kind]


def resolve_threads(threads: Optional[int]) -> int:
    if threads is not None:
        return threads
    env = os.environ.get("LEVYTREE_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError as exc:
            raise ConfigError(f"LEVYTREE_THREADS: expected an integer, got {env!r}") from exc
        if value < 1:
            raise ConfigError(f"LEVYTREE_THREADS: must be >= 1, got {value}")
        return value
    return 1


def emit_manifest(path, config: ExperimentConfig, metrics: Optional[dict] = None) -> dict:
    """Write the run manifest; the parent directory is created if missing."""
    metrics = metrics or {}
    manifest = {"config": config.to_flat(), "seed": config.master_seed, "code_version": __version__}
    manifest.update(metrics)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    _write_json(path, manifest)
    return manifest


def run_experiment(cfg: ExperimentConfig, threads: Optional[int] = None) -> RunResult:
    """Run one experiment and write its artifacts into ``cfg.out``.

    On failure every file of this run is removed and the error propagates.
    """
    cfg.validate()
    if threads is None and cfg.threads > 1:
        threads = cfg.threads
    threads = resolve_threads(threads)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".partial-", dir=out))
    timer = _Timer()
    t_start = time.perf_counter()
    try:
        cal = None
        if cfg.kind == "calibrate":
            with timer.stage("replicas"):
                cal, reps = _calibrate(cfg, range(cfg.replicas), threads)
            ctx = _Context(cal.edge_scale)
        else:
            scale = cfg.edge_scale if cfg.edge_scale is not None else 1.0
            if _needs_scale(cfg):
                with timer.stage("calibrate"):
                    cal, _ = _calibrate(cfg, range(cfg.pilot_reps), threads)
                scale = cal.edge_scale
            ctx = _Context(scale)
            with timer.stage("replicas"):
                reps = _run_replicas(cfg.kind, cfg, ctx, range(cfg.replicas), threads)
        with timer.stage("report"):
            report = _report(cfg.kind, cfg, reps, cal)
        files = []
        with timer.stage("write"):
            _write_csv(staging / "samples.csv", _sample_columns(cfg), [rep.row for rep in reps])
            files.append("samples.csv")
            summary = [s for rep in reps for s in rep.summary]
            if summary:
                cols = ["replica_id", "kind", "branch_len", "n_atoms"] + [f"count_{e!r}" for e in cfg.thresholds]
                _write_csv(staging / "summary.csv", cols, summary)
                files.append("summary.csv")
            if cfg.kind == "mark":
                cols = ["replica_id", "theta_i", "sigma_i", "graft_pos", "attach_height"]
                _write_csv(staging / "decomposition.csv", cols, [d for rep in reps for d in rep.decomposition])
                files.append("decomposition.csv")
            if cfg.kind == "gen" and cfg.save_trees:
                text = "".join(json.dumps({"replica_id": rep.replica_id, "tree": rep.tree}, sort_keys=True) + "\n"
                               for rep in reps)
                (staging / "trees.jsonl").write_text(text, encoding="utf-8")
                files.append("trees.jsonl")
            _write_json(staging / "report.json", report)
            files.append("report.json")
        counts = {"replicas": len(reps), "sample_rows": len(reps),
                  "summary_rows": sum(len(rep.summary) for rep in reps),
                  "decomposition_rows": sum(len(rep.decomposition) for rep in reps)}
        timings = dict(timer.stages)
        timings["wall_time"] = time.perf_counter() - t_start
        # run-dependent fields live under "timings"; everything else is reproducible
        timings["threads"] = threads
        manifest = emit_manifest(staging / "manifest.json", cfg,
                                 {"counts": counts, "files": files + ["manifest.json"], "timings": timings})
        files.append("manifest.json")
        for name in files:
            os.replace(staging / name, out / name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)
    return RunResult(out, files, report, manifest)
