"""Batch execution of experiment configs and persistence of their outputs.

``run_experiment`` writes ``results.json`` (sorted keys, resolved config and
version embedded), one tidy CSV per curve, and for the ``sample`` kind the
point files themselves.  On failure it writes ``error.json`` instead and
returns a nonzero exit status.
"""
from __future__ import annotations

import json
import logging
import math
import time
from pathlib import Path

import jsonschema

from ._version import __version__
from .config import ConfigError, ExperimentConfig, load_schema, validate_config
from .estimators import (
    DiskRegion,
    InsufficientDataError,
    MCEstimate,
    SquareChain,
    collect_region_counts,
    crossing_curve,
    estimate_critical_radius,
    estimate_field_min_tail,
    estimate_uniqueness_curve,
    fit_exponential_decay,
    hole_estimate_from_counts,
    map_replicas,
    overcrowding_estimate_from_counts,
)
from .gaf import RootReconciliationError
from .lattice import verify_discr1, verify_discr2
from .pointconfig import Window, atomic_write_text, points_to_csv_text
from .sampler import SamplerSpec, sample
from .seeding import derive_seed

log = logging.getLogger(__name__)

PLOT_HEADER = ("scale", "value", "ci_low", "ci_high", "censored")
# series name -> (file name, whether the value column holds log p_hat)
SERIES_FILES = {
    "crossing_vs_r": ("crossing_vs_r.csv", False),
    "log_hole_vs_L": ("log_hole_vs_L.csv", True),
    "hole_vs_R": ("hole_vs_R.csv", False),
    "log_overcrowd_vs_L": ("log_overcrowd_vs_L.csv", True),
    "multi_cluster_vs_L": ("multi_cluster_vs_L.csv", False),
    "fieldmin_vs_R": ("fieldmin_vs_R.csv", False),
    "premise_rate_vs_L": ("premise_rate_vs_L.csv", False),
}

EXIT_OK, EXIT_CONFIG, EXIT_ROOTS, EXIT_IO = 0, 2, 3, 4


def sampler_spec(cfg: ExperimentConfig, half_width: float) -> SamplerSpec:
    p = cfg.process
    return SamplerSpec(p["name"], Window(half_width), p["intensity"], p["buffer"],
                       derive_seed(cfg.master_seed, cfg.experiment_kind))


def _record(series: str, scale: float, est: MCEstimate, **extra) -> dict:
    return {"series": series, "scale": float(scale), **est.to_dict(), **extra}


def _fit_or_reason(pairs):
    try:
        return fit_exponential_decay(pairs).to_dict()
    except InsufficientDataError as exc:
        return {"status": "insufficient_data", "message": str(exc),
                "censored": [float(s) for s, e in pairs if e.n_hits == 0]}


def _run_sample(cfg, threads):
    spec = sampler_spec(cfg, cfg.params["half_width"])
    configs = map_replicas(lambda i: sample(spec, i), cfg.n_samples, threads)
    files = {}
    for pc in configs:
        stem = f"points_{pc.seed_lineage.replica:05d}"
        files[f"{stem}.csv"] = points_to_csv_text(pc.points)
        files[f"{stem}.json"] = json.dumps(pc.metadata(), indent=2, sort_keys=True) + "\n"
    counts = [len(pc) for pc in configs]
    summary = {"point_counts": counts, "mean_count": sum(counts) / len(counts),
               "order": spec.order, "sampler": spec.to_dict()}
    return [], None, summary, files


def _run_percolate(cfg, threads):
    p = cfg.params
    spec = sampler_spec(cfg, p["L"])
    curve, hits = crossing_curve(spec, p["r_values"], p["L"], cfg.n_samples, threads)
    monotone = bool((hits[:, 1:] >= hits[:, :-1]).all()) if len(p["r_values"]) > 1 else True
    order = sorted(range(len(curve)), key=lambda b: curve[b][0])
    est = [_record("crossing_vs_r", curve[b][0], curve[b][1]) for b in order]
    return est, None, {"pathwise_monotone": monotone, "sampler": spec.to_dict()}, {}


def _run_rc(cfg, threads):
    p = cfg.params
    spec = sampler_spec(cfg, p["L_schedule"][-1])
    rc = estimate_critical_radius(spec, p["L_schedule"], cfg.n_samples, p["tol"], p["target"],
                                  threads, p.get("r0"))
    est = [_record("crossing_vs_r", r, e) for r, e in rc.steps]
    summary = {k: v for k, v in rc.to_dict().items() if k != "steps"}
    return est, None, summary, {}


def _run_regions(cfg, threads, overcrowd: bool):
    p = cfg.params
    spec = sampler_spec(cfg, p["half_width"])
    chains = [SquareChain.row(p["theta"], L) for L in p["L_list"]]
    disks = [] if overcrowd else [DiskRegion(float(R)) for R in p["R_list"]]
    counts = collect_region_counts(spec, chains + disks, cfg.n_samples, threads)
    lineage = {"master_seed": spec.master_seed, "process": spec.process,
               "replicas": [0, cfg.n_samples]}
    est, pairs = [], []
    for L, c in zip(p["L_list"], counts[:len(chains)]):
        if overcrowd:
            e = overcrowding_estimate_from_counts(c, p["k"], lineage)
            est.append(_record("log_overcrowd_vs_L", L, e, k=p["k"], theta=p["theta"]))
        else:
            e = hole_estimate_from_counts(c, lineage)
            est.append(_record("log_hole_vs_L", L, e, theta=p["theta"]))
        pairs.append((L, e))
    for d, c in zip(disks, counts[len(chains):]):
        est.append(_record("hole_vs_R", d.R, hole_estimate_from_counts(c, lineage)))
    return est, _fit_or_reason(pairs), {"sampler": spec.to_dict()}, {}


def _run_unique(cfg, threads):
    p = cfg.params
    spec = sampler_spec(cfg, max(p["L_list"]))
    curve = estimate_uniqueness_curve(spec, p["r"], p["L_list"], cfg.n_samples, threads)
    est = [_record("multi_cluster_vs_L", L, e, R_in=L / 4, R_out=3 * L / 4) for L, e in curve]
    return est, None, {"r": p["r"]}, {}


def _run_fieldmin(cfg, threads):
    p = cfg.params
    seed = derive_seed(cfg.master_seed, cfg.experiment_kind)
    est = []
    for R in p["R_list"]:
        e = estimate_field_min_tail(p["nu"], R, cfg.n_samples, seed, cfg.process["buffer"],
                                    threads=threads)
        est.append(_record("fieldmin_vs_R", R, e, threshold=math.exp(-p["nu"] * R * R)))
    return est, None, {"nu": p["nu"]}, {}


def _run_verify(cfg, threads):
    p = cfg.params
    spec = sampler_spec(cfg, p["half_width"])
    if cfg.experiment_kind == "verify-discr1":
        check = lambda pc: verify_discr1(pc, p["r"], p["L"])  # noqa: E731
    else:
        check = lambda pc: verify_discr2(pc, p["theta"], p["k"], p["L"], p["r"])  # noqa: E731
    verdicts = map_replicas(lambda i: check(sample(spec, i)), cfg.n_samples, threads)
    premise = [i for i, v in enumerate(verdicts) if v.premise_holds]
    bad = [i for i, v in enumerate(verdicts) if v.counterexample]
    lineage = {"master_seed": spec.master_seed, "process": spec.process,
               "replicas": [0, cfg.n_samples]}
    est = [_record("premise_rate_vs_L", p["L"], MCEstimate(len(premise), cfg.n_samples, lineage))]
    first = verdicts[premise[0]].to_dict() if premise else verdicts[0].to_dict()
    summary = {"n_premise": len(premise), "n_counterexamples": len(bad),
               "counterexample_replicas": bad, "example_verdict": first,
               "passed": not bad}
    return est, None, summary, {}


RUNNERS = {
    "sample": _run_sample,
    "percolate": _run_percolate,
    "rc": _run_rc,
    "hole": lambda c, t: _run_regions(c, t, overcrowd=False),
    "overcrowd": lambda c, t: _run_regions(c, t, overcrowd=True),
    "unique": _run_unique,
    "fieldmin": _run_fieldmin,
    "verify-discr1": _run_verify,
    "verify-discr2": _run_verify,
}


def execute(cfg: ExperimentConfig, threads: int = 1) -> tuple[dict, dict]:
    """Run ``cfg`` in memory; returns ``(results, extra_files)``."""
    t0 = time.perf_counter()
    est, fit, summary, files = RUNNERS[cfg.experiment_kind](cfg, threads)
    results = {
        "experiment_kind": cfg.experiment_kind,
        "process": dict(cfg.process),
        "params": dict(cfg.params),
        "estimates": est,
        "fit": fit,
        "summary": summary,
        "master_seed": cfg.master_seed,
        "config": cfg.to_dict(),
        "version": __version__,
        "wall_time": time.perf_counter() - t0,
    }
    jsonschema.validate(results, load_schema("results"))
    return results, files


def _fmt(x) -> str:
    return repr(float(x))


def plot_rows(results: dict) -> dict:
    """``{file name: [rows]}`` with rows ``(scale, value, ci_low, ci_high, censored)``."""
    out = {}
    for rec in results.get("estimates", []):
        fname, logscale = SERIES_FILES[rec["series"]]
        p, lo, hi = rec["p_hat"], rec["ci_low"], rec["ci_high"]
        censored = rec["n_hits"] == 0
        if logscale:
            # zero-hit scales carry the rule-of-three bound and are flagged
            value = math.log(p) if p > 0 else math.log(rec["upper_bound"])
            lo = math.log(lo) if lo > 0 else -math.inf
            hi = math.log(hi)
            p = value
        out.setdefault(fname, []).append((rec["scale"], p, lo, hi, int(censored)))
    return out


def emit_plot_data(results: dict, out_dir) -> list:
    """Write one tidy CSV per curve in ``results``; returns the written paths."""
    if not results or "estimates" not in results:
        raise ValueError("results with an 'estimates' list are required")
    out_dir = Path(out_dir)
    paths = []
    for fname, rows in plot_rows(results).items():
        lines = [",".join(PLOT_HEADER)]
        lines += [",".join([_fmt(s), _fmt(v), _fmt(a), _fmt(b), str(c)]) for s, v, a, b, c in rows]
        path = out_dir / fname
        atomic_write_text(path, "\n".join(lines) + "\n")
        paths.append(path)
    return paths


def results_json(results: dict) -> str:
    return json.dumps(results, indent=2, sort_keys=True) + "\n"


def error_document(error_type: str, message: str, errors=(), diagnostic=None) -> dict:
    doc = {"status": "error", "error_type": error_type, "message": message,
           "errors": list(errors), "version": __version__}
    if diagnostic:
        doc["diagnostic"] = json.loads(json.dumps(diagnostic, default=str))
    jsonschema.validate(doc, load_schema("error"))
    return doc


def run_experiment(config, out_dir=None, threads: int = 1) -> tuple[int, dict]:
    """Validate, execute and persist ``config``; returns ``(exit_status, document)``.

    The document is the results dict on success and the error dict otherwise;
    either is also written under ``out_dir`` (default ``config.output.dir``).
    """
    raw_out = out_dir
    try:
        cfg = config if isinstance(config, ExperimentConfig) else validate_config(config)
    except ConfigError as exc:
        doc = error_document(exc.kind, str(exc), exc.errors)
        if raw_out is not None:
            atomic_write_text(Path(raw_out) / "error.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_CONFIG, doc
    out = Path(raw_out if raw_out is not None else cfg.output.get("dir", "out"))
    try:
        results, files = execute(cfg, threads)
    except RootReconciliationError as exc:
        doc = error_document("root_reconciliation", str(exc), diagnostic=exc.diagnostic)
        atomic_write_text(out / "error.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_ROOTS, doc
    except ValueError as exc:
        doc = error_document("precondition", str(exc), [{"path": "$", "message": str(exc)}])
        atomic_write_text(out / "error.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
        return EXIT_CONFIG, doc
    try:
        for name, text in files.items():
            atomic_write_text(out / name, text)
        paths = emit_plot_data(results, out)
        results["artifacts"] = sorted([p.name for p in paths] + list(files))
        atomic_write_text(out / "config.resolved.json", cfg.to_json())
        atomic_write_text(out / "results.json", results_json(results))
    except OSError as exc:
        return EXIT_IO, error_document("io", str(exc))
    return EXIT_OK, results
