"""Experiment kinds behind ``perco run``.

Each kind maps a validated config document to an ``Outcome``: long-format
rows (trial_id, seed, name, value, aux), a JSON summary, an optional
acceptance verdict for ``--check`` and figure writers.  Rows with
trial_id -1 hold run-level aggregates.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import estimators as E
from . import plotting
from .clusters import label_components, s_infty_proxy
from .config import config_hash, model_of, window_of
from .events import EventParams
from .lattice import FormatError, Window, read_config, save_config
from .renorm import RegularityProfile, build_ladder, min_L0_for_condition_b, verify_recursion_bound
from .samplers import sample


@dataclass
class Outcome:
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    check: bool | None = None
    figures: dict = field(default_factory=dict)   # file name -> writer(path)
    seeds: list = field(default_factory=list)
    records: list = field(default_factory=list)   # per-trial structured records

    def add(self, trial_id: int, seed: int, name: str, value, aux: str = ""):
        self.rows.append((int(trial_id), int(seed), name, value, aux))


def _summary_rows(out: Outcome, seed: int, d: dict, prefix: str = "summary"):
    for k, v in d.items():
        if isinstance(v, (bool, int, float, np.integer, np.floating)) and not isinstance(v, str):
            out.add(-1, seed, f"{prefix}.{k}", v)


def _profile(p: dict) -> RegularityProfile:
    return RegularityProfile(float(p["eps_P"]), float(p["chi_P"]))


# ---------------------------------------------------------------- kinds


def run_sample(doc, workers, cache_dir):
    spec, window = model_of(doc), window_of(doc)
    out = Outcome(seeds=E._seeds(doc["seed"], doc["trials"]))
    os.makedirs(cache_dir, exist_ok=True)
    h = config_hash(doc)[:16]
    for t, s in enumerate(out.seeds):
        path = os.path.join(cache_dir, f"{h}-{t}.prc1")
        cfg = None
        if os.path.exists(path):
            try:
                cfg = read_config(path)
            except FormatError:
                cfg = None
            if cfg is not None and (cfg.seed != s or cfg.window != window):
                cfg = None
        if cfg is None:
            cfg = sample(spec, window, s)
            save_config(cfg, path)
        out.add(t, s, "density", cfg.density())
        out.add(t, s, "occupied", int(cfg.occ.sum()), os.path.basename(path))
    dens = [r[3] for r in out.rows if r[2] == "density"]
    out.summary = {"mean_density": float(np.mean(dens)), "cache": cache_dir}
    _summary_rows(out, doc["seed"], {"mean_density": out.summary["mean_density"]})
    return out


def _cluster_trial(args):
    spec, window, policy, s = args
    cfg = sample(spec, window, s)
    lab = label_components(cfg)
    proxy = s_infty_proxy(cfg, policy, lab)
    if lab.n_components:
        c = lab.largest()
        big = (int(lab.sizes[c]), int(lab.diameters[c]))
    else:
        big = (0, 0)
    return lab.n_components, big, float(proxy.mean())


def run_clusters(doc, workers, cache_dir):
    spec, window = model_of(doc), window_of(doc)
    policy = doc["params"]["policy"]
    out = Outcome(seeds=E._seeds(doc["seed"], doc["trials"]))
    res = E.run_trials(_cluster_trial, [(spec, window, policy, s) for s in out.seeds], workers)
    for t, (s, (nc, (size, diam), pd)) in enumerate(zip(out.seeds, res)):
        out.add(t, s, "n_components", nc)
        out.add(t, s, "largest_size", size)
        out.add(t, s, "largest_l1_diameter", diam)
        out.add(t, s, "proxy_density", pd)
    out.summary = {"mean_components": float(np.mean([r[0] for r in res])),
                   "mean_proxy_density": float(np.mean([r[2] for r in res]))}
    _summary_rows(out, doc["seed"], out.summary)
    first = label_components(sample(spec, window, out.seeds[0])).labels
    out.figures["clusters.svg"] = lambda p: plotting.cluster_figure(first, p)
    return out


def run_density(doc, workers, cache_dir):
    spec, window = model_of(doc), window_of(doc)
    est = E.estimate_density(spec, window, doc["trials"], doc["seed"], doc["params"]["policy"],
                             workers)
    out = Outcome(seeds=E._seeds(doc["seed"], doc["trials"]))
    for t, (s, v) in enumerate(zip(out.seeds, est.values)):
        out.add(t, s, "proxy_density", float(v))
    out.summary = {"eta": est.summary.to_dict()}
    _summary_rows(out, doc["seed"], {"eta": est.eta, "eta_stderr": est.summary.stderr})
    return out


def run_stretch(doc, workers, cache_dir):
    spec, window = model_of(doc), window_of(doc)
    p = doc["params"]
    est = E.estimate_chem_stretch(spec, p["R"], doc["trials"], doc["seed"], window,
                                  p.get("n_probes"), workers)
    out = Outcome(seeds=E._seeds(doc["seed"], doc["trials"]))
    for t, (s, (status, v)) in enumerate(zip(out.seeds, est.trial_ratio)):
        out.add(t, s, "max_ratio", v, "" if status == "ok" else status)
    out.summary = est.to_dict()
    _summary_rows(out, doc["seed"], out.summary)
    out.check = len(est.ratios) >= E.MIN_TRIALS
    out.figures["stretch.svg"] = lambda path: plotting.stretch_figure(est, path)
    return out


def run_shape(doc, workers, cache_dir):
    spec = model_of(doc)
    p = doc["params"]
    est = E.estimate_shape(spec, p["directions"], p["n_grid"], doc["trials"], doc["seed"],
                           p.get("margin"), workers=workers)
    out = Outcome(seeds=E._seeds(doc["seed"], doc["trials"]))
    for row, t in enumerate(est.trial_ids):
        for i, x in enumerate(est.directions):
            out.add(t, out.seeds[t], "rho_over_n", float(est.values[row, i]),
                    "dir=" + ",".join(map(str, x.tolist())))
    for i, x in enumerate(est.directions):
        aux = "dir=" + ",".join(map(str, x.tolist()))
        out.add(-1, doc["seed"], "summary.p_hat", float(est.p_hat[i]), aux)
        out.add(-1, doc["seed"], "summary.p_hat_stderr", float(est.stderr[i]), aux)
    out.summary = est.to_dict()
    _summary_rows(out, doc["seed"], {k: out.summary[k] for k in
                                     ("subadditivity_violations", "excluded",
                                      "convexity_violation", "symmetry_score")})
    out.check = est.subadditivity_violations == 0
    out.figures["shape.svg"] = lambda path: plotting.shape_figure(est, path)
    return out


def run_renorm_validate(doc, workers, cache_dir):
    p = doc["params"]
    d = p["d"]
    prof = _profile(p["profile"])
    lad = build_ladder(p["l0"], p["r0"], p["L0"], p["theta"], p["kmax"], limit=None)
    rep = verify_recursion_bound(lad, prof, d, p.get("p0_exponent"))
    out = Outcome(seeds=[doc["seed"]])
    for v in rep["levels"]:
        aux = f"k={v['k']}"
        out.add(0, doc["seed"], "slack_a", v["slack_a"], aux)
        out.add(0, doc["seed"], "slack_b", v["slack_b"], aux)
    search = min_L0_for_condition_b(p["l0"], p["r0"], p["theta"], p["kmax"], prof, d)
    out.summary = {**{k: rep[k] for k in rep if k != "levels"}, "levels": rep["levels"],
                   "d": d, "min_L0_condition_b": search}
    _summary_rows(out, doc["seed"], {"pass_a": rep["pass_a"], "pass_b": rep["pass_b"],
                                     "passes": rep["passes"]})
    out.check = bool(rep["passes"])
    out.figures["recursion.svg"] = lambda path: plotting.recursion_figure(rep, path)
    return out


def run_renorm_path(doc, workers, cache_dir):
    spec = model_of(doc)
    p = doc["params"]
    eta = p["eta"]
    if isinstance(eta, dict):
        est = E.estimate_density(spec, Window.centered(eta["radius"], spec.d), eta["trials"],
                                 eta["seed"], workers=workers)
        eta_info = {"estimated": True, **est.summary.to_dict()}
        eta = est.eta
    else:
        eta_info = {"estimated": False, "mean": eta}
    lad = build_ladder(p["l0"], p["r0"], p["L0"], p["theta"], p["kmax"])
    run = E.run_short_paths(spec, p["R"], lad, EventParams(p["L0"], float(eta)), doc["trials"],
                            doc["seed"], workers)
    out = Outcome(seeds=E._seeds(doc["seed"], doc["trials"]))
    for t, (s, r) in enumerate(zip(out.seeds, run.records)):
        out.add(t, s, "H", r.get("H", math.nan), r["status"])
        if r["status"] == "ok":
            out.add(t, s, "path_length", r["length"])
            out.add(t, s, "certificate_bound", r["bound"])
            out.add(t, s, "bfs_distance", r["bfs"])
            out.add(t, s, "valid", r["valid"])
        out.records.append({"trial_id": t, "seed": s, **r})
    out.summary = {"eta": eta_info, **run.to_dict()}
    _summary_rows(out, doc["seed"], run.to_dict())
    out.check = run.all_valid
    return out


def _local_event(e: dict):
    if e["type"] == "occupied":
        return E.site_occupied(e["center"])
    return E.box_crossing(e["center"], e["radius"], e.get("axis", 0))


def run_decorr(doc, workers, cache_dir):
    spec = model_of(doc)
    p = doc["params"]
    events = tuple(_local_event(e) for e in p["events"])
    rep = E.check_decorrelation(spec, p["u"], p["u_hat"], p["L"], p["R"], events, doc["trials"],
                                doc["seed"], _profile(p["profile"]), workers=workers)
    out = Outcome()
    for phase, (param, seeds, b) in rep.samples.items():
        for t, (s, row) in enumerate(zip(seeds, b)):
            for j, ev in enumerate(events):
                out.add(t, s, f"B{j + 1}", bool(row[j]), f"{phase} param={param!r}")
        out.seeds += list(seeds)
    out.summary = rep.to_dict()
    _summary_rows(out, doc["seed"], out.summary)
    out.check = rep.passes
    return out


def run_covariance(doc, workers, cache_dir):
    spec = model_of(doc)
    p = doc["params"]
    est = E.covariance_decay(spec, p["distances"], doc["trials"], doc["seed"], p.get("side"),
                             workers=workers)
    out = Outcome(seeds=E._seeds(doc["seed"], doc["trials"]))
    for r, c, se in zip(est.distances, est.cov, est.stderr):
        out.add(-1, doc["seed"], "summary.cov", float(c), f"r={int(r)}")
        out.add(-1, doc["seed"], "summary.cov_stderr", float(se), f"r={int(r)}")
    out.summary = est.to_dict()
    _summary_rows(out, doc["seed"], {"slope": est.slope, "slope_stderr": est.slope_stderr,
                                     "density": est.density})
    if spec.family != "bernoulli":
        out.check = abs(est.slope - (2 - spec.d)) <= 0.5
    out.figures["covariance.svg"] = lambda path: plotting.covariance_figure(est, spec.d, path)
    return out


def run_torus(doc, workers, cache_dir):
    m = doc["model"]
    est = E.torus_giant_diameter(float(m["u"]), doc["params"]["N_grid"], doc["trials"],
                                 doc["seed"], m["d"], workers)
    out = Outcome()
    for N in est.N_grid:
        for t, (s, v) in enumerate(est.raw[N]):
            out.add(t, s, "diameter_over_N", math.nan if v is None else v / N, f"N={N}")
            out.seeds.append(s)
    out.summary = est.to_dict()
    flat = out.summary.get("flatness")
    for N, v in out.summary["medians"].items():
        out.add(-1, doc["seed"], "summary.median", v, f"N={N}")
    if flat:
        _summary_rows(out, doc["seed"], {k: flat[k] for k in ("relative_change", "max_deviation")})
        out.check = flat["max_deviation"] <= 0.15
    else:
        out.check = False
    out.figures["torus.svg"] = lambda path: plotting.torus_figure(est, path)
    return out


def run_mesoscopic(doc, workers, cache_dir):
    m, p = doc["model"], doc["params"]
    est = E.check_torus_mesoscopic(float(m["u"]), p["N"], doc["trials"], p["C"], doc["seed"],
                                   m["d"], p.get("grid_step"), workers)
    out = Outcome(seeds=E._seeds(doc["seed"], doc["trials"]))
    for t, (s, ok) in enumerate(zip(out.seeds, est.outcomes)):
        out.add(t, s, "regular", bool(ok))
    out.summary = est.to_dict()
    _summary_rows(out, doc["seed"], {"frequency": est.frequency, "stderr": est.stderr})
    return out


KINDS: dict[str, Callable] = {
    "sample": run_sample,
    "clusters": run_clusters,
    "density": run_density,
    "stretch": run_stretch,
    "shape": run_shape,
    "renorm-validate": run_renorm_validate,
    "renorm-path": run_renorm_path,
    "decorr": run_decorr,
    "covariance": run_covariance,
    "torus": run_torus,
    "mesoscopic": run_mesoscopic,
}


def run_experiment(doc, workers: int, cache_dir: str) -> Outcome:
    return KINDS[doc["kind"]](doc, workers, cache_dir)
