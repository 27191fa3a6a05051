"""Monte Carlo estimators built on the samplers and cluster analysis.

Every estimator draws trial t from the seed ``trial_seed(seed, t)`` and
returns per-trial values together with its summary, so results can be
re-summarized or written out row by row.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from . import _kernels as K
from . import rng as R_
from .clusters import (ChemicalMetric, chemical_distance, closest_in_set, double_sweep_diameter,
                       label_components, label_subbox, restrict_S_r, s_infty_proxy)
from .events import EventParams
from .lattice import Config, PreconditionError, Window
from .parallel import run_trials
from .renorm import (PROFILES, PathConstructionError, RegularityProfile, ScaleLadder,
                     check_site_path, construct_short_path, required_radius)
from .samplers import ModelSpec, sample, sample_torus_vacant

MIN_TRIALS = 30
Z95 = 1.959963984540054


class InsufficientTrials(ValueError):
    pass


@dataclass(frozen=True)
class Summary:
    mean: float
    stderr: float
    n: int

    @property
    def ci(self) -> tuple[float, float]:
        return (self.mean - Z95 * self.stderr, self.mean + Z95 * self.stderr)

    def to_dict(self) -> dict:
        lo, hi = self.ci
        return {"mean": self.mean, "stderr": self.stderr, "n": self.n, "ci95": [lo, hi]}


def summarize(values, min_trials: int = MIN_TRIALS) -> Summary:
    """Mean and standard error; refuses fewer than ``min_trials`` values."""
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if len(v) < min_trials:
        raise InsufficientTrials(f"{len(v)} effective trials, need at least {min_trials}")
    se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
    return Summary(float(v.mean()), se, len(v))


def _seeds(seed: int, trials: int) -> list[int]:
    if trials < 1:
        raise PreconditionError("trials must be positive")
    return R_.trial_seeds(seed, trials)


def central_half(window: Window) -> tuple[slice, ...]:
    return tuple(slice(s // 4, s // 4 + max(1, s // 2)) for s in window.sides)


# ---------------------------------------------------------------- density


@dataclass
class DensityEstimate:
    summary: Summary
    values: np.ndarray

    @property
    def eta(self) -> float:
        return self.summary.mean


def _density_trial(args):
    spec, window, policy, s = args
    cfg = sample(spec, window, s)
    proxy = s_infty_proxy(cfg, policy)
    return float(proxy[central_half(window)].mean())


def estimate_density(spec: ModelSpec, window: Window, trials: int, seed: int,
                     policy: str = "diameter_span", workers: int = 1) -> DensityEstimate:
    """Fraction of central half-window sites in the S_infinity proxy."""
    vals = run_trials(_density_trial, [(spec, window, policy, s) for s in _seeds(seed, trials)],
                      workers)
    v = np.array(vals)
    return DensityEstimate(summarize(v), v)


# ---------------------------------------------------------------- chemical stretch


@dataclass
class StretchEstimate:
    R: int
    ratios: np.ndarray
    excluded: dict
    trial_ratio: list

    def quantile(self, q: float) -> float:
        if len(self.ratios) < MIN_TRIALS:
            raise InsufficientTrials(f"{len(self.ratios)} effective trials")
        return float(np.quantile(self.ratios, q))

    def to_dict(self) -> dict:
        qs = {f"q{int(q * 100)}": float(np.quantile(self.ratios, q))
              for q in (0.5, 0.9, 0.99)} if len(self.ratios) else {}
        return {"R": self.R, "n": int(len(self.ratios)), "excluded": self.excluded, **qs}


def probe_sites(sites: np.ndarray, n_probes: int, seed: int) -> np.ndarray:
    """Extremal sites in the 2^d signed directions, then uniform fill."""
    d = sites.shape[1]
    chosen = []
    for eps in np.array(np.meshgrid(*[[1, -1]] * d, indexing="ij")).reshape(d, -1).T:
        i = int(np.argmax(sites @ eps))
        if i not in chosen:
            chosen.append(i)
    rest = np.setdiff1d(np.arange(len(sites)), chosen)
    k = min(max(n_probes - len(chosen), 0), len(rest))
    if k:
        pick = R_.generator(seed, R_.PROBES).choice(rest, size=k, replace=False)
        chosen.extend(int(v) for v in pick)
    return sites[np.array(chosen)]


def _stretch_trial(args):
    spec, window, R, n_probes, s = args
    cfg = sample(spec, window, s)
    lab = label_components(cfg)
    sR = restrict_S_r(cfg, R, lab)
    sub = tuple(slice(int(-a - R), int(-a + R + 1)) for a in window.anchor)
    idx = np.argwhere(sR[sub])
    if len(idx) == 0:
        return ("empty", math.nan)
    sites = idx - R
    probes = probe_sites(sites, n_probes, s)
    m = ChemicalMetric(cfg)
    flat = window.flat_index(probes)
    best = 0
    for p in probes[:-1]:
        dist = m.distances_from(p).ravel()[flat]
        if np.any(dist < 0):
            return ("disconnected", math.nan)
        best = max(best, int(dist.max()))
    return ("ok", best / R)


def estimate_chem_stretch(spec: ModelSpec, R: int, trials: int, seed: int,
                          window: Window | None = None, n_probes: int | None = None,
                          workers: int = 1) -> StretchEstimate:
    """Per trial, max over probe pairs in S_R and B(0, R) of rho(x, y) / R."""
    window = window or Window.centered(2 * R, spec.d)
    if window.is_torus or not window.contains_box(np.full(spec.d, -2 * R),
                                                  np.full(spec.d, 2 * R + 1)):
        raise PreconditionError("window must cover B(0, 2R)")
    n_probes = n_probes or math.ceil(math.log(R) ** 2)
    out = run_trials(_stretch_trial,
                     [(spec, window, R, n_probes, s) for s in _seeds(seed, trials)], workers)
    excluded = {}
    for status, _ in out:
        if status != "ok":
            excluded[status] = excluded.get(status, 0) + 1
    ratios = np.array([v for st, v in out if st == "ok"])
    return StretchEstimate(R, ratios, excluded, out)


# ---------------------------------------------------------------- short paths


def _short_path_trial(args):
    spec, R, ladder, params, s = args
    window = Window.centered(required_radius(R, ladder, spec.d), spec.d)
    cfg = sample(spec, window, s)
    sR = restrict_S_r(cfg, R, label_components(cfg))
    sub = tuple(slice(int(-a - R), int(-a + R + 1)) for a in window.anchor)
    sites = np.argwhere(sR[sub]) - R
    if len(sites) == 0:
        return {"status": "empty"}
    ones = np.ones(spec.d, np.int64)
    x, y = sites[int(np.argmax(sites @ ones))], sites[int(np.argmin(sites @ ones))]
    try:
        res = construct_short_path(cfg, x, y, R, ladder, params)
    except PathConstructionError as exc:
        return {"status": "construction_error", "H": 1, "error": str(exc)}
    if not res.success:
        return {"status": "H_fail", "H": 0, "clauses": res.failure["clauses"]}
    problems = check_site_path(cfg, res.path, x, y)
    bfs = chemical_distance(cfg, x, y)
    bound = res.certificate["bound"]
    valid = not problems and res.length <= bound and bfs <= res.length
    return {"status": "ok", "H": 1, "length": res.length, "bound": bound, "bfs": bfs,
            "valid": bool(valid), "problems": problems, "x": x.tolist(), "y": y.tolist(),
            "certificate": res.certificate}


@dataclass
class ShortPathRun:
    R: int
    records: list

    @property
    def h_fail_rate(self) -> float:
        n = [r for r in self.records if r["status"] != "empty"]
        return sum(r["status"] == "H_fail" for r in n) / max(len(n), 1)

    @property
    def all_valid(self) -> bool:
        return all(r.get("valid", True) and r["status"] != "construction_error"
                   for r in self.records)

    def to_dict(self) -> dict:
        ok = [r for r in self.records if r["status"] == "ok"]
        out = {"R": self.R, "trials": len(self.records), "h_fail_rate": self.h_fail_rate,
               "successes": len(ok), "all_valid": self.all_valid,
               "empty": sum(r["status"] == "empty" for r in self.records)}
        if ok:
            out["max_length_over_R"] = max(r["length"] for r in ok) / self.R
            out["max_bound_over_R"] = max(r["bound"] for r in ok) / self.R
        return out


def run_short_paths(spec: ModelSpec, R: int, ladder: ScaleLadder, params: EventParams,
                    trials: int, seed: int, workers: int = 1) -> ShortPathRun:
    """Per trial: sample on the window construct_short_path needs, join the two
    extreme sites of S_R in B(0, R) along the diagonal, and check the path."""
    out = run_trials(_short_path_trial, [(spec, R, ladder, params, s)
                                         for s in _seeds(seed, trials)], workers)
    return ShortPathRun(R, out)


# ---------------------------------------------------------------- norm and shape


@dataclass
class ShapeEstimate:
    directions: np.ndarray
    n_grid: list
    values: np.ndarray            # trials x directions, rho~(0, n_max x) / n_max
    per_n: np.ndarray             # directions x len(n_grid) mean of rho~(0, n x) / n
    p_hat: np.ndarray
    stderr: np.ndarray
    subadditivity_violations: int
    excluded: int
    trial_ids: list = field(default_factory=list)
    boundary: np.ndarray = field(init=False)
    hull_vertices: np.ndarray = field(init=False)
    convexity_violation: float = field(init=False)
    symmetry_score: float = field(init=False)

    def __post_init__(self):
        self.boundary = self.directions / self.p_hat[:, None]
        self.hull_vertices, self.convexity_violation = _hull(self.boundary)
        self.symmetry_score = float(_symmetry(self.directions, self.p_hat, self.stderr))

    def norm(self, x) -> tuple[float, float]:
        i = _find_dir(self.directions, x)
        return float(self.p_hat[i]), float(self.stderr[i])

    def to_dict(self) -> dict:
        return {"directions": self.directions.tolist(), "p_hat": self.p_hat.tolist(),
                "stderr": self.stderr.tolist(), "n_grid": list(self.n_grid),
                "subadditivity_violations": self.subadditivity_violations,
                "excluded": self.excluded, "convexity_violation": self.convexity_violation,
                "symmetry_score": self.symmetry_score}


def _find_dir(dirs, x):
    x = np.asarray(x)
    hit = np.flatnonzero(np.all(dirs == x, axis=1))
    if len(hit) == 0:
        raise KeyError(f"direction {x.tolist()} not estimated")
    return int(hit[0])


def _hull(points: np.ndarray):
    """Hull vertex indices and the largest depth of a boundary point inside
    the hull of the others (0 when the radial points are in convex position)."""
    d = points.shape[1]
    try:
        hull = ConvexHull(points)
    except (QhullError, ValueError):
        return np.arange(len(points)), 0.0
    worst = 0.0
    for i in range(len(points)):
        others = np.delete(points, i, axis=0)
        if len(others) <= d:
            continue
        try:
            h = ConvexHull(others)
        except (QhullError, ValueError):
            continue
        depth = -float((h.equations[:, :-1] @ points[i] + h.equations[:, -1]).max())
        worst = max(worst, depth)
    return hull.vertices, worst


def _symmetry(dirs: np.ndarray, p: np.ndarray, se: np.ndarray) -> float:
    """Largest |p(x) - p(gx)| / combined stderr over signed permutations g
    mapping an estimated direction onto another."""
    import itertools

    d = dirs.shape[1]
    score = 0.0
    keys = {tuple(v): i for i, v in enumerate(dirs.tolist())}
    for perm in itertools.permutations(range(d)):
        for signs in itertools.product((1, -1), repeat=d):
            for i, v in enumerate(dirs):
                gv = tuple(int(signs[a] * v[perm[a]]) for a in range(d))
                j = keys.get(gv)
                if j is None or j == i:
                    continue
                den = math.hypot(se[i], se[j])
                diff = abs(p[i] - p[j])
                if den > 0:
                    score = max(score, diff / den)
                elif diff > 1e-12:
                    score = math.inf
    return score


def _norm_trial(args):
    """rho~(0, n x) for every direction x and n in the grid, plus the number
    of triangle-inequality violations along each ray."""
    spec, window, dirs, n_grid, policy, s = args
    cfg = sample(spec, window, s)
    proxy = s_infty_proxy(cfg, policy)
    sites = window.coords(np.flatnonzero(proxy.ravel()))
    nd, ng = len(dirs), len(n_grid)
    if len(sites) == 0:
        return None
    m = ChemicalMetric(cfg)
    origin = closest_in_set(np.zeros(cfg.d, np.int64), sites)
    proj = np.array([[closest_in_set(n * x, sites) for n in n_grid] for x in dirs])
    d0 = m.distances_from(origin).ravel()
    vals = np.empty((nd, ng))
    for i in range(nd):
        f = d0[window.flat_index(proj[i])]
        vals[i] = np.where(f >= 0, f, np.inf)
    if not np.all(np.isfinite(vals)):
        return None
    viol = 0
    for i in range(nd):
        for a in range(ng - 1):
            da = m.distances_from(proj[i, a]).ravel()
            for b in range(a + 1, ng):
                dab = da[window.flat_index(proj[i, b])]
                dab = np.inf if dab < 0 else dab
                if vals[i, b] > vals[i, a] + dab:
                    viol += 1
    return vals, viol


def shape_window(dirs, n_grid, d: int, margin: int | None = None) -> Window:
    reach = int(max(n_grid) * np.abs(np.asarray(dirs)).max())
    margin = max(8, reach // 4) if margin is None else margin
    return Window.centered(reach + margin, d)


def estimate_shape(spec: ModelSpec, directions, n_grid: Sequence[int], trials: int, seed: int,
                   margin: int | None = None, policy: str = "diameter_span",
                   workers: int = 1) -> ShapeEstimate:
    """Norm estimates p(x) ~ rho~(0, n x) / n along integer directions x at
    the largest n of the grid; the boundary of the shape is x / p(x)."""
    dirs = np.atleast_2d(np.asarray(directions, np.int64))
    if np.any(np.all(dirs == 0, axis=1)):
        raise PreconditionError("zero direction")
    n_grid = sorted(int(n) for n in n_grid)
    if n_grid[0] < 1:
        raise PreconditionError("grid values must be positive")
    window = shape_window(dirs, n_grid, spec.d, margin)
    out = run_trials(_norm_trial, [(spec, window, dirs, n_grid, policy, s)
                                   for s in _seeds(seed, trials)], workers)
    ids = [t for t, o in enumerate(out) if o is not None]
    ok = [out[t] for t in ids]
    if len(ok) < MIN_TRIALS:
        raise InsufficientTrials(f"{len(ok)} usable trials")
    vals = np.stack([o[0] for o in ok])                # T x dirs x grid
    viol = int(sum(o[1] for o in ok))
    ns = np.array(n_grid, float)
    per_n = (vals / ns).mean(axis=0)
    top = vals[:, :, -1] / ns[-1]
    p_hat = top.mean(axis=0)
    se = top.std(axis=0, ddof=1) / math.sqrt(len(top))
    return ShapeEstimate(dirs, n_grid, top, per_n, p_hat, se, viol, len(out) - len(ok), ids)


def estimate_norm(spec: ModelSpec, direction, n_grid: Sequence[int], trials: int, seed: int,
                  margin: int | None = None, workers: int = 1) -> tuple[float, float]:
    """p_hat(x) and its standard error."""
    est = estimate_shape(spec, [direction], n_grid, trials, seed, margin, workers=workers)
    return float(est.p_hat[0]), float(est.stderr[0])


# ---------------------------------------------------------------- decorrelation


@dataclass(frozen=True)
class LocalEvent:
    """Event measurable with respect to the sites within sup distance
    ``radius`` of ``center``; ``increasing`` gives its monotonicity."""

    name: str
    center: tuple
    radius: int
    increasing: bool
    fn: Callable[[Config], bool]

    def __call__(self, cfg: Config) -> bool:
        return bool(self.fn(cfg))


def _crossing(cfg: Config, center, radius: int, axis: int) -> bool:
    lo = np.asarray(center) - radius - cfg.window.lo
    labels, _ = label_subbox(cfg.occ, lo, lo + 2 * radius + 1)
    first = np.take(labels, 0, axis=axis)
    last = np.take(labels, -1, axis=axis)
    a = set(first[first >= 0].tolist())
    return bool(a.intersection(last[last >= 0].tolist()))


def box_crossing(center, radius: int, axis: int = 0) -> LocalEvent:
    """Occupied crossing of B(center, radius) between its two faces normal to ``axis``."""
    center = tuple(int(v) for v in center)
    return LocalEvent(f"crossing{center}", center, radius, True,
                      partial(_crossing, center=center, radius=radius, axis=axis))


def _occupied(cfg: Config, center) -> bool:
    return cfg.occupied(center)


def site_occupied(center) -> LocalEvent:
    center = tuple(int(v) for v in center)
    return LocalEvent(f"occupied{center}", center, 0, True, partial(_occupied, center=center))


@dataclass
class DecorrelationReport:
    lhs: float
    lhs_stderr: float
    rhs: float
    rhs_stderr: float
    slack: float
    joint_minus_product: float
    joint_minus_product_stderr: float
    passes: bool
    samples: dict = field(default_factory=dict, repr=False)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items() if k != "samples"}


def _event_trial(args):
    spec, window, events, s = args
    cfg = sample(spec, window, s)
    return [ev(cfg) for ev in events]


def _joint_stats(b: np.ndarray):
    """P[B1], P[B2], P[B1 and B2] and the influence-function stderr of
    P[B1 and B2] - P[B1] P[B2]."""
    b1, b2 = b[:, 0].astype(float), b[:, 1].astype(float)
    p1, p2, p12 = b1.mean(), b2.mean(), (b1 * b2).mean()
    phi = b1 * b2 - p2 * b1 - p1 * b2
    se = phi.std(ddof=1) / math.sqrt(len(b)) if len(b) > 1 else 0.0
    return p1, p2, p12, p12 - p1 * p2, se


def check_decorrelation(spec: ModelSpec, u: float, u_hat: float, L: int, R: float,
                        events: tuple[LocalEvent, LocalEvent], trials: int, seed: int,
                        profile: RegularityProfile | None = None, z: float = Z95,
                        pad: int | None = None, workers: int = 1) -> DecorrelationReport:
    """Sprinkled decorrelation check for two local events of equal monotonicity.

    For increasing events lhs = P[B1 and B2] under the sparser parameter
    u_hat and rhs = P[B1] P[B2] under the denser u plus exp(-f_P(L)); for
    decreasing events the roles of the parameters swap.  ``u`` must be at
    least as dense as ``u_hat`` in the family's monotone order.
    """
    e1, e2 = events
    if e1.increasing != e2.increasing:
        raise PreconditionError("events must share their monotonicity")
    c1, c2 = np.asarray(e1.center), np.asarray(e2.center)
    if np.abs(c1 - c2).max() < R * L:
        raise PreconditionError(f"|x1 - x2|_inf = {np.abs(c1 - c2).max()} below R L = {R * L}")
    for ev in events:
        if ev.radius > 10 * L:
            raise PreconditionError(f"event {ev.name} reaches beyond B(x, 10 L)")
    denser = u >= u_hat if spec.increasing else u <= u_hat
    if not denser:
        raise PreconditionError("u must be at least as dense as u_hat")
    profile = profile or PROFILES.get(spec.family.split("_")[0], PROFILES["bernoulli"])
    lo = np.minimum(c1 - e1.radius, c2 - e2.radius)
    hi = np.maximum(c1 + e1.radius, c2 + e2.radius) + 1
    window = Window(tuple(lo), tuple(hi - lo))
    if pad is not None:
        spec = ModelSpec(spec.family, spec.d, spec.param, pad, spec.escape_radius,
                         spec.cap_trials, spec.calibration_seed)
    sparse_p, dense_p = (u_hat, u) if e1.increasing else (u, u_hat)
    joint_p, prod_p = sparse_p, dense_p
    seeds_j = _seeds(seed, trials)
    seeds_m = _seeds(R_.trial_seed(seed, 1 << 40), trials)
    bj = np.array(run_trials(_event_trial, [(spec.with_param(joint_p), window, events, s)
                                            for s in seeds_j], workers))
    bm = np.array(run_trials(_event_trial, [(spec.with_param(prod_p), window, events, s)
                                            for s in seeds_m], workers))
    T = len(bj)
    _, _, lhs, dj, dj_se = _joint_stats(bj)
    lhs_se = math.sqrt(lhs * (1 - lhs) / T)
    m1, m2 = bm[:, 0].mean(), bm[:, 1].mean()
    g = m2 * bm[:, 0] + m1 * bm[:, 1]
    rhs_prod_se = float(g.std(ddof=1) / math.sqrt(T))
    slack = math.exp(-profile.f(math.log(L))) if L > 1 else math.exp(-1.0)
    rhs = m1 * m2 + slack
    passes = lhs - rhs <= z * math.hypot(lhs_se, rhs_prod_se)
    samples = {"joint": (joint_p, seeds_j, bj), "product": (prod_p, seeds_m, bm)}
    return DecorrelationReport(float(lhs), lhs_se, float(rhs), rhs_prod_se, slack,
                               float(dj), float(dj_se), bool(passes), samples)


# ---------------------------------------------------------------- covariance decay


@dataclass
class CovarianceDecay:
    distances: np.ndarray
    cov: np.ndarray
    stderr: np.ndarray
    slope: float
    slope_stderr: float
    density: float

    @property
    def slope_ci(self) -> tuple[float, float]:
        return (self.slope - Z95 * self.slope_stderr, self.slope + Z95 * self.slope_stderr)

    def to_dict(self) -> dict:
        return {"distances": self.distances.tolist(), "cov": self.cov.tolist(),
                "stderr": self.stderr.tolist(), "slope": self.slope,
                "slope_stderr": self.slope_stderr, "density": self.density}


def _pair_sums(args):
    spec, window, distances, s = args
    cfg = sample(spec, window, s)
    x = cfg.occ.astype(np.float64)
    out = np.zeros((len(distances), 4))
    for i, r in enumerate(distances):
        for a in range(x.ndim):
            if r >= x.shape[a]:
                continue
            first = np.take(x, np.arange(0, x.shape[a] - r), axis=a)
            second = np.take(x, np.arange(r, x.shape[a]), axis=a)
            out[i] += (first.sum(), second.sum(), (first * second).sum(), first.size)
    return out


def _pooled_cov(S):
    tot = S.sum(axis=0)
    n = tot[:, 3]
    m1, m2, m12 = tot[:, 0] / n, tot[:, 1] / n, tot[:, 2] / n
    return m12 - m1 * m2


def _slope(dist, cov):
    ok = (dist > 0) & (cov > 0)
    if ok.sum() < 2:
        return math.nan
    return float(np.polyfit(np.log(dist[ok]), np.log(cov[ok]), 1)[0])


def covariance_decay(spec: ModelSpec, distances: Sequence[int], trials: int, seed: int,
                     side: int | None = None, batches: int = 10,
                     workers: int = 1) -> CovarianceDecay:
    """Occupancy covariance at axis-aligned separations, pooled over all
    pairs of a cube window, with a log-log least-squares slope.

    Standard errors use the per-trial influence function; the slope error
    is a delete-one-batch jackknife.
    """
    dist = np.asarray(sorted(int(r) for r in distances))
    if trials < max(MIN_TRIALS, batches):
        raise InsufficientTrials(f"{trials} trials")
    side = side or 2 * int(dist.max())
    if side <= dist.max():
        raise PreconditionError("window side must exceed the largest distance")
    window = Window(((-(side // 2)),) * spec.d, (side,) * spec.d)
    S = np.stack(run_trials(_pair_sums, [(spec, window, dist, s) for s in _seeds(seed, trials)],
                            workers))
    cov = _pooled_cov(S)
    tot = S.sum(axis=0)
    n = tot[:, 3]
    m1, m2 = tot[:, 0] / n, tot[:, 1] / n
    per = S / S[:, :, 3:4]
    phi = per[:, :, 2] - m2 * per[:, :, 0] - m1 * per[:, :, 1]
    se = phi.std(axis=0, ddof=1) / math.sqrt(len(S))
    slope = _slope(dist, cov)
    groups = np.array_split(np.arange(len(S)), batches)
    jack = np.array([_slope(dist, _pooled_cov(np.delete(S, g, axis=0))) for g in groups])
    jack = jack[np.isfinite(jack)]
    b = len(jack)
    slope_se = math.sqrt((b - 1) / b * np.sum((jack - jack.mean()) ** 2)) if b > 1 else math.nan
    dens = float(tot[0, 0] / n[0]) if len(dist) else math.nan
    return CovarianceDecay(dist, cov, se, slope, slope_se, dens)


# ---------------------------------------------------------------- torus


@dataclass
class TorusDiameter:
    u: float
    N_grid: list
    ratios: dict          # N -> array of diameter / N
    excluded: dict
    raw: dict = field(default_factory=dict, repr=False)   # N -> [(seed, diameter or None)]

    def median(self, N: int) -> float:
        return float(np.median(self.ratios[N]))

    def flatness(self) -> dict:
        """Least-squares slope of the median ratio in N, expressed as the
        relative change across the N range, and the largest relative
        deviation of a median from their mean."""
        Ns = np.array(self.N_grid, float)
        med = np.array([self.median(N) for N in self.N_grid])
        mean = med.mean()
        slope = np.polyfit(Ns, med, 1)[0] if len(Ns) > 1 else 0.0
        return {"medians": med.tolist(),
                "relative_change": float(slope * (Ns.max() - Ns.min()) / mean),
                "max_deviation": float(np.abs(med / mean - 1).max())}

    def to_dict(self) -> dict:
        return {"u": self.u, "N_grid": self.N_grid, "excluded": self.excluded,
                "medians": {str(N): self.median(N) for N in self.N_grid if len(self.ratios[N])},
                **({"flatness": self.flatness()} if all(len(self.ratios[N]) for N in self.N_grid)
                   else {})}


def _torus_trial(args):
    u, N, d, s = args
    cfg = sample_torus_vacant(u, N, s, d)
    lab = label_components(cfg)
    if lab.n_components == 0:
        return None
    c = lab.largest()
    start = cfg.window.coords(int(np.argmax(lab.labels.ravel() == c)))
    diam, _, _ = double_sweep_diameter(cfg, start)
    return diam


def torus_giant_diameter(u: float, N_grid: Sequence[int], trials: int, seed: int, d: int = 3,
                         workers: int = 1) -> TorusDiameter:
    """Double-sweep lower bound on the chemical diameter of the largest
    vacant component, divided by N."""
    ratios, excluded, raw = {}, {}, {}
    for N in N_grid:
        seeds = _seeds(R_.trial_seed(seed, N), trials)
        out = run_trials(_torus_trial, [(u, N, d, s) for s in seeds], workers)
        vals = [o / N for o in out if o is not None]
        ratios[N] = np.array(vals)
        excluded[N] = trials - len(vals)
        raw[N] = list(zip(seeds, out))
    return TorusDiameter(u, list(N_grid), ratios, excluded, raw)


def mesoscopic_scale(N: int, d: int = 3) -> int:
    """floor(N^(1/3)) computed exactly."""
    n = int(round(N ** (1 / 3)))
    while n ** 3 > N:
        n -= 1
    while (n + 1) ** 3 <= N:
        n += 1
    return max(n, 1)


def _wrap_box(occ: np.ndarray, z, r: int) -> np.ndarray:
    """Torus-wrapped copy of B(z, r)."""
    idx = [np.arange(c - r, c + r + 1) % n for c, n in zip(z, occ.shape)]
    return occ[np.ix_(*idx)]


def _mesoscopic_trial(args):
    u, N, d, C, step, s = args
    cfg = sample_torus_vacant(u, N, s, d)
    n = mesoscopic_scale(N, d)
    rho = int(math.floor(n ** (1.0 / d)))
    half = n // 2
    metric = None
    for z in np.ndindex(*(len(range(0, N, step)),) * d):
        z = np.array(z) * step
        box = np.ascontiguousarray(_wrap_box(cfg.occ, z, n))
        labels, nc = label_subbox(box, np.zeros(d, np.int64), np.array(box.shape))
        if nc == 0:
            return False
        sizes = np.bincount(labels[labels >= 0], minlength=nc)
        cz = labels == int(np.argmax(sizes))
        # (ii) every x in B(z, n/2) sees C_z within sup distance n^(1/d)
        near = ndimage.maximum_filter(cz, size=2 * rho + 1, mode="constant", cval=False)
        core = tuple(slice(n - half, n + half + 1) for _ in range(d))
        if not near[core].all():
            return False
        # (i) pairwise chemical distances within C n; the restricted graph
        # gives upper bounds, the full vacant set decides the rest
        mem = np.argwhere(cz)
        start = mem[np.argmin(np.abs(mem - n).max(axis=1))]
        ecc = K.max_eccentricity(box.ravel(), np.array(box.shape, np.int64), cz.ravel(),
                                 int(np.ravel_multi_index(tuple(start), box.shape)), int(C * n))
        if ecc > C * n:
            metric = metric or ChemicalMetric(cfg)
            pts = (np.argwhere(cz) - n + z) % N
            flat = cfg.window.flat_index(pts)
            for p in pts:
                dist = metric.distances_from(p, max_depth=int(C * n)).ravel()[flat]
                if np.any(dist < 0):
                    return False
    return True


@dataclass
class MesoscopicCheck:
    u: float
    N: int
    C: float
    frequency: float
    stderr: float
    outcomes: list

    def to_dict(self) -> dict:
        return {"u": self.u, "N": self.N, "C": self.C, "frequency": self.frequency,
                "stderr": self.stderr}


def check_torus_mesoscopic(u: float, N: int, trials: int, C: float, seed: int, d: int = 3,
                           grid_step: int | None = None, workers: int = 1) -> MesoscopicCheck:
    """Frequency of the local-regularity event on the torus at scale
    n = floor(N^(1/3)), checked at the centres of a grid of step ``grid_step``
    (default n)."""
    n = mesoscopic_scale(N, d)
    step = grid_step or n
    seeds = _seeds(seed, trials)
    out = run_trials(_mesoscopic_trial, [(u, N, d, C, step, s) for s in seeds], workers)
    f = float(np.mean(out))
    return MesoscopicCheck(u, N, C, f, math.sqrt(f * (1 - f) / len(out)), out)
