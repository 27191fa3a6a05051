"""Scale ladders, induction bounds and the deterministic path constructions
of the renormalization scheme."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .clusters import ChemicalMetric, closest_in_set, label_components, label_subbox, restrict_S_r
from .events import EventParams, GoodnessField, goodness_field, local_uniqueness
from .lattice import Config, PreconditionError, Window

INT_LIMIT = 1 << 62
KAPPA_PARTIAL = 10 ** 6
LOG2E = 1.0 / math.log(2.0)


class PathConstructionError(RuntimeError):
    """A construction step that the hypotheses guarantee was impossible."""


# ---------------------------------------------------------------- ladders


def _pow_floor(base: int, k: int, theta: int) -> int:
    return base ** (k ** theta)


@dataclass(frozen=True)
class ScaleLadder:
    """l_k = l0 4^(k^theta), r_k = r0 2^(k^theta), L_k = l_{k-1} L_{k-1}.

    Scales are exact Python integers and can be evaluated beyond kmax.
    """

    l0: int
    r0: int
    L0: int
    theta: int
    kmax: int

    def l(self, k: int) -> int:
        return self.l0 * _pow_floor(4, k, self.theta)

    def r(self, k: int) -> int:
        return self.r0 * _pow_floor(2, k, self.theta)

    def L(self, k: int) -> int:
        out = self.L0
        for i in range(k):
            out *= self.l(i)
        return out

    @property
    def ls(self) -> list[int]:
        return [self.l(k) for k in range(self.kmax + 1)]

    @property
    def rs(self) -> list[int]:
        return [self.r(k) for k in range(self.kmax + 1)]

    @property
    def Ls(self) -> list[int]:
        return [self.L(k) for k in range(self.kmax + 1)]

    def log2_L(self, k: int) -> float:
        return math.log2(self.L0) + sum(math.log2(self.l(i)) for i in range(k))


def build_ladder(l0: int, r0: int, L0: int, theta: int, kmax: int,
                 limit: int | None = INT_LIMIT) -> ScaleLadder:
    """Validated ladder; ``limit`` bounds every l_k, r_k, L_k up to kmax
    (pass None for purely symbolic use)."""
    for name, v in (("l0", l0), ("r0", r0), ("L0", L0), ("theta", theta)):
        if int(v) != v or v < 1:
            raise PreconditionError(f"{name} must be a positive integer, got {v}")
    if kmax < 0:
        raise PreconditionError("kmax must be non-negative")
    if not l0 > 4 * r0:
        raise PreconditionError(f"need l0 > 4 r0, got l0={l0}, r0={r0}")
    if L0 < 2:
        raise PreconditionError("need L0 >= 2")
    lad = ScaleLadder(int(l0), int(r0), int(L0), int(theta), int(kmax))
    if limit is not None:
        for k in range(kmax + 1):
            if max(lad.l(k), lad.L(k)) > limit:
                raise OverflowError(f"scale at level {k} exceeds {limit}")
    for k in range(kmax + 1):
        if not lad.l(k) > 4 * lad.r(k):
            raise PreconditionError(f"l_k > 4 r_k fails at k={k}")
    return lad


def select_top_scale(ladder: ScaleLadder, R: int, d: int) -> int:
    """Largest s with L_s <= R^(1/d), i.e. L_s^d <= R."""
    if R < ladder.L0 ** d:
        raise PreconditionError(f"R={R} below L0^d={ladder.L0 ** d}")
    s = 0
    while ladder.L(s + 1) ** d <= R:
        s += 1
    return s


# ---------------------------------------------------------------- profiles


@dataclass(frozen=True)
class RegularityProfile:
    """Decorrelation exponents of a model family.

    ``f_P`` maps log L to f_P(L); the default is exp((log L)^eps_P).
    """

    eps_P: float
    chi_P: float
    Delta_S: float = 1.0
    f_P: Callable[[float], float] | None = field(default=None, compare=False)
    R_P: int = 1
    L_P: int = 1
    name: str = ""

    def f(self, log_L: float) -> float:
        if self.f_P is not None:
            return self.f_P(log_L)
        if log_L <= 0:
            return 1.0
        try:
            return math.exp(log_L ** self.eps_P)
        except OverflowError:
            return math.inf

    def f_S(self, R: float) -> float:
        return math.log(R) ** (1 + self.Delta_S)

    @property
    def theta_sc(self) -> int:
        return math.ceil(1.0 / self.eps_P)


PROFILES = {
    "bernoulli": RegularityProfile(1.0, 1.0, name="bernoulli"),
    "interlacement": RegularityProfile(1.0, 0.25, name="interlacement"),
    "gff": RegularityProfile(0.5, 0.5, name="gff"),
}


def sprinkle_ladder(u: float, delta: float, ladder: ScaleLadder, profile: RegularityProfile,
                    kmax: int | None = None, tail_from: int = 64) -> dict:
    """u_0 = (1 + delta) u and u_{k+1} = u_k / (1 + r_k^-chi).

    The infinite product of (1 + r_k^-chi) is bounded by the partial product
    up to ``tail_from`` times exp of a geometric tail bound.
    """
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    chi = profile.chi_P
    kmax = ladder.kmax if kmax is None else kmax
    us = [(1 + delta) * u]
    for k in range(kmax):
        us.append(us[-1] / (1 + ladder.r(k) ** -chi))
    log_prod = sum(math.log1p(ladder.r(k) ** -chi) for k in range(tail_from))
    # r_k^-chi <= r0^-chi 2^(-chi k) for k >= tail_from since k^theta >= k
    q = 2.0 ** -chi
    log_prod += ladder.r0 ** -chi * q ** tail_from / (1 - q)
    bound = math.exp(log_prod)
    return {"u": us, "product_bound": bound, "passes": bound <= 1 + delta,
            "min_u": min(us), "target": u}


def _kappa_brackets(l0: int, kmax: int, partial: int = KAPPA_PARTIAL):
    """Lower and upper brackets of kappa_k = 1 + l0 sum_{i>k} i^-2."""
    inv = 1.0 / np.arange(1, partial + 1, dtype=np.float64) ** 2
    tail = np.cumsum(inv[::-1])[::-1]  # tail[j] = sum_{i=j+1}^{partial} i^-2
    lo, hi = [], []
    for k in range(kmax + 2):
        s = float(tail[k]) if k < partial else 0.0
        lo.append(1 + l0 * (s + 1.0 / (partial + 1)))
        hi.append(1 + l0 * (s + 1.0 / partial))
    return lo, hi


def verify_recursion_bound(ladder: ScaleLadder, profile: RegularityProfile, d: int,
                           p0_exponent: float | None = None) -> dict:
    """Check the two induction conditions at every level k = 0..kmax.

    (a) log2(l_k^(2d)) - kappa_k 2^(k+1)        <= -kappa_{k+1} 2^(k+1) - 1
    (b) log2(l_k^(2d)) - f_P(L_k) log2(e)       <= -kappa_{k+1} 2^(k+1) - 1

    Both kappa brackets must pass.  With ``p0_exponent`` (= -log2 of the seed
    bad-event bound) the induction start p0_exponent >= kappa_0 is checked too.
    """
    lo, hi = _kappa_brackets(ladder.l0, ladder.kmax)
    levels = []
    for k in range(ladder.kmax + 1):
        lhs0 = 2 * d * math.log2(ladder.l(k))
        w = 2.0 ** (k + 1)
        slack_a = min(-kb1 * w - 1 - (lhs0 - kb * w) for kb, kb1 in ((lo[k], lo[k + 1]), (hi[k], hi[k + 1])))
        lnL = ladder.log2_L(k) * math.log(2.0)
        fterm = profile.f(lnL) * LOG2E
        slack_b = min(-kb1 * w - 1 - (lhs0 - fterm) for kb1 in (lo[k + 1], hi[k + 1]))
        levels.append({"k": k, "slack_a": slack_a, "pass_a": slack_a >= 0,
                       "slack_b": slack_b, "pass_b": slack_b >= 0,
                       "kappa": (lo[k], hi[k])})
    out = {"levels": levels,
           "pass_a": all(v["pass_a"] for v in levels),
           "pass_b": all(v["pass_b"] for v in levels)}
    out["first_fail_a"] = next((v["k"] for v in levels if not v["pass_a"]), None)
    out["first_fail_b"] = next((v["k"] for v in levels if not v["pass_b"]), None)
    if p0_exponent is not None:
        out["pass_start"] = p0_exponent >= hi[0]
    out["passes"] = out["pass_a"] and out["pass_b"] and out.get("pass_start", True)
    return out


def min_L0_for_condition_b(l0: int, r0: int, theta: int, kmax: int,
                           profile: RegularityProfile, d: int, hi: int = 1 << 40) -> int | None:
    """Smallest L0 for which condition (b) holds at all levels (it is
    monotone in L0); None if even ``hi`` fails."""
    def ok(L0):
        lad = build_ladder(l0, r0, L0, theta, kmax, limit=None)
        return verify_recursion_bound(lad, profile, d)["pass_b"]
    if not ok(hi):
        return None
    lo_, hi_ = 2, hi
    if ok(lo_):
        return lo_
    while hi_ - lo_ > 1:
        mid = (lo_ + hi_) // 2
        if ok(mid):
            hi_ = mid
        else:
            lo_ = mid
    return hi_


def descent_product(ladder: ScaleLadder, s: int, extra_r: int = 0) -> Fraction:
    """prod_{k=1}^{s} (1 + 8 (r_{k-1} + extra_r) / l_{k-1}) as an exact rational."""
    out = Fraction(1)
    for k in range(1, s + 1):
        out *= 1 + Fraction(8 * (ladder.r(k - 1) + extra_r), ladder.l(k - 1))
    return out


# ---------------------------------------------------------------- lattice paths


@dataclass(frozen=True)
class LatticePath:
    """Nearest-neighbour path in the grid L_k Z^d (vertices as rows)."""

    k: int
    L: int
    vertices: np.ndarray

    def __post_init__(self):
        v = np.atleast_2d(np.asarray(self.vertices, np.int64))
        object.__setattr__(self, "vertices", v)
        if np.any(v % self.L):
            raise PreconditionError("path vertices must lie on the grid")
        if len(v) > 1:
            step = np.abs(np.diff(v, axis=0)).sum(axis=1)
            if np.any(step != self.L):
                raise PreconditionError("consecutive path vertices must be grid neighbours")

    @property
    def m(self) -> int:
        return len(self.vertices) - 1


def grid_path(x, y, L: int, k: int = 0) -> LatticePath:
    """Axis-by-axis monotone grid path between grid points x and y."""
    x = np.asarray(x, np.int64)
    y = np.asarray(y, np.int64)
    pts = [x.copy()]
    cur = x.copy()
    for a in range(len(x)):
        step = L if y[a] > cur[a] else -L
        while cur[a] != y[a]:
            cur[a] += step
            pts.append(cur.copy())
    return LatticePath(k, L, np.array(pts))


def _bounding_box(field: np.ndarray):
    pts = np.argwhere(field)
    if len(pts) == 0:
        return None
    return pts.min(axis=0), pts.max(axis=0)


def _block_boxes(goodness: GoodnessField, k: int, x, ladder: ScaleLadder):
    """Bounding boxes (offsets inside the block) of the (k-1)-bad sites of
    each kind inside the block of the level-k point x."""
    f = goodness.level(k - 1)
    l = ladder.l(k - 1)
    base = np.asarray(x, np.int64) // f.L - f.origin
    if np.any(base < 0) or np.any(base + l > f.A_bar.shape):
        raise PreconditionError(f"level {k - 1} field does not cover the block of {list(x)}")
    sl = tuple(slice(int(b), int(b) + l) for b in base)
    boxes = [_bounding_box(f.A_bar[sl]), _bounding_box(f.B_bar[sl])]
    return [b for b in boxes if b is not None]


def _blocks_value(boxes, axis: int, j: int) -> bool:
    return any(lo[axis] <= j <= hi[axis] for lo, hi in boxes)


def descend_path(pi: LatticePath, goodness: GoodnessField, ladder: ScaleLadder) -> LatticePath:
    """Refine a path of k-good vertices into a path of (k-1)-good vertices.

    Per step i the crossing axis alpha_i is the smallest axis orthogonal to
    the step and j_i the smallest offset whose hyperplane misses the bad
    boxes of both blocks; consecutive hyperplanes are joined inside each
    block by a corner route or, when alpha repeats, by a detour at the
    smallest admissible offset k_i along the incoming step axis.
    """
    k = pi.k
    if k < 1:
        raise PreconditionError("descend_path needs a path at level >= 1")
    fk = goodness.level(k)
    for v in pi.vertices:
        if not fk.is_good(v):
            raise PreconditionError(f"vertex {v.tolist()} is not {k}-good")
    l = ladder.l(k - 1)
    Lf = ladder.L(k - 1)
    d = pi.vertices.shape[1]
    bases = pi.vertices // Lf
    boxes = [_block_boxes(goodness, k, v, ladder) for v in pi.vertices]
    m = pi.m
    if m == 0:
        for off in np.ndindex(*(l,) * d):
            if not any(np.all(np.asarray(off) >= lo) and np.all(np.asarray(off) <= hi)
                       for lo, hi in boxes[0]):
                return LatticePath(k - 1, Lf, (bases[0] + off)[None] * Lf)
        raise PathConstructionError("block has no good vertex")
    beta, alpha, jj = [], [], []
    for i in range(m):
        diff = pi.vertices[i + 1] - pi.vertices[i]
        b = int(np.flatnonzero(diff)[0])
        a = 0 if b != 0 else 1
        both = boxes[i] + boxes[i + 1]
        j = next((j for j in range(l) if not _blocks_value(both, a, j)), None)
        if j is None:
            raise PathConstructionError(f"no admissible hyperplane offset at step {i}")
        beta.append(b)
        alpha.append(a)
        jj.append(j)

    out = []

    def walk_to(cur, target):
        # straight moves along one axis, excluding the current point
        cur = cur.copy()
        a = int(np.flatnonzero(target - cur)[0]) if np.any(target != cur) else None
        if a is None:
            return cur
        if np.count_nonzero(target - cur) != 1:
            raise PathConstructionError("internal: non axial move")
        s = 1 if target[a] > cur[a] else -1
        while cur[a] != target[a]:
            cur[a] += s
            out.append(cur.copy())
        return cur

    e = np.eye(d, dtype=np.int64)
    cur = bases[0] + jj[0] * e[alpha[0]]
    out.append(cur.copy())
    for i in range(m):
        if i > 0:
            zi = cur
            yi = bases[i] + jj[i] * e[alpha[i]]
            if alpha[i] != alpha[i - 1]:
                corner = bases[i] + jj[i] * e[alpha[i]] + jj[i - 1] * e[alpha[i - 1]]
                cur = walk_to(cur, corner)
                cur = walk_to(cur, yi)
            else:
                a, b = alpha[i], beta[i - 1]
                j0, j1 = sorted((jj[i - 1], jj[i]))
                kk = None
                for kc in range(l):
                    blocked = False
                    for lo, hi in boxes[i]:
                        if not lo[b] <= kc <= hi[b]:
                            continue
                        if hi[a] < j0 or lo[a] > j1:
                            continue
                        if all(lo[g] <= 0 <= hi[g] for g in range(d) if g not in (a, b)):
                            blocked = True
                            break
                    if not blocked:
                        kk = kc
                        break
                if kk is None:
                    raise PathConstructionError(f"no admissible detour offset in block {i}")
                cur = walk_to(cur, zi + kk * e[b])
                cur = walk_to(cur, yi + kk * e[b])
                cur = walk_to(cur, yi)
        # straight segment through the hyperplane into block i+1
        nxt = bases[i + 1] + jj[i] * e[alpha[i]]
        cur = walk_to(cur, nxt)
    return LatticePath(k - 1, Lf, np.array(out) * Lf)


# ---------------------------------------------------------------- level 0 gluing


def _large_component(cfg: Config, sL0: np.ndarray, z, params: EventParams) -> np.ndarray:
    """Sites (array indices) of the unique large S_L0 component in z + [0, L0)^d."""
    L0 = params.L0
    a = np.asarray(z, np.int64) - cfg.window.lo
    labels, nc = label_subbox(sL0, a, a + L0)
    flat = labels.ravel()
    sizes = np.bincount(flat[flat >= 0], minlength=nc)
    big = np.flatnonzero(sizes >= params.size_floor(cfg.d))
    if len(big) != 1:
        raise PathConstructionError(
            f"block {list(map(int, z))} has {len(big)} large components; expected exactly one")
    idx = np.argwhere(labels == big[0])
    return idx + a


def _bfs_in_box(cfg: Config, lo, hi, src, targets, allowed: np.ndarray | None = None) -> np.ndarray:
    """Shortest occupied path inside the array box [lo, hi) from array index
    ``src`` to any of the array indices ``targets``; returns array indices."""
    from . import _kernels as K

    lo = np.asarray(lo, np.int64)
    hi = np.asarray(hi, np.int64)
    sl = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
    occ = np.ascontiguousarray(cfg.occ[sl])
    if allowed is not None:
        occ = occ & allowed[sl]
    shape = np.array(occ.shape, np.int64)
    tmask = np.zeros(occ.shape, bool)
    t = np.asarray(targets, np.int64) - lo
    inside = np.all((t >= 0) & (t < shape), axis=1)
    tmask[tuple(t[inside].T)] = True
    s = np.asarray(src, np.int64) - lo
    if np.any(s < 0) or np.any(s >= shape):
        return np.empty((0, len(lo)), np.int64)
    path = K.bfs_to_set(occ.ravel(), shape, int(np.ravel_multi_index(tuple(s), occ.shape)),
                        tmask.ravel())
    if len(path) == 0:
        return np.empty((0, len(lo)), np.int64)
    return np.stack(np.unravel_index(path, occ.shape), axis=1) + lo


def glue_level0(pi0: LatticePath, cfg: Config, params: EventParams, start=None, end=None,
                sL0: np.ndarray | None = None) -> np.ndarray:
    """Site path in S through the large components of consecutive 0-good
    blocks.  ``start``/``end`` (lattice points in the first/last large
    component) default to the first site of the component in row-major order.
    Returns lattice coordinates of the path, one site per row.
    """
    if pi0.k != 0 or pi0.L != params.L0:
        raise PreconditionError("glue_level0 needs a level-0 path")
    if sL0 is None:
        sL0 = restrict_S_r(cfg, params.L0)
    L0 = params.L0
    lo_w = cfg.window.lo
    comps = [_large_component(cfg, sL0, z, params) for z in pi0.vertices]

    def pick(pt, comp):
        if pt is None:
            return comp[0]
        p = np.asarray(pt, np.int64) - lo_w
        if not np.any(np.all(comp == p, axis=1)):
            raise PreconditionError(f"{list(pt)} is not in the large component of its block")
        return p

    cur = pick(start, comps[0])
    path = [cur[None]]
    for i in range(1, len(comps)):
        box_lo = np.minimum(pi0.vertices[i - 1], pi0.vertices[i]) - lo_w
        seg = _bfs_in_box(cfg, box_lo, box_lo + 2 * L0, cur, comps[i])
        if len(seg) == 0:
            raise PathConstructionError(f"large components of steps {i - 1},{i} not connected")
        path.append(seg[1:])
        cur = seg[-1]
    tgt = pick(end, comps[-1])
    z_lo = pi0.vertices[-1] - lo_w
    seg = _bfs_in_box(cfg, z_lo, z_lo + L0, cur, tgt[None])
    if len(seg) == 0:
        raise PathConstructionError("end point not reachable inside its block")
    path.append(seg[1:])
    return np.concatenate(path) + lo_w


# ---------------------------------------------------------------- short paths


def required_radius(R: int, ladder: ScaleLadder, d: int) -> int:
    """Sup-norm radius a centred window needs for construct_short_path."""
    s = select_top_scale(ladder, R, d)
    Ls = ladder.L(s)
    return 2 * R + 4 * Ls + 2 * ladder.L0 + 1


@dataclass
class ShortPathResult:
    success: bool
    path: np.ndarray | None
    certificate: dict
    failure: dict | None = None

    @property
    def length(self) -> int | None:
        return None if self.path is None else len(self.path) - 1


def check_event_H(cfg: Config, R: int, ladder: ScaleLadder, params: EventParams,
                  goodness: GoodnessField | None = None, sRl=None):
    """Evaluate both clauses of the event H; returns (s, goodness, failures)."""
    d = cfg.d
    s = select_top_scale(ladder, R, d)
    Ls = ladder.L(s)
    gmin = -(2 * R // Ls)
    gmax = 2 * R // Ls
    a = np.full(d, gmin * Ls, np.int64)
    b = np.full(d, (gmax + 1) * Ls, np.int64)
    if not cfg.window.contains_box(np.minimum(a - params.L0, a - Ls), b + 2 * Ls):
        raise PreconditionError("window does not cover B(0, 2R) with the required margin")
    if goodness is None:
        goodness = goodness_field(cfg, ladder, params, kmax=s, region=(a, b))
    failures = []
    lev = goodness.level(s)
    for g in np.ndindex(*lev.A_bar.shape):
        if lev.A_bar[g] or lev.B_bar[g]:
            z = (lev.origin + g) * Ls
            failures.append({"clause": "a", "block": z.tolist(),
                             "events": [n for n, f in (("A", lev.A_bar[g]), ("B", lev.B_bar[g])) if f]})
    lab = label_components(cfg)
    sLs = restrict_S_r(cfg, Ls, lab)
    for g in np.ndindex(*(gmax - gmin + 1,) * d):
        z = (np.array(g) + gmin) * Ls
        if not local_uniqueness(cfg, z, Ls, sLs):
            failures.append({"clause": "b", "block": z.tolist()})
    return s, goodness, failures


def construct_short_path(cfg: Config, x, y, R: int, ladder: ScaleLadder,
                         params: EventParams) -> ShortPathResult:
    """Explicit path from x to y in S whose length certifies the chemical
    distance bound on the event H.

    Pre: x, y in S_R with sup norm <= R.  On H failure returns an
    unsuccessful result naming the failed clause(s) and block(s).
    """
    d = cfg.d
    x = np.asarray(x, np.int64)
    y = np.asarray(y, np.int64)
    if max(np.abs(x).max(), np.abs(y).max()) > R:
        raise PreconditionError("x and y must lie in B(0, R)")
    lab = label_components(cfg)
    sR = restrict_S_r(cfg, R, lab)
    for p in (x, y):
        if not cfg.window.contains(p) or not sR[tuple(cfg.window.to_index(p))]:
            raise PreconditionError(f"{p.tolist()} is not in S_R")
    s, goodness, failures = check_event_H(cfg, R, ladder, params)
    Ls = ladder.L(s)
    cert = {"R": int(R), "s": int(s), "L_s": int(Ls), "L0": int(ladder.L0)}
    if failures:
        cert["H"] = "fail"
        return ShortPathResult(False, None, cert,
                               {"clauses": sorted({f["clause"] for f in failures}),
                                "blocks": failures})
    cert["H"] = "ok"
    metric_cfg = cfg
    sLs = restrict_S_r(cfg, Ls, lab)
    wlo = cfg.window.lo

    def connect(p, q, z):
        """BFS path from p to q inside z + [-L_s, 3L_s)^d."""
        lo = np.asarray(z) - Ls - wlo
        seg = _bfs_in_box(metric_cfg, lo, lo + 4 * Ls, p - wlo, (q - wlo)[None])
        if len(seg) == 0:
            raise PathConstructionError(f"no connection inside the box of {list(z)}")
        return seg + wlo

    zx = (x // Ls) * Ls
    zy = (y // Ls) * Ls
    zc = np.minimum(zx, zy)
    if np.all(np.maximum(x, y) < zc + 2 * Ls):
        path = connect(x, y, zc)
        cert.update({"direct": True, "level_lengths": {}, "final_length": len(path) - 1,
                     "bound": int(2 * (4 * Ls) ** d)})
        return ShortPathResult(True, path, cert)

    pi = grid_path(zx, zy, Ls, s)
    lengths = {s: pi.m}
    for k in range(s, 0, -1):
        pi = descend_path(pi, goodness, ladder)
        lengths[k - 1] = pi.m
    sL0 = restrict_S_r(cfg, ladder.L0, lab)
    comp0 = _large_component(cfg, sL0, pi.vertices[0], params) + wlo
    compm = _large_component(cfg, sL0, pi.vertices[-1], params) + wlo
    xs = closest_in_set(x, comp0)
    ys = closest_in_set(y, compm)
    glue = glue_level0(pi, cfg, params, xs, ys, sL0)
    head = connect(x, xs, zx)
    tail = connect(ys, y, zy)
    path = np.concatenate([head, glue[1:], tail[1:]])
    N1 = lengths[s]
    prod = descent_product(ladder, s)
    prod_c = descent_product(ladder, s, extra_r=1)
    n2_bound = prod * Fraction(Ls, ladder.L0) * N1
    n2c_bound = prod_c * Fraction(Ls, ladder.L0) * N1
    block_cost = (2 * ladder.L0) ** d
    ends = 2 * (4 * Ls) ** d
    cert.update({
        "direct": False,
        "level_lengths": {int(k): int(v) for k, v in lengths.items()},
        "N_prime": int(N1),
        "N_prime_bound": int(d * math.ceil((4 * R + 1) / Ls)),
        "product": str(prod),
        "product_conservative": str(prod_c),
        "N_double_prime_bound": float(n2_bound),
        "N_double_prime_bound_conservative": float(n2c_bound),
        "glue_length": int(len(glue) - 1),
        "connect_lengths": [int(len(head) - 1), int(len(tail) - 1)],
        "final_length": int(len(path) - 1),
        "bound": float(block_cost * n2c_bound + ends),
        "bound_over_R": float((block_cost * n2c_bound + ends) / R),
        "sR_connected": bool(sLs[tuple(x - wlo)] and sLs[tuple(y - wlo)]),
    })
    return ShortPathResult(True, path, cert)


def check_site_path(cfg: Config, path: np.ndarray, x=None, y=None) -> list[str]:
    """Replay a site path against the configuration; returns problems found."""
    problems = []
    path = np.asarray(path, np.int64)
    if len(path) == 0:
        return ["empty path"]
    for p in path:
        if not cfg.occupied(p):
            problems.append(f"site {p.tolist()} not occupied")
            break
    if len(path) > 1 and np.any(np.abs(np.diff(path, axis=0)).sum(axis=1) != 1):
        problems.append("consecutive sites not adjacent")
    if x is not None and not np.array_equal(path[0], x):
        problems.append("path does not start at x")
    if y is not None and not np.array_equal(path[-1], y):
        problems.append("path does not end at y")
    return problems


def centred_window(radius: int, d: int) -> Window:
    return Window.centered(radius, d)
