"""Seed events, cascade events and the multi-scale goodness field."""
from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .clusters import label_components, label_subbox, restrict_S_r
from .lattice import Config, PreconditionError


@dataclass(frozen=True)
class EventParams:
    """Scale L0 of the seed events and the frozen density estimate eta."""

    L0: int
    eta: float

    def __post_init__(self):
        if self.L0 < 2:
            raise PreconditionError("L0 must be at least 2")
        if not 0.0 < self.eta <= 1.0:
            raise PreconditionError("eta must lie in (0, 1]")

    def size_floor(self, d: int) -> float:
        return 0.75 * self.eta * self.L0 ** d

    def size_ceiling(self, d: int) -> float:
        return 1.25 * self.eta * self.L0 ** d


# ---------------------------------------------------------------- level 0


def _check_cover(cfg: Config, lo, hi):
    if cfg.window.is_torus:
        raise PreconditionError("goodness is evaluated on box windows")
    if not cfg.window.contains_box(lo, hi):
        raise PreconditionError(
            f"window does not cover the measurability box [{list(lo)}, {list(hi)})")


def level0_fields(cfg: Config, params: EventParams, g_lo, g_n, sL0: np.ndarray | None = None):
    """Complements of the seed events on the L0-grid points L0 (g_lo + [0, g_n)).

    Returns (A_bar, B_bar) boolean arrays of shape g_n.
    """
    d = cfg.d
    L0 = params.L0
    g_lo = np.asarray(g_lo, np.int64)
    g_n = tuple(int(v) for v in g_n)
    x_lo = g_lo * L0
    x_hi = (g_lo + np.array(g_n)) * L0
    _check_cover(cfg, x_lo - L0, x_hi + 2 * L0)
    if sL0 is None:
        sL0 = restrict_S_r(cfg, L0)
    base = x_lo - cfg.window.lo
    A_bar, B_bar = K.seed_fields(np.ascontiguousarray(cfg.occ).ravel(),
                                 np.ascontiguousarray(sL0).ravel(),
                                 np.array(cfg.window.sides, np.int64), L0, base,
                                 np.array(g_n, np.int64), params.size_floor(d),
                                 params.size_ceiling(d))
    return A_bar.reshape(g_n), B_bar.reshape(g_n)


def event_A(cfg: Config, x, params: EventParams) -> bool:
    """Seed event A at the L0-grid point x."""
    g = _grid_index(x, params.L0)
    A_bar, _ = level0_fields(cfg, params, g, (1,) * cfg.d)
    return not bool(A_bar.ravel()[0])


def event_B(cfg: Config, x, params: EventParams) -> bool:
    """Seed event B at the L0-grid point x."""
    g = _grid_index(x, params.L0)
    _, B_bar = level0_fields(cfg, params, g, (1,) * cfg.d)
    return not bool(B_bar.ravel()[0])


def _grid_index(x, L):
    x = np.asarray(x, np.int64)
    if np.any(x % L):
        raise PreconditionError(f"{x.tolist()} is not a point of the grid L Z^d with L={L}")
    return x // L


# ---------------------------------------------------------------- scale-R events


def event_crossing(cfg: Config, R: int, labeling=None) -> bool:
    """Some site of B(0, R) lies in a component of l1 diameter >= R."""
    d = cfg.d
    _check_cover(cfg, np.full(d, -R), np.full(d, R + 1))
    sR = restrict_S_r(cfg, R, labeling)
    a = -R - cfg.window.lo
    return bool(sR[tuple(slice(int(v), int(v) + 2 * R + 1) for v in a)].any())


def event_local_uniqueness(cfg: Config, R: int, labeling=None) -> bool:
    """All sites of S_{R/10} in B(0, R) are connected inside S and B(0, 2R)."""
    d = cfg.d
    _check_cover(cfg, np.full(d, -2 * R), np.full(d, 2 * R + 1))
    s = restrict_S_r(cfg, R / 10, labeling)
    a = -2 * R - cfg.window.lo
    labels, _ = label_subbox(cfg.occ, a, a + 4 * R + 1)
    inner = tuple(slice(R, 3 * R + 1) for _ in range(d))
    big = s[tuple(slice(int(v), int(v) + 4 * R + 1) for v in a)][inner]
    return len(np.unique(labels[inner][big])) <= 1


# ---------------------------------------------------------------- cascades


def cascade(bad: np.ndarray, origin, l: int, r: int):
    """Cascade of a level field onto the next level.

    ``bad`` is indexed by grid points origin + [0, shape) of the finer grid.
    A coarse point is flagged iff its block of l^d fine points contains two
    flagged points at sup distance > r (in fine-grid units).  Returns the
    coarse field and its origin; only blocks fully inside ``bad`` appear.
    """
    d = bad.ndim
    origin = np.asarray(origin, np.int64)
    lo = -(-origin // l)
    hi = (origin + np.array(bad.shape)) // l
    n = np.maximum(hi - lo, 0)
    if np.any(n == 0):
        return np.zeros(tuple(n), bool), lo
    start = lo * l - origin
    sl = bad[tuple(slice(int(s), int(s + m * l)) for s, m in zip(start, n))]
    shape = []
    for m in n:
        shape += [int(m), l]
    blk = sl.reshape(shape).transpose(list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2)))
    inner = tuple(range(d, 2 * d))
    out = np.zeros(tuple(n), bool)
    for a in range(d):
        cshape = [1] * (2 * d)
        cshape[d + a] = l
        coord = np.arange(l).reshape(cshape)
        mx = np.where(blk, coord, -1).max(axis=inner)
        mn = np.where(blk, coord, l).min(axis=inner)
        out |= (mx - mn) > r
    return out, lo


def crossing_event(field: np.ndarray, r: int) -> bool:
    """True iff the flagged points of one block have sup spread > r."""
    pts = np.argwhere(field)
    if len(pts) < 2:
        return False
    return bool((pts.max(axis=0) - pts.min(axis=0)).max() > r)


@dataclass(frozen=True)
class LevelField:
    """Bad-event indicators on the grid points L_k (origin + [0, shape))."""

    k: int
    L: int
    origin: np.ndarray
    A_bar: np.ndarray
    B_bar: np.ndarray

    @property
    def bad(self) -> np.ndarray:
        return self.A_bar | self.B_bar

    @property
    def good(self) -> np.ndarray:
        return ~self.bad

    def index(self, x):
        g = _grid_index(x, self.L) - self.origin
        if np.any(g < 0) or np.any(g >= self.A_bar.shape):
            return None
        return tuple(int(v) for v in g)

    def covers(self, x) -> bool:
        return self.index(x) is not None

    def is_good(self, x) -> bool:
        i = self.index(x)
        if i is None:
            raise PreconditionError(f"level {self.k} field does not cover {np.asarray(x).tolist()}")
        return bool(not self.A_bar[i] and not self.B_bar[i])


class GoodnessField:
    """Level fields 0..kmax built by cascading the seed fields upward."""

    def __init__(self, levels: list[LevelField]):
        self.levels = levels

    @classmethod
    def from_seed(cls, A_bar, B_bar, origin, ladder, base_level: int = 0,
                  kmax: int | None = None) -> "GoodnessField":
        kmax = ladder.kmax if kmax is None else kmax
        origin = np.asarray(origin, np.int64)
        lv = [LevelField(base_level, ladder.L(base_level), origin,
                         np.asarray(A_bar, bool), np.asarray(B_bar, bool))]
        for k in range(base_level + 1, kmax + 1):
            prev = lv[-1]
            l, r = ladder.l(k - 1), ladder.r(k - 1)
            A, o = cascade(prev.A_bar, prev.origin, l, r)
            B, _ = cascade(prev.B_bar, prev.origin, l, r)
            lv.append(LevelField(k, ladder.L(k), o, A, B))
        return cls(lv)

    @property
    def kmax(self) -> int:
        return self.levels[-1].k

    def level(self, k: int) -> LevelField:
        for f in self.levels:
            if f.k == k:
                return f
        raise PreconditionError(f"no level {k} in goodness field")

    def good(self, k: int) -> np.ndarray:
        return self.level(k).good

    def dump_rle(self) -> str:
        """Stable text dump: one header line and one run-length line per field."""
        out = io.StringIO()
        for f in self.levels:
            for name, arr in (("A_bar", f.A_bar), ("B_bar", f.B_bar)):
                out.write(f"level {f.k} L {f.L} origin {','.join(map(str, f.origin.tolist()))} "
                          f"shape {','.join(map(str, arr.shape))} {name}\n")
                out.write(_rle(arr.ravel()) + "\n")
        return out.getvalue()


def _rle(bits: np.ndarray) -> str:
    if bits.size == 0:
        return ""
    b = bits.astype(np.int8)
    change = np.flatnonzero(np.diff(b)) + 1
    starts = np.concatenate([[0], change])
    ends = np.concatenate([change, [b.size]])
    return " ".join(f"{int(b[s])}:{int(e - s)}" for s, e in zip(starts, ends))


def default_region(cfg: Config, L0: int, Lk: int):
    """Largest L_k-aligned box [a, b) whose seed events the window determines."""
    lo = cfg.window.lo + L0
    hi = cfg.window.hi - 2 * L0
    a = -(-lo // Lk) * Lk
    b = (hi // Lk) * Lk
    return a, b


def goodness_field(cfg: Config, ladder, params: EventParams, kmax: int | None = None,
                   region=None) -> GoodnessField:
    """Goodness at levels 0..kmax on an L_kmax-aligned region [a, b).

    The window must cover [a - L0, b + 2 L0) so that every seed event in the
    region is determined by the configuration.
    """
    if params.L0 != ladder.L(0):
        raise PreconditionError("EventParams.L0 differs from the ladder's L0")
    kmax = ladder.kmax if kmax is None else kmax
    Lk = ladder.L(kmax)
    if region is None:
        a, b = default_region(cfg, params.L0, Lk)
    else:
        a, b = (np.asarray(v, np.int64) for v in region)
        if np.any(a % Lk) or np.any(b % Lk):
            raise PreconditionError(f"region must be aligned to L_kmax = {Lk}")
    if np.any(b <= a):
        raise PreconditionError(f"L_kmax = {Lk} exceeds the usable window")
    L0 = params.L0
    lab = label_components(cfg)
    sL0 = restrict_S_r(cfg, L0, lab)
    A, B = level0_fields(cfg, params, a // L0, (b - a) // L0, sL0)
    return GoodnessField.from_seed(A, B, a // L0, ladder, 0, kmax)


def local_uniqueness(cfg: Config, z, L: int, sL: np.ndarray | None = None) -> bool:
    """S_L in z + [0, 2L)^d lies in one component of S within z + [-L, 3L)^d."""
    z = np.asarray(z, np.int64)
    _check_cover(cfg, z - L, z + 3 * L)
    if sL is None:
        sL = restrict_S_r(cfg, L)
    a = z - L - cfg.window.lo
    inner = sL[tuple(slice(int(v + L), int(v + 3 * L)) for v in a)]
    if not inner.any():
        return True
    labels, _ = label_subbox(cfg.occ, a, a + 4 * L)
    sub = labels[tuple(slice(L, 3 * L) for _ in range(cfg.d))]
    return len(np.unique(sub[inner])) == 1
