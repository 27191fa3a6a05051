"""Connected components, chemical distances and the S_infinity proxy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels as K
from .lattice import Config, PreconditionError, Window, sign_vectors

PROXY_POLICIES = ("diameter_span", "largest")


# ---------------------------------------------------------------- labelling of Z^d


def ell_key(x) -> tuple:
    """Sort key of the reference labelling: sup norm first, then lexicographic."""
    x = tuple(int(v) for v in x)
    return (max((abs(v) for v in x), default=0),) + x


def _count_lex_smaller_in_cube(x, a: int) -> int:
    """Number of y in [-a, a]^d with y < x lexicographically."""
    d = len(x)
    side = 2 * a + 1
    total = 0
    for i in range(d):
        hi = min(x[i] - 1, a)
        if hi >= -a:
            total += (hi + a + 1) * side ** (d - i - 1)
        if abs(x[i]) > a:
            break
    return total


def ell(x) -> int:
    """The labelling Z^d -> N: sites ordered by sup norm, then
    lexicographically within each sup-norm shell.  ell(0) = 0."""
    x = tuple(int(v) for v in x)
    d = len(x)
    m = max((abs(v) for v in x), default=0)
    if m == 0:
        return 0
    inner = (2 * m - 1) ** d
    rank = _count_lex_smaller_in_cube(x, m) - _count_lex_smaller_in_cube(x, m - 1)
    return inner + rank


def closest_in_set(x, V) -> np.ndarray:
    """Phi(x, V): the site y of V minimising ell(y - x)."""
    V = np.asarray(V, dtype=np.int64)
    if len(V) == 0:
        raise PreconditionError("closest_in_set needs a non-empty set")
    off = V - np.asarray(x, dtype=np.int64)
    sup = np.abs(off).max(axis=1)
    cand = np.flatnonzero(sup == sup.min())
    if len(cand) == 1:
        return V[cand[0]].copy()
    sub = off[cand]
    order = np.lexsort(sub.T[::-1])
    return V[cand[order[0]]].copy()


# ---------------------------------------------------------------- components


@dataclass(frozen=True)
class ClusterLabeling:
    """Component ids per site (-1 on empty sites), sizes and l1 diameters.

    On the torus the diameter is the sum over axes of the circular extent of
    the component capped at floor(N/2), an upper bound on the torus l1
    diameter.
    """

    window: Window
    labels: np.ndarray
    sizes: np.ndarray
    diameters: np.ndarray

    @property
    def n_components(self) -> int:
        return len(self.sizes)

    def label_of(self, x) -> int:
        return int(self.labels[tuple(self.window.to_index(x))])

    def component_sites(self, c: int) -> np.ndarray:
        return self.window.coords(np.flatnonzero(self.labels.ravel() == c))

    def largest(self) -> int:
        """Id of the largest-volume component (ties: smallest id)."""
        if self.n_components == 0:
            raise PreconditionError("no occupied sites")
        return int(np.argmax(self.sizes))


def _label_array(occ: np.ndarray, wrap: bool):
    return K.uf_label(np.ascontiguousarray(occ).ravel(), np.array(occ.shape, np.int64), wrap)


def label_components(cfg: Config) -> ClusterLabeling:
    w = cfg.window
    shape = np.array(w.sides, np.int64)
    labels, nc = _label_array(cfg.occ, w.is_torus)
    sizes = np.bincount(labels[labels >= 0], minlength=nc).astype(np.int64)
    if w.is_torus:
        pres = K.component_axis_presence(labels, nc, shape)
        diam = np.zeros(nc, np.int64)
        for a, n in enumerate(w.sides):
            p = pres[:, a, :n]
            diam += np.minimum(_circular_extent(p), n // 2)
    elif nc:
        signs = sign_vectors(w.d)
        mx, mn = K.component_projections(labels, nc, shape, signs)
        diam = (mx - mn).max(axis=1)
    else:
        diam = np.zeros(0, np.int64)
    return ClusterLabeling(w, labels.reshape(w.sides), sizes, diam)


def _circular_extent(pres: np.ndarray) -> np.ndarray:
    """Coordinate extent of the shortest arc covering each row's True set."""
    n = pres.shape[1]
    empty = ~np.concatenate([pres, pres], axis=1)
    best = np.zeros(len(pres), np.int64)
    run = np.zeros(len(pres), np.int64)
    for t in range(2 * n):
        run = np.where(empty[:, t], run + 1, 0)
        best = np.maximum(best, np.minimum(run, n))
    return n - best - 1


def restrict_S_r(cfg: Config, r: float, labeling: ClusterLabeling | None = None) -> np.ndarray:
    """Indicator of S_r: occupied sites whose component has l1 diameter >= r."""
    lab = labeling or label_components(cfg)
    keep = np.concatenate([lab.diameters >= r, [False]])
    return keep[lab.labels]


def s_infty_proxy(cfg: Config, policy: str = "diameter_span",
                  labeling: ClusterLabeling | None = None) -> np.ndarray:
    """Indicator of the window proxy for the infinite cluster.

    ``diameter_span``: union of components whose l1 diameter reaches the
    smallest window side.  ``largest``: the unique component of maximal
    diameter (ties: larger volume, then smaller labelling of its best site).
    """
    if policy not in PROXY_POLICIES:
        raise PreconditionError(f"unknown proxy policy {policy!r}")
    lab = labeling or label_components(cfg)
    if lab.n_components == 0:
        return np.zeros(cfg.window.sides, bool)
    if policy == "diameter_span":
        return restrict_S_r(cfg, min(cfg.window.sides), lab)
    dm = lab.diameters.max()
    cand = np.flatnonzero(lab.diameters == dm)
    if len(cand) > 1:
        sz = lab.sizes[cand]
        cand = cand[sz == sz.max()]
    if len(cand) > 1:
        origin = np.zeros(cfg.d, np.int64)
        cand = [min(cand, key=lambda c: ell(closest_in_set(origin, lab.component_sites(c))))]
    return lab.labels == int(cand[0])


# ---------------------------------------------------------------- chemical distance


class ChemicalMetric:
    """Graph distance on the occupied sites of a configuration.

    Holds preallocated BFS buffers that are reset after every query.
    """

    def __init__(self, cfg: Config, occ: np.ndarray | None = None):
        self.cfg = cfg
        self.window = cfg.window
        occ = cfg.occ if occ is None else occ
        self._occ = np.ascontiguousarray(occ).ravel()
        self._shape = np.array(self.window.sides, np.int64)
        n = self._occ.size
        self._dist = np.full(n, -1, np.int64)
        self._queue = np.empty(n, np.int64)
        self._parent = np.empty(n, np.int64)

    def _check(self, x) -> int:
        if not self.window.is_torus and not self.window.contains(x):
            raise PreconditionError(f"site {tuple(x)} outside window")
        i = self.window.flat_index(x)
        if not self._occ[i]:
            raise PreconditionError(f"site {tuple(np.asarray(x).tolist())} is not occupied")
        return i

    def _run(self, src, max_depth=-1, target=-1):
        cnt = K.bfs(self._occ, self._shape, self.window.is_torus, src, max_depth, target,
                    self._dist, self._queue, self._parent)
        return cnt

    def _reset(self, cnt):
        self._dist[self._queue[:cnt]] = -1

    def distance(self, x, y) -> float:
        """rho(x, y); inf if x and y are not connected."""
        i, j = self._check(x), self._check(y)
        cnt = self._run(i, -1, j)
        dv = self._dist[j]
        self._reset(cnt)
        return float(dv) if dv >= 0 else float("inf")

    def distances_from(self, x, max_depth: int = -1) -> np.ndarray:
        """Distance field from x (-1 where unreached), shaped like the window."""
        i = self._check(x)
        cnt = self._run(i, max_depth)
        out = self._dist.copy()
        self._reset(cnt)
        return out.reshape(self.window.sides)

    def ball(self, x, r: float) -> np.ndarray:
        i = self._check(x)
        cnt = self._run(i, int(np.floor(r)))
        sites = self.window.coords(np.sort(self._queue[:cnt]))
        self._reset(cnt)
        return sites

    def path(self, x, y) -> np.ndarray | None:
        """A shortest occupied path from x to y (sites as rows), or None."""
        i, j = self._check(x), self._check(y)
        cnt = self._run(i, -1, j)
        if self._dist[j] < 0:
            self._reset(cnt)
            return None
        seq = [j]
        while seq[-1] != i:
            seq.append(int(self._parent[seq[-1]]))
        self._reset(cnt)
        return self.window.coords(np.array(seq[::-1]))


def chemical_distance(cfg: Config, x, y) -> float:
    return ChemicalMetric(cfg).distance(x, y)


def chemical_ball(cfg: Config, x, r: float) -> np.ndarray:
    return ChemicalMetric(cfg).ball(x, r)


def pseudo_distance(cfg: Config, proxy: np.ndarray, x, y,
                    metric: ChemicalMetric | None = None) -> float:
    """rho~(x, y) = rho(Phi(x, S), Phi(y, S)) with S the proxy set."""
    sites = cfg.window.coords(np.flatnonzero(proxy.ravel()))
    if len(sites) == 0:
        raise PreconditionError("empty proxy set")
    px, py = closest_in_set(x, sites), closest_in_set(y, sites)
    m = metric or ChemicalMetric(cfg)
    return m.distance(px, py)


def double_sweep_diameter(cfg: Config, start) -> tuple[int, np.ndarray, np.ndarray]:
    """Lower bound on the chemical diameter of the component of ``start``:
    BFS from start, then BFS from a farthest site.  Returns (bound, a, b)."""
    m = ChemicalMetric(cfg)
    d1 = m.distances_from(start).ravel()
    a = int(np.argmax(d1))
    pa = cfg.window.coords(a)
    d2 = m.distances_from(pa).ravel()
    b = int(np.argmax(d2))
    return int(d2[b]), pa, cfg.window.coords(b)


def label_subbox(occ: np.ndarray, lo, hi):
    """Label the occupied sites of the array box [lo, hi) (array indices) with
    connectivity inside the box.  Returns (labels shaped like the box, count)."""
    sl = tuple(slice(int(a), int(b)) for a, b in zip(lo, hi))
    sub = np.ascontiguousarray(occ[sl])
    labels, nc = _label_array(sub, False)
    return labels.reshape(sub.shape), nc
