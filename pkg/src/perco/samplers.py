"""Samplers for the percolation models on finite windows."""
from __future__ import annotations

import functools
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import _kernels as K
from . import rng as R
from .lattice import Config, PreconditionError, Window

FAMILIES = ("bernoulli", "gff_level", "interlacement", "vacant", "torus_vacant")
MAX_GREEN_SITES = 20000
MAX_WALK_STEPS = 1 << 62


class SamplerError(RuntimeError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    """A model family and its parameter.

    ``param`` is p for bernoulli, the level h for gff_level and the intensity
    u for the interlacement families.  Occupied sites are: open sites, the
    excursion set {phi >= h}, the interlacement trace, or its complement.
    """

    family: str
    d: int
    param: float
    pad: int | None = None
    escape_radius: int | None = None
    cap_trials: int = 2000
    calibration_seed: int = 0
    extra: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise PreconditionError(f"unknown model family {self.family!r}")
        if self.d < 1:
            raise PreconditionError("dimension must be positive")
        if self.family == "bernoulli" and not 0.0 <= self.param <= 1.0:
            raise PreconditionError(f"p must lie in [0, 1], got {self.param}")
        if self.family in ("interlacement", "vacant", "torus_vacant") and self.param < 0:
            raise PreconditionError(f"u must be non-negative, got {self.param}")
        if self.family in ("gff_level", "interlacement", "vacant") and self.d < 3:
            raise PreconditionError(f"{self.family} needs d >= 3")

    def with_param(self, value: float) -> "ModelSpec":
        return replace(self, param=float(value))

    @property
    def increasing(self) -> bool:
        """True if occupied sets grow with ``param``."""
        return self.family in ("bernoulli", "interlacement")

    def tag(self) -> str:
        name = {"bernoulli": "p", "gff_level": "h"}.get(self.family, "u")
        return f"{self.family}(d={self.d},{name}={self.param:g})"


# ---------------------------------------------------------------- Bernoulli


def sample_bernoulli(p: float, window: Window, seed: int) -> Config:
    """Each site open independently with probability p.  Site i (row-major)
    uses uniform i of the site stream, so sweeps in p are monotone coupled."""
    if not 0.0 <= p <= 1.0:
        raise PreconditionError(f"p must lie in [0, 1], got {p}")
    u = R.site_uniforms(seed, window.size)
    occ = (u < p).reshape(window.sides)
    return Config(window, occ, f"bernoulli(d={window.d},p={p:g})", seed)


# ---------------------------------------------------------------- Gaussian free field


@dataclass(frozen=True)
class GreenMatrix:
    """Covariance of the field on the window sites: the Green function of the
    walk killed outside the window enlarged by ``pad`` on every side."""

    window: Window
    pad: int
    method: str
    G: np.ndarray

    @functools.cached_property
    def chol(self) -> np.ndarray:
        try:
            return np.linalg.cholesky(self.G)
        except np.linalg.LinAlgError as exc:
            raise SamplerError(f"Cholesky factorization failed: {exc}") from None


def _green_solve(sides, pad):
    d = len(sides)
    dom = [s + 2 * pad for s in sides]
    M = int(np.prod(dom))
    eye = [sp.identity(n, format="csr") for n in dom]
    adj = sp.csr_matrix((M, M))
    for a, n in enumerate(dom):
        path = sp.diags([np.ones(n - 1), np.ones(n - 1)], [-1, 1], format="csr")
        term = None
        for b in range(d):
            f = path if b == a else eye[b]
            term = f if term is None else sp.kron(term, f, format="csr")
        adj = adj + term
    A = (sp.identity(M, format="csc") - adj / (2 * d)).tocsc()
    idx = np.stack(np.meshgrid(*[np.arange(pad, pad + s) for s in sides], indexing="ij"), -1)
    cols = np.ravel_multi_index(tuple(idx.reshape(-1, d).T), dom)
    rhs = np.zeros((M, len(cols)))
    rhs[cols, np.arange(len(cols))] = 1.0
    X = spla.splu(A).solve(rhs)
    return X[cols]


def _green_spectral(sides, pad):
    """Exact Dirichlet Green function in the product sine eigenbasis."""
    d = len(sides)
    dom = [s + 2 * pad for s in sides]
    U, cosv = [], []
    for s, n in zip(sides, dom):
        k = np.arange(1, n + 1)
        i = np.arange(pad + 1, pad + s + 1)
        U.append(np.sqrt(2.0 / (n + 1)) * np.sin(np.pi * np.outer(i, k) / (n + 1)))
        cosv.append(np.cos(np.pi * k / (n + 1)))
    lam = functools.reduce(np.add.outer, cosv) / d
    T = 1.0 / (1.0 - lam)  # shape dom
    # contract the last spectral axis repeatedly; result axes (x_a, y_a) pairs
    for a in range(d - 1, -1, -1):
        V = np.einsum("xk,yk->kxy", U[a], U[a])
        T = np.tensordot(T, V, axes=([a], [0]))
        # tensordot appends (x_a, y_a) at the end; axes before a remain in front
    # now T has axes (x_{d-1}, y_{d-1}, ..., x_0, y_0)
    order = []
    for a in range(d):
        order.append(2 * (d - 1 - a))
    for a in range(d):
        order.append(2 * (d - 1 - a) + 1)
    T = np.transpose(T, order)
    n = int(np.prod(sides))
    return T.reshape(n, n)


def build_green_matrix(window: Window, pad: int, method: str = "spectral") -> GreenMatrix:
    """Green function matrix on the window sites.

    ``solve`` factorizes the killed generator with a sparse LU; ``spectral``
    sums the sine eigenbasis of the enlarged box.  Both are exact.
    """
    if window.is_torus:
        raise PreconditionError("the field is defined on box windows")
    if pad < 0:
        raise PreconditionError("pad must be non-negative")
    if window.size > MAX_GREEN_SITES:
        raise PreconditionError(
            f"window has {window.size} sites, above the dense limit {MAX_GREEN_SITES}")
    if method == "solve":
        G = _green_solve(window.sides, pad)
    elif method == "spectral":
        G = _green_spectral(window.sides, pad)
    else:
        raise PreconditionError(f"unknown method {method!r}")
    G = 0.5 * (G + G.T)
    return GreenMatrix(window, pad, method, G)


@functools.lru_cache(maxsize=8)
def _cached_green(window: Window, pad: int) -> GreenMatrix:
    return build_green_matrix(window, pad)


def default_pad(window: Window) -> int:
    return 2 * max((s - 1) // 2 for s in window.sides)


def sample_gff(window: Window, pad: int | None, seed: int) -> np.ndarray:
    """One draw of the field on the window (shaped like the window)."""
    pad = default_pad(window) if pad is None else pad
    gm = _cached_green(window, pad)
    z = R.generator(seed, R.NORMALS).standard_normal(window.size)
    return (gm.chol @ z).reshape(window.sides)


def sample_gff_batch(window: Window, pad: int | None, seeds) -> np.ndarray:
    """Fields for many seeds with one matrix product.  Each column uses the
    same normal stream as ``sample_gff``; values agree up to BLAS rounding."""
    pad = default_pad(window) if pad is None else pad
    gm = _cached_green(window, pad)
    Z = np.stack([R.generator(s, R.NORMALS).standard_normal(window.size) for s in seeds], 1)
    return (gm.chol @ Z).T.reshape((len(seeds),) + window.sides)


def level_set(field: np.ndarray, h: float, window: Window, seed: int = 0) -> Config:
    return Config(window, field >= h, f"gff_level(d={window.d},h={h:g})", seed)


# ---------------------------------------------------------------- capacity


@dataclass(frozen=True)
class CapacityEstimate:
    """Escape counts per site of K; cap = sum of escape frequencies."""

    sites: np.ndarray
    escapes: np.ndarray
    trials: int
    escape_radius: int

    @property
    def cap(self) -> float:
        return float(self.escapes.sum() / self.trials)

    @property
    def stderr(self) -> float:
        p = self.escapes / self.trials
        return float(np.sqrt(np.sum(p * (1 - p)) / self.trials))

    @property
    def weights(self) -> np.ndarray:
        """Normalized empirical equilibrium measure."""
        tot = self.escapes.sum()
        if tot == 0:
            raise SamplerError("no escapes observed; raise trials or escape radius")
        return self.escapes / tot


def _site_set(K_sites) -> np.ndarray:
    arr = np.atleast_2d(np.asarray(K_sites, dtype=np.int64))
    return np.unique(arr, axis=0)


def capacity_trials(K_sites, escape_radius: int, trials: int, seed: int) -> CapacityEstimate:
    """Run ``trials`` walks from every site of K that has a neighbour outside
    K; a walk escapes if it reaches sup norm >= escape_radius before
    returning to K."""
    if trials < 1:
        raise PreconditionError("trials must be positive")
    if np.size(K_sites) == 0:
        return CapacityEstimate(np.zeros((0, 0), np.int64), np.zeros(0, np.int64), trials,
                                escape_radius)
    sites = _site_set(K_sites)
    d = sites.shape[1]
    rad = int(np.abs(sites).max())
    if escape_radius < max(1, 4 * rad):
        raise PreconditionError(
            f"escape_radius {escape_radius} below 4 x radius of K ({rad})")
    koff = rad + 1
    side = 2 * koff + 1
    kmask = np.zeros((side,) * d, bool)
    kmask[tuple((sites + koff).T)] = True
    # sites whose neighbours all lie in K cannot escape
    boundary = np.zeros(len(sites), bool)
    for a in range(d):
        for s in (-1, 1):
            nb = sites.copy()
            nb[:, a] += s
            boundary |= ~kmask[tuple((nb + koff).T)]
    esc = np.zeros(len(sites), np.int64)
    if boundary.any():
        g = R.generator(seed, R.CAPACITY)
        esc[boundary] = K.escape_walks(sites[boundary], trials, escape_radius,
                                       kmask.ravel(), side, koff, g)
    return CapacityEstimate(sites, esc, trials, escape_radius)


def estimate_capacity(K_sites, escape_radius: int, trials: int, seed: int) -> tuple[float, float]:
    """Monte Carlo capacity of K and its standard error."""
    est = capacity_trials(K_sites, escape_radius, trials, seed)
    return est.cap, est.stderr


@functools.lru_cache(maxsize=16)
def _calibration(window: Window, escape_radius: int, trials: int, seed: int) -> CapacityEstimate:
    return capacity_trials(window.coords(), escape_radius, trials, seed)


# ---------------------------------------------------------------- interlacements


def interlacement_trace(u: float, window: Window, escape_radius: int, cap_trials: int,
                        seed: int, calibration_seed: int = 0) -> np.ndarray:
    """Trace of the interlacement at level u on the window (bool array).

    Trajectories arrive as a Poisson process in u of rate cap(window); each
    starts from the empirical equilibrium measure and runs forward until sup
    norm escape_radius.  Traces are nested in u for a fixed seed.
    """
    if u < 0:
        raise PreconditionError("u must be non-negative")
    if window.is_torus:
        raise PreconditionError("interlacements live on box windows")
    cal = _calibration(window, escape_radius, cap_trials, calibration_seed)
    cap = cal.cap
    out = np.zeros(window.size, bool)
    if u == 0 or cap == 0:
        return out.reshape(window.sides)
    cum = np.cumsum(cal.weights)
    cum[-1] = 1.0
    g = R.generator(seed, R.LEVELS)
    starts = []
    level = 0.0
    while True:
        level += g.exponential() / cap
        pick = g.random()
        if level > u:
            break
        starts.append(cal.sites[int(np.searchsorted(cum, pick, side="right"))])
    if starts:
        K.trace_walks(np.array(starts, np.int64), escape_radius, window.lo,
                      np.array(window.sides, np.int64), R.generator(seed, R.WALKS), out)
    return out.reshape(window.sides)


def sample_interlacement(u: float, window: Window, escape_radius: int, cap_trials: int,
                         seed: int, calibration_seed: int = 0) -> Config:
    occ = interlacement_trace(u, window, escape_radius, cap_trials, seed, calibration_seed)
    return Config(window, occ, f"interlacement(d={window.d},u={u:g})", seed)


def sample_vacant(u: float, window: Window, escape_radius: int, cap_trials: int,
                  seed: int, calibration_seed: int = 0) -> Config:
    occ = ~interlacement_trace(u, window, escape_radius, cap_trials, seed, calibration_seed)
    return Config(window, occ, f"vacant(d={window.d},u={u:g})", seed)


def sample_torus_vacant(u: float, N: int, seed: int, d: int = 3) -> Config:
    """Complement of a walk of floor(u N^d) steps from a uniform start."""
    if u < 0:
        raise PreconditionError("u must be non-negative")
    if N < 1:
        raise PreconditionError("N must be positive")
    steps = u * float(N) ** d
    if steps > MAX_WALK_STEPS:
        raise PreconditionError(f"walk length {steps:.3g} overflows 2^62")
    steps = int(np.floor(steps))
    window = Window.torus(N, d)
    g = R.generator(seed, R.WALKS)
    start = g.integers(0, N, size=d).astype(np.int64)
    visited = np.zeros(window.size, bool)
    if steps > 0:
        K.torus_walk(N, d, steps, start, g, visited)
    return Config(window, ~visited.reshape(window.sides),
                  f"torus_vacant(d={d},u={u:g},N={N})", seed)


# ---------------------------------------------------------------- dispatch


def sample(spec: ModelSpec, window: Window, seed: int) -> Config:
    """Draw one configuration of ``spec`` on ``window``."""
    if window.d != spec.d:
        raise PreconditionError(f"window dimension {window.d} != model dimension {spec.d}")
    f = spec.family
    if f == "bernoulli":
        return sample_bernoulli(spec.param, window, seed)
    if f == "gff_level":
        phi = sample_gff(window, spec.pad, seed)
        return level_set(phi, spec.param, window, seed)
    if f in ("interlacement", "vacant"):
        er = spec.escape_radius or default_escape_radius(window)
        fn = sample_interlacement if f == "interlacement" else sample_vacant
        return fn(spec.param, window, er, spec.cap_trials, seed, spec.calibration_seed)
    if not window.is_torus or len(set(window.sides)) != 1:
        raise PreconditionError("torus_vacant needs a cubic torus window")
    return sample_torus_vacant(spec.param, window.sides[0], seed, spec.d)


def default_escape_radius(window: Window) -> int:
    rad = int(max(np.abs(window.lo).max(), np.abs(window.hi - 1).max()))
    return max(4 * rad, 4)
