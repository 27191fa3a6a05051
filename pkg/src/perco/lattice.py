"""Lattice windows, configurations and norms on Z^d."""
from __future__ import annotations

import io
import itertools
import struct
from dataclasses import dataclass, field

import numpy as np

MAGIC = b"PRC1"
GEOMETRIES = ("box", "torus")


class PreconditionError(ValueError):
    """Raised when a documented precondition of a function is violated."""


class FormatError(ValueError):
    """Raised when a serialized configuration is malformed."""


@dataclass(frozen=True)
class Window:
    """Finite box ``anchor + [0, sides)`` of Z^d, or a torus of the same sides.

    Array index ``i`` of a configuration corresponds to the lattice point
    ``anchor + i``.  Arrays are C-ordered, axis 0 slowest.
    """

    anchor: tuple[int, ...]
    sides: tuple[int, ...]
    geometry: str = "box"

    def __post_init__(self):
        anchor = tuple(int(a) for a in self.anchor)
        sides = tuple(int(s) for s in self.sides)
        if len(anchor) != len(sides) or len(sides) < 1:
            raise PreconditionError("anchor and sides must have equal positive length")
        if any(s < 1 for s in sides):
            raise PreconditionError(f"window sides must be positive, got {sides}")
        if self.geometry not in GEOMETRIES:
            raise PreconditionError(f"unknown geometry {self.geometry!r}")
        object.__setattr__(self, "anchor", anchor)
        object.__setattr__(self, "sides", sides)

    @classmethod
    def centered(cls, radius: int, d: int) -> "Window":
        """The box B(0, radius) = [-radius, radius]^d."""
        if radius < 0:
            raise PreconditionError("radius must be non-negative")
        return cls((-radius,) * d, (2 * radius + 1,) * d)

    @classmethod
    def torus(cls, N: int, d: int) -> "Window":
        return cls((0,) * d, (N,) * d, "torus")

    @property
    def d(self) -> int:
        return len(self.sides)

    @property
    def size(self) -> int:
        return int(np.prod(self.sides))

    @property
    def is_torus(self) -> bool:
        return self.geometry == "torus"

    @property
    def lo(self) -> np.ndarray:
        return np.array(self.anchor, dtype=np.int64)

    @property
    def hi(self) -> np.ndarray:
        """Exclusive upper corner."""
        return self.lo + np.array(self.sides, dtype=np.int64)

    def contains(self, pts) -> np.ndarray | bool:
        p = np.asarray(pts, dtype=np.int64)
        inside = np.all((p >= self.lo) & (p < self.hi), axis=-1)
        return bool(inside) if p.ndim == 1 else inside

    def contains_box(self, lo, hi) -> bool:
        """True if the box [lo, hi) lies inside the window."""
        return bool(np.all(np.asarray(lo) >= self.lo) and np.all(np.asarray(hi) <= self.hi))

    def to_index(self, pts) -> np.ndarray:
        p = np.asarray(pts, dtype=np.int64) - self.lo
        if self.is_torus:
            p = np.mod(p, np.array(self.sides))
        return p

    def flat_index(self, pts) -> np.ndarray | int:
        idx = self.to_index(pts)
        flat = np.ravel_multi_index(tuple(np.moveaxis(idx, -1, 0)), self.sides)
        return int(flat) if np.ndim(flat) == 0 else flat

    def coords(self, flat=None) -> np.ndarray:
        """Lattice coordinates of flat indices (all sites if ``flat`` is None)."""
        if flat is None:
            flat = np.arange(self.size)
        idx = np.stack(np.unravel_index(np.asarray(flat), self.sides), axis=-1)
        return idx.astype(np.int64) + self.lo

    def shifted(self, offset) -> "Window":
        return Window(tuple(np.add(self.anchor, offset)), self.sides, self.geometry)


@dataclass(frozen=True)
class Config:
    """Occupancy of a window: ``occ[i]`` is True iff ``anchor + i`` is occupied."""

    window: Window
    occ: np.ndarray
    model_tag: str = ""
    seed: int = 0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        occ = np.ascontiguousarray(self.occ, dtype=bool)
        if occ.shape != self.window.sides:
            raise PreconditionError(
                f"occupancy shape {occ.shape} does not match window sides {self.window.sides}")
        occ.flags.writeable = False
        object.__setattr__(self, "occ", occ)

    @property
    def d(self) -> int:
        return self.window.d

    def occupied(self, pt) -> bool:
        if not self.window.is_torus and not self.window.contains(pt):
            return False
        return bool(self.occ[tuple(self.window.to_index(pt))])

    def sites(self) -> np.ndarray:
        """Coordinates of occupied sites in row-major order."""
        return self.window.coords(np.flatnonzero(self.occ))

    def density(self) -> float:
        return float(self.occ.mean())

    def __eq__(self, other):
        return (isinstance(other, Config) and self.window == other.window
                and self.model_tag == other.model_tag and self.seed == other.seed
                and np.array_equal(self.occ, other.occ))

    def __hash__(self):
        return hash((self.window, self.model_tag, self.seed, self.occ.tobytes()))


# ---------------------------------------------------------------- norms


def l1_norm(x) -> np.ndarray | int:
    v = np.abs(np.asarray(x, dtype=np.int64)).sum(axis=-1)
    return int(v) if np.ndim(v) == 0 else v


def linf_norm(x) -> np.ndarray | int:
    v = np.abs(np.asarray(x, dtype=np.int64)).max(axis=-1)
    return int(v) if np.ndim(v) == 0 else v


def linf_ball(x, r: float, window: Window | None = None) -> np.ndarray:
    """Sites of B(x, r) = x + [-floor r, floor r]^d in row-major order.

    With a box window the ball is clipped to it; on a torus coordinates are
    reduced mod N and each site appears once.
    """
    x = np.asarray(x, dtype=np.int64)
    if r < 0:
        raise PreconditionError("radius must be non-negative")
    ri = int(np.floor(r))
    axes = [np.arange(xi - ri, xi + ri + 1) for xi in x]
    if window is not None:
        if window.d != len(x):
            raise PreconditionError("dimension mismatch")
        if window.is_torus:
            axes = [np.arange(n) if len(a) >= n else np.sort(a % n)
                    for a, n in zip(axes, window.sides)]
        else:
            axes = [a[(a >= lo) & (a < hi)] for a, lo, hi in zip(axes, window.lo, window.hi)]
    grid = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grid], axis=-1).reshape(-1, len(x))


def sign_vectors(d: int) -> np.ndarray:
    """The 2^(d-1) sign vectors with first entry +1."""
    rows = [(1,) + s for s in itertools.product((1, -1), repeat=d - 1)]
    return np.array(rows, dtype=np.int64)


def l1_diameter(sites) -> int:
    """l1 diameter of a finite site set via signed projections.

    max |x - y|_1 = max over sign vectors eps of (max eps.x - min eps.x).
    Cost O(2^(d-1) |V|).
    """
    v = np.asarray(sites, dtype=np.int64)
    if v.ndim != 2:
        raise PreconditionError("sites must be an (n, d) array")
    if len(v) == 0:
        return 0
    proj = v @ sign_vectors(v.shape[1]).T
    return int((proj.max(axis=0) - proj.min(axis=0)).max())


def linf_diameter(sites) -> int:
    v = np.asarray(sites, dtype=np.int64)
    if len(v) == 0:
        return 0
    return int((v.max(axis=0) - v.min(axis=0)).max())


# ---------------------------------------------------------------- serialization

_HEADER = struct.Struct("<4sBB")  # magic, d, geometry


def dump_config(cfg: Config) -> bytes:
    """Binary form: header, then occupancy bit-packed into little-endian
    64-bit words in row-major site order (bit j of word w is site 64w+j)."""
    w = cfg.window
    out = io.BytesIO()
    out.write(_HEADER.pack(MAGIC, w.d, GEOMETRIES.index(w.geometry)))
    out.write(struct.pack(f"<{w.d}q", *w.anchor))
    out.write(struct.pack(f"<{w.d}q", *w.sides))
    tag = cfg.model_tag.encode("utf-8")
    out.write(struct.pack("<I", len(tag)))
    out.write(tag)
    out.write(struct.pack("<Q", int(cfg.seed) & ((1 << 64) - 1)))
    bits = np.packbits(cfg.occ.ravel(), bitorder="little")
    nwords = -(-w.size // 64)
    buf = np.zeros(nwords * 8, dtype=np.uint8)
    buf[: len(bits)] = bits
    out.write(buf.view("<u8").tobytes())
    return out.getvalue()


def load_config(data: bytes) -> Config:
    try:
        magic, d, geo = _HEADER.unpack_from(data, 0)
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r}")
        if geo >= len(GEOMETRIES) or d < 1:
            raise FormatError("bad header")
        off = _HEADER.size
        anchor = struct.unpack_from(f"<{d}q", data, off)
        off += 8 * d
        sides = struct.unpack_from(f"<{d}q", data, off)
        off += 8 * d
        (ntag,) = struct.unpack_from("<I", data, off)
        off += 4
        tag = data[off: off + ntag].decode("utf-8")
        off += ntag
        (seed,) = struct.unpack_from("<Q", data, off)
        off += 8
    except struct.error as exc:
        raise FormatError(f"truncated header: {exc}") from None
    window = Window(anchor, sides, GEOMETRIES[geo])
    nwords = -(-window.size // 64)
    if len(data) - off != 8 * nwords:
        raise FormatError(f"payload has {len(data) - off} bytes, expected {8 * nwords}")
    words = np.frombuffer(data, dtype="<u8", count=nwords, offset=off)
    bits = np.unpackbits(words.view(np.uint8), bitorder="little")[: window.size]
    return Config(window, bits.astype(bool).reshape(window.sides), tag, seed)


def save_config(cfg: Config, path) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_config(cfg))


def read_config(path) -> Config:
    with open(path, "rb") as fh:
        return load_config(fh.read())
