"""Uniform lattices, geometric regions, dyadic cubes and cube covers.

Everything downstream samples functions on a uniform lattice over an
axis-aligned box.  Conventions used throughout the package:

* node coordinates are ``origin + h * k`` for an integer multi-index ``k``,
* node enumeration is row-major over the multi-index, so every reduction
  (sums, sups, argmins) has a fixed deterministic order,
* the open cube ``Q_r(x)`` is ``{y : |y_i - x_i| < r/2 for all i}`` and the
  open ball ``B_r(x)`` is ``{y : |x - y| < r}``; ``Q_1`` denotes the unit
  cube centered at the origin,
* dyadic cubes are stored as exact integer ``(generation, index)`` pairs so
  membership tests never hit floating-point boundary ambiguity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Lattice",
    "GridFunction",
    "Ball",
    "Cube",
    "Box",
    "Annulus",
    "Complement",
    "ExtendedDomain",
    "DyadicCube",
    "CubeCover",
    "build_lattice",
    "centered_lattice",
    "extend_domain",
    "epsilon_cube_cover",
    "cover_cube_side",
    "dyadic_root",
    "dyadic_children",
    "dyadic_pre",
    "dyadic_generation",
    "region_measure_on_lattice",
]

_SNAP = 1e-9


class LatticeError(ValueError):
    pass


@dataclass(frozen=True)
class Lattice:
    """Uniform lattice over a box: nodes at ``origin + h * k``, row-major order."""

    origin: tuple[float, ...]
    h: float
    shape: tuple[int, ...]

    def __post_init__(self):
        if self.h <= 0:
            raise LatticeError(f"spacing must be positive, got {self.h}")
        if any(n < 2 for n in self.shape):
            raise LatticeError(f"need at least 2 nodes per axis, got {self.shape}")

    @property
    def dim(self) -> int:
        return len(self.shape)

    @property
    def node_count(self) -> int:
        return int(np.prod(self.shape))

    def axes(self) -> list[np.ndarray]:
        return [self.origin[i] + self.h * np.arange(n) for i, n in enumerate(self.shape)]

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (node_count, dim), row-major."""
        mesh = np.meshgrid(*self.axes(), indexing="ij")
        return np.stack(mesh, axis=-1).reshape(-1, self.dim)

    def upper(self) -> np.ndarray:
        return np.asarray(self.origin) + self.h * (np.asarray(self.shape) - 1)

    def nearest_index(self, points: np.ndarray, policy: str = "clamp") -> np.ndarray:
        """Flat indices of nearest nodes.  ``policy`` handles points outside
        the box: "clamp" snaps to the box edge, "error" raises, "zero" is the
        caller's business (indices are clamped, a mask is available via
        :meth:`in_box`)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        k = np.rint((pts - np.asarray(self.origin)) / self.h).astype(np.int64)
        lo_ok = k >= 0
        hi_ok = k <= np.asarray(self.shape) - 1
        if policy == "error" and not (lo_ok.all() and hi_ok.all()):
            bad = np.argwhere(~(lo_ok & hi_ok))[0, 0]
            raise LatticeError(f"point {pts[bad]} outside lattice box")
        k = np.clip(k, 0, np.asarray(self.shape) - 1)
        return np.ravel_multi_index(tuple(k.T), self.shape)

    def in_box(self, points: np.ndarray, slack: float | None = None) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        s = (self.h / 2 if slack is None else slack)
        return np.all(
            (pts >= np.asarray(self.origin) - s) & (pts <= self.upper() + s), axis=1
        )

    def coords_of(self, flat_index) -> np.ndarray:
        k = np.stack(np.unravel_index(np.asarray(flat_index), self.shape), axis=-1)
        return np.asarray(self.origin) + self.h * k


def build_lattice(lo, hi, h: float) -> Lattice:
    """Lattice covering the closed box ``[lo, hi]`` with ``floor(side/h)+1``
    nodes per axis, the first node sitting at ``lo``."""
    lo = np.atleast_1d(np.asarray(lo, dtype=float))
    hi = np.atleast_1d(np.asarray(hi, dtype=float))
    if h <= 0:
        raise LatticeError(f"spacing must be positive, got {h}")
    sides = hi - lo
    if np.any(sides <= 0):
        raise LatticeError(f"degenerate box: lo={lo}, hi={hi}")
    counts = np.floor(sides / h + _SNAP).astype(int) + 1
    if np.any(counts < 2):
        raise LatticeError("box thinner than one spacing along some axis")
    return Lattice(origin=tuple(lo), h=float(h), shape=tuple(int(c) for c in counts))


def centered_lattice(half_extent: float, h: float, dim: int) -> Lattice:
    """Symmetric lattice on ``[-H, H]^dim`` with a node exactly at the origin."""
    if h <= 0:
        raise LatticeError(f"spacing must be positive, got {h}")
    m = int(np.floor(half_extent / h + _SNAP))
    if m < 1:
        raise LatticeError("half extent smaller than one spacing")
    return Lattice(origin=tuple([-m * h] * dim), h=float(h), shape=tuple([2 * m + 1] * dim))


# ---------------------------------------------------------------------------
# regions

class Region:
    def contains(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def distance(self, points: np.ndarray) -> np.ndarray:
        """Euclidean distance to the region (0 inside)."""
        raise NotImplementedError

    @property
    def bounded(self) -> bool:
        return True


@dataclass(frozen=True)
class Ball(Region):
    center: tuple[float, ...]
    r: float

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.linalg.norm(pts - np.asarray(self.center), axis=1) < self.r

    def distance(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.maximum(np.linalg.norm(pts - np.asarray(self.center), axis=1) - self.r, 0.0)


@dataclass(frozen=True)
class Cube(Region):
    """Open axis-aligned cube of side ``side`` centered at ``center``."""

    center: tuple[float, ...]
    side: float

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all(np.abs(pts - np.asarray(self.center)) < self.side / 2, axis=1)

    def distance(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        excess = np.abs(pts - np.asarray(self.center)) - self.side / 2
        return np.linalg.norm(np.maximum(excess, 0.0), axis=1)


@dataclass(frozen=True)
class Box(Region):
    lo: tuple[float, ...]
    hi: tuple[float, ...]

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return np.all((pts >= np.asarray(self.lo)) & (pts <= np.asarray(self.hi)), axis=1)

    def distance(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        below = np.maximum(np.asarray(self.lo) - pts, 0.0)
        above = np.maximum(pts - np.asarray(self.hi), 0.0)
        return np.linalg.norm(below + above, axis=1)


@dataclass(frozen=True)
class Annulus(Region):
    """Open annulus ``{r_inner < |x - center| < r_outer}``."""

    center: tuple[float, ...]
    r_inner: float
    r_outer: float

    def contains(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        return (d > self.r_inner) & (d < self.r_outer)

    def distance(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        d = np.linalg.norm(pts - np.asarray(self.center), axis=1)
        out = np.zeros_like(d)
        out = np.where(d <= self.r_inner, self.r_inner - d, out)
        out = np.where(d >= self.r_outer, d - self.r_outer, out)
        return out


@dataclass(frozen=True)
class Complement(Region):
    inner: Region

    def contains(self, points):
        return ~self.inner.contains(points)

    def distance(self, points):
        raise LatticeError("distance to an unbounded complement is not supported")

    @property
    def bounded(self) -> bool:
        return False


@dataclass(frozen=True)
class ExtendedDomain:
    """Domain plus its one-step reachable margin on a lattice.

    ``inner_mask`` flags the nodes of the domain itself; ``outer_mask`` flags
    nodes within ``margin`` of the domain, where the margin includes half a
    cell diagonal of snap slack so that nearest-node rounding of any reached
    point ``x + eps*z``, ``|z| <= Lambda``, stays inside.
    """

    lattice: Lattice
    inner: Region
    margin: float
    inner_mask: np.ndarray = field(repr=False)
    outer_mask: np.ndarray = field(repr=False)


def extend_domain(region: Region, lattice: Lattice, margin: float) -> ExtendedDomain:
    nodes = lattice.nodes()
    inner_mask = region.contains(nodes)
    snap = lattice.h * np.sqrt(lattice.dim) / 2
    outer_mask = region.distance(nodes) <= margin + snap * (1 + 1e-9)
    return ExtendedDomain(lattice, region, margin, inner_mask, outer_mask)


# ---------------------------------------------------------------------------
# grid functions

@dataclass
class GridFunction:
    """Real values on lattice nodes, evaluated elsewhere by nearest node.

    ``outside`` controls evaluation beyond the lattice box: "clamp" extends
    by the boundary values (nearest node of the box), "zero" returns 0,
    "error" raises.  Nearest-node lookup keeps the averaging operators exact
    convex combinations of node values.
    """

    lattice: Lattice
    values: np.ndarray
    outside: str = "clamp"

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float).reshape(-1)
        if self.values.size != self.lattice.node_count:
            raise LatticeError(
                f"value count {self.values.size} != node count {self.lattice.node_count}"
            )
        if not np.all(np.isfinite(self.values)):
            raise LatticeError("grid function values must be finite")

    @classmethod
    def sample(cls, lattice: Lattice, fn: Callable, outside: str = "clamp") -> "GridFunction":
        vals = np.asarray(fn(lattice.nodes()), dtype=float).reshape(-1)
        return cls(lattice, vals, outside)

    def eval(self, points: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if self.outside == "error":
            idx = self.lattice.nearest_index(pts, policy="error")
            return self.values[idx]
        idx = self.lattice.nearest_index(pts, policy="clamp")
        out = self.values[idx]
        if self.outside == "zero":
            out = np.where(self.lattice.in_box(pts), out, 0.0)
        return out

    def __call__(self, points: np.ndarray) -> np.ndarray:
        return self.eval(points)

    def copy_with(self, values: np.ndarray) -> "GridFunction":
        return GridFunction(self.lattice, np.array(values, dtype=float), self.outside)


# ---------------------------------------------------------------------------
# cube cover with diameter eps/4

def cover_cube_side(eps: float, dim: int) -> float:
    """Side of grid cubes with diameter eps/4: ``eps / (4 sqrt(N))``."""
    return eps / (4.0 * np.sqrt(dim))


@dataclass(frozen=True)
class CubeCover:
    """Subset of the fixed grid of open cubes with centers on ``side * Z^N``.

    The grid is anchored at the origin (never re-anchored per dataset), and
    the cover holds every cube whose closure meets the generating point set.
    """

    side: float
    indices: np.ndarray  # (K, dim) int64, lexicographically sorted

    def __len__(self):
        return self.indices.shape[0]

    @property
    def dim(self) -> int:
        return self.indices.shape[1]

    def centers(self) -> np.ndarray:
        return self.indices * self.side

    def measure(self) -> float:
        return len(self) * self.side ** self.dim

    def closure_contains(self, cube_row: int, points: np.ndarray, tol: float = 1e-12) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        c = self.indices[cube_row] * self.side
        return np.all(np.abs(pts - c) <= self.side / 2 + tol * max(1.0, self.side), axis=1)

    def bounds(self, cube_row: int) -> tuple[np.ndarray, np.ndarray]:
        c = self.indices[cube_row] * self.side
        half = self.side / 2
        return c - half, c + half


def epsilon_cube_cover(points: np.ndarray, eps: float, dim: int | None = None) -> CubeCover:
    """All grid cubes of side ``eps/(4 sqrt(N))`` whose closure meets the
    point set.  A point on a shared face belongs to the closures of every
    adjacent cube, so up to ``2^N`` cubes can be charged per point."""
    if eps <= 0:
        raise LatticeError(f"eps must be positive, got {eps}")
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.size == 0:
        d = dim if dim is not None else (pts.shape[1] if pts.ndim == 2 and pts.shape[1] else 1)
        return CubeCover(side=cover_cube_side(eps, d), indices=np.empty((0, d), dtype=np.int64))
    d = pts.shape[1]
    s = cover_cube_side(eps, d)
    t = pts / s
    tol = 1e-9
    k_lo = np.ceil(t - 0.5 - tol).astype(np.int64)
    k_hi = np.floor(t + 0.5 + tol).astype(np.int64)
    found: set[tuple[int, ...]] = set()
    for p in range(pts.shape[0]):
        ranges = [range(int(k_lo[p, i]), int(k_hi[p, i]) + 1) for i in range(d)]
        for combo in itertools.product(*ranges):
            found.add(combo)
    idx = np.array(sorted(found), dtype=np.int64).reshape(len(found), d)
    return CubeCover(side=s, indices=idx)


# ---------------------------------------------------------------------------
# dyadic cubes of the unit cube Q_1 = (-1/2, 1/2)^N

@dataclass(frozen=True)
class DyadicCube:
    """Generation-``level`` dyadic subcube of ``Q_1``, exact integer identity."""

    level: int
    index: tuple[int, ...]

    def __post_init__(self):
        n = 1 << self.level
        if any(not (0 <= i < n) for i in self.index):
            raise LatticeError(f"index {self.index} out of range at generation {self.level}")

    @property
    def dim(self) -> int:
        return len(self.index)

    def side(self) -> Fraction:
        return Fraction(1, 1 << self.level)

    def measure(self) -> Fraction:
        return self.side() ** self.dim

    def bounds(self) -> tuple[tuple[Fraction, ...], tuple[Fraction, ...]]:
        s = self.side()
        lo = tuple(Fraction(-1, 2) + i * s for i in self.index)
        hi = tuple(l + s for l in lo)
        return lo, hi

    def float_bounds(self) -> tuple[np.ndarray, np.ndarray]:
        lo, hi = self.bounds()
        return np.array([float(v) for v in lo]), np.array([float(v) for v in hi])

    def center(self) -> np.ndarray:
        lo, hi = self.float_bounds()
        return (lo + hi) / 2

    def contains(self, other: "DyadicCube") -> bool:
        if other.level < self.level:
            return False
        shift = other.level - self.level
        return all((oi >> shift) == si for oi, si in zip(other.index, self.index))

    def contains_point(self, point: Sequence[Fraction | float]) -> bool:
        lo, hi = self.bounds()
        return all(l < Fraction(p) < h for p, l, h in zip(point, lo, hi))


def dyadic_root(dim: int) -> DyadicCube:
    return DyadicCube(0, tuple([0] * dim))


def dyadic_children(cube: DyadicCube) -> list[DyadicCube]:
    """The ``2^N`` next-generation cubes partitioning ``cube`` up to measure zero."""
    out = []
    for bits in itertools.product((0, 1), repeat=cube.dim):
        out.append(DyadicCube(cube.level + 1, tuple(2 * i + b for i, b in zip(cube.index, bits))))
    return out


def dyadic_pre(cube: DyadicCube) -> DyadicCube:
    """The unique previous-generation cube containing ``cube``."""
    if cube.level == 0:
        raise LatticeError("the root cube has no predecessor")
    return DyadicCube(cube.level - 1, tuple(i >> 1 for i in cube.index))


def dyadic_generation(dim: int, level: int) -> Iterable[DyadicCube]:
    n = 1 << level
    for combo in itertools.product(range(n), repeat=dim):
        yield DyadicCube(level, combo)


# ---------------------------------------------------------------------------
# lattice measures

def region_measure_on_lattice(region: Region, lattice: Lattice) -> float:
    """Cell-count measure ``h^N * #(nodes in region)``; converges to the
    Lebesgue measure as ``h -> 0`` with an ``O(h * perimeter)`` boundary layer."""
    if not region.bounded:
        raise LatticeError("refusing to measure an unbounded region on a lattice")
    count = int(region.contains(lattice.nodes()).sum())
    return count * lattice.h ** lattice.dim
