"""Symmetric measure families as finite paired-atom quadratures.

A family assigns to each point ``x`` a symmetric unit measure supported in
the closed ball of radius ``Lambda`` (in step units): a list of pairs
``(z_i, w_i)`` representing ``sum_i (w_i/2) (delta_{z_i} + delta_{-z_i})``
with ``w_i >= 0`` and ``sum w_i = 1``.  Symmetry and unit mass hold by
construction, which keeps the averaging operators exact convex combinations
and makes every odd moment vanish identically.

Also here: the uniform-ball node quadrature used for the mean-value term of
the operators, and finite direction nets discretizing ``sup``/``inf`` over
the ``Lambda``-ball.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lattice import Lattice

__all__ = [
    "AtomPairs",
    "MeasureFamily",
    "UniformBallFamily",
    "EllipsoidFamily",
    "AxisAtomFamily",
    "FixedPairFamily",
    "CsvFamily",
    "DirectionNet",
    "ball_lattice_offsets",
    "uniform_ball_quadrature",
    "ellipsoid_family",
    "axis_atom_family",
    "family_from_csv",
    "validate_family",
    "direction_net",
    "second_moment_matrix",
]


class MeasureError(ValueError):
    pass


@dataclass(frozen=True)
class AtomPairs:
    """Paired atoms: ``sum_i (w_i/2)(delta_{z_i} + delta_{-z_i})``."""

    z: np.ndarray  # (m, dim) offsets in step units, |z_i| <= Lambda
    w: np.ndarray  # (m,) nonnegative, sums to 1

    def __post_init__(self):
        object.__setattr__(self, "z", np.atleast_2d(np.asarray(self.z, dtype=float)))
        object.__setattr__(self, "w", np.asarray(self.w, dtype=float).reshape(-1))
        if self.z.shape[0] != self.w.size:
            raise MeasureError("offset/weight count mismatch")

    @property
    def dim(self) -> int:
        return self.z.shape[1]


def second_moment_matrix(pairs: AtomPairs) -> np.ndarray:
    """``int z (x) z dnu = sum_i w_i z_i (x) z_i`` (pairing makes the two
    signed copies contribute identically)."""
    return np.einsum("i,ij,ik->jk", pairs.w, pairs.z, pairs.z)


class MeasureFamily:
    """Base: a deterministic assignment ``x -> AtomPairs``."""

    label = "family"
    lam = 1.0

    def atom_pairs(self, x: np.ndarray) -> AtomPairs:
        raise NotImplementedError


def ball_lattice_offsets(eps: float, h: float, dim: int) -> np.ndarray:
    """Integer multi-indices ``k`` with ``|k * h| < eps`` (strict ball).

    Node counting puts the quadrature cell boundaries at half-integer radii;
    integer ratios ``eps/h`` park boundary nodes exactly on the sphere where
    strict membership clips a half cell and biases second moments by
    ``O(h/eps)``, so callers should prefer half-integer ratios.
    """
    if eps < 2 * h:
        raise MeasureError(f"need eps >= 2h for a usable ball quadrature (eps={eps}, h={h})")
    kmax = int(np.floor(eps / h))
    rng = np.arange(-kmax, kmax + 1)
    mesh = np.meshgrid(*([rng] * dim), indexing="ij")
    k = np.stack(mesh, axis=-1).reshape(-1, dim)
    inside = np.einsum("ij,ij->i", k, k) * h * h < eps * eps
    k = k[inside]
    if k.shape[0] == 0:
        raise MeasureError("ball contains no lattice node")
    return k


def _pair_up(offsets: np.ndarray, weight_per_node: float) -> AtomPairs:
    """Fold a symmetric offset set into canonical pairs (first nonzero
    coordinate positive; the zero offset is its own pair)."""
    offsets = np.asarray(offsets, dtype=float)
    dim = offsets.shape[1]
    sign = np.zeros(offsets.shape[0])
    for axis in range(dim):
        undecided = sign == 0
        sign[undecided] = np.sign(offsets[undecided, axis])
    canonical = sign > 0
    zero = sign == 0
    z = offsets[canonical]
    w = np.full(z.shape[0], 2.0 * weight_per_node)
    if zero.any():
        z = np.vstack([np.zeros((1, dim)), z])
        w = np.concatenate([[weight_per_node * zero.sum()], w])
    order = np.lexsort(z.T[::-1])
    return AtomPairs(z[order], w[order])


class UniformBallFamily(MeasureFamily):
    """Equal weights over the lattice nodes in ``B_eps(x)``, in step units.

    The same atom set at every point (offsets are node differences), so the
    pairs are precomputed once.
    """

    def __init__(self, eps: float, h: float, dim: int):
        self.eps = eps
        self.h = h
        self.dim = dim
        self.lam = 1.0
        self.label = "uniform-ball"
        k = ball_lattice_offsets(eps, h, dim)
        self._pairs = _pair_up(k * (h / eps), 1.0 / k.shape[0])

    def atom_pairs(self, x) -> AtomPairs:
        return self._pairs


def uniform_ball_quadrature(eps: float, lat: Lattice, x=None) -> AtomPairs:
    """Paired-atom form of the uniform node quadrature over ``B_eps``."""
    return UniformBallFamily(eps, lat.h, lat.dim).atom_pairs(x)


class EllipsoidFamily(MeasureFamily):
    """Uniform node quadrature over the ellipsoid ``eps * E_x`` where
    ``E_x = M_x B_1`` for a symmetric positive matrix with eigenvalues in
    ``[1, Lambda]`` (so ``B_1 c E_x c B_Lambda``)."""

    def __init__(self, matrix_fn: Callable[[np.ndarray], np.ndarray],
                 eps: float, h: float, dim: int, lam: float):
        if lam < 1:
            raise MeasureError(f"Lambda must be >= 1, got {lam}")
        self.matrix_fn = matrix_fn
        self.eps = eps
        self.h = h
        self.dim = dim
        self.lam = float(lam)
        self.label = "ellipsoid"
        kmax = int(np.floor(lam * eps / h)) + 1
        rng = np.arange(-kmax, kmax + 1)
        mesh = np.meshgrid(*([rng] * dim), indexing="ij")
        self._candidates = np.stack(mesh, axis=-1).reshape(-1, dim)

    def _matrix_at(self, x) -> np.ndarray:
        M = np.asarray(self.matrix_fn(np.asarray(x, dtype=float)), dtype=float)
        M = (M + M.T) / 2
        eig = np.linalg.eigvalsh(M)
        if eig[0] < 1 - 1e-9 or eig[-1] > self.lam + 1e-9:
            raise MeasureError(
                f"ellipsoid axes {eig} violate B_1 c E_x c B_Lambda with Lambda={self.lam}"
            )
        return M

    def atom_pairs(self, x) -> AtomPairs:
        M = self._matrix_at(x)
        key = M.tobytes()
        cached = getattr(self, "_cache", None)
        if cached is not None and cached[0] == key:
            return cached[1]
        Minv = np.linalg.inv(M)
        y = self._candidates * self.h
        inside = np.linalg.norm(y @ Minv.T, axis=1) < self.eps
        k = self._candidates[inside]
        if k.shape[0] == 0:
            raise MeasureError("ellipsoid contains no lattice node")
        pairs = _pair_up(k * (self.h / self.eps), 1.0 / k.shape[0])
        self._cache = (key, pairs)
        return pairs


def ellipsoid_family(matrix_fn, eps, h, dim, lam) -> EllipsoidFamily:
    return EllipsoidFamily(matrix_fn, eps, h, dim, lam)


class AxisAtomFamily(MeasureFamily):
    """Counterexample family: a single pair at ``+-e_1`` on the positive-axis
    atom points ``(k*eps, 0, ..., 0)``, uniform ball quadrature elsewhere."""

    def __init__(self, eps: float, h: float, dim: int, atol: float | None = None):
        if eps <= 0:
            raise MeasureError(f"eps must be positive, got {eps}")
        self.eps = eps
        self.h = h
        self.dim = dim
        self.lam = 1.0
        self.label = "axis-atoms"
        self.atol = (1e-9 * eps) if atol is None else atol
        self._ball = UniformBallFamily(eps, h, dim)
        e1 = np.zeros((1, dim))
        e1[0, 0] = 1.0
        self._axis_pairs = AtomPairs(e1, np.array([1.0]))

    def on_atom(self, x) -> bool:
        x = np.asarray(x, dtype=float).reshape(-1)
        if np.any(np.abs(x[1:]) > self.atol):
            return False
        k = x[0] / self.eps
        return k > 0.5 and abs(k - round(k)) * self.eps <= self.atol

    def atom_pairs(self, x) -> AtomPairs:
        if self.on_atom(x):
            return self._axis_pairs
        return self._ball.atom_pairs(x)


def axis_atom_family(eps, h, dim) -> AxisAtomFamily:
    return AxisAtomFamily(eps, h, dim)


class CsvFamily(MeasureFamily):
    """Family loaded from rows ``(node_index, z_1..z_N, weight)``: each node
    of the carrier lattice gets the listed pairs (weights normalized)."""

    def __init__(self, table: dict, lam: float, lattice, label: str = "csv"):
        self.lam = float(lam)
        self.label = label
        self.lattice = lattice
        self._table = {}
        for idx, (z, w) in table.items():
            z = np.atleast_2d(np.asarray(z, dtype=float))
            w = np.asarray(w, dtype=float).reshape(-1)
            if np.any(w < 0) or w.sum() <= 0:
                raise MeasureError(f"bad weights for node {idx}")
            if np.any(np.linalg.norm(z, axis=1) > lam * (1 + 1e-12)):
                raise MeasureError(f"atom outside the Lambda ball at node {idx}")
            self._table[int(idx)] = AtomPairs(z, w / w.sum())

    def atom_pairs(self, x) -> AtomPairs:
        idx = int(self.lattice.nearest_index(np.asarray(x, dtype=float)[None, :])[0])
        try:
            return self._table[idx]
        except KeyError:
            raise MeasureError(f"no atoms listed for node {idx}") from None


def family_from_csv(path: str, lam: float, lattice) -> CsvFamily:
    import csv as _csv

    table: dict = {}
    with open(path, newline="") as fh:
        for row in _csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            idx = int(row[0])
            z = [float(v) for v in row[1:-1]]
            w = float(row[-1])
            table.setdefault(idx, ([], []))
            table[idx][0].append(z)
            table[idx][1].append(w)
    return CsvFamily(table, lam, lattice)


class FixedPairFamily(MeasureFamily):
    """Point-independent family given by explicit pairs, e.g. a single pair
    at ``+-Lambda e_1`` or a small set of stencil directions."""

    def __init__(self, z: np.ndarray, w: np.ndarray, lam: float, label: str = "fixed-pairs"):
        z = np.atleast_2d(np.asarray(z, dtype=float))
        w = np.asarray(w, dtype=float).reshape(-1)
        total = w.sum()
        if total <= 0:
            raise MeasureError("weights must have positive total mass")
        w = w / total
        radii = np.linalg.norm(z, axis=1)
        if np.any(radii > lam * (1 + 1e-12)):
            raise MeasureError(f"atom radius {radii.max()} exceeds Lambda={lam}")
        self.lam = float(lam)
        self.label = label
        self._pairs = AtomPairs(z, w)

    def atom_pairs(self, x) -> AtomPairs:
        return self._pairs


# ---------------------------------------------------------------------------
# validation

@dataclass
class FamilyValidation:
    ok: bool
    worst_mass_error: float
    max_support_radius: float
    min_weight: float
    checked_points: int

    def as_dict(self):
        return {
            "ok": self.ok,
            "worst_mass_error": self.worst_mass_error,
            "max_support_radius": self.max_support_radius,
            "min_weight": self.min_weight,
            "checked_points": self.checked_points,
        }


def validate_family(family: MeasureFamily, points: np.ndarray,
                    mass_tol: float = 1e-12) -> FamilyValidation:
    """Report-only audit: unit mass, support radius <= Lambda, nonnegative
    weights.  Symmetry holds by the paired representation."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    worst_mass = 0.0
    max_radius = 0.0
    min_weight = np.inf
    for x in pts:
        pairs = family.atom_pairs(x)
        worst_mass = max(worst_mass, abs(float(pairs.w.sum()) - 1.0))
        if pairs.z.size:
            max_radius = max(max_radius, float(np.linalg.norm(pairs.z, axis=1).max()))
        min_weight = min(min_weight, float(pairs.w.min()) if pairs.w.size else np.inf)
    ok = (worst_mass <= mass_tol
          and max_radius <= family.lam * (1 + 1e-12)
          and min_weight >= 0)
    return FamilyValidation(ok, worst_mass, max_radius, min_weight, pts.shape[0])


# ---------------------------------------------------------------------------
# direction nets

@dataclass(frozen=True)
class DirectionNet:
    """Finite subset of the closed ``Lambda``-ball with declared covering
    resolution.  Always contains 0 and the axis extremes ``+-Lambda e_i``
    (the closed-form worst directions of the radial barriers), and is sorted
    lexicographically so arg-extremal picks are deterministic."""

    points: np.ndarray
    resolution: float
    lam: float

    def __len__(self):
        return self.points.shape[0]

    def with_points(self, extra: np.ndarray) -> "DirectionNet":
        extra = np.atleast_2d(np.asarray(extra, dtype=float))
        merged = np.vstack([self.points, extra, -extra])
        merged = np.unique(np.round(merged, 12), axis=0)
        return DirectionNet(merged, self.resolution, self.lam)


def _sphere_directions(dim: int, count: int) -> np.ndarray:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        t = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    # Fibonacci sphere, deterministic
    i = np.arange(count)
    phi = np.pi * (3.0 - np.sqrt(5.0))
    y = 1 - 2 * (i + 0.5) / count
    r = np.sqrt(np.maximum(1 - y * y, 0.0))
    t = phi * i
    return np.stack([r * np.cos(t), y, r * np.sin(t)], axis=1)


def direction_net(lam: float, resolution: float, dim: int,
                  max_size: int = 400_000) -> DirectionNet:
    """Net covering the closed ``Lambda``-ball so that every point is within
    ``resolution`` of a net point."""
    if resolution <= 0:
        raise MeasureError(f"resolution must be positive, got {resolution}")
    s = resolution / np.sqrt(2.0)
    n_shell = max(1, int(np.ceil(lam / s)))

    def shell_count(r: float) -> int:
        if dim == 1:
            return 2
        if dim == 2:
            return max(4, int(np.ceil(2 * np.pi * r / s)))
        return max(6, int(np.ceil(2.0 * 4 * np.pi * r * r / (s * s))))

    total = 1 + 2 * dim
    for j in range(1, n_shell + 1):
        total += shell_count(lam * j / n_shell)
        if total > max_size:
            raise MeasureError(
                f"direction net of >= {total} points exceeds the cap {max_size}; "
                "coarsen the resolution"
            )

    pts = [np.zeros((1, dim))]
    for j in range(1, n_shell + 1):
        r = lam * j / n_shell
        pts.append(r * _sphere_directions(dim, shell_count(r)))
    axes = []
    for i in range(dim):
        e = np.zeros(dim)
        e[i] = lam
        axes.extend([e, -e])
    pts.append(np.array(axes))
    net = np.unique(np.round(np.vstack(pts), 12), axis=0)
    return DirectionNet(net, resolution, lam)
