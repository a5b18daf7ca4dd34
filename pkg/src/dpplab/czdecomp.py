"""Stopped dyadic decomposition on indicator grids, in exact arithmetic.

Sets are unions of finest-generation dyadic cells of the unit cube
``Q_1 = (-1/2, 1/2)^N``, so every measure is an integer count times
``2^(-N L_max)`` and every threshold comparison is an exact rational test.

Given ``A c B c Q_1``, ``delta_1, delta_2 in (0,1)`` and a stopping
generation ``L``, the walk splits cubes generation by generation; when a
child's ``A``-density exceeds ``delta_1`` its predecessor is selected, and
at generation ``L`` the cubes whose density exceeds ``delta_2`` are selected
as well.  Selected cubes must be contained in ``B`` (a runtime check with a
witness on violation, since in the full pipeline those inclusions are
supplied by the measure estimates).  The selected family is pairwise
disjoint and the leftover generation-``L`` family has density at most
``delta_2``, which yields the exact conclusion

    |A| <= delta_1 |B| + delta_2.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .lattice import DyadicCube, dyadic_children, dyadic_root

__all__ = [
    "IndicatorGrid",
    "CZResult",
    "CZHypothesisError",
    "cz_decompose",
    "cz_audit",
    "random_hypothesis_instance",
]

_MAGIC = b"DPLB"


class CZError(ValueError):
    pass


class CZHypothesisError(CZError):
    """A cube that must be contained in B is not; carries the witness."""

    def __init__(self, witness: DyadicCube, rule: str):
        super().__init__(f"hypothesis violation: cube {witness} selected by the "
                         f"{rule} rule is not contained in B")
        self.witness = witness
        self.rule = rule


@dataclass
class IndicatorGrid:
    """Union of finest-generation dyadic cells of ``Q_1``; exact measures."""

    level: int
    cells: np.ndarray  # bool, shape (2^level,)*dim

    def __post_init__(self):
        self.cells = np.asarray(self.cells, dtype=bool)
        n = 1 << self.level
        if self.cells.shape != tuple([n] * self.cells.ndim):
            raise CZError(f"cells shape {self.cells.shape} does not match level {self.level}")
        self._sat = None

    @property
    def dim(self) -> int:
        return self.cells.ndim

    def measure(self) -> Fraction:
        return Fraction(int(self.cells.sum()), (1 << self.level) ** self.dim)

    def _table(self) -> np.ndarray:
        if self._sat is None:
            t = self.cells.astype(np.int64)
            for axis in range(self.dim):
                t = np.cumsum(t, axis=axis)
            pad = np.zeros(tuple(s + 1 for s in t.shape), dtype=np.int64)
            pad[(slice(1, None),) * self.dim] = t
            self._sat = pad
        return self._sat

    def cube_cell_count(self, cube: DyadicCube) -> int:
        """Number of true cells inside ``cube`` (exact, via prefix sums)."""
        if cube.level > self.level:
            raise CZError(f"cube generation {cube.level} finer than the grid level {self.level}")
        shift = self.level - cube.level
        sat = self._table()
        lo = [i << shift for i in cube.index]
        hi = [l + (1 << shift) for l in lo]
        total = 0
        for corner in range(1 << self.dim):
            idx = tuple(hi[a] if (corner >> a) & 1 else lo[a] for a in range(self.dim))
            sign = (-1) ** (self.dim - bin(corner).count("1"))
            total += sign * int(sat[idx])
        return total

    def cube_cell_volume(self, cube: DyadicCube) -> int:
        return (1 << (self.level - cube.level)) ** self.dim

    def cube_measure(self, cube: DyadicCube) -> Fraction:
        return Fraction(self.cube_cell_count(cube), (1 << self.level) ** self.dim)

    def cube_full(self, cube: DyadicCube) -> bool:
        return self.cube_cell_count(cube) == self.cube_cell_volume(cube)

    def contains(self, other: "IndicatorGrid") -> bool:
        if other.level != self.level:
            raise CZError("grids must share the finest level")
        return bool(np.all(self.cells | ~other.cells))

    # -- bitmap round trip ---------------------------------------------------

    def to_bitmap(self) -> bytes:
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(bytes([1, self.dim, self.level]))
        buf.write(np.packbits(self.cells.reshape(-1)).tobytes())
        return buf.getvalue()

    @classmethod
    def from_bitmap(cls, blob: bytes) -> "IndicatorGrid":
        if blob[:4] != _MAGIC:
            raise CZError("not an indicator-grid bitmap")
        version, dim, level = blob[4], blob[5], blob[6]
        if version != 1:
            raise CZError(f"unsupported bitmap version {version}")
        n = 1 << level
        count = n ** dim
        bits = np.unpackbits(np.frombuffer(blob[7:], dtype=np.uint8), count=count)
        return cls(level, bits.astype(bool).reshape(tuple([n] * dim)))


@dataclass
class CZResult:
    selected: list  # (DyadicCube, reason) with reason in {"pred-threshold", "final-threshold"}
    leftover: list  # generation-L cubes not covered by any selected cube
    L: int
    delta1: Fraction
    delta2: Fraction
    measure_A: Fraction
    measure_B: Fraction
    bound: Fraction  # delta1 |B| + delta2
    conclusion_holds: bool
    selected_measures: list = field(default_factory=list)  # Fraction |A cap Q| per selected cube


def cz_decompose(A: IndicatorGrid, B: IndicatorGrid, delta1: Fraction,
                 delta2: Fraction, L: int) -> CZResult:
    """Run the stopped selection and verify the measure conclusion exactly."""
    delta1, delta2 = Fraction(delta1), Fraction(delta2)
    if not (0 < delta1 < 1 and 0 < delta2 < 1):
        raise CZError(f"thresholds must lie in (0,1), got {delta1}, {delta2}")
    if A.level != B.level or A.dim != B.dim:
        raise CZError("A and B must share grid level and dimension")
    if L < 1 or L > A.level:
        raise CZError(f"need 1 <= L <= grid level, got L={L}, level={A.level}")
    if not B.contains(A):
        raise CZError("A must be contained in B cellwise")
    measure_A = A.measure()
    if measure_A > delta1:
        raise CZError(f"|A| = {measure_A} exceeds delta1 = {delta1}")

    def density_exceeds(cube: DyadicCube, threshold: Fraction) -> bool:
        return Fraction(A.cube_cell_count(cube)) > threshold * A.cube_cell_volume(cube)

    selected: list[tuple[DyadicCube, str]] = []
    active = [dyadic_root(A.dim)]
    for _ in range(L):
        next_active = []
        for parent in active:
            kids = dyadic_children(parent)
            if any(density_exceeds(k, delta1) for k in kids):
                if not B.cube_full(parent):
                    raise CZHypothesisError(parent, "pred-threshold")
                selected.append((parent, "pred-threshold"))
            else:
                next_active.extend(kids)
        active = next_active

    leftover = []
    for cube in active:  # generation L, not covered
        if density_exceeds(cube, delta2):
            if not B.cube_full(cube):
                raise CZHypothesisError(cube, "final-threshold")
            selected.append((cube, "final-threshold"))
        else:
            leftover.append(cube)

    measure_B = B.measure()
    bound = delta1 * measure_B + delta2
    return CZResult(
        selected=selected,
        leftover=leftover,
        L=L,
        delta1=delta1,
        delta2=delta2,
        measure_A=measure_A,
        measure_B=measure_B,
        bound=bound,
        conclusion_holds=bool(measure_A <= bound),
        selected_measures=[A.cube_measure(c) for c, _ in selected],
    )


def cz_audit(result: CZResult, A: IndicatorGrid, B: IndicatorGrid) -> dict:
    """Re-verify the structural claims of a decomposition from scratch:
    per-cube density bounds, disjointness, containment in B, leftover
    density, and the exact partition identity for |A|."""
    failures = []

    n = 1 << A.level
    paint = np.zeros(tuple([n] * A.dim), dtype=bool)

    def cells_slice(cube: DyadicCube):
        shift = A.level - cube.level
        return tuple(slice(i << shift, (i + 1) << shift) for i in cube.index)

    for cube, reason in result.selected:
        count = A.cube_cell_count(cube)
        vol = A.cube_cell_volume(cube)
        if Fraction(count) > result.delta1 * vol:
            failures.append(f"selected cube {cube} has A-density above delta1")
        if not B.cube_full(cube):
            failures.append(f"selected cube {cube} is not contained in B")
        sl = cells_slice(cube)
        if paint[sl].any():
            failures.append(f"selected cube {cube} overlaps another selected cube")
        paint[sl] = True

    for cube in result.leftover:
        count = A.cube_cell_count(cube)
        vol = A.cube_cell_volume(cube)
        if Fraction(count) > result.delta2 * vol:
            failures.append(f"leftover cube {cube} has A-density above delta2")
        sl = cells_slice(cube)
        if paint[sl].any():
            failures.append(f"leftover cube {cube} overlaps a selected cube")
        paint[sl] = True

    if not paint.all():
        failures.append("selected and leftover cubes do not cover Q_1")

    pieces = sum((Fraction(A.cube_cell_count(c)) for c, _ in result.selected), Fraction(0))
    pieces += sum((Fraction(A.cube_cell_count(c)) for c in result.leftover), Fraction(0))
    total = Fraction(int(A.cells.sum()))
    if pieces != total:
        failures.append(f"partition identity fails: {pieces} != {total}")

    if not result.conclusion_holds or result.measure_A > result.bound:
        failures.append("measure conclusion |A| <= delta1 |B| + delta2 fails")

    return {"pass": not failures, "failures": failures,
            "selected_count": len(result.selected),
            "leftover_count": len(result.leftover)}


def random_hypothesis_instance(rng: np.random.Generator, dim: int, L: int,
                               level: int | None = None,
                               delta1: Fraction | None = None,
                               delta2: Fraction | None = None):
    """Constructive generator of instances satisfying all hypotheses.

    B is a disjoint union of random dyadic cubes of generations <= L, and A
    fills each piece uniformly at an exact cell density <= min(delta1,
    delta2).  Dyadic nesting then gives every cube density <= delta1 unless
    it sits strictly inside a B-piece, whose predecessor is contained in
    that piece, so the containment hypotheses hold by construction.
    """
    if level is None:
        level = L + 2
    if delta1 is None:
        delta1 = Fraction(int(rng.integers(2, 8)), 8)
    if delta2 is None:
        delta2 = Fraction(int(rng.integers(1, 8)), 8)
    n = 1 << level
    B_cells = np.zeros(tuple([n] * dim), dtype=bool)
    A_cells = np.zeros_like(B_cells)
    cap = Fraction(min(delta1, delta2))

    pieces = []
    for _ in range(int(rng.integers(1, 5))):
        gen = int(rng.integers(1, L + 1))
        idx = tuple(int(i) for i in rng.integers(0, 1 << gen, size=dim))
        cand = DyadicCube(gen, idx)
        if any(c.contains(cand) or cand.contains(c) for c in pieces):
            continue
        pieces.append(cand)

    for cube in pieces:
        shift = level - cube.level
        sl = tuple(slice(i << shift, (i + 1) << shift) for i in cube.index)
        B_cells[sl] = True
        vol = (1 << shift) ** dim
        budget = int(cap * vol)  # floor keeps the exact density <= cap
        if budget == 0:
            continue
        take = int(rng.integers(0, budget + 1))
        flat = rng.permutation(vol)[:take]
        block = np.zeros(vol, dtype=bool)
        block[flat] = True
        A_cells[sl] = block.reshape(tuple([1 << shift] * dim))

    A = IndicatorGrid(level, A_cells)
    B = IndicatorGrid(level, B_cells)
    return A, B, delta1, delta2
