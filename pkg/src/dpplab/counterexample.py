"""The explicit instance breaking the classical two-sided bound at scale eps.

On ``B_2`` take the family that concentrates on the axis pair ``+-e_1`` at
the points ``(k eps, 0, ..., 0)``, ``k`` a positive integer, and is the
uniform unit-ball measure elsewhere.  The function

    u = a_k at the axis atoms, 1 everywhere else,

solves the averaging equation with zero source: off the atoms the second
difference vanishes for almost every direction (the atom set is Lebesgue
null, which is also why a node-quadrature ball mean cannot represent this
instance: on a lattice the axis carries positive weight).  On the atoms the
equation reduces to the three-term recurrence

    a_k = 1 - alpha + alpha (a_{k-1} + a_{k+1}) / 2,   a_0 = 1,

with ``a_1 = a > 0`` free.  The sequence is built in exact rational
arithmetic, so the recurrence residual is identically zero; the companion
closed form ``a_k = 1 + (a - 1) (phi^k - phibar^k) / (phi - phibar)`` with
``phi, phibar`` the roots of ``x = (alpha/2)(1 + x^2)`` serves as an
independent cross-check.  Values along ``B_1`` then give a ratio
``sup/inf >= a`` while the corrected two-sided bound with the ``eps^(2
lambda)`` term absorbs the growth.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .lattice import GridFunction, centered_lattice
from .measures import AxisAtomFamily

__all__ = [
    "CounterexampleSpec",
    "CounterexampleError",
    "build_counterexample",
    "counterexample_residual_report",
    "solve_counterexample_chain",
]

_FLOAT_MAX = float(np.finfo(np.float64).max)


class CounterexampleError(ValueError):
    pass


@dataclass
class CounterexampleSpec:
    alpha: Fraction
    eps: float
    a1: Fraction
    dim: int
    seq: list  # Fractions a_0..a_{k_last}
    phi: float
    phibar: float

    @property
    def k_last(self) -> int:
        return len(self.seq) - 1

    def seq_floats(self) -> np.ndarray:
        return np.array([float(v) for v in self.seq])

    def value(self, points: np.ndarray) -> np.ndarray:
        """Closed-form u: axis atoms carry a_k, everything else is 1."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(pts.shape[0])
        atol = 1e-9 * self.eps
        on_axis = np.all(np.abs(pts[:, 1:]) <= atol, axis=1) if self.dim > 1 \
            else np.ones(pts.shape[0], dtype=bool)
        k = np.rint(pts[:, 0] / self.eps).astype(int)
        hits = on_axis & (np.abs(pts[:, 0] - k * self.eps) <= atol) \
            & (k >= 1) & (k <= self.k_last)
        vals = self.seq_floats()
        out[hits] = vals[k[hits]]
        return out

    def sup_on_ball(self, r: float) -> float:
        ks = [k for k in range(1, self.k_last + 1) if k * self.eps < r]
        return max([1.0] + [float(self.seq[k]) for k in ks])

    def inf_on_ball(self, r: float) -> float:
        ks = [k for k in range(1, self.k_last + 1) if k * self.eps < r]
        return min([1.0] + [float(self.seq[k]) for k in ks])

    def classical_quotient(self) -> float:
        return self.sup_on_ball(1.0) / self.inf_on_ball(1.0)

    def grid_function(self, h: float | None = None) -> GridFunction:
        h = h if h is not None else self.eps / 5.5
        lat = centered_lattice(2.0 + self.eps, h, self.dim)
        return GridFunction(lat, self.value(lat.nodes()))

    def family(self, h: float | None = None) -> AxisAtomFamily:
        return AxisAtomFamily(self.eps, h if h is not None else self.eps / 5.5, self.dim)


def build_counterexample(alpha, eps: float, a, dim: int = 2,
                         reach: float = 3.0) -> CounterexampleSpec:
    """Build the sequence out to the atoms inside ``B_reach`` (one extra term
    for the last recurrence neighbor), in exact rational arithmetic."""
    alpha = Fraction(alpha)
    a = Fraction(a)
    if not (0 < alpha < 1):
        raise CounterexampleError(f"alpha must be in (0, 1), got {alpha}")
    if not (0 < eps < 1):
        raise CounterexampleError(f"eps must be in (0, 1), got {eps}")
    if not a > 0:
        raise CounterexampleError(f"the free value must be positive, got {a}")
    k_last = int(np.floor(reach / eps - 1e-12)) + 1
    seq = [Fraction(1), a]
    for k in range(1, k_last):
        nxt = (seq[k] - (1 - alpha)) * 2 / alpha - seq[k - 1]
        seq.append(nxt)
    for k, v in enumerate(seq):
        magnitude_bits = abs(v.numerator).bit_length() - v.denominator.bit_length()
        if magnitude_bits > 1023:
            raise CounterexampleError(
                f"sequence value a_{k} exceeds the float range before leaving "
                f"the domain (|a_{k}| ~ 10^{magnitude_bits * 0.301:.0f})"
            )
    af = float(alpha)
    root = np.sqrt(1.0 - af * af)
    return CounterexampleSpec(alpha, float(eps), a, dim, seq,
                              phi=(1.0 + root) / af, phibar=(1.0 - root) / af)


def counterexample_residual_report(spec: CounterexampleSpec) -> dict:
    """Residuals of the averaging equation over ``B_2``.

    Off-atom points: the ball mean of ``u`` equals 1 exactly (the atom set is
    null) and the family average is the same ball mean, so the residual is
    identically zero.  Atom points: the residual is the recurrence defect,
    evaluated in exact rational arithmetic.
    """
    alpha = spec.alpha
    k_inside = [k for k in range(1, spec.k_last) if k * spec.eps < 2.0]
    defects = []
    for k in k_inside:
        d = spec.seq[k] - (1 - alpha) - alpha * (spec.seq[k - 1] + spec.seq[k + 1]) / 2
        defects.append(d)
    max_defect = max((abs(float(d)) for d in defects), default=0.0)
    eps2 = spec.eps ** 2
    phi, phibar = spec.phi, spec.phibar
    af = float(spec.alpha)
    closed_ok = True
    scale0 = float(spec.a1) - 1.0
    for k in (1, 2, min(5, spec.k_last), min(10, spec.k_last)):
        closed = 1.0 + scale0 * (phi ** k - phibar ** k) / (phi - phibar)
        ref = float(spec.seq[k])
        if abs(closed - ref) > 1e-9 * max(1.0, abs(ref)):
            closed_ok = False
    return {
        "atom_count_inside": len(k_inside),
        "max_recurrence_defect": max_defect,
        "max_operator_residual": max_defect / eps2,
        "off_atom_residual": 0.0,
        "root_product_error": abs(phi * phibar - 1.0),
        "root_sum_error": abs(phi + phibar - 2.0 / af),
        "closed_form_consistent": closed_ok,
        "exact_arithmetic": True,
    }


def solve_counterexample_chain(spec: CounterexampleSpec, tol: float = 1e-12,
                               max_iter: int = 200_000) -> dict:
    """Independent fixed-point solve of the on-axis reduction.

    The unknowns are the atom values with ``k eps < 2`` (the equation holds
    in ``B_2``); ``a_0 = 1`` and the first atom outside act as boundary data,
    with the ball-mean term frozen at its almost-everywhere value 1.  The
    update is a strict contraction with factor ``alpha``, and the result
    must reproduce the forward recurrence.
    """
    K = max(k for k in range(1, spec.k_last) if k * spec.eps < 2.0)
    af = float(spec.alpha)
    left = 1.0
    right = float(spec.seq[K + 1])
    u = np.ones(K + 2)
    u[0] = left
    u[K + 1] = right
    it = 0
    while it < max_iter:
        new = u.copy()
        new[1:K + 1] = (1.0 - af) + af * (u[0:K] + u[2:K + 2]) / 2.0
        delta = float((np.abs(new - u) / np.maximum(np.abs(new), 1.0)).max())
        u = new
        it += 1
        if delta <= tol:
            break
    res = np.abs(u[1:K + 1] - ((1.0 - af) + af * (u[0:K] + u[2:K + 2]) / 2.0)).max()
    ref = spec.seq_floats()[1:K + 1]
    return {
        "iterations": it,
        "residual": float(res),
        "max_gap_to_recurrence": float(np.abs(u[1:K + 1] - ref).max()),
        "rel_gap_to_recurrence": float((np.abs(u[1:K + 1] - ref)
                                        / np.maximum(np.abs(ref), 1.0)).max()),
        "values": u[1:K + 1],
    }
