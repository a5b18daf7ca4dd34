"""Discrete averaging operators and their extremal counterparts.

With ``alpha + beta = 1``, ``beta in (0, 1]`` (strictly positive beta is the
discrete form of uniform ellipticity) and step ``eps``, the basic operator is

    L u(x) = (alpha * int u(x + eps z) dnu_x(z)
              + beta * mean_{B_eps(x)} u - u(x)) / eps^2,

equivalently, via the second difference ``d u(x,y) = u(x+y)+u(x-y)-2u(x)``
and the symmetry of ``nu_x``,

    L u(x) = (alpha * int d u(x, eps z) dnu_x(z)
              + beta * mean_{B_1} d u(x, eps y) dy) / (2 eps^2).

The extremal operators replace the ``nu``-average by sup / inf over
directions in the ``Lambda``-ball (discretized by a finite net), and the
distorted-ball operator takes a sup of ball means over matrices
``I <= A <= Lambda I``.  Division by ``eps^2`` happens after the convex
combination to limit cancellation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .lattice import GridFunction
from .measures import AtomPairs, DirectionNet, MeasureFamily, ball_lattice_offsets, second_moment_matrix

__all__ = [
    "OperatorParams",
    "as_evaluator",
    "delta_u",
    "ball_mean",
    "ball_mean_delta",
    "apply_L",
    "apply_L_both_forms",
    "apply_L_plus",
    "apply_L_minus",
    "apply_pucci_plus",
    "apply_controlled",
    "limit_matrix",
    "ellipticity_bounds",
    "diagonal_matrix_net",
]


class OperatorError(ValueError):
    pass


@dataclass(frozen=True)
class OperatorParams:
    """Weights and scales: ``alpha = 1 - beta``, ``beta in (0, 1]``,
    ``eps > 0``, ``lam >= 1``."""

    beta: float
    eps: float
    lam: float = 1.0

    def __post_init__(self):
        if not (0 < self.beta <= 1):
            raise OperatorError(f"beta must be in (0, 1], got {self.beta}")
        if self.eps <= 0:
            raise OperatorError(f"eps must be positive, got {self.eps}")
        if self.lam < 1:
            raise OperatorError(f"Lambda must be >= 1, got {self.lam}")

    @property
    def alpha(self) -> float:
        return 1.0 - self.beta


def as_evaluator(u) -> Callable[[np.ndarray], np.ndarray]:
    if isinstance(u, GridFunction):
        return u.eval
    if callable(u):
        return lambda pts: np.asarray(u(np.atleast_2d(np.asarray(pts, dtype=float))), dtype=float)
    raise OperatorError(f"cannot evaluate object of type {type(u)!r}")


def delta_u(u, x, y) -> float:
    """Symmetric second difference ``u(x+y) + u(x-y) - 2 u(x)``."""
    ev = as_evaluator(u)
    x = np.asarray(x, dtype=float).reshape(1, -1)
    y = np.asarray(y, dtype=float).reshape(1, -1)
    return float(ev(x + y)[0] + ev(x - y)[0] - 2.0 * ev(x)[0])


def _delta_batch(ev, x, offsets) -> np.ndarray:
    """d u(x, offsets) for a batch of physical offsets, one point x."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    offs = np.atleast_2d(np.asarray(offsets, dtype=float))
    return ev(x + offs) + ev(x - offs) - 2.0 * float(ev(x)[0])


def ball_mean(u, x, params: OperatorParams, h: float) -> float:
    """Node average of u over the open ball ``B_eps(x)``."""
    ev = as_evaluator(u)
    k = ball_lattice_offsets(params.eps, h, np.asarray(x).reshape(-1).size)
    pts = np.asarray(x, dtype=float).reshape(1, -1) + k * h
    return float(ev(pts).mean())


def ball_mean_delta(u, x, params: OperatorParams, h: float) -> float:
    """Node average of ``d u(x, eps y)`` over ``y`` in the unit ball."""
    ev = as_evaluator(u)
    dim = np.asarray(x).reshape(-1).size
    k = ball_lattice_offsets(params.eps, h, dim)
    return float(_delta_batch(ev, x, k * h).mean())


def apply_L_both_forms(u, x, params: OperatorParams, family: MeasureFamily,
                       h: float) -> tuple[float, float]:
    """(delta form, direct form) of ``L u(x)``; the two are the same convex
    combination re-associated and must agree to roundoff."""
    ev = as_evaluator(u)
    x = np.asarray(x, dtype=float).reshape(-1)
    pairs = family.atom_pairs(x)
    k = ball_lattice_offsets(params.eps, h, x.size)
    ball_pts_plus = x[None, :] + k * h
    u_x = float(ev(x[None, :])[0])

    u_plus = ev(x[None, :] + params.eps * pairs.z)
    u_minus = ev(x[None, :] - params.eps * pairs.z)

    alpha_avg = float(np.dot(pairs.w, (u_plus + u_minus) / 2.0))
    beta_avg = float(ev(ball_pts_plus).mean())
    direct = (params.alpha * alpha_avg + params.beta * beta_avg - u_x) / params.eps ** 2

    d_atoms = u_plus + u_minus - 2.0 * u_x
    d_ball = _delta_batch(ev, x, k * h)
    delta_form = (params.alpha * float(np.dot(pairs.w, d_atoms))
                  + params.beta * float(d_ball.mean())) / (2.0 * params.eps ** 2)
    return delta_form, direct


def apply_L(u, x, params: OperatorParams, family: MeasureFamily, h: float,
            check_tol: float = 1e-11) -> float:
    delta_form, direct = apply_L_both_forms(u, x, params, family, h)
    scale = max(1.0, abs(delta_form), abs(direct))
    if abs(delta_form - direct) > check_tol * scale:
        raise OperatorError(
            f"delta/direct forms disagree: {delta_form} vs {direct} at x={x}"
        )
    return delta_form


def _extremal(u, x, params, net: DirectionNet, h: float, mode: str):
    if len(net) == 0:
        raise OperatorError("empty direction net")
    ev = as_evaluator(u)
    x = np.asarray(x, dtype=float).reshape(-1)
    d = _delta_batch(ev, x, params.eps * net.points)
    if mode == "sup":
        j = int(np.argmax(d))
    else:
        j = int(np.argmin(d))
    extreme = float(d[j])
    k = ball_lattice_offsets(params.eps, h, x.size)
    mean_d = float(_delta_batch(ev, x, k * h).mean())
    value = (params.alpha * extreme + params.beta * mean_d) / (2.0 * params.eps ** 2)
    return value, net.points[j].copy()


def apply_L_plus(u, x, params: OperatorParams, net: DirectionNet, h: float):
    """Maximal operator over the net; returns (value, arg-extremal direction).
    Enlarging the net cannot decrease the value."""
    return _extremal(u, x, params, net, h, "sup")


def apply_L_minus(u, x, params: OperatorParams, net: DirectionNet, h: float):
    return _extremal(u, x, params, net, h, "inf")


def diagonal_matrix_net(lam: float, dim: int, rungs: int = 5) -> list[np.ndarray]:
    """Diagonal matrices with entries on a geometric ladder in ``[1, Lambda]``;
    includes the identity and ``Lambda I``."""
    ladder = np.geomspace(1.0, lam, rungs) if lam > 1 else np.ones(1)
    mats = []
    for combo in np.stack(np.meshgrid(*([ladder] * dim), indexing="ij"), axis=-1).reshape(-1, dim):
        mats.append(np.diag(combo))
    return mats


def apply_pucci_plus(u, x, params: OperatorParams, matrices, h: float):
    """``sup_A mean_{B_1} d u(x, eps A y) dy / (2 eps^2)`` over a finite net
    of matrices ``I <= A <= Lambda I``; returns (value, arg matrix)."""
    ev = as_evaluator(u)
    x = np.asarray(x, dtype=float).reshape(-1)
    k = ball_lattice_offsets(params.eps, h, x.size)
    y = k * (h / params.eps)
    best = -np.inf
    best_mat = None
    for A in matrices:
        A = np.asarray(A, dtype=float)
        eig = np.linalg.eigvalsh((A + A.T) / 2)
        if eig[0] < 1 - 1e-9 or eig[-1] > params.lam + 1e-9:
            raise OperatorError(f"matrix eigenvalues {eig} outside [1, Lambda]")
        val = float(_delta_batch(ev, x, params.eps * (y @ A.T)).mean())
        if val > best:
            best = val
            best_mat = A
    return best / (2.0 * params.eps ** 2), best_mat


def apply_controlled(u, x, params: OperatorParams, control, h: float,
                     f_value: float = 0.0) -> float:
    """Value of the nonlinear update at ``x``: the controlled alpha-term plus
    the beta ball mean plus ``eps^2 f(x)``.

    control = ("sup-pair", net)        alpha * sup of pair averages
            = ("tow", None)            alpha/2 * (sup + inf over ball nodes)
            = ("sup-inf", catalog)     alpha * sup over direction subsets of
                                       the inf of pair averages
    """
    kind, data = control
    ev = as_evaluator(u)
    x = np.asarray(x, dtype=float).reshape(-1)
    k = ball_lattice_offsets(params.eps, h, x.size)
    ball_vals = ev(x[None, :] + k * h)
    beta_term = float(ball_vals.mean())

    if kind == "tow":
        alpha_term = (float(ball_vals.max()) + float(ball_vals.min())) / 2.0
    elif kind == "sup-pair":
        net: DirectionNet = data
        pair_avg = (ev(x[None, :] + params.eps * net.points)
                    + ev(x[None, :] - params.eps * net.points)) / 2.0
        alpha_term = float(pair_avg.max())
    elif kind == "sup-inf":
        catalog = data
        if not catalog:
            raise OperatorError("empty control catalog")
        best = -np.inf
        for subset in catalog:
            subset = np.atleast_2d(np.asarray(subset, dtype=float))
            pair_avg = (ev(x[None, :] + params.eps * subset)
                        + ev(x[None, :] - params.eps * subset)) / 2.0
            best = max(best, float(pair_avg.min()))
        alpha_term = best
    else:
        raise OperatorError(f"unknown control kind {kind!r}")

    return params.alpha * alpha_term + params.beta * beta_term + params.eps ** 2 * f_value


def limit_matrix(family: MeasureFamily, params: OperatorParams, x) -> np.ndarray:
    """Diffusion matrix of the small-step limit:
    ``A(x) = (alpha/2) int z (x) z dnu_x + beta/(2(N+2)) I``."""
    pairs = family.atom_pairs(np.asarray(x, dtype=float))
    dim = pairs.dim
    return (params.alpha / 2.0) * second_moment_matrix(pairs) \
        + params.beta / (2.0 * (dim + 2)) * np.eye(dim)


def ellipticity_bounds(params: OperatorParams, dim: int) -> tuple[float, float]:
    """Eigenvalue band ``[beta/(2(N+2)), alpha Lambda^2/2 + beta/(2(N+2))]``."""
    lo = params.beta / (2.0 * (dim + 2))
    return lo, params.alpha * params.lam ** 2 / 2.0 + lo
