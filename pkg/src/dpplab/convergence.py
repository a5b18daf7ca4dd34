"""Small-step convergence studies against closed-form limit solutions.

As the step vanishes the solutions approach the solution of
``Tr(D^2 v A(x)) + f = 0`` with ``A = (alpha/2) int z (x) z dnu +
beta/(2(N+2)) I``.  Three constant-coefficient instances have closed forms:

* ``pure-mean-1d``: alpha = 0 on (-1, 1) with f = 1, so ``v'' = -2(N+2)``
  and ``v = 3 (1 - x^2)``,
* ``harmonic-2d``: f = 0 with boundary data ``x^2 - y^2`` (harmonic, and the
  uniform family gives ``A = c I``), so ``v`` equals the data,
* ``axis-pair-2d``: a single atom pair at ``+-Lambda e_1`` plus the ball
  mean gives diagonal ``A``; with data depending on ``x_1`` only the problem
  reduces to one dimension and ``v = (1 - x_1^2) / (2 A_11)``.

The collar carries the limit solution's own values (the classical boundary
datum lives on the boundary; a flat extension would add an O(eps) collar
layer that has nothing to do with interior convergence).  The study reports
sup errors over the half ball, empirical orders, and the two-sided quotient
trajectory.
"""

from __future__ import annotations

import numpy as np

from .lattice import Ball, Box, GridFunction
from .measures import FixedPairFamily, UniformBallFamily
from .operators import OperatorParams, limit_matrix
from .solver import make_problem, solve_dpp

__all__ = ["ConvergenceCase", "registered_cases", "pde_convergence_study"]


class ConvergenceError(ValueError):
    pass


class ConvergenceCase:
    """A solvable instance with a registered closed-form limit."""

    def __init__(self, name, dim, beta, lam, region, f, exact, family_fn,
                 shift=0.0):
        self.name = name
        self.dim = dim
        self.beta = beta
        self.lam = lam
        self.region = region
        self.f = f
        self.exact = exact
        self.family_fn = family_fn
        self.shift = shift  # additive lift keeping the instance positive

    def problem(self, eps: float, ratio: float = 10.5):
        h = eps / ratio
        params = OperatorParams(beta=self.beta, eps=eps, lam=self.lam)
        fam = self.family_fn(eps, h, self.dim)
        g = lambda p: self.exact(p) + self.shift
        return make_problem(self.region, params, h=h, f=self.f, g=g,
                            kind="linear", family=fam, label=self.name), params


def registered_cases() -> dict:
    cases = {}
    cases["pure-mean-1d"] = ConvergenceCase(
        name="pure-mean-1d", dim=1, beta=1.0, lam=1.0,
        region=Ball((0.0,), 1.0), f=1.0,
        exact=lambda p: 3.0 * (1.0 - p[:, 0] ** 2),
        family_fn=lambda eps, h, dim: UniformBallFamily(eps, h, dim),
        shift=1.0,
    )
    cases["harmonic-2d"] = ConvergenceCase(
        name="harmonic-2d", dim=2, beta=1.0, lam=1.0,
        region=Ball((0.0, 0.0), 1.0), f=0.0,
        exact=lambda p: p[:, 0] ** 2 - p[:, 1] ** 2,
        family_fn=lambda eps, h, dim: UniformBallFamily(eps, h, dim),
        shift=2.0,
    )

    def axis_family(eps, h, dim):
        z = np.zeros((1, dim))
        z[0, 0] = 2.0
        return FixedPairFamily(z, np.array([1.0]), lam=2.0)

    a11 = 0.5 * 0.5 * 4.0 + 0.5 / 8.0  # alpha/2 Lambda^2 + beta/(2(N+2))
    cases["axis-pair-2d"] = ConvergenceCase(
        name="axis-pair-2d", dim=2, beta=0.5, lam=2.0,
        region=Box((-1.0, -1.0), (1.0, 1.0)), f=1.0,
        exact=lambda p: (1.0 - p[:, 0] ** 2) / (2.0 * a11),
        family_fn=axis_family,
        shift=1.0,
    )
    return cases


def pde_convergence_study(case: ConvergenceCase, eps_ladder, ratios=None,
                          tol: float = 1e-9, scheme: str = "gauss-seidel") -> dict:
    """Sup-norm errors over the half ball for a step ladder, with empirical
    orders and the positive-instance quotient trajectory."""
    eps_ladder = list(eps_ladder)
    if ratios is None:
        ratios = [10.5 * eps_ladder[0] / e for e in eps_ladder]
    rows = []
    for eps, ratio in zip(eps_ladder, ratios):
        prob, params = case.problem(eps, ratio)
        u, rep = solve_dpp(prob, tol=tol, scheme=scheme)
        nodes = prob.lattice.nodes()
        exact = case.exact(nodes) + case.shift
        inner = np.linalg.norm(nodes, axis=1) <= 0.5
        err = float(np.abs(u.values - exact)[inner].max())
        pos = u.values[inner]
        quot = float(pos.max() / pos.min()) if pos.min() > 0 else np.inf
        A = limit_matrix(prob.family, params, np.zeros(case.dim))
        rows.append({"eps": eps, "h": prob.lattice.h, "sup_error": err,
                     "quotient_half_ball": quot, "iterations": rep.iterations,
                     "residual": rep.residual, "A00": float(A[0, 0])})
    orders = []
    for i in range(len(rows) - 1):
        e0, e1 = rows[i]["sup_error"], rows[i + 1]["sup_error"]
        r = np.log(e0 / e1) / np.log(rows[i]["eps"] / rows[i + 1]["eps"]) \
            if e1 > 0 else np.inf
        orders.append(float(r))
    return {"case": case.name, "rows": rows, "orders": orders,
            "errors_decreasing": bool(all(rows[i]["sup_error"] > rows[i + 1]["sup_error"]
                                          for i in range(len(rows) - 1)))}
