"""Boundary-value solver for the averaging equations by fixed-point sweeps.

The update map is

    (T u)(x) = alpha-term(u, x) + beta * mean_{B_eps(x)} u + eps^2 f(x)

at interior nodes, with ``u = g`` held fixed on the remaining nodes of the
extended lattice.  For the linear kind the alpha-term is the family average
and a whole sweep is one application of a precomputed row-stochastic sparse
matrix; the nonlinear kinds (sup-pair, tug-of-war, sup-inf) recompute their
extremes each sweep from index tables.  All kinds are monotone convex
combinations, so the maximum principle and monotone convergence from
constant initializations hold exactly.

Convergence is certified by the fixed-point residual ``max |u - T u|`` over
interior nodes, recomputed post hoc in a single deterministic sweep; the
update sup-norm is not trusted as a stopping rule on its own (the map need
not be a strict contraction).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.special import betainc

from .lattice import GridFunction, Lattice, Region, extend_domain
from .measures import (
    AxisAtomFamily,
    DirectionNet,
    EllipsoidFamily,
    MeasureFamily,
    ball_lattice_offsets,
)
from .operators import OperatorParams

_POINT_DEPENDENT_FAMILIES = (AxisAtomFamily, EllipsoidFamily)

__all__ = [
    "DppProblem",
    "SolveReport",
    "SolverError",
    "SolveFailure",
    "make_problem",
    "solve_dpp",
    "apply_update_map",
    "residual_certificate",
    "uniqueness_monitor",
    "comparison_check",
    "halfspace_ball_fraction",
    "chain_length_bound",
]


class SolverError(ValueError):
    pass


class SolveFailure(RuntimeError):
    """Raised when the residual target is not met within the sweep budget;
    carries the failure report, no partial solution is returned."""

    def __init__(self, report):
        super().__init__(
            f"no convergence: residual {report.residual:.3e} > tol {report.tol:.3e} "
            f"after {report.iterations} sweeps"
        )
        self.report = report


@dataclass
class DppProblem:
    lattice: Lattice
    interior: np.ndarray  # bool mask over nodes
    params: OperatorParams
    kind: str  # "linear" | "tow" | "sup-pair" | "sup-inf"
    f: np.ndarray  # source values per node
    g: np.ndarray  # boundary values per node (interior entries unused)
    family: MeasureFamily | None = None
    control_net: DirectionNet | None = None
    control_catalog: list | None = None
    label: str = ""
    _kernel: object = field(default=None, repr=False)

    @property
    def boundary(self) -> np.ndarray:
        return ~self.interior

    def domain_diameter(self) -> float:
        span = self.lattice.h * (np.asarray(self.lattice.shape) - 1)
        return float(np.linalg.norm(span))


@dataclass
class SolveReport:
    iterations: int
    residual: float  # certified max |u - T u| over interior nodes
    update_norm: float
    tol: float
    converged: bool
    scheme: str
    wall_time: float
    label: str = ""

    def as_dict(self):
        return {
            "iterations": self.iterations,
            "residual": self.residual,
            "update_norm": self.update_norm,
            "tol": self.tol,
            "converged": self.converged,
            "scheme": self.scheme,
            "label": self.label,
        }


def make_problem(region: Region, params: OperatorParams, h: float,
                 f: Callable | float = 0.0, g: Callable | float = 0.0,
                 kind: str = "linear", family: MeasureFamily | None = None,
                 control_net: DirectionNet | None = None,
                 control_catalog: list | None = None,
                 bounding_box: tuple | None = None,
                 label: str = "") -> DppProblem:
    """Build the extended lattice for ``region`` and sample data on it.

    The box pads the region's bounding box by ``Lambda * eps`` plus one cell
    so that every point reached in one step snaps to a node inside.
    """
    if bounding_box is None:
        # bounding box from the region's own geometry
        if hasattr(region, "center") and hasattr(region, "r"):
            lo = np.asarray(region.center) - region.r
            hi = np.asarray(region.center) + region.r
        elif hasattr(region, "center") and hasattr(region, "side"):
            lo = np.asarray(region.center) - region.side / 2
            hi = np.asarray(region.center) + region.side / 2
        elif hasattr(region, "center") and hasattr(region, "r_outer"):
            lo = np.asarray(region.center) - region.r_outer
            hi = np.asarray(region.center) + region.r_outer
        elif hasattr(region, "lo"):
            lo = np.asarray(region.lo, dtype=float)
            hi = np.asarray(region.hi, dtype=float)
        else:
            raise SolverError("cannot infer a bounding box; pass bounding_box")
    else:
        lo, hi = (np.asarray(b, dtype=float) for b in bounding_box)
    dim = lo.size
    margin = params.lam * params.eps + h * (np.sqrt(dim) / 2 + 1)
    from .lattice import build_lattice

    lattice = build_lattice(lo - margin, hi + margin, h)
    ext = extend_domain(region, lattice, params.lam * params.eps)
    nodes = lattice.nodes()
    f_vals = np.full(lattice.node_count, float(f)) if np.isscalar(f) \
        else np.asarray(f(nodes), dtype=float).reshape(-1)
    g_vals = np.full(lattice.node_count, float(g)) if np.isscalar(g) \
        else np.asarray(g(nodes), dtype=float).reshape(-1)
    return DppProblem(lattice, ext.inner_mask, params, kind, f_vals, g_vals,
                      family=family, control_net=control_net,
                      control_catalog=control_catalog, label=label)


# ---------------------------------------------------------------------------
# sweep kernels

class _LinearKernel:
    def __init__(self, problem: DppProblem):
        lat = problem.lattice
        params = problem.params
        n = lat.node_count
        interior_idx = np.flatnonzero(problem.interior)
        nodes = lat.nodes()
        h = lat.h

        ball_k = ball_lattice_offsets(params.eps, h, lat.dim)
        m_ball = ball_k.shape[0]

        rows, cols, vals = [], [], []
        family = problem.family
        pairs0 = family.atom_pairs(nodes[interior_idx[0]]) if len(interior_idx) else None
        constant_family = all(
            not isinstance(family, t) for t in _POINT_DEPENDENT_FAMILIES
        )

        shape_arr = np.asarray(lat.shape)

        def node_plus_offsets(i_flat, k_offsets):
            base = np.stack(np.unravel_index(i_flat, lat.shape), axis=-1)
            tgt = base[:, None, :] + k_offsets[None, :, :]
            if np.any(tgt < 0) or np.any(tgt >= shape_arr):
                raise SolverError("ball stencil exits the lattice box; widen the margin")
            return np.ravel_multi_index(tuple(np.moveaxis(tgt, -1, 0)), lat.shape)

        ball_cols = node_plus_offsets(interior_idx, ball_k)  # (M, m_ball)
        rows.append(np.repeat(interior_idx, m_ball))
        cols.append(ball_cols.reshape(-1))
        vals.append(np.full(interior_idx.size * m_ball, params.beta / m_ball))

        if constant_family:
            z = pairs0.z
            w = pairs0.w
            for sgn in (+1.0, -1.0):
                pts = nodes[interior_idx][:, None, :] + sgn * params.eps * z[None, :, :]
                cidx = lat.nearest_index(pts.reshape(-1, lat.dim), policy="error")
                rows.append(np.repeat(interior_idx, z.shape[0]))
                cols.append(cidx)
                vals.append(np.tile(params.alpha * w / 2.0, interior_idx.size))
        else:
            for i in interior_idx:
                p = family.atom_pairs(nodes[i])
                for sgn in (+1.0, -1.0):
                    pts = nodes[i][None, :] + sgn * params.eps * p.z
                    cidx = lat.nearest_index(pts, policy="error")
                    rows.append(np.full(cidx.size, i))
                    cols.append(cidx)
                    vals.append(params.alpha * p.w / 2.0)

        bdry_idx = np.flatnonzero(problem.boundary)
        rows.append(bdry_idx)
        cols.append(bdry_idx)
        vals.append(np.ones(bdry_idx.size))

        self.matrix = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n),
        )
        self.matrix.sum_duplicates()
        self.b = np.zeros(n)
        self.b[interior_idx] = params.eps ** 2 * problem.f[interior_idx]
        self.interior = problem.interior

    def apply(self, u: np.ndarray) -> np.ndarray:
        return self.matrix @ u + self.b

    def gauss_seidel_sweep(self, u: np.ndarray) -> None:
        _gs_csr(self.matrix.indptr, self.matrix.indices, self.matrix.data,
                self.b, u, np.flatnonzero(self.interior))


class _NonlinearKernel:
    def __init__(self, problem: DppProblem):
        lat = problem.lattice
        params = problem.params
        self.params = params
        self.kind = problem.kind
        interior_idx = np.flatnonzero(problem.interior)
        self.interior_idx = interior_idx
        self.interior = problem.interior
        nodes = lat.nodes()
        h = lat.h
        shape_arr = np.asarray(lat.shape)

        ball_k = ball_lattice_offsets(params.eps, h, lat.dim)
        base = np.stack(np.unravel_index(interior_idx, lat.shape), axis=-1)
        tgt = base[:, None, :] + ball_k[None, :, :]
        if np.any(tgt < 0) or np.any(tgt >= shape_arr):
            raise SolverError("ball stencil exits the lattice box; widen the margin")
        self.ball_idx = np.ravel_multi_index(tuple(np.moveaxis(tgt, -1, 0)), lat.shape)

        def pair_indices(directions: np.ndarray):
            plus = nodes[interior_idx][:, None, :] + params.eps * directions[None, :, :]
            minus = nodes[interior_idx][:, None, :] - params.eps * directions[None, :, :]
            ip = lat.nearest_index(plus.reshape(-1, lat.dim), policy="error")
            im = lat.nearest_index(minus.reshape(-1, lat.dim), policy="error")
            return (ip.reshape(interior_idx.size, -1), im.reshape(interior_idx.size, -1))

        if problem.kind == "sup-pair":
            self.pair_idx = [pair_indices(problem.control_net.points)]
        elif problem.kind == "sup-inf":
            self.pair_idx = [pair_indices(np.atleast_2d(np.asarray(s, dtype=float)))
                             for s in problem.control_catalog]
        elif problem.kind == "tow":
            self.pair_idx = []
        else:
            raise SolverError(f"unknown nonlinear kind {problem.kind!r}")
        self.b = params.eps ** 2 * problem.f[interior_idx]

    def apply(self, u: np.ndarray) -> np.ndarray:
        params = self.params
        ball_vals = u[self.ball_idx]
        beta_term = ball_vals.mean(axis=1)
        if self.kind == "tow":
            alpha_term = (ball_vals.max(axis=1) + ball_vals.min(axis=1)) / 2.0
        elif self.kind == "sup-pair":
            ip, im = self.pair_idx[0]
            alpha_term = ((u[ip] + u[im]) / 2.0).max(axis=1)
        else:  # sup-inf
            alpha_term = np.full(self.interior_idx.size, -np.inf)
            for ip, im in self.pair_idx:
                alpha_term = np.maximum(alpha_term, ((u[ip] + u[im]) / 2.0).min(axis=1))
        out = u.copy()
        out[self.interior_idx] = params.alpha * alpha_term + params.beta * beta_term + self.b
        return out

    def gauss_seidel_sweep(self, u: np.ndarray) -> None:
        raise SolverError("gauss-seidel is only wired for the linear kind")


_GS_IMPL = None


def _gs_csr(indptr, indices, data, b, u, order):
    global _GS_IMPL
    if _GS_IMPL is None:
        try:
            import numba

            @numba.njit(cache=True)
            def _impl(indptr, indices, data, b, u, order):  # pragma: no cover
                for oi in range(order.size):
                    i = order[oi]
                    acc = b[i]
                    for j in range(indptr[i], indptr[i + 1]):
                        acc += data[j] * u[indices[j]]
                    u[i] = acc

            _GS_IMPL = _impl
        except ImportError:  # pragma: no cover
            def _impl(indptr, indices, data, b, u, order):
                for i in order:
                    sl = slice(indptr[i], indptr[i + 1])
                    u[i] = data[sl] @ u[indices[sl]] + b[i]

            _GS_IMPL = _impl
    _GS_IMPL(indptr, indices, data, b, u, order)


def _kernel(problem: DppProblem):
    if problem._kernel is None:
        problem._kernel = (_LinearKernel(problem) if problem.kind == "linear"
                           else _NonlinearKernel(problem))
    return problem._kernel


def apply_update_map(problem: DppProblem, u: np.ndarray) -> np.ndarray:
    """One application of T (boundary rows act as the identity)."""
    return _kernel(problem).apply(np.asarray(u, dtype=float))


def residual_certificate(problem: DppProblem, u: np.ndarray) -> float:
    """Deterministic post-hoc certificate ``max_interior |u - T u|``."""
    r = apply_update_map(problem, u) - u
    return float(np.abs(r[problem.interior]).max(initial=0.0))


def chain_length_bound(problem: DppProblem) -> int:
    """Sweep budget heuristic ``n0 = diam / (eps/2)`` from the step-chase
    uniqueness argument."""
    return int(np.ceil(problem.domain_diameter() / (problem.params.eps / 2.0)))


def _initial_guess(problem: DppProblem, init) -> np.ndarray:
    u0 = problem.g.copy()
    interior = problem.interior
    gb = problem.g[problem.boundary]
    if isinstance(init, np.ndarray):
        u0[interior] = init[interior]
    elif init == "boundary-mean":
        u0[interior] = gb.mean() if gb.size else 0.0
    elif init == "max-g":
        u0[interior] = gb.max() if gb.size else 0.0
    elif init == "min-g":
        u0[interior] = gb.min() if gb.size else 0.0
    else:
        raise SolverError(f"unknown init {init!r}")
    return u0


def solve_dpp(problem: DppProblem, tol: float = 1e-8, max_iter: int | None = None,
              scheme: str = "jacobi", init="boundary-mean",
              check_every: int = 16) -> tuple[GridFunction, SolveReport]:
    """Iterate ``u <- T u`` to the certified residual ``max |u - T u| <= tol``.

    Jacobi sweeps double-buffer against the previous iterate (bit-identical
    to a sequential sweep); gauss-seidel updates in place in fixed row-major
    order as an accelerator for the linear kind.  On budget exhaustion raises
    :class:`SolveFailure` carrying the report.
    """
    if tol <= 0:
        raise SolverError(f"tol must be positive, got {tol}")
    if max_iter is None:
        n0 = chain_length_bound(problem)
        max_iter = min(10 * n0 * n0, 2_000_000)
    kern = _kernel(problem)
    u = _initial_guess(problem, init)
    t0 = time.perf_counter()
    update = np.inf
    it = 0
    if scheme == "jacobi":
        while it < max_iter:
            unew = kern.apply(u)
            update = float(np.abs((unew - u)[problem.interior]).max(initial=0.0))
            u = unew
            it += 1
            if update <= tol:
                break
    elif scheme == "gauss-seidel":
        if problem.kind != "linear":
            raise SolverError("gauss-seidel is only wired for the linear kind")
        while it < max_iter:
            kern.gauss_seidel_sweep(u)
            it += 1
            if it % check_every == 0 or it == max_iter:
                res = residual_certificate(problem, u)
                update = res
                if res <= tol:
                    break
    else:
        raise SolverError(f"unknown scheme {scheme!r}")

    certificate = residual_certificate(problem, u)
    wall = time.perf_counter() - t0
    report = SolveReport(iterations=it, residual=certificate, update_norm=update,
                         tol=tol, converged=certificate <= tol, scheme=scheme,
                         wall_time=wall, label=problem.label)
    if not report.converged:
        raise SolveFailure(report)
    return GridFunction(problem.lattice, u), report


# ---------------------------------------------------------------------------
# diagnostics built on the uniqueness chase

def halfspace_ball_fraction(dim: int, cut: float = 0.5) -> float:
    """``|{y in B_1 : y_1 > cut}| / |B_1|`` via the regularized incomplete
    beta function (exact cap-volume formula)."""
    if not (0 <= cut < 1):
        raise SolverError(f"cut must be in [0, 1), got {cut}")
    return 0.5 * float(betainc((dim + 1) / 2.0, 0.5, 1.0 - cut * cut))


def uniqueness_monitor(u: GridFunction, v: GridFunction, problem: DppProblem,
                       tol_u: float, tol_v: float) -> dict:
    """Gap diagnostic for two certified solutions of the same problem.

    Reports ``M = sup_interior (u - v)``, the chase length bound
    ``n0 = diam/(eps/2)``, the geometric factor ``beta * A`` with ``A`` the
    forward-halfspace volume fraction of the unit ball, and checks ``M``
    against the (extremely loose) amplification ``(beta A)^{-n0}`` of the
    combined residual tolerance.
    """
    if u.lattice != v.lattice:
        raise SolverError("solutions live on different lattices")
    gap = float((u.values - v.values)[problem.interior].max(initial=0.0))
    n0 = chain_length_bound(problem)
    A = halfspace_ball_fraction(problem.lattice.dim)
    log_amp = -n0 * np.log(problem.params.beta * A)
    log_bound = np.log(max(tol_u + tol_v, 1e-300)) + log_amp
    passed = (gap <= 0) or (np.log(max(gap, 1e-300)) <= log_bound)
    return {
        "gap": gap,
        "n0": n0,
        "halfspace_fraction": A,
        "beta_A": problem.params.beta * A,
        "log10_amplification": log_amp / np.log(10.0),
        "pass": bool(passed),
    }


def comparison_check(sub: GridFunction, sup: GridFunction, problem: DppProblem,
                     tol: float) -> dict:
    """Verify ``sub <= sup`` on the domain, given residual-certified sub- and
    supersolution inequalities and boundary ordering."""
    r_sub = apply_update_map(problem, sub.values) - sub.values
    r_sup = apply_update_map(problem, sup.values) - sup.values
    sub_ok = float(r_sub[problem.interior].min(initial=0.0)) >= -tol
    sup_ok = float(r_sup[problem.interior].max(initial=0.0)) <= tol
    bdry_ok = bool(np.all(sub.values[problem.boundary]
                          <= sup.values[problem.boundary] + tol))
    if not (sub_ok and sup_ok and bdry_ok):
        raise SolverError(
            f"comparison preconditions fail: sub residual ok={sub_ok}, "
            f"sup residual ok={sup_ok}, boundary order ok={bdry_ok}"
        )
    violation = float((sub.values - sup.values)[problem.interior].max(initial=0.0))
    n0 = chain_length_bound(problem)
    A = halfspace_ball_fraction(problem.lattice.dim)
    log_slack = np.log(max(2 * tol, 1e-300)) - n0 * np.log(problem.params.beta * A)
    passed = (violation <= 0) or (np.log(max(violation, 1e-300)) <= log_slack)
    return {
        "max_violation": violation,
        "log10_slack": log_slack / np.log(10.0),
        "pass": bool(passed),
    }
