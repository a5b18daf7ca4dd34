"""Concave envelope of the positive part, contact sets, and the cube-cover
estimate machinery.

The envelope of ``u+ = max(u, 0)`` over the ball ``B_R`` (R = 2 sqrt(N) +
Lambda eps) is the infimum over all affine functions dominating ``u+`` at
the ball nodes; it is set to exactly 0 outside the ball.  On a lattice this
is the upper concave hull of the point cloud ``{(x_i, u+(x_i))}``, computed
either geometrically (N <= 2) or by one small linear program per evaluation
node (any N); where both run they agree to 1e-8.

The contact set collects nodes where the envelope touches ``u`` within a
tolerance (the nodewise surrogate of lim-sup equality), and the quantity of
interest downstream is the sum ``(sum_Q (sup_Q f+)^N |Q|)^(1/N)`` over the
eps/4-diameter cube cover of the contact set.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lattice import CubeCover, GridFunction, epsilon_cube_cover

__all__ = [
    "EnvelopeResult",
    "concave_envelope",
    "contact_set",
    "envelope_radius",
    "abp_rhs",
    "abp_ratio_audit",
    "contact_neighborhood_estimate",
]


class EnvelopeError(ValueError):
    pass


def envelope_radius(dim: int, lam: float, eps: float) -> float:
    return 2.0 * np.sqrt(dim) + lam * eps


@dataclass
class EnvelopeResult:
    """Envelope values with contact data.

    gamma: envelope as a grid function (0 outside the ball region).
    ball_mask: nodes participating in the hyperplane constraints.
    contact_mask: nodes within the contact radius where gamma - u <= tol.
    gradients: one supergradient sample per contact node (NaN elsewhere).
    cover: eps/4-diameter cube cover of the contact nodes.
    """

    gamma: GridFunction
    ball_mask: np.ndarray
    contact_mask: np.ndarray
    gradients: np.ndarray
    cover: CubeCover | None
    method: str
    radius: float
    contact_radius: float
    tol_contact: float
    planes: np.ndarray | None = field(default=None, repr=False)

    def contact_points(self) -> np.ndarray:
        return self.gamma.lattice.nodes()[self.contact_mask]


def _upper_hull_1d(x: np.ndarray, v: np.ndarray):
    """Upper concave chain of (x, v) with x strictly increasing.  Returns the
    vertex indices of the chain."""
    keep: list[int] = []
    for i in range(x.size):
        while len(keep) >= 2:
            i0, i1 = keep[-2], keep[-1]
            # drop i1 if it lies below the segment (i0, i)
            lhs = (v[i1] - v[i0]) * (x[i] - x[i0])
            rhs = (v[i] - v[i0]) * (x[i1] - x[i0])
            if lhs <= rhs + 0.0:
                keep.pop()
            else:
                break
        keep.append(i)
    return np.asarray(keep, dtype=np.int64)


def _envelope_hull(points: np.ndarray, vals: np.ndarray, eval_points: np.ndarray):
    """Envelope values and supergradients at eval_points via the upper hull.
    Returns (values, gradients, planes) where planes rows are (a_1..a_N, b)
    for the affine pieces z = a . x + b."""
    dim = points.shape[1]
    if dim == 1:
        order = np.argsort(points[:, 0], kind="stable")
        xs = points[order, 0]
        vs = vals[order]
        chain = _upper_hull_1d(xs, vs)
        cx, cv = xs[chain], vs[chain]
        ev = np.interp(eval_points[:, 0], cx, cv)
        slopes = np.diff(cv) / np.diff(cx)
        planes = np.stack([slopes, cv[:-1] - slopes * cx[:-1]], axis=1)
        seg = np.clip(np.searchsorted(cx, eval_points[:, 0], side="right") - 1, 0, slopes.size - 1)
        grads = slopes[seg][:, None]
        # at chain vertices two slopes are active: pick the smaller one
        at_vertex = np.isin(eval_points[:, 0], cx[1:-1])
        if np.any(at_vertex):
            seg_left = np.clip(seg[at_vertex] - 0, 0, slopes.size - 1)
            seg_right = np.clip(seg[at_vertex], 0, slopes.size - 1)
            grads[at_vertex, 0] = np.minimum(slopes[seg_left], slopes[seg_right])
        return ev, grads, planes

    if dim != 2:
        raise EnvelopeError("the hull method is wired for N <= 2; use the LP method")
    from scipy.spatial import ConvexHull, QhullError

    cloud = np.column_stack([points, vals])
    try:
        hull = ConvexHull(cloud)
    except QhullError as exc:
        raise EnvelopeError(f"degenerate hull input: {exc}") from exc
    eqs = hull.equations  # n . p + d <= 0 inside
    up = eqs[:, 2] > 1e-12
    if not np.any(up):
        raise EnvelopeError("no upward-facing hull facets")
    eqs = eqs[up]
    # facet plane: z(x) = -(n_x x + n_y y + d) / n_z
    a = -eqs[:, :2] / eqs[:, 2:3]
    b = -eqs[:, 3] / eqs[:, 2]
    n_eval = eval_points.shape[0]
    ev = np.empty(n_eval)
    grads = np.empty((n_eval, 2))
    chunk = max(1, int(4_000_000 // max(a.shape[0], 1)))
    for start in range(0, n_eval, chunk):
        sl = slice(start, min(start + chunk, n_eval))
        plane_vals = eval_points[sl] @ a.T + b[None, :]  # (m, F)
        j = np.argmin(plane_vals, axis=1)
        ev_sl = plane_vals[np.arange(plane_vals.shape[0]), j]
        g_sl = a[j].copy()
        ties = plane_vals - ev_sl[:, None] \
            <= 1e-12 * np.maximum(1.0, np.abs(ev_sl))[:, None]
        for i in np.flatnonzero(ties.sum(axis=1) > 1):
            cand = a[ties[i]]
            order = np.lexsort(cand.T[::-1])
            g_sl[i] = cand[order[0]]
        ev[sl] = ev_sl
        grads[sl] = g_sl
    planes = np.column_stack([a, b])
    return ev, grads, planes


def _envelope_lp(points: np.ndarray, vals: np.ndarray, eval_points: np.ndarray):
    """Per-node linear program: minimize ell(x) over affine ell >= u+ at all
    constraint nodes.  The optimal slope is a supergradient at x."""
    from scipy.optimize import linprog

    dim = points.shape[1]
    A_ub = -np.column_stack([np.ones(points.shape[0]), points])
    b_ub = -vals
    ev = np.empty(eval_points.shape[0])
    grads = np.empty((eval_points.shape[0], dim))
    bounds = [(None, None)] * (dim + 1)
    for i, x in enumerate(eval_points):
        c = np.concatenate([[1.0], x])
        res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if not res.success:
            raise EnvelopeError(f"envelope LP failed at x={x}: {res.message}")
        ev[i] = res.fun
        grads[i] = res.x[1:]
    return ev, grads, None


def concave_envelope(u: GridFunction, radius: float, contact_radius: float | None = None,
                     method: str = "auto", tol_contact: float = 1e-9,
                     cover_eps: float | None = None) -> EnvelopeResult:
    """Concave envelope of ``u+`` over the nodes with ``|x| <= radius``.

    The hyperplane constraints are imposed on the closed-ball node set (the
    nodewise stand-in for dominating the upper envelope of ``u+`` on the open
    ball), and the result is 0 outside the ball.
    """
    lat = u.lattice
    nodes = lat.nodes()
    r = np.linalg.norm(nodes, axis=1)
    ball = r <= radius * (1 + 1e-12)
    if not np.any(ball):
        raise EnvelopeError("no lattice nodes in the envelope region")
    pts = nodes[ball]
    vplus = np.maximum(u.values[ball], 0.0)

    gamma_vals = np.zeros(lat.node_count)
    grads = np.full((lat.node_count, lat.dim), np.nan)
    planes = None
    if float(vplus.max(initial=0.0)) == 0.0:
        used = "zero"
    else:
        if method == "auto":
            use = "hull" if lat.dim <= 2 else "lp"
        else:
            use = method
        if use == "hull":
            try:
                ev, g, planes = _envelope_hull(pts, vplus, pts)
                used = "hull"
            except EnvelopeError:
                ev, g, planes = _envelope_lp(pts, vplus, pts)
                used = "lp"
        elif use == "lp":
            ev, g, planes = _envelope_lp(pts, vplus, pts)
            used = "lp"
        else:
            raise EnvelopeError(f"unknown method {method!r}")
        gamma_vals[ball] = np.maximum(ev, vplus)  # clip solver roundoff below u+
        grads[ball] = g

    gamma = GridFunction(lat, gamma_vals, outside="zero")
    c_radius = contact_radius if contact_radius is not None else radius
    contact = ball & (r <= c_radius * (1 + 1e-12)) \
        & (gamma_vals - u.values <= tol_contact)
    grads[~contact] = np.nan
    cover = epsilon_cube_cover(nodes[contact], cover_eps, lat.dim) if cover_eps else None
    return EnvelopeResult(gamma, ball, contact, grads, cover, used, radius,
                          c_radius, tol_contact, planes)


def contact_set(u: GridFunction, env: EnvelopeResult, tol_contact: float) -> np.ndarray:
    """Recompute the contact mask at a different tolerance (monotone in it)."""
    lat = u.lattice
    r = np.linalg.norm(lat.nodes(), axis=1)
    return env.ball_mask & (r <= env.contact_radius * (1 + 1e-12)) \
        & (env.gamma.values - u.values <= tol_contact)


def abp_rhs(f, cover: CubeCover, lattice, f_sup_exact=None) -> float:
    """``(sum_Q (sup_Q f+)^N |Q|)^(1/N)`` with the sup taken over lattice
    nodes in each closed cube; ``f_sup_exact(lo, hi) -> float`` overrides the
    node sup for closed-form sources."""
    if len(cover) == 0:
        return 0.0
    dim = cover.dim
    nodes = lattice.nodes()
    fv = f.eval(nodes) if isinstance(f, GridFunction) else np.asarray(f(nodes), dtype=float)
    total = 0.0
    vol = cover.side ** dim
    for q in range(len(cover)):
        if f_sup_exact is not None:
            lo, hi = cover.bounds(q)
            sup = float(f_sup_exact(lo, hi))
        else:
            inside = cover.closure_contains(q, nodes)
            if not np.any(inside):
                raise EnvelopeError("cover cube contains no lattice node and no "
                                    "closed-form sup was provided")
            sup = float(fv[inside].max())
        total += max(sup, 0.0) ** dim * vol
    return total ** (1.0 / dim)


def abp_ratio_audit(u: GridFunction, f, params, net, h: float,
                    radius: float | None = None, tol_sub: float = 1e-7,
                    sample_cap: int = 1500, tol_contact: float | None = None) -> dict:
    """Ratio ``sup u / rhs`` for a function with ``L+ u + f >= 0`` inside the
    ball and ``u <= 0`` outside.  The residual precondition is spot-checked
    on a deterministic node subsample with the direction net.
    """
    from .operators import apply_L_plus

    lat = u.lattice
    dim = lat.dim
    R = radius if radius is not None else 2.0 * np.sqrt(dim)
    nodes = lat.nodes()
    r = np.linalg.norm(nodes, axis=1)
    inside = r < R
    outside = ~inside
    fv = f.eval(nodes) if isinstance(f, GridFunction) else np.asarray(f(nodes), dtype=float)

    out_violation = float(u.values[outside].max(initial=-np.inf))
    if out_violation > tol_sub:
        raise EnvelopeError(f"u is not <= 0 outside the ball (max {out_violation})")

    idx = np.flatnonzero(inside & (r < R - params.lam * params.eps))
    if idx.size > sample_cap:
        idx = idx[np.linspace(0, idx.size - 1, sample_cap).astype(int)]
    worst = np.inf
    for i in idx:
        val, _ = apply_L_plus(u, nodes[i], params, net, h)
        worst = min(worst, val + fv[i])
    if worst < -tol_sub / params.eps ** 2 - 1e-9:
        raise EnvelopeError(f"subsolution residual fails: min(L+ u + f) = {worst}")

    tol_c = tol_contact if tol_contact is not None else 10 * tol_sub + params.eps ** 2
    env = concave_envelope(u, envelope_radius(dim, params.lam, params.eps),
                           contact_radius=R, tol_contact=tol_c, cover_eps=params.eps)
    rhs = abp_rhs(f if isinstance(f, GridFunction) else GridFunction(lat, fv),
                  env.cover, lat)
    sup_u = float(u.values[inside].max(initial=0.0))
    degenerate = sup_u <= tol_sub and rhs == 0.0
    return {
        "sup_u": sup_u,
        "rhs": rhs,
        "ratio": (sup_u / rhs) if rhs > 0 else np.inf,
        "degenerate_pass": bool(degenerate),
        "contact_count": int(env.contact_mask.sum()),
        "cover_count": len(env.cover),
        "residual_worst": worst,
        "sampled_nodes": int(idx.size),
    }


def contact_neighborhood_estimate(u: GridFunction, env: EnvelopeResult, x0,
                                  C: float, f_x0: float, eps: float) -> dict:
    """Measure of ``{y in B_{eps/4}(x0) : Gamma - u <= C f(x0) eps^2}`` with
    its ratio to ``eps^N``, plus the cube variant over ``3 sqrt(N) Q`` for a
    cover cube whose closure holds ``x0``."""
    lat = u.lattice
    dim = lat.dim
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    nodes = lat.nodes()
    i0 = lat.nearest_index(x0[None, :])[0]
    if not env.contact_mask[i0]:
        raise EnvelopeError(f"x0={x0} is not a contact node")
    if f_x0 <= 0:
        raise EnvelopeError("the neighborhood estimate needs f(x0) > 0")

    gap = env.gamma.values - u.values
    cutoff = C * f_x0 * eps ** 2
    near = np.linalg.norm(nodes - x0, axis=1) < eps / 4
    hit = near & (gap <= cutoff)
    hN = lat.h ** dim
    measure = float(hit.sum()) * hN
    ball_measure = float(near.sum()) * hN

    out = {
        "measure": measure,
        "ball_measure": ball_measure,
        "ratio_to_epsN": measure / eps ** dim,
        "cutoff": cutoff,
        "node_count": int(hit.sum()),
    }
    if env.cover is not None and len(env.cover):
        owner = None
        for q in range(len(env.cover)):
            if env.cover.closure_contains(q, x0[None, :])[0]:
                owner = q
                break
        if owner is not None:
            lo, hi = env.cover.bounds(owner)
            center = (lo + hi) / 2
            half = (hi - lo) / 2 * 3 * np.sqrt(dim)
            in_big = np.all(np.abs(nodes - center) < half, axis=1)
            sup_f = f_x0
            hit_q = in_big & (gap <= C * sup_f * eps ** 2)
            out["cube_measure"] = float(hit_q.sum()) * hN
            out["cube_volume"] = float(env.cover.side ** dim)
            out["cube_ratio"] = out["cube_measure"] / out["cube_volume"]
    return out
