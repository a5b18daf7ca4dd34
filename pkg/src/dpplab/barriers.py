"""Closed-form radial barriers and their verification against the minimal
extremal operator.

Two constructions share one engine:

* the global barrier ``Psi(x) = A (1 + |x|^2)^(-sigma) - B`` pinned to the
  values 2 at ``|x| = (3/2) sqrt(N)`` and 0 at ``|x| = 2 sqrt(N)``, whose
  companion ``psi`` dominates ``-L- Psi`` everywhere and is nonpositive off
  ``B_{1/4}``,
* the annular barrier ``Psi(x) = (|x-z|^(-2 sigma) - 4^(-2 sigma)) /
  ((r - Lambda eps)^(-2 sigma) - 4^(-2 sigma)) * m`` pinned to ``m`` on the
  inner sphere and 0 on the outer one, used to propagate infima.

Exponents are chosen on a doubling ladder against the explicit sufficient
conditions; the amplitude ``A`` is kept in log form because it grows like
``(1 + 9N/4)^sigma``.  Barriers evaluate in closed form inside operator
applications (only the ball mean is a quadrature), and every verification
reports a computed tolerance: a local Lipschitz bound times the net
resolution plus a two-grid Richardson estimate of the ball-mean error.

The scalar inequality behind both constructions:

    (a+b+c)^-s + (a+b-c)^-s - 2 a^-s
        >= 2 s a^(-s-1) [ -b + (s+1)/2 (1 - (s+2) b/a) c^2/a ]

for a, b > 0, |c| < a + b, s > 0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import DirectionNet, ball_lattice_offsets
from .operators import OperatorParams

__all__ = [
    "abc_inequality",
    "GlobalBarrier",
    "AnnularBarrier",
    "build_global_barrier",
    "build_annular_barrier",
    "verify_global_barrier",
    "verify_annular_barrier",
    "infimum_decay_check",
    "decay_prefactor_log",
    "sigma_ladder",
]

_LOG_FLOAT_MAX = 709.0


class BarrierError(ValueError):
    pass


def abc_inequality(a, b, c, sigma, rel_tol: float = 1e-12):
    """Evaluate both sides of the second-difference lower bound for the map
    ``t -> t^(-sigma)``; returns (lhs, rhs, holds).  Accepts scalars or
    arrays (broadcast elementwise)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    if np.any(a <= 0) or np.any(b <= 0):
        raise BarrierError("need a, b > 0")
    if np.any(np.abs(c) >= a + b):
        raise BarrierError("need |c| < a + b")
    if np.any(np.asarray(sigma) <= 0):
        raise BarrierError(f"need sigma > 0, got {sigma}")
    lhs = (a + b + c) ** (-sigma) + (a + b - c) ** (-sigma) - 2.0 * a ** (-sigma)
    rhs = 2.0 * sigma * a ** (-sigma - 1.0) * (
        -b + (sigma + 1.0) / 2.0 * (1.0 - (sigma + 2.0) * b / a) * c * c / a
    )
    scale = np.maximum(np.maximum(np.abs(lhs), np.abs(rhs)), a ** (-np.asarray(sigma)))
    holds = lhs >= rhs - rel_tol * scale
    if lhs.ndim == 0:
        return float(lhs), float(rhs), bool(holds)
    return lhs, rhs, holds


def sigma_ladder(threshold: float) -> int:
    """Smallest power of two with ``sigma + 1 >= threshold``."""
    sigma = 1
    while sigma + 1 < threshold:
        sigma *= 2
    return sigma


# ---------------------------------------------------------------------------
# global barrier

@dataclass(frozen=True)
class GlobalBarrier:
    sigma: int
    log_A: float
    B: float
    eps0: float
    dim: int
    lam: float
    beta: float

    @property
    def A(self) -> float:
        return float(np.exp(self.log_A)) if self.log_A < _LOG_FLOAT_MAX else np.inf

    def value_radial(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(self.log_A - self.sigma * np.log1p(r * r)) - self.B

    def value(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.value_radial(np.linalg.norm(pts, axis=1))

    def __call__(self, points):
        return self.value(points)

    def psi_radial(self, r):
        r = np.asarray(r, dtype=float)
        t = r * r / (1.0 + r * r)
        bracket = self.lam ** 2 - self.beta * (self.sigma + 1.0) / (self.dim + 2.0) * t
        return np.exp(self.log_A + np.log(self.sigma) - (self.sigma + 1.0) * np.log1p(r * r)) * bracket

    def psi(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.psi_radial(np.linalg.norm(pts, axis=1))

    def psi_at_zero(self) -> float:
        return float(np.exp(self.log_A + np.log(self.sigma * self.lam ** 2)))

    def log_psi_at_zero(self) -> float:
        return self.log_A + float(np.log(self.sigma * self.lam ** 2))

    def grad_norm_radial(self, r):
        r = np.asarray(r, dtype=float)
        return 2.0 * np.exp(self.log_A + np.log(self.sigma)
                            - (self.sigma + 1.0) * np.log1p(r * r)) * r

    def grad_bound(self, r_lo: float, r_hi: float, scan: int = 512) -> float:
        rr = np.linspace(max(r_lo, 0.0), max(r_hi, 0.0), scan)
        return float(self.grad_norm_radial(rr).max())


def build_global_barrier(dim: int, lam: float, beta: float) -> GlobalBarrier:
    """Exponent from the doubling ladder against
    ``Lambda^2 - beta (sigma+1) / (17 (N+2)) <= 0`` (17 bounds the factor
    ``(1+|x|^2)/|x|^2`` at ``|x| = 1/4``), then amplitude and offset from the
    two radius conditions."""
    if not (0 < beta <= 1):
        raise BarrierError(f"beta must be in (0, 1], got {beta}")
    if lam < 1:
        raise BarrierError(f"Lambda must be >= 1, got {lam}")
    sigma = sigma_ladder(17.0 * (dim + 2) * lam ** 2 / beta)
    s1 = 1.0 + 2.25 * dim  # 1 + ((3/2) sqrt(N))^2
    s2 = 1.0 + 4.0 * dim   # 1 + (2 sqrt(N))^2
    q = sigma * (np.log(s1) - np.log(s2))  # log of (s1/s2)^sigma, negative
    log_A = np.log(2.0) + sigma * np.log(s1) - np.log1p(-np.exp(q))
    if log_A > _LOG_FLOAT_MAX:
        raise BarrierError(
            f"barrier amplitude exp({log_A:.1f}) exceeds the float range; "
            f"sigma={sigma} is too large for these parameters"
        )
    B = float(np.exp(log_A - sigma * np.log1p(4.0 * dim)))
    eps0 = 1.0 / (lam * np.sqrt(2.0 * (sigma + 2.0)))
    return GlobalBarrier(sigma, float(log_A), B, float(eps0), dim, float(lam), float(beta))


# ---------------------------------------------------------------------------
# annular barrier

@dataclass(frozen=True)
class AnnularBarrier:
    sigma: int
    center: tuple[float, ...]
    r_inner: float
    eps: float
    lam: float
    beta: float
    dim: int
    inf_value: float
    log_amp: float  # log of inf_value / ((r - lam eps)^(-2s) - 4^(-2s)), -inf if trivial

    @property
    def kappa(self) -> float:
        return self.lam * np.sqrt(2.0 * (self.sigma + 2.0))

    def value_radial(self, w):
        w = np.asarray(w, dtype=float)
        if self.inf_value == 0.0:
            return np.zeros_like(w)
        return np.exp(self.log_amp) * (np.exp(-2.0 * self.sigma * np.log(w))
                                       - 4.0 ** (-2.0 * self.sigma))

    def value(self, points):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        return self.value_radial(np.linalg.norm(pts - np.asarray(self.center), axis=1))

    def __call__(self, points):
        return self.value(points)

    def psi_radial(self, w):
        w = np.asarray(w, dtype=float)
        bracket = self.lam ** 2 - self.beta * (self.sigma + 1.0) / (self.dim + 2.0)
        if self.inf_value == 0.0:
            return np.zeros_like(w)
        return np.exp(self.log_amp + np.log(self.sigma)
                      - (2.0 * self.sigma + 2.0) * np.log(w)) * bracket

    def grad_bound(self, w_lo: float, w_hi: float) -> float:
        if self.inf_value == 0.0:
            return 0.0
        # |Psi'(w)| = 2 sigma amp w^(-2 sigma - 1), decreasing in w
        w = max(w_lo, 1e-12)
        return float(np.exp(self.log_amp + np.log(2.0 * self.sigma)
                            - (2.0 * self.sigma + 1.0) * np.log(w)))


def build_annular_barrier(z, r: float, eps: float, lam: float, dim: int,
                          beta: float, inf_value: float) -> AnnularBarrier:
    """Annular barrier on ``B_4(z) \\ closure(B_r(z))`` pinned to
    ``inf_value`` at radius ``r - Lambda eps`` and to 0 at radius 4."""
    if inf_value < 0:
        raise BarrierError(f"inf_value must be nonnegative, got {inf_value}")
    sigma = sigma_ladder((dim + 2) * lam ** 2 / beta)
    kappa = lam * np.sqrt(2.0 * (sigma + 2.0))
    if not r > kappa * eps:
        raise BarrierError(f"need r > kappa*eps = {kappa * eps:.6g}, got r={r}")
    if not r < 1:
        raise BarrierError(f"need r < 1, got r={r}")
    w0 = r - lam * eps
    log_denom_hi = -2.0 * sigma * np.log(w0)
    if log_denom_hi > _LOG_FLOAT_MAX:
        raise BarrierError("inner-radius power exceeds the float range")
    denom = np.exp(log_denom_hi) * (1.0 - np.exp(-2.0 * sigma * (np.log(4.0) - np.log(w0))))
    log_amp = (np.log(inf_value) - np.log(denom)) if inf_value > 0 else -np.inf
    return AnnularBarrier(sigma, tuple(np.asarray(z, dtype=float)), float(r),
                          float(eps), float(lam), float(beta), dim,
                          float(inf_value), float(log_amp))


# ---------------------------------------------------------------------------
# verification engine

def _radial_delta(profile_radial, center, x, offsets):
    """d Psi(x, offsets) for a radial profile, vectorized over offsets."""
    x = np.asarray(x, dtype=float).reshape(1, -1)
    c = np.asarray(center, dtype=float).reshape(1, -1)
    r_plus = np.linalg.norm(x + offsets - c, axis=1)
    r_minus = np.linalg.norm(x - offsets - c, axis=1)
    r0 = float(np.linalg.norm(x - c))
    v = profile_radial(np.concatenate([r_plus, r_minus, [r0]]))
    m = offsets.shape[0]
    return v[:m] + v[m:2 * m] - 2.0 * v[-1]


def _verify_radial(profile_radial, psi_vals, grad_bound_fn, center,
                   params: OperatorParams, samples, net: DirectionNet,
                   h: float) -> dict:
    eps, alpha, beta = params.eps, params.alpha, params.beta
    dim = np.atleast_2d(samples).shape[1]
    k1 = ball_lattice_offsets(eps, h, dim)
    ratio = eps / h
    h2 = eps / (2.0 * ratio + 0.5)
    k2 = ball_lattice_offsets(eps, h2, dim)

    margins = np.empty(len(samples))
    tols = np.empty(len(samples))
    c = np.asarray(center, dtype=float)
    for i, x in enumerate(np.atleast_2d(samples)):
        d_net = _radial_delta(profile_radial, c, x, eps * net.points)
        d_ball = _radial_delta(profile_radial, c, x, k1 * h)
        d_ball2 = _radial_delta(profile_radial, c, x, k2 * h2)
        inf_net = float(d_net.min())
        I1, I2 = float(d_ball.mean()), float(d_ball2.mean())
        value = (alpha * inf_net + beta * I1) / (2.0 * eps ** 2)
        margins[i] = value + psi_vals[i]
        w = float(np.linalg.norm(x - c))
        lip = 2.0 * eps * grad_bound_fn(w - params.lam * eps, w + params.lam * eps)
        tols[i] = alpha * lip * net.resolution / (2.0 * eps ** 2) \
            + beta * abs(I1 - I2) * (4.0 / 3.0) / (2.0 * eps ** 2)

    ok = margins >= -tols
    return {
        "min_margin": float(margins.min()),
        "argmin_sample": int(np.argmin(margins)),
        "max_tol": float(tols.max()),
        "net_resolution": net.resolution,
        "quad_ratio": ratio,
        "failures": int((~ok).sum()),
        "samples": len(margins),
        "pass": bool(ok.all()),
        "margins": margins,
        "tols": tols,
    }


def verify_global_barrier(barrier: GlobalBarrier, params: OperatorParams,
                          samples, net: DirectionNet, h: float) -> dict:
    """Check ``L- Psi + psi >= -tol`` at the samples, with the inf over the
    direction net and the ball mean over the node quadrature."""
    if params.eps > barrier.eps0 * (1 + 1e-12):
        raise BarrierError(f"eps={params.eps} exceeds the barrier's eps0={barrier.eps0}")
    if not (params.lam == barrier.lam and params.beta == barrier.beta):
        raise BarrierError("operator parameters do not match the barrier's")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    psi_vals = barrier.psi(samples)
    rep = _verify_radial(barrier.value_radial, psi_vals, barrier.grad_bound,
                         np.zeros(barrier.dim), params, samples, net, h)
    rep["kind"] = "global"
    rep["sigma"] = barrier.sigma
    rep["eps0"] = barrier.eps0
    return rep


def verify_annular_barrier(barrier: AnnularBarrier, params: OperatorParams,
                           samples, net: DirectionNet, h: float) -> dict:
    """Check ``L- Psi >= -tol`` at annulus samples (psi <= 0 there by the
    exponent ladder, so the closed-form claim reduces to this)."""
    eps0 = 1.0 / barrier.kappa
    if params.eps >= eps0:
        raise BarrierError(f"eps={params.eps} must be below 1/kappa={eps0}")
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    w = np.linalg.norm(samples - np.asarray(barrier.center), axis=1)
    if np.any(w <= barrier.r_inner) or np.any(w >= 4.0):
        raise BarrierError("samples must lie in the open annulus r < |x-z| < 4")
    psi_vals = np.zeros(len(samples))  # check L- Psi >= -tol directly
    rep = _verify_radial(barrier.value_radial, psi_vals, barrier.grad_bound,
                         barrier.center, params, samples, net, h)
    rep["kind"] = "annular"
    rep["sigma"] = barrier.sigma
    rep["kappa"] = barrier.kappa
    rep["psi_max_on_samples"] = float(barrier.psi_radial(w).max())
    return rep


# ---------------------------------------------------------------------------
# infimum decay via the annular barrier

def decay_prefactor_log(sigma: int) -> float:
    """log of ``(3^(-2s) - 4^(-2s))^(-1) 2^(2s)``, the annular-barrier decay
    constant."""
    s2 = 2.0 * sigma
    return s2 * np.log(2.0) + s2 * np.log(3.0) - np.log1p(-np.exp(-s2 * (np.log(4.0) - np.log(3.0))))


def infimum_decay_check(u, z, radii, params: OperatorParams, rho: float = 0.0,
                        sigma: int | None = None) -> dict:
    """Check ``inf_{B_r(z)} u <= C r^(-2 sigma) inf_{B_1} u + 9 A rho`` over a
    radius ladder, with ``C`` the annular-barrier constant and ``A`` the
    smallest shift weight with ``1 - A beta N/(N+2) <= 0``."""
    from .lattice import GridFunction

    if not isinstance(u, GridFunction):
        raise BarrierError("infimum_decay_check expects a grid function")
    dim = u.lattice.dim
    if sigma is None:
        sigma = sigma_ladder((dim + 2) * params.lam ** 2 / params.beta)
    kappa = params.lam * np.sqrt(2.0 * (sigma + 2.0))
    nodes = u.lattice.nodes()
    if float(u.values.min()) < -1e-12:
        raise BarrierError("u must be nonnegative")
    z = np.asarray(z, dtype=float)
    dist_z = np.linalg.norm(nodes - z, axis=1)
    dist_0 = np.linalg.norm(nodes, axis=1)
    inf_b1 = float(u.values[dist_0 < 1.0].min())
    logC = decay_prefactor_log(sigma)
    A_shift = (dim + 2.0) / (params.beta * dim)
    rows = []
    all_pass = True
    for r in radii:
        if not (kappa * params.eps < r < 1.0):
            raise BarrierError(f"radius {r} outside (kappa*eps, 1) = ({kappa * params.eps:.6g}, 1)")
        lhs = float(u.values[dist_z < r].min())
        log_main = logC - 2.0 * sigma * np.log(r) + (np.log(inf_b1) if inf_b1 > 0 else -np.inf)
        main = float(np.exp(log_main)) if log_main < _LOG_FLOAT_MAX else np.inf
        rhs = main + 9.0 * A_shift * rho
        ok = lhs <= rhs * (1 + 1e-12) + 1e-300
        all_pass &= ok
        emp = lhs / (r ** (-2.0 * sigma) * inf_b1 + rho) if (inf_b1 > 0 or rho > 0) else np.inf
        rows.append({"r": r, "lhs": lhs, "rhs": rhs, "log10_rhs": log_main / np.log(10.0),
                     "empirical_C": emp, "pass": bool(ok)})
    return {
        "sigma": sigma,
        "kappa": kappa,
        "log10_C": logC / np.log(10.0),
        "shift_weight": A_shift,
        "inf_B1": inf_b1,
        "rows": rows,
        "pass": bool(all_pass),
    }
