import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dpplab.barriers import (
    BarrierError,
    abc_inequality,
    build_annular_barrier,
    build_global_barrier,
    decay_prefactor_log,
    infimum_decay_check,
    sigma_ladder,
    verify_annular_barrier,
    verify_global_barrier,
)
from dpplab.lattice import Ball, GridFunction, centered_lattice
from dpplab.measures import UniformBallFamily, direction_net
from dpplab.operators import OperatorParams
from dpplab.solver import make_problem, solve_dpp


class TestScalarInequality:
    def test_degenerate_small_b_with_zero_c(self):
        lhs, rhs, holds = abc_inequality(1.0, 1e-15, 0.0, 2.0)
        assert holds
        assert abs(lhs) < 1e-12 and abs(rhs) < 1e-12

    def test_worked_example(self):
        lhs, rhs, holds = abc_inequality(2.0, 0.1, 0.5, 1.0)
        assert lhs == pytest.approx(1 / 2.6 + 1 / 1.6 - 1.0, abs=1e-12)
        assert rhs == pytest.approx(0.003125, abs=1e-12)
        assert holds

    def test_million_random_tuples(self, rng):
        n = 1_000_000
        a = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), n))
        b = np.exp(rng.uniform(np.log(1e-4), np.log(1e1), n))
        c = rng.uniform(-1, 1, n) * (a + b) * 0.999999
        sigma = rng.uniform(1e-3, 10.0, n)
        _, _, holds = abc_inequality(a, b, c, sigma)
        assert holds.all()

    @given(a=st.floats(0.01, 100), b=st.floats(1e-4, 10),
           t=st.floats(-0.999, 0.999), sigma=st.floats(0.001, 10))
    @settings(max_examples=300, deadline=None)
    def test_property_random(self, a, b, t, sigma):
        _, _, holds = abc_inequality(a, b, t * (a + b), sigma)
        assert holds

    def test_rejects_bad_input(self):
        with pytest.raises(BarrierError):
            abc_inequality(-1.0, 1.0, 0.0, 1.0)
        with pytest.raises(BarrierError):
            abc_inequality(1.0, 1.0, 2.5, 1.0)
        with pytest.raises(BarrierError):
            abc_inequality(1.0, 1.0, 0.0, -1.0)


class TestGlobalBarrier:
    @pytest.mark.parametrize("dim,lam,beta", [(1, 1.0, 1.0), (2, 1.0, 0.5), (3, 1.5, 0.75)])
    def test_radius_pinning(self, dim, lam, beta):
        b = build_global_barrier(dim, lam, beta)
        r1 = 1.5 * np.sqrt(dim)
        r2 = 2.0 * np.sqrt(dim)
        assert b.value_radial(r1) == pytest.approx(2.0, rel=1e-10)
        assert abs(b.value_radial(r2)) < 1e-10 * max(1.0, b.B)
        # above 2 on the inner cube, nonpositive outside the outer ball
        assert b.value_radial(r1 * 0.99) > 2.0
        assert b.value_radial(r2 * 1.01) < 0.0

    def test_sigma_satisfies_ladder_condition(self):
        for dim, lam, beta in ((1, 1.0, 1.0), (2, 1.0, 0.5), (3, 1.5, 0.75)):
            b = build_global_barrier(dim, lam, beta)
            assert lam ** 2 - beta * (b.sigma + 1) / (17 * (dim + 2)) <= 0
            half = b.sigma // 2
            if half >= 1:
                assert lam ** 2 - beta * (half + 1) / (17 * (dim + 2)) > 0

    def test_companion_peak_at_origin(self):
        b = build_global_barrier(2, 1.0, 0.5)
        assert b.psi_radial(0.0) == pytest.approx(b.A * b.sigma * b.lam ** 2, rel=1e-12)
        radii = np.linspace(0.0, 5.0, 10_001)
        psi = b.psi_radial(radii)
        assert psi.max() == pytest.approx(b.psi_at_zero(), rel=1e-12)
        assert (psi <= b.psi_at_zero() * (1 + 1e-12)).all()

    def test_companion_nonpositive_off_quarter_ball(self):
        for dim, lam, beta in ((1, 1.0, 1.0), (2, 1.0, 0.5)):
            b = build_global_barrier(dim, lam, beta)
            radii = np.linspace(0.25, 4 * np.sqrt(dim), 10_000)
            assert (b.psi_radial(radii) <= 0).all()

    def test_eps0_formula(self):
        b = build_global_barrier(2, 1.0, 0.5)
        assert b.eps0 == pytest.approx(1.0 / np.sqrt(2.0 * (b.sigma + 2)))

    def test_overflow_guarded(self):
        with pytest.raises(BarrierError):
            build_global_barrier(3, 4.0, 0.01)

    @pytest.mark.parametrize("dim", [1, 2])
    @pytest.mark.parametrize("eps_factor", [1.0, 0.5])
    def test_verification_margin(self, rng, dim, eps_factor):
        beta = 1.0 if dim == 1 else 0.5
        b = build_global_barrier(dim, 1.0, beta)
        eps = b.eps0 * eps_factor
        params = OperatorParams(beta=beta, eps=eps, lam=1.0)
        net = direction_net(1.0, 0.05, dim)
        h = eps / 10.5
        n_samples = 1000
        pts = rng.standard_normal((n_samples, dim))
        pts = pts / np.maximum(np.linalg.norm(pts, axis=1, keepdims=True), 1e-12) \
            * (2 * np.sqrt(dim) * rng.uniform(0, 1, (n_samples, 1)) ** (1 / dim))
        rep = verify_global_barrier(b, params, pts, net, h)
        assert rep["pass"], f"min margin {rep['min_margin']} vs tol {rep['max_tol']}"

    def test_refinement_improves_margin(self, rng):
        b = build_global_barrier(1, 1.0, 1.0)
        params = OperatorParams(beta=1.0, eps=b.eps0, lam=1.0)
        pts = np.linspace(-2, 2, 41)[:, None]
        tols = []
        for res, ratio in ((0.2, 5.5), (0.1, 10.5), (0.05, 20.5)):
            net = direction_net(1.0, res, 1)
            rep = verify_global_barrier(b, params, pts, net, b.eps0 / ratio)
            tols.append(rep["max_tol"])
            assert rep["pass"]
        assert tols[0] > tols[1] > tols[2]

    def test_eps_above_threshold_rejected(self):
        b = build_global_barrier(1, 1.0, 1.0)
        params = OperatorParams(beta=1.0, eps=2 * b.eps0, lam=1.0)
        with pytest.raises(BarrierError):
            verify_global_barrier(b, params, np.zeros((1, 1)), direction_net(1.0, 0.2, 1), 0.01)


class TestAnnularBarrier:
    def make(self, dim=2, beta=0.5, lam=1.0, r=0.5, m=2.0):
        sigma = sigma_ladder((dim + 2) * lam ** 2 / beta)
        kappa = lam * np.sqrt(2.0 * (sigma + 2))
        eps = 0.9 * r / kappa
        z = np.zeros(dim)
        return build_annular_barrier(z, r, eps, lam, dim, beta, m), eps

    def test_boundary_values_exact(self):
        b, eps = self.make()
        w0 = b.r_inner - b.lam * b.eps
        assert b.value_radial(w0) == pytest.approx(b.inf_value, rel=1e-12)
        assert b.value_radial(4.0) == pytest.approx(0.0, abs=1e-12 * b.inf_value)

    def test_radially_decreasing(self):
        b, eps = self.make()
        w = np.linspace(b.r_inner - b.lam * b.eps, 4.5, 1000)
        v = b.value_radial(w)
        assert (np.diff(v) < 0).all()

    def test_half_factor_identities(self):
        # at r = kappa eps the curvature correction factor equals 1/2,
        # at r = 2 kappa eps it equals 7/8
        b, eps = self.make()
        sigma, lam = b.sigma, b.lam
        kappa = b.kappa
        for mult, want in ((1.0, 0.5), (2.0, 7.0 / 8.0)):
            r = mult * kappa * eps
            factor = 1.0 - (sigma + 2) * lam ** 2 * eps ** 2 / r ** 2
            assert factor == pytest.approx(want, rel=1e-12)

    def test_companion_nonpositive_on_annulus(self):
        b, eps = self.make()
        w = np.linspace(b.r_inner * 1.001, 4.0, 500)
        assert (b.psi_radial(w) <= 0).all()

    def test_verification_mid_annulus_and_inner_ring(self, rng):
        b, eps = self.make(dim=2)
        params = OperatorParams(beta=b.beta, eps=eps, lam=b.lam)
        net = direction_net(b.lam, 0.05, 2)
        h = eps / 10.5
        theta = rng.uniform(0, 2 * np.pi, 60)
        mid = 2.0 * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        ring_r = b.r_inner + b.lam * eps + 2 * h
        ring = ring_r * np.stack([np.cos(theta), np.sin(theta)], axis=1)
        rep = verify_annular_barrier(b, params, np.vstack([mid, ring]), net, h)
        assert rep["pass"], f"min margin {rep['min_margin']} vs tol {rep['max_tol']}"
        assert rep["psi_max_on_samples"] <= 0

    def test_1d_verification(self):
        b, eps = self.make(dim=1, beta=1.0, r=0.4)
        params = OperatorParams(beta=1.0, eps=eps, lam=1.0)
        net = direction_net(1.0, 0.05, 1)
        samples = np.linspace(b.r_inner + 1.2 * eps, 3.9, 50)[:, None]
        rep = verify_annular_barrier(b, params, samples, net, eps / 10.5)
        assert rep["pass"]

    def test_preconditions(self):
        with pytest.raises(BarrierError):
            build_annular_barrier(np.zeros(2), 0.01, 0.05, 1.0, 2, 0.5, 1.0)  # r <= kappa eps
        with pytest.raises(BarrierError):
            build_annular_barrier(np.zeros(2), 1.5, 0.01, 1.0, 2, 0.5, 1.0)  # r >= 1
        with pytest.raises(BarrierError):
            build_annular_barrier(np.zeros(2), 0.5, 0.01, 1.0, 2, 0.5, -1.0)  # negative inf


class TestInfimumDecay:
    def test_constant_function_has_margin(self):
        lat = centered_lattice(7.5, 0.25, 1)
        u = GridFunction(lat, np.full(lat.node_count, 2.0))
        params = OperatorParams(beta=1.0, eps=0.02, lam=1.0)
        out = infimum_decay_check(u, np.array([0.5]), [0.3, 0.6, 0.9], params, rho=0.0)
        assert out["pass"]
        for row in out["rows"]:
            # constant u: lhs = inf; rhs = C r^(-2 sigma) inf >= inf
            assert row["rhs"] >= row["lhs"]

    def test_solved_instance_ladder(self):
        eps = 0.05
        params = OperatorParams(beta=1.0, eps=eps, lam=1.0)
        h = eps / 5.5
        g = lambda p: 1.0 + np.abs(p[:, 0])  # distance-like, positive
        prob = make_problem(Ball((0.0,), 7.0), params, h=h, f=0.0, g=g,
                            kind="linear", family=UniformBallFamily(eps, h, 1))
        u, rep = solve_dpp(prob, tol=1e-8, scheme="gauss-seidel")
        out = infimum_decay_check(u, np.array([0.4]), [0.2, 0.4, 0.8], params,
                                  rho=rep.residual / eps ** 2)
        assert out["pass"]

    def test_edge_radius_just_above_kappa_eps(self):
        lat = centered_lattice(7.5, 0.05, 1)
        u = GridFunction(lat, 1.0 + np.abs(lat.nodes()[:, 0]))
        params = OperatorParams(beta=1.0, eps=0.02, lam=1.0)
        sigma = sigma_ladder(3.0 / 1.0)
        kappa = 1.0 * np.sqrt(2 * (sigma + 2))
        r_edge = kappa * params.eps + 2 * lat.h
        out = infimum_decay_check(u, np.zeros(1), [r_edge], params, rho=0.0)
        assert out["pass"]

    def test_radius_range_enforced(self):
        lat = centered_lattice(7.5, 0.25, 1)
        u = GridFunction(lat, np.ones(lat.node_count))
        params = OperatorParams(beta=1.0, eps=0.5, lam=1.0)
        with pytest.raises(BarrierError):
            infimum_decay_check(u, np.zeros(1), [0.2], params)

    def test_prefactor_log_matches_direct_arithmetic(self):
        for sigma in (2, 8, 16):
            want = np.log(2.0 ** (2 * sigma) / (3.0 ** (-2 * sigma) - 4.0 ** (-2 * sigma)))
            assert decay_prefactor_log(sigma) == pytest.approx(want, rel=1e-12)
