import numpy as np
import pytest

from dpplab.lattice import GridFunction, centered_lattice
from dpplab.measures import FixedPairFamily, UniformBallFamily, direction_net
from dpplab.operators import (
    OperatorParams,
    apply_controlled,
    apply_L,
    apply_L_both_forms,
    apply_L_minus,
    apply_L_plus,
    apply_pucci_plus,
    delta_u,
    diagonal_matrix_net,
    ellipticity_bounds,
    limit_matrix,
)


def affine(points):
    return 0.7 * points[:, 0] - 1.3 * points[:, -1] + 0.25


def quadratic_neg(points):
    return -np.einsum("ij,ij->i", points, points)


@pytest.fixture
def params2():
    return OperatorParams(beta=0.5, eps=0.2, lam=2.0)


@pytest.fixture
def ball_family(params2):
    return UniformBallFamily(params2.eps, params2.eps / 10.5, 2)


class TestSecondDifference:
    def test_affine_annihilation(self):
        assert delta_u(affine, [0.3, -0.2], [0.15, 0.4]) == pytest.approx(0.0, abs=1e-12)

    def test_quadratic_identity(self):
        u = lambda p: np.einsum("ij,ij->i", p, p)
        y = np.array([0.3, -0.1])
        got = delta_u(u, [0.5, 0.7], y)
        assert got == pytest.approx(2 * float(y @ y), abs=1e-12)

    def test_matches_three_point_formula_on_grid(self, rng):
        lat = centered_lattice(2.0, 0.05, 1)
        u = GridFunction(lat, rng.standard_normal(lat.node_count))
        for _ in range(100):
            i = int(rng.integers(5, lat.node_count - 5))
            k = int(rng.integers(1, 5))
            x = lat.nodes()[i]
            y = np.array([k * lat.h])
            direct = u.values[i + k] + u.values[i - k] - 2 * u.values[i]
            assert delta_u(u, x, y) == pytest.approx(direct, abs=1e-14)


class TestLinearOperator:
    def test_affine_gives_zero(self, params2, ball_family):
        val = apply_L(affine, np.array([0.1, 0.2]), params2, ball_family, params2.eps / 10.5)
        assert abs(val) < 1e-10

    def test_closed_form_on_negative_quadratic(self):
        # family with all atoms at radius Lambda: alpha-part contributes
        # -alpha Lambda^2, ball mean contributes -beta N/(N+2), up to O(h/eps)
        params = OperatorParams(beta=0.4, eps=0.25, lam=2.0)
        h = params.eps / 20.5
        z = np.array([[2.0, 0.0], [0.0, 2.0]])
        fam = FixedPairFamily(z, np.array([0.5, 0.5]), lam=2.0)
        val = apply_L(quadratic_neg, np.array([0.3, -0.4]), params, fam, h)
        want = -(params.alpha * params.lam ** 2 + params.beta * 2.0 / 4.0)
        assert val == pytest.approx(want, rel=5e-3)

    def test_forms_agree_to_roundoff(self, rng, params2, ball_family):
        lat = centered_lattice(2.0, params2.eps / 10.5, 2)
        u = GridFunction(lat, rng.standard_normal(lat.node_count))
        for _ in range(20):
            x = rng.uniform(-0.8, 0.8, 2)
            d, direct = apply_L_both_forms(u, x, params2, ball_family, lat.h)
            assert d == pytest.approx(direct, rel=1e-12, abs=1e-12)

    def test_monotone_in_the_function(self, rng, params2, ball_family):
        lat = centered_lattice(2.0, params2.eps / 10.5, 2)
        base = rng.standard_normal(lat.node_count)
        bump = np.abs(rng.standard_normal(lat.node_count))
        x = np.zeros(2)
        i0 = lat.nearest_index(x[None, :])[0]
        bump[i0] = 0.0  # keep u(x) = v(x)
        u = GridFunction(lat, base)
        v = GridFunction(lat, base + bump)
        assert apply_L(u, x, params2, ball_family, lat.h) \
            <= apply_L(v, x, params2, ball_family, lat.h) + 1e-12


class TestExtremalOperators:
    def test_affine_gives_zero(self, params2):
        net = direction_net(params2.lam, 0.25, 2)
        h = params2.eps / 10.5
        plus, _ = apply_L_plus(affine, np.zeros(2), params2, net, h)
        minus, _ = apply_L_minus(affine, np.zeros(2), params2, net, h)
        assert abs(plus) < 1e-10 and abs(minus) < 1e-10

    def test_minimal_on_negative_quadratic_converges_in_resolution(self):
        params = OperatorParams(beta=0.4, eps=0.2, lam=2.0)
        h = params.eps / 20.5
        want = -(params.alpha * params.lam ** 2 + params.beta * 2.0 / 4.0)
        errs = []
        for res in (0.8, 0.4, 0.2, 0.1):
            net = direction_net(params.lam, res, 2)
            val, argdir = apply_L_minus(quadratic_neg, np.array([0.1, 0.3]), params, net, h)
            errs.append(abs(val - want))
        assert errs[-1] < 5e-3
        assert errs[-1] <= errs[0]
        # extremal direction sits on the outer shell
        assert np.linalg.norm(argdir) == pytest.approx(params.lam, abs=1e-9)

    def test_net_monotonicity(self, rng, params2):
        lat = centered_lattice(2.0, params2.eps / 10.5, 2)
        u = GridFunction(lat, rng.standard_normal(lat.node_count))
        h = lat.h
        small = direction_net(params2.lam, 0.5, 2)
        big = small.with_points(rng.uniform(-1, 1, (40, 2)))
        x = np.array([0.15, -0.2])
        assert apply_L_plus(u, x, params2, big, h)[0] \
            >= apply_L_plus(u, x, params2, small, h)[0] - 1e-14
        assert apply_L_minus(u, x, params2, big, h)[0] \
            <= apply_L_minus(u, x, params2, small, h)[0] + 1e-14

    def test_sandwich_on_random_grid_functions(self, rng, params2, ball_family):
        lat = centered_lattice(1.5, params2.eps / 10.5, 2)
        h = lat.h
        pairs = ball_family.atom_pairs(None)
        net = direction_net(params2.lam, 0.4, 2).with_points(pairs.z)
        for _ in range(50):
            u = GridFunction(lat, rng.standard_normal(lat.node_count))
            x = lat.nodes()[lat.nearest_index(rng.uniform(-0.5, 0.5, (1, 2)))[0]]
            mid = apply_L(u, x, params2, ball_family, h)
            lo, _ = apply_L_minus(u, x, params2, net, h)
            hi, _ = apply_L_plus(u, x, params2, net, h)
            assert lo <= mid + 1e-10
            assert mid <= hi + 1e-10


class TestDistortedBallOperator:
    def test_affine_gives_zero(self, params2):
        mats = diagonal_matrix_net(params2.lam, 2, rungs=3)
        val, _ = apply_pucci_plus(affine, np.zeros(2), params2, mats, params2.eps / 10.5)
        assert abs(val) < 1e-10

    def test_separable_quadratic_picks_the_long_axis(self):
        params = OperatorParams(beta=0.25, eps=0.2, lam=2.0)
        u = lambda p: p[:, 0] ** 2
        mats = diagonal_matrix_net(params.lam, 2, rungs=4)
        val, arg = apply_pucci_plus(u, np.array([0.3, 0.1]), params, mats, params.eps / 20.5)
        assert val == pytest.approx(params.lam ** 2 / 4.0, rel=1e-2)
        assert arg[0, 0] == pytest.approx(params.lam)

    def test_dominated_by_maximal_operator_at_matched_beta(self, rng):
        lam = 2.0
        dim = 2
        params = OperatorParams(beta=lam ** -dim, eps=0.2, lam=lam)
        h = params.eps / 10.5
        lat = centered_lattice(1.5, h, dim)
        mats = diagonal_matrix_net(lam, dim, rungs=3)
        net = direction_net(lam, 0.15, dim)
        for _ in range(50):
            u = GridFunction(lat, rng.standard_normal(lat.node_count))
            x = lat.nodes()[lat.nearest_index(rng.uniform(-0.4, 0.4, (1, dim)))[0]]
            lp, _ = apply_L_plus(u, x, params, net, h)
            pp, _ = apply_pucci_plus(u, x, params, mats, h)
            assert lp >= pp - max(1.0, abs(pp)) * 0.05

    def test_rejects_matrix_outside_band(self, params2):
        with pytest.raises(Exception):
            apply_pucci_plus(affine, np.zeros(2), params2,
                             [np.diag([0.5, 1.0])], params2.eps / 10.5)


class TestControlledUpdates:
    def test_constant_is_fixed_by_all_kinds(self, params2):
        const = lambda p: np.full(p.shape[0], 3.25)
        h = params2.eps / 10.5
        net = direction_net(params2.lam, 0.5, 2)
        for control in (("tow", None), ("sup-pair", net),
                        ("sup-inf", [net.points[:5], net.points[5:9]])):
            val = apply_controlled(const, np.zeros(2), params2, control, h)
            assert val == pytest.approx(3.25, abs=1e-12)

    def test_tow_on_linear_slope_cancels(self, params2):
        u = lambda p: p[:, 0]
        h = params2.eps / 10.5
        val = apply_controlled(u, np.array([0.3, 0.1]), params2, ("tow", None), h)
        assert val == pytest.approx(0.3, abs=2 * h)

    def test_empty_catalog_rejected(self, params2):
        with pytest.raises(Exception):
            apply_controlled(affine, np.zeros(2), params2, ("sup-inf", []), 0.02)


class TestLimitMatrix:
    def test_pure_mean_value_case(self):
        params = OperatorParams(beta=1.0, eps=0.2, lam=1.0)
        fam = UniformBallFamily(params.eps, params.eps / 10.5, 2)
        A = limit_matrix(fam, params, np.zeros(2))
        np.testing.assert_allclose(A, np.eye(2) / 8.0, atol=1e-12)

    def test_single_axis_pair(self):
        params = OperatorParams(beta=0.4, eps=0.2, lam=2.0)
        fam = FixedPairFamily(np.array([[2.0, 0.0]]), np.array([1.0]), lam=2.0)
        A = limit_matrix(fam, params, np.zeros(2))
        lo = params.beta / 8.0
        np.testing.assert_allclose(A, np.diag([params.alpha * 2.0 + lo, lo]), atol=1e-14)

    def test_eigenvalues_in_band(self, rng):
        params = OperatorParams(beta=0.3, eps=0.2, lam=2.0)
        lo, hi = ellipticity_bounds(params, 2)
        for _ in range(20):
            m = int(rng.integers(1, 6))
            z = rng.uniform(-1, 1, (m, 2))
            z = z / np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-9) \
                * rng.uniform(0.1, params.lam, (m, 1))
            fam = FixedPairFamily(z, rng.uniform(0.1, 1.0, m), lam=params.lam)
            eig = np.linalg.eigvalsh(limit_matrix(fam, params, np.zeros(2)))
            assert eig[0] >= lo - 1e-12
            assert eig[-1] <= hi + 1e-12


class TestSmallStepConsistency:
    def test_first_order_in_eps_on_quartic(self):
        # u = x1^2 + x1^4: exact trace term is 2*A11*(1 + 6 x1^2)
        u = lambda p: p[:, 0] ** 2 + p[:, 0] ** 4
        x = np.array([0.3, -0.2])
        errs = []
        for eps in (0.4, 0.2, 0.1):
            params = OperatorParams(beta=0.5, eps=eps, lam=2.0)
            fam = FixedPairFamily(np.array([[2.0, 0.0]]), np.array([1.0]), lam=2.0)
            A = limit_matrix(fam, params, x)
            # second derivative of u: diag(2 + 12 x1^2, 0)
            trace = A[0, 0] * (2 + 12 * x[0] ** 2)
            val = apply_L(u, x, params, fam, eps / 20.5)
            errs.append(abs(val - trace))
        order = np.log(errs[0] / errs[-1]) / np.log(4.0)
        assert order >= 1.0
        assert errs[-1] < errs[0]
