import numpy as np
import pytest

from dpplab.lattice import centered_lattice
from dpplab.measures import (
    AtomPairs,
    AxisAtomFamily,
    EllipsoidFamily,
    FixedPairFamily,
    MeasureError,
    MeasureFamily,
    UniformBallFamily,
    ball_lattice_offsets,
    direction_net,
    second_moment_matrix,
    uniform_ball_quadrature,
    validate_family,
)

# half-integer eps/h ratios keep ball-boundary nodes off the sphere, which is
# what gives the node-counting quadrature its second-order moment accuracy
RATIOS = (5.5, 10.5, 20.5)


def coordinate_moment(pairs: AtomPairs, axis=0) -> float:
    return float(np.dot(pairs.w, pairs.z[:, axis] ** 2))


def radial_moment(pairs: AtomPairs) -> float:
    return float(np.dot(pairs.w, np.einsum("ij,ij->i", pairs.z, pairs.z)))


class TestUniformBallMoments:
    @pytest.mark.parametrize("dim", [1, 2, 3])
    def test_second_moments_at_finest_ratio(self, dim):
        eps = 1.0
        pairs = UniformBallFamily(eps, eps / 20.5, dim).atom_pairs(None)
        want_coord = 1.0 / (dim + 2)
        want_radial = dim / (dim + 2)
        assert abs(coordinate_moment(pairs) - want_coord) / want_coord < 0.01
        assert abs(radial_moment(pairs) - want_radial) / want_radial < 0.01

    def test_moment_error_second_order_1d(self):
        eps = 1.0
        errs = []
        for ratio in RATIOS:
            pairs = UniformBallFamily(eps, eps / ratio, 1).atom_pairs(None)
            errs.append(abs(coordinate_moment(pairs) - 1.0 / 3.0))
        rates = [np.log(errs[i] / errs[i + 1]) / np.log(RATIOS[i + 1] / RATIOS[i])
                 for i in range(2)]
        assert min(rates) > 1.8  # clean second order in 1d

    @pytest.mark.parametrize("dim", [2, 3])
    def test_moment_error_shrinks_down_the_ladder(self, dim):
        # node counts in balls fluctuate (lattice-point noise), so higher
        # dimensions only give a decreasing error envelope, well inside 1%
        eps = 1.0
        errs = []
        for ratio in RATIOS:
            pairs = UniformBallFamily(eps, eps / ratio, dim).atom_pairs(None)
            errs.append(abs(coordinate_moment(pairs) - 1.0 / (dim + 2)))
        assert errs[-1] < errs[0]
        assert errs[-1] / (1.0 / (dim + 2)) < 0.01

    def test_first_moment_vanishes_by_pairing(self):
        pairs = UniformBallFamily(1.0, 1 / 10.5, 2).atom_pairs(None)
        # the measure is sum_i (w_i/2)(delta_z + delta_-z): its first moment
        # is identically zero as a symmetrized sum
        first = np.einsum("i,ij->j", pairs.w, pairs.z) \
            + np.einsum("i,ij->j", pairs.w, -pairs.z)
        np.testing.assert_array_equal(first, 0.0)

    def test_weights_sum_to_one_exactly_enough(self):
        for dim in (1, 2, 3):
            pairs = UniformBallFamily(1.0, 1 / 5.5, dim).atom_pairs(None)
            assert abs(pairs.w.sum() - 1.0) < 1e-14

    def test_needs_enough_cells(self):
        with pytest.raises(MeasureError):
            ball_lattice_offsets(0.1, 0.06, 1)

    def test_quadrature_helper_matches_family(self):
        lat = centered_lattice(1.0, 1 / 10.5, 2)
        a = uniform_ball_quadrature(1.0, lat)
        b = UniformBallFamily(1.0, lat.h, 2).atom_pairs(None)
        np.testing.assert_array_equal(a.z, b.z)
        np.testing.assert_array_equal(a.w, b.w)


class TestEllipsoidFamily:
    def test_identity_matrix_reduces_to_ball(self):
        eps, h = 0.5, 0.5 / 10.5
        ball = UniformBallFamily(eps, h, 2).atom_pairs(None)
        ell = EllipsoidFamily(lambda x: np.eye(2), eps, h, 2, lam=2.0).atom_pairs(np.zeros(2))
        np.testing.assert_array_equal(ball.z, ell.z)
        np.testing.assert_allclose(ball.w, ell.w)

    def test_anisotropic_second_moments(self):
        lam, eps = 2.0, 0.5
        h = eps / 20.5
        fam = EllipsoidFamily(lambda x: np.diag([lam, 1.0]), eps, h, 2, lam=lam)
        M2 = second_moment_matrix(fam.atom_pairs(np.zeros(2)))
        want = np.diag([lam ** 2, 1.0]) / 4.0  # closed-form ellipsoid moments
        assert abs(M2[0, 0] - want[0, 0]) / want[0, 0] < 0.02
        assert abs(M2[1, 1] - want[1, 1]) / want[1, 1] < 0.02
        assert abs(M2[0, 1]) < 1e-12

    def test_inclusion_violation_raises(self):
        fam = EllipsoidFamily(lambda x: np.diag([2.1, 1.0]), 0.5, 0.02, 2, lam=2.0)
        with pytest.raises(MeasureError):
            fam.atom_pairs(np.zeros(2))
        fam_small = EllipsoidFamily(lambda x: np.diag([0.8, 1.0]), 0.5, 0.02, 2, lam=2.0)
        with pytest.raises(MeasureError):
            fam_small.atom_pairs(np.zeros(2))


class TestAxisAtomFamily:
    def test_single_pair_on_atom_points(self):
        fam = AxisAtomFamily(0.1, 0.1 / 10.5, 2)
        pairs = fam.atom_pairs(np.array([0.1, 0.0]))
        assert pairs.z.shape == (1, 2)
        np.testing.assert_array_equal(pairs.z[0], [1.0, 0.0])
        assert pairs.w[0] == 1.0

    def test_ball_elsewhere(self):
        fam = AxisAtomFamily(0.1, 0.1 / 10.5, 2)
        off = fam.atom_pairs(np.array([0.137, 0.04]))
        assert off.z.shape[0] > 1
        assert abs(off.w.sum() - 1.0) < 1e-14

    def test_invariants_hold_at_all_probe_nodes(self, rng):
        fam = AxisAtomFamily(0.2, 0.2 / 5.5, 2)
        pts = np.vstack([rng.uniform(-2, 2, (30, 2)),
                         [[0.2 * k, 0.0] for k in range(1, 6)]])
        rep = validate_family(fam, pts)
        assert rep.ok
        assert rep.worst_mass_error < 1e-14
        assert rep.max_support_radius <= 1.0 + 1e-12


class TestValidateFamily:
    def test_mass_deficit_detected(self):
        class Leaky(MeasureFamily):
            lam = 1.0
            label = "leaky"

            def atom_pairs(self, x):
                return AtomPairs(np.array([[1.0]]), np.array([0.99]))

        rep = validate_family(Leaky(), np.zeros((1, 1)))
        assert not rep.ok
        assert rep.worst_mass_error == pytest.approx(0.01)

    def test_support_radius_report(self):
        fam = FixedPairFamily(np.array([[2.0, 0.0]]), np.array([1.0]), lam=2.0)
        rep = validate_family(fam, np.zeros((3, 2)))
        assert rep.ok
        assert rep.max_support_radius == pytest.approx(2.0)


class TestDirectionNet:
    def test_1d_ladder(self):
        net = direction_net(2.0, 0.5, 1)
        got = set(np.round(net.points[:, 0], 10))
        for v in (0.5, 1.0, 1.5, 2.0, -0.5, -1.0, -1.5, -2.0):
            assert any(abs(g - v) < 0.36 for g in got)  # ladder covers at resolution
        assert 2.0 in got and -2.0 in got and 0.0 in got

    def test_axis_extremes_present(self):
        net = direction_net(1.5, 0.3, 2)
        for sign in (1, -1):
            assert np.min(np.linalg.norm(net.points - sign * np.array([1.5, 0.0]), axis=1)) < 1e-12

    def test_sampling_audit_2d(self, rng):
        res = 0.2
        net = direction_net(2.0, res, 2)
        z = rng.standard_normal((10_000, 2))
        z = 2.0 * z / np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-12) \
            * np.sqrt(rng.uniform(0, 1, (10_000, 1)))
        d2 = ((z[:, None, :] - net.points[None, :, :]) ** 2).sum(-1)
        assert np.sqrt(d2.min(axis=1)).max() <= res + 1e-9

    def test_sampling_audit_3d(self, rng):
        res = 0.5
        net = direction_net(1.0, res, 3)
        z = rng.standard_normal((2_000, 3))
        z = z / np.maximum(np.linalg.norm(z, axis=1, keepdims=True), 1e-12) \
            * rng.uniform(0, 1, (2_000, 1)) ** (1 / 3)
        d2 = ((z[:, None, :] - net.points[None, :, :]) ** 2).sum(-1)
        assert np.sqrt(d2.min(axis=1)).max() <= res + 1e-9

    def test_size_cap(self):
        with pytest.raises(MeasureError):
            direction_net(2.0, 1e-4, 3)
