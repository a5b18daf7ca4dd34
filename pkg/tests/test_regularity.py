import numpy as np
import pytest

import dpplab.regularity as reg
from dpplab.constants import build_constants
from dpplab.lattice import Ball, GridFunction, centered_lattice
from dpplab.lognum import LogFloat
from dpplab.measures import UniformBallFamily, direction_net
from dpplab.operators import OperatorParams
from dpplab.solver import make_problem, solve_dpp


@pytest.fixture(scope="module")
def instance_1d():
    """Solved, normalized, residual-certified 1d instance with a gentle
    positive source (profiles curve, level sets are nontrivial)."""
    eps = 0.08
    params = OperatorParams(beta=1.0, eps=eps, lam=1.0)
    h = eps / 5.5
    f = lambda p: 0.01 * np.exp(-2.0 * p[:, 0] ** 2)
    g = lambda p: 1.0 + 0.8 * np.cos(0.9 * p[:, 0])
    prob = make_problem(Ball((0.0,), 5.2), params, h=h, f=f, g=g,
                        kind="linear", family=UniformBallFamily(eps, h, 1))
    u, rep = solve_dpp(prob, tol=1e-9, scheme="gauss-seidel")
    u, scale = reg.normalize_to_unit_inf(u)
    net = direction_net(1.0, 0.1, 1)
    nodes = prob.lattice.nodes()
    certs = reg.extremal_residuals(u, params, net,
                                   np.abs(nodes[:, 0]) < 5.0, sample_cap=300)
    rho = max(0.01 / scale + rep.residual / eps ** 2 / scale,
              certs["max_minus"] * 1.01 + 1e-12)
    cs = build_constants(1, 1.0, 1.0, C1_abp=2.0, gamma=0.5, C_holder=1.0,
                         seed=4, conv_samples=5_000)
    return {"u": u, "prob": prob, "params": params, "h": h, "net": net,
            "certs": certs, "rho": rho, "cs": cs, "scale": scale,
            "residual": rep.residual}


class TestLevelSets:
    def test_zero_function(self):
        lat = centered_lattice(1.0, 0.05, 2)
        u = GridFunction(lat, np.zeros(lat.node_count))
        m, c = reg.level_set_measure(u, 1.0)
        assert m == 0.0 and c == 0

    def test_halfspace_measure(self):
        lat = centered_lattice(1.0, 0.01, 2)
        u = GridFunction(lat, lat.nodes()[:, 0])
        m, _ = reg.level_set_measure(u, 0.0)
        assert m == pytest.approx(0.5, abs=4 * lat.h)

    def test_monotone_in_threshold(self, rng):
        lat = centered_lattice(1.0, 0.05, 1)
        u = GridFunction(lat, rng.standard_normal(lat.node_count))
        prof = reg.level_set_profile(u, np.linspace(-2, 2, 17))
        assert (np.diff(prof.measures) <= 0).all()
        assert prof.measures.max() <= 1.0 + 2 * lat.h


class TestMeasureEstimate:
    def test_passes_on_certified_instance(self, instance_1d):
        d = instance_1d
        out = reg.measure_estimate_check(d["u"], d["cs"], d["params"],
                                         d["rho"], d["certs"]["max_minus"])
        assert out["pass"]
        assert out["inf_Q3"] <= 1.0 + 1e-12

    def test_small_constant_function_trivial(self, instance_1d):
        d = instance_1d
        lat = d["u"].lattice
        u = GridFunction(lat, np.full(lat.node_count, 0.5))
        out = reg.measure_estimate_check(u, d["cs"], d["params"], 1e-9, 0.0)
        assert out["pass"]
        assert out["measure_above_M"] == 0.0

    def test_normalization_edge(self, instance_1d):
        d = instance_1d
        u2, s = reg.normalize_to_unit_inf(d["u"])
        assert s == pytest.approx(1.0)  # already normalized
        out = reg.measure_estimate_check(u2, d["cs"], d["params"],
                                         d["rho"], d["certs"]["max_minus"])
        assert out["pass"]

    def test_rejects_eps_above_threshold(self, instance_1d):
        d = instance_1d
        big = OperatorParams(beta=1.0, eps=0.5, lam=1.0)
        with pytest.raises(reg.RegularityError):
            reg.measure_estimate_check(d["u"], d["cs"], big, d["rho"], 0.0)

    def test_rejects_uncertified(self, instance_1d):
        d = instance_1d
        with pytest.raises(reg.RegularityError):
            reg.measure_estimate_check(d["u"], d["cs"], d["params"],
                                       rho_cert=1e-12, minus_cert=1.0)


class TestSpreading:
    def test_contrapositive_on_instance(self, instance_1d):
        d = instance_1d
        eps_window = OperatorParams(beta=1.0, eps=d["cs"].eps0 * 0.95, lam=1.0)
        out = reg.spreading_check(d["u"], d["cs"], eps_window, K=2.0,
                                  rho_cert=d["rho"], minus_cert=d["certs"]["max_minus"])
        assert out["pass"]

    def test_big_function_direct_branch(self, instance_1d):
        d = instance_1d
        lat = d["u"].lattice
        u = GridFunction(lat, np.full(lat.node_count, 2.0))
        cs = build_constants(1, 1.0, 1.0, C1_abp=2.0, gamma=0.5, C_holder=1.0,
                             seed=4, conv_samples=5_000, mode="calibrated",
                             overrides={"c_spread": 0.05})
        params = OperatorParams(beta=1.0, eps=cs.eps0 * 0.9, lam=1.0)
        out = reg.spreading_check(u, cs, params, K=1.5, rho_cert=1e-9, minus_cert=0.0)
        assert out["branch"] == "direct"
        assert out["pass"]

    def test_eps_window_enforced(self, instance_1d):
        d = instance_1d
        small = OperatorParams(beta=1.0, eps=d["cs"].eps0 / 4, lam=1.0)
        with pytest.raises(reg.RegularityError):
            reg.spreading_check(d["u"], d["cs"], small, K=2.0,
                                rho_cert=d["rho"], minus_cert=0.0)


class TestSuperlevelLadder:
    def test_paper_constants_ladder(self, instance_1d):
        d = instance_1d
        out = reg.superlevel_iteration(d["u"], d["cs"], d["params"],
                                       d["rho"], d["certs"]["max_minus"], k_max=5)
        assert out["pass"]
        assert len(out["rows"]) == 5
        assert out["rescale_factor_ok"]

    def test_calibrated_ladder_exercises_decomposition(self, instance_1d):
        d = instance_1d
        u = d["u"]
        # calibrate M as a mid quantile so the rendered level sets are nontrivial
        q1 = np.abs(u.lattice.nodes()[:, 0]) < 0.5
        M_cal = float(np.quantile(u.values[q1], 0.55))
        m_above, _ = reg.level_set_measure(u, M_cal)
        cs = build_constants(1, 1.0, 1.0, C1_abp=2.0, gamma=0.5, C_holder=1.0,
                             seed=4, conv_samples=5_000, mode="calibrated",
                             overrides={"M": max(M_cal, 1.0),
                                        "mu": min(max(m_above * 1.5, 0.3), 0.9),
                                        "c_spread": 1.0})
        params = OperatorParams(beta=1.0, eps=cs.eps0 / 2.5, lam=1.0)
        out = reg.superlevel_iteration(u, cs, params, d["rho"], d["certs"]["max_minus"],
                                       k_max=4)
        assert out["pass"]
        assert out["cz"]["ran"]
        if "conclusion_holds" in out["cz"]:
            assert out["cz"]["conclusion_holds"]
            assert out["cz"]["audit_pass"]

    def test_k1_row_reduces_to_measure_bound(self, instance_1d):
        # at k = 1 the ladder bound dominates the plain measure bound mu
        d = instance_1d
        out = reg.superlevel_iteration(d["u"], d["cs"], d["params"],
                                       d["rho"], d["certs"]["max_minus"], k_max=1)
        row = out["rows"][0]
        log_mu = np.log1p(-float(d["cs"].one_minus_mu)) if float(d["cs"].one_minus_mu) > 0 else 0.0
        assert row["log10_bound"] >= log_mu / np.log(10) - 1e-9


class TestIndicatorRendering:
    def test_matches_direct_evaluation(self, instance_1d):
        u = instance_1d["u"]
        grid = reg.render_superlevel_indicator(u, np.log(1.02), level=5)
        n = 1 << 5
        centers = -0.5 + (np.arange(n) + 0.5) / n
        want = u.eval(centers[:, None]) > 1.02
        np.testing.assert_array_equal(grid.cells, want)


class TestDecay:
    def test_paper_bound_holds(self, instance_1d):
        d = instance_1d
        umax = float(d["u"].values.max())
        prof = reg.level_set_profile(d["u"], np.geomspace(1.0, max(2.0, umax * 1.1), 10))
        out = reg.decay_fit(prof, d["cs"])
        assert out["pass"]

    def test_fit_recovers_planted_decay(self):
        # synthetic profile exactly on the model curve
        cs = build_constants(1, 1.0, 1.0, C1_abp=2.0, gamma=0.5, C_holder=1.0,
                             seed=4, conv_samples=5_000, mode="calibrated",
                             overrides={"M": 4.0, "mu": 0.5, "c_spread": 1.0})
        a_true, d_true = 2.0, 1.5
        ts = np.geomspace(1.5, 50.0, 12)
        meas = d_true * np.exp(-np.sqrt(np.log(ts) / a_true))
        prof = reg.LevelSetProfile(ts, meas, (meas * 100).astype(int), 0.01, 100)
        out = reg.decay_fit(prof, cs)
        assert out["fit"] is not None
        assert out["fit"]["a_fit"] == pytest.approx(a_true, rel=1e-6)
        assert out["fit"]["d_fit"] == pytest.approx(d_true, rel=1e-6)

    def test_empty_profile_rejected(self, instance_1d):
        with pytest.raises(reg.RegularityError):
            reg.decay_fit(reg.LevelSetProfile(np.array([]), np.array([]),
                                              np.array([]), 0.1, 0), instance_1d["cs"])


class TestOscillation:
    def test_inf_form_on_instance(self, instance_1d):
        d = instance_1d
        out = reg.de_giorgi_check(d["u"], 0.25, d["cs"], d["params"],
                                  d["rho"], d["certs"]["max_minus"])
        assert out["pass"]
        assert out["margin"] >= 0.0

    def test_inf_form_trivial_case(self, instance_1d):
        d = instance_1d
        lat = d["u"].lattice
        u = GridFunction(lat, np.full(lat.node_count, 1.25))
        out = reg.de_giorgi_check(u, 1.0, d["cs"], d["params"], 1e-9, 0.0)
        assert out["pass"]
        assert out["inf_Q3"] == pytest.approx(1.25)

    def test_sup_form_margin(self, instance_1d):
        d = instance_1d
        nodes = d["u"].lattice.nodes()
        R = 0.2
        small = np.abs(nodes[:, 0]) < R
        m_level = float(np.quantile(d["u"].values[small], 0.5))
        big = np.abs(nodes[:, 0]) < d["cs"].k_osc * R
        M_bound = float(d["u"].values[big].max()) + 1e-9
        out = reg.oscillation_reduction_check(d["u"], 0.3, m_level, M_bound, R,
                                              d["cs"], d["params"], d["rho"],
                                              d["certs"]["min_plus"])
        assert out["pass"]
        assert out["margin"] >= 0.0

    def test_sup_form_case_split_arithmetic(self):
        # when the source term dominates, the oscillation bound follows by
        # plain arithmetic: eta (M - m) <= C R^2 rho with C = 4 / rho_tilde
        rho_t, eta, M, m, R, rho = 0.031, 0.2, 3.0, 1.0, 0.5, 1.0
        assert 4 * R ** 2 * rho >= rho_t * eta * (M - m)
        lhs = M
        rhs = (1 - eta) * M + eta * m + 4 * R ** 2 * rho / rho_t
        assert lhs <= rhs


class TestHolder:
    def test_constant_is_unconstrained(self, instance_1d):
        d = instance_1d
        lat = d["u"].lattice
        u = GridFunction(lat, np.full(lat.node_count, 2.0))
        out = reg.holder_estimate(u, d["params"], R=2.0, rho=0.0)
        assert not out["constrained"]
        assert out["audit_pass"]

    def test_affine_has_unit_exponent(self, instance_1d):
        d = instance_1d
        lat = d["u"].lattice
        u = GridFunction(lat, 0.7 * lat.nodes()[:, 0] + 2.0)
        out = reg.holder_estimate(u, d["params"], R=2.0, rho=0.0)
        assert out["gamma_est"] == pytest.approx(1.0, abs=0.05)
        assert out["audit_pass"]

    def test_instance_estimate_stable_across_resolution(self):
        eps = 0.1
        gammas = []
        for ratio in (5.5, 11.5):
            params = OperatorParams(beta=1.0, eps=eps, lam=1.0)
            h = eps / ratio
            f = lambda p: 0.2 * np.exp(-2.0 * p[:, 0] ** 2)
            g = lambda p: 1.0 + 0.8 * np.cos(1.7 * p[:, 0]) ** 2
            prob = make_problem(Ball((0.0,), 2.5), params, h=h, f=f, g=g,
                                kind="linear", family=UniformBallFamily(eps, h, 1))
            u, rep = solve_dpp(prob, tol=1e-9, scheme="gauss-seidel")
            out = reg.holder_estimate(u, params, R=2.0,
                                      rho=0.2 + rep.residual / eps ** 2)
            assert out["audit_pass"]
            gammas.append(out["gamma_est"])
        assert abs(gammas[0] - gammas[1]) <= 0.1


class TestHarnack:
    def test_constant_function(self, instance_1d):
        cs = instance_1d["cs"]
        out = reg.harnack_report(2.0, 2.0, 2.0, cs, eps=0.05, rho=0.0)
        assert out["corrected_pass"]
        assert out["classical_quotient"] == 1.0

    def test_instance_report(self, instance_1d):
        d = instance_1d
        nodes = d["u"].lattice.nodes()
        r = np.abs(nodes[:, 0])
        out = reg.harnack_report(float(d["u"].values[r < 1].max()),
                                 float(d["u"].values[r < 1].min()),
                                 float(d["u"].values[r < 3].max()),
                                 d["cs"], d["params"].eps, d["rho"])
        assert out["corrected_pass"]
        assert np.isfinite(out["classical_quotient"])

    def test_rejects_inconsistent_extremes(self, instance_1d):
        with pytest.raises(reg.RegularityError):
            reg.harnack_report(5.0, 1.0, 2.0, instance_1d["cs"], 0.05, 0.0)


class TestChase:
    def test_not_applicable_with_formula_scale(self, instance_1d):
        d = instance_1d
        out = reg.chase_trace(d["u"], d["cs"], d["params"], d["rho"])
        assert out["identity_ok"]
        assert not out["applicable"]  # formula delta makes k0 < 1 at this eps

    def test_mechanism_with_hand_set_scale(self, instance_1d):
        # mechanism exercise: a chase window reachable at the instance's eps
        d = instance_1d
        cs = build_constants(1, 1.0, 1.0, C1_abp=2.0, gamma=0.5, C_holder=1.0,
                             seed=4, conv_samples=5_000)
        cs.delta = LogFloat.of(0.45)
        cs.C_join = LogFloat.of(2.0)
        cs.lam_exp = 1.0
        out = reg.chase_trace(d["u"], cs, d["params"], d["rho"])
        assert out["applicable"]
        assert out["k0"] >= 1
        assert out["chain_stays_in_B2"]
        assert out["no_contradiction"]
