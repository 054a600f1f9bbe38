import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dbmh.ensembles import RngStream
from dbmh.flow import evolve_coupled
from dbmh.homogenize import (
    HomogReport,
    PVConfig,
    QuadratureError,
    bound_profile,
    dissipation_scale,
    homogenization_report,
    predictor,
    predictor_at,
    predictor_dt,
    predictor_dx,
    pv_nonlocal,
    regularity_checks,
    residual_scale,
    rigidity_scale_difference,
    write_report_csv,
)
from dbmh.semicircle import build_quantiles, stieltjes_transform


@pytest.fixture(scope="module")
def q200():
    return build_quantiles(200)


@pytest.fixture(scope="module")
def q1000():
    return build_quantiles(1000)


class TestPredictor:
    def test_zero_difference(self, q200):
        assert np.allclose(predictor(np.zeros(200), q200, 0.5), 0.0, atol=1e-16)

    def test_single_spike_closed_form(self, q200):
        j, k, t = 50, 10, 0.4
        f = np.zeros(200)
        f[j] = 1.0
        ch, sh = np.cosh(t / 2), np.sinh(t / 2)
        expect = (2 * np.exp(t / 2) * sh / 200) / (
            (ch * q200.gamma[k - 1] - q200.gamma[j]) ** 2 + (sh * q200.rho[k - 1]) ** 2
        )
        got = predictor(f, q200, t, k=k)
        assert got == pytest.approx(expect, rel=1e-14)
        assert got > 0

    def test_constant_difference_reproduced(self, q1000):
        # f = c corresponds to a rigid shift, reproduced up to O(1/(N rho Im z_t))
        c = 0.37
        val = predictor(np.full(1000, c), q1000, 0.5, k=500)
        assert abs(val - c) / c < 0.02

    def test_forms_agree_across_times(self, q200):
        rng = np.random.default_rng(5)
        f = rng.standard_normal(200)
        for t in (0.1, 0.5, 1.0):
            predictor(f, q200, t)  # internal 1e-12 cross-check of both forms

    def test_linearity(self, q200):
        rng = np.random.default_rng(6)
        f1 = rng.standard_normal(200)
        f2 = rng.standard_normal(200)
        a, b = 0.7, -2.3
        lhs = predictor(a * f1 + b * f2, q200, 0.3)
        rhs = a * predictor(f1, q200, 0.3) + b * predictor(f2, q200, 0.3)
        assert np.max(np.abs(lhs - rhs)) < 1e-13 * max(1.0, np.max(np.abs(rhs)))

    def test_time_validation(self, q200):
        with pytest.raises(ValueError):
            predictor(np.zeros(200), q200, 0.0)
        with pytest.raises(ValueError):
            predictor(np.zeros(200), q200, 1.5)

    @settings(max_examples=10, deadline=None)
    @given(st.integers(0, 2**32 - 1), st.sampled_from([0.1, 0.5, 1.0]))
    def test_forms_agree_property(self, seed, t):
        q = build_quantiles(64)
        f = np.random.default_rng(seed).uniform(-1, 1, 64) * 1e-2
        predictor(f, q, t)


class TestPredictorAt:
    def test_matches_quantile_values(self, q200):
        rng = np.random.default_rng(7)
        f = rng.standard_normal(200) * 1e-2
        t = 0.5
        ub = predictor(f, q200, t)
        for k in (1, 57, 200):
            at = predictor_at(f, q200, q200.gamma[k - 1], t)
            assert at == pytest.approx(ub[k - 1], abs=1e-14 * max(1, abs(ub[k - 1])))

    def test_zero_function(self, q200):
        assert predictor_at(np.zeros(200), q200, 0.3, 0.5) == 0.0

    def test_domain(self, q200):
        with pytest.raises(ValueError):
            predictor_at(np.zeros(200), q200, 2.0, 0.5)

    def test_between_quantiles_stays_local(self, q200):
        gen = np.random.default_rng(8)
        f = rigidity_scale_difference(q200, gen)
        t = 0.5
        ub = predictor(f, q200, t)
        for k in (40, 100, 160):
            xs = np.linspace(q200.gamma[k], q200.gamma[k - 1], 7)[1:-1]
            vals = predictor_at(f, q200, xs, t)
            window = ub[max(0, k - 3) : k + 3]
            margin = 4.0 * (window.max() - window.min()) + 1e-12
            assert vals.min() > window.min() - margin
            assert vals.max() < window.max() + margin


class TestPredictorDerivatives:
    def test_dt_zero_function(self, q200):
        assert predictor_dt(np.zeros(200), q200, 0.2, 0.5) == 0.0

    def test_dt_matches_finite_differences(self, q200):
        gen = np.random.default_rng(9)
        f = rigidity_scale_difference(q200, gen)
        h = 1e-6
        for x, t in ((0.0, 0.5), (1.2, 0.3), (-1.7, 0.8)):
            fd = (predictor_at(f, q200, x, t + h) - predictor_at(f, q200, x, t - h)) / (2 * h)
            an = predictor_dt(f, q200, x, t)
            assert an == pytest.approx(fd, rel=1e-4, abs=1e-12)

    def test_spike_spreads_at_short_time(self, q1000):
        # a spike at k relaxes: its own amplitude decays, so d/dt at the
        # spike is negative and large at short times
        k = 500
        f = np.zeros(1000)
        f[k - 1] = 1.0
        d = predictor_dt(f, q1000, q1000.gamma[k - 1], 1e-3)
        assert d < 0
        assert abs(d) > 10 * abs(predictor(f, q1000, 1e-3, k=k))

    def test_dx_matches_finite_differences(self, q200):
        gen = np.random.default_rng(10)
        f = rigidity_scale_difference(q200, gen)
        h = 1e-6
        for x, t in ((0.3, 0.5), (-1.1, 0.25)):
            fd = (predictor_at(f, q200, x + h, t) - predictor_at(f, q200, x - h, t)) / (2 * h)
            an = predictor_dx(f, q200, x, t)
            assert an == pytest.approx(fd, rel=1e-5, abs=1e-12)


class TestPvNonlocal:
    def test_constant_function(self):
        assert pv_nonlocal(lambda y: np.ones_like(np.asarray(y)), 0.3) == pytest.approx(
            0.0, abs=1e-10
        )

    def test_linear_function_at_origin(self):
        # PV int y rho(y)/y^2 = Re m(0 + i0) = 0 by symmetry
        assert pv_nonlocal(lambda y: np.asarray(y, dtype=float), 0.0) == pytest.approx(
            0.0, abs=1e-9
        )

    def test_linear_function_off_center(self):
        # PV int rho(y)/(x-y) dy = -Re m(x+i0) = x/2
        for x in (0.7, -1.1):
            val = pv_nonlocal(lambda y: np.asarray(y, dtype=float), x)
            assert val == pytest.approx(-x / 2.0, abs=1e-7)

    def test_quadratic_function(self):
        # g(y)=y^2: integrand (y^2-x^2)/(x-y)^2 rho = (y+x)(y-x)/(x-y)^2 rho
        # = -(y+x)/(x-y)... PV value = -x Re m - (1 + x Re m) ... checked
        # against high-resolution excision sweep instead of a closed form.
        x = 0.4
        val = pv_nonlocal(lambda y: np.asarray(y) ** 2, x)
        fine = pv_nonlocal(
            lambda y: np.asarray(y) ** 2, x, PVConfig(excision=1e-6, panel_nodes=48)
        )
        assert val == pytest.approx(fine, rel=1e-5, abs=1e-9)

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            pv_nonlocal(lambda y: y, 2.0)


class TestPdeIdentity:
    def test_predictor_solves_nonlocal_equation(self, q1000):
        gen = np.random.default_rng(11)
        f = rigidity_scale_difference(q1000, gen)
        for x, t in ((0.0, 0.5), (1.4, 0.25), (-0.9, 1.0)):
            lhs = predictor_dt(f, q1000, x, t)
            rhs = pv_nonlocal(lambda y, _t=t: predictor_at(f, q1000, y, _t), x)
            assert abs(lhs - rhs) / (abs(lhs) + 1e-12) < 2e-3


class TestScales:
    def test_dissipation_scale(self, q200):
        k, t = 30, 0.5
        r = q200.rho[k - 1]
        assert dissipation_scale(q200, t, k) == pytest.approx(200 * t * r * (t + r))

    def test_residual_scale_limits(self, q200):
        k, t = 30, 0.5
        r = q200.rho[k - 1]
        b = dissipation_scale(q200, t, k)
        assert residual_scale(q200, t, k, 1.0) == pytest.approx(200 * (t + r))
        assert residual_scale(q200, t, k, 0.0) == pytest.approx(200 * (t + r) * b)
        expand = 200**2 * t * r * (t + r) ** 2
        assert residual_scale(q200, t, k, 0.0) == pytest.approx(expand)

    def test_bound_profile_matches_scale(self, q200):
        t = 0.5
        bp = bound_profile(q200, t)
        for k in (1, 77, 200):
            assert bp[k - 1] == pytest.approx(1.0 / residual_scale(q200, t, k, 0.0), rel=1e-12)

    def test_bound_monotone_in_rho(self, q200):
        # at fixed t the bound decreases as the local scale rho increases
        t = 0.5
        bp = bound_profile(q200, t)
        order = np.argsort(q200.rho)
        assert np.all(np.diff(bp[order]) <= 0)

    def test_bound_edge_bulk_ratio(self, q200):
        t = 0.5
        bp = bound_profile(q200, t)
        r1, rb = q200.rho[0], q200.rho[99]
        expect = (rb / r1) * ((t + rb) / (t + r1)) ** 2
        assert bp[0] / bp[99] == pytest.approx(expect, rel=1e-12)

    def test_scale_validation(self, q200):
        with pytest.raises(ValueError):
            dissipation_scale(q200, 0.0, 5)
        with pytest.raises(ValueError):
            residual_scale(q200, 0.5, 5, 1.5)


class TestHomogReport:
    def test_zero_for_identical_data(self, tmp_path):
        n = 30
        rng = np.random.default_rng(12)
        l0 = np.sort(rng.uniform(-2, 2, n))[::-1].copy()
        traj = evolve_coupled(l0, l0, 0.3, 1, RngStream(40, 0), [0.3])
        q = build_quantiles(n)
        rep = homogenization_report(traj, q, 0.3)
        assert np.allclose(rep.residual, 0.0, atol=1e-16)
        assert np.all(rep.bound > 0)
        path = tmp_path / "rep.csv"
        write_report_csv(rep, path)
        lines = path.read_text().strip().split("\n")
        assert lines[0].startswith("k,gamma_k")
        assert len(lines) == n + 1

    def test_report_consistency(self):
        n = 40
        rng = np.random.default_rng(13)
        l0 = np.sort(rng.uniform(-2, 2, n))[::-1].copy()
        m0 = l0 - 1e-3 * np.abs(rng.standard_normal(n))
        m0 = np.sort(m0)[::-1].copy()
        traj = evolve_coupled(l0, m0, 0.4, 1, RngStream(41, 0), [0.4])
        q = build_quantiles(n)
        rep = homogenization_report(traj, q, 0.4)
        assert np.allclose(
            rep.residual,
            np.abs(traj.lam(0.4) - traj.mu(0.4) - np.exp(-0.2) * rep.ubar),
            atol=1e-16,
        )
        assert np.allclose(rep.normalized, rep.residual / rep.bound, atol=1e-16)


class TestRegularity:
    def test_zero_function_trivially_passes(self, q200):
        rep = regularity_checks(np.zeros(200), q200, 0.5)
        assert rep.ok
        assert rep.linf[2] == 0.0

    def test_rigidity_scale_bounds_hold(self, q1000):
        gen = np.random.default_rng(14)
        for _ in range(3):
            f = rigidity_scale_difference(q1000, gen)
            for t in (0.1, 0.5, 1.0):
                rep = regularity_checks(f, q1000, t, constant=20.0)
                assert rep.ok, (t, rep)

    def test_rigidity_scale_shape(self, q200):
        gen = np.random.default_rng(15)
        f = rigidity_scale_difference(q200, gen)
        bound = 1.0 / (200 ** (2 / 3) * q200.index_hat ** (1 / 3))
        assert np.all(np.abs(f) <= bound + 1e-15)
