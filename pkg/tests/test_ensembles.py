import numpy as np
import pytest
from scipy.stats import ks_2samp

from dbmh.ensembles import (
    ENTRY_LAWS,
    EnsembleSpec,
    RngStream,
    eigenvalues_desc,
    fourth_cumulant,
    load_matrix,
    make_profile,
    ou_interpolate,
    sample_wigner,
    save_matrix,
)


def flat_spec(n, beta=1, law="gaussian"):
    return EnsembleSpec(n=n, beta=beta, entry_law=law, profile=make_profile("flat", n, beta=beta))


class TestProfiles:
    def test_flat_real_matches_wigner_shape(self):
        # the standard Wigner profile (1 + delta_ij)/N, rebalanced to exact
        # unit column sums, is (1 + delta_ij)/(N + 1)
        p = make_profile("flat", 4, beta=1)
        expect = (np.ones((4, 4)) + np.eye(4)) / 5.0
        assert np.allclose(p.s, expect, atol=1e-12)
        assert np.max(np.abs(p.s.sum(axis=0) - 1.0)) < 1e-10

    def test_flat_complex(self):
        p = make_profile("flat", 6, beta=2)
        assert np.allclose(p.s, np.full((6, 6), 1.0 / 6.0), atol=1e-12)

    def test_full_width_band_equals_flat(self):
        flat = make_profile("flat", 8, beta=1)
        band = make_profile("banded", 8, param=8, beta=1)
        assert np.allclose(flat.s, band.s, atol=1e-12)

    def test_banded_concentrates_weight(self):
        p = make_profile("banded", 12, param=3, beta=1)
        assert np.max(np.abs(p.s.sum(axis=0) - 1.0)) < 1e-10
        assert p.s[0, 1] > p.s[0, 8]

    def test_two_block_column_sums(self):
        p = make_profile("two-block", 6, param=0.5, beta=1)
        assert np.max(np.abs(p.s.sum(axis=0) - 1.0)) < 1e-10
        assert np.allclose(p.s, p.s.T, atol=1e-14)

    def test_bounds_declared(self):
        for kind, param in (("flat", 0.5), ("banded", 4), ("two-block", 0.3)):
            p = make_profile(kind, 10, param=param, beta=1)
            n = 10
            assert p.s.max() <= p.c_bound / n + 1e-12
            assert p.s.min() >= 1.0 / (p.c_bound * n) - 1e-12

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            make_profile("flat", 1)
        with pytest.raises(ValueError):
            make_profile("mystery", 4)
        with pytest.raises(ValueError):
            make_profile("two-block", 4, param=0.0)


class TestSampling:
    def test_self_adjoint_exact(self):
        h = sample_wigner(flat_spec(7), RngStream(1, 0))
        assert np.array_equal(h, h.T)
        hc = sample_wigner(flat_spec(7, beta=2), RngStream(1, 1))
        assert np.array_equal(hc, hc.conj().T)

    def test_determinism(self):
        a = sample_wigner(flat_spec(9, law="rademacher"), RngStream(5, 2))
        b = sample_wigner(flat_spec(9, law="rademacher"), RngStream(5, 2))
        assert np.array_equal(a, b)
        c = sample_wigner(flat_spec(9, law="rademacher"), RngStream(5, 3))
        assert not np.array_equal(a, c)

    def test_rademacher_support(self):
        spec = flat_spec(6, law="rademacher")
        root_s = np.sqrt(spec.profile.s[0, 1])
        vals = set()
        for i in range(40):
            h = sample_wigner(spec, RngStream(11, i))
            vals.add(round(h[0, 1] / root_s, 12))
        assert vals == {-1.0, 1.0}

    def test_entry_variances(self):
        spec = flat_spec(5, law="uniform")
        draws = np.array([sample_wigner(spec, RngStream(2, i)) for i in range(4000)])
        emp = (np.abs(draws) ** 2).mean(axis=0)
        se = (np.abs(draws) ** 2).std(axis=0) / np.sqrt(4000)
        assert np.all(np.abs(emp - spec.profile.s) <= 3.5 * se)

    def test_trace_of_square_mean(self):
        # E tr H^2 = sum_ij S_ij = n for unit column sums
        spec = flat_spec(2, law="gaussian")
        tr = [np.trace(sample_wigner(spec, RngStream(3, i)) @ sample_wigner(spec, RngStream(3, i)))
              for i in range(10000)]
        tr = np.array(tr)
        assert abs(tr.mean() - 2.0) < 3.0 * tr.std() / np.sqrt(tr.size)

    def test_complex_pseudo_variance_vanishes(self):
        spec = flat_spec(4, beta=2)
        draws = np.array([sample_wigner(spec, RngStream(7, i))[0, 1] for i in range(6000)])
        pseudo = (draws**2).mean()
        assert abs(pseudo) < 4.0 * np.abs(draws**2).std() / np.sqrt(draws.size)


class TestOuInterpolate:
    def test_identity_at_zero(self):
        h = sample_wigner(flat_spec(6), RngStream(4, 0))
        g = sample_wigner(flat_spec(6), RngStream(4, 1))
        assert np.array_equal(ou_interpolate(h, g, 0.0), h)

    def test_long_time_limit(self):
        h = sample_wigner(flat_spec(6), RngStream(4, 2))
        g = sample_wigner(flat_spec(6), RngStream(4, 3))
        assert np.max(np.abs(ou_interpolate(h, g, 50.0) - g)) < 1e-10

    def test_variance_mixes(self):
        n, t = 6, 0.3
        pa = make_profile("two-block", n, param=0.4, beta=1)
        pg = make_profile("flat", n, beta=1)
        sa = EnsembleSpec(n=n, beta=1, entry_law="uniform", profile=pa)
        sg = EnsembleSpec(n=n, beta=1, entry_law="gaussian", profile=pg)
        draws = np.array(
            [
                ou_interpolate(
                    sample_wigner(sa, RngStream(8, 2 * i)),
                    sample_wigner(sg, RngStream(8, 2 * i + 1)),
                    t,
                )
                for i in range(10000)
            ]
        )
        emp = (draws**2).mean(axis=0)
        expect = np.exp(-t) * pa.s + (1 - np.exp(-t)) * pg.s
        se = (draws**2).std(axis=0) / np.sqrt(draws.shape[0])
        assert np.all(np.abs(emp - expect) <= 3.5 * se)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            ou_interpolate(np.eye(3), np.eye(4), 0.1)

    def test_interpolated_gaussian_matches_fresh_gaussian(self):
        # for flat Gaussian data, H_t is again Gaussian: two-sample KS on a
        # bulk eigenvalue should not reject
        n, t, trials = 60, 0.4, 500
        spec = flat_spec(n)
        mid_interp, mid_fresh = [], []
        for i in range(trials):
            h = sample_wigner(spec, RngStream(9, 3 * i))
            g = sample_wigner(spec, RngStream(9, 3 * i + 1))
            mid_interp.append(eigenvalues_desc(ou_interpolate(h, g, t))[n // 2 - 1])
            mid_fresh.append(eigenvalues_desc(sample_wigner(spec, RngStream(9, 3 * i + 2)))[n // 2 - 1])
        assert ks_2samp(mid_interp, mid_fresh).pvalue > 0.01


class TestEigenvalues:
    def test_examples(self):
        assert np.array_equal(eigenvalues_desc(np.diag([3.0, 1.0, 2.0])), [3.0, 2.0, 1.0])
        w = eigenvalues_desc(np.array([[0.0, 1.0], [1.0, 0.0]]))
        assert w == pytest.approx([1.0, -1.0], abs=1e-14)

    def test_reconstruction_residual(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((40, 40))
        h = (a + a.T) / 2.0
        import scipy.linalg

        w, v = scipy.linalg.eigh(h)
        assert np.linalg.norm(h @ v - v @ np.diag(w)) / np.linalg.norm(h) < 1e-9
        assert np.allclose(eigenvalues_desc(h), w[::-1], atol=1e-13)

    def test_goe_extremes_within_window(self):
        spec = flat_spec(500)
        hits = 0
        for i in range(100):
            w = eigenvalues_desc(sample_wigner(spec, RngStream(10, i)))
            if -2.5 < w[-1] and w[0] < 2.5:
                hits += 1
        assert hits >= 99


class TestFourthCumulant:
    def test_values(self):
        assert fourth_cumulant("gaussian") == 0.0
        assert fourth_cumulant("rademacher") == -2.0
        assert fourth_cumulant("uniform") == pytest.approx(-6.0 / 5.0, abs=1e-14)

    def test_against_moment_oracle(self):
        # direct Monte Carlo moments of each normalized law
        gen = np.random.default_rng(123)
        for law, sampler in ENTRY_LAWS.items():
            x = sampler(gen, 400000)
            assert x.mean() == pytest.approx(0.0, abs=0.02)
            assert (x**2).mean() == pytest.approx(1.0, abs=0.02)
            emp = (x**4).mean() - 3.0 * (x**2).mean() ** 2
            se = (x**4).std() / np.sqrt(x.size)
            assert abs(emp - fourth_cumulant(law)) < 4.0 * se + 0.02

    def test_unknown_law(self):
        with pytest.raises(ValueError):
            fourth_cumulant("cauchy")


class TestMatrixDump:
    def test_roundtrip_real(self, tmp_path):
        h = sample_wigner(flat_spec(8), RngStream(12, 0))
        path = tmp_path / "m.bin"
        save_matrix(path, h, beta=1)
        h2, beta = load_matrix(path)
        assert beta == 1
        assert np.array_equal(h, h2)

    def test_roundtrip_complex(self, tmp_path):
        h = sample_wigner(flat_spec(5, beta=2), RngStream(12, 1))
        path = tmp_path / "m.bin"
        save_matrix(path, h, beta=2)
        h2, beta = load_matrix(path)
        assert beta == 2
        assert np.array_equal(h, h2)
