import numpy as np
import pytest
import scipy.linalg

from dbmh.ensembles import RngStream
from dbmh.flow import evolve_coupled
from dbmh.shortrange import (
    SubstepTooCoarseError,
    constant_path,
    flatten_outside,
    full_generator_apply,
    long_range_apply,
    short_range_generator,
    short_range_propagator,
    trajectory_path,
    window_average,
)


def config(n, seed=0):
    rng = np.random.default_rng(seed)
    return np.sort(rng.uniform(-2, 2, n))[::-1].copy()


class TestShortRangeOperator:
    def test_band_one_is_zero(self):
        x = config(6)
        op = short_range_generator(x, 1)
        v = np.arange(6.0)
        assert np.allclose(op.apply(v), 0.0, atol=1e-15)

    def test_full_band_reproduces_generator(self):
        x = config(8, 1)
        rng = np.random.default_rng(2)
        v = rng.standard_normal(8)
        op = short_range_generator(x, 8)
        assert np.max(np.abs(op.apply(v) - full_generator_apply(x, v))) < 1e-12

    def test_constants_in_kernel(self):
        x = config(10, 3)
        op = short_range_generator(x, 4)
        assert np.max(np.abs(op.apply(np.full(10, 3.7)))) < 1e-13

    def test_structure(self):
        x = config(9, 4)
        op = short_range_generator(x, 3)
        m = op.dense()
        assert np.max(np.abs(m.sum(axis=1))) < 1e-13
        off = m - np.diag(np.diag(m))
        assert off.min() >= 0.0
        i, j = np.nonzero(off)
        assert np.max(np.abs(i - j)) < 3
        assert np.allclose(m, m.T, atol=1e-15)

    def test_long_range_split(self):
        x = config(4, 5)
        rng = np.random.default_rng(6)
        v = rng.standard_normal(4)
        lr = long_range_apply(x, v, 2)
        dense_b = np.zeros((4, 4))
        for i in range(4):
            for j in range(4):
                if i != j:
                    c = 1.0 / (4 * (x[i] - x[j]) ** 2)
                    dense_b[i, j] += c
                    dense_b[i, i] -= c
        expect = dense_b @ v - short_range_generator(x, 2).dense() @ v
        assert np.max(np.abs(lr - expect)) < 1e-12

    def test_long_range_trivial_cases(self):
        x = config(7, 7)
        v = np.random.default_rng(8).standard_normal(7)
        assert np.max(np.abs(long_range_apply(x, v, 7))) < 1e-13
        assert np.max(np.abs(long_range_apply(x, np.ones(7), 3))) < 1e-13


class TestPropagator:
    def test_identity_at_equal_times(self):
        p = short_range_propagator(constant_path(config(5)), 3, 0.2, 0.2)
        assert np.array_equal(p, np.eye(5))

    def test_matches_matrix_exponential(self):
        x = config(6, 9)
        ell, t = 6, 0.05
        p = short_range_propagator(constant_path(x), ell, 0.0, t)
        s = short_range_generator(x, ell).dense()
        expect = scipy.linalg.expm(t * s)
        assert np.max(np.abs(p - expect)) < 1e-8

    def test_doubly_stochastic(self):
        x = config(12, 10)
        p = short_range_propagator(constant_path(x), 4, 0.0, 0.04)
        assert np.max(np.abs(p.sum(axis=1) - 1.0)) < 1e-8
        assert np.max(np.abs(p.sum(axis=0) - 1.0)) < 1e-8
        assert p.min() > -1e-10

    def test_composition(self):
        rng = np.random.default_rng(11)
        x = np.sort(rng.uniform(-2, 2, 20))[::-1].copy()
        path = constant_path(x)
        u, s, t = 0.0, 0.01, 0.03
        p_us = short_range_propagator(path, 5, u, s)
        p_st = short_range_propagator(path, 5, s, t)
        p_ut = short_range_propagator(path, 5, u, t)
        assert np.max(np.abs(p_st @ p_us - p_ut)) < 1e-6

    def test_time_dependent_path(self):
        l0 = config(10, 12)
        traj = evolve_coupled(l0, l0, 0.02, 1, RngStream(30, 0), list(np.linspace(0.002, 0.02, 10)))
        path = trajectory_path(traj)
        p = short_range_propagator(path, 3, 0.0, 0.02)
        assert np.max(np.abs(p.sum(axis=1) - 1.0)) < 1e-8
        assert p.min() > -1e-10

    def test_coarse_substep_detected(self):
        x = config(14, 13)
        with pytest.raises(SubstepTooCoarseError):
            short_range_propagator(constant_path(x), 6, 0.0, 0.5, dt=0.05)

    def test_bad_times(self):
        with pytest.raises(ValueError):
            short_range_propagator(constant_path(config(4)), 2, 0.3, 0.1)


class TestWindowOperators:
    def test_flatten_wide_radius_is_identity(self):
        w = np.arange(7.0)
        assert np.array_equal(flatten_outside(w, 3, 10, -5.0), w)

    def test_flatten_zero(self):
        w = np.zeros(5)
        assert np.array_equal(flatten_outside(w, 2, 2, 0.0), w)

    def test_flatten_substitutes(self):
        w = np.arange(6.0)
        out = flatten_outside(w, 2, 2, 9.0)
        assert np.array_equal(out, [9.0, 1.0, 2.0, 3.0, 9.0, 9.0])

    def test_average_scale_one_equals_single_flatten(self):
        w = np.arange(5.0)
        out = window_average(w, 2, 1, -1.0)
        assert np.array_equal(out, flatten_outside(w, 2, 1, -1.0))

    def test_average_mixes_radii(self):
        w = np.arange(8.0)
        out = window_average(w, 4, 2, 0.0)
        expect = 0.5 * (flatten_outside(w, 4, 2, 0.0) + flatten_outside(w, 4, 3, 0.0))
        assert np.allclose(out, expect, atol=1e-15)

    def test_scale_validation(self):
        with pytest.raises(ValueError):
            window_average(np.zeros(3), 1, 0, 0.0)
