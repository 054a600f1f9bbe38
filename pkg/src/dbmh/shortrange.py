"""Banded difference generators, their propagators, and window operators.

The difference generator on a frozen particle configuration x is
(B v)_i = (1/N) sum_{j != i} (v_j - v_i)/(x_i - x_j)^2; the short-range
operator keeps only the band |i - j| < ell.  Its propagator is row- and
column-stochastic with nonnegative entries, which the tests and the
finite-speed experiment rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse

__all__ = [
    "ShortRangeOperator",
    "SubstepTooCoarseError",
    "short_range_generator",
    "full_generator_apply",
    "long_range_apply",
    "short_range_propagator",
    "trajectory_path",
    "constant_path",
    "flatten_outside",
    "window_average",
]


class SubstepTooCoarseError(RuntimeError):
    pass


@dataclass(frozen=True)
class ShortRangeOperator:
    """Band-limited difference generator frozen at one configuration."""

    ell: int
    x: np.ndarray
    matrix: scipy.sparse.csr_matrix

    def apply(self, v) -> np.ndarray:
        return self.matrix @ np.asarray(v, dtype=float)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()


def short_range_generator(x, ell: int) -> ShortRangeOperator:
    """Assemble the band operator with coupling 1/(N (x_i - x_j)^2), |i-j| < ell.

    Rows sum to zero (constants are in the kernel) and off-diagonal entries
    are nonnegative.  ell >= N reproduces the full generator.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    if not 1 <= ell:
        raise ValueError("ell must be a positive integer")
    if n > 1 and not np.all(np.diff(x) < 0):
        raise ValueError("configuration must be strictly descending")
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for off in range(1, min(ell - 1, n - 1) + 1):
        c = 1.0 / (n * (x[:-off] - x[off:]) ** 2)
        i = np.arange(n - off)
        rows.extend([i, i + off])
        cols.extend([i + off, i])
        vals.extend([c, c])
        diag[: n - off] -= c
        diag[off:] -= c
    rows.append(np.arange(n))
    cols.append(np.arange(n))
    vals.append(diag)
    mat = scipy.sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n),
    )
    return ShortRangeOperator(ell=ell, x=x.copy(), matrix=mat)


def full_generator_apply(x, v) -> np.ndarray:
    """(B v)_i = (1/N) sum_{j != i} (v_j - v_i)/(x_i - x_j)^2, dense."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    n = x.size
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, np.inf)
    k = 1.0 / d**2
    return (k * (v[None, :] - v[:, None])).sum(axis=1) / n


def long_range_apply(x, v, ell: int) -> np.ndarray:
    """Remainder (B - S)v of the band split."""
    return full_generator_apply(x, v) - short_range_generator(x, ell).apply(v)


def constant_path(x):
    """Time-constant configuration path for propagator tests."""
    x = np.asarray(x, dtype=float).copy()
    return lambda s: x


def trajectory_path(traj, flow: str = "lambda"):
    """Piecewise-linear interpolant of a trajectory's checkpoint states.

    Convex combinations of ordered vectors stay ordered, so the
    interpolated configurations are valid generator arguments.
    """
    times = traj.times
    states = traj.lambda_states if flow == "lambda" else traj.mu_states

    def path(s):
        if s <= times[0]:
            return states[0]
        if s >= times[-1]:
            return states[-1]
        j = int(np.searchsorted(times, s, side="right"))
        t0, t1 = times[j - 1], times[j]
        w = (s - t0) / (t1 - t0)
        return (1.0 - w) * states[j - 1] + w * states[j]

    return path


def _spectral_rate(path, ell, u, t):
    rate = 0.0
    for s in (u, 0.5 * (u + t), t):
        op = short_range_generator(path(s), ell)
        rate = max(rate, float(np.max(-op.matrix.diagonal())))
    return rate


def short_range_propagator(path, ell: int, u: float, t: float, dt: float | None = None) -> np.ndarray:
    """Propagator P with v(t) = P v(u) for the time-frozen band generator.

    Classical fourth-order (RK4) stepping of the matrix ODE dP/ds = S(s) P,
    with the generator refrozen at each substep midpoint.  The default
    substep is (t-u)/512, shrunk when the generator's spectral rate demands
    it.  Coarseness shows up as row-sum drift or large negative entries and
    raises SubstepTooCoarseError.
    """
    if t < u:
        raise ValueError("need u <= t")
    n = path(u).size
    p = np.eye(n)
    if t == u:
        return p
    span = t - u
    if dt is None:
        nsub = 512
        rate = _spectral_rate(path, ell, u, t)
        if rate > 0:
            nsub = max(nsub, int(np.ceil(span * rate / 1.25)))
    else:
        if dt <= 0:
            raise ValueError("dt must be positive")
        nsub = max(1, int(np.ceil(span / dt)))
    h = span / nsub
    for j in range(nsub):
        s_mid = u + (j + 0.5) * h
        s = short_range_generator(path(s_mid), ell).matrix
        k1 = s @ p
        k2 = s @ (p + 0.5 * h * k1)
        k3 = s @ (p + 0.5 * h * k2)
        k4 = s @ (p + h * k3)
        p = p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    row_drift = float(np.max(np.abs(p.sum(axis=1) - 1.0)))
    if row_drift > 1e-8 or float(p.min()) < -1e-7:
        raise SubstepTooCoarseError(
            f"propagator substep too coarse: row-sum drift {row_drift:.2e}, "
            f"min entry {p.min():.2e} (nsub={nsub})"
        )
    return p


def flatten_outside(w, center: int, radius: int, value: float) -> np.ndarray:
    """Keep w_j for |j - center| < radius, substitute value elsewhere.

    center is a 0-based array index.
    """
    w = np.asarray(w, dtype=float)
    j = np.arange(w.size)
    return np.where(np.abs(j - center) < radius, w, value)


def window_average(w, center: int, scale: int, value: float) -> np.ndarray:
    """Average of flatten_outside over radii b in [scale, 2*scale).

    scale = 1 reduces to a single flatten at radius 1.
    """
    if scale < 1:
        raise ValueError("scale must be >= 1")
    w = np.asarray(w, dtype=float)
    acc = np.zeros_like(w)
    for b in range(scale, 2 * scale):
        acc += flatten_outside(w, center, b, value)
    return acc / scale
