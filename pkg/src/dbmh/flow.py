"""Coupled Dyson Brownian motion integrator with shared noise.

Two ordered particle systems are advanced with identical Brownian
increments per index, which is what makes their difference a slow field
that the homogenized predictor approximates.

The stepping scheme is a Strang splitting.  The smooth part of the drift
(confinement plus all interactions except tight adjacent bonds) is applied
in explicit half-steps.  Adjacent pairs whose gap is comparable to the
per-step noise are the stiff, crossing-prone part: for beta = 1, 2 the gap
of an isolated pair is a squared Bessel process of dimension beta + 1, so
those bonds are advanced with the exact transition kernel (a noncentral
chi-square, realized with shared Gaussians so the coupling survives).
Runs of two or more tight bonds fall back to locally sub-stepped explicit
updates.  Rejected steps are retried on Brownian-bridge refinements of the
same increments, so both systems always stay on one filtration.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ensembles import RngStream

__all__ = [
    "ParticleState",
    "CoupledTrajectory",
    "IntegratorOptions",
    "StepUnderflowError",
    "MissingCheckpointError",
    "dyson_drift",
    "evolve_coupled",
    "scaled_difference",
    "initial_difference",
    "coupled_difference_drift",
    "empirical_stieltjes",
    "difference_observable",
    "write_checkpoints_csv",
]


class StepUnderflowError(RuntimeError):
    """Step size fell below the resolvable floor between two particles."""

    def __init__(self, h, i, j):
        super().__init__(
            f"step size {h:.3e} underflowed between particle indices {i} and {j}"
        )
        self.pair = (i, j)


class MissingCheckpointError(KeyError):
    pass


def _drift_numpy(x):
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, np.inf)
    return (1.0 / d).sum(axis=1) / x.shape[0] - 0.5 * x


try:
    from numba import njit

    @njit(cache=True, fastmath=True)
    def _drift_numba(x):  # pragma: no cover - exercised via dyson_drift
        n = x.shape[0]
        acc = np.zeros(n)
        for i in range(n):
            xi = x[i]
            s = 0.0
            for j in range(i + 1, n):
                r = 1.0 / (xi - x[j])
                s += r
                acc[j] -= r
            acc[i] += s
        for i in range(n):
            acc[i] = acc[i] / n - 0.5 * x[i]
        return acc

    def _full_drift(x):
        return _drift_numba(x)

except ImportError:  # pragma: no cover
    _full_drift = _drift_numpy


def dyson_drift(x) -> np.ndarray:
    """Drift (1/N) sum_{j != i} 1/(x_i - x_j) - x_i/2 of the particle SDE."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("expected a one-dimensional particle configuration")
    if x.size > 1 and not np.all(np.diff(x) < 0):
        raise ValueError("particles must be strictly descending")
    return _full_drift(x)


@dataclass(frozen=True)
class ParticleState:
    """Strictly descending particle configuration at a fixed time."""

    x: np.ndarray
    time: float

    def __post_init__(self):
        if self.x.size > 1 and not np.all(np.diff(self.x) < 0):
            raise ValueError("particle state is not strictly descending")
        self.x.setflags(write=False)


@dataclass
class CoupledTrajectory:
    """Checkpointed pair of particle paths driven by identical noise."""

    times: np.ndarray
    lambda_states: np.ndarray  # (len(times), N)
    mu_states: np.ndarray
    shared_seed: RngStream
    beta: int
    step_stats: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.lambda_states.shape[1]

    def _index(self, t: float) -> int:
        hits = np.nonzero(self.times == t)[0]
        if hits.size == 0:
            raise MissingCheckpointError(f"no checkpoint at t={t!r}")
        return int(hits[0])

    def lam(self, t: float) -> np.ndarray:
        return self.lambda_states[self._index(t)]

    def mu(self, t: float) -> np.ndarray:
        return self.mu_states[self._index(t)]

    def state(self, t: float, flow: str = "lambda") -> ParticleState:
        x = self.lam(t) if flow == "lambda" else self.mu(t)
        return ParticleState(x=x.copy(), time=t)


@dataclass(frozen=True)
class IntegratorOptions:
    dt_cap: float | None = None  # default: t_final / 2000
    tight_sigma: float = 4.0  # bonds within this many noise sigmas get exact gap steps
    tight_fraction_cap: float = 0.25  # halve the step when more bonds than this are tight
    noise_scale: float = 1.0  # 0.0 runs the deterministic flow (testing only)
    min_step: float = 1e-12
    soft_heun: bool = False  # predictor-corrector soft stages (2x drift cost)


def _strictly_descending(x) -> bool:
    return x.size < 2 or bool(np.all(np.diff(x) < 0))


def _soft_drift(x, tight, n):
    """Full drift minus the repulsion terms of the flagged adjacent bonds."""
    f = _full_drift(x)
    if tight.any():
        idx = np.nonzero(tight)[0]
        inv = 1.0 / (x[idx] - x[idx + 1])
        np.add.at(f, idx, -inv / n)
        np.add.at(f, idx + 1, inv / n)
    return f


def _tight_runs(mask):
    """Maximal runs of consecutive True entries as inclusive (start, end) pairs."""
    runs = []
    idx = np.nonzero(mask)[0]
    if idx.size == 0:
        return runs
    start = prev = int(idx[0])
    for b in idx[1:]:
        b = int(b)
        if b != prev + 1:
            runs.append((start, prev))
            start = b
        prev = b
    runs.append((start, prev))
    return runs


def _bessel_gap_map(g, u1, phantom_sq, rep):
    """Exact gap transition sqrt((g + u1)^2 + c h |Z|^2) of the pair SDE.

    With noise off (u1 = phantom = 0) this degenerates to the exact ODE
    solution sqrt(g^2 + 4h/N) supplied through rep.
    """
    return np.sqrt((g + u1) ** 2 + phantom_sq + rep)


class _CoupledStepper:
    def __init__(self, l0, m0, t_final, beta, rng, opts):
        self.n = l0.size
        self.beta = beta
        self.opts = opts
        self.gen = rng.generator()
        self.lam = l0.astype(float).copy()
        self.mu = m0.astype(float).copy()
        s = opts.noise_scale
        if s not in (0.0, 1.0):
            raise ValueError("noise_scale must be 0.0 or 1.0")
        self.sigma = s * np.sqrt(2.0 / (self.n * beta))
        self.sigma_gap = self.sigma * np.sqrt(2.0)
        self.dt_cap = opts.dt_cap if opts.dt_cap is not None else t_final / 2000.0
        self.stats = {"accepted": 0, "rejected": 0, "splits": 0, "micro_steps": 0}

    # -- noise bookkeeping -------------------------------------------------

    def _bridge_split(self, h, w):
        """Split an increment over h into two conditionally exact halves."""
        half = 0.5 * h
        if self.sigma > 0.0:
            mid = 0.5 * w + np.sqrt(half) * 0.5 * 2.0 ** 0.5 * self.gen.standard_normal(self.n)
        else:
            mid = 0.5 * w
        return half, mid, w - mid

    def _tight_bonds(self, h):
        gl = self.lam[:-1] - self.lam[1:]
        gm = self.mu[:-1] - self.mu[1:]
        gmin = np.minimum(gl, gm)
        if self.n < 2:
            return np.zeros(0, dtype=bool), gmin
        thresh = self.opts.tight_sigma * self.sigma_gap * np.sqrt(h)
        return gmin < thresh, gmin

    # -- one attempted macro step -----------------------------------------

    def _soft_half(self, x, tight, h):
        """One soft half-step, explicit Euler or Heun per options."""
        n = self.n
        f0 = _soft_drift(x, tight, n)
        if not self.opts.soft_heun:
            return x + 0.5 * h * f0
        pred = x + 0.5 * h * f0
        if not _strictly_descending(pred):
            return pred  # let the caller's ordering check reject the step
        f1 = _soft_drift(pred, tight, n)
        return x + 0.25 * h * (f0 + f1)

    def attempt(self, h, w):
        """Try one step of size h with shared increments w; None on rejection."""
        n, sigma = self.n, self.sigma
        tight, _ = self._tight_bonds(h)
        lam = self._soft_half(self.lam, tight, h)
        mu = self._soft_half(self.mu, tight, h)
        if not (_strictly_descending(lam) and _strictly_descending(mu)):
            return None

        free = np.ones(n, dtype=bool)
        runs = _tight_runs(tight)  # inclusive bond runs; bond j joins particles j, j+1
        pairs = np.array([a for a, b in runs if a == b], dtype=int)
        longer = [(a, b) for a, b in runs if b > a]
        for a, b in runs:
            free[a : b + 2] = False

        if sigma > 0.0:
            lam[free] += sigma * w[free]
            mu[free] += sigma * w[free]

        if pairs.size:
            self._bessel_pairs(lam, mu, pairs, h, w)
        for a, b in longer:
            self._advance_window(lam, mu, a, b + 1, h, w[a : b + 2].copy())

        if not (_strictly_descending(lam) and _strictly_descending(mu)):
            return None

        # the step's operator split is fixed at classification time
        lam = self._soft_half(lam, tight, h)
        mu = self._soft_half(mu, tight, h)
        if not (_strictly_descending(lam) and _strictly_descending(mu)):
            return None
        return lam, mu

    def _bessel_pairs(self, lam, mu, bonds, h, w):
        """Exact advance of isolated bonds (vectorized) plus member noise."""
        sigma = self.sigma
        if sigma > 0.0:
            u1 = sigma * (w[bonds] - w[bonds + 1])
            z = self.gen.standard_normal((bonds.size, self.beta))
            phantom = 2.0 * sigma**2 * h * (z**2).sum(axis=1)
            rep = 0.0
        else:
            u1 = np.zeros(bonds.size)
            phantom = 0.0
            rep = 4.0 * h / self.n
        shift = sigma * 0.5 * (w[bonds] + w[bonds + 1])
        for x in (lam, mu):
            g = x[bonds] - x[bonds + 1]
            m = 0.5 * (x[bonds] + x[bonds + 1]) + shift
            g2 = _bessel_gap_map(g, u1, phantom, rep)
            x[bonds] = m + 0.5 * g2
            x[bonds + 1] = m - 0.5 * g2

    def _bessel_pair(self, lam, mu, a, h, w2):
        """Exact advance of the single bond (a, a+1); w2 holds its two increments."""
        sigma = self.sigma
        if sigma > 0.0:
            u1 = sigma * (w2[0] - w2[1])
            z = self.gen.standard_normal(self.beta)
            phantom = 2.0 * sigma**2 * h * float((z**2).sum())
            rep = 0.0
        else:
            u1, phantom, rep = 0.0, 0.0, 4.0 * h / self.n
        shift = sigma * 0.5 * (w2[0] + w2[1])
        for x in (lam, mu):
            g = x[a] - x[a + 1]
            m = 0.5 * (x[a] + x[a + 1]) + shift
            g2 = _bessel_gap_map(g, u1, phantom, rep)
            x[a] = m + 0.5 * g2
            x[a + 1] = m - 0.5 * g2

    def _advance_window(self, lam, mu, lo, hi, h, w):
        """Advance particles lo..hi over h using only the window's adjacent
        bonds plus member noise (soft terms are handled by the outer stages).

        Scales separate recursively: at each level, bonds loose relative to
        the level's noise are stepped explicitly, isolated tight bonds get
        the exact gap transition, and runs of tight bonds recurse on
        bridge-refined increments.
        """
        m = hi - lo + 1
        if m == 1:
            lam[lo] += self.sigma * w[0]
            mu[lo] += self.sigma * w[0]
            return
        if m == 2:
            self._bessel_pair(lam, mu, lo, h, w)
            return

        n, sigma = self.n, self.sigma
        stack = [(h, w)]
        guard = 0
        while stack:
            guard += 1
            if guard > 500000:
                raise StepUnderflowError(h, lo, hi)  # pathological stall
            hh, ww = stack.pop()
            gl = lam[lo : hi] - lam[lo + 1 : hi + 1]
            gm = mu[lo : hi] - mu[lo + 1 : hi + 1]
            g = np.minimum(gl, gm)
            if sigma > 0.0:
                thresh = self.opts.tight_sigma * self.sigma_gap * np.sqrt(hh)
                tight = g < thresh
            else:
                tight = hh > n * g**2 / 8.0  # explicit-step stability
            if tight.all():
                if hh / 2.0 < self.opts.min_step:
                    k = int(np.argmin(g))
                    raise StepUnderflowError(hh, lo + k, lo + k + 1)
                half, w1, w2 = self._bridge_split_piece(hh, ww)
                stack.append((half, w2))
                stack.append((half, w1))
                continue

            runs = _tight_runs(tight)
            in_run = np.zeros(m, dtype=bool)
            for a, b in runs:
                in_run[a : b + 2] = True  # bond run a..b covers particles a..b+1

            snap_l = lam[lo : hi + 1].copy()
            snap_m = mu[lo : hi + 1].copy()

            ok = True
            proposals = []
            for x in (lam, mu):
                xw = x[lo : hi + 1]
                loose = ~tight
                inv = np.zeros(m - 1)
                gaps = xw[:-1] - xw[1:]
                inv[loose] = 1.0 / (n * gaps[loose])
                drift = np.zeros(m)
                drift[:-1] += inv
                drift[1:] -= inv
                prop = xw + hh * drift
                proposals.append(prop)
            free = ~in_run
            for prop in proposals:
                prop[free] += sigma * ww[free]
            lam[lo : hi + 1] = proposals[0]
            mu[lo : hi + 1] = proposals[1]

            for a, b in runs:
                self._advance_window(lam, mu, lo + a, lo + b + 1, hh, ww[a : b + 2].copy())

            gl = lam[lo : hi] - lam[lo + 1 : hi + 1]
            gm = mu[lo : hi] - mu[lo + 1 : hi + 1]
            if np.any(gl <= 0.0) or np.any(gm <= 0.0):
                lam[lo : hi + 1] = snap_l
                mu[lo : hi + 1] = snap_m
                if hh / 2.0 < self.opts.min_step:
                    k = int(np.argmin(np.minimum(gl, gm)))
                    raise StepUnderflowError(hh, lo + k, lo + k + 1)
                half, w1, w2 = self._bridge_split_piece(hh, ww)
                stack.append((half, w2))
                stack.append((half, w1))
                continue
            self.stats["micro_steps"] += 1

    def _bridge_split_piece(self, h, w):
        half = 0.5 * h
        if self.sigma > 0.0:
            mid = 0.5 * w + np.sqrt(0.25 * h) * self.gen.standard_normal(w.size)
        else:
            mid = 0.5 * w
        return half, mid, w - mid


def evolve_coupled(
    l0,
    m0,
    t_final: float,
    beta: int,
    rng: RngStream,
    checkpoints,
    options: IntegratorOptions | None = None,
) -> CoupledTrajectory:
    """Advance two coupled particle systems to t_final with shared noise.

    Both systems receive identical Gaussian increments sqrt(2/(N beta)) dB_i
    per index.  States are recorded exactly at the requested checkpoint
    times (t_final is appended when missing; t=0 is always stored).  Strict
    ordering is enforced in both systems at every accepted step; crossing
    attempts are retried on bridge-refined noise, never silently reordered.
    """
    l0 = np.asarray(l0, dtype=float)
    m0 = np.asarray(m0, dtype=float)
    if l0.shape != m0.shape or l0.ndim != 1:
        raise ValueError("initial data must be two equal-length vectors")
    if not (_strictly_descending(l0) and _strictly_descending(m0)):
        raise ValueError("initial data must be strictly descending")
    if not 0.0 < t_final <= 1.0:
        raise ValueError("t_final must lie in (0, 1]")
    if beta not in (1, 2):
        raise ValueError("beta must be 1 or 2")

    targets = sorted(set(float(c) for c in checkpoints) | {float(t_final)})
    if targets and (targets[0] <= 0.0 or targets[-1] > t_final):
        raise ValueError("checkpoints must lie in (0, t_final]")

    opts = options or IntegratorOptions()
    stepper = _CoupledStepper(l0, m0, t_final, beta, rng, opts)

    times = [0.0]
    lam_states = [l0.copy()]
    mu_states = [m0.copy()]

    t = 0.0
    for target in targets:
        pending = []  # stack of (h, w, lands_on_target)
        while t < target:
            if pending:
                h, w, lands = pending.pop()
            else:
                span = target - t
                if span <= stepper.dt_cap:
                    h, lands = span, True
                else:
                    h, lands = stepper.dt_cap, False
                w = stepper.gen.standard_normal(stepper.n) * np.sqrt(h)

            tight, _ = stepper._tight_bonds(h)
            if (
                tight.size
                and tight.mean() > opts.tight_fraction_cap
                and h / 2.0 >= opts.min_step
            ):
                half, w1, w2 = stepper._bridge_split(h, w)
                pending.append((half, w2, lands))
                pending.append((half, w1, False))
                stepper.stats["splits"] += 1
                continue

            result = stepper.attempt(h, w)
            if result is None:
                if h / 2.0 < opts.min_step:
                    gl = stepper.lam[:-1] - stepper.lam[1:]
                    gm = stepper.mu[:-1] - stepper.mu[1:]
                    k = int(np.argmin(np.minimum(gl, gm)))
                    raise StepUnderflowError(h, k, k + 1)
                half, w1, w2 = stepper._bridge_split(h, w)
                pending.append((half, w2, lands))
                pending.append((half, w1, False))
                stepper.stats["rejected"] += 1
                continue

            stepper.lam, stepper.mu = result
            stepper.stats["accepted"] += 1
            t = target if (lands and not pending) else t + h

        times.append(target)
        lam_states.append(stepper.lam.copy())
        mu_states.append(stepper.mu.copy())

    return CoupledTrajectory(
        times=np.array(times),
        lambda_states=np.array(lam_states),
        mu_states=np.array(mu_states),
        shared_seed=rng,
        beta=beta,
        step_stats=stepper.stats,
    )


def scaled_difference(traj: CoupledTrajectory, t: float) -> np.ndarray:
    """Difference field exp(t/2) (lambda_i(t) - mu_i(t)) at a checkpoint."""
    return np.exp(t / 2.0) * (traj.lam(t) - traj.mu(t))


def initial_difference(traj: CoupledTrajectory) -> np.ndarray:
    return traj.lam(0.0) - traj.mu(0.0)


def coupled_difference_drift(lam, mu, v) -> np.ndarray:
    """Apply the discrete difference generator with mixed denominators.

    (1/N) sum_{j != i} (v_j - v_i) / ((lam_i - lam_j)(mu_i - mu_j)); this is
    the generator the scaled difference field satisfies along a coupled
    trajectory.
    """
    lam = np.asarray(lam, float)
    mu = np.asarray(mu, float)
    v = np.asarray(v, float)
    n = lam.size
    dl = lam[:, None] - lam[None, :]
    dm = mu[:, None] - mu[None, :]
    np.fill_diagonal(dl, np.inf)
    np.fill_diagonal(dm, 1.0)
    kernel = 1.0 / (dl * dm)
    return (kernel * (v[None, :] - v[:, None])).sum(axis=1) / n


def empirical_stieltjes(x, z) -> complex:
    """(1/N) sum 1/(x_i - z) for a particle configuration."""
    x = np.asarray(x, dtype=float)
    return complex(np.mean(1.0 / (x - z)))


def difference_observable(traj: CoupledTrajectory, t: float, z, flow: str = "lambda") -> complex:
    """exp(-t/2) sum_i u_i(t) / (x_i(t) - z) for the chosen flow."""
    u = scaled_difference(traj, t)
    x = traj.lam(t) if flow == "lambda" else traj.mu(t)
    return complex(np.exp(-t / 2.0) * np.sum(u / (x - z)))


def write_checkpoints_csv(traj: CoupledTrajectory, path) -> None:
    """Dump all checkpoints as CSV rows (time, index, lambda, mu)."""
    with open(path, "w") as fh:
        fh.write("time,index,lambda,mu\n")
        for ti, t in enumerate(traj.times):
            lam = traj.lambda_states[ti]
            mu = traj.mu_states[ti]
            for i in range(traj.n):
                fh.write(f"{t:.17g},{i + 1},{lam[i]:.17g},{mu[i]:.17g}\n")
