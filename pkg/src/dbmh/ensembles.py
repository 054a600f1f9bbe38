"""Generalized Wigner ensembles: variance profiles, entry laws, sampling.

Conventions: a profile S is an N x N symmetric matrix of entry variances
with unit column sums; sampled matrices are exactly self-adjoint (one
triangle is drawn, the other mirrored).  All randomness flows through
counter-based RngStream objects so that every draw is reproducible
bit-exactly from (seed, stream_id).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
import scipy.linalg

__all__ = [
    "RngStream",
    "VarianceProfile",
    "EnsembleSpec",
    "ENTRY_LAWS",
    "make_profile",
    "sample_wigner",
    "ou_interpolate",
    "eigenvalues_desc",
    "fourth_cumulant",
    "save_matrix",
    "load_matrix",
]


@dataclass(frozen=True)
class RngStream:
    """Deterministic random stream addressed by (seed, stream_id)."""

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream_id,))
        return np.random.default_rng(ss)

    def child(self, stream_id: int) -> "RngStream":
        # flat addressing: children are offsets in stream-id space
        return RngStream(self.seed, self.stream_id * 1000 + stream_id)


@dataclass(frozen=True)
class VarianceProfile:
    """Symmetric nonnegative variance matrix with unit column sums."""

    s: np.ndarray
    c_bound: float  # declared C with 1/(CN) <= S_ij <= C/N

    def __post_init__(self):
        self.s.setflags(write=False)

    @property
    def n(self) -> int:
        return self.s.shape[0]


@dataclass(frozen=True)
class EnsembleSpec:
    n: int
    beta: int
    entry_law: str
    profile: VarianceProfile

    def __post_init__(self):
        if self.beta not in (1, 2):
            raise ValueError("beta must be 1 (real symmetric) or 2 (complex Hermitian)")
        if self.entry_law not in ENTRY_LAWS:
            raise ValueError(f"unknown entry law {self.entry_law!r}")
        if self.profile.n != self.n:
            raise ValueError("profile dimension does not match n")


def _sinkhorn(a: np.ndarray, tol: float = 1e-12, max_sweeps: int = 1000) -> np.ndarray:
    """Symmetric scaling d a d with unit column sums, d found by iteration."""
    d = 1.0 / np.sqrt(a.sum(axis=1))
    for _ in range(max_sweeps):
        col = d * (a @ d)
        if np.max(np.abs(col - 1.0)) < tol:
            s = a * np.outer(d, d)
            return 0.5 * (s + s.T)
        d = d / np.sqrt(col)
    raise RuntimeError(f"Sinkhorn balancing did not converge in {max_sweeps} sweeps")


def make_profile(kind: str, n: int, param: float = 0.5, beta: int = 1) -> VarianceProfile:
    """Build a canonical variance profile: flat, banded, or two-block.

    flat reproduces the standard Wigner profile, proportional to
    (1 + delta_ij) for beta=1 and constant for beta=2, rebalanced to exact
    unit column sums.  banded doubles the weight inside a band of the given
    width (full width recovers flat); two-block scales cross-block weights
    by param.
    """
    if n < 2:
        raise ValueError("profile needs n >= 2")
    base = np.ones((n, n))
    if beta == 1:
        base += np.eye(n)
    if kind == "flat":
        raw = base
    elif kind == "banded":
        width = int(round(param))
        if width < 1:
            raise ValueError("band width must be >= 1")
        i = np.arange(n)
        raw = base * (1.0 + (np.abs(i[:, None] - i[None, :]) < width))
    elif kind == "two-block":
        if not 0.0 < param <= 1.0:
            raise ValueError("two-block param must lie in (0, 1]")
        half = n // 2
        block = np.ones(n, dtype=int)
        block[:half] = 0
        raw = base * np.where(block[:, None] == block[None, :], 1.0, param)
    else:
        raise ValueError(f"unknown profile kind {kind!r}")
    s = _sinkhorn(raw / n)
    c = max(float(n * s.max()), float(1.0 / (n * s.min())))
    return VarianceProfile(s=s, c_bound=c)


def _sample_rademacher(gen, size):
    return gen.integers(0, 2, size=size) * 2.0 - 1.0


def _sample_uniform(gen, size):
    return gen.uniform(-np.sqrt(3.0), np.sqrt(3.0), size=size)


_MIX_MEAN = 0.8
_MIX_SD = 0.6  # mean^2 + sd^2 = 1


def _sample_smooth_mixture(gen, size):
    signs = _sample_rademacher(gen, size)
    return signs * _MIX_MEAN + gen.standard_normal(size) * _MIX_SD


ENTRY_LAWS = {
    "gaussian": lambda gen, size: gen.standard_normal(size),
    "rademacher": _sample_rademacher,
    "uniform": _sample_uniform,
    "smooth-mixture": _sample_smooth_mixture,
}

# fourth cumulant E[x^4] - 3 of each normalized entry law
_FOURTH_CUMULANTS = {
    "gaussian": 0.0,
    "rademacher": -2.0,
    "uniform": -6.0 / 5.0,
    "smooth-mixture": (_MIX_MEAN**4 + 6 * _MIX_MEAN**2 * _MIX_SD**2 + 3 * _MIX_SD**4) - 3.0,
}


def fourth_cumulant(entry_law: str) -> float:
    """Fourth cumulant of the unit-variance entry law (s4 of the ensemble)."""
    try:
        return _FOURTH_CUMULANTS[entry_law]
    except KeyError:
        raise ValueError(f"unknown entry law {entry_law!r}") from None


def sample_wigner(spec: EnsembleSpec, rng: RngStream) -> np.ndarray:
    """Draw one self-adjoint matrix from the ensemble.

    Unit-variance variates are drawn as full row-major squares (one per
    real component) and only the upper triangle is kept, so the draw
    order, and hence the sample, is a pure function of the stream.
    """
    gen = rng.generator()
    law = ENTRY_LAWS[spec.entry_law]
    n = spec.n
    root_s = np.sqrt(spec.profile.s)
    x = law(gen, (n, n))
    if spec.beta == 1:
        upper = np.triu(x * root_s, k=1)
        h = upper + upper.T + np.diag(np.diag(x) * np.diag(root_s))
        return h
    y = law(gen, (n, n))
    upper = np.triu((x + 1j * y) * (root_s / np.sqrt(2.0)), k=1)
    h = upper + upper.conj().T + np.diag(np.diag(x) * np.diag(root_s)).astype(complex)
    return h


def ou_interpolate(h0: np.ndarray, g: np.ndarray, t: float) -> np.ndarray:
    """Ornstein-Uhlenbeck matrix interpolation exp(-t/2) h0 + sqrt(1-exp(-t)) g."""
    if h0.shape != g.shape:
        raise ValueError("shape mismatch between initial matrix and Gaussian part")
    if t < 0:
        raise ValueError("t must be nonnegative")
    return np.exp(-t / 2.0) * h0 + np.sqrt(-np.expm1(-t)) * g


def eigenvalues_desc(h: np.ndarray) -> np.ndarray:
    """Full spectrum of a self-adjoint matrix, descending.

    LAPACK convergence failures propagate as LinAlgError; they are never
    silently swallowed.
    """
    w = scipy.linalg.eigvalsh(h, check_finite=False)
    return w[::-1].copy()


_DUMP_HEADER = struct.Struct("<III")  # n, beta, dtype code (0=f8, 1=c16)


def save_matrix(path, h: np.ndarray, beta: int) -> None:
    """Write the lower triangle row-major with a little-endian header."""
    n = h.shape[0]
    code = 1 if np.iscomplexobj(h) else 0
    tri = h[np.tril_indices(n)]
    tri = tri.astype("<c16" if code else "<f8")
    with open(path, "wb") as fh:
        fh.write(_DUMP_HEADER.pack(n, beta, code))
        fh.write(tri.tobytes())


def load_matrix(path):
    """Inverse of save_matrix; returns (matrix, beta)."""
    with open(path, "rb") as fh:
        n, beta, code = _DUMP_HEADER.unpack(fh.read(_DUMP_HEADER.size))
        dtype = "<c16" if code else "<f8"
        tri = np.frombuffer(fh.read(), dtype=dtype)
    h = np.zeros((n, n), dtype=complex if code else float)
    h[np.tril_indices(n)] = tri
    strict = np.tril(h, k=-1)
    h = h + (strict.conj().T if code else strict.T)
    return h, beta
