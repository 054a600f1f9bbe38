"""Characteristic flow z_t of the limiting advection equation.

The flow z_t = z0 cosh(t/2) + sqrt(z0^2 - 4) sinh(t/2) solves
dz/dt = m(z) + z/2 where m is the semicircle Stieltjes transform, and m
decays exponentially along it: m(z_t) = exp(-t/2) m(z0).
"""

from __future__ import annotations

import numpy as np

from .semicircle import (
    SpectralQuantiles,
    _as_upper_complex,
    edge_distance,
    sqrt_z2_minus_4,
    stieltjes_transform,
)

__all__ = [
    "advance_characteristic",
    "quantile_characteristic",
    "characteristic_ode_residual",
    "control_scale",
]


def advance_characteristic(z0, t):
    """Closed-form characteristic position at time t, started from z0.

    Real starting points inside (-2, 2) are treated as the limit from the
    upper half plane, so the result acquires the imaginary part
    sqrt(4 - E^2) sinh(t/2) automatically.
    """
    z0 = _as_upper_complex(z0)
    out = z0 * np.cosh(t / 2.0) + sqrt_z2_minus_4(z0) * np.sinh(t / 2.0)
    if out.ndim == 0:
        return complex(out)
    return out


def quantile_characteristic(q: SpectralQuantiles, k: int, t: float) -> complex:
    """Characteristic started from the k-th quantile (1-based index).

    Uses the closed form gamma_k cosh(t/2) + i rho_k sinh(t/2) instead of
    an eta -> 0 numeric limit, avoiding cancellation at the edges.
    """
    if not 1 <= k <= q.n:
        raise IndexError(f"index k={k} out of range 1..{q.n}")
    g = q.gamma[k - 1]
    r = q.rho[k - 1]
    return complex(g * np.cosh(t / 2.0), r * np.sinh(t / 2.0))


def characteristic_ode_residual(z0, t: float, h: float) -> float:
    """Central-difference defect of dz/dt = m(z) + z/2 at time t.

    Test utility; the residual is O(h^2) for the exact flow.
    """
    if not 0.0 < h <= 1e-3:
        raise ValueError("h must lie in (0, 1e-3]")
    zp = advance_characteristic(z0, t + h)
    zm = advance_characteristic(z0, t - h)
    zt = advance_characteristic(z0, t)
    lhs = (zp - zm) / (2.0 * h)
    return abs(lhs - stieltjes_transform(zt) - zt / 2.0)


def control_scale(u: float, e: float, eta: float) -> float:
    """Scale u^2 + u sqrt(kappa(E) + eta) + eta used to localize flows."""
    if u < 0 or eta < 0:
        raise ValueError("u and eta must be nonnegative")
    return u * u + u * np.sqrt(edge_distance(e) + eta) + eta
