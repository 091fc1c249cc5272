"""Closed-form model coefficients: drift, reaction rate, calcite recovery.

All functions are pure and vectorized; ``I`` denotes the time-integrated
mollified density at a point and ``J`` the time-integrated gradient, the
two arguments of the drift.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .config import PhysicalParams


class DriftArgs(NamedTuple):
    """Accumulated density integral I (>= 0) and gradient integral J."""

    I: np.ndarray | float
    J: np.ndarray | float


def porosity(c, p: PhysicalParams):
    """Affine porosity phi(c) = phi0 + phi1 * c."""
    return p.phi0 + p.phi1 * np.asarray(c, dtype=float)


def drift_b(I, J, p: PhysicalParams):
    """Velocity exerted by the porosity gradient.

    b(I, J) = -phi1 lambda c0 exp(-lambda I) J / (phi0 + phi1 c0 exp(-lambda I)).

    The denominator is positive whenever the porosity invariants hold,
    since exp(-lambda I) lies in (0, 1] for I >= 0.
    """
    I = np.asarray(I, dtype=float)
    J = np.asarray(J, dtype=float)
    if not (np.all(np.isfinite(I)) and np.all(np.isfinite(J))):
        raise ValueError("drift arguments must be finite")
    e = np.exp(-p.lam * I)
    out = -p.phi1 * p.lam * p.c0 * e * J / (p.phi0 + p.phi1 * p.c0 * e)
    if out.ndim == 0:
        return float(out)
    return out


def reaction_rate(I, p: PhysicalParams):
    """Reaction/hazard rate lambda c0 exp(-lambda I), decreasing in I."""
    I = np.asarray(I, dtype=float)
    if np.any(I < 0):
        raise ValueError("accumulated density integral I must be nonnegative")
    out = p.lam * p.c0 * np.exp(-p.lam * I)
    if out.ndim == 0:
        return float(out)
    return out


def recover_calcite(I, p: PhysicalParams):
    """Calcite remaining after exposure I: c = c0 exp(-lambda I) in (0, c0]."""
    I = np.asarray(I, dtype=float)
    if np.any(I < 0):
        raise ValueError("accumulated density integral I must be nonnegative")
    out = p.c0 * np.exp(-p.lam * I)
    if out.ndim == 0:
        return float(out)
    return out


def drift_lipschitz_bound(p: PhysicalParams) -> float:
    """Upper bound on |b(I, J)| / |J|, uniform in I >= 0."""
    return abs(p.phi1) * p.lam * p.c0 / min(p.phi0, p.phi0 + p.phi1 * p.c0)
