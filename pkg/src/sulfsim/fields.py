"""Path-dependent accumulated fields A(t,x) and G(t,x) on a grid.

A and G hold left-endpoint time quadratures of the mollified density and
its gradient.  The grid accumulator is the production bookkeeping; the
trajectory archive supports an exact-history evaluation of the same sums
with no spatial interpolation, used as an oracle and by the fixed-point
module.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .config import Grid1D
from .dynamics import DriftArgs
from .kernel import WeightedPointCloud, grid_density, mollify, mollify_grad


@dataclass
class AccumulatedFields:
    """Grid samples of the running time integrals, plus the current time."""

    grid: Grid1D
    delta: float
    A: np.ndarray = field(default=None)  # type: ignore[assignment]
    G: np.ndarray = field(default=None)  # type: ignore[assignment]
    t: float = 0.0
    steps: int = 0
    out_of_domain: int = 0  # interpolation queries beyond the grid

    def __post_init__(self):
        m = self.grid.n_nodes
        if self.A is None:
            self.A = np.zeros(m)
        if self.G is None:
            self.G = np.zeros(m)
        if self.A.shape != (m,) or self.G.shape != (m,):
            raise ValueError("A and G must have one entry per grid node")

    def args_at(self, x) -> DriftArgs:
        return interpolate(self, x)


@dataclass
class TrajectoryArchive:
    """Per-step snapshots of the particle cloud (positions and weights).

    Snapshot k is the ensemble state at time k*dt; dead particles appear
    with weight 0 so every snapshot has the full ensemble length.
    """

    dt: float
    n_total: int
    positions: list[np.ndarray] = field(default_factory=list)
    weights: list[np.ndarray] = field(default_factory=list)

    def append(self, cloud: WeightedPointCloud) -> None:
        self.positions.append(cloud.positions.copy())
        self.weights.append(cloud.weights.copy())

    def __len__(self) -> int:
        return len(self.positions)

    def snapshot(self, k: int) -> WeightedPointCloud:
        return WeightedPointCloud(self.positions[k], self.weights[k])

    def position_matrix(self) -> np.ndarray:
        """Paths as an (n_snapshots, n_total) array."""
        return np.stack(self.positions)


@dataclass
class ExactHistoryFields:
    """Field view that reads (I, J) straight off an archive.

    Quadratic in step count; used when ``field_mode`` is exact-history so
    the dynamics see the time integrals with no interpolation error.
    """

    archive: TrajectoryArchive
    delta: float
    n_total: int

    def args_at(self, x) -> DriftArgs:
        x = np.asarray(x, dtype=float)
        if len(self.archive) == 0:
            zero = np.zeros(x.shape)
            if zero.ndim == 0:
                return DriftArgs(0.0, 0.0)
            return DriftArgs(zero, zero.copy())
        return exact_history_args(self.archive, x, self.delta, self.n_total)


def accumulate_step(
    fields: AccumulatedFields,
    cloud: WeightedPointCloud,
    n_total: int,
    delta: float,
    dt: float,
    workers: int = 1,
) -> AccumulatedFields:
    """Add one left-endpoint quadrature term from the cloud at time fields.t.

    A(x_g) += dt * u(x_g), G(x_g) += dt * u'(x_g); the field time advances
    by dt.  Returns ``fields`` (updated in place).
    """
    if abs(delta - fields.delta) > 1e-15 * max(delta, fields.delta):
        raise ValueError(
            f"bandwidth mismatch: fields built for delta={fields.delta}, got {delta}"
        )
    u, du = grid_density(cloud, fields.grid, delta, n_total, workers=workers)
    fields.A += dt * u
    fields.G += dt * du
    fields.t += dt
    fields.steps += 1
    return fields


def interpolate(fields: AccumulatedFields, x) -> DriftArgs:
    """Piecewise-linear read of (A, G) at positions ``x``.

    Queries beyond the grid return the boundary-node values and bump the
    out-of-domain counter; positions are never clamped, so the dynamics
    continue off-grid.
    """
    x = np.asarray(x, dtype=float)
    g = fields.grid
    m = g.n_nodes
    pos = (x - g.lower) / g.spacing
    outside = (pos < 0.0) | (pos > m - 1)
    fields.out_of_domain += int(np.count_nonzero(outside))
    pos = np.clip(pos, 0.0, m - 1)
    j = np.minimum(pos.astype(np.int64), m - 2)
    frac = pos - j
    I = fields.A[j] * (1.0 - frac) + fields.A[j + 1] * frac
    J = fields.G[j] * (1.0 - frac) + fields.G[j + 1] * frac
    if I.ndim == 0:
        return DriftArgs(float(I), float(J))
    return DriftArgs(I, J)


def exact_history_args(
    archive: TrajectoryArchive,
    x,
    delta: float,
    n_total: int,
    steps: int | None = None,
) -> DriftArgs:
    """Direct evaluation of the accumulated integrals from stored snapshots.

    I = dt * sum_{k < steps} mollify(snapshot_k, x); same quadrature as the
    grid accumulator but with no spatial interpolation.  ``steps`` defaults
    to every stored snapshot.
    """
    if len(archive) == 0:
        raise ValueError("archive is empty")
    if steps is None:
        steps = len(archive)
    x = np.asarray(x, dtype=float)
    I = np.zeros(x.shape)
    J = np.zeros(x.shape)
    for k in range(steps):
        cloud = archive.snapshot(k)
        I += archive.dt * np.asarray(mollify(cloud, delta, x, n_total))
        J += archive.dt * np.asarray(mollify_grad(cloud, delta, x, n_total))
    if I.ndim == 0:
        return DriftArgs(float(I), float(J))
    return DriftArgs(I, J)


def accumulate_from_archive(
    archive: TrajectoryArchive,
    grid: Grid1D,
    delta: float,
    n_total: int,
    steps: int | None = None,
    workers: int = 1,
) -> AccumulatedFields:
    """Replay an archive through the grid accumulator (for validation)."""
    fields = AccumulatedFields(grid=grid, delta=delta)
    if steps is None:
        steps = len(archive)
    for k in range(steps):
        accumulate_step(fields, archive.snapshot(k), n_total, delta, archive.dt, workers)
    return fields
