"""Training/validation parameter sets: tensor grids, Latin hypercube, splits.

All randomness flows through ``numpy.random.default_rng`` (PCG64), so a
seed fully determines every sample on any platform.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

MAX_GRID_POINTS = 50_000_000

ROLE_TRAIN = "train"
ROLE_VAL = "val"


@dataclass(frozen=True)
class ParameterGrid:
    """A finite set of parameter points with train/val roles."""

    points: np.ndarray        # (n, d)
    roles: np.ndarray         # (n,) str, "train" or "val"
    generators: tuple[str, ...] = ()
    seed: int | None = None
    box: np.ndarray | None = None  # (d, 2) declared bounds

    def __post_init__(self):
        if self.points.ndim != 2:
            raise ConfigurationError(
                f"points must be 2-D (n, d), got shape {self.points.shape}"
            )
        if len(self.roles) != len(self.points):
            raise ConfigurationError("roles length must match points")

    @property
    def n_points(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def train_indices(self) -> np.ndarray:
        return np.flatnonzero(self.roles == ROLE_TRAIN)

    @property
    def val_indices(self) -> np.ndarray:
        return np.flatnonzero(self.roles == ROLE_VAL)

    @property
    def train_points(self) -> np.ndarray:
        return self.points[self.train_indices]

    @property
    def val_points(self) -> np.ndarray:
        return self.points[self.val_indices]


def grid_1d(kind: str, lo: float, hi: float, n: int, decades: float = 3.0) -> np.ndarray:
    """One axis of a tensor grid: uniform, log, or signed-symmetric-log spacing.

    ``symlog`` maps a uniform grid on [-1, 1] through
    sign(t) * hi * 10**(decades * (|t| - 1)); it requires lo == -hi and
    includes 0 exactly when n is odd.
    """
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise ConfigurationError(f"axis needs n >= 2 points, got {n!r}")
    if not lo < hi:
        raise ConfigurationError(f"axis bounds must satisfy lo < hi, got [{lo}, {hi}]")
    if kind == "uniform":
        return np.linspace(lo, hi, n)
    if kind == "log":
        if lo * hi <= 0.0:
            raise ConfigurationError(
                f"log spacing needs strictly same-sign bounds, got [{lo}, {hi}]; "
                "use 'symlog' for ranges crossing zero"
            )
        return np.geomspace(lo, hi, n)
    if kind == "symlog":
        if not (hi > 0.0 and np.isclose(lo, -hi)):
            raise ConfigurationError(
                f"symlog spacing needs lo == -hi > 0, got [{lo}, {hi}]"
            )
        t = np.linspace(-1.0, 1.0, n)
        return np.sign(t) * hi * 10.0 ** (decades * (np.abs(t) - 1.0))
    raise ConfigurationError(f"unknown axis kind {kind!r}")


def tensor_grid(
    axes: Sequence[np.ndarray], generators: Sequence[str] | None = None
) -> ParameterGrid:
    """Full tensor product of 1-D axes; the last axis varies fastest."""
    axes = [np.asarray(a, dtype=float).ravel() for a in axes]
    if not axes:
        raise ConfigurationError("tensor grid needs at least one axis")
    total = int(np.prod([len(a) for a in axes]))
    if total > MAX_GRID_POINTS:
        raise ConfigurationError(
            f"tensor grid would have {total} points (limit {MAX_GRID_POINTS})"
        )
    mesh = np.meshgrid(*axes, indexing="ij")
    points = np.stack([m.ravel() for m in mesh], axis=1)
    box = np.array([[a.min(), a.max()] for a in axes])
    return ParameterGrid(
        points=points,
        roles=np.full(total, ROLE_TRAIN),
        generators=tuple(generators) if generators else ("tensor",) * len(axes),
        box=box,
    )


def lhs(
    dim: int,
    n: int,
    box: Sequence[Sequence[float]],
    seed: int,
    scales: str | Sequence[str] | None = None,
) -> ParameterGrid:
    """Latin hypercube sample: one point per stratum along every dimension.

    ``scales`` selects per-dimension "linear" (default) or "log" placement;
    log requires strictly positive bounds for that dimension.
    """
    if not isinstance(dim, (int, np.integer)) or dim < 1:
        raise ConfigurationError(f"dim must be a positive integer, got {dim!r}")
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ConfigurationError(f"n must be a positive integer, got {n!r}")
    box = np.asarray(box, dtype=float)
    if box.shape != (dim, 2) or np.any(box[:, 0] >= box[:, 1]):
        raise ConfigurationError(
            f"box must be (dim, 2) with lo < hi per row, got shape {box.shape}"
        )
    if scales is None:
        scales = ["linear"] * dim
    elif isinstance(scales, str):
        scales = [scales] * dim
    if len(scales) != dim:
        raise ConfigurationError(f"need one scale per dimension, got {len(scales)}")

    rng = np.random.default_rng(seed)
    points = np.empty((n, dim))
    for k in range(dim):
        # one uniform draw per stratum, stratum order shuffled
        u = (rng.permutation(n) + rng.random(n)) / n
        lo, hi = box[k]
        if scales[k] == "linear":
            points[:, k] = lo + u * (hi - lo)
        elif scales[k] == "log":
            if lo <= 0.0:
                raise ConfigurationError(
                    f"log scale on dimension {k} needs positive bounds, got [{lo}, {hi}]"
                )
            points[:, k] = np.exp(np.log(lo) + u * (np.log(hi) - np.log(lo)))
        else:
            raise ConfigurationError(f"unknown scale {scales[k]!r} for dimension {k}")
    return ParameterGrid(
        points=points,
        roles=np.full(n, ROLE_TRAIN),
        generators=tuple(f"lhs-{s}" for s in scales),
        seed=int(seed),
        box=box,
    )


def split_train_val(grid: ParameterGrid, n_val: int, seed: int) -> ParameterGrid:
    """Mark a seeded random subset of points as validation (without replacement)."""
    if not 0 <= n_val < grid.n_points:
        raise ConfigurationError(
            f"n_val={n_val} must satisfy 0 <= n_val < {grid.n_points}"
        )
    roles = np.full(grid.n_points, ROLE_TRAIN)
    if n_val > 0:
        rng = np.random.default_rng(seed)
        val = rng.choice(grid.n_points, size=n_val, replace=False)
        roles[val] = ROLE_VAL
    return replace(grid, roles=roles)


def save_params_csv(grid: ParameterGrid, path: str | Path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"mu_{k + 1}" for k in range(grid.dim)] + ["role"])
        for point, role in zip(grid.points, grid.roles):
            writer.writerow([repr(float(v)) for v in point] + [role])


def load_params_csv(path: str | Path) -> ParameterGrid:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if not header or header[-1] != "role" or not header[0].startswith("mu_"):
            raise ConfigurationError(
                f"{path} is not a parameter CSV (header {header!r})"
            )
        dim = len(header) - 1
        points, roles = [], []
        for row in reader:
            if not row:
                continue
            if len(row) != dim + 1:
                raise ConfigurationError(f"{path}: malformed row {row!r}")
            points.append([float(v) for v in row[:dim]])
            roles.append(row[dim])
    points = np.asarray(points, dtype=float).reshape(-1, dim)
    return ParameterGrid(
        points=points, roles=np.asarray(roles), generators=("csv",) * dim
    )
