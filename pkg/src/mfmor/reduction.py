"""Snapshot compression: thin SVD, POD truncation, Gram-Schmidt enrichment."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-12
DEFAULT_GS_TOL = 1e-10
ORTHO_DEFECT_TOL = 1e-12


@dataclass(frozen=True)
class SnapshotMatrix:
    """Column-wise snapshots plus the training indices they came from."""

    values: np.ndarray       # (n_space, n_snapshots)
    col_params: np.ndarray   # (n_snapshots,) indices into the parameter set
    space_tag: str = ""      # e.g. "fine-nodal" or "rom-coefficients"

    def __post_init__(self):
        if self.values.ndim != 2:
            raise ConfigurationError(
                f"snapshot matrix must be 2-D, got shape {self.values.shape}"
            )
        if len(self.col_params) != self.values.shape[1]:
            raise ConfigurationError("one parameter index per column required")
        if not np.all(np.isfinite(self.values)):
            raise NumericalError("snapshot matrix contains non-finite entries")


@dataclass(frozen=True)
class SvdTriple:
    """Thin SVD factors; singular values are non-increasing."""

    left: np.ndarray     # (n_space, k)
    values: np.ndarray   # (k,)
    right: np.ndarray    # (n_cols, k), columns are right singular vectors

    def rank(self, rank_tol: float = DEFAULT_RANK_TOL) -> int:
        """Numerical rank: count of sigma_i > rank_tol * sigma_1."""
        if len(self.values) == 0 or self.values[0] == 0.0:
            return 0
        return int(np.sum(self.values > rank_tol * self.values[0]))


@dataclass(frozen=True)
class ReducedBasis:
    """Orthonormal columns spanning the reduced space, with provenance."""

    columns: np.ndarray              # (n_rows, r)
    provenance: tuple[str, ...] = ()

    @classmethod
    def empty(cls, n_rows: int) -> "ReducedBasis":
        return cls(columns=np.zeros((n_rows, 0)), provenance=())

    @property
    def n_rows(self) -> int:
        return self.columns.shape[0]

    @property
    def rank(self) -> int:
        return self.columns.shape[1]

    def orthonormality_defect(self) -> float:
        if self.rank == 0:
            return 0.0
        gram = self.columns.T @ self.columns
        return float(np.max(np.abs(gram - np.eye(self.rank))))


def thin_svd(values) -> SvdTriple:
    """Economy SVD of a snapshot matrix (SnapshotMatrix or ndarray)."""
    if isinstance(values, SnapshotMatrix):
        values = values.values
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        raise ConfigurationError(f"need a 2-D matrix, got shape {values.shape}")
    try:
        u, s, vh = np.linalg.svd(values, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"SVD failed to converge on a {values.shape} matrix: {exc}"
        ) from exc
    return SvdTriple(left=u, values=s, right=vh.T)


def pod_truncate(
    svd: SvdTriple, rank: int | None = None, sigma_rtol: float | None = None
) -> ReducedBasis:
    """Keep the leading left singular vectors, by count or by sigma_i/sigma_1 cutoff."""
    if (rank is None) == (sigma_rtol is None):
        raise ConfigurationError("give exactly one of rank or sigma_rtol")
    if rank is not None:
        if rank < 0:
            raise ConfigurationError(f"rank must be >= 0, got {rank}")
        r = min(rank, svd.left.shape[1])
    else:
        r = svd.rank(rank_tol=sigma_rtol)
    return ReducedBasis(
        columns=svd.left[:, :r].copy(),
        provenance=tuple(f"pod[{i}]" for i in range(r)),
    )


def gram_schmidt_enrich(
    basis: ReducedBasis,
    candidates: np.ndarray,
    gs_tol: float = DEFAULT_GS_TOL,
    tag: str = "snap",
) -> ReducedBasis:
    """Append candidate columns that carry new information.

    Each candidate is orthogonalized against the current basis (including
    columns accepted earlier in the same call); it is accepted when the
    residual retains more than ``gs_tol`` of the original column norm.
    Rejected columns are logged, never raised.
    """
    candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
    if candidates.shape[0] != basis.n_rows and basis.rank > 0:
        raise ConfigurationError(
            f"candidate rows {candidates.shape[0]} != basis rows {basis.n_rows}"
        )
    q = basis.columns
    provenance = list(basis.provenance)
    for j in range(candidates.shape[1]):
        v = candidates[:, j]
        nv = np.linalg.norm(v)
        if nv == 0.0:
            logger.info("gram-schmidt: column %s[%d] is zero, skipped", tag, j)
            continue
        w = v - q @ (q.T @ v)
        w = w - q @ (q.T @ w)  # second pass keeps the defect near eps
        nw = np.linalg.norm(w)
        if nw / nv > gs_tol:
            q = np.column_stack([q, w / nw])
            provenance.append(f"{tag}[{j}]")
        else:
            logger.info(
                "gram-schmidt: column %s[%d] rejected (residual %.3e of norm)",
                tag, j, nw / nv,
            )
    out = ReducedBasis(columns=q, provenance=tuple(provenance))
    defect = out.orthonormality_defect()
    if defect > ORTHO_DEFECT_TOL:
        logger.warning(
            "gram-schmidt: defect %.3e above %.0e, re-orthonormalizing",
            defect, ORTHO_DEFECT_TOL,
        )
        out = _reorthonormalize(out)
        defect = out.orthonormality_defect()
        if defect > ORTHO_DEFECT_TOL:
            raise NumericalError(
                f"basis defect {defect:.3e} persists after re-orthonormalization"
            )
    return out


def _reorthonormalize(basis: ReducedBasis) -> ReducedBasis:
    cols = []
    provenance = []
    q = np.zeros((basis.n_rows, 0))
    for j in range(basis.rank):
        v = basis.columns[:, j]
        w = v - q @ (q.T @ v)
        w = w - q @ (q.T @ w)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            logger.warning("re-orthonormalization dropped column %d", j)
            continue
        q = np.column_stack([q, w / nw])
        provenance.append(basis.provenance[j])
    return ReducedBasis(columns=q, provenance=tuple(provenance))


def projection_error(snapshots: np.ndarray, basis: ReducedBasis) -> float:
    """Root-sum-square of relative projection residuals over the columns.

    Zero-norm columns carry no information and are skipped with a log note.
    """
    snapshots = np.asarray(snapshots, dtype=float)
    if snapshots.ndim != 2:
        raise ConfigurationError(f"need column snapshots, got shape {snapshots.shape}")
    norms = np.linalg.norm(snapshots, axis=0)
    keep = norms > 0.0
    if not np.all(keep):
        logger.info("projection_error: skipping %d zero column(s)", int((~keep).sum()))
    if not np.any(keep):
        return 0.0
    u = snapshots[:, keep]
    if basis.rank == 0:
        rel = np.ones(u.shape[1])
    else:
        resid = u - basis.columns @ (basis.columns.T @ u)
        rel = np.linalg.norm(resid, axis=0) / norms[keep]
    return float(np.sqrt(np.sum(rel**2)))
