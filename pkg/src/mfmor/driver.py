"""Iterative multi-fidelity snapshot selection.

One outer iteration:

1. thin SVD of the current low-fidelity matrix; the right singular vectors
   are *parametric modes* (one row per training point, so they are mesh-free);
2. modes are orthogonalized against the history of modes already consumed,
   keeping only new parametric information;
3. greedy interpolation-point selection picks p new training points;
4. the high-fidelity model is solved there; the relative mismatch between
   those solves and the current ROM prediction is the training error;
5. the reduced basis is enriched (tolerance-gated Gram-Schmidt);
6. the ROM is solved at every training point and its coefficient matrix
   becomes the next low-fidelity model.

The loop stops when the training error (optionally also the validation
error) drops below tol, when no new parametric information appears
(stalled), or at max_iter.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigurationError
from .reduction import (
    DEFAULT_GS_TOL,
    DEFAULT_RANK_TOL,
    ReducedBasis,
    gram_schmidt_enrich,
    projection_error,
    thin_svd,
)
from .sampling import DeimState, deim_select, orthogonalize_against_history

logger = logging.getLogger(__name__)

STATUS_CONVERGED = "converged"
STATUS_STALLED = "stalled"
STATUS_MAX_ITER = "max_iter"

SKETCH_KINDS = ("random", "coarse")


@dataclass
class LofiModel:
    """Low-fidelity snapshot matrix, one column per training point."""

    values: np.ndarray        # (n_lofi, n_train)
    kind: str                 # "coarse" solves or ROM "coefficient"s
    basis_rank: int | None = None


@dataclass
class IterationRecord:
    iteration: int
    n_points: int             # cumulative sampled training points
    eps_train: float
    eps_val: float            # nan when validation is not tracked
    seconds: float
    new_indices: list[int]
    basis_rank: int
    n_fresh_modes: int
    singular_values: np.ndarray


@dataclass
class MfReport:
    status: str
    detail: str
    records: list[IterationRecord]
    init_indices: list[int]
    basis: ReducedBasis
    coefficients: np.ndarray  # final (r, n_train)
    n_train: int
    init_seconds: float
    total_seconds: float
    notes: dict = field(default_factory=dict)

    @property
    def n_iterations(self) -> int:
        return len(self.records)

    @property
    def eps_train(self) -> float:
        return self.records[-1].eps_train if self.records else np.nan

    @property
    def eps_val(self) -> float:
        return self.records[-1].eps_val if self.records else np.nan

    @property
    def selected_pairs(self) -> list[tuple[int, int]]:
        """(iteration, train_index) in selection order; iteration 0 = sketch."""
        pairs = [(0, j) for j in self.init_indices]
        for rec in self.records:
            pairs.extend((rec.iteration, j) for j in rec.new_indices)
        return pairs

    @property
    def n_points(self) -> int:
        return len(self.selected_pairs)


def relative_error(truth: np.ndarray, approx: np.ndarray) -> float:
    """Relative nodal 2-norm mismatch; nan when the truth vector is zero."""
    nt = np.linalg.norm(truth)
    if nt == 0.0:
        return np.nan
    return float(np.linalg.norm(truth - approx) / nt)


class MultiFidelityDriver:
    """Runs the multi-fidelity loop for one problem instance."""

    def __init__(
        self,
        fine_model,
        coarse_model=None,
        *,
        sketch: str = "random",
        sketch_size: int = 2,
        points_per_iter: int = 1,
        tol: float = 1e-6,
        max_iter: int = 200,
        seed: int = 0,
        gs_tol: float = DEFAULT_GS_TOL,
        rank_tol: float = DEFAULT_RANK_TOL,
        require_val_convergence: bool = False,
        deim_variant: str = "selected-rows",
    ):
        if sketch not in SKETCH_KINDS:
            raise ConfigurationError(
                f"sketch={sketch!r} must be one of {SKETCH_KINDS}"
            )
        if sketch == "coarse" and coarse_model is None:
            raise ConfigurationError("sketch='coarse' needs a coarse model")
        if sketch == "random" and sketch_size < 1:
            raise ConfigurationError(f"sketch_size must be >= 1, got {sketch_size}")
        if points_per_iter < 1:
            raise ConfigurationError(
                f"points_per_iter must be >= 1, got {points_per_iter}"
            )
        if not tol > 0.0:
            raise ConfigurationError(f"tol must be positive, got {tol}")
        if max_iter < 1:
            raise ConfigurationError(f"max_iter must be >= 1, got {max_iter}")
        self.fine_model = fine_model
        self.coarse_model = coarse_model
        self.sketch = sketch
        self.sketch_size = int(sketch_size)
        self.points_per_iter = int(points_per_iter)
        self.tol = float(tol)
        self.max_iter = int(max_iter)
        self.seed = int(seed)
        self.gs_tol = float(gs_tol)
        self.rank_tol = float(rank_tol)
        self.require_val_convergence = bool(require_val_convergence)
        self.deim_variant = deim_variant

    # ---------------------------------------------------------------- init

    def _init_random(self, x, deim, snapshots):
        """Draw sketch_size training points without replacement; redraw past
        linearly dependent snapshots so the initial basis has full rank."""
        rng = np.random.default_rng(self.seed)
        n_train = len(x)
        if self.sketch_size >= n_train:
            raise ConfigurationError(
                f"sketch_size={self.sketch_size} must be < n_train={n_train}"
            )
        basis = ReducedBasis.empty(self.fine_model.n_dofs)
        drawn: list[int] = []
        while basis.rank < self.sketch_size:
            remaining = np.setdiff1d(np.arange(n_train), drawn)
            if len(remaining) == 0:
                raise ConfigurationError(
                    "training set exhausted before finding "
                    f"{self.sketch_size} independent snapshots"
                )
            need = self.sketch_size - basis.rank
            picks = rng.choice(remaining, size=min(need, len(remaining)), replace=False)
            for j in np.sort(picks):
                j = int(j)
                u = self.fine_model.solve(x[j])
                snapshots[j] = u
                drawn.append(j)
                enriched = gram_schmidt_enrich(
                    basis, u[:, None], gs_tol=self.gs_tol, tag="init"
                )
                if enriched.rank == basis.rank:
                    logger.info(
                        "sketch: train point %d gave a dependent snapshot, redrawing", j
                    )
                basis = enriched
        deim.mark_selected(drawn)
        return basis, drawn

    def _init_coarse(self, x) -> LofiModel:
        cols = [self.coarse_model.solve(mu) for mu in x]
        values = np.column_stack(cols)
        return LofiModel(values=values, kind="coarse", basis_rank=None)

    # ---------------------------------------------------------------- pieces

    def _coeff_matrix(self, rom, x) -> np.ndarray:
        return np.column_stack([rom.solve_coeffs(mu) for mu in x])

    def _val_error(self, rom, basis, val_x, val_u) -> float:
        worst = 0.0
        any_valid = False
        for k in range(len(val_x)):
            truth = val_u[:, k]
            if np.linalg.norm(truth) == 0.0:
                logger.info("validation point %d has a zero solution, skipped", k)
                continue
            approx = basis.columns @ rom.solve_coeffs(val_x[k])
            worst = max(worst, relative_error(truth, approx))
            any_valid = True
        return worst if any_valid else np.nan

    # ------------------------------------------------------------------ run

    def run(self, train_points, val_points=None, val_snapshots=None) -> MfReport:
        t_start = time.perf_counter()
        x = np.asarray(train_points, dtype=float)
        if x.ndim != 2 or len(x) < 2:
            raise ConfigurationError(
                f"train_points must be (n >= 2, d), got shape {x.shape}"
            )
        val_x = None
        val_u = None
        if val_points is not None:
            val_x = np.asarray(val_points, dtype=float)
            if val_snapshots is not None:
                val_u = np.asarray(val_snapshots, dtype=float)
                if val_u.shape != (self.fine_model.n_dofs, len(val_x)):
                    raise ConfigurationError(
                        "val_snapshots must be (n_dofs, n_val) matching val_points; "
                        f"got {val_u.shape}"
                    )
            else:
                logger.info("precomputing %d validation snapshots", len(val_x))
                val_u = np.column_stack([self.fine_model.solve(mu) for mu in val_x])
        if self.require_val_convergence and val_x is None:
            raise ConfigurationError(
                "require_val_convergence needs validation points"
            )

        deim = DeimState(len(x))
        snapshots: dict[int, np.ndarray] = {}

        if self.sketch == "random":
            basis, init_indices = self._init_random(x, deim, snapshots)
            rom = self.fine_model.rom(basis)
            lofi = LofiModel(
                values=self._coeff_matrix(rom, x),
                kind="coefficient",
                basis_rank=basis.rank,
            )
        else:
            basis = ReducedBasis.empty(self.fine_model.n_dofs)
            rom = None
            init_indices = []
            lofi = self._init_coarse(x)
        init_seconds = time.perf_counter() - t_start

        records: list[IterationRecord] = []
        status, detail = STATUS_MAX_ITER, f"max_iter={self.max_iter} reached"

        for it in range(1, self.max_iter + 1):
            t0 = time.perf_counter()

            svd = thin_svd(lofi.values)
            r2 = svd.rank(rank_tol=self.rank_tol)
            if r2 == 0:
                status, detail = STATUS_STALLED, "low-fidelity matrix is numerically zero"
                break
            modes = svd.right[:, :r2]

            # Working set: walk the modes in decreasing singular-value order
            # and keep the first `points_per_iter` directions that survive
            # orthogonalization against the selection history.  Only these
            # enter the history; trailing modes stay available for later
            # iterations instead of blinding them.
            fresh_cols: list[np.ndarray] = []
            for k in range(modes.shape[1]):
                if len(fresh_cols) == self.points_per_iter:
                    break
                kept = orthogonalize_against_history(
                    modes[:, k : k + 1], deim, rank_tol=self.rank_tol
                )
                if kept.shape[1]:
                    fresh_cols.append(kept[:, 0])
            if not fresh_cols:
                status, detail = (
                    STATUS_STALLED,
                    "low-fidelity modes carry no new parametric information",
                )
                break
            fresh = np.column_stack(fresh_cols)

            p_eff = min(self.points_per_iter, fresh.shape[1])
            if p_eff < self.points_per_iter:
                logger.info(
                    "iteration %d: only %d fresh mode(s) for %d requested points",
                    it, fresh.shape[1], self.points_per_iter,
                )
            new_idx = deim_select(fresh, p_eff, deim, variant=self.deim_variant)
            if not new_idx:
                status, detail = (
                    STATUS_STALLED,
                    "interpolation selection found no unselected training point",
                )
                break

            # Training error: the new truth solves against the *current* ROM,
            # before they are folded into the basis.
            errs = []
            new_snaps = []
            for j in new_idx:
                truth = self.fine_model.solve(x[j])
                snapshots[j] = truth
                new_snaps.append(truth)
                if np.linalg.norm(truth) == 0.0:
                    logger.info("train point %d has a zero solution, not scored", j)
                    continue
                if rom is None or basis.rank == 0:
                    pred = np.zeros_like(truth)
                elif lofi.kind == "coefficient":
                    pred = basis.columns @ lofi.values[:, j]
                else:
                    pred = basis.columns @ rom.solve_coeffs(x[j])
                errs.append(relative_error(truth, pred))
            eps_train = max(errs) if errs else np.nan

            basis = gram_schmidt_enrich(
                basis,
                np.column_stack(new_snaps),
                gs_tol=self.gs_tol,
                tag=f"iter{it}",
            )
            rom = self.fine_model.rom(basis)
            coeffs = self._coeff_matrix(rom, x)
            lofi = LofiModel(values=coeffs, kind="coefficient", basis_rank=basis.rank)

            eps_val = np.nan
            if val_x is not None:
                eps_val = self._val_error(rom, basis, val_x, val_u)

            deim.iteration = it
            records.append(
                IterationRecord(
                    iteration=it,
                    n_points=deim.n_selected,
                    eps_train=float(eps_train),
                    eps_val=float(eps_val),
                    seconds=time.perf_counter() - t0,
                    new_indices=list(new_idx),
                    basis_rank=basis.rank,
                    n_fresh_modes=fresh.shape[1],
                    singular_values=svd.values.copy(),
                )
            )
            logger.info(
                "iteration %d: points=%d rank=%d eps_train=%.3e eps_val=%.3e",
                it, deim.n_selected, basis.rank, eps_train,
                eps_val if eps_val == eps_val else float("nan"),
            )

            ok_train = eps_train < self.tol
            ok_val = (not self.require_val_convergence) or (eps_val < self.tol)
            if ok_train and ok_val:
                status, detail = STATUS_CONVERGED, f"eps_train={eps_train:.3e} < tol"
                break

        if rom is None:
            coeffs = np.zeros((0, len(x)))
        else:
            coeffs = lofi.values if lofi.kind == "coefficient" else np.zeros((0, len(x)))
        return MfReport(
            status=status,
            detail=detail,
            records=records,
            init_indices=list(init_indices),
            basis=basis,
            coefficients=coeffs,
            n_train=len(x),
            init_seconds=init_seconds,
            total_seconds=time.perf_counter() - t_start,
        )


# ------------------------------------------------------------------ diagnostics


def rank_sweep(model, basis, points, snapshots, ranks=None) -> list[dict]:
    """Projection vs ROM error (root-sum-square of relative errors) per rank.

    ``snapshots`` holds full-order solutions column-wise for ``points``.
    Uses the orthogonal split |u - Phi_r c_r|^2 = |u - Pi_r u|^2 +
    |Phi_r^T u - c_r|^2, so each parameter point costs one reduced-operator
    assembly plus one small solve per rank.
    """
    phi = basis.columns if isinstance(basis, ReducedBasis) else np.asarray(basis)
    u = np.asarray(snapshots, dtype=float)
    x = np.asarray(points, dtype=float)
    if u.shape[1] != len(x):
        raise ConfigurationError(
            f"snapshot columns {u.shape[1]} != parameter count {len(x)}"
        )
    r_max = phi.shape[1]
    if ranks is None:
        ranks = list(range(1, r_max + 1))
    ranks = sorted(set(int(r) for r in ranks))
    if not ranks or ranks[0] < 1 or ranks[-1] > r_max:
        raise ConfigurationError(f"ranks must lie in 1..{r_max}, got {ranks}")

    norms = np.linalg.norm(u, axis=0)
    keep = norms > 0.0
    if not np.all(keep):
        logger.info("rank_sweep: skipping %d zero snapshot column(s)", int((~keep).sum()))
    uk = u[:, keep]
    nk = norms[keep]
    xk = x[keep]

    c_full = phi.T @ uk                        # (R, n)
    # Squared projection residual after r terms, per column.  Computed as the
    # residual outside the whole basis plus the coefficient energy beyond rank
    # r -- an exact orthogonal split.  (The alternative |u|^2 - cumsum(c^2)
    # cancels catastrophically once residuals drop below sqrt(eps)*|u|.)
    resid_sq = np.sum((uk - phi @ c_full) ** 2, axis=0)
    energy_from = np.cumsum(c_full[::-1] ** 2, axis=0)[::-1]   # sum_{i>=r} c_i^2
    beyond = np.zeros((r_max, uk.shape[1]))
    if r_max > 1:
        beyond[:-1] = energy_from[1:]
    tail = resid_sq[None, :] + beyond

    rom = model.rom(basis)
    rom_sq = {r: 0.0 for r in ranks}
    for j in range(uk.shape[1]):
        ar, fr = rom.reduced_operator(xk[j])
        for r in ranks:
            cr = np.linalg.solve(ar[:r, :r], fr[:r])
            err_sq = tail[r - 1, j] + np.sum((c_full[:r, j] - cr) ** 2)
            rom_sq[r] += err_sq / nk[j] ** 2

    rows = []
    for r in ranks:
        eps_pod = float(np.sqrt(np.sum(tail[r - 1] / nk**2)))
        rows.append(
            {"rank": r, "eps_pod": eps_pod, "eps_rom": float(np.sqrt(rom_sq[r]))}
        )
    return rows


def error_pod_global(snapshots, basis) -> float:
    """Root-sum-square relative projection error of the basis on snapshots."""
    return projection_error(np.asarray(snapshots, dtype=float), basis)


def error_rom_global(model, basis, points, snapshots) -> float:
    phi = basis.columns if isinstance(basis, ReducedBasis) else np.asarray(basis)
    rows = rank_sweep(model, basis, points, snapshots, ranks=[phi.shape[1]])
    return rows[-1]["eps_rom"]


def error_train(model, basis, points, snapshots) -> float:
    """Max relative nodal error of reduced solutions against stored truths.

    Evaluated over the sampled training points this is a consistency check:
    a Galerkin reduced model reproduces every snapshot contained in its own
    basis, so the result should sit at solver-noise level.
    """
    phi = basis.columns if isinstance(basis, ReducedBasis) else np.asarray(basis)
    u = np.asarray(snapshots, dtype=float)
    x = np.asarray(points, dtype=float)
    if u.shape[1] != len(x):
        raise ConfigurationError(
            f"snapshot columns {u.shape[1]} != parameter count {len(x)}"
        )
    rom = model.rom(basis)
    worst = 0.0
    any_valid = False
    for j in range(len(x)):
        truth = u[:, j]
        if np.linalg.norm(truth) == 0.0:
            logger.info("point %d has a zero solution, not scored", j)
            continue
        approx = phi @ rom.solve_coeffs(x[j])
        worst = max(worst, relative_error(truth, approx))
        any_valid = True
    return worst if any_valid else np.nan


def error_val(model, basis, points, snapshots) -> float:
    """Max relative nodal error over a held-out validation set."""
    return error_train(model, basis, points, snapshots)
