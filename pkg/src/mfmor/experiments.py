"""End-to-end experiment runners behind the command line interface."""

from __future__ import annotations

import dataclasses
import logging
import time
from pathlib import Path

import numpy as np

from .config import RunConfig, config_echo
from .driver import (
    IterationRecord,
    MfReport,
    MultiFidelityDriver,
    STATUS_CONVERGED,
    STATUS_MAX_ITER,
    STATUS_STALLED,
    rank_sweep,
)
from .exceptions import ConfigurationError
from .greedy import GreedyRbmDriver
from .mesh import resolution_for_target_nodes
from .params import (
    ParameterGrid,
    grid_1d,
    load_params_csv,
    save_params_csv,
    split_train_val,
    tensor_grid,
)
from .problems import make_problem
from .reduction import pod_truncate, thin_svd
from .reporting import (
    report_payload,
    write_comparison_csv,
    write_convergence_csv,
    write_points_csv,
    write_points_overlay_csv,
    write_rank_errors_csv,
    write_report_json,
    write_selection_frequency_csv,
    write_singular_values_csv,
    write_trials_csv,
)
from .sampling import DeimState, deim_select

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_STALLED = 2
EXIT_MAX_ITER = 3
EXIT_CONFIG = 4

_STATUS_EXIT = {
    STATUS_CONVERGED: EXIT_OK,
    STATUS_STALLED: EXIT_STALLED,
    STATUS_MAX_ITER: EXIT_MAX_ITER,
}


def status_exit_code(status: str) -> int:
    return _STATUS_EXIT.get(status, EXIT_FAILED)


def build_problem(cfg: RunConfig):
    kwargs = {}
    if cfg.fine_nx is not None:
        kwargs["fine"] = (cfg.fine_nx, cfg.fine_ny)
    elif cfg.fine_nodes is not None:
        kwargs["fine"] = resolution_for_target_nodes(cfg.fine_nodes, cfg.problem)
    if cfg.coarse_nx is not None:
        kwargs["coarse"] = (cfg.coarse_nx, cfg.coarse_ny)
    elif cfg.coarse_nodes is not None:
        kwargs["coarse"] = resolution_for_target_nodes(cfg.coarse_nodes, cfg.problem)
    if cfg.problem == "heat2d":
        kwargs["block_side"] = cfg.block_side
    else:
        kwargs["permeability_low"] = cfg.permeability_low
        kwargs["inlet_flux"] = cfg.inlet_flux
        kwargs["source_value"] = cfg.source_value
    return make_problem(cfg.problem, **kwargs)


def build_grid(cfg: RunConfig, problem) -> ParameterGrid:
    if cfg.param_kind == "default":
        if cfg.problem == "heat2d":
            n_val = 50 if cfg.n_validation is None else cfg.n_validation
            return problem.default_grid(n_val=n_val, seed=cfg.params_seed)
        n_val = 500 if cfg.n_validation is None else cfg.n_validation
        kwargs = {"n": cfg.lhs_n, "n_val": n_val, "seed": cfg.params_seed}
        if cfg.lhs_scales is not None:
            kwargs["scales"] = cfg.lhs_scales
        return problem.default_grid(**kwargs)
    if cfg.param_kind == "tensor":
        if len(cfg.axes) != problem.dim:
            raise ConfigurationError(
                f"tensor parameters need {problem.dim} axes, got {len(cfg.axes)}"
            )
        axes = [grid_1d(a.kind, a.lo, a.hi, a.n) for a in cfg.axes]
        grid = tensor_grid(axes, generators=[a.kind for a in cfg.axes])
        return split_train_val(grid, cfg.n_validation or 0, cfg.params_seed)
    if cfg.param_kind == "lhs":
        from .params import lhs

        grid = lhs(
            problem.dim,
            cfg.lhs_n,
            problem.default_box,
            seed=cfg.params_seed,
            scales=cfg.lhs_scales,
        )
        return split_train_val(grid, cfg.n_validation or 0, cfg.params_seed)
    grid = load_params_csv(cfg.params_file)
    if grid.dim != problem.dim:
        raise ConfigurationError(
            f"parameter file has {grid.dim} columns, problem needs {problem.dim}"
        )
    return grid


def _load_validation_cache(path: Path, problem, val_points: np.ndarray):
    data = np.load(path, allow_pickle=False)
    if str(data["problem"]) != problem.name:
        raise ConfigurationError(
            f"validation cache {path} was built for problem {data['problem']!s}, "
            f"not {problem.name}"
        )
    pts = data["points"]
    if pts.shape != val_points.shape or not np.allclose(pts, val_points):
        raise ConfigurationError(
            f"validation cache {path} does not match the configured validation set; "
            "regenerate it with the precompute-validation command"
        )
    snaps = data["snapshots"]
    if snaps.shape[0] != problem.fine_model.n_dofs:
        raise ConfigurationError(
            f"validation cache {path} was built for a different mesh "
            f"({snaps.shape[0]} dofs vs {problem.fine_model.n_dofs})"
        )
    return snaps


def _save_validation_cache(path: Path, problem, val_points, snapshots) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    np.savez_compressed(
        path,
        problem=np.str_(problem.name),
        points=np.asarray(val_points, dtype=float),
        snapshots=np.asarray(snapshots, dtype=float),
    )


def precompute_validation(cfg: RunConfig, out_path) -> int:
    """Solve the fine model on the validation set and cache the snapshots."""
    problem = build_problem(cfg)
    grid = build_grid(cfg, problem)
    val = grid.val_points
    if len(val) == 0:
        raise ConfigurationError(
            "configuration defines no validation points; set [parameters] n_validation"
        )
    logger.info("precomputing %d validation snapshots", len(val))
    snaps = np.column_stack([problem.fine_model.solve(mu) for mu in val])
    _save_validation_cache(Path(out_path), problem, val, snaps)
    logger.info("wrote %s", out_path)
    return EXIT_OK


def _run_pod_reference(cfg: RunConfig, problem, grid) -> MfReport:
    """Full-training POD compressed to the tol energy level, plus greedy
    interpolation points over the parametric modes (offline-expensive
    reference; used by compare)."""
    x = grid.train_points
    model = problem.fine_model
    logger.info("pod reference: solving the fine model at %d points", len(x))
    t0 = time.perf_counter()
    snapshots = np.column_stack([model.solve(mu) for mu in x])
    svd = thin_svd(snapshots)
    energy = np.cumsum(svd.values**2)
    total = energy[-1]
    if total == 0.0:
        raise ConfigurationError("all training snapshots are zero")
    tail = np.sqrt(np.maximum(1.0 - energy / total, 0.0))
    below = np.flatnonzero(tail <= cfg.tol)
    cap = svd.rank()
    if len(below) == 0 or below[0] + 1 > cap:
        rank = cap
        status, detail = STATUS_MAX_ITER, (
            f"energy tail never reached tol={cfg.tol:g}; kept full rank {cap}"
        )
    else:
        rank = int(below[0]) + 1
        status, detail = STATUS_CONVERGED, (
            f"energy tail {tail[rank - 1]:.3e} <= tol at rank {rank}"
        )
    basis = pod_truncate(svd, rank=rank)

    deim = DeimState(len(x))
    selected = deim_select(svd.right[:, :rank], rank, deim)

    sweep = rank_sweep(model, basis, x, snapshots, ranks=range(1, rank + 1))
    seconds = time.perf_counter() - t0
    records = []
    for row in sweep:
        r = row["rank"]
        records.append(
            IterationRecord(
                iteration=r,
                n_points=r,
                eps_train=row["eps_rom"],
                eps_val=row["eps_pod"],
                seconds=seconds / rank,
                new_indices=[selected[r - 1]] if r <= len(selected) else [],
                basis_rank=r,
                n_fresh_modes=0,
                singular_values=svd.values.copy() if r == 1 else np.zeros(0),
            )
        )
    report = MfReport(
        status=status,
        detail=detail,
        records=records,
        init_indices=[],
        basis=basis,
        coefficients=basis.columns.T @ snapshots,
        n_train=len(x),
        init_seconds=0.0,
        total_seconds=seconds,
    )
    report.notes["method"] = "pod"
    report.notes["rank_errors"] = sweep
    report.notes["convergence_columns"] = (
        "eps_train holds eps_rom(rank), eps_val holds eps_pod(rank)"
    )
    return report


def run_experiment(cfg: RunConfig, out_dir=None, validation_cache=None):
    """Run one configuration and write its artifact files.

    Returns (exit_code, report, out_dir).
    """
    cfg.validate()
    out = Path(out_dir if out_dir is not None else cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    problem = build_problem(cfg)
    grid = build_grid(cfg, problem)
    train = grid.train_points
    val = grid.val_points if len(grid.val_points) > 0 else None

    val_snaps = None
    if val is not None and validation_cache is not None:
        cache = Path(validation_cache)
        if cache.exists():
            val_snaps = _load_validation_cache(cache, problem, val)
            logger.info("loaded validation snapshots from %s", cache)
        else:
            logger.info("validation cache %s missing; computing and saving", cache)
            val_snaps = np.column_stack([problem.fine_model.solve(mu) for mu in val])
            _save_validation_cache(cache, problem, val, val_snaps)

    if cfg.method == "mf":
        driver = MultiFidelityDriver(
            problem.fine_model,
            problem.coarse_model if cfg.sketch == "coarse" else None,
            sketch=cfg.sketch,
            sketch_size=cfg.sketch_size,
            points_per_iter=cfg.points_per_iter,
            tol=cfg.tol,
            max_iter=cfg.max_iter,
            seed=cfg.seed,
            require_val_convergence=cfg.require_val_convergence,
        )
        report = driver.run(train, val_points=val, val_snapshots=val_snaps)
        report.notes["method"] = "mf"
    elif cfg.method == "greedy":
        driver = GreedyRbmDriver(
            problem.fine_model,
            mu_bar=cfg.mu_bar,
            tol=cfg.tol,
            max_iter=cfg.max_iter,
        )
        report = driver.run(train, val_points=val, val_snapshots=val_snaps)
        report.notes["convergence_columns"] = (
            "eps_train holds the max error bound over the training set"
        )
    else:
        report = _run_pod_reference(cfg, problem, grid)

    if cfg.diagnostics and cfg.method in ("mf", "greedy") and report.basis.rank > 0:
        logger.info("diagnostics: solving the fine model on the full training set")
        snapshots = np.column_stack([problem.fine_model.solve(mu) for mu in train])
        sweep = rank_sweep(
            problem.fine_model, report.basis, train, snapshots,
            ranks=range(1, report.basis.rank + 1),
        )
        report.notes["rank_errors"] = sweep
        write_rank_errors_csv(sweep, out / "rank_errors.csv")

    report.notes.setdefault("problem", problem.name)
    report.notes["n_train"] = len(train)
    report.notes["n_validation"] = 0 if val is None else len(val)
    report.notes["fine_n_dofs"] = problem.fine_model.n_dofs

    write_convergence_csv(report.records, out / "convergence.csv", timing=cfg.timing)
    write_points_csv(report.selected_pairs, train, out / "points.csv")
    if cfg.method == "mf":
        write_singular_values_csv(report.records, out / "singular_values.csv")
    if cfg.method == "pod" and "rank_errors" in report.notes:
        write_rank_errors_csv(report.notes["rank_errors"], out / "rank_errors.csv")
    save_params_csv(grid, out / "params.csv")
    write_report_json(
        report_payload(report, config_echo(cfg), timing=cfg.timing),
        out / "report.json",
    )
    return status_exit_code(report.status), report, out


def run_compare(cfg_a: RunConfig, cfg_b: RunConfig, out_dir) -> int:
    """Run two configurations and merge their per-rank error tables."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for label, cfg in (("a", cfg_a), ("b", cfg_b)):
        if cfg.method in ("mf", "greedy") and not cfg.diagnostics:
            raise ConfigurationError(
                f"compare needs diagnostics = true in config {label} "
                "(per-rank errors are produced by the diagnostics pass)"
            )
    code_a, report_a, _ = run_experiment(cfg_a, out / "a")
    code_b, report_b, _ = run_experiment(cfg_b, out / "b")

    write_comparison_csv(
        report_a.notes.get("rank_errors", []),
        report_b.notes.get("rank_errors", []),
        out / "comparison.csv",
    )
    entries = []
    grids = {}
    for label, cfg, report in (("a", cfg_a, report_a), ("b", cfg_b, report_b)):
        problem = build_problem(cfg)
        grid = grids.get(cfg.problem)
        if grid is None:
            grid = build_grid(cfg, problem)
        for it, j in report.selected_pairs:
            entries.append((label, it, j, grid.train_points[j]))
    write_points_overlay_csv(entries, out / "points_overlay.csv")
    summary = {
        "a": {"method": cfg_a.method, "status": report_a.status,
              "n_points": report_a.n_points, "basis_rank": report_a.basis.rank},
        "b": {"method": cfg_b.method, "status": report_b.status,
              "n_points": report_b.n_points, "basis_rank": report_b.basis.rank},
    }
    write_report_json(summary, out / "compare.json")
    return max(code_a, code_b)


def run_trials(cfg: RunConfig, n_trials: int, out_dir) -> int:
    """Repeat a random-sketch run over consecutive seeds and aggregate."""
    if n_trials < 2:
        raise ConfigurationError(f"trials need n_trials >= 2, got {n_trials}")
    if cfg.method != "mf" or cfg.sketch != "random":
        raise ConfigurationError(
            "trials require method = mf with sketch = random "
            "(other modes are deterministic, so trials would be identical)"
        )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reports = []
    codes = []
    for t in range(n_trials):
        cfg_t = dataclasses.replace(cfg, seed=cfg.seed + t)
        code, report, _ = run_experiment(cfg_t, out / f"trial-{t:02d}")
        reports.append(report)
        codes.append(code)
        logger.info(
            "trial %d (seed %d): %s after %d iterations, %d points",
            t, cfg_t.seed, report.status, report.n_iterations, report.n_points,
        )

    problem = build_problem(cfg)
    grid = build_grid(cfg, problem)
    write_trials_csv([r.records for r in reports], out / "trials.csv")
    write_selection_frequency_csv(
        reports, grid.train_points, out / "selection_frequency.csv"
    )
    summary = {
        "n_trials": n_trials,
        "base_seed": cfg.seed,
        "statuses": [r.status for r in reports],
        "n_iterations": [r.n_iterations for r in reports],
        "n_points": [r.n_points for r in reports],
    }
    write_report_json(summary, out / "trials.json")
    return max(codes)


def gen_params(cfg: RunConfig, out_path) -> int:
    problem = build_problem(cfg)
    grid = build_grid(cfg, problem)
    save_params_csv(grid, out_path)
    logger.info(
        "wrote %d points (%d train / %d val) to %s",
        grid.n_points, len(grid.train_indices), len(grid.val_indices), out_path,
    )
    return EXIT_OK
