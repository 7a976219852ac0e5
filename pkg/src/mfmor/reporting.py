"""CSV and JSON writers for run artifacts.

Floats are written with repr (shortest round-trip form), so files are
byte-reproducible across runs whenever the numbers are; wall-clock columns
are zeroed when timing is disabled to keep full files comparable.
"""

from __future__ import annotations

import csv
import json
import logging
from dataclasses import is_dataclass, asdict
from pathlib import Path

import numpy as np

logger = logging.getLogger(__name__)

CONVERGENCE_HEADER = ["iteration", "n_points", "eps_train", "eps_val", "seconds"]


def _fmt(x) -> str:
    x = float(x)
    if np.isnan(x):
        return "nan"
    return repr(x)


def write_convergence_csv(records, path, timing: bool = True) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CONVERGENCE_HEADER)
        for rec in records:
            seconds = rec.seconds if timing else 0.0
            writer.writerow(
                [
                    rec.iteration,
                    rec.n_points,
                    _fmt(rec.eps_train),
                    _fmt(rec.eps_val),
                    _fmt(round(seconds, 6)),
                ]
            )


def write_points_csv(pairs, points: np.ndarray, path) -> None:
    """Rows (iteration, train_index, mu_1..mu_d); iteration 0 is the sketch."""
    points = np.asarray(points, dtype=float)
    dim = points.shape[1]
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["iteration", "train_index"] + [f"mu_{k + 1}" for k in range(dim)]
        )
        for iteration, j in pairs:
            writer.writerow(
                [iteration, j] + [_fmt(v) for v in points[j]]
            )


def write_singular_values_csv(records, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "index", "sigma"])
        for rec in records:
            for i, s in enumerate(rec.singular_values):
                writer.writerow([rec.iteration, i, _fmt(s)])


def write_rank_errors_csv(rows, path) -> None:
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["rank", "eps_pod", "eps_rom"])
        for row in rows:
            writer.writerow([row["rank"], _fmt(row["eps_pod"]), _fmt(row["eps_rom"])])


def write_comparison_csv(rows_a, rows_b, path) -> None:
    """Merge two rank-error tables on rank; missing entries stay blank."""
    by_rank_a = {r["rank"]: r for r in rows_a}
    by_rank_b = {r["rank"]: r for r in rows_b}
    ranks = sorted(set(by_rank_a) | set(by_rank_b))
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["rank", "eps_pod_a", "eps_rom_a", "eps_pod_b", "eps_rom_b"]
        )
        for r in ranks:
            a = by_rank_a.get(r)
            b = by_rank_b.get(r)
            writer.writerow(
                [
                    r,
                    _fmt(a["eps_pod"]) if a else "",
                    _fmt(a["eps_rom"]) if a else "",
                    _fmt(b["eps_pod"]) if b else "",
                    _fmt(b["eps_rom"]) if b else "",
                ]
            )


def write_points_overlay_csv(entries, path) -> None:
    """entries: (source_label, iteration, train_index, mu_vector)."""
    path = Path(path)
    dim = len(entries[0][3]) if entries else 0
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["source", "iteration", "train_index"]
            + [f"mu_{k + 1}" for k in range(dim)]
        )
        for source, iteration, j, mu in entries:
            writer.writerow([source, iteration, j] + [_fmt(v) for v in mu])


def write_trials_csv(trial_records, path) -> None:
    """Per-iteration mean/std of the error series across trials.

    ``trial_records`` is a list (one entry per trial) of record lists.
    Uses sample standard deviation (ddof=1) when more than one trial is
    active at an iteration.
    """
    max_iter = max((len(recs) for recs in trial_records), default=0)
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "iteration", "n_trials",
                "mean_eps_train", "std_eps_train",
                "mean_eps_val", "std_eps_val",
            ]
        )
        for i in range(max_iter):
            train = [recs[i].eps_train for recs in trial_records if len(recs) > i]
            val = [recs[i].eps_val for recs in trial_records if len(recs) > i]
            val = [v for v in val if not np.isnan(v)]
            n = len(train)
            std_train = float(np.std(train, ddof=1)) if n > 1 else 0.0
            if val:
                mean_val = float(np.mean(val))
                std_val = float(np.std(val, ddof=1)) if len(val) > 1 else 0.0
            else:
                mean_val, std_val = np.nan, np.nan
            writer.writerow(
                [
                    i + 1, n,
                    _fmt(np.mean(train)), _fmt(std_train),
                    _fmt(mean_val), _fmt(std_val),
                ]
            )


def write_selection_frequency_csv(reports, points: np.ndarray, path) -> None:
    """How often each training point was sampled across trials, split by phase."""
    counts: dict[int, list[int]] = {}
    for report in reports:
        for j in report.init_indices:
            counts.setdefault(j, [0, 0])[0] += 1
        for rec in report.records:
            for j in rec.new_indices:
                counts.setdefault(j, [0, 0])[1] += 1
    points = np.asarray(points, dtype=float)
    dim = points.shape[1]
    order = sorted(counts, key=lambda j: (-(counts[j][0] + counts[j][1]), j))
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["train_index"] + [f"mu_{k + 1}" for k in range(dim)]
            + ["n_sketch", "n_selected", "total"]
        )
        for j in order:
            n_init, n_deim = counts[j]
            writer.writerow(
                [j] + [_fmt(v) for v in points[j]]
                + [n_init, n_deim, n_init + n_deim]
            )


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if is_dataclass(obj) and not isinstance(obj, type):
        return _jsonable(asdict(obj))
    if isinstance(obj, float) and np.isnan(obj):
        return None
    return obj


def report_payload(report, config_echo: dict | None = None, timing: bool = True) -> dict:
    def sec(x):
        return round(float(x), 6) if timing else 0.0

    payload = {
        "status": report.status,
        "detail": report.detail,
        "n_iterations": report.n_iterations,
        "n_points": report.n_points,
        "eps_train": report.eps_train,
        "eps_val": report.eps_val,
        "basis_rank": report.basis.rank,
        "basis_provenance": list(report.basis.provenance),
        "init_indices": list(report.init_indices),
        "selected": [
            {"iteration": it, "train_index": j} for it, j in report.selected_pairs
        ],
        "records": [
            {
                "iteration": rec.iteration,
                "n_points": rec.n_points,
                "eps_train": rec.eps_train,
                "eps_val": rec.eps_val,
                "seconds": sec(rec.seconds),
                "new_indices": list(rec.new_indices),
                "basis_rank": rec.basis_rank,
                "n_fresh_modes": rec.n_fresh_modes,
            }
            for rec in report.records
        ],
        "init_seconds": sec(report.init_seconds),
        "total_seconds": sec(report.total_seconds),
        "notes": dict(report.notes),
    }
    if config_echo is not None:
        payload["config"] = config_echo
    return _jsonable(payload)


def write_report_json(payload: dict, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
