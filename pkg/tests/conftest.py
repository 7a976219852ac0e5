"""Shared fixtures.

The expensive objects (benchmark problems, full snapshot matrices, the
reference sampling runs) are session-scoped so the acceptance tests and the
diagnostics tests share one computation.  Everything is seeded; re-running
the suite reproduces the exact same numbers.
"""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mfmor import (
    AdvectionDiffusion,
    GreedyRbmDriver,
    HeatConduction,
    MultiFidelityDriver,
)

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=30,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


# --------------------------------------------------------------------- heat2d

HEAT_TOL = 1e-6
HEAT_SEED = 2  # reference seed for the single-run acceptance checks


@pytest.fixture(scope="session")
def heat_problem():
    return HeatConduction()  # fine (28, 28) -> 841 nodes, coarse (8, 8)


@pytest.fixture(scope="session")
def heat_grid(heat_problem):
    """2050-point tensor grid (50 log x 41 uniform), 2000 train / 50 val."""
    return heat_problem.default_grid(seed=0)


@pytest.fixture(scope="session")
def heat_train_snapshots(heat_problem, heat_grid):
    """Full-order solutions at every training point, one column per point."""
    model = heat_problem.fine_model
    return np.column_stack([model.solve(mu) for mu in heat_grid.train_points])


@pytest.fixture(scope="session")
def heat_val_snapshots(heat_problem, heat_grid):
    model = heat_problem.fine_model
    return np.column_stack([model.solve(mu) for mu in heat_grid.val_points])


@pytest.fixture(scope="session")
def heat_run(heat_problem, heat_grid):
    """Reference random-sketch run (K=2, p=1) on the 2000-point training set."""
    driver = MultiFidelityDriver(
        heat_problem.fine_model,
        sketch="random",
        sketch_size=2,
        points_per_iter=1,
        tol=HEAT_TOL,
        seed=HEAT_SEED,
    )
    return driver.run(heat_grid.train_points)


@pytest.fixture(scope="session")
def heat_coarse_run(heat_problem, heat_grid):
    """Coarse-sketch run on the same training set (deterministic, no rng)."""
    driver = MultiFidelityDriver(
        heat_problem.fine_model,
        heat_problem.coarse_model,
        sketch="coarse",
        points_per_iter=1,
        tol=HEAT_TOL,
    )
    return driver.run(heat_grid.train_points)


@pytest.fixture(scope="session")
def heat_greedy(heat_problem, heat_grid):
    """Greedy reduced-basis baseline; returns (driver, report)."""
    driver = GreedyRbmDriver(
        heat_problem.fine_model, mu_bar=(1.0, 1.0), tol=HEAT_TOL, max_iter=50
    )
    report = driver.run(heat_grid.train_points)
    return driver, report


@pytest.fixture(scope="session")
def heat_trials(heat_problem, heat_grid):
    """Ten seeded random-sketch runs probing selection stability.

    The tolerance is unreachable and the iteration budget fixed, so every
    trial makes exactly seven greedy selections (the two random init draws
    differ per seed by construction and are excluded from the stability
    comparison)."""
    reports = []
    for seed in range(10):
        driver = MultiFidelityDriver(
            heat_problem.fine_model,
            sketch="random",
            sketch_size=2,
            points_per_iter=1,
            tol=1e-300,
            max_iter=7,
            seed=seed,
        )
        reports.append(driver.run(heat_grid.train_points))
    return reports


# ------------------------------------------------------------------ advdiff9d

DESK_TOL = 1e-4


@pytest.fixture(scope="session")
def desk_problem():
    """Desk-scale transport benchmark: (39, 39) cells -> 1600 nodes."""
    return AdvectionDiffusion(fine=(39, 39), coarse=(12, 12))


@pytest.fixture(scope="session")
def desk_grid(desk_problem):
    """600-point Latin hypercube, 500 train / 100 val."""
    return desk_problem.default_grid(n=600, n_val=100, seed=0)


@pytest.fixture(scope="session")
def desk_val_snapshots(desk_problem, desk_grid):
    model = desk_problem.fine_model
    return np.column_stack([model.solve(mu) for mu in desk_grid.val_points])


@pytest.fixture(scope="session")
def desk_p5_run(desk_problem, desk_grid, desk_val_snapshots):
    driver = MultiFidelityDriver(
        desk_problem.fine_model,
        sketch="random",
        sketch_size=20,
        points_per_iter=5,
        tol=DESK_TOL,
        max_iter=80,
        seed=0,
    )
    return driver.run(
        desk_grid.train_points,
        val_points=desk_grid.val_points,
        val_snapshots=desk_val_snapshots,
    )


@pytest.fixture(scope="session")
def desk_p2_run(desk_problem, desk_grid, desk_val_snapshots):
    driver = MultiFidelityDriver(
        desk_problem.fine_model,
        sketch="random",
        sketch_size=20,
        points_per_iter=2,
        tol=DESK_TOL,
        max_iter=160,
        seed=0,
    )
    return driver.run(
        desk_grid.train_points,
        val_points=desk_grid.val_points,
        val_snapshots=desk_val_snapshots,
    )


@pytest.fixture(scope="session")
def small_advdiff():
    """Tiny transport setup for unit-level checks; returns
    (problem, grid, train_snapshots)."""
    problem = AdvectionDiffusion(fine=(15, 15), coarse=(9, 9))
    grid = problem.default_grid(n=120, n_val=20, seed=0)
    model = problem.fine_model
    snaps = np.column_stack([model.solve(mu) for mu in grid.train_points])
    return problem, grid, snaps


# ------------------------------------------------------------------ small heat

@pytest.fixture(scope="session")
def heat_small():
    """Small diffusion setup for unit-level checks; returns
    (problem, grid) with a 165-point training grid."""
    from mfmor import grid_1d, split_train_val, tensor_grid

    problem = HeatConduction(fine=(8, 8), coarse=(4, 4))
    grid = tensor_grid(
        [grid_1d("log", 0.1, 10.0, 15), grid_1d("uniform", -1.0, 1.0, 11)],
        generators=("log", "uniform"),
    )
    grid = split_train_val(grid, n_val=15, seed=0)
    return problem, grid


# ------------------------------------------------- acceptance result summary

ACCEPTANCE_CRITERIA = {
    1: "heat2d random sketch: 6 +/- 1 iterations and 7 +/- 1 sampled points",
    2: "heat2d coarse sketch: same point count +/- 1 as the random sketch",
    3: "greedy baseline: 7 +/- 1 basis functions, bound >= measured error",
    4: "eps_pod <= eps_rom at every rank, both monotone (5% band), both benchmarks",
    5: "advdiff9d desk run: eps_val drops >= 3 orders, distinct points, <= 15 min",
    6: "smaller p: total points <= larger-p run, more iterations",
    7: "greedy selection matches brute-force reference on 200 random matrices",
    8: "heat2d analytics: u = 1 - y at mu = (1, 1); flux linearity (1e-12)",
    9: "invariants: orthonormality, affine reassembly, Galerkin residual, determinism",
    10: "10 seeded heat2d trials: >= 6 of 7 selected locations stable across all",
}

_RESULTS: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    """Record a criterion verdict for the end-of-run summary, then assert it."""

    def record(num: int, ok, detail: str) -> None:
        _RESULTS[num] = (bool(ok), detail)
        assert ok, f"acceptance criterion {num} failed: {detail}"

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _RESULTS:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for num in sorted(ACCEPTANCE_CRITERIA):
        desc = ACCEPTANCE_CRITERIA[num]
        if num in _RESULTS:
            ok, detail = _RESULTS[num]
            verdict = "PASS" if ok else "FAIL"
            markup = {"green": True} if ok else {"red": True}
        else:
            verdict, detail = "----", "not evaluated"
            markup = {"yellow": True}
        tr.write(f"{verdict:>4}", **markup)
        tr.write_line(f"  {num:>2}. {desc}: {detail}")
