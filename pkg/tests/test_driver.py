"""The outer sampling loop: convergence, bookkeeping, stalls, diagnostics."""

import numpy as np
import pytest

from mfmor import (
    ConfigurationError,
    MultiFidelityDriver,
    error_pod_global,
    error_rom_global,
    error_train,
    rank_sweep,
    relative_error,
    thin_svd,
)
from mfmor.driver import STATUS_CONVERGED, STATUS_STALLED, STATUS_MAX_ITER


@pytest.fixture(scope="module")
def small_run(heat_small):
    problem, grid = heat_small
    driver = MultiFidelityDriver(
        problem.fine_model, sketch="random", sketch_size=2,
        points_per_iter=1, tol=1e-6, seed=0,
    )
    report = driver.run(grid.train_points, val_points=grid.val_points)
    return problem, grid, report


def test_loop_converges_below_tolerance(small_run):
    problem, grid, report = small_run
    assert report.status == STATUS_CONVERGED
    assert report.eps_train < 1e-6
    assert report.eps_val < 1e-4  # held-out error follows the training error
    assert report.basis.rank >= 2
    assert report.n_train == len(grid.train_points)


def test_records_are_consistent(small_run):
    _, _, report = small_run
    assert [rec.iteration for rec in report.records] == list(
        range(1, report.n_iterations + 1)
    )
    n_points = [rec.n_points for rec in report.records]
    assert all(b > a for a, b in zip(n_points, n_points[1:]))
    ranks = [rec.basis_rank for rec in report.records]
    assert all(b >= a for a, b in zip(ranks, ranks[1:]))
    for rec in report.records:
        assert rec.n_fresh_modes >= len(rec.new_indices) > 0
        assert rec.singular_values.ndim == 1 and len(rec.singular_values) > 0
    assert report.n_points == n_points[-1]


def test_sampled_points_are_distinct(small_run):
    _, _, report = small_run
    indices = [j for _, j in report.selected_pairs]
    assert len(indices) == len(set(indices))
    assert report.selected_pairs[: len(report.init_indices)] == [
        (0, j) for j in report.init_indices
    ]


def test_final_rom_reproduces_all_sampled_snapshots(small_run):
    problem, grid, report = small_run
    x = grid.train_points
    model = problem.fine_model
    sampled = [j for _, j in report.selected_pairs]
    snaps = np.column_stack([model.solve(x[j]) for j in sampled])
    assert error_train(model, report.basis, x[sampled], snaps) <= 1e-8


def test_coefficient_matrix_spans_the_same_parametric_modes(small_run):
    """Right singular vectors of the coefficient matrix B equal those of the
    nodal snapshot matrix Phi @ B, because Phi has orthonormal columns.  This
    is what lets the reduced coefficients act as the next low-fidelity model."""
    _, _, report = small_run
    b = report.coefficients
    lifted = report.basis.columns @ b
    svd_b = thin_svd(b)
    svd_l = thin_svd(lifted)
    k = len(svd_b.values)
    assert np.allclose(
        svd_b.values, svd_l.values[:k], rtol=1e-10, atol=1e-13 * svd_b.values[0]
    )
    assert np.all(svd_l.values[k:] <= 1e-12 * svd_b.values[0])
    # Subspace sensitivity grows like eps/sigma, so compare the well-separated
    # leading part only.
    r = int(np.sum(svd_b.values > 1e-6 * svd_b.values[0]))
    pb = svd_b.right[:, :r] @ svd_b.right[:, :r].T
    pl = svd_l.right[:, :r] @ svd_l.right[:, :r].T
    assert np.max(np.abs(pb - pl)) <= 1e-8


def test_same_seed_reproduces_the_run_exactly(heat_small):
    problem, grid = heat_small
    reports = []
    for _ in range(2):
        driver = MultiFidelityDriver(
            problem.fine_model, sketch="random", sketch_size=2,
            points_per_iter=1, tol=1e-6, seed=11,
        )
        reports.append(driver.run(grid.train_points))
    a, b = reports
    assert a.init_indices == b.init_indices
    assert a.selected_pairs == b.selected_pairs
    assert [r.eps_train for r in a.records] == [r.eps_train for r in b.records]
    assert np.array_equal(a.basis.columns, b.basis.columns)
    different = MultiFidelityDriver(
        problem.fine_model, sketch="random", sketch_size=2,
        points_per_iter=1, tol=1e-6, seed=12,
    ).run(grid.train_points)
    assert different.init_indices != a.init_indices


def test_coarse_sketch_needs_no_rng_and_converges(heat_small):
    problem, grid = heat_small
    driver = MultiFidelityDriver(
        problem.fine_model, problem.coarse_model, sketch="coarse",
        points_per_iter=1, tol=1e-6,
    )
    report = driver.run(grid.train_points)
    assert report.status == STATUS_CONVERGED
    assert report.init_indices == []
    assert report.records[0].n_points == 1  # selection starts from nothing


def test_validation_gate_keeps_iterating_until_val_converges(heat_small):
    problem, grid = heat_small
    base = dict(sketch="random", sketch_size=2, points_per_iter=1, tol=1e-6, seed=0)
    plain = MultiFidelityDriver(problem.fine_model, **base).run(
        grid.train_points, val_points=grid.val_points
    )
    gated = MultiFidelityDriver(
        problem.fine_model, require_val_convergence=True, **base
    ).run(grid.train_points, val_points=grid.val_points)
    assert gated.status == STATUS_CONVERGED
    assert gated.eps_val < 1e-6
    assert gated.n_iterations >= plain.n_iterations


def test_stall_when_every_training_point_is_consumed(heat_small):
    problem, _ = heat_small
    tiny = np.array([[mu1, mu2] for mu1 in (0.5, 2.0, 8.0) for mu2 in (-1.0, 1.0)])
    driver = MultiFidelityDriver(
        problem.fine_model, sketch="random", sketch_size=2,
        points_per_iter=1, tol=1e-30, max_iter=50, seed=0,
    )
    report = driver.run(tiny)
    assert report.status == STATUS_STALLED
    assert report.n_points <= len(tiny)


def test_stall_when_modes_carry_no_new_information(heat_small):
    """Duplicated training points give a rank-3 low-fidelity matrix; once its
    three directions are consumed the loop must report a stall, not spin."""
    problem, _ = heat_small
    distinct = np.array([[0.5, 1.0], [2.0, -0.5], [8.0, 0.3]])
    doubled = np.repeat(distinct, 2, axis=0)
    driver = MultiFidelityDriver(
        problem.fine_model, problem.coarse_model, sketch="coarse",
        points_per_iter=1, tol=1e-30, max_iter=50,
    )
    report = driver.run(doubled)
    assert report.status == STATUS_STALLED
    assert "no new parametric information" in report.detail
    assert report.n_iterations == 3


def test_stall_on_an_all_zero_low_fidelity_matrix(heat_small):
    problem, _ = heat_small
    zero_flux = np.array([[0.5, 0.0], [2.0, 0.0], [8.0, 0.0]])
    driver = MultiFidelityDriver(
        problem.fine_model, problem.coarse_model, sketch="coarse",
        points_per_iter=1, tol=1e-6,
    )
    report = driver.run(zero_flux)
    assert report.status == STATUS_STALLED
    assert "zero" in report.detail
    assert report.records == []


def test_max_iter_is_honored(heat_small):
    problem, grid = heat_small
    driver = MultiFidelityDriver(
        problem.fine_model, sketch="random", sketch_size=2,
        points_per_iter=1, tol=1e-30, max_iter=3, seed=0,
    )
    report = driver.run(grid.train_points)
    assert report.status == STATUS_MAX_ITER
    assert report.n_iterations == 3


def test_driver_configuration_errors(heat_small):
    problem, grid = heat_small
    model = problem.fine_model
    with pytest.raises(ConfigurationError, match="sketch"):
        MultiFidelityDriver(model, sketch="psychic")
    with pytest.raises(ConfigurationError, match="coarse"):
        MultiFidelityDriver(model, sketch="coarse")
    with pytest.raises(ConfigurationError, match="sketch_size"):
        MultiFidelityDriver(model, sketch_size=0)
    with pytest.raises(ConfigurationError, match="points_per_iter"):
        MultiFidelityDriver(model, points_per_iter=0)
    with pytest.raises(ConfigurationError, match="tol"):
        MultiFidelityDriver(model, tol=0.0)
    with pytest.raises(ConfigurationError, match="max_iter"):
        MultiFidelityDriver(model, max_iter=0)
    with pytest.raises(ConfigurationError, match="train_points"):
        MultiFidelityDriver(model).run(np.array([[1.0, 1.0]]))
    with pytest.raises(ConfigurationError, match="validation"):
        MultiFidelityDriver(model, require_val_convergence=True).run(
            grid.train_points
        )
    with pytest.raises(ConfigurationError, match="sketch_size"):
        MultiFidelityDriver(model, sketch_size=99).run(grid.train_points[:10])


def test_relative_error_definition():
    truth = np.array([3.0, 4.0])
    assert relative_error(truth, truth) == 0.0
    assert relative_error(truth, np.zeros(2)) == 1.0
    assert np.isnan(relative_error(np.zeros(2), truth))


# ------------------------------------------------------------------ rank sweep

def test_rank_sweep_matches_direct_evaluation(small_run):
    problem, grid, report = small_run
    model = problem.fine_model
    x = grid.train_points[:40]
    snaps = np.column_stack([model.solve(mu) for mu in x])
    rows = rank_sweep(model, report.basis, x, snaps)

    phi = report.basis.columns
    for row in rows:
        r = row["rank"]
        rom = model.rom(phi[:, :r])
        pod_sq = rom_sq = 0.0
        for j, mu in enumerate(x):
            u = snaps[:, j]
            nu = np.linalg.norm(u)
            if nu == 0.0:  # zero solutions carry no relative error
                continue
            proj = phi[:, :r] @ (phi[:, :r].T @ u)
            pod_sq += (np.linalg.norm(u - proj) / nu) ** 2
            urom = phi[:, :r] @ rom.solve_coeffs(mu)
            rom_sq += (np.linalg.norm(u - urom) / nu) ** 2
        assert row["eps_pod"] == pytest.approx(np.sqrt(pod_sq), rel=1e-9, abs=1e-12)
        assert row["eps_rom"] == pytest.approx(np.sqrt(rom_sq), rel=1e-9, abs=1e-12)
        assert row["eps_pod"] <= row["eps_rom"] + 1e-12


def test_rank_sweep_validates_inputs(small_run):
    problem, grid, report = small_run
    model = problem.fine_model
    x = grid.train_points[:5]
    snaps = np.zeros((model.n_dofs, 4))
    with pytest.raises(ConfigurationError, match="parameter count"):
        rank_sweep(model, report.basis, x, snaps)
    snaps = np.zeros((model.n_dofs, 5))
    with pytest.raises(ConfigurationError, match="ranks"):
        rank_sweep(model, report.basis, x, snaps, ranks=[0])


def test_global_error_helpers_agree_with_the_sweep(small_run):
    problem, grid, report = small_run
    model = problem.fine_model
    x = grid.train_points[:30]
    snaps = np.column_stack([model.solve(mu) for mu in x])
    rows = rank_sweep(model, report.basis, x, snaps)
    assert error_pod_global(snaps, report.basis) == pytest.approx(
        rows[-1]["eps_pod"], rel=1e-9, abs=1e-12
    )
    assert error_rom_global(model, report.basis, x, snaps) == pytest.approx(
        rows[-1]["eps_rom"], rel=1e-9, abs=1e-12
    )
