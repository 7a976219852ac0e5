"""Estimator wrappers: sklearn conventions, fitted attributes, predictions."""

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import ConvergenceWarning
from sklearn.exceptions import NotFittedError

from mfmor import (
    ConfigurationError,
    GreedyReducedBasis,
    MultiFidelityROM,
)


@pytest.fixture(scope="module")
def fitted(heat_small):
    problem, grid = heat_small
    est = MultiFidelityROM(problem=problem, seed=0)
    est.fit(grid.train_points, validation=grid.val_points)
    return problem, grid, est


def test_constructor_stores_hyperparameters_verbatim():
    est = MultiFidelityROM(problem="heat2d", seed=7, tol=1e-4, sketch_size=3)
    params = est.get_params()
    assert params["seed"] == 7
    assert params["tol"] == 1e-4
    assert params["sketch_size"] == 3
    assert params["problem"] == "heat2d"
    twin = clone(est)
    assert twin.get_params() == params
    assert not hasattr(twin, "basis_")


def test_set_params_roundtrip():
    est = MultiFidelityROM().set_params(seed=5, points_per_iter=2)
    assert est.seed == 5
    assert est.points_per_iter == 2


def test_fit_populates_the_fitted_attributes(fitted):
    problem, grid, est = fitted
    assert est.status_ == "converged"
    assert est.n_iter_ == len(est.report_.records)
    assert est.basis_.rank >= 2
    assert est.basis_.n_rows == problem.fine_model.n_dofs
    assert len(est.selected_indices_) == len(set(est.selected_indices_))
    assert est.coefficients_.shape == (est.basis_.rank, len(grid.train_points))
    assert np.array_equal(est.training_points_, grid.train_points)


def test_predict_matches_the_full_solver_at_training_points(fitted):
    problem, grid, est = fitted
    picks = grid.train_points[est.selected_indices_[:3]]
    fields = est.predict(picks)
    assert fields.shape == (3, problem.fine_model.n_dofs)
    for row, mu in zip(fields, picks):
        truth = problem.fine_model.solve(mu)
        assert np.linalg.norm(truth - row) <= 1e-8 * np.linalg.norm(truth)


def test_transform_returns_reduced_coefficients(fitted):
    problem, grid, est = fitted
    x = grid.val_points[:4]
    coeffs = est.transform(x)
    assert coeffs.shape == (4, est.basis_.rank)
    assert np.allclose(coeffs @ est.basis_.columns.T, est.predict(x))


def test_fit_transform_equals_fit_then_transform(heat_small):
    problem, grid = heat_small
    x = grid.train_points
    a = MultiFidelityROM(problem=problem, seed=1).fit_transform(x)
    b = MultiFidelityROM(problem=problem, seed=1).fit(x).transform(x)
    assert np.array_equal(a, b)


def test_single_point_queries_need_a_row(fitted):
    """1-D input means a column of one-parameter points, so a bare pair is
    rejected for a two-parameter problem rather than silently transposed."""
    _, _, est = fitted
    assert est.predict(np.array([[1.0, 0.5]])).shape[0] == 1
    with pytest.raises(ConfigurationError, match="parameters"):
        est.predict(np.array([1.0, 0.5]))


def test_unconverged_fit_warns(heat_small):
    problem, grid = heat_small
    est = MultiFidelityROM(problem=problem, max_iter=1, seed=0)
    with pytest.warns(ConvergenceWarning, match="max_iter"):
        est.fit(grid.train_points)
    assert est.status_ == "max_iter"
    assert est.n_iter_ == 1


def test_transform_before_fit_raises():
    with pytest.raises(NotFittedError):
        MultiFidelityROM().transform(np.array([[1.0, 0.0]]))


def test_problem_resolution_errors(heat_small):
    _, grid = heat_small
    with pytest.raises(ConfigurationError, match="unknown problem"):
        MultiFidelityROM(problem="heat3d").fit(grid.train_points)
    with pytest.raises(ConfigurationError, match="problem"):
        MultiFidelityROM(problem=42).fit(grid.train_points)


def test_wrong_parameter_dimension_raises(fitted):
    _, grid, est = fitted
    with pytest.raises(ConfigurationError, match="2"):
        est.predict(np.ones((3, 5)))
    with pytest.raises(ConfigurationError, match="finite"):
        est.transform(np.array([[np.nan, 1.0]]))


def test_coarse_sketch_through_the_estimator(heat_small):
    problem, grid = heat_small
    est = MultiFidelityROM(problem=problem, sketch="coarse", seed=0)
    est.fit(grid.train_points)
    assert est.status_ == "converged"
    assert est.report_.init_indices == []


def test_greedy_estimator_fits_and_bounds(heat_small):
    problem, grid = heat_small
    est = GreedyReducedBasis(problem=problem, tol=1e-5)
    est.fit(grid.train_points)
    assert est.status_ == "converged"

    x = grid.val_points[:5]
    bounds = est.error_bound(x)
    assert bounds.shape == (5,)
    model = problem.fine_model
    for mu, bound, row in zip(x, bounds, est.predict(x)):
        truth = model.solve(mu)
        err_x = est.driver_.energy_norm(truth - row)
        floor = 1e-12 * est.driver_.energy_norm(truth)
        assert bound * (1.0 + 1e-9) + floor >= err_x


def test_greedy_estimator_follows_sklearn_conventions(heat_small):
    problem, grid = heat_small
    est = GreedyReducedBasis(tol=1e-3, max_iter=4)
    assert clone(est).get_params() == est.get_params()
    with pytest.raises(NotFittedError):
        est.transform(grid.train_points[:1])
    with pytest.warns(ConvergenceWarning):
        GreedyReducedBasis(problem=problem, tol=1e-14, max_iter=2).fit(
            grid.train_points
        )
