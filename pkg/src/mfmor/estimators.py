"""Scikit-learn style estimators wrapping the sampling drivers.

``fit`` consumes a matrix of training parameter points (one row per point),
runs the offline sampling loop, and stores the reduced basis.  ``transform``
maps parameter points to reduced coefficients; ``predict`` reconstructs full
nodal fields.  Estimators follow the usual conventions (constructor stores
hyperparameters verbatim, fitted attributes get a trailing underscore), so
`clone` and `get_params` work.
"""

from __future__ import annotations

import warnings

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from .driver import STATUS_CONVERGED, MultiFidelityDriver
from .exceptions import ConfigurationError
from .greedy import GreedyRbmDriver
from .problems import make_problem
from .validation import as_param_matrix


def _resolve_problem(problem):
    if isinstance(problem, str):
        return make_problem(problem)
    if hasattr(problem, "fine_model"):
        return problem
    raise ConfigurationError(
        f"problem must be a name or a problem object, got {type(problem).__name__}"
    )


class MultiFidelityROM(BaseEstimator):
    """Reduced-order model fitted by iterative multi-fidelity sampling.

    Parameters mirror the driver; `problem` is a benchmark name ("heat2d",
    "advdiff9d") or a problem object exposing fine_model/coarse_model.

    Examples
    --------
    >>> est = MultiFidelityROM(problem="heat2d", seed=3).fit(grid.train_points)
    >>> fields = est.predict([[1.0, 1.0]])
    """

    def __init__(
        self,
        problem="heat2d",
        sketch="random",
        sketch_size=2,
        points_per_iter=1,
        tol=1e-6,
        max_iter=200,
        seed=0,
        gs_tol=1e-10,
        rank_tol=1e-12,
        require_val_convergence=False,
        deim_variant="selected-rows",
    ):
        self.problem = problem
        self.sketch = sketch
        self.sketch_size = sketch_size
        self.points_per_iter = points_per_iter
        self.tol = tol
        self.max_iter = max_iter
        self.seed = seed
        self.gs_tol = gs_tol
        self.rank_tol = rank_tol
        self.require_val_convergence = require_val_convergence
        self.deim_variant = deim_variant

    def fit(self, X, y=None, validation=None, validation_snapshots=None):
        """Run the offline loop on training parameter points X (n, d)."""
        problem = _resolve_problem(self.problem)
        X = as_param_matrix(X, dim=problem.dim)
        coarse = problem.coarse_model if self.sketch == "coarse" else None
        driver = MultiFidelityDriver(
            problem.fine_model,
            coarse,
            sketch=self.sketch,
            sketch_size=self.sketch_size,
            points_per_iter=self.points_per_iter,
            tol=self.tol,
            max_iter=self.max_iter,
            seed=self.seed,
            gs_tol=self.gs_tol,
            rank_tol=self.rank_tol,
            require_val_convergence=self.require_val_convergence,
            deim_variant=self.deim_variant,
        )
        val_x = None
        if validation is not None:
            val_x = as_param_matrix(validation, dim=problem.dim, name="validation")
        report = driver.run(X, val_points=val_x, val_snapshots=validation_snapshots)

        self.problem_ = problem
        self.report_ = report
        self.basis_ = report.basis
        self.coefficients_ = report.coefficients
        self.selected_indices_ = [j for _, j in report.selected_pairs]
        self.training_points_ = X
        self.n_iter_ = report.n_iterations
        self.status_ = report.status
        self.rom_ = problem.fine_model.rom(report.basis)
        if report.status != STATUS_CONVERGED:
            warnings.warn(
                f"multi-fidelity loop stopped with status {report.status!r}: "
                f"{report.detail}",
                ConvergenceWarning,
            )
        return self

    def transform(self, X) -> np.ndarray:
        """Reduced coefficients at new parameter points, shape (n, rank)."""
        check_is_fitted(self, "basis_")
        X = as_param_matrix(X, dim=self.problem_.dim)
        return np.vstack([self.rom_.solve_coeffs(mu) for mu in X])

    def predict(self, X) -> np.ndarray:
        """Full nodal fields at new parameter points, shape (n, n_dofs)."""
        coeffs = self.transform(X)
        return coeffs @ self.basis_.columns.T

    def fit_transform(self, X, y=None, **fit_params):
        return self.fit(X, y, **fit_params).transform(X)


class GreedyReducedBasis(BaseEstimator):
    """Reduced basis fitted by the residual-bound greedy baseline.

    Only problems with an affine parameter split are supported.
    """

    def __init__(self, problem="heat2d", mu_bar=(1.0, 1.0), tol=1e-6, max_iter=50,
                 gs_tol=1e-10):
        self.problem = problem
        self.mu_bar = mu_bar
        self.tol = tol
        self.max_iter = max_iter
        self.gs_tol = gs_tol

    def fit(self, X, y=None, validation=None, validation_snapshots=None):
        problem = _resolve_problem(self.problem)
        X = as_param_matrix(X, dim=problem.dim)
        driver = GreedyRbmDriver(
            problem.fine_model,
            mu_bar=self.mu_bar,
            tol=self.tol,
            max_iter=self.max_iter,
            gs_tol=self.gs_tol,
        )
        val_x = None
        if validation is not None:
            val_x = as_param_matrix(validation, dim=problem.dim, name="validation")
        report = driver.run(X, val_points=val_x, val_snapshots=validation_snapshots)

        self.problem_ = problem
        self.driver_ = driver
        self.report_ = report
        self.basis_ = report.basis
        self.selected_indices_ = [j for _, j in report.selected_pairs]
        self.training_points_ = X
        self.n_iter_ = report.n_iterations
        self.status_ = report.status
        self.rom_ = problem.fine_model.rom(report.basis)
        if report.status != STATUS_CONVERGED:
            warnings.warn(
                f"greedy loop stopped with status {report.status!r}: {report.detail}",
                ConvergenceWarning,
            )
        return self

    def transform(self, X) -> np.ndarray:
        check_is_fitted(self, "basis_")
        X = as_param_matrix(X, dim=self.problem_.dim)
        return np.vstack([self.rom_.solve_coeffs(mu) for mu in X])

    def predict(self, X) -> np.ndarray:
        coeffs = self.transform(X)
        return coeffs @ self.basis_.columns.T

    def error_bound(self, X) -> np.ndarray:
        """Rigorous energy-norm error bounds at parameter points."""
        check_is_fitted(self, "basis_")
        X = as_param_matrix(X, dim=self.problem_.dim)
        phi_free = self.basis_.columns[self.driver_.system.free]
        c_fq, c_qq = self.driver_._blocks(phi_free)
        out = np.empty(len(X))
        for i, mu in enumerate(X):
            coeffs = self.rom_.solve_coeffs(mu)
            out[i] = self.driver_.indicator(mu, coeffs, c_fq, c_qq)
        return out
