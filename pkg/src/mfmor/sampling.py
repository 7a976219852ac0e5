"""Greedy interpolation-point selection over parametric mode matrices.

The selector walks mode columns in order; for each column it forms the
interpolation residual against the rows/columns chosen so far and picks the
row with the largest absolute residual (first occurrence wins ties, so the
lowest row index).  Rows here index *training parameter points*, not mesh
nodes, so the state carries over between outer iterations without any mesh
transfer.

A row can be selected at most once per run.  When a column's argmax lands
on an already-selected row the column is consumed and logged, and selection
continues with the next column.
"""

from __future__ import annotations

import logging

import numpy as np

from .exceptions import ConfigurationError, NumericalError

logger = logging.getLogger(__name__)

DEFAULT_RANK_TOL = 1e-12


class DeimState:
    """Selection state shared across outer iterations.

    Attributes
    ----------
    selected : list[int]
        All chosen row indices in selection order (seeded draws first).
    history : ndarray (n_rows, h)
        Orthonormal record of every mode direction consumed so far; new
        modes are orthogonalized against it to expose only new information.
    """

    def __init__(self, n_rows: int):
        if n_rows < 1:
            raise ConfigurationError(f"n_rows must be positive, got {n_rows}")
        self.n_rows = int(n_rows)
        self.selected: list[int] = []
        self.history = np.zeros((self.n_rows, 0))
        self.iteration = 0
        self._interp_rows: list[int] = []
        self._interp_cols = np.zeros((self.n_rows, 0))

    def mark_selected(self, indices) -> None:
        """Record rows as used (e.g. the initial random draw) without
        giving them interpolation columns."""
        for i in indices:
            i = int(i)
            if not 0 <= i < self.n_rows:
                raise ConfigurationError(f"index {i} outside 0..{self.n_rows - 1}")
            if i in self._selected_set:
                raise ConfigurationError(f"index {i} already selected")
            self.selected.append(i)

    @property
    def _selected_set(self) -> set:
        return set(self.selected)

    @property
    def n_selected(self) -> int:
        return len(self.selected)


def orthogonalize_against_history(
    modes: np.ndarray, state: DeimState, rank_tol: float = DEFAULT_RANK_TOL
) -> np.ndarray:
    """Strip previously seen directions from new mode columns.

    Surviving columns are normalized, appended to the state's history, and
    returned.  Columns whose residual falls below ``rank_tol`` of their
    original norm are dropped; an empty result means the modes carry no new
    parametric information.
    """
    modes = np.atleast_2d(np.asarray(modes, dtype=float))
    if modes.shape[0] != state.n_rows:
        raise ConfigurationError(
            f"mode rows {modes.shape[0]} != state rows {state.n_rows}"
        )
    q = state.history
    fresh = []
    for j in range(modes.shape[1]):
        v = modes[:, j]
        nv = np.linalg.norm(v)
        if nv == 0.0:
            logger.info("history filter: mode column %d is zero, dropped", j)
            continue
        w = v - q @ (q.T @ v)
        w = w - q @ (q.T @ w)
        nw = np.linalg.norm(w)
        if nw <= rank_tol * nv:
            logger.info(
                "history filter: mode column %d already spanned "
                "(residual %.3e of norm)", j, nw / nv,
            )
            continue
        w = w / nw
        q = np.column_stack([q, w])
        fresh.append(w)
    state.history = q
    if not fresh:
        logger.warning("history filter: no new parametric information in %d column(s)",
                       modes.shape[1])
        return np.zeros((state.n_rows, 0))
    return np.column_stack(fresh)


def _interp_coeffs(state: DeimState, rhs_col: np.ndarray, col_label: int) -> np.ndarray:
    rows = state._interp_rows
    m = state._interp_cols[rows, :]
    try:
        c = np.linalg.solve(m, rhs_col[rows])
    except np.linalg.LinAlgError as exc:
        raise NumericalError(
            f"singular interpolation system at mode column {col_label} "
            f"(selected rows {rows})"
        ) from exc
    resid = np.linalg.norm(m @ c - rhs_col[rows])
    scale = max(np.linalg.norm(rhs_col[rows]), 1e-300)
    if resid > 1e-8 * scale and resid > 1e-12:
        raise NumericalError(
            f"ill-conditioned interpolation system at mode column {col_label}: "
            f"relative residual {resid / scale:.3e}"
        )
    return c


def deim_select(
    modes: np.ndarray,
    p: int,
    state: DeimState,
    variant: str = "selected-rows",
) -> list[int]:
    """Select up to ``p`` new rows; mutates ``state`` and returns the new indices.

    variant="selected-rows" restricts the interpolation system to the rows
    already selected (square, resumable across iterations).
    variant="leading" reproduces the textbook form that uses the leading
    l-1 rows of the mode matrix; it is for comparison runs and requires a
    fresh state.
    """
    modes = np.atleast_2d(np.asarray(modes, dtype=float))
    if modes.shape[0] != state.n_rows:
        raise ConfigurationError(
            f"mode rows {modes.shape[0]} != state rows {state.n_rows}"
        )
    if p < 1:
        raise ConfigurationError(f"p must be >= 1, got {p}")
    if p > modes.shape[1]:
        raise ConfigurationError(
            f"requested p={p} points but only {modes.shape[1]} mode columns "
            "are available"
        )
    if variant == "selected-rows":
        return _select_standard(modes, p, state)
    if variant == "leading":
        return _select_leading(modes, p, state)
    raise ConfigurationError(f"unknown deim variant {variant!r}")


def _select_standard(modes: np.ndarray, p: int, state: DeimState) -> list[int]:
    new: list[int] = []
    taken = state._selected_set
    for j in range(modes.shape[1]):
        col = modes[:, j]
        if not state._interp_rows:
            resid = col
        else:
            c = _interp_coeffs(state, col, j)
            resid = col - state._interp_cols @ c
        idx = int(np.argmax(np.abs(resid)))
        if idx in taken:
            logger.info(
                "deim: column %d argmax hit already-selected row %d, skipping column",
                j, idx,
            )
            continue
        state.selected.append(idx)
        state._interp_rows.append(idx)
        state._interp_cols = np.column_stack([state._interp_cols, col])
        taken.add(idx)
        new.append(idx)
        if len(new) == p:
            break
    if len(new) < p:
        logger.warning(
            "deim: only %d of %d requested points found (%d columns consumed)",
            len(new), p, modes.shape[1],
        )
    return new


def _select_leading(modes: np.ndarray, p: int, state: DeimState) -> list[int]:
    if state._interp_rows or state.selected:
        raise ConfigurationError(
            "variant='leading' is not resumable; use a fresh state"
        )
    new: list[int] = []
    taken: set = set()
    for j in range(modes.shape[1]):
        col = modes[:, j]
        if j == 0:
            resid = col
        else:
            m = modes[:j, :j]
            try:
                c = np.linalg.solve(m, col[:j])
            except np.linalg.LinAlgError as exc:
                raise NumericalError(
                    f"singular leading-rows system at mode column {j}"
                ) from exc
            resid = col - modes[:, :j] @ c
        idx = int(np.argmax(np.abs(resid)))
        if idx in taken:
            logger.info("deim(leading): duplicate argmax row %d at column %d", idx, j)
            continue
        taken.add(idx)
        state.selected.append(idx)
        new.append(idx)
        if len(new) == p:
            break
    return new
