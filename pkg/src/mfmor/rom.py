"""Galerkin reduced-order systems built from a reduced basis."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .exceptions import ConfigurationError, NumericalError
from .fem import AffineSystem
from .reduction import ReducedBasis

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RomSolution:
    """Reduced coefficients at one parameter point."""

    mu: np.ndarray
    coeffs: np.ndarray  # (r,)


def _basis_columns(basis) -> np.ndarray:
    if isinstance(basis, ReducedBasis):
        return basis.columns
    return np.asarray(basis, dtype=float)


def solve_dense_checked(a: np.ndarray, f: np.ndarray, context: str = "") -> np.ndarray:
    try:
        c = np.linalg.solve(a, f)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular reduced system ({context})") from exc
    if not np.all(np.isfinite(c)):
        raise NumericalError(f"reduced solve produced non-finite values ({context})")
    resid = np.linalg.norm(a @ c - f)
    scale = np.linalg.norm(f) + np.linalg.norm(a) * np.linalg.norm(c)
    if resid > 1e-10 * max(scale, 1e-300):
        raise NumericalError(
            f"reduced residual {resid:.3e} above 1e-10 * scale ({context})"
        )
    return c


@dataclass(frozen=True)
class ReducedAffineSystem:
    """Affine system projected onto r basis vectors; theta functions are shared
    with the full-order system."""

    lhs_terms: tuple[tuple[str, np.ndarray], ...]
    rhs_terms: tuple[tuple[str, np.ndarray], ...]
    theta_lhs: Callable[[np.ndarray], np.ndarray]
    theta_rhs: Callable[[np.ndarray], np.ndarray]
    mu_dim: int
    name: str = ""

    @property
    def rank(self) -> int:
        return self.lhs_terms[0][1].shape[0]

    def assemble(self, mu: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        mu = np.asarray(mu, dtype=float).ravel()
        if mu.shape != (self.mu_dim,):
            raise ConfigurationError(
                f"{self.name}: expected {self.mu_dim} parameters, got {mu.shape}"
            )
        tl = np.asarray(self.theta_lhs(mu), dtype=float)
        tr = np.asarray(self.theta_rhs(mu), dtype=float)
        a = sum(w * mat for w, (_, mat) in zip(tl, self.lhs_terms))
        f = sum(w * vec for w, (_, vec) in zip(tr, self.rhs_terms))
        if np.isscalar(f):  # no rhs terms
            f = np.zeros(self.rank)
        return a, f

    def solve(self, mu: Sequence[float]) -> RomSolution:
        a, f = self.assemble(mu)
        c = solve_dense_checked(a, f, context=f"{self.name} at mu={list(np.ravel(mu))}")
        return RomSolution(mu=np.asarray(mu, dtype=float).ravel(), coeffs=c)

    def truncated(self, rank: int) -> "ReducedAffineSystem":
        """Prefix sub-system; valid because basis prefixes are nested."""
        if not 0 <= rank <= self.rank:
            raise ConfigurationError(f"rank {rank} outside 0..{self.rank}")
        return ReducedAffineSystem(
            lhs_terms=tuple((t, m[:rank, :rank]) for t, m in self.lhs_terms),
            rhs_terms=tuple((t, v[:rank]) for t, v in self.rhs_terms),
            theta_lhs=self.theta_lhs,
            theta_rhs=self.theta_rhs,
            mu_dim=self.mu_dim,
            name=self.name,
        )


def project_affine(system: AffineSystem, basis) -> ReducedAffineSystem:
    """Project every affine term once; assembly at a new mu is then O(r^2)."""
    phi = _basis_columns(basis)
    if phi.ndim != 2:
        raise ConfigurationError(f"basis must be 2-D, got shape {phi.shape}")
    if phi.shape[0] == system.n_full:
        phi = phi[system.free]
    elif phi.shape[0] != system.n:
        raise ConfigurationError(
            f"basis rows {phi.shape[0]} match neither full ({system.n_full}) "
            f"nor free ({system.n}) dimension"
        )
    lhs = tuple((tag, phi.T @ (mat @ phi)) for tag, mat in system.lhs_terms)
    rhs = tuple((tag, phi.T @ vec) for tag, vec in system.rhs_terms)
    return ReducedAffineSystem(
        lhs_terms=lhs,
        rhs_terms=rhs,
        theta_lhs=system.theta_lhs,
        theta_rhs=system.theta_rhs,
        mu_dim=system.mu_dim,
        name=f"{system.name}-rom",
    )


def project_operator(matrix, rhs, phi: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Project an already-assembled (sparse) operator and load vector."""
    ar = phi.T @ (matrix @ phi)
    fr = phi.T @ rhs
    return np.asarray(ar), np.asarray(fr)


def solve_rom_affine(rsys: ReducedAffineSystem, mu) -> RomSolution:
    return rsys.solve(mu)


def solve_rom_nonaffine(assembler, phi_free: np.ndarray, mu) -> RomSolution:
    """Assemble the full operator at mu, project, and solve (non-affine path)."""
    ds = assembler.assemble(mu)
    ar, fr = project_operator(ds.matrix, ds.rhs, phi_free)
    c = solve_dense_checked(ar, fr, context=f"nonaffine rom at mu={list(np.ravel(mu))}")
    return RomSolution(mu=np.asarray(mu, dtype=float).ravel(), coeffs=c)


def reconstruct(basis, coeffs) -> np.ndarray:
    """Lift reduced coefficients back to the full space: u = Phi c."""
    phi = _basis_columns(basis)
    if isinstance(coeffs, RomSolution):
        coeffs = coeffs.coeffs
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != phi.shape[1]:
        raise ConfigurationError(
            f"coefficient length {coeffs.shape[0]} != basis rank {phi.shape[1]}"
        )
    return phi @ coeffs
