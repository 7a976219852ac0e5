"""P1 finite element assembly and solves on unit-square meshes.

Covers the two benchmark models: a two-parameter diffusion problem with a
conductivity block and a flux-controlled base, and a nine-parameter
advection-diffusion problem with SUPG stabilization where the advection
field comes from a Darcy potential-flow solve.

Homogeneous Dirichlet constraints are eliminated: assembled systems act on
the free dofs only, and solutions are expanded back to full nodal vectors
with exact zeros on the constrained nodes.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Mapping, Sequence

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import MatrixRankWarning, spsolve

from .exceptions import AssemblyError, DomainError, SolverError
from .mesh import Mesh

logger = logging.getLogger(__name__)

RESIDUAL_RTOL = 1e-10


def p1_gradients(mesh: Mesh) -> np.ndarray:
    """Constant gradients of the three barycentric basis functions, (m, 3, 2)."""
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    two_a = 2.0 * mesh.triangle_areas
    gx = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    gy = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    return np.stack([gx, gy], axis=2) / two_a[:, None, None]


def _scatter(mesh: Mesh, local: np.ndarray) -> sparse.csr_matrix:
    """Assemble (m, 3, 3) element blocks into a full nodal CSR matrix."""
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_nodes
    return sparse.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(n, n)
    ).tocsr()


def stiffness_matrix(mesh: Mesh, coeff: np.ndarray | float = 1.0) -> sparse.csr_matrix:
    """Assemble sum_T c_T int_T grad(phi_i).grad(phi_j) with c constant per triangle."""
    coeff = np.broadcast_to(np.asarray(coeff, float), (mesh.n_triangles,))
    grads = p1_gradients(mesh)
    local = np.einsum("tid,tjd->tij", grads, grads)
    local = local * (coeff * mesh.triangle_areas)[:, None, None]
    return _scatter(mesh, local)


def boundary_flux_vector(mesh: Mesh, tag: str) -> np.ndarray:
    """Assemble int_{Gamma_tag} phi_i ds with the trapezoidal edge rule (exact for P1)."""
    edges = mesh.edges_with_tag(tag)
    if len(edges) == 0:
        raise AssemblyError(f"mesh has no boundary edges tagged {tag!r}")
    lengths = np.linalg.norm(
        mesh.nodes[edges[:, 1]] - mesh.nodes[edges[:, 0]], axis=1
    )
    v = np.zeros(mesh.n_nodes)
    np.add.at(v, edges.ravel(), np.repeat(lengths / 2.0, 2))
    return v


def per_triangle_coeff(mesh: Mesh, value: float | Mapping[int, float]) -> np.ndarray:
    """Expand a scalar or {subdomain_id: value} map to one value per triangle."""
    if np.isscalar(value):
        return np.full(mesh.n_triangles, float(value))
    out = np.empty(mesh.n_triangles)
    present = np.unique(mesh.subdomain_id)
    missing = [int(s) for s in present if s not in value]
    if missing:
        raise DomainError(f"no coefficient given for subdomains {missing}")
    for s in present:
        out[mesh.subdomain_id == s] = float(value[s])
    return out


@dataclass
class DiscreteSystem:
    """A constrained linear system A u = f on the free dofs of a mesh."""

    matrix: sparse.csr_matrix
    rhs: np.ndarray
    free: np.ndarray
    n_full: int

    @property
    def n(self) -> int:
        return len(self.free)

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Insert exact zeros on the constrained nodes."""
        u = np.zeros(self.n_full)
        u[self.free] = u_free
        return u


def solve_checked(
    matrix: sparse.spmatrix, rhs: np.ndarray, context: str = ""
) -> np.ndarray:
    """Sparse direct solve with a residual acceptance check."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            u = spsolve(matrix.tocsc(), rhs)
        except (MatrixRankWarning, RuntimeError) as exc:
            raise SolverError(f"singular system ({context}): {exc}") from exc
    if not np.all(np.isfinite(u)):
        raise SolverError(f"solve produced non-finite values ({context})")
    res = np.linalg.norm(matrix @ u - rhs)
    ref = np.linalg.norm(rhs)
    if res > RESIDUAL_RTOL * ref:
        raise SolverError(
            f"residual {res:.3e} exceeds {RESIDUAL_RTOL:g} * |f| = "
            f"{RESIDUAL_RTOL * ref:.3e} ({context})"
        )
    return u


def solve_discrete(system: DiscreteSystem, context: str = "") -> np.ndarray:
    return system.expand(solve_checked(system.matrix, system.rhs, context))


@dataclass(frozen=True)
class FomSolution:
    """Full-order nodal solution at one parameter point."""

    mu: np.ndarray
    values: np.ndarray  # full nodal vector, zeros on Dirichlet nodes


@dataclass
class AffineSystem:
    """Parameter-affine system sum_q theta_q(mu) A_q u = sum_k xi_k(mu) f_k.

    Operators are stored on the free dofs; `expand` maps solutions back to
    the full nodal space.
    """

    lhs_terms: tuple[tuple[str, sparse.csr_matrix], ...]
    rhs_terms: tuple[tuple[str, np.ndarray], ...]
    theta_lhs: Callable[[np.ndarray], np.ndarray]
    theta_rhs: Callable[[np.ndarray], np.ndarray]
    free: np.ndarray
    n_full: int
    mu_dim: int
    name: str = ""

    @property
    def n(self) -> int:
        return len(self.free)

    def _check_mu(self, mu: Sequence[float]) -> np.ndarray:
        mu = np.asarray(mu, dtype=float).ravel()
        if mu.shape != (self.mu_dim,):
            raise DomainError(
                f"{self.name}: expected {self.mu_dim} parameters, got shape {mu.shape}"
            )
        return mu

    def assemble(self, mu: Sequence[float]) -> DiscreteSystem:
        mu = self._check_mu(mu)
        tl = np.asarray(self.theta_lhs(mu), dtype=float)
        tr = np.asarray(self.theta_rhs(mu), dtype=float)
        a = tl[0] * self.lhs_terms[0][1]
        for w, (_, mat) in zip(tl[1:], self.lhs_terms[1:]):
            a = a + w * mat
        f = np.zeros(self.n)
        for w, (_, vec) in zip(tr, self.rhs_terms):
            f = f + w * vec
        return DiscreteSystem(matrix=a.tocsr(), rhs=f, free=self.free, n_full=self.n_full)

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        u = np.zeros(self.n_full)
        u[self.free] = u_free
        return u

    def restrict(self, u_full: np.ndarray) -> np.ndarray:
        return np.asarray(u_full)[..., self.free]


def _heat_theta_lhs(mu: np.ndarray) -> np.ndarray:
    if mu[0] <= 0.0:
        raise DomainError(f"block conductivity mu_1={mu[0]!r} must be positive")
    return np.array([1.0, mu[0]])


def _heat_theta_rhs(mu: np.ndarray) -> np.ndarray:
    return np.array([mu[1]])


def assemble_heat_affine(mesh: Mesh) -> AffineSystem:
    """Two-term affine split of the block-diffusion model.

    A(mu) = A_outer + mu_1 A_block, f(mu) = mu_2 g_base, with u = 0 on the
    top edge eliminated.
    """
    if mesh.layout != "heat2d":
        raise AssemblyError(f"heat model needs a heat2d mesh, got {mesh.layout!r}")
    outer = stiffness_matrix(mesh, (mesh.subdomain_id == 1).astype(float))
    block = stiffness_matrix(mesh, (mesh.subdomain_id == 0).astype(float))
    flux = boundary_flux_vector(mesh, "base")
    fixed = mesh.nodes_with_tag("top")
    free = np.setdiff1d(np.arange(mesh.n_nodes), fixed)
    return AffineSystem(
        lhs_terms=(
            ("stiffness_outer", outer[free][:, free].tocsr()),
            ("stiffness_block", block[free][:, free].tocsr()),
        ),
        rhs_terms=(("flux_base", flux[free]),),
        theta_lhs=_heat_theta_lhs,
        theta_rhs=_heat_theta_rhs,
        free=free,
        n_full=mesh.n_nodes,
        mu_dim=2,
        name="heat2d",
    )


def solve_fom(system: AffineSystem, mu: Sequence[float]) -> FomSolution:
    """Assemble at mu and solve; the residual check guards the factorization."""
    mu = np.asarray(mu, dtype=float).ravel()
    ds = system.assemble(mu)
    values = solve_discrete(ds, context=f"{system.name} at mu={mu.tolist()}")
    return FomSolution(mu=mu, values=values)


@dataclass(frozen=True)
class VelocityField:
    """Piecewise-constant advection field derived from a potential solve."""

    vectors: np.ndarray      # (n_triangles, 2)
    potential: np.ndarray    # (n_nodes,) Darcy potential, 0 on the outlet
    divergence_residual: float

    @cached_property
    def speed(self) -> np.ndarray:
        return np.linalg.norm(self.vectors, axis=1)


def solve_potential_flow(
    mesh: Mesh,
    permeability: float | Mapping[int, float],
    inlet_flux: float = 1.0,
) -> VelocityField:
    """Darcy velocity b = -kappa grad(phi) with unit-flux inlet and zero-potential outlet.

    The weak divergence of b vanishes at interior nodes by construction;
    this is checked and stored as a diagnostic.
    """
    if mesh.layout != "advdiff9d":
        raise AssemblyError(
            f"potential flow needs an advdiff9d mesh, got {mesh.layout!r}"
        )
    kappa = per_triangle_coeff(mesh, permeability)
    if np.any(kappa <= 0.0):
        raise DomainError("permeability must be positive on every subdomain")
    k_mat = stiffness_matrix(mesh, kappa)
    g = inlet_flux * boundary_flux_vector(mesh, "inlet")
    fixed = mesh.nodes_with_tag("outlet")
    free = np.setdiff1d(np.arange(mesh.n_nodes), fixed)
    phi = np.zeros(mesh.n_nodes)
    phi[free] = solve_checked(
        k_mat[free][:, free].tocsr(), g[free], context="potential flow"
    )

    grads = p1_gradients(mesh)
    grad_phi = np.einsum("tid,ti->td", grads, phi[mesh.triangles])
    vectors = -kappa[:, None] * grad_phi

    # Weak divergence sum_T |T| b.grad(phi_i) must vanish at interior nodes:
    # those rows of the potential system have zero data by construction.
    contrib = np.einsum("td,tid->ti", vectors, grads) * mesh.triangle_areas[:, None]
    r = np.zeros(mesh.n_nodes)
    np.add.at(r, mesh.triangles.ravel(), contrib.ravel())
    interior = np.setdiff1d(np.arange(mesh.n_nodes), mesh.boundary_nodes)
    scale = np.max(np.abs(vectors))
    if scale == 0.0:
        raise SolverError("potential flow produced a zero velocity field")
    resid = float(np.max(np.abs(r[interior])) / scale)
    if resid > 1e-8:
        raise SolverError(
            f"weak divergence residual {resid:.3e} exceeds 1e-8; "
            "velocity field is not discretely conservative"
        )
    logger.debug("potential flow: divergence residual %.3e", resid)
    return VelocityField(vectors=vectors, potential=phi, divergence_residual=resid)


def supg_beta(pe: np.ndarray) -> np.ndarray:
    """Stabilization profile coth(Pe) - 1/Pe, series-expanded for small Pe."""
    pe = np.asarray(pe, dtype=float)
    out = np.empty_like(pe)
    small = pe < 1e-4
    ps = pe[small]
    out[small] = ps / 3.0 - ps**3 / 45.0
    pl = pe[~small]
    out[~small] = 1.0 / np.tanh(pl) - 1.0 / pl
    return out


class SupgAssembler:
    """Fast per-parameter assembly of the SUPG-stabilized transport system.

    Element blocks that do not depend on mu (advection, scaled stabilization
    and diffusion templates, source loads) are precomputed once; `assemble`
    only combines them with the parameter weights.

    The stabilization time scale is tau_T = beta(Pe_T) h_T / (2 |b_T|) with
    Pe_T = |b_T| h_T / (2 K_T) and h_T the longest edge.  The second-order
    SUPG term vanishes for P1 elements and is omitted.
    """

    def __init__(
        self,
        mesh: Mesh,
        velocity: VelocityField,
        source_subdomain: int = 5,
        source_value: float = 1.0,
    ):
        if mesh.layout != "advdiff9d":
            raise AssemblyError(
                f"transport model needs an advdiff9d mesh, got {mesh.layout!r}"
            )
        self.mesh = mesh
        self.velocity = velocity
        grads = p1_gradients(mesh)
        areas = mesh.triangle_areas
        h = mesh.h_elem
        b = velocity.vectors
        speed = velocity.speed

        bg = np.einsum("td,tid->ti", b, grads)  # b.grad(phi_i), (m, 3)
        m = mesh.n_triangles

        self._adv = np.broadcast_to(bg[:, None, :], (m, 3, 3)) * (areas / 3.0)[
            :, None, None
        ]
        self._stiff = np.einsum("tid,tjd->tij", grads, grads) * areas[:, None, None]

        # tau / beta = h / (2|b|); zero-velocity triangles get no stabilization
        active = speed > 1e-12 * max(speed.max(), 1.0)
        sfac = np.where(active, h / (2.0 * np.where(active, speed, 1.0)), 0.0)
        self._supg = (
            np.einsum("ti,tj->tij", bg, bg) * (sfac * areas)[:, None, None]
        )
        self._pe_base = 0.5 * speed * h  # Pe = pe_base / K_T

        src = source_value * (mesh.subdomain_id == source_subdomain).astype(float)
        self._f_gal = -(src * areas / 3.0)[:, None] * np.ones((1, 3))
        self._f_supg = -(src * sfac * areas)[:, None] * bg  # scaled by beta

        tri = mesh.triangles
        fixed = mesh.nodes_with_tag("inlet")
        self.free = np.setdiff1d(np.arange(mesh.n_nodes), fixed)
        free_mask = np.zeros(mesh.n_nodes, dtype=bool)
        free_mask[self.free] = True
        free_id = np.full(mesh.n_nodes, -1, dtype=np.int64)
        free_id[self.free] = np.arange(len(self.free))

        rows = np.repeat(tri, 3, axis=1).ravel()
        cols = np.tile(tri, (1, 3)).ravel()
        self._keep = free_mask[rows] & free_mask[cols]
        self._rows_f = free_id[rows[self._keep]]
        self._cols_f = free_id[cols[self._keep]]
        self.n_full = mesh.n_nodes

    def _check_mu(self, mu) -> np.ndarray:
        mu = np.asarray(mu, dtype=float).ravel()
        if mu.shape != (9,):
            raise DomainError(f"expected 9 diffusivities, got shape {mu.shape}")
        if np.any(mu <= 0.0) or not np.all(np.isfinite(mu)):
            raise DomainError(f"diffusivities must be positive and finite: {mu.tolist()}")
        return mu

    def assemble(self, mu) -> DiscreteSystem:
        mu = self._check_mu(mu)
        k_elem = mu[self.mesh.subdomain_id - 1]
        beta = supg_beta(self._pe_base / k_elem)
        local = (
            self._adv
            + beta[:, None, None] * self._supg
            + k_elem[:, None, None] * self._stiff
        )
        nf = len(self.free)
        a = sparse.coo_matrix(
            (local.ravel()[self._keep], (self._rows_f, self._cols_f)),
            shape=(nf, nf),
        ).tocsr()
        f_local = self._f_gal + beta[:, None] * self._f_supg
        f_full = np.zeros(self.n_full)
        np.add.at(f_full, self.mesh.triangles.ravel(), f_local.ravel())
        return DiscreteSystem(
            matrix=a, rhs=f_full[self.free], free=self.free, n_full=self.n_full
        )

    def solve(self, mu) -> FomSolution:
        mu = self._check_mu(mu)
        ds = self.assemble(mu)
        values = solve_discrete(ds, context=f"advdiff9d at mu={mu.tolist()}")
        return FomSolution(mu=mu, values=values)


def assemble_advdiff_supg(
    mesh: Mesh,
    velocity: VelocityField,
    mu,
    source_subdomain: int = 5,
    source_value: float = 1.0,
) -> DiscreteSystem:
    """One-shot assembly; build a SupgAssembler directly for parameter sweeps."""
    asm = SupgAssembler(mesh, velocity, source_subdomain, source_value)
    return asm.assemble(mu)
