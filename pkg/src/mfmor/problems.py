"""Benchmark problems: meshes, full-order models, and ROM factories.

A *model* exposes the small protocol the drivers rely on:

    n_dofs           full nodal dimension
    free             unconstrained dof indices
    solve(mu)        full nodal solution vector
    rom(basis)       object with solve_coeffs(mu) and reduced_operator(mu)

so the multi-fidelity loop never needs to know whether the operator has an
affine parameter split.
"""

from __future__ import annotations

import logging
from functools import cached_property

import numpy as np

from .exceptions import ConfigurationError
from .fem import (
    AffineSystem,
    SupgAssembler,
    assemble_heat_affine,
    solve_fom,
    solve_potential_flow,
)
from .mesh import Mesh, build_unit_square_mesh
from .params import ParameterGrid, grid_1d, lhs, split_train_val, tensor_grid
from .rom import project_affine, project_operator, solve_dense_checked

logger = logging.getLogger(__name__)


class _AffineRom:
    def __init__(self, rsys, free):
        self._rsys = rsys
        self._free = free

    @property
    def rank(self) -> int:
        return self._rsys.rank

    def solve_coeffs(self, mu) -> np.ndarray:
        return self._rsys.solve(mu).coeffs

    def reduced_operator(self, mu):
        return self._rsys.assemble(mu)

    def truncated(self, rank):
        return _AffineRom(self._rsys.truncated(rank), self._free)


class _ProjectedRom:
    """Per-parameter projection for operators without an affine split."""

    def __init__(self, assembler, phi_free):
        self._assembler = assembler
        self._phi = phi_free

    @property
    def rank(self) -> int:
        return self._phi.shape[1]

    def solve_coeffs(self, mu) -> np.ndarray:
        ar, fr = self.reduced_operator(mu)
        return solve_dense_checked(ar, fr, context=f"rom at mu={list(np.ravel(mu))}")

    def reduced_operator(self, mu):
        ds = self._assembler.assemble(mu)
        return project_operator(ds.matrix, ds.rhs, self._phi)

    def truncated(self, rank):
        return _ProjectedRom(self._assembler, self._phi[:, :rank])


class AffineFemModel:
    """Full-order model with a precomputed affine parameter split."""

    def __init__(self, mesh: Mesh, system: AffineSystem, name: str = ""):
        self.mesh = mesh
        self.system = system
        self.name = name or system.name

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_nodes

    @property
    def free(self) -> np.ndarray:
        return self.system.free

    def solve(self, mu) -> np.ndarray:
        return solve_fom(self.system, mu).values

    def rom(self, basis) -> _AffineRom:
        return _AffineRom(project_affine(self.system, basis), self.system.free)


class SupgFemModel:
    """Full-order advection-diffusion model; operators are rebuilt per mu."""

    def __init__(self, mesh: Mesh, assembler: SupgAssembler, name: str = "advdiff9d"):
        self.mesh = mesh
        self.assembler = assembler
        self.name = name

    @property
    def n_dofs(self) -> int:
        return self.mesh.n_nodes

    @property
    def free(self) -> np.ndarray:
        return self.assembler.free

    def solve(self, mu) -> np.ndarray:
        return self.assembler.solve(mu).values

    def rom(self, basis) -> _ProjectedRom:
        phi = basis.columns if hasattr(basis, "columns") else np.asarray(basis)
        if phi.shape[0] == self.n_dofs:
            phi = phi[self.free]
        elif phi.shape[0] != len(self.free):
            raise ConfigurationError(
                f"basis rows {phi.shape[0]} match neither full ({self.n_dofs}) "
                f"nor free ({len(self.free)}) dimension"
            )
        return _ProjectedRom(self.assembler, phi)


class HeatConduction:
    """Two-parameter diffusion benchmark on the unit square.

    mu_1 scales the conductivity of the centered block, mu_2 the inward flux
    on the base edge; the top edge is held at zero.  At mu = (1, 1) the exact
    solution is u(x, y) = 1 - y.
    """

    name = "heat2d"
    dim = 2
    default_box = ((0.1, 10.0), (-1.0, 1.0))

    def __init__(
        self,
        fine: tuple[int, int] = (28, 28),
        coarse: tuple[int, int] = (8, 8),
        block_side: float = 0.5,
    ):
        self.fine_resolution = tuple(fine)
        self.coarse_resolution = tuple(coarse)
        self.block_side = block_side

    def _build(self, resolution) -> AffineFemModel:
        mesh = build_unit_square_mesh(
            resolution[0], resolution[1], "heat2d", block_side=self.block_side
        )
        return AffineFemModel(mesh, assemble_heat_affine(mesh))

    @cached_property
    def fine_model(self) -> AffineFemModel:
        return self._build(self.fine_resolution)

    @cached_property
    def coarse_model(self) -> AffineFemModel:
        return self._build(self.coarse_resolution)

    def default_grid(
        self, n_mu1: int = 50, n_mu2: int = 41, n_val: int = 50, seed: int = 0
    ) -> ParameterGrid:
        """Log-spaced conductivity axis times uniform flux axis, with a
        seeded validation split."""
        (lo1, hi1), (lo2, hi2) = self.default_box
        grid = tensor_grid(
            [grid_1d("log", lo1, hi1, n_mu1), grid_1d("uniform", lo2, hi2, n_mu2)],
            generators=("log", "uniform"),
        )
        return split_train_val(grid, n_val=n_val, seed=seed)


class AdvectionDiffusion:
    """Nine-parameter advection-diffusion benchmark on a 3x3 checkerboard.

    The advection field is a Darcy flow driven left to right with reduced
    permeability in the center cell; mu_k is the diffusivity of subdomain k.
    A unit source sits on the center cell; the inlet is held at zero.
    """

    name = "advdiff9d"
    dim = 9
    default_box = ((0.01, 10.0),) * 9

    def __init__(
        self,
        fine: tuple[int, int] = (57, 57),
        coarse: tuple[int, int] = (24, 24),
        permeability_low: float = 0.01,
        inlet_flux: float = 1.0,
        source_value: float = 1.0,
        source_subdomain: int = 5,
    ):
        self.fine_resolution = tuple(fine)
        self.coarse_resolution = tuple(coarse)
        self.permeability_low = permeability_low
        self.inlet_flux = inlet_flux
        self.source_value = source_value
        self.source_subdomain = source_subdomain

    def permeability(self) -> dict[int, float]:
        kappa = {k: 1.0 for k in range(1, 10)}
        kappa[self.source_subdomain] = self.permeability_low
        return kappa

    def _build(self, resolution) -> SupgFemModel:
        mesh = build_unit_square_mesh(resolution[0], resolution[1], "advdiff9d")
        velocity = solve_potential_flow(
            mesh, self.permeability(), inlet_flux=self.inlet_flux
        )
        assembler = SupgAssembler(
            mesh,
            velocity,
            source_subdomain=self.source_subdomain,
            source_value=self.source_value,
        )
        return SupgFemModel(mesh, assembler)

    @cached_property
    def fine_model(self) -> SupgFemModel:
        return self._build(self.fine_resolution)

    @cached_property
    def coarse_model(self) -> SupgFemModel:
        return self._build(self.coarse_resolution)

    def default_grid(
        self,
        n: int = 2500,
        n_val: int = 500,
        seed: int = 0,
        scales: str | None = "log",
    ) -> ParameterGrid:
        """Latin hypercube over the diffusivity box with a seeded split.

        Strata are log-spaced by default: the diffusivity range spans three
        decades and the solution varies most where the diffusivity is small.
        """
        grid = lhs(self.dim, n, self.default_box, seed=seed, scales=scales)
        return split_train_val(grid, n_val=n_val, seed=seed)


PROBLEMS = {"heat2d": HeatConduction, "advdiff9d": AdvectionDiffusion}


def make_problem(name: str, **overrides):
    if name not in PROBLEMS:
        raise ConfigurationError(
            f"unknown problem {name!r}; expected one of {sorted(PROBLEMS)}"
        )
    return PROBLEMS[name](**overrides)
