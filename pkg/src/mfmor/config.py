"""Run configuration: dataclass, INI/JSON loading, validation.

INI layout (JSON mirrors it as nested objects):

    [run]
    problem = heat2d            ; heat2d | advdiff9d
    method = mf                 ; mf | greedy | pod
    sketch = random             ; random | coarse (mf only)
    sketch_size = 2
    points_per_iter = 1
    tol = 1e-6
    max_iter = 200
    seed = 0
    require_val_convergence = false
    diagnostics = false
    timing = true

    [mesh]
    fine_nodes = 895            ; or explicit fine_nx / fine_ny
    coarse_nodes = 62           ; or coarse_nx / coarse_ny

    [parameters]
    kind = default              ; default | tensor | lhs | file
    axis1 = log 0.1 10 50       ; tensor only, one line per dimension
    axis2 = uniform -1 1 41
    n = 2500                    ; lhs only
    scales = linear             ; lhs only: one value or comma list
    file = params.csv           ; file only (expects a role column)
    n_validation = 50
    seed = 0                    ; grid/split seed, separate from run seed

    [problem]
    block_side = 0.5            ; heat2d
    permeability_low = 0.01     ; advdiff9d
    inlet_flux = 1.0
    source_value = 1.0
    mu_bar = 1.0 1.0            ; greedy reference parameter

    [output]
    dir = runs/heat2d
"""

from __future__ import annotations

import configparser
import json
import logging
from dataclasses import dataclass, field, asdict
from pathlib import Path

from .exceptions import ConfigurationError

logger = logging.getLogger(__name__)

METHODS = ("mf", "greedy", "pod")
PARAM_KINDS = ("default", "tensor", "lhs", "file")


@dataclass
class AxisSpec:
    kind: str
    lo: float
    hi: float
    n: int


@dataclass
class RunConfig:
    problem: str = "heat2d"
    method: str = "mf"
    sketch: str = "random"
    sketch_size: int = 2
    points_per_iter: int = 1
    tol: float = 1e-6
    max_iter: int = 200
    seed: int = 0
    require_val_convergence: bool = False
    diagnostics: bool = False
    timing: bool = True

    fine_nx: int | None = None
    fine_ny: int | None = None
    coarse_nx: int | None = None
    coarse_ny: int | None = None
    fine_nodes: int | None = None
    coarse_nodes: int | None = None

    param_kind: str = "default"
    axes: list[AxisSpec] = field(default_factory=list)
    lhs_n: int = 2500
    lhs_scales: str | None = None
    params_file: str | None = None
    n_validation: int | None = None
    params_seed: int = 0

    block_side: float = 0.5
    permeability_low: float = 0.01
    inlet_flux: float = 1.0
    source_value: float = 1.0
    mu_bar: tuple = (1.0, 1.0)

    out_dir: str = "runs/out"

    def validate(self) -> "RunConfig":
        def fail(fieldname, why):
            raise ConfigurationError(f"config field {fieldname!r}: {why}")

        if self.problem not in ("heat2d", "advdiff9d"):
            fail("problem", f"unknown problem {self.problem!r}")
        if self.method not in METHODS:
            fail("method", f"must be one of {METHODS}, got {self.method!r}")
        if self.sketch not in ("random", "coarse"):
            fail("sketch", f"must be 'random' or 'coarse', got {self.sketch!r}")
        for name in ("sketch_size", "points_per_iter", "max_iter"):
            v = getattr(self, name)
            if not isinstance(v, int) or v < 1:
                fail(name, f"must be a positive integer, got {v!r}")
        if not isinstance(self.seed, int) or self.seed < 0:
            fail("seed", f"must be a non-negative integer, got {self.seed!r}")
        if not isinstance(self.params_seed, int) or self.params_seed < 0:
            fail("params_seed", f"must be a non-negative integer, got {self.params_seed!r}")
        if not (isinstance(self.tol, float) and self.tol > 0.0):
            fail("tol", f"must be a positive float, got {self.tol!r}")
        if self.param_kind not in PARAM_KINDS:
            fail("parameters.kind", f"must be one of {PARAM_KINDS}")
        if self.param_kind == "tensor" and not self.axes:
            fail("parameters.axis*", "tensor parameters need at least one axis")
        if self.param_kind == "file" and not self.params_file:
            fail("parameters.file", "file parameters need a path")
        if self.param_kind == "lhs" and self.lhs_n < 2:
            fail("parameters.n", f"need at least 2 points, got {self.lhs_n}")
        if self.n_validation is not None and self.n_validation < 0:
            fail("n_validation", f"must be >= 0, got {self.n_validation}")
        for name in ("fine_nx", "fine_ny", "coarse_nx", "coarse_ny",
                     "fine_nodes", "coarse_nodes"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 2):
                fail(name, f"must be an integer >= 2, got {v!r}")
        if (self.fine_nx is None) != (self.fine_ny is None):
            fail("fine_nx/fine_ny", "give both or neither")
        if (self.coarse_nx is None) != (self.coarse_ny is None):
            fail("coarse_nx/coarse_ny", "give both or neither")
        if not 0.0 < self.block_side < 1.0:
            fail("block_side", f"must lie in (0, 1), got {self.block_side}")
        if self.permeability_low <= 0.0:
            fail("permeability_low", "must be positive")
        if self.method == "greedy" and self.problem != "heat2d":
            fail("method", "greedy needs the affine heat2d problem")
        return self


def _coerce(raw: str):
    """Best-effort scalar parse: bool, int, float, else string."""
    low = raw.strip().lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        return float(raw)
    except ValueError:
        pass
    return raw.strip()


def _parse_axis(value: str) -> AxisSpec:
    parts = value.split()
    if len(parts) != 4:
        raise ConfigurationError(
            f"axis spec must be 'kind lo hi n', got {value!r}"
        )
    kind, lo, hi, n = parts
    try:
        return AxisSpec(kind=kind, lo=float(lo), hi=float(hi), n=int(n))
    except ValueError as exc:
        raise ConfigurationError(f"bad axis spec {value!r}: {exc}") from exc


def config_from_dict(data: dict) -> RunConfig:
    cfg = RunConfig()
    run = data.get("run", {})
    simple_run = {
        "problem", "method", "sketch", "sketch_size", "points_per_iter",
        "tol", "max_iter", "seed", "require_val_convergence", "diagnostics",
        "timing",
    }
    for key, value in run.items():
        if key not in simple_run:
            raise ConfigurationError(f"unknown [run] key {key!r}")
        setattr(cfg, key, float(value) if key == "tol" else value)

    mesh = data.get("mesh", {})
    for key, value in mesh.items():
        if key not in ("fine_nx", "fine_ny", "coarse_nx", "coarse_ny",
                       "fine_nodes", "coarse_nodes"):
            raise ConfigurationError(f"unknown [mesh] key {key!r}")
        setattr(cfg, key, value)

    params = data.get("parameters", {})
    axes = {}
    for key, value in params.items():
        if key.startswith("axis"):
            try:
                idx = int(key[4:])
            except ValueError:
                raise ConfigurationError(f"bad axis key {key!r}") from None
            axes[idx] = value if isinstance(value, AxisSpec) else _parse_axis(value)
        elif key == "kind":
            cfg.param_kind = value
        elif key == "n":
            cfg.lhs_n = value
        elif key == "scales":
            cfg.lhs_scales = value
        elif key == "file":
            cfg.params_file = value
        elif key == "n_validation":
            cfg.n_validation = value
        elif key == "seed":
            cfg.params_seed = value
        else:
            raise ConfigurationError(f"unknown [parameters] key {key!r}")
    if axes:
        cfg.axes = [axes[i] for i in sorted(axes)]
        if cfg.param_kind == "default":
            cfg.param_kind = "tensor"

    prob = data.get("problem", {})
    for key, value in prob.items():
        if key == "mu_bar":
            if isinstance(value, str):
                value = tuple(float(v) for v in value.split())
            else:
                value = tuple(float(v) for v in value)
            cfg.mu_bar = value
        elif key in ("block_side", "permeability_low", "inlet_flux", "source_value"):
            setattr(cfg, key, float(value))
        else:
            raise ConfigurationError(f"unknown [problem] key {key!r}")

    out = data.get("output", {})
    for key, value in out.items():
        if key != "dir":
            raise ConfigurationError(f"unknown [output] key {key!r}")
        cfg.out_dir = value

    known = {"run", "mesh", "parameters", "problem", "output"}
    unknown = set(data) - known
    if unknown:
        raise ConfigurationError(f"unknown config section(s) {sorted(unknown)}")
    return cfg.validate()


def load_config(path: str | Path) -> RunConfig:
    """Load .json or INI-style config; errors carry the offending field."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"config file {path} does not exist")
    if path.suffix == ".json":
        with path.open() as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise ConfigurationError(f"{path}: invalid JSON ({exc})") from exc
        return config_from_dict(data)
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        read = parser.read(path)
    except configparser.Error as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    if not read:
        raise ConfigurationError(f"config file {path} could not be read")
    data: dict = {}
    for section in parser.sections():
        data[section] = {
            key: _coerce(value) if not key.startswith("axis") and key != "mu_bar"
            else value
            for key, value in parser.items(section)
        }
    return config_from_dict(data)


def config_echo(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d["axes"] = [asdict(a) for a in cfg.axes]
    d["mu_bar"] = list(cfg.mu_bar)
    return d
