"""Command line interface.

Exit codes: 0 run converged, 1 numerical/solver failure, 2 loop stalled,
3 max_iter reached, 4 configuration error (including bad usage).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .exceptions import ConfigurationError, DomainError, MfmorError
from .experiments import (
    EXIT_CONFIG,
    EXIT_FAILED,
    EXIT_OK,
    build_grid,
    build_problem,
    gen_params,
    precompute_validation,
    run_compare,
    run_experiment,
    run_trials,
)

logger = logging.getLogger(__name__)


class _Parser(argparse.ArgumentParser):
    """Usage errors map to the configuration exit code, not argparse's 2."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigurationError(message)


def _add_common_overrides(p: argparse.ArgumentParser, *, include_out_dir=True) -> None:
    if include_out_dir:
        p.add_argument("--out-dir", help="override [output] dir")
    p.add_argument("--seed", type=int, help="override [run] seed")
    p.add_argument("--tol", type=float, help="override [run] tol")
    p.add_argument("--points-per-iter", type=int, help="override [run] points_per_iter")
    p.add_argument("--sketch-size", type=int, help="override [run] sketch_size")
    p.add_argument("--max-iter", type=int, help="override [run] max_iter")
    p.add_argument(
        "--no-timing", action="store_true",
        help="write 0.0 in all seconds fields (byte-reproducible outputs)",
    )
    p.add_argument(
        "--diagnostics", action="store_true",
        help="also compute per-rank eps_pod/eps_rom over the training set",
    )
    p.add_argument(
        "--require-val-convergence", action="store_true",
        help="require eps_val < tol in addition to eps_train",
    )


def _apply_overrides(cfg, args):
    if getattr(args, "out_dir", None) is not None:
        cfg.out_dir = args.out_dir
    for name in ("seed", "tol", "points_per_iter", "sketch_size", "max_iter"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    if getattr(args, "no_timing", False):
        cfg.timing = False
    if getattr(args, "diagnostics", False):
        cfg.diagnostics = True
    if getattr(args, "require_val_convergence", False):
        cfg.require_val_convergence = True
    return cfg.validate()


def _cmd_run(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    if args.dry_run:
        problem = build_problem(cfg)
        grid = build_grid(cfg, problem)
        print(f"problem:      {cfg.problem}")
        print(f"method:       {cfg.method}")
        print(f"fine mesh:    {problem.fine_resolution}")
        print(f"coarse mesh:  {problem.coarse_resolution}")
        print(f"train points: {len(grid.train_indices)}")
        print(f"val points:   {len(grid.val_indices)}")
        if cfg.method == "mf":
            print(f"sketch:       {cfg.sketch} (size {cfg.sketch_size})")
            print(f"per iter:     {cfg.points_per_iter}")
        print(f"tol:          {cfg.tol:g}")
        print(f"max_iter:     {cfg.max_iter}")
        print(f"seed:         {cfg.seed}")
        print(f"out dir:      {cfg.out_dir}")
        return EXIT_OK
    code, report, out = run_experiment(
        cfg, validation_cache=args.validation_cache
    )
    print(
        f"{report.status}: {report.n_iterations} iterations, "
        f"{report.n_points} sampled points, basis rank {report.basis.rank}, "
        f"eps_train={report.eps_train:.3e}"
        + (f", eps_val={report.eps_val:.3e}" if report.eps_val == report.eps_val else "")
    )
    print(f"artifacts in {out}")
    return code


def _cmd_compare(args) -> int:
    cfg_a = _apply_overrides(load_config(args.config_a), args)
    cfg_b = _apply_overrides(load_config(args.config_b), args)
    code = run_compare(cfg_a, cfg_b, args.out_dir)
    print(f"comparison written to {args.out_dir}")
    return code


def _cmd_trials(args) -> int:
    cfg = _apply_overrides(load_config(args.config), args)
    code = run_trials(cfg, args.n_trials, args.out_dir)
    print(f"{args.n_trials} trials written to {args.out_dir}")
    return code


def _cmd_gen_params(args) -> int:
    cfg = load_config(args.config)
    return gen_params(cfg, args.out)


def _cmd_precompute_validation(args) -> int:
    cfg = load_config(args.config)
    return precompute_validation(cfg, args.out)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="mfmor",
        description="Iterative multi-fidelity snapshot selection for reduced-order models",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration")
    p_run.add_argument("--config", required=True, help="INI or JSON config file")
    p_run.add_argument("--dry-run", action="store_true",
                       help="validate and describe the run without executing")
    p_run.add_argument("--validation-cache",
                       help="npz file of validation snapshots (created if missing)")
    _add_common_overrides(p_run)
    p_run.set_defaults(func=_cmd_run)

    p_cmp = sub.add_parser("compare", help="run two configurations side by side")
    p_cmp.add_argument("--config-a", required=True)
    p_cmp.add_argument("--config-b", required=True)
    p_cmp.add_argument("--out-dir", required=True)
    _add_common_overrides(p_cmp, include_out_dir=False)
    p_cmp.set_defaults(func=_cmd_compare)

    p_tr = sub.add_parser("trials", help="repeat a run over consecutive seeds")
    p_tr.add_argument("--config", required=True)
    p_tr.add_argument("--n-trials", type=int, required=True)
    p_tr.add_argument("--out-dir", required=True)
    _add_common_overrides(p_tr, include_out_dir=False)
    p_tr.set_defaults(func=_cmd_trials)

    p_gp = sub.add_parser("gen-params", help="write the parameter set as CSV")
    p_gp.add_argument("--config", required=True)
    p_gp.add_argument("--out", required=True)
    p_gp.set_defaults(func=_cmd_gen_params)

    p_pv = sub.add_parser(
        "precompute-validation",
        help="solve the fine model on the validation set and cache it",
    )
    p_pv.add_argument("--config", required=True)
    p_pv.add_argument("--out", required=True)
    p_pv.set_defaults(func=_cmd_precompute_validation)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(
            level=logging.DEBUG if args.verbose else logging.INFO,
            format="%(levelname)s %(name)s: %(message)s",
            stream=sys.stderr,
        )
        return args.func(args)
    except (ConfigurationError, DomainError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MfmorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
