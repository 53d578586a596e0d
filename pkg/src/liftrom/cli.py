"""Command-line front end.

    liftrom simulate      --config run.toml [--out DIR]
    liftrom reduce        --config run.toml [--out DIR]
    liftrom simulate-rom  (--artifacts DIR | --config run.toml) [--out DIR]
    liftrom experiment    {fhn,tubular} [--config run.toml] [--out DIR]
    liftrom verify        [--config run.toml]

Exit codes: 0 success, 1 configuration or input error, 2 numerical failure.
``--threads k`` caps the BLAS/OpenMP pool; it is applied before numpy loads.
The log level comes from ``LIFTROM_LOG`` (error, info or debug).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

__all__ = ["main", "build_parser"]

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 1, 2
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")
_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}

log = logging.getLogger("liftrom")


class CLIError(Exception):
    """Bad command-line input; reported with exit code 1."""


def build_parser():
    p = argparse.ArgumentParser(prog="liftrom",
                                description="Lifting-based POD reduced-order models.")
    p.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread count")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="TOML or JSON run file")
        sp.add_argument("--out", default=None, help="output directory")
        sp.add_argument("--threads", type=int, default=argparse.SUPPRESS,
                        help="BLAS/OpenMP thread count")

    common(sub.add_parser("simulate", help="simulate the configured full-order form"))
    common(sub.add_parser("reduce", help="build a basis and reduced operators"))
    sr = sub.add_parser("simulate-rom", help="simulate a reduced model")
    common(sr, config_required=False)
    sr.add_argument("--artifacts", default=None, help="output directory of a reduce run")
    sr.add_argument("--reference", default=None,
                    help="trajectory.csv of a full-order run to compare against")
    ex = sub.add_parser("experiment", help="run a benchmark sweep and write its CSVs")
    ex.add_argument("name", choices=("fhn", "tubular"))
    common(ex, config_required=False)
    common(sub.add_parser("verify", help="run the invariant suite on small instances"),
           config_required=False)
    return p


def _apply_threads(k):
    if k is None:
        return
    if k < 1:
        raise CLIError("--threads must be a positive integer")
    for var in _THREAD_VARS:
        os.environ[var] = str(k)


def _setup_logging():
    level = os.environ.get("LIFTROM_LOG", "error").lower()
    if level not in _LOG_LEVELS:
        raise CLIError(f"LIFTROM_LOG must be one of {sorted(_LOG_LEVELS)}, got {level!r}")
    if not log.handlers:
        h = logging.StreamHandler(sys.stderr)
        h.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
        log.addHandler(h)
    log.setLevel(_LOG_LEVELS[level])


def _out_dir(args, rc=None, default="liftrom-out"):
    out = Path(args.out or (rc.out if rc is not None and rc.out else default))
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CLIError(f"cannot create output directory {out}: {exc}") from exc
    if not os.access(out, os.W_OK):
        raise CLIError(f"output directory {out} is not writable")
    return out


def _manifest(rc, command, **extra):
    from . import __version__
    return dict({"command": command, "version": __version__, "model": rc.model,
                 "form": rc.form, "reduction": rc.reduction, "config": rc.to_mapping(),
                 "config_hash": rc.hash()}, **extra)


def cmd_simulate(args):
    from .reduction.io import write_artifacts
    from .run import load_run_config, simulate_full

    rc = load_run_config(args.config)
    out = _out_dir(args, rc)
    traj = simulate_full(rc)
    traj.to_csv(out / "trajectory.csv")
    write_artifacts(out, _manifest(rc, "simulate", n_t=len(traj.t), state_dim=traj.layout.dim,
                                   layout=traj.layout.to_json(),
                                   trajectory="trajectory.csv"))
    print(f"wrote {out / 'trajectory.csv'} ({len(traj.t)} x {traj.layout.dim})")
    return EXIT_OK


def cmd_reduce(args):
    from .run import load_run_config, reduce_model, save_reduction

    rc = load_run_config(args.config)
    out = _out_dir(args, rc)
    red, _, _ = reduce_model(rc)
    manifest = save_reduction(rc, red, out)
    print(f"wrote reduced model of dimension {manifest['dimension']} to {out}")
    return EXIT_OK


def cmd_simulate_rom(args):
    from .bench import avg_rel_state_error
    from .reduction.io import write_artifacts
    from .run import load_reduction, load_run_config, reduce_model, simulate_reduced
    from .systems import Trajectory

    if args.artifacts:
        try:
            rc, red, _ = load_reduction(args.artifacts)
        except (OSError, KeyError) as exc:
            raise CLIError(f"cannot read artifacts in {args.artifacts}: {exc}") from exc
    elif args.config:
        rc = load_run_config(args.config)
        red, _, _ = reduce_model(rc)
    else:
        raise CLIError("simulate-rom needs --artifacts or --config")
    out = _out_dir(args, rc)
    traj, tr = simulate_reduced(rc, red)
    traj.to_csv(out / "trajectory.csv")
    tr.to_csv(out / "reduced_trajectory.csv")
    extra = {"n_t": len(traj.t), "dimension": int(red.dim),
             "r": {k: int(v) for k, v in red.sizes.items()}, "trajectory": "trajectory.csv",
             "reduced_trajectory": "reduced_trajectory.csv"}
    if args.reference:
        try:
            ref = Trajectory.from_csv(args.reference)
        except (OSError, ValueError) as exc:
            raise CLIError(f"cannot read reference {args.reference}: {exc}") from exc
        # auxiliary variables are not part of the error metric
        orig = ("v", "w") if rc.model == "fhn" else ("psi", "theta")
        names = [k for k in orig if k in ref.layout and k in traj.layout]
        if not names:
            raise CLIError(f"reference {args.reference} holds none of {orig}")
        extra["error"] = avg_rel_state_error(ref.restrict(names), traj.restrict(names))
        print(f"average relative error {extra['error']:.3e}")
    write_artifacts(out, _manifest(rc, "simulate-rom", **extra))
    print(f"wrote {out / 'trajectory.csv'}")
    return EXIT_OK


def cmd_experiment(args):
    from .bench import run_fhn_experiment, run_tubular_experiment, write_results
    from .models import FHNConfig, TubularConfig
    from .reduction.io import dump_json
    from .run import experiment_settings, load_run_config, run_config_from_mapping

    if args.config:
        rc = load_run_config(args.config)
        if rc.model != args.name:
            raise CLIError(f"config is for model {rc.model!r}, not {args.name!r}")
    else:
        rc = run_config_from_mapping({"model": args.name})
    out = _out_dir(args, rc, default=f"liftrom-{args.name}")
    st = experiment_settings(rc.model, rc.experiment)
    if args.name == "fhn":
        result = run_fhn_experiment(rc.params or FHNConfig(), st)
    else:
        result = run_tubular_experiment(rc.params or TubularConfig(), st)
    files = write_results(result, out)
    manifest = _manifest(rc, "experiment", experiment=args.name, files=files)
    if result.extra:
        manifest["extra"] = result.extra
    dump_json(manifest, out / "manifest.json")
    print(f"wrote {len(files)} CSV files to {out}")
    return EXIT_OK


def cmd_verify(args):
    from .run import load_run_config
    from .verify import run_invariants

    seed = load_run_config(args.config).seed if args.config else 0
    results = run_invariants(seed=seed)
    for res in results:
        print(f"{'PASS' if res.ok else 'FAIL'}  {res.name}: {res.detail}")
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} invariants hold")
    return EXIT_OK if failed == 0 else EXIT_NUMERICAL


_COMMANDS = {"simulate": cmd_simulate, "reduce": cmd_reduce, "simulate-rom": cmd_simulate_rom,
             "experiment": cmd_experiment, "verify": cmd_verify}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _apply_threads(getattr(args, "threads", None))
        _setup_logging()
        import numpy as np

        from .integrate import IntegrationError
        from .models import ConfigError, DomainError
        from .tensor import RankError
    except CLIError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    config_errors = (CLIError, ConfigError, RankError, MemoryError)
    numerical_errors = (IntegrationError, DomainError, FloatingPointError,
                        np.linalg.LinAlgError)
    try:
        return _COMMANDS[args.command](args)
    except numerical_errors as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except config_errors as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
