"""Run configurations and the simulate / reduce / simulate-rom pipelines.

A run file (TOML or JSON) has a fixed key set::

    model = "fhn"              # fhn | tubular
    form = "lifted-qb"         # fom | lifted-qb (fhn) | quartic | qbdae (tubular)
    reduction = "pod"          # none | pod | pod-deim (pod-deim needs form = "fom")
    seed = 0

    [basis]                    # r per variable (int or {var = r}); r2 for the
    r = 3                      # constrained qbdae block (int, table or "I");
    modes = {v = [1, 2, 3]}    # optional explicit 1-based modes; r_deim for DEIM

    [window]                   # training snapshots: t <= t_end, thinned to count
    t_end = 12.0

    [time]                     # output grid: n_t points on [0, t_f], or dt * arange(n_t)
    n_t = 150

    [initial]                  # optional (s, value) CSV profiles of the original
    psi = "psi0.csv"           # variables (v, w or psi, theta); default ICs otherwise

    [integrator]               # full-order runs
    [rom_integrator]           # reduced runs
    [fhn]                      # model parameters (or [tubular])
    [experiment]               # sweep settings for the experiment command
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .bench import (REFERENCE, ROM_INTEGRATOR, FHNExperiment, TubularExperiment,
                    lift_trajectory)
from .integrate import SCHEMES, integrate_ode, solve_qbdae
from .models import (QBDAE_VARS, QUARTIC_VARS, ConfigError, build_fhn_fom, build_fhn_lifted_qb,
                     build_tubular_fom, build_tubular_qbdae, build_tubular_quartic,
                     config_from_mapping, consistent_lift_ic, fhn_initial_state, fhn_input,
                     load_mapping, load_profile, tubular_initial_state, tubular_input)
from .models.config import as_dict
from .reduction import (BlockBasis, DEIMOperator, build_pod_deim_rom, collect_snapshots,
                        compute_pod_basis, deim_build, nonlinear_snapshots, project_qb,
                        project_qbdae, project_quartic)
from .reduction.io import (basis_from_json, config_hash, deim_from_json, dump_json,
                           operators_to_json, read_manifest, write_artifacts)
from .systems import Trajectory

__all__ = ["RunConfig", "load_run_config", "run_config_from_mapping", "time_grid",
           "simulate_full", "reference_run", "reduce_model", "Reduction", "simulate_reduced",
           "load_reduction", "save_reduction", "experiment_settings"]

FORMS = {"fhn": ("fom", "lifted-qb"), "tubular": ("fom", "quartic", "qbdae")}
REDUCTIONS = ("none", "pod", "pod-deim")
_TOP = {"model", "form", "reduction", "seed", "out", "basis", "window", "time", "initial",
        "integrator", "rom_integrator", "fhn", "tubular", "experiment"}
_SECTIONS = {
    "basis": {"r", "r2", "modes", "r_deim"},
    "window": {"t_end", "count"},
    "time": {"n_t", "dt"},
    "initial": {"v", "w", "psi", "theta"},
    "integrator": {"scheme", "rtol", "atol", "dt", "max_step"},
    "rom_integrator": {"scheme", "rtol", "atol", "dt", "max_step"},
}
_DEFAULT_TIME = {"fhn": {"n_t": 150}, "tubular": {"n_t": 3000, "dt": 0.01}}
_W = ("w4", "w5", "w6")


@dataclass(frozen=True)
class RunConfig:
    model: str
    form: str = "fom"
    reduction: str = "none"
    seed: int = 0
    out: str = None
    params: object = None
    basis: dict = field(default_factory=dict)
    window: dict = field(default_factory=dict)
    time: dict = field(default_factory=dict)
    initial: dict = field(default_factory=dict)
    integrator: dict = field(default_factory=dict)
    rom_integrator: dict = field(default_factory=dict)
    experiment: dict = field(default_factory=dict)

    def to_mapping(self):
        """Normalized mapping; loading it back gives an equal config."""
        out = {"model": self.model, "form": self.form, "reduction": self.reduction,
               "seed": self.seed, self.model: as_dict(self.params)}
        for name in ("basis", "window", "time", "initial", "integrator", "rom_integrator",
                     "experiment"):
            val = getattr(self, name)
            if val:
                out[name] = _plain(val)
        return out

    def hash(self):
        return config_hash(self.to_mapping())


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _section(mapping, name):
    sec = mapping.get(name, {})
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    unknown = sorted(set(sec) - _SECTIONS[name])
    if unknown:
        raise ConfigError(f"unknown key(s) in [{name}]: {', '.join(unknown)}")
    return dict(sec)


def _check_int(val, key, allow=()):
    if val in allow:
        return val
    if isinstance(val, bool) or not isinstance(val, int) or val < 1:
        raise ConfigError(f"key {key!r} must be a positive integer, got {val!r}")
    return val


def _check_sizes(val, key, allow=()):
    if isinstance(val, dict):
        return {k: _check_int(v, f"{key}.{k}") for k, v in val.items()}
    return _check_int(val, key, allow)


def _check_integrator(sec, name):
    if "scheme" in sec and sec["scheme"] not in SCHEMES:
        raise ConfigError(f"key '{name}.scheme' must be one of {SCHEMES}, got {sec['scheme']!r}")
    for key in ("rtol", "atol", "dt", "max_step"):
        if key in sec:
            v = sec[key]
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise ConfigError(f"key '{name}.{key}' must be a positive number, got {v!r}")
            sec[key] = float(v)
    return sec


def run_config_from_mapping(mapping):
    """Validate a run mapping; every unknown key or bad value is a ConfigError."""
    if not isinstance(mapping, dict):
        raise ConfigError("run config must be a table")
    unknown = sorted(set(mapping) - _TOP)
    if unknown:
        raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
    model = mapping.get("model")
    if model not in FORMS:
        raise ConfigError(f"key 'model' must be one of {sorted(FORMS)}, got {model!r}")
    other = "tubular" if model == "fhn" else "fhn"
    if other in mapping:
        raise ConfigError(f"section [{other}] does not apply to model {model!r}")
    form = mapping.get("form", "fom")
    if form not in FORMS[model]:
        raise ConfigError(f"key 'form' must be one of {FORMS[model]} for {model}, got {form!r}")
    reduction = mapping.get("reduction", "none")
    if reduction not in REDUCTIONS:
        raise ConfigError(f"key 'reduction' must be one of {REDUCTIONS}, got {reduction!r}")
    if reduction == "pod-deim" and form != "fom":
        raise ConfigError("key 'reduction': pod-deim is only available with form = 'fom'")
    seed = mapping.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"key 'seed' must be an integer, got {seed!r}")
    out = mapping.get("out")
    if out is not None and not isinstance(out, str):
        raise ConfigError(f"key 'out' must be a string, got {out!r}")
    model_sec = mapping.get(model, {})
    if not isinstance(model_sec, dict):
        raise ConfigError(f"[{model}] must be a table")
    params = config_from_mapping(model, model_sec)

    basis = _section(mapping, "basis")
    if "r" in basis:
        basis["r"] = _check_sizes(basis["r"], "r")
    if "r2" in basis:
        if form != "qbdae":
            raise ConfigError("key 'r2' only applies to form = 'qbdae'")
        basis["r2"] = _check_sizes(basis["r2"], "r2", allow=("I",))
    if "r_deim" in basis:
        if reduction != "pod-deim":
            raise ConfigError("key 'r_deim' only applies to reduction = 'pod-deim'")
        basis["r_deim"] = _check_int(basis["r_deim"], "r_deim")
    if "modes" in basis:
        if not isinstance(basis["modes"], dict):
            raise ConfigError("key 'modes' must map variable names to 1-based mode lists")
        for k, v in basis["modes"].items():
            if not isinstance(v, list) or not v:
                raise ConfigError(f"key 'modes.{k}' must be a non-empty list")
            for i in v:
                _check_int(i, f"modes.{k}")
    if reduction != "none" and "r" not in basis:
        raise ConfigError("key 'r' is required in [basis] when reduction is not 'none'")
    if reduction == "pod-deim" and "r_deim" not in basis:
        raise ConfigError("key 'r_deim' is required in [basis] for reduction = 'pod-deim'")

    window = _section(mapping, "window")
    if "t_end" in window:
        v = window["t_end"]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"key 't_end' must be a positive number, got {v!r}")
        window["t_end"] = float(v)
    if "count" in window:
        _check_int(window["count"], "count")
    time = dict(_DEFAULT_TIME[model])
    tsec = _section(mapping, "time")
    if "n_t" in tsec and "dt" not in tsec:
        time.pop("dt", None)
    time.update(tsec)
    _check_int(time["n_t"], "n_t")
    if "dt" in time:
        v = time["dt"]
        if isinstance(v, bool) or not isinstance(v, (int, float)) or v <= 0:
            raise ConfigError(f"key 'dt' must be a positive number, got {v!r}")
        time["dt"] = float(v)
    initial = _section(mapping, "initial")
    allowed = ("v", "w") if model == "fhn" else ("psi", "theta")
    for k, v in initial.items():
        if k not in allowed:
            raise ConfigError(f"key 'initial.{k}' does not apply to model {model!r}")
        if not isinstance(v, str):
            raise ConfigError(f"key 'initial.{k}' must be a CSV path, got {v!r}")
    integ = _check_integrator(_section(mapping, "integrator"), "integrator")
    rom_integ = _check_integrator(_section(mapping, "rom_integrator"), "rom_integrator")
    exp = mapping.get("experiment", {})
    experiment_settings(model, exp)
    return RunConfig(model, form, reduction, seed, out, params, basis, window, time, initial,
                     integ, rom_integ, dict(exp))


def load_run_config(path):
    return run_config_from_mapping(load_mapping(path))


def experiment_settings(model, mapping):
    """Sweep settings for ``model`` with the overrides in ``mapping``."""
    cls = FHNExperiment if model == "fhn" else TubularExperiment
    if not isinstance(mapping, dict):
        raise ConfigError("[experiment] must be a table")
    allowed = {f.name: f for f in fields(cls)}
    unknown = sorted(set(mapping) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) in [experiment]: {', '.join(unknown)}")
    base = cls()
    vals = {}
    for k, v in mapping.items():
        default = getattr(base, k)
        if isinstance(default, tuple):
            if not isinstance(v, list):
                raise ConfigError(f"key 'experiment.{k}' must be a list")
            vals[k] = tuple(v)
        elif isinstance(default, (int, float)) and not isinstance(default, bool):
            if isinstance(v, bool) or not isinstance(v, (int, float)):
                raise ConfigError(f"key 'experiment.{k}' must be a number, got {v!r}")
            vals[k] = type(default)(v)
        else:
            vals[k] = v
    return replace(base, **vals)


# full-order runs ---------------------------------------------------------

def time_grid(rc: RunConfig):
    n_t = rc.time["n_t"]
    if "dt" in rc.time:
        return rc.time["dt"] * np.arange(n_t)
    return np.linspace(0.0, rc.params.t_f, n_t)


def _lift_kind(rc):
    return "fhn" if rc.model == "fhn" else f"tubular-{rc.form}"


def _fom(rc):
    p = rc.params
    prof = {k: load_profile(path, p.n, getattr(p, "l", 1.0)) for k, path in rc.initial.items()}
    if rc.model == "fhn":
        x0 = fhn_initial_state(p)
        for i, k in enumerate(("v", "w")):
            if k in prof:
                x0[i * p.n:(i + 1) * p.n] = prof[k]
        return build_fhn_fom(p), x0, fhn_input()
    x0 = tubular_initial_state(p, prof.get("psi"), prof.get("theta"))
    return build_tubular_fom(p), x0, tubular_input()


def _integrator(rc, rom=False):
    opts = dict(ROM_INTEGRATOR if rom else REFERENCE)
    custom = rc.rom_integrator if rom else rc.integrator
    if "scheme" in custom and custom["scheme"] not in ("radau", "bdf"):
        opts = {}
    opts.update(custom)
    return opts


def simulate_full(rc: RunConfig):
    """Full-order trajectory of the configured form on the output grid."""
    t = time_grid(rc)
    opts = _integrator(rc)
    system, x0, u = _fom(rc)
    if rc.form == "fom":
        return integrate_ode(system, x0, t, u, **opts)
    gamma = getattr(rc.params, "gamma", 25.0)
    xl = consistent_lift_ic(_lift_kind(rc), x0, gamma)
    if rc.form == "lifted-qb":
        return integrate_ode(build_fhn_lifted_qb(rc.params), xl, t, u, **opts)
    if rc.form == "quartic":
        return integrate_ode(build_tubular_quartic(rc.params), xl, t, u, **opts)
    dae = build_tubular_qbdae(rc.params)
    return solve_qbdae(dae, xl[:dae.n1], t, u, **opts)


def reference_run(rc: RunConfig):
    """FOM trajectory and its exact lift to the variables of the configured form."""
    t = time_grid(rc)
    system, x0, u = _fom(rc)
    ref = integrate_ode(system, x0, t, u, **_integrator(rc))
    if rc.form == "fom":
        return ref, ref
    gamma = getattr(rc.params, "gamma", 25.0)
    return ref, lift_trajectory(ref, _lift_kind(rc), gamma)


# reduction ---------------------------------------------------------------

@dataclass
class Reduction:
    rom: object
    basis: BlockBasis
    deim: DEIMOperator = None
    sigma: dict = field(default_factory=dict)
    sizes: dict = field(default_factory=dict)
    n_snapshots: int = 0

    @property
    def dim(self):
        """Total reduced dimension (differential plus constrained for QB-DAEs)."""
        return self.basis.r


def _sizes(spec, names):
    if isinstance(spec, dict):
        missing = [k for k in names if k not in spec]
        extra = sorted(set(spec) - set(names))
        if missing or extra:
            raise ConfigError(f"basis sizes must cover exactly the variables {list(names)}; "
                              f"missing {missing}, unknown {extra}")
        return {k: spec[k] for k in names}
    return {k: spec for k in names}


def _modes(rc, names):
    modes = rc.basis.get("modes", {})
    unknown = sorted(set(modes) - set(_all_vars(rc)))
    if unknown:
        raise ConfigError(f"key 'modes' names unknown variable(s): {', '.join(unknown)}")
    return {k: v for k, v in modes.items() if k in names}


def _all_vars(rc):
    if rc.form == "fom":
        return ("v", "w") if rc.model == "fhn" else ("psi", "theta")
    return {"lifted-qb": ("v", "w", "z"), "quartic": QUARTIC_VARS, "qbdae": QBDAE_VARS}[rc.form]


def _pod(S, names, sizes, modes):
    sub = S.__class__(S.t, {k: S[k] for k in names}, S.layout.sub(names))
    for k, idx in modes.items():
        if len(idx) != sizes[k]:
            raise ConfigError(f"key 'modes.{k}' lists {len(idx)} modes but r for {k!r} "
                              f"is {sizes[k]}")
    return compute_pod_basis(sub, sizes, modes=modes)


def build_reduction(rc: RunConfig, ref: Trajectory, lifted: Trajectory):
    """POD basis, optional DEIM and the Galerkin ROM for the configured form."""
    if rc.reduction == "none":
        raise ConfigError("key 'reduction' must be 'pod' or 'pod-deim' to reduce")
    t_end, count = rc.window.get("t_end"), rc.window.get("count")
    S = collect_snapshots(lifted, t_end=t_end, count=count)
    names = _all_vars(rc)
    deim = None
    if rc.form == "qbdae":
        x1 = QUARTIC_VARS
        sizes = _sizes(rc.basis["r"], x1)
        P1 = _pod(S, x1, sizes, _modes(rc, x1))
        V1 = P1.block(x1)
        sigma = dict(P1.sigma)
        r2 = rc.basis.get("r2", "I")
        if r2 == "I":
            V2 = BlockBasis.identity(S.layout.sub(_W))
            sizes.update({k: S.layout.size(k) for k in _W})
        else:
            s2 = _sizes(r2, _W)
            P2 = _pod(S, _W, s2, _modes(rc, _W))
            V2 = P2.block(_W)
            sigma.update(P2.sigma)
            sizes.update(s2)
        system = build_tubular_qbdae(rc.params)
        rom = project_qbdae(system, V1, V2)
        return Reduction(rom, V1 + V2, None, sigma, sizes, S.n_snapshots)
    sizes = _sizes(rc.basis["r"], names)
    P = _pod(S, names, sizes, _modes(rc, names))
    basis = P.block(names)
    sigma = dict(P.sigma)
    if rc.form == "fom":
        fom = _fom(rc)[0]
        if rc.reduction == "pod-deim":
            F = nonlinear_snapshots(fom, ref, t_end=t_end, count=count)
            deim = deim_build(F, rc.basis["r_deim"])
            sigma["f"] = deim.sigma
        rom = build_pod_deim_rom(fom, basis, deim)
    elif rc.form == "lifted-qb":
        rom = project_qb(build_fhn_lifted_qb(rc.params), basis)
    else:
        rom = project_quartic(build_tubular_quartic(rc.params), basis)
    return Reduction(rom, basis, deim, sigma, sizes, S.n_snapshots)


def reduce_model(rc: RunConfig):
    ref, lifted = reference_run(rc)
    return build_reduction(rc, ref, lifted), ref, lifted


def _reduced_initial_state(rc, red):
    _, x0, _ = _fom(rc)
    if rc.form != "fom":
        x0 = consistent_lift_ic(_lift_kind(rc), x0, getattr(rc.params, "gamma", 25.0))
    if rc.form == "qbdae":
        return red.rom.basis1.project(x0[:red.rom.basis1.n])
    return red.basis.project(x0)


def simulate_reduced(rc: RunConfig, red: Reduction):
    """Reduced trajectory lifted back to the full variables of the form.

    Raises the integrator's errors unchanged (no failure masking here).
    """
    t = time_grid(rc)
    u = _fom(rc)[2]
    xr0 = _reduced_initial_state(rc, red)
    with np.errstate(over="raise", invalid="raise"):
        tr = integrate_ode(red.rom, xr0, t, u, **_integrator(rc, rom=True))
    X = red.rom.lift(tr.states)
    return Trajectory(t, X, red.basis.full_layout), tr


# artifacts ---------------------------------------------------------------

def _digest(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def save_reduction(rc: RunConfig, red: Reduction, out_dir):
    """Basis, operators, DEIM data, spectra and the manifest in ``out_dir``."""
    manifest = {
        "command": "reduce",
        "version": __version__,
        "model": rc.model,
        "form": rc.form,
        "reduction": rc.reduction,
        "r": {k: int(v) for k, v in red.sizes.items()},
        "dimension": int(red.dim),
        "window": {"t_end": rc.window.get("t_end"), "count": rc.window.get("count"),
                   "n_snapshots": int(red.n_snapshots)},
        "config": rc.to_mapping(),
        "config_hash": rc.hash(),
    }
    if red.deim is not None:
        manifest["r_deim"] = int(red.deim.r)
    manifest = write_artifacts(out_dir, manifest, red.basis, red.rom, red.deim, red.sigma)
    manifest["digests"] = {k: _digest(Path(out_dir) / v)
                           for k, v in sorted(manifest["files"].items())}
    dump_json(manifest, Path(out_dir) / "manifest.json")
    return manifest


def load_reduction(art_dir):
    """Rebuild a ROM from a reduce output directory.

    The stored basis (and DEIM data) are reprojected against operators built
    from the recorded model configuration; the result is checked against the
    stored reduced operators.
    """
    art = Path(art_dir)
    manifest = read_manifest(art)
    rc = run_config_from_mapping(manifest["config"])
    basis = basis_from_json(json.loads((art / manifest["files"]["basis"]).read_text()))
    deim = None
    if "deim" in manifest["files"]:
        deim = deim_from_json(json.loads((art / manifest["files"]["deim"]).read_text()))
    if rc.form == "qbdae":
        n1 = len(QUARTIC_VARS)
        V1 = BlockBasis(list(zip(basis.names[:n1], basis.full_sizes[:n1], basis.V[:n1])))
        V2 = BlockBasis(list(zip(basis.names[n1:], basis.full_sizes[n1:], basis.V[n1:])))
        rom = project_qbdae(build_tubular_qbdae(rc.params), V1, V2)
    elif rc.form == "fom":
        rom = build_pod_deim_rom(_fom(rc)[0], basis, deim)
    elif rc.form == "lifted-qb":
        rom = project_qb(build_fhn_lifted_qb(rc.params), basis)
    else:
        rom = project_quartic(build_tubular_quartic(rc.params), basis)
    stored = json.loads((art / manifest["files"]["operators"]).read_text())
    rebuilt = json.loads(json.dumps(operators_to_json(rom)))
    if not _same_tree(stored, rebuilt):
        raise ValueError(f"reduced operators in {art} do not match their manifest")
    red = Reduction(rom, basis, deim, {}, dict(manifest["r"]),
                    manifest["window"]["n_snapshots"])
    return rc, red, manifest


def _same_tree(a, b, rtol=1e-10, atol=1e-13):
    # BLAS may order sums differently for copied arrays, so floats get a tolerance
    if isinstance(a, dict):
        return isinstance(b, dict) and a.keys() == b.keys() and all(
            _same_tree(a[k], b[k], rtol, atol) for k in a)
    if isinstance(a, list):
        return isinstance(b, list) and len(a) == len(b) and all(
            _same_tree(x, y, rtol, atol) for x, y in zip(a, b))
    if isinstance(a, float) or isinstance(b, float):
        return isinstance(b, (int, float)) and bool(np.isclose(a, b, rtol=rtol, atol=atol))
    return a == b
