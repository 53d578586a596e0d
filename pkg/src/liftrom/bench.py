"""Error metrics, quantities of interest and the two benchmark pipelines.

Both pipelines follow the same recipe: simulate the FOM on the sampling
grid, lift its trajectory exactly to the auxiliary variables, train POD
bases on the training window, build every ROM of the sweep, simulate it on
the full grid and record the averaged relative error in the original
variables. ROMs that fail to integrate (blow-up, domain violation) are
recorded with error NaN.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .integrate import IntegrationError, integrate_ode
from .models import (QBDAE_VARS, QUARTIC_VARS, DomainError, FHNConfig, TubularConfig,
                     build_fhn_fom, build_fhn_lifted_qb, build_tubular_fom,
                     build_tubular_qbdae, build_tubular_quartic, fhn_initial_state, fhn_input,
                     tubular_aux, tubular_initial_state, tubular_input)
from .reduction import (BlockBasis, build_pod_deim_rom, collect_snapshots, compute_pod_basis,
                        deim_build, nonlinear_snapshots, project_qb, project_qbdae,
                        project_quartic)
from .systems import Layout, Trajectory
from .tensor import RankError

__all__ = ["avg_rel_state_error", "QoISeries", "extract_qoi", "regime_amplitude",
           "ErrorRecord", "ErrorReport", "lift_trajectory", "simulate_rom", "FHNExperiment",
           "TubularExperiment", "ExperimentResult", "run_fhn_experiment",
           "run_tubular_experiment", "write_results"]

log = logging.getLogger("liftrom")

REFERENCE = {"scheme": "radau", "rtol": 1e-10, "atol": 1e-12}
ROM_INTEGRATOR = {"scheme": "bdf", "rtol": 1e-8, "atol": 1e-10}
_ROM_FAILURES = (IntegrationError, DomainError, FloatingPointError, np.linalg.LinAlgError)


# metrics ------------------------------------------------------------------

def avg_rel_state_error(fom: Trajectory, rom: Trajectory, names=None):
    """``(1/n_t) sum_i ||x(t_i) - x_rom(t_i)|| / ||x(t_i)||`` over ``names``.

    ``names`` defaults to the variables of ``fom``; both trajectories must
    carry them and share the time grid. Samples where the reference state
    vanishes (e.g. a zero initial condition) are left out of the average.
    """
    if fom.t.shape != rom.t.shape or not np.allclose(fom.t, rom.t, rtol=0, atol=1e-12):
        raise ValueError("trajectories live on different time grids")
    names = fom.layout.names if names is None else list(names)
    X = np.vstack([fom.var(k) for k in names])
    Y = np.vstack([rom.var(k) for k in names])
    ref = np.linalg.norm(X, axis=0)
    keep = ref > 0
    if not keep.any():
        raise ValueError("reference trajectory is identically zero")
    return float(np.mean(np.linalg.norm(X - Y, axis=0)[keep] / ref[keep]))


@dataclass
class QoISeries:
    t: np.ndarray
    values: np.ndarray
    label: str


_QOI = {"theta(1,t)": ("theta", -1), "v(0,t)": ("v", 0), "w(0,t)": ("w", 0),
        "psi(1,t)": ("psi", -1)}


def extract_qoi(traj: Trajectory, which):
    """Boundary-node series ``theta(1,t)``, ``v(0,t)``, ``w(0,t)`` or ``psi(1,t)``."""
    if which not in _QOI:
        raise KeyError(f"unknown quantity of interest {which!r}; choose from {sorted(_QOI)}")
    name, node = _QOI[which]
    if name not in traj.layout:
        raise KeyError(f"trajectory has no variable {name!r}")
    return QoISeries(traj.t.copy(), traj.var(name)[node].copy(), which)


def regime_amplitude(series: QoISeries, window=5.0):
    """Half peak-to-peak over the final ``window`` seconds, relative to the mean."""
    keep = series.t >= series.t[-1] - window
    v = series.values[keep]
    return float(0.5 * np.ptp(v) / abs(np.mean(v)))


# reports ------------------------------------------------------------------

@dataclass
class ErrorRecord:
    model: str
    method: str
    r1: int
    r2: object = ""
    r_deim: object = ""
    error: float = float("nan")
    offline: float = 0.0
    online: float = 0.0

    def key(self):
        return (self.model, self.method, str(self.r2), str(self.r_deim), self.r1)


@dataclass
class ErrorReport:
    records: list = field(default_factory=list)

    def add(self, rec):
        self.records.append(rec)

    def sorted(self):
        return sorted(self.records, key=ErrorRecord.key)

    def select(self, method, **match):
        out = [r for r in self.sorted() if r.method == method]
        for k, v in match.items():
            out = [r for r in out if getattr(r, k) == v]
        return out

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["model", "method", "r1", "r2", "r_deim", "error"])
            for r in self.sorted():
                w.writerow([r.model, r.method, r.r1, r.r2, r.r_deim, _fmt(r.error)])


def _fmt(x):
    return "nan" if not np.isfinite(x) else repr(float(x))


# pipeline pieces ----------------------------------------------------------

def lift_trajectory(traj: Trajectory, kind, gamma=25.0):
    """Append the auxiliary variables (evaluated from their definitions)."""
    if kind == "fhn":
        v = traj.var("v")
        blocks = [v, traj.var("w"), v * v]
        names = ("v", "w", "z")
    else:
        names = QUARTIC_VARS if kind == "tubular-quartic" else QBDAE_VARS
        aux = tubular_aux(traj.var("psi"), traj.var("theta"), gamma)
        blocks = [traj.var("psi"), traj.var("theta")] + [aux[k] for k in names[2:]]
    n = traj.layout.size(traj.layout.names[0])
    return Trajectory(traj.t, np.vstack(blocks), Layout.uniform(names, n))


def simulate_rom(rom, xr0, t, u, lift, layout, integrator=None):
    """Simulate a ROM and lift to full coordinates; ``None`` on failure."""
    opts = dict(ROM_INTEGRATOR, **(integrator or {}))
    try:
        with np.errstate(over="raise", invalid="raise"):
            tr = integrate_ode(rom, xr0, t, u, **opts)
    except _ROM_FAILURES as exc:
        log.info("ROM failed: %s", exc)
        return None
    X = lift(tr.states)
    return Trajectory(t, X[:layout.dim], layout)


def compute_sigma(X):
    return np.linalg.svd(X, compute_uv=False)


@dataclass
class ExperimentResult:
    report: ErrorReport
    qois: dict
    sigma: dict
    extra: dict = field(default_factory=dict)


@dataclass
class FHNExperiment:
    """Sweep settings: ``r`` per variable; QB-POD has ``3r`` and POD-DEIM ``2r`` states."""

    n_t: int = 150
    n_train: int = 100
    r_values: tuple = (1, 2, 3, 4, 5, 6, 8, 10, 12, 15, 20, 25, 30)
    r_deim: tuple = (5, 10, 20, "r")
    headline_r: int = 3
    qb_mass: str = "diag"


def _rom_sweep_point(report, rec, build, simulate, reference, names):
    t0 = time.perf_counter()
    try:
        rom = build()
    except (RankError, MemoryError) as exc:
        log.info("skipping %s %s: %s", rec.method, rec.r1, exc)
        return None
    t1 = time.perf_counter()
    tr = simulate(rom)
    t2 = time.perf_counter()
    rec.offline, rec.online = t1 - t0, t2 - t1
    if tr is not None:
        rec.error = avg_rel_state_error(reference, tr, names)
    report.add(rec)
    return tr


def run_fhn_experiment(cfg: FHNConfig = None, settings: FHNExperiment = None):
    """QB-POD versus POD-DEIM on the FitzHugh-Nagumo benchmark."""
    cfg = cfg or FHNConfig()
    st = settings or FHNExperiment()
    t = np.linspace(0.0, cfg.t_f, st.n_t)
    u = fhn_input()
    fom = build_fhn_fom(cfg)
    log.info("FHN reference simulation (n=%d)", cfg.n)
    ref = integrate_ode(fom, fhn_initial_state(cfg), t, u, **REFERENCE)
    lifted_traj = lift_trajectory(ref, "fhn")
    S3 = collect_snapshots(lifted_traj, count=st.n_train)
    sigma = {k: compute_sigma(S3[k]) for k in ("v", "w", "z")}
    S2 = collect_snapshots(ref, count=st.n_train)
    F = nonlinear_snapshots(fom, ref, count=st.n_train)
    sigma["f"] = compute_sigma(F)
    qb = build_fhn_lifted_qb(cfg, uniform_mass=(st.qb_mass == "uniform"))

    report = ErrorReport()
    names = ("v", "w")
    qois = {"fom": {q: extract_qoi(ref, q) for q in ("v(0,t)", "w(0,t)")}}
    for r in st.r_values:
        def build_qb(r=r):
            return project_qb(qb, compute_pod_basis(S3, r).block())

        def sim_qb(rom):
            return simulate_rom(rom, np.zeros(rom.dim), t, u, rom.lift, lifted_traj.layout)

        tr = _rom_sweep_point(report, ErrorRecord("fhn", "qb-pod", 3 * r), build_qb, sim_qb,
                              ref, names)
        if r == st.headline_r and tr is not None:
            qois["qb-pod"] = {q: extract_qoi(tr, q) for q in ("v(0,t)", "w(0,t)")}
        for rd in st.r_deim:
            rd_val = r if rd == "r" else int(rd)

            def build_deim(r=r, rd_val=rd_val):
                return build_pod_deim_rom(fom, compute_pod_basis(S2, r).block(),
                                          deim_build(F, rd_val))

            def sim_general(rom):
                return simulate_rom(rom, np.zeros(rom.dim), t, u, rom.lift, ref.layout)

            _rom_sweep_point(report, ErrorRecord("fhn", "pod-deim", 2 * r, "", str(rd)),
                             build_deim, sim_general, ref, names)
    return ExperimentResult(report, qois, sigma)


@dataclass
class TubularExperiment:
    """Sweep settings for the tubular reactor.

    ``r_values`` are per-variable sizes: quartic and QB-DAE ROMs use
    ``r1 = 5r``, POD and POD-DEIM use ``2r``. ``r2_values`` are total
    constrained sizes split equally over ``w4, w5, w6`` (``"I"`` keeps
    ``V2`` the identity). ``headline`` is ``(r1, r2)``.
    """

    damkohler: tuple = (0.162, 0.167)
    sweep_damkohler: float = 0.167
    dt: float = 0.01
    n_t: int = 3000
    t_train: float = 20.0
    r_values: tuple = (2, 3, 4, 5, 6, 8, 10, 12)
    pod_r_values: tuple = (2, 4, 6, 8, 10, 12, 16, 20, 24)
    r2_values: tuple = (12, 15, 18, "I")
    r_deim: tuple = (10, 14, 16, 20, "r")
    headline: tuple = (30, 9)


def _split(total, names):
    base, extra = divmod(int(total), len(names))
    return {k: base + (1 if i < extra else 0) for i, k in enumerate(names)}


def _tubular_case(cfg, st):
    t = st.dt * np.arange(st.n_t)
    fom = build_tubular_fom(cfg)
    x0 = tubular_initial_state(cfg)
    ref = integrate_ode(fom, x0, t, tubular_input(), **REFERENCE)
    lifted = lift_trajectory(ref, "tubular-qbdae", cfg.gamma)
    S = collect_snapshots(lifted, t_end=st.t_train)
    return t, fom, x0, ref, lifted, S


def _qbdae_rom(system, S, r1, r2):
    V1 = compute_pod_basis(S.__class__(S.t, {k: S[k] for k in QUARTIC_VARS},
                                       S.layout.sub(QUARTIC_VARS)),
                           _split(r1, QUARTIC_VARS)).block(QUARTIC_VARS)
    w = ("w4", "w5", "w6")
    if r2 == "I":
        V2 = BlockBasis.identity(S.layout.sub(w))
    else:
        V2 = compute_pod_basis(S.__class__(S.t, {k: S[k] for k in w}, S.layout.sub(w)),
                               _split(r2, w)).block(w)
    return project_qbdae(system, V1, V2)


def run_tubular_experiment(cfg: TubularConfig = None, settings: TubularExperiment = None):
    """Quartic, QB-DAE, POD and POD-DEIM ROMs of the tubular reactor."""
    base = cfg or TubularConfig()
    st = settings or TubularExperiment()
    u = tubular_input()
    report = ErrorReport()
    qois, sigma, extra = {}, {}, {"amplitude": {}}
    orig = ("psi", "theta")
    for D in st.damkohler:
        cfg = _replace(base, damkohler=float(D))
        tag = f"D{D:g}"
        log.info("tubular reference simulation %s", tag)
        t, fom, x0, ref, lifted, S = _tubular_case(cfg, st)
        q_ref = extract_qoi(ref, "theta(1,t)")
        qois[f"fom_{tag}"] = q_ref
        extra["amplitude"][tag] = regime_amplitude(q_ref)
        for k in QBDAE_VARS:
            sigma[f"{k}_{tag}"] = compute_sigma(S[k])
        qbdae = build_tubular_qbdae(cfg)
        xq = lifted.states[:5 * cfg.n, 0]
        r1, r2 = st.headline

        def sim_dae(rom):
            return simulate_rom(rom, rom.basis1.project(xq), t, u,
                                lambda X, rom=rom: rom.lift(X), lifted.layout)

        tr = _rom_sweep_point(report, ErrorRecord(f"tubular_{tag}", "qbdae", r1, r2),
                              lambda: _qbdae_rom(qbdae, S, r1, r2), sim_dae, ref, orig)
        if tr is not None:
            qois[f"qbdae_{tag}"] = extract_qoi(tr, "theta(1,t)")
        if D != st.sweep_damkohler:
            continue
        quartic = build_tubular_quartic(cfg)
        Sq = S.__class__(S.t, {k: S[k] for k in QUARTIC_VARS}, S.layout.sub(QUARTIC_VARS))
        q_layout = lifted.layout.sub(QUARTIC_VARS)
        for r in st.r_values:
            def build_q(r=r):
                return project_quartic(quartic, compute_pod_basis(Sq, r).block())

            def sim_q(rom):
                return simulate_rom(rom, rom.basis.project(xq), t, u, rom.lift, q_layout)

            _rom_sweep_point(report, ErrorRecord(f"tubular_{tag}", "quartic", 5 * r),
                             build_q, sim_q, ref, orig)
            for r2 in st.r2_values:
                _rom_sweep_point(report,
                                 ErrorRecord(f"tubular_{tag}", "qbdae", 5 * r,
                                             "full" if r2 == "I" else int(r2)),
                                 lambda r=r, r2=r2: _qbdae_rom(qbdae, S, 5 * r, r2), sim_dae,
                                 ref, orig)
        S2 = collect_snapshots(ref, t_end=st.t_train)
        F = nonlinear_snapshots(fom, ref, t_end=st.t_train)
        sigma[f"f_{tag}"] = compute_sigma(F)

        def sim_general(rom):
            return simulate_rom(rom, rom.basis.project(x0), t, u, rom.lift, ref.layout)

        for r in st.pod_r_values:
            _rom_sweep_point(report, ErrorRecord(f"tubular_{tag}", "pod", 2 * r),
                             lambda r=r: build_pod_deim_rom(fom,
                                                            compute_pod_basis(S2, r).block()),
                             sim_general, ref, orig)
            for rd in st.r_deim:
                rd_val = r if rd == "r" else int(rd)
                _rom_sweep_point(
                    report, ErrorRecord(f"tubular_{tag}", "pod-deim", 2 * r, "", str(rd)),
                    lambda r=r, rd_val=rd_val: build_pod_deim_rom(
                        fom, compute_pod_basis(S2, r).block(), deim_build(F, rd_val)),
                    sim_general, ref, orig)
    return ExperimentResult(report, qois, sigma, extra)


def _replace(cfg, **changes):
    from dataclasses import replace
    return replace(cfg, **changes)


def write_results(result: ExperimentResult, out_dir):
    """``errors.csv``, ``qoi_<label>.csv`` and ``sigma_<var>.csv`` in ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    result.report.write_csv(out / "errors.csv")
    written = ["errors.csv"]
    for label, q in _flatten_qois(result.qois):
        name = f"qoi_{label}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "value"])
            for ti, vi in zip(q.t, q.values):
                w.writerow([repr(float(ti)), repr(float(vi))])
        written.append(name)
    for var, s in sorted(result.sigma.items()):
        name = f"sigma_{var}.csv"
        with open(out / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["index", "sigma", "sigma_rel"])
            s0 = s[0] if len(s) and s[0] > 0 else 1.0
            for i, si in enumerate(s, start=1):
                w.writerow([i, repr(float(si)), repr(float(si / s0))])
        written.append(name)
    return written


def _flatten_qois(qois):
    items = []
    for key, val in sorted(qois.items()):
        if isinstance(val, QoISeries):
            items.append((_clean(f"{key}_{val.label}"), val))
        else:
            for sub, q in sorted(val.items()):
                items.append((_clean(f"{key}_{sub}"), q))
    return items


def _clean(label):
    return label.replace("(", "_").replace(")", "").replace(",", "_").replace(".", "p")
