"""Acceptance criteria, one test per criterion.

Each test prints a single ``criterion N: PASS|FAIL`` line with the measured
numbers before asserting, so a run with ``-s`` or the captured log shows the
whole scorecard. Benchmark-size criteria are marked ``slow``; the large
reference runs are shared through module-scoped fixtures.
"""

import json
import time

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from liftrom.bench import (REFERENCE, FHNExperiment, TubularExperiment, run_fhn_experiment,
                           run_tubular_experiment)
from liftrom.cli import main
from liftrom.integrate import integrate_ode, solve_qbdae
from liftrom.models import (FHNConfig, TubularConfig, build_fhn_fom, build_fhn_lifted_qb,
                            build_tubular_fom, build_tubular_qbdae, build_tubular_quartic,
                            consistent_lift_ic, fhn_initial_state, fhn_input, scalar_exact,
                            scalar_lift_ic, scalar_qb_dae, scalar_qb_ode, tubular_initial_state,
                            tubular_input)
from liftrom.reduction import (precompute_substituted_ode, project_qb, project_qbdae,
                               project_quartic)
from liftrom.verify import random_block_basis, run_invariants


def _report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} | {detail}")


def _max_rel(ref, other, names):
    """Largest per-sample relative difference over the listed variables.

    Samples where the reference is exactly zero (the FHN initial state) are
    compared absolutely.
    """
    X = np.vstack([ref.var(k) for k in names])
    Y = np.vstack([other.var(k) for k in names])
    scale = np.linalg.norm(X, axis=0)
    return float((np.linalg.norm(X - Y, axis=0) / np.where(scale > 0, scale, 1.0)).max())


def _rel(a, b):
    return float(np.linalg.norm(np.asarray(a) - b) / max(np.linalg.norm(b), 1e-300))


# ---------------------------------------------------------------- fixtures

@pytest.fixture(scope="module")
def tubular_results():
    return run_tubular_experiment(TubularConfig(), TubularExperiment())


@pytest.fixture(scope="module")
def fhn_results():
    return run_fhn_experiment(FHNConfig(), FHNExperiment())


# ---------------------------------------------------------------- criterion 1

def test_criterion_1_scalar_lifting(capsys):
    start = time.perf_counter()
    t = np.linspace(0.0, 1.0, 21)
    x0 = 0.5
    opts = REFERENCE
    errs = {}
    # zero input against the closed form
    exact = scalar_exact(x0, t)
    ode = integrate_ode(scalar_qb_ode(), scalar_lift_ic(x0, "qb-ode"), t, None, **opts)
    dae = solve_qbdae(scalar_qb_dae(), scalar_lift_ic(x0, "qb-dae")[:1], t, None, **opts)
    errs["ode, u=0"] = np.abs(ode.states[0] / exact - 1).max()
    errs["dae, u=0"] = np.abs(dae.states[0] / exact - 1).max()

    # forced case against an independent explicit solve of x' = x**4 + u
    def u(s):
        return np.array([0.3 * np.sin(3.0 * s)])

    direct = solve_ivp(lambda s, x: x**4 + u(s), (0.0, 1.0), [x0], method="DOP853",
                       t_eval=t, rtol=1e-13, atol=1e-15).y[0]
    ode = integrate_ode(scalar_qb_ode(), scalar_lift_ic(x0, "qb-ode"), t, u, **opts)
    dae = solve_qbdae(scalar_qb_dae(), scalar_lift_ic(x0, "qb-dae")[:1], t, u, **opts)
    errs["ode, forced"] = np.abs(ode.states[0] / direct - 1).max()
    errs["dae, forced"] = np.abs(dae.states[0] / direct - 1).max()
    elapsed = time.perf_counter() - start
    ok = max(errs.values()) <= 1e-6 and elapsed < 1.0
    detail = ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f", {elapsed:.2f} s"
    _report(capsys, 1, ok, detail)
    assert max(errs.values()) <= 1e-6
    assert elapsed < 1.0


# ---------------------------------------------------------------- criterion 2

@pytest.mark.slow
def test_criterion_2_benchmark_lifting(capsys):
    results = {}
    cfg = FHNConfig()
    t = np.linspace(0.0, cfg.t_f, 150)
    x0 = fhn_initial_state(cfg)
    fom = integrate_ode(build_fhn_fom(cfg), x0, t, fhn_input(), **REFERENCE)
    lifted = integrate_ode(build_fhn_lifted_qb(cfg), consistent_lift_ic("fhn", x0), t,
                           fhn_input(), **REFERENCE)
    results["fhn"] = (_max_rel(fom, lifted, ("v", "w")), 1e-6)

    for D, tol in ((0.162, 1e-6), (0.167, 1e-5)):
        tc = TubularConfig(damkohler=D)
        t = 0.01 * np.arange(3000)
        x0 = tubular_initial_state(tc)
        fom = integrate_ode(build_tubular_fom(tc), x0, t, tubular_input(), **REFERENCE)
        xq = consistent_lift_ic("tubular-quartic", x0, tc.gamma)
        quartic = integrate_ode(build_tubular_quartic(tc), xq, t, tubular_input(), **REFERENCE)
        dae = build_tubular_qbdae(tc)
        xd = consistent_lift_ic("tubular-qbdae", x0, tc.gamma)
        qbdae = solve_qbdae(dae, xd[:dae.n1], t, tubular_input(), **REFERENCE)
        # the direct comparison is stricter than a phase-shift-optimal one
        results[f"quartic D={D}"] = (_max_rel(fom, quartic, ("psi", "theta")), tol)
        results[f"qbdae D={D}"] = (_max_rel(fom, qbdae, ("psi", "theta")), tol)
    ok = all(e <= tol for e, tol in results.values())
    _report(capsys, 2, ok, ", ".join(f"{k} {e:.1e} (<= {tol:g})"
                                     for k, (e, tol) in results.items()))
    for k, (e, tol) in results.items():
        assert e <= tol, k


# ---------------------------------------------------------------- criterion 3

def test_criterion_3_projection_identities(capsys, rng):
    worst = {}
    # FHN lifted QB-ODE: order 2
    qb = build_fhn_lifted_qb(FHNConfig(n=40))
    W = random_block_basis(rng, qb.layout, 6)
    rom = project_qb(qb, W)
    worst["fhn k=2"] = max(_rel(rom.H.apply(y), W.project(qb.H.apply(W.lift(y))))
                           for y in rng.standard_normal((100, W.r)))

    # tubular quartic: orders 2, 3, 4
    quartic = build_tubular_quartic(TubularConfig(n=20))
    V = random_block_basis(rng, quartic.layout, 4)
    rq = project_quartic(quartic, V)
    for k in (2, 3, 4):
        if quartic.G[k] is None:
            continue
        worst[f"quartic k={k}"] = max(
            _rel(rq.G[k].apply(y), V.project(quartic.G[k].apply(V.lift(y))))
            for y in rng.standard_normal((100, V.r)))

    # tubular QB-DAE: both quadratic blocks, then the substituted form
    dae = build_tubular_qbdae(TubularConfig(n=20))
    s = dae.structured()
    lay = dae.layout
    V1 = random_block_basis(rng, lay.sub(lay.names[:5]), 4)
    V2 = random_block_basis(rng, lay.sub(lay.names[5:]), 3)
    rd = project_qbdae(dae, V1, V2)
    V12 = V1 + V2
    e1, e2, e_sub = 0.0, 0.0, 0.0
    sub = precompute_substituted_ode(rd)
    for _ in range(100):
        y = rng.standard_normal(V12.r)
        e1 = max(e1, _rel(rd.H1.apply(y), V1.project(s.H1.apply(V12.lift(y)))))
        y1 = y[:rd.n1]
        e2 = max(e2, _rel(rd.H2t.apply(y1), V2.project(s.H2t.apply(V1.lift(y1)))))
        u = rng.standard_normal(rd.n_inputs)
        e_sub = max(e_sub, _rel(sub.rhs(y1, u), rd.rhs(y1, u)))
    worst["qbdae H1"], worst["qbdae H2"], worst["substituted"] = e1, e2, e_sub
    ok = max(worst.values()) <= 1e-12
    _report(capsys, 3, ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items()))
    for k, v in worst.items():
        assert v <= 1e-12, k


# ---------------------------------------------------------------- criterion 4

@pytest.mark.slow
def test_criterion_4_hopf_regimes(capsys, tubular_results):
    amp = tubular_results.extra["amplitude"]
    stable, cycle = amp["D0.162"], amp["D0.167"]
    ok = stable < 1e-3 and cycle > 1e-2
    _report(capsys, 4, ok, f"theta(1,t) amplitude D=0.162 {stable:.2e} (< 1e-3), "
                           f"D=0.167 {cycle:.2e} (> 1e-2)")
    assert stable < 1e-3
    assert cycle > 1e-2


# ---------------------------------------------------------------- criterion 5

@pytest.mark.slow
def test_criterion_5_headline_errors(capsys, tubular_results):
    target = {"D0.162": 6.71e-5, "D0.167": 8.95e-3}
    got = {}
    for rec in tubular_results.report.select("qbdae"):
        tag = rec.model.split("_", 1)[1]
        if (rec.r1, rec.r2) == (30, 9):
            got[tag] = rec.error
    within = {k: bool(np.isfinite(got.get(k, np.nan))
                      and target[k] / 10 <= got[k] <= target[k] * 10) for k in target}
    _report(capsys, 5, all(within.values()),
            ", ".join(f"{k} error {got.get(k, np.nan):.2e} vs {target[k]:.2e} "
                      f"({'within' if within[k] else 'outside'} factor 10)" for k in target))
    for k in target:
        assert within[k], f"{k}: {got.get(k)} not within factor 10 of {target[k]}"


# ---------------------------------------------------------------- criterion 6

def _curve(records, **match):
    pts = sorted((r.r1, r.error) for r in records
                 if all(str(getattr(r, k)) == str(v) for k, v in match.items()))
    return np.array([p[0] for p in pts]), np.array([p[1] for p in pts])


def _plateau(errors, spread=2.0):
    """Plateau level (mean of the last two points) and whether the final
    basis increment changes the error by less than a factor ``spread``."""
    last = errors[-2:]
    flat = bool(np.all(np.isfinite(last)) and last.max() <= spread * last.min())
    return float(last.mean()), flat


def _keeps_decreasing(errors, drop=100.0, slack=2.0):
    """Finite everywhere, no rise beyond ``slack`` over the running minimum,
    and a total decrease of at least ``drop``."""
    if errors.size < 2 or not np.all(np.isfinite(errors)):
        return False
    running = np.minimum.accumulate(errors)
    return bool(np.all(errors[1:] <= slack * running[:-1]) and errors[0] >= drop * running[-1])


@pytest.mark.slow
def test_criterion_6_deim_plateaus(capsys, tubular_results, fhn_results):
    notes, ok = [], True
    tub = tubular_results.report.select("pod-deim")
    levels = []
    for rd in (10, 14, 16, 20):
        _, e = _curve(tub, r_deim=rd)
        level, flat = _plateau(e)
        levels.append(level)
        ok &= flat
        notes.append(f"tubular r_deim={rd} plateau {level:.1e}{'' if flat else ' (not flat)'}")
    decreasing = bool(np.all(np.diff(levels) < 0))
    ok &= decreasing
    notes.append("plateaus " + ("strictly decreasing" if decreasing else "NOT decreasing"))

    lifted = {"fhn qb-pod": _curve(fhn_results.report.select("qb-pod"))[1],
              "tubular quartic": _curve(tubular_results.report.select("quartic"))[1]}
    for name, e in lifted.items():
        # stop at snapshot-rank saturation: the final flat tail is excluded
        good = _keeps_decreasing(e[:-1])
        ok &= good
        finite = e[np.isfinite(e)]
        span = f"{finite[0]:.1e} -> {finite.min():.1e}" if finite.size else "all diverged"
        notes.append(f"{name} {'decreasing' if good else 'NOT decreasing'} ({span})")
    _report(capsys, 6, ok, ", ".join(notes))
    assert decreasing
    for name, e in lifted.items():
        assert _keeps_decreasing(e[:-1]), name
    assert ok


# ---------------------------------------------------------------- criterion 7

@pytest.mark.slow
def test_criterion_7_fhn_singular_values(capsys, fhn_results):
    sv, sz = (fhn_results.sigma[k] / fhn_results.sigma[k][0] for k in ("v", "z"))
    m = min(len(sv), len(sz))
    sv, sz = sv[:m], sz[:m]
    keep = (sv >= 1e-10) & (sz >= 1e-10)
    diff = np.abs(sv - sz)[keep]
    worst = int(np.argmax(diff))
    ok = diff.max() <= 1e-6
    _report(capsys, 7, ok, f"{keep.sum()} indices above 1e-10, max |sv - sz| {diff.max():.1e} "
                           f"at index {worst + 1} (v {sv[keep][worst]:.2e}, "
                           f"z {sz[keep][worst]:.2e})")
    assert diff.max() <= 1e-6


# ---------------------------------------------------------------- criterion 8

def test_criterion_8_invariants_and_determinism(capsys, tmp_path):
    results = run_invariants()
    cfg = tmp_path / "run.toml"
    cfg.write_text('model = "fhn"\nform = "lifted-qb"\nreduction = "pod"\n'
                   '[fhn]\nn = 24\nt_f = 3.0\n[time]\nn_t = 30\n[basis]\nr = 3\n')
    codes = [main(["reduce", "--config", str(cfg), "--out", str(tmp_path / d)])
             for d in ("a", "b")]
    names = ["manifest.json"] + [f"{v}.json" for v in
                                 json.loads((tmp_path / "a" / "manifest.json").read_text())
                                 ["files"]]
    same = codes == [0, 0] and all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in names)
    failed = [r.name for r in results if not r.ok]
    ok = not failed and same
    _report(capsys, 8, ok, f"{len(results) - len(failed)}/{len(results)} invariants hold, "
                           f"artifacts {'byte-identical' if same else 'DIFFER'}")
    assert not failed, failed
    assert same
