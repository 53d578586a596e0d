"""Error metric, quantities of interest, reports and small experiment sweeps."""

import csv

import numpy as np
import pytest

from liftrom.bench import (ErrorRecord, ErrorReport, ExperimentResult, FHNExperiment, QoISeries,
                           TubularExperiment, avg_rel_state_error, extract_qoi,
                           lift_trajectory, regime_amplitude, run_fhn_experiment,
                           run_tubular_experiment, write_results)
from liftrom.models import FHNConfig, TubularConfig, consistent_lift_ic
from liftrom.systems import Layout, Trajectory


def _traj(X, names, n, t=None):
    t = np.arange(X.shape[1], dtype=float) if t is None else t
    return Trajectory(t, X, Layout.uniform(names, n))


def test_error_identical_is_zero(rng):
    a = _traj(rng.standard_normal((6, 5)), ("v", "w"), 3)
    assert avg_rel_state_error(a, a) == 0.0


def test_error_doubled_is_one(rng):
    X = rng.standard_normal((6, 5))
    assert avg_rel_state_error(_traj(X, ("v", "w"), 3), _traj(2 * X, ("v", "w"), 3)) == \
        pytest.approx(1.0, abs=1e-15)


def test_error_three_samples_by_hand():
    X = np.array([[1.0, 0.0, 3.0], [0.0, 2.0, 4.0]])
    Y = np.array([[1.5, 0.0, 3.0], [0.0, 1.0, 0.0]])
    # per-sample: 0.5/1, 1/2, 4/5
    expected = (0.5 + 0.5 + 0.8) / 3
    got = avg_rel_state_error(_traj(X, ("a",), 2), _traj(Y, ("a",), 2))
    assert abs(got - expected) <= 1e-15


def test_error_restricted_to_original_variables(rng):
    X = rng.standard_normal((9, 4))
    Y = X.copy()
    Y[6:] += 1.0  # only the auxiliary block differs
    a, b = _traj(X, ("v", "w", "z"), 3), _traj(Y, ("v", "w", "z"), 3)
    assert avg_rel_state_error(a, b, ("v", "w")) == 0.0
    assert avg_rel_state_error(a, b) > 0.0


def test_error_permutation_symmetry(rng):
    X, Y = rng.standard_normal((6, 5)), rng.standard_normal((6, 5))
    a, b = _traj(X, ("v", "w"), 3), _traj(Y, ("v", "w"), 3)
    e1 = avg_rel_state_error(a, b, ("v", "w"))
    e2 = avg_rel_state_error(a, b, ("w", "v"))
    assert e1 == pytest.approx(e2, rel=1e-14)


def test_error_skips_zero_reference_samples():
    X = np.array([[0.0, 1.0, 2.0]])
    Y = np.array([[5.0, 1.0, 1.0]])
    assert avg_rel_state_error(_traj(X, ("a",), 1), _traj(Y, ("a",), 1)) == 0.25


def test_error_grid_mismatch():
    a = _traj(np.ones((1, 3)), ("a",), 1)
    b = _traj(np.ones((1, 3)), ("a",), 1, np.array([0.0, 1.0, 2.5]))
    with pytest.raises(ValueError, match="grid"):
        avg_rel_state_error(a, b)


def test_extract_qoi_boundary_nodes():
    X = np.vstack([np.full((3, 4), 2.0), np.arange(12.0).reshape(3, 4)])
    tr = _traj(X, ("psi", "theta"), 3)
    q = extract_qoi(tr, "theta(1,t)")
    np.testing.assert_array_equal(q.values, X[5])
    np.testing.assert_array_equal(extract_qoi(tr, "psi(1,t)").values, 2.0)
    with pytest.raises(KeyError):
        extract_qoi(tr, "v(0,t)")
    with pytest.raises(KeyError):
        extract_qoi(tr, "theta(0.5,t)")


def test_regime_amplitude():
    t = np.linspace(0.0, 30.0, 3001)
    q = QoISeries(t, 2.0 + 0.1 * np.sin(2 * np.pi * t), "x")
    assert regime_amplitude(q) == pytest.approx(0.05, rel=1e-3)
    assert regime_amplitude(QoISeries(t, np.full_like(t, 3.0), "c")) == 0.0


def test_lift_trajectory_matches_consistent_ic(rng):
    n = 4
    psi, theta = rng.uniform(0.2, 1, (n, 3)), rng.uniform(0.8, 1.4, (n, 3))
    tr = _traj(np.vstack([psi, theta]), ("psi", "theta"), n)
    lifted = lift_trajectory(tr, "tubular-qbdae", 25.0)
    for j in range(3):
        np.testing.assert_allclose(lifted.states[:, j],
                                   consistent_lift_ic("tubular-qbdae", tr.states[:, j], 25.0),
                                   rtol=1e-15)
    assert lift_trajectory(tr, "tubular-quartic").layout.names[-1] == "w3"


def test_report_order_and_csv(tmp_path):
    rep = ErrorReport()
    rep.add(ErrorRecord("m", "pod", 4, error=0.5))
    rep.add(ErrorRecord("m", "pod", 2, error=float("nan")))
    rep.add(ErrorRecord("m", "pod-deim", 2, "", "10", error=0.25))
    rep.write_csv(tmp_path / "errors.csv")
    rows = list(csv.reader(open(tmp_path / "errors.csv")))
    assert rows[0] == ["model", "method", "r1", "r2", "r_deim", "error"]
    assert rows[1:] == [["m", "pod", "2", "", "", "nan"], ["m", "pod", "4", "", "", "0.5"],
                        ["m", "pod-deim", "2", "", "10", "0.25"]]


def test_write_results_formats(tmp_path):
    t = np.array([0.0, 1.0])
    res = ExperimentResult(ErrorReport(), {"fom": {"v(0,t)": QoISeries(t, t + 1, "v(0,t)")}},
                           {"v": np.array([4.0, 2.0, 1.0])})
    files = write_results(res, tmp_path)
    assert files == ["errors.csv", "qoi_fom_v_0_t.csv", "sigma_v.csv"]
    sig = list(csv.reader(open(tmp_path / "sigma_v.csv")))
    assert sig == [["index", "sigma", "sigma_rel"], ["1", "4.0", "1.0"], ["2", "2.0", "0.5"],
                   ["3", "1.0", "0.25"]]
    q = list(csv.reader(open(tmp_path / "qoi_fom_v_0_t.csv")))
    assert q == [["t", "value"], ["0.0", "1.0"], ["1.0", "2.0"]]


def test_small_fhn_experiment():
    st = FHNExperiment(n_t=60, n_train=40, r_values=(2, 3), r_deim=(4, "r"), headline_r=3)
    res = run_fhn_experiment(FHNConfig(n=40, t_f=6.0), st)
    assert set(res.sigma) == {"v", "w", "z", "f"}
    qb = res.report.select("qb-pod")
    assert [r.r1 for r in qb] == [6, 9]
    assert all(np.isfinite(r.error) for r in qb)
    assert len(res.report.select("pod-deim")) == 4
    assert set(res.qois) == {"fom", "qb-pod"}


def test_small_tubular_experiment():
    st = TubularExperiment(damkohler=(0.167,), n_t=201, dt=0.01, t_train=1.5,
                           r_values=(2,), pod_r_values=(2, 3), r2_values=(3, "I"),
                           r_deim=(4, "r"), headline=(10, 3))
    res = run_tubular_experiment(TubularConfig(n=12), st)
    methods = {r.method for r in res.report.records}
    assert methods == {"qbdae", "quartic", "pod", "pod-deim"}
    assert "D0.167" in res.extra["amplitude"]
    assert {"psi_D0.167", "w6_D0.167", "f_D0.167"} <= set(res.sigma)
    pod = {r.r1: r.error for r in res.report.select("pod")}
    assert set(pod) == {4, 6} and all(np.isfinite(v) for v in pod.values())
    rds = {r.r_deim for r in res.report.select("pod-deim")}
    assert rds == {"4", "r"}
