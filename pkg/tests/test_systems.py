import json

import numpy as np
import pytest
import scipy.sparse as sp

from liftrom.models import scalar_qb_dae, scalar_qb_ode, scalar_quartic
from liftrom.systems import (Componentwise, GeneralNonlinearSystem, InputSignal, Layout,
                             QBSystem, QuarticSystem, Trajectory)
from liftrom.tensor import MatricizedTensor, kron_power


def random_tensor(rng, out_dim, in_dims, nnz):
    rows = rng.integers(0, out_dim, nnz)
    idx = np.column_stack([rng.integers(0, d, nnz) for d in in_dims])
    return MatricizedTensor(out_dim, in_dims, rows, idx, rng.standard_normal(nnz))


def fd_jacobian(f, x, h=1e-6):
    return np.column_stack([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(len(x))])


def test_layout_offsets_and_slices():
    lay = Layout([("a", 2), ("b", 3), ("c", 1)])
    assert lay.dim == 6 and lay.offset("b") == 2 and lay.slice("c") == slice(5, 6)
    assert lay.sub(["c", "a"]).blocks == [("c", 1), ("a", 2)]
    assert lay.labels()[:3] == ["a_0", "a_1", "b_0"]
    assert Layout.from_json(json.loads(json.dumps(lay.to_json()))) == lay
    with pytest.raises(KeyError, match="unknown variable"):
        lay.offset("z")
    with pytest.raises(ValueError):
        Layout([("a", 1), ("a", 2)])


def test_input_signal_shapes():
    u = InputSignal(lambda t: [t, 1.0], 2)
    np.testing.assert_array_equal(u(3.0), [3.0, 1.0])
    with pytest.raises(ValueError):
        InputSignal(lambda t: [t], 2)(0.0)
    np.testing.assert_array_equal(InputSignal.zero(3)(1.0), np.zeros(3))


def test_trajectory_csv_round_trip(tmp_path, rng):
    lay = Layout([("v", 3), ("w", 2)])
    tr = Trajectory(np.linspace(0, 1, 4), rng.standard_normal((5, 4)), lay)
    tr.to_csv(tmp_path / "t.csv")
    header = (tmp_path / "t.csv").read_text().splitlines()[0]
    assert header == "t,v_0,v_1,v_2,w_0,w_1"
    back = Trajectory.from_csv(tmp_path / "t.csv")
    assert back.layout == lay
    np.testing.assert_array_equal(back.states, tr.states)
    np.testing.assert_array_equal(back.t, tr.t)


def test_trajectory_validation():
    lay = Layout([("x", 2)])
    with pytest.raises(ValueError):
        Trajectory([0.0, 1.0], np.zeros((3, 2)), lay)
    with pytest.raises(ValueError):
        Trajectory([0.0, 0.0], np.zeros((2, 2)), lay)


# quartic systems ---------------------------------------------------------

def test_quartic_linear_only():
    sys_ = QuarticSystem(A=np.eye(2), B=np.zeros((2, 1)))
    np.testing.assert_array_equal(sys_.rhs(np.array([1.0, 2.0]), [0.0]), [1.0, 2.0])


def test_scalar_quartic_value():
    assert scalar_quartic().rhs(np.array([2.0]), [0.0])[0] == 16.0


def _random_quartic(rng, n=4, m=2):
    G = {k: random_tensor(rng, n, (n,) * k, 12) for k in (2, 3, 4)}
    N1 = [rng.standard_normal((n, n)) for _ in range(m)]
    N2 = [random_tensor(rng, n, (n, n), 6) for _ in range(m)]
    return QuarticSystem(rng.standard_normal((n, n)), rng.standard_normal((n, m)), G[2], G[3],
                         G[4], N1, N2)


def test_quartic_rhs_dense_oracle(rng):
    s = _random_quartic(rng)
    x, u = rng.standard_normal(4), rng.standard_normal(2)
    want = s.A @ x + s.B @ u
    for k in (2, 3, 4):
        want += s.G[k].to_dense() @ kron_power(x, k)
    for j in range(2):
        want += u[j] * (s.N1[j] @ x + s.N2[j].to_dense() @ kron_power(x, 2))
    np.testing.assert_allclose(s.rhs(x, u), want, rtol=1e-12, atol=1e-12)


def test_quartic_jacobian_fd(rng):
    s = _random_quartic(rng)
    x, u = rng.standard_normal(4), rng.standard_normal(2)
    J = s.jacobian(x, u)
    J = J.toarray() if sp.issparse(J) else J
    np.testing.assert_allclose(J, fd_jacobian(lambda z: s.rhs(z, u), x), atol=1e-6)


def test_quartic_dimension_errors(rng):
    s = _random_quartic(rng)
    with pytest.raises(ValueError):
        s.rhs(np.zeros(3), np.zeros(2))
    with pytest.raises(ValueError):
        s.rhs(np.zeros(4), np.zeros(1))
    with pytest.raises(ValueError):
        QuarticSystem(np.eye(2), np.zeros((2, 1)), G2=MatricizedTensor(2, (3, 3)))


# QB systems --------------------------------------------------------------

def test_scalar_qb_ode_hand_values():
    out = scalar_qb_ode().rhs(np.ones(4), [1.0])
    np.testing.assert_array_equal(out, [2.0, 4.0, 8.0, 6.0])


def test_scalar_qb_dae_hand_values():
    s = scalar_qb_dae()
    x = np.array([2.0, 4.0])
    np.testing.assert_array_equal(s.rhs(x, [0.0]), [16.0, 0.0])
    np.testing.assert_array_equal(s.algebraic_residual(x), [0.0])


def test_qb_zero_state_zero_input():
    s = QBSystem(None, np.eye(3), np.zeros((3, 1)), MatricizedTensor(3, (3, 3), [0], [[1, 2]],
                                                                       [1.0]))
    np.testing.assert_array_equal(s.rhs(np.zeros(3), [0.0]), np.zeros(3))


def test_qb_rhs_dense_oracle_and_jacobian(rng):
    n = 5
    H = random_tensor(rng, n, (n, n), 20)
    N = [rng.standard_normal((n, n))]
    s = QBSystem(np.eye(n), rng.standard_normal((n, n)), rng.standard_normal((n, 1)), H, N)
    x, u = rng.standard_normal(n), rng.standard_normal(1)
    want = s.A @ x + s.B @ u + H.to_dense() @ np.kron(x, x) + u[0] * N[0] @ x
    np.testing.assert_allclose(s.rhs(x, u), want, atol=1e-12)
    J = s.jacobian(x, u)
    J = J.toarray() if sp.issparse(J) else J
    np.testing.assert_allclose(J, fd_jacobian(lambda z: s.rhs(z, u), x), atol=1e-6)


def test_qb_partition_checks():
    E = np.diag([1.0, 1.0])
    A = np.zeros((2, 2))
    A[1, 1] = 1.0
    H = MatricizedTensor(2, (2, 2))
    with pytest.raises(ValueError, match="E must vanish"):
        QBSystem(E, A, np.zeros((2, 1)), H, n1=1)
    E[1, 1] = 0.0
    A[1, 1] = 2.0
    with pytest.raises(ValueError, match="lower block row"):
        QBSystem(E, A, np.zeros((2, 1)), H, n1=1)


def test_structured_form_matches_full(rng):
    s = scalar_qb_dae()
    blk = s.structured()
    x1 = np.array([1.7])
    x = blk.full_state(x1)
    assert x[1] == pytest.approx(1.7**2)
    np.testing.assert_allclose(blk.rhs(x1, [0.3]), s.rhs(x, [0.3])[:1])
    J = blk.jacobian(x1, [0.3])
    J = J.toarray() if sp.issparse(J) else J
    np.testing.assert_allclose(J, [[4 * 1.7**3]])


def test_qb_json_round_trip():
    s = scalar_qb_ode()
    back = QBSystem.from_json(json.loads(json.dumps(s.to_json())))
    x = np.array([0.3, -1.2, 0.5, 2.0])
    np.testing.assert_array_equal(back.rhs(x, [0.7]), s.rhs(x, [0.7]))


# general nonlinear systems -----------------------------------------------

def test_general_system_jacobian_fd(rng):
    n = 4
    lay = Layout([("a", n), ("b", n)])
    g = Componentwise(fn=lambda a, b: a**2 * np.sin(b), variables=("a", "b"),
                      derivs=(lambda a, b: 2 * a * np.sin(b), lambda a, b: a**2 * np.cos(b)))
    F = rng.standard_normal((2 * n, n))
    s = GeneralNonlinearSystem(rng.standard_normal((2 * n, 2 * n)), np.ones((2 * n, 1)), F, g,
                               lay)
    x = rng.standard_normal(2 * n)
    np.testing.assert_allclose(s.jacobian(x, [1.0]).toarray(),
                               fd_jacobian(lambda z: s.rhs(z, [1.0]), x), atol=1e-6)
    np.testing.assert_allclose(s.nonlinear_term(x), x[:n] ** 2 * np.sin(x[n:]))
