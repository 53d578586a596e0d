import numpy as np
import pytest

from liftrom.integrate import (IntegrationError, NewtonError, NonFiniteStateError, integrate_ode,
                               solve_qbdae)
from liftrom.models import (scalar_exact, scalar_lift_ic, scalar_qb_dae, scalar_qb_ode,
                            scalar_quartic)
from liftrom.systems import InputSignal, Layout, QBSystem, QuarticSystem
from liftrom.tensor import MatricizedTensor


def _decay():
    return QuarticSystem(A=-np.eye(1), B=np.zeros((1, 1)))


@pytest.mark.parametrize("scheme,dt", [("rk4", 1e-2), ("radau", None), ("bdf", None)])
def test_exponential_decay(scheme, dt):
    tr = integrate_ode(_decay(), np.ones(1), np.linspace(0, 1, 11), None, scheme=scheme, dt=dt)
    assert abs(tr.states[0, -1] - np.exp(-1.0)) <= 1e-8


@pytest.mark.parametrize("scheme,dt", [("semi-implicit", 1e-5), ("implicit", 1e-5),
                                       ("rk4", 1e-3), ("radau", None)])
def test_quartic_scalar_analytic(scheme, dt):
    t = np.array([0.0, 0.1])
    tr = integrate_ode(scalar_quartic(), np.ones(1), t, None, scheme=scheme, dt=dt)
    exact = (1 - 0.3) ** (-1 / 3)
    assert exact == pytest.approx(1.12624, abs=1e-5)
    tol = 1e-6 if scheme in ("rk4", "radau") else 2e-5
    assert abs(tr.states[0, -1] / exact - 1) <= tol


def _rates(errs):
    errs = np.abs(np.asarray(errs))
    return np.log2(errs[:-1] / errs[1:])


@pytest.mark.parametrize("scheme", ["semi-implicit", "implicit"])
def test_first_order_convergence_on_quartic(scheme):
    t = np.array([0.0, 0.2])
    exact = scalar_exact(1.0, 0.2)
    errs = [integrate_ode(scalar_quartic(), np.ones(1), t, None, scheme=scheme,
                          dt=dt).states[0, -1] - exact for dt in (0.01, 0.005, 0.0025)]
    rates = _rates(errs)
    assert np.all(np.abs(rates - 1) <= 0.2), rates


def test_rk4_convergence_on_forced_quartic():
    # with u = 0 the h^5 local error constant of RK4 on x' = x^4 nearly cancels
    # (x^16/24 against h^6 terms of size 61/18 x^19), so the asymptotic rate
    # only shows below round-off; a constant input removes the cancellation
    u = InputSignal.constant([1.0])
    t = np.array([0.0, 0.4])
    ref = integrate_ode(scalar_quartic(), np.full(1, 0.5), t, u, scheme="radau", rtol=1e-13,
                        atol=1e-15).states[0, -1]
    errs = [integrate_ode(scalar_quartic(), np.full(1, 0.5), t, u, scheme="rk4",
                          dt=dt).states[0, -1] - ref for dt in (0.02, 0.01, 0.005)]
    rates = _rates(errs)
    assert np.all(np.abs(rates - 4) <= 0.2), rates


def test_lifted_scalar_qb_ode_matches_analytic():
    t = np.linspace(0, 0.3, 7)
    tr = integrate_ode(scalar_qb_ode(), scalar_lift_ic(0.9, "qb-ode"), t, None, scheme="radau")
    np.testing.assert_allclose(tr.states[0], scalar_exact(0.9, t), rtol=1e-6)


def test_qbdae_matches_direct_quartic_with_input():
    u = InputSignal(lambda t: [0.3 * np.sin(3 * t)], 1)
    t = np.linspace(0, 1, 21)
    direct = integrate_ode(scalar_quartic(), np.full(1, 0.5), t, u, scheme="radau")
    dae = solve_qbdae(scalar_qb_dae(), [0.5], t, u, scheme="radau")
    assert np.max(np.abs(dae.states[0] / direct.states[0] - 1)) <= 1e-6
    np.testing.assert_allclose(dae.states[1], dae.states[0] ** 2, rtol=1e-12)


def test_qbdae_zero_solution():
    s = scalar_qb_dae()
    zero_b = QBSystem(s.E, s.A, np.zeros((2, 1)), s.H, s.N, layout=s.layout, n1=1)
    tr = solve_qbdae(zero_b, [0.0], np.linspace(0, 1, 5), InputSignal.constant([1.0]),
                     scheme="implicit", dt=0.05)
    assert np.all(tr.states == 0.0)


def test_qbdae_rejects_inconsistent_shape():
    with pytest.raises(ValueError):
        solve_qbdae(scalar_qb_dae(), [1.0, 1.0], np.linspace(0, 1, 3))


def test_mass_matrix_respected():
    s = QuarticSystem(A=-np.eye(2), B=np.zeros((2, 1)), mass=np.array([2.0, 0.5]))
    tr = integrate_ode(s, np.ones(2), np.array([0.0, 1.0]), None, scheme="radau")
    np.testing.assert_allclose(tr.states[:, -1], np.exp([-0.5, -2.0]), rtol=1e-8)


def test_imex_treats_linear_part_implicitly():
    # stiff decay: explicit Euler at dt = 0.1 would explode, IMEX stays bounded
    s = QuarticSystem(A=-1000 * np.eye(1), B=np.zeros((1, 1)))
    tr = integrate_ode(s, np.ones(1), np.linspace(0, 1, 11), None, scheme="semi-implicit")
    assert 0 <= tr.states[0, -1] < 1e-10


def test_newton_failure_reports_step():
    G4 = MatricizedTensor(1, (1,) * 4, [0], [[0, 0, 0, 0]], [1.0])
    s = QuarticSystem(A=np.zeros((1, 1)), B=np.zeros((1, 1)), G4=G4)
    with pytest.raises(NewtonError) as exc:
        integrate_ode(s, np.ones(1), np.array([0.0, 10.0]), None, scheme="implicit", dt=10.0)
    assert exc.value.step == 1


def test_blow_up_is_an_error():
    with pytest.raises(NonFiniteStateError):
        integrate_ode(scalar_quartic(), np.ones(1), np.linspace(0, 1, 11), None, scheme="rk4",
                      dt=0.05)


def test_adaptive_failure_is_integration_error():
    with pytest.raises(IntegrationError):
        integrate_ode(scalar_quartic(), np.ones(1), np.array([0.0, 1.0]), None,
                      scheme="radau")


def test_grid_and_state_validation():
    with pytest.raises(ValueError, match="unknown scheme"):
        integrate_ode(_decay(), np.ones(1), [0, 1], scheme="euler")
    with pytest.raises(ValueError):
        integrate_ode(_decay(), np.ones(1), [0, 0.5, 0.5])
    with pytest.raises(ValueError):
        integrate_ode(_decay(), np.ones(2), [0, 1])


def test_output_layout_is_system_layout():
    tr = integrate_ode(scalar_qb_ode(), scalar_lift_ic(0.5), np.linspace(0, 0.1, 3), None,
                       scheme="radau")
    assert tr.layout == Layout([("x", 1), ("w1", 1), ("w2", 1), ("w3", 1)])
