"""Time integration for stiff ODEs and index-1 QB-DAEs.

Fixed-step schemes
    ``"semi-implicit"``  IMEX Euler: implicit in ``A``, explicit in the rest.
    ``"implicit"``       backward Euler with damped Newton iterations.
    ``"rk4"``            classical explicit Runge-Kutta.

Adaptive reference schemes (scipy ``solve_ivp``)
    ``"radau"``, ``"bdf"``  with analytic Jacobians and tight tolerances.
"""

from __future__ import annotations

import logging

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import solve_ivp

from .systems import InputSignal, Layout, QBSystem, StructuredQBDAE, Trajectory

__all__ = [
    "IntegrationError",
    "NewtonError",
    "NonFiniteStateError",
    "integrate_ode",
    "solve_qbdae",
    "SCHEMES",
]

log = logging.getLogger(__name__)

SCHEMES = ("semi-implicit", "implicit", "rk4", "radau", "bdf")

NEWTON_MAXITER = 50
NEWTON_DAMPING = 0.5
NEWTON_TOL = 1e-10


class IntegrationError(RuntimeError):
    def __init__(self, message, step=None):
        super().__init__(message if step is None else f"step {step}: {message}")
        self.step = step


class NewtonError(IntegrationError):
    pass


class NonFiniteStateError(IntegrationError):
    pass


class _Mass:
    def __init__(self, mass, n):
        self.n = n
        self.kind = "identity"
        if mass is None:
            return
        if isinstance(mass, np.ndarray) and mass.ndim == 1:
            if np.any(mass == 0):
                raise ValueError("mass matrix is singular; use solve_qbdae for DAEs")
            self.kind, self.diag = "diag", mass.astype(float)
        elif sp.issparse(mass):
            self.kind, self.mat = "sparse", mass.tocsc()
            self._lu = spla.splu(self.mat)
        else:
            M = np.asarray(mass, dtype=float)
            self.kind, self.mat = "dense", M
            self._lu = sla.lu_factor(M)
            if np.any(np.abs(np.diag(self._lu[0])) < 1e-14 * np.abs(M).max()):
                raise ValueError("mass matrix is singular; use solve_qbdae for DAEs")

    def apply(self, v):
        if self.kind == "identity":
            return v
        if self.kind == "diag":
            return self.diag * v
        return self.mat @ v

    def solve(self, v):
        if self.kind == "identity":
            return v
        if self.kind == "diag":
            return v / self.diag
        if self.kind == "sparse":
            return self._lu.solve(v)
        return sla.lu_solve(self._lu, v)

    def matrix(self, sparse):
        if self.kind == "identity":
            return sp.identity(self.n, format="csc") if sparse else np.eye(self.n)
        if self.kind == "diag":
            return sp.diags(self.diag, format="csc") if sparse else np.diag(self.diag)
        if sparse:
            return sp.csc_matrix(self.mat)
        return self.mat.toarray() if sp.issparse(self.mat) else self.mat

    def solve_matrix(self, J):
        """``M^{-1} J`` for a Jacobian (kept sparse when possible)."""
        if self.kind == "identity":
            return J
        if self.kind == "diag":
            return sp.diags(1.0 / self.diag) @ J if sp.issparse(J) else J / self.diag[:, None]
        Jd = J.toarray() if sp.issparse(J) else J
        if self.kind == "sparse":
            return self._lu.solve(Jd)
        return sla.lu_solve(self._lu, Jd)


class _LinearSolver:
    """Factorization of ``M - h J`` (sparse or dense)."""

    def __init__(self, M, J, h):
        if sp.issparse(J) or sp.issparse(M):
            K = sp.csc_matrix(M) - h * sp.csc_matrix(J)
            self._lu = spla.splu(K.tocsc())
            self.solve = self._lu.solve
        else:
            K = np.asarray(M) - h * np.asarray(J)
            lu = sla.lu_factor(K, check_finite=False)
            self.solve = lambda b: sla.lu_solve(lu, b, check_finite=False)


def _input(u, m):
    if u is None:
        return InputSignal.zero(m)
    if isinstance(u, InputSignal):
        if u.m != m:
            raise ValueError(f"input has {u.m} channels, system expects {m}")
        return u
    return InputSignal(u, m)


def _check_finite(x, step):
    if not np.all(np.isfinite(x)):
        raise NonFiniteStateError("non-finite state encountered", step)


def _layout_of(system):
    layout = getattr(system, "x1_layout", None) or getattr(system, "layout", None)
    if layout is None or layout.dim != system.dim:
        layout = Layout([("x", system.dim)])
    return layout


def integrate_ode(system, x0, t, u=None, scheme="semi-implicit", dt=None,
                  rtol=1e-10, atol=1e-12, max_step=np.inf):
    """Integrate ``mass @ xdot = system.rhs(x, u(t))`` and sample on ``t``.

    Parameters
    ----------
    system : object following the protocol in :mod:`liftrom.systems`
    x0 : (n,) initial state
    t : (n_t,) strictly increasing output grid; ``t[0]`` is the initial time
    u : InputSignal, callable ``t -> (m,)``, or None for zero input
    scheme : one of ``SCHEMES``
    dt : internal step for fixed-step schemes (default: output spacing)
    rtol, atol, max_step : tolerances for the adaptive scipy schemes

    Returns
    -------
    Trajectory
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown scheme {scheme!r}; choose from {SCHEMES}")
    t = np.asarray(t, dtype=float)
    if t.ndim != 1 or len(t) < 1 or np.any(np.diff(t) <= 0):
        raise ValueError("time grid must be 1-D and strictly increasing")
    x0 = np.asarray(x0, dtype=float).copy()
    if x0.shape != (system.dim,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({system.dim},)")
    _check_finite(x0, 0)
    u = _input(u, system.n_inputs)
    mass = _Mass(system.mass, system.dim)

    if scheme in ("radau", "bdf"):
        X = _integrate_scipy(system, mass, x0, t, u, scheme.capitalize() if scheme == "radau"
                             else "BDF", rtol, atol, max_step)
    else:
        stepper = {"semi-implicit": _imex_euler, "implicit": _backward_euler,
                   "rk4": _rk4}[scheme]
        X = _integrate_fixed(stepper, system, mass, x0, t, u, dt)
    return Trajectory(t, X, _layout_of(system))


def _integrate_fixed(stepper, system, mass, x0, t, u, dt):
    X = np.empty((system.dim, len(t)))
    X[:, 0] = x0
    x = x0
    cache = {}
    step = 0
    for i in range(len(t) - 1):
        span = t[i + 1] - t[i]
        h_target = span if dt is None else min(dt, span)
        k = max(1, int(np.ceil(span / h_target - 1e-9)))
        h = span / k
        for j in range(k):
            tn = t[i] + j * h
            step += 1
            x = stepper(system, mass, x, tn, h, u, cache, step)
            _check_finite(x, step)
        X[:, i + 1] = x
    return X


def _imex_euler(system, mass, x, tn, h, u, cache, step):
    key = ("imex", round(h, 15))
    if key not in cache:
        A = system.linear
        cache[key] = _LinearSolver(mass.matrix(sp.issparse(A)), A, h)
    explicit = system.rhs(x, u(tn)) - system.linear @ x
    return cache[key].solve(mass.apply(x) + h * explicit)


def _backward_euler(system, mass, x, tn, h, u, cache, step):
    t1 = tn + h
    u1 = u(t1)
    xn_m = mass.apply(x)
    y = x.copy()

    def residual(z):
        return mass.apply(z) - xn_m - h * system.rhs(z, u1)

    R = residual(y)
    for _ in range(NEWTON_MAXITER):
        scale = max(1.0, np.linalg.norm(y))
        rn = np.linalg.norm(R)
        if rn <= NEWTON_TOL * scale:
            return y
        J = system.jacobian(y, u1)
        dy = -_LinearSolver(mass.matrix(sp.issparse(J)), J, h).solve(R)
        lam = 1.0
        while True:
            y_try = y + lam * dy
            with np.errstate(all="ignore"):
                try:
                    R_try = residual(y_try)
                except (ValueError, FloatingPointError):
                    R_try = np.full_like(R, np.inf)
            if np.all(np.isfinite(R_try)) and np.linalg.norm(R_try) < (1 - 1e-4 * lam) * rn:
                break
            lam *= NEWTON_DAMPING
            if lam < 1e-6:
                raise NewtonError("damped Newton line search failed", step)
        y, R = y_try, R_try
    if np.linalg.norm(R) <= NEWTON_TOL * max(1.0, np.linalg.norm(y)):
        return y
    raise NewtonError(f"Newton did not converge in {NEWTON_MAXITER} iterations", step)


def _rk4(system, mass, x, tn, h, u, cache, step):
    def f(tt, z):
        return mass.solve(system.rhs(z, u(tt)))

    k1 = f(tn, x)
    k2 = f(tn + h / 2, x + h / 2 * k1)
    k3 = f(tn + h / 2, x + h / 2 * k2)
    k4 = f(tn + h, x + h * k3)
    return x + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def _integrate_scipy(system, mass, x0, t, u, method, rtol, atol, max_step):
    def f(tt, z):
        return mass.solve(system.rhs(z, u(tt)))

    def jac(tt, z):
        return mass.solve_matrix(system.jacobian(z, u(tt)))

    if len(t) == 1:
        return x0[:, None]
    with np.errstate(over="raise", invalid="raise"):
        try:
            sol = solve_ivp(f, (t[0], t[-1]), x0, method=method, t_eval=t, jac=jac,
                            rtol=rtol, atol=atol, max_step=max_step)
        except FloatingPointError as exc:
            raise NonFiniteStateError(f"floating point failure: {exc}") from exc
    if sol.status != 0:
        raise IntegrationError(f"{method} failed: {sol.message}", len(sol.t))
    _check_finite(sol.y, len(sol.t))
    return sol.y


def solve_qbdae(system, x1_0, t, u=None, scheme="semi-implicit", **kwargs):
    """Integrate an index-1 QB-DAE by substituting ``x2 = H2t (x1 ⊗ x1)``.

    ``system`` is a partitioned :class:`QBSystem` or a
    :class:`StructuredQBDAE` (full or reduced). Only ``x1`` initial data are
    accepted; the constrained part is always computed from it, so the
    algebraic residual vanishes at every output time. The returned trajectory
    holds ``[x1; x2]``.
    """
    if isinstance(system, QBSystem):
        blocks = system.structured()
        layout = system.layout
    elif isinstance(system, StructuredQBDAE):
        blocks = system
        layout = system.layout
    else:
        raise TypeError("solve_qbdae needs a QBSystem or StructuredQBDAE")
    x1_0 = np.asarray(x1_0, dtype=float)
    if x1_0.shape != (blocks.n1,):
        raise ValueError(f"x1_0 has shape {x1_0.shape}, expected ({blocks.n1},)")
    traj1 = integrate_ode(blocks, x1_0, t, u=u, scheme=scheme, **kwargs)
    X1 = traj1.states
    X2 = np.column_stack([blocks.constrained(X1[:, j]) for j in range(X1.shape[1])])
    if layout is None or layout.dim != blocks.n1 + blocks.n2:
        layout = Layout([("x1", blocks.n1), ("x2", blocks.n2)])
    return Trajectory(traj1.t, np.vstack([X1, X2]), layout)
