"""Tubular reactor with Arrhenius kinetics: FOM, quartic lift and QB-DAE lift.

Grid: ``n`` nodes ``s_i = i * ds`` on ``[0, 1]`` including both ends,
``ds = 1 / (n - 1)``. Diffusion uses the central second difference;
convection is first-order upwind (or central). The Robin conditions at
``s = 0`` and the Neumann conditions at ``s = 1`` are eliminated with ghost
nodes and folded into ``A_psi``, ``A_theta``, ``b_psi``, ``b_theta`` with the
constant input ``u(t) = 1``.

Lifted variables (all nodewise)::

    w1 = exp(gamma - gamma/theta),  w2 = theta**-2,  w3 = theta**-1
    w4 = psi*w1,  w5 = w2*w3,  w6 = w1*w2
"""

import numpy as np
import scipy.sparse as sp

from ..systems import (Componentwise, GeneralNonlinearSystem, InputSignal, Layout,
                       QBSystem, QuarticSystem)
from ..tensor import MatricizedTensor
from .config import TubularConfig

__all__ = ["DomainError", "reactor_operators", "tubular_input", "build_tubular_fom",
           "build_tubular_quartic", "build_tubular_qbdae", "tubular_initial_state",
           "QUARTIC_VARS", "QBDAE_VARS"]

QUARTIC_VARS = ("psi", "theta", "w1", "w2", "w3")
QBDAE_VARS = QUARTIC_VARS + ("w4", "w5", "w6")


class DomainError(ValueError):
    """Temperature left the domain ``theta > 0`` where the kinetics are defined."""


def reactor_operators(cfg):
    """Return ``(A_psi, b_psi, A_theta, b_theta)`` for the discretized transport."""
    n, pe = cfg.n, cfg.pe
    ds = 1.0 / (n - 1)
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    diff = sp.diags([lower, main, upper], [-1, 0, 1], format="lil") / (pe * ds**2)
    # Robin ghost node: psi_{-1} = psi_1 - 2 ds Pe (psi_0 - feed)
    diff[0, 0] -= 2.0 / ds
    feed_coeff = 2.0 / ds
    if cfg.convection == "upwind":
        conv = sp.diags([np.ones(n - 1), -np.ones(n)], [-1, 0], format="lil") / ds
        conv[0, 1] = 1.0 / ds
        conv[0, 0] -= 2.0 * pe
        feed_coeff += 2.0 * pe
    else:
        conv = sp.diags([np.ones(n - 1), -np.ones(n - 1)], [-1, 1], format="lil") / (2 * ds)
        conv[0, 1] = 0.0
        conv[0, 0] = -pe
        conv[n - 1, n - 2] = 0.0
        feed_coeff += pe
    A_psi = (diff + conv).tocsr()
    A_theta = (A_psi - cfg.beta * sp.identity(n)).tocsr()
    b_psi = np.zeros(n)
    b_psi[0] = feed_coeff * cfg.mu
    b_theta = np.full(n, cfg.beta * cfg.theta_ref)
    b_theta[0] += feed_coeff * 1.0
    return A_psi, b_psi, A_theta, b_theta


def tubular_input():
    return InputSignal.constant([1.0])


def _check_theta(theta):
    if np.any(~(theta > 0)):
        raise DomainError("temperature must stay positive (theta > 0)")


def _arrhenius(theta, gamma):
    _check_theta(theta)
    return np.exp(gamma - gamma / theta)


def build_tubular_fom(cfg=None):
    """``psi' = A_psi psi + b_psi u - D psi*e(theta)``,
    ``theta' = A_theta theta + b_theta u + B D psi*e(theta)``."""
    cfg = cfg or TubularConfig()
    n, D, Bc, gam = cfg.n, cfg.damkohler, cfg.b_const, cfg.gamma
    A_psi, b_psi, A_theta, b_theta = reactor_operators(cfg)
    A = sp.block_diag([A_psi, A_theta], format="csr")
    B = np.concatenate([b_psi, b_theta])[:, None]
    I = sp.identity(n, format="csr")
    F = sp.vstack([-D * I, Bc * D * I], format="csr")
    g = Componentwise(
        fn=lambda psi, theta: psi * _arrhenius(theta, gam),
        variables=("psi", "theta"),
        derivs=(lambda psi, theta: _arrhenius(theta, gam),
                lambda psi, theta: psi * _arrhenius(theta, gam) * gam / theta**2),
    )
    layout = Layout.uniform(("psi", "theta"), n)
    return GeneralNonlinearSystem(A, B, F, g, layout,
                                  domain_check=lambda x: _check_theta(x[layout.slice("theta")]))


class _Builder:
    """Accumulates sparse tensor entries keyed by order."""

    def __init__(self):
        self.parts = {}

    def add(self, rows, idx_cols, vals):
        k = len(idx_cols)
        rows = np.asarray(rows)
        vals = np.broadcast_to(np.asarray(vals, dtype=float), rows.shape)
        self.parts.setdefault(k, []).append((rows, np.column_stack(idx_cols), vals))

    def tensor(self, k, dim):
        if k not in self.parts:
            return None
        rows, idx, vals = zip(*self.parts[k])
        return MatricizedTensor(dim, (dim,) * k, np.concatenate(rows), np.concatenate(idx),
                                np.concatenate(vals))


def build_tubular_quartic(cfg=None):
    """Quartic ODE in ``[psi, theta, w1, w2, w3]`` (dimension 5n)."""
    cfg = cfg or TubularConfig()
    n, D, Bc, gam = cfg.n, cfg.damkohler, cfg.b_const, cfg.gamma
    A_psi, b_psi, A_theta, b_theta = reactor_operators(cfg)
    N = 5 * n
    ip, it, i1, i2, i3 = (k * n + np.arange(n) for k in range(5))
    At = A_theta.tocoo()
    r, c, a = At.row, At.col, At.data

    G = _Builder()
    # psi' and theta' reaction terms
    G.add(ip, [ip, i1], -D)
    G.add(it, [ip, i1], Bc * D)
    # w1' = gamma w1 w2 (A_theta theta + b_theta u + B D psi w1)
    G.add(i1[r], [i1[r], i2[r], it[c]], gam * a)
    G.add(i1, [i1, i2, ip, i1], gam * Bc * D)
    # w2' = -2 w2 w3 (...)
    G.add(i2[r], [i2[r], i3[r], it[c]], -2.0 * a)
    G.add(i2, [i2, i3, ip, i1], -2.0 * Bc * D)
    # w3' = -w2 (...)
    G.add(i3[r], [i2[r], it[c]], -a)
    G.add(i3, [i2, ip, i1], -Bc * D)

    N2 = _Builder()
    N2.add(i1, [i1, i2], gam * b_theta)
    N2.add(i2, [i2, i3], -2.0 * b_theta)
    N1 = sp.csr_matrix((-b_theta, (i3, i2)), shape=(N, N))

    A = sp.block_diag([A_psi, A_theta, sp.csr_matrix((3 * n, 3 * n))], format="csr")
    B = np.concatenate([b_psi, b_theta, np.zeros(3 * n)])[:, None]
    layout = Layout.uniform(QUARTIC_VARS, n)
    return QuarticSystem(A, B, G.tensor(2, N), G.tensor(3, N), G.tensor(4, N),
                         N1=[N1], N2=[N2.tensor(2, N)], layout=layout,
                         domain_check=lambda x: _check_theta(x[layout.slice("theta")]))


def build_tubular_qbdae(cfg=None):
    """QB-DAE with ``x1 = [psi, theta, w1, w2, w3]`` and ``x2 = [w4, w5, w6]``.

    The lower block rows encode ``0 = w4 - w1*psi``, ``0 = w5 - w2*w3`` and
    ``0 = w6 - w1*w2``. The ``w`` rows of ``A11`` are zero: the lifted
    auxiliary equations carry no linear terms.
    """
    cfg = cfg or TubularConfig()
    n, D, Bc, gam = cfg.n, cfg.damkohler, cfg.b_const, cfg.gamma
    A_psi, b_psi, A_theta, b_theta = reactor_operators(cfg)
    n1, n2 = 5 * n, 3 * n
    N = n1 + n2
    ip, it, i1, i2, i3, i4, i5, i6 = (k * n + np.arange(n) for k in range(8))
    At = A_theta.tocoo()
    r, c, a = At.row, At.col, At.data

    H = _Builder()
    H.add(i1[r], [i6[r], it[c]], gam * a)
    H.add(i1, [i4, i6], gam * Bc * D)
    H.add(i2[r], [i5[r], it[c]], -2.0 * a)
    H.add(i2, [i4, i5], -2.0 * Bc * D)
    H.add(i3[r], [i2[r], it[c]], -a)
    H.add(i3, [i2, i4], -Bc * D)
    H.add(i4, [i1, ip], -1.0)
    H.add(i5, [i2, i3], -1.0)
    H.add(i6, [i1, i2], -1.0)

    I = sp.identity(n, format="csr")
    A11 = sp.block_diag([A_psi, A_theta, sp.csr_matrix((3 * n, 3 * n))], format="csr")
    A12 = sp.bmat([[-D * I, None, None], [Bc * D * I, None, None],
                   [sp.csr_matrix((3 * n, n)), sp.csr_matrix((3 * n, n)),
                    sp.csr_matrix((3 * n, n))]], format="csr")
    A = sp.bmat([[A11, A12], [None, sp.identity(n2)]], format="csr")
    E = sp.diags(np.concatenate([np.ones(n1), np.zeros(n2)]), format="csr")
    B = np.concatenate([b_psi, b_theta, np.zeros(3 * n + n2)])[:, None]
    Nk = sp.csr_matrix(
        (np.concatenate([gam * b_theta, -2.0 * b_theta, -b_theta]),
         (np.concatenate([i1, i2, i3]), np.concatenate([i6, i5, i2]))),
        shape=(N, N),
    )
    return QBSystem(E, A, B, H.tensor(2, N), [Nk], layout=Layout.uniform(QBDAE_VARS, n),
                    n1=n1)


def tubular_initial_state(cfg=None, psi0=None, theta0=None):
    """Default feed-equilibrated profile ``psi0 = theta0 = 1``."""
    cfg = cfg or TubularConfig()
    psi0 = np.ones(cfg.n) if psi0 is None else np.broadcast_to(psi0, (cfg.n,)).astype(float)
    theta0 = np.ones(cfg.n) if theta0 is None else np.broadcast_to(theta0, (cfg.n,)).astype(float)
    return np.concatenate([psi0, theta0])
