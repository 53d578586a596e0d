"""Finite-difference FitzHugh-Nagumo model and its quadratic-bilinear lift.

Grid: ``n`` nodes ``s_i = i * ds`` on ``[0, L]`` including both ends, with
``ds = L / (n - 1)``. The flux conditions ``v_s(0) = q(t)`` and ``v_s(L) = 0``
are eliminated through ghost nodes, so the discrete second derivative is

    v_ss ~ Lap @ v + bnd * q(t),   bnd = [-2/ds, 0, ..., 0].

The boundary flux is ``q = flux_sign * u`` with ``flux_sign = -1`` by default,
so a positive stimulus ``u`` is an inward current that raises ``v(0)``.

The FOM state is ``[v, w]``; the lifted state is ``[v, w, z]`` with
``z = v**2``. Both take the two-channel input ``[u(t), 1]``.
"""

import numpy as np
import scipy.sparse as sp

from ..systems import Componentwise, GeneralNonlinearSystem, InputSignal, Layout, QBSystem
from ..tensor import MatricizedTensor
from .config import FHNConfig

__all__ = ["neumann_laplacian", "fhn_input", "build_fhn_fom", "build_fhn_lifted_qb",
           "fhn_initial_state", "fhn_stimulus"]


def neumann_laplacian(n, ds):
    """Second-difference matrix with ghost-node flux conditions at both ends.

    Returns ``(Lap, bnd)``; ``bnd`` multiplies the left-boundary flux.
    """
    main = np.full(n, -2.0)
    upper = np.ones(n - 1)
    lower = np.ones(n - 1)
    upper[0] = 2.0
    lower[-1] = 2.0
    Lap = sp.diags([lower, main, upper], [-1, 0, 1], format="csr") / ds**2
    bnd = np.zeros(n)
    bnd[0] = -2.0 / ds
    return Lap, bnd


def fhn_stimulus(t):
    return 5e4 * t**3 * np.exp(-15.0 * t)


def fhn_input():
    return InputSignal(lambda t: np.array([fhn_stimulus(t), 1.0]), 2)


def _grid(cfg):
    ds = cfg.l / (cfg.n - 1)
    return ds, np.linspace(0.0, cfg.l, cfg.n)


def build_fhn_fom(cfg=None):
    """``eps v' = eps^2 v_ss + f(v) - 0.1 v - w + c``, ``w' = h v - gamma w + c``.

    The nodewise nonlinearity is ``g(v) = -v**3 + a v**2``; the linear
    ``-0.1 v`` part lives in ``A``.
    """
    cfg = cfg or FHNConfig()
    n, eps, a = cfg.n, cfg.epsilon, cfg.quadratic_coeff
    ds, _ = _grid(cfg)
    Lap, bnd = neumann_laplacian(n, ds)
    I = sp.identity(n, format="csr")
    A = sp.bmat([[eps**2 * Lap - 0.1 * I, -I], [cfg.h * I, -cfg.gamma * I]], format="csr")
    bnd = cfg.flux_sign * bnd
    B = np.zeros((2 * n, 2))
    B[:n, 0] = eps**2 * bnd
    B[:, 1] = cfg.c
    F = sp.vstack([I, sp.csr_matrix((n, n))], format="csr")
    g = Componentwise(
        fn=lambda v: -v**3 + a * v**2,
        variables=("v",),
        derivs=(lambda v: -3.0 * v**2 + 2.0 * a * v,),
    )
    mass = np.concatenate([np.full(n, eps), np.ones(n)])
    return GeneralNonlinearSystem(A, B, F, g, Layout.uniform(("v", "w"), n), mass=mass)


def build_fhn_lifted_qb(cfg=None, uniform_mass=False):
    """Quadratic-bilinear lift with ``z = v**2``.

    The ``z`` equation is ``2 v`` times the discrete ``v`` equation::

        eps z' = 2 eps^2 v*(Lap v) - 2 z**2 + 2a z v - 0.2 z - 2 w v
                 + 2 eps^2 bnd*v u_1 + 2 c v u_2

    The left-boundary flux enters through the bilinear ``N_1`` term, which is
    the discrete form of ``z_s(0) = 2 v(0) q(t)``. With ``uniform_mass`` the
    ``w`` rows are scaled by ``eps`` so that ``E = eps I``.
    """
    cfg = cfg or FHNConfig()
    n, eps, a = cfg.n, cfg.epsilon, cfg.quadratic_coeff
    ds, _ = _grid(cfg)
    Lap, bnd = neumann_laplacian(n, ds)
    I = sp.identity(n, format="csr")
    bnd = cfg.flux_sign * bnd
    Z = None
    wscale = eps if uniform_mass else 1.0
    A = sp.bmat([
        [eps**2 * Lap - 0.1 * I, -I, a * I],
        [wscale * cfg.h * I, -wscale * cfg.gamma * I, Z],
        [Z, Z, -0.2 * I],
    ], format="csr")
    B = np.zeros((3 * n, 2))
    B[:n, 0] = eps**2 * bnd
    B[:n, 1] = cfg.c
    B[n:2 * n, 1] = wscale * cfg.c

    iv, iw, iz = np.arange(n), n + np.arange(n), 2 * n + np.arange(n)
    Lc = Lap.tocoo()
    rows = [iv, iz[Lc.row], iz, iz, iz]
    idx = [
        np.column_stack([iz, iv]),
        np.column_stack([iv[Lc.row], iv[Lc.col]]),
        np.column_stack([iz, iz]),
        np.column_stack([iz, iv]),
        np.column_stack([iw, iv]),
    ]
    vals = [
        np.full(n, -1.0),
        2.0 * eps**2 * Lc.data,
        np.full(n, -2.0),
        np.full(n, 2.0 * a),
        np.full(n, -2.0),
    ]
    H = MatricizedTensor(3 * n, (3 * n, 3 * n), np.concatenate(rows), np.concatenate(idx),
                         np.concatenate(vals))
    N1 = sp.csr_matrix((2.0 * eps**2 * bnd, (iz, iv)), shape=(3 * n, 3 * n))
    N2 = sp.csr_matrix((np.full(n, 2.0 * cfg.c), (iz, iv)), shape=(3 * n, 3 * n))
    mass = np.full(3 * n, eps)
    if not uniform_mass:
        mass[n:2 * n] = 1.0
    E = sp.diags(mass, format="csr")
    return QBSystem(E, A, B, H, [N1, N2], layout=Layout.uniform(("v", "w", "z"), n))


def fhn_initial_state(cfg=None, lifted=False):
    """Zero initial data (``z = v**2 = 0`` for the lifted form)."""
    cfg = cfg or FHNConfig()
    return np.zeros((3 if lifted else 2) * cfg.n)
