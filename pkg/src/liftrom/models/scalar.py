"""The scalar lifting example ``x' = x**4 + u`` in its three equivalent forms.

The QB matrices are entered with 1-based ``(row, column)`` pairs exactly as
they are usually written, then shifted to 0-based storage.
"""

import numpy as np

from ..systems import Layout, QBSystem, QuarticSystem
from ..tensor import MatricizedTensor

__all__ = ["scalar_quartic", "scalar_qb_ode", "scalar_qb_dae", "scalar_lift_ic", "scalar_exact"]


def _from_one_based(out_dim, in_dims, entries):
    rows = [r - 1 for r, _, _ in entries]
    flat = [c - 1 for _, c, _ in entries]
    vals = [v for _, _, v in entries]
    return MatricizedTensor.from_flat(out_dim, in_dims, rows, flat, vals)


def scalar_quartic():
    """``x' = x**4 + u`` as a one-dimensional quartic system."""
    G4 = MatricizedTensor(1, (1, 1, 1, 1), [0], [[0, 0, 0, 0]], [1.0])
    return QuarticSystem(A=np.zeros((1, 1)), B=np.ones((1, 1)), G4=G4,
                         layout=Layout([("x", 1)]))


def scalar_qb_ode():
    """Four-variable QB-ODE in ``[x, w1, w2, w3]`` with ``w1=x**2, w2=w1**2, w3=x*w1``."""
    E = np.eye(4)
    A = np.zeros((4, 4))
    A[0, 2] = 1.0
    N1 = np.zeros((4, 4))
    N1[1, 0], N1[2, 3], N1[3, 1] = 2.0, 4.0, 3.0
    B = np.array([[1.0], [0.0], [0.0], [0.0]])
    H = _from_one_based(4, (4, 4), [(2, 3, 2.0), (3, 12, 4.0), (4, 7, 3.0)])
    layout = Layout([("x", 1), ("w1", 1), ("w2", 1), ("w3", 1)])
    return QBSystem(E, A, B, H, [N1], layout=layout)


def scalar_qb_dae():
    """Two-variable QB-DAE ``x' = w1**2 + u``, ``0 = w1 - x**2``."""
    E = np.array([[1.0, 0.0], [0.0, 0.0]])
    A = np.array([[0.0, 0.0], [0.0, 1.0]])
    H = _from_one_based(2, (2, 2), [(1, 4, 1.0), (2, 1, -1.0)])
    N1 = np.zeros((2, 2))
    B = np.array([[1.0], [0.0]])
    layout = Layout([("x", 1), ("w1", 1)])
    return QBSystem(E, A, B, H, [N1], layout=layout, n1=1)


def scalar_lift_ic(x0, kind="qb-ode"):
    """Consistent lifted initial state for the scalar example."""
    x0 = float(x0)
    if kind == "qb-ode":
        w1 = x0**2
        return np.array([x0, w1, w1**2, x0 * w1])
    if kind == "qb-dae":
        return np.array([x0, x0**2])
    raise ValueError(f"unknown scalar lift kind {kind!r}")


def scalar_exact(x0, t):
    """Closed-form solution of ``x' = x**4`` (zero input)."""
    return (x0**-3 - 3.0 * np.asarray(t, dtype=float)) ** (-1.0 / 3.0)
