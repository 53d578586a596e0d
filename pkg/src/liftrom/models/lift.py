"""Consistent initial data for lifted states."""

import numpy as np

from .tubular import DomainError

__all__ = ["consistent_lift_ic", "tubular_aux"]


def tubular_aux(psi, theta, gamma):
    """All six auxiliary reactor variables evaluated from their definitions."""
    psi = np.asarray(psi, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if np.any(~(theta > 0)):
        raise DomainError("lifting requires theta > 0")
    w1 = np.exp(gamma - gamma / theta)
    w3 = 1.0 / theta
    w2 = w3 * w3
    return {"w1": w1, "w2": w2, "w3": w3, "w4": psi * w1, "w5": w2 * w3, "w6": w1 * w2}


def consistent_lift_ic(kind, x0, gamma=25.0):
    """Map an original-variable state to its lifted counterpart.

    Parameters
    ----------
    kind : {"fhn", "tubular-quartic", "tubular-qbdae"}
    x0 : original state, ``[v; w]`` or ``[psi; theta]`` (equal halves)
    gamma : Arrhenius constant (tubular kinds only)

    Returns
    -------
    ndarray
        ``[v; w; v**2]``, ``[psi; theta; w1; w2; w3]`` or the eight-block
        QB-DAE state ``[psi; theta; w1; ...; w6]``.
    """
    x0 = np.asarray(x0, dtype=float).ravel()
    if x0.size % 2:
        raise ValueError("original state must hold two equal-length blocks")
    a, b = np.split(x0, 2)
    if kind == "fhn":
        return np.concatenate([a, b, a * a])
    if kind in ("tubular-quartic", "tubular-qbdae"):
        aux = tubular_aux(a, b, gamma)
        names = ("w1", "w2", "w3") if kind == "tubular-quartic" else (
            "w1", "w2", "w3", "w4", "w5", "w6")
        return np.concatenate([a, b] + [aux[k] for k in names])
    raise ValueError(f"unknown lift kind {kind!r}")
