"""Discrete empirical interpolation and POD-DEIM reduced models."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ..systems import GeneralNonlinearSystem
from ..tensor import RankError, thin_svd
from .pod import BlockBasis, numerical_rank
from .project import project_linear

__all__ = ["deim_indices", "DEIMOperator", "deim_build", "ReducedGeneralSystem",
           "build_pod_deim_rom"]


def deim_indices(U):
    """Greedy maximum-residual interpolation indices for the columns of ``U``."""
    U = np.asarray(U, dtype=float)
    n, m = U.shape
    if m == 0:
        return np.zeros(0, dtype=int)
    p = [int(np.argmax(np.abs(U[:, 0])))]
    for j in range(1, m):
        c = np.linalg.solve(U[p, :j], U[p, j])
        res = U[:, j] - U[:, :j] @ c
        p.append(int(np.argmax(np.abs(res))))
    return np.asarray(p, dtype=int)


@dataclass
class DEIMOperator:
    """``f ≈ U (P^T U)^{-1} P^T f`` with interpolation rows ``indices``."""

    U: np.ndarray
    indices: np.ndarray
    sigma: np.ndarray = None

    def __post_init__(self):
        self.U = np.asarray(self.U, dtype=float)
        self.indices = np.asarray(self.indices, dtype=int)
        if len(np.unique(self.indices)) != len(self.indices):
            raise ValueError("DEIM indices must be distinct")
        self._lu = sla.lu_factor(self.U[self.indices]) if len(self.indices) else None

    @property
    def r(self):
        return len(self.indices)

    def coefficients(self, f_sampled):
        """``(P^T U)^{-1} f_p``."""
        return sla.lu_solve(self._lu, np.asarray(f_sampled, dtype=float))

    def approximate(self, f):
        """Interpolant of a full vector ``f`` (for testing and diagnostics)."""
        f = np.asarray(f, dtype=float)
        return self.U @ self.coefficients(f[self.indices])

    def projector_factor(self, Wt):
        """``Wt U (P^T U)^{-1}`` for a (possibly sparse) row operator ``Wt``."""
        WU = np.asarray(Wt @ self.U)
        return sla.lu_solve(self._lu, WU.T, trans=1).T


def deim_build(F_snapshots, r_deim):
    """POD basis of nonlinear-term snapshots plus greedy DEIM points."""
    F = np.asarray(F_snapshots, dtype=float)
    svd = thin_svd(F)
    rank = numerical_rank(svd.sigma, F.shape)
    if r_deim > rank:
        raise RankError(f"r_deim={r_deim} exceeds the numerical rank {rank} of the "
                        f"nonlinear snapshots", rank)
    U = svd.U[:, :r_deim]
    return DEIMOperator(U, deim_indices(U), svd.sigma)


class ReducedGeneralSystem:
    """POD (or POD-DEIM) ROM of ``E x' = A x + B u + F g(x)``.

    With DEIM the nonlinear term is evaluated only at the interpolation
    rows, using the sampled rows of the state basis; without DEIM
    (plain POD reference) ``g`` is evaluated on the full lifted state.
    """

    def __init__(self, fom: GeneralNonlinearSystem, basis: BlockBasis, deim=None):
        if basis.full_layout != fom.layout:
            raise ValueError(f"basis layout {basis.full_layout} does not match "
                             f"{fom.layout}")
        self.basis = basis
        self.layout = basis.reduced_layout
        self.A = project_linear(fom.A, basis, basis)
        self.B = basis.project(fom.B)
        self.mass = None
        if fom.mass is not None:
            M = sp.diags(fom.mass) if np.ndim(fom.mass) == 1 else fom.mass
            Mr = project_linear(M, basis, basis)
            diag = np.diag(Mr)
            self.mass = diag.copy() if np.allclose(Mr, np.diag(diag), atol=1e-14) else Mr
        self.g = fom.g
        self.deim = deim
        n_g = fom.F.shape[1]
        if deim is None:
            self._fom = fom
            self.Fr = (basis.matrix().T @ fom.F).toarray()
            return
        if deim.U.shape[0] != n_g:
            raise ValueError("DEIM basis length does not match the nonlinear term")
        if deim.indices.max(initial=-1) >= n_g:
            raise IndexError("DEIM index outside the nonlinear term range")
        self._fom = None
        self.Fr = deim.projector_factor(basis.matrix().T @ fom.F)
        # sampled basis rows per variable read by g
        self.samples = []
        for name in self.g.variables:
            b = basis.names.index(name)
            S = np.zeros((deim.r, basis.r))
            o = basis.red_offsets[b]
            S[:, o:o + basis.red_sizes[b]] = basis.V[b][deim.indices]
            self.samples.append(S)

    dim = property(lambda self: self.basis.r)
    n_inputs = property(lambda self: self.B.shape[1])
    linear = property(lambda self: self.A)

    def _sampled(self, xr):
        return [S @ xr for S in self.samples]

    def nonlinear_reduced(self, xr):
        if self.deim is None:
            return self.Fr @ self._fom.nonlinear_term(self.basis.lift(xr))
        return self.Fr @ self.g.fn(*self._sampled(xr))

    def rhs(self, xr, u):
        xr = np.asarray(xr, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        return self.A @ xr + self.B @ u + self.nonlinear_reduced(xr)

    def jacobian(self, xr, u):
        xr = np.asarray(xr, dtype=float)
        if self.deim is None:
            V = self.basis.matrix()
            Jf = self._fom.jacobian(self.basis.lift(xr), u) - self._fom.A
            return self.A + (V.T @ (Jf @ V)).toarray()
        args = self._sampled(xr)
        J = np.array(self.A, dtype=float)
        for d, S in zip(self.g.derivs, self.samples):
            J += self.Fr @ (d(*args)[:, None] * S)
        return J

    def lift(self, xr):
        return self.basis.lift(xr)


def build_pod_deim_rom(fom: GeneralNonlinearSystem, basis: BlockBasis, deim=None):
    """POD-DEIM ROM (``deim=None`` gives the plain POD reference model)."""
    return ReducedGeneralSystem(fom, basis, deim)
