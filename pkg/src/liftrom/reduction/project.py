"""Galerkin projection of polynomial systems with precomputed reduced operators.

Every reduced tensor is assembled nonzero by nonzero from the sparse full
tensor: entries that share a row block and the same input blocks are
grouped, and each group contributes

    Vout[rows]^T diag(values) (V_1[i_1] ⊙ ... ⊙ V_k[i_k])

(row-wise Khatri-Rao product) to one dense block of a :class:`BlockTensor`.
No Kronecker factor of full dimension is ever formed.
"""

from __future__ import annotations

from functools import reduce
from math import prod

import numpy as np
import scipy.sparse as sp

from ..systems import Layout, QBSystem, QuarticSystem, StructuredQBDAE, _dense
from ..tensor import BlockTensor, MatricizedTensor
from .pod import BlockBasis

__all__ = ["project_linear", "project_tensor", "project_quartic", "project_qb",
           "project_qbdae", "precompute_substituted_ode", "ReducedQuartic", "ReducedQB",
           "ReducedQBDAE", "SubstitutedODE", "DEFAULT_BUDGET"]

# stored entries allowed in any single precomputed reduced tensor
DEFAULT_BUDGET = 2**25
_CHUNK = 2**22


def project_linear(M, Wout: BlockBasis, Win: BlockBasis):
    """``Wout^T M Win`` as a dense array."""
    if M is None:
        return None
    Vo, Vi = Wout.matrix(), Win.matrix()
    out = Vo.T @ (M @ Vi)
    return np.asarray(_dense(out))


def _khatri_rao_rows(mats):
    """Row-wise Kronecker product of equally tall matrices."""
    return reduce(lambda a, b: (a[:, :, None] * b[:, None, :]).reshape(a.shape[0], -1), mats)


def project_tensor(G: MatricizedTensor, Wout: BlockBasis, Wins, budget=DEFAULT_BUDGET):
    """``Wout^T G (W_1 ⊗ ... ⊗ W_k)`` as a block-sparse dense tensor.

    Parameters
    ----------
    G : MatricizedTensor
    Wout : BlockBasis for the rows
    Wins : BlockBasis, or one per factor
    budget : int
        Upper bound on stored entries; exceeded budgets raise MemoryError
        before any block is computed.
    """
    k = G.order
    if isinstance(Wins, BlockBasis):
        Wins = [Wins] * k
    if G.out_dim != Wout.n or tuple(W.n for W in Wins) != G.in_dims:
        raise ValueError(f"basis dimensions {Wout.n} x {[W.n for W in Wins]} do not match "
                         f"tensor {G.out_dim} x {G.in_dims}")
    T = BlockTensor(Wout.r, tuple(W.r for W in Wins))
    if G.nnz == 0:
        return T
    ob, ol = Wout.locate(G.rows)
    ib, il = zip(*(W.locate(G.indices[:, p]) for p, W in enumerate(Wins)))
    sig = np.column_stack((ob,) + ib)
    keys, inverse = np.unique(sig, axis=0, return_inverse=True)
    inverse = inverse.ravel()

    shapes = []
    for key in keys:
        shapes.append((Wout.red_sizes[key[0]],)
                      + tuple(W.red_sizes[b] for W, b in zip(Wins, key[1:])))
    total = sum(prod(s) for s in shapes)
    if total > budget:
        raise MemoryError(f"projected tensor needs {total} entries (budget {budget})")

    order = np.argsort(inverse, kind="stable")
    bounds = np.searchsorted(inverse[order], np.arange(len(keys) + 1))
    for g, key in enumerate(keys):
        sel = order[bounds[g]:bounds[g + 1]]
        shape = shapes[g]
        if 0 in shape:
            continue
        Vo = Wout.V[key[0]]
        width = prod(shape[1:])
        acc = np.zeros((shape[0], width))
        step = max(1, _CHUNK // max(width, 1))
        for c0 in range(0, len(sel), step):
            s = sel[c0:c0 + step]
            left = Vo[ol[s]] * G.values[s][:, None]
            right = _khatri_rao_rows([W.V[b][il[p][s]] for p, (W, b)
                                      in enumerate(zip(Wins, key[1:]))])
            acc += left.T @ right
        o0 = Wout.red_offsets[key[0]]
        ins = [(W.red_offsets[b], W.red_offsets[b] + W.red_sizes[b])
               for W, b in zip(Wins, key[1:])]
        T.add_block((o0, o0 + shape[0]), ins, acc.reshape(shape))
    return T


def _project_mass(mass, W: BlockBasis):
    if mass is None:
        return None
    if isinstance(mass, np.ndarray) and mass.ndim == 1:
        mass = sp.diags(mass)
    return project_linear(mass, W, W)


class ReducedQuartic(QuarticSystem):
    """Quartic ROM; ``basis`` maps reduced to full coordinates."""

    basis: BlockBasis = None

    def lift(self, xr):
        return self.basis.lift(xr)


class ReducedQB(QBSystem):
    """Projected QB ODE (nonsingular mass)."""

    basis: BlockBasis = None

    def lift(self, xr):
        return self.basis.lift(xr)


def project_quartic(system: QuarticSystem, basis: BlockBasis, budget=DEFAULT_BUDGET):
    """Galerkin ROM ``V^T f(V xr)`` of a quartic system with precomputed tensors."""
    if basis.full_layout != system.layout:
        raise ValueError(f"basis layout {basis.full_layout} does not match "
                         f"system layout {system.layout}")
    G = {k: None if Gk is None else project_tensor(Gk, basis, basis, budget)
         for k, Gk in system.G.items()}
    rom = ReducedQuartic(
        project_linear(system.A, basis, basis), basis.project(system.B),
        G[2], G[3], G[4],
        N1=[project_linear(N, basis, basis) for N in system.N1],
        N2=[None if N is None else project_tensor(N, basis, basis, budget) for N in system.N2],
        layout=basis.reduced_layout, mass=_project_mass(system.mass, basis),
    )
    rom.basis = basis
    return rom


def project_qb(system: QBSystem, basis: BlockBasis, budget=DEFAULT_BUDGET):
    """Galerkin ROM of a QB ODE (no algebraic partition)."""
    if system.n1 != system.dim:
        raise ValueError("use project_qbdae for partitioned systems")
    if basis.full_layout != system.layout:
        raise ValueError(f"basis layout {basis.full_layout} does not match "
                         f"system layout {system.layout}")
    rom = ReducedQB(project_linear(system.E, basis, basis),
                    project_linear(system.A, basis, basis), basis.project(system.B),
                    project_tensor(system.H, basis, basis, budget),
                    [project_linear(N, basis, basis) for N in system.N],
                    layout=basis.reduced_layout)
    rom.basis = basis
    return rom


class ReducedQBDAE(StructuredQBDAE):
    """Structure-preserving QB-DAE ROM::

        E11 x1' = A11 x1 + A12 x2 + B1 u + H1 (x ⊗ x) + sum_k (N11_k x1 + N12_k x2) u_k
              0 = x2 - H2 (x1 ⊗ x1)

    with all blocks of reduced size. ``H2t`` holds the reduced ``H2``.
    """

    basis1: BlockBasis = None
    basis2: BlockBasis = None

    @property
    def H2(self):
        return self.H2t

    def lift(self, xr1, with_constrained=True):
        """Full-space state ``[V1 xr1; V2 xr2]`` (or just ``V1 xr1``)."""
        x1 = self.basis1.lift(xr1)
        if not with_constrained:
            return x1
        xr1 = np.asarray(xr1, dtype=float)
        if xr1.ndim == 1:
            xr2 = self.H2t.apply(xr1)
        else:
            xr2 = np.column_stack([self.H2t.apply(c) for c in xr1.T])
        return np.concatenate([x1, self.basis2.lift(xr2)])

    def as_qb_system(self):
        """Assembled reduced QB-DAE ``(E, A, B, H, N)`` with the partition."""
        r1, r2 = self.n1, self.n2
        r = r1 + r2
        E = np.zeros((r, r))
        E[:r1, :r1] = _dense(self.E11)
        A = np.zeros((r, r))
        A[:r1, :r1] = self.A11
        A[:r1, r1:] = self.A12
        A[r1:, r1:] = np.eye(r2)
        B = np.vstack([self.B1, np.zeros((r2, self.n_inputs))])
        H1 = self.H1.to_matricized()
        H2 = self.H2t.to_matricized()
        H = MatricizedTensor(r, (r, r),
                             np.concatenate([H1.rows, H2.rows + r1]),
                             np.concatenate([H1.indices, H2.indices]),
                             np.concatenate([H1.values, -H2.values]))
        N = []
        for N11, N12 in zip(self.N11, self.N12):
            Nk = np.zeros((r, r))
            if N11 is not None:
                Nk[:r1, :r1] = N11
            if N12 is not None:
                Nk[:r1, r1:] = N12
            N.append(Nk)
        names = self.basis1.names + self.basis2.names if self.basis1 else None
        layout = Layout(list(zip(names, self.basis1.red_sizes + self.basis2.red_sizes))) \
            if names else None
        return QBSystem(E, A, B, H, N, layout=layout, n1=r1)


def project_qbdae(system, V1: BlockBasis, V2: BlockBasis, budget=DEFAULT_BUDGET):
    """Structure-preserving projection of a partitioned QB-DAE.

    ``V1`` acts on the differential block ``x1`` and ``V2`` on the
    constrained block ``x2``. The reduced constraint is
    ``0 = xr2 - V2^T H2t (V1 xr1 ⊗ V1 xr1)``.
    """
    s = system.structured() if isinstance(system, QBSystem) else system
    if V1.n != s.n1 or V2.n != s.n2:
        raise ValueError(f"bases of size ({V1.n}, {V2.n}) do not match partition "
                         f"({s.n1}, {s.n2})")
    if s.layout is not None and (V1 + V2).full_layout != s.layout:
        raise ValueError(f"basis layout {(V1 + V2).full_layout} does not match {s.layout}")
    V = V1 + V2
    E11 = sp.identity(s.n1, format="csr") if s.E11 is None else s.E11
    rom = ReducedQBDAE(
        E11=project_linear(E11, V1, V1),
        A11=project_linear(s.A11, V1, V1),
        A12=project_linear(s.A12, V1, V2),
        B1=V1.project(s.B1),
        H1=project_tensor(s.H1, V1, V, budget),
        H2t=project_tensor(s.H2t, V2, V1, budget),
        N11=[project_linear(N, V1, V1) for N in s.N11],
        N12=[project_linear(N, V1, V2) for N in s.N12],
        layout=V.reduced_layout,
        x1_layout=V1.reduced_layout,
    )
    rom.basis1, rom.basis2 = V1, V2
    return rom


class SubstitutedODE(QuarticSystem):
    """Reduced QB-DAE with ``xr2`` eliminated, stored as a quartic ODE in ``xr1``.

    ``G2 = T2 + A12 H2``, ``G3 = T3``, ``G4 = T4`` and ``N2 = N12 H2`` where
    ``[T2, T3, T4] = H1 (P ⊗ P)`` with ``P = blkdiag(I, H2)`` is the
    substituted quadratic operator (column blocks of width r1^2, r1^3, r1^4).
    """

    source: ReducedQBDAE = None
    T: dict = None
    A12H2: np.ndarray = None
    N12H2: list = None

    @property
    def H1_tilde(self):
        r1 = self.dim
        return np.hstack([self.T[2].reshape(r1, -1), self.T[3].reshape(r1, -1),
                          self.T[4].reshape(r1, -1)])

    def constrained(self, xr1):
        return self.source.H2t.apply(xr1)

    def lift(self, xr1, with_constrained=True):
        return self.source.lift(xr1, with_constrained)


def _full_block(T):
    return BlockTensor(T.shape[0], T.shape[1:], {((0, T.shape[0]), tuple((0, d) for d in T.shape[1:])): T})


def precompute_substituted_ode(rom: ReducedQBDAE, budget=DEFAULT_BUDGET):
    """Eliminate ``xr2 = H2 (xr1 ⊗ xr1)`` offline (mixed-product identity).

    Raises MemoryError when ``r1 (r1^2 + r1^3 + r1^4)`` exceeds ``budget``.
    """
    r1, r2 = rom.n1, rom.n2
    need = r1 * (r1**2 + r1**3 + r1**4)
    if need > budget:
        raise MemoryError(f"substituted operator needs {need} entries (budget {budget})")
    r = r1 + r2
    Hd = rom.H1.to_dense().reshape(r1, r, r)
    H2 = rom.H2t.to_dense().reshape(r2, r1, r1)
    H11, H12 = Hd[:, :r1, :r1], Hd[:, :r1, r1:]
    H21, H22 = Hd[:, r1:, :r1], Hd[:, r1:, r1:]
    # x ⊗ x with x = [x1; H2 (x1 ⊗ x1)] splits into orders 2, 3 and 4 in x1
    T2 = H11
    T3 = (np.einsum("aim,mjk->aijk", H12, H2)
          + np.einsum("amk,mij->aijk", H21, H2))
    tmp = np.einsum("amp,mij->apij", H22, H2)
    T4 = np.einsum("apij,pkl->aijkl", tmp, H2)
    A12H2 = np.asarray(rom.A12) @ H2.reshape(r2, -1)
    N12H2 = [None if N is None else np.asarray(N) @ H2.reshape(r2, -1) for N in rom.N12]

    G2 = _full_block(T2 + A12H2.reshape(r1, r1, r1))
    N2 = [None if M is None else _full_block(M.reshape(r1, r1, r1)) for M in N12H2]
    out = SubstitutedODE(np.asarray(rom.A11), rom.B1, G2, _full_block(T3), _full_block(T4),
                         N1=[None if N is None else np.asarray(N) for N in rom.N11], N2=N2,
                         layout=rom.x1_layout, mass=rom.E11)
    out.source = rom
    out.T = {2: T2, 3: T3, 4: T4}
    out.A12H2 = A12H2
    out.N12H2 = N12H2
    return out
