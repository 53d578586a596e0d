"""Snapshot sets and per-variable POD bases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..systems import Layout, Trajectory
from ..tensor import RankError, method_of_snapshots, thin_svd

__all__ = ["SnapshotSet", "collect_snapshots", "nonlinear_snapshots", "PODBasis",
           "compute_pod_basis", "BlockBasis", "numerical_rank"]


@dataclass
class SnapshotSet:
    """Per-variable snapshot matrices on a shared, equidistant time grid."""

    t: np.ndarray
    mats: dict
    layout: Layout

    def __post_init__(self):
        counts = {m.shape[1] for m in self.mats.values()}
        if len(counts) > 1:
            raise ValueError("all variables need the same number of snapshots")
        if len(self.t) > 2:
            dt = np.diff(self.t)
            if np.ptp(dt) > 1e-9 * max(abs(dt).max(), 1.0):
                raise ValueError("snapshot times must be equidistant")

    @property
    def n_snapshots(self):
        return len(self.t)

    def __getitem__(self, name):
        return self.mats[name]


def collect_snapshots(traj: Trajectory, names=None, t_end=None, count=None):
    """Slice per-variable snapshot matrices out of a trajectory.

    The training window keeps either the first ``count`` columns or all
    columns with ``t <= t_end`` (both given: the stricter one).
    """
    names = list(names) if names is not None else traj.layout.names
    keep = np.ones(len(traj.t), dtype=bool)
    if t_end is not None:
        keep &= traj.t <= t_end + 1e-12 * max(1.0, abs(t_end))
    if count is not None:
        keep &= np.arange(len(traj.t)) < count
    if not keep.any():
        raise ValueError("training window contains no snapshots")
    mats = {name: traj.var(name)[:, keep] for name in names}
    return SnapshotSet(traj.t[keep], mats, traj.layout.sub(names))


def nonlinear_snapshots(system, traj: Trajectory, t_end=None, count=None):
    """Snapshots of the nodewise nonlinearity ``g(x(t_i))`` of a general system."""
    keep = np.ones(len(traj.t), dtype=bool)
    if t_end is not None:
        keep &= traj.t <= t_end + 1e-12 * max(1.0, abs(t_end))
    if count is not None:
        keep &= np.arange(len(traj.t)) < count
    if not keep.any():
        raise ValueError("training window contains no snapshots")
    cols = [system.nonlinear_term(traj.states[:, j]) for j in np.flatnonzero(keep)]
    return np.column_stack(cols)


def numerical_rank(sigma, shape):
    if len(sigma) == 0 or sigma[0] == 0:
        return 0
    tol = max(shape) * np.finfo(float).eps * sigma[0]
    return int(np.sum(sigma > tol))


@dataclass
class PODBasis:
    """Orthonormal basis block per variable plus the full singular spectra."""

    layout: Layout
    V: dict
    sigma: dict
    modes: dict = field(default_factory=dict)

    @property
    def sizes(self):
        return {name: self.V[name].shape[1] for name in self.layout.names}

    @property
    def r(self):
        return sum(self.sizes.values())

    def block(self, names=None):
        names = self.layout.names if names is None else list(names)
        return BlockBasis([(name, self.layout.size(name), self.V[name]) for name in names])


def compute_pod_basis(snapshots: SnapshotSet, r, modes=None, method="svd"):
    """POD basis with ``r[var]`` modes per variable (``r`` may be an int).

    ``modes`` optionally lists explicit 1-based mode indices per variable
    (default ``1..r``). ``method="snapshots"`` uses the Gram-matrix route.
    """
    names = snapshots.layout.names
    if np.isscalar(r):
        r = {name: int(r) for name in names}
    modes = dict(modes or {})
    V, sig, chosen = {}, {}, {}
    for name in names:
        X = snapshots[name]
        svd = thin_svd(X)
        sig[name] = svd.sigma
        rank = numerical_rank(svd.sigma, X.shape)
        idx = np.asarray(modes.get(name, np.arange(1, r[name] + 1)), dtype=int) - 1
        if len(idx) and (idx.min() < 0 or idx.max() >= rank):
            raise RankError(f"variable {name!r}: requested mode {idx.max() + 1} but the "
                            f"snapshot matrix has numerical rank {rank}", rank)
        if method == "snapshots" and np.array_equal(idx, np.arange(len(idx))):
            V[name] = method_of_snapshots(X, len(idx))
        elif method in ("svd", "snapshots"):
            V[name] = svd.U[:, idx]
        else:
            raise ValueError(f"unknown POD method {method!r}")
        chosen[name] = idx + 1
    return PODBasis(snapshots.layout, V, sig, chosen)


class BlockBasis:
    """Block-diagonal projection matrix ``blkdiag(V_1, ..., V_b)``.

    ``blocks`` is a list of ``(name, full_size, V)``; ``V`` is
    ``full_size x r_b`` (``None`` means the identity).
    """

    def __init__(self, blocks):
        self.names, self.V, self.full_offsets, self.red_offsets = [], [], [], []
        self.full_sizes, self.red_sizes = [], []
        fo = ro = 0
        for name, size, V in blocks:
            V = np.eye(size) if V is None else np.asarray(V, dtype=float)
            if V.shape[0] != size:
                raise ValueError(f"block {name!r}: basis has {V.shape[0]} rows, expected {size}")
            self.names.append(name)
            self.V.append(V)
            self.full_offsets.append(fo)
            self.red_offsets.append(ro)
            self.full_sizes.append(size)
            self.red_sizes.append(V.shape[1])
            fo += size
            ro += V.shape[1]
        self.n, self.r = fo, ro

    @classmethod
    def identity(cls, layout, names=None):
        names = layout.names if names is None else names
        return cls([(name, layout.size(name), None) for name in names])

    def __add__(self, other):
        return BlockBasis(list(zip(self.names, self.full_sizes, self.V))
                          + list(zip(other.names, other.full_sizes, other.V)))

    @property
    def full_layout(self):
        return Layout(list(zip(self.names, self.full_sizes)))

    @property
    def reduced_layout(self):
        return Layout(list(zip(self.names, self.red_sizes)))

    def matrix(self):
        return sp.block_diag(self.V, format="csr") if self.V else sp.csr_matrix((0, 0))

    def project(self, x):
        """``V^T x`` for a vector or column-stacked states."""
        x = np.asarray(x, dtype=float)
        parts = [V.T @ x[fo:fo + n] for V, fo, n in zip(self.V, self.full_offsets,
                                                        self.full_sizes)]
        return np.concatenate(parts, axis=0)

    def lift(self, xr):
        """``V xr`` for a vector or column-stacked reduced states."""
        xr = np.asarray(xr, dtype=float)
        parts = [V @ xr[ro:ro + r] for V, ro, r in zip(self.V, self.red_offsets,
                                                       self.red_sizes)]
        return np.concatenate(parts, axis=0)

    def locate(self, idx):
        """Block number and local index for full-space indices."""
        b = np.searchsorted(np.asarray(self.full_offsets), idx, side="right") - 1
        return b, idx - np.asarray(self.full_offsets)[b]
