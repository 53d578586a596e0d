"""Kronecker products, matricized tensors and snapshot SVD kernels.

Index convention
----------------
A matricized order-``k`` tensor ``G`` of shape ``n x (n_1 n_2 ... n_k)`` acts on
``x_1 ⊗ x_2 ⊗ ... ⊗ x_k``. The flat column index of the sub-index tuple
``(j_1, ..., j_k)`` is lexicographic (first factor most significant), i.e. the
ordering produced by ``np.kron``. Indices are 0-based throughout; the 1-based
entry ``H_{2,3}`` of a ``4 x 16`` tensor is row 1, flat column 2 here.

Dense matrices are plain C-ordered (row-major) ``numpy`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from math import prod

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

__all__ = [
    "kron_vec",
    "kron_power",
    "MatricizedTensor",
    "BlockTensor",
    "apply_matricized",
    "SVDResult",
    "thin_svd",
    "method_of_snapshots",
    "RankError",
    "matrix_to_json",
    "matrix_from_json",
]

# Refuse to materialize dense Kronecker-sized objects above this many entries.
DENSE_LIMIT = 2**26


class RankError(ValueError):
    """Requested basis size exceeds the numerical rank of the data."""

    def __init__(self, message, numerical_rank):
        super().__init__(message)
        self.numerical_rank = numerical_rank


def kron_vec(x, y):
    """Kronecker product of two vectors, ``out[i*len(y) + j] = x[i]*y[j]``."""
    return np.kron(np.asarray(x, dtype=float).ravel(), np.asarray(y, dtype=float).ravel())


def kron_power(x, k):
    """``x ⊗ x ⊗ ... ⊗ x`` with ``k`` factors."""
    x = np.asarray(x, dtype=float).ravel()
    return reduce(np.kron, [x] * k)


class MatricizedTensor:
    """Sparse matricized order-``k`` tensor in coordinate format.

    Parameters
    ----------
    out_dim : int
        Number of rows.
    in_dims : sequence of int
        Length of each Kronecker factor; the tensor has ``prod(in_dims)``
        columns.
    rows : (nnz,) int array
    indices : (nnz, k) int array
        Sub-indices of each nonzero, one column per Kronecker factor.
    values : (nnz,) float array

    Duplicate ``(row, indices)`` entries are summed on construction and
    explicit zeros are dropped. Instances are treated as immutable.
    """

    def __init__(self, out_dim, in_dims, rows=(), indices=None, values=()):
        self.out_dim = int(out_dim)
        self.in_dims = tuple(int(d) for d in in_dims)
        if len(self.in_dims) < 1:
            raise ValueError("a matricized tensor needs at least one factor")
        k = len(self.in_dims)
        rows = np.asarray(rows, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if indices is None:
            indices = np.zeros((0, k), dtype=np.int64)
        indices = np.asarray(indices, dtype=np.int64).reshape(-1, k)
        if not (len(rows) == len(values) == len(indices)):
            raise ValueError("rows, indices and values must have equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= self.out_dim:
                raise IndexError("row index out of range")
            for p, d in enumerate(self.in_dims):
                col = indices[:, p]
                if col.min() < 0 or col.max() >= d:
                    raise IndexError(f"index of factor {p} out of range (dim {d})")
            if not np.all(np.isfinite(values)):
                raise ValueError("tensor values must be finite")
            rows, indices, values = _coalesce(rows, indices, values, self.in_dims)
        self.rows = rows
        self.indices = indices
        self.values = values
        for arr in (self.rows, self.indices, self.values):
            arr.setflags(write=False)

    # construction helpers -------------------------------------------------
    @classmethod
    def zeros(cls, out_dim, in_dims):
        return cls(out_dim, in_dims)

    @classmethod
    def from_flat(cls, out_dim, in_dims, rows, flat, values):
        """Build from flat (Kronecker) column indices."""
        flat = np.asarray(flat, dtype=np.int64).ravel()
        if len(flat) and (flat.min() < 0 or flat.max() >= prod(in_dims)):
            raise IndexError("flat column index out of range")
        idx = np.stack(np.unravel_index(flat, tuple(in_dims)), axis=1) if len(flat) else None
        return cls(out_dim, in_dims, rows, idx, values)

    @classmethod
    def from_dense(cls, dense, in_dims):
        dense = np.asarray(dense, dtype=float)
        dense = dense.reshape(dense.shape[0], -1)
        r, c = np.nonzero(dense)
        return cls.from_flat(dense.shape[0], in_dims, r, c, dense[r, c])

    # properties -----------------------------------------------------------
    @property
    def order(self):
        return len(self.in_dims)

    @property
    def nnz(self):
        return len(self.values)

    @property
    def shape(self):
        return (self.out_dim, prod(self.in_dims))

    @property
    def flat(self):
        if not self.nnz:
            return np.zeros(0, dtype=np.int64)
        return np.ravel_multi_index(tuple(self.indices.T), self.in_dims)

    def __repr__(self):
        return (f"MatricizedTensor(out_dim={self.out_dim}, in_dims={self.in_dims}, "
                f"nnz={self.nnz})")

    # evaluation -----------------------------------------------------------
    def apply(self, *xs):
        """Evaluate ``G (x_1 ⊗ ... ⊗ x_k)`` without forming the Kronecker vector.

        A single argument is broadcast to all ``k`` factors.
        """
        xs = self._factors(xs)
        terms = self.values.copy()
        for p, x in enumerate(xs):
            terms *= x[self.indices[:, p]]
        return np.bincount(self.rows, weights=terms, minlength=self.out_dim)

    __call__ = apply

    def _factors(self, xs):
        if len(xs) == 1 and self.order > 1:
            xs = xs * self.order
        if len(xs) != self.order:
            raise ValueError(f"expected {self.order} factors, got {len(xs)}")
        out = []
        for p, (x, d) in enumerate(zip(xs, self.in_dims)):
            x = np.asarray(x, dtype=float).ravel()
            if x.shape[0] != d:
                raise ValueError(f"factor {p} has length {x.shape[0]}, expected {d}")
            out.append(x)
        return out

    def jacobian(self, x):
        """Sparse Jacobian of ``x -> G (x ⊗ ... ⊗ x)``; requires equal in_dims."""
        if len(set(self.in_dims)) != 1:
            raise ValueError("jacobian needs all factors of equal length")
        (x,) = self._factors((x,))[:1]
        n = self.in_dims[0]
        if not self.nnz:
            return sp.csr_matrix((self.out_dim, n))
        k = self.order
        picked = np.stack([x[self.indices[:, p]] for p in range(k)], axis=1)
        rows, cols, vals = [], [], []
        for p in range(k):
            others = np.prod(np.delete(picked, p, axis=1), axis=1) if k > 1 else 1.0
            rows.append(self.rows)
            cols.append(self.indices[:, p])
            vals.append(self.values * others)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.out_dim, n),
        )

    # transformations ------------------------------------------------------
    def to_dense(self):
        size = self.out_dim * prod(self.in_dims)
        if size > DENSE_LIMIT:
            raise MemoryError(f"dense tensor would have {size} entries")
        out = np.zeros(self.shape)
        np.add.at(out, (self.rows, self.flat), self.values)
        return out

    def scaled(self, alpha):
        return MatricizedTensor(self.out_dim, self.in_dims, self.rows, self.indices,
                                alpha * self.values)

    def __add__(self, other):
        if not isinstance(other, MatricizedTensor):
            return NotImplemented
        if (other.out_dim, other.in_dims) != (self.out_dim, self.in_dims):
            raise ValueError("tensor shapes differ")
        return MatricizedTensor(
            self.out_dim, self.in_dims,
            np.concatenate([self.rows, other.rows]),
            np.concatenate([self.indices, other.indices]),
            np.concatenate([self.values, other.values]),
        )

    def symmetrized(self):
        """Average over all factor permutations; same action on ``x ⊗ ... ⊗ x``."""
        from itertools import permutations

        perms = list(permutations(range(self.order)))
        return MatricizedTensor(
            self.out_dim, self.in_dims,
            np.tile(self.rows, len(perms)),
            np.concatenate([self.indices[:, list(p)] for p in perms]),
            np.tile(self.values / len(perms), len(perms)),
        )

    def select(self, row_range, col_ranges):
        """Sub-tensor with rows in ``row_range`` and factor ``p`` restricted to
        ``col_ranges[p]`` (``(start, stop)`` pairs); indices are renumbered.

        Nonzeros falling outside the selection are dropped.
        """
        r0, r1 = row_range
        keep = (self.rows >= r0) & (self.rows < r1)
        for p, (c0, c1) in enumerate(col_ranges):
            keep &= (self.indices[:, p] >= c0) & (self.indices[:, p] < c1)
        offsets = np.array([c0 for c0, _ in col_ranges], dtype=np.int64)
        dims = [c1 - c0 for c0, c1 in col_ranges]
        return MatricizedTensor(r1 - r0, dims, self.rows[keep] - r0,
                                self.indices[keep] - offsets, self.values[keep])

    # serialization --------------------------------------------------------
    def to_json(self):
        return {
            "out_dim": self.out_dim,
            "order": self.order,
            "in_dims": list(self.in_dims),
            "nnz": [[int(r), int(f), float(v)]
                    for r, f, v in zip(self.rows, self.flat, self.values)],
        }

    @classmethod
    def from_json(cls, data):
        if len(data["in_dims"]) != data["order"]:
            raise ValueError("order does not match in_dims")
        nnz = np.asarray(data["nnz"], dtype=float).reshape(-1, 3)
        return cls.from_flat(data["out_dim"], data["in_dims"], nnz[:, 0].astype(np.int64),
                             nnz[:, 1].astype(np.int64), nnz[:, 2])


def _coalesce(rows, indices, values, in_dims):
    keys = np.column_stack([rows, indices])
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    summed = np.bincount(inverse.ravel(), weights=values, minlength=len(uniq))
    keep = summed != 0.0
    uniq = uniq[keep]
    return (np.ascontiguousarray(uniq[:, 0]), np.ascontiguousarray(uniq[:, 1:]),
            summed[keep])


def apply_matricized(G, xs):
    """Evaluate the matricized tensor ``G`` on the Kronecker product of ``xs``."""
    return G.apply(*xs)


class BlockTensor:
    """Block-sparse dense tensor, used for projected (reduced) operators.

    The tensor has ``out_dim`` rows and ``len(in_dims)`` factors. It is stored
    as a dictionary of dense blocks keyed by ``(out_slice, in_slices)`` where
    each slice is a ``(start, stop)`` pair. A block array has shape
    ``(out_len, in_len_1, ..., in_len_k)``. The matricized form is recovered
    with :meth:`to_dense`.
    """

    def __init__(self, out_dim, in_dims, blocks=None):
        self.out_dim = int(out_dim)
        self.in_dims = tuple(int(d) for d in in_dims)
        self.blocks = {}
        for key, arr in (blocks or {}).items():
            self.add_block(key[0], key[1], arr)

    def add_block(self, out_slice, in_slices, arr):
        out_slice = tuple(out_slice)
        in_slices = tuple(tuple(s) for s in in_slices)
        arr = np.asarray(arr, dtype=float)
        expect = (out_slice[1] - out_slice[0],) + tuple(b - a for a, b in in_slices)
        if arr.shape != expect:
            raise ValueError(f"block shape {arr.shape} does not match slices {expect}")
        key = (out_slice, in_slices)
        if key in self.blocks:
            self.blocks[key] = self.blocks[key] + arr
        else:
            self.blocks[key] = arr

    @property
    def order(self):
        return len(self.in_dims)

    @property
    def shape(self):
        return (self.out_dim, prod(self.in_dims))

    @property
    def n_entries(self):
        return sum(a.size for a in self.blocks.values())

    def __repr__(self):
        return (f"BlockTensor(out_dim={self.out_dim}, in_dims={self.in_dims}, "
                f"blocks={len(self.blocks)}, entries={self.n_entries})")

    def apply(self, *xs):
        if len(xs) == 1 and self.order > 1:
            xs = xs * self.order
        if len(xs) != self.order:
            raise ValueError(f"expected {self.order} factors, got {len(xs)}")
        xs = [np.asarray(x, dtype=float).ravel() for x in xs]
        for p, (x, d) in enumerate(zip(xs, self.in_dims)):
            if x.shape[0] != d:
                raise ValueError(f"factor {p} has length {x.shape[0]}, expected {d}")
        y = np.zeros(self.out_dim)
        for ((o0, o1), ins), arr in self.blocks.items():
            t = arr
            for p in range(self.order - 1, -1, -1):
                a, b = ins[p]
                t = t @ xs[p][a:b]
            y[o0:o1] += t
        return y

    __call__ = apply

    def jacobian(self, x):
        """Dense Jacobian of ``x -> T (x ⊗ ... ⊗ x)``."""
        if len(set(self.in_dims)) != 1:
            raise ValueError("jacobian needs all factors of equal length")
        x = np.asarray(x, dtype=float).ravel()
        J = np.zeros((self.out_dim, self.in_dims[0]))
        k = self.order
        for ((o0, o1), ins), arr in self.blocks.items():
            segs = [x[a:b] for a, b in ins]
            for p in range(k):
                t = arr
                # contract trailing factors after p, then leading ones before p
                for q in range(k - 1, p, -1):
                    t = t @ segs[q]
                for q in range(p):
                    t = np.tensordot(t, segs[q], axes=([1], [0]))
                a, b = ins[p]
                J[o0:o1, a:b] += t
        return J

    def to_dense(self):
        size = self.out_dim * prod(self.in_dims)
        if size > DENSE_LIMIT:
            raise MemoryError(f"dense tensor would have {size} entries")
        out = np.zeros((self.out_dim,) + self.in_dims)
        for ((o0, o1), ins), arr in self.blocks.items():
            out[(slice(o0, o1),) + tuple(slice(a, b) for a, b in ins)] += arr
        return out.reshape(self.shape)

    def to_matricized(self):
        """Coordinate-format copy (for serialization)."""
        rows, idx, vals = [], [], []
        for ((o0, _), ins), arr in self.blocks.items():
            nz = np.nonzero(arr)
            rows.append(nz[0] + o0)
            idx.append(np.stack([nz[p + 1] + ins[p][0] for p in range(self.order)], axis=1))
            vals.append(arr[nz])
        if not rows:
            return MatricizedTensor(self.out_dim, self.in_dims)
        return MatricizedTensor(self.out_dim, self.in_dims, np.concatenate(rows),
                                np.concatenate(idx), np.concatenate(vals))

    def to_json(self):
        return {
            "out_dim": self.out_dim,
            "order": self.order,
            "in_dims": list(self.in_dims),
            "blocks": [
                {"out": list(o), "in": [list(s) for s in ins], "data": arr.ravel().tolist()}
                for (o, ins), arr in sorted(self.blocks.items())
            ],
        }

    @classmethod
    def from_json(cls, data):
        T = cls(data["out_dim"], data["in_dims"])
        for blk in data["blocks"]:
            shape = (blk["out"][1] - blk["out"][0],) + tuple(b - a for a, b in blk["in"])
            T.add_block(blk["out"], blk["in"], np.asarray(blk["data"]).reshape(shape))
        return T


@dataclass(frozen=True)
class SVDResult:
    """Thin SVD ``X = U diag(sigma) W^T``."""

    U: np.ndarray
    sigma: np.ndarray
    W: np.ndarray


def thin_svd(X):
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("thin_svd expects a 2-D array")
    if not np.all(np.isfinite(X)):
        raise ValueError("thin_svd input contains non-finite entries")
    U, s, Wt = sla.svd(X, full_matrices=False, lapack_driver="gesdd")
    return SVDResult(U, s, Wt.T)


def method_of_snapshots(X, r):
    """Leading ``r`` left singular vectors of ``X`` from the ``M x M`` Gram matrix.

    Intended for tall snapshot matrices (``M`` columns much fewer than rows).
    The Gram eigenvalues square the singular values, so directions with
    ``sigma_i / sigma_1`` below about ``sqrt(eps)`` are not resolved and count
    as rank deficiency.
    """
    X = np.asarray(X, dtype=float)
    if not np.all(np.isfinite(X)):
        raise ValueError("snapshot matrix contains non-finite entries")
    n, M = X.shape
    if r < 0 or r > min(n, M):
        raise ValueError(f"r={r} must lie in [0, {min(n, M)}]")
    lam, Q = sla.eigh(X.T @ X)
    order = np.argsort(lam)[::-1]
    lam, Q = lam[order], Q[:, order]
    lam_max = max(lam[0], 0.0) if M else 0.0
    tol = max(n, M) * np.finfo(float).eps * lam_max
    rank = int(np.sum(lam > tol)) if lam_max > 0 else 0
    if r > rank:
        raise RankError(f"requested {r} modes but numerical rank is {rank}", rank)
    sigma = np.sqrt(lam[:r])
    V = (X @ Q[:, :r]) / sigma
    # one re-orthonormalization pass against Gram round-off
    V, R = np.linalg.qr(V)
    V *= np.sign(np.diag(R))
    return V


def matrix_to_json(A):
    A = np.atleast_2d(np.asarray(A.toarray() if sp.issparse(A) else A, dtype=float))
    return {"rows": int(A.shape[0]), "cols": int(A.shape[1]), "data": A.ravel().tolist()}


def matrix_from_json(data):
    return np.asarray(data["data"], dtype=float).reshape(data["rows"], data["cols"])
