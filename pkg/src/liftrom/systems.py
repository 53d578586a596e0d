"""System containers: general nonlinear, quartic and quadratic-bilinear forms.

Every system exposes the same small evaluation protocol used by the
integrators in :mod:`liftrom.integrate`:

``dim``            state dimension
``n_inputs``       number of input channels ``m``
``mass``           ``None`` (identity), a 1-D diagonal, or a square matrix
``linear``         the matrix ``A`` of the part treated implicitly by IMEX
``rhs(x, u)``      right-hand side of ``mass @ xdot = rhs``
``jacobian(x, u)`` derivative of ``rhs`` with respect to ``x``
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .tensor import MatricizedTensor, matrix_to_json, matrix_from_json

__all__ = [
    "Layout",
    "InputSignal",
    "Trajectory",
    "Componentwise",
    "GeneralNonlinearSystem",
    "QuarticSystem",
    "QBSystem",
    "StructuredQBDAE",
]


class Layout:
    """Ordered named blocks of a state vector."""

    def __init__(self, blocks):
        self.blocks = [(str(name), int(size)) for name, size in blocks]
        names = [n for n, _ in self.blocks]
        if len(set(names)) != len(names):
            raise ValueError("duplicate block names in layout")
        self._offsets = {}
        off = 0
        for name, size in self.blocks:
            if size < 0:
                raise ValueError("block sizes must be nonnegative")
            self._offsets[name] = off
            off += size
        self.dim = off

    @classmethod
    def uniform(cls, names, n):
        return cls([(name, n) for name in names])

    @property
    def names(self):
        return [n for n, _ in self.blocks]

    def size(self, name):
        return dict(self.blocks)[name]

    def offset(self, name):
        try:
            return self._offsets[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}; layout has {self.names}") from None

    def slice(self, name):
        off = self.offset(name)
        return slice(off, off + self.size(name))

    def sub(self, names):
        return Layout([(n, self.size(n)) for n in names])

    def labels(self):
        return [f"{name}_{i}" for name, size in self.blocks for i in range(size)]

    def __contains__(self, name):
        return name in self._offsets

    def __eq__(self, other):
        return isinstance(other, Layout) and self.blocks == other.blocks

    def __repr__(self):
        return f"Layout({self.blocks})"

    def to_json(self):
        return [[n, s] for n, s in self.blocks]

    @classmethod
    def from_json(cls, data):
        return cls([tuple(b) for b in data])


class InputSignal:
    """Vector-valued input ``u(t)`` with ``m`` channels."""

    def __init__(self, fn, m):
        self.fn = fn
        self.m = int(m)

    @classmethod
    def constant(cls, values):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        return cls(lambda t: values, len(values))

    @classmethod
    def zero(cls, m):
        return cls.constant(np.zeros(m))

    def __call__(self, t):
        u = np.atleast_1d(np.asarray(self.fn(t), dtype=float))
        if u.shape != (self.m,):
            raise ValueError(f"input returned shape {u.shape}, expected ({self.m},)")
        return u


@dataclass
class Trajectory:
    """States on a time grid; ``states`` has one column per time point."""

    t: np.ndarray
    states: np.ndarray
    layout: Layout

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.states = np.asarray(self.states, dtype=float)
        if self.states.ndim != 2 or self.states.shape[1] != len(self.t):
            raise ValueError("states must be (n, n_t) matching the time grid")
        if self.states.shape[0] != self.layout.dim:
            raise ValueError("state dimension does not match layout")
        if len(self.t) > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("time grid must be strictly increasing")

    def var(self, name):
        return self.states[self.layout.slice(name)]

    def restrict(self, names):
        return Trajectory(self.t, np.vstack([self.var(n) for n in names]),
                          self.layout.sub(names))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t"] + self.layout.labels())
            for j, tj in enumerate(self.t):
                w.writerow([repr(float(tj))] + [repr(float(v)) for v in self.states[:, j]])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        header, body = rows[0], np.array(rows[1:], dtype=float)
        blocks = []
        for label in header[1:]:
            name = label.rsplit("_", 1)[0]
            if blocks and blocks[-1][0] == name:
                blocks[-1][1] += 1
            else:
                blocks.append([name, 1])
        return cls(body[:, 0], body[:, 1:].T, Layout(blocks))


@dataclass
class Componentwise:
    """Nodewise nonlinearity ``g_i = fn(x_a[i], x_b[i], ...)``.

    ``variables`` names the layout blocks that are read; all have the same
    length, which is the length of ``g``. ``derivs`` holds the partial
    derivatives with respect to each variable (same call signature).
    """

    fn: callable
    variables: tuple
    derivs: tuple = ()

    def values_at(self, x, layout, idx=None):
        args = []
        for name in self.variables:
            block = x[layout.slice(name)]
            args.append(block if idx is None else block[idx])
        return self.fn(*args)

    def partials_at(self, x, layout, idx=None):
        args = []
        for name in self.variables:
            block = x[layout.slice(name)]
            args.append(block if idx is None else block[idx])
        return [d(*args) for d in self.derivs]


def _as_operator(A, shape):
    if A is None:
        return sp.csr_matrix(shape)
    if sp.issparse(A):
        return A.tocsr()
    return np.asarray(A, dtype=float).reshape(shape)


def _mass_of(E, n):
    if E is None:
        return None
    if sp.issparse(E):
        E = E.tocsr()
        if (E - sp.diags(E.diagonal())).nnz == 0:
            return E.diagonal().astype(float)
        return E
    E = np.asarray(E, dtype=float)
    if E.ndim == 1:
        return E
    if np.count_nonzero(E - np.diag(np.diag(E))) == 0:
        return np.diag(E).copy()
    return E


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A)


class GeneralNonlinearSystem:
    """``E xdot = A x + B u + F g(x)`` with a nodewise nonlinearity ``g``.

    Parameters
    ----------
    A, B : matrices (dense or sparse)
    coupling : (n, n_g) matrix ``F`` scattering ``g`` into the equations
    nonlinearity : Componentwise
    layout : Layout
    mass : optional mass matrix ``E`` (diagonal allowed as 1-D array)
    domain_check : optional callable raising on states outside the model domain
    """

    def __init__(self, A, B, coupling, nonlinearity, layout, mass=None, domain_check=None):
        self.layout = layout
        n = layout.dim
        self.A = _as_operator(A, (n, n))
        self.B = np.asarray(_dense(B), dtype=float).reshape(n, -1)
        self.F = _as_operator(coupling, (n, -1)) if not sp.issparse(coupling) else coupling.tocsr()
        self.g = nonlinearity
        self.mass = _mass_of(mass, n)
        self.domain_check = domain_check

    dim = property(lambda self: self.layout.dim)
    n_inputs = property(lambda self: self.B.shape[1])
    linear = property(lambda self: self.A)

    def nonlinear_term(self, x):
        if self.domain_check is not None:
            self.domain_check(x)
        return self.g.values_at(x, self.layout)

    def rhs(self, x, u):
        return self.A @ x + self.B @ u + self.F @ self.nonlinear_term(x)

    def jacobian(self, x, u):
        if self.domain_check is not None:
            self.domain_check(x)
        parts = self.g.partials_at(x, self.layout)
        n_g = self.F.shape[1]
        cols = []
        for name, d in zip(self.g.variables, parts):
            off = self.layout.offset(name)
            cols.append(sp.csr_matrix((d, (np.arange(n_g), off + np.arange(n_g))),
                                      shape=(n_g, self.dim)))
        Jg = sum(cols[1:], cols[0])
        J = self.A + sp.csr_matrix(self.F) @ Jg
        return sp.csr_matrix(J)


class QuarticSystem:
    """``E xdot = A x + B u + sum_k G_k x^(⊗k) + sum_j (N1_j x + N2_j x^(⊗2)) u_j``.

    ``G2``, ``G3``, ``G4`` and the entries of ``N2`` may be
    :class:`MatricizedTensor` or :class:`BlockTensor` (any object with
    ``apply`` and ``jacobian``); ``None`` marks an absent term.
    """

    def __init__(self, A, B, G2=None, G3=None, G4=None, N1=(), N2=(), layout=None, mass=None,
                 domain_check=None):
        B = np.asarray(_dense(B), dtype=float)
        n = B.shape[0]
        self.layout = layout if layout is not None else Layout([("x", n)])
        if self.layout.dim != n:
            raise ValueError("layout dimension does not match B")
        self.A = _as_operator(A, (n, n))
        self.B = B.reshape(n, -1)
        m = self.B.shape[1]
        self.G = {2: G2, 3: G3, 4: G4}
        for k, G in self.G.items():
            if G is not None and (G.in_dims != (n,) * k or G.out_dim != n):
                raise ValueError(f"G{k} has in_dims {G.in_dims}, expected {(n,) * k}")
        self.N1 = list(N1) if len(N1) else [None] * m
        self.N2 = list(N2) if len(N2) else [None] * m
        if len(self.N1) != m or len(self.N2) != m:
            raise ValueError(f"need one N1 and one N2 entry per input ({m})")
        self.N1 = [None if N is None else _as_operator(N, (n, n)) for N in self.N1]
        for N in self.N2:
            if N is not None and N.in_dims != (n, n):
                raise ValueError("N2 entries must be order-2 with in_dims (n, n)")
        self.mass = _mass_of(mass, n)
        self.domain_check = domain_check

    dim = property(lambda self: self.layout.dim)
    n_inputs = property(lambda self: self.B.shape[1])
    linear = property(lambda self: self.A)

    def rhs(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if x.shape != (self.dim,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.dim},)")
        if u.shape != (self.n_inputs,):
            raise ValueError(f"input has shape {u.shape}, expected ({self.n_inputs},)")
        out = self.A @ x + self.B @ u
        for G in self.G.values():
            if G is not None:
                out = out + G.apply(x)
        for uk, N1, N2 in zip(u, self.N1, self.N2):
            if uk == 0.0:
                continue
            if N1 is not None:
                out = out + uk * (N1 @ x)
            if N2 is not None:
                out = out + uk * N2.apply(x)
        return out

    def jacobian(self, x, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        J = self.A.copy() if sp.issparse(self.A) else np.array(self.A)
        for G in self.G.values():
            if G is not None:
                J = J + G.jacobian(x)
        for uk, N1, N2 in zip(u, self.N1, self.N2):
            if uk == 0.0:
                continue
            if N1 is not None:
                J = J + uk * N1
            if N2 is not None:
                J = J + uk * N2.jacobian(x)
        return sp.csr_matrix(J) if sp.issparse(J) else np.asarray(J)

    def to_json(self):
        return {
            "kind": "quartic",
            "layout": self.layout.to_json(),
            "A": matrix_to_json(self.A),
            "B": matrix_to_json(self.B),
            "mass": None if self.mass is None else np.asarray(_dense(self.mass)).tolist(),
            "G": {str(k): None if G is None else G.to_json() for k, G in self.G.items()},
            "N1": [None if N is None else matrix_to_json(N) for N in self.N1],
            "N2": [None if N is None else N.to_json() for N in self.N2],
        }


class QBSystem:
    """``E xdot = A x + B u + H (x ⊗ x) + sum_k N_k x u_k``.

    When ``n1`` is given the state is partitioned ``x = [x1; x2]`` with
    ``x2`` algebraically constrained; :meth:`structured` then extracts the
    index-1 block form ``0 = x2 - H2t (x1 ⊗ x1)``.
    """

    def __init__(self, E, A, B, H, N=(), layout=None, n1=None):
        B = np.asarray(_dense(B), dtype=float)
        n = B.shape[0]
        self.layout = layout if layout is not None else Layout([("x", n)])
        if self.layout.dim != n:
            raise ValueError("layout dimension does not match B")
        self.B = B.reshape(n, -1)
        m = self.B.shape[1]
        self.E = _as_operator(E if E is not None else sp.identity(n), (n, n))
        self.A = _as_operator(A, (n, n))
        if H is None:
            H = MatricizedTensor(n, (n, n))
        if H.in_dims != (n, n) or H.out_dim != n:
            raise ValueError("H must map x ⊗ x to R^n")
        self.H = H
        N = list(N) if len(N) else [None] * m
        if len(N) != m:
            raise ValueError(f"need one N matrix per input ({m})")
        self.N = [None if Nk is None else _as_operator(Nk, (n, n)) for Nk in N]
        self.n1 = n if n1 is None else int(n1)
        if self.n1 < n:
            self._check_partition()

    dim = property(lambda self: self.layout.dim)
    n_inputs = property(lambda self: self.B.shape[1])
    linear = property(lambda self: self.A)

    @property
    def n2(self):
        return self.dim - self.n1

    @property
    def mass(self):
        return _mass_of(self.E, self.dim)

    def _check_partition(self):
        n1, n = self.n1, self.dim
        E = _dense(self.E)
        A = _dense(self.A)
        if np.any(E[n1:]) or np.any(E[:, n1:]):
            raise ValueError("E must vanish outside the leading n1 block")
        if np.any(A[n1:, :n1]) or not np.array_equal(A[n1:, n1:], np.eye(n - n1)):
            raise ValueError("A must have [0, I] as its lower block row")
        if np.any(self.B[n1:]):
            raise ValueError("B must vanish on the constrained rows")
        for Nk in self.N:
            if Nk is not None and np.any(_dense(Nk)[n1:]):
                raise ValueError("N_k must vanish on the constrained rows")
        low = self.H.rows >= n1
        if np.any(self.H.indices[low] >= n1):
            raise ValueError("constrained rows of H may only involve x1 ⊗ x1")

    def rhs(self, x, u):
        x = np.asarray(x, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        if x.shape != (self.dim,):
            raise ValueError(f"state has shape {x.shape}, expected ({self.dim},)")
        if u.shape != (self.n_inputs,):
            raise ValueError(f"input has shape {u.shape}, expected ({self.n_inputs},)")
        out = self.A @ x + self.B @ u + self.H.apply(x)
        for uk, Nk in zip(u, self.N):
            if Nk is not None and uk != 0.0:
                out = out + uk * (Nk @ x)
        return out

    def jacobian(self, x, u):
        u = np.atleast_1d(np.asarray(u, dtype=float))
        J = self.A + self.H.jacobian(x)
        for uk, Nk in zip(u, self.N):
            if Nk is not None and uk != 0.0:
                J = J + uk * Nk
        return sp.csr_matrix(J) if sp.issparse(J) else np.asarray(J)

    def algebraic_residual(self, x):
        """``x2 - H2t (x1 ⊗ x1)`` (empty for ODE systems)."""
        x = np.asarray(x, dtype=float)
        return self.rhs(x, np.zeros(self.n_inputs))[self.n1:]

    def structured(self):
        """Block form used by substitution solvers and structured projection."""
        if self.n2 == 0:
            raise ValueError("system has no constrained partition")
        n1, n = self.n1, self.dim
        A = self.A.tocsr() if sp.issparse(self.A) else sp.csr_matrix(self.A)
        H1 = self.H.select((0, n1), [(0, n), (0, n)])
        H2t = self.H.select((n1, n), [(0, n1), (0, n1)]).scaled(-1.0)
        N11, N12 = [], []
        for Nk in self.N:
            if Nk is None:
                N11.append(None)
                N12.append(None)
            else:
                Nk = sp.csr_matrix(Nk)
                N11.append(Nk[:n1, :n1])
                N12.append(Nk[:n1, n1:])
        return StructuredQBDAE(
            E11=sp.csr_matrix(self.E)[:n1, :n1], A11=A[:n1, :n1], A12=A[:n1, n1:],
            B1=self.B[:n1], H1=H1, H2t=H2t, N11=N11, N12=N12, layout=self.layout,
        )

    def to_json(self):
        return {
            "kind": "qb",
            "layout": self.layout.to_json(),
            "n1": self.n1,
            "E": matrix_to_json(self.E),
            "A": matrix_to_json(self.A),
            "B": matrix_to_json(self.B),
            "H": self.H.to_json(),
            "N": [None if N is None else matrix_to_json(N) for N in self.N],
        }

    @classmethod
    def from_json(cls, data):
        layout = Layout.from_json(data["layout"])
        N = [None if d is None else matrix_from_json(d) for d in data["N"]]
        return cls(matrix_from_json(data["E"]), matrix_from_json(data["A"]),
                   matrix_from_json(data["B"]), MatricizedTensor.from_json(data["H"]),
                   N, layout=layout, n1=data["n1"])


@dataclass
class StructuredQBDAE:
    """Index-1 QB-DAE in block form::

        E11 x1' = A11 x1 + A12 x2 + B1 u + H1 (x ⊗ x) + sum_k (N11_k x1 + N12_k x2) u_k
              0 = x2 - H2t (x1 ⊗ x1)

    with ``x = [x1; x2]``. Used both for full lifted systems (sparse blocks)
    and for reduced models (dense / block-tensor blocks). As an ODE system in
    ``x1`` alone it eliminates ``x2`` by substitution at every evaluation.
    """

    E11: object
    A11: object
    A12: object
    B1: np.ndarray
    H1: object
    H2t: object
    N11: list
    N12: list
    layout: Layout = None
    x1_layout: Layout = field(default=None)

    def __post_init__(self):
        self.B1 = np.asarray(_dense(self.B1), dtype=float)
        n1 = self.B1.shape[0]
        if self.x1_layout is None and self.layout is not None:
            acc, blocks = 0, []
            for name, size in self.layout.blocks:
                if acc >= n1:
                    break
                blocks.append((name, size))
                acc += size
            self.x1_layout = Layout(blocks) if acc == n1 else Layout([("x1", n1)])
        elif self.x1_layout is None:
            self.x1_layout = Layout([("x1", n1)])

    n1 = property(lambda self: self.B1.shape[0])
    n2 = property(lambda self: self.H2t.out_dim)
    dim = property(lambda self: self.n1)
    n_inputs = property(lambda self: self.B1.shape[1])
    linear = property(lambda self: self.A11)

    @property
    def mass(self):
        return _mass_of(self.E11, self.n1)

    def constrained(self, x1):
        return self.H2t.apply(x1)

    def full_state(self, x1):
        return np.concatenate([x1, self.constrained(x1)])

    def rhs(self, x1, u):
        x1 = np.asarray(x1, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        x2 = self.H2t.apply(x1)
        x = np.concatenate([x1, x2])
        out = self.A11 @ x1 + self.A12 @ x2 + self.B1 @ u + self.H1.apply(x)
        for uk, N11, N12 in zip(u, self.N11, self.N12):
            if uk == 0.0:
                continue
            if N11 is not None:
                out = out + uk * (N11 @ x1)
            if N12 is not None:
                out = out + uk * (N12 @ x2)
        return np.asarray(out).ravel()

    def jacobian(self, x1, u):
        x1 = np.asarray(x1, dtype=float)
        u = np.atleast_1d(np.asarray(u, dtype=float))
        n1 = self.n1
        x = self.full_state(x1)
        J2 = self.H2t.jacobian(x1)
        JH = self.H1.jacobian(x)
        sparse = sp.issparse(JH)
        if sparse:
            JH = JH.tocsc()
        J = self.A11 + self.A12 @ J2 + JH[:, :n1] + JH[:, n1:] @ J2
        for uk, N11, N12 in zip(u, self.N11, self.N12):
            if uk == 0.0:
                continue
            if N11 is not None:
                J = J + uk * N11
            if N12 is not None:
                J = J + uk * (N12 @ J2)
        return sp.csr_matrix(J) if sp.issparse(J) else np.asarray(J)

    def algebraic_residual(self, x1, x2):
        return np.asarray(x2) - self.H2t.apply(x1)
