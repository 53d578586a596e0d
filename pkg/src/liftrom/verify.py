"""Invariant suite on small instances (what ``liftrom verify`` runs).

Every check is cheap (well under a second each) and independent of the
benchmark sizes, so the suite can run on any installation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .integrate import integrate_ode, solve_qbdae
from .models import (FHNConfig, TubularConfig, build_fhn_lifted_qb, build_tubular_qbdae,
                     build_tubular_quartic, consistent_lift_ic, scalar_exact, scalar_lift_ic,
                     scalar_qb_dae, scalar_qb_ode, tubular_initial_state, tubular_input)
from .reduction import (BlockBasis, deim_build, precompute_substituted_ode, project_qb,
                        project_qbdae, project_quartic)
from .tensor import MatricizedTensor

__all__ = ["InvariantResult", "run_invariants", "random_tensor", "random_block_basis"]


@dataclass
class InvariantResult:
    name: str
    ok: bool
    detail: str


def random_tensor(rng, out_dim, in_dims, nnz):
    """Random sparse matricized tensor with ``nnz`` (possibly repeated) entries."""
    rows = rng.integers(0, out_dim, nnz)
    idx = np.column_stack([rng.integers(0, d, nnz) for d in in_dims])
    return MatricizedTensor(out_dim, tuple(in_dims), rows, idx, rng.standard_normal(nnz))


def random_block_basis(rng, layout, r):
    """Block-diagonal basis with a random orthonormal ``n_i x r`` block per variable."""
    blocks = []
    for name, size in layout.blocks:
        Q, _ = np.linalg.qr(rng.standard_normal((size, min(r, size))))
        blocks.append((name, size, Q))
    return BlockBasis(blocks)


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.linalg.norm(a - b) / max(np.linalg.norm(b), 1e-300))


def check_kronecker_oracle(rng):
    worst = 0.0
    for in_dims in [(7, 5), (4, 6, 3), (5, 5), (3, 4, 2, 5), (6, 6, 6, 6)]:
        G = random_tensor(rng, 6, in_dims, 40)
        xs = [rng.standard_normal(d) for d in in_dims]
        kron = xs[0]
        for x in xs[1:]:
            kron = np.kron(kron, x)
        worst = max(worst, _rel(G.apply(*xs), G.to_dense() @ kron))
    return InvariantResult("dense Kronecker oracle", worst <= 1e-12, f"max rel diff {worst:.1e}")


def check_pod_orthonormality(rng):
    from .reduction import collect_snapshots, compute_pod_basis
    from .systems import Layout, Trajectory
    t = np.linspace(0.0, 1.0, 30)
    scales = np.logspace(0, -8, 8)[:, None]
    X = rng.standard_normal((40, 8)) @ (scales * rng.standard_normal((8, 30)))
    traj = Trajectory(t, X, Layout([("a", 25), ("b", 15)]))
    pod = compute_pod_basis(collect_snapshots(traj), 5)
    worst = max(np.abs(V.T @ V - np.eye(V.shape[1])).max() for V in pod.V.values())
    return InvariantResult("POD orthonormality", worst <= 1e-12, f"max |V^T V - I| {worst:.1e}")


def check_projection_identities(rng):
    worst = 0.0
    quartic = build_tubular_quartic(TubularConfig(n=8))
    V = random_block_basis(rng, quartic.layout, 3)
    rom = project_quartic(quartic, V)
    qb = build_fhn_lifted_qb(FHNConfig(n=10))
    W = random_block_basis(rng, qb.layout, 3)
    rom_qb = project_qb(qb, W)
    for _ in range(100):
        xr = rng.standard_normal(V.r)
        x = V.lift(xr)
        for k in (2, 3, 4):
            G, Gr = quartic.G[k], rom.G[k]
            if G is None:
                continue
            worst = max(worst, _rel(Gr.apply(xr), V.project(G.apply(x))))
        yr = rng.standard_normal(W.r)
        worst = max(worst, _rel(rom_qb.H.apply(yr), W.project(qb.H.apply(W.lift(yr)))))
    return InvariantResult("projection identities (orders 2-4)", worst <= 1e-12,
                           f"max rel diff {worst:.1e}")


def _small_qbdae_rom(rng):
    dae = build_tubular_qbdae(TubularConfig(n=6))
    s = dae.structured()
    lay = dae.layout
    V1 = random_block_basis(rng, lay.sub(lay.names[:5]), 3)
    V2 = random_block_basis(rng, lay.sub(lay.names[5:]), 2)
    return dae, project_qbdae(dae, V1, V2), s


def check_structure(rng):
    _, rom, _ = _small_qbdae_rom(rng)
    qb = rom.as_qb_system()
    r1 = rom.n1
    E = np.asarray(qb.E.toarray() if hasattr(qb.E, "toarray") else qb.E)
    A = np.asarray(qb.A.toarray() if hasattr(qb.A, "toarray") else qb.A)
    ok = (np.all(E[r1:] == 0) and np.array_equal(A[r1:, r1:], np.eye(rom.n2))
          and np.all(A[r1:, :r1] == 0))
    return InvariantResult("QB-DAE ROM algebraic block", bool(ok),
                           "zero mass rows, identity lower-right block")


def check_substituted_form(rng):
    _, rom, _ = _small_qbdae_rom(rng)
    sub = precompute_substituted_ode(rom)
    worst = 0.0
    for _ in range(20):
        x = rng.standard_normal(rom.n1)
        u = rng.standard_normal(rom.n_inputs)
        worst = max(worst, _rel(sub.rhs(x, u), rom.rhs(x, u)))
    return InvariantResult("substituted form equals elimination", worst <= 1e-12,
                           f"max rel diff {worst:.1e}")


def check_algebraic_residual(rng):
    cfg = TubularConfig(n=10)
    dae = build_tubular_qbdae(cfg)
    xl = consistent_lift_ic("tubular-qbdae", tubular_initial_state(cfg), cfg.gamma)
    tr = solve_qbdae(dae, xl[:dae.n1], np.linspace(0.0, 0.5, 6), tubular_input(),
                     scheme="bdf", rtol=1e-8, atol=1e-10)
    s = dae.structured()
    X1, X2 = tr.states[:dae.n1], tr.states[dae.n1:]
    worst = max(np.abs(s.algebraic_residual(X1[:, j], X2[:, j])).max()
                / max(np.abs(X2[:, j]).max(), 1.0) for j in range(X1.shape[1]))
    return InvariantResult("algebraic constraint residual", worst <= 1e-12,
                           f"max scaled residual {worst:.1e}")


def check_deim_exactness(rng):
    F = rng.standard_normal((60, 6)) @ rng.standard_normal((6, 40))
    deim = deim_build(F, 6)
    f = rng.standard_normal(60)
    err = np.abs(deim.approximate(f)[deim.indices] - f[deim.indices]).max()
    ok = err <= 1e-12 * max(np.abs(f).max(), 1.0)
    return InvariantResult("DEIM interpolation exactness", bool(ok), f"max error {err:.1e}")


def check_scalar_lift():
    t = np.linspace(0.0, 1.0, 11)
    x0 = 0.5
    exact = scalar_exact(x0, t)
    ode = integrate_ode(scalar_qb_ode(), scalar_lift_ic(x0, "qb-ode"), t, None,
                        scheme="radau", rtol=1e-12, atol=1e-14)
    dae = solve_qbdae(scalar_qb_dae(), scalar_lift_ic(x0, "qb-dae")[:1], t, None,
                      scheme="radau", rtol=1e-12, atol=1e-14)
    err = max(np.abs(ode.states[0] / exact - 1).max(), np.abs(dae.states[0] / exact - 1).max())
    # the lifted states must stay on the lifting manifold
    lift_err = np.abs(ode.states[1] - ode.states[0] ** 2).max()
    ok = err <= 1e-6 and lift_err <= 1e-8
    return InvariantResult("scalar lifting exactness", bool(ok),
                           f"rel error {err:.1e}, manifold drift {lift_err:.1e}")


def run_invariants(seed=0):
    rng = np.random.default_rng(seed)
    return [
        check_kronecker_oracle(rng),
        check_pod_orthonormality(rng),
        check_projection_identities(rng),
        check_structure(rng),
        check_substituted_form(rng),
        check_algebraic_residual(rng),
        check_deim_exactness(rng),
        check_scalar_lift(),
    ]
