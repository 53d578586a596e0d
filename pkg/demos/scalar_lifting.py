"""Lifting x' = x**4 + u to quadratic-bilinear form, with no approximation.

Integrates the quartic scalar ODE in three equivalent forms (the original,
a four-variable QB-ODE and a two-variable QB-DAE) and compares them with
the closed-form solution for zero input.

Run: python demos/scalar_lifting.py
"""

import numpy as np

from liftrom.integrate import integrate_ode, solve_qbdae
from liftrom.models import (scalar_exact, scalar_lift_ic, scalar_qb_dae, scalar_qb_ode,
                            scalar_quartic)

OPTS = {"scheme": "radau", "rtol": 1e-10, "atol": 1e-12}


def main():
    x0 = 0.5
    t = np.linspace(0.0, 1.0, 11)
    exact = scalar_exact(x0, t)
    quartic = integrate_ode(scalar_quartic(), [x0], t, None, **OPTS)
    ode = integrate_ode(scalar_qb_ode(), scalar_lift_ic(x0, "qb-ode"), t, None, **OPTS)
    dae = solve_qbdae(scalar_qb_dae(), [x0], t, None, **OPTS)

    print(f"{'t':>4}  {'exact':>10}  {'quartic':>10}  {'QB-ODE':>10}  {'QB-DAE':>10}")
    for j in range(0, len(t), 2):
        print(f"{t[j]:4.1f}  {exact[j]:10.7f}  {quartic.states[0, j]:10.7f}  "
              f"{ode.states[0, j]:10.7f}  {dae.states[0, j]:10.7f}")

    # the auxiliary states stay on the lifting manifold w1 = x**2, w2 = x**4, w3 = x**3
    x, w1, w2, w3 = ode.states
    drift = max(np.abs(w1 - x**2).max(), np.abs(w2 - x**4).max(), np.abs(w3 - x**3).max())
    print(f"\nmax deviation from the lifting manifold: {drift:.1e}")
    print(f"max relative error (QB-ODE, QB-DAE): "
          f"{np.abs(ode.states[0] / exact - 1).max():.1e}, "
          f"{np.abs(dae.states[0] / exact - 1).max():.1e}")


if __name__ == "__main__":
    main()
