"""QB-POD versus POD-DEIM on a coarse FitzHugh-Nagumo chain.

The FitzHugh-Nagumo cubic becomes quadratic after adding z = v**2. Galerkin
projection of the lifted system needs no hyper-reduction, whereas POD on the
original form needs DEIM to evaluate the cubic cheaply. The script prints the
error of both families as the basis grows, and the POD-DEIM curves level off
at a floor set by the number of DEIM points.

Run: python demos/fhn_qb_pod.py   (about a minute)
"""

import numpy as np

from liftrom.bench import FHNExperiment, run_fhn_experiment
from liftrom.models import FHNConfig


def main():
    cfg = FHNConfig(n=128)
    st = FHNExperiment(r_values=(2, 4, 6, 8, 12, 16, 20), r_deim=(5, 10))
    res = run_fhn_experiment(cfg, st)

    print("QB-POD (3 variables, r modes each)")
    for rec in res.report.select("qb-pod"):
        print(f"  dim {rec.r1:3d}   error {rec.error:.2e}")
    for rd in ("5", "10"):
        print(f"POD-DEIM with {rd} DEIM points")
        for rec in res.report.select("pod-deim"):
            if rec.r_deim == rd:
                print(f"  dim {rec.r1:3d}   error {rec.error:.2e}")

    sv = res.sigma["v"] / res.sigma["v"][0]
    sz = res.sigma["z"] / res.sigma["z"][0]
    print("\nrelative singular values of the v and z snapshots")
    for i in (0, 4, 9, 14, 19):
        print(f"  {i + 1:2d}   v {sv[i]:.2e}   z {sz[i]:.2e}")


if __name__ == "__main__":
    main()
