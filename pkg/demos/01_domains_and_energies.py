"""
Hermitian tori, energies and residuals
======================================

Builds three metrics on the complex 2-torus, reports their metric classes, and
shows how the holomorphic and anti-holomorphic energies of one map split the
total energy and how the residuals of the different harmonic equations relate.
"""

import numpy as np

from hermharm.geometry import GridSpec, build_domain, classify_metric
from hermharm.maps import energies, random_map, residuals, torsion_difference
from hermharm.targets import make_target

grid = GridSpec(m=2, n_per_axis=8)

# flat, conformally flat, and a non-diagonal metric with complex off-diagonal entries
domains = {
    "flat": build_domain(grid, "flat"),
    "conformal": build_domain(grid, "conformal", amplitude=0.2, wavevector=(1, 0, 0, 1)),
    "twisted": build_domain(
        grid, "custom",
        entries=[["exp(0.2*cos(x1))", "0.1*sin(x2+x3)"], ["0.1*sin(x2+x3)", "exp(0.1*sin(x4))"]],
        entries_imag=[["0", "0.1*cos(x1)"], ["-0.1*cos(x1)", "0"]],
    ),
}

for name, dom in domains.items():
    rep = classify_metric(dom)
    print(f"{name:10s} kahler={rep.kahler!s:5s} balanced={rep.balanced!s:5s} astheno={rep.astheno!s:5s}"
          f"  residuals {rep.kahler_residual:.2e} {rep.balanced_residual:.2e} {rep.astheno_residual:.2e}")

# a smooth random map into the Poincare ball
target = make_target("poincare_ball", 2)
f = random_map(grid, target, seed=0, amplitude=0.3)

print("\nenergies (E from the real Jacobian, E' and E'' from the complex derivatives)")
for name, dom in domains.items():
    e = energies(dom, f)
    print(f"{name:10s} E={e.E_total:.12f}  E'+E''={e.E_dbar + e.E_partial:.12f}")

# on the flat torus the dbar- and del-residuals coincide; on the conformal one they
# differ by a first-order torsion term
print("\nresidual differences")
for name in ("flat", "conformal"):
    dom = domains[name]
    res = residuals(dom, f)
    diff = res.dbar_residual - res.partial_residual
    print(f"{name:10s} max|dbar - del| = {np.max(np.abs(diff)):.3e}"
          f"   after removing the torsion term: {np.max(np.abs(diff - torsion_difference(dom, f))):.3e}")
