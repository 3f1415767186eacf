"""
Curvature pairings and the integral identity
============================================

Samples curvature sign probes for the shipped targets, checks the space-form
identity for the quadratic curvature form, and evaluates both sides of the
integral identity for a map from a non-Kahler torus into a Kahler target.
"""

import numpy as np

from hermharm.geometry import GridSpec, build_domain
from hermharm.harness import bochner_integral_check, constant_curvature_check, curvature_probe_check
from hermharm.maps import curvature_pairing, linear_map, random_map
from hermharm.targets import make_target

# curvature sign probes at the chart origin
for kind, conditions in (("hyperbolic_ball", ("sampson_hermitian_negative", "sampson_nondegenerate")),
                         ("sphere_stereo", ("sampson_hermitian_positive",)),
                         ("poincare_ball", ("siu_strongly_negative", "siu_nondegenerate")),
                         ("fubini_study", ("siu_strongly_positive",))):
    t = make_target(kind, 3 if kind in ("hyperbolic_ball", "sphere_stereo") else 2)
    for c in conditions:
        print(f"{kind:16s} {c:28s} {curvature_probe_check(t, c).status}")

print()
for kind in ("sphere_stereo", "hyperbolic_ball"):
    rep = constant_curvature_check(make_target(kind, 3), point=[0.1, -0.2, 0.3])
    print(f"{kind:16s} space-form identity max rel error {rep.measured['max_rel_error']:.2e}")

# the integral identity on a conformal (non-Kahler) torus
grid = GridSpec(2, 16)
dom = build_domain(grid, "conformal", amplitude=0.2, wavevector=(1, 0, 0, 1))
f = random_map(grid, make_target("poincare_ball", 2), seed=1, amplitude=0.3)
rep = bochner_integral_check(dom, f)
m = rep.measured
print(f"\nintegral identity: |ddbar f|^2 = {m['full_norm']:.6f}, |trace|^2 = {m['trace_norm']:.6f}, "
      f"int Q = {m['curvature']:.6f}")
print(f"  4(|ddbar f|^2 - |trace|^2 + Q) = {m['rhs']:.3e}, Stokes side = {m['lhs']:.3e}, "
      f"stencil error estimate {m['error_estimate']:.3e} -> {rep.status}")

# holomorphic maps make the pairing vanish pointwise
A = np.array([[0.05, 0.02], [0.0, 0.04]])
L = np.zeros((2, 4), dtype=complex)
L[:, 0::2], L[:, 1::2] = A, 1j * A
hol = linear_map(grid, make_target("fubini_study", 2), L)
print(f"max |Q| for a holomorphic map: {np.max(np.abs(curvature_pairing(dom, hol).field)):.3e}")
