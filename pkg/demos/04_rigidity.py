"""
Rank rigidity after a flow into hyperbolic space
================================================

Runs the Hermitian-harmonic flow from a random map into the hyperbolic ball,
then asks at every grid point whether a vanishing curvature pairing comes with
a real rank of at most two. A periodic map into the ball is null-homotopic, so
the flow drives it towards a constant and the probe has little to find there;
the last part looks at maps of real rank two directly. Rank two alone does not
force the pairing to vanish: the rank has to come from one complex direction.
"""

import numpy as np

from hermharm.flow import FlowConfig, run
from hermharm.geometry import GridSpec, build_domain
from hermharm.harness import dumps, rigidity_probe
from hermharm.maps import MapField, curvature_pairing, rank_df, random_map
from hermharm.targets import make_target

grid = GridSpec(2, 8)
dom = build_domain(grid, "conformal", amplitude=0.3, wavevector=(1, 0, 0, 1))
target = make_target("hyperbolic_ball", 2, kappa=-1.0)
f0 = random_map(grid, target, seed=12, amplitude=0.4)
trace = run(dom, f0, FlowConfig("jost_yau", max_steps=3000, stop_tol=1e-9, record_every=500))
e = trace.column("E_total")
print(f"flow: {trace.reason} after {trace.steps} steps, energy {e[0]:.4f} -> {e[-1]:.3e}")
rep = rigidity_probe(dom, trace.final)
print(dumps(rep.as_dict()))

# two real-rank-two maps; only the one through a single complex direction has Q0 = 0
x = grid.coords(sparse=False)
one_direction = MapField(grid, target, 0.2 * np.stack([np.sin(x[0]), np.sin(x[1])], axis=-1))
two_directions = MapField(grid, target, 0.2 * np.stack([np.sin(x[0]), np.sin(x[2])], axis=-1))
for label, f in (("one complex direction", one_direction), ("two complex directions", two_directions)):
    q = curvature_pairing(dom, f).field
    print(f"{label:24s} max rank {int(np.max(rank_df(f)))}, max |Q0| {np.max(np.abs(q)):.3e}")
