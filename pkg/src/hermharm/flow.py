"""Explicit RK4 integration of the Hermitian-harmonic and dbar-energy heat flows.

Both flows move the periodic part of a map by ``df/dt = -residual``: the
Hermitian-harmonic residual for ``jost_yau`` and the dbar-energy residual for
``dbar_flow`` (its real part for Riemannian targets, where maps are real).
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .maps import (
    MapField,
    dbar_norm_sq,
    del_norm_sq,
    dbar_residual,
    energies,
    hermitian_residual,
    mixed_second_derivatives,
    rank_df,
    vector_norm_sq,
)
from .geometry import canonical_laplacian
from .targets import ChartError

FLOWS = ("jost_yau", "dbar_flow")
C_CFL = 0.2
BLOWUP_FACTOR = 1e6


class BlowupError(RuntimeError):
    """The energy density grew past the configured multiple of its initial maximum."""


@dataclass
class FlowConfig:
    which: str = "jost_yau"
    dt: object = "auto"
    max_steps: int = 1000
    stop_tol: float = 1e-8
    record_every: int = 10
    snapshot_every: int = 0
    blowup_factor: float = BLOWUP_FACTOR
    c_cfl: float = C_CFL

    def __post_init__(self):
        if self.which not in FLOWS:
            raise ValueError(f"unknown flow {self.which!r}; choose from {FLOWS}")
        if self.dt != "auto" and not (isinstance(self.dt, (int, float)) and self.dt > 0):
            raise ValueError(f"dt must be positive or 'auto', got {self.dt!r}")
        if self.max_steps < 0 or self.record_every < 1 or self.snapshot_every < 0:
            raise ValueError("max_steps >= 0, record_every >= 1 and snapshot_every >= 0 are required")

    def time_step(self, dom):
        if self.dt != "auto":
            return float(self.dt)
        return auto_time_step(dom, self.c_cfl)


def auto_time_step(dom, c_cfl=C_CFL):
    """c_cfl * spacing^2 / max eigenvalue of h^{a bbar} over the grid."""
    lam = float(np.max(np.linalg.eigvalsh(dom.h_inv)))
    return c_cfl * dom.grid.spacing**2 / lam


def flow_velocity(dom, f, which):
    """df/dt for the chosen flow."""
    if which == "jost_yau":
        r = hermitian_residual(dom, f)
    elif which == "dbar_flow":
        r = dbar_residual(dom, f)
    else:
        raise ValueError(f"unknown flow {which!r}")
    if not f.target.is_kahler:
        r = r.real
    return -r


def residual_l2(dom, f, velocity):
    return float(np.sqrt(dom.integrate(vector_norm_sq(f.g, velocity))))


def step(dom, f, cfg, dt=None, k1=None):
    """One classical RK4 step; ``k1`` may carry the velocity already evaluated at ``f``."""
    f.require_periodic("a flow step")
    dt = cfg.time_step(dom) if dt is None else dt
    p = f.periodic
    if k1 is None:
        k1 = flow_velocity(dom, f, cfg.which)
    k2 = flow_velocity(dom, f.with_periodic(p + 0.5 * dt * k1), cfg.which)
    k3 = flow_velocity(dom, f.with_periodic(p + 0.5 * dt * k2), cfg.which)
    k4 = flow_velocity(dom, f.with_periodic(p + dt * k3), cfg.which)
    new = p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if not np.all(np.isfinite(new)):
        raise BlowupError("non-finite values after a flow step")
    return f.with_periodic(new)


TRACE_COLUMNS = ("step", "t", "E_dbar", "E_partial", "E_total", "residual_l2", "residual_max", "max_density", "min_rank", "max_rank")


@dataclass
class FlowTrace:
    which: str
    dt: float
    rows: list = field(default_factory=list)
    final: MapField = None
    reason: str = ""
    steps: int = 0
    message: str = ""
    snapshots: list = field(default_factory=list)  # (t, MapField)

    def column(self, name):
        return np.array([row[name] for row in self.rows])

    @property
    def times(self):
        return self.column("t")

    @property
    def converged(self):
        return self.reason == "converged"

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(TRACE_COLUMNS)
            for row in self.rows:
                writer.writerow([repr(row[c]) if isinstance(row[c], float) else row[c] for c in TRACE_COLUMNS])

    def summary(self):
        out = {
            "which": self.which,
            "dt": self.dt,
            "steps": self.steps,
            "termination": self.reason,
            "message": self.message,
            "records": len(self.rows),
        }
        if self.rows:
            first, last = self.rows[0], self.rows[-1]
            for key in ("E_dbar", "E_partial", "E_total", "residual_l2"):
                out[f"initial_{key}"] = first[key]
                out[f"final_{key}"] = last[key]
            out["final_t"] = last["t"]
            out["max_rank"] = int(max(r["max_rank"] for r in self.rows))
        return out


def _record(dom, f, k, t, velocity):
    rep = energies(dom, f)
    ranks = rank_df(f)
    return {
        "step": k,
        "t": float(t),
        "E_dbar": rep.E_dbar,
        "E_partial": rep.E_partial,
        "E_total": rep.E_total,
        "residual_l2": residual_l2(dom, f, velocity),
        "residual_max": float(np.max(np.abs(velocity))),
        "max_density": float(np.max(rep.density)),
        "min_rank": int(np.min(ranks)),
        "max_rank": int(np.max(ranks)),
    }


def run(dom, f0, cfg):
    """Integrate until the residual L2 norm drops below stop_tol, max_steps, or an error."""
    f0.require_periodic("a flow run")
    dt = cfg.time_step(dom)
    trace = FlowTrace(cfg.which, dt)
    f, t = f0, 0.0
    density0 = float(np.max(0.5 * (dbar_norm_sq(dom, f0) + del_norm_sq(dom, f0))))
    limit = cfg.blowup_factor * density0 if density0 > 0 else np.inf
    k = 0
    try:
        while True:
            velocity = flow_velocity(dom, f, cfg.which)
            res = residual_l2(dom, f, velocity)
            done = res <= cfg.stop_tol
            last = done or k >= cfg.max_steps
            if k % cfg.record_every == 0 or last:
                trace.rows.append(_record(dom, f, k, t, velocity))
                if trace.rows[-1]["max_density"] > limit:
                    raise BlowupError(f"energy density exceeded {cfg.blowup_factor:g} x its initial maximum")
            if cfg.snapshot_every and (k % cfg.snapshot_every == 0 or last):
                trace.snapshots.append((t, f))
            if done:
                trace.reason = "converged"
                break
            if k >= cfg.max_steps:
                trace.reason = "max_steps"
                break
            f = step(dom, f, cfg, dt, k1=velocity)
            t += dt
            k += 1
    except ChartError as exc:
        trace.reason, trace.message = "chart_exit", str(exc)
    except BlowupError as exc:
        trace.reason, trace.message = "blowup", str(exc)
    trace.final = f
    trace.steps = k
    return trace


# subelliptic monitor


def hessian_norm_sq(dom, f):
    """|nabla^2 f|^2 summed over the (2,0), (1,1), (0,1)+(1,0) and (0,2) blocks.

    Second derivatives are coordinate derivatives on the domain corrected by the
    target Christoffel symbols.
    """
    grid = f.grid
    gam = f.christoffel
    dz, dzb = f.df_dz, f.df_dzbar
    G = dom.h_inv
    g = f.g
    hh = np.stack([grid.dz(dz, a) for a in range(grid.m)], axis=-2)  # [i, a, b] = d_a d_b f
    hh = hh + np.einsum("...ijk,...ja,...kb->...iab", gam, dz, dz)
    bb = np.stack([grid.dzbar(dzb, a) for a in range(grid.m)], axis=-2)
    bb = bb + np.einsum("...ijk,...ja,...kb->...iab", gam, dzb, dzb)
    mixed = mixed_second_derivatives(f) + np.einsum("...ijk,...jb,...ka->...iab", gam, dzb, dz)
    # (2,0): contract both holomorphic slots with G[a, c] G[b, d]
    n20 = np.einsum("...ij,...ac,...bd,...iab,...jcd->...", g, G, G, hh, np.conj(hh)).real
    n02 = np.einsum("...ij,...ca,...db,...iab,...jcd->...", g, G, G, bb, np.conj(bb)).real
    n11 = np.einsum("...ij,...ac,...db,...iab,...jcd->...", g, G, G, mixed, np.conj(mixed)).real
    # the (1,0)(0,1) block repeats the mixed one since the derivatives commute
    return n20 + n02 + 2.0 * n11


@dataclass
class MonitorSample:
    t: float
    min_margin: float
    margin: np.ndarray


def subelliptic_monitor(dom, snapshots, C=1.0):
    """Delta_c e - d_t e - |nabla^2 f|^2 / 2 + C e at interior snapshots.

    ``snapshots`` is a list of (t, MapField); the time derivative is a central
    difference over neighbouring snapshots, so the first and last are skipped.
    """
    out = []
    for (t0, f0), (t1, f1), (t2, f2) in zip(snapshots, snapshots[1:], snapshots[2:]):
        e0 = 0.5 * (dbar_norm_sq(dom, f0) + del_norm_sq(dom, f0))
        e1 = 0.5 * (dbar_norm_sq(dom, f1) + del_norm_sq(dom, f1))
        e2 = 0.5 * (dbar_norm_sq(dom, f2) + del_norm_sq(dom, f2))
        de_dt = (e2 - e0) / (t2 - t0)
        margin = canonical_laplacian(dom, e1).real - de_dt - 0.5 * hessian_norm_sq(dom, f1) + C * e1
        out.append(MonitorSample(t1, float(np.min(margin)), margin))
    return out
