"""Identity checks tying the modules together, plus the YAML scenario runner.

Every check returns a CheckReport with status ``pass``, ``fail`` or
``skipped`` (a check whose precondition does not hold). Checks used from
scenario files are registered by name in ``CHECKS``.
"""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np
import yaml

from . import forms
from .flow import FlowConfig, run
from .geometry import GridSpec, build_domain, classify_metric
from .maps import (
    MapField,
    band_limited_field,
    curvature_pairing,
    dbar_norm_sq,
    del_norm_sq,
    divergence_form_residual,
    energies,
    make_map,
    pairing_field,
    pluri_residual_norm,
    pluriform,
    rank_df,
    residuals,
    second_fundamental,
    tensor_norm_sq,
    torsion_difference,
    vector_norm_sq,
)
from .stencils import SCHEMES
from .targets import (
    ChartError,
    SAMPSON_CONDITIONS,
    SIU_CONDITIONS,
    constant_curvature_form,
    make_target,
    sampson_form,
    sampson_probe,
    siu_probe,
)

SEED_ENV = "HERMHARM_SEED"

# the next more accurate scheme, used to estimate stencil error
REFERENCE_SCHEME = {"fd2": "fd4", "fd4": "fd6", "fd6": "spectral"}
SPECTRAL_REL_ERROR = 1e-9
ROUNDOFF = 1e-11


@dataclass
class CheckReport:
    name: str
    status: str  # pass | fail | skipped
    measured: dict = field(default_factory=dict)
    tolerance: float = 0.0
    note: str = ""
    witness: dict = field(default_factory=dict)

    @property
    def passed(self):
        return self.status != "fail"

    def as_dict(self):
        return {
            "name": self.name,
            "status": self.status,
            "measured": self.measured,
            "tolerance": self.tolerance,
            "note": self.note,
            "witness": self.witness,
        }


def _status(ok):
    return "pass" if ok else "fail"


def _l2(dom, g, r):
    return float(np.sqrt(max(dom.integrate(vector_norm_sq(g, r)), 0.0)))


def _pairing(dom, f, r, v):
    """Real part of the L2 pairing int g_{i jbar} r^i conj(v^j) vol."""
    return float(np.real(dom.integrate(np.einsum("...ij,...i,...j->...", f.g, r, np.conj(v)))))


def variation_field(f, seed=0, bandwidth=1):
    rng = np.random.default_rng(seed)
    return band_limited_field(f.grid, f.n, rng, bandwidth, complex_values=f.target.is_kahler)


def el_gradient_check(dom, f, v=None, eps=1e-4, tol=1e-4, seed=0):
    """Central difference of E'' (and E') along v against 2 Re<residual, v>."""
    f.require_periodic("el_gradient_check")
    if not 1e-5 <= eps <= 1e-3:
        raise ValueError(f"eps={eps} outside [1e-5, 1e-3]")
    v = variation_field(f, seed) if v is None else np.asarray(v)
    plus = energies(dom, f.with_periodic(f.periodic + eps * v), total=False)
    minus = energies(dom, f.with_periodic(f.periodic - eps * v), total=False)
    res = residuals(dom, f)
    base = energies(dom, f, total=False)
    measured = {}
    ok = True
    for label, key, r in (
        ("dbar", "E_dbar", res.dbar_residual),
        ("partial", "E_partial", res.partial_residual),
    ):
        numeric = (getattr(plus, key) - getattr(minus, key)) / (2 * eps)
        analytic = 2.0 * _pairing(dom, f, r, v)
        # near a critical point both sides drop to the roundoff of the difference quotient
        size = max(abs(numeric), abs(analytic), ROUNDOFF * getattr(base, key) / eps)
        err = abs(numeric - analytic) / size if size > 0 else 0.0
        measured[f"{label}_numeric"] = numeric
        measured[f"{label}_analytic"] = analytic
        measured[f"{label}_rel_error"] = err
        ok = ok and err <= tol
    return CheckReport(
        "el_gradient", _status(ok), measured, tol,
        "first variation of the dbar- and del-energies equals twice the real L2 pairing with the residuals",
    )


def bochner_terms(dom, f):
    """Integrals entering the Siu-type identity, with the left side from discrete forms."""
    second = second_fundamental(dom, f)
    full = dom.integrate(tensor_norm_sq(dom, f.g, second.tensor))
    trace = dom.integrate(vector_norm_sq(f.g, second.trace))
    q = curvature_pairing(dom, f).integral
    m = dom.m
    grid = dom.grid
    P = forms.from_11(pairing_field(dom, f))
    ddP = forms.del_(forms.delbar(P, grid.dzbar, m), grid.dz, m)
    weight = forms.scale(forms.power(dom.omega, m - 2), 1.0 / math.factorial(m - 2))
    lhs = grid.integrate(forms.top_density(forms.wedge(ddP, weight), m))
    return {
        "full_norm": float(full),
        "trace_norm": float(trace),
        "curvature": float(q),
        "lhs": float(np.real(lhs)),
        "lhs_imag": float(np.imag(lhs)),
        "rhs": float(4.0 * (full - trace + q)),
    }


def stencil_error_estimate(dom, f, terms=None):
    """Largest change of the identity terms when switching to the next more accurate scheme."""
    terms = bochner_terms(dom, f) if terms is None else terms
    scale = 4.0 * (terms["full_norm"] + terms["trace_norm"] + abs(terms["curvature"]))
    floor = SPECTRAL_REL_ERROR * max(scale, 1e-300)
    ref = REFERENCE_SCHEME.get(dom.grid.scheme)
    if ref is None:
        return floor, None
    other = bochner_terms(dom.with_scheme(ref), f.with_scheme(ref))
    diffs = [4.0 * abs(terms[k] - other[k]) for k in ("full_norm", "trace_norm", "curvature")]
    diffs.append(abs(terms["lhs"] - other["lhs"]))
    return max(max(diffs), floor), ref


def bochner_integral_check(dom, f, tol_factor=10.0):
    """int ddbar{dbar f, dbar f} ^ omega^{m-2}/(m-2)! = 4 int (|ddbar_E f|^2 - |Tr ddbar_E f|^2) + 4 int Q.

    Passes when the two sides agree within ``tol_factor`` times the stencil
    error estimate; for m = 2 the left side must also vanish (Stokes).
    """
    f.require_periodic("bochner_integral_check")
    if dom.m < 2:
        return CheckReport("bochner_integral", "skipped", note="needs complex dimension m >= 2")
    terms = bochner_terms(dom, f)
    est, ref = stencil_error_estimate(dom, f, terms)
    gap = abs(terms["lhs"] - terms["rhs"])
    ok = gap <= tol_factor * est
    measured = dict(terms, gap=gap, error_estimate=est, reference_scheme=ref)
    if dom.m == 2:
        measured["rhs_vs_zero"] = abs(terms["rhs"])
        ok = ok and abs(terms["lhs"]) <= tol_factor * est and abs(terms["rhs"]) <= tol_factor * est
    return CheckReport(
        "bochner_integral", _status(ok), measured, tol_factor * est,
        "ddbar-trick integral identity (Kahler targets with Q, Riemannian targets with Q0)",
    )


def convergence_order(coarse_error, fine_error, ratio=2.0):
    if fine_error <= 0 or coarse_error <= 0:
        return math.inf
    return math.log(coarse_error / fine_error) / math.log(ratio)


def bochner_convergence(dom_coarse, f_coarse, dom_fine, f_fine):
    """Empirical order of the stencil error estimate between two resolutions."""
    e0, _ = stencil_error_estimate(dom_coarse, f_coarse)
    e1, _ = stencil_error_estimate(dom_fine, f_fine)
    n0, n1 = dom_coarse.grid.n_per_axis, dom_fine.grid.n_per_axis
    return {"coarse_error": e0, "fine_error": e1, "order": convergence_order(e0, e1, n1 / n0)}


def pluri_Q_vanishing_check(dom, f, tol=1e-8, pluri_tol=1e-6):
    """int |Q| (or |Q0|) <= tol * E(f) on a certified pluri-harmonic map."""
    rep = energies(dom, f)
    scale = math.sqrt(max(rep.E_total, 0.0)) or 1.0
    pluri = pluri_residual_norm(dom, f)
    measured = {"pluri_residual_norm": pluri, "E_total": rep.E_total}
    if pluri > pluri_tol * scale:
        return CheckReport(
            "pluri_Q_vanishing", "skipped", measured, tol,
            f"input is not pluri-harmonic (residual {pluri:.3e} > {pluri_tol:g} x sqrt(E))",
        )
    qfield = curvature_pairing(dom, f).field
    abs_q = float(dom.integrate(np.abs(qfield)))
    measured["integral_abs_Q"] = abs_q
    ok = abs_q <= tol * rep.E_total or abs_q == 0.0
    return CheckReport("pluri_Q_vanishing", _status(ok), measured, tol * rep.E_total,
                       "curvature pairing vanishes on pluri-harmonic maps without curvature assumptions")


def pluriform_closed_check(dom, f, tol_factor=10.0, floor=1e-12):
    """|d omega0| + |d omega1| within tol_factor x stencil error on a pluri-harmonic map."""
    pair = pluriform(dom, f)
    total = sum(pair.d_norms)
    grid = dom.grid
    ref = REFERENCE_SCHEME.get(grid.scheme) if f.is_periodic else "fd6"
    scale = max(float(np.sqrt(dom.integrate(np.sum(np.abs(pair.omega0) ** 2, axis=(-1, -2))))), 1.0)
    if ref is None:
        est = SPECTRAL_REL_ERROR * scale
    else:
        other = pluriform(dom.with_scheme(ref), f.with_scheme(ref))
        est = abs(total - sum(other.d_norms))
    est = max(est, floor * scale)
    ok = total <= tol_factor * est
    return CheckReport(
        "pluriform_closed", _status(ok),
        {"d_omega0": pair.d_norms[0], "d_omega1": pair.d_norms[1], "error_estimate": est},
        tol_factor * est, "the forms omega0 and omega1 of a pluri-harmonic map are closed",
    )


def divergence_form_check(dom, f, tol=1e-8):
    a = divergence_form_residual(dom, f)
    b = residuals(dom, f).hermitian_residual
    size = _l2(dom, f.g, b)
    gap = _l2(dom, f.g, a - b)
    rel = gap / size if size > 0 else gap
    return CheckReport("divergence_form", _status(rel <= tol), {"rel_gap": rel, "hermitian_l2": size}, tol,
                       "divergence form of the Hermitian-harmonic equation")


def balanced_coincidence_check(dom, f, tol=1e-8):
    """Balanced domains: dbar and del residuals coincide; otherwise they differ by the torsion expression."""
    res = residuals(dom, f)
    diff = res.dbar_residual - res.partial_residual
    size = _l2(dom, f.g, res.dbar_residual)
    report = classify_metric(dom)
    balanced = report.balanced or dom.m == 1
    if balanced:
        gap = _l2(dom, f.g, diff)
        what = "coincidence on a balanced domain"
    else:
        gap = _l2(dom, f.g, diff - torsion_difference(dom, f))
        what = "difference equals the torsion expression"
    rel = gap / size if size > 0 else gap
    return CheckReport("balanced_coincidence", _status(rel <= tol),
                       {"rel_gap": rel, "balanced": balanced, "balanced_residual": report.balanced_residual},
                       tol, what)


def energy_split_check(dom, f, tol=1e-10):
    rep = energies(dom, f)
    gap = abs(rep.E_total - rep.E_dbar - rep.E_partial)
    rel = gap / rep.E_total if rep.E_total > 0 else gap
    return CheckReport("energy_split", _status(rel <= tol), rep.as_dict() | {"rel_gap": rel}, tol,
                       "E = E' + E'' with E from the real Jacobian")


def target_negativity(target, n_samples=200, seed=0):
    """Probe verdicts at the chart origin for the negativity the rank statements assume."""
    point = np.zeros(target.n)
    if target.is_kahler:
        conditions = ("siu_strongly_negative", "siu_nondegenerate")
        probe = siu_probe
    else:
        conditions = ("sampson_hermitian_negative", "sampson_nondegenerate")
        probe = sampson_probe
    return {c: probe(target, point, n_samples, seed, c).verdict for c in conditions}


def rigidity_probe(dom, f, tol=1e-8, rank_tol=None, energy_floor=1e-300, require_negative=True):
    """Wherever the curvature pairing is negligible the real rank of df must be at most 2.

    Uses the scale-free ratio |Q0| / e^2. For Kahler targets the Q-based
    statement is checked instead: negligible Q with rank >= 4 forces the map to
    be holomorphic or anti-holomorphic at that point.
    """
    rank_tol = max(10.0 * math.sqrt(tol), 1e-6) if rank_tol is None else rank_tol
    if require_negative:
        verdicts = target_negativity(f.target)
        if not all(v == "pass" for v in verdicts.values()):
            return CheckReport("rigidity", "skipped", {"target_verdicts": verdicts}, tol,
                               "target does not carry a strong negativity verdict")
    e = energies(dom, f).density
    q = curvature_pairing(dom, f).field
    live = e > energy_floor
    q_rel = np.where(live, np.abs(q) / np.where(live, e, 1.0) ** 2, np.inf)
    ranks = rank_df(f, tol=rank_tol)
    low = live & (q_rel <= tol)
    if f.target.is_kahler:
        mixedness = np.minimum(dbar_norm_sq(dom, f), del_norm_sq(dom, f)) / np.where(live, e, 1.0)
        bad = low & (ranks >= 4) & (mixedness > rank_tol)
        statement = "negligible Q with rank >= 4 only at holomorphic or anti-holomorphic points"
    else:
        bad = low & (ranks > 2)
        statement = "negligible Q0 only where rank df <= 2"
    measured = {
        "max_rank": int(np.max(ranks)),
        "low_curvature_points": int(np.sum(low)),
        "live_points": int(np.sum(live)),
        "min_q_rel": float(np.min(q_rel)) if np.any(live) else None,
        "violations": int(np.sum(bad)),
        "rank_tol": rank_tol,
    }
    witness = {}
    if np.any(bad):
        idx = tuple(int(i) for i in np.argwhere(bad)[0])
        witness = {
            "grid_index": list(idx),
            "value": np.asarray(f.values[idx]).tolist() if not f.target.is_kahler
            else {"re": f.values[idx].real.tolist(), "im": f.values[idx].imag.tolist()},
            "q": float(q[idx]),
            "density": float(e[idx]),
            "q_rel": float(q_rel[idx]),
            "rank": int(ranks[idx]),
            "singular_values": np.linalg.svd(f.real_jacobian()[idx], compute_uv=False).tolist(),
        }
    return CheckReport("rigidity", _status(not np.any(bad)), measured, tol, statement, witness)


def flow_monotone_check(trace, tol=1e-9):
    """E'' never increases between recorded steps beyond tol (relative to its initial value)."""
    e = trace.column("E_dbar")
    if e.size < 2:
        return CheckReport("flow_monotone", "skipped", note="fewer than two records")
    rise = float(np.max(np.diff(e)))
    scale = max(e[0], 1e-300)
    return CheckReport("flow_monotone", _status(rise <= tol * scale), {"max_increase": rise, "E_dbar_initial": e[0]},
                       tol * scale, "dbar-energy is non-increasing along the flow")


def flow_converged_check(trace):
    ok = trace.converged
    return CheckReport("flow_converged", _status(ok), trace.summary(), 0.0, "flow reached its stop tolerance")


def harmonic_minimum_energy(dom, f):
    """Least energy in the homotopy class of a map into flat space over a flat torus.

    The harmonic representative is the linear part, whose energy is
    (1/2) |L|^2 times the torus volume.
    """
    if f.target.kind not in ("euclidean", "flat"):
        raise ValueError("analytic minimum only for flat targets")
    if not np.allclose(dom.h, np.eye(dom.m)):
        raise ValueError("analytic minimum only for the flat domain metric")
    L = np.zeros((f.n, dom.grid.real_dim)) if f.linear is None else f.linear
    volume = dom.grid.period ** dom.grid.real_dim
    return 0.5 * float(np.sum(np.abs(L) ** 2)) * volume


def terminal_energy_check(dom, trace, tol=1e-6):
    f = trace.final
    target_energy = harmonic_minimum_energy(dom, f)
    final = energies(dom, f).E_total
    gap = abs(final - target_energy)
    scale = max(target_energy, 1.0)
    return CheckReport("terminal_energy", _status(gap <= tol * scale),
                       {"final_E": final, "analytic_minimum": target_energy, "gap": gap}, tol * scale,
                       "terminal energy equals the minimum over the homotopy class")


def constant_curvature_check(target, n_samples=100, seed=0, tol=1e-8, point=None):
    """Sampson form equals kappa((tr A)^2 - tr A^2) for orthonormal-frame PSD samples."""
    if target.is_kahler or target.kind not in ("sphere_stereo", "hyperbolic_ball", "euclidean"):
        return CheckReport("constant_curvature", "skipped", note="needs a Riemannian space-form target")
    rng = np.random.default_rng(seed)
    point = np.zeros(target.n) if point is None else np.asarray(point, dtype=float)
    R = target.curvature(point)
    w, vecs = np.linalg.eigh(target.metric(point))
    E = vecs @ np.diag(w**-0.5) @ vecs.T
    worst = 0.0
    for _ in range(n_samples):
        r = int(rng.integers(1, target.n + 1))
        V = (rng.standard_normal((target.n, r)) + 1j * rng.standard_normal((target.n, r))) / np.sqrt(2)
        Af = V @ V.conj().T
        direct = sampson_form(R, E @ Af @ E.T)
        closed = constant_curvature_form(Af, target.kappa)
        worst = max(worst, abs(direct - closed) / max(1.0, abs(closed)))
    return CheckReport("constant_curvature", _status(worst <= tol), {"max_rel_error": worst}, tol,
                       "space-form curvature identity for Hermitian PSD matrices")


def ricci_check(target, n_points=20, seed=0, tol=1e-6):
    if target.is_kahler or target.kind != "sphere_stereo":
        return CheckReport("ricci", "skipped", note="needs a sphere_stereo target")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_points):
        y = rng.uniform(-1.0, 1.0, target.n)
        ric = target.ricci(y)
        expect = (target.n - 1) * target.kappa * target.metric(y)
        worst = max(worst, float(np.max(np.abs(ric - expect)) / np.max(np.abs(expect))))
    return CheckReport("ricci", _status(worst <= tol), {"max_rel_error": worst}, tol, "Ricci of the round metric")


def curvature_probe_check(target, condition, n_samples=200, seed=0, point=None):
    point = np.zeros(target.n) if point is None else np.asarray(point)
    if condition in SAMPSON_CONDITIONS:
        rep = sampson_probe(target, point, n_samples, seed, condition)
    elif condition in SIU_CONDITIONS:
        rep = siu_probe(target, point, n_samples, seed, condition)
    else:
        raise ValueError(f"unknown curvature condition {condition!r}")
    return CheckReport(f"curvature_probe:{condition}", _status(rep.verdict == "pass"), rep.as_dict(), 0.0,
                       "randomized curvature sign probe", rep.as_dict()["witness"])


# scenario files


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario configuration (exit code 2)."""


@dataclass
class Context:
    dom: object
    target: object
    f: MapField
    seed: int
    trace: object = None


def _map_check(fn):
    def wrapped(ctx, **params):
        return fn(ctx.dom, ctx.f, **params)

    return wrapped


def _flow_check(fn):
    def wrapped(ctx, **params):
        if ctx.trace is None:
            return CheckReport(fn.__name__, "fail", note="check needs a flow section in the scenario")
        return fn(ctx.trace, **params)

    return wrapped


def _target_check(fn):
    def wrapped(ctx, **params):
        params.setdefault("seed", ctx.seed)
        return fn(ctx.target, **params)

    return wrapped


def _el_check(ctx, **params):
    params.setdefault("seed", ctx.seed)
    return el_gradient_check(ctx.dom, ctx.f, **params)


def _terminal_energy(ctx, **params):
    if ctx.trace is None:
        return CheckReport("terminal_energy", "fail", note="check needs a flow section in the scenario")
    return terminal_energy_check(ctx.dom, ctx.trace, **params)


def _probe(ctx, condition, **params):
    params.setdefault("seed", ctx.seed)
    return curvature_probe_check(ctx.target, condition, **params)


CHECKS = {
    "el_gradient": _el_check,
    "bochner_integral": _map_check(bochner_integral_check),
    "pluri_Q_vanishing": _map_check(pluri_Q_vanishing_check),
    "pluriform_closed": _map_check(pluriform_closed_check),
    "divergence_form": _map_check(divergence_form_check),
    "balanced_coincidence": _map_check(balanced_coincidence_check),
    "energy_split": _map_check(energy_split_check),
    "rigidity": _map_check(rigidity_probe),
    "flow_monotone": _flow_check(flow_monotone_check),
    "flow_converged": _flow_check(flow_converged_check),
    "terminal_energy": _terminal_energy,
    "constant_curvature": _target_check(constant_curvature_check),
    "ricci": _target_check(ricci_check),
    "curvature_probe": _probe,
}


def _section(cfg, key, required=True):
    value = cfg.get(key)
    if value is None:
        if required:
            raise ScenarioError(f"scenario is missing the '{key}' section")
        return None
    if not isinstance(value, dict):
        raise ScenarioError(f"scenario section '{key}' must be a mapping")
    return dict(value)


def load_scenario(path):
    try:
        with open(path) as fh:
            cfg = yaml.safe_load(fh)
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse scenario {path}: {exc}") from None
    if not isinstance(cfg, dict):
        raise ScenarioError("scenario file must contain a mapping")
    cfg.setdefault("name", os.path.splitext(os.path.basename(str(path)))[0])
    return validate_scenario(cfg)


def validate_scenario(cfg):
    """Check names and section shapes before any computation."""
    for key in ("domain", "target", "map"):
        _section(cfg, key)
    checks = cfg.get("checks", []) or []
    if not isinstance(checks, list):
        raise ScenarioError("'checks' must be a list")
    normalised = []
    for item in checks:
        if isinstance(item, str):
            item = {"name": item}
        if not isinstance(item, dict) or "name" not in item:
            raise ScenarioError(f"malformed check entry {item!r}")
        if item["name"] not in CHECKS:
            raise ScenarioError(f"unknown check {item['name']!r}; known checks: {sorted(CHECKS)}")
        normalised.append(dict(item))
    cfg["checks"] = normalised
    scheme = cfg["domain"].get("scheme", "fd4")
    if scheme not in SCHEMES:
        raise ScenarioError(f"unknown scheme {scheme!r}")
    return cfg


def scenario_seed(cfg):
    env = os.environ.get(SEED_ENV)
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ScenarioError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return int(cfg.get("seed", 0))


def parse_array(value):
    """Nested lists, or a mapping {re: ..., im: ...} for complex entries."""
    if isinstance(value, dict):
        if set(value) - {"re", "im"}:
            raise ScenarioError(f"complex arrays take keys 're' and 'im', got {sorted(value)}")
        re = np.asarray(value.get("re", 0.0), dtype=float)
        im = np.asarray(value.get("im", 0.0), dtype=float)
        return re + 1j * im
    return np.asarray(value, dtype=float)


def build_from_scenario(cfg, seed=None):
    """Domain, target and initial map of a validated scenario."""
    seed = scenario_seed(cfg) if seed is None else seed
    d = _section(cfg, "domain")
    t = _section(cfg, "target")
    mp = _section(cfg, "map")
    try:
        grid = GridSpec(int(d.pop("m")), int(d.pop("n_per_axis")), float(d.pop("period", 2 * np.pi)), d.pop("scheme", "fd4"))
        metric = d.pop("metric", "flat")
        if "wavevector" in d:
            d["wavevector"] = tuple(d["wavevector"])
        dom = build_domain(grid, metric, **d)
        target = make_target(t.pop("kind"), int(t.pop("n")), kappa=t.pop("kappa", None), margin=float(t.pop("margin", 0.05)))
        if t:
            raise ScenarioError(f"unknown target keys {sorted(t)}")
        kind = mp.pop("kind")
        linear = mp.pop("linear", None)
        if kind == "random":
            mp.setdefault("seed", seed)
        for key in ("matrix", "offset", "value", "center"):
            if key in mp:
                mp[key] = parse_array(mp[key])
        f = make_map(grid, target, kind, **mp)
        if linear is not None:
            f = MapField(grid, target, f.periodic, linear=parse_array(linear))
    except ScenarioError:
        raise
    except ChartError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid scenario configuration: {exc}") from None
    return dom, target, f


def flow_config(cfg):
    section = _section(cfg, "flow", required=False)
    if section is None:
        return None
    try:
        return FlowConfig(**section)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"invalid flow section: {exc}") from None


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj):
    """JSON with sorted keys; floats keep full precision (shortest round-trip repr)."""
    return json.dumps(obj, sort_keys=True, indent=2, default=_json_default, allow_nan=True)


@dataclass
class ScenarioResult:
    exit_code: int
    reports: list
    report_path: str = None
    trace_path: str = None
    summary: dict = None


def run_scenario(path, out_dir=None, only=None, with_flow=True):
    """Run a scenario file. Returns a ScenarioResult; exit code 0 iff every check passes.

    Configuration problems raise ScenarioError (callers map it to exit code 2).
    ``only`` restricts to a subset of check names.
    """
    cfg = load_scenario(path)
    if only:
        unknown = [name for name in only if name not in CHECKS]
        if unknown:
            raise ScenarioError(f"unknown check(s) {unknown}")
    seed = scenario_seed(cfg)
    fcfg = flow_config(cfg) if with_flow else None
    dom, target, f = build_from_scenario(cfg, seed)
    name = cfg["name"]
    report = {"scenario": name, "seed": seed, "domain": classify_metric(dom).as_dict()}
    trace = None
    if fcfg is not None:
        trace = run(dom, f, fcfg)
        report["flow"] = trace.summary()
        f = trace.final
    ctx = Context(dom, target, f, seed, trace)
    reports = []
    for item in cfg["checks"]:
        params = {k: v for k, v in item.items() if k != "name"}
        if only and item["name"] not in only:
            continue
        try:
            rep = CHECKS[item["name"]](ctx, **params)
        except TypeError as exc:
            raise ScenarioError(f"bad parameters for check {item['name']!r}: {exc}") from None
        except (ChartError, ValueError) as exc:
            rep = CheckReport(item["name"], "fail", note=f"error: {exc}")
        reports.append(rep)
    report["checks"] = [r.as_dict() for r in reports]
    exit_code = 0 if all(r.passed for r in reports) else 1
    report["exit_code"] = exit_code
    result = ScenarioResult(exit_code, reports, summary=report)
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        result.report_path = os.path.join(out_dir, f"{name}_report.json")
        with open(result.report_path, "w") as fh:
            fh.write(dumps(report) + "\n")
        if trace is not None:
            result.trace_path = os.path.join(out_dir, f"{name}_trace.csv")
            trace.to_csv(result.trace_path)
    return result
