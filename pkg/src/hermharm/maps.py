"""Maps from a Hermitian torus into a target chart, with energies and residuals.

Derivative arrays are laid out as ``df_dz[..., i, a] = d f^i / d z^a`` and
``df_dzbar[..., i, b] = d f^i / d zbar^b``. Pointwise pairings use
``G = dom.h_inv`` (``G[a, b] = h^{a bbar}``) and the target metric evaluated at
``f``; for Riemannian targets the real metric is used as a Hermitian one, so
every formula serves both target types.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import forms
from .geometry import torsion_vector
from .stencils import HALF_WIDTH

RANK_RTOL = 1e-6
RANK_ATOL = 1e-10


class NonPeriodicError(ValueError):
    """An operation needs a periodic field but the map carries a non-periodic linear part."""


class MapField:
    """A grid-sampled map ``f = linear @ x + periodic``.

    ``periodic`` has shape ``grid.shape + (n,)`` (real for Riemannian targets,
    complex for Kahler ones). ``linear`` is an ``n x 2m`` matrix acting on the
    real coordinates; its derivatives are exact constants. Instances are
    immutable snapshots: flows build new ones with ``with_periodic``.
    """

    def __init__(self, grid, target, periodic, linear=None):
        dtype = complex if target.is_kahler else float
        periodic = np.array(np.broadcast_to(periodic, grid.shape + (target.n,)), dtype=dtype)
        if not target.is_kahler and np.iscomplexobj(periodic):
            raise TypeError("Riemannian targets need real map values")
        periodic.setflags(write=False)
        self.grid = grid
        self.target = target
        self.periodic = periodic
        if linear is not None:
            linear = np.array(linear, dtype=dtype)
            if linear.shape != (target.n, grid.real_dim):
                raise ValueError(f"linear part must have shape {(target.n, grid.real_dim)}, got {linear.shape}")
            if not np.any(linear):
                linear = None
        self.linear = linear
        target.check_in_chart(self.values)

    @property
    def n(self):
        return self.target.n

    @property
    def is_periodic(self):
        return self.linear is None or self.target.translation_invariant

    def with_periodic(self, periodic):
        return MapField(self.grid, self.target, periodic, self.linear)

    def with_scheme(self, scheme):
        """Same samples, differentiated with another stencil scheme."""
        return MapField(self.grid.with_scheme(scheme), self.target, self.periodic, self.linear)

    def require_periodic(self, what):
        if not self.is_periodic:
            raise NonPeriodicError(
                f"{what} needs a periodic map; the linear part is not periodic in a {self.target.kind} chart"
            )

    @cached_property
    def values(self):
        if self.linear is None:
            return self.periodic
        x = np.stack(np.broadcast_arrays(*self.grid.coords()), axis=-1)
        return self.periodic + x @ self.linear.T

    @cached_property
    def real_derivatives(self):
        """dfx[..., i, k] = d f^i / d x^k."""
        g = self.grid
        d = np.stack([g.dx(self.periodic, k) for k in range(g.real_dim)], axis=-1)
        if self.linear is not None:
            d = d + self.linear
        return d

    @cached_property
    def df_dz(self):
        d = self.real_derivatives
        return 0.5 * (d[..., 0::2] - 1j * d[..., 1::2])

    @cached_property
    def df_dzbar(self):
        d = self.real_derivatives
        return 0.5 * (d[..., 0::2] + 1j * d[..., 1::2])

    @cached_property
    def g(self):
        return np.asarray(self.target.metric(self.values), dtype=complex)

    @cached_property
    def christoffel(self):
        return self.target.christoffel(self.values)

    def real_jacobian(self):
        """Real Jacobian of shape (..., real target dim, 2m)."""
        d = self.real_derivatives
        if self.target.is_kahler:
            return np.concatenate([d.real, d.imag], axis=-2)
        return d


def derivatives(f):
    """(df_dz, df_dzbar) with layout [..., i, a]."""
    return f.df_dz, f.df_dzbar


# map presets


def constant_map(grid, target, value):
    value = np.asarray(value)
    return MapField(grid, target, np.broadcast_to(value, grid.shape + (target.n,)))


def linear_map(grid, target, matrix, offset=None):
    """f = matrix @ x + offset; ``matrix`` is n x 2m."""
    offset = np.zeros(target.n) if offset is None else np.asarray(offset)
    return MapField(grid, target, np.broadcast_to(offset, grid.shape + (target.n,)), linear=matrix)


def trig_map(grid, target, modes, offset=None):
    """Finite Fourier data: each mode adds ``amplitude * cos(k . x + phase)`` to one component.

    ``modes`` is a list of dicts with keys ``component``, ``amplitude`` (a float,
    or a complex / ``[re, im]`` pair for Kahler targets), ``wavevector`` and
    optional ``phase``.
    """
    dtype = complex if target.is_kahler else float
    out = np.zeros(grid.shape + (target.n,), dtype=dtype)
    if offset is not None:
        out += np.asarray(offset, dtype=dtype)
    x = grid.coords()
    for mode in modes:
        amp = mode["amplitude"]
        if isinstance(amp, (list, tuple)):
            amp = complex(amp[0], amp[1])
        k = mode["wavevector"]
        if len(k) != grid.real_dim:
            raise ValueError(f"wavevector needs {grid.real_dim} entries, got {len(k)}")
        arg = sum(kk * xi for kk, xi in zip(k, x)) + mode.get("phase", 0.0)
        out[..., int(mode["component"])] += amp * np.cos(arg)
    return MapField(grid, target, out)


def band_limited_field(grid, n_components, rng, bandwidth=1, complex_values=False):
    """Random periodic field with Fourier modes |k|_inf <= bandwidth, unit max amplitude."""
    shape = grid.shape
    freqs = np.fft.fftfreq(grid.n_per_axis, d=1.0 / grid.n_per_axis)
    keep = np.abs(freqs) <= bandwidth
    mask = np.ones(shape, dtype=bool)
    for axis in range(grid.real_dim):
        sl = [None] * grid.real_dim
        sl[axis] = slice(None)
        mask = mask & keep[tuple(sl)]
    mask.flat[0] = False
    parts = []
    for _ in range(n_components):
        comps = []
        for _ in range(2 if complex_values else 1):
            coef = np.zeros(shape, dtype=complex)
            coef[mask] = rng.standard_normal(mask.sum()) + 1j * rng.standard_normal(mask.sum())
            field = np.fft.ifftn(coef).real
            comps.append(field / np.max(np.abs(field)))
        parts.append(comps[0] + 1j * comps[1] if complex_values else comps[0])
    return np.stack(parts, axis=-1)


def random_map(grid, target, seed=0, amplitude=0.1, bandwidth=1, center=None):
    """Seeded band-limited map ``center + amplitude * field`` (each component max-normalised)."""
    rng = np.random.default_rng(seed)
    field = band_limited_field(grid, target.n, rng, bandwidth, complex_values=target.is_kahler)
    dtype = complex if target.is_kahler else float
    center = np.zeros(target.n, dtype=dtype) if center is None else np.asarray(center, dtype=dtype)
    return MapField(grid, target, center + amplitude * field)


def make_map(grid, target, kind, **params):
    """Build a map preset by name: constant, linear, trig or random."""
    if kind == "constant":
        return constant_map(grid, target, params.get("value", np.zeros(target.n)))
    if kind == "linear":
        return linear_map(grid, target, params["matrix"], params.get("offset"))
    if kind == "trig":
        return trig_map(grid, target, params["modes"], params.get("offset"))
    if kind == "random":
        return random_map(
            grid, target, params.get("seed", 0), params.get("amplitude", 0.1), params.get("bandwidth", 1), params.get("center")
        )
    raise ValueError(f"unknown map preset {kind!r}")


# pointwise norms


def dbar_norm_sq(dom, f):
    """|dbar f|^2 = h^{a bbar} g_{i jbar} dbar_b f^i conj(dbar_a f^j)."""
    d = f.df_dzbar
    return np.einsum("...ab,...ij,...ib,...ja->...", dom.h_inv, f.g, d, np.conj(d)).real


def del_norm_sq(dom, f):
    """|del f|^2 = h^{a bbar} g_{i jbar} d_a f^i conj(d_b f^j)."""
    d = f.df_dz
    return np.einsum("...ab,...ij,...ia,...jb->...", dom.h_inv, f.g, d, np.conj(d)).real


def tensor_norm_sq(dom, g, phi):
    """Pointwise |phi|^2 of a target-valued (1,1)-tensor phi[..., i, p, q]."""
    G = dom.h_inv
    return np.einsum("...ij,...pr,...sq,...ipq,...jrs->...", g, G, G, phi, np.conj(phi)).real


def vector_norm_sq(g, v):
    return np.einsum("...ij,...i,...j->...", g, v, np.conj(v)).real


@dataclass
class EnergyReport:
    E_dbar: float
    E_partial: float
    E_total: float
    density: np.ndarray

    def as_dict(self):
        return {"E_dbar": self.E_dbar, "E_partial": self.E_partial, "E_total": self.E_total}


def _real_domain_metric(dom):
    """Riemannian metric Re(h_{a bbar} dz^a dzbar^b) on the real coordinates."""
    m = dom.m
    h = dom.h
    out = np.zeros(h.shape[:-2] + (2 * m, 2 * m))
    out[..., 0::2, 0::2] = h.real
    out[..., 1::2, 1::2] = h.real
    out[..., 0::2, 1::2] = h.imag
    out[..., 1::2, 0::2] = -h.imag
    return out


def _real_target_metric(f):
    g = f.g
    if not f.target.is_kahler:
        return g.real
    n = f.n
    out = np.zeros(g.shape[:-2] + (2 * n, 2 * n))
    # real coordinates ordered (Re w^1..Re w^n, Im w^1..Im w^n), matching real_jacobian
    out[..., :n, :n] = g.real
    out[..., n:, n:] = g.real
    out[..., :n, n:] = g.imag
    out[..., n:, :n] = -g.imag
    return out


def total_energy_real(dom, f):
    """E(f) = (1/2) int |df|^2 computed from the real Jacobian and real metrics."""
    J = f.real_jacobian()
    gm_inv = np.linalg.inv(_real_domain_metric(dom))
    gn = _real_target_metric(f)
    dens = 0.5 * np.einsum("...IJ,...Ik,...Jl,...kl->...", gn, J, J, gm_inv)
    return dom.integrate(dens)


def energies(dom, f, total=True):
    """E'' = int |dbar f|^2, E' = int |del f|^2 and E = E' + E'' (from the real Jacobian).

    With ``total=False`` E is taken as E' + E'' and the real-Jacobian route is skipped.
    """
    ed = dbar_norm_sq(dom, f)
    ep = del_norm_sq(dom, f)
    E_dbar, E_partial = float(dom.integrate(ed)), float(dom.integrate(ep))
    return EnergyReport(
        E_dbar=E_dbar,
        E_partial=E_partial,
        E_total=float(total_energy_real(dom, f)) if total else E_dbar + E_partial,
        density=0.5 * (ed + ep),
    )


def energy_density(dom, f):
    return 0.5 * (dbar_norm_sq(dom, f) + del_norm_sq(dom, f))


@dataclass
class SecondFundamental:
    tensor: np.ndarray  # [..., i, a, b]
    trace: np.ndarray  # [..., i]


def mixed_second_derivatives(f):
    """d^2 f^i / dz^a dzbar^b as [..., i, a, b], by composing first derivatives."""
    g = f.grid
    db = f.df_dzbar
    return np.stack([g.dz(db, a) for a in range(g.m)], axis=-2)


def second_fundamental(dom, f):
    """del_E dbar f with its omega-trace."""
    gdz = np.einsum("...ijk,...ka->...ija", f.christoffel, f.df_dz)
    tensor = mixed_second_derivatives(f) + np.einsum("...ija,...jb->...iab", gdz, f.df_dzbar)
    trace = np.einsum("...ab,...iab->...i", dom.h_inv, tensor)
    return SecondFundamental(tensor, trace)


def second_fundamental_trace(dom, f):
    """omega-trace of del_E dbar f without forming the full tensor."""
    g = f.grid
    G = dom.h_inv
    db = f.df_dzbar
    trace = sum(np.einsum("...b,...ib->...i", G[..., a, :], g.dz(db, a)) for a in range(g.m))
    w = np.einsum("...ab,...jb,...ka->...jk", G, db, f.df_dz, optimize=True)
    return trace + np.einsum("...ijk,...jk->...i", f.christoffel, w)


def torsion_terms(dom, f):
    """(conj(T) . dbar f, T . del f) with T^c = h^{a bbar} Gamma^c_{a bbar}."""
    T = np.einsum("...ab,...cab->...c", dom.h_inv, dom.gamma_mixed)
    return (
        np.einsum("...c,...ic->...i", np.conj(T), f.df_dzbar),
        np.einsum("...c,...ic->...i", T, f.df_dz),
    )


def torsion_difference(dom, f):
    """Explicit first-order torsion expression that dbar_residual - partial_residual must equal."""
    bar_term, hol_term = torsion_terms(dom, f)
    return 2.0 * (bar_term - hol_term)


@dataclass
class Residuals:
    dbar_residual: np.ndarray
    partial_residual: np.ndarray
    harmonic_residual: np.ndarray
    hermitian_residual: np.ndarray
    pluri_residual_norm: float

    def as_dict(self, dom=None, g=None):
        out = {}
        for name in ("dbar_residual", "partial_residual", "harmonic_residual", "hermitian_residual"):
            r = getattr(self, name)
            out[name + "_max"] = float(np.max(np.abs(r)))
            if dom is not None and g is not None:
                out[name + "_l2"] = float(np.sqrt(dom.integrate(vector_norm_sq(g, r))))
        out["pluri_residual_norm"] = self.pluri_residual_norm
        return out


def residuals(dom, f, second=None):
    """The five harmonic-map residual fields (signs as L2 gradients, see el_gradient_check)."""
    second = second_fundamental(dom, f) if second is None else second
    bar_term, hol_term = torsion_terms(dom, f)
    trace = second.trace
    pluri = float(np.sqrt(max(dom.integrate(tensor_norm_sq(dom, f.g, second.tensor)), 0.0)))
    return Residuals(
        dbar_residual=-(trace - 2.0 * bar_term),
        partial_residual=-(trace - 2.0 * hol_term),
        harmonic_residual=-(trace - bar_term - hol_term),
        hermitian_residual=-trace,
        pluri_residual_norm=pluri,
    )


def dbar_residual(dom, f):
    trace = second_fundamental_trace(dom, f)
    bar_term, _ = torsion_terms(dom, f)
    return -(trace - 2.0 * bar_term)


def hermitian_residual(dom, f):
    return -second_fundamental_trace(dom, f)


def divergence_form_residual(dom, f):
    """dbar_residual minus the correction from the co-differential of omega.

    The correction uses ``torsion_vector`` (rebuilt from ``torsion_trace``)
    rather than the direct trace of the mixed Christoffel symbols, so agreement
    with ``hermitian_residual`` checks two independent routes.
    """
    T = torsion_vector(dom)
    correction = 2.0 * np.einsum("...c,...ic->...i", np.conj(T), f.df_dzbar)
    return dbar_residual(dom, f) - correction


def pluri_residual_norm(dom, f):
    second = second_fundamental(dom, f)
    return float(np.sqrt(max(dom.integrate(tensor_norm_sq(dom, f.g, second.tensor)), 0.0)))


# curvature pairings


@dataclass
class CurvaturePairing:
    field: np.ndarray
    integral: float


def _require_kahler(f, what):
    if not f.target.is_kahler:
        raise TypeError(f"{what} needs a Kahler target")


def _require_riemannian(f, what):
    if f.target.is_kahler:
        raise TypeError(f"{what} needs a Riemannian target")


def curvature_pairing_Q(dom, f):
    """Q = -1/2 h^{a a'} h^{c c'} R_{i jbar k lbar} B^{ij}_{ac} conj(B^{lk}_{a'c'}).

    B^{ij}_{ac} = d_a f^i d_c fbar^j - d_c f^i d_a fbar^j, where d_c fbar^j = conj(dbar_c f^j).
    In a frame with h = identity this is the normal-coordinate sum.
    """
    _require_kahler(f, "curvature_pairing_Q")
    dz = f.df_dz
    dfbar = np.conj(f.df_dzbar)
    B = np.einsum("...ia,...jc->...ijac", dz, dfbar)
    B = B - np.swapaxes(B, -1, -2)
    R = f.target.curvature(f.values)
    G = dom.h_inv
    field = -0.5 * np.einsum("...ijkl,...ad,...ce,...ijac,...lkde->...", R, G, G, B, np.conj(B)).real
    return CurvaturePairing(field, float(dom.integrate(field)))


def gram_matrix(dom, f):
    """A^{ij} = h^{a bbar} d_a f^i dbar_b f^j (Hermitian PSD for real maps)."""
    return np.einsum("...ab,...ia,...jb->...ij", dom.h_inv, f.df_dz, f.df_dzbar)


# Normalisation of Q0 against the complexified pairing |phi|^2 = g_ij phi^i conj(phi^j).
# With it the integral identity for Riemannian targets holds with the same
# coefficients as for Kahler ones (checked by bochner_integral_check).
Q0_FACTOR = -1.0


def curvature_pairing_Q0(dom, f):
    """Q0 = Q0_FACTOR * R_{ijkl} A^{il} A^{jk} for a Riemannian target.

    Q0 >= 0 for Hermitian-negative targets and vanishes where A has rank <= 1.
    """
    _require_riemannian(f, "curvature_pairing_Q0")
    A = gram_matrix(dom, f)
    R = f.target.curvature(f.values)
    field = Q0_FACTOR * np.einsum("...ijkl,...il,...jk->...", R, A, A).real
    return CurvaturePairing(field, float(dom.integrate(field)))


def curvature_pairing(dom, f):
    return curvature_pairing_Q(dom, f) if f.target.is_kahler else curvature_pairing_Q0(dom, f)


# forms built from the map


@dataclass
class PluriformPair:
    omega0: np.ndarray  # coefficients [..., a, b] of dz^a ^ dzbar^b
    omega1: np.ndarray
    d_norms: tuple


def pluriform(dom, f):
    """The (1,1)-forms omega0 = (i/2) g_{i jbar} (d_a f^i)(dbar_b fbar^j) dz^a ^ dzbar^b
    and omega1 = (i/2) g_{i jbar} (d_a fbar^j)(dbar_b f^i) dz^a ^ dzbar^b.

    Both are stored as coefficients of dz^a ^ dzbar^b. For Riemannian targets
    they coincide.
    """
    dz, dzb = f.df_dz, f.df_dzbar
    omega0 = 0.5j * np.einsum("...ij,...ia,...jb->...ab", f.g, dz, np.conj(dz))
    # d fbar^j / dz^a = conj(dbar_a f^j)
    omega1 = 0.5j * np.einsum("...ij,...ja,...ib->...ab", f.g, np.conj(dzb), dzb)
    norms = tuple(form_d_norm(dom, w, f.is_periodic) for w in (omega0, omega1))
    return PluriformPair(omega0, omega1, norms)


def seam_mask(grid, scheme):
    """Grid points whose difference stencil does not wrap around the torus seam."""
    w = HALF_WIDTH[scheme]
    idx = np.arange(grid.n_per_axis)
    keep = (idx >= w) & (idx <= grid.n_per_axis - 1 - w)
    mask = np.ones(grid.shape, dtype=bool)
    for axis in range(grid.real_dim):
        sl = [None] * grid.real_dim
        sl[axis] = slice(None)
        mask = mask & keep[tuple(sl)]
    return mask


def form_d_norm(dom, coeffs, periodic=True):
    """L2 norm of d of the (1,1)-form with coefficients ``coeffs[..., a, b]``.

    Coefficients of a non-periodic map are smooth on the open cell but jump
    across the seam, so the norm is then taken over points away from it (with
    a finite-difference scheme, since spectral derivatives are global).
    """
    grid = dom.grid
    if not periodic and grid.scheme == "spectral":
        grid = grid.with_scheme("fd4")
    dw = forms.d(forms.from_11(coeffs), grid.dz, grid.dzbar, grid.m)
    if periodic:
        return dom.l2(dw)
    mask = seam_mask(grid, grid.scheme)
    total = sum(float(np.sum(np.abs(np.broadcast_to(c, grid.shape)[mask]) ** 2)) for c in dw.values())
    return float(np.sqrt(total * grid.cell_volume))


def pairing_field(dom, f):
    """Coefficients P[..., d, b] of {dbar f, dbar f} = P_{d bbar} dz^d ^ dzbar^b."""
    d = f.df_dzbar
    return -np.einsum("...ij,...ib,...jd->...db", f.g, d, np.conj(d))


def rank_df(f, tol=RANK_RTOL, atol=RANK_ATOL):
    """Pointwise real rank of df from singular values above max(tol * s_max, atol)."""
    s = np.linalg.svd(f.real_jacobian(), compute_uv=False)
    smax = s[..., :1]
    return np.sum(s > np.maximum(tol * smax, atol), axis=-1)
