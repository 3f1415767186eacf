"""Hermitian metrics on flat complex tori sampled on periodic grids.

Conventions used throughout the package:

* complex coordinates ``z^a = x^{2a-1} + i x^{2a}`` (0-based: grid axes ``2a`` and
  ``2a+1``), so ``d/dz = (d/dx - i d/dy) / 2`` and ``d/dzbar = (d/dx + i d/dy) / 2``;
* grid fields are batch-first: the first ``2m`` axes index the grid and any
  trailing axes are tensor components;
* ``h[..., a, b]`` is ``h_{a bbar}`` and ``h_inv[..., a, b]`` is the upper-index
  ``h^{a bbar}``, normalised by ``sum_b h^{a bbar} h_{c bbar} = delta^a_c``;
* the fundamental form is ``omega = (i/2) h_{a bbar} dz^a ^ dzbar^b`` and the
  volume form ``omega^m / m!`` has density ``det h`` against ``dx^1 ... dx^{2m}``.
"""

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from . import forms
from .expr import compile_expression
from .stencils import SCHEMES, derivative

VERDICT_TOL = 1e-6
MAX_COMPLEX_DIM = 3


class MetricError(ValueError):
    """Raised when a metric sample is not Hermitian positive-definite."""


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid on the real torus (R / period Z)^{2m}."""

    m: int
    n_per_axis: int
    period: float = 2 * np.pi
    scheme: str = "fd4"

    def __post_init__(self):
        if not 1 <= self.m <= MAX_COMPLEX_DIM:
            raise ValueError(f"complex dimension m={self.m} outside 1..{MAX_COMPLEX_DIM}")
        if self.n_per_axis < 8:
            raise ValueError(f"n_per_axis={self.n_per_axis} must be at least 8")
        if self.n_per_axis % 2:
            raise ValueError(f"n_per_axis={self.n_per_axis} must be even")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}; choose from {SCHEMES}")

    @property
    def real_dim(self):
        return 2 * self.m

    @property
    def shape(self):
        return (self.n_per_axis,) * self.real_dim

    @property
    def spacing(self):
        return self.period / self.n_per_axis

    @property
    def cell_volume(self):
        return self.spacing**self.real_dim

    def coords(self, sparse=True):
        """Real coordinates x^1..x^{2m}; sparse arrays broadcast against each other."""
        axis = np.arange(self.n_per_axis) * self.spacing
        return np.meshgrid(*([axis] * self.real_dim), indexing="ij", sparse=sparse)

    def with_n(self, n_per_axis):
        return GridSpec(self.m, n_per_axis, self.period, self.scheme)

    def with_scheme(self, scheme):
        return GridSpec(self.m, self.n_per_axis, self.period, scheme)

    # differential operators on grid fields (grid axes first)

    def dx(self, field, axis):
        return derivative(field, axis, self.spacing, self.scheme)

    def dz(self, field, a):
        return 0.5 * (self.dx(field, 2 * a) - 1j * self.dx(field, 2 * a + 1))

    def dzbar(self, field, b):
        return 0.5 * (self.dx(field, 2 * b) + 1j * self.dx(field, 2 * b + 1))

    def integrate(self, density):
        return np.sum(density) * self.cell_volume


class HermitianDomain:
    """A Hermitian metric field on the grid plus its derived connection data.

    Instances are treated as immutable; the derived fields are computed on first
    access and cached.
    """

    def __init__(self, grid, h, name="custom"):
        self.grid = grid
        self.name = name
        h = np.broadcast_to(np.asarray(h, dtype=complex), grid.shape + (grid.m, grid.m)).copy()
        h.setflags(write=False)
        self.h = h
        _validate_metric(h)

    @property
    def m(self):
        return self.grid.m

    @cached_property
    def h_inv(self):
        # upper-index convention: h^{a bbar} = (h^{-1})[b, a]
        return np.swapaxes(np.linalg.inv(self.h), -1, -2)

    @cached_property
    def vol(self):
        return np.linalg.det(self.h).real

    @cached_property
    def _dbar_h(self):
        """dbar_h[..., b, a, d] = d h_{a dbar} / d zbar^b."""
        return np.stack([self.grid.dzbar(self.h, b) for b in range(self.m)], axis=-3)

    @cached_property
    def _del_h(self):
        """del_h[..., b, a, d] = d h_{a dbar} / d z^b, by Hermitian symmetry."""
        return np.conj(np.swapaxes(self._dbar_h, -1, -2))

    @cached_property
    def gamma_mixed(self):
        """gamma_mixed[..., c, a, b] = Gamma^c_{a bbar}."""
        t1 = np.swapaxes(self._dbar_h, -3, -2)  # [a, b, d] = dbar_b h_{a dbar}
        t2 = np.moveaxis(self._dbar_h, -3, -1)  # [a, b, d] = dbar_d h_{a bbar}
        return 0.5 * np.einsum("...cd,...abd->...cab", self.h_inv, t1 - t2)

    @cached_property
    def gamma_holo(self):
        """gamma_holo[..., c, a, b] = Gamma^c_{ab} (symmetric in a, b)."""
        dh = np.swapaxes(self._del_h, -3, -2)  # [a, b, d] = del_b h_{a dbar}
        return 0.5 * np.einsum("...cd,...abd->...cab", self.h_inv, dh + np.swapaxes(dh, -2, -3))

    @cached_property
    def omega(self):
        return forms.from_11(0.5j * self.h)

    def dz(self, field, a):
        return self.grid.dz(field, a)

    def dzbar(self, field, b):
        return self.grid.dzbar(field, b)

    def integrate(self, density):
        """Integral of a scalar field against the volume form omega^m/m!."""
        return self.grid.integrate(density * self.vol)

    def l2(self, form):
        return forms.l2_norm(form, self.grid.shape, self.grid.cell_volume)

    def with_scheme(self, scheme):
        """Same metric samples, differentiated with another stencil scheme."""
        return HermitianDomain(self.grid.with_scheme(scheme), self.h, self.name)


def _validate_metric(h):
    herm_err = np.max(np.abs(h - np.conj(np.swapaxes(h, -1, -2))))
    if herm_err > 1e-12 * max(1.0, float(np.max(np.abs(h)))):
        idx = np.unravel_index(
            np.argmax(np.abs(h - np.conj(np.swapaxes(h, -1, -2))).max(axis=(-1, -2))),
            h.shape[:-2],
        )
        raise MetricError(f"metric is not Hermitian at grid point {tuple(int(i) for i in idx)}")
    eig = np.linalg.eigvalsh(h)[..., 0]
    if np.any(~np.isfinite(eig)) or np.min(eig) <= 0:
        idx = np.unravel_index(np.argmin(np.where(np.isfinite(eig), eig, -np.inf)), eig.shape)
        raise MetricError(
            f"metric is not positive-definite at grid point {tuple(int(i) for i in idx)} "
            f"(min eigenvalue {eig[idx]:.3e})"
        )


def conformal_exponent(grid, amplitude=0.1, wavevector=None, phase=0.0):
    """u(x) = amplitude * cos(k . x + phase) as a sparse-broadcast grid field."""
    if wavevector is None:
        wavevector = (1,) + (0,) * (grid.real_dim - 1)
    if len(wavevector) != grid.real_dim:
        raise ValueError(f"wavevector needs {grid.real_dim} entries, got {len(wavevector)}")
    x = grid.coords()
    arg = sum(k * xi for k, xi in zip(wavevector, x)) + phase
    return amplitude * np.cos(arg)


def build_domain(grid, metric="flat", **params):
    """Sample a Hermitian metric on ``grid`` and wrap it as a HermitianDomain.

    ``metric`` is ``"flat"``, ``"conformal"`` (``h = exp(2u) I`` with ``u`` given
    either as a callable of the coordinate list or by ``amplitude``/``wavevector``),
    ``"custom"`` (``entries``: m x m nested lists of expression strings for the
    real part, optional ``entries_imag``), or a callable returning
    ``h[..., a, b]`` from the coordinate list.
    """
    m = grid.m
    eye = np.eye(m)
    if callable(metric):
        return HermitianDomain(grid, metric(grid.coords()), name="callable")
    if metric == "flat":
        return HermitianDomain(grid, eye, name="flat")
    if metric == "conformal":
        u = params.get("u")
        if callable(u):
            u = u(grid.coords())
        elif u is None:
            u = conformal_exponent(
                grid,
                params.get("amplitude", 0.1),
                params.get("wavevector"),
                params.get("phase", 0.0),
            )
        u = np.broadcast_to(u, grid.shape)
        return HermitianDomain(grid, np.exp(2 * u)[..., None, None] * eye, name="conformal")
    if metric == "custom":
        entries = params["entries"]
        imag = params.get("entries_imag")
        x = grid.coords()
        h = np.zeros(grid.shape + (m, m), dtype=complex)
        for a in range(m):
            for b in range(m):
                h[..., a, b] = compile_expression(str(entries[a][b]))(x)
                if imag is not None:
                    h[..., a, b] += 1j * compile_expression(str(imag[a][b]))(x)
        return HermitianDomain(grid, h, name="custom")
    raise ValueError(f"unknown metric preset {metric!r}")


@dataclass(frozen=True)
class MetricClassReport:
    kahler_residual: float
    balanced_residual: float
    astheno_residual: float
    scale: float
    tol: float

    @property
    def kahler(self):
        return self.kahler_residual < self.tol * self.scale

    @property
    def balanced(self):
        return self.balanced_residual < self.tol * self.scale

    @property
    def astheno(self):
        return self.astheno_residual < self.tol * self.scale

    def as_dict(self):
        return {
            "kahler_residual": self.kahler_residual,
            "balanced_residual": self.balanced_residual,
            "astheno_residual": self.astheno_residual,
            "scale": self.scale,
            "tol": self.tol,
            "kahler": self.kahler,
            "balanced": self.balanced,
            "astheno": self.astheno,
        }


def classify_metric(dom, tol=VERDICT_TOL):
    """Discrete L2 norms of d(omega), d(omega^{m-1}) and ddbar(omega^{m-2})."""
    m, g = dom.m, dom.grid
    omega = dom.omega
    kahler = dom.l2(forms.d(omega, g.dz, g.dzbar, m))
    balanced = dom.l2(forms.d(forms.power(omega, m - 1), g.dz, g.dzbar, m))
    if m >= 3:
        dd = forms.del_(forms.delbar(forms.power(omega, m - 2), g.dzbar, m), g.dz, m)
        astheno = dom.l2(dd)
    else:
        astheno = 0.0
    return MetricClassReport(kahler, balanced, astheno, dom.l2(omega), tol)


def torsion_trace(dom):
    """Coefficients c_g of dbar^* omega = c_g dz^g, i.e. i * conj(sum_b Gamma^b_{b gbar})."""
    trace = np.einsum("...bbg->...g", dom.gamma_mixed)
    return 1j * np.conj(trace)


def torsion_vector(dom):
    """The vector T^c = h^{a bbar} Gamma^c_{a bbar}, rebuilt from ``torsion_trace``.

    Uses Gamma_{a bbar dbar} = h_{c dbar} Gamma^c_{a bbar} being antisymmetric in
    (b, d), which gives T^c = -h^{c dbar} sum_b Gamma^b_{b dbar}.
    """
    c = torsion_trace(dom)
    return -1j * np.einsum("...cd,...d->...c", dom.h_inv, np.conj(c))


def canonical_laplacian(dom, phi):
    """h^{a bbar} d^2 phi / dz^a dzbar^b."""
    g = dom.grid
    out = 0.0
    for b in range(dom.m):
        dbphi = g.dzbar(phi, b)
        for a in range(dom.m):
            out = out + dom.h_inv[..., a, b] * g.dz(dbphi, a)
    return out
