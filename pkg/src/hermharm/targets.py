"""Target charts (Riemannian and Kahler) and randomized curvature-sign probes.

Index conventions: a Riemannian curvature array ``R[..., i, j, k, l]`` is
``R_{ijkl} = <R(d_i, d_j) d_k, d_l>`` with ``R(X,Y) = [nabla_X, nabla_Y] - nabla_[X,Y]``,
so round spheres have ``R_{ijkl} = kappa (g_il g_jk - g_ik g_jl)``. A Kahler
curvature array ``R[..., i, j, k, l]`` is ``R_{i jbar k lbar}`` with

    R_{i jbar k lbar} = -d_i dbar_j g_{k lbar} + g^{p qbar} d_i g_{k qbar} dbar_j g_{p lbar}.

Point arrays are batch-first with the chart coordinates on the last axis.
"""

from dataclasses import dataclass, field

import numpy as np

FD_STEP = 1e-3
PROBE_TOL = 1e-10


class ChartError(ValueError):
    """A point left the chart region of a target."""


def _fd4(fun, y, direction, step):
    return (
        -fun(y + 2 * step * direction)
        + 8 * fun(y + step * direction)
        - 8 * fun(y - step * direction)
        + fun(y - 2 * step * direction)
    ) / (12 * step)


def _where(mask):
    idx = np.argwhere(mask)[0]
    return tuple(int(i) for i in idx)


class RiemannianTarget:
    """A real n-dimensional chart with metric g_ij(y).

    ``kind`` is one of ``euclidean``, ``sphere_stereo`` (round metric of curvature
    kappa > 0 in stereographic coordinates), ``hyperbolic_ball`` (Poincare ball of
    curvature kappa < 0) or ``custom`` (``metric_fn`` maps points to g, and
    Christoffel symbols and curvature come from nested finite differences).
    """

    is_kahler = False

    def __init__(self, n, kind="euclidean", kappa=0.0, margin=0.05, metric_fn=None, chart_radius=None):
        self.n = int(n)
        self.kind = kind
        self.kappa = float(kappa)
        self.margin = float(margin)
        self._metric_fn = metric_fn
        if kind == "euclidean":
            self.kappa = 0.0
            self.radius = np.inf
        elif kind == "sphere_stereo":
            if self.kappa <= 0:
                raise ValueError("sphere_stereo needs kappa > 0")
            # stay away from the projection pole, which sits at infinity
            self.radius = chart_radius or 1.0 / (np.sqrt(self.kappa) * self.margin)
        elif kind == "hyperbolic_ball":
            if self.kappa >= 0:
                raise ValueError("hyperbolic_ball needs kappa < 0")
            self.radius = (1.0 - self.margin) / np.sqrt(-self.kappa)
        elif kind == "custom":
            if metric_fn is None:
                raise ValueError("custom target needs metric_fn")
            self.radius = chart_radius or np.inf
        else:
            raise ValueError(f"unknown Riemannian target kind {kind!r}")

    @property
    def translation_invariant(self):
        return self.kind == "euclidean"

    @property
    def real_dim(self):
        return self.n

    def __repr__(self):
        return f"RiemannianTarget(n={self.n}, kind={self.kind!r}, kappa={self.kappa})"

    def check_in_chart(self, y):
        y = np.asarray(y)
        if not np.all(np.isfinite(y)):
            raise ChartError(f"non-finite map value at grid point {_where(~np.isfinite(y).all(axis=-1))}")
        if np.isfinite(self.radius):
            r = np.linalg.norm(y, axis=-1)
            if np.any(r >= self.radius):
                raise ChartError(
                    f"map value leaves the {self.kind} chart (|y| >= {self.radius:.6g}) "
                    f"at grid point {_where(r >= self.radius)}"
                )

    def _conformal(self, y):
        """Conformal factor exp(2 phi) = 4 / (1 + kappa |y|^2)^2 and d phi."""
        s = 1.0 + self.kappa * np.sum(y * y, axis=-1)
        factor = 4.0 / s**2
        dphi = -2.0 * self.kappa * y / s[..., None]
        return factor, dphi

    def metric(self, y):
        y = np.asarray(y, dtype=float)
        eye = np.eye(self.n)
        if self.kind == "euclidean":
            return np.broadcast_to(eye, y.shape[:-1] + (self.n, self.n))
        if self.kind == "custom":
            return np.broadcast_to(self._metric_fn(y), y.shape[:-1] + (self.n, self.n))
        factor, _ = self._conformal(y)
        return factor[..., None, None] * eye

    def christoffel(self, y):
        """Gamma[..., i, j, k] = Gamma^i_{jk}."""
        y = np.asarray(y, dtype=float)
        n = self.n
        if self.kind == "euclidean":
            return np.zeros(y.shape[:-1] + (n, n, n))
        if self.kind == "custom":
            return self._christoffel_fd(y)
        _, dphi = self._conformal(y)
        eye = np.eye(n)
        return (
            np.einsum("ij,...k->...ijk", eye, dphi)
            + np.einsum("ik,...j->...ijk", eye, dphi)
            - np.einsum("jk,...i->...ijk", eye, dphi)
        )

    def _christoffel_fd(self, y):
        g = self.metric(y)
        ginv = np.linalg.inv(g)
        step = FD_STEP * self._scale(y)
        dg = np.stack([_fd4(self.metric, y, e, step) for e in np.eye(self.n)], axis=-3)  # [c, a, b]
        # lower[..., j, k, l] = (d_j g_kl + d_k g_jl - d_l g_jk) / 2
        lower = 0.5 * (
            np.einsum("...jkl->...jkl", dg)
            + np.einsum("...kjl->...jkl", dg)
            - np.einsum("...ljk->...jkl", dg)
        )
        return np.einsum("...il,...jkl->...ijk", ginv, lower)

    def _scale(self, y):
        return max(1.0, float(np.max(np.abs(y)))) if np.size(y) else 1.0

    def curvature(self, y):
        """R[..., i, j, k, l] = R_{ijkl}."""
        y = np.asarray(y, dtype=float)
        n = self.n
        if self.kind == "euclidean":
            return np.zeros(y.shape[:-1] + (n, n, n, n))
        g = self.metric(y)
        if self.kind != "custom":
            return self.kappa * (
                np.einsum("...il,...jk->...ijkl", g, g) - np.einsum("...ik,...jl->...ijkl", g, g)
            )
        gam = self.christoffel(y)
        step = FD_STEP * self._scale(y)
        dgam = np.stack([_fd4(self.christoffel, y, e, step) for e in np.eye(n)], axis=-4)
        # dgam[..., a, l, j, k] = d_a Gamma^l_{jk}
        rup = (
            np.einsum("...iljk->...ijkl", dgam)
            - np.einsum("...jlik->...ijkl", dgam)
            + np.einsum("...lip,...pjk->...ijkl", gam, gam)
            - np.einsum("...ljp,...pik->...ijkl", gam, gam)
        )
        return np.einsum("...lp,...ijkp->...ijkl", g, rup)

    def ricci(self, y):
        """Ric_jk = g^{il} R_{ijkl}."""
        g = self.metric(y)
        return np.einsum("...il,...ijkl->...jk", np.linalg.inv(g), self.curvature(y))


class KahlerTarget:
    """A complex n-dimensional Kahler chart with metric g_{i jbar}(w).

    Presets: ``flat`` (C^n), ``poincare_ball`` (unit ball with potential
    -log(1 - |w|^2)), ``fubini_study`` (affine chart of CP^n with potential
    log(1 + |w|^2)); ``custom`` takes ``metric_fn`` and differentiates it.
    """

    is_kahler = True

    def __init__(self, n, kind="flat", margin=0.05, metric_fn=None, chart_radius=None):
        self.n = int(n)
        self.kind = kind
        self.margin = float(margin)
        self._metric_fn = metric_fn
        if kind == "flat":
            self.radius = np.inf
        elif kind == "poincare_ball":
            self.radius = 1.0 - self.margin
        elif kind == "fubini_study":
            self.radius = chart_radius or 1.0 / self.margin
        elif kind == "custom":
            if metric_fn is None:
                raise ValueError("custom target needs metric_fn")
            self.radius = chart_radius or np.inf
        else:
            raise ValueError(f"unknown Kahler target kind {kind!r}")

    @property
    def translation_invariant(self):
        return self.kind == "flat"

    @property
    def real_dim(self):
        return 2 * self.n

    def __repr__(self):
        return f"KahlerTarget(n={self.n}, kind={self.kind!r})"

    check_in_chart = RiemannianTarget.check_in_chart

    def _sign(self):
        return {"poincare_ball": -1.0, "fubini_study": 1.0}[self.kind]

    def metric(self, w):
        w = np.asarray(w, dtype=complex)
        n = self.n
        if self.kind == "flat":
            return np.broadcast_to(np.eye(n, dtype=complex), w.shape[:-1] + (n, n))
        if self.kind == "custom":
            return np.broadcast_to(self._metric_fn(w), w.shape[:-1] + (n, n))
        s = self._sign()
        q = 1.0 + s * np.sum(np.abs(w) ** 2, axis=-1)
        outer = np.einsum("...i,...j->...ij", np.conj(w), w)
        return np.eye(n) / q[..., None, None] - s * outer / (q**2)[..., None, None]

    def christoffel(self, w):
        """Gamma[..., i, j, k] = Gamma^i_{jk} = g^{i lbar} d_j g_{k lbar}."""
        w = np.asarray(w, dtype=complex)
        n = self.n
        if self.kind == "flat":
            return np.zeros(w.shape[:-1] + (n, n, n), dtype=complex)
        if self.kind == "custom":
            return self._christoffel_fd(w)
        s = self._sign()
        q = 1.0 + s * np.sum(np.abs(w) ** 2, axis=-1)
        eye = np.eye(n)
        wb = np.conj(w)
        return -s * (np.einsum("ij,...k->...ijk", eye, wb) + np.einsum("ik,...j->...ijk", eye, wb)) / q[
            ..., None, None, None
        ]

    def _dw(self, fun, w, j, step):
        e = np.zeros(self.n, dtype=complex)
        e[j] = 1.0
        return 0.5 * (_fd4(fun, w, e, step) - 1j * _fd4(fun, w, 1j * e, step))

    def _dwbar(self, fun, w, j, step):
        e = np.zeros(self.n, dtype=complex)
        e[j] = 1.0
        return 0.5 * (_fd4(fun, w, e, step) + 1j * _fd4(fun, w, 1j * e, step))

    def _scale(self, w):
        return max(1.0, float(np.max(np.abs(w)))) if np.size(w) else 1.0

    def _ginv_up(self, w):
        # g^{i lbar} with sum_l g^{i lbar} g_{k lbar} = delta
        return np.swapaxes(np.linalg.inv(self.metric(w)), -1, -2)

    def _christoffel_fd(self, w):
        step = FD_STEP * self._scale(w)
        dg = np.stack([self._dw(self.metric, w, j, step) for j in range(self.n)], axis=-3)  # [j, k, l]
        return np.einsum("...il,...jkl->...ijk", self._ginv_up(w), dg)

    def curvature(self, w):
        """R[..., i, j, k, l] = R_{i jbar k lbar}."""
        w = np.asarray(w, dtype=complex)
        n = self.n
        if self.kind == "flat":
            return np.zeros(w.shape[:-1] + (n, n, n, n), dtype=complex)
        g = self.metric(w)
        if self.kind != "custom":
            s = self._sign()
            return s * (np.einsum("...ij,...kl->...ijkl", g, g) + np.einsum("...il,...kj->...ijkl", g, g))
        step = FD_STEP * self._scale(w)
        ginv = self._ginv_up(w)
        dg = np.stack([self._dw(self.metric, w, i, step) for i in range(n)], axis=-3)  # [i, k, l]
        dbg = np.stack([self._dwbar(self.metric, w, j, step) for j in range(n)], axis=-3)  # [j, k, l]

        def dbar_metric(j):
            return lambda v: self._dwbar(self.metric, v, j, step)

        ddbar = np.stack(
            [np.stack([self._dw(dbar_metric(j), w, i, step) for j in range(n)], axis=-3) for i in range(n)],
            axis=-4,
        )  # [i, j, k, l] = d_i dbar_j g_{k lbar}
        return -ddbar + np.einsum("...pq,...ikq,...jpl->...ijkl", ginv, dg, dbg)


def make_target(kind, n, kappa=None, margin=0.05, metric_fn=None, chart_radius=None):
    """Construct a target from a preset name."""
    if kind in ("euclidean", "sphere_stereo", "hyperbolic_ball"):
        default = {"euclidean": 0.0, "sphere_stereo": 1.0, "hyperbolic_ball": -1.0}[kind]
        return RiemannianTarget(n, kind, default if kappa is None else kappa, margin, chart_radius=chart_radius)
    if kind in ("flat", "poincare_ball", "fubini_study"):
        return KahlerTarget(n, kind, margin, chart_radius=chart_radius)
    if kind == "custom_riemannian":
        return RiemannianTarget(n, "custom", 0.0, margin, metric_fn=metric_fn, chart_radius=chart_radius)
    if kind == "custom_kahler":
        return KahlerTarget(n, "custom", margin, metric_fn=metric_fn, chart_radius=chart_radius)
    raise ValueError(f"unknown target kind {kind!r}")


# curvature probes


@dataclass
class CurvatureReport:
    condition: str
    verdict: str  # pass | fail | inconclusive
    witness: dict = field(default_factory=dict)
    samples_used: int = 0
    seed: int = 0
    extremes: dict = field(default_factory=dict)

    def as_dict(self):
        def encode(v):
            if isinstance(v, np.ndarray):
                if np.iscomplexobj(v):
                    return {"re": v.real.tolist(), "im": v.imag.tolist()}
                return v.tolist()
            if isinstance(v, (np.floating, np.integer)):
                return v.item()
            return v

        return {
            "condition": self.condition,
            "verdict": self.verdict,
            "witness": {k: encode(v) for k, v in self.witness.items()},
            "samples_used": self.samples_used,
            "seed": self.seed,
            "extremes": {k: encode(v) for k, v in self.extremes.items()},
        }


def constant_curvature_form(A, kappa):
    """kappa * ((tr A)^2 - tr(A^2)) for a Hermitian matrix A."""
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("A must be a square matrix")
    if not np.allclose(A, np.conj(A.T), atol=1e-12, rtol=0):
        raise ValueError("A must be Hermitian")
    tr = np.trace(A).real
    return float(kappa * (tr**2 - np.trace(A @ A).real))


def sampson_form(R, A):
    """R_{ijkl} A^{i lbar} A^{j kbar} (real for Hermitian A)."""
    return np.einsum("...ijkl,...il,...jk->...", R, A, A).real


def siu_form(R, M):
    """sum R_{i jbar k lbar} M^{ij} conj(M^{lk})."""
    return np.einsum("...ijkl,...ij,...lk->...", R, M, np.conj(M)).real


def _complex_gaussian(rng, size):
    return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2)


def _numerical_rank(A, rtol=1e-9):
    s = np.linalg.svd(A, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def _orthonormal_frame(g):
    """E with E^T g E = I for a real symmetric positive-definite g."""
    w, v = np.linalg.eigh(g)
    return v @ np.diag(w**-0.5) @ v.T


SAMPSON_CONDITIONS = ("sampson_hermitian_negative", "sampson_hermitian_positive", "sampson_nondegenerate")
SIU_CONDITIONS = ("siu_strongly_negative", "siu_strongly_positive", "siu_nondegenerate")


def sampson_probe(t, point, n_samples=200, seed=0, condition="sampson_hermitian_negative", tol=PROBE_TOL):
    """Probe R_{ijkl} A^{il} A^{jk} over random Hermitian PSD matrices A.

    Samples live in a g-orthonormal frame at ``point``: each is a sum of r
    rank-one terms v v^* with v standard complex Gaussian and r uniform on
    1..n; they are mapped to coordinate components before contraction. Values
    are compared against ``tol * |R| * (tr A)^2``.
    """
    if condition not in SAMPSON_CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    point = np.asarray(point, dtype=float)
    t.check_in_chart(point[None])
    n = t.n
    R = t.curvature(point)
    E = _orthonormal_frame(t.metric(point))
    Rscale = max(float(np.max(np.abs(np.einsum("ijkl,ia,jb,kc,ld->abcd", R, E, E, E, E)))), 1e-300)
    rng = np.random.default_rng(seed)
    qs, ranks, frames = [], [], []
    for _ in range(n_samples):
        r = int(rng.integers(1, n + 1))
        V = _complex_gaussian(rng, (n, r))
        Af = V @ np.conj(V.T)
        A = E @ Af @ E.T
        qs.append(sampson_form(R, A) / (Rscale * np.trace(Af).real ** 2))
        ranks.append(_numerical_rank(Af))
        frames.append((Af, A))
    qs = np.array(qs)
    ranks = np.array(ranks)
    extremes = {"min_normalized_q": float(qs.min()), "max_normalized_q": float(qs.max())}

    def witness(i):
        Af, A = frames[i]
        return {"A_frame": Af, "A_coords": A, "q": float(sampson_form(R, A)), "rank": int(ranks[i]), "point": point}

    if condition == "sampson_nondegenerate":
        bad = np.flatnonzero((np.abs(qs) <= tol) & (ranks >= 2))
        verdict = "fail" if bad.size else "pass"
        wit = witness(bad[0]) if bad.size else {}
    else:
        sign = -1.0 if condition == "sampson_hermitian_negative" else 1.0
        signed = sign * qs
        worst = int(np.argmin(signed))
        if signed[worst] < -tol:
            verdict, wit = "fail", witness(worst)
        elif np.any((signed > tol) & (ranks >= 2)):
            verdict, wit = "pass", {}
        else:
            verdict, wit = "inconclusive", {}
    return CurvatureReport(condition, verdict, wit, n_samples, seed, extremes)


def siu_probe(t, point, n_samples=200, seed=0, condition="siu_strongly_negative", tol=PROBE_TOL):
    """Probe Siu's quadratic form on matrices A B^* - C D^* with Gaussian A, B, C, D."""
    if condition not in SIU_CONDITIONS:
        raise ValueError(f"unknown condition {condition!r}")
    point = np.asarray(point, dtype=complex)
    t.check_in_chart(point[None])
    n = t.n
    R = t.curvature(point)
    Rscale = max(float(np.max(np.abs(R))), 1e-300)
    rng = np.random.default_rng(seed)
    vals, norms, samples = [], [], []
    for _ in range(n_samples):
        A, B, C, D = (_complex_gaussian(rng, n) for _ in range(4))
        M = np.outer(A, np.conj(B)) - np.outer(C, np.conj(D))
        mn = float(np.linalg.norm(M))
        vals.append(siu_form(R, M) / (Rscale * mn**2))
        norms.append(mn)
        samples.append((A, B, C, D, M))
    vals = np.array(vals)
    extremes = {"min_normalized_q": float(vals.min()), "max_normalized_q": float(vals.max())}

    def witness(i):
        A, B, C, D, M = samples[i]
        return {"A": A, "B": B, "C": C, "D": D, "M": M, "q": float(siu_form(R, M)), "point": point}

    if condition == "siu_nondegenerate":
        bad = np.flatnonzero(np.abs(vals) <= tol)
        verdict = "fail" if bad.size else "pass"
        wit = witness(bad[0]) if bad.size else {}
    else:
        sign = -1.0 if condition == "siu_strongly_negative" else 1.0
        signed = sign * vals
        worst = int(np.argmin(signed))
        if signed[worst] <= tol:
            verdict, wit = "fail", witness(worst)
        else:
            verdict, wit = "pass", {}
    return CurvatureReport(condition, verdict, wit, n_samples, seed, extremes)
