import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from hermharm.targets import (
    ChartError,
    KahlerTarget,
    RiemannianTarget,
    constant_curvature_form,
    make_target,
    sampson_form,
    sampson_probe,
    siu_form,
    siu_probe,
)
from oracles import ball_metric, eval_kahler, eval_real_tensor, kahler_curvature_from_potential, riemann_lowered

RIEMANNIAN = [("euclidean", None), ("sphere_stereo", 1.0), ("sphere_stereo", 0.5), ("hyperbolic_ball", -1.0),
              ("hyperbolic_ball", -2.0)]
KAHLER = ["flat", "poincare_ball", "fubini_study"]


def _points(target, count, seed):
    rng = np.random.default_rng(seed)
    radius = min(0.6 * target.radius, 1.5)
    out = []
    while len(out) < count:
        if target.is_kahler:
            p = rng.uniform(-1, 1, target.n) + 1j * rng.uniform(-1, 1, target.n)
        else:
            p = rng.uniform(-1, 1, target.n)
        if np.linalg.norm(p) < radius:
            out.append(p)
    return np.array(out)


def _psd(rng, n):
    r = int(rng.integers(1, n + 1))
    V = (rng.standard_normal((n, r)) + 1j * rng.standard_normal((n, r))) / np.sqrt(2)
    return V @ V.conj().T


def _frame(g):
    w, v = np.linalg.eigh(g)
    return v @ np.diag(w**-0.5) @ v.T


class TestRiemannian:
    def test_euclidean_is_flat(self):
        t = make_target("euclidean", 3)
        y = _points(t, 5, 0)
        assert np.all(t.christoffel(y) == 0)
        assert np.all(t.curvature(y) == 0)

    @pytest.mark.parametrize("kind,kappa", RIEMANNIAN)
    def test_symmetries_and_bianchi_at_50_points(self, kind, kappa):
        t = make_target(kind, 3, kappa=kappa)
        R = t.curvature(_points(t, 50, 1))
        assert np.allclose(R, -np.swapaxes(R, -4, -3), atol=1e-6)
        assert np.allclose(R, -np.swapaxes(R, -2, -1), atol=1e-6)
        bianchi = R + np.einsum("...jkil->...ijkl", R) + np.einsum("...kijl->...ijkl", R)
        assert np.max(np.abs(bianchi)) < 1e-6

    @pytest.mark.parametrize("kind,kappa", RIEMANNIAN[1:])
    def test_space_form_identity(self, kind, kappa):
        t = make_target(kind, 3, kappa=kappa)
        y = _points(t, 20, 2)
        g = t.metric(y)
        expected = kappa * (np.einsum("...il,...jk->...ijkl", g, g) - np.einsum("...ik,...jl->...ijkl", g, g))
        assert np.allclose(t.curvature(y), expected, atol=1e-12)

    def test_hyperbolic_ball_matches_symbolic_curvature(self):
        t = make_target("hyperbolic_ball", 2, kappa=-1.0)
        R_sym = riemann_lowered(ball_metric(2, -1), 2)
        for y in _points(t, 5, 3):
            R = eval_real_tensor(R_sym, 2, y)
            assert np.allclose(t.curvature(y), R, atol=1e-10)
            g = t.metric(y)
            # R_{1212} = kappa (g_12 g_21 - g_11 g_22)
            assert R[0, 1, 0, 1] == pytest.approx(-1.0 * (g[0, 1] * g[1, 0] - g[0, 0] * g[1, 1]), rel=1e-10)

    def test_sphere_christoffel_matches_symbolic_route(self):
        t = make_target("sphere_stereo", 3, kappa=1.0)
        y = _points(t, 1, 4)[0]
        g = ball_metric(3, 1)
        sym = sp.symbols("y1:4", real=True)
        ginv = g.inv()
        sub = dict(zip(sym, y))
        for i, j, k in itertools.product(range(3), repeat=3):
            expr = sum(ginv[i, l] * (sp.diff(g[l, j], sym[k]) + sp.diff(g[l, k], sym[j]) - sp.diff(g[j, k], sym[l]))
                       for l in range(3)) / 2
            assert t.christoffel(y)[i, j, k] == pytest.approx(float(expr.subs(sub)), abs=1e-12)

    def test_sphere_ricci_at_20_points(self):
        t = make_target("sphere_stereo", 3, kappa=1.0)
        y = _points(t, 20, 5)
        assert np.allclose(t.ricci(y), 2.0 * t.metric(y), rtol=1e-6, atol=0)

    @pytest.mark.parametrize("kind,kappa", [("sphere_stereo", 1.0), ("hyperbolic_ball", -1.0)])
    def test_custom_chart_matches_closed_form(self, kind, kappa):
        preset = make_target(kind, 2, kappa=kappa)
        custom = RiemannianTarget(2, "custom", metric_fn=preset.metric)
        y = _points(preset, 4, 6)
        assert np.allclose(custom.christoffel(y), preset.christoffel(y), atol=1e-8)
        assert np.allclose(custom.curvature(y), preset.curvature(y), atol=1e-6)

    def test_chart_exit_names_point(self):
        t = make_target("hyperbolic_ball", 2)
        with pytest.raises(ChartError, match="grid point"):
            t.check_in_chart(np.array([[0.0, 0.0], [0.99, 0.0]]))

    def test_kappa_sign_is_checked(self):
        with pytest.raises(ValueError):
            RiemannianTarget(2, "sphere_stereo", kappa=-1.0)
        with pytest.raises(ValueError):
            RiemannianTarget(2, "hyperbolic_ball", kappa=1.0)


class TestKahler:
    @pytest.mark.parametrize("kind", KAHLER)
    def test_kahler_symmetry_of_metric(self, kind):
        t = make_target(kind, 2)
        custom = KahlerTarget(2, "custom", metric_fn=t.metric)
        for w in _points(t, 5, 7):
            dg = np.stack([custom._dw(t.metric, w, i, 1e-3) for i in range(2)])  # [i, k, l] = d_i g_{k lbar}
            assert np.allclose(dg, np.swapaxes(dg, 0, 1), atol=1e-9)

    @pytest.mark.parametrize("kind", KAHLER)
    def test_curvature_symmetries_at_50_points(self, kind):
        t = make_target(kind, 2)
        R = t.curvature(_points(t, 50, 8))
        assert np.allclose(R, np.einsum("...kjil->...ijkl", R), atol=1e-6)
        assert np.allclose(R, np.einsum("...ilkj->...ijkl", R), atol=1e-6)
        # Hermitian symmetry conj(R_{i jbar k lbar}) = R_{j ibar l kbar}
        assert np.allclose(np.conj(R), np.einsum("...jilk->...ijkl", R), atol=1e-6)

    @pytest.mark.parametrize("kind,potential", [
        ("poincare_ball", lambda w, wb: -sp.log(1 - sum(a * b for a, b in zip(w, wb)))),
        ("fubini_study", lambda w, wb: sp.log(1 + sum(a * b for a, b in zip(w, wb)))),
    ])
    def test_curvature_matches_symbolic_potential(self, kind, potential):
        t = make_target(kind, 2)
        syms, g, R = kahler_curvature_from_potential(potential, 2)
        for w in _points(t, 3, 9):
            got = t.curvature(w)
            for idx, expr in R.items():
                assert got[idx] == pytest.approx(eval_kahler(syms, expr, w), abs=1e-10)
            gm = t.metric(w)
            for i, j in itertools.product(range(2), repeat=2):
                assert gm[i, j] == pytest.approx(eval_kahler(syms, g[i, j], w), abs=1e-12)

    def test_disc_curvature_sign(self):
        syms, _, R = kahler_curvature_from_potential(lambda w, wb: -sp.log(1 - w[0] * wb[0]), 1)
        disc = make_target("poincare_ball", 1)
        fs = make_target("fubini_study", 1)
        for w in _points(disc, 5, 10):
            r = disc.curvature(w)[0, 0, 0, 0]
            assert r.real < 0
            assert r == pytest.approx(eval_kahler(syms, R[0, 0, 0, 0], w), abs=1e-10)
            assert fs.curvature(w)[0, 0, 0, 0].real > 0

    @pytest.mark.parametrize("kind", ["poincare_ball", "fubini_study"])
    def test_custom_chart_matches_closed_form(self, kind):
        preset = make_target(kind, 2)
        custom = KahlerTarget(2, "custom", metric_fn=preset.metric)
        w = _points(preset, 4, 11)
        assert np.allclose(custom.christoffel(w), preset.christoffel(w), atol=1e-8)
        assert np.allclose(custom.curvature(w), preset.curvature(w), atol=1e-6)


class TestConstantCurvatureForm:
    def test_examples(self):
        assert constant_curvature_form(np.eye(2), 1.0) == pytest.approx(2.0)
        assert constant_curvature_form(np.diag([1.0, 0.0]), -3.0) == pytest.approx(0.0)
        assert constant_curvature_form(np.diag([1.0, 1.0]), -1.0) == pytest.approx(-2.0)

    def test_non_hermitian_rejected(self):
        with pytest.raises(ValueError):
            constant_curvature_form(np.array([[1.0, 1.0], [0.0, 1.0]]), 1.0)

    @pytest.mark.parametrize("kind,kappa", RIEMANNIAN)
    def test_sampson_form_equals_closed_form_on_100_psd_matrices(self, kind, kappa):
        t = make_target(kind, 3, kappa=kappa)
        rng = np.random.default_rng(12)
        for y in _points(t, 3, 13):
            R, E = t.curvature(y), _frame(t.metric(y))
            for _ in range(100):
                A = _psd(rng, 3)
                # the identity holds for components in a g-orthonormal frame
                assert sampson_form(R, E @ A @ E.T) == pytest.approx(constant_curvature_form(A, t.kappa), abs=1e-8)

    @given(st.integers(0, 10_000))
    def test_rank_one_matrices_are_annihilated(self, seed):
        rng = np.random.default_rng(seed)
        t = make_target("sphere_stereo", 3)
        R = t.curvature(rng.uniform(-1, 1, 3))
        a = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        assert abs(sampson_form(R, np.outer(a, a.conj()))) < 1e-10 * np.max(np.abs(R)) * np.linalg.norm(a) ** 4


class TestProbes:
    @pytest.mark.parametrize("condition,verdict", [("sampson_hermitian_negative", "pass"),
                                                   ("sampson_hermitian_positive", "fail"),
                                                   ("sampson_nondegenerate", "pass")])
    def test_hyperbolic(self, condition, verdict):
        t = make_target("hyperbolic_ball", 3)
        assert sampson_probe(t, np.array([0.1, -0.2, 0.3]), 200, 0, condition).verdict == verdict

    def test_sphere_is_positive(self):
        t = make_target("sphere_stereo", 3)
        assert sampson_probe(t, np.zeros(3), 200, 0, "sampson_hermitian_positive").verdict == "pass"
        assert sampson_probe(t, np.zeros(3), 200, 0, "sampson_hermitian_negative").verdict == "fail"

    def test_euclidean_is_degenerate_with_rank_two_witness(self):
        t = make_target("euclidean", 3)
        rep = sampson_probe(t, np.zeros(3), 200, 0, "sampson_nondegenerate")
        assert rep.verdict == "fail"
        A = rep.witness["A_coords"]
        assert np.linalg.matrix_rank(A, tol=1e-9) >= 2
        assert abs(sampson_form(t.curvature(np.zeros(3)), A)) <= 1e-10

    def test_fail_witness_is_recheckable(self):
        t = make_target("sphere_stereo", 2)
        rep = sampson_probe(t, np.zeros(2), 100, 3, "sampson_hermitian_negative")
        assert rep.verdict == "fail"
        A = rep.witness["A_coords"]
        assert sampson_form(t.curvature(np.zeros(2)), A) == pytest.approx(rep.witness["q"], rel=1e-12)
        assert rep.witness["q"] > 0

    @pytest.mark.parametrize("kind,condition,verdict", [
        ("poincare_ball", "siu_strongly_negative", "pass"),
        ("poincare_ball", "siu_nondegenerate", "pass"),
        ("fubini_study", "siu_strongly_positive", "pass"),
        ("fubini_study", "siu_strongly_negative", "fail"),
        ("flat", "siu_nondegenerate", "fail"),
    ])
    def test_siu_verdicts_in_dimension_one(self, kind, condition, verdict):
        t = make_target(kind, 1)
        assert siu_probe(t, np.array([0.2 + 0.1j]), 200, 0, condition).verdict == verdict

    def test_flat_siu_form_vanishes(self):
        t = make_target("flat", 2)
        rng = np.random.default_rng(0)
        M = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        assert siu_form(t.curvature(np.zeros(2, complex)), M) == 0

    @pytest.mark.parametrize("probe,target,condition", [
        (sampson_probe, ("hyperbolic_ball", 3), "sampson_hermitian_negative"),
        (siu_probe, ("poincare_ball", 2), "siu_strongly_negative"),
    ])
    def test_probes_are_deterministic(self, probe, target, condition):
        t = make_target(*target)
        point = np.zeros(t.n, complex if t.is_kahler else float)
        a = probe(t, point, 50, 9, condition).as_dict()
        b = probe(t, point, 50, 9, condition).as_dict()
        assert a == b
        assert a["samples_used"] == 50 and a["seed"] == 9


def test_make_target_rejects_unknown_kind():
    with pytest.raises(ValueError):
        make_target("torus", 2)
