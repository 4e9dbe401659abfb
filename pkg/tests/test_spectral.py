import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsgalerkin.errors import SpecMismatchError
from nsgalerkin.spectral import (
    BasisSpec,
    SpectralField,
    TorusSpec,
    ball_modes,
    divergence,
    enstrophy,
    gn_constant_probe,
    gn_terms,
    gradient_decompose,
    inner_product,
    is_solenoidal,
    l2_norm,
    laplacian,
    leray_project,
    lq_norm,
    nonlinear_grid_oracle,
    random_field,
    stokes_solve,
)

from helpers import single

seeds = st.integers(0, 2**32 - 1)


def rand(torus, seed, count=20, band=3, solenoidal=False):
    rng = np.random.default_rng(seed)
    pool = ball_modes(band)
    return random_field(torus, pool[rng.choice(len(pool), count, replace=False)], rng, solenoidal=solenoidal)


class TestTorus:
    def test_rejects_bad_grid(self):
        with pytest.raises(ValueError):
            TorusSpec(1.0, 24)

    def test_rejects_bad_period(self):
        with pytest.raises(ValueError):
            TorusSpec(-1.0)

    def test_dk(self):
        assert TorusSpec(4.0).dk == pytest.approx(math.pi / 2)


class TestLeray:
    def test_gradient_mode_annihilated(self, torus):
        p = leray_project(single(torus, [1, 0, 0], [1, 0, 0]))
        assert np.abs(p.coeffs).max(initial=0.0) == 0.0

    def test_solenoidal_mode_kept(self, torus):
        p = leray_project(single(torus, [1, 0, 0], [0, 1, 0]))
        np.testing.assert_allclose(p.restrict(np.array([[1, 0, 0]]))[0], [0, 1, 0])

    def test_diagonal_mode(self, torus):
        p = leray_project(single(torus, [1, 1, 0], [1, 0, 0]))
        np.testing.assert_allclose(p.restrict(np.array([[1, 1, 0]]))[0], [0.5, -0.5, 0], atol=1e-15)

    @given(seeds)
    def test_idempotent_and_orthogonal(self, seed):
        torus = TorusSpec(3.0, 16)
        v = rand(torus, seed)
        p = leray_project(v)
        pp = leray_project(p)
        assert np.abs(pp.coeffs - p.coeffs).max() <= 1e-14 * np.abs(v.coeffs).max()
        assert abs(inner_product(p, v - p)) <= 1e-12 * l2_norm(v) ** 2
        assert np.abs(divergence(p)).max() <= 1e-13 * np.abs(v.coeffs).max() * 10

    @given(seeds)
    def test_hermitian_preserved(self, seed):
        p = leray_project(rand(TorusSpec(), seed))
        assert p.is_hermitian(1e-15)


class TestGradientDecompose:
    def test_solenoidal_unchanged(self, torus, rng):
        v = random_field(torus, ball_modes(2)[:10], rng)
        pv, grad = gradient_decompose(v)
        np.testing.assert_allclose(pv.restrict(v.modes), v.coeffs, atol=1e-15)
        assert np.abs(grad.coeffs).max() <= 1e-15

    def test_pure_gradient(self, torus):
        v = single(torus, [0, 0, 2], [0, 0, 3])
        pv, grad = gradient_decompose(v)
        assert np.abs(pv.coeffs).max(initial=0.0) == 0.0
        np.testing.assert_allclose(grad.restrict(v.modes), v.coeffs)

    @given(seeds)
    def test_recomposition_and_pythagoras(self, seed):
        v = rand(TorusSpec(2.5, 16), seed)
        pv, grad = gradient_decompose(v)
        np.testing.assert_allclose((pv + grad).restrict(v.modes), v.coeffs, atol=1e-12)
        lhs = l2_norm(pv) ** 2 + l2_norm(grad) ** 2
        assert lhs == pytest.approx(l2_norm(v) ** 2, rel=1e-12)


class TestStokes:
    def test_unit_eigenvalue(self, torus):
        f = single(torus, [1, 0, 0], [0, 1, 0])
        np.testing.assert_allclose(stokes_solve(f).restrict(f.modes), f.coeffs)

    def test_pure_gradient_gives_zero(self, torus):
        v = stokes_solve(single(torus, [0, 2, 0], [0, 1.5, 0]))
        assert np.abs(v.coeffs).max(initial=0.0) == 0.0

    def test_two_modes_divided(self, torus):
        f = single(torus, [1, 1, 0], [1, -1, 0]) + single(torus, [0, 2, 1], [3, 0, 0])
        v = stokes_solve(f)
        k2 = (f.kappa ** 2).sum(axis=1)
        np.testing.assert_allclose(v.restrict(f.modes), f.coeffs / k2[:, None], rtol=1e-15)

    def test_mean_rejected(self, torus):
        with pytest.raises(ValueError):
            stokes_solve(SpectralField(torus, [[0, 0, 0]], [[1, 0, 0]]))


class TestNorms:
    def test_parseval_single_pair(self):
        for L in (2 * math.pi, 3.0):
            torus = TorusSpec(L)
            a = single(torus, [0, 1, 0], [1, 0, 0])
            assert inner_product(a, a) == pytest.approx(2 * L ** 3)

    def test_orthogonal_modes(self, torus):
        a = single(torus, [1, 0, 0], [0, 1, 0])
        b = single(torus, [0, 1, 0], [1, 0, 0])
        assert inner_product(a, b) == 0.0

    def test_zero(self, torus):
        assert inner_product(SpectralField.zeros(torus), single(torus, [1, 0, 0], [0, 1, 0])) == 0.0
        assert enstrophy(SpectralField.zeros(torus)) == 0.0

    def test_enstrophy_unit_kappa(self):
        torus = TorusSpec(2 * math.pi)
        a = single(torus, [0, 0, 1], [1, 0, 0])
        assert enstrophy(a) == pytest.approx(2 * torus.L ** 3)

    @given(seeds, st.floats(-5, 5))
    def test_enstrophy_homogeneous(self, seed, s):
        v = rand(TorusSpec(), seed, solenoidal=True)
        assert enstrophy(v * s) == pytest.approx(s * s * enstrophy(v), rel=1e-12, abs=1e-300)

    def test_torus_mismatch(self):
        a = single(TorusSpec(1.0), [1, 0, 0], [0, 1, 0])
        b = single(TorusSpec(2.0), [1, 0, 0], [0, 1, 0])
        with pytest.raises(SpecMismatchError):
            inner_product(a, b)

    @given(seeds)
    def test_parseval_matches_grid(self, seed):
        torus = TorusSpec(2.0, 16)
        v = rand(torus, seed, count=8, band=2)
        grid = v.to_grid(16)
        quad = float(np.sum(grid ** 2) * (torus.L / 16) ** 3)
        assert l2_norm(v) ** 2 == pytest.approx(quad, rel=1e-12)


class TestGridOracle:
    def test_zero_advecting(self, torus):
        v = single(torus, [1, 0, 0], [0, 1j, 0])
        out = nonlinear_grid_oracle(SpectralField.zeros(torus), v)
        assert np.abs(out.coeffs).max(initial=0.0) == 0.0

    def test_shear_self_advection(self, torus):
        # u = (0, sin x, 0) has no y dependence
        u = single(torus, [1, 0, 0], [0, -0.5j, 0])
        out = nonlinear_grid_oracle(u, u)
        assert np.abs(out.coeffs).max() <= 1e-15

    def test_taylor_green_is_gradient(self, torus):
        from nsgalerkin.config import taylor_green

        u = taylor_green(torus)
        out = nonlinear_grid_oracle(u, u)
        assert np.abs(out.coeffs).max() > 0.1
        assert np.abs(leray_project(out).coeffs).max() <= 1e-10

    def test_band_limit_enforced(self):
        from nsgalerkin.errors import ResolutionError

        torus = TorusSpec(2 * math.pi, 8)
        u = single(torus, [3, 0, 0], [0, 1, 0])
        with pytest.raises(ResolutionError):
            nonlinear_grid_oracle(u, u)

    def test_sin_product_by_hand(self, torus):
        # u = (sin y, 0, 0), v = (0, 0, cos x): (u.grad) v = -sin y sin x e_z
        u = single(torus, [0, 1, 0], [-0.5j, 0, 0])
        v = single(torus, [1, 0, 0], [0, 0, 0.5])
        out = nonlinear_grid_oracle(u, v)
        x = np.array([[0.3, 1.1, 2.0], [2.2, -0.4, 0.1]])
        expect = -np.sin(x[:, 1]) * np.sin(x[:, 0])
        np.testing.assert_allclose(out.evaluate(x)[:, 2], expect, atol=1e-14)


class TestGN:
    @pytest.mark.parametrize("q", [3, 4, 6])
    def test_constant_field(self, q):
        torus = TorusSpec(2.0, 16)
        u = SpectralField(torus, [[0, 0, 0]], [[0.7, 0, 0]])
        lq, t1, t2 = gn_terms(u, q)
        assert t1 == 0.0
        # ||c||_q = |c| L^{3/q} and ||c||_2 = |c| L^{3/2}
        assert lq == pytest.approx(torus.L ** (3 / q - 1.5) * t2, rel=1e-12)

    def test_single_mode_closed_form(self):
        torus = TorusSpec(2 * math.pi, 32)
        u = single(torus, [1, 0, 0], [0, 0.5, 0])  # (0, cos x, 0)
        lq, t1, t2 = gn_terms(u, 4)
        L = torus.L
        # int cos^4 = 3/8 L^3, int cos^2 = 1/2 L^3
        assert lq == pytest.approx((3 / 8 * L ** 3) ** 0.25, rel=1e-12)
        assert t2 == pytest.approx(math.sqrt(L ** 3 / 2), rel=1e-12)
        assert t1 == pytest.approx(t2, rel=1e-12)  # |kappa| = 1

    def test_zero_field(self):
        assert gn_terms(SpectralField.zeros(TorusSpec()), 6) == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize("q", [3, 4, 6])
    def test_probe_bound_holds(self, q):
        res = gn_constant_probe(20, q, TorusSpec(2 * math.pi, 16))
        assert res.C1 >= 0 and res.C2 >= 0
        assert res.slack.min() >= 0

    def test_probe_validates(self):
        with pytest.raises(ValueError):
            gn_constant_probe(5, 4)
        with pytest.raises(ValueError):
            gn_constant_probe(20, 5)


class TestBasis:
    def test_orthonormal(self):
        basis = BasisSpec(TorusSpec(3.0), 2)
        fields = [basis.function(j) for j in range(basis.n)]
        gram = np.array([[inner_product(a, b) for b in fields] for a in fields])
        np.testing.assert_allclose(gram, np.eye(basis.n), atol=1e-13)

    def test_ordering_by_eigenvalue(self):
        basis = BasisSpec(TorusSpec(), 3)
        assert np.all(np.diff(basis.eigenvalues) >= 0)

    def test_functions_are_eigenfields(self):
        basis = BasisSpec(TorusSpec(2.0), 2)
        for j in (0, 5, basis.n - 1):
            w = basis.function(j)
            assert is_solenoidal(w)
            np.testing.assert_allclose(laplacian(w).coeffs, -basis.eigenvalues[j] * w.coeffs, rtol=1e-13)

    @given(seeds)
    def test_round_trip(self, seed):
        basis = BasisSpec(TorusSpec(), 2)
        g = np.random.default_rng(seed).standard_normal(basis.n)
        np.testing.assert_allclose(basis.project(basis.to_field(g)), g, atol=1e-13)

    def test_truncated_size(self):
        basis = BasisSpec(TorusSpec(), 2, n=9)
        assert basis.n == 9 and len(basis.pairs) == 3

    def test_bad_size(self):
        with pytest.raises(ValueError):
            BasisSpec(TorusSpec(), 1, n=0)


class TestLq:
    def test_matches_closed_form(self):
        torus = TorusSpec(2 * math.pi, 32)
        u = single(torus, [0, 0, 1], [0.5, 0, 0])
        assert lq_norm(u, 2) == pytest.approx(l2_norm(u), rel=1e-12)
