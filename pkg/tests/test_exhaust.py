import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad

from nsgalerkin.continuation import REACHED, StepperConfig
from nsgalerkin.errors import ResolutionError
from nsgalerkin.exhaust import (
    CutoffSpec,
    ExhaustionPlan,
    Profile,
    eta_eval,
    g_o,
    grid_coordinates,
    run_exhaustion,
    tail_norm,
    truncate_data,
)
from nsgalerkin.spectral import SpectralField, TorusSpec, divergence, l2_norm, leray_project


@pytest.fixture(scope="module")
def cutoff():
    return CutoffSpec(4.0)


class TestCutoff:
    def test_plateau(self, cutoff):
        assert eta_eval(cutoff, [0.4 * cutoff.r, 0, 0]) == 1.0
        assert eta_eval(cutoff, [0, 0, 0]) == 1.0

    def test_vanishes_outside(self, cutoff):
        assert eta_eval(cutoff, [cutoff.r, 0, 0]) == 0.0
        assert eta_eval(cutoff, [0, 0.75 * cutoff.r, 0]) == 0.0

    def test_midpoint(self, cutoff):
        v = eta_eval(cutoff, [0.625 * cutoff.r, 0, 0])
        assert 0 < v < 1
        assert abs(v - 0.5) <= 1e-2

    @given(st.floats(0, 2))
    def test_sandwich(self, R):
        spec = CutoffSpec(3.0)
        eta = float(spec.profile(R))
        assert (1.0 if R <= 0.5 else 0.0) <= eta <= (1.0 if R <= 0.75 else 0.0)

    def test_monotone(self, cutoff):
        R = np.linspace(0.5, 0.75, 2001)
        # spline ripple stays far below its 1e-8 fit accuracy
        assert np.all(np.diff(cutoff.profile(R)) <= 1e-9)

    def test_spline_matches_quadrature(self, cutoff):
        for R in np.linspace(cutoff.inner + 1e-3, cutoff.outer - 1e-3, 13):
            assert float(cutoff.profile(R)) == pytest.approx(cutoff._profile_exact(R), abs=1e-8)

    def test_radially_symmetric(self, cutoff):
        rng = np.random.default_rng(0)
        d = rng.standard_normal((50, 3))
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        for rho in (2.1, 2.5, 2.7):
            vals = cutoff(rho * d)
            assert np.ptp(vals) <= 1e-14

    @pytest.mark.parametrize("order", [1, 2])
    def test_derivative_scaling(self, order):
        # |d^k eta_r| <= c r^{-k} with c independent of r
        rho = np.linspace(0, 1, 401)
        ref = np.abs(CutoffSpec(1.0).radial_derivative(rho, order)).max()
        for r in (2.0, 8.0, 30.0):
            d = np.abs(CutoffSpec(r).radial_derivative(rho * r, order)).max()
            assert d * r ** order == pytest.approx(ref, rel=1e-12)
        assert ref > 0

    def test_first_derivative_matches_difference(self, cutoff):
        rho, h = 2.5, 1e-5
        fd = (eta_eval(cutoff, [rho + h, 0, 0]) - eta_eval(cutoff, [rho - h, 0, 0])) / (2 * h)
        assert float(cutoff.radial_derivative(rho, 1)) == pytest.approx(fd, rel=1e-5)

    def test_outer_function(self):
        np.testing.assert_allclose(g_o([0.5, 7 / 12, 0.625, 2 / 3, 0.9]), [1, 1, 0.5, 0, 0], atol=1e-15)

    def test_validation(self):
        with pytest.raises(ValueError):
            CutoffSpec(-1.0)
        with pytest.raises(ValueError):
            CutoffSpec(1.0, eps=0.2)


def radial_energy(profile, a, b):
    """int_{a<|x|<b} |u|^2 dx; the angular mean of sin^2 is 2/3."""
    w2 = profile.width ** 2

    def dens(p):
        gp = profile.amplitude * p / w2 * (1 + p * p / w2) ** -1.5
        return 4 * math.pi * p * p * (2 / 3) * gp * gp

    return quad(dens, a, b, limit=200)[0]


class TestProfiles:
    def test_solenoidal(self):
        torus = TorusSpec(12.0, 32)
        u = SpectralField.from_grid(torus, Profile("bump", 0.5, 0.75)(grid_coordinates(torus)))
        assert l2_norm(u - leray_project(u)) <= 1e-6 * l2_norm(u)

    def test_support_radius(self):
        p = Profile("bump", 0.5, 0.75)
        R = p.support_radius()
        x = np.array([[R, 0, 0], [0, R * 0.6, R * 0.8]]).T
        assert np.abs(p(x)).max() <= 1e-9 * 0.5 / 0.75 ** 2 * R
        assert Profile("clay").support_radius() == math.inf

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            Profile("vortex")


class TestTruncate:
    def test_plateau_is_identity(self):
        prof = Profile("bump", 0.5, 0.75)
        r = 2.2 * prof.support_radius()
        torus = TorusSpec(1.6 * r, 64)
        data = truncate_data(prof, r, torus, tail_tol=1e-2)
        raw = SpectralField.from_grid(torus, prof(grid_coordinates(torus)), drop_tol=-1).without_mean()
        assert l2_norm(data.u_on - leray_project(raw)) <= 1e-9 * l2_norm(raw)

    def test_zero_profile(self):
        data = truncate_data(Profile("zero"), 3.0, TorusSpec(6.0, 16))
        assert len(data.u_on) == 0 and len(data.f_n) == 0

    def test_output_solenoidal(self):
        data = truncate_data(Profile("bump", 1.0, 0.6), 2.0, TorusSpec(4.0, 32), tail_tol=1e-2)
        assert np.abs(divergence(data.u_on)).max() <= 1e-14 * np.abs(data.u_on.coeffs).max() * 10

    def test_under_resolved(self):
        with pytest.raises(ResolutionError):
            truncate_data(Profile("bump", 1.0, 0.1), 3.0, TorusSpec(5.0, 8), tail_tol=1e-6)

    def test_clay_tail_decay(self):
        prof = Profile("clay", 1.0, 1.0)
        tails = []
        for r in (4.0, 8.0, 16.0):
            L = 1.6 * r
            tail = tail_norm(prof, r, TorusSpec(L, 64))
            # (1 - eta) sits between the indicators of |x| > 3r/4 and |x| > r/2
            lo = math.sqrt(radial_energy(prof, 0.75 * r, L / 2))
            hi = math.sqrt(radial_energy(prof, 0.5 * r, math.inf))
            assert lo * 0.98 <= tail <= hi * 1.02
            tails.append(tail)
        assert tails[0] > tails[1] > tails[2]


class TestRuns:
    def test_zero_data(self):
        plan = ExhaustionPlan([2.0, 3.5], [16, 16], profile=Profile("zero"), T=0.1)
        rep = run_exhaustion(plan)
        assert all(np.all(r.values == 0) for r in rep.rungs)
        assert rep.differences == [0.0]

    def test_small_clay_profile(self):
        plan = ExhaustionPlan([2.0, 3.5], [16, 32], profile=Profile("clay", 0.05, 1.0), T=0.2,
                              tail_tol=0.1, stepper=StepperConfig(rtol=1e-7, atol=1e-10))
        rep = run_exhaustion(plan)
        assert not rep.partial
        for r in rep.rungs:
            assert r.status == REACHED
            assert r.apriori_ok and r.max_norm <= r.u0_norm * (1 + 1e-9)

    @pytest.mark.parametrize("kw", [
        {"radii": [1.0, 3.0]},
        {"radii": [2.0, 2.5]},
        {"radii": [2.0, 4.0], "grids": [16]},
        {"radii": [2.0, 4.0], "period_factor": 1.4},
        {"radii": []},
    ])
    def test_plan_validation(self, kw):
        base = {"grids": [16] * len(kw.get("radii", [])) or [16]}
        base.update(kw)
        with pytest.raises(ValueError):
            ExhaustionPlan(**base)
