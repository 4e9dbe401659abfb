import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nsgalerkin.config import single_mode, taylor_green
from nsgalerkin.continuation import (
    BLOWUP,
    REACHED,
    UNDERFLOW,
    CSV_COLUMNS,
    StepperConfig,
    Trajectory,
    c3_quotients,
    energy_audit,
    estimate_c3,
    extend_horizon,
    gronwall_certificate,
    integrate,
    run_ladder,
    trajectory_rows,
    twin_run_divergence,
    write_trajectory_csv,
)
from nsgalerkin.galerkin import DirectSystem
from nsgalerkin.lift import ForcingSpec
from nsgalerkin.spectral import BasisSpec, TorusSpec, l2_norm

TIGHT = StepperConfig(rtol=1e-10, atol=1e-13)


@pytest.fixture(scope="module")
def linear_system():
    # a single eigenmode pair with no self-interaction
    return DirectSystem(BasisSpec(TorusSpec(), 1), 0.7)


@pytest.fixture(scope="module")
def mode8():
    basis = BasisSpec(TorusSpec(), 2)
    rng = np.random.default_rng(8)
    g = np.zeros(basis.n)
    g[rng.choice(basis.n, 8, replace=False)] = 40.0 * rng.standard_normal(8)
    return DirectSystem(basis, 0.02), g


def single_mode_state(sys_):
    return sys_.basis.project(single_mode(sys_.basis.torus))


class TestIntegrate:
    def test_linear_decay(self, linear_system):
        g0 = single_mode_state(linear_system)
        traj = integrate(linear_system, g0, 0.0, 2.0, StepperConfig(rtol=1e-8, atol=1e-12), samples=5)
        for t, g in zip(traj.times, traj.states):
            np.testing.assert_allclose(g, g0 * math.exp(-0.7 * t), atol=1e-7 * np.abs(g0).max())

    def test_fixed_step_order(self, linear_system):
        g0 = single_mode_state(linear_system)
        errs = []
        for h in (0.1, 0.05):
            traj = integrate(linear_system, g0, 0.0, 1.0, StepperConfig(mode="fixed", h=h), samples=2)
            errs.append(np.abs(traj.final - g0 * math.exp(-0.7)).max())
        assert 14 < errs[0] / errs[1] < 18

    def test_zero_stays_zero(self, linear_system):
        traj = integrate(linear_system, np.zeros(linear_system.n), 0.0, 1.0)
        assert np.all(traj.states == 0.0)

    def test_taylor_green(self):
        torus = TorusSpec()
        basis = BasisSpec(torus, 4)
        u0 = taylor_green(torus)
        sys_ = DirectSystem(basis, 0.1)
        traj = integrate(sys_, basis.project(u0), 0.0, 1.0, StepperConfig(rtol=1e-8, atol=1e-10))
        exact = u0 * math.exp(-0.2)
        assert l2_norm(sys_.reconstruct_u(traj.final) - exact) / l2_norm(exact) <= 1e-6

    def test_explicit_samples(self, linear_system):
        ts = np.array([0.0, 0.1, 0.5])
        traj = integrate(linear_system, single_mode_state(linear_system), 0.0, 0.5, samples=ts)
        np.testing.assert_array_equal(traj.times, ts)

    def test_bad_interval(self, linear_system):
        with pytest.raises(ValueError):
            integrate(linear_system, np.zeros(linear_system.n), 1.0, 1.0)

    def test_blowup_status(self, linear_system):
        g0 = single_mode_state(linear_system) * 1e4
        traj = integrate(linear_system, g0, 0.0, 1.0, samples=3, blowup_threshold=1.0)
        assert traj.status == BLOWUP and "threshold" in traj.message

    def test_unstable_fixed_step_blows_up(self):
        basis = BasisSpec(TorusSpec(), 2)
        sys_ = DirectSystem(basis, 1.0)
        g0 = np.ones(basis.n)
        # h * nu * lambda_max = 4 puts RK4 outside its stability region
        traj = integrate(sys_, g0, 0.0, 50.0, StepperConfig(mode="fixed", h=1.0), samples=2)
        assert traj.status == BLOWUP

    def test_step_underflow(self, linear_system):
        g0 = single_mode_state(linear_system)
        stepper = StepperConfig(rtol=1e-13, atol=1e-300, min_step=0.5, max_step=10.0)
        traj = integrate(linear_system, g0, 0.0, 5.0, stepper, samples=2)
        assert traj.status == UNDERFLOW

    def test_stepper_validation(self):
        with pytest.raises(ValueError):
            StepperConfig(mode="euler")
        with pytest.raises(ValueError):
            StepperConfig(rtol=0.0)
        with pytest.raises(ValueError):
            StepperConfig(h=-1.0)


class TestC3:
    def test_zero_trajectory(self, linear_system):
        traj = integrate(linear_system, np.zeros(linear_system.n), 0.0, 1.0)
        assert estimate_c3(linear_system, traj) == 0.0

    def test_pure_decay(self, linear_system):
        traj = integrate(linear_system, single_mode_state(linear_system), 0.0, 1.0)
        assert estimate_c3(linear_system, traj) == 0.0

    def test_nonlinear_positive(self, mode8):
        sys_, g0 = mode8
        traj = integrate(sys_, g0, 0.0, 0.5, StepperConfig(rtol=1e-7, atol=1e-10))
        c3 = estimate_c3(sys_, traj)
        assert 0 < c3 < math.inf

    def test_needs_samples(self, linear_system):
        traj = integrate(linear_system, np.zeros(linear_system.n), 0.0, 1.0, samples=3)
        with pytest.raises(ValueError):
            estimate_c3(linear_system, traj)

    def test_quotients_nonnegative(self, mode8):
        sys_, g0 = mode8
        traj = Trajectory(np.array([0.0]), g0[None, :])
        assert c3_quotients(sys_, traj)[0] >= 0


class TestExtendHorizon:
    def test_reference_values(self):
        step = extend_horizon(0.0, 0.0, 0.25, 10.0)
        assert step.T_plus == pytest.approx(1.0)
        assert step.bound == pytest.approx(math.sqrt(2))

    def test_no_progress_for_huge_bound(self):
        assert extend_horizon(2.0, 1e12, 1.0, 10.0).T_plus == pytest.approx(2.0)
        assert extend_horizon(2.0, math.inf, 1.0, 10.0).T_plus == 2.0

    def test_clamped(self):
        assert extend_horizon(0.9, 0.0, 0.25, 1.0).T_plus == 1.0

    @given(st.floats(0, 10), st.floats(0, 1e3), st.floats(1e-3, 1e3))
    def test_monotone_in_inputs(self, T0, M, c3):
        T = 20.0
        a = extend_horizon(T0, M, c3, T).T_plus
        assert T0 <= a <= T
        assert extend_horizon(T0, M * 2 + 1, c3, T).T_plus <= a
        assert extend_horizon(T0, M, c3 * 2, T).T_plus <= a


class TestLadder:
    def test_zero_data_one_rung(self, linear_system):
        log = run_ladder(linear_system, np.zeros(linear_system.n), 3.0, c3_floor=0.0)
        assert log.status == REACHED and len(log.rungs) == 1

    def test_small_data_reaches_horizon(self):
        torus = TorusSpec()
        basis = BasisSpec(torus, 2)
        rng = np.random.default_rng(2)
        g0 = 0.005 * rng.standard_normal(basis.n)
        sys_ = DirectSystem(basis, 0.1)
        assert sys_.enstrophy(g0) <= 1e-2
        log = run_ladder(sys_, g0, 5.0, StepperConfig(rtol=1e-8, atol=1e-12))
        assert log.status == REACHED
        assert log.times[-1] == pytest.approx(5.0)
        assert np.all(np.diff(log.enstrophy) <= 0)
        for r in log.rungs:
            if r.condition_met:
                assert r.bound_ok
        horizons = log.horizons
        assert all(b > a for a, b in zip(horizons, horizons[1:]))

    def test_large_data_terminal(self):
        basis = BasisSpec(TorusSpec(), 2)
        sys_ = DirectSystem(basis, 0.01)
        g0 = 200.0 * np.random.default_rng(0).standard_normal(basis.n)
        log = run_ladder(sys_, g0, 1.0, StepperConfig(mode="fixed", h=0.5), samples_per_rung=3)
        assert log.status in (BLOWUP, UNDERFLOW)
        assert log.message

    def test_json(self, linear_system):
        log = run_ladder(linear_system, 0.01 * single_mode_state(linear_system), 1.0)
        d = log.to_json_dict()
        assert d["status"] == REACHED and d["rungs"]


class TestEnergyAudit:
    def test_unforced_direct(self, mode8):
        sys_, g0 = mode8
        traj = integrate(sys_, g0, 0.0, 0.5, StepperConfig(rtol=1e-10, atol=1e-13), samples=81)
        audit = energy_audit(sys_, traj)
        assert audit.instantaneous <= 1e-12
        assert audit.integrated <= 1e-8
        assert audit.monotone and audit.apriori_ok

    def test_forced_bound(self):
        torus = TorusSpec()
        basis = BasisSpec(torus, 1.5)
        f = ForcingSpec.from_terms(torus, [([1, 0, 0], [0, 1, 0], [0.3, 0.1])])
        sys_ = DirectSystem(basis, 0.2, f)
        traj = integrate(sys_, np.zeros(basis.n), 0.0, 1.0, TIGHT, samples=41)
        audit = energy_audit(sys_, traj)
        assert audit.monotone is None
        assert audit.apriori_ok and audit.integrated <= 1e-8


class TestGronwall:
    def test_certificate(self, mode8):
        sys_, g0 = mode8
        traj = integrate(sys_, g0, 0.0, 0.5, samples=21)
        cert = gronwall_certificate(sys_, traj)
        assert cert.c4 >= 0 and cert.holds


class TestTwin:
    def test_zero_delta(self, linear_system):
        rep = twin_run_divergence(linear_system, single_mode_state(linear_system), 0.0, 1.0)
        assert rep.sup_w == 0.0

    def test_linear_decays(self, linear_system):
        rep = twin_run_divergence(linear_system, single_mode_state(linear_system), 1e-6, 1.0, TIGHT)
        assert rep.c_hat <= 0 and rep.bound_ok

    def test_taylor_green_linear_response(self):
        torus = TorusSpec()
        basis = BasisSpec(torus, 2)
        sys_ = DirectSystem(basis, 0.1)
        g0 = basis.project(taylor_green(torus))
        rep = twin_run_divergence(sys_, g0, 1e-6, 1.0, TIGHT, index=3)
        assert rep.bound_ok
        assert rep.sup_w / rep.delta <= math.exp(max(rep.c_hat, 0.0)) * (1 + 1e-9)
        assert rep.linear

    def test_negative_delta(self, linear_system):
        with pytest.raises(ValueError):
            twin_run_divergence(linear_system, np.zeros(linear_system.n), -1.0, 1.0)


class TestCsv:
    def test_columns(self, linear_system, tmp_path):
        traj = integrate(linear_system, single_mode_state(linear_system), 0.0, 1.0, samples=3)
        rows = trajectory_rows(linear_system, traj)
        path = tmp_path / "t.csv"
        write_trajectory_csv(path, rows)
        lines = path.read_text().splitlines()
        assert lines[0].split(",") == CSV_COLUMNS
        assert len(lines) == 4
        assert float(lines[-1].split(",")[0]) == 1.0
