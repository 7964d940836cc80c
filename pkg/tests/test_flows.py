import math

import numpy as np
import pytest

from bolax.config import FlowConfig
from bolax.errors import LatticeError, NormExplosion, SmallnessError, StepSizeError
from bolax.field_core import Field, analytic_norm, make_field, random_analytic_field
from bolax.flows import (
    FlowKind,
    continuous_dependence,
    evolve,
    h_kappa_hamiltonian,
    kappa_convergence,
    residual_field,
    rk4_step,
    suggested_dt,
    trap_experiment,
    vector_field,
)
from bolax.lax_gauge import default_kappa
from tests.conftest import cosine


def flow_config(spec, dt=1e-3, t_end=0.1, **extra):
    return FlowConfig(dt=dt, t_end=t_end, lattice=spec, **extra)


class TestVectorFields:
    def test_bo_on_cosine(self, two_cos):
        field = vector_field(two_cos, FlowKind.bo())
        assert field[1] == pytest.approx(-1j)
        assert field[2] == pytest.approx(-1j)
        assert field.real_valued and field.zero_mean

    def test_zero_is_stationary(self):
        zero = Field.zeros(8)
        assert not np.any(vector_field(zero, FlowKind.bo()).coeffs)
        assert not np.any(vector_field(zero, FlowKind.h_kappa(50.0)).coeffs)

    def test_rejects_complex_state(self, spec16):
        with pytest.raises(LatticeError):
            vector_field(make_field([(1, 1.0)], spec16), FlowKind.bo())

    def test_kind_validation(self):
        with pytest.raises(ValueError):
            FlowKind("h_kappa", None)
        assert FlowKind.h_kappa(250.0).label == "h_kappa(250)"

    def test_residual_shrinks_like_one_over_kappa(self, standard_state):
        kappas = np.array([250.0, 500.0, 1000.0, 2000.0])
        eps = 0.5 / 6
        norms = [analytic_norm(residual_field(standard_state, k), 0.5 - eps, 1.0) for k in kappas]
        slope = np.polyfit(np.log(kappas), np.log(norms), 1)[0]
        assert -1.25 <= slope <= -0.8

    def test_suggested_dt(self):
        assert suggested_dt(FlowKind.bo(), 32).stability == pytest.approx(1 / 1024)
        assert suggested_dt(FlowKind.bo(), 32).conservative is None
        assert suggested_dt(FlowKind.h_kappa(256.0), 32).conservative == pytest.approx(1 / 8192)


class TestEvolution:
    def test_zero_trajectory(self, spec16):
        trajectory, report = evolve(Field.zeros(16), FlowKind.bo(), flow_config(spec16))
        assert all(not np.any(u.coeffs) for u in trajectory)
        assert report.relative_drift("P") == 0.0

    def test_recording_schedule(self, spec16):
        cfg = flow_config(spec16, dt=1e-2, t_end=0.25, record_every=10)
        trajectory, report = evolve(cosine(0.05, spec16), FlowKind.bo(), cfg)
        np.testing.assert_allclose(report.times, [0.0, 0.1, 0.2, 0.25])
        assert len(trajectory) == 4

    def test_bo_invariants(self, spec16):
        cfg = flow_config(spec16, t_end=0.5, record_every=50)
        _, report = evolve(cosine(0.05, spec16), FlowKind.bo(), cfg)
        assert report.relative_drift("P") < 1e-8
        assert report.relative_drift("H_BO") < 1e-6
        assert report.eigenvalue_drift() < 1e-5

    def test_frame_columns(self, spec16):
        kind = FlowKind.h_kappa(128.0)
        cfg = flow_config(spec16, dt=5e-4, t_end=5e-3, n_eigs=3)
        _, report = evolve(cosine(0.05, spec16), kind, cfg)
        frame = report.to_frame()
        assert list(frame.columns) == [
            "t",
            "P",
            "H_BO",
            "E_rho",
            "norm_rho1",
            "beta_l1",
            "beta_l2",
            "eig_1",
            "eig_2",
            "eig_3",
            "H_kappa",
        ]

    def test_rk4_preserves_symmetry(self, spec16):
        u = random_analytic_field(5, spec16, 0.3, 0.5)
        step = rk4_step(u, 1e-3, FlowKind.bo())
        assert step.real_valued and step.symmetry_drift() == 0.0

    def test_lattice_mismatch(self, spec16, standard_state):
        with pytest.raises(LatticeError):
            evolve(standard_state, FlowKind.bo(), flow_config(spec16))

    def test_norm_explosion(self, spec16):
        cfg = flow_config(spec16, explosion_factor=0.5)
        with pytest.raises(NormExplosion, match="admissible region"):
            evolve(cosine(0.1, spec16), FlowKind.bo(), cfg)

    def test_halving_check_passes(self, spec16):
        cfg = flow_config(spec16, halving_check=True)
        evolve(cosine(0.05, spec16), FlowKind.bo(), cfg)

    def test_halving_check_catches_large_steps(self, spec16):
        cfg = flow_config(spec16, dt=5e-3, t_end=0.5, halving_check=True, halving_tol=1e-14)
        with pytest.raises(StepSizeError):
            evolve(cosine(0.2, spec16), FlowKind.bo(), cfg)

    @pytest.mark.slow
    def test_h_kappa_conservation(self, spec16):
        u0 = cosine(0.05, spec16)
        kappa = default_kappa(u0, 16)
        cfg = flow_config(spec16, dt=1.0 / (kappa * 16), t_end=1.0, record_every=16)
        _, report = evolve(u0, FlowKind.h_kappa(kappa), cfg)
        assert report.beta_drift() < 1e-6
        assert report.relative_drift("P") < 1e-6
        assert report.relative_drift("E_rho") < 1e-6
        assert report.relative_drift("H_kappa") < 1e-6
        assert report.eigenvalue_drift() < 1e-6

    def test_h_kappa_hamiltonian_small_state(self, standard_state):
        # H_kappa tends to -H_BO, and H_BO = a^2 for 2a cos x
        value = h_kappa_hamiltonian(standard_state, 1000.0)
        assert value == pytest.approx(-(0.05**2), rel=1e-2)


class TestExperiments:
    def test_trapping(self, spec16, consts):
        a = 0.3 * consts.x_max / (math.sqrt(2.0) * math.exp(0.5))
        cfg = flow_config(spec16, t_end=0.5)
        result = trap_experiment(cosine(a, spec16), 0.5, FlowKind.bo(), cfg)
        assert result.trapped and result.bounds_ok
        assert result.bounds_slack > 0
        assert result.sup_norm <= result.x_root * (1 + 1e-4)
        assert set(result.as_dict()) >= {"A", "X_max", "sup_norm", "trapped", "bounds_slack"}

    def test_smallness_names_both_conditions(self, spec16):
        with pytest.raises(SmallnessError) as info:
            trap_experiment(cosine(0.5, spec16), 0.5, FlowKind.bo(), flow_config(spec16))
        assert len(info.value.failed) == 2
        assert "energy condition" in str(info.value)
        assert "norm condition" in str(info.value)

    def test_continuous_dependence(self, spec16):
        u0 = cosine(0.05, spec16)
        v0 = u0 + random_analytic_field(3, spec16, 1e-4, 0.5)
        report = continuous_dependence(u0, v0, FlowKind.bo(), flow_config(spec16))
        assert report.initial_distance > 0
        assert report.sup_l2 <= 2.0 * report.initial_distance

    def test_kappa_list_must_ascend(self, spec16):
        with pytest.raises(ValueError):
            kappa_convergence(cosine(0.05, spec16), [500.0, 250.0], 0.1, flow_config(spec16))

    @pytest.mark.slow
    def test_kappa_convergence(self, spec16):
        cfg = flow_config(spec16, t_end=0.5, record_every=10)
        table = kappa_convergence(cosine(0.05, spec16), [250.0, 500.0, 1000.0, 2000.0], 0.5, cfg)
        assert len(table.rows) == 3
        for ratio in table.halving_ratios:
            assert abs(ratio - 0.5) <= 0.15
        assert table.bo_distance <= 1.5 * table.rate_constant / table.kappa_max
        assert table.eps == pytest.approx(0.5 / 6)

