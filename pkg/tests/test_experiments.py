import numpy as np
import pytest

from cylgap import coeff
from cylgap import experiments as ex
from cylgap.errors import ConditionConFails, NoReflectionSymmetry, NotConverged

from conftest import MU1


@pytest.fixture(scope="module")
def cfg():
    return ex.ExperimentConfig(resolution=16, axial_resolution=8)


@pytest.fixture(scope="module")
def model(cfg):
    return coeff.model_field(0.6)


class TestBoundsSweep:
    def test_model_passes_with_strict_margins(self, model, cfg):
        recs = ex.exp_bounds_sweep(model, [0.1, 1.0, 8.0], cfg)
        assert all(r.passed for r in recs)
        for r in recs:
            assert r.Lambda1_disc < r.lambda1 < r.mu1_disc
            assert r.lambda1 > (1 - 0.36) * r.mu1_disc + 1e-3
            assert r.lambda1 < r.mu1_disc - 1e-3

    def test_delta_zero_pins_to_mu(self, cfg):
        field = coeff.model_field(0.0)
        recs = ex.exp_bounds_sweep(field, [0.5, 2.0], cfg)
        for r in recs:
            assert r.passed
            assert abs(r.lambda1 - r.mu1_disc) <= 1e-9

    def test_uncoupled_3d_field(self):
        # n=3, p=1 diagonal field on a box cross-section: no coupling
        field = coeff.diagonal_field([1.0, 1.0, 1.0], p=1)
        cfg3 = ex.ExperimentConfig(resolution=8, axial_resolution=4,
                                   omega=((-1, 1), (-1, 1)))
        recs = ex.exp_bounds_sweep(field, [1.0], cfg3)
        r = recs[0]
        assert r.passed
        assert abs(r.lambda1 - r.mu1_disc) <= 1e-8
        assert r.mu1_disc == pytest.approx(2 * MU1, rel=5e-3)

    def test_solver_error_aborts_record_not_sweep(self, model):
        bad = ex.ExperimentConfig(resolution=16, axial_resolution=8,
                                  node_cap=100)
        recs = ex.exp_bounds_sweep(model, [1.0], bad)
        assert len(recs) == 1
        assert not recs[0].passed
        assert "MemoryBudget" in recs[0].note

    def test_parallel_matches_serial(self, model, cfg):
        par = ex.ExperimentConfig(resolution=16, axial_resolution=8,
                                  parallelism=4)
        serial = ex.exp_bounds_sweep(model, [0.5, 1.0, 2.0], cfg)
        threaded = ex.exp_bounds_sweep(model, [0.5, 1.0, 2.0], par)
        for a, b in zip(serial, threaded):
            assert a.ell == b.ell
            assert a.lambda1 == b.lambda1


class TestLimitZero:
    def test_model_extrapolates_to_reduced_value(self, model, cfg):
        recs = ex.exp_limit_zero(model, [0.4, 0.2, 0.1, 0.05], cfg)
        summary = recs[-1]
        assert summary.passed
        assert abs(summary.extrapolated - summary.Lambda1_disc) < 1e-2
        # Lambda1_disc is exactly (1 - delta^2) mu1_disc for the model
        assert summary.Lambda1_disc == pytest.approx(
            0.64 * summary.mu1_disc, rel=1e-11)

    def test_delta_zero_constant_sequence(self, cfg):
        field = coeff.model_field(0.0)
        recs = ex.exp_limit_zero(field, [0.4, 0.2, 0.1], cfg)
        lams = [r.lambda1 for r in recs if r.lambda1 is not None]
        assert max(lams) - min(lams) <= 1e-9

    def test_variable_coefficient_field(self, cfg):
        field = coeff.variable_a22_field(0.6)
        recs = ex.exp_limit_zero(field, [0.4, 0.2, 0.1, 0.05], cfg)
        summary = recs[-1]
        assert summary.passed
        assert abs(summary.extrapolated - summary.Lambda1_disc) < 2e-2


class TestNuHalf:
    def test_model_monotone_and_below_mu(self, model, cfg):
        est = ex.exp_nu_half(model, "+", [4, 8, 16], cfg)
        seq = est.sequence
        assert all(b <= a + 1e-9 for a, b in zip(seq, seq[1:]))
        assert est.converged
        mu = ex.cross_context(model, cfg).mu1
        assert est.nu < mu - 1e-2
        assert est.bracket[0] <= est.nu <= est.bracket[1]

    def test_diagonal_identified_with_mu(self, cfg):
        field = coeff.diagonal_field([1.0, 1.0])
        est = ex.exp_nu_half(field, "+", [4, 8, 16], cfg)
        mu = ex.cross_context(field, cfg).mu1
        assert est.nu == mu
        assert all(v >= mu - 1e-9 for v in est.sequence)

    def test_reflection_identity(self, model, cfg):
        lm, lp = ex.reflection_check(model, 4, cfg)
        assert abs(lm - lp) <= 1e-8

    def test_not_converged_raises_with_sequence(self, cfg):
        field = coeff.asymmetric_model_field(0.5)
        with pytest.raises(NotConverged) as err:
            ex.exp_nu_half(field, "+", [2, 4], cfg, conv_tol=1e-6)
        assert len(err.value.sequence) == 2


class TestLimitInfinity:
    def test_model(self, model, cfg):
        recs = ex.exp_limit_infinity(model, [8, 12, 16], cfg)
        assert all(r.passed for r in recs)
        diffs = [r.gap for r in recs]
        assert diffs[0] > diffs[1] > diffs[2]
        assert diffs[-1] < 5e-3

    def test_diagonal_equalities(self, cfg):
        field = coeff.diagonal_field([1.0, 1.0])
        recs = ex.exp_limit_infinity(field, [4, 8], cfg)
        for r in recs:
            assert abs(r.lambda1 - r.mu1_disc) <= 1e-8
            assert abs(min(r.nu_plus, r.nu_minus) - r.mu1_disc) <= 1e-8

    def test_asymmetric_tracks_min(self, cfg):
        field = coeff.asymmetric_model_field(0.5)
        recs = ex.exp_limit_infinity(field, [8, 12], cfg)
        r = recs[-1]
        assert r.passed
        nu_min, nu_max = sorted([r.nu_plus, r.nu_minus])
        assert abs(r.lambda1 - nu_min) < 1e-3
        assert abs(r.lambda1 - nu_max) > 5e-2
        # one-sided concentration on the side of the smaller limit
        d_small = r.d_minus if r.nu_minus < r.nu_plus else r.d_plus
        assert d_small < 1e-3


class TestGap:
    def test_model_deltas(self, cfg):
        for delta in (0.3, 0.6):
            recs = ex.exp_gap(coeff.model_field(delta), [8, 16], cfg)
            assert all(r.passed for r in recs)
            gaps = [r.gap for r in recs]
            assert min(gaps) > recs[0].margin

    def test_delta_zero_refuses(self, cfg):
        with pytest.raises(ConditionConFails):
            ex.exp_gap(coeff.model_field(0.0), [8], cfg)


class TestSecondEigenvalue:
    def test_model_gap_closes(self, model, cfg):
        recs = ex.exp_second_eigenvalue(model, [8, 12, 16], cfg)
        assert all(r.passed for r in recs)
        gaps = [r.gap for r in recs]
        assert gaps[1] <= gaps[0] / 2 and gaps[2] <= gaps[1] / 2
        for r in recs:
            assert r.lambda1 < r.lambda2 <= r.lambda_half_plus + 1e-8

    def test_asymmetric_field_rejected(self, cfg):
        with pytest.raises(NoReflectionSymmetry):
            ex.exp_second_eigenvalue(coeff.asymmetric_model_field(0.5),
                                     [8], cfg)

    def test_delta_zero_neumann_mode_spacing(self, cfg):
        # separable check: lambda2 - lambda1 = (pi / 2L)^2 for delta = 0
        field = coeff.model_field(0.0)
        recs = ex.exp_second_eigenvalue(field, [4], cfg, shrink_factor=1.0)
        r = recs[0]
        assert r.gap == pytest.approx((np.pi / 8) ** 2, rel=0.05)


class TestDirichletComparison:
    def test_identity_constant(self, cfg):
        recs = ex.exp_dirichlet_comparison(coeff.identity_field(),
                                           [4, 8, 16], cfg)
        assert all(r.passed for r in recs)
        for r in recs:
            assert r.fitted_c == pytest.approx(MU1, rel=0.05)

    def test_model_consistent_constant(self, model, cfg):
        recs = ex.exp_dirichlet_comparison(model, [4, 8, 16], cfg)
        assert all(r.passed for r in recs)
        cs = [r.fitted_c for r in recs]
        assert (max(cs) - min(cs)) / max(cs) <= 0.30
        for r in recs:
            assert r.sigma1 >= r.mu1_disc - r.margin
            assert r.lambda1 <= r.sigma1 + 1e-8


class TestMultiDirection:
    def test_coupled_field_gap_and_row_bound(self):
        field = coeff.multi_model_field(0.6)
        cfg3 = ex.ExperimentConfig(res3d_axial=3, res3d_cross=12)
        recs = ex.exp_multi_direction(field, [2, 4], cfg3)
        assert all(r.passed for r in recs)
        for r in recs:
            assert r.gap > r.margin
            assert r.lambda1 <= r.target + 1e-8  # 2D row-restriction bound

    def test_uncoupled_field_equality(self):
        field = coeff.diagonal_field([1.0, 1.0, 1.0], p=2)
        cfg3 = ex.ExperimentConfig(res3d_axial=3, res3d_cross=12)
        recs = ex.exp_multi_direction(field, [2], cfg3)
        r = recs[0]
        assert r.passed
        assert abs(r.lambda1 - r.mu1_disc) <= 1e-8

    def test_wrong_field_rejected(self, model):
        with pytest.raises(ValueError):
            ex.exp_multi_direction(model, [2], ex.ExperimentConfig())


class TestDecayAndProfiles:
    def test_decay_records(self, model, cfg):
        recs, prof = ex.exp_decay(model, 12, cfg)
        assert recs[0].passed
        assert recs[0].alpha_fit < 0.8
        assert recs[0].r2 > 0.99

    def test_end_profile_records(self, model, cfg):
        recs = ex.exp_end_profile(model, [6, 10], cfg, half_length=16)
        assert all(r.passed for r in recs)
        assert recs[1].end_distance < recs[0].end_distance


class TestUniversalSandwich:
    def test_all_eigenvalue_records_respect_bounds(self, model, cfg):
        # every populated lambda1 slot sits inside
        # [Lambda1_disc - margin, mu1_disc + margin]
        ctx = ex.cross_context(model, cfg)
        records = []
        records += ex.exp_gap(model, [8], cfg)
        records += ex.exp_limit_infinity(model, [8], cfg)
        records += ex.exp_limit_zero(model, [0.4, 0.2, 0.1], cfg)
        for r in records:
            if r.lambda1 is None:
                continue
            assert ctx.Lambda1 - ctx.margin <= r.lambda1 \
                <= ctx.mu1 + ctx.margin, r.experiment

    def test_asymmetric_omega_rejected_for_second(self, model):
        cfg = ex.ExperimentConfig(resolution=8, axial_resolution=4,
                                  omega=(0.0, 2.0))
        with pytest.raises(NoReflectionSymmetry):
            ex.exp_second_eigenvalue(model, [4], cfg)


class TestRecordPlumbing:
    def test_wall_time_not_in_csv_schema(self):
        assert "wall_time_s" not in ex.CSV_COLUMNS
        assert "lambda1" in ex.CSV_COLUMNS

    def test_every_solve_reports_residual(self, model, cfg):
        recs = ex.exp_bounds_sweep(model, [1.0], cfg)
        assert recs[0].residual is not None
        assert recs[0].residual <= cfg.tol

    def test_symmetry_defect_recorded_for_even_fields(self, model, cfg):
        recs = ex.exp_bounds_sweep(model, [1.0], cfg)
        assert recs[0].symmetry_defect is not None
        assert recs[0].symmetry_defect <= 1e-7
