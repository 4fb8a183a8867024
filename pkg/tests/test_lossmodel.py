import json

import numpy as np
import pytest

from qsurfloss import (
    DegenerateFitError,
    InvalidInputError,
    LossDataPoint,
    LossModel,
    fit_sm_only,
    fit_sm_plus_j,
    fit_sm_plus_q0,
    model_inverse_q,
    normalized_pr,
    predict_inverse_q,
)

# loss tangents extracted from the bundled dataset (two-term model)
TAN_SM = 8.9e-4
TAN_J = 3.5e-3


class TestPredictInverseQ:
    def test_reference_device_d5_2(self):
        """p_sm = 0.82e-4, p_j = 0.34e-4 with the extracted tangents lands
        within a few percent of the measured Q = 4.92e6."""
        inv_q = predict_inverse_q(0.82e-4, 0.34e-4, TAN_SM, TAN_J)
        assert inv_q == pytest.approx(1.92e-7, rel=2e-3)
        assert 1.0 / inv_q == pytest.approx(4.92e6, rel=0.07)

    def test_zero_participation_is_lossless(self):
        assert predict_inverse_q(0.0, 0.0, TAN_SM, TAN_J) == 0.0

    def test_junction_dominance_d7_1(self):
        """For the long-lived small-p_sm device, the junction term carries
        roughly 80% of the modeled relaxation."""
        p_sm, p_j = 0.51e-4, 0.59e-4
        total = predict_inverse_q(p_sm, p_j, TAN_SM, TAN_J)
        fraction = p_j * TAN_J / total
        assert fraction == pytest.approx(0.82, abs=0.01)

    def test_negative_input_rejected(self):
        with pytest.raises(InvalidInputError):
            predict_inverse_q(-1e-4, 0.0, TAN_SM, TAN_J)


class TestNormalizedPr:
    def test_reference_value_d7_1(self):
        value = normalized_pr(0.51e-4, 0.59e-4, 8.9e-4, 3.5e-3)
        assert value == pytest.approx(2.83e-4, rel=2e-3)

    def test_reduces_to_p_sm_without_junction(self):
        assert normalized_pr(3e-4, 0.0, TAN_SM, TAN_J) == 3e-4

    def test_equal_tangents_sum(self):
        assert normalized_pr(2e-4, 1e-4, 1e-3, 1e-3) == pytest.approx(3e-4)

    def test_zero_tan_sm_rejected(self):
        with pytest.raises(InvalidInputError):
            normalized_pr(1e-4, 1e-4, 0.0, TAN_J)


def synthetic_points(tan_sm, tan_j=None, inv_q0=0.0, p_sm=None, p_j=None):
    p_sm = [1e-4, 5e-4, 2e-3] if p_sm is None else p_sm
    p_j = [0.0] * len(p_sm) if p_j is None else p_j
    points = []
    for i, (s, j) in enumerate(zip(p_sm, p_j)):
        inv_q = s * tan_sm + (j * tan_j if tan_j else 0.0) + inv_q0
        points.append(LossDataPoint(p_sm=s, p_j=j, q_mean=1.0 / inv_q,
                                    group_id=f"synth{i}"))
    return points


class TestExactRecovery:
    def test_two_point_q0_model(self):
        """Exactly determined system: two points, two unknowns."""
        points = synthetic_points(8e-4, inv_q0=1e-7, p_sm=[1e-4, 1e-3])
        fit = fit_sm_plus_q0(points, weighting="none")
        assert fit.tan_d_sm == pytest.approx(8e-4, rel=1e-12)
        assert fit.q0 == pytest.approx(1e7, rel=1e-12)

    def test_noise_free_junction_model(self):
        points = synthetic_points(
            8.9e-4, tan_j=3.5e-3,
            p_sm=[1e-4, 5e-4, 2e-3, 3e-3],
            p_j=[0.6e-4, 0.3e-4, 0.2e-4, 0.4e-4],
        )
        fit = fit_sm_plus_j(points, weighting="none")
        assert fit.tan_d_sm == pytest.approx(8.9e-4, rel=1e-10)
        assert fit.tan_d_j == pytest.approx(3.5e-3, rel=1e-10)
        assert np.max(np.abs(fit.residuals)) < 1e-18

    def test_prediction_identity(self):
        points = synthetic_points(8e-4, inv_q0=1e-7, p_sm=[1e-4, 4e-4, 9e-4])
        fit = fit_sm_plus_q0(points, weighting="none")
        for i, (p, predicted) in enumerate(zip(points, fit.predicted_inv_q)):
            assert model_inverse_q(fit, p.p_sm, p.p_j) == pytest.approx(
                predicted, rel=1e-14
            )
            assert 1.0 / p.q_mean - predicted == pytest.approx(
                fit.residuals[i], abs=1e-20
            )


class TestDegeneracy:
    def test_constant_p_sm_rejected_for_q0_model(self):
        points = [
            LossDataPoint(p_sm=1e-4, p_j=0.0, q_mean=1e6 + i * 1e4)
            for i in range(4)
        ]
        with pytest.raises(DegenerateFitError):
            fit_sm_plus_q0(points, weighting="none")

    def test_collinear_columns_rejected_with_condition_number(self):
        points = [
            LossDataPoint(p_sm=s, p_j=2.0 * s, q_mean=1.0 / (s * 1e-3))
            for s in (1e-4, 2e-4, 5e-4)
        ]
        with pytest.raises(DegenerateFitError, match="condition"):
            fit_sm_plus_j(points, weighting="none")

    def test_too_few_points(self):
        with pytest.raises(InvalidInputError):
            fit_sm_plus_j([LossDataPoint(1e-4, 1e-5, 1e6)], weighting="none")


class TestBundledDatasetFits:
    def test_junction_model_parameters(self, grouped_points):
        fit = fit_sm_plus_j(grouped_points)
        assert 7.1e-4 <= fit.tan_d_sm <= 1.07e-3
        assert 2.8e-3 <= fit.tan_d_j <= 4.2e-3
        assert fit.relative_stderr("tan_d_sm") < 0.15
        assert fit.relative_stderr("tan_d_j") < 0.15

    def test_q0_model_parameters(self, grouped_points):
        fit = fit_sm_plus_q0(grouped_points)
        assert 6.6e-4 <= fit.tan_d_sm <= 1.0e-3
        assert 5.7e6 <= fit.q0 <= 8.5e6

    def test_model_collapse_correlation(self, grouped_points):
        """The two-term model explains the grouped data: predicted and
        measured 1/Q correlate above 0.95, and the normalized-PR abscissa
        maps the model onto the single line tan_d_sm * npr."""
        fit = fit_sm_plus_j(grouped_points)
        measured = np.array([1.0 / p.q_mean for p in grouped_points])
        modeled = np.array(
            [model_inverse_q(fit, p.p_sm, p.p_j) for p in grouped_points]
        )
        assert np.corrcoef(measured, modeled)[0, 1] > 0.95
        for p, m in zip(grouped_points, modeled):
            npr = normalized_pr(p.p_sm, p.p_j, fit.tan_d_sm, fit.tan_d_j)
            assert fit.tan_d_sm * npr == pytest.approx(m, rel=1e-12)

    def test_sm_only_overestimates_long_lived_devices(self, grouped_points):
        """Without the junction term the single-tangent model cannot follow
        the small-p_sm points; its tangent is dragged upward."""
        single = fit_sm_only(grouped_points)
        two_term = fit_sm_plus_j(grouped_points)
        assert single.tan_d_sm > two_term.tan_d_sm


class TestWeighting:
    def test_uniform_variances_match_unweighted(self):
        """Equal q_mean and q_std means equal weights, so the weighted fit
        must coincide with the unweighted one."""
        p_sm = [1e-4, 3e-4, 7e-4, 1.5e-3]
        p_j = [0.5e-4, 0.2e-4, 0.6e-4, 0.1e-4]
        points = [
            LossDataPoint(p_sm=s, p_j=j, q_mean=2e6, q_std=2e5)
            for s, j in zip(p_sm, p_j)
        ]
        a = fit_sm_plus_j(points, weighting="none")
        b = fit_sm_plus_j(points, weighting="invvar")
        assert b.tan_d_sm == pytest.approx(a.tan_d_sm, rel=1e-9)
        assert b.tan_d_j == pytest.approx(a.tan_d_j, rel=1e-9)

    def test_residual_orthogonality_unweighted(self, grouped_points):
        fit = fit_sm_plus_j(grouped_points, weighting="none")
        res = fit.residuals
        for column in (
            np.array([p.p_sm for p in grouped_points]),
            np.array([p.p_j for p in grouped_points]),
        ):
            cosine = abs(res @ column) / (
                np.linalg.norm(res) * np.linalg.norm(column)
            )
            assert cosine < 1e-9


class TestNonNegativity:
    def test_negative_optimum_clamped_to_zero(self):
        """Data generated with a negative junction coefficient must come back
        clamped at zero, refit on the remaining column."""
        rng = np.random.default_rng(7)
        p_sm = np.linspace(2e-4, 2e-3, 8)
        p_j = rng.uniform(0.1e-4, 0.4e-4, 8)
        inv_q = 1e-3 * p_sm - 2e-3 * p_j
        points = [
            LossDataPoint(p_sm=s, p_j=j, q_mean=1.0 / y)
            for s, j, y in zip(p_sm, p_j, inv_q)
        ]
        fit = fit_sm_plus_j(points, weighting="none")
        assert fit.tan_d_j == 0.0
        assert fit.stderr["tan_d_j"] == 0.0
        only = fit_sm_only(points, weighting="none")
        assert fit.tan_d_sm == pytest.approx(only.tan_d_sm, rel=1e-12)


class TestSerialization:
    def test_report_dict_is_json_ready(self, grouped_points):
        fit = fit_sm_plus_j(grouped_points)
        blob = json.dumps(fit.to_json_dict())
        parsed = json.loads(blob)
        assert parsed["model"] == LossModel.SM_PLUS_J.value
        assert parsed["parameters"]["tan_d_sm"] == pytest.approx(fit.tan_d_sm)
        assert len(parsed["residuals_inv_q"]) == len(grouped_points)
