import numpy as np
import numpy.testing as npt
import pytest

from predvar import linalg
from predvar.estimation import (
    FitConfig,
    Scaling,
    build_stacks,
    constrained_weights,
    dlv_objective,
    extract_dlvs,
    fit_oblique,
    fit_predvar,
    init_weights,
    lag_coeffs,
    orth_weights,
    proj_objective,
    stack_lag_coeffs,
    update_dynamics,
    update_loadings,
)
from predvar.exceptions import (
    ConfigError,
    DimensionError,
    InsufficientData,
    InvalidInput,
    OrderError,
    RankError,
    SingularCovariance,
    SingularGram,
)
from predvar.model import simulate, weights_from_loadings

from conftest import make_linear_truth


def truth_stacks(seed=0, n=2000, sim_seed=5, order=2):
    """Stacks extracted with the exact dual weights of a known model."""
    truth = make_linear_truth(seed)
    y, _ = simulate(truth, n, seed=sim_seed)
    w = weights_from_loadings(truth)
    return truth, extract_dlvs(build_stacks(y, order), w.dlv), w


class TestFitConfig:
    def test_defaults(self):
        cfg = FitConfig()
        assert cfg.outer_tol == 1e-6 and cfg.outer_max_iter == 500
        assert cfg.inner_tol == 1e-8 and cfg.inner_max_iter == 100
        assert cfg.ridge == 0.0 and cfg.scale is True

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"outer_tol": 0.0},
            {"inner_tol": -1e-9},
            {"outer_max_iter": 0},
            {"inner_max_iter": 0},
            {"ridge": -1e-3},
        ],
    )
    def test_invalid_values(self, kwargs):
        with pytest.raises(ConfigError):
            FitConfig(**kwargs)


class TestScaling:
    def test_fit_standardizes(self):
        rng = np.random.default_rng(0)
        y = rng.standard_normal((500, 3)) * [1.0, 5.0, 0.1] + [2.0, -1.0, 0.0]
        scaled = Scaling.fit(y).apply(y)
        npt.assert_allclose(scaled.mean(axis=0), 0.0, atol=1e-12)
        npt.assert_allclose(scaled.std(axis=0), 1.0, atol=1e-12)

    def test_constant_channel_keeps_unit_scale(self):
        y = np.column_stack([np.ones(10), np.arange(10.0)])
        assert Scaling.fit(y).scale[0] == 1.0

    def test_roundtrip(self):
        rng = np.random.default_rng(1)
        y = rng.standard_normal((50, 2)) * 3 + 7
        s = Scaling.fit(y)
        npt.assert_allclose(s.restore(s.apply(y)), y, atol=1e-12)

    def test_identity(self):
        s = Scaling.identity(4)
        y = np.arange(8.0).reshape(2, 4)
        npt.assert_allclose(s.apply(y), y)


class TestBuildStacks:
    def test_lag_blocks_hand_case(self):
        stacks = build_stacks([[1.0], [2.0], [3.0], [4.0]], 1)
        assert stacks.n_samples == 3
        npt.assert_allclose(stacks.meas_lag(0), [[1.0], [2.0], [3.0]])
        npt.assert_allclose(stacks.meas_lag(1), [[2.0], [3.0], [4.0]])

    def test_order_validation(self):
        with pytest.raises(OrderError):
            build_stacks(np.ones((10, 2)), 0)

    def test_minimum_samples(self):
        with pytest.raises(InsufficientData):
            build_stacks(np.ones((3, 2)), 2)
        assert build_stacks(np.random.default_rng(0).standard_normal((4, 2)), 2).n_samples == 2

    def test_lag_index_range(self):
        stacks = build_stacks(np.ones((10, 2)), 2)
        with pytest.raises(DimensionError):
            stacks.meas_lag(3)
        with pytest.raises(DimensionError):
            stacks.meas_lag(-1)

    def test_latent_blocks_need_extraction(self):
        stacks = build_stacks(np.ones((10, 2)), 1)
        with pytest.raises(InvalidInput):
            stacks.dlv_lag(0)


class TestExtractDlvs:
    def test_series_and_history_layout(self):
        rng = np.random.default_rng(2)
        y = rng.standard_normal((12, 4))
        weights = rng.standard_normal((4, 2))
        stacks = extract_dlvs(build_stacks(y, 2), weights)
        v = y @ weights
        npt.assert_allclose(stacks.dlv_series, v, atol=1e-12)
        n = stacks.n_samples
        npt.assert_allclose(
            stacks.dlv_history, np.hstack([v[1 : 1 + n], v[0:n]]), atol=1e-12
        )
        npt.assert_allclose(stacks.dlv_lag(2), v[2 : 2 + n], atol=1e-12)

    def test_row_mismatch(self):
        stacks = build_stacks(np.ones((10, 3)), 1)
        with pytest.raises(DimensionError):
            extract_dlvs(stacks, np.ones((4, 2)))


class TestInitWeights:
    def test_orthonormal_and_energy_ordered(self):
        rng = np.random.default_rng(4)
        y = rng.standard_normal((400, 3)) * [10.0, 1.0, 0.1]
        w = init_weights(y, 2)
        assert w.shape == (3, 2)
        npt.assert_allclose(w.T @ w, np.eye(2), atol=1e-10)
        assert abs(w[0, 0]) > 0.99  # most energetic channel leads

    def test_latent_dim_range(self):
        y = np.random.default_rng(5).standard_normal((20, 3))
        with pytest.raises(ConfigError):
            init_weights(y, 0)
        with pytest.raises(ConfigError):
            init_weights(y, 3)

    def test_rank_deficient_data(self):
        with pytest.raises(RankError):
            init_weights(np.zeros((50, 4)), 2)


class TestUpdateDynamics:
    def test_exact_doubling_hand_case(self):
        stacks = extract_dlvs(build_stacks([[1.0], [2.0], [4.0]], 1), [[1.0]])
        coeff_stack, innovation_cov = update_dynamics(stacks)
        npt.assert_allclose(coeff_stack, [[2.0]], atol=1e-12)
        npt.assert_allclose(innovation_cov, [[0.0]], atol=1e-12)

    def test_noiseless_recursion_recovered(self):
        b = np.array([[0.5, 0.1], [-0.2, 0.3]])
        v = [np.array([1.0, -0.5])]
        for _ in range(14):
            v.append(b @ v[-1])
        stacks = extract_dlvs(build_stacks(np.array(v), 1), np.eye(2))
        coeff_stack, innovation_cov = update_dynamics(stacks)
        assert np.linalg.norm(coeff_stack.T - b) < 1e-8
        assert np.abs(innovation_cov).max() < 1e-12

    def test_matches_lstsq(self):
        rng = np.random.default_rng(1234)
        for _ in range(5):
            ell, s = rng.integers(1, 4), rng.integers(1, 4)
            v = rng.standard_normal((60, ell))
            stacks = extract_dlvs(build_stacks(v, s), np.eye(ell))
            coeff_stack, innovation_cov = update_dynamics(stacks)
            m = stacks.n_samples
            design = np.hstack([v[s - j : s - j + m] for j in range(1, s + 1)])
            ref, *_ = np.linalg.lstsq(design, v[s : s + m], rcond=None)
            resid = v[s : s + m] - design @ ref
            assert np.abs(coeff_stack - ref).max() < 1e-9
            assert np.abs(innovation_cov - resid.T @ resid / m).max() < 1e-9

    def test_white_noise_gives_null_coefficients(self):
        v = np.random.default_rng(3).standard_normal((2001, 2))
        stacks = extract_dlvs(build_stacks(v, 1), np.eye(2))
        coeff_stack, _ = update_dynamics(stacks)
        assert np.abs(coeff_stack).max() * np.sqrt(stacks.n_samples) < 3.0

    def test_normal_equations(self):
        _, stacks, _ = truth_stacks()
        coeff_stack, _ = update_dynamics(stacks)
        design = stacks.dlv_history
        target = stacks.dlv_lag(stacks.order)
        grad = design.T @ (target - design @ coeff_stack)
        assert np.linalg.norm(grad) < 1e-6 * np.linalg.norm(design.T @ target)

    def test_rank_deficient_design(self):
        y = np.random.default_rng(6).standard_normal((5, 6))
        stacks = extract_dlvs(build_stacks(y, 2), np.eye(6)[:, :3])
        with pytest.raises(SingularGram, match="rank deficient at ridge=0"):
            update_dynamics(stacks)
        coeff_stack, _ = update_dynamics(stacks, ridge=1e-6)
        assert np.all(np.isfinite(coeff_stack))

    def test_requires_extraction(self):
        with pytest.raises(InvalidInput):
            update_dynamics(build_stacks(np.ones((10, 2)), 1))


class TestLagCoeffSplit:
    def test_roundtrip(self):
        truth = make_linear_truth(1)
        stack = stack_lag_coeffs(truth.var_coeffs)
        assert stack.shape == (6, 3)
        back = lag_coeffs(stack, 3)
        for left, right in zip(back, truth.var_coeffs):
            npt.assert_allclose(left, right, atol=1e-14)

    def test_lag_one_block_on_top(self):
        b1, b2 = np.full((2, 2), 1.0), np.full((2, 2), 2.0)
        stack = stack_lag_coeffs([b1, b2])
        npt.assert_allclose(stack[:2], b1.T)
        npt.assert_allclose(stack[2:], b2.T)

    def test_bad_split(self):
        with pytest.raises(DimensionError):
            lag_coeffs(np.ones((3, 2)), 2)
        with pytest.raises(DimensionError):
            lag_coeffs(np.ones((4, 2)), 3)


class TestObjectives:
    def test_quadratic_terms_at_minimizers(self):
        # With the covariance set to the 1/N residual moment, the
        # quadratic part of each objective collapses to N times the
        # residual dimension, leaving only the log-determinant to move.
        _, stacks, _ = truth_stacks()
        n = stacks.n_samples
        coeff_stack, innovation_cov = update_dynamics(stacks)
        loadings, residual_cov = update_loadings(stacks, coeff_stack)
        dlv = dlv_objective(stacks, coeff_stack, innovation_cov)
        quad = dlv - n * np.linalg.slogdet(innovation_cov)[1]
        assert abs(quad - n * 3) < 1e-6 * n
        proj = proj_objective(stacks, coeff_stack, loadings, residual_cov)
        quad = proj - n * np.linalg.slogdet(residual_cov)[1]
        assert abs(quad - n * 6) < 1e-6 * n

    def test_singular_covariance_rejected(self):
        _, stacks, _ = truth_stacks()
        coeff_stack, _ = update_dynamics(stacks)
        with pytest.raises(SingularCovariance, match="not positive definite"):
            dlv_objective(stacks, coeff_stack, np.zeros((3, 3)))

    def test_requires_extraction(self):
        stacks = build_stacks(np.ones((10, 2)), 1)
        with pytest.raises(InvalidInput):
            dlv_objective(stacks, np.zeros((2, 2)), np.eye(2))


class TestUpdateLoadings:
    def test_exact_doubling_hand_case(self):
        stacks = extract_dlvs(build_stacks([[1.0], [2.0], [4.0]], 1), [[1.0]])
        loadings, residual_cov = update_loadings(stacks, [[1.0]])
        npt.assert_allclose(loadings, [[2.0]], atol=1e-12)
        npt.assert_allclose(residual_cov, [[0.0]], atol=1e-12)

    def test_unit_energy_prediction(self):
        # Predicted values (0.6, 0.8) have unit second moment, so the
        # regression reduces to the plain inner product with the target.
        stacks = extract_dlvs(build_stacks([[0.6], [0.8], [0.9]], 1), [[1.0]])
        loadings, _ = update_loadings(stacks, [[1.0]])
        npt.assert_allclose(loadings, [[0.48 + 0.8 * 0.9]], atol=1e-12)

    def test_normal_equations(self):
        _, stacks, _ = truth_stacks()
        coeff_stack, _ = update_dynamics(stacks)
        loadings, _ = update_loadings(stacks, coeff_stack)
        predicted = stacks.dlv_history @ coeff_stack
        target = stacks.meas_lag(stacks.order)
        grad = predicted.T @ (target - predicted @ loadings.T)
        assert np.linalg.norm(grad) < 1e-6 * np.linalg.norm(predicted.T @ target)

    def test_zero_prediction_rejected(self):
        _, stacks, _ = truth_stacks()
        with pytest.raises(SingularGram, match="predicted latent values"):
            update_loadings(stacks, np.zeros((6, 3)))


class TestConstrainedWeights:
    def test_defining_properties(self):
        truth, stacks, _ = truth_stacks(seed=3)
        coeff_stack, _ = update_dynamics(stacks)
        loadings, residual_cov = update_loadings(stacks, coeff_stack)
        dlv_w, static_w = constrained_weights(loadings, residual_cov)
        npt.assert_allclose(dlv_w.T @ dlv_w, np.eye(3), atol=1e-10)
        npt.assert_allclose(static_w.T @ static_w, np.eye(3), atol=1e-10)
        assert np.linalg.norm(static_w.T @ loadings) < 1e-8 * np.linalg.norm(loadings)
        cross = dlv_w.T @ residual_cov @ static_w
        assert np.linalg.norm(cross) < 1e-9 * np.linalg.norm(residual_cov)

    def test_recovers_exact_dual_span(self):
        from predvar.model import to_reduced_rank_var

        truth = make_linear_truth(4)
        sig_e = to_reduced_rank_var(truth).residual_cov
        dlv_w, _ = constrained_weights(truth.loadings, sig_e)
        true_dlv = weights_from_loadings(truth).dlv
        assert linalg.canonical_angles(dlv_w, true_dlv).max() < 1e-4

    def test_covariance_shape_mismatch(self):
        with pytest.raises(DimensionError, match="channel count"):
            constrained_weights(np.eye(4)[:, :2], np.eye(3))

    def test_rank_deficient_loadings(self):
        bad = np.eye(4)[:, :2].copy()
        bad[:, 1] = 0.0
        with pytest.raises(RankError, match="lost column rank"):
            constrained_weights(bad, np.eye(4))


class TestOrthWeights:
    def test_pseudo_inverse_transpose(self):
        truth = make_linear_truth(5)
        w = orth_weights(truth.loadings)
        npt.assert_allclose(w.T @ truth.loadings, np.eye(3), atol=1e-10)
        npt.assert_allclose(w, linalg.pseudo_inverse(truth.loadings).T, atol=1e-10)

    def test_rank_deficient(self):
        with pytest.raises(RankError):
            orth_weights(np.zeros((4, 2)))


class TestFitOblique:
    def test_single_pass_contract(self):
        _, stacks, w = truth_stacks()
        coeff_stack, _ = update_dynamics(stacks)
        cfg = FitConfig(inner_max_iter=1)
        first = fit_oblique(stacks, coeff_stack, w.dlv, cfg)
        second = fit_oblique(stacks, coeff_stack, w.dlv, cfg)
        assert first.iterations == 1 and not first.converged
        assert np.array_equal(first.loadings, second.loadings)
        assert np.array_equal(first.dlv_weights, second.dlv_weights)
        assert np.array_equal(first.residual_cov, second.residual_cov)

    def test_reruns_are_bitwise_identical(self):
        _, stacks, w = truth_stacks(seed=1)
        coeff_stack, _ = update_dynamics(stacks)
        first = fit_oblique(stacks, coeff_stack, w.dlv)
        second = fit_oblique(stacks, coeff_stack, w.dlv)
        assert first.iterations == second.iterations
        assert first.converged == second.converged
        assert np.array_equal(first.loadings, second.loadings)
        assert np.array_equal(first.static_weights, second.static_weights)

    def test_cap_hit_is_flagged_not_raised(self):
        _, stacks, w = truth_stacks()
        coeff_stack, _ = update_dynamics(stacks)
        out = fit_oblique(stacks, coeff_stack, w.dlv, FitConfig(inner_tol=1e-15, inner_max_iter=3))
        assert out.iterations == 3 and not out.converged

    def test_stage_invariants(self):
        _, stacks, w = truth_stacks(seed=2)
        coeff_stack, _ = update_dynamics(stacks)
        out = fit_oblique(stacks, coeff_stack, w.dlv)
        npt.assert_allclose(out.dlv_weights.T @ out.dlv_weights, np.eye(3), atol=1e-10)
        assert np.linalg.norm(out.static_weights.T @ out.loadings) < 1e-8 * np.linalg.norm(
            out.loadings
        )
        cross = out.dlv_weights.T @ out.residual_cov @ out.static_weights
        assert np.linalg.norm(cross) < 1e-8 * np.linalg.norm(out.residual_cov)
        assert 1 <= out.iterations <= FitConfig().inner_max_iter


@pytest.fixture(scope="module")
def fitted():
    truth = make_linear_truth(0)
    y, _ = simulate(truth, 4000, seed=123)
    return truth, y, fit_predvar(y, 2, 3)


class TestFitPredvar:
    def test_converges_with_trace(self, fitted):
        _, _, fit = fitted
        assert fit.converged
        assert fit.objective_trace.shape == (fit.iterations, 2)
        assert fit.algorithm == "predvar" and fit.order == 2 and fit.latent_dim == 3

    def test_convergence_identities(self, fitted):
        _, _, fit = fitted
        duality, innovation_match = fit.identity_residuals()
        assert duality < 1e-8
        assert innovation_match < 1e-8

    def test_deterministic(self, fitted):
        _, y, fit = fitted
        again = fit_predvar(y, 2, 3)
        assert np.array_equal(fit.params.loadings, again.params.loadings)
        assert np.array_equal(fit.weights.dlv, again.weights.dlv)
        assert fit.iterations == again.iterations

    def test_extract_predict_shapes(self, fitted):
        _, y, fit = fitted
        v = fit.extract(y)
        assert v.shape == (y.shape[0], 3)
        pred = fit.predict(y)
        assert pred.shape == (y.shape[0] - 2, 6)

    def test_projector_idempotent(self, fitted):
        _, _, fit = fitted
        proj = fit.projector()
        assert np.linalg.norm(proj @ proj - proj) < 1e-8

    def test_channel_rescaling_equivariance(self):
        # Rescaling the channels by D carries the fitted projector to
        # D @ projector @ D^-1; the standardization step makes this hold
        # to roundoff rather than approximately.
        truth = make_linear_truth(0)
        y, _ = simulate(truth, 10_000, seed=1000)
        d = np.array([1.0, 2.0, 0.5, 4.0, 1.5, 0.8])
        base = fit_predvar(y, 2, 3)
        scaled = fit_predvar(y * d, 2, 3)
        lhs = scaled.projector()
        rhs = np.diag(d) @ base.projector() @ np.diag(1 / d)
        assert np.linalg.norm(lhs - rhs, "fro") < 1e-8 * np.linalg.norm(rhs, "fro")

    def test_unscaled_config_keeps_units(self):
        truth = make_linear_truth(0)
        y, _ = simulate(truth, 1500, seed=77)
        fit = fit_predvar(y, 2, 3, FitConfig(scale=False))
        npt.assert_allclose(fit.scaling.scale, 1.0)
        npt.assert_allclose(fit.loadings_original(), fit.params.loadings)

    def test_cap_hit_is_flagged_not_raised(self):
        truth = make_linear_truth(0)
        y, _ = simulate(truth, 1500, seed=77)
        fit = fit_predvar(y, 2, 3, FitConfig(outer_max_iter=1))
        assert fit.iterations == 1 and not fit.converged

    def test_latent_dim_validation(self):
        y = np.random.default_rng(8).standard_normal((100, 4))
        with pytest.raises(ConfigError):
            fit_predvar(y, 1, 0)
        with pytest.raises(ConfigError):
            fit_predvar(y, 1, 4)
