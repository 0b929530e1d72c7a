import numpy as np
import pytest

from conftest import moment_pair, random_spd, unit_weight_grid
from farkit.errors import InsufficientDataError
from farkit.grid import uniform_grid
from farkit.moments import FunctionalSample, weighted_moments
from farkit.tikhonov import (
    AlphaGrid,
    application_alpha_grid,
    cv_select_alpha,
    default_alpha_grid,
    tikhonov_fit,
)


def reweight(kernel, grid):
    sw = np.sqrt(grid.weights)
    return kernel * np.outer(sw, sw)


def naive_holdout_cv(sample, alphas):
    """Independent per-alpha dense-solve oracle for the holdout CV losses."""
    values = sample.values
    n, m = values.shape
    n_v = max(n // 5, 20)
    n_tr = n - n_v
    train = values[:n_tr]
    mean = train.mean(axis=0)
    centered = train - mean
    c0 = centered.T @ centered / n_tr
    c1 = centered[1:].T @ centered[:-1] / (n_tr - 1)
    sw = np.sqrt(sample.grid.weights)
    scale = np.outer(sw, sw)
    c0t, c1t = c0 * scale, c1 * scale
    losses = []
    for alpha in alphas:
        psi = np.linalg.solve((c0t + alpha * np.eye(m)).T, c1t.T).T
        total = 0.0
        for t in range(n_tr, n):
            z_lag = sw * (values[t - 1] - mean)
            z_tgt = sw * (values[t] - mean)
            total += float(np.sum((z_tgt - psi @ z_lag) ** 2))
        losses.append(total / n_v)
    return np.array(losses)


class TestTikhonovFit:
    def test_diagonal_case(self):
        g = unit_weight_grid(4)
        d = np.array([4.0, 2.0, 1.0, 0.5])
        c = np.array([1.0, -2.0, 0.5, 3.0])
        est = tikhonov_fit(moment_pair(np.diag(d), np.diag(c), g), alpha=0.25)
        assert np.allclose(est.kernel, np.diag(c / (d + 0.25)), atol=1e-12)
        assert est.method == "tikhonov"
        assert est.tuning == {"alpha": 0.25}

    def test_zero_cross_moment(self, rng):
        g = uniform_grid(5)
        pair = moment_pair(random_spd(rng, 5), np.zeros((5, 5)), g)
        for alpha in (1e-4, 0.1, 10.0):
            assert np.allclose(tikhonov_fit(pair, alpha).kernel, 0.0)

    def test_dense_solve_oracle(self, rng):
        g = uniform_grid(8)
        c0t = random_spd(rng, 8)
        c1t = rng.standard_normal((8, 8))
        pair = moment_pair(c0t, c1t, g)
        alpha = 0.1
        est = tikhonov_fit(pair, alpha)
        dense = np.linalg.solve((c0t + alpha * np.eye(8)).T, c1t.T).T
        got = reweight(est.kernel, g)
        assert np.linalg.norm(got - dense) <= 1e-10 * np.linalg.norm(dense)

    def test_alpha_must_be_positive(self, rng):
        pair = moment_pair(np.eye(3), np.eye(3), uniform_grid(3))
        for alpha in (0.0, -1.0):
            with pytest.raises(ValueError):
                tikhonov_fit(pair, alpha)

    def test_resolvent_norm_nonincreasing_in_alpha(self, rng):
        g = uniform_grid(7)
        pair = moment_pair(random_spd(rng, 7), rng.standard_normal((7, 7)), g)
        norms = [
            np.linalg.norm(reweight(tikhonov_fit(pair, a).kernel, g), 2)
            for a in default_alpha_grid().values
        ]
        assert all(b <= a * (1 + 1e-12) for a, b in zip(norms, norms[1:]))

    def test_large_alpha_bound(self, rng):
        g = uniform_grid(6)
        c0t = random_spd(rng, 6)
        c1t = rng.standard_normal((6, 6))
        pair = moment_pair(c0t, c1t, g)
        lam1 = np.linalg.eigvalsh(c0t).max()
        alpha = 1e6 * lam1
        norm = np.linalg.norm(reweight(tikhonov_fit(pair, alpha).kernel, g), 2)
        assert norm <= np.linalg.norm(c1t, 2) / alpha * (1 + 1e-10)


class TestAlphaGrids:
    def test_default_grid(self):
        grid = default_alpha_grid()
        assert len(grid) == 25
        assert grid.values[0] == pytest.approx(1e-5, rel=1e-12)
        assert grid.values[-1] == pytest.approx(1.0, rel=1e-12)
        ratios = grid.values[1:] / grid.values[:-1]
        assert np.allclose(ratios, 10 ** (5 / 24), rtol=1e-10)
        assert 10 ** (5 / 24) == pytest.approx(1.6156, abs=5e-5)

    def test_default_grid_rescaled(self):
        grid = default_alpha_grid(scale=10.0)
        assert grid.values[0] == pytest.approx(1e-4, rel=1e-12)
        assert grid.values[-1] == pytest.approx(10.0, rel=1e-12)

    def test_default_grid_rejects_bad_scale(self):
        with pytest.raises(ValueError):
            default_alpha_grid(scale=0.0)

    def test_application_grid(self):
        grid = application_alpha_grid(1.0)
        assert len(grid) == 30
        assert grid.values[0] == pytest.approx(1e-4, rel=1e-12)
        assert grid.values[-1] == pytest.approx(10.0, rel=1e-12)
        assert grid.provenance == "eigenvalue-scaled"

    def test_application_grid_scales_with_lambda(self):
        grid = application_alpha_grid(2.0)
        assert grid.values[0] == pytest.approx(2e-4, rel=1e-12)
        assert grid.values[-1] == pytest.approx(20.0, rel=1e-12)
        assert np.all(np.diff(grid.values) > 0)

    def test_alpha_grid_validation(self):
        with pytest.raises(ValueError):
            AlphaGrid(np.array([]))
        with pytest.raises(ValueError):
            AlphaGrid(np.array([0.1, 0.1]))
        with pytest.raises(ValueError):
            AlphaGrid(np.array([-0.1, 0.5]))


def noiseless_far_sample(rng, n=60, m=15, radius=0.85):
    """Exact autoregression in weighted space: z_{t+1} = B z_t, no noise."""
    g = uniform_grid(m)
    b = rng.standard_normal((m, m))
    b *= radius / np.linalg.norm(b, 2)
    z = np.empty((n, m))
    z[0] = rng.standard_normal(m)
    for t in range(1, n):
        z[t] = b @ z[t - 1]
    return FunctionalSample(z / np.sqrt(g.weights), g)


class TestCvSelectAlpha:
    def test_noiseless_dynamics_avoid_heavy_regularization(self, rng):
        # exact transition data: the loss is regularization bias plus the
        # small exactness floor left by training-mean centering, so the top
        # decade of the grid is strictly dominated and never selected
        sample = noiseless_far_sample(rng)
        grid = default_alpha_grid()
        cv = cv_select_alpha(sample, grid)
        losses = np.array([l for _, l in cv.cv_curve])
        assert np.all(np.diff(losses[-5:]) > 0)
        assert cv.selected_alpha < grid.values[20]
        assert losses[-1] > losses.min() * 1.02

    def test_white_noise_prefers_heavy_regularization(self, rng):
        g = uniform_grid(11)
        sample = FunctionalSample(rng.standard_normal((200, 11)), g)
        grid = default_alpha_grid()
        cv = cv_select_alpha(sample, grid)
        assert cv.selected_alpha >= grid.values[12]

        from farkit.evaluate import misfe

        mom = weighted_moments(sample)
        test = FunctionalSample(rng.standard_normal((200, 11)), g)
        selected = misfe(tikhonov_fit(mom, cv.selected_alpha), test)
        overfit = misfe(tikhonov_fit(mom, grid.values[0]), test)
        assert selected <= overfit

    def test_fast_path_equals_naive_path(self, rng):
        g = uniform_grid(21)
        sample = FunctionalSample(rng.standard_normal((60, 21)), g)
        grid = default_alpha_grid()
        cv = cv_select_alpha(sample, grid)
        naive = naive_holdout_cv(sample, grid.values)
        fast = np.array([l for _, l in cv.cv_curve])
        assert np.abs(fast - naive).max() <= 1e-9 * np.abs(naive).max()

    def test_holdout_split_record(self, rng):
        g = uniform_grid(5)
        sample = FunctionalSample(rng.standard_normal((100, 5)), g)
        cv = cv_select_alpha(sample, default_alpha_grid())
        assert cv.train_indices == tuple(range(80))
        assert cv.validation_indices == tuple(range(80, 100))
        assert cv.scheme == "holdout"

    def test_flat_curve_ties_to_largest_alpha(self):
        g = uniform_grid(5)
        sample = FunctionalSample(np.zeros((40, 5)), g)
        grid = default_alpha_grid()
        cv = cv_select_alpha(sample, grid)
        losses = [l for _, l in cv.cv_curve]
        assert losses == [0.0] * 25
        assert cv.selected_alpha == grid.values[-1]

    def test_deterministic(self, rng):
        g = uniform_grid(7)
        sample = FunctionalSample(rng.standard_normal((50, 7)), g)
        a = cv_select_alpha(sample, default_alpha_grid())
        b = cv_select_alpha(sample, default_alpha_grid())
        assert a.selected_alpha == b.selected_alpha
        assert a.cv_curve == b.cv_curve

    def test_kfold_forward_runs_and_differs_from_holdout(self, rng):
        g = uniform_grid(9)
        sample = FunctionalSample(rng.standard_normal((80, 9)), g)
        cv = cv_select_alpha(sample, default_alpha_grid(), scheme="k-fold-forward")
        assert cv.scheme == "k-fold-forward"
        # fold 1 is training-only; validated targets are the remaining folds
        assert cv.train_indices == tuple(range(16))
        assert cv.validation_indices == tuple(range(16, 80))

    def test_sample_too_short(self, rng):
        g = uniform_grid(4)
        short = FunctionalSample(rng.standard_normal((20, 4)), g)
        with pytest.raises(InsufficientDataError):
            cv_select_alpha(short, default_alpha_grid())
        with pytest.raises(InsufficientDataError):
            cv_select_alpha(
                FunctionalSample(rng.standard_normal((30, 4)), g),
                default_alpha_grid(),
                scheme="k-fold-forward",
            )

    def test_unknown_scheme(self, rng):
        g = uniform_grid(4)
        sample = FunctionalSample(rng.standard_normal((40, 4)), g)
        with pytest.raises(ValueError):
            cv_select_alpha(sample, default_alpha_grid(), scheme="loo")
