import warnings

import numpy as np
import pytest

import flqr
from flqr import FunctionalSample, GridFunction, InvalidInput, fpca_baseline_fit, fpca_predict


class TestFpcaBaseline:
    def test_near_interpolation_on_noiseless_affine_data(self, grid101):
        # slope inside the span of the leading components, no noise
        design = flqr.SimDesign(n=30, snr=10.0, n_terms=6, seed=40)
        sample0 = flqr.generate(design)
        from flqr.simulate import _eigenfunction_matrix
        psi = _eigenfunction_matrix(grid101.points, 6)
        beta_star = GridFunction(grid101, 0.9 * psi[0] - 0.4 * psi[1] + 0.2 * psi[2])
        y = 0.3 + np.array(
            [flqr.inner_l2(sample0.curve(i), beta_star) for i in range(30)]
        )
        sample = FunctionalSample(grid101, sample0.curves, y)
        res = fpca_baseline_fit(sample, 0.5, n_components=6, h=1e-3)
        preds = np.array([fpca_predict(res, sample.curve(i)) for i in range(30)])
        assert np.abs(preds - y).max() < 1e-3

    def test_single_component_spans_first_eigenfunction(self, grid101):
        rng = np.random.default_rng(4)
        design = flqr.SimDesign(n=80, snr=10.0, seed=41)
        sample = flqr.generate(design)
        res = fpca_baseline_fit(sample, 0.5, n_components=1, h=0.1)
        # the slope must be proportional to the leading eigenfunction
        from flqr.fpca import _fpca_decompose
        _, _, _, efuncs = _fpca_decompose(sample)
        v1 = efuncs[:, 0]
        beta = res.beta_hat.values
        coef = (v1 @ beta) / (v1 @ v1)
        assert np.abs(beta - coef * v1).max() < 1e-10

    def test_component_cap_and_fve(self, medium_sample):
        res = fpca_baseline_fit(medium_sample, 0.5, h=0.1)
        assert 1 <= res.n_components <= 20
        assert res.fve >= 0.99

    def test_rank_deficiency_reduces_with_warning(self, grid101):
        rng = np.random.default_rng(5)
        base = rng.standard_normal(101)
        curves = np.outer(rng.standard_normal(12), base)  # rank-1 curves
        sample = FunctionalSample(grid101, curves, rng.standard_normal(12))
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            res = fpca_baseline_fit(sample, 0.5, n_components=5, h=0.2)
        assert res.n_components == 1
        assert any("rank" in str(w.message) for w in caught)

    def test_component_count_bound(self, small_sample):
        with pytest.raises(InvalidInput):
            fpca_baseline_fit(small_sample, 0.5, n_components=small_sample.n)
