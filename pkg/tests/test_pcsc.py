import numpy as np
import pytest
from scipy.special import gamma as gamma_fn
from scipy.stats import gennorm

from lfiqa.pcsc import (
    dct_entropy,
    fit_aggd,
    fit_mggd,
    mscn,
    pcsc_features,
)


def sample_aggd(rng, alpha, sigma_l, sigma_r, n):
    """Sampling oracle: pick a side by its probability mass, then draw the
    magnitude from a half generalized normal with that side's beta scale."""
    beta_scale = np.sqrt(gamma_fn(1.0 / alpha) / gamma_fn(3.0 / alpha))
    bl, br = sigma_l * beta_scale, sigma_r * beta_scale
    left = rng.random(n) < bl / (bl + br)
    scales = np.where(left, bl, br)
    mags = np.abs(gennorm.rvs(beta=alpha, scale=scales, size=n, random_state=rng))
    return np.where(left, -mags, mags)


def sample_mggd(rng, scatter, gamma, phi, n):
    """Stochastic-representation oracle: radius from the modular density
    (u^phi / (2 gamma^phi) is Gamma(N/(2 phi))), direction uniform."""
    n_dim = scatter.shape[0]
    w = rng.gamma(shape=n_dim / (2.0 * phi), scale=1.0, size=n)
    u = (2.0 * gamma**phi * w) ** (1.0 / phi)
    d = rng.standard_normal((n, n_dim))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    chol = np.linalg.cholesky(scatter)
    return np.sqrt(u)[:, None] * (d @ chol.T)


class TestMscn:
    def test_constant_image_maps_to_zero(self):
        # numerator is the residual of the unit-volume window sum
        assert np.abs(mscn(np.full((16, 16), 3.7)).coeffs).max() < 1e-12

    def test_too_small_rejected(self):
        with pytest.raises(ValueError):
            mscn(np.zeros((6, 6)))

    def test_gaussian_field_mean_near_zero(self):
        # Monte-Carlo oracle over 10 seeds
        means = []
        for seed in range(10):
            rng = np.random.default_rng(seed)
            means.append(mscn(rng.standard_normal((256, 256))).coeffs.mean())
        assert np.all(np.abs(means) < 0.02)

    def test_bright_pixel_sign_pattern(self):
        img = np.zeros((15, 15))
        img[7, 7] = 10.0
        coeffs = mscn(img).coeffs
        assert coeffs[7, 7] > 0
        assert coeffs[7, 5] < 0 and coeffs[5, 7] < 0

    def test_near_invariant_to_gain_at_high_contrast(self):
        # the +1 stabilizer is negligible when local contrast is large
        rng = np.random.default_rng(3)
        img = 1000.0 * rng.random((64, 64))
        base = mscn(img).coeffs
        scaled = mscn(2.0 * img).coeffs
        rel = np.abs(scaled - base).max() / np.abs(base).max()
        assert rel < 0.01


class TestFitAggd:
    @pytest.mark.parametrize("alpha,sl,sr", [(2.0, 1.0, 1.0), (1.0, 1.0, 1.0)])
    def test_symmetric_recovery(self, alpha, sl, sr):
        rng = np.random.default_rng(42)
        params = fit_aggd(sample_aggd(rng, alpha, sl, sr, 10**6))
        assert params.alpha == pytest.approx(alpha, rel=0.1)
        assert params.sigma_l == pytest.approx(sl, rel=0.02)
        assert params.sigma_r == pytest.approx(sr, rel=0.02)
        assert abs(params.eta) < 0.02

    def test_asymmetric_recovery(self):
        rng = np.random.default_rng(43)
        params = fit_aggd(sample_aggd(rng, 2.0, 1.0, 2.0, 10**6))
        assert params.alpha == pytest.approx(2.0, rel=0.1)
        assert params.sigma_l == pytest.approx(1.0, rel=0.05)
        assert params.sigma_r == pytest.approx(2.0, rel=0.05)
        assert params.eta > 0

    def test_consistency_error_shrinks_with_samples(self):
        sizes = [10**3, 10**4, 10**5, 10**6]
        medians = []
        for n in sizes:
            errs = []
            for seed in range(20):
                rng = np.random.default_rng(seed)
                params = fit_aggd(sample_aggd(rng, 1.5, 1.0, 1.0, n))
                errs.append(abs(params.alpha - 1.5))
            medians.append(np.median(errs))
        assert all(a > b for a, b in zip(medians, medians[1:]))

    def test_symmetric_pairs_give_exact_zero_eta(self):
        rng = np.random.default_rng(44)
        v = np.abs(rng.standard_normal(500)) + 0.1
        params = fit_aggd(np.concatenate([v, -v]))
        assert params.eta == 0.0
        assert params.sigma_l == params.sigma_r

    def test_negation_swaps_sides_exactly(self):
        rng = np.random.default_rng(45)
        x = sample_aggd(rng, 1.2, 0.7, 1.4, 5000)
        p = fit_aggd(x)
        q = fit_aggd(-x)
        assert q.alpha == p.alpha
        assert q.sigma_l == p.sigma_r and q.sigma_r == p.sigma_l
        assert q.eta == -p.eta

    def test_eta_recomputable_from_fields(self):
        rng = np.random.default_rng(46)
        p = fit_aggd(sample_aggd(rng, 0.9, 0.5, 1.5, 10**5))
        beta_scale = np.sqrt(gamma_fn(1 / p.alpha) / gamma_fn(3 / p.alpha))
        eta = (p.sigma_r - p.sigma_l) * beta_scale * gamma_fn(2 / p.alpha) / gamma_fn(1 / p.alpha)
        assert p.eta == pytest.approx(eta, abs=1e-9)

    def test_all_zero_fallback(self):
        p = fit_aggd(np.zeros(500))
        assert (p.alpha, p.sigma_l, p.sigma_r, p.eta) == (0.2, 0.0, 0.0, 0.0)

    def test_one_sided_fallback(self):
        rng = np.random.default_rng(47)
        p = fit_aggd(np.abs(rng.standard_normal(5000)))
        assert p.sigma_l == 0.0
        assert p.sigma_r > 0
        assert np.isfinite(p.alpha) and np.isfinite(p.eta)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            fit_aggd(np.ones(50))


class TestFitMggd:
    def test_gaussian_identity_scatter(self):
        rng = np.random.default_rng(48)
        p = fit_mggd(rng.standard_normal((10**5, 3)))
        assert p.phi == pytest.approx(1.0, abs=0.1)
        off = [p.scatter[0, 1], p.scatter[0, 2], p.scatter[1, 2]]
        assert np.all(np.abs(off) < 0.03)
        assert np.trace(p.scatter) == pytest.approx(3.0, abs=1e-9)

    def test_heavy_tailed_recovery_against_oracle(self):
        rng = np.random.default_rng(49)
        truth = np.array([[1.0, 0.3, 0.0], [0.3, 1.0, 0.0], [0.0, 0.0, 1.0]])
        x = sample_mggd(rng, truth, gamma=2.0, phi=0.6, n=10**5)
        p = fit_mggd(x)
        assert p.phi == pytest.approx(0.6, rel=0.15)
        assert p.gamma == pytest.approx(2.0, rel=0.15)
        assert p.scatter[0, 1] == pytest.approx(0.3, abs=0.05)

    def test_scale_equivariance(self):
        rng = np.random.default_rng(50)
        x = rng.standard_normal((5000, 3))
        a = fit_mggd(x)
        b = fit_mggd(4.0 * x)
        assert np.abs(b.scatter - a.scatter).max() < 1e-10
        assert b.gamma == pytest.approx(16.0 * a.gamma, rel=1e-6)
        assert b.phi == pytest.approx(a.phi, rel=0.05)

    def test_global_sign_flips_leave_fit_unchanged(self):
        rng = np.random.default_rng(51)
        x = rng.standard_normal((2000, 3))
        signs = rng.choice([-1.0, 1.0], size=(2000, 1))
        a = fit_mggd(x)
        b = fit_mggd(signs * x)
        np.testing.assert_array_equal(a.scatter, b.scatter)
        assert a.phi == b.phi and a.gamma == b.gamma

    def test_correlated_coordinates_trigger_regularization(self):
        rng = np.random.default_rng(52)
        base = rng.standard_normal(1000)
        x = np.stack([base, base, base], axis=1)
        p = fit_mggd(x)
        assert p.regularized
        assert np.all(np.isfinite(p.scatter))

    def test_all_zero_degenerate_path(self):
        p = fit_mggd(np.zeros((500, 3)))
        assert p.regularized
        assert p.gamma == 0.0
        np.testing.assert_array_equal(p.scatter, np.eye(3))

    def test_too_few_vectors(self):
        with pytest.raises(ValueError):
            fit_mggd(np.ones((50, 3)))


def _reference_dct2(block):
    """Independent type-II orthonormal DCT via the explicit cosine matrix."""
    n = block.shape[0]
    mat = np.zeros((n, n))
    for k in range(n):
        for i in range(n):
            mat[k, i] = np.cos(np.pi * (2 * i + 1) * k / (2 * n))
    mat *= np.sqrt(2.0 / n)
    mat[0] /= np.sqrt(2.0)
    return mat @ block @ mat.T


def _reference_whole_entropy(image, block=8):
    values = []
    for bx in range(image.shape[0] // block):
        for by in range(image.shape[1] // block):
            tile = image[bx * block:(bx + 1) * block, by * block:(by + 1) * block]
            coeffs = _reference_dct2(tile)
            mags = np.abs(coeffs).ravel()[1:]  # first position is DC
            # note: ravel order differs from the AC mask order, entropy is
            # permutation invariant
            total = mags.sum()
            if total == 0:
                values.append(0.0)
                continue
            p = mags / total
            p = p[p > 0]
            values.append(float(-(p * np.log(p)).sum()))
    return float(np.mean(values))


class TestDctEntropy:
    def test_constant_image_all_zero(self):
        feats = dct_entropy(np.full((32, 32), 0.5))
        assert feats.whole == 0.0
        assert not feats.bands.any()
        assert not feats.orients.any()

    def test_single_cosine_is_point_mass(self):
        i = np.arange(8)
        wave = np.cos(np.pi * (2 * i + 1) * 2 / 16)
        block = np.outer(wave, np.ones(8))
        feats = dct_entropy(block)
        assert feats.whole == pytest.approx(0.0, abs=1e-9)
        assert min(feats.bands) == pytest.approx(0.0, abs=1e-9)

    def test_uniform_noise_matches_brute_force(self):
        rng = np.random.default_rng(53)
        img = rng.random((64, 64))
        feats = dct_entropy(img)
        assert feats.whole == pytest.approx(_reference_whole_entropy(img), abs=0.1)

    def test_dc_shift_invariance(self):
        rng = np.random.default_rng(54)
        img = rng.random((32, 32))
        a = dct_entropy(img)
        b = dct_entropy(img + 7.0)
        assert a.whole == pytest.approx(b.whole, abs=1e-9)
        np.testing.assert_allclose(a.bands, b.bands, atol=1e-9)

    def test_entropy_bounds(self):
        rng = np.random.default_rng(55)
        feats = dct_entropy(rng.random((48, 40)))
        assert 0 <= feats.whole <= np.log(63)
        assert np.all(feats.bands >= 0) and np.all(feats.bands <= np.log(63))

    def test_too_small(self):
        with pytest.raises(ValueError):
            dct_entropy(np.zeros((4, 4)))


class TestPcscFeatures:
    def test_layout_length(self):
        rng = np.random.default_rng(56)
        pcs = [rng.random((24, 24)) for _ in range(3)]
        assert pcsc_features(pcs).shape == (38,)

    def test_bitwise_deterministic(self):
        rng = np.random.default_rng(57)
        pcs = [rng.random((24, 24)) for _ in range(3)]
        np.testing.assert_array_equal(pcsc_features(pcs), pcsc_features(pcs))

    def test_constant_inputs_take_degenerate_paths(self):
        pcs = [np.full((24, 24), 0.3)] * 3
        feats = pcsc_features(pcs)
        assert np.all(np.isfinite(feats))
        # per channel: alpha from the grid edge, zero scales, zero entropies
        for c in range(3):
            alpha, sl, sr, eta = feats[11 * c:11 * c + 4]
            assert (alpha, sl, sr, eta) == (0.2, 0.0, 0.0, 0.0)
            assert not feats[11 * c + 4:11 * c + 11].any()

    def test_mismatched_sizes_rejected(self):
        with pytest.raises(ValueError):
            pcsc_features([np.zeros((16, 16)), np.zeros((16, 16)), np.zeros((8, 8))])
