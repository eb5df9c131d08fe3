import numpy as np
import pytest

from models.group_sparse import GenModelParams, generate, patterns_from_codes
from models.recursive import REGIME_WIDE, RecursiveGenParams, build_recursive_generator
from sensing.decoders import (
    FAMILY_LS,
    FAMILY_SIGNED,
    ExhaustiveDecoder,
    LatentDecoder,
    ZeroDecoder,
    decode_exhaustive,
)
from sensing.measurement import MATRIX_FIXED, SensingConfig, append_zero_rows, observe, sample_matrix
from utils.rng import Purpose, substream
from utils.validation import EnumerationCapError, InvalidInputError


class TestMeasurement:
    def test_sigma2(self):
        assert SensingConfig(m=4, n=8, alpha=2.0).sigma2 == 0.5

    def test_matrix_is_reproducible(self):
        cfg = SensingConfig(m=6, n=10, alpha=1.0, seed=11)
        assert np.array_equal(sample_matrix(cfg), sample_matrix(cfg))
        assert not np.array_equal(sample_matrix(cfg, draw=0), sample_matrix(cfg, draw=1))
        other = SensingConfig(m=6, n=10, alpha=1.0, seed=12)
        assert not np.array_equal(sample_matrix(cfg), sample_matrix(other))

    def test_gaussian_entry_scale(self):
        cfg = SensingConfig(m=50, n=400, alpha=1.0, seed=3)
        A = sample_matrix(cfg)
        assert A.shape == (50, 400)
        assert abs(np.mean(A)) < 0.01
        assert np.mean(A * A) * 50 == pytest.approx(1.0, abs=0.05)

    def test_frobenius_normalization(self):
        cfg = SensingConfig(m=5, n=20, alpha=1.0, normalize_frobenius=20.0)
        assert np.sum(sample_matrix(cfg) ** 2) == pytest.approx(20.0)

    def test_fixed_matrix(self):
        A = np.arange(6.0).reshape(2, 3)
        cfg = SensingConfig(m=2, n=3, alpha=0.0, matrix_mode=MATRIX_FIXED, matrix=A)
        assert np.array_equal(sample_matrix(cfg), A)

    def test_fixed_matrix_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            SensingConfig(m=3, n=3, alpha=0.0, matrix_mode=MATRIX_FIXED, matrix=np.eye(2))

    @pytest.mark.parametrize("kwargs", [
        dict(m=0, n=4, alpha=1.0),
        dict(m=2, n=4, alpha=-1.0),
        dict(m=2, n=4, alpha=1.0, matrix_mode="bernoulli"),
        dict(m=2, n=4, alpha=1.0, normalize_frobenius=0.0),
    ])
    def test_rejects_bad_config(self, kwargs):
        with pytest.raises(InvalidInputError):
            SensingConfig(**kwargs)

    def test_noiseless_observation(self, rng):
        A = rng.standard_normal((4, 6))
        x = rng.standard_normal(6)
        assert np.array_equal(observe(A, x, 0.0, rng), A @ x)

    def test_noise_variance(self):
        m = 10000
        y = observe(np.zeros((m, 2)), np.zeros(2), 0.25 * m, substream(5, Purpose.NOISE, 0))
        assert np.std(y) == pytest.approx(0.5, abs=0.02)

    def test_observe_rejects_wrong_length(self, rng):
        with pytest.raises(InvalidInputError):
            observe(np.eye(3), np.zeros(4), 1.0, rng)

    def test_append_zero_rows(self):
        A = append_zero_rows(np.ones((2, 3)), 2)
        assert A.shape == (4, 3)
        assert np.array_equal(A[2:], np.zeros((2, 3)))
        with pytest.raises(InvalidInputError):
            append_zero_rows(np.ones((2, 3)), -1)


class TestExhaustive:
    def test_recovers_noiseless_member(self, rng):
        n, k, xi = 8, 2, 0.7
        A = rng.standard_normal((6, n))
        for code in (0, 17, 63):
            x = xi * patterns_from_codes(np.array([code]), n, k)[0]
            assert np.array_equal(decode_exhaustive(A @ x, A, k, xi=xi), x)

    def test_ties_break_to_smallest_code(self):
        x_hat = decode_exhaustive(np.zeros(3), np.zeros((3, 8)), 2, xi=1.0)
        assert np.array_equal(x_hat, [1, 0, 0, 0, 1, 0, 0, 0])

    def test_zero_rows_do_not_change_decision(self, rng):
        n, k = 8, 2
        A = rng.standard_normal((3, n))
        y = rng.standard_normal(3)
        base = decode_exhaustive(y, A, k)
        padded = decode_exhaustive(np.concatenate([y, np.zeros(4)]), append_zero_rows(A, 4), k)
        assert np.array_equal(base, padded)

    def test_least_squares_family(self, rng):
        n, k = 9, 3
        A = rng.standard_normal((9, n))
        x = np.zeros(n)
        x[[2, 3, 7]] = [0.4, -0.9, 0.25]
        x_hat = decode_exhaustive(A @ x, A, k, family=FAMILY_LS, x_max=1.0)
        assert np.allclose(x_hat, x, atol=1e-6)

    def test_least_squares_recovers_empty_blocks(self, rng):
        A = rng.standard_normal((8, 8))
        x = np.zeros(8)
        x[5] = -0.5
        assert np.allclose(decode_exhaustive(A @ x, A, 2, family=FAMILY_LS), x, atol=1e-6)

    def test_cap(self):
        decoder = ExhaustiveDecoder(k=2, cap=10)
        with pytest.raises(EnumerationCapError):
            decoder.decode(np.zeros(2), np.zeros((2, 8)))

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            decode_exhaustive(np.zeros(3), np.zeros((2, 8)), 2)

    def test_decoder_names(self):
        assert ExhaustiveDecoder(k=1).name == "exhaustive_signed"
        assert ExhaustiveDecoder(k=1, family=FAMILY_LS).name == "exhaustive_ls"
        assert ZeroDecoder.name == "zero"
        with pytest.raises(InvalidInputError):
            ExhaustiveDecoder(k=1, family="lasso")

    def test_zero_decoder(self):
        assert np.array_equal(ZeroDecoder().decode(np.ones(3), np.ones((3, 5))), np.zeros(5))

    def test_families_agree_on_signed_members(self, rng):
        n, k = 6, 2
        A = rng.standard_normal((6, n))
        x = patterns_from_codes(np.array([7]), n, k)[0]
        signed = ExhaustiveDecoder(k, FAMILY_SIGNED).decode(A @ x, A)
        ls = ExhaustiveDecoder(k, FAMILY_LS).decode(A @ x, A)
        assert np.allclose(signed, ls, atol=1e-6)


class TestLatent:
    def test_group_sparse_range(self):
        params = GenModelParams(n=8, k=2, r=1.0, x_max=1.0)
        x_star = generate(params, [-0.3, 0.3])
        fit = LatentDecoder.for_group_sparse(params).fit(x_star, np.eye(8))
        assert np.allclose(fit.x, x_star, atol=1e-6)
        assert fit.residual <= fit.grid_residual
        assert np.max(np.abs(fit.z)) <= 1.0

    def test_recursive_midpoints(self):
        p = RecursiveGenParams(k=1, k0=2, n0=4, xi=1.0)
        x_star = p.ideal([p.midpoints()[5]])
        A = np.eye(4)
        ideal = LatentDecoder.for_recursive(p).decode(A @ x_star, A)
        assert np.array_equal(ideal, x_star)

        net = build_recursive_generator(p, REGIME_WIDE)
        fit = LatentDecoder.for_recursive(p, net).fit(A @ x_star, A)
        assert np.allclose(fit.x, x_star, atol=1e-9)
        assert fit.z[0] == pytest.approx(p.midpoints()[5])

    def test_needs_a_grid(self):
        decoder = LatentDecoder(lambda Z: Z, k=1, lo=0.0, hi=1.0)
        with pytest.raises(InvalidInputError):
            decoder.decode(np.zeros(1), np.eye(1))

    def test_grid_cap(self, monkeypatch):
        monkeypatch.setenv("GENSENSE_ENUM_CAP", "100")
        params = GenModelParams(n=8, k=2, r=1.0, x_max=1.0)
        with pytest.raises(EnumerationCapError):
            LatentDecoder.for_group_sparse(params, grid_per_dim=64).decode(np.zeros(8), np.eye(8))
