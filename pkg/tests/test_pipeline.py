"""End-to-end pipeline tests: config validation, exact recovery on clean
low-rank cubes, denoising gain under noise, solver equivalence, thread
determinism, and consistency of the attached variance cube.

The no-overlap oracle rebuilds the expected output from scratch with
numpy.linalg.svd so the pipeline's window plumbing is checked against an
implementation that shares no code with it.
"""

import numpy as np
import pytest

from lrma_uq import (
    CorrelationRule,
    HsiCube,
    PipelineConfig,
    WindowConfig,
    add_gaussian,
    denoise,
    denoise_with_uq,
    synth_lowrank_cube,
)


def small_config(**overrides) -> PipelineConfig:
    """A pipeline config sized for little test cubes."""
    window = overrides.pop("window", WindowConfig(patch_side=6, step=3, rank=3))
    return PipelineConfig(window=window, **overrides)


def rmse(a: HsiCube, b: HsiCube) -> float:
    return float(np.sqrt(np.mean((a.data - b.data) ** 2)))


class TestPipelineConfig:
    def test_defaults(self):
        cfg = PipelineConfig()
        assert cfg.window == WindowConfig()
        assert cfg.sigma0 == 0.0
        assert cfg.correlation == CorrelationRule()
        assert cfg.solver == "godec"
        assert cfg.max_iter == 100
        assert cfg.tol == 1e-7
        assert cfg.threads == 1

    @pytest.mark.parametrize(
        "kwargs, fragment",
        [
            ({"solver": "pca"}, "solver"),
            ({"sigma0": -0.1}, "sigma0"),
            ({"max_iter": 0}, "max_iter"),
            ({"tol": 0.0}, "tol"),
            ({"threads": 0}, "threads"),
        ],
    )
    def test_rejects_bad_values(self, kwargs, fragment):
        with pytest.raises(ValueError, match=fragment):
            PipelineConfig(**kwargs)


class TestDenoise:
    def test_clean_lowrank_cube_is_recovered_exactly(self):
        # Every window of the synthetic cube has rank <= 3, so a rank-3
        # fit reproduces each patch and overlap averaging changes nothing.
        clean = synth_lowrank_cube((12, 12, 8), true_rank=3, seed=5)
        out = denoise(clean, small_config())
        np.testing.assert_allclose(out.data, clean.data, atol=1e-8)

    def test_clamped_grid_covers_whole_cube(self):
        # Dims that are not multiples of the step force clamped final
        # origins; the averaged output must still be finite everywhere
        # and exact on a clean low-rank cube.
        clean = synth_lowrank_cube((11, 10, 6), true_rank=2, seed=7)
        cfg = small_config(window=WindowConfig(patch_side=4, step=3, rank=2))
        out = denoise(clean, cfg)
        assert np.isfinite(out.data).all()
        np.testing.assert_allclose(out.data, clean.data, atol=1e-8)

    def test_denoising_reduces_rmse(self):
        clean = synth_lowrank_cube((24, 24, 12), true_rank=2, seed=11)
        noisy = add_gaussian(clean, 0.05, seed=11)
        cfg = small_config(window=WindowConfig(patch_side=8, step=4, rank=4))
        out = denoise(noisy, cfg)
        # A rank-4 fit on 12 bands keeps about 40% of the noise energy
        # (rank/pixels + rank/bands), so expect a solid but not dramatic cut.
        assert rmse(out, clean) < 0.75 * rmse(noisy, clean)

    def test_no_overlap_matches_numpy_svd_oracle(self):
        # step == patch_side tiles the cube exactly, so the output is just
        # each window's rank-r SVD approximation written in place. Rebuild
        # that from scratch with numpy.linalg.svd.
        rng = np.random.default_rng(21)
        clean = synth_lowrank_cube((12, 12, 7), true_rank=4, seed=21)
        noisy = HsiCube(clean.data + 0.03 * rng.standard_normal(clean.dims))
        side, rank = 6, 2
        cfg = small_config(window=WindowConfig(patch_side=side, step=side, rank=rank))
        out = denoise(noisy, cfg)

        expected = np.empty_like(noisy.data)
        for r0 in range(0, 12, side):
            for c0 in range(0, 12, side):
                block = noisy.data[r0:r0 + side, c0:c0 + side, :]
                mat = block.reshape(side * side, 7)
                u, s, vt = np.linalg.svd(mat, full_matrices=False)
                approx = (u[:, :rank] * s[:rank]) @ vt[:rank]
                expected[r0:r0 + side, c0:c0 + side, :] = approx.reshape(side, side, 7)
        np.testing.assert_allclose(out.data, expected, atol=1e-12)

    def test_tsvd_solver_matches_godec_without_sparse_budget(self):
        clean = synth_lowrank_cube((12, 12, 6), true_rank=2, seed=3)
        noisy = add_gaussian(clean, 0.04, seed=3)
        a = denoise(noisy, small_config(solver="godec"))
        b = denoise(noisy, small_config(solver="tsvd"))
        np.testing.assert_array_equal(a.data, b.data)

    def test_sparse_budget_absorbs_impulses(self):
        # A solver with a sparse budget should beat the plain truncated
        # SVD once isolated extreme outliers are present.
        clean = synth_lowrank_cube((12, 12, 8), true_rank=2, seed=9)
        corrupted = clean.data.copy()
        rng = np.random.default_rng(9)
        flat = rng.choice(corrupted.size, size=20, replace=False)
        corrupted.ravel()[flat] = rng.integers(0, 2, size=20).astype(np.float64)
        noisy = HsiCube(corrupted)

        window = WindowConfig(patch_side=6, step=3, rank=2, sparse_card=30)
        robust = denoise(noisy, small_config(window=window))
        plain = denoise(noisy, small_config(solver="tsvd"))
        assert rmse(robust, clean) < rmse(plain, clean)


class TestThreadDeterminism:
    def test_thread_count_never_changes_output(self):
        clean = synth_lowrank_cube((14, 13, 6), true_rank=2, seed=13)
        noisy = add_gaussian(clean, 0.05, seed=13)
        window = WindowConfig(patch_side=5, step=3, rank=3)
        outputs = []
        for threads in (1, 2, 8):
            cfg = small_config(window=window, sigma0=0.05, threads=threads)
            den, var = denoise_with_uq(noisy, cfg)
            outputs.append((den.data, var.data))
        for den, var in outputs[1:]:
            np.testing.assert_array_equal(den, outputs[0][0])
            np.testing.assert_array_equal(var, outputs[0][1])


class TestDenoiseWithUq:
    def test_denoised_cube_matches_plain_denoise(self):
        clean = synth_lowrank_cube((12, 12, 6), true_rank=2, seed=17)
        noisy = add_gaussian(clean, 0.05, seed=17)
        cfg = small_config(sigma0=0.05)
        den_only = denoise(noisy, cfg)
        den, _ = denoise_with_uq(noisy, cfg)
        np.testing.assert_array_equal(den.data, den_only.data)

    def test_variance_zero_without_noise_level(self):
        clean = synth_lowrank_cube((12, 12, 6), true_rank=2, seed=19)
        _, var = denoise_with_uq(clean, small_config(sigma0=0.0))
        np.testing.assert_array_equal(var.data, np.zeros(clean.dims))

    def test_variance_positive_and_scales_with_sigma0_squared(self):
        clean = synth_lowrank_cube((12, 12, 6), true_rank=2, seed=23)
        noisy = add_gaussian(clean, 0.05, seed=23)
        _, var1 = denoise_with_uq(noisy, small_config(sigma0=0.05))
        _, var2 = denoise_with_uq(noisy, small_config(sigma0=0.10))
        assert (var1.data >= 0).all()
        assert var1.data.mean() > 0
        # Same fit factors, doubled noise std: variances scale by 4 exactly.
        np.testing.assert_allclose(var2.data, 4.0 * var1.data, rtol=1e-12)

    def test_correlation_modes_are_ordered(self):
        # Cross terms are nonnegative, and the assumed window-pair
        # correlation grows from 0 (independent) through the shared-area
        # ratio to 1 (full), so the variance cubes must be ordered.
        clean = synth_lowrank_cube((12, 12, 6), true_rank=2, seed=29)
        noisy = add_gaussian(clean, 0.05, seed=29)
        cubes = {}
        for mode in ("independent", "overlap", "full"):
            cfg = small_config(sigma0=0.05, correlation=CorrelationRule(mode))
            cubes[mode] = denoise_with_uq(noisy, cfg)[1].data
        tiny = 1e-15
        assert (cubes["independent"] <= cubes["overlap"] + tiny).all()
        assert (cubes["overlap"] <= cubes["full"] + tiny).all()
        assert cubes["overlap"].mean() > cubes["independent"].mean()

    def test_variance_matches_per_window_leverage_oracle(self):
        # Independent mode on a non-overlapping tiling: each voxel's
        # variance is exactly sigma0^2 * (row leverage + column leverage)
        # of its own window, both recomputed here with numpy.linalg.svd.
        rng = np.random.default_rng(31)
        noisy = HsiCube(rng.uniform(0.1, 0.9, size=(8, 8, 5)))
        side, rank, s0 = 4, 2, 0.07
        cfg = PipelineConfig(
            window=WindowConfig(patch_side=side, step=side, rank=rank),
            sigma0=s0,
            correlation=CorrelationRule("independent"),
        )
        _, var = denoise_with_uq(noisy, cfg)

        expected = np.empty_like(noisy.data)
        for r0 in range(0, 8, side):
            for c0 in range(0, 8, side):
                mat = noisy.data[r0:r0 + side, c0:c0 + side, :].reshape(side * side, 5)
                u, _, vt = np.linalg.svd(mat, full_matrices=False)
                row_lev = (u[:, :rank] ** 2).sum(axis=1)
                col_lev = (vt[:rank] ** 2).sum(axis=0)
                block = s0 * s0 * (row_lev[:, None] + col_lev[None, :])
                expected[r0:r0 + side, c0:c0 + side, :] = block.reshape(side, side, 5)
        np.testing.assert_allclose(var.data, expected, atol=1e-12)
