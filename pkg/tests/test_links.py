"""Per-unit link bundles: block draws, channel statistics, sampled kernels."""

import dataclasses
import math

import numpy as np
import pytest

from lis_uplink import (
    BlockKernel,
    LinkWorld,
    block_rng,
    build_unit_geometry,
    cgauss,
    draw_unit_block,
    interference_power,
    make_unit_stats,
    placement_rng,
    sample_unit_channels,
    slice_stats,
    synthesize_error_direct,
    unit_block_terms,
)
from lis_uplink.estimation import ChannelEstimate
from lis_uplink.links import stream

from conftest import assert_close


class TestStreams:
    def test_addressed_streams_are_reproducible(self):
        a = stream(7, 1, 2, 3).random(4)
        b = stream(7, 1, 2, 3).random(4)
        assert np.array_equal(a, b)

    def test_distinct_addresses_decorrelate(self):
        a = stream(7, 1, 2, 3).random(4)
        b = stream(7, 1, 2, 4).random(4)
        c = stream(8, 1, 2, 3).random(4)
        assert not np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_domain_separation(self):
        p = placement_rng(0, 0).random(4)
        b = block_rng(0, 0, 0, 0, 0).random(4)
        assert not np.array_equal(p, b)


class TestBlockDraw:
    def test_shapes(self):
        draw = draw_unit_block(np.random.default_rng(0), N=2, K=3, P=4, M=16)
        assert draw.coins.shape == (2, 3)
        assert draw.angles.shape == (2, 3, 4, 2)
        assert draw.g.shape == (2, 3, 4)
        assert draw.w.shape == (16,)

    def test_m_independent_prefix_keeps_sweeps_paired(self):
        # only the noise vector depends on M; gates, angles, and fading are
        # identical draws across an M sweep at the same address
        a = draw_unit_block(np.random.default_rng(5), N=2, K=2, P=3, M=16)
        b = draw_unit_block(np.random.default_rng(5), N=2, K=2, P=3, M=400)
        assert np.array_equal(a.coins, b.coins)
        assert np.array_equal(a.angles, b.angles)
        assert np.array_equal(a.g, b.g)
        assert a.w.shape != b.w.shape

    def test_supplied_coins_skip_the_gate_draw(self):
        coins = np.full((2, 2), 0.5)
        got = draw_unit_block(np.random.default_rng(9), N=2, K=2, P=3, M=4, coins=coins)
        rng = np.random.default_rng(9)
        angles = rng.uniform(-np.pi / 2.0, np.pi / 2.0, size=(2, 2, 3, 2))
        g = cgauss(rng, (2, 2, 3))
        w = cgauss(rng, (4,))
        assert np.array_equal(got.coins, coins)
        assert np.array_equal(got.angles, angles)
        assert np.array_equal(got.g, g)
        assert np.array_equal(got.w, w)


class TestUnitStats:
    def test_serving_link_is_pure_los(self, tiny_world):
        cfg = tiny_world.config
        geom = tiny_world.unit(0, 1)
        draw = draw_unit_block(np.random.default_rng(1), cfg.N, cfg.K, cfg.P, cfg.M)
        stats = make_unit_stats(geom, draw, cfg)
        assert stats.kappa[0, 1] == np.inf
        assert stats.los_scale[0, 1] == 1.0
        assert stats.nlos_scale[0, 1] == 0.0
        assert np.array_equal(stats.hbar[0, 1], geom.hlos[0, 1])

    def test_gating_applies_candidate_kappa(self, tiny_world):
        cfg = tiny_world.config
        geom = tiny_world.unit(0, 0)
        draw = draw_unit_block(np.random.default_rng(2), cfg.N, cfg.K, cfg.P, cfg.M)
        forced = dataclasses.replace(draw, coins=np.zeros((cfg.N, cfg.K)))
        stats = make_unit_stats(geom, forced, cfg)
        expect = geom.kappa_cand.copy()
        expect[0, 0] = np.inf
        assert np.array_equal(stats.kappa, expect)
        blocked = dataclasses.replace(draw, coins=np.ones((cfg.N, cfg.K)))
        stats0 = make_unit_stats(geom, blocked, cfg)
        off = stats0.kappa.copy()
        off[0, 0] = 0.0
        assert np.all(off == 0.0)

    def test_nlos_inter_regime_zeroes_other_panels_only(self, tiny_world):
        cfg = tiny_world.config
        geom = tiny_world.unit(0, 0)
        draw = draw_unit_block(np.random.default_rng(3), cfg.N, cfg.K, cfg.P, cfg.M)
        forced = dataclasses.replace(draw, coins=np.zeros((cfg.N, cfg.K)))
        stats = make_unit_stats(geom, forced, cfg, interference="nlos_inter")
        assert np.all(stats.kappa[1] == 0.0)
        assert stats.kappa[0, 1] == geom.kappa_cand[0, 1]
        assert stats.kappa[0, 0] == np.inf
        with pytest.raises(ValueError, match="regime"):
            make_unit_stats(geom, draw, cfg, interference="bogus")

    def test_sampling_respects_mixing(self, tiny_world):
        cfg = tiny_world.config
        geom = tiny_world.unit(0, 0)
        draw = draw_unit_block(np.random.default_rng(4), cfg.N, cfg.K, cfg.P, cfg.M)
        stats = make_unit_stats(geom, draw, cfg)
        ch = sample_unit_channels(stats, draw.g)
        assert np.array_equal(ch[0, 0], geom.hlos[0, 0])  # serving slot exact
        scattered = np.einsum("ljmp,ljp->ljm", stats.roots, draw.g)
        manual = stats.hbar + stats.nlos_scale[:, :, np.newaxis] * scattered
        assert np.array_equal(ch, manual)


class TestSliceStats:
    def test_prefix_views_match_smaller_world(self, tiny_cfg, tiny_world):
        cfg, dep = tiny_world.config, tiny_world.deployment
        geom4 = tiny_world.unit(0, 0)
        draw = draw_unit_block(np.random.default_rng(6), cfg.N, cfg.K, cfg.P, cfg.M)
        stats4 = make_unit_stats(geom4, draw, cfg)
        sliced = slice_stats(stats4, 1)

        small = dep.subset(1)
        geom1 = build_unit_geometry(small, cfg, 0, 0)
        draw1 = dataclasses.replace(
            draw, coins=draw.coins[:, :1], angles=draw.angles[:, :1], g=draw.g[:, :1]
        )
        stats1 = make_unit_stats(geom1, draw1, cfg)

        assert np.allclose(sliced.hbar, stats1.hbar, rtol=1e-15, atol=0)
        assert np.allclose(sliced.roots, stats1.roots, rtol=1e-15, atol=0)
        assert np.array_equal(sliced.kappa, stats1.kappa)
        t1 = unit_block_terms(sliced, draw1, 2, tiny_world.rho_p[:, :1], tiny_world.rho_d[:, :1])
        t2 = unit_block_terms(stats1, draw1, 2, tiny_world.rho_p[:, :1], tiny_world.rho_d[:, :1])
        assert_close(t1.I, t2.I, rtol=1e-12)
        assert_close(t1.gamma, t2.gamma, rtol=1e-12)

    def test_inactive_pilot_index_rejected(self, tiny_world):
        cfg = tiny_world.config
        geom = tiny_world.unit(0, 1)
        draw = draw_unit_block(np.random.default_rng(7), cfg.N, cfg.K, cfg.P, cfg.M)
        stats = make_unit_stats(geom, draw, cfg)
        with pytest.raises(ValueError, match="pilot index"):
            slice_stats(stats, 1)


class TestBlockKernel:
    @pytest.mark.parametrize("t", [2, 8, 100])
    def test_kernel_matches_direct_evaluation(self, tiny_world, t):
        cfg, dep = tiny_world.config, tiny_world.deployment
        n, k = 0, 0
        geom = tiny_world.unit(n, k)
        draw = draw_unit_block(np.random.default_rng(8), cfg.N, cfg.K, cfg.P, cfg.M)
        stats = make_unit_stats(geom, draw, cfg)
        terms = unit_block_terms(stats, draw, t, tiny_world.rho_p, tiny_world.rho_d)

        channels = sample_unit_channels(stats, draw.g)
        ratios = tiny_world.rho_p[:, k] / tiny_world.rho_p[n, k]
        contams = np.delete(channels[:, k], n, axis=0)
        e = synthesize_error_direct(
            contams, np.delete(ratios, n), t, tiny_world.rho_p[n, k], noise=draw.w
        )
        est = ChannelEstimate(estimate=geom.hlos[n, k] + e, error=e, h_los=geom.hlos[n, k])
        bd = interference_power(est, channels, tiny_world.rho_d, n, k)

        assert_close(terms.X, bd.X, rtol=1e-10)
        assert_close(terms.Z, bd.Z, rtol=1e-10)
        assert_close(terms.I, bd.I, rtol=1e-10)
        assert_close(terms.signal, bd.S, rtol=1e-12)
        assert_close(
            terms.gamma, tiny_world.rho_d[n, k] * bd.S / bd.I, rtol=1e-10
        )
        # leakage grid: serving slot zeroed, rest matches the breakdown
        assert terms.Y[n, k] == 0.0
        assert_close(np.delete(terms.Y[n], k), bd.Y_intra, rtol=1e-10)
        assert_close(np.delete(terms.Y, n, axis=0).ravel(), bd.Y_inter, rtol=1e-10)

    def test_perfect_csi_terms(self, tiny_world):
        cfg = tiny_world.config
        n, k = 1, 0
        geom = tiny_world.unit(n, k)
        draw = draw_unit_block(np.random.default_rng(10), cfg.N, cfg.K, cfg.P, cfg.M)
        stats = make_unit_stats(geom, draw, cfg)
        terms = unit_block_terms(stats, draw, 2, tiny_world.rho_p, tiny_world.rho_d)

        channels = sample_unit_channels(stats, draw.g)
        est = ChannelEstimate(
            estimate=geom.hlos[n, k], error=np.zeros(cfg.M, complex), h_los=geom.hlos[n, k]
        )
        bd = interference_power(est, channels, tiny_world.rho_d, n, k)
        assert_close(terms.I_perfect, bd.I, rtol=1e-10)
        assert_close(
            terms.gamma_perfect, tiny_world.rho_d[n, k] * bd.S / bd.I, rtol=1e-10
        )

    def test_kernel_reuse_across_pilot_lengths(self, tiny_world):
        cfg = tiny_world.config
        geom = tiny_world.unit(0, 0)
        draw = draw_unit_block(np.random.default_rng(11), cfg.N, cfg.K, cfg.P, cfg.M)
        stats = make_unit_stats(geom, draw, cfg)
        kernel = BlockKernel(stats, draw.g, draw.w, tiny_world.rho_p, tiny_world.rho_d)
        for t in (2, 16, 64):
            fresh = unit_block_terms(stats, draw, t, tiny_world.rho_p, tiny_world.rho_d)
            reused = kernel.terms(t)
            assert reused.I == fresh.I
            assert reused.gamma == fresh.gamma

    def test_noise_term_shrinks_with_t(self, tiny_world):
        cfg = tiny_world.config
        geom = tiny_world.unit(0, 0)
        draw = draw_unit_block(np.random.default_rng(12), cfg.N, cfg.K, cfg.P, cfg.M)
        stats = make_unit_stats(geom, draw, cfg)
        kernel = BlockKernel(stats, draw.g, draw.w, tiny_world.rho_p, tiny_world.rho_d)
        z = [kernel.terms(t).Z for t in (2, 8, 32, 128, 10**9)]
        # Z converges to the noise-free filter norm as training energy grows
        assert_close(z[-1], kernel.u_norm2, rtol=1e-4)
        gaps = np.abs(np.asarray(z) - kernel.u_norm2)
        assert gaps[0] > gaps[1] > gaps[2] > gaps[3]


class TestLinkWorld:
    def test_unit_cache_returns_same_object(self, tiny_world):
        assert tiny_world.unit(0, 0) is tiny_world.unit(0, 0)

    def test_power_control_grids(self, tiny_world):
        assert tiny_world.rho_p.shape == (2, 2)
        assert np.all(tiny_world.rho_p > 0)
        assert_close(tiny_world.rho_d / tiny_world.rho_p, np.full((2, 2), 10**0.3))

    def test_own_power_matches_geometry(self, tiny_world):
        geom = tiny_world.unit(1, 1)
        assert_close(geom.own_power, geom.beta2_sum[1, 1], rtol=0, atol=0)
        assert geom.own_power > 0
