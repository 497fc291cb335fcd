"""Pilot-length search, floor tables, device-count scheduling, network NSE."""

import dataclasses
import json
import math

import numpy as np
import pytest

from lis_uplink import (
    LayoutConfig,
    LinkWorld,
    SystemConfig,
    build_moment_set,
    corollary1_t,
    draw_unit_block,
    expected_floor_table,
    make_unit_stats,
    network_nse,
    nse_of_gammas,
    optimal_num_devices,
    optimal_pilot_length,
    place_devices,
    theorem1_sse,
)

from conftest import assert_close


def _panel_moment_sets(seed, M=16, K=3, N=2, P=4, d_x=0.5, t=None):
    cfg = SystemConfig(M=M, K=K, N=N, T=500, P=P, seed=seed)
    dep = place_devices(cfg, LayoutConfig(name="line", d_x=d_x), np.random.default_rng(seed))
    world = LinkWorld(dep, cfg)
    t = t if t is not None else cfg.pilot_len
    sets = []
    for k in range(K):
        draw = draw_unit_block(np.random.default_rng(seed * 101 + k), N, K, P, M)
        stats = make_unit_stats(world.unit(0, k), draw, cfg)
        sets.append(
            build_moment_set(
                stats, t, world.rho_p, world.rho_d,
                z_own=dep.devices_local[0, k, 2], L=cfg.L,
            )
        )
    return sets


class TestOptimalPilotLength:
    def test_constant_objective_collapses_to_k(self):
        sol = optimal_pilot_length(lambda t: 1.0, T=200, K=5)
        assert sol.t_opt == 5

    def test_bounds_and_refinement_invariant(self):
        sets = _panel_moment_sets(seed=1)
        T, K = 200, 3
        sol = optimal_pilot_length(sets, T=T, K=K)
        assert K <= sol.t_opt <= T
        obj = lambda t: theorem1_sse(sets, t, T).sse_bar
        for t in {K, T, math.floor(sol.t_opt_continuous), math.ceil(sol.t_opt_continuous)}:
            assert sol.objective_opt >= obj(t) - 1e-9

    @pytest.mark.parametrize("seed", range(20))
    def test_grid_search_oracle(self, seed):
        rng = np.random.default_rng(1000 + seed)
        K = int(rng.integers(2, 5))
        T = int(rng.integers(30, 90))
        sets = _panel_moment_sets(seed=seed + 1, K=K)
        obj = lambda t: theorem1_sse(sets, t, T).sse_bar
        sol = optimal_pilot_length(sets, T=T, K=K)
        grid_best = max(obj(t) for t in range(K, T + 1))
        assert sol.objective_opt >= grid_best - 1e-9
        assert abs(sol.objective_opt - grid_best) <= 1e-9 * max(grid_best, 1.0)

    @pytest.mark.parametrize("seed", [3, 11, 29])
    def test_integer_objective_is_unimodal(self, seed):
        sets = _panel_moment_sets(seed=seed)
        T, K = 80, 3
        vals = [theorem1_sse(sets, t, T).sse_bar for t in range(K, T + 1)]
        rises_after_fall = 0
        falling = False
        for a, b in zip(vals, vals[1:]):
            if b < a - 1e-9:
                falling = True
            elif b > a + 1e-9 and falling:
                rises_after_fall += 1
        assert rises_after_fall == 0

    def test_callable_objective_and_trace(self):
        sol = optimal_pilot_length(lambda t: -((t - 37.3) ** 2), T=100, K=2)
        assert sol.t_opt == 37
        trace = json.loads(sol.trace_json())
        assert trace["t_opt"] == 37
        assert trace["iterations"] == sol.iterations
        assert len(trace["evaluations"]) == len(sol.curve)

    def test_errors(self):
        with pytest.raises(ValueError, match="K <= T"):
            optimal_pilot_length(lambda t: 1.0, T=2, K=5)
        with pytest.raises(ValueError, match="at least one"):
            optimal_pilot_length([], T=10, K=2)
        with pytest.raises(ValueError, match="not finite"):
            optimal_pilot_length(lambda t: math.inf, T=10, K=2)


class TestCorollary:
    def test_frozen_values(self):
        assert corollary1_t(20) == 20
        assert corollary1_t(1) == 1
        assert corollary1_t(20, T=500) == 20

    def test_degenerate_boundary_warns(self):
        with pytest.warns(UserWarning, match="degenerate"):
            assert corollary1_t(50, T=50) == 50

    def test_invalid_k(self):
        with pytest.raises(ValueError, match="K >= 1"):
            corollary1_t(0)


class TestExpectedFloorTable:
    def _world(self, seed=0, N=2, K=4, d_x=0.5):
        cfg = SystemConfig(M=16, K=K, N=N, T=500, P=4, seed=seed)
        dep = place_devices(cfg, LayoutConfig(name="line", d_x=d_x), np.random.default_rng(seed))
        return cfg, dep

    def test_cumulative_structure(self):
        cfg, dep = self._world()
        table = expected_floor_table(dep, cfg)
        assert table.pool == 4
        assert np.all(table.leak >= -1e-12)
        for K in range(1, 4):
            small = table.floors(K)
            bigger = table.floors(K + 1)
            assert np.all(bigger[:, :K] >= small - 1e-12)
        with pytest.raises(ValueError, match="outside"):
            table.floors(5)
        with pytest.raises(ValueError, match="outside"):
            table.floors(0)

    def test_single_device_single_panel_floor_free(self):
        cfg = SystemConfig(M=16, K=1, N=1, P=4)
        dep = place_devices(cfg, LayoutConfig(name="line"), np.random.default_rng(3))
        table = expected_floor_table(dep, cfg)
        assert table.floors(1)[0, 0] == 0.0
        assert math.isinf(table.gamma_hat(1)[0, 0])

    def test_nlos_inter_equals_isolated_panel(self):
        cfg, dep = self._world(seed=4)
        table = expected_floor_table(dep, cfg, regime="nlos_inter")
        solo = expected_floor_table(dep.panel(0), cfg)
        assert np.all(table.base == 0.0)
        for K in (1, 2, 4):
            assert_close(table.floors(K)[0], solo.floors(K)[0], rtol=1e-12)

    def test_gamma_hat_is_ratio(self):
        cfg, dep = self._world(seed=5)
        table = expected_floor_table(dep, cfg)
        K = 3
        fl = table.floors(K)
        gam = table.gamma_hat(K)
        mask = fl > 0
        assert_close(
            gam[mask], (table.rho_d_own[:, :K] * table.p_bar[:, :K] / fl)[mask], rtol=1e-12
        )

    def test_unknown_regime_rejected(self):
        cfg, dep = self._world()
        with pytest.raises(ValueError, match="regime"):
            expected_floor_table(dep, cfg, regime="rayleigh")


class TestScheduling:
    def test_curve_argmax_and_trace(self):
        cfg, dep = TestExpectedFloorTable()._world(seed=7, K=8)
        table = expected_floor_table(dep, cfg)
        sol = optimal_num_devices(table.gamma_hat, T=50, N=2, K_max=8)
        assert sol.K_values == tuple(range(1, 9))
        assert sol.nse_opt == np.max(sol.nse_curve)
        assert sol.nse_curve[sol.K_opt - 1] == sol.nse_opt
        trace = json.loads(sol.trace_json())
        assert trace["K_opt"] == sol.K_opt
        assert len(trace["nse_curve"]) == 8

    def test_ties_prefer_smaller_k(self):
        sol = optimal_num_devices(lambda K: np.zeros((1, K)), T=10, K_max=5)
        assert sol.K_opt == 1
        assert np.all(sol.nse_curve == 0.0)

    def test_explicit_grid_and_errors(self):
        provider = lambda K: np.full((2, K), 1.0)
        sol = optimal_num_devices(provider, T=20, K_values=[2, 4, 8])
        assert sol.K_values == (2, 4, 8)
        with pytest.raises(ValueError, match="empty"):
            optimal_num_devices(provider, T=20, K_values=[])
        with pytest.raises(ValueError, match="panels"):
            optimal_num_devices(provider, T=20, N=3, K_max=4)

    def test_nse_of_gammas(self):
        gam = np.array([[1.0, 3.0], [7.0, 15.0]])
        got = nse_of_gammas(gam, K=2, T=10)
        assert_close(got, 0.8 * 0.5 * ((1 + 2) + (3 + 4)))
        assert nse_of_gammas(gam, K=10, T=10) == 0.0
        assert nse_of_gammas(gam, K=12, T=10) == 0.0

    def test_diverging_objective_excluded_from_argmax(self):
        # A zero floor makes the bound SINR infinite; that K stays in the
        # curve but cannot win the argmax.
        def provider(K):
            gam = np.full((1, K), 2.0)
            if K == 1:
                gam[:] = np.inf
            return gam

        sol = optimal_num_devices(provider, T=10, K_max=5)
        assert math.isinf(sol.nse_curve[0])
        assert sol.K_opt > 1
        assert math.isfinite(sol.nse_opt)
        assert sol.nse_opt == max(v for v in sol.nse_curve if math.isfinite(v))

    def test_all_diverging_objective_rejected(self):
        provider = lambda K: np.full((1, K), np.inf)
        with pytest.raises(ValueError, match="finite"):
            optimal_num_devices(provider, T=10, K_max=3)


class TestNetworkNse:
    def test_mean_examples(self):
        assert network_nse([100.0, 110.0, 90.0, 100.0], N=4) == 100.0
        assert network_nse([42.0], N=1) == 42.0
        assert network_nse([7.0, 7.0, 7.0]) == 7.0

    def test_errors(self):
        with pytest.raises(ValueError, match="at least one"):
            network_nse([])
        with pytest.raises(ValueError, match="N=3"):
            network_nse([1.0, 2.0], N=3)
