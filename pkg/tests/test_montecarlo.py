"""Scenario configuration, random coupling, KDE, and simulation runs."""

from __future__ import annotations

import json

import numpy as np
import pytest

import multiport as mp

trapezoid = getattr(np, "trapezoid", None) or np.trapz


def tiny_config(**overrides) -> mp.ScenarioConfig:
    base = dict(
        name="tiny",
        n_tx=4,
        tx_spacing=0.4,
        rx_partition=(1,),
        strategies=("cap", "recip", "hyp"),
        power_grid_dbw=(-70.0, -50.0),
        n_realizations=4,
        seed=3,
    )
    base.update(overrides)
    return mp.ScenarioConfig(**base)


class TestCouplingRealization:
    def test_moments(self):
        std = 0.02
        z = mp.coupling_realization(9, 0, 0, 120, 160, std)
        n = z.size
        assert abs(z.mean()) < 5 * std / np.sqrt(n)
        assert np.mean(np.abs(z) ** 2) == pytest.approx(std**2, rel=0.03)
        # Circular symmetry: the pseudo-variance vanishes.
        assert abs(np.mean(z**2)) < 5 * std**2 / np.sqrt(n)
        assert np.var(z.real) == pytest.approx(std**2 / 2, rel=0.05)
        assert np.var(z.imag) == pytest.approx(std**2 / 2, rel=0.05)

    def test_reproducible(self):
        a = mp.coupling_realization(5, 7, 2, 3, 4, 0.01)
        b = mp.coupling_realization(5, 7, 2, 3, 4, 0.01)
        assert np.array_equal(a, b)

    def test_independent_across_indices(self):
        base = mp.coupling_realization(5, 0, 0, 100, 100, 1.0)
        for other in (
            mp.coupling_realization(5, 1, 0, 100, 100, 1.0),
            mp.coupling_realization(5, 0, 1, 100, 100, 1.0),
            mp.coupling_realization(6, 0, 0, 100, 100, 1.0),
        ):
            assert not np.array_equal(base, other)
            corr = abs(np.vdot(base, other)) / (
                np.linalg.norm(base) * np.linalg.norm(other)
            )
            assert corr < 0.05

    def test_far_field_scale(self):
        assert mp.far_field_coupling_std() == abs(mp.dipole_mutual_impedance(1000.0))


class TestGaussianKde:
    def test_density_integrates_to_one(self):
        rng = np.random.default_rng(0)
        grid, density = mp.gaussian_kde(rng.standard_normal(500))
        integral = float(trapezoid(density, grid))
        assert 0.995 <= integral <= 1.001
        assert grid.size == 128 and density.size == 128
        assert np.all(density >= 0.0)

    def test_translation_equivariance(self):
        rng = np.random.default_rng(1)
        x = rng.standard_normal(200)
        g0, d0 = mp.gaussian_kde(x)
        g1, d1 = mp.gaussian_kde(x + 5.0)
        assert np.allclose(g1, g0 + 5.0, atol=1e-12)
        assert np.allclose(d1, d0, atol=1e-12)

    def test_matches_scipy_with_same_bandwidth(self):
        scipy_stats = pytest.importorskip("scipy.stats")
        rng = np.random.default_rng(2)
        x = rng.standard_normal(300)
        grid, density = mp.gaussian_kde(x)
        factor = 1.06 * x.size ** (-1.0 / 5.0)
        reference = scipy_stats.gaussian_kde(x, bw_method=factor)(grid)
        assert np.allclose(density, reference, rtol=1e-8)

    def test_degenerate_inputs(self):
        with pytest.raises(ValueError):
            mp.gaussian_kde(np.array([1.0]))
        with pytest.raises(ValueError):
            mp.gaussian_kde(np.full(10, 2.5))
        with pytest.raises(ValueError):
            mp.gaussian_kde(np.array([1.0, np.nan, 2.0]))


class TestScenarioConfig:
    def test_roundtrip_through_dict(self):
        config = tiny_config(
            rx_partition=(2, 1),
            rx_spacing=0.35,
            strategies=("cap", "hyp_lin"),
            coupling_std_ohm=0.015,
            noise=mp.NoiseConfig(
                voltage_noise_var=1e-14,
                current_noise_var=1e-17,
                correlation=0.25 - 0.1j,
            ),
        )
        data = json.loads(json.dumps(mp.config_to_dict(config)))
        assert mp.config_from_dict(data) == config

    def test_defaults_applied(self):
        data = {
            "name": "d",
            "n_tx": 3,
            "tx_spacing": 0.5,
            "rx_partition": [1],
            "strategies": ["cap"],
            "power_grid_dbw": [-60.0],
            "n_realizations": 2,
        }
        config = mp.config_from_dict(data)
        assert config.seed == 0
        assert config.noise == mp.NoiseConfig.default()

    def test_unknown_and_missing_fields(self):
        data = mp.config_to_dict(tiny_config())
        data["typo_field"] = 1
        with pytest.raises(mp.ConfigError):
            mp.config_from_dict(data)
        del data["typo_field"]
        del data["name"]
        with pytest.raises(mp.ConfigError):
            mp.config_from_dict(data)

    @pytest.mark.parametrize(
        "overrides",
        [
            dict(n_tx=0),
            dict(tx_spacing=0.0),
            dict(rx_partition=()),
            dict(rx_partition=(1, 0)),
            dict(rx_partition=(2,)),  # multi-antenna user without rx_spacing
            dict(strategies=()),
            dict(strategies=("cap", "cap")),
            dict(strategies=("bogus",)),
            dict(strategies=("cap_lin",)),  # linear strategies are multi-user only
            dict(power_grid_dbw=()),
            dict(power_grid_dbw=(-50.0, -60.0)),
            dict(power_grid_dbw=(-50.0, -50.0)),
            dict(n_realizations=0),
            dict(seed=-1),
            dict(coupling_std_ohm=0.0),
            dict(name=""),
        ],
    )
    def test_rejects_invalid(self, overrides):
        with pytest.raises(mp.ConfigError):
            tiny_config(**overrides)

    def test_rejects_reciprocal_dpc_for_multi_user(self):
        with pytest.raises(mp.ConfigError):
            tiny_config(rx_partition=(1, 1), strategies=("cap", "recip"))

    def test_multi_user_strategies_accepted(self):
        config = tiny_config(
            rx_partition=(1, 1),
            strategies=("cap", "hyp", "cap_lin", "recip_lin", "hyp_lin"),
        )
        assert not config.is_single_user
        assert config.n_rx_total == 2


class TestCouplingFiles:
    def test_csv_roundtrip(self, tmp_path):
        rng = np.random.default_rng(3)
        reals = rng.standard_normal((3, 2, 4)) + 1j * rng.standard_normal((3, 2, 4))
        path = str(tmp_path / "coupling.csv")
        mp.write_coupling_file(path, reals)
        assert np.array_equal(mp.read_coupling_file(path), reals)

    def test_json_import(self, tmp_path):
        rng = np.random.default_rng(4)
        reals = rng.standard_normal((2, 1, 3)) + 1j * rng.standard_normal((2, 1, 3))
        payload = {
            "n_rx": 1,
            "n_tx": 3,
            "realizations": [
                [[[z.real, z.imag] for z in row] for row in mat] for mat in reals
            ],
        }
        path = tmp_path / "coupling.json"
        path.write_text(json.dumps(payload))
        assert np.allclose(mp.read_coupling_file(str(path)), reals)

    def test_bad_files(self, tmp_path):
        bad_header = tmp_path / "bad.csv"
        bad_header.write_text("a,b,c\n")
        with pytest.raises(mp.ConfigError):
            mp.read_coupling_file(str(bad_header))
        empty_json = tmp_path / "empty.json"
        empty_json.write_text(json.dumps({"n_rx": 1, "n_tx": 1, "realizations": []}))
        with pytest.raises(mp.ConfigError):
            mp.read_coupling_file(str(empty_json))


class TestRunScenario:
    def test_deterministic_and_worker_invariant(self):
        config = tiny_config(n_realizations=8)
        serial_a = mp.run_scenario(config)
        serial_b = mp.run_scenario(config)
        parallel = mp.run_scenario(config, n_workers=2)
        for s in config.strategies:
            assert np.array_equal(
                serial_a.per_realization_rates[s], serial_b.per_realization_rates[s]
            )
            assert np.array_equal(
                serial_a.per_realization_rates[s], parallel.per_realization_rates[s]
            )
            assert np.array_equal(
                serial_a.ergodic_rates[s], parallel.ergodic_rates[s]
            )
        assert np.array_equal(serial_a.alpha_samples, parallel.alpha_samples)

    def test_shapes_and_aggregation(self):
        config = tiny_config(
            n_realizations=5, power_grid_dbw=(-80.0, -65.0, -50.0)
        )
        result = mp.run_scenario(config)
        for s in config.strategies:
            assert result.per_realization_rates[s].shape == (5, 3)
            assert result.per_realization_streams[s].shape == (5, 3)
            assert np.allclose(
                result.ergodic_rates[s], result.per_realization_rates[s].mean(axis=0)
            )
        assert result.n_failures == 0
        assert result.alpha_samples.shape == (5, 3)
        assert len(result.alpha_kde) == 3
        grid, density = result.alpha_kde[0]
        assert np.all(np.isfinite(grid)) and np.all(np.isfinite(density))
        assert 0.9 <= float(trapezoid(density, grid)) <= 1.1

    def test_rates_increase_with_power(self):
        config = tiny_config(
            n_realizations=3, power_grid_dbw=(-90.0, -75.0, -60.0, -45.0)
        )
        result = mp.run_scenario(config)
        for s in ("cap", "recip"):
            diffs = np.diff(result.per_realization_rates[s], axis=1)
            assert np.all(diffs > 0.0)

    def test_capacity_dominates_other_strategies(self):
        config = tiny_config(n_realizations=6)
        result = mp.run_scenario(config)
        cap = result.per_realization_rates["cap"]
        for s in ("recip", "hyp"):
            assert np.all(result.per_realization_rates[s] <= cap + 1e-9)

    def test_seed_concentration(self):
        rates = []
        for seed in (100, 200):
            config = tiny_config(
                name="conc",
                n_tx=9,
                tx_spacing=0.35,
                strategies=("cap",),
                power_grid_dbw=(-60.0,),
                n_realizations=400,
                seed=seed,
            )
            rates.append(mp.run_scenario(config).ergodic_rates["cap"][0])
        assert rates[0] == pytest.approx(rates[1], rel=0.05)

    def test_no_alpha_without_naive_strategy(self):
        result = mp.run_scenario(tiny_config(strategies=("cap", "recip")))
        assert result.alpha_samples is None
        assert result.alpha_kde is None

    def test_single_realization_kde_degenerates_to_nan(self):
        result = mp.run_scenario(tiny_config(n_realizations=1))
        grid, density = result.alpha_kde[0]
        assert np.all(np.isnan(grid)) and np.all(np.isnan(density))

    def test_multi_user_run(self):
        config = tiny_config(
            rx_partition=(1, 1),
            strategies=("cap", "hyp", "cap_lin", "recip_lin", "hyp_lin"),
            n_realizations=3,
        )
        result = mp.run_scenario(config)
        cap = result.per_realization_rates["cap"]
        assert np.all(np.isfinite(cap))
        for s in config.strategies:
            assert np.all(np.isfinite(result.per_realization_rates[s]))
            assert np.all(result.per_realization_rates[s] <= cap + 1e-6)
        assert result.alpha_samples is not None

    def test_zero_noise_aborts(self):
        dead = mp.NoiseConfig(
            voltage_noise_var=0.0, current_noise_var=0.0, antenna_temperature_k=0.0
        )
        config = tiny_config(noise=dead, n_realizations=2)
        with pytest.raises(mp.SimulationAbort):
            mp.run_scenario(config)

    def test_imported_coupling_matches_sampled(self, tmp_path):
        config = tiny_config(n_realizations=4)
        std = mp.far_field_coupling_std()
        reals = np.stack(
            [
                mp.coupling_realization(config.seed, r, 0, 1, config.n_tx, std)
                for r in range(config.n_realizations)
            ]
        )
        path = str(tmp_path / "imported.csv")
        mp.write_coupling_file(path, reals)
        sampled = mp.run_scenario(config)
        imported = mp.run_scenario(tiny_config(n_realizations=4, coupling_file=path))
        for s in config.strategies:
            assert np.allclose(
                sampled.per_realization_rates[s],
                imported.per_realization_rates[s],
                rtol=1e-12,
            )

    def test_imported_coupling_shape_mismatch(self, tmp_path):
        path = str(tmp_path / "wrong.csv")
        mp.write_coupling_file(path, np.zeros((2, 2, 3), dtype=complex))
        with pytest.raises(mp.ConfigError):
            mp.run_scenario(tiny_config(coupling_file=path, n_realizations=2))

    def test_imported_coupling_too_few_realizations(self, tmp_path):
        config = tiny_config(n_realizations=5)
        path = str(tmp_path / "short.csv")
        mp.write_coupling_file(
            path, np.ones((2, 1, config.n_tx), dtype=complex) * (0.01 + 0.01j)
        )
        with pytest.raises(mp.ConfigError):
            mp.run_scenario(tiny_config(coupling_file=path, n_realizations=5))
