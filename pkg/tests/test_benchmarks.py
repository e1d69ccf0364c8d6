"""Benchmark systems, dataset generation, Monte-Carlo harness, CSV round trips."""

import math

import numpy as np
import pytest

from stable_sysid import (
    Dataset,
    Gaussian,
    InputError,
    MethodSpec,
    MonteCarloConfig,
    OptimizerConfig,
    SelectionConfig,
    StabilityTarget,
    SyntheticSystemSpec,
    generate_dataset,
    run_monte_carlo,
    simulate_hh,
    simulate_system_a,
    simulate_system_b,
    standard_methods,
    summarize,
)
from stable_sysid.benchmarks import (
    draw_multisine,
    hh_alpha,
    hh_beta,
    read_dataset_csv,
    read_results_csv,
    write_dataset_csv,
    write_results_csv,
)


def fast_selection():
    return SelectionConfig(method="gcv", optimizer=OptimizerConfig(restarts=2, max_evals=120))


class TestSystemsAB:
    def test_zero_everything_stays_zero(self):
        for sim in (simulate_system_a, simulate_system_b):
            y = sim(np.zeros(10), 0.0, 0.0, 10)
            assert np.all(y == 0.0)

    def test_one_step_hand_values(self):
        ya = simulate_system_a(np.zeros(3), 1.0, 0.0, 3)
        assert ya[2] == pytest.approx(0.2 * math.sqrt(math.sin(1.0) + 1.0), rel=1e-14)
        yb = simulate_system_b(np.zeros(3), 1.0, 0.0, 3)
        assert yb[2] == pytest.approx(0.2 * math.sin(1.0) ** 2, rel=1e-14)

    def test_analytic_bounds_hold_on_random_runs(self):
        rng = np.random.default_rng(0)
        for _ in range(10):
            u = rng.normal(size=120)
            y0, y1 = rng.normal(size=2)
            ya = simulate_system_a(u, y0, y1, 120)
            for t in range(2, 120):
                p_norm = math.sqrt(ya[t - 2] ** 2 + ya[t - 1] ** 2 + u[t - 2] ** 2 + u[t - 1] ** 2)
                assert 0.0 <= ya[t] <= 0.2 * math.sqrt(2.0) * p_norm + 1e-12
            yb = simulate_system_b(u, y0, y1, 120)
            assert np.all(yb[2:] >= 0.0) and np.all(yb[2:] <= 0.2)


class TestHodgkinHuxleyGate:
    def test_rate_singularity_handled(self):
        near = hh_alpha(np.array([-10.0, -10.0 + 1e-9, -10.0 - 1e-9]))
        assert near == pytest.approx([0.1, 0.1, 0.1], rel=1e-6)
        assert np.isfinite(hh_alpha(np.array([-50.0, 0.0, 40.0]))).all()

    def test_constant_voltage_reaches_algebraic_fixed_point(self):
        for V in (-3.0, 0.0, 5.0):
            voltage = lambda t, V=V: np.full_like(np.asarray(t, dtype=float), V)
            traj = simulate_hh(voltage, 0.9, t_end=200.0, dt_solver=0.01)
            kappa_end = traj.kappa[-1]
            a, b = float(hh_alpha(V)), float(hh_beta(V))
            assert abs(a * (1 - kappa_end) - b * kappa_end) <= 1e-8

    def test_gate_stays_in_unit_interval_for_valid_start(self):
        rng = np.random.default_rng(1)
        for seed in range(5):
            voltage = draw_multisine(np.random.default_rng(seed))
            kappa0 = float(rng.uniform(0, 1))
            traj = simulate_hh(voltage, kappa0, t_end=30.0, dt_solver=0.005)
            assert np.all(traj.kappa >= -1e-9)
            assert np.all(traj.kappa <= 1.0 + 1e-9)

    def test_current_vanishes_at_reversal_voltage(self):
        voltage = lambda t: np.full_like(np.asarray(t, dtype=float), 12.0)
        traj = simulate_hh(voltage, 0.5, t_end=1.0, dt_solver=0.01)
        times = np.arange(0.0, 1.0, 0.1)
        assert np.all(traj.current_at(times) == 0.0)

    def test_fourth_order_convergence_on_dt_halving(self):
        voltage = draw_multisine(np.random.default_rng(7))
        t_end = 2.0
        ref = simulate_hh(voltage, 0.4, t_end, dt_solver=t_end / 12800).kappa[-1]
        errors = []
        for steps in (100, 200, 400):
            kappa = simulate_hh(voltage, 0.4, t_end, dt_solver=t_end / steps).kappa[-1]
            errors.append(abs(kappa - ref))
        orders = [math.log2(errors[i] / errors[i + 1]) for i in range(2)]
        assert min(orders) >= 3.5

    def test_misaligned_sample_times_rejected(self):
        voltage = lambda t: np.zeros_like(np.asarray(t, dtype=float))
        traj = simulate_hh(voltage, 0.5, t_end=1.0, dt_solver=0.01)
        with pytest.raises(InputError):
            traj.kappa_at([0.005])


class TestGenerateDataset:
    def test_deterministic_given_seed(self):
        spec = SyntheticSystemSpec("A", seed=4, n_train=50, n_valid=30)
        t1, v1 = generate_dataset(spec)
        t2, v2 = generate_dataset(spec)
        assert np.array_equal(t1.u, t2.u) and np.array_equal(t1.y, t2.y)
        assert np.array_equal(v1.u, v2.u) and np.array_equal(v1.y, v2.y)
        assert not np.array_equal(t1.y, v1.y)  # validation is a fresh draw

    def test_default_sizes_match_protocol(self):
        spec = SyntheticSystemSpec("A", seed=0)
        train, valid = generate_dataset(spec)
        assert len(train) == 200 and len(valid) == 200

    def test_salt_varies_the_draw(self):
        spec = SyntheticSystemSpec("B", seed=4, n_train=40, n_valid=40)
        t1, _ = generate_dataset(spec, salt=(0,))
        t2, _ = generate_dataset(spec, salt=(1,))
        assert not np.array_equal(t1.y, t2.y)

    @pytest.mark.parametrize("variant,band", [("A", (5, 20)), ("B", (5, 20))])
    def test_snr_band(self, variant, band):
        ratios = []
        for seed in range(6):
            noisy, _ = generate_dataset(SyntheticSystemSpec(variant, seed=seed))
            clean, _ = generate_dataset(
                SyntheticSystemSpec(variant, seed=seed, noise_std=0.0)
            )
            noise = noisy.y - clean.y
            ratios.append(float(np.var(clean.y) / np.var(noise)))
        median = float(np.median(ratios))
        assert band[0] <= median <= band[1], ratios

    def test_hh_dataset_shapes_and_values(self):
        spec = SyntheticSystemSpec("H", seed=2, n_train=20, n_valid=10)
        train, valid = generate_dataset(spec)
        assert len(train) == 20 and len(valid) == 10
        assert np.all(np.isfinite(train.y))
        # multisine amplitudes cap |V| at 50 * 0.5 = 25
        assert np.max(np.abs(train.u)) <= 25.0

    def test_unknown_variant_rejected(self):
        with pytest.raises(InputError):
            SyntheticSystemSpec("C", seed=0)


class TestMonteCarlo:
    def test_row_accounting(self):
        spec = SyntheticSystemSpec("B", seed=1, n_train=40, n_valid=40)
        methods = standard_methods("B", fast_selection())
        config = MonteCarloConfig(runs=2, systems=(spec,), methods=methods)
        result = run_monte_carlo(config)
        assert len(result.rows) + len(result.failures) == 2 * len(methods)
        assert len(result.failures) == 0
        assert {row.method for row in result.rows} == {"Ba", "Bb"}

    def test_reproducible(self):
        spec = SyntheticSystemSpec("B", seed=1, n_train=30, n_valid=30)
        methods = (MethodSpec("Ba", Gaussian(), StabilityTarget.unconstrained(), fast_selection()),)
        config = MonteCarloConfig(runs=2, systems=(spec,), methods=methods)
        r1 = run_monte_carlo(config)
        r2 = run_monte_carlo(config)

        def content(result):  # everything but the wall-clock column
            return [(r.run, r.system, r.method, r.q_pre, r.q_sim, r.feasible) for r in result.rows]

        assert content(r1) == content(r2)
        assert r1.failures == r2.failures

    def test_beats_trivial_zero_predictor(self):
        # noise-free System B: a fitted model must out-predict the zero model
        spec = SyntheticSystemSpec("B", seed=5, n_train=80, n_valid=80, noise_std=0.0)
        methods = (MethodSpec("Ba", Gaussian(), StabilityTarget.unconstrained(), fast_selection()),)
        config = MonteCarloConfig(runs=1, systems=(spec,), methods=methods)
        result = run_monte_carlo(config)
        assert len(result.rows) == 1
        _, valid = generate_dataset(spec, salt=(0,))
        zero_q_pre = float(np.mean(np.abs(valid.y[2:])))
        assert result.rows[0].q_pre < zero_q_pre

    def test_infeasible_method_rejected_upfront(self):
        spec = SyntheticSystemSpec("B", seed=1, n_train=30, n_valid=30)
        bad = (MethodSpec("Bx", Gaussian(), StabilityTarget.iss(), fast_selection()),)
        from stable_sysid import InfeasibleTargetError

        with pytest.raises(InfeasibleTargetError):
            run_monte_carlo(MonteCarloConfig(runs=1, systems=(spec,), methods=bad))

    def test_summary_quartiles(self):
        from stable_sysid.benchmarks import ResultRow

        rows = [
            ResultRow(run=i, system="B", method="Ba", q_pre=float(i), q_sim=2.0 * i,
                      feasible=True, fit_seconds=0.0)
            for i in range(5)
        ]
        summary = summarize(rows)
        pre = next(s for s in summary if s["metric"] == "q_pre")
        assert pre["median"] == 2.0 and pre["min"] == 0.0 and pre["max"] == 4.0
        sim = next(s for s in summary if s["metric"] == "q_sim")
        assert sim["median"] == 4.0


class TestCsvRoundTrips:
    def test_dataset_round_trip(self, tmp_path):
        train, _ = generate_dataset(SyntheticSystemSpec("A", seed=3, n_train=25, n_valid=10))
        path = tmp_path / "data.csv"
        write_dataset_csv(train, path)
        back = read_dataset_csv(path)
        assert np.array_equal(back.u, train.u)
        assert np.array_equal(back.y, train.y)
        assert path.read_text().splitlines()[0] == "t,u,y"

    def test_results_round_trip(self, tmp_path):
        from stable_sysid.benchmarks import ResultRow

        rows = [
            ResultRow(run=0, system="H", method="Hc", q_pre=0.1234567890123,
                      q_sim=1.5e-3, feasible=True, fit_seconds=2.5),
            ResultRow(run=1, system="H", method="Ha", q_pre=3.0, q_sim=40.0,
                      feasible=False, fit_seconds=1.25),
        ]
        path = tmp_path / "results.csv"
        write_results_csv(rows, path, record_timing=True)
        back = read_results_csv(path)
        assert back == rows

    def test_results_timing_zeroed_by_default(self, tmp_path):
        from stable_sysid.benchmarks import ResultRow

        rows = [ResultRow(run=0, system="B", method="Ba", q_pre=0.5, q_sim=0.5,
                          feasible=True, fit_seconds=123.4)]
        path = tmp_path / "results.csv"
        write_results_csv(rows, path)
        assert read_results_csv(path)[0].fit_seconds == 0.0

    def test_malformed_header_rejected(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b,c\n1,2,3\n")
        with pytest.raises(InputError):
            read_dataset_csv(path)
