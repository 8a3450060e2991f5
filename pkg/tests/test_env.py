import numpy as np
import pytest

from semlab import (
    EnvConfig,
    SyntheticSpec,
    TradingEnv,
    builtin_policies,
    drawdown_penalty,
    run_policy,
    step_reward,
    synth_panel,
)
from semlab.env import (
    HoldPolicy,
    ObservationLayout,
    SignalThresholdPolicy,
    UniformRandomPolicy,
    write_episode_log,
    write_observation_layout,
)
from semlab.errors import PolicyFaultError, RangeError, ValidationError
from semlab.panels import compute_indicators, compute_turbulence

from conftest import make_panel, make_signal_panel


@pytest.fixture(scope="module")
def env_setup():
    spec = SyntheticSpec(tickers=4, days=160, coverage=0.5,
                         beta=(0.01, 0, 0, 0), drift=0.0, volatility=0.01, seed=77)
    panel, signals, _ = synth_panel(spec)
    features = compute_indicators(panel)
    turb = compute_turbulence(panel, window=20)
    return panel, features, signals, turb


def build_env(env_setup, **cfg_kwargs):
    panel, features, signals, turb = env_setup
    return TradingEnv(panel, features, signals, turb, EnvConfig(**cfg_kwargs))


class TestRewardPieces:
    def test_penalty_at_peak_is_zero(self):
        assert drawdown_penalty(100.0, 100.0, 0.1) == 0.0

    def test_penalty_value(self):
        # 20% drawdown at alpha 0.1 costs 0.004
        assert drawdown_penalty(80.0, 100.0, 0.1) == pytest.approx(0.004, abs=1e-15)

    def test_penalty_derivative_matches_2ad(self):
        rng = np.random.default_rng(0)
        for _ in range(200):
            d = float(rng.uniform(0.001, 0.9))
            alpha = float(rng.uniform(0.01, 1.0))
            h = 1e-7
            num = (alpha * (d + h) ** 2 - alpha * (d - h) ** 2) / (2 * h)
            assert abs(num - 2 * alpha * d) < 1e-6

    def test_reward_small_gain_at_new_peak(self):
        cfg = EnvConfig(initial_cash=1e6)
        r = step_reward(10.0, 1_000_010.0, 1_000_010.0, cfg)
        assert r == pytest.approx(1e-9, abs=1e-18)

    def test_reward_pure_drawdown(self):
        cfg = EnvConfig(initial_cash=1e6)
        r = step_reward(0.0, 900_000.0, 1_000_000.0, cfg)
        assert r == pytest.approx(-1e-3, abs=1e-15)

    def test_reward_oracle_random_triples(self):
        rng = np.random.default_rng(1)
        cfg = EnvConfig(reward_scale=1e-4, drawdown_alpha=0.1, initial_cash=1e6)
        for _ in range(10000):
            peak = float(rng.uniform(5e5, 2e6))
            wealth = float(rng.uniform(0.3, 1.0) * peak)
            dw = float(rng.uniform(-1e4, 1e4))
            d = max(0.0, (peak - wealth) / peak)
            expected = dw / cfg.initial_cash * cfg.reward_scale - cfg.drawdown_alpha * d * d
            assert abs(step_reward(dw, wealth, peak, cfg) - expected) < 1e-12


class TestObservation:
    def test_published_dimension_for_default_layout(self):
        # the standard eight-indicator layout at 30 names flattens to 421
        layout = ObservationLayout(
            tickers=tuple(f"T{i}" for i in range(30)),
            feature_names=tuple(f"f{i}" for i in range(8)),
        )
        assert layout.dimension == 421

    @pytest.mark.parametrize("n,k", [(2, 7), (30, 7), (1, 1), (5, 8), (10, 3), (30, 8)])
    def test_dimension_formula(self, n, k):
        layout = ObservationLayout(
            tickers=tuple(f"T{i}" for i in range(n)),
            feature_names=tuple(f"f{i}" for i in range(k)),
        )
        assert layout.dimension == 1 + 2 * n + (k + 4) * n

    def test_small_layout_is_27(self):
        layout = ObservationLayout(
            tickers=("A", "B"), feature_names=tuple(f"f{i}" for i in range(7))
        )
        assert layout.dimension == 27

    def test_observation_matches_layout(self, env_setup):
        env = build_env(env_setup)
        state = env.reset()
        obs = env.observation(state)
        assert obs.shape == (env.layout.dimension,)
        assert obs[0] == state.cash
        n = env.n_tickers
        np.testing.assert_array_equal(obs[1 : 1 + n], state.prices)
        np.testing.assert_array_equal(obs[1 + n : 1 + 2 * n], np.zeros(n))
        sl = env.layout.signal_slice("sentiment")
        np.testing.assert_array_equal(obs[sl], state.signals[:, 0])

    def test_layout_manifest(self, env_setup, tmp_path):
        env = build_env(env_setup)
        path = tmp_path / "layout.json"
        write_observation_layout(env.layout, str(path))
        import json
        manifest = json.loads(path.read_text())
        assert manifest["dimension"] == env.layout.dimension
        names = [b["name"] for b in manifest["blocks"]]
        assert names[0] == "cash"
        assert "signal:volatility_forecast" in names


class TestReset:
    def test_reset_state(self, env_setup):
        env = build_env(env_setup, initial_cash=5e5)
        state = env.reset()
        assert state.cash == 5e5
        assert state.wealth == 5e5
        assert state.peak_wealth == 5e5
        assert np.all(state.holdings == 0)
        assert state.date_index == env.features.warmup

    def test_start_in_warmup_rejected(self, env_setup):
        env = build_env(env_setup)
        with pytest.raises(RangeError, match="warm-up"):
            env.reset(env.panel.dates[0])

    def test_start_at_end_rejected(self, env_setup):
        env = build_env(env_setup)
        with pytest.raises(RangeError):
            env.reset(env.panel.dates[-1])


class TestStep:
    def test_cash_conservation_each_step(self, env_setup):
        env = build_env(env_setup)
        rng = np.random.default_rng(5)
        state = env.reset()
        for _ in range(40):
            action = rng.uniform(-1, 1, env.n_tickers)
            prev_cash = state.cash
            prices = state.prices
            prev_hold = state.holdings.copy()
            state, reward, info = env.step(state, action)
            buys = np.maximum(state.holdings - prev_hold, 0)
            sells = np.maximum(prev_hold - state.holdings, 0)
            expected = (
                prev_cash
                + float(sells @ prices) - float(buys @ prices) - info["cost"]
            )
            assert state.cash == pytest.approx(expected, abs=1e-6)
            if info["done"]:
                break

    def test_long_only_and_peak_monotone(self, env_setup):
        env = build_env(env_setup)
        rng = np.random.default_rng(6)
        state = env.reset()
        peak = state.peak_wealth
        while True:
            state, reward, info = env.step(state, rng.uniform(-1, 1, env.n_tickers))
            assert np.all(state.holdings >= 0)
            assert state.peak_wealth >= peak - 1e-12
            assert state.peak_wealth >= state.wealth - 1e-9
            peak = state.peak_wealth
            if info["done"]:
                break

    def test_reward_decomposition(self, env_setup):
        env = build_env(env_setup)
        rng = np.random.default_rng(7)
        state = env.reset()
        prev_wealth = state.wealth
        for _ in range(60):
            state, reward, info = env.step(state, rng.uniform(-1, 1, env.n_tickers))
            gain = (state.wealth - prev_wealth) / env.config.initial_cash
            gain *= env.config.reward_scale
            assert reward + info["penalty"] - gain == pytest.approx(0.0, abs=1e-12)
            prev_wealth = state.wealth
            if info["done"]:
                break

    def test_zero_action_flat_prices_zero_reward(self):
        n_d = 70
        close = np.full((n_d, 2), 40.0)
        panel = make_panel(close)
        values = np.full((n_d, 2, 4), 3.0)
        sig = make_signal_panel(values, np.zeros((n_d, 2), dtype=bool))
        feats = compute_indicators(
            make_panel(close), names=("sma_30", "sma_60")
        )
        env = TradingEnv(panel, feats, sig, None, EnvConfig())
        state = env.reset()
        state, reward, info = env.step(state, np.zeros(2))
        assert reward == 0.0
        assert state.wealth == env.config.initial_cash

    def test_buy_scaling_when_cash_short(self, env_setup):
        env = build_env(env_setup, initial_cash=500.0, h_max=100)
        state = env.reset()
        state, reward, info = env.step(state, np.ones(env.n_tickers))
        assert info["buys_scaled"]
        assert state.cash >= 0.0

    def test_no_buy_gate(self, env_setup):
        panel, features, signals, turb = env_setup
        # force a tiny threshold so every available turbulence value gates
        env = TradingEnv(panel, features, signals, turb,
                         EnvConfig(turbulence_threshold=0.0))
        state = env.reset()
        while True:
            prev = state.holdings.copy()
            state, reward, info = env.step(state, np.ones(env.n_tickers))
            if info["turbulence_available"]:
                assert info["gated"]
                assert np.all(state.holdings <= prev)
            if info["done"]:
                break

    def test_sells_bounded_by_holdings(self, env_setup):
        env = build_env(env_setup)
        state = env.reset()
        state, _, _ = env.step(state, -np.ones(env.n_tickers))
        assert np.all(state.holdings == 0)
        assert state.cash == env.config.initial_cash

    def test_episode_finished_signal(self, env_setup):
        env = build_env(env_setup)
        state = env.reset(env.panel.dates[-2])
        state, reward, info = env.step(state, np.zeros(env.n_tickers))
        assert info["done"]
        state2, reward2, info2 = env.step(state, np.zeros(env.n_tickers))
        assert info2["done"] and "finished" in info2["note"]
        assert state2 is state

    def test_nonfinite_action_rejected(self, env_setup):
        env = build_env(env_setup)
        state = env.reset()
        with pytest.raises(ValidationError, match="finite"):
            env.step(state, np.array([np.nan] * env.n_tickers))


class TestPolicies:
    def test_hold_policy_keeps_wealth_constant(self, env_setup):
        env = build_env(env_setup)
        curve, rewards, infos = run_policy(env, HoldPolicy(env.n_tickers))
        assert np.all(curve.wealth == 1.0)
        assert np.all(curve.cost_paid == 0.0)
        cr = float(np.prod(1 + curve.daily_returns[1:]) - 1)
        assert cr == 0.0

    def test_uniform_random_same_seed_identical(self, env_setup):
        env = build_env(env_setup)
        pol = UniformRandomPolicy(env.n_tickers)
        c1, r1, _ = run_policy(env, pol, seed=9)
        c2, r2, _ = run_policy(env, pol, seed=9)
        np.testing.assert_array_equal(c1.wealth, c2.wealth)
        np.testing.assert_array_equal(r1, r2)
        c3, _, _ = run_policy(env, pol, seed=10)
        assert not np.array_equal(c1.wealth, c3.wealth)

    def test_threshold_policy_under_full_mask_is_hold(self, env_setup):
        env = build_env(env_setup)
        pol = SignalThresholdPolicy(env.layout, axis="sentiment", level=3.0)
        masked, _, _ = run_policy(env, pol, mask="ALL")
        assert np.all(masked.wealth == 1.0)

    def test_mask_irrelevant_for_signal_blind_policy(self, env_setup):
        env = build_env(env_setup)
        pol = UniformRandomPolicy(env.n_tickers)
        full, rf, _ = run_policy(env, pol, seed=11)
        masked, rm, _ = run_policy(env, pol, mask="ALL", seed=11)
        np.testing.assert_array_equal(full.wealth, masked.wealth)
        np.testing.assert_array_equal(rf, rm)

    def test_builtin_inventory(self, env_setup):
        env = build_env(env_setup)
        pool = builtin_policies(env.layout, seed=3)
        assert set(pool) == {"hold", "uniform_random", "signal_threshold"}

    def test_policy_fault_carries_step_index(self, env_setup):
        env = build_env(env_setup)

        class Broken(HoldPolicy):
            def __call__(self, obs):
                return np.full(self.n, np.inf)

        with pytest.raises(PolicyFaultError, match="step 0"):
            run_policy(env, Broken(env.n_tickers))

    def test_unknown_mask_axis(self, env_setup):
        env = build_env(env_setup)
        with pytest.raises(ValidationError, match="unknown"):
            run_policy(env, HoldPolicy(env.n_tickers), mask={"sent"})


class TestEpisodeLog:
    def test_log_columns(self, env_setup, tmp_path):
        env = build_env(env_setup)
        pol = UniformRandomPolicy(env.n_tickers)
        curve, rewards, infos = run_policy(env, pol, seed=12)
        path = tmp_path / "episode.csv"
        write_episode_log(infos, str(path))
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "step,date,wealth,peak,reward,penalty,turbulence,gated"
        assert len(lines) == len(infos) + 1

    def test_curve_invariants(self, env_setup):
        env = build_env(env_setup)
        pol = UniformRandomPolicy(env.n_tickers)
        curve, _, _ = run_policy(env, pol, seed=13)
        assert curve.wealth[0] == 1.0
        sums = curve.holdings.sum(axis=1)
        assert np.all(sums <= 1.0 + 1e-9)
        assert np.all(curve.holdings >= 0)
