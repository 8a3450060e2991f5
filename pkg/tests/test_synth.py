import json

import numpy as np
import pytest

from semlab import SyntheticSpec, synth_panel
from semlab.errors import ValidationError
from semlab.panels import forward_returns
from semlab.stats import spearman_ic


def _ols_with_se(X, y):
    """Independent least-squares oracle with coefficient standard errors."""
    n = X.shape[0]
    Xa = np.column_stack([X, np.ones(n)])
    coef, *_ = np.linalg.lstsq(Xa, y, rcond=None)
    resid = y - Xa @ coef
    dof = n - Xa.shape[1]
    cov = (resid @ resid / dof) * np.linalg.inv(Xa.T @ Xa)
    return coef[:-1], np.sqrt(np.diag(cov))[:-1]


def test_same_seed_is_bit_identical():
    spec = SyntheticSpec(tickers=6, days=120, seed=99)
    m1, s1, _ = synth_panel(spec)
    m2, s2, _ = synth_panel(spec)
    np.testing.assert_array_equal(m1.close, m2.close)
    np.testing.assert_array_equal(m1.high, m2.high)
    np.testing.assert_array_equal(s1.values, s2.values)
    np.testing.assert_array_equal(s1.non_neutral, s2.non_neutral)
    m3, _, _ = synth_panel(spec, seed=100)
    assert not np.array_equal(m1.close, m3.close)


def test_coverage_fraction_validated():
    with pytest.raises(ValidationError, match="coverage"):
        SyntheticSpec(tickers=3, days=50, coverage=1.2)


def test_planted_truth_recovery_within_three_se():
    # least squares on 10k stock-days recovers the planted coefficients
    spec = SyntheticSpec(
        tickers=20, days=505, coverage=0.5,
        beta=(0.004, 0.002, 0.0, -0.003), seed=42,
    )
    panel, signals, truth = synth_panel(spec)
    fwd = forward_returns(panel, truth.horizon)
    mask = np.isfinite(fwd)
    assert mask.sum() == 10000
    coef, se = _ols_with_se(signals.deviations[mask], fwd[mask])
    z = (coef - np.asarray(truth.beta)) / se
    assert np.all(np.abs(z) < 3.0)


def test_null_model_has_no_ic():
    spec = SyntheticSpec(tickers=20, days=505, coverage=1.0, beta=(0, 0, 0, 0), seed=7)
    panel, signals, _ = synth_panel(spec)
    fwd = forward_returns(panel, 5)
    mask = np.isfinite(fwd) & signals.non_neutral
    res = spearman_ic(signals.deviations[:, :, 0][mask], fwd[mask])
    assert abs(res.statistic) < 0.03


def test_planted_axis_has_significant_ic():
    spec = SyntheticSpec(tickers=20, days=505, coverage=1.0, beta=(0.002, 0, 0, 0), seed=7)
    panel, signals, _ = synth_panel(spec)
    fwd = forward_returns(panel, 5)
    mask = np.isfinite(fwd) & signals.non_neutral
    assert mask.sum() >= 10000
    res = spearman_ic(signals.deviations[:, :, 0][mask], fwd[mask])
    assert res.statistic > 0.0
    assert res.p_value < 0.01


def test_beta_tickers_limit_the_effect():
    tickers = tuple(f"S{i}" for i in range(10))
    spec = SyntheticSpec(
        tickers=tickers, days=700, coverage=0.8,
        beta=(0.01, 0, 0, 0), beta_tickers=tickers[:5], seed=5,
    )
    panel, signals, truth = synth_panel(spec)
    assert truth.beta_tickers == tickers[:5]
    fwd = forward_returns(panel, 5)
    mask = np.isfinite(fwd) & signals.non_neutral
    planted = spearman_ic(
        signals.deviations[:, :5, 0][mask[:, :5]], fwd[:, :5][mask[:, :5]]
    )
    clean = spearman_ic(
        signals.deviations[:, 5:, 0][mask[:, 5:]], fwd[:, 5:][mask[:, 5:]]
    )
    assert planted.statistic > 0.1
    assert abs(clean.statistic) < 0.05


def test_spec_from_file_round_trip(tmp_path):
    raw = {
        "tickers": 4, "days": 60, "coverage": 0.3,
        "beta": [0.001, 0, 0, 0], "seed": 17, "start_date": "2018-01-02",
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(raw))
    spec = SyntheticSpec.from_file(str(path))
    assert spec.days == 60
    assert spec.tickers == tuple(f"SYN{i:02d}" for i in range(4))
    panel, signals, _ = synth_panel(spec)
    assert panel.dates[0] == "2018-01-02"
    assert signals.values.min() >= 1.0 and signals.values.max() <= 5.0


def test_unknown_spec_keys_rejected(tmp_path):
    path = tmp_path / "spec.json"
    path.write_text(json.dumps({"days": 10, "volatilty": 0.1}))
    with pytest.raises(ValidationError, match="volatilty"):
        SyntheticSpec.from_file(str(path))


def test_panel_has_usable_ohlc():
    spec = SyntheticSpec(tickers=5, days=100, seed=3)
    panel, _, _ = synth_panel(spec)
    assert np.all(panel.high >= panel.close)
    assert np.all(panel.low <= panel.close)
    assert np.all(panel.low > 0)
    assert np.all(panel.high >= panel.open)
    assert np.all(panel.low <= panel.open)
