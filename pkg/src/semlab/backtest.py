"""Daily top-k long-only backtests, baselines, sweeps, and breakdowns.

One ledger drives everything: a target-weight schedule is executed at each
day's close, positions drift until the targets change, and per-leg costs are
charged on traded notional. Wealth is marked at the close before that day's
trade, so the curve starts at exactly 1.0 and the cost of a trade shows up in
the next day's mark. All tie-breaking is lexicographic by ticker, making
every run deterministic.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, replace

import numpy as np

from .errors import LabError, RangeError, ValidationError
from .panels import MarketPanel
from .signals import CoverageReport

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BacktestConfig:
    k: int = 10
    cost_rate: float = 0.001
    universe: tuple[str, ...] | None = None
    period: tuple[str, str] | None = None

    def __post_init__(self) -> None:
        if self.k < 1:
            raise ValidationError(f"basket size must be >= 1, got {self.k}")
        if self.cost_rate < 0:
            raise ValidationError(f"cost rate must be >= 0, got {self.cost_rate}")
        if self.universe is not None:
            object.__setattr__(self, "universe", tuple(self.universe))
            if self.k > len(self.universe):
                raise ValidationError(
                    f"basket size {self.k} exceeds universe of {len(self.universe)}"
                )


@dataclass(frozen=True)
class EquityCurve:
    """Daily portfolio record: wealth (start 1.0), returns, weights, costs."""

    dates: tuple[str, ...]
    wealth: np.ndarray
    daily_returns: np.ndarray
    holdings: np.ndarray  # (dates, tickers) post-trade target weights
    cost_paid: np.ndarray  # booked on the day the trade's P&L first accrues
    tickers: tuple[str, ...]
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        for name in ("wealth", "daily_returns", "cost_paid"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != (len(self.dates),):
                raise ValidationError(f"{name} must have one entry per date")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        holdings = np.array(self.holdings, dtype=float, copy=True)
        if holdings.shape != (len(self.dates), len(self.tickers)):
            raise ValidationError("holdings must be (dates, tickers)")
        holdings.flags.writeable = False
        object.__setattr__(self, "holdings", holdings)
        if abs(self.wealth[0] - 1.0) > 1e-12:
            raise ValidationError("wealth must start at 1.0")
        if np.any(self.cost_paid < 0):
            raise ValidationError("cost_paid must be non-negative")
        if np.any(holdings < -1e-12) or np.any(holdings.sum(axis=1) > 1.0 + 1e-9):
            raise ValidationError("holdings must be long-only weights summing to <= 1")

    def slice_indices(self, start: str, end: str) -> tuple[int, int]:
        keep = [i for i, d in enumerate(self.dates) if start <= d <= end]
        if not keep:
            raise RangeError(f"no curve dates in [{start}, {end}]")
        return keep[0], keep[-1]


def write_equity_curve(curve: EquityCurve, path: str, holdings_path: str | None = None) -> None:
    """Delimited export: date,wealth,daily_return,cost_paid (+ optional holdings file)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", "wealth", "daily_return", "cost_paid"])
        for i, d in enumerate(curve.dates):
            writer.writerow([
                d,
                repr(float(curve.wealth[i])),
                repr(float(curve.daily_returns[i])),
                repr(float(curve.cost_paid[i])),
            ])
    if holdings_path is not None:
        with open(holdings_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["date", "ticker", "weight"])
            for i, d in enumerate(curve.dates):
                for j, t in enumerate(curve.tickers):
                    w = float(curve.holdings[i, j])
                    if w != 0.0:
                        writer.writerow([d, t, repr(w)])


# ---------------------------------------------------------------------------
# The ledger engine
# ---------------------------------------------------------------------------

def run_weight_schedule(
    panel: MarketPanel,
    targets: np.ndarray,
    cost_rate: float,
    label: str = "",
) -> EquityCurve:
    """Execute a per-date target-weight schedule against the panel.

    Trading happens at a day's close only when that day's target vector
    differs from the previous one; otherwise positions drift. Costs are
    cost_rate x traded notional, charged on both buys and sells, and no trade
    runs at the final close (there is no accrual day left to fund).
    """
    n_d, n_t = panel.n_dates, panel.n_tickers
    targets = np.asarray(targets, dtype=float)
    if targets.shape != (n_d, n_t):
        raise ValidationError(f"targets shape {targets.shape}, expected {(n_d, n_t)}")
    if np.any(targets < -1e-12) or np.any(targets.sum(axis=1) > 1.0 + 1e-9):
        raise ValidationError("target weights must be long-only and sum to <= 1")

    cash = 1.0
    shares = np.zeros(n_t)
    wealth = np.empty(n_d)
    cost_paid = np.zeros(n_d)
    last_target = np.zeros(n_t)
    pending_cost = 0.0

    for d in range(n_d):
        prices = panel.close[d]
        pos_val = shares * prices
        wealth[d] = cash + pos_val.sum()
        cost_paid[d] = pending_cost
        pending_cost = 0.0
        if d == n_d - 1:
            break
        if not np.array_equal(targets[d], last_target):
            value = wealth[d]
            target_val = targets[d] * value
            traded = np.abs(target_val - pos_val).sum()
            cost = cost_rate * traded
            shares = target_val / prices
            cash = value - target_val.sum() - cost
            pending_cost = cost
            last_target = targets[d].copy()

    daily_returns = np.zeros(n_d)
    daily_returns[1:] = wealth[1:] / wealth[:-1] - 1.0
    return EquityCurve(
        dates=panel.dates, wealth=wealth, daily_returns=daily_returns,
        holdings=targets, cost_paid=cost_paid, tickers=panel.tickers, label=label,
    )


def _rank_basket(
    scores_row: np.ndarray, tickers: tuple[str, ...], k: int
) -> list[int]:
    """Top-k ticker indices by score, ties broken lexicographically."""
    available = [j for j in range(len(tickers)) if np.isfinite(scores_row[j])]
    order = sorted(available, key=lambda j: (-scores_row[j], tickers[j]))
    return order[:k]


def backtest_topk(
    scores,
    panel: MarketPanel,
    config: BacktestConfig,
    weighting: str | tuple[str, float] = "equal",
) -> EquityCurve:
    """Daily top-k long-only portfolio driven by a score matrix.

    ``scores`` carries (dates, tickers, values) aligned with the panel over
    the configured period. ``weighting`` is "equal" or ("scw", temperature)
    for softmax conviction weights within the basket. Days with fewer scored
    tickers than k shrink the basket (with a logged warning); days with no
    scored tickers hold the previous positions.
    """
    from .factors import scw_weights

    sub_panel = panel
    sub_scores = scores
    if config.universe is not None:
        sub_panel = sub_panel.restrict(config.universe)
        sub_scores = sub_scores.restrict(config.universe)
    if config.period is not None:
        sub_panel = sub_panel.slice_dates(*config.period)
        sub_scores = sub_scores.slice_dates(*config.period)
    if tuple(sub_scores.dates) != tuple(sub_panel.dates):
        raise ValidationError("score dates do not align with panel dates")
    if tuple(sub_scores.tickers) != tuple(sub_panel.tickers):
        raise ValidationError("score tickers do not align with panel tickers")

    n_d, n_t = sub_panel.n_dates, sub_panel.n_tickers
    tickers = sub_panel.tickers
    mode = weighting if isinstance(weighting, str) else weighting[0]
    if mode not in ("equal", "scw"):
        raise ValidationError(f"unknown weighting {weighting!r}")
    temperature = None if mode == "equal" else float(weighting[1])

    targets = np.zeros((n_d, n_t))
    short_days = 0
    for d in range(n_d):
        basket = _rank_basket(sub_scores.values[d], tickers, config.k)
        if not basket:
            targets[d] = targets[d - 1] if d > 0 else 0.0
            continue
        if len(basket) < config.k:
            short_days += 1
        if mode == "equal":
            for j in basket:
                targets[d, j] = 1.0 / len(basket)
        else:
            row = {tickers[j]: float(sub_scores.values[d, j]) for j in basket}
            w = scw_weights(row, [tickers[j] for j in basket], temperature)
            for j in basket:
                targets[d, j] = w[tickers[j]]
    if short_days:
        logger.warning(
            "basket shrank below k=%d on %d of %d days (not enough scored tickers)",
            config.k, short_days, n_d,
        )
    label = f"top{config.k}-{mode}" if mode == "equal" else f"top{config.k}-scw(T={temperature})"
    return run_weight_schedule(sub_panel, targets, config.cost_rate, label=label)


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------

def baseline(
    panel: MarketPanel,
    kind: str,
    config: BacktestConfig,
    lookback: int = 126,
    vol_window: int = 63,
) -> EquityCurve:
    """Passive and rule-based comparators.

    * ``ew_buy_and_hold`` — equal-weight price-average index: buy once at the
      first close, never rebalance, no cost at any point.
    * ``momentum_topk`` — rank by trailing ``lookback``-day return, reuse the
      top-k machinery at the configured cost.
    * ``equal_vol`` — weights proportional to inverse trailing volatility
      over ``vol_window`` days, renormalised daily.

    Momentum and equal-vol need enough panel history before the configured
    period to cover their lookbacks.
    """
    from .factors import CompositeScore

    sub = panel if config.universe is None else panel.restrict(config.universe)
    period = config.period or (sub.dates[0], sub.dates[-1])

    if kind == "ew_buy_and_hold":
        view = sub.slice_dates(*period)
        targets = np.zeros((view.n_dates, view.n_tickers))
        targets[:] = 1.0 / view.n_tickers
        return run_weight_schedule(view, targets, 0.0, label="ew-buy-and-hold")

    if kind == "momentum_topk":
        in_period = [d for d in sub.dates if d >= period[0]]
        if not in_period:
            raise RangeError(f"no panel dates at or after {period[0]}")
        first = sub.date_index(in_period[0])
        if first < lookback:
            raise RangeError(
                f"momentum lookback {lookback} needs {lookback} rows before {period[0]}"
            )
        rel = np.full_like(sub.close, np.nan)
        rel[lookback:] = sub.close[lookback:] / sub.close[:-lookback] - 1.0
        scores = CompositeScore(
            dates=sub.dates, tickers=sub.tickers, values=rel, provenance="momentum"
        )
        cfg = BacktestConfig(k=config.k, cost_rate=config.cost_rate, period=period)
        curve = backtest_topk(scores, sub, cfg)
        return replace(curve, label=f"momentum-top{config.k}")

    if kind == "equal_vol":
        in_period = [d for d in sub.dates if d >= period[0]]
        if not in_period:
            raise RangeError(f"no panel dates at or after {period[0]}")
        rets = np.full_like(sub.close, np.nan)
        rets[1:] = sub.close[1:] / sub.close[:-1] - 1.0
        vol = np.full_like(sub.close, np.nan)
        for d in range(vol_window + 1, sub.n_dates):
            vol[d] = rets[d - vol_window : d].std(axis=0, ddof=1)
        first = sub.date_index(in_period[0])
        if first < vol_window + 1:
            raise RangeError(
                f"equal-vol window {vol_window} needs {vol_window + 1} rows before {period[0]}"
            )
        view = sub.slice_dates(*period)
        offset = sub.date_index(view.dates[0])
        vol_view = vol[offset : offset + view.n_dates]
        if np.any(vol_view <= 0):
            vol_view = np.where(vol_view <= 0, np.nan, vol_view)
        inv = 1.0 / vol_view
        # a dead (zero-vol) column would break renormalisation; spread equally
        inv = np.where(np.isfinite(inv), inv, 1.0)
        targets = inv / inv.sum(axis=1, keepdims=True)
        return run_weight_schedule(view, targets, config.cost_rate, label="equal-vol")

    raise ValidationError(f"unknown baseline kind {kind!r}")


# ---------------------------------------------------------------------------
# Sweeps, strata, sub-periods
# ---------------------------------------------------------------------------

def cost_sweep(
    scores,
    panel: MarketPanel,
    config: BacktestConfig,
    costs: tuple[float, ...],
    weighting: str | tuple[str, float] = "equal",
) -> list[dict]:
    """Re-run the same strategy across per-trade cost levels.

    The buy-and-hold comparator is cost-free and therefore constant across
    rows. Returns one dict per cost with the curve attached.
    """
    costs = tuple(costs)
    if any(c < 0 for c in costs):
        raise ValidationError("costs must be non-negative")
    if list(costs) != sorted(costs):
        raise ValidationError("costs must be sorted ascending")
    from .metrics import metrics

    bh = baseline(panel, "ew_buy_and_hold", config)
    bh_report = metrics(bh)
    rows = []
    for c in costs:
        cfg = BacktestConfig(
            k=config.k, cost_rate=c, universe=config.universe, period=config.period
        )
        curve = backtest_topk(scores, panel, cfg, weighting)
        rep = metrics(curve)
        rows.append({
            "cost": c,
            "cr": rep.cr,
            "sharpe": rep.sharpe,
            "mdd": rep.mdd,
            "benchmark_cr": bh_report.cr,
            "benchmark_sharpe": bh_report.sharpe,
            "curve": curve,
        })
    return rows


def stratified_backtest(
    scores,
    panel: MarketPanel,
    coverage: CoverageReport,
    config: BacktestConfig,
    k_per_stratum: int = 5,
) -> dict[str, dict]:
    """Run the strategy inside each coverage tercile against the same-universe
    buy-and-hold sleeve.

    Scores come from the full-panel model; only the eligible universe is
    restricted. Terciles smaller than the basket shrink it with a warning.
    """
    out: dict[str, dict] = {}
    for label in ("Low", "Mid", "High"):
        members = coverage.tercile_members(label)
        if not members:
            raise ValidationError(f"tercile {label} is empty")
        k = min(k_per_stratum, len(members))
        if k < k_per_stratum:
            logger.warning(
                "tercile %s has %d tickers < k=%d; basket shrinks",
                label, len(members), k_per_stratum,
            )
        cfg = BacktestConfig(
            k=k, cost_rate=config.cost_rate, universe=tuple(members), period=config.period
        )
        strat = backtest_topk(scores, panel, cfg)
        bench = baseline(panel, "ew_buy_and_hold", cfg)
        out[label] = {"tickers": tuple(members), "strategy": strat, "benchmark": bench}
    return out


def subperiod_report(
    curve: EquityCurve,
    benchmark: EquityCurve,
    periods: list[tuple[str, str, str]],
) -> list[dict]:
    """Per-period breakdown: (name, start, end) -> days, CR, benchmark CR,
    excess, Sharpe.

    A period's compounded return covers the return observations whose dates
    fall inside it; the very first curve date carries no observation. Periods
    must lie inside the curve and must not overlap.
    """
    from .metrics import sharpe_ratio

    if tuple(curve.dates) != tuple(benchmark.dates):
        raise ValidationError("curve and benchmark calendars differ")
    seen: list[tuple[str, str]] = []
    rows = []
    for name, start, end in periods:
        if start > end:
            raise RangeError(f"period {name}: start {start} after end {end}")
        for s2, e2 in seen:
            if start <= e2 and s2 <= end:
                raise ValidationError(f"period {name} overlaps an earlier period")
        seen.append((start, end))
        idx = [
            i for i, d in enumerate(curve.dates)
            if start <= d <= end and i > 0
        ]
        if not idx:
            raise RangeError(f"period {name}: no return observations in [{start}, {end}]")
        r = curve.daily_returns[idx]
        rb = benchmark.daily_returns[idx]
        cr = float(np.prod(1.0 + r) - 1.0)
        cr_b = float(np.prod(1.0 + rb) - 1.0)
        try:
            sharpe = sharpe_ratio(r)
        except LabError:
            sharpe = float("nan")  # degenerate period (too short or flat)
        rows.append({
            "period": name,
            "start": start,
            "end": end,
            "days": len(idx),
            "cr": cr,
            "benchmark_cr": cr_b,
            "excess_cr": cr - cr_b,
            "sharpe": sharpe,
        })
    return rows
