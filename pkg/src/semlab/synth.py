"""Seeded synthetic market/signal panels with a planted signal-return link.

Prices follow a geometric random walk; sparse four-axis signals appear with a
configurable per-ticker coverage fraction, and each axis deviation feeds the
next ``horizon`` days of returns with a planted coefficient. The generator
returns the ground truth so oracle tests can check recovery, and is
bit-identical for a fixed seed.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .panels import MarketPanel
from .signals import (
    AXES,
    DEFAULT_SCORE_DISTRIBUTIONS,
    NEUTRAL,
    SignalPanel,
)


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for one synthetic panel.

    ``coverage`` and ``volatility``/``drift`` accept a scalar (shared) or a
    per-ticker list. ``beta`` is the per-axis coefficient from signal
    deviation to the ``horizon``-day forward return; ``beta_tickers`` limits
    the planted effect to a subset (everyone else gets zero).
    """

    tickers: tuple[str, ...] | int
    days: int
    start_date: str = "2015-01-02"
    drift: tuple[float, ...] = ()
    volatility: tuple[float, ...] = ()
    coverage: tuple[float, ...] = ()
    beta: tuple[float, float, float, float] = (0.0, 0.0, 0.0, 0.0)
    beta_tickers: tuple[str, ...] | None = None
    horizon: int = 5
    initial_price: float = 100.0
    seed: int = 0

    def __post_init__(self) -> None:
        if isinstance(self.tickers, int):
            object.__setattr__(
                self, "tickers", tuple(f"SYN{i:02d}" for i in range(self.tickers))
            )
        object.__setattr__(self, "tickers", tuple(self.tickers))
        n = len(self.tickers)
        if n < 1 or self.days < 2:
            raise ValidationError("need at least 1 ticker and 2 days")

        def broadcast(name: str, values, default: float) -> tuple[float, ...]:
            if values is None or (hasattr(values, "__len__") and len(values) == 0):
                return (default,) * n
            if np.isscalar(values):
                return (float(values),) * n
            vals = tuple(float(v) for v in values)
            if len(vals) != n:
                raise ValidationError(f"{name} must be scalar or one value per ticker")
            return vals

        object.__setattr__(self, "drift", broadcast("drift", self.drift, 0.0002))
        object.__setattr__(self, "volatility", broadcast("volatility", self.volatility, 0.02))
        object.__setattr__(self, "coverage", broadcast("coverage", self.coverage, 0.2))
        if any(not 0.0 <= c <= 1.0 for c in self.coverage):
            raise ValidationError("coverage fractions must lie in [0, 1]")
        if any(v <= 0 for v in self.volatility):
            raise ValidationError("volatility must be positive")
        object.__setattr__(self, "beta", tuple(float(b) for b in self.beta))
        if len(self.beta) != 4:
            raise ValidationError("beta needs one coefficient per axis")
        if self.beta_tickers is not None:
            object.__setattr__(self, "beta_tickers", tuple(self.beta_tickers))
            unknown = set(self.beta_tickers) - set(self.tickers)
            if unknown:
                raise ValidationError(f"beta_tickers not in universe: {sorted(unknown)}")
        if self.horizon < 1:
            raise ValidationError("horizon must be >= 1")

    @staticmethod
    def from_dict(raw: dict) -> "SyntheticSpec":
        tickers = raw.get("tickers", 10)
        if not isinstance(tickers, int):
            tickers = tuple(tickers)
        known = {
            "days", "start_date", "drift", "volatility", "coverage",
            "beta", "beta_tickers", "horizon", "initial_price", "seed",
        }
        unknown = set(raw) - known - {"tickers"}
        if unknown:
            raise ValidationError(f"unknown synthetic-spec keys: {sorted(unknown)}")
        kwargs = {k: v for k, v in raw.items() if k in known}
        if "beta_tickers" in kwargs and kwargs["beta_tickers"] is not None:
            kwargs["beta_tickers"] = tuple(kwargs["beta_tickers"])
        if "beta" in kwargs:
            kwargs["beta"] = tuple(kwargs["beta"])
        if "days" not in kwargs:
            raise ValidationError("synthetic spec needs a 'days' field")
        return SyntheticSpec(tickers=tickers, **kwargs)

    @staticmethod
    def from_file(path: str) -> "SyntheticSpec":
        with open(path) as fh:
            raw = json.load(fh)
        return SyntheticSpec.from_dict(raw)


@dataclass(frozen=True)
class PlantedTruth:
    """Ground truth behind a synthetic panel, for oracle comparison."""

    beta: tuple[float, float, float, float]
    beta_tickers: tuple[str, ...]
    horizon: int
    coverage: tuple[float, ...]


def _business_days(start: str, count: int) -> tuple[str, ...]:
    start64 = np.datetime64(start, "D")
    if not np.is_busday(start64):
        start64 = np.busday_offset(start64, 0, roll="forward")
    days = np.busday_offset(start64, np.arange(count), roll="forward")
    return tuple(str(d) for d in days)


def synth_panel(spec: SyntheticSpec, seed: int | None = None) -> tuple[MarketPanel, SignalPanel, PlantedTruth]:
    """Generate (MarketPanel, SignalPanel, PlantedTruth) from a spec.

    Daily log returns are drift + vol * z plus, for each non-neutral signal
    on day d, beta . deviation / horizon added over days d+1 .. d+horizon, so
    the horizon-day forward return regresses on the deviation with the
    planted coefficients. Score levels come from the same distributions the
    mock scorer uses.
    """
    rng = np.random.default_rng(spec.seed if seed is None else seed)
    n_t = len(spec.tickers)
    n_d = spec.days
    dates = _business_days(spec.start_date, n_d)

    # sparse signals: one panel cell at a time, integer level means
    present = rng.random((n_d, n_t)) < np.asarray(spec.coverage)[None, :]
    probs = np.stack([DEFAULT_SCORE_DISTRIBUTIONS[a] for a in AXES])  # (4, 5)
    cdf = np.cumsum(probs, axis=1)
    u = rng.random((n_d, n_t, 4))
    levels = 1 + (u[..., None] >= cdf[None, None, :, :]).sum(axis=-1)
    levels = np.minimum(levels, 5)  # cumsum round-off guard
    values = np.where(present[:, :, None], levels.astype(float), NEUTRAL)
    sig = SignalPanel(dates=dates, tickers=spec.tickers, values=values, non_neutral=present)

    beta = np.asarray(spec.beta)
    beta_mask = np.ones(n_t, dtype=bool)
    if spec.beta_tickers is not None:
        beta_mask = np.array([t in spec.beta_tickers for t in spec.tickers])

    drift = np.asarray(spec.drift)
    vol = np.asarray(spec.volatility)
    log_rets = drift[None, :] + vol[None, :] * rng.standard_normal((n_d - 1, n_t))
    # planted effect: deviations on day d feed days d+1 .. d+horizon
    effect = (sig.deviations @ beta) * present * beta_mask[None, :]  # (n_d, n_t)
    per_day = effect / spec.horizon
    for lag in range(1, spec.horizon + 1):
        src_hi = n_d - lag
        if src_hi <= 0:
            break
        log_rets[lag - 1 :, :] += per_day[:src_hi, :]

    log_prices = np.concatenate(
        [np.zeros((1, n_t)), np.cumsum(log_rets, axis=0)], axis=0
    )
    close = spec.initial_price * np.exp(log_prices)

    # synthetic intraday range keeps high >= close >= low for the indicators
    spread = np.abs(rng.standard_normal((n_d, n_t, 2))) * 0.3 * vol[None, :, None]
    high = close * (1.0 + spread[:, :, 0])
    low = close / (1.0 + spread[:, :, 1])
    open_ = np.concatenate([close[:1], close[:-1]], axis=0)
    high = np.maximum(high, np.maximum(open_, close))
    low = np.minimum(low, np.minimum(open_, close))
    volume = np.exp(rng.normal(12.0, 0.5, size=(n_d, n_t)))

    mkt = MarketPanel(
        dates=dates, tickers=spec.tickers, close=close,
        volume=volume, open=open_, high=high, low=low,
    )
    truth = PlantedTruth(
        beta=spec.beta,
        beta_tickers=tuple(t for t, m in zip(spec.tickers, beta_mask) if m),
        horizon=spec.horizon,
        coverage=spec.coverage,
    )
    return mkt, sig, truth
