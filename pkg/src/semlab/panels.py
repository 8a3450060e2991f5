"""Price panels, technical features, forward returns, and the turbulence index.

The panel is the numerical substrate for everything else: a dense
(date x ticker) grid of closes (plus optional open/high/low/volume) with a
strictly increasing trading calendar. Loading is strict by design — tickers
with missing dates produce an alignment error rather than a silent
forward-fill, so every downstream estimator sees identical inputs.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass

import numpy as np

from .errors import (
    AlignmentError,
    NumericalError,
    ParseError,
    RangeError,
    ValidationError,
    WarmupError,
)

PANEL_HEADER = ("date", "ticker", "open", "high", "low", "close", "volume")

# Standard indicator inventory. The default layout carries all eight names;
# the observation dimension downstream is driven by whatever list is
# configured here, so shorter lists are fully supported.
INDICATORS_ALL = (
    "macd",
    "boll_ub",
    "boll_lb",
    "rsi_30",
    "cci_30",
    "adx_30",
    "sma_30",
    "sma_60",
)
INDICATORS_NO_SMA60 = INDICATORS_ALL[:-1]

_INDICATOR_WARMUP = {
    "macd": 0,
    "boll_ub": 19,
    "boll_lb": 19,
    "rsi_30": 30,
    "cci_30": 29,
    "adx_30": 59,
    "sma_30": 29,
    "sma_60": 59,
}


def _freeze(arr: np.ndarray | None) -> np.ndarray | None:
    if arr is None:
        return None
    out = np.array(arr, dtype=float, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class MarketPanel:
    """Aligned (date x ticker) price grid, immutable after construction."""

    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    close: np.ndarray
    volume: np.ndarray | None = None
    open: np.ndarray | None = None
    high: np.ndarray | None = None
    low: np.ndarray | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        for d1, d2 in zip(self.dates, self.dates[1:]):
            if d2 <= d1:
                raise ValidationError(f"dates not strictly increasing at {d1!r} -> {d2!r}")
        shape = (len(self.dates), len(self.tickers))
        for name in ("close", "volume", "open", "high", "low"):
            arr = getattr(self, name)
            if arr is None:
                continue
            arr = _freeze(arr)
            if arr.shape != shape:
                raise ValidationError(f"{name} has shape {arr.shape}, expected {shape}")
            object.__setattr__(self, name, arr)
        if not np.all(self.close > 0):
            d, t = np.argwhere(~(self.close > 0))[0]
            raise ValidationError(
                f"non-positive close at ({self.dates[d]}, {self.tickers[t]})"
            )

    @property
    def n_dates(self) -> int:
        return len(self.dates)

    @property
    def n_tickers(self) -> int:
        return len(self.tickers)

    def date_index(self, date: str) -> int:
        try:
            return self.dates.index(date)
        except ValueError:
            raise RangeError(f"date {date} not in panel calendar") from None

    def slice_dates(self, start: str, end: str) -> "MarketPanel":
        """Sub-panel with start <= date <= end (ISO strings compare correctly)."""
        keep = [i for i, d in enumerate(self.dates) if start <= d <= end]
        if not keep:
            raise RangeError(f"no panel dates in [{start}, {end}]")
        sl = slice(keep[0], keep[-1] + 1)
        return MarketPanel(
            dates=self.dates[sl],
            tickers=self.tickers,
            close=self.close[sl],
            volume=None if self.volume is None else self.volume[sl],
            open=None if self.open is None else self.open[sl],
            high=None if self.high is None else self.high[sl],
            low=None if self.low is None else self.low[sl],
        )

    def restrict(self, tickers: list[str] | tuple[str, ...]) -> "MarketPanel":
        """Sub-panel keeping only the given tickers, in the given order."""
        missing = [t for t in tickers if t not in self.tickers]
        if missing:
            raise ValidationError(f"tickers not in panel: {missing}")
        idx = [self.tickers.index(t) for t in tickers]
        return MarketPanel(
            dates=self.dates,
            tickers=tuple(tickers),
            close=self.close[:, idx],
            volume=None if self.volume is None else self.volume[:, idx],
            open=None if self.open is None else self.open[:, idx],
            high=None if self.high is None else self.high[:, idx],
            low=None if self.low is None else self.low[:, idx],
        )

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(",".join(self.dates).encode())
        h.update(",".join(self.tickers).encode())
        for arr in (self.close, self.volume, self.open, self.high, self.low):
            if arr is not None:
                h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass(frozen=True)
class FeaturePanel:
    """Per-(date, ticker) technical indicator block with a flagged warm-up prefix.

    Rows before ``warmup`` may contain NaN; rows at or past it are finite
    everywhere. The indicator list and ordering are fixed per run.
    """

    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    values: np.ndarray  # (dates, tickers, indicators)
    names: tuple[str, ...]
    warmup: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "names", tuple(self.names))
        values = _freeze(self.values)
        expected = (len(self.dates), len(self.tickers), len(self.names))
        if values.shape != expected:
            raise ValidationError(f"values shape {values.shape}, expected {expected}")
        if not np.all(np.isfinite(values[self.warmup :])):
            raise ValidationError("non-finite indicator values past the warm-up prefix")
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class TurbulenceSeries:
    """Per-date cross-sectional turbulence (squared Mahalanobis distance).

    Warm-up entries are NaN, never zero-filled; ``available`` marks the rows
    with a defined value. Days whose value exceeds ``threshold`` set the
    no-buy gate.
    """

    dates: tuple[str, ...]
    values: np.ndarray
    threshold: float = 380.0
    window: int = 252

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        values = _freeze(self.values)
        finite = values[np.isfinite(values)]
        if finite.size and finite.min() < 0:
            raise ValidationError("turbulence values must be non-negative")
        object.__setattr__(self, "values", values)

    @property
    def available(self) -> np.ndarray:
        return np.isfinite(self.values)

    def gate(self, threshold: float | None = None) -> np.ndarray:
        """Boolean no-buy flag per date: value strictly above the threshold."""
        thr = self.threshold if threshold is None else threshold
        out = np.zeros(len(self.dates), dtype=bool)
        avail = self.available
        out[avail] = self.values[avail] > thr
        return out


# ---------------------------------------------------------------------------
# Loading
# ---------------------------------------------------------------------------

def load_price_panel(path: str, fmt: str = "long") -> MarketPanel:
    """Load the long-form delimited panel ``date,ticker,open,high,low,close,volume``.

    Every ticker must cover the full union calendar; gaps raise an
    AlignmentError listing the missing (ticker, date) pairs instead of being
    forward-filled.
    """
    if fmt != "long":
        raise ValidationError(f"unknown panel format {fmt!r}")
    rows: dict[tuple[str, str], tuple[float, float, float, float, float]] = {}
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != PANEL_HEADER:
            raise ParseError(
                f"{path}: line 1: expected header {','.join(PANEL_HEADER)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 7:
                raise ParseError(f"{path}: line {lineno}: expected 7 fields, got {len(row)}")
            date, ticker = row[0].strip(), row[1].strip()
            if len(date) != 10 or date[4] != "-" or date[7] != "-":
                raise ParseError(f"{path}: line {lineno}: bad date {date!r} (want YYYY-MM-DD)")
            try:
                o, h, lo, c, v = (float(x) for x in row[2:7])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if c <= 0 or o <= 0 or h <= 0 or lo <= 0:
                raise ValidationError(
                    f"{path}: non-positive price at ({date}, {ticker}), line {lineno}"
                )
            if (date, ticker) in rows:
                raise ParseError(f"{path}: line {lineno}: duplicate row for ({date}, {ticker})")
            rows[(date, ticker)] = (o, h, lo, c, v)

    dates = sorted({d for d, _ in rows})
    tickers = sorted({t for _, t in rows})
    if not dates:
        raise AlignmentError(f"{path}: no data rows")
    missing = [(t, d) for t in tickers for d in dates if (d, t) not in rows]
    if missing:
        gaps = "; ".join(f"{t} missing {d}" for t, d in missing[:20])
        more = "" if len(missing) <= 20 else f" (+{len(missing) - 20} more)"
        raise AlignmentError(f"{path}: calendar gaps: {gaps}{more}")

    shape = (len(dates), len(tickers))
    o = np.empty(shape)
    h = np.empty(shape)
    lo = np.empty(shape)
    c = np.empty(shape)
    v = np.empty(shape)
    for i, d in enumerate(dates):
        for j, t in enumerate(tickers):
            o[i, j], h[i, j], lo[i, j], c[i, j], v[i, j] = rows[(d, t)]
    return MarketPanel(
        dates=tuple(dates), tickers=tuple(tickers),
        close=c, volume=v, open=o, high=h, low=lo,
    )


def write_price_panel(panel: MarketPanel, path: str) -> None:
    """Write a panel back to the long-form interchange format."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PANEL_HEADER)
        for i, d in enumerate(panel.dates):
            for j, t in enumerate(panel.tickers):
                writer.writerow([
                    d, t,
                    repr(float(panel.open[i, j])) if panel.open is not None else repr(float(panel.close[i, j])),
                    repr(float(panel.high[i, j])) if panel.high is not None else repr(float(panel.close[i, j])),
                    repr(float(panel.low[i, j])) if panel.low is not None else repr(float(panel.close[i, j])),
                    repr(float(panel.close[i, j])),
                    repr(float(panel.volume[i, j])) if panel.volume is not None else "0.0",
                ])


# ---------------------------------------------------------------------------
# Technical indicators
# ---------------------------------------------------------------------------

def _ema(x: np.ndarray, span: int) -> np.ndarray:
    """Recursive exponential mean, seeded with the first observation."""
    alpha = 2.0 / (span + 1.0)
    out = np.empty_like(x)
    out[0] = x[0]
    for i in range(1, len(x)):
        out[i] = alpha * x[i] + (1 - alpha) * out[i - 1]
    return out


def _wilder(x: np.ndarray, n: int, seed_rows: int | None = None) -> np.ndarray:
    """Wilder smoothing: simple-average seed over the first n rows, then
    s[i] = s[i-1] + (x[i] - s[i-1]) / n. Leading rows before the seed are NaN."""
    k = n if seed_rows is None else seed_rows
    out = np.full(len(x), np.nan)
    if len(x) < k:
        return out
    out[k - 1] = np.mean(x[:k])
    for i in range(k, len(x)):
        out[i] = out[i - 1] + (x[i] - out[i - 1]) / n
    return out


def _rolling_mean(x: np.ndarray, n: int) -> np.ndarray:
    out = np.full(len(x), np.nan)
    if len(x) >= n:
        c = np.concatenate([[0.0], np.cumsum(x)])
        out[n - 1 :] = (c[n:] - c[:-n]) / n
    return out


def _rolling_std(x: np.ndarray, n: int) -> np.ndarray:
    # Population std over the window; two-pass per window keeps it robust
    # to the catastrophic cancellation the cumsum-of-squares shortcut invites.
    out = np.full(len(x), np.nan)
    for i in range(n - 1, len(x)):
        out[i] = np.std(x[i - n + 1 : i + 1])
    return out


def _rsi(close: np.ndarray, n: int) -> np.ndarray:
    delta = np.diff(close, prepend=close[0])
    gains = np.maximum(delta, 0.0)
    losses = np.maximum(-delta, 0.0)
    # skip the synthetic first delta when seeding
    avg_gain = _wilder(gains[1:], n)
    avg_loss = _wilder(losses[1:], n)
    out = np.full(len(close), np.nan)
    for i in range(n, len(close)):
        g, l = avg_gain[i - 1], avg_loss[i - 1]
        if g == 0.0 and l == 0.0:
            out[i] = 50.0  # flat-series convention
        elif l == 0.0:
            out[i] = 100.0
        else:
            out[i] = 100.0 - 100.0 / (1.0 + g / l)
    return out


def _cci(high: np.ndarray, low: np.ndarray, close: np.ndarray, n: int) -> np.ndarray:
    tp = (high + low + close) / 3.0
    sma = _rolling_mean(tp, n)
    out = np.full(len(close), np.nan)
    for i in range(n - 1, len(close)):
        window = tp[i - n + 1 : i + 1]
        md = np.mean(np.abs(window - sma[i]))
        out[i] = 0.0 if md == 0.0 else (tp[i] - sma[i]) / (0.015 * md)
    return out


def _adx(high: np.ndarray, low: np.ndarray, close: np.ndarray, n: int) -> np.ndarray:
    m = len(close)
    up = np.zeros(m)
    dn = np.zeros(m)
    tr = np.zeros(m)
    for i in range(1, m):
        up_move = high[i] - high[i - 1]
        dn_move = low[i - 1] - low[i]
        up[i] = up_move if (up_move > dn_move and up_move > 0) else 0.0
        dn[i] = dn_move if (dn_move > up_move and dn_move > 0) else 0.0
        tr[i] = max(high[i] - low[i], abs(high[i] - close[i - 1]), abs(low[i] - close[i - 1]))
    s_up = _wilder(up[1:], n)
    s_dn = _wilder(dn[1:], n)
    s_tr = _wilder(tr[1:], n)
    dx = np.full(m, np.nan)
    for i in range(n, m):
        atr = s_tr[i - 1]
        if atr == 0.0:
            dx[i] = 0.0
            continue
        di_p = 100.0 * s_up[i - 1] / atr
        di_m = 100.0 * s_dn[i - 1] / atr
        denom = di_p + di_m
        dx[i] = 0.0 if denom == 0.0 else 100.0 * abs(di_p - di_m) / denom
    out = np.full(m, np.nan)
    smoothed = _wilder(dx[n:], n)
    out[2 * n - 1 :] = smoothed[n - 1 :]
    return out


def compute_indicators(
    panel: MarketPanel, names: tuple[str, ...] = INDICATORS_ALL
) -> FeaturePanel:
    """Compute the configured indicator block for every ticker.

    Formulas are the textbook conventions: MACD = EMA12 - EMA26 (recursive,
    first-value seed), Bollinger bands at SMA20 +/- 2 population sigma,
    RSI/ADX with Wilder smoothing over 30 periods, CCI with the 0.015
    constant, plain rolling means for the SMAs. Deterministic for fixed
    input. CCI and ADX need high/low columns.
    """
    unknown = [n for n in names if n not in _INDICATOR_WARMUP]
    if unknown:
        raise ValidationError(f"unknown indicator names: {unknown}")
    warmup = max(_INDICATOR_WARMUP[n] for n in names)
    if panel.n_dates < warmup + 1:
        longest = max(names, key=lambda n: _INDICATOR_WARMUP[n])
        raise WarmupError(
            f"{longest} requires at least {warmup + 1} rows, panel has {panel.n_dates}"
        )
    needs_hl = any(n.startswith(("cci", "adx")) for n in names)
    if needs_hl and (panel.high is None or panel.low is None):
        raise ValidationError("cci/adx indicators require high and low columns")

    values = np.full((panel.n_dates, panel.n_tickers, len(names)), np.nan)
    for j in range(panel.n_tickers):
        close = panel.close[:, j]
        high = panel.high[:, j] if panel.high is not None else close
        low = panel.low[:, j] if panel.low is not None else close
        for k, name in enumerate(names):
            if name == "macd":
                col = _ema(close, 12) - _ema(close, 26)
            elif name == "boll_ub":
                col = _rolling_mean(close, 20) + 2.0 * _rolling_std(close, 20)
            elif name == "boll_lb":
                col = _rolling_mean(close, 20) - 2.0 * _rolling_std(close, 20)
            elif name == "rsi_30":
                col = _rsi(close, 30)
            elif name == "cci_30":
                col = _cci(high, low, close, 30)
            elif name == "adx_30":
                col = _adx(high, low, close, 30)
            elif name == "sma_30":
                col = _rolling_mean(close, 30)
            elif name == "sma_60":
                col = _rolling_mean(close, 60)
            values[:, j, k] = col
    return FeaturePanel(
        dates=panel.dates, tickers=panel.tickers, values=values,
        names=tuple(names), warmup=warmup,
    )


# ---------------------------------------------------------------------------
# Turbulence and returns
# ---------------------------------------------------------------------------

def simple_returns(panel: MarketPanel) -> np.ndarray:
    """(dates, tickers) simple daily returns; the first row is NaN."""
    out = np.full_like(panel.close, np.nan)
    out[1:] = panel.close[1:] / panel.close[:-1] - 1.0
    return out


def compute_turbulence(
    panel: MarketPanel, window: int = 252, threshold: float = 380.0
) -> TurbulenceSeries:
    """Squared Mahalanobis distance of each day's cross-sectional return vector
    against the mean and covariance of the trailing ``window`` days (the day
    itself excluded). The covariance gets a fixed diagonal ridge of
    1e-6 * trace/N so near-singular windows stay invertible.
    """
    n = panel.n_tickers
    if window < n + 2:
        raise ValidationError(f"window {window} must be >= tickers + 2 = {n + 2}")
    rets = simple_returns(panel)
    values = np.full(panel.n_dates, np.nan)
    for d in range(window + 1, panel.n_dates):
        hist = rets[d - window : d]
        mu = hist.mean(axis=0)
        cov = np.cov(hist, rowvar=False, ddof=1)
        cov = np.atleast_2d(cov)
        ridge = 1e-6 * np.trace(cov) / n
        cov[np.diag_indices_from(cov)] += ridge
        diff = rets[d] - mu
        if not diff.any():
            values[d] = 0.0  # day identical to the trailing mean
            continue
        try:
            sol = np.linalg.solve(cov, diff)
        except np.linalg.LinAlgError:
            raise NumericalError(
                f"singular return covariance at {panel.dates[d]}"
            ) from None
        values[d] = max(0.0, float(diff @ sol))
    return TurbulenceSeries(dates=panel.dates, values=values, threshold=threshold, window=window)


def forward_returns(panel: MarketPanel, horizon: int) -> np.ndarray:
    """(dates, tickers) simple returns close[d+h]/close[d] - 1.

    The last ``horizon`` rows are NaN (unavailable), never zero.
    """
    if horizon < 1:
        raise ValidationError(f"horizon must be >= 1, got {horizon}")
    if horizon >= panel.n_dates:
        raise RangeError(
            f"horizon {horizon} >= panel length {panel.n_dates}"
        )
    out = np.full_like(panel.close, np.nan)
    out[:-horizon] = panel.close[horizon:] / panel.close[:-horizon] - 1.0
    return out
