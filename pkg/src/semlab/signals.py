"""Four-axis news signals: article records, trailing-window aggregation to a
trading panel with neutral defaults, coverage accounting, masking, and the
effective-dimensionality check.

An article carries four integer scores in {1..5} (sentiment, risk,
confidence, volatility_forecast). The trading panel holds per-(date, ticker)
per-axis means over a trailing trading-day window; cells with no news get the
neutral vector (3, 3, 3, 3) and a cleared presence flag. Presence — not the
score value — defines coverage: news that happens to average exactly 3.0 is
still covered.
"""

from __future__ import annotations

import csv
import hashlib
from bisect import bisect_left
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, RankError, ValidationError

AXES = ("sentiment", "risk", "confidence", "volatility_forecast")
NEUTRAL = 3.0

# Default per-axis score distributions for the mock scorer, over {1..5}.
# Chosen so the axis means land on 3.35 / 2.47 / 3.51 / 2.74 with the
# right-skewed risk/volatility shape typical of financial headlines.
DEFAULT_SCORE_DISTRIBUTIONS: dict[str, tuple[float, ...]] = {
    "sentiment": (0.05, 0.15, 0.35, 0.30, 0.15),
    "risk": (0.20, 0.35, 0.28, 0.12, 0.05),
    "confidence": (0.02, 0.08, 0.38, 0.41, 0.11),
    "volatility_forecast": (0.10, 0.30, 0.39, 0.18, 0.03),
}


@dataclass(frozen=True)
class ArticleScore:
    """One scored article: integer scores per axis, tagged to a ticker and date."""

    ticker: str
    published: str  # ISO calendar date
    scores: tuple[int, int, int, int]
    source_id: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "scores", tuple(int(s) for s in self.scores))
        if len(self.scores) != 4:
            raise ValidationError(f"expected 4 scores, got {len(self.scores)}")
        for axis, s in zip(AXES, self.scores):
            if not 1 <= s <= 5:
                raise ValidationError(
                    f"{axis} score {s} outside [1, 5] for ({self.published}, {self.ticker})"
                )


def _frozen_array(arr: np.ndarray, dtype) -> np.ndarray:
    out = np.array(arr, dtype=dtype, copy=True)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class SignalPanel:
    """Per-(date, ticker) four-axis signal means with presence flags.

    ``non_neutral[d, t]`` is the presence flag set at aggregation time;
    wherever it is False the stored vector equals the neutral default
    bit-exactly. ``masked_axes`` records evaluation-time masking; once every
    axis is masked no cell carries content and the flags clear.
    """

    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    values: np.ndarray  # (dates, tickers, 4)
    non_neutral: np.ndarray  # (dates, tickers) bool
    masked_axes: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        object.__setattr__(self, "masked_axes", frozenset(self.masked_axes))
        values = _frozen_array(self.values, float)
        flags = _frozen_array(self.non_neutral, bool)
        shape = (len(self.dates), len(self.tickers))
        if values.shape != shape + (4,):
            raise ValidationError(f"values shape {values.shape}, expected {shape + (4,)}")
        if flags.shape != shape:
            raise ValidationError(f"non_neutral shape {flags.shape}, expected {shape}")
        if values.size and (values.min() < 1.0 or values.max() > 5.0):
            raise ValidationError("signal values outside [1, 5]")
        if not np.all(values[~flags] == NEUTRAL):
            raise ValidationError("neutral cells must hold the neutral default exactly")
        bad = self.masked_axes - set(AXES)
        if bad:
            raise ValidationError(f"unknown axis names: {sorted(bad)}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "non_neutral", flags)

    @property
    def deviations(self) -> np.ndarray:
        """(dates, tickers, 4) signal deviations from the neutral default."""
        return self.values - NEUTRAL

    def axis(self, name: str) -> np.ndarray:
        if name not in AXES:
            raise ValidationError(f"unknown axis {name!r}")
        return self.values[:, :, AXES.index(name)]

    def slice_dates(self, start: str, end: str) -> "SignalPanel":
        keep = [i for i, d in enumerate(self.dates) if start <= d <= end]
        if not keep:
            raise ValidationError(f"no signal dates in [{start}, {end}]")
        sl = slice(keep[0], keep[-1] + 1)
        return SignalPanel(
            dates=self.dates[sl], tickers=self.tickers,
            values=self.values[sl], non_neutral=self.non_neutral[sl],
            masked_axes=self.masked_axes,
        )

    def restrict(self, tickers: list[str] | tuple[str, ...]) -> "SignalPanel":
        missing = [t for t in tickers if t not in self.tickers]
        if missing:
            raise ValidationError(f"tickers not in panel: {missing}")
        idx = [self.tickers.index(t) for t in tickers]
        return SignalPanel(
            dates=self.dates, tickers=tuple(tickers),
            values=self.values[:, idx], non_neutral=self.non_neutral[:, idx],
            masked_axes=self.masked_axes,
        )

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(",".join(self.dates).encode())
        h.update(",".join(self.tickers).encode())
        h.update(np.ascontiguousarray(self.values).tobytes())
        h.update(np.ascontiguousarray(self.non_neutral).tobytes())
        h.update(",".join(sorted(self.masked_axes)).encode())
        return h.hexdigest()

    def equals(self, other: "SignalPanel") -> bool:
        return (
            self.dates == other.dates
            and self.tickers == other.tickers
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.non_neutral, other.non_neutral)
            and self.masked_axes == other.masked_axes
        )


@dataclass(frozen=True)
class CoverageReport:
    """Per-ticker coverage fractions and tercile labels.

    ``any_fraction`` counts stock-days with news present (the presence flag);
    ``value_fractions`` counts stock-days whose stored score differs from 3.0,
    per axis and for any axis — the imputation-based definition, reported
    side by side because news can average to exactly 3.0.
    """

    tickers: tuple[str, ...]
    any_fraction: dict[str, float]
    value_fractions: dict[str, dict[str, float]]  # ticker -> axis/"any" -> fraction
    terciles: dict[str, str]  # ticker -> "Low" | "Mid" | "High"

    def tercile_members(self, label: str) -> list[str]:
        return [t for t in self.tickers if self.terciles[t] == label]


@dataclass(frozen=True)
class AggregationReport:
    """Articles that could not be placed on the panel."""

    unmatched_tickers: tuple[ArticleScore, ...]
    out_of_calendar: tuple[ArticleScore, ...]

    @property
    def total(self) -> int:
        return len(self.unmatched_tickers) + len(self.out_of_calendar)


# ---------------------------------------------------------------------------
# Mock scorer
# ---------------------------------------------------------------------------

def mock_score(
    text: str,
    ticker: str,
    seed: int,
    published: str = "",
    distributions: dict[str, tuple[float, ...]] | None = None,
) -> ArticleScore:
    """Deterministic hash-based stand-in for a hosted scoring model.

    The (text, ticker, seed) triple is hashed into one uniform draw per axis
    and pushed through the axis distribution's inverse CDF, so the same
    inputs always produce the same integer scores and the sample shape tracks
    the configured distributions. Never fails, even on empty text.
    """
    dists = DEFAULT_SCORE_DISTRIBUTIONS if distributions is None else distributions
    scores = []
    for axis in AXES:
        probs = dists[axis]
        if len(probs) != 5 or abs(sum(probs) - 1.0) > 1e-9 or min(probs) < 0:
            raise ValidationError(f"bad score distribution for {axis}")
        digest = hashlib.blake2b(
            f"{seed}|{axis}|{ticker}|{text}".encode(), digest_size=8
        ).digest()
        u = int.from_bytes(digest, "big") / 2**64
        cum = 0.0
        value = 5
        for level, p in enumerate(probs, start=1):
            cum += p
            if u < cum:
                value = level
                break
        scores.append(value)
    return ArticleScore(
        ticker=ticker,
        published=published,
        scores=tuple(scores),
        source_id=hashlib.blake2b(f"{ticker}|{text}".encode(), digest_size=6).hexdigest(),
    )


# ---------------------------------------------------------------------------
# Aggregation
# ---------------------------------------------------------------------------

def aggregate_signals(
    articles: list[ArticleScore],
    calendar: list[str] | tuple[str, ...],
    tickers: list[str] | tuple[str, ...],
    window: int = 3,
) -> tuple[SignalPanel, AggregationReport]:
    """Aggregate article scores onto the trading calendar.

    Each (day d, ticker) cell averages, per axis, every article published in
    the trailing window of ``window`` trading days ending at d (both ends
    inclusive). Articles dated between trading days roll forward to the next
    trading day. Cells with no articles get the neutral default and a cleared
    presence flag. Articles for unknown tickers or beyond the calendar are
    returned in the report, never silently dropped.
    """
    calendar = tuple(calendar)
    tickers = tuple(tickers)
    if not calendar:
        raise ValidationError("calendar is empty")
    if window < 0:
        raise ValidationError(f"window must be >= 0, got {window}")
    for d1, d2 in zip(calendar, calendar[1:]):
        if d2 <= d1:
            raise ValidationError(f"calendar not strictly increasing at {d1!r} -> {d2!r}")
    ticker_idx = {t: j for j, t in enumerate(tickers)}

    n_d, n_t = len(calendar), len(tickers)
    sums = np.zeros((n_d, n_t, 4))
    counts = np.zeros((n_d, n_t), dtype=int)
    unmatched: list[ArticleScore] = []
    out_of_range: list[ArticleScore] = []
    for art in articles:
        j = ticker_idx.get(art.ticker)
        if j is None:
            unmatched.append(art)
            continue
        # next trading day at or after the publication date; articles dated
        # before the calendar starts or after it ends cannot be placed
        if art.published < calendar[0]:
            out_of_range.append(art)
            continue
        pos = bisect_left(calendar, art.published)
        if pos >= n_d:
            out_of_range.append(art)
            continue
        lo, hi = pos, min(pos + window, n_d - 1)
        sums[lo : hi + 1, j] += np.asarray(art.scores, dtype=float)
        counts[lo : hi + 1, j] += 1

    values = np.full((n_d, n_t, 4), NEUTRAL)
    flags = counts > 0
    values[flags] = sums[flags] / counts[flags, None]
    panel = SignalPanel(dates=calendar, tickers=tickers, values=values, non_neutral=flags)
    report = AggregationReport(
        unmatched_tickers=tuple(unmatched), out_of_calendar=tuple(out_of_range)
    )
    return panel, report


def coverage_stats(panel: SignalPanel) -> CoverageReport:
    """Per-ticker coverage fractions and tercile assignment.

    Terciles split the universe into Low/Mid/High by presence-based any-axis
    coverage, ties broken lexicographically by ticker; group sizes differ by
    at most one (extra names land in the lower groups first).
    """
    n_d = len(panel.dates)
    any_frac: dict[str, float] = {}
    value_fracs: dict[str, dict[str, float]] = {}
    for j, t in enumerate(panel.tickers):
        present = panel.non_neutral[:, j]
        any_frac[t] = float(present.sum()) / n_d if n_d else 0.0
        per_axis = {
            axis: float((panel.values[:, j, a] != NEUTRAL).sum()) / n_d if n_d else 0.0
            for a, axis in enumerate(AXES)
        }
        per_axis["any"] = (
            float((panel.values[:, j] != NEUTRAL).any(axis=1).sum()) / n_d if n_d else 0.0
        )
        value_fracs[t] = per_axis

    order = sorted(panel.tickers, key=lambda t: (any_frac[t], t))
    groups = np.array_split(np.array(order, dtype=object), 3)
    terciles: dict[str, str] = {}
    for label, group in zip(("Low", "Mid", "High"), groups):
        for t in group:
            terciles[str(t)] = label
    return CoverageReport(
        tickers=panel.tickers,
        any_fraction=any_frac,
        value_fractions=value_fracs,
        terciles=terciles,
    )


def mask_axes(panel: SignalPanel, axes: set[str] | frozenset[str] | str) -> SignalPanel:
    """Return a copy with the selected coordinates pinned to 3.0 everywhere.

    ``axes`` is a set of axis names or the string "ALL". Other coordinates
    are untouched and the input panel is never modified. Masks accumulate:
    once all four axes are masked, no cell carries content and the presence
    flags clear. Masking is a projection — repeating or splitting the same
    mask set gives an identical panel.
    """
    if isinstance(axes, str):
        if axes != "ALL":
            raise ValidationError(f"unknown axis name {axes!r} (did you mean 'ALL'?)")
        axes = set(AXES)
    axes = set(axes)
    unknown = axes - set(AXES)
    if unknown:
        raise ValidationError(f"unknown axis names: {sorted(unknown)}")
    masked = frozenset(panel.masked_axes | axes)
    values = np.array(panel.values, copy=True)
    for a, axis in enumerate(AXES):
        if axis in masked:
            values[:, :, a] = NEUTRAL
    flags = panel.non_neutral if masked != set(AXES) else np.zeros_like(panel.non_neutral)
    return SignalPanel(
        dates=panel.dates, tickers=panel.tickers,
        values=values, non_neutral=flags, masked_axes=masked,
    )


# ---------------------------------------------------------------------------
# Effective dimensionality
# ---------------------------------------------------------------------------

def pca_effective_dim(panel: SignalPanel) -> tuple[np.ndarray, np.ndarray]:
    """Principal components of the standardised axis values over stock-days
    with news present.

    Returns (first-component loadings, explained-variance fractions sorted
    descending). The leading component's sign is fixed so its sentiment
    loading is non-negative. Fractions sum to one.
    """
    rows = panel.values[panel.non_neutral]
    if rows.shape[0] < 5:
        raise RankError(
            f"need at least 5 non-neutral stock-days, have {rows.shape[0]}"
        )
    mean = rows.mean(axis=0)
    std = rows.std(axis=0, ddof=1)
    if np.any(std == 0):
        flat = [AXES[a] for a in np.where(std == 0)[0]]
        raise RankError(f"constant axis values over non-neutral stock-days: {flat}")
    z = (rows - mean) / std
    corr = (z.T @ z) / (rows.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(corr)
    order = np.argsort(eigvals)[::-1]
    eigvals = np.maximum(eigvals[order], 0.0)
    eigvecs = eigvecs[:, order]
    loadings = eigvecs[:, 0]
    if loadings[AXES.index("sentiment")] < 0:
        loadings = -loadings
    explained = eigvals / eigvals.sum()
    return loadings, explained


# ---------------------------------------------------------------------------
# Article score cache interchange format
# ---------------------------------------------------------------------------

CACHE_HEADER = ("source_id", "ticker", "date") + AXES


def write_article_scores(articles: list[ArticleScore], path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CACHE_HEADER)
        for art in articles:
            writer.writerow([art.source_id, art.ticker, art.published, *art.scores])


def load_article_scores(path: str) -> list[ArticleScore]:
    """Read the delimited cache ``source_id,ticker,date,<four integer scores>``."""
    out: list[ArticleScore] = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if tuple(h.strip() for h in header) != CACHE_HEADER:
            raise ParseError(f"{path}: line 1: expected header {','.join(CACHE_HEADER)}")
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != 7:
                raise ParseError(f"{path}: line {lineno}: expected 7 fields, got {len(row)}")
            try:
                scores = tuple(int(x) for x in row[3:7])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            try:
                out.append(
                    ArticleScore(
                        source_id=row[0].strip(),
                        ticker=row[1].strip(),
                        published=row[2].strip(),
                        scores=scores,
                    )
                )
            except ValidationError as exc:
                raise ValidationError(f"{path}: line {lineno}: {exc}") from None
    return out
