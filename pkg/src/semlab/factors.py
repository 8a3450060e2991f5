"""Linear composite models over the signal panel.

Everything here reduces to one shape: a frozen weight vector over named
features with a per-feature standardiser, fitted on one date range and only
ever applied outside it. Variants differ in the feature basis:

* deviation basis — per-axis deviations from the neutral default feed a
  ridge fit to forward returns (the factor-portfolio weights, optionally
  restricted to a single axis);
* residual basis — non-sentiment axes are first regressed on sentiment and
  the ridge runs on [sentiment deviation, residuals];
* data-driven composites — first principal component or the equal-weight
  mean of the standardised axes, no supervised fit at all;
* supervised forecaster — ridge from arbitrary named feature blocks
  (technical columns, dense text features) to forward returns, with an
  optional high-conviction semantic tilt selected on validation Sharpe.

Evaluating a model never mutates it; applying one to a date inside its fit
range raises a leakage error.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from .errors import (
    DegenerateFitError,
    LeakageError,
    ConfigError,
    RankError,
    ValidationError,
)
from .panels import MarketPanel
from .signals import AXES, NEUTRAL, SignalPanel

LAMBDA_GRID = (1e-5, 1e-3, 1e-1, 1.0, 10.0)
TILT_GRID = (0.0, 0.5, 1.0)
TEMPERATURE_GRID = (0.25, 0.5, 1.0, 2.0, 4.0)
DEFAULT_RIDGE = 1e-3


# ---------------------------------------------------------------------------
# Ridge core
# ---------------------------------------------------------------------------

def fit_ridge(
    X: np.ndarray,
    y: np.ndarray,
    lam: float = DEFAULT_RIDGE,
    fit_intercept: bool = True,
    feature_names: tuple[str, ...] | None = None,
) -> tuple[np.ndarray, float]:
    """Closed-form ridge: minimise ||y - Xw - b||^2 + lam ||w||^2.

    The intercept is unpenalised (handled by centering). At lam = 0 a rank
    check runs first and a rank error names the dependent columns.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.shape[0]:
        raise ValidationError(f"bad shapes X{X.shape} y{y.shape}")
    n, p = X.shape
    if p < 1 or n < p:
        raise ValidationError(f"need n >= p >= 1, got n={n} p={p}")
    if lam < 0:
        raise ValidationError(f"ridge strength must be >= 0, got {lam}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValidationError("non-finite values in the design or target")

    if fit_intercept:
        xm = X.mean(axis=0)
        ym = float(y.mean())
        Xc = X - xm
        yc = y - ym
    else:
        xm = np.zeros(p)
        ym = 0.0
        Xc, yc = X, y

    if lam == 0.0:
        rank = np.linalg.matrix_rank(Xc)
        if rank < p:
            _, _, piv = scipy.linalg.qr(Xc, pivoting=True, mode="economic")
            dep = sorted(int(i) for i in piv[rank:])
            names = (
                [feature_names[i] for i in dep]
                if feature_names is not None
                else [f"column {i}" for i in dep]
            )
            raise RankError(f"collinear columns at lam=0: {names}")

    A = Xc.T @ Xc + lam * np.eye(p)
    try:
        w = np.linalg.solve(A, Xc.T @ yc)
    except np.linalg.LinAlgError:
        raise RankError("normal equations singular") from None
    b = ym - float(xm @ w) if fit_intercept else 0.0
    return w, b


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------

def _resid_axis(name: str) -> str | None:
    return name[6:] if name.startswith("resid:") else None


@dataclass(frozen=True)
class FactorModel:
    """Frozen linear scoring rule: score = w . (x - mean)/std + intercept."""

    feature_names: tuple[str, ...]
    weights: np.ndarray
    intercept: float
    standardizer_mean: np.ndarray
    standardizer_std: np.ndarray
    ridge_strength: float
    fit_range: tuple[str, str]

    def __post_init__(self) -> None:
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        p = len(self.feature_names)
        for name in ("weights", "standardizer_mean", "standardizer_std"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            if arr.shape != (p,):
                raise ValidationError(f"{name} must have one entry per feature")
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        if np.any(self.standardizer_std <= 0):
            raise ValidationError("standardiser stds must be strictly positive")
        if not (len(self.fit_range) == 2 and self.fit_range[0] <= self.fit_range[1]):
            raise ValidationError(f"bad fit range {self.fit_range}")
        object.__setattr__(self, "fit_range", (self.fit_range[0], self.fit_range[1]))

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(json.dumps({
            "feature_names": list(self.feature_names),
            "weights": [repr(float(v)) for v in self.weights],
            "intercept": repr(float(self.intercept)),
            "mean": [repr(float(v)) for v in self.standardizer_mean],
            "std": [repr(float(v)) for v in self.standardizer_std],
            "ridge_strength": repr(float(self.ridge_strength)),
            "fit_range": list(self.fit_range),
        }, sort_keys=True).encode())
        return h.hexdigest()

    def check_disjoint(self, dates: tuple[str, ...]) -> None:
        lo, hi = self.fit_range
        inside = [d for d in dates if lo <= d <= hi]
        if inside:
            raise LeakageError(
                f"evaluation dates {inside[0]}..{inside[-1]} fall inside fit range {lo}..{hi}"
            )


@dataclass(frozen=True)
class ResidualModel:
    """Per-axis intercept/slope of the regression on sentiment."""

    params: dict[str, tuple[float, float]]  # axis -> (a, b)

    def residuals(self, panel: SignalPanel, axis: str) -> np.ndarray:
        a, b = self.params[axis]
        return panel.axis(axis) - a - b * panel.axis("sentiment")


@dataclass(frozen=True)
class CompositeScore:
    """Per-(date, ticker) real-valued ranking scores."""

    dates: tuple[str, ...]
    tickers: tuple[str, ...]
    values: np.ndarray
    provenance: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "dates", tuple(self.dates))
        object.__setattr__(self, "tickers", tuple(self.tickers))
        values = np.array(self.values, dtype=float, copy=True)
        if values.shape != (len(self.dates), len(self.tickers)):
            raise ValidationError(f"scores shape {values.shape} does not match axes")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    def slice_dates(self, start: str, end: str) -> "CompositeScore":
        keep = [i for i, d in enumerate(self.dates) if start <= d <= end]
        if not keep:
            raise ValidationError(f"no score dates in [{start}, {end}]")
        sl = slice(keep[0], keep[-1] + 1)
        return CompositeScore(
            dates=self.dates[sl], tickers=self.tickers,
            values=self.values[sl], provenance=self.provenance,
        )

    def restrict(self, tickers: list[str] | tuple[str, ...]) -> "CompositeScore":
        idx = [self.tickers.index(t) for t in tickers]
        return CompositeScore(
            dates=self.dates, tickers=tuple(tickers),
            values=self.values[:, idx], provenance=self.provenance,
        )


# ---------------------------------------------------------------------------
# Fitting on the signal panel
# ---------------------------------------------------------------------------

def _range_mask(dates: tuple[str, ...], fit_range: tuple[str, str]) -> np.ndarray:
    lo, hi = fit_range
    if lo > hi:
        raise ValidationError(f"bad fit range {fit_range}")
    return np.array([lo <= d <= hi for d in dates])


def _pool_rows(
    panel: SignalPanel,
    returns_fwd: np.ndarray,
    fit_range: tuple[str, str],
    include_neutral: bool,
    min_stock_days: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Pool (date, ticker) rows in the range with a finite target.

    Returns (panel row-index pairs, flat target) ready for feature building.
    """
    in_range = _range_mask(panel.dates, fit_range)
    if not in_range.any():
        raise ValidationError(f"fit range {fit_range} covers no panel dates")
    mask = in_range[:, None] & np.isfinite(returns_fwd)
    if not include_neutral:
        mask &= panel.non_neutral
    idx = np.argwhere(mask)
    if idx.shape[0] < min_stock_days:
        raise ValidationError(
            f"only {idx.shape[0]} usable stock-days in fit range, need {min_stock_days}"
        )
    return idx, returns_fwd[mask]


def fit_sfp(
    panel: SignalPanel,
    returns_fwd: np.ndarray,
    fit_range: tuple[str, str],
    lam: float = DEFAULT_RIDGE,
    axes: tuple[str, ...] = AXES,
    include_neutral: bool = True,
    min_stock_days: int = 100,
) -> FactorModel:
    """Ridge factor weights from axis deviations to forward returns.

    Pools every stock-day in the fit range into one cross-sectional
    regression; weights are frozen afterwards. ``axes`` restricts the feature
    set (single-axis variants included). A panel with no signal content in
    range raises a degenerate-fit error.
    """
    for a in axes:
        if a not in AXES:
            raise ValidationError(f"unknown axis {a!r}")
    idx, y = _pool_rows(panel, returns_fwd, fit_range, include_neutral, min_stock_days)
    X = panel.deviations[idx[:, 0], idx[:, 1]][:, [AXES.index(a) for a in axes]]
    if np.all(X == 0.0):
        raise DegenerateFitError(
            "all signal deviations are zero in the fit range (all-neutral panel)"
        )
    w, b = fit_ridge(X, y, lam=lam, fit_intercept=True, feature_names=tuple(axes))
    return FactorModel(
        feature_names=tuple(axes),
        weights=w,
        intercept=b,
        standardizer_mean=np.full(len(axes), NEUTRAL),
        standardizer_std=np.ones(len(axes)),
        ridge_strength=lam,
        fit_range=fit_range,
    )


def fit_srf(
    panel: SignalPanel,
    returns_fwd: np.ndarray,
    fit_range: tuple[str, str],
    lam: float = DEFAULT_RIDGE,
    include_neutral: bool = True,
    min_stock_days: int = 100,
) -> tuple[ResidualModel, FactorModel]:
    """Sentiment-residualised variant.

    Each non-sentiment axis is regressed on sentiment over the training
    stock-days; the ridge then runs on [sentiment deviation, residuals].
    Training residuals are zero-mean by construction.
    """
    idx, y = _pool_rows(panel, returns_fwd, fit_range, include_neutral, min_stock_days)
    rows = panel.values[idx[:, 0], idx[:, 1]]  # (n, 4)
    sent = rows[:, AXES.index("sentiment")]
    var_sent = float(np.var(sent))
    if var_sent == 0.0:
        raise DegenerateFitError("sentiment constant over the training range; slopes undefined")

    params: dict[str, tuple[float, float]] = {}
    feats = [sent - NEUTRAL]
    names: list[str] = ["sentiment"]
    for axis in AXES[1:]:
        col = rows[:, AXES.index(axis)]
        b = float(np.cov(sent, col, ddof=0)[0, 1] / var_sent)
        a = float(col.mean() - b * sent.mean())
        params[axis] = (a, b)
        resid = col - a - b * sent
        assert abs(resid.mean()) < 1e-10
        feats.append(resid)
        names.append(f"resid:{axis}")
    X = np.column_stack(feats)
    if np.all(X == 0.0):
        raise DegenerateFitError("no variation left after residualisation")
    w, b0 = fit_ridge(X, y, lam=lam, fit_intercept=True, feature_names=tuple(names))
    model = FactorModel(
        feature_names=tuple(names),
        weights=w,
        intercept=b0,
        standardizer_mean=np.array([NEUTRAL, 0.0, 0.0, 0.0]),
        standardizer_std=np.ones(4),
        ridge_strength=lam,
        fit_range=fit_range,
    )
    return ResidualModel(params=params), model


def _train_axis_stats(
    panel: SignalPanel, fit_range: tuple[str, str], min_rows: int = 5
) -> tuple[np.ndarray, np.ndarray]:
    """Axis mean/std over non-neutral stock-days inside the fit range."""
    in_range = _range_mask(panel.dates, fit_range)
    rows = panel.values[in_range][panel.non_neutral[in_range]]
    if rows.shape[0] < min_rows:
        raise RankError(
            f"need at least {min_rows} non-neutral stock-days in fit range, have {rows.shape[0]}"
        )
    mean = rows.mean(axis=0)
    std = rows.std(axis=0, ddof=1)
    if np.any(std == 0):
        flat = [AXES[a] for a in np.where(std == 0)[0]]
        raise RankError(f"constant axis values over the fit range: {flat}")
    return mean, std


def fit_pc1_composite(panel: SignalPanel, fit_range: tuple[str, str]) -> FactorModel:
    """First-principal-component composite over standardised axes.

    Loadings and standardisation statistics come from the fit range's
    non-neutral stock-days; the sign is fixed so the sentiment loading is
    non-negative.
    """
    mean, std = _train_axis_stats(panel, fit_range)
    sub = panel.slice_dates(fit_range[0], fit_range[1])
    loadings, _ = pca_loadings_for(sub)
    return FactorModel(
        feature_names=AXES,
        weights=loadings,
        intercept=0.0,
        standardizer_mean=mean,
        standardizer_std=std,
        ridge_strength=0.0,
        fit_range=fit_range,
    )


def pca_loadings_for(panel: SignalPanel) -> tuple[np.ndarray, np.ndarray]:
    # thin wrapper so factor fitting and the diagnostics share one code path
    from .signals import pca_effective_dim

    return pca_effective_dim(panel)


def fit_equal_weight_composite(
    panel: SignalPanel, fit_range: tuple[str, str]
) -> FactorModel:
    """Equal-weight mean of the four standardised axes (no supervision)."""
    mean, std = _train_axis_stats(panel, fit_range)
    return FactorModel(
        feature_names=AXES,
        weights=np.full(4, 0.25),
        intercept=0.0,
        standardizer_mean=mean,
        standardizer_std=std,
        ridge_strength=0.0,
        fit_range=fit_range,
    )


def composite(
    panel: SignalPanel,
    model: FactorModel,
    residual_model: ResidualModel | None = None,
) -> CompositeScore:
    """Apply a frozen model to a signal panel, producing ranking scores.

    The panel's dates must lie entirely outside the model's fit range.
    Models in the residual basis need their ResidualModel.
    """
    model.check_disjoint(panel.dates)
    cols = []
    for name in model.feature_names:
        axis = _resid_axis(name)
        if axis is not None:
            if residual_model is None:
                raise ValidationError(f"feature {name!r} needs a residual model")
            cols.append(residual_model.residuals(panel, axis))
        elif name in AXES:
            cols.append(panel.axis(name))
        else:
            raise ValidationError(f"cannot build feature {name!r} from a signal panel")
    feats = np.stack(cols, axis=-1)  # (D, T, p)
    z = (feats - model.standardizer_mean) / model.standardizer_std
    values = z @ model.weights + model.intercept
    return CompositeScore(
        dates=panel.dates, tickers=panel.tickers, values=values,
        provenance=f"factor:{','.join(model.feature_names)}@{model.fit_range[0]}..{model.fit_range[1]}",
    )


# ---------------------------------------------------------------------------
# Conviction weighting
# ---------------------------------------------------------------------------

def scw_weights(
    scores: dict[str, float],
    basket: list[str] | tuple[str, ...],
    temperature: float,
) -> dict[str, float]:
    """Softmax allocation over the basket: weights ~ exp(score / temperature).

    Overflow-safe via max subtraction; weights are positive and sum to one.
    """
    if not basket:
        raise ValidationError("basket is empty")
    if not temperature > 0:
        raise ValidationError(f"temperature must be positive, got {temperature}")
    vals = np.array([scores[t] for t in basket], dtype=float)
    vals = vals / temperature
    vals -= vals.max()
    ex = np.exp(vals)
    w = ex / ex.sum()
    return {t: float(x) for t, x in zip(basket, w)}


def select_temperature(
    grid: tuple[float, ...],
    evaluate,
) -> tuple[float, dict[float, float]]:
    """Pick the grid temperature maximising ``evaluate(T)`` (validation Sharpe).

    Ties break toward the largest temperature, the one closest to equal
    weighting. Evaluation errors propagate. Returns the winner and the full
    objective table for provenance.
    """
    if not grid:
        raise ValidationError("temperature grid is empty")
    table: dict[float, float] = {}
    for t in grid:
        table[float(t)] = float(evaluate(float(t)))
    best = max(sorted(table), key=lambda t: (table[t], t))
    return best, table


# ---------------------------------------------------------------------------
# Supervised forecaster
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TiltSpec:
    """High-conviction semantic overlay on a base forecast.

    The equal-weight standardised semantic composite z is added with weight
    ``alpha`` wherever news is present and |z| clears ``conviction``.
    """

    alpha: float
    conviction: float
    axis_mean: np.ndarray
    axis_std: np.ndarray

    def __post_init__(self) -> None:
        for name in ("axis_mean", "axis_std"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def overlay(self, signal_panel: SignalPanel) -> np.ndarray:
        z = (signal_panel.values - self.axis_mean) / self.axis_std
        comp = z.mean(axis=2)
        gate = signal_panel.non_neutral & (np.abs(comp) > self.conviction)
        return self.alpha * comp * gate


@dataclass(frozen=True)
class ForecasterModel:
    """Ridge forecaster over named feature blocks plus an optional tilt."""

    model: FactorModel
    tilt: TiltSpec | None
    block_names: tuple[str, ...]
    validation_table: tuple[tuple[float, float, float], ...]  # (lam, alpha, sharpe)

    def score_panel(
        self,
        feature_blocks: dict[str, np.ndarray],
        dates: tuple[str, ...],
        tickers: tuple[str, ...],
        signal_panel: SignalPanel | None,
    ) -> CompositeScore:
        self.model.check_disjoint(dates)
        X = _stack_blocks(feature_blocks, self.block_names)
        z = (X - self.model.standardizer_mean) / self.model.standardizer_std
        values = z @ self.model.weights + self.model.intercept
        if self.tilt is not None and self.tilt.alpha != 0.0:
            if signal_panel is None:
                raise ValidationError("tilted forecaster needs the signal panel")
            values = values + self.tilt.overlay(signal_panel)
        return CompositeScore(
            dates=dates, tickers=tickers, values=values,
            provenance=f"forecaster:{'+'.join(self.block_names)}",
        )


def _stack_blocks(blocks: dict[str, np.ndarray], names: tuple[str, ...]) -> np.ndarray:
    cols = []
    for name in names:
        arr = np.asarray(blocks[name], dtype=float)
        if arr.ndim != 3 or arr.shape[2] < 1:
            raise ConfigError(f"feature block {name!r} must be (dates, tickers, k>=1)")
        cols.append(arr)
    return np.concatenate(cols, axis=2)


def fit_forecaster(
    feature_blocks: dict[str, np.ndarray],
    returns_fwd: np.ndarray,
    market_panel: MarketPanel,
    signal_panel: SignalPanel | None,
    fit_range: tuple[str, str],
    validation_range: tuple[str, str],
    lam_grid: tuple[float, ...] = LAMBDA_GRID,
    tilt_grid: tuple[float, ...] = (0.0,),
    conviction: float = 1.0,
    top_k: int = 10,
    cost_rate: float = 0.001,
    refit_with_validation: bool = True,
    min_stock_days: int = 100,
) -> ForecasterModel:
    """Grid-search ridge forecaster with validation-Sharpe selection.

    For every (ridge strength, tilt weight) pair the model is fitted on the
    fit range, scored on the validation range through the same top-k
    portfolio rule used everywhere else, and the best pair wins (ties toward
    stronger shrinkage, then smaller tilt). The winner is refit on
    fit + validation by default before being frozen.
    """
    from .backtest import BacktestConfig, backtest_topk
    from .metrics import sharpe_ratio

    if not lam_grid or not tilt_grid:
        raise ConfigError("empty selection grid")
    if not feature_blocks:
        raise ConfigError("no feature blocks given")
    block_names = tuple(feature_blocks)
    for name in block_names:
        arr = np.asarray(feature_blocks[name])
        if arr.ndim != 3 or arr.shape[:2] != (len(market_panel.dates), len(market_panel.tickers)):
            raise ConfigError(f"feature block {name!r} is not aligned to the panel")
        if arr.shape[2] < 1:
            raise ConfigError(f"feature block {name!r} is empty")
    if any(a != 0.0 for a in tilt_grid) and signal_panel is None:
        raise ConfigError("tilt grid includes non-zero weights but no signal panel given")

    X_full = _stack_blocks(feature_blocks, block_names)
    dates = market_panel.dates
    tickers = market_panel.tickers
    val_lo, val_hi = validation_range
    if not (fit_range[1] < val_lo):
        raise ConfigError("validation range must follow the fit range")

    def fit_on(rng: tuple[str, str], lam: float) -> FactorModel:
        mask = _range_mask(dates, rng)[:, None] & np.isfinite(returns_fwd)
        mask &= np.all(np.isfinite(X_full), axis=2)
        idx = np.argwhere(mask)
        if idx.shape[0] < max(min_stock_days, X_full.shape[2] + 1):
            raise ValidationError(
                f"only {idx.shape[0]} usable stock-days in {rng}, need {min_stock_days}"
            )
        X = X_full[idx[:, 0], idx[:, 1]]
        y = returns_fwd[mask]
        mean = X.mean(axis=0)
        std = X.std(axis=0, ddof=1)
        if np.any(std == 0):
            dead = [int(i) for i in np.where(std == 0)[0]]
            raise DegenerateFitError(f"constant forecaster feature columns: {dead}")
        w, b = fit_ridge((X - mean) / std, y, lam=lam, fit_intercept=True)
        col_names = tuple(
            f"{name}:{i}"
            for name in block_names
            for i in range(np.asarray(feature_blocks[name]).shape[2])
        )
        return FactorModel(
            feature_names=col_names,
            weights=w, intercept=b,
            standardizer_mean=mean, standardizer_std=std,
            ridge_strength=lam, fit_range=rng,
        )

    def tilt_for(alpha: float, rng: tuple[str, str]) -> TiltSpec | None:
        if alpha == 0.0:
            return None
        mean, std = _train_axis_stats(signal_panel, rng)
        return TiltSpec(alpha=alpha, conviction=conviction, axis_mean=mean, axis_std=std)

    val_panel = market_panel.slice_dates(val_lo, val_hi)
    val_signals = None if signal_panel is None else signal_panel.slice_dates(val_lo, val_hi)
    val_blocks = {
        name: np.asarray(feature_blocks[name])[_range_mask(dates, validation_range)]
        for name in block_names
    }
    cfg = BacktestConfig(k=top_k, cost_rate=cost_rate)

    results: list[tuple[float, float, float]] = []
    for lam in lam_grid:
        candidate = fit_on(fit_range, lam)
        base = ForecasterModel(model=candidate, tilt=None, block_names=block_names,
                               validation_table=())
        for alpha in tilt_grid:
            trial = replace(base, tilt=tilt_for(alpha, fit_range))
            scores = trial.score_panel(val_blocks, val_panel.dates, tickers, val_signals)
            curve = backtest_topk(scores, val_panel, cfg)
            results.append((float(lam), float(alpha), sharpe_ratio(curve.daily_returns[1:])))

    best_lam, best_alpha, _ = max(results, key=lambda r: (r[2], r[0], -r[1]))
    final_range = (fit_range[0], val_hi) if refit_with_validation else fit_range
    final = fit_on(final_range, best_lam)
    return ForecasterModel(
        model=final,
        tilt=tilt_for(best_alpha, final_range),
        block_names=block_names,
        validation_table=tuple(results),
    )


# ---------------------------------------------------------------------------
# Serialisation ("frozen checkpoint" for linear models)
# ---------------------------------------------------------------------------

def save_factor_model(model: FactorModel, path: str) -> None:
    payload = {
        "feature_names": list(model.feature_names),
        "weights": [float(v) for v in model.weights],
        "intercept": float(model.intercept),
        "standardizer_mean": [float(v) for v in model.standardizer_mean],
        "standardizer_std": [float(v) for v in model.standardizer_std],
        "ridge_strength": float(model.ridge_strength),
        "fit_range": list(model.fit_range),
        "content_hash": model.content_hash(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_factor_model(path: str) -> FactorModel:
    with open(path) as fh:
        payload = json.load(fh)
    model = FactorModel(
        feature_names=tuple(payload["feature_names"]),
        weights=np.array(payload["weights"]),
        intercept=payload["intercept"],
        standardizer_mean=np.array(payload["standardizer_mean"]),
        standardizer_std=np.array(payload["standardizer_std"]),
        ridge_strength=payload["ridge_strength"],
        fit_range=tuple(payload["fit_range"]),
    )
    if model.content_hash() != payload["content_hash"]:
        raise ValidationError(f"{path}: content hash mismatch (file corrupted or edited)")
    return model
