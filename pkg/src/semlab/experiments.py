"""Configuration-driven experiment runner.

Each experiment kind wires the modules into one named study and writes
table-ready delimited artifacts plus a machine-readable manifest with full
provenance (config hash, input content hashes, library versions). Reruns
with the same config and seed produce byte-identical files: no timestamps,
fixed float formatting, stable ordering. On failure, partial outputs are
removed.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
from dataclasses import dataclass

import numpy as np
import scipy

from . import __version__
from .backtest import (
    BacktestConfig,
    EquityCurve,
    baseline,
    backtest_topk,
    cost_sweep,
    stratified_backtest,
    subperiod_report,
    write_equity_curve,
)
from .env import (
    EnvConfig,
    SignalThresholdPolicy,
    TradingEnv,
    builtin_policies,
    run_policy,
    write_episode_log,
    write_observation_layout,
)
from .errors import ConfigError, LabError, ValidationError
from .factors import (
    LAMBDA_GRID,
    TEMPERATURE_GRID,
    TILT_GRID,
    composite,
    fit_equal_weight_composite,
    fit_forecaster,
    fit_pc1_composite,
    fit_sfp,
    fit_srf,
    save_factor_model,
    select_temperature,
)
from .metrics import metrics, sharpe_ratio, write_report_table
from .panels import (
    INDICATORS_ALL,
    MarketPanel,
    compute_indicators,
    compute_turbulence,
    forward_returns,
    load_price_panel,
)
from .signals import (
    AXES,
    SignalPanel,
    aggregate_signals,
    coverage_stats,
    load_article_scores,
    pca_effective_dim,
)
from .stats import (
    lag1_autocorr,
    mann_whitney_u,
    paired_comparison,
    seed_summary,
    spearman_ic,
    write_test_results,
)
from .synth import SyntheticSpec, synth_panel

KINDS = (
    "sfp", "srf", "scw", "pc1", "softmax", "forecaster", "baselines",
    "cost_sweep", "stratified", "subperiod", "env_eval", "validation_suite",
)

_NEEDS_FIT = {"sfp", "srf", "scw", "pc1", "softmax", "forecaster",
              "cost_sweep", "stratified", "subperiod"}


def _as_range(raw, name: str) -> tuple[str, str]:
    if (not isinstance(raw, (list, tuple))) or len(raw) != 2:
        raise ConfigError(f"range {name!r} must be [start, end]")
    lo, hi = str(raw[0]), str(raw[1])
    if lo > hi:
        raise ConfigError(f"range {name!r} has start after end")
    return lo, hi


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    seed: int
    output_dir: str
    data: dict
    train: tuple[str, str] | None
    validation: tuple[str, str] | None
    test: tuple[str, str]
    universe: tuple[str, ...] | None
    params: dict

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; valid: {KINDS}")
        if not isinstance(self.seed, int):
            raise ConfigError("seed must be an integer")
        named = [("train", self.train), ("validation", self.validation), ("test", self.test)]
        present = [(n, r) for n, r in named if r is not None]
        for (n1, r1), (n2, r2) in zip(present, present[1:]):
            if not r1[1] < r2[0]:
                raise ConfigError(
                    f"ranges must be disjoint and ordered: {n1} {r1} vs {n2} {r2}"
                )
        if self.kind in _NEEDS_FIT and self.train is None:
            raise ConfigError(f"kind {self.kind!r} needs a train range")
        if self.universe is not None:
            object.__setattr__(self, "universe", tuple(self.universe))

    @staticmethod
    def from_dict(raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        missing = {"kind", "seed", "output_dir", "data", "ranges"} - set(raw)
        if missing:
            raise ConfigError(f"config missing keys: {sorted(missing)}")
        ranges = raw["ranges"]
        if "test" not in ranges:
            raise ConfigError("ranges must include 'test'")
        return ExperimentConfig(
            kind=raw["kind"],
            seed=raw["seed"],
            output_dir=raw["output_dir"],
            data=dict(raw["data"]),
            train=_as_range(ranges["train"], "train") if ranges.get("train") else None,
            validation=(
                _as_range(ranges["validation"], "validation")
                if ranges.get("validation") else None
            ),
            test=_as_range(ranges["test"], "test"),
            universe=raw.get("universe"),
            params=dict(raw.get("params", {})),
        )

    @staticmethod
    def from_file(path: str) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from None
        return ExperimentConfig.from_dict(raw)

    def canonical(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "data": self.data,
            "ranges": {
                "train": list(self.train) if self.train else None,
                "validation": list(self.validation) if self.validation else None,
                "test": list(self.test),
            },
            "universe": list(self.universe) if self.universe else None,
            "params": self.params,
        }

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()

    def fit_span(self) -> tuple[str, str]:
        if self.train is None:
            raise ConfigError(f"kind {self.kind!r} needs a train range")
        return (self.train[0], self.validation[1] if self.validation else self.train[1])


# ---------------------------------------------------------------------------
# Workspace assembly
# ---------------------------------------------------------------------------

@dataclass
class Workspace:
    panel: MarketPanel
    signals: SignalPanel
    returns_fwd: np.ndarray
    horizon: int
    input_hashes: dict


def _file_hash(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def load_workspace(cfg: ExperimentConfig) -> Workspace:
    data = cfg.data
    horizon = int(cfg.params.get("horizon", 5))
    window = int(cfg.params.get("window", 3))
    hashes: dict = {}
    if "synthetic" in data:
        raw = data["synthetic"]
        if isinstance(raw, str):
            spec = SyntheticSpec.from_file(raw)
            hashes["synthetic_spec"] = _file_hash(raw)
        else:
            spec = SyntheticSpec.from_dict(raw)
            hashes["synthetic_spec"] = hashlib.sha256(
                json.dumps(raw, sort_keys=True).encode()
            ).hexdigest()
        panel, signals, _truth = synth_panel(spec)
    elif "price_panel" in data:
        panel = load_price_panel(data["price_panel"])
        hashes["price_panel"] = _file_hash(data["price_panel"])
        if "signal_cache" in data:
            articles = load_article_scores(data["signal_cache"])
            hashes["signal_cache"] = _file_hash(data["signal_cache"])
            signals, report = aggregate_signals(
                articles, panel.dates, panel.tickers, window=window
            )
            hashes["unplaced_articles"] = report.total
        else:
            shape = (panel.n_dates, panel.n_tickers)
            signals = SignalPanel(
                dates=panel.dates, tickers=panel.tickers,
                values=np.full(shape + (4,), 3.0),
                non_neutral=np.zeros(shape, dtype=bool),
            )
    else:
        raise ConfigError("data must provide 'synthetic' or 'price_panel'")

    if cfg.universe is not None:
        panel = panel.restrict(cfg.universe)
        signals = signals.restrict(cfg.universe)
    hashes["panel"] = panel.content_hash()
    hashes["signal_panel"] = signals.content_hash()
    return Workspace(
        panel=panel, signals=signals,
        returns_fwd=forward_returns(panel, horizon),
        horizon=horizon, input_hashes=hashes,
    )


# ---------------------------------------------------------------------------
# Artifact bookkeeping
# ---------------------------------------------------------------------------

class ArtifactWriter:
    """Tracks files written by one run so failures can clean up after themselves."""

    def __init__(self, output_dir: str):
        self.output_dir = output_dir
        self.created: list[str] = []
        os.makedirs(output_dir, exist_ok=True)

    def path(self, name: str) -> str:
        p = os.path.join(self.output_dir, name)
        self.created.append(p)
        return p

    def cleanup(self) -> None:
        for p in self.created:
            if os.path.exists(p):
                os.remove(p)

    def write_rows(self, name: str, header: list[str], rows: list[list]) -> str:
        p = self.path(name)
        with open(p, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(header)
            writer.writerows(rows)
        return p


def _fmt(x) -> str:
    if isinstance(x, float):
        return f"{x:.6f}"
    return str(x)


# ---------------------------------------------------------------------------
# Kind implementations
# ---------------------------------------------------------------------------

def _bt_config(cfg: ExperimentConfig) -> BacktestConfig:
    return BacktestConfig(
        k=int(cfg.params.get("k", 10)),
        cost_rate=float(cfg.params.get("cost_rate", 0.001)),
        period=cfg.test,
    )


def _validation_score_scale(model, ws: Workspace, cfg: ExperimentConfig):
    """Composite scores on the validation slice plus their pooled dispersion.

    Softmax temperatures are quoted in standardised-score units, and the
    validation range is the only leakage-free population available once the
    final model is refit through it.
    """
    if cfg.validation is None:
        raise ConfigError("this kind needs a validation range")
    val_scores = composite(ws.signals.slice_dates(*cfg.validation), model)
    scale = float(val_scores.values.std(ddof=1))
    if scale == 0.0:
        raise ValidationError("validation scores are constant; cannot standardise")
    return val_scores, scale


def _run_sfp(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    lam = float(cfg.params.get("ridge_strength", 1e-3))
    span = cfg.fit_span()
    bt = _bt_config(cfg)
    model = fit_sfp(ws.signals, ws.returns_fwd, span, lam=lam)
    sent_model = fit_sfp(ws.signals, ws.returns_fwd, span, lam=lam, axes=("sentiment",))
    rows = []
    curves: dict[str, EquityCurve] = {}
    for label, m in (("sfp-4axis", model), ("sfp-sentiment-only", sent_model)):
        scores = composite(ws.signals.slice_dates(*cfg.test), m)
        curve = backtest_topk(scores, ws.panel, bt)
        curves[label] = curve
        rows.append(metrics(curve).row(label))
    bh = baseline(ws.panel, "ew_buy_and_hold", bt)
    rows.append(metrics(bh).row("ew-buy-and-hold"))
    write_report_table(rows, out.path("report.csv"))
    save_factor_model(model, out.path("model.json"))
    write_equity_curve(curves["sfp-4axis"], out.path("equity_curve.csv"),
                       out.path("holdings.csv"))
    write_equity_curve(bh, out.path("benchmark_curve.csv"))
    diag = [
        paired_comparison(
            curves["sfp-4axis"].daily_returns[1:],
            curves["sfp-sentiment-only"].daily_returns[1:],
            "sfp-4axis vs sfp-sentiment-only", seed=cfg.seed,
        ),
        paired_comparison(
            curves["sfp-4axis"].daily_returns[1:], bh.daily_returns[1:],
            "sfp-4axis vs ew-buy-and-hold", seed=cfg.seed,
        ),
    ]
    write_test_results(diag, out.path("diagnostics.csv"))


def _run_srf(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    lam = float(cfg.params.get("ridge_strength", 1e-3))
    span = cfg.fit_span()
    bt = _bt_config(cfg)
    resid, model = fit_srf(ws.signals, ws.returns_fwd, span, lam=lam)
    scores = composite(ws.signals.slice_dates(*cfg.test), model, resid)
    curve = backtest_topk(scores, ws.panel, bt)
    sfp_model = fit_sfp(ws.signals, ws.returns_fwd, span, lam=lam)
    sfp_curve = backtest_topk(
        composite(ws.signals.slice_dates(*cfg.test), sfp_model), ws.panel, bt
    )
    bh = baseline(ws.panel, "ew_buy_and_hold", bt)
    rows = [
        metrics(curve).row("srf-residual-axes"),
        metrics(sfp_curve).row("sfp-4axis"),
        metrics(bh).row("ew-buy-and-hold"),
    ]
    write_report_table(rows, out.path("report.csv"))
    save_factor_model(model, out.path("model.json"))
    with open(out.path("residual_params.json"), "w") as fh:
        json.dump(
            {axis: {"intercept": a, "slope": b} for axis, (a, b) in sorted(resid.params.items())},
            fh, indent=2, sort_keys=True,
        )
        fh.write("\n")
    write_equity_curve(curve, out.path("equity_curve.csv"), out.path("holdings.csv"))


def _run_scw(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    lam = float(cfg.params.get("ridge_strength", 1e-3))
    grid = tuple(cfg.params.get("temperature_grid", TEMPERATURE_GRID))
    if cfg.validation is None:
        raise ConfigError("scw needs a validation range for temperature selection")
    bt = _bt_config(cfg)

    # select on validation with a train-only fit, then refit on the full span
    sel_model = fit_sfp(ws.signals, ws.returns_fwd, cfg.train, lam=lam)
    val_scores, scale = _validation_score_scale(sel_model, ws, cfg)
    val_panel = ws.panel.slice_dates(*cfg.validation)
    val_cfg = BacktestConfig(k=bt.k, cost_rate=bt.cost_rate, period=cfg.validation)

    def evaluate(t: float) -> float:
        scaled = _scale_scores(val_scores, 1.0 / scale)
        curve = backtest_topk(scaled, val_panel, val_cfg, weighting=("scw", t))
        return sharpe_ratio(curve.daily_returns[1:])

    temperature, table = select_temperature(grid, evaluate)

    final_model = fit_sfp(ws.signals, ws.returns_fwd, cfg.fit_span(), lam=lam)
    test_scores = composite(ws.signals.slice_dates(*cfg.test), final_model)
    scaled_test = _scale_scores(test_scores, 1.0 / scale)
    scw_curve = backtest_topk(scaled_test, ws.panel, bt, weighting=("scw", temperature))
    equal_curve = backtest_topk(test_scores, ws.panel, bt)
    bh = baseline(ws.panel, "ew_buy_and_hold", bt)
    rows = [
        metrics(scw_curve).row(f"scw(T={temperature:g})"),
        metrics(equal_curve).row("sfp-equal-weight"),
        metrics(bh).row("ew-buy-and-hold"),
    ]
    write_report_table(rows, out.path("report.csv"))
    out.write_rows(
        "temperature_selection.csv",
        ["temperature", "validation_sharpe"],
        [[_fmt(float(t)), _fmt(table[t])] for t in sorted(table)],
    )
    save_factor_model(final_model, out.path("model.json"))
    write_equity_curve(scw_curve, out.path("equity_curve.csv"), out.path("holdings.csv"))
    diag = [paired_comparison(
        scw_curve.daily_returns[1:], equal_curve.daily_returns[1:],
        "scw vs sfp-equal-weight", seed=cfg.seed,
    )]
    write_test_results(diag, out.path("diagnostics.csv"))


def _scale_scores(scores, factor: float):
    from .factors import CompositeScore

    return CompositeScore(
        dates=scores.dates, tickers=scores.tickers,
        values=scores.values * factor,
        provenance=scores.provenance + f"|scaled({factor:.6g})",
    )


def _run_pc1(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    span = cfg.fit_span()
    bt = _bt_config(cfg)
    model = fit_pc1_composite(ws.signals, span)
    scores = composite(ws.signals.slice_dates(*cfg.test), model)
    curve = backtest_topk(scores, ws.panel, bt)
    bh = baseline(ws.panel, "ew_buy_and_hold", bt)
    rows = [metrics(curve).row("pc1-composite"), metrics(bh).row("ew-buy-and-hold")]
    write_report_table(rows, out.path("report.csv"))
    loadings, explained = pca_effective_dim(ws.signals.slice_dates(*span))
    out.write_rows(
        "pca.csv",
        ["axis", "pc1_loading", "explained_fraction"],
        [[AXES[i], _fmt(float(loadings[i])), _fmt(float(explained[i]))] for i in range(4)],
    )
    save_factor_model(model, out.path("model.json"))
    write_equity_curve(curve, out.path("equity_curve.csv"), out.path("holdings.csv"))


def _run_softmax(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    span = cfg.fit_span()
    bt = _bt_config(cfg)
    model = fit_equal_weight_composite(ws.signals, span)
    scores = composite(ws.signals.slice_dates(*cfg.test), model)
    curve = backtest_topk(scores, ws.panel, bt)
    bh = baseline(ws.panel, "ew_buy_and_hold", bt)
    rows = [metrics(curve).row("equal-weight-composite"), metrics(bh).row("ew-buy-and-hold")]
    write_report_table(rows, out.path("report.csv"))
    save_factor_model(model, out.path("model.json"))
    write_equity_curve(curve, out.path("equity_curve.csv"), out.path("holdings.csv"))


def _feature_blocks(cfg: ExperimentConfig, ws: Workspace) -> dict[str, np.ndarray]:
    """Assemble named forecaster blocks: technical columns, signal columns,
    and any pre-computed dense blocks loaded from delimited files."""
    wanted = list(cfg.params.get("blocks", ["price"]))
    blocks: dict[str, np.ndarray] = {}
    for name in wanted:
        if name == "price":
            names = tuple(cfg.params.get("indicators", INDICATORS_ALL))
            feats = compute_indicators(ws.panel, names)
            blocks["price"] = feats.values
        elif name == "sentiment":
            blocks["sentiment"] = ws.signals.deviations[:, :, [AXES.index("sentiment")]]
        elif name == "semantic":
            blocks["semantic"] = ws.signals.deviations
        elif name in cfg.data.get("dense_blocks", {}):
            blocks[name] = _load_dense_block(
                cfg.data["dense_blocks"][name], ws.panel.dates, ws.panel.tickers
            )
        else:
            raise ConfigError(f"unknown feature block {name!r}")
    return blocks


def _load_dense_block(path: str, dates, tickers) -> np.ndarray:
    """Dense feature file: header date,ticker,<col...>; missing rows become 0."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:2] != ["date", "ticker"]:
            raise ConfigError(f"{path}: dense block header must start with date,ticker")
        k = len(header) - 2
        if k < 1:
            raise ConfigError(f"{path}: dense block has no feature columns")
        date_idx = {d: i for i, d in enumerate(dates)}
        tick_idx = {t: j for j, t in enumerate(tickers)}
        arr = np.zeros((len(dates), len(tickers), k))
        for row in reader:
            if not row:
                continue
            i = date_idx.get(row[0])
            j = tick_idx.get(row[1])
            if i is None or j is None:
                continue
            arr[i, j] = [float(x) for x in row[2:]]
    return arr


def _run_forecaster(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    if cfg.validation is None:
        raise ConfigError("forecaster needs a validation range")
    bt = _bt_config(cfg)
    blocks = _feature_blocks(cfg, ws)
    lam_grid = tuple(cfg.params.get("lambda_grid", LAMBDA_GRID))
    tilt_grid = tuple(cfg.params.get("tilt_grid", TILT_GRID if cfg.params.get("tilt") else (0.0,)))
    fc = fit_forecaster(
        blocks, ws.returns_fwd, ws.panel, ws.signals,
        cfg.train, cfg.validation,
        lam_grid=lam_grid, tilt_grid=tilt_grid,
        top_k=bt.k, cost_rate=bt.cost_rate,
        min_stock_days=int(cfg.params.get("min_stock_days", 100)),
    )
    test_mask = [i for i, d in enumerate(ws.panel.dates) if cfg.test[0] <= d <= cfg.test[1]]
    test_blocks = {n: np.asarray(b)[test_mask] for n, b in blocks.items()}
    test_panel = ws.panel.slice_dates(*cfg.test)
    scores = fc.score_panel(
        test_blocks, test_panel.dates, test_panel.tickers,
        ws.signals.slice_dates(*cfg.test),
    )
    curve = backtest_topk(scores, ws.panel, bt)
    bh = baseline(ws.panel, "ew_buy_and_hold", bt)
    label = f"forecaster[{'+'.join(fc.block_names)}]"
    if fc.tilt is not None:
        label += f"+tilt(a={fc.tilt.alpha:g})"
    rows = [metrics(curve).row(label), metrics(bh).row("ew-buy-and-hold")]
    write_report_table(rows, out.path("report.csv"))
    out.write_rows(
        "selection.csv",
        ["ridge_strength", "tilt_alpha", "validation_sharpe"],
        [[_fmt(l), _fmt(a), _fmt(s)] for l, a, s in fc.validation_table],
    )
    save_factor_model(fc.model, out.path("model.json"))
    write_equity_curve(curve, out.path("equity_curve.csv"), out.path("holdings.csv"))
    diag = [paired_comparison(
        curve.daily_returns[1:], bh.daily_returns[1:],
        f"{label} vs ew-buy-and-hold", seed=cfg.seed,
    )]
    write_test_results(diag, out.path("diagnostics.csv"))


def _run_baselines(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    bt = _bt_config(cfg)
    rows = []
    for kind, label in (
        ("ew_buy_and_hold", "ew-buy-and-hold"),
        ("momentum_topk", "momentum-topk"),
        ("equal_vol", "equal-vol"),
    ):
        curve = baseline(
            ws.panel, kind, bt,
            lookback=int(cfg.params.get("momentum_lookback", 126)),
            vol_window=int(cfg.params.get("vol_window", 63)),
        )
        rows.append(metrics(curve).row(label))
        write_equity_curve(curve, out.path(f"curve_{label}.csv"))
    write_report_table(rows, out.path("report.csv"))


def _run_cost_sweep(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    lam = float(cfg.params.get("ridge_strength", 1e-3))
    costs = tuple(cfg.params.get("costs", (0.0005, 0.001, 0.002, 0.005, 0.01, 0.02)))
    model = fit_sfp(ws.signals, ws.returns_fwd, cfg.fit_span(), lam=lam)
    scores = composite(ws.signals.slice_dates(*cfg.test), model)
    rows = cost_sweep(scores, ws.panel, _bt_config(cfg), costs)
    out.write_rows(
        "sweep.csv",
        ["cost", "cr_pct", "sharpe", "mdd_pct", "benchmark_cr_pct", "benchmark_sharpe"],
        [
            [_fmt(r["cost"]), _fmt(r["cr"] * 100), _fmt(r["sharpe"]),
             _fmt(r["mdd"] * 100), _fmt(r["benchmark_cr"] * 100), _fmt(r["benchmark_sharpe"])]
            for r in rows
        ],
    )


def _run_stratified(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    lam = float(cfg.params.get("ridge_strength", 1e-3))
    k_stratum = int(cfg.params.get("k_per_stratum", 5))
    model = fit_sfp(ws.signals, ws.returns_fwd, cfg.fit_span(), lam=lam)
    scores = composite(ws.signals.slice_dates(*cfg.test), model)
    coverage = coverage_stats(ws.signals.slice_dates(*cfg.test))
    strata = stratified_backtest(scores, ws.panel, coverage, _bt_config(cfg), k_stratum)
    rows = []
    for label in ("Low", "Mid", "High"):
        entry = strata[label]
        for name, curve in (("strategy", entry["strategy"]), ("benchmark", entry["benchmark"])):
            rep = metrics(curve)
            rows.append([
                label, name, len(entry["tickers"]),
                _fmt(rep.cr * 100), _fmt(rep.sharpe), _fmt(rep.mdd * 100),
            ])
    out.write_rows(
        "stratified.csv",
        ["tercile", "leg", "n_tickers", "cr_pct", "sharpe", "mdd_pct"], rows,
    )
    cov_rows = [
        [t, _fmt(coverage.any_fraction[t]), coverage.terciles[t]]
        for t in sorted(coverage.tickers)
    ]
    out.write_rows("coverage.csv", ["ticker", "any_axis_fraction", "tercile"], cov_rows)


def _default_periods(test: tuple[str, str], dates: tuple[str, ...]) -> list[tuple[str, str, str]]:
    years = sorted({d[:4] for d in dates if test[0] <= d <= test[1]})
    out = []
    for y in years:
        in_year = [d for d in dates if d[:4] == y and test[0] <= d <= test[1]]
        out.append((y, in_year[0], in_year[-1]))
    return out


def _run_subperiod(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    lam = float(cfg.params.get("ridge_strength", 1e-3))
    bt = _bt_config(cfg)
    model = fit_sfp(ws.signals, ws.returns_fwd, cfg.fit_span(), lam=lam)
    scores = composite(ws.signals.slice_dates(*cfg.test), model)
    curve = backtest_topk(scores, ws.panel, bt)
    bench = baseline(ws.panel, "ew_buy_and_hold", bt)
    raw_periods = cfg.params.get("periods")
    periods = (
        [(str(p[0]), str(p[1]), str(p[2])) for p in raw_periods]
        if raw_periods else _default_periods(cfg.test, ws.panel.dates)
    )
    rows = subperiod_report(curve, bench, periods)
    out.write_rows(
        "subperiod.csv",
        ["period", "start", "end", "days", "cr_pct", "benchmark_cr_pct",
         "excess_cr_pp", "sharpe"],
        [
            [r["period"], r["start"], r["end"], r["days"],
             _fmt(r["cr"] * 100), _fmt(r["benchmark_cr"] * 100),
             _fmt(r["excess_cr"] * 100), _fmt(r["sharpe"])]
            for r in rows
        ],
    )


def _run_env_eval(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    p = cfg.params
    names = tuple(p.get("indicators", INDICATORS_ALL))
    features = compute_indicators(ws.panel, names)
    # short panels simply leave the whole series in warm-up (gate inactive)
    turb = compute_turbulence(
        ws.panel,
        window=int(p.get("turbulence_window", 252)),
        threshold=float(p.get("turbulence_threshold", 380.0)),
    )
    env_cfg = EnvConfig(
        h_max=int(p.get("h_max", 100)),
        cost_rate=float(p.get("cost_rate", 0.001)),
        turbulence_threshold=float(p.get("turbulence_threshold", 380.0)),
        reward_scale=float(p.get("reward_scale", 1e-4)),
        drawdown_alpha=float(p.get("drawdown_alpha", 0.1)),
        initial_cash=float(p.get("initial_cash", 1e6)),
    )
    env = TradingEnv(ws.panel, features, ws.signals, turb, env_cfg)
    write_observation_layout(env.layout, out.path("observation_layout.json"))

    policy_name = p.get("policy", "signal_threshold")
    n_seeds = int(p.get("n_seeds", 5))
    masks = p.get("masks", [None, "ALL"])
    start = p.get("start_date")

    def make_policy(seed: int):
        pool = builtin_policies(env.layout, seed=seed)
        if policy_name == "signal_threshold":
            return SignalThresholdPolicy(
                env.layout, axis=p.get("axis", "sentiment"),
                level=float(p.get("level", 3.0)),
            )
        if policy_name not in pool:
            raise ConfigError(f"unknown policy {policy_name!r}")
        return pool[policy_name]

    rows = []
    by_mask: dict[str, dict[str, list[float]]] = {}
    for mask in masks:
        mask_label = "none" if mask is None else (
            mask if isinstance(mask, str) else "+".join(sorted(mask))
        )
        for s in range(n_seeds):
            seed = cfg.seed + s
            policy = make_policy(seed)
            curve, rewards, infos = run_policy(
                env, policy, start_date=start,
                mask=None if mask is None else (mask if isinstance(mask, str) else set(mask)),
                seed=seed, label=f"{policy_name}/{mask_label}",
            )
            cr = float(np.prod(1.0 + curve.daily_returns[1:]) - 1.0)
            try:
                sh = sharpe_ratio(curve.daily_returns[1:])
            except LabError:
                sh = float("nan")  # flat rollout (e.g. fully masked hold)
            rows.append([mask_label, seed, _fmt(cr * 100), _fmt(sh),
                         _fmt(float(np.sum(rewards)))])
            group = by_mask.setdefault(mask_label, {"cr": [], "sharpe": []})
            group["cr"].append(cr)
            group["sharpe"].append(sh)
            if s == 0:
                write_episode_log(infos, out.path(f"episode_{mask_label}.csv"))
    out.write_rows("env_seeds.csv", ["mask", "seed", "cr_pct", "sharpe", "total_reward"], rows)

    summary_rows = []
    labels = list(by_mask)
    for label in labels:
        for metric in ("cr", "sharpe"):
            vals = [v for v in by_mask[label][metric] if np.isfinite(v)]
            if len(vals) >= 2:
                mean, std, _ = seed_summary(vals)
                summary_rows.append([label, metric, len(vals), _fmt(mean), _fmt(std)])
    if len(labels) == 2:
        a = by_mask[labels[0]]["cr"]
        b = by_mask[labels[1]]["cr"]
        if len(a) >= 3 and len(b) >= 3:
            try:
                test = mann_whitney_u(a, b)
                summary_rows.append(
                    [f"{labels[0]} vs {labels[1]}", "mwu_cr_p", test.n,
                     _fmt(test.statistic), _fmt(test.p_value)]
                )
            except LabError:
                pass  # both groups constant and identical
    out.write_rows("seed_summary.csv", ["group", "metric", "n", "mean", "std_or_p"],
                   summary_rows)


def _run_validation_suite(cfg: ExperimentConfig, ws: Workspace, out: ArtifactWriter) -> None:
    sig = ws.signals.slice_dates(*cfg.test)
    rows = []
    for a, axis in enumerate(AXES):
        vals = sig.values[:, :, a][sig.non_neutral]
        if vals.size:
            rows.append([axis, _fmt(float(vals.mean())), _fmt(float(vals.std(ddof=1)))
                         if vals.size > 1 else _fmt(0.0), _fmt(float(np.median(vals)))])
        else:
            rows.append([axis, "nan", "nan", "nan"])
    out.write_rows("signal_stats.csv", ["axis", "mean", "std", "median"], rows)

    coverage = coverage_stats(sig)
    cov_rows = []
    for t in sorted(coverage.tickers):
        vf = coverage.value_fractions[t]
        cov_rows.append([
            t, sig.values.shape[0], _fmt(coverage.any_fraction[t] * 100),
            *[_fmt(vf[axis] * 100) for axis in AXES],
        ])
    out.write_rows(
        "coverage.csv",
        ["ticker", "stock_days", "any_pct", *[f"{a}_pct" for a in AXES]],
        cov_rows,
    )

    fwd = forward_returns(ws.panel, ws.horizon)
    test_mask = np.array([cfg.test[0] <= d <= cfg.test[1] for d in ws.panel.dates])
    ic_rows = []
    for a, axis in enumerate(AXES):
        x = ws.signals.values[test_mask][:, :, a].ravel()
        y = fwd[test_mask].ravel()
        y_abs = np.abs(y)
        try:
            r1 = spearman_ic(x, y)
            r2 = spearman_ic(x, y_abs)
            ic_rows.append([axis, _fmt(r1.statistic), _fmt(r1.p_value),
                            _fmt(r2.statistic), _fmt(r2.p_value)])
        except LabError as exc:
            ic_rows.append([axis, "nan", "nan", "nan", str(exc)])
    out.write_rows(
        "ic.csv", ["axis", "return_ic", "p", "abs_return_ic", "abs_p"], ic_rows
    )

    ac_rows = []
    for axis in AXES:
        values, skipped = lag1_autocorr(sig, axis, min_obs=int(cfg.params.get("min_obs", 20)))
        for t in sorted(values):
            ac_rows.append([axis, t, _fmt(values[t])])
        for t in sorted(skipped):
            ac_rows.append([axis, t, f"skipped: {skipped[t]}"])
    out.write_rows("autocorr.csv", ["axis", "ticker", "lag1_autocorr"], ac_rows)


_RUNNERS = {
    "sfp": _run_sfp,
    "srf": _run_srf,
    "scw": _run_scw,
    "pc1": _run_pc1,
    "softmax": _run_softmax,
    "forecaster": _run_forecaster,
    "baselines": _run_baselines,
    "cost_sweep": _run_cost_sweep,
    "stratified": _run_stratified,
    "subperiod": _run_subperiod,
    "env_eval": _run_env_eval,
    "validation_suite": _run_validation_suite,
}


def run(cfg: ExperimentConfig) -> list[str]:
    """Execute one experiment; returns the artifact paths.

    Deterministic for a fixed (config, inputs, seed); on any error the
    partially written outputs are removed and the error propagates.
    """
    out = ArtifactWriter(cfg.output_dir)
    try:
        ws = load_workspace(cfg)
        _RUNNERS[cfg.kind](cfg, ws, out)
        manifest = {
            "kind": cfg.kind,
            "seed": cfg.seed,
            "config": cfg.canonical(),
            "config_hash": cfg.config_hash(),
            "input_hashes": ws.input_hashes,
            "versions": {
                "semlab": __version__,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
            },
            "artifacts": sorted(os.path.basename(p) for p in out.created),
        }
        with open(out.path("manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return sorted(out.created)
    except BaseException:
        out.cleanup()
        raise


# ---------------------------------------------------------------------------
# Input validation
# ---------------------------------------------------------------------------

@dataclass
class ValidationReport:
    checks: list[dict]
    hashes: dict[str, str]

    @property
    def ok(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def lines(self) -> list[str]:
        out = []
        for c in self.checks:
            mark = "PASS" if c["passed"] else "FAIL"
            out.append(f"[{mark}] {c['name']}: {c['detail']}")
        for name, digest in sorted(self.hashes.items()):
            out.append(f"[hash] {name}: {digest}")
        return out


def validate_inputs(price_panel: str | None = None, signal_cache: str | None = None) -> ValidationReport:
    """Check input files against the documented invariants; never raises.

    Verifies panel alignment and positivity, article score ranges, ticker
    and date coverage against the panel calendar, and emits content hashes
    for provenance.
    """
    checks: list[dict] = []
    hashes: dict[str, str] = {}
    panel = None

    def record(name: str, passed: bool, detail: str) -> None:
        checks.append({"name": name, "passed": passed, "detail": detail})

    if price_panel is not None:
        try:
            panel = load_price_panel(price_panel)
            record("price_panel", True,
                   f"{panel.n_dates} dates x {panel.n_tickers} tickers, aligned")
            hashes["price_panel_file"] = _file_hash(price_panel)
            hashes["price_panel_content"] = panel.content_hash()
        except LabError as exc:
            record("price_panel", False, str(exc))
        except OSError as exc:
            record("price_panel", False, str(exc))

    if signal_cache is not None:
        try:
            articles = load_article_scores(signal_cache)
            record("signal_cache", True, f"{len(articles)} articles, scores in range")
            hashes["signal_cache_file"] = _file_hash(signal_cache)
            if panel is not None:
                known = set(panel.tickers)
                stray = sorted({a.ticker for a in articles if a.ticker not in known})
                record(
                    "cache_tickers_in_universe", not stray,
                    "all tickers known" if not stray else f"unknown tickers: {stray[:10]}",
                )
                lo, hi = panel.dates[0], panel.dates[-1]
                outside = sum(1 for a in articles if not lo <= a.published <= hi)
                record(
                    "cache_dates_in_calendar", outside == 0,
                    "all article dates inside the panel calendar"
                    if outside == 0 else f"{outside} articles dated outside [{lo}, {hi}]",
                )
        except LabError as exc:
            record("signal_cache", False, str(exc))
        except OSError as exc:
            record("signal_cache", False, str(exc))

    if not checks:
        record("inputs", False, "nothing to validate: no paths given")
    return ValidationReport(checks=checks, hashes=hashes)
