"""Command-line surface: ``run <config>``, ``validate <paths>``, ``synth <spec> <seed>``.

Exit codes: 0 ok, 1 configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from .errors import ConfigError, LabError
from .experiments import ExperimentConfig, run, validate_inputs
from .panels import write_price_panel
from .signals import AXES, ArticleScore, write_article_scores
from .synth import SyntheticSpec, synth_panel

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_DATA = 2


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = ExperimentConfig.from_file(args.config)
    paths = run(cfg)
    for p in paths:
        print(p)
    return EXIT_OK


def _sniff(path: str) -> str:
    with open(path) as fh:
        header = fh.readline().strip()
    if header.startswith("date,ticker,open"):
        return "prices"
    if header.startswith("source_id,ticker,date"):
        return "signals"
    raise LabError(f"{path}: unrecognised header {header!r}")


def _cmd_validate(args: argparse.Namespace) -> int:
    prices = None
    signals = None
    for path in args.paths:
        if not os.path.exists(path):
            print(f"[FAIL] {path}: no such file")
            return EXIT_DATA
        kind = _sniff(path)
        if kind == "prices":
            prices = path
        else:
            signals = path
    report = validate_inputs(price_panel=prices, signal_cache=signals)
    for line in report.lines():
        print(line)
    return EXIT_OK if report.ok else EXIT_DATA


def _cmd_synth(args: argparse.Namespace) -> int:
    spec = SyntheticSpec.from_file(args.spec)
    panel, signals, truth = synth_panel(spec, seed=args.seed)
    os.makedirs(args.out, exist_ok=True)
    prices_path = os.path.join(args.out, "prices.csv")
    cache_path = os.path.join(args.out, "signals.csv")
    truth_path = os.path.join(args.out, "truth.json")
    write_price_panel(panel, prices_path)
    articles = []
    for i, d in enumerate(signals.dates):
        for j, t in enumerate(signals.tickers):
            if signals.non_neutral[i, j]:
                articles.append(ArticleScore(
                    ticker=t, published=d,
                    scores=tuple(int(v) for v in signals.values[i, j]),
                    source_id=f"synth-{i}-{j}",
                ))
    write_article_scores(articles, cache_path)
    with open(truth_path, "w") as fh:
        json.dump({
            "beta": {axis: b for axis, b in zip(AXES, truth.beta)},
            "beta_tickers": list(truth.beta_tickers),
            "horizon": truth.horizon,
            "coverage": list(truth.coverage),
            "seed": args.seed,
        }, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(prices_path)
    print(cache_path)
    print(truth_path)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="semlab",
        description="Sparse semantic signal laboratory: experiments, input checks, synthetic data.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one experiment from a JSON config")
    p_run.add_argument("config", help="path to the experiment config")
    p_run.set_defaults(func=_cmd_run)

    p_val = sub.add_parser("validate", help="check input files against the documented invariants")
    p_val.add_argument("paths", nargs="+", help="price panel and/or article score cache files")
    p_val.set_defaults(func=_cmd_validate)

    p_syn = sub.add_parser("synth", help="generate a seeded synthetic panel")
    p_syn.add_argument("spec", help="path to the synthetic-spec JSON")
    p_syn.add_argument("seed", type=int, help="generator seed (overrides the spec's)")
    p_syn.add_argument("--out", default="synth_out", help="output directory")
    p_syn.set_defaults(func=_cmd_synth)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LabError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
