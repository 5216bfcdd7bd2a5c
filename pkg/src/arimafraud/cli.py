"""Command-line interface.

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 estimation failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import datagen, ingest, pipeline
from .arima import ArimaModel, ArimaOrder
from .detector import write_detections_csv
from .errors import ArimaFraudError, ConfigError
from .stattests import adf_test, correlogram, ljung_box, suggest_orders

log = logging.getLogger("arimafraud")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def read_config_file(path) -> dict[str, str]:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys
    are treated as underscores."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _int_pair(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {text!r}") from exc
    return lo, hi


def _methods(text: str) -> tuple[str, ...]:
    return tuple(m.strip() for m in text.split(",") if m.strip())


def _order(text: str):
    return None if text == "auto" else ArimaOrder.parse(text)


def _bool(text: str) -> bool:
    if text.lower() in ("1", "true", "yes", "on"):
        return True
    if text.lower() in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


# dest -> (type, default); shared by flags and the config file
PIPELINE_OPTIONS = {
    "split_ratio": (float, 0.7),
    "z_threshold": (float, 3.0),
    "two_sided": (_bool, False),
    "order": (_order, None),
    "refit_every": (int, None),
    "methods": (_methods, pipeline.ALL_METHODS),
    "k": (int, None),
    "lof_threshold": (float, 1.5),
    "trees": (int, 100),
    "subsample": (int, None),
    "restarts": (int, 10),
    "reps": (int, 100),
    "count_range": (_int_pair, (1, 8)),
    "seed": (int, 0),
}


def _add_pipeline_options(p: argparse.ArgumentParser, only=None) -> None:
    names = only or PIPELINE_OPTIONS
    help_text = {
        "split_ratio": "train fraction of each series (default 0.7)",
        "z_threshold": "Z-score flag threshold (default 3)",
        "two_sided": "flag |z| > threshold instead of z > threshold",
        "order": "ARIMA order 'p,d,q' or 'auto' (default auto)",
        "refit_every": "re-estimate the ARIMA model every N test days",
        "methods": "comma-separated subset of arima,boxplot,lof,iforest,kmeans",
        "k": "LOF neighbours (default min(20, n-1))",
        "lof_threshold": "LOF flag threshold (default 1.5)",
        "trees": "isolation trees (default 100)",
        "subsample": "isolation subsample size (default min(256, train length))",
        "restarts": "k-means restarts (default 10)",
        "reps": "injection repetitions (default 100)",
        "count_range": "injected fraud count range 'lo,hi' (default 1,8)",
        "seed": "master seed (default 0)",
    }
    for name in names:
        conv, _ = PIPELINE_OPTIONS[name]
        flag = "--" + name.replace("_", "-")
        if conv is _bool:
            p.add_argument(flag, dest=name, action="store_const", const=True, default=None, help=help_text[name])
        else:
            p.add_argument(flag, dest=name, type=conv, default=None, help=help_text[name])


def resolve_options(args: argparse.Namespace) -> dict:
    """Flags override config-file values, which override defaults."""
    from_file = read_config_file(args.config) if getattr(args, "config", None) else {}
    unknown = set(from_file) - set(PIPELINE_OPTIONS) - {"input_path", "output_dir"}
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    resolved = {}
    for name, (conv, default) in PIPELINE_OPTIONS.items():
        value = getattr(args, name, None)
        if value is None and name in from_file:
            try:
                value = conv(from_file[name])
            except (argparse.ArgumentTypeError, ValueError) as exc:
                raise ConfigError(f"config key {name}: {exc}") from exc
        resolved[name] = default if value is None else value
    for name in ("input_path", "output_dir"):
        if name in from_file:
            resolved[name] = from_file[name]
    return resolved


def _config(args, **overrides) -> pipeline.PipelineConfig:
    opts = resolve_options(args)
    input_path = getattr(args, "input", None) or opts.pop("input_path", None)
    output_dir = getattr(args, "out", None) or opts.pop("output_dir", None) or "out"
    opts.pop("input_path", None)
    opts.pop("output_dir", None)
    opts.update(overrides)
    return pipeline.PipelineConfig(input_path=Path(input_path) if input_path else None,
                                   output_dir=Path(output_dir), **opts)


def _write_json(path: Path, data) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2) + "\n")


def _load_split(args, cfg: pipeline.PipelineConfig) -> ingest.SplitSeries:
    return ingest.split(ingest.read_counts_csv(args.counts), cfg.split_ratio)


# -- subcommands -------------------------------------------------------------

def cmd_gen(args) -> int:
    profiles = datagen.reference_profiles(args.seed, args.eligible, args.ineligible, args.split_ratio,
                                          args.count_range, args.sigma2, args.kind)
    records = datagen.generate_corpus(profiles, args.seed)
    ingest.write_transactions(records, args.out)
    log.info("wrote %d transactions for %d customers to %s", len(records), len(profiles), args.out)
    return 0


def cmd_ingest(args) -> int:
    cfg = _config(args)
    transactions = ingest.read_transactions(args.input)
    series = ingest.aggregate_all(transactions)
    out = Path(args.out)
    (out / "counts").mkdir(parents=True, exist_ok=True)
    status = []
    for s in series.values():
        ingest.write_counts_csv(s, out / "counts" / f"{s.customer_id}.csv")
        status.append(ingest.eligibility(ingest.split(s, cfg.split_ratio)))
    ingest.write_eligibility_report(status, out / "eligibility.json")
    print(json.dumps({"customers": len(series), "transactions": len(transactions),
                      "fraud_fraction": ingest.fraud_fraction(transactions),
                      "eligible": sum(st.eligible for st in status)}))
    return 0


def cmd_diagnose(args) -> int:
    cfg = _config(args)
    sp = _load_split(args, cfg)
    x = sp.train if not args.full else sp.series.total_counts
    cg = correlogram(x, args.lags)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    pipeline.write_correlogram_csv(cg, out / "correlogram.csv")
    report = {"adf": adf_test(x).to_dict(),
              "ljung_box": ljung_box(x, min(10, len(x) - 1)).to_dict(),
              "suggested_orders": [list(pq) for pq in suggest_orders(cg)]}
    _write_json(out / "diagnostics.json", report)
    print(json.dumps(report, indent=2))
    return 0


def cmd_fit(args) -> int:
    cfg = _config(args)
    sp = _load_split(args, cfg)
    selection = pipeline.select_model(sp.train, cfg)
    model = selection.model
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "model.json").write_text(model.to_json(residuals=True) + "\n")
    diag = selection.to_dict()
    diag.update(pipeline.model_diagnostics(model))
    _write_json(out / "residual_diagnostics.json", diag)
    print(model.to_json())
    return 0


def cmd_detect(args) -> int:
    cfg = _config(args)
    sp = _load_split(args, cfg)
    if args.model:
        model = ArimaModel.from_dict(json.loads(Path(args.model).read_text()))
        if len(model.train_residuals) == 0:
            raise ConfigError(f"{args.model}: model file has no train_residuals")
        selection = pipeline.ModelSelection(model, model.order.d, [], None)
        run = pipeline.arima_detect(sp, cfg, selection)
    else:
        run = pipeline.arima_detect(sp, cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    write_detections_csv(out, sp.test_dates, run.forecasts, run.outcomes)
    print(f"{int(run.flags.sum())} of {len(run.flags)} test days flagged")
    return 0


def cmd_bench(args) -> int:
    cfg = _config(args)
    sp = _load_split(args, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for method in cfg.methods:
        if method == "arima":
            continue
        fs = pipeline.run_baseline_on_split(method, sp, cfg, cfg.seed)
        pipeline.write_baseline_csv(out / f"{method}.csv", sp.test_dates, sp.test, fs, sp.test_truth)
        print(f"{method}: {int(fs.flags.sum())} of {len(fs.flags)} test days flagged")
    return 0


def _evaluate_transactions(args, inject: bool) -> int:
    cfg = _config(args, inject=inject)
    transactions = ingest.read_transactions(args.input)
    splits = [ingest.split(s, cfg.split_ratio) for s in ingest.aggregate_all(transactions).values()]
    report = pipeline.evaluate(splits, cfg)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(report.to_json())
    (out / "report.csv").write_text(report.to_csv())
    sys.stdout.write(report.to_csv())
    return 0


def cmd_inject(args) -> int:
    return _evaluate_transactions(args, inject=True)


def cmd_report(args) -> int:
    if args.detections:
        report = pipeline.report_from_directory(args.detections)
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(report.to_json())
        (out / "report.csv").write_text(report.to_csv())
        sys.stdout.write(report.to_csv())
        return 0
    if not args.input:
        raise ConfigError("report needs --input transactions or --detections directory")
    return _evaluate_transactions(args, inject=False)


def cmd_run(args) -> int:
    cfg = _config(args, inject=args.inject)
    if cfg.input_path is None:
        raise ConfigError("run needs an input file (argument or input_path in the config file)")
    report = pipeline.run_pipeline(cfg)
    sys.stdout.write(report.to_csv())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="arimafraud", description="ARIMA-based fraud detection on daily transaction counts")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate a synthetic transactions CSV")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--eligible", type=int, default=9)
    p.add_argument("--ineligible", type=int, default=15)
    p.add_argument("--split-ratio", type=float, default=0.7)
    p.add_argument("--count-range", type=_int_pair, default=(1, 8))
    p.add_argument("--sigma2", type=float, default=1.0)
    p.add_argument("--kind", choices=("arima", "poisson"), default="arima")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("ingest", help="aggregate transactions into daily counts and check eligibility")
    p.add_argument("input")
    p.add_argument("--out", default="out")
    p.add_argument("--config")
    _add_pipeline_options(p, ["split_ratio"])
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("diagnose", help="ADF, Ljung-Box and correlogram of a count series")
    p.add_argument("counts", help="date,total,fraud CSV")
    p.add_argument("--out", default="out/diagnose")
    p.add_argument("--lags", type=int)
    p.add_argument("--full", action="store_true", help="use the whole series, not only the training part")
    p.add_argument("--config")
    _add_pipeline_options(p, ["split_ratio"])
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("fit", help="fit an ARIMA model to the training part of a count series")
    p.add_argument("counts")
    p.add_argument("--out", default="out/fit")
    p.add_argument("--config")
    _add_pipeline_options(p, ["split_ratio", "order"])
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("detect", help="rolling forecasts and Z-score flags on the test part")
    p.add_argument("counts")
    p.add_argument("--model", help="model JSON written by 'fit' (otherwise fitted here)")
    p.add_argument("--out", default="out/detections.csv")
    p.add_argument("--config")
    _add_pipeline_options(p, ["split_ratio", "order", "z_threshold", "two_sided", "refit_every"])
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("bench", help="baseline detectors on one count series")
    p.add_argument("counts")
    p.add_argument("--out", default="out/bench")
    p.add_argument("--config")
    _add_pipeline_options(p, ["split_ratio", "methods", "k", "lof_threshold", "trees", "subsample",
                              "restarts", "seed"])
    p.set_defaults(func=cmd_bench, methods=None)

    for name, func, help_ in (("inject", cmd_inject, "fraud-injection robustness experiment"),
                              ("report", cmd_report, "comparison report (Precision/Recall/F-Measure)")):
        p = sub.add_parser(name, help=help_)
        if name == "inject":
            p.add_argument("input")
        else:
            p.add_argument("--input")
            p.add_argument("--detections", help="directory of <method>/<series>.csv detection files")
        p.add_argument("--out", default=f"out/{name}")
        p.add_argument("--config")
        _add_pipeline_options(p)
        p.set_defaults(func=func)

    p = sub.add_parser("run", help="end-to-end pipeline from a transactions CSV")
    p.add_argument("input", nargs="?")
    p.add_argument("--out")
    p.add_argument("--inject", action="store_true", help="also reintegrate ineligible series by injection")
    p.add_argument("--config")
    _add_pipeline_options(p)
    p.set_defaults(func=cmd_run)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ArimaFraudError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
