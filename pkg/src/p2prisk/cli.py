"""Command-line entry point: ``p2prisk {synth,ingest,train,baseline,compare}``.

Settings come from an optional INI file (``--config``, section ``[p2prisk]``)
and are overridden by flags.  Keys::

    loans, macro, series, out_dir          paths
    status_map                             "Fully Paid=0; Charged Off=1; Current=ongoing; ..."
    sparse_threshold                       float in (0, 1]
    hidden, batch_size, epochs, lookback   ints
    learning_rate, split_ratio             floats
    ar_orders                              "1,2,3"
    use_macro                              true/false
    seed, n_loans, n_months, macro_effect  synth / training seed

Exit codes: 0 ok, 1 usage/config error, 2 data error, 3 numerical failure.
Errors are written to stderr as one JSON line.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, P2PRiskError
from .evaluate import CompareConfig, chrono_split, compare_models, write_rmse_table, write_trend
from .ingest import DEFAULT_STATUS_MAP, MonthlySeries, merge_macro, read_series, run_pipeline, write_series
from .recurrent import TrainConfig, predict, save_checkpoint, train, write_loss_history
from .synth import SynthConfig, write_fixture
from .timeseries import (
    correlogram,
    difference,
    fit_ar,
    fit_var,
    select_ar_order,
    write_correlogram,
    write_model_summary,
)

log = logging.getLogger("p2prisk")

SECTION = "p2prisk"


@dataclass
class PipelineConfig:
    loans: str | None = None
    macro: str | None = None
    series: str | None = None
    out_dir: str = "out"
    status_map: dict = field(default_factory=lambda: dict(DEFAULT_STATUS_MAP))
    sparse_threshold: float = 0.8
    hidden: int = 70
    batch_size: int = 50
    epochs: int = 1000
    lookback: int = 12
    learning_rate: float = 0.001
    ar_orders: tuple[int, ...] = (1, 2, 3)
    split_ratio: float = 0.8
    use_macro: bool = False
    seed: int = 0
    n_loans: int = 30_000
    n_months: int = 120
    macro_effect: float = 3.0
    max_lag: int = 20

    def train_config(self) -> TrainConfig:
        return TrainConfig(hidden_size=self.hidden, batch_size=self.batch_size, epochs=self.epochs,
                           lookback=self.lookback, learning_rate=self.learning_rate, seed=self.seed)

    def validate(self) -> None:
        if not 0.0 < self.sparse_threshold <= 1.0:
            raise ConfigError("sparse_threshold must be in (0, 1]")
        if not 0.0 < self.split_ratio < 1.0:
            raise ConfigError("split_ratio must be in (0, 1)")
        if not self.ar_orders or min(self.ar_orders) < 0:
            raise ConfigError("ar_orders must be a nonempty list of non-negative ints")
        for name in ("hidden", "batch_size", "lookback"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")


def parse_status_map(text: str) -> dict:
    out = {}
    for item in text.replace("\n", ";").split(";"):
        if not item.strip():
            continue
        status, sep, value = item.rpartition("=")
        if not sep:
            raise ConfigError(f"status_map entry {item.strip()!r} is not STATUS=VALUE")
        value = value.strip().lower()
        if value in ("0", "1"):
            out[status.strip()] = int(value)
        elif value == "ongoing":
            out[status.strip()] = None
        else:
            raise ConfigError(f"status_map value {value!r} must be 0, 1 or ongoing")
    return out


def _convert(name: str, raw) -> object:
    kinds = {f.name: f.type for f in fields(PipelineConfig)}
    if name not in kinds:
        raise ConfigError(f"unknown config key {name!r}")
    if raw is None:
        return None
    kind = str(kinds[name])
    s = str(raw).strip()
    try:
        if name == "status_map":
            return parse_status_map(s)
        if name == "ar_orders":
            return tuple(int(v) for v in s.replace(" ", "").split(",") if v)
        if kind == "bool":
            if s.lower() in ("1", "true", "yes", "on"):
                return True
            if s.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(s)
        if kind == "int":
            return int(s)
        if kind == "float":
            return float(s)
    except ValueError:
        raise ConfigError(f"invalid value {s!r} for {name}") from None
    return s


def load_config(path: str | None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    if not os.path.exists(path):
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    if not parser.has_section(SECTION):
        raise ConfigError(f"{path} has no [{SECTION}] section")
    updates = {k: _convert(k, v) for k, v in parser.items(SECTION)}
    return replace(cfg, **updates)


FLAG_KEYS = ("loans", "macro", "series", "out_dir", "seed", "use_macro", "lookback", "epochs", "batch_size",
             "hidden", "ar_orders", "learning_rate", "split_ratio", "sparse_threshold", "n_loans", "n_months",
             "macro_effect", "status_map", "max_lag")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with a [p2prisk] section")
    common.add_argument("--seed", type=str)
    common.add_argument("--out-dir", dest="out_dir")
    common.add_argument("--loans", help="loan-level CSV")
    common.add_argument("--macro", help="monthly macro CSV (month,unemp_rate)")
    common.add_argument("--series", help="aggregated monthly CSV (skips ingest)")
    common.add_argument("--use-macro", dest="use_macro", action="store_const", const="true")
    common.add_argument("--lookback", type=str)
    common.add_argument("--epochs", type=str)
    common.add_argument("--batch-size", dest="batch_size", type=str)
    common.add_argument("--hidden", type=str)
    common.add_argument("--learning-rate", dest="learning_rate", type=str)
    common.add_argument("--ar-orders", dest="ar_orders", type=str, help="comma-separated, e.g. 1,2,3")
    common.add_argument("--split-ratio", dest="split_ratio", type=str)
    common.add_argument("--sparse-threshold", dest="sparse_threshold", type=str)
    common.add_argument("--status-map", dest="status_map", type=str)
    common.add_argument("--max-lag", dest="max_lag", type=str)
    common.add_argument("--n-loans", dest="n_loans", type=str)
    common.add_argument("--n-months", dest="n_months", type=str)
    common.add_argument("--macro-effect", dest="macro_effect", type=str)
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="p2prisk", description="Monthly P2P default-rate forecasting toolkit")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("synth", parents=[common], help="write a deterministic synthetic loan + macro fixture")
    sub.add_parser("ingest", parents=[common], help="aggregate loan CSV (+ macro) to a monthly series CSV")
    sub.add_parser("train", parents=[common], help="train one LSTM; write checkpoint and loss history")
    sub.add_parser("baseline", parents=[common], help="correlogram plus AR/VAR summaries")
    sub.add_parser("compare", parents=[common], help="LSTM(1) vs LSTM(2) vs AR report CSVs")
    return p


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = load_config(args.config)
    updates = {}
    for key in FLAG_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            updates[key] = _convert(key, val)
    cfg = replace(cfg, **updates)
    cfg.validate()
    return cfg


def _require_file(path: str | None, what: str) -> str:
    if not path:
        raise ConfigError(f"{what} path is required")
    if not os.path.isfile(path):
        raise DataError(f"{what} file not found: {path}")
    return path


def load_series(cfg: PipelineConfig, need_macro: bool) -> MonthlySeries:
    if cfg.series:
        series = read_series(_require_file(cfg.series, "series"))
        if need_macro and series.macro is None:
            if not cfg.macro:
                raise ConfigError("series has no unemp_rate column and no --macro was given")
            series = merge_macro(series, _require_file(cfg.macro, "macro"))
        return series
    loans = _require_file(cfg.loans, "loans")
    macro = _require_file(cfg.macro, "macro") if (need_macro or cfg.macro) else None
    series, report = run_pipeline(loans, macro, status_map=cfg.status_map, threshold=cfg.sparse_threshold)
    for note in report.notes:
        log.info("%s", note)
    return series


def _out(cfg: PipelineConfig) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(cfg: PipelineConfig) -> None:
    out = _out(cfg)
    sc = SynthConfig(seed=cfg.seed, n_loans=cfg.n_loans, n_months=cfg.n_months, macro_effect=cfg.macro_effect)
    try:
        write_fixture(sc, out / "loans.csv", out / "macro.csv")
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
    log.info("wrote %s and %s", out / "loans.csv", out / "macro.csv")


def cmd_ingest(cfg: PipelineConfig) -> None:
    loans = _require_file(cfg.loans, "loans")
    macro = _require_file(cfg.macro, "macro") if cfg.macro else None
    series, report = run_pipeline(loans, macro, status_map=cfg.status_map, threshold=cfg.sparse_threshold)
    out = _out(cfg)
    write_series(series, out / "monthly.csv")
    with open(out / "ingest_report.json", "w", encoding="utf-8") as fh:
        json.dump({
            "n_parsed": report.n_parsed,
            "n_resolved": report.n_resolved,
            "n_months": len(series),
            "dropped_columns": report.dropped_columns,
            "gaps": report.gaps,
            "notes": report.notes,
            "rank_tests": report.rank_tests,
        }, fh, indent=1, sort_keys=True)
        fh.write("\n")
    log.info("aggregated %d resolved loans into %d months", report.n_resolved, len(series))


def cmd_train(cfg: PipelineConfig) -> None:
    series = load_series(cfg, need_macro=cfg.use_macro)
    tcfg = cfg.train_config()
    split = chrono_split(len(series), cfg.split_ratio, min_train=tcfg.lookback + 1)
    model = train(series, tcfg, cfg.use_macro, split.train_month_count)
    out = _out(cfg)
    tag = "lstm2" if cfg.use_macro else "lstm1"
    save_checkpoint(model, out / f"{tag}.json")
    write_loss_history(model, out / f"{tag}_loss.csv")
    pred = predict(model, series, tcfg.lookback - 1, len(series))
    with open(out / f"{tag}_predictions.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["month", "actual", "predicted"])
        for i, row in enumerate(range(tcfg.lookback - 1, len(series))):
            w.writerow([str(series.months[row]), repr(float(series.default_rate[row])), repr(float(pred[i]))])


def _drop_reference_levels(names) -> list[int]:
    # monthly means of a one-hot group sum to 1, which is collinear with the intercept
    last = {}
    for j, name in enumerate(names):
        if "=" in name:
            last[name.split("=", 1)[0]] = j
    dropped = set(last.values())
    return [j for j in range(len(names)) if j not in dropped]


def cmd_baseline(cfg: PipelineConfig) -> None:
    series = load_series(cfg, need_macro=False)
    split = chrono_split(len(series), cfg.split_ratio)
    k = split.train_month_count
    train_rate = series.default_rate[:k]
    diffs = difference(train_rate, 1)
    max_lag = min(cfg.max_lag, len(diffs) - 1)
    out = _out(cfg)
    write_correlogram(correlogram(diffs, max_lag), out / "correlogram.csv")
    models = {}
    for p in sorted(set(cfg.ar_orders)):
        models[f"AR({p})"] = fit_ar(train_rate, p, d=1, burn_in=max(cfg.ar_orders))
    best = select_ar_order(train_rate, cfg.ar_orders, d=1)
    models["selected"] = best
    p_var = max(1, best.order)
    if series.macro is not None:
        both = np.column_stack([series.default_rate, series.macro])[:k]
        models[f"VAR({p_var})[default_rate,unemp_rate]"] = fit_var(both, p_var, d=1,
                                                                  names=("default_rate", series.macro_name))
    keep = _drop_reference_levels(series.feature_names)
    feats = np.column_stack([series.default_rate, series.features[:, keep]])[:k]
    try:
        models[f"VAR({p_var})[default_rate,features]"] = fit_var(
            feats, p_var, d=1, names=("default_rate",) + tuple(series.feature_names[j] for j in keep))
    except P2PRiskError as exc:
        log.warning("all-feature VAR skipped: %s", exc)
    write_model_summary(models, out / "model_summary.csv")


def cmd_compare(cfg: PipelineConfig) -> None:
    series = load_series(cfg, need_macro=True)
    cc = CompareConfig(train=cfg.train_config(), ar_orders=cfg.ar_orders, split_ratio=cfg.split_ratio)
    report = compare_models(series, cc, seed=cfg.seed)
    out = _out(cfg)
    write_rmse_table(report, out / "rmse_table.csv")
    write_trend(report, out / "trend.csv")
    with open(out / "compare_meta.json", "w", encoding="utf-8") as fh:
        json.dump(report.metadata, fh, indent=1, sort_keys=True)
        fh.write("\n")


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "train": cmd_train, "baseline": cmd_baseline,
            "compare": cmd_compare}


def _emit_error(exc: BaseException, code: int) -> None:
    sys.stderr.write(json.dumps({"error": type(exc).__name__, "exit_code": code, "message": str(exc)}) + "\n")


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0) and 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = resolve_config(args)
        COMMANDS[args.command](cfg)
    except P2PRiskError as exc:
        _emit_error(exc, exc.exit_code)
        return exc.exit_code
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        code = 3 if isinstance(exc, (ArithmeticError, np.linalg.LinAlgError)) else 2
        _emit_error(exc, code)
        return code
    except OSError as exc:
        _emit_error(exc, 1)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
