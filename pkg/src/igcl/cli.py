"""``igcl`` command line: synth, train, score, eval, plot.

Exit codes: 0 success, 2 usage/config, 3 numerical failure, 4 I/O.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .config import TrainConfig, load_run_config
from .errors import (ConfigError, CorruptCheckpoint, IGCLError, MalformedCsv, NonFiniteLoss, UnsupportedVersion)
from .evaluation import evaluate
from .scoring import calibrate_threshold, early_warnings, read_scores_csv, score_series, write_scores_csv
from .series import future_anomaly_targets, load_series_csv
from .synth import load_event_specs, make_benchmark, random_event_specs, write_benchmark

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4

log = logging.getLogger("igcl")

SYNTH_KEYS = {"n_vars", "train_length", "test_length", "events", "random_events"}
RANDOM_EVENT_KEYS = {"n_events", "precursor_length", "anomaly_length", "max_vars", "kinds", "magnitude", "margin"}


class UsageError(Exception):
    pass


def _read_json(path):
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None


def load_synth_spec(doc: dict, seed: int):
    """Resolve a synth document into ``(n_vars, train_len, test_len, specs)``."""
    if not isinstance(doc, dict):
        raise ConfigError("spec must be a JSON object")
    for key in doc:
        if key not in SYNTH_KEYS:
            raise ConfigError(f"{key}: unknown key", key)
    for key, default in (("n_vars", 5), ("train_length", 20000), ("test_length", 5000)):
        v = doc.setdefault(key, default)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise ConfigError(f"{key}: expected a positive integer, got {v!r}", key)
    if ("events" in doc) == ("random_events" in doc):
        raise ConfigError("events: give exactly one of 'events' or 'random_events'", "events")
    if "events" in doc:
        specs = load_event_specs(doc["events"])
    else:
        opts = doc["random_events"]
        if not isinstance(opts, dict):
            raise ConfigError("random_events: expected an object", "random_events")
        for key in opts:
            if key not in RANDOM_EVENT_KEYS:
                raise ConfigError(f"random_events.{key}: unknown key", f"random_events.{key}")
        opts = dict(opts)
        n_events = opts.pop("n_events", 20)
        try:
            specs = random_event_specs(doc["n_vars"], doc["test_length"], n_events, seed, **opts)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"random_events: {exc}", "random_events") from None
    for k, s in enumerate(specs):
        s.validate(doc["n_vars"], doc["test_length"], f"events[{k}]")
    return doc["n_vars"], doc["train_length"], doc["test_length"], specs


def cmd_synth(args) -> int:
    doc = _read_json(args.spec)
    n_vars, train_len, test_len, specs = load_synth_spec(doc, args.seed)
    train, test = make_benchmark(n_vars, train_len, test_len, specs, args.seed)
    train_path, test_path = write_benchmark(train, test, args.out)
    provenance = {
        "tool": "igcl synth",
        "version": __version__,
        "seed": args.seed,
        "n_vars": n_vars,
        "train_length": train_len,
        "test_length": test_len,
        "events": [s.to_dict() for s in specs],
        "files": [train_path.name, test_path.name],
    }
    (Path(args.out) / "provenance.json").write_text(json.dumps(provenance, indent=2, sort_keys=True) + "\n")
    print(f"wrote {train_path} and {test_path} ({len(specs)} events)")
    return EXIT_OK


TRAIN_FLAGS = ("epochs", "steps_per_epoch", "seed", "h", "b", "f", "bank_size", "lr", "d", "dtype",
               "generator_signal", "similarity")


def cmd_train(args) -> int:
    if args.config:
        cfg, paths = load_run_config(args.config)
    else:
        cfg, paths = TrainConfig(), {}
    overrides = {k: getattr(args, k) for k in TRAIN_FLAGS if getattr(args, k) is not None}
    if args.literal:
        overrides["store_literal_windows"] = True
    if overrides:
        cfg = TrainConfig.from_dict({**cfg.to_dict(), **overrides})
    data = args.data or paths.get("data")
    out = args.out or paths.get("out")
    if not data or not out:
        raise UsageError("--data and --out are required (or 'data'/'out' in the config)")
    frame = load_series_csv(data, missing=args.missing)

    from .training import train

    def progress(epoch, s):
        print(f"epoch {epoch:3d}  L_c={s['l_c']:.4f}  L_r={s['l_r']:.4f}  bank={s['bank_fill']}", flush=True)

    ckpt = train(frame, cfg, progress)
    save_checkpoint(ckpt, out)
    print(f"saved {out}  delta={ckpt.delta!r}")
    return EXIT_OK


def cmd_score(args) -> int:
    ckpt = load_checkpoint(args.model)
    frame = load_series_csv(args.data, missing=args.missing)
    series = score_series(ckpt, frame.without_labels())
    note = "source=checkpoint"
    if args.delta is not None:
        series.delta, note = float(args.delta), "source=flag"
    elif args.quantile is not None:
        if ckpt.calibration_scores.size == 0:
            raise UsageError("checkpoint holds no calibration scores for --quantile")
        series.delta = calibrate_threshold(ckpt.calibration_scores.astype(np.float64), "quantile", args.quantile)
        note = f"source=quantile q={args.quantile!r}"
    write_scores_csv(series, args.out, note)
    print(f"wrote {args.out}  ({int((~series.excluded).sum())} scored, delta={series.delta!r})")
    return EXIT_OK


def cmd_eval(args) -> int:
    series = read_scores_csv(args.scores)
    frame = load_series_csv(args.data, missing=args.missing)
    if frame.labels is None:
        raise UsageError(f"{args.data} has no label column")
    if frame.length != len(series.scores):
        raise UsageError(f"{len(series.scores)} scores for {frame.length} timestamps")
    targets = future_anomaly_targets(frame.labels, args.f, args.h)
    report = evaluate(series.scores, targets, series.delta, {"f": args.f, "h": args.h})
    Path(args.out).write_text(report.to_json() + "\n")
    print(report.to_table())
    if args.warnings and series.delta is not None:
        from .scoring import write_warnings_csv

        write_warnings_csv(early_warnings(series, frame.labels, args.h, args.f), args.warnings)
    return EXIT_OK


def cmd_plot(args) -> int:
    from .plotting import plot_scores

    series = read_scores_csv(args.scores)
    frame = load_series_csv(args.data, missing=args.missing)
    plot_scores(series, frame.labels, args.out, h=args.h, f=args.f)
    print(f"wrote {args.out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="igcl", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"igcl {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="generate a synthetic train/test benchmark")
    s.add_argument("--spec", required=True, help="events JSON")
    s.add_argument("--out", required=True, help="output directory")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    t = sub.add_parser("train", help="train a model on normal data")
    t.add_argument("--data")
    t.add_argument("--config", help="run JSON (training keys plus data/out)")
    t.add_argument("--out")
    for name in TRAIN_FLAGS:
        kind = TrainConfig.__dataclass_fields__[name].default
        t.add_argument(f"--{name.replace('_', '-')}", dest=name, type=type(kind), default=None)
    t.add_argument("--literal", action="store_true", help="store literal perturbed windows in the bank")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("score", help="score a series with a trained model")
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True)
    c.add_argument("--out", required=True)
    g = c.add_mutually_exclusive_group()
    g.add_argument("--delta", type=float)
    g.add_argument("--quantile", type=float)
    c.set_defaults(func=cmd_score)

    e = sub.add_parser("eval", help="evaluate scores against labels")
    e.add_argument("--scores", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--f", type=int, required=True, help="prediction horizon")
    e.add_argument("--h", type=int, default=0, help="exclude windows [t-h, t] touching an anomaly")
    e.add_argument("--out", required=True)
    e.add_argument("--warnings", help="optional early-warning CSV")
    e.set_defaults(func=cmd_eval)

    pl = sub.add_parser("plot", help="static SVG of scores, threshold and labels")
    pl.add_argument("--scores", required=True)
    pl.add_argument("--data", required=True)
    pl.add_argument("--out", required=True)
    pl.add_argument("--f", type=int, default=16)
    pl.add_argument("--h", type=int, default=16)
    pl.set_defaults(func=cmd_plot)

    for sp in (t, c, e, pl):
        sp.add_argument("--missing", choices=("reject", "ffill"), default="reject")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except NonFiniteLoss as exc:
        print(f"error: {exc} {json.dumps(exc.diagnostics, sort_keys=True)}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, MalformedCsv, CorruptCheckpoint, UnsupportedVersion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except IGCLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
