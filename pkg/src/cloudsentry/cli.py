"""Command-line interface: generate, train, detect, eval, sweep.

Exit codes: 0 success, 1 usage error, 2 runtime error. Reports are JSON
with sorted keys so identical runs produce byte-identical files.
"""

from __future__ import annotations

import argparse
import json
import sys
from importlib import resources
from pathlib import Path

from . import __version__
from .checkpoint import load_checkpoint, save_checkpoint
from .errors import CloudSentryError
from .ingest import (
    generate,
    load_scenario,
    parse_jsonl,
    scenario_from_dict,
    write_jsonl,
)
from .pipeline import (
    PipelineConfig,
    detect_stream,
    evaluate_stream,
    results_to_decisions,
    sweep_scoring_time,
    train_pipeline,
)
from .warning import AlertWriter

USAGE_EXIT = 1
RUNTIME_EXIT = 2


class _Parser(argparse.ArgumentParser):
    """argparse parser that exits 1 (not 2) on usage errors."""

    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_EXIT)


def default_scenario_path() -> Path:
    return Path(str(resources.files("cloudsentry").joinpath("data/default_scenario.json")))


def default_config_path() -> Path:
    return Path(str(resources.files("cloudsentry").joinpath("data/default_config.json")))


def _load_config(path: str | None) -> PipelineConfig:
    config_path = Path(path) if path else default_config_path()
    with open(config_path, "r", encoding="utf-8") as fh:
        return PipelineConfig.from_dict(json.load(fh))


def _load_records(path: str, channels: int | None):
    if channels is None:
        # Peek at the first object to size the channel count.
        with open(path, "r", encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    channels = len(json.loads(line)["metrics"])
                    break
        if channels is None:
            raise CloudSentryError(f"no records in {path}")
    return parse_jsonl(path, channels)


def _write_report(report: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(report, sort_keys=True, indent=2) + "\n")


def _cmd_generate(args) -> int:
    scenario = load_scenario(args.scenario or default_scenario_path())
    if args.seed is not None:
        scenario = scenario_from_dict({**_scenario_dict(scenario), "seed": args.seed})
    stream = generate(scenario)
    count = write_jsonl(stream.records, args.out)
    anomalous = sum(stream.ground_truth)
    print(f"wrote {count} records ({anomalous} anomalous) to {args.out}")
    return 0


def _scenario_dict(scenario) -> dict:
    from .ingest import scenario_to_dict

    return scenario_to_dict(scenario)


def _cmd_train(args) -> int:
    config = _load_config(args.config)
    records = _load_records(args.data, config.channels)
    model, report = train_pipeline(records, config, seed=args.seed)
    save_checkpoint(model, args.out)
    print(
        f"trained on {report.train_windows} windows "
        f"({report.anomalous_windows} anomalous, {report.val_windows} validation), "
        f"final objective {report.svm_report.final_objective:.4f}, "
        f"checkpoint {args.out}"
    )
    return 0


def _cmd_detect(args) -> int:
    model = load_checkpoint(args.ckpt)
    records = _load_records(args.data, model.channels)
    results = detect_stream(records, model)
    decisions = results_to_decisions(results)
    written = 0
    with AlertWriter(path=args.alerts, verbose=args.verbose) as writer:
        for decision in decisions:
            if writer.write(decision):
                written += 1
    alerts = sum(1 for d in decisions if d.alert)
    print(f"scored {len(decisions)} windows, {alerts} alerts, wrote {written} lines to {args.alerts}")
    return 0


def _cmd_eval(args) -> int:
    model = load_checkpoint(args.ckpt)
    records = _load_records(args.data, model.channels)
    report = evaluate_stream(records, model, with_baseline=args.baseline, grace=args.grace)
    _write_report(report, args.report)
    f1 = report["model"]["f1"]
    line = f"window F1 {f1:.4f}"
    if args.baseline:
        line += f", baseline F1 {report['baseline']['f1']:.4f}"
    print(f"{line}, report {args.report}")
    return 0


def _cmd_sweep(args) -> int:
    config = _load_config(args.config)
    records = _load_records(args.data, config.channels)
    hidden_sizes = [int(h) for h in args.hidden.split(",")]
    entries = sweep_scoring_time(records, config, hidden_sizes, seed=args.seed)
    report = {"sweep": entries}
    _write_report(report, args.report)
    summary = ", ".join(f"h={e['lstm_hidden']}: {e['ms_per_window']:.3f} ms" for e in entries)
    print(f"scoring time per window: {summary}; report {args.report}")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(prog="cloudsentry", description=__doc__)
    parser.add_argument("--version", action="version", version=f"cloudsentry {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_gen = sub.add_parser("generate", help="generate a synthetic labeled stream")
    p_gen.add_argument("--scenario", help="scenario JSON (default: bundled scenario)")
    p_gen.add_argument("--out", required=True, help="output JSONL path")
    p_gen.add_argument("--seed", type=int, help="override the scenario seed")
    p_gen.set_defaults(func=_cmd_generate)

    p_train = sub.add_parser("train", help="train a model from labeled JSONL telemetry")
    p_train.add_argument("--data", required=True, help="labeled JSONL input")
    p_train.add_argument("--config", help="pipeline config JSON (default: bundled config)")
    p_train.add_argument("--out", required=True, help="checkpoint output path")
    p_train.add_argument("--seed", type=int, default=0, help="training seed")
    p_train.set_defaults(func=_cmd_train)

    p_detect = sub.add_parser("detect", help="score a stream and emit alerts")
    p_detect.add_argument("--ckpt", required=True, help="checkpoint path")
    p_detect.add_argument("--data", required=True, help="JSONL input")
    p_detect.add_argument("--alerts", required=True, help="alert JSONL output path")
    p_detect.add_argument(
        "--verbose", action="store_true", help="also emit non-alert decisions"
    )
    p_detect.set_defaults(func=_cmd_detect)

    p_eval = sub.add_parser("eval", help="evaluate a model on a labeled stream")
    p_eval.add_argument("--ckpt", required=True, help="checkpoint path")
    p_eval.add_argument("--data", required=True, help="labeled JSONL input")
    p_eval.add_argument("--report", required=True, help="report JSON output path")
    p_eval.add_argument("--baseline", action="store_true", help="include k-sigma baseline")
    p_eval.add_argument("--grace", type=int, default=None, help="latency grace window (steps)")
    p_eval.set_defaults(func=_cmd_eval)

    p_sweep = sub.add_parser("sweep", help="scoring-time sweep over LSTM hidden sizes")
    p_sweep.add_argument("--data", required=True, help="JSONL input for timing windows")
    p_sweep.add_argument("--config", help="pipeline config JSON (default: bundled config)")
    p_sweep.add_argument("--hidden", default="32,64,128", help="comma-separated hidden sizes")
    p_sweep.add_argument("--report", required=True, help="report JSON output path")
    p_sweep.add_argument("--seed", type=int, default=0)
    p_sweep.set_defaults(func=_cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except CloudSentryError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return RUNTIME_EXIT


if __name__ == "__main__":
    sys.exit(main())
