"""Command line entry point.

Subcommands: ``sample-formats``, ``run``, ``analyze``, ``plot-data``,
``convert-task``.  Settings come from built-in defaults, then a JSON config
file (``--config``), then explicit flags, later sources winning.  Any
failure prints a JSON error record to stderr and exits nonzero.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from dataclasses import dataclass, field, fields
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .analysis import (
    AccuracyTable, atomic_change_histogram, constant_dissimilarity, flip_probability,
    ordered_format_pairs, spread, spread_gain, write_tidy_csv,
)
from .bandit import ALGORITHMS, THOMPSON, SearchConfig, run_search
from .client import EvaluatorConfig, RemoteModel, make_model
from .errors import ConfigurationError, PromptSpreadError
from .evaluator import ModelEvaluator
from .grammar import ConstantSets, changed_groups, draw_formats, format_from_dict, format_to_dict, load_format
from .io import (
    canonical_json, config_hash, load_task, provenance, read_json, summary_row, task_to_dict,
    write_report, write_summary,
)
from .metrics import METRICS, PREFIX, centered_mass, read_records
from .prompts import DEFAULT_JOINER

log = logging.getLogger("promptspread")

EXIT_ERROR = 1
EXIT_UNEXPECTED = 3


@dataclass
class RunConfig:
    tasks: list[str] = field(default_factory=list)
    recipe: str | None = None
    evaluator: EvaluatorConfig = field(default_factory=EvaluatorConfig)
    metric: str = PREFIX
    n_shots: int = 1
    K: int = 10
    E: int = 2000
    B: int = 20
    algorithm: str = THOMPSON
    ucb_c: float = 2.0
    x0: float | None = None
    seed: int = 0
    output_dir: str = "out"
    verify: bool = False
    constants: str | None = None
    joiner: str = DEFAULT_JOINER

    def __post_init__(self):
        if isinstance(self.evaluator, dict):
            self.evaluator = EvaluatorConfig(**self.evaluator)
        if isinstance(self.tasks, str):
            self.tasks = [self.tasks]
        if not self.tasks:
            raise ConfigurationError("no task files given")
        if self.metric not in METRICS:
            raise ConfigurationError(f"metric must be one of {METRICS}")
        for name in ("K", "E", "B"):
            if getattr(self, name) < 1:
                raise ConfigurationError(f"{name} must be positive")
        if self.n_shots < 0:
            raise ConfigurationError("n_shots must be non-negative")

    def search_config(self) -> SearchConfig:
        return SearchConfig(E=self.E, B=self.B, algorithm=self.algorithm, ucb_c=self.ucb_c,
                            x0=self.x0, seed=self.seed, verify=self.verify, K=self.K)

    def to_dict(self) -> dict:
        out = {f.name: getattr(self, f.name) for f in fields(self) if f.name != "evaluator"}
        out["evaluator"] = self.evaluator.to_dict()
        return out

    def hash_input(self) -> dict:
        """Settings that determine results (the output location does not)."""
        out = self.to_dict()
        out.pop("output_dir")
        return out


def _sets(path: str | None) -> ConstantSets:
    return ConstantSets.load(path) if path else ConstantSets()


def run(cfg: RunConfig, transport=None) -> list[dict]:
    """Sample formats, search, and write artifacts for every task in ``cfg``."""
    out_dir = Path(cfg.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    prov = provenance(cfg.seed, cfg.hash_input())
    sets = _sets(cfg.constants)
    extra = {"transport": transport} if cfg.evaluator.kind == "remote" else {}
    model = make_model(cfg.evaluator, **extra)
    rows = []
    for task_path in cfg.tasks:
        task = load_task(task_path, cfg.recipe)
        rng = np.random.default_rng(cfg.seed)
        sample = draw_formats(task.original_format, sets, rng, cfg.K, include_original=True)
        formats = sample.formats
        evaluator = ModelEvaluator(task, formats, model, cfg.metric, cfg.n_shots, cfg.joiner,
                                   cfg.evaluator.parallelism)
        calls_before = model.calls
        report = run_search(evaluator, cfg.search_config(),
                            format_ids=[f.format_id for f in formats], formats=formats)
        report.provenance = dict(prov, task_id=task.task_id, sampling={
            "attempts": sample.attempts, "rejected_invalid": sample.rejected_invalid,
            "rejected_duplicate": sample.rejected_duplicate,
            "rejection_rate": sample.rejection_rate})
        if report.budget["spent"] > cfg.E:
            raise PromptSpreadError("search overspent its budget")
        stem = out_dir / task.task_id
        write_report(f"{stem}.report.json", report)
        with open(f"{stem}.records.jsonl", "w", encoding="utf-8") as fh:
            fh.write(canonical_json({"provenance": prov}) + "\n")
            for rec in evaluator.records:
                fh.write(rec.to_json() + "\n")
        row = summary_row(task.task_id, report)
        if isinstance(model, RemoteModel):
            # kept out of the artifacts so a warm-cache rerun reproduces them exactly
            row["remote_calls"] = model.calls - calls_before
        rows.append(row)
        log.info("task %s: estimated spread %s", task.task_id, report.estimated_spread)
    write_summary(out_dir / "summary.csv", rows)
    if hasattr(model, "close"):
        model.close()
    return rows


# --- config merging --------------------------------------------------------

_RUN_FLAGS = ("recipe", "metric", "n_shots", "K", "E", "B", "algorithm", "ucb_c", "x0", "seed",
              "output_dir", "verify", "constants")
_EVAL_FLAGS = {"evaluator_kind": "kind", "endpoint": "endpoint", "model": "model",
               "cache": "cache_path", "parallelism": "parallelism", "max_retries": "max_retries",
               "timeout": "timeout", "max_tokens": "max_tokens", "eval_seed": "seed"}


def build_run_config(args: argparse.Namespace) -> RunConfig:
    data: dict = read_json(args.config) if args.config else {}
    if not isinstance(data, dict):
        raise ConfigurationError("config file must hold a JSON object")
    unknown = set(data) - {f.name for f in fields(RunConfig)}
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    evaluator = dict(data.get("evaluator", {}))
    if args.task:
        data["tasks"] = args.task
    for name in _RUN_FLAGS:
        value = getattr(args, name)
        if value is not None:
            data[name] = value
    for flag, key in _EVAL_FLAGS.items():
        value = getattr(args, flag)
        if value is not None:
            evaluator[key] = value
    data["evaluator"] = evaluator
    return RunConfig(**data)


# --- subcommands -----------------------------------------------------------

def cmd_run(args) -> int:
    rows = run(build_run_config(args))
    print(json.dumps(rows, sort_keys=True, ensure_ascii=False))
    return 0


def cmd_sample_formats(args) -> int:
    if args.task:
        fmt = load_task(args.task, args.recipe).original_format
    elif args.format:
        fmt = load_format(args.format)
    else:
        raise ConfigurationError("give --task or --format")
    rng = np.random.default_rng(args.seed)
    sample = draw_formats(fmt, _sets(args.constants), rng, args.K, include_original=True)
    meta = {"seed": args.seed, "K": args.K, "config_hash": config_hash(
        {"seed": args.seed, "K": args.K, "constants": args.constants}), "version": __version__}
    lines = [canonical_json({"provenance": meta})]
    lines += [canonical_json({"format_id": f.format_id, "format": format_to_dict(f)})
              for f in sample.formats]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    print(json.dumps({"formats": len(sample.formats), "attempts": sample.attempts,
                      "rejection_rate": sample.rejection_rate}), file=sys.stderr)
    return 0


def _load_records(paths):
    records = []
    for p in paths:
        records.extend(read_records(p))
    if not records:
        raise ConfigurationError("no evaluation records found")
    return records


def _strata(table: AccuracyTable) -> dict[tuple, dict[str, float]]:
    out: dict[tuple, dict[str, float]] = {}
    for (fid, model, k, metric), (acc, _) in table.rows.items():
        out.setdefault((model, k, metric), {})[fid] = acc
    return out


def cmd_analyze(args) -> int:
    records = _load_records(args.records)
    table = AccuracyTable.from_records(records)
    rows = []
    for key, accs in sorted(_strata(table).items(), key=lambda kv: str(kv[0])):
        label = "|".join(str(k) for k in key)
        values = list(accs.values())
        rows.append({"analysis": "spread", "key": label, "value": spread(values)})
        rows.append({"analysis": "n_formats", "key": label, "value": len(values)})
        rows.append({"analysis": "mean_accuracy", "key": label, "value": float(np.mean(values))})
        subset = [r for r in records if (r.model, r.n_shots, r.metric) == key]
        rows.append({"analysis": "centered_mass", "key": label, "value": centered_mass(subset)})
    for path in args.report or []:
        rep = read_json(path)
        for name in ("estimated_spread", "spread"):
            rows.append({"analysis": f"report_{name}", "key": Path(path).name, "value": rep.get(name)})
    _emit_csv(args.out, rows)
    return 0


def _emit_csv(out, rows):
    if out:
        write_tidy_csv(out, rows)
    else:
        cols = ["analysis", "key", "value"]
        for r in rows:
            cols += [c for c in r if c not in cols]
        w = csv.DictWriter(sys.stdout, fieldnames=cols, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)


def cmd_plot_data(args) -> int:
    records = _load_records(args.records)
    table = AccuracyTable.from_records(records)
    strata = _strata(table)
    formats = {}
    for path in args.report or []:
        for arm in read_json(path).get("arms", []):
            if "format" in arm:
                formats[arm["format_id"]] = format_from_dict(arm["format"])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    rows = [{"analysis": "accuracy", "key": "|".join(map(str, key)), "value": acc, "format_id": fid}
            for key, accs in sorted(strata.items(), key=lambda kv: str(kv[0]))
            for fid, acc in sorted(accs.items())]
    write_tidy_csv(out / "spread.csv", rows)

    box_rows, atomic_rows, gain_rows = [], [], []
    for key, accs in sorted(strata.items(), key=lambda kv: str(kv[0])):
        label = "|".join(map(str, key))
        known = [fid for fid in sorted(accs) if fid in formats]
        if known:
            for gid in formats[known[0]].groups():
                groups: dict[str, list[float]] = {}
                for fid in known:
                    groups.setdefault(formats[fid].groups()[gid].value, []).append(accs[fid])
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore")
                    diss = constant_dissimilarity(groups, min_size=args.min_group)
                for value, box in diss.boxes.items():
                    box_rows.append({"analysis": "box", "key": label, "value": box.median,
                                     "group": gid, "constant": value, "q1": box.q1, "q3": box.q3,
                                     "lo_whisker": box.lo_whisker, "hi_whisker": box.hi_whisker,
                                     "weak_pairs": len([p for p in diss.weak if value in p]),
                                     "strong_pairs": len([p for p in diss.strong if value in p])})
            pairs = [(accs[a], accs[b]) for a, b in combinations(known, 2)
                     if len(changed_groups(formats[a], formats[b])) == 1]
            if pairs:
                for t, p in atomic_change_histogram(pairs):
                    atomic_rows.append({"analysis": "atomic_exceedance", "key": label,
                                        "value": p, "threshold": t})
        values = [accs[f] for f in sorted(accs)]
        for k1 in (2, 5):
            for k2 in range(k1 + 1, len(values) + 1):
                gain_rows.append({"analysis": "spread_gain", "key": label, "k1": k1, "k2": k2,
                                  "d": args.d, "value": spread_gain(values, k1, k2, args.d,
                                                                     args.trials, rng)})
    write_tidy_csv(out / "dissimilarity.csv", box_rows)
    write_tidy_csv(out / "atomic.csv", atomic_rows)
    write_tidy_csv(out / "spread_gain.csv", gain_rows)

    flip_rows = []
    by_shots: dict[tuple, dict] = {}
    for (model, k, metric), accs in strata.items():
        by_shots.setdefault((k, metric), {})[model] = accs
    for (k, metric), models in sorted(by_shots.items(), key=lambda kv: str(kv[0])):
        for m1, m2 in combinations(sorted(models, key=str), 2):
            shared = sorted(set(models[m1]) & set(models[m2]))
            paired = ordered_format_pairs([models[m1][f] for f in shared],
                                          [models[m2][f] for f in shared])
            for d in np.round(np.arange(0, 0.51, 0.05), 2):
                flip_rows.append({"analysis": "flip_probability", "key": f"{m1}|{m2}|{k}|{metric}",
                                  "d": float(d), "value": flip_probability(paired, float(d))})
    write_tidy_csv(out / "flip.csv", flip_rows)
    print(json.dumps({"written": sorted(p.name for p in out.glob("*.csv"))}))
    return 0


def cmd_convert_task(args) -> int:
    task = load_task(args.input, args.recipe)
    text = json.dumps(task_to_dict(task), ensure_ascii=False, indent=2, sort_keys=True) + "\n"
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="promptspread", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--log-level", default="WARNING")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("sample-formats", help="sample equivalent formats")
    s.add_argument("--task")
    s.add_argument("--recipe")
    s.add_argument("--format", help="format JSON file")
    s.add_argument("--K", type=int, default=10)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--constants", help="constant pools JSON")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sample_formats)

    r = sub.add_parser("run", help="estimate a task's performance spread")
    r.add_argument("--config")
    r.add_argument("--task", action="append", help="task file (repeatable)")
    r.add_argument("--recipe")
    r.add_argument("--metric", choices=METRICS)
    r.add_argument("--n-shots", dest="n_shots", type=int)
    r.add_argument("--K", type=int)
    r.add_argument("--E", type=int)
    r.add_argument("--B", type=int)
    r.add_argument("--algorithm", choices=ALGORITHMS)
    r.add_argument("--ucb-c", dest="ucb_c", type=float)
    r.add_argument("--x0", type=float)
    r.add_argument("--seed", type=int)
    r.add_argument("--out", dest="output_dir")
    r.add_argument("--verify", action="store_true", default=None)
    r.add_argument("--constants")
    r.add_argument("--evaluator", dest="evaluator_kind", choices=("synthetic", "remote"))
    r.add_argument("--endpoint")
    r.add_argument("--model")
    r.add_argument("--cache")
    r.add_argument("--parallelism", type=int)
    r.add_argument("--max-retries", dest="max_retries", type=int)
    r.add_argument("--timeout", type=float)
    r.add_argument("--max-tokens", dest="max_tokens", type=int)
    r.add_argument("--eval-seed", dest="eval_seed", type=int, help="synthetic model seed")
    r.set_defaults(func=cmd_run)

    a = sub.add_parser("analyze", help="summary statistics from evaluation records")
    a.add_argument("--records", nargs="+", required=True)
    a.add_argument("--report", nargs="*")
    a.add_argument("--out")
    a.set_defaults(func=cmd_analyze)

    d = sub.add_parser("plot-data", help="tidy CSV series for plotting")
    d.add_argument("--records", nargs="+", required=True)
    d.add_argument("--report", nargs="*")
    d.add_argument("--out", required=True)
    d.add_argument("--d", type=float, default=0.05)
    d.add_argument("--trials", type=int, default=100)
    d.add_argument("--min-group", dest="min_group", type=int, default=5)
    d.add_argument("--seed", type=int, default=0)
    d.set_defaults(func=cmd_plot_data)

    c = sub.add_parser("convert-task", help="convert a task file to native JSON")
    c.add_argument("input")
    c.add_argument("--recipe")
    c.add_argument("--out")
    c.set_defaults(func=cmd_convert_task)
    return p


def error_record(exc: BaseException) -> dict:
    kind = getattr(exc, "kind", "unexpected")
    return {"error": {"kind": kind, "type": type(exc).__name__, "message": str(exc)}}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except PromptSpreadError as exc:
        code = EXIT_ERROR
        record = error_record(exc)
    except Exception as exc:  # noqa: BLE001 - every failure becomes an error record
        log.debug("unexpected failure", exc_info=True)
        code = EXIT_UNEXPECTED
        record = error_record(exc)
    print(json.dumps(record, ensure_ascii=False), file=sys.stderr)
    out_dir = getattr(args, "output_dir", None)
    if out_dir:
        Path(out_dir).mkdir(parents=True, exist_ok=True)
        (Path(out_dir) / "error.json").write_text(json.dumps(record, ensure_ascii=False) + "\n",
                                                   encoding="utf-8")
    return code


if __name__ == "__main__":
    sys.exit(main())
