"""Task files in, reports out.

Native task JSON::

    {"task_id": str, "instruction": str, "format": <format>,
     "answer_mode": "text" | "label", "option_labels": [str]?, "label_offsets": [int]?,
     "instances": [{"id": str, "field_values": [str], "gold": str, "options": [str]?}],
     "fewshot": [<instance>]?, "metadata": {}?}

Super-NaturalInstructions files (``Definition``, ``Positive Examples``,
``Instances``) are converted with a recipe::

    {"format": <format>, "pattern": regex?, "option_groups": [int | str]?,
     "options": [str]?, "gold_labels": [str]?, "answer_mode": "text" | "label",
     "option_labels": [str]?, "instruction": str?,
     "fewshot": {"count": int, "seed": int, "source": "positive" | "instances"}?}

``pattern`` splits an instance's input into fields (its capture groups, in
order); groups named in ``option_groups`` become the options instead.
``gold_labels`` maps an output label such as "B" to the option at the same
index.  Without a recipe an input is taken as one text field, which is only
allowed when it does not look like several labelled fields.
"""
from __future__ import annotations

import csv
import hashlib
import json
import logging
import re
from pathlib import Path
from typing import Mapping

import numpy as np

from . import __version__
from .errors import ConversionError, GrammarError, LoadError
from .grammar import Format, field, format_from_dict, format_to_dict, join, make_format, text
from .prompts import MAX_INSTANCES, DataInstance, TaskSpec

log = logging.getLogger(__name__)

# a line opening with "Label:" suggests the input holds several fields
_LABELLED_LINE = re.compile(r"(?m)^[A-Za-z][\w ]{0,30}:\s")


def read_json(path: str | Path):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise LoadError(f"no such file: {path}") from exc
    except json.JSONDecodeError as exc:
        raise LoadError(f"invalid JSON in {path}: {exc}") from exc


def _need(obj, key, kind, where):
    if not isinstance(obj, dict):
        raise LoadError("expected an object", where)
    if key not in obj:
        raise LoadError(f"missing required key {key!r}", where)
    value = obj[key]
    if not isinstance(value, kind):
        raise LoadError(f"expected {getattr(kind, '__name__', kind)}", f"{where}.{key}")
    return value


def _str_list(value, where) -> list[str]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise LoadError("expected a list of strings", where)
    return value


def _instance(raw, where) -> DataInstance:
    iid = _need(raw, "id", (str, int), where)
    values = _str_list(_need(raw, "field_values", list, where), f"{where}.field_values")
    gold = _need(raw, "gold", str, where)
    options = _str_list(raw.get("options", []), f"{where}.options")
    if options and gold not in options:
        raise LoadError(f"gold {gold!r} is not among the options", f"{where}.gold")
    try:
        return DataInstance(str(iid), tuple(values), gold, tuple(options))
    except LoadError as exc:
        raise LoadError(str(exc).split(": ", 1)[-1], where) from exc


def _format(raw, where) -> Format:
    try:
        return format_from_dict(raw)
    except GrammarError as exc:
        raise LoadError(f"invalid format: {exc}", where) from exc


def _truncate(instances: list, task_id: str) -> list:
    if len(instances) > MAX_INSTANCES:
        log.info("task %s: truncating %d instances to the first %d",
                 task_id, len(instances), MAX_INSTANCES)
        return instances[:MAX_INSTANCES]
    return instances


def task_from_dict(data: Mapping) -> TaskSpec:
    task_id = str(_need(data, "task_id", (str, int), "$"))
    instruction = _need(data, "instruction", str, "$")
    fmt = _format(_need(data, "format", dict, "$"), "$.format")
    raw = _need(data, "instances", list, "$")
    instances = _truncate([_instance(r, f"$.instances[{i}]") for i, r in enumerate(raw)], task_id)
    fewshot = [_instance(r, f"$.fewshot[{i}]") for i, r in enumerate(data.get("fewshot", []))]
    labels = data.get("option_labels")
    if labels is not None:
        _str_list(labels, "$.option_labels")
    mode = data.get("answer_mode", "text")
    try:
        return TaskSpec(task_id, instruction, tuple(instances), fmt, tuple(fewshot),
                        option_labels=labels, label_offsets=data.get("label_offsets"),
                        answer_mode=mode, metadata=dict(data.get("metadata", {})))
    except LoadError as exc:
        raise LoadError(str(exc).split(": ", 1)[-1], "$") from exc


def task_to_dict(task: TaskSpec) -> dict:
    out = {
        "task_id": task.task_id, "instruction": task.instruction,
        "format": format_to_dict(task.original_format), "answer_mode": task.answer_mode,
        "instances": [i.to_dict() for i in task.instances],
        "fewshot": [i.to_dict() for i in task.fewshot],
    }
    if task.option_labels is not None:
        out["option_labels"] = list(task.option_labels)
    if task.label_offsets is not None:
        out["label_offsets"] = list(task.label_offsets)
    if task.metadata:
        out["metadata"] = task.metadata
    return out


def is_sni(data) -> bool:
    return isinstance(data, dict) and "Instances" in data and "Definition" in data


def _default_format() -> Format:
    return make_format(join([text(), field("Answer", ": ")], "\n"))


def _convert_example(raw, recipe, where, iid=None) -> DataInstance:
    inp = _need(raw, "input", str, where)
    out = raw.get("output")
    if isinstance(out, list):
        if not out or not isinstance(out[0], str):
            raise LoadError("expected a non-empty list of output strings", f"{where}.output")
        out = out[0]
    if not isinstance(out, str):
        raise LoadError("expected an output string", f"{where}.output")

    options = list(recipe.get("options", []))
    if recipe.get("pattern"):
        m = re.fullmatch(recipe["pattern"], inp.strip(), flags=re.DOTALL)
        if m is None:
            raise ConversionError("input does not match the recipe pattern", f"{where}.input")
        opt_groups = recipe.get("option_groups", [])
        keys = list(range(1, (m.re.groups or 0) + 1))
        names = {v: k for k, v in m.re.groupindex.items()}
        is_opt = lambda k: k in opt_groups or names.get(k) in opt_groups  # noqa: E731
        values = [m.group(k).strip() for k in keys if not is_opt(k)]
        if opt_groups:
            options = [m.group(g).strip() for g in opt_groups]
    else:
        if _LABELLED_LINE.search(inp) and "\n" in inp.strip():
            raise ConversionError(
                "input looks like several labelled fields; a recipe with a pattern is needed",
                f"{where}.input")
        values = [inp.strip()]

    gold = out.strip()
    if recipe.get("gold_labels"):
        labels = recipe["gold_labels"]
        if gold not in labels:
            raise LoadError(f"output {gold!r} is not one of the labels {labels}", f"{where}.output")
        if len(options) < len(labels):
            raise ConversionError("fewer options than gold labels", where)
        gold = options[labels.index(gold)]
    if options and gold not in options:
        raise LoadError(f"gold {gold!r} is not among the options", f"{where}.output")
    iid = str(raw.get("id", iid if iid is not None else where))
    return DataInstance(iid, tuple(values), gold, tuple(options))


def convert_sni(data: Mapping, recipe: Mapping | None = None, task_id: str | None = None) -> TaskSpec:
    """Build a TaskSpec from a Super-NaturalInstructions task and a recipe."""
    recipe = dict(recipe or {})
    definition = data.get("Definition")
    if isinstance(definition, list):
        definition = definition[0] if definition else ""
    instruction = recipe.get("instruction", definition)
    if not isinstance(instruction, str):
        raise LoadError("expected a definition string", "$.Definition")
    fmt = _format(recipe["format"], "recipe.format") if "format" in recipe else _default_format()
    raw = _need(data, "Instances", list, "$")
    instances = [_convert_example(r, recipe, f"$.Instances[{i}]") for i, r in enumerate(raw)]

    spec = recipe.get("fewshot", {})
    count = int(spec.get("count", 0))
    fewshot: list[DataInstance] = []
    if count:
        if spec.get("source", "positive") == "positive":
            pos = data.get("Positive Examples", [])
            fewshot = [_convert_example(r, recipe, f"$.Positive Examples[{i}]", iid=f"pos-{i}")
                       for i, r in enumerate(pos[:count])]
            if len(fewshot) < count:
                raise ConversionError(f"only {len(fewshot)} positive examples for {count} shots")
        else:
            rng = np.random.default_rng(spec.get("seed", 0))
            picked = sorted(int(i) for i in rng.choice(len(instances), size=count, replace=False))
            fewshot = [instances[i] for i in picked]
            instances = [x for i, x in enumerate(instances) if i not in set(picked)]

    tid = task_id or str(data.get("task_id", recipe.get("task_id", "task")))
    instances = _truncate(instances, tid)
    mode = recipe.get("answer_mode", "text")
    labels = recipe.get("option_labels", recipe.get("gold_labels") if mode == "label" else None)
    try:
        return TaskSpec(tid, instruction, tuple(instances), fmt, tuple(fewshot),
                        option_labels=labels, answer_mode=mode,
                        metadata={"source": "super-natural-instructions"})
    except LoadError as exc:
        raise ConversionError(str(exc).split(": ", 1)[-1]) from exc


def load_task(path: str | Path, recipe: Mapping | str | Path | None = None) -> TaskSpec:
    """Read a native task file, or a Super-NaturalInstructions file plus recipe."""
    data = read_json(path)
    if isinstance(recipe, (str, Path)):
        recipe = read_json(recipe)
    if is_sni(data):
        return convert_sni(data, recipe, task_id=Path(path).stem)
    return task_from_dict(data)


# --- reports ---------------------------------------------------------------

def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":"))


def config_hash(cfg: Mapping) -> str:
    return hashlib.sha256(canonical_json(cfg).encode("utf-8")).hexdigest()[:16]


def provenance(seed, cfg: Mapping) -> dict:
    return {"seed": seed, "config_hash": config_hash(cfg), "version": __version__}


def dumps_report(report) -> str:
    """Stable JSON: sorted keys, fixed indentation, no clock values."""
    data = report.to_dict() if hasattr(report, "to_dict") else report
    return json.dumps(data, sort_keys=True, ensure_ascii=False, indent=2) + "\n"


def write_report(path: str | Path, report) -> None:
    Path(path).write_text(dumps_report(report), encoding="utf-8")


SUMMARY_COLUMNS = ("task_id", "algorithm", "K", "E", "spent", "best_format_id", "worst_format_id",
                   "best_estimate", "worst_estimate", "estimated_spread", "best_accuracy",
                   "worst_accuracy", "spread", "seed", "config_hash", "version")


def summary_row(task_id: str, report) -> dict:
    arms = report.arms
    fid = lambda i: arms[i]["format_id"] if i is not None else None  # noqa: E731
    prov = report.provenance
    return {
        "task_id": task_id, "algorithm": report.algorithm, "K": len(arms),
        "E": report.budget["E"], "spent": report.budget["spent"],
        "best_format_id": fid(report.best_arm), "worst_format_id": fid(report.worst_arm),
        "best_estimate": report.best_estimate, "worst_estimate": report.worst_estimate,
        "estimated_spread": report.estimated_spread, "best_accuracy": report.best_accuracy,
        "worst_accuracy": report.worst_accuracy, "spread": report.spread,
        "seed": prov.get("seed"), "config_hash": prov.get("config_hash"),
        "version": prov.get("version"),
    }


def write_summary(path: str | Path, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
        w.writeheader()
        for row in rows:
            w.writerow({k: ("" if row.get(k) is None else row[k]) for k in SUMMARY_COLUMNS})
