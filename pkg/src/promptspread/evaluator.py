"""Per-(format, instance) evaluation used by the search.

An evaluator scores arm ``i`` on instances given by their position in the
task's fixed instance order and counts every data-point evaluation it makes.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Sequence

import numpy as np

from .client import EvalContext, scores_for, synthetic_oracle_row
from .errors import ConfigurationError, EvaluationError
from .grammar import Format
from .metrics import PREFIX, RANKING, EvalRecord, matches_any_option, prefix_match, ranking_score
from .prompts import TaskSpec, answer_options, answer_text, build_prompt


class OracleEvaluator:
    """Bernoulli arms with known accuracies, no prompts involved.

    Outcome of arm ``i`` on instance ``j`` is
    ``synthetic_oracle_draw(i, j, true_accs[i], seed)``.
    """

    def __init__(self, true_accs: Sequence[float], n_instances: int = 1000, seed=0):
        self.true_accs = [float(a) for a in true_accs]
        self.n_arms = len(self.true_accs)
        self.n_instances = n_instances
        self.seed = seed
        self.evaluations = 0
        self.verification_evaluations = 0
        self._outcomes: dict[int, np.ndarray] = {}

    def fresh(self) -> "OracleEvaluator":
        """Same outcome table with zeroed counters, for rerunning a search."""
        twin = OracleEvaluator(self.true_accs, self.n_instances, self.seed)
        twin._outcomes = self._outcomes
        return twin

    def _row(self, arm: int) -> np.ndarray:
        row = self._outcomes.get(arm)
        if row is None:
            row = synthetic_oracle_row(arm, self.n_instances, self.true_accs[arm], self.seed)
            self._outcomes[arm] = row
        return row

    def evaluate(self, arm: int, positions: Sequence[int]) -> list[int]:
        self.evaluations += len(positions)
        row = self._row(arm)
        return [int(row[p]) for p in positions]

    def full_accuracy(self, arm: int) -> float:
        """Accuracy over every instance; counted apart from the search budget."""
        self.verification_evaluations += self.n_instances
        return float(self._row(arm).mean())

    def true_sample_accuracies(self) -> list[float]:
        return [float(self._row(a).mean()) for a in range(self.n_arms)]


class ModelEvaluator:
    """Evaluates formats on a task through a model (remote or synthetic)."""

    def __init__(self, task: TaskSpec, formats: Sequence[Format], model, metric: str = PREFIX,
                 n_shots: int = 1, joiner: str = "\n\n", parallelism: int = 1,
                 keep_records: bool = True):
        if metric not in (PREFIX, RANKING):
            raise ConfigurationError(f"unknown metric {metric!r}")
        if n_shots > len(task.fewshot):
            raise ConfigurationError(
                f"{n_shots}-shot evaluation but task has {len(task.fewshot)} exemplars")
        self.task = task
        self.formats = list(formats)
        self.model = model
        self.metric = metric
        self.n_shots = n_shots
        self.joiner = joiner
        self.parallelism = parallelism
        self.n_arms = len(self.formats)
        self.n_instances = len(task.instances)
        self.evaluations = 0
        self.verification_evaluations = 0
        self.keep_records = keep_records
        self.records: list[EvalRecord] = []
        self._memo: dict[tuple[int, int], EvalRecord] = {}

    def _score(self, arm: int, position: int) -> EvalRecord:
        fmt = self.formats[arm]
        inst = self.task.instances[position]
        prompt = build_prompt(self.task, fmt, self.n_shots, inst, self.joiner)
        gold = answer_text(self.task, fmt, inst)
        options = answer_options(self.task, fmt, inst) if inst.options else []
        ctx = EvalContext(fmt.format_id, inst.id, gold, tuple(options))
        model_id = getattr(self.model, "model_id", None)
        if self.metric == RANKING:
            if len(options) < 2:
                raise EvaluationError(f"instance {inst.id!r} has fewer than two options to rank")
            scores = dict(scores_for(self.model, prompt, options, ctx))
            outcome = ranking_score(scores, gold, options)
            return EvalRecord(fmt.format_id, inst.id, RANKING, outcome, 1,
                              option_scores=scores, model=model_id, n_shots=self.n_shots)
        response = self.model.generate(prompt, ctx)
        outcome = prefix_match(response, gold)
        valid = matches_any_option(response, options) if options else outcome
        return EvalRecord(fmt.format_id, inst.id, PREFIX, outcome, valid,
                          response=response, model=model_id, n_shots=self.n_shots)

    def _score_many(self, arm: int, positions: Sequence[int]) -> list[EvalRecord]:
        todo = [p for p in positions if (arm, p) not in self._memo]
        if self.parallelism > 1 and len(todo) > 1:
            with ThreadPoolExecutor(self.parallelism) as pool:
                done = list(pool.map(lambda p: self._score(arm, p), todo))
        else:
            done = [self._score(arm, p) for p in todo]
        for p, rec in zip(todo, done):
            self._memo[(arm, p)] = rec
        return [self._memo[(arm, p)] for p in positions]

    def evaluate(self, arm: int, positions: Sequence[int]) -> list[int]:
        self.evaluations += len(positions)
        records = self._score_many(arm, positions)
        if self.keep_records:
            self.records.extend(records)
        return [r.outcome for r in records]

    def full_accuracy(self, arm: int) -> float:
        positions = range(self.n_instances)
        fresh = sum((arm, p) not in self._memo for p in positions)
        self.verification_evaluations += fresh
        records = self._score_many(arm, list(positions))
        return sum(r.outcome for r in records) / len(records)
