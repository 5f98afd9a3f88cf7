"""Training and inference loops.

Training visits minibatches of training queries, picks an ordering per
query with a linearly decaying epsilon-greedy policy (uniform random action
with probability epsilon, otherwise the memory's current best), scores the
resulting prompt, and max-writes the reward into the episodic memory. Each
visit is a one-step episode: the return is just the reward. Inference reads
the memory (kNN-weighted) to order demonstrations for unseen queries, and
the evaluator compares that policy against the fixed heuristic orderings.
"""

from __future__ import annotations

import csv
import io
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .actions import Action, action_key, enumerate_actions, identity_action, reorder, reversal_action
from .encoder import Embedding, EncoderBackend
from .errors import InvalidInputError, PoemError
from .memory import EpisodicMemory, StateRecord
from .prompts import PromptSpec, build_prompt
from .selection import Example, InContextSet, retrieval_text, select_examples

EXPLORATION_MODES = ("epsilon_greedy", "exhaustive")

BASELINES = ("poem", "descending", "ascending", "random", "zero_shot")

DEFAULT_IN_FLIGHT = 4


@dataclass(frozen=True)
class TrainConfig:
    iterations: int = 60
    minibatch_size: int = 16
    epsilon_initial: float = 1.0
    epsilon_final: float = 0.0001
    m: int = 4
    k: int = 10
    seed: int = 0
    exploration_mode: str = "epsilon_greedy"
    in_flight: int = DEFAULT_IN_FLIGHT  # concurrent reward queries per minibatch

    def __post_init__(self):
        if self.iterations < 1:
            raise InvalidInputError("iterations must be >= 1")
        if self.minibatch_size < 1:
            raise InvalidInputError("minibatch_size must be >= 1")
        if not (0.0 <= self.epsilon_final <= self.epsilon_initial <= 1.0):
            raise InvalidInputError(
                "need 0 <= epsilon_final <= epsilon_initial <= 1, got "
                f"{self.epsilon_final} / {self.epsilon_initial}"
            )
        if self.m < 1:
            raise InvalidInputError("m must be >= 1")
        if self.k < 1:
            raise InvalidInputError("k must be >= 1")
        if self.exploration_mode not in EXPLORATION_MODES:
            raise InvalidInputError(
                f"exploration_mode must be one of {EXPLORATION_MODES}, "
                f"got {self.exploration_mode!r}"
            )
        if self.in_flight < 1:
            raise InvalidInputError("in_flight must be >= 1")


def epsilon_at(t: int, cfg: TrainConfig) -> float:
    """Linearly decayed epsilon at iteration t (epsilon_initial at 0, epsilon_final at N).

    Evaluated as the convex blend eps_i*(1-t/N) + eps_f*(t/N), which is
    algebraically the straight-line decay but keeps both endpoints exact in
    floating point.
    """
    if not 0 <= t <= cfg.iterations:
        raise InvalidInputError(f"t={t} outside 0..{cfg.iterations}")
    frac = t / cfg.iterations
    return cfg.epsilon_initial * (1.0 - frac) + cfg.epsilon_final * frac


def epsilon_greedy(
    rng: np.random.Generator,
    epsilon: float,
    actions: Sequence[Action],
    exploit: Callable[[], Action],
) -> tuple[Action, bool]:
    """Uniform random action with probability epsilon, else exploit().

    Returns (action, explored). Consumes one uniform draw always and one
    integer draw only on exploration, so downstream draws stay aligned.
    """
    if rng.random() < epsilon:
        return actions[int(rng.integers(len(actions)))], True
    return exploit(), False


class RewardOracle(Protocol):
    """Scores one constructed episode; backends: LM client or synthetic env."""

    id: str

    def reward(self, *, prompt: str, state: Embedding, ordered: Sequence[Example],
               truth: str | None) -> float: ...


@dataclass
class RunReport:
    """What a training run did, in numbers. Timing is excluded from the
    deterministic JSON form so reports from identical seeds compare byte-equal."""

    seed: int
    iterations: int
    exploration_mode: str
    mean_reward_per_iteration: list[float]
    fill_ratio_per_iteration: list[float]
    final_fill_ratio: float
    states_stored: int
    writes: int
    wall_clock_seconds: float
    note: str | None = None

    def to_dict(self, *, include_timing: bool = False) -> dict:
        doc = {
            "seed": self.seed,
            "iterations": self.iterations,
            "exploration_mode": self.exploration_mode,
            "mean_reward_per_iteration": self.mean_reward_per_iteration,
            "fill_ratio_per_iteration": self.fill_ratio_per_iteration,
            "final_fill_ratio": self.final_fill_ratio,
            "states_stored": self.states_stored,
            "writes": self.writes,
        }
        if self.note:
            doc["note"] = self.note
        if include_timing:
            doc["wall_clock_seconds"] = self.wall_clock_seconds
        return doc

    def to_json(self, *, include_timing: bool = False) -> str:
        return json.dumps(self.to_dict(include_timing=include_timing), indent=2, sort_keys=True)


def _state_records(
    samples: Sequence[Example], ic: InContextSet, encoder: EncoderBackend
) -> list[StateRecord]:
    texts = [retrieval_text(x.fields, ic.retrieval_fields) for x in samples]
    embeddings = encoder.encode(texts)
    return [StateRecord.from_text(t, e) for t, e in zip(texts, embeddings)]


def _with_context(exc: PoemError, context: str) -> PoemError:
    clone = type(exc)(f"{context}: {exc}")
    clone.__dict__.update(exc.__dict__)
    return clone


def _score_jobs(oracle: RewardOracle, jobs: list[dict], in_flight: int) -> list[float]:
    def one(job: dict) -> float:
        try:
            return float(
                oracle.reward(
                    prompt=job["prompt"],
                    state=job["record"].embedding,
                    ordered=job["ordered"],
                    truth=job["truth"],
                )
            )
        except PoemError as exc:
            # failures carry where they happened; earlier writes stay intact
            raise _with_context(exc, job["context"]) from exc

    if in_flight <= 1 or len(jobs) <= 1:
        return [one(job) for job in jobs]
    with ThreadPoolExecutor(max_workers=in_flight) as pool:
        return list(pool.map(one, jobs))


def train(
    cfg: TrainConfig,
    d_train: Sequence[Example],
    ic: InContextSet,
    encoder: EncoderBackend,
    oracle: RewardOracle,
    memory: EpisodicMemory,
    prompt_spec: PromptSpec,
    *,
    on_iteration: Callable[[int, EpisodicMemory], None] | None = None,
) -> tuple[EpisodicMemory, RunReport]:
    """Fill the episodic memory from training queries.

    epsilon_greedy mode follows the decaying policy over cfg.iterations
    minibatches (sampled uniformly without replacement, reshuffled each
    iteration). exhaustive mode instead sweeps every (state, action) pair
    exactly once; that is a harness extension for coverage-guaranteed tests,
    not the published procedure, and the report says so. Action choices for
    a minibatch are made up front against the batch-start memory; scoring
    may run concurrently (cfg.in_flight) and writes land in sample order.
    """
    if not d_train:
        raise InvalidInputError("training set is empty")
    if memory.m != cfg.m:
        raise InvalidInputError(f"memory.m={memory.m} but cfg.m={cfg.m}")
    actions = enumerate_actions(cfg.m)
    records = _state_records(d_train, ic, encoder)
    denominator = min(len(d_train), memory.capacity) * len(actions)
    started = time.perf_counter()
    mean_rewards: list[float] = []
    fill_ratios: list[float] = []
    writes = 0
    note = None

    if cfg.exploration_mode == "exhaustive":
        note = (
            "exhaustive sweep over every (state, action) pair; "
            "harness extension, not the epsilon-greedy procedure"
        )
        for block, (sample, record) in enumerate(zip(d_train, records)):
            t_s = select_examples(record.embedding, ic, cfg.m)
            jobs = []
            for a in actions:
                ordered = reorder(t_s, a)
                jobs.append(
                    {
                        "record": record,
                        "action": a,
                        "ordered": ordered,
                        "prompt": build_prompt(prompt_spec, ordered, sample.fields),
                        "truth": sample.label,
                        "context": f"exhaustive sweep, state {block} (index {sample.index}), "
                                   f"action {action_key(a)}",
                    }
                )
            rewards = _score_jobs(oracle, jobs, cfg.in_flight)
            for job, r in zip(jobs, rewards):
                memory.write(job["record"], job["action"], r)
                writes += 1
            mean_rewards.append(float(np.mean(rewards)))
            fill_ratios.append(memory.filled_pairs() / denominator)
            if on_iteration is not None:
                on_iteration(block, memory)
    else:
        rng = np.random.default_rng(cfg.seed)
        batch_size = min(cfg.minibatch_size, len(d_train))
        for t in range(cfg.iterations):
            eps = epsilon_at(t, cfg)
            batch = rng.choice(len(d_train), size=batch_size, replace=False)
            jobs = []
            for idx in batch:
                sample = d_train[int(idx)]
                record = records[int(idx)]
                t_s = select_examples(record.embedding, ic, cfg.m)
                a, _ = epsilon_greedy(
                    rng, eps, actions, lambda: memory.best_action(record, cfg.k)
                )
                ordered = reorder(t_s, a)
                jobs.append(
                    {
                        "record": record,
                        "action": a,
                        "ordered": ordered,
                        "prompt": build_prompt(prompt_spec, ordered, sample.fields),
                        "truth": sample.label,
                        "context": f"iteration {t}, sample index {sample.index}",
                    }
                )
            rewards = _score_jobs(oracle, jobs, cfg.in_flight)
            for job, r in zip(jobs, rewards):
                memory.write(job["record"], job["action"], r)
                writes += 1
            mean_rewards.append(float(np.mean(rewards)))
            fill_ratios.append(memory.filled_pairs() / denominator)
            if on_iteration is not None:
                on_iteration(t, memory)

    report = RunReport(
        seed=cfg.seed,
        iterations=len(mean_rewards),
        exploration_mode=cfg.exploration_mode,
        mean_reward_per_iteration=mean_rewards,
        fill_ratio_per_iteration=fill_ratios,
        final_fill_ratio=fill_ratios[-1] if fill_ratios else 0.0,
        states_stored=len(memory),
        writes=writes,
        wall_clock_seconds=time.perf_counter() - started,
        note=note,
    )
    return memory, report


@dataclass(frozen=True)
class InferenceResult:
    action: Action
    ordered: tuple[Example, ...]
    prompt: str
    state_id: str


def infer(
    memory: EpisodicMemory,
    x_t: Example | dict[str, str],
    ic: InContextSet,
    encoder: EncoderBackend,
    cfg: TrainConfig,
    prompt_spec: PromptSpec,
) -> InferenceResult:
    """Order demonstrations for one query via memory reading and build its prompt.

    The prediction itself is left to the caller's LM backend. An empty
    memory falls back to the identity (descending-similarity) ordering.
    """
    fields = x_t.fields if isinstance(x_t, Example) else dict(x_t)
    text = retrieval_text(fields, ic.retrieval_fields)
    embedding = encoder.encode([text])[0]
    record = StateRecord.from_text(text, embedding)
    action = memory.best_action(record, cfg.k)
    t_s = select_examples(record.embedding, ic, cfg.m)
    ordered = reorder(t_s, action)
    prompt = build_prompt(prompt_spec, ordered, fields)
    return InferenceResult(
        action=action, ordered=tuple(ordered), prompt=prompt, state_id=record.state_id
    )


class EvalScorer(Protocol):
    """Scores one evaluation episode: reward plus task-metric correctness."""

    metric_name: str

    def score(self, *, prompt: str, state: Embedding, ordered: Sequence[Example],
              action: Action | None, truth: str | None) -> tuple[float, bool | None]: ...


@dataclass
class EvalRow:
    baseline: str
    mean_reward: float
    metric: float | None  # None when the metric does not apply (e.g. zero-shot match rate)
    n: int


@dataclass
class EvalReport:
    metric_name: str
    seed: int
    rows: list[EvalRow]

    def row(self, baseline: str) -> EvalRow:
        for r in self.rows:
            if r.baseline == baseline:
                return r
        raise KeyError(baseline)

    def to_dict(self) -> dict:
        return {
            "metric": self.metric_name,
            "seed": self.seed,
            "rows": [
                {
                    "baseline": r.baseline,
                    "mean_reward": r.mean_reward,
                    "metric": r.metric,
                    "n": r.n,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        ranked = sorted(self.rows, key=lambda r: -r.mean_reward)
        lines = [f"{'baseline':<12} {'mean_reward':>12} {self.metric_name:>14} {'n':>6}"]
        for r in ranked:
            metric = f"{r.metric:.4f}" if r.metric is not None else "-"
            lines.append(f"{r.baseline:<12} {r.mean_reward:>12.6f} {metric:>14} {r.n:>6}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["baseline", "mean_reward", self.metric_name, "n"])
        for r in self.rows:
            writer.writerow([r.baseline, repr(r.mean_reward), "" if r.metric is None else repr(r.metric), r.n])
        return buf.getvalue()


def evaluate(
    memory: EpisodicMemory,
    d_test: Sequence[Example],
    ic: InContextSet,
    encoder: EncoderBackend,
    cfg: TrainConfig,
    prompt_spec: PromptSpec,
    scorer: EvalScorer,
    *,
    baselines: Sequence[str] = BASELINES,
    seed: int = 0,
) -> EvalReport:
    """Score the memory-guided ordering against the heuristic baselines.

    Baselines: poem (memory reading), descending (identity action),
    ascending (reversal), random (seeded uniform action per query), and
    zero_shot (no demonstrations at all).
    """
    if not d_test:
        raise InvalidInputError("test set is empty")
    for name in baselines:
        if name not in BASELINES:
            raise InvalidInputError(f"unknown baseline {name!r}; pick from {BASELINES}")
    actions = enumerate_actions(cfg.m)
    records = _state_records(d_test, ic, encoder)
    selected = [select_examples(rec.embedding, ic, cfg.m) for rec in records]
    rng = np.random.default_rng(seed)
    rows = []
    for baseline in baselines:
        rewards: list[float] = []
        hits: list[bool] = []
        for sample, record, t_s in zip(d_test, records, selected):
            if baseline == "zero_shot":
                action: Action | None = None
                ordered: list[Example] = []
            else:
                if baseline == "poem":
                    action = memory.best_action(record, cfg.k)
                elif baseline == "descending":
                    action = identity_action(cfg.m)
                elif baseline == "ascending":
                    action = reversal_action(cfg.m)
                else:  # random
                    action = actions[int(rng.integers(len(actions)))]
                ordered = reorder(t_s, action)
            prompt = build_prompt(prompt_spec, ordered, sample.fields)
            reward, correct = scorer.score(
                prompt=prompt,
                state=record.embedding,
                ordered=ordered,
                action=action,
                truth=sample.label,
            )
            rewards.append(float(reward))
            if correct is not None:
                hits.append(bool(correct))
        rows.append(
            EvalRow(
                baseline=baseline,
                mean_reward=float(np.mean(rewards)),
                metric=float(np.mean(hits)) if hits else None,
                n=len(rewards),
            )
        )
    return EvalReport(metric_name=scorer.metric_name, seed=seed, rows=rows)


@dataclass
class AggregateRow:
    baseline: str
    mean_reward: float
    reward_std: float
    metric: float | None
    metric_std: float | None
    seeds: int


@dataclass
class AggregateReport:
    """Per-baseline mean and seed spread over several evaluation runs."""

    metric_name: str
    seeds: list[int]
    per_seed: list[EvalReport]
    rows: list[AggregateRow]

    def row(self, baseline: str) -> AggregateRow:
        for r in self.rows:
            if r.baseline == baseline:
                return r
        raise KeyError(baseline)

    def ranking(self) -> list[str]:
        """Baselines ordered by mean reward, best first."""
        return [r.baseline for r in sorted(self.rows, key=lambda r: -r.mean_reward)]

    def to_dict(self) -> dict:
        return {
            "metric": self.metric_name,
            "seeds": self.seeds,
            "rows": [
                {
                    "baseline": r.baseline,
                    "mean_reward": r.mean_reward,
                    "reward_std": r.reward_std,
                    "metric": r.metric,
                    "metric_std": r.metric_std,
                    "seeds": r.seeds,
                }
                for r in self.rows
            ],
            "per_seed": [rep.to_dict() for rep in self.per_seed],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        ranked = sorted(self.rows, key=lambda r: -r.mean_reward)
        lines = [
            f"{'baseline':<12} {'mean_reward':>12} {'+/-':>10} "
            f"{self.metric_name:>14} {'+/-':>10} {'seeds':>6}"
        ]
        for r in ranked:
            metric = f"{r.metric:.4f}" if r.metric is not None else "-"
            metric_std = f"{r.metric_std:.4f}" if r.metric_std is not None else "-"
            lines.append(
                f"{r.baseline:<12} {r.mean_reward:>12.6f} {r.reward_std:>10.6f} "
                f"{metric:>14} {metric_std:>10} {r.seeds:>6}"
            )
        return "\n".join(lines)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(
            ["baseline", "mean_reward", "reward_std", self.metric_name, "metric_std", "seeds"]
        )
        for r in self.rows:
            writer.writerow(
                [
                    r.baseline,
                    repr(r.mean_reward),
                    repr(r.reward_std),
                    "" if r.metric is None else repr(r.metric),
                    "" if r.metric_std is None else repr(r.metric_std),
                    r.seeds,
                ]
            )
        return buf.getvalue()


def aggregate_reports(reports: Sequence[EvalReport]) -> AggregateReport:
    """Combine per-seed evaluation reports into mean +/- spread rows."""
    if not reports:
        raise InvalidInputError("no reports to aggregate")
    metric_name = reports[0].metric_name
    baselines = [row.baseline for row in reports[0].rows]
    rows = []
    for baseline in baselines:
        rewards = [rep.row(baseline).mean_reward for rep in reports]
        metrics = [rep.row(baseline).metric for rep in reports]
        have_metric = [m for m in metrics if m is not None]
        ddof = 1 if len(reports) > 1 else 0
        rows.append(
            AggregateRow(
                baseline=baseline,
                mean_reward=float(np.mean(rewards)),
                reward_std=float(np.std(rewards, ddof=ddof)) if len(rewards) > 1 else 0.0,
                metric=float(np.mean(have_metric)) if have_metric else None,
                metric_std=(
                    float(np.std(have_metric, ddof=ddof)) if len(have_metric) > 1 else
                    (0.0 if have_metric else None)
                ),
                seeds=len(reports),
            )
        )
    return AggregateReport(
        metric_name=metric_name,
        seeds=[rep.seed for rep in reports],
        per_seed=list(reports),
        rows=rows,
    )
