"""Synthetic order-sensitive environment with an exact brute-force oracle.

Every algorithmic claim in this package can be checked offline against this
environment: it scores an ordering directly as a position-weighted sum of
query/demonstration affinities, so the optimal permutation is known in
closed form (rearrangement: sort affinities against the weights). With
strictly decreasing positive weights the unique noiseless optimum is the
identity action; flip the weights and the optimum reverses. Generated tasks
plant clustered embeddings so nearest-neighbor transfer from training
states to test states is meaningful.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .actions import Action, enumerate_actions
from .encoder import Embedding, cosine_similarity
from .errors import ConfigError, InvalidInputError
from .selection import Example, InContextSet

SCENARIO_VERSION = 1

PREFERENCES = ("descending", "ascending", "custom")


@dataclass(frozen=True)
class BiasLandscape:
    """How much each prompt slot matters, plus optional evaluation noise."""

    position_weights: tuple[float, ...]
    noise_sigma: float = 0.0
    seed: int = 0
    preference: str = "custom"

    def __post_init__(self):
        weights = tuple(float(w) for w in self.position_weights)
        if not weights:
            raise InvalidInputError("position_weights must be non-empty")
        if self.noise_sigma < 0:
            raise InvalidInputError("noise_sigma must be >= 0")
        if self.preference not in PREFERENCES:
            raise InvalidInputError(f"preference must be one of {PREFERENCES}")
        object.__setattr__(self, "position_weights", weights)

    @property
    def m(self) -> int:
        return len(self.position_weights)

    @classmethod
    def descending(cls, m: int, *, noise_sigma: float = 0.0, seed: int = 0) -> "BiasLandscape":
        """Slot 0 matters most: the identity (closest-first) action is optimal."""
        return cls(tuple(float(w) for w in range(m, 0, -1)), noise_sigma, seed, "descending")

    @classmethod
    def ascending(cls, m: int, *, noise_sigma: float = 0.0, seed: int = 0) -> "BiasLandscape":
        """Slot m-1 matters most: the reversal (farthest-first) action is optimal."""
        return cls(tuple(float(w) for w in range(1, m + 1)), noise_sigma, seed, "ascending")


def noiseless_reward(landscape: BiasLandscape, s: Embedding, ordered: Sequence[Example]) -> float:
    """Position-weighted sum of cosine affinities between the query and each slot."""
    if len(ordered) != landscape.m:
        raise InvalidInputError(
            f"landscape covers {landscape.m} slots but got {len(ordered)} examples"
        )
    total = 0.0
    for weight, example in zip(landscape.position_weights, ordered):
        total += weight * cosine_similarity(s, example.embedding)
    return total


def noise_component(landscape: BiasLandscape, s: Embedding, ordered: Sequence[Example]) -> float:
    """Seeded Gaussian noise, a pure function of (landscape, state, ordering)."""
    if landscape.noise_sigma == 0.0:
        return 0.0
    hasher = hashlib.blake2b(digest_size=8)
    hasher.update(struct.pack("<q", landscape.seed))
    hasher.update(s.values.tobytes())
    for example in ordered:
        hasher.update(struct.pack("<q", example.index))
    rng = np.random.default_rng(int.from_bytes(hasher.digest(), "little"))
    return float(rng.normal(0.0, landscape.noise_sigma))


def synth_reward(landscape: BiasLandscape, s: Embedding, ordered: Sequence[Example]) -> float:
    """Reward of presenting `ordered` for state s; deterministic even with noise."""
    base = noiseless_reward(landscape, s, ordered)
    if landscape.noise_sigma == 0.0:
        return base
    return base + noise_component(landscape, s, ordered)


def brute_force_best(
    landscape: BiasLandscape, s: Embedding, t_s: Sequence[Example]
) -> Action:
    """Exact noiseless argmax over all m! orderings; the test oracle.

    The supplied examples are canonicalized (descending similarity, ties by
    ascending index) first, so the result does not depend on their order.
    Exact ties go to the lexicographically smallest action.
    """
    if len(t_s) != landscape.m:
        raise InvalidInputError(
            f"landscape covers {landscape.m} slots but got {len(t_s)} examples"
        )
    sims = {ex.index: cosine_similarity(s, ex.embedding) for ex in t_s}
    canonical = sorted(t_s, key=lambda ex: (-sims[ex.index], ex.index))
    best = None
    best_value = -np.inf
    for action in enumerate_actions(landscape.m):
        value = 0.0
        for weight, rank in zip(landscape.position_weights, action.ranks):
            value += weight * sims[canonical[rank - 1].index]
        if best is None or value > best_value:
            best, best_value = action, value
    return best


class PlantedEncoder:
    """Returns pre-assigned vectors by exact text; the generated tasks' encoder."""

    def __init__(self, table: dict[str, Embedding], id: str = "planted"):
        if not table:
            raise InvalidInputError("planted encoder needs a non-empty table")
        self._table = dict(table)
        self.id = id

    def encode(self, texts: Sequence[str]) -> list[Embedding]:
        out = []
        for text in texts:
            emb = self._table.get(text)
            if emb is None:
                raise InvalidInputError(f"no planted embedding for text {text!r}")
            out.append(emb)
        return out


@dataclass
class SyntheticTask:
    """A fully generated train/ic/test split with planted embeddings."""

    seed: int
    landscape: BiasLandscape
    train: list[Example]
    ic: InContextSet
    test: list[Example]
    encoder: PlantedEncoder
    label_space: tuple[str, ...]

    @property
    def m(self) -> int:
        return self.landscape.m


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def generate_task(
    seed: int,
    sizes: dict[str, int],
    g_labels: int,
    *,
    dim: int = 16,
    m: int = 4,
    landscape: BiasLandscape | None = None,
    cluster_spread: float = 0.25,
    test_spread: float = 0.1,
) -> SyntheticTask:
    """Deterministically build a clustered synthetic task.

    One unit-sphere cluster per label; train and in-context examples scatter
    around their label's center with `cluster_spread`, and each test state is
    a `test_spread` perturbation of a random training state, so its nearest
    stored neighbors share its local reward structure.
    """
    for key in ("train", "ic", "test"):
        if key not in sizes or int(sizes[key]) < 1:
            raise InvalidInputError(f"sizes[{key!r}] must be a positive integer")
    if g_labels < 1:
        raise InvalidInputError("g_labels must be >= 1")
    if landscape is None:
        landscape = BiasLandscape.descending(m)
    if landscape.m != m:
        raise InvalidInputError(
            f"landscape covers {landscape.m} slots but m={m} was requested"
        )

    rng = np.random.default_rng(seed)
    labels = tuple(f"g{i}" for i in range(g_labels))
    centers = [_unit(rng.standard_normal(dim)) for _ in range(g_labels)]

    def sample_near(center: np.ndarray, spread: float) -> Embedding:
        return Embedding(_unit(center + spread * rng.standard_normal(dim)))

    table: dict[str, Embedding] = {}

    def make(split: str, i: int, label: str, emb: Embedding) -> Example:
        text = f"{split} sample {i:03d} ({label})"
        table[text] = emb
        return Example(index=i, fields={"text": text}, label=label, embedding=emb)

    train = []
    for i in range(int(sizes["train"])):
        label = labels[i % g_labels]
        train.append(make("train", i, label, sample_near(centers[i % g_labels], cluster_spread)))

    ic_examples = []
    for i in range(int(sizes["ic"])):
        label = labels[i % g_labels]
        ic_examples.append(make("ic", i, label, sample_near(centers[i % g_labels], cluster_spread)))

    test = []
    for i in range(int(sizes["test"])):
        anchor = train[int(rng.integers(len(train)))]
        test.append(make("test", i, anchor.label, sample_near(anchor.embedding.values, test_spread)))

    ic = InContextSet(
        examples=ic_examples,
        retrieval_fields=["text"],
        label_space=labels if g_labels > 1 else None,
    )
    return SyntheticTask(
        seed=seed,
        landscape=landscape,
        train=train,
        ic=ic,
        test=test,
        encoder=PlantedEncoder(table, id=f"planted:seed={seed}"),
        label_space=labels,
    )


# -- scenario files ----------------------------------------------------------


def load_scenario(path: str | Path) -> dict:
    """Read and validate a scenario JSON document."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"{path}: no such scenario file") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: scenario must be a JSON object")
    if doc.get("version") != SCENARIO_VERSION:
        raise ConfigError(
            f"{path}: unsupported scenario version {doc.get('version')!r} "
            f"(this build reads version {SCENARIO_VERSION})"
        )
    for key, kind in (("seed", int), ("dim", int), ("labels", int), ("m", int)):
        if not isinstance(doc.get(key), kind) or isinstance(doc.get(key), bool):
            raise ConfigError(f"{path}: field {key!r} must be {kind.__name__}")
    sizes = doc.get("sizes")
    if not isinstance(sizes, dict) or set(sizes) < {"train", "ic", "test"}:
        raise ConfigError(f"{path}: 'sizes' must map train/ic/test to integers")
    land = doc.get("landscape")
    if not isinstance(land, dict):
        raise ConfigError(f"{path}: 'landscape' must be an object")
    preference = land.get("preference", "custom")
    if preference not in PREFERENCES:
        raise ConfigError(f"{path}: landscape.preference must be one of {PREFERENCES}")
    if preference == "custom" and not isinstance(land.get("position_weights"), list):
        raise ConfigError(
            f"{path}: a custom landscape needs an explicit 'position_weights' list"
        )
    return doc


def landscape_from_scenario(doc: dict) -> BiasLandscape:
    land = doc["landscape"]
    m = int(doc["m"])
    sigma = float(land.get("noise_sigma", 0.0))
    seed = int(land.get("seed", doc["seed"]))
    preference = land.get("preference", "custom")
    if "position_weights" in land:
        weights = tuple(float(w) for w in land["position_weights"])
        if len(weights) != m:
            raise ConfigError(
                f"landscape.position_weights has {len(weights)} entries, scenario m={m}"
            )
        return BiasLandscape(weights, sigma, seed, preference)
    if preference == "descending":
        return BiasLandscape.descending(m, noise_sigma=sigma, seed=seed)
    if preference == "ascending":
        return BiasLandscape.ascending(m, noise_sigma=sigma, seed=seed)
    raise ConfigError("custom landscape requires 'position_weights'")


def task_from_scenario(source: str | Path | dict) -> SyntheticTask:
    """Build the SyntheticTask a scenario file describes."""
    doc = source if isinstance(source, dict) else load_scenario(source)
    return generate_task(
        seed=int(doc["seed"]),
        sizes={k: int(v) for k, v in doc["sizes"].items()},
        g_labels=int(doc["labels"]),
        dim=int(doc["dim"]),
        m=int(doc["m"]),
        landscape=landscape_from_scenario(doc),
        cluster_spread=float(doc.get("cluster_spread", 0.25)),
        test_spread=float(doc.get("test_spread", 0.1)),
    )


# -- engine adapters ---------------------------------------------------------


class SyntheticOracle:
    """RewardOracle over the landscape: scores the ordering, ignores the prompt."""

    def __init__(self, landscape: BiasLandscape):
        self.landscape = landscape
        self.id = f"synthetic:{landscape.preference}"

    def reward(self, *, prompt: str, state: Embedding, ordered: Sequence[Example],
               truth: str | None) -> float:
        return synth_reward(self.landscape, state, ordered)


class SyntheticEvalScorer:
    """Evaluation scorer: noiseless reward plus agreement with the exact optimum."""

    metric_name = "optimal_match"

    def __init__(self, landscape: BiasLandscape):
        self.landscape = landscape

    def score(self, *, prompt: str, state: Embedding, ordered: Sequence[Example],
              action: Action | None, truth: str | None) -> tuple[float, bool | None]:
        if not ordered:  # zero-shot: no slots, no signal
            return 0.0, None
        reward = noiseless_reward(self.landscape, state, ordered)
        best = brute_force_best(self.landscape, state, ordered)
        return reward, action == best
