"""Seeded ground-truth corruption: MCAR removal, multiplicative noise, label flips.

Plans are drawn from a SplitMix64 stream so that any implementation can
reproduce them bit for bit from ``(n, kind, ratio, factor, seed)``:

* ``state += 0x9E3779B97F4A7C15``; output is the usual SplitMix64 finalizer.
* ``below(m)`` draws a u64 ``x`` and rejects it while ``x < (2**64 - m) % m``,
  then returns ``x % m``.
* The affected set is the first ``k`` slots of a partial Fisher-Yates shuffle
  of ``0..n-1`` (slot ``i`` swaps with ``i + below(n - i)``), then sorted.
  ``k = floor(ratio * n + 0.5)``.
* Label flips use a second stream seeded with ``seed ^ FLIP_STREAM_SALT`` and
  walk the sorted affected indices, replacing ``y`` with
  ``(y + 1 + below(C - 1)) % C``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, ShapeMismatchError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15
FLIP_STREAM_SALT = 0xD1B54A32D192ED03

KINDS = ("mcar", "multiplicative", "label_flip")


class SplitMix64:
    def __init__(self, seed: int):
        self.state = int(seed) & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN_GAMMA) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
        return z ^ (z >> 31)

    def below(self, m: int) -> int:
        """Unbiased integer in ``[0, m)``."""
        if m <= 0:
            raise InvalidInputError("upper bound must be positive")
        threshold = ((1 << 64) - m) % m
        while True:
            x = self.next_u64()
            if x >= threshold:
                return x % m


def affected_count(n: int, ratio: float) -> int:
    return int(math.floor(ratio * n + 0.5))


@dataclass(frozen=True)
class CorruptionPlan:
    kind: str
    ratio: float
    factor: float
    seed: int
    n: int
    affected_indices: tuple

    def to_json(self) -> str:
        doc = {
            "kind": self.kind,
            "ratio": self.ratio,
            "factor": self.factor,
            "seed": self.seed,
            "n": self.n,
            "affected_indices": list(self.affected_indices),
        }
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> "CorruptionPlan":
        doc = json.loads(text)
        plan = cls(doc["kind"], float(doc["ratio"]), float(doc["factor"]),
                   int(doc["seed"]), int(doc["n"]),
                   tuple(int(i) for i in doc["affected_indices"]))
        idx = plan.affected_indices
        if list(idx) != sorted(set(idx)) or (idx and (idx[0] < 0 or idx[-1] >= plan.n)):
            raise InvalidInputError("affected_indices must be sorted, unique and in range")
        return plan

    def mask(self) -> np.ndarray:
        """Boolean array, True where the entry is affected."""
        out = np.zeros(self.n, dtype=bool)
        out[list(self.affected_indices)] = True
        return out


def plan_corruption(n: int, kind: str, ratio: float, factor: float = 1.0,
                    seed: int = 0) -> CorruptionPlan:
    if kind not in KINDS:
        raise InvalidInputError(f"unknown corruption kind {kind!r}")
    if n < 0:
        raise InvalidInputError("n must be non-negative")
    if not 0.0 <= ratio <= 1.0:
        raise InvalidInputError(f"ratio must lie in [0, 1], got {ratio}")
    k = affected_count(n, ratio)
    rng = SplitMix64(seed)
    slots = list(range(n))
    for i in range(k):
        j = i + rng.below(n - i)
        slots[i], slots[j] = slots[j], slots[i]
    return CorruptionPlan(kind, float(ratio), float(factor), int(seed) & MASK64, n,
                          tuple(sorted(slots[:k])))


def _check_plan(plan: CorruptionPlan, kind: str, n: int):
    if plan.kind != kind:
        raise InvalidInputError(f"expected a {kind} plan, got {plan.kind}")
    if plan.n != n:
        raise ShapeMismatchError(f"plan sized for {plan.n} rows, data has {n}")


@dataclass(frozen=True)
class MaskedDataset:
    """Features plus targets, with removed targets marked absent.

    ``mask`` is True where the target is present. Absent rows of ``targets``
    hold NaN for float targets and -1 for integer targets.
    """

    samples: np.ndarray
    targets: np.ndarray
    mask: np.ndarray

    def unmask(self, original_targets) -> "MaskedDataset":
        original_targets = np.asarray(original_targets)
        targets = self.targets.copy()
        targets[~self.mask] = original_targets[~self.mask]
        return MaskedDataset(self.samples, targets, np.ones_like(self.mask))


def _missing_value(targets: np.ndarray):
    return -1 if np.issubdtype(targets.dtype, np.integer) else np.nan


def apply_mcar(samples, targets, plan: CorruptionPlan) -> MaskedDataset:
    samples = np.asarray(samples)
    targets = np.array(targets, copy=True)
    if samples.shape[0] != targets.shape[0]:
        raise ShapeMismatchError("samples and targets differ in length")
    _check_plan(plan, "mcar", targets.shape[0])
    present = ~plan.mask()
    targets[~present] = _missing_value(targets)
    return MaskedDataset(samples, targets, present)


def apply_multiplicative_noise(targets, plan: CorruptionPlan) -> np.ndarray:
    targets = np.array(targets, dtype=np.float64, copy=True)
    _check_plan(plan, "multiplicative", targets.shape[0])
    idx = list(plan.affected_indices)
    targets[idx] = targets[idx] * plan.factor
    return targets


def apply_label_flip(labels, plan: CorruptionPlan, num_classes: int) -> np.ndarray:
    """Move each affected label to a uniformly drawn different class."""
    if num_classes < 2:
        raise InvalidInputError("label flipping needs at least 2 classes")
    labels = np.array(labels, dtype=np.int64, copy=True)
    _check_plan(plan, "label_flip", labels.shape[0])
    rng = SplitMix64(plan.seed ^ FLIP_STREAM_SALT)
    for i in plan.affected_indices:
        labels[i] = (labels[i] + 1 + rng.below(num_classes - 1)) % num_classes
    return labels
