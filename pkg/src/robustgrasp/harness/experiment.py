"""Paired baseline-vs-robust training sweeps."""

from __future__ import annotations

import itertools
import json
import time
from dataclasses import dataclass, field, replace

import numpy as np

from ..corruption import (
    apply_label_flip,
    apply_mcar,
    apply_multiplicative_noise,
    plan_corruption,
)
from ..errors import ConfigError, RobustGraspError
from ..losses import MissingLossConfig, NoisyLossConfig
from ..model import LOSS_MODES, TrainConfig, evaluate, train
from .data import (
    BlobParams,
    Dataset,
    GraspTaskParams,
    gen_blobs,
    gen_grasp_classification,
    rotation_bin,
)

TASKS = ("blobs_classification", "grasp_synthetic")

DEFAULT_METHODS = {
    "mcar": ("ce", "smoothed_missing"),
    "label_flip": ("ce", "smoothed_noisy"),
    "multiplicative": ("ce", "smoothed_noisy"),
}

# Sweep axis name -> (config section, field).
AXES = {
    "kappa1": ("corruption", "ratio"),
    "kappa2": ("corruption", "ratio"),
    "ratio": ("corruption", "ratio"),
    "epsilon": ("corruption", "factor"),
    "gamma": ("loss", "gamma"),
    "xi": ("loss", "xi"),
    "delta": ("loss", "delta"),
    "lambda1": ("loss", "lambda1"),
    "lambda2": ("loss", "lambda2"),
    "alpha1": ("loss", "alpha1"),
    "alpha2": ("loss", "alpha2"),
    "epochs": ("train", "epochs"),
    "batch_size": ("train", "batch_size"),
    "learning_rate": ("train", "learning_rate"),
    "warmup_epochs": ("train", "warmup_epochs"),
    "hidden_width": ("train", "hidden_width"),
    "n_train": ("data", "n_train"),
    "n_test": ("data", "n_test"),
    "classes": ("data", "classes"),
    "dimension": ("data", "dimension"),
    "cluster_spread": ("data", "cluster_spread"),
    "center_scale": ("data", "center_scale"),
}

INT_FIELDS = {"epochs", "batch_size", "warmup_epochs", "hidden_width", "n_train", "n_test",
              "classes", "dimension"}


@dataclass
class ExperimentConfig:
    """Everything a sweep needs; loaded from a single JSON document.

    Defaults describe the 3-class, 80-dimensional blobs task with 40% label
    flips used by the acceptance experiments.
    """

    task: str = "blobs_classification"
    data: dict = field(default_factory=lambda: {
        "n_train": 600, "n_test": 600, "classes": 3, "dimension": 80,
        "cluster_spread": 1.0, "center_scale": 0.4})
    corruption: dict = field(default_factory=lambda: {
        "kind": "label_flip", "ratio": 0.4, "factor": 1.0})
    train: dict = field(default_factory=lambda: {
        "epochs": 100, "batch_size": 32, "learning_rate": 0.1, "warmup_epochs": 10,
        "hidden_width": 0})
    loss: dict = field(default_factory=lambda: {
        "gamma": 0.95, "xi": 0.9, "lambda1": 1.0, "lambda2": 1.0, "delta": 0.8,
        "alpha1": 1.0, "alpha2": 1.0, "log_floor": -4.0, "literal_paper_smoothing": False})
    methods: list | None = None
    sweep: list = field(default_factory=list)
    seeds: list = field(default_factory=lambda: list(range(10)))
    record_wall_time: bool = False

    def __post_init__(self):
        if self.task not in TASKS:
            raise ConfigError(f"unknown task {self.task!r}")
        kind = self.corruption.get("kind")
        if kind not in DEFAULT_METHODS:
            raise ConfigError(f"unknown corruption kind {kind!r}")
        if kind == "multiplicative" and self.task != "grasp_synthetic":
            raise ConfigError("multiplicative noise needs continuous truths (grasp_synthetic)")
        if not self.seeds:
            raise ConfigError("at least one replicate seed is required")
        for axis in self.sweep:
            if len(axis) != 2 or axis[0] not in AXES or not axis[1]:
                raise ConfigError(f"bad sweep axis {axis!r}; known names: {sorted(AXES)}")
        if self.methods is not None:
            if len(self.methods) != 2 or any(m not in LOSS_MODES for m in self.methods):
                raise ConfigError(f"methods must be two of {LOSS_MODES}")

    @property
    def method_pair(self):
        return tuple(self.methods) if self.methods else DEFAULT_METHODS[self.corruption["kind"]]

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        base = cls()
        known = set(base.__dict__)
        unknown = set(doc) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        merged = {}
        for key in known:
            default = getattr(base, key)
            if isinstance(default, dict):
                merged[key] = {**default, **doc.get(key, {})}
            else:
                merged[key] = doc.get(key, default)
        return cls(**merged)

    @classmethod
    def from_json(cls, text: str) -> "ExperimentConfig":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from None
        return cls.from_dict(doc)

    def to_dict(self) -> dict:
        return {k: v for k, v in self.__dict__.items()}

    def with_values(self, values: dict) -> "ExperimentConfig":
        sections = {name: dict(getattr(self, name)) for name in ("data", "corruption", "train",
                                                                  "loss")}
        for name, value in values.items():
            section, key = AXES[name]
            sections[section][key] = int(value) if key in INT_FIELDS else value
            if name == "kappa1":
                sections["corruption"]["kind"] = "mcar"
        return replace(self, **sections)


@dataclass
class ResultRow:
    params: dict
    per_seed_baseline: list
    per_seed_robust: list
    seconds: float = 0.0

    @property
    def mean_acc_baseline(self) -> float:
        return float(np.mean(self.per_seed_baseline))

    @property
    def mean_acc_robust(self) -> float:
        return float(np.mean(self.per_seed_robust))

    @property
    def std_baseline(self) -> float:
        return _std(self.per_seed_baseline)

    @property
    def std_robust(self) -> float:
        return _std(self.per_seed_robust)


def _std(values) -> float:
    """Sample standard deviation; zero for a single replicate."""
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


def derive_seed(seed: int, stream: int) -> int:
    return int(np.random.SeedSequence([int(seed), stream]).generate_state(1, np.uint64)[0])


def _loss_configs(loss: dict):
    missing = MissingLossConfig(loss["gamma"], loss["xi"], loss["lambda1"], loss["lambda2"],
                                bool(loss.get("normalize_by_gated", False)))
    noisy = NoisyLossConfig(loss["delta"], loss["alpha1"], loss["alpha2"], loss["log_floor"],
                            bool(loss["literal_paper_smoothing"]))
    return missing, noisy


def make_train_config(cfg: ExperimentConfig, loss_mode: str, seed: int) -> TrainConfig:
    missing, noisy = _loss_configs(cfg.loss)
    t = cfg.train
    warmup = int(t["warmup_epochs"]) if loss_mode in ("pseudo", "smoothed_missing") else 0
    return TrainConfig(int(t["epochs"]), int(t["batch_size"]), float(t["learning_rate"]),
                       seed, min(warmup, int(t["epochs"])), int(t["hidden_width"]), loss_mode,
                       missing, noisy)


def generate_data(cfg: ExperimentConfig, seed: int):
    """Dataset plus train angles (None for blobs)."""
    if cfg.task == "blobs_classification":
        return gen_blobs(_params_for(BlobParams, cfg.data), seed), None
    return gen_grasp_classification(_params_for(GraspTaskParams, cfg.data), seed)


def _params_for(cls, values: dict):
    keys = cls.__dataclass_fields__
    return cls(**{k: v for k, v in values.items() if k in keys})


def corrupt_labels(cfg: ExperimentConfig, data: Dataset, angles, seed: int):
    """Training labels after corruption (-1 marks removed ground truth) and the plan."""
    c = cfg.corruption
    n = data.y_train.shape[0]
    plan = plan_corruption(n, c["kind"], float(c["ratio"]), float(c["factor"]), seed)
    return apply_plan(cfg, data, angles, plan), plan


def apply_plan(cfg: ExperimentConfig, data: Dataset, angles, plan) -> np.ndarray:
    if plan.kind == "mcar":
        return apply_mcar(data.x_train, data.y_train, plan).targets
    if plan.kind == "label_flip":
        return apply_label_flip(data.y_train, plan, int(cfg.data["classes"]))
    if angles is None:
        raise ConfigError("multiplicative noise needs the grasp task's angles")
    return rotation_bin(apply_multiplicative_noise(angles, plan), int(cfg.data["classes"]))


def run_cell(cfg: ExperimentConfig, seed: int):
    """Train both methods on identical data, plan and initialisation."""
    data, angles = generate_data(cfg, derive_seed(seed, 0))
    y_train, _ = corrupt_labels(cfg, data, angles, derive_seed(seed, 1))
    init_seed = derive_seed(seed, 2)
    accs = []
    for mode in cfg.method_pair:
        params, _ = train((data.x_train, y_train), (data.x_test, data.y_test),
                          make_train_config(cfg, mode, init_seed))
        accs.append(evaluate(params, data.x_test, data.y_test))
    return accs


def cells(cfg: ExperimentConfig):
    names = [axis[0] for axis in cfg.sweep]
    for combo in itertools.product(*[axis[1] for axis in cfg.sweep]):
        yield dict(zip(names, combo))


def run_experiment(cfg: ExperimentConfig) -> list:
    """Full factorial over the sweep axes; one row per cell, in sweep order."""
    rows = []
    for values in cells(cfg):
        cell_cfg = cfg.with_values(values)
        start = time.perf_counter()
        base, robust = [], []
        for seed in cfg.seeds:
            try:
                b, r = run_cell(cell_cfg, seed)
            except RobustGraspError as exc:
                raise type(exc)(f"cell {values} seed {seed}: {exc}") from exc
            base.append(b)
            robust.append(r)
        seconds = time.perf_counter() - start if cfg.record_wall_time else 0.0
        rows.append(ResultRow(values, base, robust, seconds))
    return rows

